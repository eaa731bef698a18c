//! The work behind each command-line subcommand. Every function returns
//! what it produced so callers (the binary, tests) can inspect it; all
//! files are written whole through a temporary sibling.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;

use crate::assessment::{self, AssessmentReport, ErrorMatrix, StratifiedDesign};
use crate::checkpoint::Checkpoint;
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::fsio;
use crate::pipeline::{self, TrainedSystem};
use crate::raster::{self, ClassScheme, MaskPolicy, SceneSeries};
use crate::reference_tables::{self, TableCheck};
use crate::sampling::{self, LabelMap, SampleClassifier, TrainingSplit};
use crate::synthetic::{self, SyntheticSpec};

pub const CONFIG_TEMPLATE_FILE: &str = "run.cfg";

fn scheme_for(k: usize) -> ClassScheme {
    if k == 8 {
        ClassScheme::everglades()
    } else {
        ClassScheme::generic(k)
    }
}

#[derive(Debug, Clone)]
pub struct SynthOutcome {
    pub manifest: PathBuf,
    pub truth: PathBuf,
    pub config: PathBuf,
    pub scenes: usize,
}

/// Writes a synthetic site under `out`, plus a run configuration that
/// points at it. `spec` is a key-value file; `None` uses the defaults.
pub fn synth(spec: Option<&Path>, out: &Path, seed: Option<u64>) -> Result<SynthOutcome> {
    let mut spec = match spec {
        Some(p) => SyntheticSpec::parse(&fsio::read_text(p)?, p.parent().unwrap_or(Path::new(".")))?,
        None => SyntheticSpec::default(),
    };
    if let Some(s) = seed {
        spec.seed = s;
    }
    let site = synthetic::generate_site(&spec)?;
    let scheme = scheme_for(spec.num_classes);
    let manifest = synthetic::write_site(out, &site, &scheme)?;
    let config = out.join(CONFIG_TEMPLATE_FILE);
    let text = format!(
        "# generated alongside the synthetic site; change `mode` to train another system\n\
         mode = pb-rnn\n\
         manifest = {}\n\
         labels = {}\n\
         output_dir = runs\n\
         num_classes = {}\n\
         scheme = {}\n\
         bands = {}\n\
         seq_len = {}\n\
         fusion_dates = {}\n",
        synthetic::MANIFEST_FILE,
        synthetic::TRUTH_FILE,
        spec.num_classes,
        scheme.name,
        spec.bands,
        spec.seq_len,
        default_fusion_dates(spec.seq_len)
    );
    fsio::write_atomic(&config, text.as_bytes())?;
    info!("wrote {} scenes to {}", site.scenes.len(), out.display());
    Ok(SynthOutcome {
        manifest,
        truth: out.join(synthetic::TRUTH_FILE),
        config,
        scenes: site.scenes.len(),
    })
}

/// Scenes 0, 2, 3 and the last, or the first four when the series is short.
fn default_fusion_dates(seq_len: usize) -> String {
    let dates: Vec<usize> = if seq_len > 4 {
        vec![0, 2, 3, seq_len - 1]
    } else {
        (0..seq_len).collect()
    };
    dates.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ImportedScene {
    pub dir: PathBuf,
    pub scene_id: String,
    pub contaminated: usize,
}

/// Converts every scene of a manifest to reflectance and stores it next
/// to the scene as a reflectance cache.
pub fn import(manifest: &Path, policy: MaskPolicy) -> Result<Vec<ImportedScene>> {
    let mut out = Vec::new();
    for dir in raster::read_manifest(manifest)? {
        let scene = raster::read_scene(&dir)?;
        let stack = raster::dn_to_toa(&scene, policy)?;
        raster::write_toa_cache(&dir, &stack)?;
        out.push(ImportedScene {
            scene_id: stack.meta.scene_id.clone(),
            contaminated: stack.contaminated_count(),
            dir,
        });
    }
    Ok(out)
}

/// Series, reference labels and the shared training split of a config.
pub struct RunData {
    pub series: SceneSeries,
    pub labels: LabelMap,
    pub split: TrainingSplit,
}

pub fn load_run_data(cfg: &RunConfig) -> Result<RunData> {
    cfg.require_paths()?;
    let series = raster::load_series(&cfg.manifest, cfg.mask_policy)?;
    let (labels, _) = LabelMap::read(&cfg.labels)?;
    if labels.width != series.width() || labels.height != series.height() {
        return Err(Error::shape(format!(
            "label map {}x{} vs scene series {}x{}",
            labels.width,
            labels.height,
            series.width(),
            series.height()
        )));
    }
    let split = pipeline::training_split(&series, &labels, cfg)?;
    info!("{} training and {} holdout locations", split.train.len(), split.holdout.len());
    Ok(RunData { series, labels, split })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleCacheOutcome {
    pub train: usize,
    pub holdout: usize,
    pub seq_len: usize,
    pub input_dim: usize,
}

/// Extracts the configured mode's training samples (and optionally its
/// holdout samples) into sample caches.
pub fn make_samples(cfg: &RunConfig, out: &Path, holdout_out: Option<&Path>) -> Result<SampleCacheOutcome> {
    let data = load_run_data(cfg)?;
    let sampler = cfg.sampler_for(cfg.mode);
    sampler.validate(&data.series)?;
    let (seq_len, input_dim) = (sampler.seq_len, sampler.input_dim());
    let train = sampling::build_samples(&data.series, &sampler, &data.split.train)?;
    sampling::write_sample_cache(out, &train, seq_len, input_dim)?;
    let mut holdout = 0;
    if let Some(path) = holdout_out {
        let h = sampling::build_samples(&data.series, &sampler, &data.split.holdout)?;
        sampling::write_sample_cache(path, &h, seq_len, input_dim)?;
        holdout = h.len();
    }
    Ok(SampleCacheOutcome {
        train: train.len(),
        holdout,
        seq_len,
        input_dim,
    })
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub checkpoint: PathBuf,
    pub loss_log: PathBuf,
    pub final_loss: f64,
    pub holdout_accuracy: Option<f64>,
    pub system: TrainedSystem,
}

pub fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.output_dir.join(format!("{}.ckpt", cfg.mode))
}

/// Per-epoch mean loss of every trained network, tab-separated.
pub fn loss_log(system: &TrainedSystem) -> String {
    let mut s = String::from("member\tepoch\tmean_loss\n");
    for (m, r) in system.reports.iter().enumerate() {
        for e in &r.history {
            let _ = writeln!(s, "{m}\t{}\t{:.10}", e.epoch, e.mean_loss);
        }
    }
    s
}

pub fn checkpoint_of(system: TrainedSystem, cfg: &RunConfig) -> Checkpoint {
    Checkpoint {
        system,
        init_seed: cfg.init_seed,
        scheme: cfg.scheme.clone(),
        mask_policy: cfg.mask_policy,
    }
}

/// Trains the configured mode and writes `<mode>.ckpt` and
/// `<mode>.loss.tsv` to the output directory. With `samples`, trains on
/// a sample cache instead of extracting samples again.
pub fn train(cfg: &RunConfig, samples: Option<&Path>) -> Result<TrainOutcome> {
    let data = load_run_data(cfg)?;
    let system = match samples {
        Some(path) => {
            let (cached, seq_len, input_dim) = sampling::read_sample_cache(path)?;
            let want = cfg.sampler_for(cfg.mode);
            if seq_len != want.seq_len || input_dim != want.input_dim() {
                return Err(Error::shape(format!(
                    "sample cache holds {seq_len}x{input_dim} samples, {} needs {}x{}",
                    cfg.mode,
                    want.seq_len,
                    want.input_dim()
                )));
            }
            pipeline::train_on_samples(cfg.mode, &cached, cfg)?
        }
        None => pipeline::train_system(&data.series, &data.split, cfg.mode, cfg)?,
    };
    let holdout_accuracy = if data.split.holdout.is_empty() {
        None
    } else {
        Some(system.accuracy(&data.series, &data.split.holdout)?)
    };
    let ckpt = checkpoint_of(system, cfg);
    let checkpoint = checkpoint_path(cfg);
    ckpt.save(&checkpoint)?;
    let loss_log_path = cfg.output_dir.join(format!("{}.loss.tsv", cfg.mode));
    fsio::write_atomic(&loss_log_path, loss_log(&ckpt.system).as_bytes())?;
    Ok(TrainOutcome {
        checkpoint,
        loss_log: loss_log_path,
        final_loss: ckpt.system.final_loss(),
        holdout_accuracy,
        system: ckpt.system,
    })
}

/// Applies a checkpoint to a series, writing the label map and, when
/// asked, a color preview.
pub fn classify(checkpoint: &Path, manifest: &Path, out: &Path, preview: Option<&Path>) -> Result<LabelMap> {
    let ckpt = Checkpoint::load(checkpoint)?;
    let series = raster::load_series(manifest, ckpt.mask_policy)?;
    let sampler = &ckpt.system.sampler;
    if series.bands() != sampler.bands {
        return Err(Error::shape(format!(
            "checkpoint expects {} bands, series has {}",
            sampler.bands,
            series.bands()
        )));
    }
    if let Some(&last) = sampler.scene_indices().iter().max() {
        if last >= series.len() {
            return Err(Error::shape(format!(
                "checkpoint reads scene {last}, series has {} scenes",
                series.len()
            )));
        }
    }
    let model_dim = ckpt.system.model.input_dim();
    if model_dim != sampler.input_dim() {
        return Err(Error::shape(format!(
            "model input {model_dim} vs sampler window {}",
            sampler.input_dim()
        )));
    }
    let map = ckpt.system.classify_map(&series)?;
    let scheme = ClassScheme::by_name(&ckpt.scheme, ckpt.num_classes());
    map.write(out, &scheme)?;
    if let Some(p) = preview {
        fsio::write_atomic(p, &map.to_ppm(&scheme))?;
    }
    Ok(map)
}

/// How `assess` obtains its error matrix.
#[derive(Debug, Clone)]
pub enum AssessInput {
    /// Draw a stratified sample from a classified and a reference map.
    Maps {
        classified: PathBuf,
        reference: PathBuf,
        /// Total sample size spread by area; `None` draws `min_per_stratum`
        /// from every stratum.
        total: Option<usize>,
        min_per_stratum: usize,
        seed: u64,
    },
    /// Read the counts directly.
    Matrix(PathBuf),
}

#[derive(Debug, Clone)]
pub struct AssessOutcome {
    pub matrix: ErrorMatrix,
    pub report: AssessmentReport,
    pub files: Vec<PathBuf>,
}

fn map_classes(a: &LabelMap, b: &LabelMap) -> usize {
    a.data
        .iter()
        .chain(&b.data)
        .filter(|&&v| v != sampling::NO_DATA)
        .map(|&v| v as usize + 1)
        .max()
        .unwrap_or(0)
}

/// Builds (or reads) an error matrix and writes `error_matrix.csv`,
/// `report.txt` and `stats.csv` under `out`.
pub fn assess(input: &AssessInput, out: &Path, title: &str) -> Result<AssessOutcome> {
    let matrix = match input {
        AssessInput::Matrix(p) => ErrorMatrix::read_csv(p)?,
        AssessInput::Maps {
            classified,
            reference,
            total,
            min_per_stratum,
            seed,
        } => {
            let (c, scheme_name) = LabelMap::read(classified)?;
            let (r, _) = LabelMap::read(reference)?;
            if (c.width, c.height) != (r.width, r.height) {
                return Err(Error::shape(format!(
                    "classified map {}x{} vs reference map {}x{}",
                    c.width, c.height, r.width, r.height
                )));
            }
            let mut k = map_classes(&c, &r);
            if scheme_name == ClassScheme::everglades().name {
                k = k.max(8);
            }
            let scheme = ClassScheme::by_name(&scheme_name, k);
            let design = match total {
                Some(n) => StratifiedDesign::area_weighted(&c, &r, k, *n, *min_per_stratum, *seed)?,
                None => StratifiedDesign::uniform(k, *min_per_stratum, *seed),
            };
            assessment::build_error_matrix(&c, &r, &design, scheme.names())?
        }
    };
    let report = assessment::full_report(&matrix)?;
    let files = vec![out.join("error_matrix.csv"), out.join("report.txt"), out.join("stats.csv")];
    matrix.write_csv(&files[0])?;
    fsio::write_atomic(&files[1], report.render(&matrix, title).as_bytes())?;
    fsio::write_atomic(&files[2], report.stats_csv().as_bytes())?;
    Ok(AssessOutcome { matrix, report, files })
}

/// Recomputes the bundled published tables; the error lists every
/// failing table.
pub fn verify_tables() -> Result<Vec<TableCheck>> {
    let checks = reference_tables::verify_all()?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name.as_str()).collect();
    if !failed.is_empty() {
        for c in &checks {
            log::error!("{}", c.summary_line());
        }
        return Err(Error::Verification(format!("mismatches in {}", failed.join(", "))));
    }
    Ok(checks)
}

#[derive(Debug, Clone)]
pub struct ComparisonOutcome {
    pub systems: Vec<(Mode, AssessmentReport)>,
    pub summary: String,
    pub summary_path: PathBuf,
}

/// Holdout error matrix of one trained system.
pub fn holdout_matrix(system: &TrainedSystem, data: &RunData, names: Vec<String>) -> Result<ErrorMatrix> {
    let predicted = system.classify_locations(&data.series, &data.split.holdout)?;
    let truth: Vec<usize> = data.split.holdout.iter().map(|l| l.label).collect();
    assessment::matrix_from_pairs(&predicted, &truth, names)
}

/// Trains all six systems on one shared split, assesses each on the
/// shared holdout locations and writes per-system matrices and reports
/// plus a side-by-side summary.
pub fn compare_all(cfg: &RunConfig) -> Result<ComparisonOutcome> {
    let data = load_run_data(cfg)?;
    let names = ClassScheme::by_name(&cfg.scheme, cfg.num_classes).names();
    if names.len() != cfg.num_classes {
        return Err(Error::config(
            "scheme",
            format!("{} names {} classes, config has {}", cfg.scheme, names.len(), cfg.num_classes),
        ));
    }
    let mut systems = Vec::with_capacity(Mode::ALL.len());
    for mode in Mode::ALL {
        let mut mode_cfg = cfg.clone();
        mode_cfg.mode = mode;
        let system = pipeline::train_system(&data.series, &data.split, mode, &mode_cfg)?;
        let matrix = holdout_matrix(&system, &data, names.clone())?;
        let report = assessment::full_report(&matrix)?;
        info!("{mode}: holdout OA {:.2}%", 100.0 * report.overall_accuracy);
        let dir = cfg.output_dir.join(mode.name());
        matrix.write_csv(&dir.join("error_matrix.csv"))?;
        let title = format!("Error matrix using the {mode} system");
        fsio::write_atomic(&dir.join("report.txt"), report.render(&matrix, &title).as_bytes())?;
        checkpoint_of(system, &mode_cfg).save(&dir.join(format!("{mode}.ckpt")))?;
        systems.push((mode, report));
    }
    let labelled: Vec<(String, AssessmentReport)> =
        systems.iter().map(|(m, r)| (m.name().to_string(), r.clone())).collect();
    let summary = assessment::render_summary(&labelled)?;
    let summary_path = cfg.output_dir.join("summary.txt");
    fsio::write_atomic(&summary_path, summary.as_bytes())?;
    Ok(ComparisonOutcome {
        systems,
        summary,
        summary_path,
    })
}
