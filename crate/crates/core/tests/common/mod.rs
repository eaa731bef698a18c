//! Checks shared by the integration suites and the acceptance runner.
//! Each returns an [`Outcome`] instead of panicking so the runner can
//! report every criterion.

#![allow(dead_code)]

use std::path::Path;
use std::time::Instant;

use pbrnn::baseline::{fuse_distributions, Activation, FfnParams};
use pbrnn::checkpoint::Checkpoint;
use pbrnn::commands;
use pbrnn::config::{Mode, RunConfig};
use pbrnn::math::{Rng, Vector};
use pbrnn::params::ParamSet;
use pbrnn::pipeline::{self, training_split};
use pbrnn::raster::{ClassScheme, SceneSeries};
use pbrnn::recurrent::{backward_sequence, forward_vectors, sample_loss, LstmConfig, LstmParams};
use pbrnn::reference_tables;
use pbrnn::sampling::{
    build_sample, decode_samples, encode_samples, extract_patch, select_training_locations, LabelMap,
    SampleSequence, SamplerConfig,
};
use pbrnn::synthetic::{self, generate, generate_site, SyntheticSpec};

#[derive(Debug, Clone)]
pub struct Outcome {
    pub passed: bool,
    pub detail: String,
}

impl Outcome {
    fn new(passed: bool, detail: impl Into<String>) -> Self {
        Outcome {
            passed,
            detail: detail.into(),
        }
    }

    fn fail(detail: impl Into<String>) -> Self {
        Self::new(false, detail)
    }
}

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Outcome::fail(format!($($msg)+));
        }
    };
}

macro_rules! try_or_fail {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(err) => return Outcome::fail(format!("{}: {err}", stringify!($e))),
        }
    };
}

// ---------------------------------------------------------------------------
// published tables

pub fn tables() -> Outcome {
    let t0 = Instant::now();
    let checks = try_or_fail!(reference_tables::verify_all());
    let elapsed = t0.elapsed();
    let values: usize = checks.iter().map(|c| c.values_checked).sum();
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed()).map(|c| c.summary_line()).collect();
    ensure!(failed.is_empty(), "{}", failed.join("; "));
    let pb = &reference_tables::published_tables()[0];
    let report = try_or_fail!(pbrnn::assessment::full_report(&pb.matrix()));
    ensure!(
        format!("{:.2}", 100.0 * report.overall_accuracy) == "97.21",
        "pb-rnn OA {}",
        report.overall_accuracy
    );
    ensure!(
        format!("{:.3}", report.overall_kappa.unwrap_or(f64::NAN)) == "0.967",
        "pb-rnn kappa {:?}",
        report.overall_kappa
    );
    ensure!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    Outcome::new(
        true,
        format!("{} tables + summary, {values} printed values reproduced in {elapsed:?}", checks.len() - 1),
    )
}

// ---------------------------------------------------------------------------
// gradients

pub const FD_STEP: f64 = 1e-5;
pub const FD_TOLERANCE: f64 = 1e-5;
/// Below this magnitude both gradients count as zero and are compared
/// absolutely, since a relative error of two round-off values is noise.
pub const FD_ZERO: f64 = 1e-7;

/// Relative discrepancy between an analytic and a numeric derivative.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs());
    if scale < FD_ZERO {
        if (analytic - numeric).abs() <= 1e-9 {
            0.0
        } else {
            f64::INFINITY
        }
    } else {
        (analytic - numeric).abs() / scale
    }
}

fn uniform(rng: &mut Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.next_f64()
}

fn random_vector(rng: &mut Rng, n: usize) -> Vector {
    (0..n).map(|_| uniform(rng, -1.0, 1.0)).collect::<Vec<_>>().into()
}

/// Central-difference check of every LSTM parameter for one seeded
/// instance; returns the worst relative error.
pub fn lstm_gradient_error(seed: u64) -> pbrnn::Result<f64> {
    let mut rng = Rng::seed(seed);
    let input_dim = 1 + rng.below(5);
    let hidden = 1 + rng.below(8);
    let classes = 2 + rng.below(3);
    let seq_len = 1 + rng.below(6);
    let use_bias = seed % 4 != 3;
    let mut cfg = LstmConfig::new(input_dim, hidden, classes, seq_len);
    cfg.use_bias = use_bias;
    let mut params = LstmParams::init(cfg, &mut rng)?;
    // randomize everything (biases included) so no gate sits at a special point
    let names = params.block_names();
    for (name, block) in names.iter().zip(params.blocks_mut()) {
        let is_bias = name.starts_with('b') && name != "by";
        for v in block.iter_mut() {
            *v = if is_bias && !use_bias { 0.0 } else { uniform(&mut rng, -0.6, 0.6) };
        }
    }
    let mut vectors: Vec<Vector> = (0..seq_len).map(|_| random_vector(&mut rng, input_dim)).collect();
    if seq_len > 1 && seed % 3 == 0 {
        // a masked datum
        vectors[rng.below(seq_len)] = Vector::zeros(input_dim);
    }
    let label = rng.below(classes);
    let trace = forward_vectors(&params, &vectors)?;
    let grads = backward_sequence(&params, &trace, label)?;

    let flat = params.to_flat();
    let analytic = grads.to_flat();
    let mut skip = vec![false; flat.len()];
    if !use_bias {
        // fixed biases: the analytic gradient must be exactly zero there
        let mut off = 0;
        for (name, block) in names.iter().zip(grads.blocks()) {
            if name.starts_with('b') && name != "by" {
                if block.iter().any(|&g| g != 0.0) {
                    return Ok(f64::INFINITY);
                }
                skip[off..off + block.len()].fill(true);
            }
            off += block.len();
        }
    }
    let mut probe = params.clone();
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        if skip[i] {
            continue;
        }
        let mut f = flat.clone();
        f[i] = flat[i] + FD_STEP;
        probe.load_flat(&f)?;
        let up = sample_loss(&probe, &vectors, label)?;
        f[i] = flat[i] - FD_STEP;
        probe.load_flat(&f)?;
        let down = sample_loss(&probe, &vectors, label)?;
        let numeric = (up - down) / (2.0 * FD_STEP);
        worst = worst.max(relative_error(analytic[i], numeric));
    }
    Ok(worst)
}

pub fn ffn_gradient_error(seed: u64) -> pbrnn::Result<f64> {
    let mut rng = Rng::seed(1000 + seed);
    let input_dim = 1 + rng.below(6);
    let hidden = 1 + rng.below(8);
    let classes = 2 + rng.below(3);
    let activation = if seed % 2 == 0 { Activation::Sigmoid } else { Activation::Tanh };
    let mut params = FfnParams::init_with_width(input_dim, hidden, classes, activation, &mut rng);
    for block in params.blocks_mut() {
        for v in block.iter_mut() {
            *v = uniform(&mut rng, -0.8, 0.8);
        }
    }
    let x = random_vector(&mut rng, input_dim);
    let label = rng.below(classes);
    let mut grads = params.zeros_like();
    params.loss_and_grad(&x, label, &mut grads)?;
    let flat = params.to_flat();
    let analytic = grads.to_flat();
    let mut probe = params.clone();
    let mut scratch = params.zeros_like();
    let mut worst: f64 = 0.0;
    for i in 0..flat.len() {
        let mut f = flat.clone();
        f[i] = flat[i] + FD_STEP;
        probe.load_flat(&f)?;
        let up = probe.loss_and_grad(&x, label, &mut scratch)?;
        f[i] = flat[i] - FD_STEP;
        probe.load_flat(&f)?;
        let down = probe.loss_and_grad(&x, label, &mut scratch)?;
        worst = worst.max(relative_error(analytic[i], (up - down) / (2.0 * FD_STEP)));
    }
    Ok(worst)
}

pub fn gradients(instances: u64) -> Outcome {
    let t0 = Instant::now();
    let mut worst_lstm: f64 = 0.0;
    let mut worst_ffn: f64 = 0.0;
    for seed in 0..instances {
        let e = try_or_fail!(lstm_gradient_error(seed));
        ensure!(e < FD_TOLERANCE, "LSTM instance {seed}: relative error {e:e}");
        worst_lstm = worst_lstm.max(e);
        let e = try_or_fail!(ffn_gradient_error(seed));
        ensure!(e < FD_TOLERANCE, "FFN instance {seed}: relative error {e:e}");
        worst_ffn = worst_ffn.max(e);
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    Outcome::new(
        true,
        format!(
            "{instances} LSTM + {instances} FFN instances, worst relative error {worst_lstm:.1e} / {worst_ffn:.1e} ({elapsed:?})"
        ),
    )
}

// ---------------------------------------------------------------------------
// synthetic-site experiments

/// Training budget used on the synthetic site.
pub fn experiment_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.hidden_dim = 32;
    cfg.forget_bias = 1.0;
    cfg.adam.alpha = 5e-4;
    cfg.train.batch_size = 32;
    cfg.train.epochs = RNN_EPOCHS;
    cfg.train.log_every = 0;
    cfg.max_train_per_class = Some(300);
    cfg.sampler.seed = seed;
    cfg
}

pub const RNN_EPOCHS: usize = 40;
pub const FFN_EPOCHS: usize = 200;

pub fn experiment_spec(seed: u64, cloud_fraction: f64) -> SyntheticSpec {
    SyntheticSpec {
        seed,
        cloud_fraction,
        ..SyntheticSpec::default()
    }
}

/// Holdout accuracy of each requested mode on one synthetic site.
pub fn holdout_accuracies(seed: u64, cloud_fraction: f64, modes: &[Mode]) -> pbrnn::Result<Vec<(Mode, f64)>> {
    let (series, truth) = generate(&experiment_spec(seed, cloud_fraction))?;
    let cfg = experiment_config(seed);
    let split = training_split(&series, &truth, &cfg)?;
    modes
        .iter()
        .map(|&mode| {
            let mut c = cfg.clone();
            c.mode = mode;
            if !mode.is_recurrent() {
                c.train.epochs = FFN_EPOCHS;
            }
            let system = pipeline::train_system(&series, &split, mode, &c)?;
            Ok((mode, system.accuracy(&series, &split.holdout)?))
        })
        .collect()
}

fn pct(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

pub fn ordering(seeds: &[u64]) -> Outcome {
    let t0 = Instant::now();
    let mut lines = Vec::new();
    let mut failures = Vec::new();
    for &seed in seeds {
        let accs = try_or_fail!(holdout_accuracies(seed, 0.1, &Mode::ALL));
        let get = |m: Mode| accs.iter().find(|(x, _)| *x == m).map(|(_, a)| *a).unwrap();
        let pb = get(Mode::PbRnn);
        let pix_rnn = get(Mode::PixelRnn);
        let patch_s = get(Mode::PatchNnSingle);
        let patch_m = get(Mode::PatchNnMulti);
        let pix_s = get(Mode::PixelNnSingle);
        let pix_m = get(Mode::PixelNnMulti);
        let ok = [
            (pb >= 0.95, "PB-RNN >= 95%"),
            (pb > pix_rnn, "PB-RNN > pixel-RNN"),
            (pix_rnn > patch_s.max(patch_m), "pixel-RNN > patch-NN"),
            (patch_s >= pix_s, "patch-NN-single >= pixel-NN-single"),
            (patch_m >= pix_m, "patch-NN-multi >= pixel-NN-multi"),
            (pix_s <= pb - 0.10, "pixel-NN-single <= PB-RNN - 10 points"),
        ];
        for (holds, what) in ok {
            if !holds {
                failures.push(format!("seed {seed}: {what}"));
            }
        }
        lines.push(format!(
            "seed {seed}: pb {} pixrnn {} patch {}/{} pixel {}/{}",
            pct(pb),
            pct(pix_rnn),
            pct(patch_s),
            pct(patch_m),
            pct(pix_s),
            pct(pix_m)
        ));
    }
    let detail = format!("{} ({:?})", lines.join("; "), t0.elapsed());
    if failures.is_empty() {
        Outcome::new(true, detail)
    } else {
        Outcome::fail(format!("{} -- {detail}", failures.join(", ")))
    }
}

pub fn cloud_robustness(seed: u64) -> Outcome {
    let t0 = Instant::now();
    let clear = try_or_fail!(holdout_accuracies(seed, 0.0, &[Mode::PbRnn]))[0].1;
    let cloudy = try_or_fail!(holdout_accuracies(seed, 0.2, &[Mode::PbRnn]))[0].1;
    let drop = 100.0 * (clear - cloudy);
    let detail = format!(
        "PB-RNN {}% at 0% cloud, {}% at 20% cloud, drop {drop:.2} points ({:?})",
        pct(clear),
        pct(cloudy),
        t0.elapsed()
    );
    Outcome::new(drop < 3.0, detail)
}

// ---------------------------------------------------------------------------
// determinism and round trips

pub fn small_spec(seed: u64) -> SyntheticSpec {
    SyntheticSpec {
        width: 24,
        height: 20,
        seq_len: 6,
        bands: 4,
        num_classes: 4,
        region_blob_scale: 8,
        cloud_fraction: 0.15,
        seed,
        profiles: synthetic::designed_profiles(4, 6, 4, 0.04),
        ..SyntheticSpec::default()
    }
}

/// Every file under `dir`, relative path and contents, sorted.
pub fn tree(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(dir).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

/// A small config file for the site written by [`write_small_site`].
pub fn small_config_text(mode: Mode) -> String {
    format!(
        "mode = {mode}\nmanifest = site/manifest.txt\nlabels = site/truth.raw\noutput_dir = out\n\
         num_classes = 4\nscheme = generic-4\nbands = 4\nseq_len = 6\nfusion_dates = 0,2,3,5\n\
         hidden_dim = 6\nffn_hidden = 8\nepochs = 3\nbatch_size = 16\nmax_train_per_class = 25\n\
         learning_rate = 0.001\nlog_every = 0\n"
    )
}

pub fn write_small_site(dir: &Path, seed: u64) -> pbrnn::Result<()> {
    let site = generate_site(&small_spec(seed))?;
    synthetic::write_site(&dir.join("site"), &site, &ClassScheme::generic(4))?;
    Ok(())
}

/// A random trained-system checkpoint of any mode.
pub fn random_checkpoint(rng: &mut Rng) -> Checkpoint {
    let mode = Mode::ALL[rng.below(6)];
    let bands = 1 + rng.below(4);
    let classes = 2 + rng.below(5);
    let base = SamplerConfig {
        patch_x: 1 + 2 * rng.below(3),
        patch_y: 1 + 2 * rng.below(3),
        bands,
        seq_len: 2 + rng.below(5),
        reference_scene: 1,
        seed: rng.below(1000) as u64,
        ..SamplerConfig::default()
    };
    let mut cfg = RunConfig {
        mode,
        sampler: base,
        num_classes: classes,
        hidden_dim: 1 + rng.below(5),
        ffn_hidden: 1 + rng.below(5),
        forget_bias: if rng.below(2) == 0 { 0.0 } else { 1.0 },
        fusion_dates: vec![0, 1, 2, 3],
        init_seed: rng.below(1 << 30) as u64,
        ..RunConfig::default()
    };
    cfg.sampler.seq_len = cfg.sampler.seq_len.max(4);
    let sampler = cfg.sampler_for(mode);
    let samples: Vec<SampleSequence> = (0..3)
        .map(|i| SampleSequence {
            vectors: (0..sampler.seq_len).map(|_| random_vector(rng, sampler.input_dim())).collect(),
            label: Some(i % classes),
            row: i,
            col: 0,
            valid: vec![true; sampler.seq_len],
        })
        .collect();
    cfg.train.epochs = 1;
    cfg.train.log_every = 0;
    let system = pipeline::train_on_samples(mode, &samples, &cfg).expect("tiny training run");
    commands::checkpoint_of(system, &cfg)
}

pub fn random_samples(rng: &mut Rng) -> (Vec<SampleSequence>, usize, usize) {
    let seq_len = 1 + rng.below(5);
    let input_dim = 1 + rng.below(10);
    let n = rng.below(6);
    let samples = (0..n)
        .map(|i| {
            let valid: Vec<bool> = (0..seq_len).map(|_| rng.below(4) != 0).collect();
            SampleSequence {
                vectors: valid
                    .iter()
                    .map(|&v| if v { random_vector(rng, input_dim) } else { Vector::zeros(input_dim) })
                    .collect(),
                label: if rng.below(5) == 0 { None } else { Some(rng.below(300)) },
                row: rng.below(10_000),
                col: i,
                valid,
            }
        })
        .collect();
    (samples, seq_len, input_dim)
}

fn bit_identical(a: &[SampleSequence], b: &[SampleSequence]) -> bool {
    a.len() == b.len()
        && a.iter().zip(b).all(|(x, y)| {
            x.label == y.label
                && (x.row, x.col) == (y.row, y.col)
                && x.valid == y.valid
                && x.vectors.len() == y.vectors.len()
                && x.vectors.iter().zip(&y.vectors).all(|(u, v)| {
                    u.len() == v.len() && u.iter().zip(v.iter()).all(|(p, q)| p.to_bits() == q.to_bits())
                })
        })
}

pub fn determinism_and_round_trips() -> Outcome {
    let t0 = Instant::now();
    // seeded end-to-end reruns: site, training, checkpoint, map
    let mut runs = Vec::new();
    for _ in 0..2 {
        let dir = try_or_fail!(tempfile::tempdir());
        try_or_fail!(write_small_site(dir.path(), 11));
        let cfg_path = dir.path().join("run.cfg");
        try_or_fail!(std::fs::write(&cfg_path, small_config_text(Mode::PbRnn)));
        let cfg = try_or_fail!(RunConfig::load(&cfg_path));
        let trained = try_or_fail!(commands::train(&cfg, None));
        try_or_fail!(commands::classify(
            &trained.checkpoint,
            &cfg.manifest,
            &dir.path().join("out/map.raw"),
            Some(&dir.path().join("out/map.ppm")),
        ));
        runs.push(tree(dir.path()));
    }
    ensure!(runs[0].len() > 10, "only {} files written", runs[0].len());
    ensure!(
        runs[0] == runs[1],
        "reruns differ in {:?}",
        runs[0]
            .iter()
            .zip(&runs[1])
            .find(|(a, b)| a != b)
            .map(|(a, _)| a.0.clone())
    );
    let files = runs[0].len();

    let mut rng = Rng::seed(77);
    for i in 0..200 {
        let ck = random_checkpoint(&mut rng);
        let bytes = try_or_fail!(ck.encode());
        let back = try_or_fail!(Checkpoint::decode(&bytes));
        ensure!(back == ck, "checkpoint {i} ({}) changed in a round trip", ck.system.mode);
        ensure!(try_or_fail!(back.encode()) == bytes, "checkpoint {i} re-encodes differently");
    }
    for i in 0..500 {
        let (samples, seq_len, input_dim) = random_samples(&mut rng);
        let bytes = try_or_fail!(encode_samples(&samples, seq_len, input_dim));
        let (back, n, p) = try_or_fail!(decode_samples(&bytes));
        ensure!((n, p) == (seq_len, input_dim), "cache {i} header changed");
        ensure!(bit_identical(&samples, &back), "sample cache {i} changed in a round trip");
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    Outcome::new(
        true,
        format!("2 seeded end-to-end runs identical over {files} files; 200 checkpoints and 500 sample caches bit-exact ({elapsed:?})"),
    )
}

// ---------------------------------------------------------------------------
// sampling constraints

/// Zeroes a rectangle of one scene as if it were cloud.
pub fn inject_cloud(series: &mut SceneSeries, t: usize, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) {
    let scene = &mut series.scenes[t];
    let (w, h) = (scene.meta.width, scene.meta.height);
    for r in rows {
        for c in cols.clone() {
            scene.contaminated[r * w + c] = true;
            scene.mask[r * w + c] = pbrnn::raster::mask_code::CLOUD;
            for b in 0..scene.meta.band_count {
                scene.toa[(b * h + r) * w + c] = 0.0;
            }
        }
    }
}

/// Exhaustive comparison of the training split with a brute-force
/// enumeration of the candidates.
pub fn check_split(series: &SceneSeries, labels: &LabelMap, cfg: &SamplerConfig, k: usize) -> Result<usize, String> {
    let split = select_training_locations(series, cfg, labels, k).map_err(|e| e.to_string())?;
    let (w, h) = (series.width(), series.height());
    let (hy, hx) = (cfg.patch_y / 2, cfg.patch_x / 2);
    let reference = &series.scenes[cfg.reference_scene];
    let mut candidates = vec![Vec::new(); k];
    for r in hy..h - hy {
        for c in hx..w - hx {
            let Some(label) = labels.get(r, c) else { continue };
            let clear = (r - hy..=r + hy).all(|y| (c - hx..=c + hx).all(|x| !reference.contaminated[y * w + x]));
            if clear {
                candidates[label].push((r, c));
            }
        }
    }
    for (class, cands) in candidates.iter().enumerate() {
        let expected = (cfg.train_fraction * cands.len() as f64).floor() as usize;
        let chosen: Vec<(usize, usize)> = split
            .train
            .iter()
            .filter(|l| l.label == class)
            .map(|l| (l.row, l.col))
            .collect();
        if chosen.len() != expected {
            return Err(format!("class {class}: {} selected, floor(0.8*{}) = {expected}", chosen.len(), cands.len()));
        }
        let mut all: Vec<(usize, usize)> = chosen;
        all.extend(split.holdout.iter().filter(|l| l.label == class).map(|l| (l.row, l.col)));
        all.sort();
        let mut sorted = cands.clone();
        sorted.sort();
        if all != sorted {
            return Err(format!("class {class}: train + holdout is not exactly the candidate set"));
        }
    }
    for l in &split.train {
        if l.row < hy || l.row + hy >= h || l.col < hx || l.col + hx >= w {
            return Err(format!("boundary center ({}, {}) selected", l.row, l.col));
        }
        for y in l.row - hy..=l.row + hy {
            for x in l.col - hx..=l.col + hx {
                if reference.contaminated[y * w + x] {
                    return Err(format!("patch at ({}, {}) overlaps a masked reference pixel", l.row, l.col));
                }
            }
        }
    }
    Ok(split.train.len())
}

pub fn sampling_constraints() -> Outcome {
    let t0 = Instant::now();
    let mut checked = 0;
    let mut selected = 0;
    for seed in 0..3 {
        let spec = SyntheticSpec {
            width: 64,
            height: 48,
            seq_len: 6,
            bands: 3,
            region_blob_scale: 12,
            cloud_fraction: 0.2,
            seed,
            profiles: synthetic::designed_profiles(8, 6, 3, 0.04),
            ..SyntheticSpec::default()
        };
        let (mut series, truth) = try_or_fail!(generate(&spec));
        inject_cloud(&mut series, 3, 10..22, 5..30);
        for (px, py) in [(3, 3), (5, 3), (1, 1), (7, 5)] {
            let cfg = SamplerConfig {
                patch_x: px,
                patch_y: py,
                bands: 3,
                seq_len: 6,
                reference_scene: 3,
                seed: seed + 100,
                ..SamplerConfig::default()
            };
            match check_split(&series, &truth, &cfg, 8) {
                Ok(n) => selected += n,
                Err(e) => return Outcome::fail(format!("seed {seed}, {px}x{py}: {e}")),
            }
            checked += 1;
        }
    }
    let elapsed = t0.elapsed();
    ensure!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    Outcome::new(
        true,
        format!("{checked} site/window combinations, {selected} selected patches, all constraints exact ({elapsed:?})"),
    )
}

// ---------------------------------------------------------------------------
// oracle equivalences

/// The patch value read straight from the band-sequential array.
pub fn brute_force_patch(series: &SceneSeries, px: usize, py: usize, t: usize, row: usize, col: usize) -> Vec<f64> {
    let s = &series.scenes[t];
    let (w, h, z) = (s.meta.width, s.meta.height, s.meta.band_count);
    let mut out = Vec::new();
    for dy in 0..py {
        for dx in 0..px {
            let (r, c) = (row + dy - py / 2, col + dx - px / 2);
            for b in 0..z {
                out.push(s.toa[b * h * w + r * w + c]);
            }
        }
    }
    out
}

pub fn oracles() -> Outcome {
    let t0 = Instant::now();
    let spec = SyntheticSpec {
        width: 30,
        height: 22,
        seq_len: 5,
        bands: 3,
        num_classes: 4,
        region_blob_scale: 8,
        cloud_fraction: 0.2,
        seed: 5,
        profiles: synthetic::designed_profiles(4, 5, 3, 0.04),
        ..SyntheticSpec::default()
    };
    let (series, _) = try_or_fail!(generate(&spec));
    let mut rng = Rng::seed(9);
    for probe in 0..1000 {
        let px = 1 + 2 * rng.below(3);
        let py = 1 + 2 * rng.below(3);
        let cfg = SamplerConfig {
            patch_x: px,
            patch_y: py,
            bands: 3,
            seq_len: 5,
            ..SamplerConfig::default()
        };
        let t = rng.below(5);
        let row = py / 2 + rng.below(22 - 2 * (py / 2));
        let col = px / 2 + rng.below(30 - 2 * (px / 2));
        let got = try_or_fail!(extract_patch(&series, &cfg, t, row, col));
        let want = brute_force_patch(&series, px, py, t, row, col);
        ensure!(
            got.len() == want.len() && got.iter().zip(&want).all(|(a, b)| a.to_bits() == b.to_bits()),
            "probe {probe}: {px}x{py} patch at scene {t} ({row}, {col}) differs from the direct index"
        );
    }

    let mut worst_fusion: f64 = 0.0;
    for _ in 0..1000 {
        let k = 2 + rng.below(9);
        let dists: Vec<Vector> = (0..4)
            .map(|_| {
                let raw: Vec<f64> = (0..k).map(|_| 0.01 + rng.next_f64()).collect();
                let s: f64 = raw.iter().sum();
                raw.iter().map(|v| v / s).collect::<Vec<_>>().into()
            })
            .collect();
        let fused = try_or_fail!(fuse_distributions(&dists));
        let mut product = vec![1.0; k];
        for d in &dists {
            for (p, q) in product.iter_mut().zip(d.iter()) {
                *p *= q;
            }
        }
        let z: f64 = product.iter().sum();
        for (a, b) in fused.iter().zip(&product) {
            worst_fusion = worst_fusion.max((a - b / z).abs());
        }
    }
    ensure!(worst_fusion <= 1e-10, "fusion differs from the direct product by {worst_fusion:e}");

    let mut compared = 0;
    for zero_whole in [false, true] {
        let patch = SamplerConfig {
            bands: 3,
            seq_len: 5,
            zero_whole_patch: zero_whole,
            ..SamplerConfig::default()
        };
        let pixel = patch.pixel_mode();
        for row in 1..21 {
            for col in 1..29 {
                let p = try_or_fail!(build_sample(&series, &patch, row, col, None)).center_pixels(3, 3, 3);
                let q = try_or_fail!(build_sample(&series, &pixel, row, col, None));
                for t in 0..5 {
                    // a whole-patch zeroing also hides a clear center; only
                    // windows that are entirely clear must agree then
                    if zero_whole && !p.valid[t] {
                        continue;
                    }
                    ensure!(
                        p.vectors[t].iter().zip(q.vectors[t].iter()).all(|(a, b)| a.to_bits() == b.to_bits()),
                        "pixel sample at ({row}, {col}) scene {t} differs from the patch center"
                    );
                    compared += 1;
                }
            }
        }
    }
    Outcome::new(
        true,
        format!(
            "1000 patch probes exact; fusion max deviation {worst_fusion:.1e}; {compared} pixel/center datums exact ({:?})",
            t0.elapsed()
        ),
    )
}
