//! Run configuration: which of the six systems to train, on what data and
//! with which sampling and optimizer settings. Stored as flat `key = value`
//! text; see [`RunConfig::KEYS`] for the accepted keys.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::baseline::{Activation, FusionEnsemble, HIDDEN_WIDTH};
use crate::error::{Error, Result};
use crate::keyvalue::KeyValues;
use crate::optim::{AdamHyper, TrainConfig};
use crate::raster::MaskPolicy;
use crate::sampling::SamplerConfig;

/// The six compared systems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Mode {
    PbRnn,
    PixelRnn,
    PixelNnSingle,
    PixelNnMulti,
    PatchNnSingle,
    PatchNnMulti,
}

impl Mode {
    /// Summary-table column order: weakest baseline first.
    pub const ALL: [Mode; 6] = [
        Mode::PixelNnSingle,
        Mode::PixelNnMulti,
        Mode::PatchNnSingle,
        Mode::PatchNnMulti,
        Mode::PixelRnn,
        Mode::PbRnn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Mode::PbRnn => "pb-rnn",
            Mode::PixelRnn => "pixel-rnn",
            Mode::PixelNnSingle => "pixel-nn-single",
            Mode::PixelNnMulti => "pixel-nn-multi",
            Mode::PatchNnSingle => "patch-nn-single",
            Mode::PatchNnMulti => "patch-nn-multi",
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Mode::PbRnn => 0,
            Mode::PixelRnn => 1,
            Mode::PixelNnSingle => 2,
            Mode::PixelNnMulti => 3,
            Mode::PatchNnSingle => 4,
            Mode::PatchNnMulti => 5,
        }
    }

    pub fn from_code(code: u8) -> Option<Mode> {
        Mode::ALL.into_iter().find(|m| m.code() == code)
    }

    pub fn is_recurrent(self) -> bool {
        matches!(self, Mode::PbRnn | Mode::PixelRnn)
    }

    pub fn is_patch(self) -> bool {
        matches!(self, Mode::PbRnn | Mode::PatchNnSingle | Mode::PatchNnMulti)
    }

    pub fn is_multi(self) -> bool {
        matches!(self, Mode::PixelNnMulti | Mode::PatchNnMulti)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Mode::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Mode::ALL.iter().map(|m| m.name()).collect();
                format!("unknown mode {s:?}; expected one of {}", names.join(", "))
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    /// Patch geometry, series length and split settings. Mode-specific
    /// adjustments are made by [`RunConfig::sampler_for`].
    pub sampler: SamplerConfig,
    pub train: TrainConfig,
    pub adam: AdamHyper,
    /// Scenes used by the multi-image systems.
    pub fusion_dates: Vec<usize>,
    pub num_classes: usize,
    pub scheme: String,
    pub hidden_dim: usize,
    pub ffn_hidden: usize,
    pub activation: Activation,
    pub use_bias: bool,
    pub forget_bias: f64,
    pub init_seed: u64,
    /// Caps the training locations per class (after the split); `None`
    /// keeps them all.
    pub max_train_per_class: Option<usize>,
    pub mask_policy: MaskPolicy,
    pub manifest: PathBuf,
    pub labels: PathBuf,
    pub output_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mode: Mode::PbRnn,
            sampler: SamplerConfig::default(),
            train: TrainConfig::default(),
            adam: AdamHyper::default(),
            fusion_dates: vec![0, 2, 3, 22],
            num_classes: 8,
            scheme: "everglades-8".into(),
            hidden_dim: 128,
            ffn_hidden: HIDDEN_WIDTH,
            activation: Activation::Sigmoid,
            use_bias: true,
            forget_bias: 0.0,
            init_seed: 0,
            max_train_per_class: None,
            mask_policy: MaskPolicy::default(),
            manifest: PathBuf::new(),
            labels: PathBuf::new(),
            output_dir: PathBuf::new(),
        }
    }
}

fn parse_activation(kv: &KeyValues) -> Result<Activation> {
    match kv.raw("activation") {
        None => Ok(Activation::Sigmoid),
        Some(s) => Activation::parse(s).ok_or_else(|| Error::config("activation", format!("unknown activation {s:?}"))),
    }
}

impl RunConfig {
    /// Every key [`RunConfig::parse`] understands.
    pub const KEYS: &'static [&'static str] = &[
        "mode",
        "manifest",
        "labels",
        "output_dir",
        "num_classes",
        "scheme",
        "patch_x",
        "patch_y",
        "bands",
        "seq_len",
        "reference_scene",
        "train_fraction",
        "sample_seed",
        "zero_whole_patch",
        "snow_is_contaminated",
        "fusion_dates",
        "hidden_dim",
        "ffn_hidden",
        "activation",
        "use_bias",
        "forget_bias",
        "init_seed",
        "max_train_per_class",
        "batch_size",
        "epochs",
        "shuffle_seed",
        "holdout_fraction",
        "log_every",
        "learning_rate",
        "beta1",
        "beta2",
        "epsilon",
    ];

    /// Parses flat key-value text. Relative paths are resolved against
    /// `base_dir`. The result is validated except for the data paths,
    /// which [`RunConfig::require_paths`] checks.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        let kv = KeyValues::parse(text)?;
        let d = RunConfig::default();
        let mode: Mode = kv
            .require("mode")?
            .parse()
            .map_err(|e: String| Error::config("mode", e))?;
        let path = |key: &str| -> PathBuf {
            kv.raw(key).map(|p| base_dir.join(p)).unwrap_or_default()
        };
        let cfg = RunConfig {
            mode,
            manifest: path("manifest"),
            labels: path("labels"),
            output_dir: kv.raw("output_dir").map(|p| base_dir.join(p)).unwrap_or_else(|| base_dir.to_path_buf()),
            num_classes: kv.get("num_classes", d.num_classes)?,
            scheme: kv.get("scheme", d.scheme)?,
            sampler: SamplerConfig {
                patch_x: kv.get("patch_x", d.sampler.patch_x)?,
                patch_y: kv.get("patch_y", d.sampler.patch_y)?,
                bands: kv.get("bands", d.sampler.bands)?,
                seq_len: kv.get("seq_len", d.sampler.seq_len)?,
                reference_scene: kv.get("reference_scene", d.sampler.reference_scene)?,
                train_fraction: kv.get("train_fraction", d.sampler.train_fraction)?,
                seed: kv.get("sample_seed", d.sampler.seed)?,
                scenes: None,
                zero_whole_patch: kv.get("zero_whole_patch", d.sampler.zero_whole_patch)?,
            },
            mask_policy: MaskPolicy {
                snow_is_contaminated: kv.get("snow_is_contaminated", d.mask_policy.snow_is_contaminated)?,
            },
            fusion_dates: kv.list("fusion_dates", d.fusion_dates)?,
            hidden_dim: kv.get("hidden_dim", d.hidden_dim)?,
            ffn_hidden: kv.get("ffn_hidden", d.ffn_hidden)?,
            activation: parse_activation(&kv)?,
            use_bias: kv.get("use_bias", d.use_bias)?,
            forget_bias: kv.get("forget_bias", d.forget_bias)?,
            init_seed: kv.get("init_seed", d.init_seed)?,
            max_train_per_class: match kv.raw("max_train_per_class") {
                None | Some("none") => None,
                Some(_) => Some(kv.get("max_train_per_class", 0usize)?),
            },
            train: TrainConfig {
                batch_size: kv.get("batch_size", d.train.batch_size)?,
                epochs: kv.get("epochs", d.train.epochs)?,
                shuffle_seed: kv.get("shuffle_seed", d.train.shuffle_seed)?,
                holdout_fraction: kv.get("holdout_fraction", d.train.holdout_fraction)?,
                log_every: kv.get("log_every", d.train.log_every)?,
            },
            adam: AdamHyper {
                alpha: kv.get("learning_rate", d.adam.alpha)?,
                beta1: kv.get("beta1", d.adam.beta1)?,
                beta2: kv.get("beta2", d.adam.beta2)?,
                epsilon: kv.get("epsilon", d.adam.epsilon)?,
            },
        };
        kv.finish()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::fsio::read_text(path)?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// Renders the configuration back to key-value text.
    pub fn to_text(&self) -> String {
        let s = &self.sampler;
        let dates: Vec<String> = self.fusion_dates.iter().map(|d| d.to_string()).collect();
        let mut out = String::new();
        let mut put = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
        put("mode", self.mode.name().into());
        put("manifest", self.manifest.display().to_string());
        put("labels", self.labels.display().to_string());
        put("output_dir", self.output_dir.display().to_string());
        put("num_classes", self.num_classes.to_string());
        put("scheme", self.scheme.clone());
        put("patch_x", s.patch_x.to_string());
        put("patch_y", s.patch_y.to_string());
        put("bands", s.bands.to_string());
        put("seq_len", s.seq_len.to_string());
        put("reference_scene", s.reference_scene.to_string());
        put("train_fraction", s.train_fraction.to_string());
        put("sample_seed", s.seed.to_string());
        put("zero_whole_patch", s.zero_whole_patch.to_string());
        put("snow_is_contaminated", self.mask_policy.snow_is_contaminated.to_string());
        put("fusion_dates", dates.join(","));
        put("hidden_dim", self.hidden_dim.to_string());
        put("ffn_hidden", self.ffn_hidden.to_string());
        put("activation", self.activation.name().into());
        put("use_bias", self.use_bias.to_string());
        put("forget_bias", self.forget_bias.to_string());
        put("init_seed", self.init_seed.to_string());
        put(
            "max_train_per_class",
            self.max_train_per_class.map_or("none".into(), |n| n.to_string()),
        );
        put("batch_size", self.train.batch_size.to_string());
        put("epochs", self.train.epochs.to_string());
        put("shuffle_seed", self.train.shuffle_seed.to_string());
        put("holdout_fraction", self.train.holdout_fraction.to_string());
        put("log_every", self.train.log_every.to_string());
        put("learning_rate", self.adam.alpha.to_string());
        put("beta1", self.adam.beta1.to_string());
        put("beta2", self.adam.beta2.to_string());
        put("epsilon", self.adam.epsilon.to_string());
        out
    }

    /// Checks every field that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let s = &self.sampler;
        for (field, v) in [("patch_x", s.patch_x), ("patch_y", s.patch_y)] {
            if v == 0 || v % 2 == 0 {
                return Err(Error::config(field, format!("window side {v} must be odd and positive")));
            }
        }
        if s.bands == 0 {
            return Err(Error::config("bands", "must be positive"));
        }
        if s.seq_len == 0 {
            return Err(Error::config("seq_len", "must be positive"));
        }
        if s.reference_scene >= s.seq_len {
            return Err(Error::config(
                "reference_scene",
                format!("scene {} outside a series of {}", s.reference_scene, s.seq_len),
            ));
        }
        if !(s.train_fraction > 0.0 && s.train_fraction <= 1.0) {
            return Err(Error::config("train_fraction", "must lie in (0, 1]"));
        }
        if self.mode.is_multi() {
            if self.fusion_dates.len() != FusionEnsemble::MEMBERS {
                return Err(Error::config(
                    "fusion_dates",
                    format!("{} dates given, fusion uses {}", self.fusion_dates.len(), FusionEnsemble::MEMBERS),
                ));
            }
            if let Some(t) = self.fusion_dates.iter().find(|&&t| t >= s.seq_len) {
                return Err(Error::config("fusion_dates", format!("scene {t} outside a series of {}", s.seq_len)));
            }
            let mut sorted = self.fusion_dates.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != self.fusion_dates.len() {
                return Err(Error::config("fusion_dates", "dates must be distinct"));
            }
        }
        if self.num_classes < 2 || self.num_classes > 254 {
            return Err(Error::config("num_classes", "must lie in [2, 254]"));
        }
        if self.hidden_dim == 0 {
            return Err(Error::config("hidden_dim", "must be positive"));
        }
        if self.ffn_hidden == 0 {
            return Err(Error::config("ffn_hidden", "must be positive"));
        }
        if !self.forget_bias.is_finite() {
            return Err(Error::config("forget_bias", "must be finite"));
        }
        if self.max_train_per_class == Some(0) {
            return Err(Error::config("max_train_per_class", "must be positive or none"));
        }
        if self.train.batch_size == 0 {
            return Err(Error::config("batch_size", "must be at least 1"));
        }
        if self.train.epochs == 0 {
            return Err(Error::config("epochs", "must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.train.holdout_fraction) {
            return Err(Error::config("holdout_fraction", "must lie in [0, 1)"));
        }
        let a = &self.adam;
        if !(a.alpha.is_finite() && a.alpha > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        for (field, b) in [("beta1", a.beta1), ("beta2", a.beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::config(field, "must lie in [0, 1)"));
            }
        }
        if !(a.epsilon.is_finite() && a.epsilon > 0.0) {
            return Err(Error::config("epsilon", "must be positive"));
        }
        Ok(())
    }

    /// Fails with a config error naming the first missing data path.
    pub fn require_paths(&self) -> Result<()> {
        for (field, p) in [("manifest", &self.manifest), ("labels", &self.labels)] {
            if p.as_os_str().is_empty() {
                return Err(Error::config(field, "missing required path"));
            }
            if !p.exists() {
                return Err(Error::config(field, format!("{} does not exist", p.display())));
            }
        }
        Ok(())
    }

    /// The sampler the given mode trains and predicts with: pixel systems
    /// use a 1×1 window, single-image systems the reference scene alone,
    /// multi-image systems the fusion dates (one vector per member) and
    /// recurrent systems the whole series.
    pub fn sampler_for(&self, mode: Mode) -> SamplerConfig {
        let base = if mode.is_patch() {
            self.sampler.clone()
        } else {
            self.sampler.pixel_mode()
        };
        let scenes = if mode.is_recurrent() {
            (0..self.sampler.seq_len).collect()
        } else if mode.is_multi() {
            self.fusion_dates.clone()
        } else {
            vec![self.sampler.reference_scene]
        };
        base.with_scenes(scenes)
    }

    /// The sampler that decides training locations. All systems share the
    /// patch window here so that they are trained and scored on the same
    /// pixels.
    pub fn location_sampler(&self) -> SamplerConfig {
        self.sampler.clone()
    }
}
