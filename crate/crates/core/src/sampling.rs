//! Patch-sequence samples, training-location selection and whole-map
//! classification.
//!
//! A patch is the `patch_y × patch_x` window around a center pixel across
//! all bands, flattened with window rows top-to-bottom, columns
//! left-to-right and bands innermost. A sample is one such vector per
//! selected scene, in temporal order.

use std::path::Path;

use crate::error::{Error, Result};
use crate::fsio::{self, Reader};
use crate::math::{Rng, Vector};
use crate::raster::{ClassScheme, SceneSeries};

pub const NO_DATA: u8 = 255;

#[derive(Debug, Clone, PartialEq)]
pub struct SamplerConfig {
    /// Window width in pixels (odd).
    pub patch_x: usize,
    /// Window height in pixels (odd).
    pub patch_y: usize,
    pub bands: usize,
    pub seq_len: usize,
    /// Scene whose clouds constrain training locations.
    pub reference_scene: usize,
    pub train_fraction: f64,
    pub seed: u64,
    /// Explicit scene indices; when `None` the first `seq_len` scenes.
    pub scenes: Option<Vec<usize>>,
    /// When true, a window with any masked pixel is zeroed as a whole;
    /// otherwise only its masked pixels are.
    pub zero_whole_patch: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            patch_x: 3,
            patch_y: 3,
            bands: 8,
            seq_len: 23,
            reference_scene: 3,
            train_fraction: 0.8,
            seed: 0,
            scenes: None,
            zero_whole_patch: true,
        }
    }
}

impl SamplerConfig {
    pub fn input_dim(&self) -> usize {
        self.patch_x * self.patch_y * self.bands
    }

    pub fn scene_indices(&self) -> Vec<usize> {
        match &self.scenes {
            Some(s) => s.clone(),
            None => (0..self.seq_len).collect(),
        }
    }

    /// Pixel-mode copy of this configuration (1×1 window).
    pub fn pixel_mode(&self) -> Self {
        SamplerConfig {
            patch_x: 1,
            patch_y: 1,
            ..self.clone()
        }
    }

    /// Restricts the sequence to the given scenes.
    pub fn with_scenes(&self, scenes: Vec<usize>) -> Self {
        SamplerConfig {
            seq_len: scenes.len(),
            scenes: Some(scenes),
            ..self.clone()
        }
    }

    pub fn validate(&self, series: &SceneSeries) -> Result<()> {
        if self.patch_x == 0 || self.patch_y == 0 || self.patch_x % 2 == 0 || self.patch_y % 2 == 0 {
            return Err(Error::config(
                "patch_x/patch_y",
                format!("window {}x{} must have odd, positive sides", self.patch_x, self.patch_y),
            ));
        }
        if self.bands != series.bands() {
            return Err(Error::config(
                "bands",
                format!("configured {} bands, series has {}", self.bands, series.bands()),
            ));
        }
        let scenes = self.scene_indices();
        if scenes.is_empty() || scenes.len() != self.seq_len {
            return Err(Error::config(
                "seq_len",
                format!("{} scenes selected for a sequence of length {}", scenes.len(), self.seq_len),
            ));
        }
        if let Some(&t) = scenes.iter().find(|&&t| t >= series.len()) {
            return Err(Error::config(
                "seq_len",
                format!("scene {t} requested from a series of {}", series.len()),
            ));
        }
        if self.reference_scene >= series.len() {
            return Err(Error::config(
                "reference_scene",
                format!("scene {} outside a series of {}", self.reference_scene, series.len()),
            ));
        }
        if !(0.0..=1.0).contains(&self.train_fraction) {
            return Err(Error::config("train_fraction", "must lie in [0, 1]"));
        }
        Ok(())
    }

    fn half(&self) -> (usize, usize) {
        (self.patch_y / 2, self.patch_x / 2)
    }

    /// True when the whole window around `(row, col)` lies in the raster.
    pub fn is_interior(&self, width: usize, height: usize, row: usize, col: usize) -> bool {
        let (hy, hx) = self.half();
        row >= hy && col >= hx && row + hy < height && col + hx < width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleSequence {
    pub vectors: Vec<Vector>,
    pub label: Option<usize>,
    pub row: usize,
    pub col: usize,
    /// Per datum: true for a clear vector, false for a zeroed one.
    pub valid: Vec<bool>,
}

impl SampleSequence {
    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn input_dim(&self) -> usize {
        self.vectors.first().map_or(0, |v| v.len())
    }

    /// Single-datum sample holding vector `t`.
    pub fn datum(&self, t: usize) -> SampleSequence {
        SampleSequence {
            vectors: vec![self.vectors[t].clone()],
            label: self.label,
            row: self.row,
            col: self.col,
            valid: vec![self.valid[t]],
        }
    }

    /// Center pixel of each patch, given the window it was cut with.
    pub fn center_pixels(&self, patch_x: usize, patch_y: usize, bands: usize) -> SampleSequence {
        let center = (patch_y / 2 * patch_x + patch_x / 2) * bands;
        SampleSequence {
            vectors: self
                .vectors
                .iter()
                .map(|v| Vector::from(&v[center..center + bands]))
                .collect(),
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    pub width: usize,
    pub height: usize,
    /// Row-major class ids, [`NO_DATA`] where unknown.
    pub data: Vec<u8>,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::shape(format!(
                "{} labels for a {width}x{height} map",
                data.len()
            )));
        }
        Ok(LabelMap { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: u8) -> Self {
        LabelMap {
            width,
            height,
            data: vec![value; width * height],
        }
    }

    pub fn get(&self, row: usize, col: usize) -> Option<usize> {
        match self.data[row * self.width + col] {
            NO_DATA => None,
            c => Some(c as usize),
        }
    }

    pub fn set(&mut self, row: usize, col: usize, class: Option<usize>) {
        self.data[row * self.width + col] = class.map_or(NO_DATA, |c| c as u8);
    }

    /// Fraction of pixels labeled in both maps that agree.
    pub fn agreement(&self, other: &LabelMap) -> Result<f64> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::shape("maps differ in size"));
        }
        let (mut hit, mut n) = (0usize, 0usize);
        for (&a, &b) in self.data.iter().zip(&other.data) {
            if a != NO_DATA && b != NO_DATA {
                n += 1;
                hit += usize::from(a == b);
            }
        }
        if n == 0 {
            return Err(Error::argument("no pixel is labeled in both maps"));
        }
        Ok(hit as f64 / n as f64)
    }

    /// `<stem>.raw` with the ids and `<stem>.txt` naming the size and scheme.
    pub fn write(&self, raw_path: &Path, scheme: &ClassScheme) -> Result<()> {
        fsio::write_atomic(raw_path, &self.data)?;
        let mut side = format!(
            "width = {}\nheight = {}\nno_data = {NO_DATA}\nscheme = {}\n",
            self.width, self.height, scheme.name
        );
        for c in &scheme.classes {
            side.push_str(&format!(
                "class.{} = {} #{:02x}{:02x}{:02x}\n",
                c.id, c.name, c.color[0], c.color[1], c.color[2]
            ));
        }
        fsio::write_atomic(&raw_path.with_extension("txt"), side.as_bytes())
    }

    pub fn read(raw_path: &Path) -> Result<(LabelMap, String)> {
        let side_path = raw_path.with_extension("txt");
        let side = fsio::read_text(&side_path)?;
        let mut width = None;
        let mut height = None;
        let mut scheme = String::from("generic");
        for line in side.lines() {
            let Some((k, v)) = line.split_once('=') else { continue };
            match k.trim() {
                "width" => width = v.trim().parse::<usize>().ok(),
                "height" => height = v.trim().parse::<usize>().ok(),
                "scheme" => scheme = v.trim().to_string(),
                _ => {}
            }
        }
        let (Some(w), Some(h)) = (width, height) else {
            return Err(Error::format(format!("{}: missing width/height", side_path.display())));
        };
        let data = fsio::read(raw_path)?;
        if data.len() != w * h {
            return Err(Error::format(format!(
                "{}: {} bytes for a {w}x{h} map",
                raw_path.display(),
                data.len()
            )));
        }
        Ok((LabelMap { width: w, height: h, data }, scheme))
    }

    /// Binary PPM rendering with the scheme's colors; no-data is black.
    pub fn to_ppm(&self, scheme: &ClassScheme) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        for &c in &self.data {
            let rgb = if c == NO_DATA { [0, 0, 0] } else { scheme.color(c) };
            out.extend_from_slice(&rgb);
        }
        out
    }
}

fn check_window(series: &SceneSeries, cfg: &SamplerConfig, t: usize, row: usize, col: usize) -> Result<()> {
    if t >= series.len() {
        return Err(Error::Index(format!("scene {t} of {}", series.len())));
    }
    if row >= series.height() || col >= series.width() {
        return Err(Error::Index(format!(
            "pixel ({row}, {col}) outside {}x{}",
            series.height(),
            series.width()
        )));
    }
    if !cfg.is_interior(series.width(), series.height(), row, col) {
        return Err(Error::Boundary { row, col });
    }
    Ok(())
}

/// Flattened window at scene `t`, exactly as stored (masked pixels read 0).
pub fn extract_patch(series: &SceneSeries, cfg: &SamplerConfig, t: usize, row: usize, col: usize) -> Result<Vector> {
    check_window(series, cfg, t, row, col)?;
    let (hy, hx) = cfg.half();
    let scene = &series.scenes[t];
    let mut out = Vec::with_capacity(cfg.input_dim());
    for r in row - hy..=row + hy {
        for c in col - hx..=col + hx {
            for b in 0..series.bands() {
                out.push(scene.value(b, r, c));
            }
        }
    }
    Ok(out.into())
}

/// True when any pixel of the window at scene `t` is masked.
pub fn window_masked(series: &SceneSeries, cfg: &SamplerConfig, t: usize, row: usize, col: usize) -> Result<bool> {
    check_window(series, cfg, t, row, col)?;
    let (hy, hx) = cfg.half();
    let scene = &series.scenes[t];
    Ok((row - hy..=row + hy).any(|r| (col - hx..=col + hx).any(|c| scene.is_contaminated(r, c))))
}

/// The sample centered at `(row, col)`. With `labels`, the center must be
/// labeled; without, the sample is unlabeled (inference).
pub fn build_sample(
    series: &SceneSeries,
    cfg: &SamplerConfig,
    row: usize,
    col: usize,
    labels: Option<&LabelMap>,
) -> Result<SampleSequence> {
    let label = match labels {
        Some(map) => {
            if row >= map.height || col >= map.width {
                return Err(Error::Index(format!("pixel ({row}, {col}) outside the label map")));
            }
            Some(map.get(row, col).ok_or(Error::Unlabeled { row, col })?)
        }
        None => None,
    };
    let scenes = cfg.scene_indices();
    let mut vectors = Vec::with_capacity(scenes.len());
    let mut valid = Vec::with_capacity(scenes.len());
    for &t in &scenes {
        let masked = window_masked(series, cfg, t, row, col)?;
        if masked && cfg.zero_whole_patch {
            vectors.push(Vector::zeros(cfg.input_dim()));
        } else {
            vectors.push(extract_patch(series, cfg, t, row, col)?);
        }
        valid.push(!masked);
    }
    Ok(SampleSequence {
        vectors,
        label,
        row,
        col,
        valid,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Location {
    pub row: usize,
    pub col: usize,
    pub label: usize,
}

/// Candidate locations split into training and held-out sets.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSplit {
    pub train: Vec<Location>,
    pub holdout: Vec<Location>,
    pub candidates_per_class: Vec<usize>,
    pub selected_per_class: Vec<usize>,
}

impl TrainingSplit {
    pub fn empty_classes(&self) -> Vec<usize> {
        self.candidates_per_class
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(c, _)| c)
            .collect()
    }
}

/// Candidates are labeled, non-boundary centers whose window is clear at
/// the reference scene. Each class keeps a seeded `floor(fraction · n)`
/// of its candidates for training; the rest are held out.
pub fn select_training_locations(
    series: &SceneSeries,
    cfg: &SamplerConfig,
    labels: &LabelMap,
    num_classes: usize,
) -> Result<TrainingSplit> {
    if labels.width != series.width() || labels.height != series.height() {
        return Err(Error::shape(format!(
            "label map {}x{} for a {}x{} series",
            labels.width,
            labels.height,
            series.width(),
            series.height()
        )));
    }
    if cfg.reference_scene >= series.len() {
        return Err(Error::config("reference_scene", "outside the series"));
    }
    let mut per_class: Vec<Vec<Location>> = vec![Vec::new(); num_classes];
    for row in 0..series.height() {
        for col in 0..series.width() {
            if !cfg.is_interior(series.width(), series.height(), row, col) {
                continue;
            }
            let Some(label) = labels.get(row, col) else { continue };
            if label >= num_classes {
                return Err(Error::format(format!(
                    "label {label} at ({row}, {col}) outside {num_classes} classes"
                )));
            }
            if window_masked(series, cfg, cfg.reference_scene, row, col)? {
                continue;
            }
            per_class[label].push(Location { row, col, label });
        }
    }
    let mut rng = Rng::seed(cfg.seed);
    let mut split = TrainingSplit {
        train: Vec::new(),
        holdout: Vec::new(),
        candidates_per_class: per_class.iter().map(Vec::len).collect(),
        selected_per_class: Vec::with_capacity(num_classes),
    };
    for (class, mut locs) in per_class.into_iter().enumerate() {
        if locs.is_empty() {
            log::warn!("class {class} has no training candidates");
        }
        let take = (cfg.train_fraction * locs.len() as f64).floor() as usize;
        rng.shuffle(&mut locs);
        split.selected_per_class.push(take);
        split.holdout.extend_from_slice(&locs[take..]);
        split.train.extend_from_slice(&locs[..take]);
    }
    Ok(split)
}

pub fn build_samples(series: &SceneSeries, cfg: &SamplerConfig, locations: &[Location]) -> Result<Vec<SampleSequence>> {
    locations
        .iter()
        .map(|l| {
            let mut s = build_sample(series, cfg, l.row, l.col, None)?;
            s.label = Some(l.label);
            Ok(s)
        })
        .collect()
}

/// Training samples under the reference-scene constraints, plus the split
/// they came from.
pub fn extract_training_set(
    series: &SceneSeries,
    cfg: &SamplerConfig,
    labels: &LabelMap,
    num_classes: usize,
) -> Result<(Vec<SampleSequence>, TrainingSplit)> {
    cfg.validate(series)?;
    let split = select_training_locations(series, cfg, labels, num_classes)?;
    let samples = build_samples(series, cfg, &split.train)?;
    Ok((samples, split))
}

/// Anything that maps one sample to a class.
pub trait SampleClassifier {
    fn input_dim(&self) -> usize;
    fn seq_len(&self) -> usize;
    fn classify_sample(&self, sample: &SampleSequence) -> Result<usize>;
}

/// Classifies every interior pixel; boundary pixels become no-data.
pub fn classify_map(series: &SceneSeries, cfg: &SamplerConfig, model: &dyn SampleClassifier) -> Result<LabelMap> {
    cfg.validate(series)?;
    if model.input_dim() != cfg.input_dim() || model.seq_len() != cfg.seq_len {
        return Err(Error::shape(format!(
            "model takes {} vectors of {}, sampler makes {} of {}",
            model.seq_len(),
            model.input_dim(),
            cfg.seq_len,
            cfg.input_dim()
        )));
    }
    let mut map = LabelMap::filled(series.width(), series.height(), NO_DATA);
    for row in 0..series.height() {
        for col in 0..series.width() {
            if cfg.is_interior(series.width(), series.height(), row, col) {
                let s = build_sample(series, cfg, row, col, None)?;
                map.set(row, col, Some(model.classify_sample(&s)?));
            }
        }
    }
    Ok(map)
}

const CACHE_MAGIC: &[u8; 4] = b"PBSS";
const CACHE_VERSION: u32 = 1;
const NO_LABEL: u16 = u16::MAX;

/// Binary sample cache: header `magic, version u32, N u32, input_dim u32,
/// count u64`, then per sample `label u16, row u32, col u32, N valid bytes,
/// N·input_dim f64`, all little-endian.
pub fn encode_samples(samples: &[SampleSequence], seq_len: usize, input_dim: usize) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(24 + samples.len() * (10 + seq_len * (1 + 8 * input_dim)));
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(seq_len as u32).to_le_bytes());
    out.extend_from_slice(&(input_dim as u32).to_le_bytes());
    out.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for s in samples {
        if s.len() != seq_len || s.valid.len() != seq_len || s.vectors.iter().any(|v| v.len() != input_dim) {
            return Err(Error::shape(format!(
                "sample at ({}, {}) does not match {seq_len}x{input_dim}",
                s.row, s.col
            )));
        }
        let label = match s.label {
            Some(l) if l < NO_LABEL as usize => l as u16,
            Some(l) => return Err(Error::format(format!("label {l} does not fit the cache"))),
            None => NO_LABEL,
        };
        out.extend_from_slice(&label.to_le_bytes());
        out.extend_from_slice(&(s.row as u32).to_le_bytes());
        out.extend_from_slice(&(s.col as u32).to_le_bytes());
        out.extend(s.valid.iter().map(|&v| u8::from(v)));
        for v in &s.vectors {
            for x in v.iter() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn decode_samples(bytes: &[u8]) -> Result<(Vec<SampleSequence>, usize, usize)> {
    let mut r = Reader::new(bytes);
    if r.take(4)? != CACHE_MAGIC {
        return Err(Error::format("not a sample cache (bad magic)"));
    }
    let version = r.u32()?;
    if version != CACHE_VERSION {
        return Err(Error::format(format!("unsupported sample cache version {version}")));
    }
    let n = r.u32()? as usize;
    let dim = r.u32()? as usize;
    let count = r.u64()? as usize;
    let mut samples = Vec::with_capacity(count.min(1 << 20));
    for _ in 0..count {
        let label = r.u16()?;
        let row = r.u32()? as usize;
        let col = r.u32()? as usize;
        let valid = r.take(n)?.iter().map(|&b| b != 0).collect();
        let mut vectors = Vec::with_capacity(n);
        for _ in 0..n {
            let mut v = Vec::with_capacity(dim);
            for _ in 0..dim {
                v.push(r.f64()?);
            }
            vectors.push(Vector::from(v));
        }
        samples.push(SampleSequence {
            vectors,
            label: (label != NO_LABEL).then_some(label as usize),
            row,
            col,
            valid,
        });
    }
    if !r.is_empty() {
        return Err(Error::format("trailing bytes after the last sample"));
    }
    Ok((samples, n, dim))
}

pub fn write_sample_cache(path: &Path, samples: &[SampleSequence], seq_len: usize, input_dim: usize) -> Result<()> {
    fsio::write_atomic(path, &encode_samples(samples, seq_len, input_dim)?)
}

pub fn read_sample_cache(path: &Path) -> Result<(Vec<SampleSequence>, usize, usize)> {
    decode_samples(&fsio::read(path)?)
}
