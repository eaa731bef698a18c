//! Synthetic multi-temporal sites with known ground truth.
//!
//! Classes come in pairs with a shared seasonal base curve. Even pairs are
//! *temporal* pairs: both members are identical except for a mid-season
//! bump, so they cannot be told apart on early or late dates (including
//! the reference scene). Odd pairs are *spectral* pairs: the members differ
//! by a small constant offset that is hidden under a per-pixel,
//! time-constant perturbation (`static_sigma`), which only spatial
//! averaging removes. Independent per-datum noise (`noise_sigma`) is added
//! on top. Regions are Voronoi cells; clouds are random axis-aligned
//! ellipses with an optional displaced shadow.

use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};

use crate::error::{Error, Result};
use crate::keyvalue::KeyValues;
use crate::math::Rng;
use crate::raster::{self, mask_code, ClassScheme, MaskPolicy, Scene, SceneMeta, SceneSeries};
use crate::sampling::LabelMap;

/// Gain and offset used to quantize reflectance to 16-bit DN.
pub const REFLECTANCE_MULT: f64 = 2.0e-5;
pub const REFLECTANCE_ADD: f64 = -0.1;
/// Days between consecutive scenes.
pub const REVISIT_DAYS: u64 = 16;
const CLOUD_REFLECTANCE: f64 = 0.8;
const SHADOW_REFLECTANCE: f64 = 0.03;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub num_classes: usize,
    pub seq_len: usize,
    pub bands: usize,
    /// `num_classes × seq_len × bands` reflectances, class-major then time.
    pub profiles: Vec<f64>,
    /// Independent Gaussian noise per pixel, band and scene.
    pub noise_sigma: f64,
    /// Gaussian perturbation per pixel and band, constant over time.
    pub static_sigma: f64,
    /// Fraction of each scene covered by cloud and shadow.
    pub cloud_fraction: f64,
    pub shadows: bool,
    /// Typical region diameter in pixels.
    pub region_blob_scale: usize,
    pub seed: u64,
    pub start_date: NaiveDate,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        let (k, n, z) = (8, 23, 8);
        SyntheticSpec {
            width: 128,
            height: 128,
            num_classes: k,
            seq_len: n,
            bands: z,
            profiles: designed_profiles(k, n, z, 0.04),
            noise_sigma: 0.01,
            static_sigma: 0.04,
            cloud_fraction: 0.1,
            shadows: true,
            region_blob_scale: 28,
            seed: 1,
            start_date: NaiveDate::from_ymd_opt(2016, 1, 1).unwrap(),
        }
    }
}

/// Scene index around which temporal pairs diverge.
fn bump_center(seq_len: usize) -> f64 {
    (seq_len as f64 - 1.0) * 13.0 / 22.0
}

/// Peak difference between temporal-pair members, per band.
pub const TEMPORAL_BUMP: f64 = 0.15;

/// Separation of spectral-pair members, in units of `static_sigma`.
pub const SPECTRAL_SEPARATION: f64 = 1.5;

/// The paired profile design. `static_sigma` scales the spectral-pair
/// offset so the pair stays separable by spatial averaging.
pub fn designed_profiles(num_classes: usize, seq_len: usize, bands: usize, static_sigma: f64) -> Vec<f64> {
    let mut out = vec![0.0; num_classes * seq_len * bands];
    let center = bump_center(seq_len);
    let width = (seq_len as f64 / 8.0).max(1.0);
    let per_band_offset = SPECTRAL_SEPARATION * static_sigma / (bands as f64).sqrt();
    for class in 0..num_classes {
        let pair = class / 2;
        let member = class % 2;
        let phase = 0.9 * pair as f64;
        for t in 0..seq_len {
            let season = (2.0 * std::f64::consts::PI * t as f64 / seq_len as f64 + phase).sin();
            let bump = (-((t as f64 - center) / width).powi(2)).exp();
            for b in 0..bands {
                let level = 0.08 + 0.035 * ((pair * 3 + b * 5) % 8) as f64 + 0.03 * pair as f64;
                let amp = 0.02 + 0.01 * ((pair + b) % 3) as f64;
                let mut v = level + amp * season;
                if member == 1 {
                    let sign = if b % 2 == 0 { 1.0 } else { -1.0 };
                    if pair % 2 == 0 {
                        v += sign * TEMPORAL_BUMP * bump;
                    } else {
                        v += sign * per_band_offset;
                    }
                }
                out[(class * seq_len + t) * bands + b] = v;
            }
        }
    }
    out
}

impl SyntheticSpec {
    #[inline]
    pub fn profile(&self, class: usize, t: usize, band: usize) -> f64 {
        self.profiles[(class * self.seq_len + t) * self.bands + band]
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("width", self.width),
            ("height", self.height),
            ("num_classes", self.num_classes),
            ("seq_len", self.seq_len),
            ("bands", self.bands),
            ("region_blob_scale", self.region_blob_scale),
        ];
        for (field, v) in positive {
            if v == 0 {
                return Err(Error::config(field, "must be positive"));
            }
        }
        if self.num_classes > 254 {
            return Err(Error::config("num_classes", "at most 254 classes fit a label map"));
        }
        if self.profiles.len() != self.num_classes * self.seq_len * self.bands {
            return Err(Error::config(
                "profiles",
                format!(
                    "{} values for {} classes x {} scenes x {} bands",
                    self.profiles.len(),
                    self.num_classes,
                    self.seq_len,
                    self.bands
                ),
            ));
        }
        if let Some(v) = self.profiles.iter().find(|v| !v.is_finite() || **v < -0.09 || **v > 1.2) {
            return Err(Error::config("profiles", format!("reflectance {v} outside [-0.09, 1.2]")));
        }
        for (field, v) in [("noise_sigma", self.noise_sigma), ("static_sigma", self.static_sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(field, "must be finite and non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.cloud_fraction) {
            return Err(Error::config("cloud_fraction", "must lie in [0, 1)"));
        }
        Ok(())
    }

    /// Reads a flat key-value spec; unspecified keys keep their defaults.
    /// `profiles` names a whitespace-separated text file of reflectances;
    /// without it the paired design is used.
    pub fn from_key_values(kv: &KeyValues, base_dir: &Path) -> Result<Self> {
        let d = SyntheticSpec::default();
        let mut spec = SyntheticSpec {
            width: kv.get("width", d.width)?,
            height: kv.get("height", d.height)?,
            num_classes: kv.get("num_classes", d.num_classes)?,
            seq_len: kv.get("seq_len", d.seq_len)?,
            bands: kv.get("bands", d.bands)?,
            profiles: Vec::new(),
            noise_sigma: kv.get("noise_sigma", d.noise_sigma)?,
            static_sigma: kv.get("static_sigma", d.static_sigma)?,
            cloud_fraction: kv.get("cloud_fraction", d.cloud_fraction)?,
            shadows: kv.get("shadows", d.shadows)?,
            region_blob_scale: kv.get("region_blob_scale", d.region_blob_scale)?,
            seed: kv.get("seed", d.seed)?,
            start_date: kv.get("start_date", d.start_date)?,
        };
        spec.profiles = match kv.raw("profiles") {
            Some(p) => {
                let path = base_dir.join(p);
                let text = crate::fsio::read_text(&path)?;
                text.split_whitespace()
                    .map(|s| {
                        s.parse::<f64>()
                            .map_err(|e| Error::config("profiles", format!("{}: {s:?}: {e}", path.display())))
                    })
                    .collect::<Result<_>>()?
            }
            None => designed_profiles(spec.num_classes, spec.seq_len, spec.bands, spec.static_sigma),
        };
        kv.finish()?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_key_values(&KeyValues::parse(text)?, base_dir)
    }

    pub fn acquisition_date(&self, t: usize) -> NaiveDate {
        self.start_date + Days::new(REVISIT_DAYS * t as u64)
    }

    /// Seasonal sun elevation in degrees, always inside (0, 90].
    pub fn sun_elevation(&self, t: usize) -> f64 {
        let doy = self.acquisition_date(t).format("%j").to_string().parse::<f64>().unwrap_or(1.0);
        55.0 - 20.0 * (2.0 * std::f64::consts::PI * (doy + 10.0) / 365.25).cos()
    }
}

/// Generated scenes (as DN containers) and the ground truth they were
/// drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSite {
    pub scenes: Vec<Scene>,
    pub truth: LabelMap,
}

impl SyntheticSite {
    pub fn series(&self, policy: MaskPolicy) -> Result<SceneSeries> {
        let stacks = self
            .scenes
            .iter()
            .map(|s| raster::dn_to_toa(s, policy))
            .collect::<Result<Vec<_>>>()?;
        SceneSeries::new(stacks)
    }
}

/// Voronoi regions, each cell assigned a class so every class appears
/// whenever there are at least as many cells as classes.
pub fn region_map(width: usize, height: usize, num_classes: usize, scale: usize, rng: &mut Rng) -> LabelMap {
    let cells = ((width * height) as f64 / (scale * scale) as f64).round().max(num_classes as f64) as usize;
    let sites: Vec<(f64, f64)> = (0..cells)
        .map(|_| (rng.next_f64() * height as f64, rng.next_f64() * width as f64))
        .collect();
    let mut classes: Vec<usize> = (0..cells).map(|i| i % num_classes).collect();
    rng.shuffle(&mut classes);
    let mut data = vec![0u8; width * height];
    for r in 0..height {
        for c in 0..width {
            let (y, x) = (r as f64 + 0.5, c as f64 + 0.5);
            let nearest = sites
                .iter()
                .enumerate()
                .map(|(i, &(sy, sx))| (i, (sy - y).powi(2) + (sx - x).powi(2)))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .map(|(i, _)| i)
                .unwrap_or(0);
            data[r * width + c] = classes[nearest] as u8;
        }
    }
    LabelMap {
        width,
        height,
        data,
    }
}

fn fill_ellipse(mask: &mut [u8], width: usize, height: usize, cy: f64, cx: f64, ry: f64, rx: f64, code: u8) {
    let r0 = (cy - ry).floor().max(0.0) as usize;
    let r1 = ((cy + ry).ceil().max(0.0) as usize).min(height);
    let c0 = (cx - rx).floor().max(0.0) as usize;
    let c1 = ((cx + rx).ceil().max(0.0) as usize).min(width);
    for r in r0..r1 {
        for c in c0..c1 {
            let dy = (r as f64 + 0.5 - cy) / ry;
            let dx = (c as f64 + 0.5 - cx) / rx;
            let cell = &mut mask[r * width + c];
            // clouds win over shadows where they overlap
            if dy * dy + dx * dx <= 1.0 && (*cell == mask_code::CLEAR_LAND || code == mask_code::CLOUD) {
                *cell = code;
            }
        }
    }
}

/// Fmask-style codes for one scene, with at least `fraction` of the
/// pixels contaminated (cloud plus shadow), overshooting by at most one
/// ellipse.
pub fn cloud_mask(width: usize, height: usize, fraction: f64, shadows: bool, rng: &mut Rng) -> Vec<u8> {
    let mut mask = vec![mask_code::CLEAR_LAND; width * height];
    if fraction <= 0.0 {
        return mask;
    }
    let target = (fraction * (width * height) as f64).ceil() as usize;
    let side = width.min(height) as f64;
    let (rmin, rmax) = ((side / 32.0).max(1.5), (side / 10.0).max(2.0));
    loop {
        let covered = mask.iter().filter(|&&m| m != mask_code::CLEAR_LAND).count();
        if covered >= target {
            break;
        }
        let cy = rng.next_f64() * height as f64;
        let cx = rng.next_f64() * width as f64;
        let ry = rmin + rng.next_f64() * (rmax - rmin);
        let rx = rmin + rng.next_f64() * (rmax - rmin);
        fill_ellipse(&mut mask, width, height, cy, cx, ry, rx, mask_code::CLOUD);
        if shadows {
            let (dy, dx) = (0.8 * ry, 0.8 * rx);
            fill_ellipse(&mut mask, width, height, cy + dy, cx + dx, 0.6 * ry, 0.6 * rx, mask_code::CLOUD_SHADOW);
        }
    }
    mask
}

fn quantize(rho: f64, sin_elev: f64) -> u16 {
    let q = (rho * sin_elev - REFLECTANCE_ADD) / REFLECTANCE_MULT;
    q.round().clamp(0.0, u16::MAX as f64) as u16
}

/// Generates the site deterministically from `spec.seed`: one RNG stream
/// for the regions, one for the time-constant perturbation and one per
/// scene for clouds and noise.
pub fn generate_site(spec: &SyntheticSpec) -> Result<SyntheticSite> {
    spec.validate()?;
    let (w, h, z) = (spec.width, spec.height, spec.bands);
    let truth = region_map(w, h, spec.num_classes, spec.region_blob_scale, &mut Rng::derive(spec.seed, 0));
    let mut static_rng = Rng::derive(spec.seed, 1);
    let static_offset: Vec<f64> = (0..z * w * h)
        .map(|_| if spec.static_sigma > 0.0 { static_rng.gaussian(spec.static_sigma) } else { 0.0 })
        .collect();
    let mut scenes = Vec::with_capacity(spec.seq_len);
    for t in 0..spec.seq_len {
        let mut rng = Rng::derive(spec.seed, 2 + t as u64);
        let mask = cloud_mask(w, h, spec.cloud_fraction, spec.shadows, &mut rng);
        let elev = spec.sun_elevation(t);
        let sin_elev = elev.to_radians().sin();
        let mut dn = vec![0u16; z * w * h];
        for b in 0..z {
            for r in 0..h {
                for c in 0..w {
                    let p = r * w + c;
                    let idx = (b * h + r) * w + c;
                    let noise = if spec.noise_sigma > 0.0 { rng.gaussian(spec.noise_sigma) } else { 0.0 };
                    let rho = match mask[p] {
                        mask_code::CLOUD => CLOUD_REFLECTANCE,
                        mask_code::CLOUD_SHADOW => SHADOW_REFLECTANCE,
                        _ => {
                            let class = truth.data[p] as usize;
                            spec.profile(class, t, b) + static_offset[idx] + noise
                        }
                    };
                    dn[idx] = quantize(rho, sin_elev);
                }
            }
        }
        let meta = SceneMeta {
            scene_id: format!("SYN{:03}_{}", t, spec.acquisition_date(t).format("%Y%m%d")),
            acquisition_date: spec.acquisition_date(t),
            width: w,
            height: h,
            band_count: z,
            reflectance_mult: vec![REFLECTANCE_MULT; z],
            reflectance_add: vec![REFLECTANCE_ADD; z],
            sun_elevation_deg: elev,
        };
        scenes.push(Scene::new(meta, dn, mask)?);
    }
    Ok(SyntheticSite { scenes, truth })
}

/// The series (default mask policy) and its ground-truth labels.
pub fn generate(spec: &SyntheticSpec) -> Result<(SceneSeries, LabelMap)> {
    let site = generate_site(spec)?;
    Ok((site.series(MaskPolicy::default())?, site.truth))
}

pub const MANIFEST_FILE: &str = "manifest.txt";
pub const TRUTH_FILE: &str = "truth.raw";

/// Writes one container directory per scene, the manifest and the
/// ground-truth label map under `dir`. Returns the manifest path.
pub fn write_site(dir: &Path, site: &SyntheticSite, scheme: &ClassScheme) -> Result<PathBuf> {
    let mut scene_dirs = Vec::with_capacity(site.scenes.len());
    for (t, scene) in site.scenes.iter().enumerate() {
        let d = dir.join(format!("scene_{t:02}"));
        raster::write_scene(&d, scene)?;
        scene_dirs.push(d);
    }
    let manifest = dir.join(MANIFEST_FILE);
    raster::write_manifest(&manifest, &scene_dirs)?;
    site.truth.write(&dir.join(TRUTH_FILE), scheme)?;
    Ok(manifest)
}

/// Nearest-profile label over the full clean sequence of one pixel.
pub fn nearest_profile(spec: &SyntheticSpec, series: &SceneSeries, row: usize, col: usize) -> Result<usize> {
    let mut best = (0, f64::INFINITY);
    for class in 0..spec.num_classes {
        let mut d = 0.0;
        for t in 0..spec.seq_len {
            let v = series.pixel_vector(t, row, col)?;
            for b in 0..spec.bands {
                d += (v[b] - spec.profile(class, t, b)).powi(2);
            }
        }
        if d < best.1 {
            best = (class, d);
        }
    }
    Ok(best.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64) -> SyntheticSpec {
        SyntheticSpec {
            width: 40,
            height: 32,
            region_blob_scale: 12,
            seed,
            ..SyntheticSpec::default()
        }
    }

    #[test]
    fn noiseless_classes_are_spatially_uniform() {
        let spec = SyntheticSpec {
            noise_sigma: 0.0,
            static_sigma: 0.0,
            cloud_fraction: 0.0,
            ..small(3)
        };
        let (series, truth) = generate(&spec).unwrap();
        let mut first: Vec<Option<Vec<f64>>> = vec![None; spec.num_classes];
        for r in 0..spec.height {
            for c in 0..spec.width {
                let class = truth.get(r, c).unwrap();
                let v: Vec<f64> = (0..spec.seq_len)
                    .flat_map(|t| series.pixel_vector(t, r, c).unwrap().into_vec())
                    .collect();
                match &first[class] {
                    None => first[class] = Some(v),
                    Some(f) => assert_eq!(f, &v),
                }
            }
        }
    }

    #[test]
    fn same_seed_same_site() {
        assert_eq!(generate_site(&small(9)).unwrap(), generate_site(&small(9)).unwrap());
        assert_ne!(generate_site(&small(9)).unwrap(), generate_site(&small(10)).unwrap());
    }

    #[test]
    fn every_class_present_and_dates_increase() {
        let site = generate_site(&small(4)).unwrap();
        for class in 0..8u8 {
            assert!(site.truth.data.contains(&class));
        }
        assert_eq!(site.scenes.len(), 23);
        assert!(site.series(MaskPolicy::default()).is_ok());
    }

    #[test]
    fn cloud_fraction_is_met_and_masked_pixels_are_zero() {
        let spec = SyntheticSpec {
            cloud_fraction: 0.2,
            ..small(5)
        };
        let site = generate_site(&spec).unwrap();
        let series = site.series(MaskPolicy::default()).unwrap();
        for (scene, stack) in site.scenes.iter().zip(&series.scenes) {
            let bad = scene.mask.iter().filter(|&&m| m != mask_code::CLEAR_LAND).count();
            assert!(bad as f64 >= 0.2 * (spec.width * spec.height) as f64);
            for p in 0..spec.width * spec.height {
                let masked = scene.mask[p] != mask_code::CLEAR_LAND;
                assert_eq!(stack.contaminated[p], masked);
                let zero = (0..spec.bands).all(|b| stack.toa[b * spec.width * spec.height + p] == 0.0);
                if masked {
                    assert!(zero);
                }
            }
        }
    }

    #[test]
    fn temporal_pair_identical_on_fusion_dates() {
        let spec = SyntheticSpec::default();
        for t in [0, 2, 3, 22] {
            for b in 0..spec.bands {
                assert!((spec.profile(0, t, b) - spec.profile(1, t, b)).abs() < 1e-4);
                assert!((spec.profile(2, t, b) - spec.profile(3, t, b)).abs() > 0.005);
            }
        }
        let c = bump_center(spec.seq_len).round() as usize;
        assert!((spec.profile(0, c, 0) - spec.profile(1, c, 0)).abs() > 0.07);
    }

    #[test]
    fn spec_validation_names_fields() {
        let err = SyntheticSpec::parse("cloud_fraction = 1.0", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "cloud_fraction"));
        let err = SyntheticSpec::parse("width = 0", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "width"));
        let err = SyntheticSpec::parse("colour = red", Path::new(".")).unwrap_err();
        assert!(matches!(err, Error::Config { ref field, .. } if field == "colour"));
    }
}
