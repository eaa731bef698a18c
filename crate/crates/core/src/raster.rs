//! Multi-temporal multi-spectral raster model.
//!
//! A [`Scene`] holds raw 16-bit digital numbers plus a per-pixel mask;
//! [`dn_to_toa`] turns it into a [`ReflectanceStack`] of top-of-atmosphere
//! reflectance with contaminated pixels zeroed in every band, and a
//! [`SceneSeries`] is the co-registered, time-ordered list of stacks.
//!
//! On disk a scene is a directory with `meta.json`, `bands.raw`
//! (band-sequential `u16` little-endian, row-major within each band) and
//! `mask.raw` (one `u8` code per pixel, row-major). A series manifest is a
//! text file listing scene directories in temporal order, one per line,
//! relative to the manifest's own directory.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio;
use crate::math::Vector;

/// Fmask codes.
pub mod mask_code {
    pub const CLEAR_LAND: u8 = 0;
    pub const CLEAR_WATER: u8 = 1;
    pub const CLOUD_SHADOW: u8 = 2;
    pub const SNOW: u8 = 3;
    pub const CLOUD: u8 = 4;
    pub const NODATA: u8 = 255;
}

/// TOA values below this are logged on import.
pub const LOW_TOA_WARN: f64 = -0.2;
/// Upper end of the typical clear-pixel range; larger values are logged.
pub const HIGH_TOA_WARN: f64 = 1.6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MaskPolicy {
    pub snow_is_contaminated: bool,
}

impl MaskPolicy {
    pub fn is_contaminated(&self, code: u8) -> bool {
        match code {
            mask_code::CLOUD_SHADOW | mask_code::CLOUD | mask_code::NODATA => true,
            mask_code::SNOW => self.snow_is_contaminated,
            _ => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneMeta {
    pub scene_id: String,
    pub acquisition_date: NaiveDate,
    pub width: usize,
    pub height: usize,
    pub band_count: usize,
    pub reflectance_mult: Vec<f64>,
    pub reflectance_add: Vec<f64>,
    pub sun_elevation_deg: f64,
}

impl SceneMeta {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::argument(format!(
                "scene {} has empty extent {}x{}",
                self.scene_id, self.width, self.height
            )));
        }
        if self.band_count == 0
            || self.reflectance_mult.len() != self.band_count
            || self.reflectance_add.len() != self.band_count
        {
            return Err(Error::argument(format!(
                "scene {}: {} bands but {} gains and {} offsets",
                self.scene_id,
                self.band_count,
                self.reflectance_mult.len(),
                self.reflectance_add.len()
            )));
        }
        if !(self.sun_elevation_deg > 0.0 && self.sun_elevation_deg <= 90.0) {
            return Err(Error::argument(format!(
                "scene {}: sun elevation {} outside (0, 90]",
                self.scene_id, self.sun_elevation_deg
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub meta: SceneMeta,
    /// Band-sequential, row-major within band.
    pub dn: Vec<u16>,
    pub mask: Vec<u8>,
}

impl Scene {
    pub fn new(meta: SceneMeta, dn: Vec<u16>, mask: Vec<u8>) -> Result<Self> {
        meta.validate()?;
        if dn.len() != meta.pixels() * meta.band_count || mask.len() != meta.pixels() {
            return Err(Error::shape(format!(
                "scene {}: {} DN values and {} mask codes for {}x{}x{}",
                meta.scene_id,
                dn.len(),
                mask.len(),
                meta.width,
                meta.height,
                meta.band_count
            )));
        }
        Ok(Scene { meta, dn, mask })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReflectanceStack {
    pub meta: SceneMeta,
    /// Same layout as [`Scene::dn`].
    pub toa: Vec<f64>,
    pub mask: Vec<u8>,
    /// Per pixel: true when the pixel was zeroed by the mask.
    pub contaminated: Vec<bool>,
}

impl ReflectanceStack {
    #[inline]
    pub fn index(&self, band: usize, row: usize, col: usize) -> usize {
        (band * self.meta.height + row) * self.meta.width + col
    }

    #[inline]
    pub fn value(&self, band: usize, row: usize, col: usize) -> f64 {
        self.toa[self.index(band, row, col)]
    }

    #[inline]
    pub fn is_contaminated(&self, row: usize, col: usize) -> bool {
        self.contaminated[row * self.meta.width + col]
    }

    pub fn contaminated_count(&self) -> usize {
        self.contaminated.iter().filter(|&&c| c).count()
    }
}

/// `rho = (M * Q + A) / sin(sun elevation)` per band, then the mask.
pub fn dn_to_toa(scene: &Scene, policy: MaskPolicy) -> Result<ReflectanceStack> {
    let meta = &scene.meta;
    meta.validate()?;
    let sin_e = meta.sun_elevation_deg.to_radians().sin();
    let n = meta.pixels();
    let mut toa = Vec::with_capacity(scene.dn.len());
    let (mut low, mut high) = (0usize, 0usize);
    for band in 0..meta.band_count {
        let (m, a) = (meta.reflectance_mult[band], meta.reflectance_add[band]);
        for (&q, &code) in scene.dn[band * n..(band + 1) * n].iter().zip(&scene.mask) {
            let rho = (m * f64::from(q) + a) / sin_e;
            if !policy.is_contaminated(code) {
                if rho < LOW_TOA_WARN {
                    low += 1;
                } else if rho > HIGH_TOA_WARN {
                    high += 1;
                }
            }
            toa.push(rho);
        }
    }
    if low > 0 {
        warn!("scene {}: {low} clear values below {LOW_TOA_WARN}", meta.scene_id);
    }
    if high > 0 {
        warn!("scene {}: {high} clear values above {HIGH_TOA_WARN}", meta.scene_id);
    }
    let stack = ReflectanceStack {
        meta: meta.clone(),
        toa,
        mask: vec![mask_code::CLEAR_LAND; n],
        contaminated: vec![false; n],
    };
    apply_mask(stack, &scene.mask, policy)
}

/// Zeroes every band of each contaminated pixel. Idempotent.
pub fn apply_mask(mut stack: ReflectanceStack, mask: &[u8], policy: MaskPolicy) -> Result<ReflectanceStack> {
    let n = stack.meta.pixels();
    if mask.len() != n {
        return Err(Error::shape(format!(
            "mask of {} codes for a {}x{} stack",
            mask.len(),
            stack.meta.width,
            stack.meta.height
        )));
    }
    for (p, &code) in mask.iter().enumerate() {
        if policy.is_contaminated(code) {
            stack.contaminated[p] = true;
            for band in 0..stack.meta.band_count {
                stack.toa[band * n + p] = 0.0;
            }
        }
    }
    stack.mask = mask.to_vec();
    Ok(stack)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SceneSeries {
    pub scenes: Vec<ReflectanceStack>,
}

impl SceneSeries {
    pub fn new(scenes: Vec<ReflectanceStack>) -> Result<Self> {
        let first = scenes
            .first()
            .ok_or_else(|| Error::argument("a series needs at least one scene"))?;
        let (w, h, z) = (first.meta.width, first.meta.height, first.meta.band_count);
        for pair in scenes.windows(2) {
            if pair[1].meta.acquisition_date <= pair[0].meta.acquisition_date {
                return Err(Error::argument(format!(
                    "scene dates must increase: {} then {}",
                    pair[0].meta.acquisition_date, pair[1].meta.acquisition_date
                )));
            }
        }
        if let Some(s) = scenes
            .iter()
            .find(|s| s.meta.width != w || s.meta.height != h || s.meta.band_count != z)
        {
            return Err(Error::shape(format!(
                "scene {} is {}x{}x{}, series is {w}x{h}x{z}",
                s.meta.scene_id, s.meta.width, s.meta.height, s.meta.band_count
            )));
        }
        Ok(SceneSeries { scenes })
    }

    pub fn len(&self) -> usize {
        self.scenes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scenes.is_empty()
    }

    pub fn width(&self) -> usize {
        self.scenes[0].meta.width
    }

    pub fn height(&self) -> usize {
        self.scenes[0].meta.height
    }

    pub fn bands(&self) -> usize {
        self.scenes[0].meta.band_count
    }

    /// Day gaps between consecutive scenes; informational only.
    pub fn intervals_days(&self) -> Vec<i64> {
        self.scenes
            .windows(2)
            .map(|p| (p[1].meta.acquisition_date - p[0].meta.acquisition_date).num_days())
            .collect()
    }

    pub fn pixel_vector(&self, t: usize, row: usize, col: usize) -> Result<Vector> {
        if t >= self.len() || row >= self.height() || col >= self.width() {
            return Err(Error::Index(format!(
                "scene {t}, pixel ({row}, {col}) outside {} scenes of {}x{}",
                self.len(),
                self.height(),
                self.width()
            )));
        }
        let s = &self.scenes[t];
        Ok((0..self.bands())
            .map(|b| s.value(b, row, col))
            .collect::<Vec<_>>()
            .into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LandCoverClass {
    pub id: u8,
    pub name: String,
    pub description: String,
    pub color: [u8; 3],
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassScheme {
    pub name: String,
    pub classes: Vec<LandCoverClass>,
}

impl ClassScheme {
    /// The eight-class mixed Anderson level 1/2 legend.
    pub fn everglades() -> Self {
        let rows: [(&str, &str, [u8; 3]); 8] = [
            (
                "High Intensity Urban",
                "Commercial, industrial and institutional buildings; large open spaces and transport facilities; residential areas over half impervious.",
                [220, 20, 30],
            ),
            (
                "Low Intensity Urban",
                "Residential areas under half impervious; small service buildings; state highways.",
                [250, 160, 160],
            ),
            (
                "Barren Land",
                "Little construction, vegetation or impervious surface; bare soil and beaches.",
                [200, 180, 140],
            ),
            (
                "Forest",
                "Herbaceous cover and evergreen trees, including some wetland evergreen forest.",
                [30, 110, 40],
            ),
            (
                "Cropland",
                "Crops and pastures mixed with bushes and some fallow land.",
                [230, 215, 70],
            ),
            (
                "Woody Wetland",
                "Cypress/tupelo, strand swamp, coniferous and hardwood wetland, mangrove swamp.",
                [110, 150, 110],
            ),
            (
                "Emergent Herbaceous Wetland",
                "Non-forested freshwater wetland, prairies, bogs and marshes; saltwater marsh.",
                [130, 200, 210],
            ),
            ("Water", "Streams, canals, lakes, ponds and bays.", [20, 70, 200]),
        ];
        ClassScheme {
            name: "everglades-8".into(),
            classes: rows
                .iter()
                .enumerate()
                .map(|(i, (name, desc, color))| LandCoverClass {
                    id: i as u8,
                    name: name.to_string(),
                    description: desc.to_string(),
                    color: *color,
                })
                .collect(),
        }
    }

    /// Generic `class-N` legend with evenly spread colors.
    pub fn generic(k: usize) -> Self {
        if k == 8 {
            let mut s = Self::everglades();
            s.name = "generic-8".into();
            return s;
        }
        ClassScheme {
            name: format!("generic-{k}"),
            classes: (0..k)
                .map(|i| {
                    let hue = (i * 255 / k.max(1)) as u8;
                    LandCoverClass {
                        id: i as u8,
                        name: format!("class-{i}"),
                        description: String::new(),
                        color: [hue, 255 - hue, hue / 2 + 64],
                    }
                })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    pub fn names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name.clone()).collect()
    }

    pub fn color(&self, id: u8) -> [u8; 3] {
        self.classes
            .get(id as usize)
            .map_or([0, 0, 0], |c| c.color)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, c) in self.classes.iter().enumerate() {
            if c.id as usize != i {
                return Err(Error::format(format!("class ids must be contiguous from 0, got {} at {i}", c.id)));
            }
        }
        Ok(())
    }

    /// The scheme for a known name, or a generic one of size `k`.
    pub fn by_name(name: &str, k: usize) -> Self {
        match name {
            "everglades-8" => Self::everglades(),
            _ => Self::generic(k),
        }
    }
}

pub const META_FILE: &str = "meta.json";
pub const BANDS_FILE: &str = "bands.raw";
pub const MASK_FILE: &str = "mask.raw";
pub const TOA_CACHE_FILE: &str = "toa.raw";

pub fn write_scene(dir: &Path, scene: &Scene) -> Result<()> {
    let meta = serde_json::to_string_pretty(&scene.meta)
        .map_err(|e| Error::format(format!("encoding scene metadata: {e}")))?;
    fsio::write_atomic(&dir.join(META_FILE), meta.as_bytes())?;
    let mut bands = Vec::with_capacity(scene.dn.len() * 2);
    for v in &scene.dn {
        bands.extend_from_slice(&v.to_le_bytes());
    }
    fsio::write_atomic(&dir.join(BANDS_FILE), &bands)?;
    fsio::write_atomic(&dir.join(MASK_FILE), &scene.mask)
}

pub fn read_scene(dir: &Path) -> Result<Scene> {
    let meta_path = dir.join(META_FILE);
    let meta: SceneMeta = serde_json::from_str(&fsio::read_text(&meta_path)?)
        .map_err(|e| Error::format(format!("{}: {e}", meta_path.display())))?;
    meta.validate()?;
    let raw = fsio::read(&dir.join(BANDS_FILE))?;
    let want = meta.pixels() * meta.band_count * 2;
    if raw.len() != want {
        return Err(Error::format(format!(
            "{}: {} bytes, expected {want}",
            dir.join(BANDS_FILE).display(),
            raw.len()
        )));
    }
    let dn = raw
        .chunks_exact(2)
        .map(|c| u16::from_le_bytes([c[0], c[1]]))
        .collect();
    let mask = fsio::read(&dir.join(MASK_FILE))?;
    if mask.len() != meta.pixels() {
        return Err(Error::format(format!(
            "{}: {} bytes, expected {}",
            dir.join(MASK_FILE).display(),
            mask.len(),
            meta.pixels()
        )));
    }
    Scene::new(meta, dn, mask)
}

/// Writes the computed reflectance as `f64` little-endian next to the scene.
pub fn write_toa_cache(dir: &Path, stack: &ReflectanceStack) -> Result<()> {
    let mut out = Vec::with_capacity(stack.toa.len() * 8);
    for v in &stack.toa {
        out.extend_from_slice(&v.to_le_bytes());
    }
    fsio::write_atomic(&dir.join(TOA_CACHE_FILE), &out)
}

pub fn write_manifest(path: &Path, scene_dirs: &[PathBuf]) -> Result<()> {
    let base = path.parent().unwrap_or(Path::new(""));
    let mut text = String::new();
    for d in scene_dirs {
        let rel = d.strip_prefix(base).unwrap_or(d);
        text.push_str(&rel.to_string_lossy());
        text.push('\n');
    }
    fsio::write_atomic(path, text.as_bytes())
}

/// Scene directories listed in a manifest, resolved against its directory.
/// Blank lines and `#` comments are skipped.
pub fn read_manifest(path: &Path) -> Result<Vec<PathBuf>> {
    let base = path.parent().unwrap_or(Path::new(""));
    let dirs: Vec<PathBuf> = fsio::read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| base.join(l))
        .collect();
    if dirs.is_empty() {
        return Err(Error::format(format!("{}: manifest lists no scenes", path.display())));
    }
    Ok(dirs)
}

pub fn load_series(manifest: &Path, policy: MaskPolicy) -> Result<SceneSeries> {
    let mut stacks = Vec::new();
    for dir in read_manifest(manifest)? {
        let scene = read_scene(&dir)?;
        let stack = dn_to_toa(&scene, policy)?;
        info!(
            "loaded {} ({}), {} contaminated pixels",
            stack.meta.scene_id,
            stack.meta.acquisition_date,
            stack.contaminated_count()
        );
        stacks.push(stack);
    }
    SceneSeries::new(stacks)
}
