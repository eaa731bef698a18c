//! Binary checkpoint of a trained system.
//!
//! Little-endian throughout:
//!
//! ```text
//! "PBRN" u32 version
//! u8 mode code, string rng name, u64 init seed, string class scheme,
//! u8 snow-is-contaminated, sampler settings, u32 class count,
//! model (kind byte, dimensions, named parameter arrays in declared order),
//! training reports (steps and per-epoch losses)
//! ```
//!
//! Strings are a `u32` byte length followed by UTF-8. Parameters are
//! stored as raw `f64` bits, so a round trip is bit-exact.

use std::path::Path;

use crate::baseline::{Activation, FfnParams, FusionEnsemble};
use crate::config::Mode;
use crate::error::{Error, Result};
use crate::fsio::{self, Reader, Writer};
use crate::math::Rng;
use crate::optim::{EpochLoss, TrainReport};
use crate::params::ParamSet;
use crate::pipeline::{Model, TrainedSystem};
use crate::raster::MaskPolicy;
use crate::recurrent::{LstmConfig, LstmParams};
use crate::sampling::SamplerConfig;

pub const MAGIC: &[u8; 4] = b"PBRN";
pub const VERSION: u32 = 1;

const KIND_LSTM: u8 = 0;
const KIND_FFN: u8 = 1;
const KIND_FUSION: u8 = 2;

/// A trained system plus the settings needed to reproduce its inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub system: TrainedSystem,
    pub init_seed: u64,
    pub scheme: String,
    pub mask_policy: MaskPolicy,
}

impl Checkpoint {
    pub fn num_classes(&self) -> usize {
        self.system.model.num_classes()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut w = Writer::default();
        w.bytes(MAGIC);
        w.u32(VERSION);
        w.u8(self.system.mode.code());
        w.string(Rng::ALGORITHM);
        w.u64(self.init_seed);
        w.string(&self.scheme);
        w.u8(u8::from(self.mask_policy.snow_is_contaminated));
        put_sampler(&mut w, &self.system.sampler)?;
        w.u32(dim(self.num_classes())?);
        match &self.system.model {
            Model::Lstm(p) => {
                w.u8(KIND_LSTM);
                let c = &p.config;
                for d in [c.input_dim, c.hidden_dim, c.num_classes, c.seq_len] {
                    w.u32(dim(d)?);
                }
                w.u8(u8::from(c.use_bias));
                w.f64(c.forget_bias);
                put_blocks(&mut w, p);
            }
            Model::Ffn(p) => {
                w.u8(KIND_FFN);
                put_ffn(&mut w, p)?;
            }
            Model::Fusion(e) => {
                w.u8(KIND_FUSION);
                w.u32(dim(e.members.len())?);
                for (m, &date) in e.members.iter().zip(&e.date_ids) {
                    w.u32(dim(date)?);
                    put_ffn(&mut w, m)?;
                }
            }
        }
        w.u32(dim(self.system.reports.len())?);
        for r in &self.system.reports {
            w.u64(r.steps);
            w.u32(dim(r.history.len())?);
            for e in &r.history {
                w.u32(dim(e.epoch)?);
                w.f64(e.mean_loss);
                match e.holdout_loss {
                    Some(h) => {
                        w.u8(1);
                        w.f64(h);
                    }
                    None => w.u8(0),
                }
            }
        }
        Ok(w.buf)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(4)? != MAGIC {
            return Err(Error::format("not a model checkpoint (bad magic)"));
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(Error::format(format!("unsupported checkpoint version {version}")));
        }
        let code = r.u8()?;
        let mode = Mode::from_code(code).ok_or_else(|| Error::format(format!("unknown mode code {code}")))?;
        let rng = r.string()?;
        if rng != Rng::ALGORITHM {
            return Err(Error::format(format!(
                "checkpoint was made with RNG {rng:?}, this build uses {:?}",
                Rng::ALGORITHM
            )));
        }
        let init_seed = r.u64()?;
        let scheme = r.string()?;
        let mask_policy = MaskPolicy {
            snow_is_contaminated: flag(&mut r)?,
        };
        let sampler = get_sampler(&mut r)?;
        let num_classes = r.u32()? as usize;
        let kind = r.u8()?;
        let model = match kind {
            KIND_LSTM => {
                let (input_dim, hidden_dim, classes, seq_len) =
                    (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
                let use_bias = flag(&mut r)?;
                let forget_bias = r.f64()?;
                let n = 4 * hidden_dim * (input_dim + hidden_dim + 1) + classes * (hidden_dim + 1);
                ensure_room(&r, n)?;
                let mut p = LstmParams::zeros(LstmConfig {
                    input_dim,
                    hidden_dim,
                    num_classes: classes,
                    seq_len,
                    use_bias,
                    forget_bias,
                })?;
                get_blocks(&mut r, &mut p)?;
                Model::Lstm(p)
            }
            KIND_FFN => Model::Ffn(get_ffn(&mut r)?),
            KIND_FUSION => {
                let count = r.u32()? as usize;
                ensure_room(&r, count)?;
                let mut members = Vec::with_capacity(count);
                let mut dates = Vec::with_capacity(count);
                for _ in 0..count {
                    dates.push(r.u32()? as usize);
                    members.push(get_ffn(&mut r)?);
                }
                Model::Fusion(FusionEnsemble::new(members, dates)?)
            }
            other => return Err(Error::format(format!("unknown model kind {other}"))),
        };
        let expected_kind = if mode.is_recurrent() {
            KIND_LSTM
        } else if mode.is_multi() {
            KIND_FUSION
        } else {
            KIND_FFN
        };
        if kind != expected_kind {
            return Err(Error::format(format!("{mode} checkpoint holds the wrong kind of model")));
        }
        if model.num_classes() != num_classes {
            return Err(Error::format("class count disagrees with the stored model"));
        }
        let count = r.u32()? as usize;
        ensure_room(&r, count)?;
        let mut reports = Vec::with_capacity(count);
        for _ in 0..count {
            let steps = r.u64()?;
            let epochs = r.u32()? as usize;
            ensure_room(&r, epochs)?;
            let mut history = Vec::with_capacity(epochs);
            for _ in 0..epochs {
                let epoch = r.u32()? as usize;
                let mean_loss = r.f64()?;
                let holdout_loss = if flag(&mut r)? { Some(r.f64()?) } else { None };
                history.push(EpochLoss {
                    epoch,
                    mean_loss,
                    holdout_loss,
                });
            }
            reports.push(TrainReport { history, steps });
        }
        if !r.is_empty() {
            return Err(Error::format(format!("{} trailing bytes after checkpoint", r.remaining())));
        }
        Ok(Checkpoint {
            system: TrainedSystem {
                mode,
                model,
                sampler,
                reports,
            },
            init_seed,
            scheme,
            mask_policy,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fsio::write_atomic(path, &self.encode()?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::decode(&fsio::read(path)?)
    }
}

fn dim(v: usize) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::format(format!("{v} does not fit a checkpoint field")))
}

fn flag(r: &mut Reader) -> Result<bool> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        b => Err(Error::format(format!("flag byte {b} is neither 0 nor 1"))),
    }
}

/// Rejects sizes that could not possibly be backed by the remaining
/// bytes, before allocating for them.
fn ensure_room(r: &Reader, items: usize) -> Result<()> {
    if items > r.remaining() {
        return Err(Error::format(format!(
            "checkpoint declares {items} items with only {} bytes left",
            r.remaining()
        )));
    }
    Ok(())
}

fn put_sampler(w: &mut Writer, s: &SamplerConfig) -> Result<()> {
    for d in [s.patch_x, s.patch_y, s.bands, s.seq_len, s.reference_scene] {
        w.u32(dim(d)?);
    }
    w.f64(s.train_fraction);
    w.u64(s.seed);
    w.u8(u8::from(s.zero_whole_patch));
    match &s.scenes {
        Some(scenes) => {
            w.u8(1);
            w.u32(dim(scenes.len())?);
            for &t in scenes {
                w.u32(dim(t)?);
            }
        }
        None => w.u8(0),
    }
    Ok(())
}

fn get_sampler(r: &mut Reader) -> Result<SamplerConfig> {
    let patch_x = r.u32()? as usize;
    let patch_y = r.u32()? as usize;
    let bands = r.u32()? as usize;
    let seq_len = r.u32()? as usize;
    let reference_scene = r.u32()? as usize;
    let train_fraction = r.f64()?;
    let seed = r.u64()?;
    let zero_whole_patch = flag(r)?;
    let scenes = if flag(r)? {
        let n = r.u32()? as usize;
        ensure_room(r, n)?;
        Some((0..n).map(|_| r.u32().map(|t| t as usize)).collect::<Result<Vec<_>>>()?)
    } else {
        None
    };
    Ok(SamplerConfig {
        patch_x,
        patch_y,
        bands,
        seq_len,
        reference_scene,
        train_fraction,
        seed,
        scenes,
        zero_whole_patch,
    })
}

fn put_blocks<P: ParamSet>(w: &mut Writer, p: &P) {
    let names = p.block_names();
    w.u32(names.len() as u32);
    for (name, block) in names.iter().zip(p.blocks()) {
        w.string(name);
        w.u64(block.len() as u64);
        for &v in block {
            w.f64(v);
        }
    }
}

/// Reads named arrays into `p`, which must already have the right shape.
fn get_blocks<P: ParamSet>(r: &mut Reader, p: &mut P) -> Result<()> {
    let names = p.block_names();
    let count = r.u32()? as usize;
    if count != names.len() {
        return Err(Error::format(format!("{count} parameter arrays, expected {}", names.len())));
    }
    for (name, block) in names.iter().zip(p.blocks_mut()) {
        let stored = r.string()?;
        if &stored != name {
            return Err(Error::format(format!("parameter array {stored:?} where {name:?} was expected")));
        }
        let len = r.u64()? as usize;
        if len != block.len() {
            return Err(Error::format(format!("{name} has {len} values, expected {}", block.len())));
        }
        for v in block.iter_mut() {
            *v = r.f64()?;
        }
    }
    Ok(())
}

fn put_ffn(w: &mut Writer, p: &FfnParams) -> Result<()> {
    w.u8(match p.activation {
        Activation::Sigmoid => 0,
        Activation::Tanh => 1,
    });
    for d in [p.input_dim(), p.hidden_dim(), p.num_classes()] {
        w.u32(dim(d)?);
    }
    put_blocks(w, p);
    Ok(())
}

fn get_ffn(r: &mut Reader) -> Result<FfnParams> {
    let activation = match r.u8()? {
        0 => Activation::Sigmoid,
        1 => Activation::Tanh,
        a => return Err(Error::format(format!("unknown activation code {a}"))),
    };
    let (input_dim, hidden, classes) = (r.u32()? as usize, r.u32()? as usize, r.u32()? as usize);
    ensure_room(r, hidden * (input_dim + 1) + classes * (hidden + 1))?;
    let mut p = FfnParams::zeros_with_width(input_dim, hidden, classes, activation);
    get_blocks(r, &mut p)?;
    Ok(p)
}
