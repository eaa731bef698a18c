//! Training and applying any of the six systems on a scene series.

use log::info;

use crate::baseline::{fuse_distributions, ffn_forward, FfnParams, FusionEnsemble};
use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::math::{argmax, Rng, Vector};
use crate::optim::{self, AdamState, TrainReport};
use crate::params::ParamSet;
use crate::raster::SceneSeries;
use crate::recurrent::{forward_vectors, LstmConfig, LstmParams};
use crate::sampling::{
    build_samples, select_training_locations, LabelMap, Location, SampleClassifier, SampleSequence,
    SamplerConfig, TrainingSplit,
};

/// A trained classifier of any of the six systems.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lstm(LstmParams),
    Ffn(FfnParams),
    Fusion(FusionEnsemble),
}

impl Model {
    /// Class posterior for one sample.
    pub fn probabilities(&self, sample: &SampleSequence) -> Result<Vector> {
        self.check(sample)?;
        match self {
            Model::Lstm(p) => Ok(forward_vectors(p, &sample.vectors)?.probabilities),
            Model::Ffn(p) => ffn_forward(p, &sample.vectors[0]),
            Model::Fusion(e) => {
                let dists = e
                    .members
                    .iter()
                    .zip(&sample.vectors)
                    .map(|(m, x)| ffn_forward(m, x))
                    .collect::<Result<Vec<_>>>()?;
                fuse_distributions(&dists)
            }
        }
    }

    pub fn num_classes(&self) -> usize {
        match self {
            Model::Lstm(p) => p.num_classes(),
            Model::Ffn(p) => p.num_classes(),
            Model::Fusion(e) => e.members[0].num_classes(),
        }
    }

    fn check(&self, sample: &SampleSequence) -> Result<()> {
        if sample.len() != self.seq_len() || sample.vectors.iter().any(|v| v.len() != self.input_dim()) {
            return Err(Error::shape(format!(
                "model takes {} vectors of {}, sample has {} of {}",
                self.seq_len(),
                self.input_dim(),
                sample.len(),
                sample.input_dim()
            )));
        }
        Ok(())
    }
}

impl SampleClassifier for Model {
    fn input_dim(&self) -> usize {
        match self {
            Model::Lstm(p) => p.input_dim(),
            Model::Ffn(p) => p.input_dim(),
            Model::Fusion(e) => e.members[0].input_dim(),
        }
    }

    fn seq_len(&self) -> usize {
        match self {
            Model::Lstm(p) => p.config.seq_len,
            Model::Ffn(_) => 1,
            Model::Fusion(e) => e.members.len(),
        }
    }

    fn classify_sample(&self, sample: &SampleSequence) -> Result<usize> {
        Ok(argmax(&self.probabilities(sample)?))
    }
}

/// A trained system with everything needed to apply it again.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedSystem {
    pub mode: Mode,
    pub model: Model,
    pub sampler: SamplerConfig,
    /// One report per trained network (four for the fusion systems).
    pub reports: Vec<TrainReport>,
}

impl TrainedSystem {
    pub fn epochs_run(&self) -> usize {
        self.reports.first().map_or(0, |r| r.history.len())
    }

    /// Mean of the members' final-epoch losses.
    pub fn final_loss(&self) -> f64 {
        let n = self.reports.len().max(1) as f64;
        self.reports.iter().map(TrainReport::final_loss).sum::<f64>() / n
    }

    pub fn classify_locations(&self, series: &SceneSeries, locations: &[Location]) -> Result<Vec<usize>> {
        build_samples(series, &self.sampler, locations)?
            .iter()
            .map(|s| self.model.classify_sample(s))
            .collect()
    }

    /// Fraction of `locations` classified as their label.
    pub fn accuracy(&self, series: &SceneSeries, locations: &[Location]) -> Result<f64> {
        if locations.is_empty() {
            return Err(Error::argument("no locations to score"));
        }
        let predicted = self.classify_locations(series, locations)?;
        let hits = predicted.iter().zip(locations).filter(|(p, l)| **p == l.label).count();
        Ok(hits as f64 / locations.len() as f64)
    }

    pub fn classify_map(&self, series: &SceneSeries) -> Result<LabelMap> {
        crate::sampling::classify_map(series, &self.sampler, &self.model)
    }
}

/// The shared split every system trains and is scored on, capped per
/// class when the configuration asks for it.
pub fn training_split(series: &SceneSeries, labels: &LabelMap, cfg: &RunConfig) -> Result<TrainingSplit> {
    let loc_cfg = cfg.location_sampler();
    loc_cfg.validate(series)?;
    let mut split = select_training_locations(series, &loc_cfg, labels, cfg.num_classes)?;
    if let Some(cap) = cfg.max_train_per_class {
        let mut kept = vec![0usize; cfg.num_classes];
        let mut train = Vec::with_capacity(split.train.len());
        for loc in split.train.drain(..) {
            if kept[loc.label] < cap {
                kept[loc.label] += 1;
                train.push(loc);
            }
        }
        split.train = train;
    }
    Ok(split)
}

fn lstm_config(cfg: &RunConfig, sampler: &SamplerConfig) -> LstmConfig {
    let mut c = LstmConfig::new(sampler.input_dim(), cfg.hidden_dim, cfg.num_classes, sampler.seq_len);
    c.use_bias = cfg.use_bias;
    c.forget_bias = cfg.forget_bias;
    c
}

fn fit<M: optim::Trainable>(model: &mut M, samples: &[SampleSequence], cfg: &RunConfig) -> Result<TrainReport> {
    let mut adam = AdamState::with_hyper(model.num_params(), &cfg.adam);
    optim::train(model, samples, &cfg.train, &mut adam)
}

/// Trains `mode` on already-extracted samples built with
/// `cfg.sampler_for(mode)`.
pub fn train_on_samples(mode: Mode, samples: &[SampleSequence], cfg: &RunConfig) -> Result<TrainedSystem> {
    cfg.validate()?;
    let sampler = cfg.sampler_for(mode);
    if samples.is_empty() {
        return Err(Error::argument("no training samples"));
    }
    let input_dim = sampler.input_dim();
    let (model, reports) = if mode.is_recurrent() {
        let mut rng = Rng::seed(cfg.init_seed);
        let mut p = LstmParams::init(lstm_config(cfg, &sampler), &mut rng)?;
        info!("{mode}: {} samples, {} parameters", samples.len(), p.num_params());
        let report = fit(&mut p, samples, cfg)?;
        (Model::Lstm(p), vec![report])
    } else if mode.is_multi() {
        let mut members = Vec::with_capacity(cfg.fusion_dates.len());
        let mut reports = Vec::with_capacity(cfg.fusion_dates.len());
        for (k, _) in cfg.fusion_dates.iter().enumerate() {
            let mut rng = Rng::derive(cfg.init_seed, k as u64);
            let mut p = FfnParams::init_with_width(input_dim, cfg.ffn_hidden, cfg.num_classes, cfg.activation, &mut rng);
            let member_samples: Vec<SampleSequence> = samples.iter().map(|s| s.datum(k)).collect();
            info!("{mode} member {k}: {} samples", member_samples.len());
            reports.push(fit(&mut p, &member_samples, cfg)?);
            members.push(p);
        }
        (Model::Fusion(FusionEnsemble::new(members, cfg.fusion_dates.clone())?), reports)
    } else {
        let mut rng = Rng::seed(cfg.init_seed);
        let mut p = FfnParams::init_with_width(input_dim, cfg.ffn_hidden, cfg.num_classes, cfg.activation, &mut rng);
        info!("{mode}: {} samples, {} parameters", samples.len(), p.num_params());
        let report = fit(&mut p, samples, cfg)?;
        (Model::Ffn(p), vec![report])
    };
    Ok(TrainedSystem {
        mode,
        model,
        sampler,
        reports,
    })
}

/// Extracts samples for `mode` at the training locations and trains it.
pub fn train_system(series: &SceneSeries, split: &TrainingSplit, mode: Mode, cfg: &RunConfig) -> Result<TrainedSystem> {
    let sampler = cfg.sampler_for(mode);
    sampler.validate(series)?;
    let samples = build_samples(series, &sampler, &split.train)?;
    train_on_samples(mode, &samples, cfg)
}
