//! Comparison systems: single-hidden-layer feedforward classifiers, their
//! multi-date fusion, and the pixel-width recurrent classifier.

use crate::error::{Error, Result};
use crate::math::{
    argmax, axpy, matvec_acc, matvec_t_acc, outer_acc, sigmoid_scalar, softmax_in_place, Matrix,
    Rng, Vector,
};
use crate::params::ParamSet;
use crate::recurrent::{self, cross_entropy_loss, LstmParams};
use crate::sampling::SampleSequence;

pub const HIDDEN_WIDTH: usize = 200;

/// Floor applied to each member probability before taking logs in fusion.
pub const FUSION_LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Sigmoid,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Sigmoid => sigmoid_scalar(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative expressed through the activation value.
    fn slope(self, a: f64) -> f64 {
        match self {
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Tanh => 1.0 - a * a,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Sigmoid => "sigmoid",
            Activation::Tanh => "tanh",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sigmoid" => Some(Activation::Sigmoid),
            "tanh" => Some(Activation::Tanh),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FfnParams {
    pub activation: Activation,
    pub w1: Matrix,
    pub b1: Vector,
    pub w2: Matrix,
    pub b2: Vector,
}

impl FfnParams {
    pub fn zeros(input_dim: usize, num_classes: usize, activation: Activation) -> Self {
        Self::zeros_with_width(input_dim, HIDDEN_WIDTH, num_classes, activation)
    }

    /// Arbitrary hidden width, for hand-sized checks. Trained baselines use
    /// [`HIDDEN_WIDTH`].
    pub fn zeros_with_width(
        input_dim: usize,
        hidden: usize,
        num_classes: usize,
        activation: Activation,
    ) -> Self {
        FfnParams {
            activation,
            w1: Matrix::zeros(hidden, input_dim),
            b1: Vector::zeros(hidden),
            w2: Matrix::zeros(num_classes, hidden),
            b2: Vector::zeros(num_classes),
        }
    }

    pub fn init(input_dim: usize, num_classes: usize, activation: Activation, rng: &mut Rng) -> Self {
        Self::init_with_width(input_dim, HIDDEN_WIDTH, num_classes, activation, rng)
    }

    /// Uniform weights in `±1/sqrt(fan_in)`, zero biases.
    pub fn init_with_width(
        input_dim: usize,
        hidden: usize,
        num_classes: usize,
        activation: Activation,
        rng: &mut Rng,
    ) -> Self {
        let mut p = Self::zeros_with_width(input_dim, hidden, num_classes, activation);
        p.w1 = Matrix::uniform(hidden, input_dim, 1.0 / (input_dim as f64).sqrt(), rng);
        p.w2 = Matrix::uniform(num_classes, hidden, 1.0 / (hidden as f64).sqrt(), rng);
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn num_classes(&self) -> usize {
        self.w2.rows()
    }

    fn hidden(&self, x: &[f64]) -> Result<Vector> {
        if x.len() != self.input_dim() {
            return Err(Error::shape(format!(
                "input of length {} for a network with input_dim {}",
                x.len(),
                self.input_dim()
            )));
        }
        let mut a = self.b1.clone();
        matvec_acc(&self.w1, x, &mut a);
        for v in a.iter_mut() {
            *v = self.activation.apply(*v);
        }
        Ok(a)
    }

    fn read_out(&self, hidden: &[f64]) -> Vector {
        let mut y = self.b2.clone();
        matvec_acc(&self.w2, hidden, &mut y);
        softmax_in_place(&mut y);
        y
    }

    /// Cross-entropy loss for one input; adds its gradient into `grads`.
    pub fn loss_and_grad(&self, x: &[f64], label: usize, grads: &mut FfnParams) -> Result<f64> {
        let hidden = self.hidden(x)?;
        let probs = self.read_out(&hidden);
        let loss = cross_entropy_loss(&probs, label)?;
        let mut dlogits = probs;
        dlogits[label] -= 1.0;
        outer_acc(&mut grads.w2, &dlogits, &hidden);
        axpy(1.0, &dlogits, &mut grads.b2);
        let mut dh = vec![0.0; self.hidden_dim()];
        matvec_t_acc(&self.w2, &dlogits, &mut dh);
        for (d, a) in dh.iter_mut().zip(hidden.iter()) {
            *d *= self.activation.slope(*a);
        }
        outer_acc(&mut grads.w1, &dh, x);
        axpy(1.0, &dh, &mut grads.b1);
        Ok(loss)
    }
}

impl ParamSet for FfnParams {
    fn block_names(&self) -> Vec<String> {
        ["W1", "b1", "W2", "b2"].iter().map(|s| s.to_string()).collect()
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice(),
            self.b1.as_slice(),
            self.w2.as_slice(),
            self.b2.as_slice(),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_mut_slice(),
            self.b1.as_mut_slice(),
            self.w2.as_mut_slice(),
            self.b2.as_mut_slice(),
        ]
    }
}

pub fn ffn_forward(params: &FfnParams, x: &[f64]) -> Result<Vector> {
    let hidden = params.hidden(x)?;
    Ok(params.read_out(&hidden))
}

/// One feedforward classifier per acquisition date, combined through the
/// product of their class posteriors.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionEnsemble {
    pub members: Vec<FfnParams>,
    /// Scene index each member was trained on.
    pub date_ids: Vec<usize>,
}

impl FusionEnsemble {
    pub const MEMBERS: usize = 4;

    pub fn new(members: Vec<FfnParams>, date_ids: Vec<usize>) -> Result<Self> {
        if members.len() != date_ids.len() || members.is_empty() {
            return Err(Error::argument(format!(
                "{} members for {} dates",
                members.len(),
                date_ids.len()
            )));
        }
        let (p, k) = (members[0].input_dim(), members[0].num_classes());
        if members.iter().any(|m| m.input_dim() != p || m.num_classes() != k) {
            return Err(Error::shape("fusion members disagree on input or class count"));
        }
        Ok(FusionEnsemble { members, date_ids })
    }
}

/// Renormalized joint probability, computed in the log domain.
pub fn fuse_distributions(dists: &[Vector]) -> Result<Vector> {
    let k = dists.first().map_or(0, |d| d.len());
    if k == 0 || dists.iter().any(|d| d.len() != k) {
        return Err(Error::shape("member distributions must share a non-zero length"));
    }
    let floor = FUSION_LOG_FLOOR.ln();
    let mut log_joint = vec![0.0; k];
    let mut impossible = vec![false; k];
    for d in dists {
        for (c, &p) in d.iter().enumerate() {
            if p <= 0.0 {
                impossible[c] = true;
            }
            log_joint[c] += if p > 0.0 { p.ln().max(floor) } else { floor };
        }
    }
    softmax_in_place(&mut log_joint);
    // a hard zero from any member stays a hard zero
    if impossible.iter().any(|&z| z) && !impossible.iter().all(|&z| z) {
        for (v, &z) in log_joint.iter_mut().zip(&impossible) {
            if z {
                *v = 0.0;
            }
        }
        let s: f64 = log_joint.iter().sum();
        for v in log_joint.iter_mut() {
            *v /= s;
        }
    }
    Ok(log_joint.into())
}

pub fn fuse_classify(ensemble: &FusionEnsemble, per_date_inputs: &[&[f64]]) -> Result<(usize, Vector)> {
    if per_date_inputs.len() != ensemble.members.len() {
        return Err(Error::argument(format!(
            "{} inputs for {} fusion members",
            per_date_inputs.len(),
            ensemble.members.len()
        )));
    }
    let dists = ensemble
        .members
        .iter()
        .zip(per_date_inputs)
        .map(|(m, x)| ffn_forward(m, x))
        .collect::<Result<Vec<_>>>()?;
    let fused = fuse_distributions(&dists)?;
    Ok((argmax(&fused), fused))
}

/// The recurrent classifier run on pixel-width (single-pixel, Z-band)
/// sequences.
pub fn pixel_rnn_classify(params: &LstmParams, bands: usize, sample: &SampleSequence) -> Result<usize> {
    if params.input_dim() != bands {
        return Err(Error::shape(format!(
            "pixel model has input_dim {}, expected {bands}",
            params.input_dim()
        )));
    }
    if let Some(v) = sample.vectors.iter().find(|v| v.len() != bands) {
        return Err(Error::shape(format!(
            "pixel sample vector of length {}, expected {bands}",
            v.len()
        )));
    }
    Ok(recurrent::classify(params, sample)?.0)
}
