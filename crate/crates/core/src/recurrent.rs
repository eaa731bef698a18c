//! LSTM and simple RNN cells, the sequence-to-one classifier, and exact
//! backpropagation through time.
//!
//! Gate numbering follows the usual LSTM layout: 1 input, 2 forget,
//! 3 output, 4 candidate. The flat parameter order is
//! `Wx1,Wh1,b1,Wx2,Wh2,b2,Wx3,Wh3,b3,Wx4,Wh4,b4,Wy,by`.

use crate::error::{Error, Result};
use crate::math::{
    argmax, axpy, matvec_acc, matvec_t_acc, outer_acc, sigmoid_scalar, softmax_in_place, Matrix,
    Rng, Vector,
};
use crate::params::ParamSet;
use crate::sampling::SampleSequence;

const INPUT: usize = 0;
const FORGET: usize = 1;
const OUTPUT: usize = 2;
const CANDIDATE: usize = 3;

/// Probability floor inside the log of the cross-entropy loss.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, PartialEq)]
pub struct LstmConfig {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
    /// Required sequence length; `0` accepts any non-empty sequence.
    pub seq_len: usize,
    /// When false the gate biases stay fixed at zero and receive no
    /// gradient, giving the bias-free gate equations.
    pub use_bias: bool,
    /// Initial value of the forget-gate bias. `0.0` unless deliberately
    /// overridden (a common `1.0` trick, not the default here).
    pub forget_bias: f64,
}

impl LstmConfig {
    pub fn new(input_dim: usize, hidden_dim: usize, num_classes: usize, seq_len: usize) -> Self {
        LstmConfig {
            input_dim,
            hidden_dim,
            num_classes,
            seq_len,
            use_bias: true,
            forget_bias: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.hidden_dim == 0 || self.num_classes == 0 {
            return Err(Error::argument(format!(
                "LSTM dimensions must be positive: input {}, hidden {}, classes {}",
                self.input_dim, self.hidden_dim, self.num_classes
            )));
        }
        if !self.use_bias && self.forget_bias != 0.0 {
            return Err(Error::argument("forget bias offset requires biases"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub config: LstmConfig,
    pub wx: [Matrix; 4],
    pub wh: [Matrix; 4],
    pub b: [Vector; 4],
    pub wy: Matrix,
    pub by: Vector,
}

impl LstmParams {
    pub fn zeros(config: LstmConfig) -> Result<Self> {
        config.validate()?;
        let (p, h, k) = (config.input_dim, config.hidden_dim, config.num_classes);
        let mut params = LstmParams {
            wx: std::array::from_fn(|_| Matrix::zeros(h, p)),
            wh: std::array::from_fn(|_| Matrix::zeros(h, h)),
            b: std::array::from_fn(|_| Vector::zeros(h)),
            wy: Matrix::zeros(k, h),
            by: Vector::zeros(k),
            config,
        };
        params.b[FORGET].fill(params.config.forget_bias);
        Ok(params)
    }

    /// Uniform in `[-1/sqrt(fan_in), 1/sqrt(fan_in))` per matrix; biases
    /// start at zero (plus the configured forget offset).
    pub fn init(config: LstmConfig, rng: &mut Rng) -> Result<Self> {
        let mut params = Self::zeros(config)?;
        let (p, h) = (params.config.input_dim, params.config.hidden_dim);
        for g in 0..4 {
            params.wx[g] = Matrix::uniform(h, p, 1.0 / (p as f64).sqrt(), rng);
            params.wh[g] = Matrix::uniform(h, h, 1.0 / (h as f64).sqrt(), rng);
        }
        params.wy = Matrix::uniform(params.config.num_classes, h, 1.0 / (h as f64).sqrt(), rng);
        Ok(params)
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn hidden_dim(&self) -> usize {
        self.config.hidden_dim
    }

    pub fn num_classes(&self) -> usize {
        self.config.num_classes
    }
}

impl ParamSet for LstmParams {
    fn block_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(14);
        for g in 1..=4 {
            names.push(format!("Wx{g}"));
            names.push(format!("Wh{g}"));
            names.push(format!("b{g}"));
        }
        names.push("Wy".into());
        names.push("by".into());
        names
    }

    fn blocks(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(14);
        for g in 0..4 {
            out.push(self.wx[g].as_slice());
            out.push(self.wh[g].as_slice());
            out.push(self.b[g].as_slice());
        }
        out.push(self.wy.as_slice());
        out.push(self.by.as_slice());
        out
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::with_capacity(14);
        for ((wx, wh), b) in self.wx.iter_mut().zip(self.wh.iter_mut()).zip(self.b.iter_mut()) {
            out.push(wx.as_mut_slice());
            out.push(wh.as_mut_slice());
            out.push(b.as_mut_slice());
        }
        out.push(self.wy.as_mut_slice());
        out.push(self.by.as_mut_slice());
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmState {
    pub h: Vector,
    pub c: Vector,
}

impl LstmState {
    pub fn zeros(hidden_dim: usize) -> Self {
        LstmState {
            h: Vector::zeros(hidden_dim),
            c: Vector::zeros(hidden_dim),
        }
    }
}

/// Everything one step computes; kept for backpropagation.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub x: Vector,
    pub i: Vector,
    pub f: Vector,
    pub o: Vector,
    pub g: Vector,
    pub c: Vector,
    pub h: Vector,
    /// `tanh(c)`.
    pub tanh_c: Vector,
    /// Gate pre-activations in gate order.
    pub preact: [Vector; 4],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForwardTrace {
    pub steps: Vec<StepRecord>,
    pub logits: Vector,
    pub probabilities: Vector,
}

impl ForwardTrace {
    pub fn prediction(&self) -> usize {
        argmax(&self.probabilities)
    }

    pub fn final_state(&self) -> LstmState {
        let last = self.steps.last().expect("trace is never empty");
        LstmState {
            h: last.h.clone(),
            c: last.c.clone(),
        }
    }
}

pub fn lstm_step(
    params: &LstmParams,
    x: &[f64],
    prev: &LstmState,
) -> Result<(LstmState, StepRecord)> {
    let hd = params.hidden_dim();
    if x.len() != params.input_dim() {
        return Err(Error::shape(format!(
            "input of length {} for an LSTM with input_dim {}",
            x.len(),
            params.input_dim()
        )));
    }
    if prev.h.len() != hd || prev.c.len() != hd {
        return Err(Error::shape(format!(
            "state of length {}/{} for hidden_dim {hd}",
            prev.h.len(),
            prev.c.len()
        )));
    }
    let x_is_zero = x.iter().all(|&v| v == 0.0);
    let preact: [Vector; 4] = std::array::from_fn(|gate| {
        let mut z = Vector::zeros(hd);
        // input term first, then recurrent, then bias: a zero input leaves
        // exactly the recurrent sum
        if !x_is_zero {
            matvec_acc(&params.wx[gate], x, &mut z);
        }
        matvec_acc(&params.wh[gate], &prev.h, &mut z);
        if params.config.use_bias {
            axpy(1.0, &params.b[gate], &mut z);
        }
        z
    });
    let gate = |k: usize| -> Vector { preact[k].iter().map(|&v| sigmoid_scalar(v)).collect::<Vec<_>>().into() };
    let i = gate(INPUT);
    let f = gate(FORGET);
    let o = gate(OUTPUT);
    let g: Vector = preact[CANDIDATE].iter().map(|v| v.tanh()).collect::<Vec<_>>().into();
    let mut c = Vector::zeros(hd);
    for k in 0..hd {
        c[k] = f[k] * prev.c[k] + i[k] * g[k];
    }
    let tanh_c: Vector = c.iter().map(|v| v.tanh()).collect::<Vec<_>>().into();
    let h: Vector = o.iter().zip(tanh_c.iter()).map(|(a, b)| a * b).collect::<Vec<_>>().into();
    debug_assert!(i.iter().chain(f.iter()).chain(o.iter()).all(|&v| (0.0..=1.0).contains(&v)));
    debug_assert!(g.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    let state = LstmState {
        h: h.clone(),
        c: c.clone(),
    };
    Ok((
        state,
        StepRecord {
            x: Vector::from(x),
            i,
            f,
            o,
            g,
            c,
            h,
            tanh_c,
            preact,
        },
    ))
}

fn output_layer(params: &LstmParams, h: &[f64]) -> (Vector, Vector) {
    let mut logits = params.by.clone();
    matvec_acc(&params.wy, h, &mut logits);
    let mut probs = logits.clone();
    softmax_in_place(&mut probs);
    (logits, probs)
}

/// Runs the cell over `vectors` from the zero state and applies the softmax
/// output layer to the last hidden state.
pub fn forward_vectors(params: &LstmParams, vectors: &[Vector]) -> Result<ForwardTrace> {
    if vectors.is_empty() {
        return Err(Error::shape("empty sequence"));
    }
    let n = params.config.seq_len;
    if n != 0 && vectors.len() != n {
        return Err(Error::shape(format!(
            "sequence of length {} for a model expecting {n}",
            vectors.len()
        )));
    }
    let mut state = LstmState::zeros(params.hidden_dim());
    let mut steps = Vec::with_capacity(vectors.len());
    for x in vectors {
        let (next, rec) = lstm_step(params, x, &state)?;
        state = next;
        steps.push(rec);
    }
    let (logits, probabilities) = output_layer(params, &state.h);
    Ok(ForwardTrace {
        steps,
        logits,
        probabilities,
    })
}

pub fn forward_sequence(params: &LstmParams, sample: &SampleSequence) -> Result<ForwardTrace> {
    forward_vectors(params, &sample.vectors)
}

pub fn cross_entropy_loss(probabilities: &[f64], label: usize) -> Result<f64> {
    if label >= probabilities.len() {
        return Err(Error::argument(format!(
            "label {label} outside {} classes",
            probabilities.len()
        )));
    }
    Ok(-probabilities[label].max(PROB_FLOOR).ln())
}

/// Gradient of the cross-entropy loss w.r.t. every parameter, by BPTT.
pub fn backward_sequence(params: &LstmParams, trace: &ForwardTrace, label: usize) -> Result<LstmParams> {
    let mut grads = params.zeros_like();
    backward_accumulate(params, trace, label, &mut grads)?;
    Ok(grads)
}

/// Adds the gradient for one sample into `grads`.
pub fn backward_accumulate(
    params: &LstmParams,
    trace: &ForwardTrace,
    label: usize,
    grads: &mut LstmParams,
) -> Result<()> {
    let k = params.num_classes();
    let hd = params.hidden_dim();
    if label >= k {
        return Err(Error::argument(format!("label {label} outside {k} classes")));
    }
    if trace.steps.is_empty() || trace.probabilities.len() != k {
        return Err(Error::shape("trace does not match the model"));
    }

    // softmax + cross-entropy: dL/dlogits = p - onehot
    let mut dlogits = trace.probabilities.clone();
    dlogits[label] -= 1.0;
    let last_h = &trace.steps[trace.steps.len() - 1].h;
    outer_acc(&mut grads.wy, &dlogits, last_h);
    axpy(1.0, &dlogits, &mut grads.by);

    let mut dh = vec![0.0; hd];
    matvec_t_acc(&params.wy, &dlogits, &mut dh);
    let mut dc_next = vec![0.0; hd];
    let zero_state = vec![0.0; hd];
    let mut da: [Vec<f64>; 4] = std::array::from_fn(|_| vec![0.0; hd]);

    for t in (0..trace.steps.len()).rev() {
        let s = &trace.steps[t];
        let (h_prev, c_prev) = if t == 0 {
            (&zero_state[..], &zero_state[..])
        } else {
            (&trace.steps[t - 1].h[..], &trace.steps[t - 1].c[..])
        };
        for j in 0..hd {
            let dc = dc_next[j] + dh[j] * s.o[j] * (1.0 - s.tanh_c[j] * s.tanh_c[j]);
            let d_o = dh[j] * s.tanh_c[j];
            let d_i = dc * s.g[j];
            let d_g = dc * s.i[j];
            let d_f = dc * c_prev[j];
            dc_next[j] = dc * s.f[j];
            da[INPUT][j] = d_i * s.i[j] * (1.0 - s.i[j]);
            da[FORGET][j] = d_f * s.f[j] * (1.0 - s.f[j]);
            da[OUTPUT][j] = d_o * s.o[j] * (1.0 - s.o[j]);
            da[CANDIDATE][j] = d_g * (1.0 - s.g[j] * s.g[j]);
        }
        let x_is_zero = s.x.is_zero();
        dh.fill(0.0);
        for gate in 0..4 {
            if !x_is_zero {
                outer_acc(&mut grads.wx[gate], &da[gate], &s.x);
            }
            if t > 0 {
                outer_acc(&mut grads.wh[gate], &da[gate], h_prev);
            }
            if params.config.use_bias {
                axpy(1.0, &da[gate], &mut grads.b[gate]);
            }
            matvec_t_acc(&params.wh[gate], &da[gate], &mut dh);
        }
    }
    Ok(())
}

/// Argmax class (lowest index on ties) and the probability vector.
pub fn classify(params: &LstmParams, sample: &SampleSequence) -> Result<(usize, Vector)> {
    let trace = forward_sequence(params, sample)?;
    Ok((trace.prediction(), trace.probabilities))
}

/// Loss for one labeled sample, without keeping the trace.
pub fn sample_loss(params: &LstmParams, vectors: &[Vector], label: usize) -> Result<f64> {
    let trace = forward_vectors(params, vectors)?;
    cross_entropy_loss(&trace.probabilities, label)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimpleRnnParams {
    pub wx: Matrix,
    pub wh: Matrix,
    pub bh: Vector,
    pub wy: Matrix,
    pub by: Vector,
}

impl SimpleRnnParams {
    pub fn zeros(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        SimpleRnnParams {
            wx: Matrix::zeros(hidden_dim, input_dim),
            wh: Matrix::zeros(hidden_dim, hidden_dim),
            bh: Vector::zeros(hidden_dim),
            wy: Matrix::zeros(num_classes, hidden_dim),
            by: Vector::zeros(num_classes),
        }
    }

    fn check(&self) -> Result<()> {
        let hd = self.wh.rows();
        if self.wh.cols() != hd
            || self.wx.rows() != hd
            || self.bh.len() != hd
            || self.wy.cols() != hd
            || self.by.len() != self.wy.rows()
        {
            return Err(Error::shape("inconsistent simple RNN parameter shapes"));
        }
        Ok(())
    }

    /// Softmax read-out of a hidden state.
    pub fn output(&self, h: &[f64]) -> Result<Vector> {
        self.check()?;
        if h.len() != self.wy.cols() {
            return Err(Error::shape("hidden state length"));
        }
        let mut y = self.by.clone();
        matvec_acc(&self.wy, h, &mut y);
        softmax_in_place(&mut y);
        Ok(y)
    }
}

impl ParamSet for SimpleRnnParams {
    fn block_names(&self) -> Vec<String> {
        ["Wx", "Wh", "bh", "Wy", "by"].iter().map(|s| s.to_string()).collect()
    }

    fn blocks(&self) -> Vec<&[f64]> {
        vec![
            self.wx.as_slice(),
            self.wh.as_slice(),
            self.bh.as_slice(),
            self.wy.as_slice(),
            self.by.as_slice(),
        ]
    }

    fn blocks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.wx.as_mut_slice(),
            self.wh.as_mut_slice(),
            self.bh.as_mut_slice(),
            self.wy.as_mut_slice(),
            self.by.as_mut_slice(),
        ]
    }
}

/// `h = tanh(Wx·x + Wh·h_prev + bh)`.
pub fn simple_rnn_step(params: &SimpleRnnParams, x: &[f64], h_prev: &[f64]) -> Result<Vector> {
    params.check()?;
    if x.len() != params.wx.cols() || h_prev.len() != params.wh.cols() {
        return Err(Error::shape(format!(
            "simple RNN step with input {} (want {}) and state {} (want {})",
            x.len(),
            params.wx.cols(),
            h_prev.len(),
            params.wh.cols()
        )));
    }
    let mut z = params.bh.clone();
    matvec_acc(&params.wx, x, &mut z);
    matvec_acc(&params.wh, h_prev, &mut z);
    for v in z.iter_mut() {
        *v = v.tanh();
    }
    Ok(z)
}
