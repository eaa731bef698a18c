//! Ordered flat view over a model's learnable arrays.

use crate::error::{Error, Result};

/// A set of learnable arrays with a fixed declared order.
///
/// The same type doubles as its own gradient container, so gradient
/// shapes mirror the parameters by construction.
pub trait ParamSet: Clone {
    /// Field names in declared order, one per block.
    fn block_names(&self) -> Vec<String>;

    fn blocks(&self) -> Vec<&[f64]>;

    fn blocks_mut(&mut self) -> Vec<&mut [f64]>;

    fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for b in z.blocks_mut() {
            b.fill(0.0);
        }
        z
    }

    fn num_params(&self) -> usize {
        self.blocks().iter().map(|b| b.len()).sum()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for b in self.blocks() {
            out.extend_from_slice(b);
        }
        out
    }

    fn load_flat(&mut self, flat: &[f64]) -> Result<()> {
        let n = self.num_params();
        if flat.len() != n {
            return Err(Error::shape(format!(
                "parameter array of length {} for a model with {n} parameters",
                flat.len()
            )));
        }
        let mut off = 0;
        for b in self.blocks_mut() {
            b.copy_from_slice(&flat[off..off + b.len()]);
            off += b.len();
        }
        Ok(())
    }

    /// `self += scale · other`.
    fn add_scaled(&mut self, other: &Self, scale: f64) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    fn scale(&mut self, factor: f64) {
        for b in self.blocks_mut() {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }

    fn all_finite(&self) -> bool {
        self.blocks().iter().all(|b| b.iter().all(|v| v.is_finite()))
    }
}
