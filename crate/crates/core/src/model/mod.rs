//! Black-box simulation models and the parameter boxes they are sampled on.

use rand::Rng;

use crate::error::{Error, Result};
use crate::seed;
use crate::summary::TimeSeries;

pub mod constants;
mod external;
mod oscillator;

pub use external::{serve, ExternalModel};
pub use oscillator::Oscillator;

/// Axis-aligned box `lo <= x <= hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl ParamBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() || lo.is_empty() {
            return Err(Error::invalid(format!(
                "box bounds need equal nonzero lengths, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (d, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(l.is_finite() && h.is_finite() && l <= h) {
                return Err(Error::invalid(format!("box dimension {d}: [{l}, {h}]")));
            }
        }
        Ok(ParamBox { lo, hi })
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(self.lo.iter().zip(&self.hi)).all(|(v, (l, h))| v >= l && v <= h)
    }
}

/// `n` i.i.d. uniform points in `bx`, reproducible from `seed`.
pub fn sample_uniform(bx: &ParamBox, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = seed::rng(seed);
    (0..n)
        .map(|_| {
            bx.lo
                .iter()
                .zip(&bx.hi)
                .map(|(&l, &h)| l + (h - l) * rng.random::<f64>())
                .collect()
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelDims {
    pub a: usize,
    pub e: usize,
    pub theta: usize,
    pub requirements: usize,
}

/// A deterministic simulator `y(a, e, t)` with failure requirements
/// `g_i(a, e, theta)`; `g_i >= 0` means requirement `i` fails.
pub trait SimulationModel: Send + Sync {
    fn dims(&self) -> ModelDims;

    fn simulate(&self, a: &[f64], e: &[f64]) -> Result<TimeSeries>;

    fn requirements(&self, a: &[f64], e: &[f64], theta: &[f64]) -> Result<Vec<f64>>;
}

pub(crate) fn check_len(what: &str, v: &[f64], want: usize) -> Result<()> {
    if v.len() != want {
        return Err(Error::invalid(format!("{what} has dimension {}, expected {want}", v.len())));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has a non-finite entry")));
    }
    Ok(())
}
