//! Empirical CDFs, the weighted-vs-empirical KS discrepancy, and the
//! asymptotic Kolmogorov distribution.

use crate::error::{Error, Result};

/// Series terms below this are dropped.
const SERIES_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    pub fn new(mut points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("ECDF needs at least one point"));
        }
        if points.iter().any(|p| p.is_nan()) {
            return Err(Error::invalid("ECDF point is NaN"));
        }
        points.sort_by(f64::total_cmp);
        Ok(Ecdf { sorted: points })
    }

    pub fn n(&self) -> usize {
        self.sorted.len()
    }

    pub fn points(&self) -> &[f64] {
        &self.sorted
    }

    /// `F(x-)`: fraction of points strictly below `x`.
    pub fn left(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&p| p < x) as f64 / self.n() as f64
    }

    /// `F(x+) = F(x)`: fraction of points at or below `x`.
    pub fn right(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&p| p <= x) as f64 / self.n() as f64
    }
}

pub fn ecdf_left(ecdf: &Ecdf, x: f64) -> f64 {
    ecdf.left(x)
}

pub fn ecdf_right(ecdf: &Ecdf, x: f64) -> f64 {
    ecdf.right(x)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSample {
    points: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSample {
    pub fn new(points: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() || points.is_empty() {
            return Err(Error::invalid(format!(
                "weighted sample needs matching nonempty points/weights, got {} and {}",
                points.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|&w| !(w >= 0.0)) {
            return Err(Error::invalid("weights must be nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        if points.iter().any(|p| p.is_nan()) {
            return Err(Error::invalid("weighted sample point is NaN"));
        }
        Ok(WeightedSample { points, weights })
    }

    pub fn uniform(points: Vec<f64>) -> Result<Self> {
        let w = 1.0 / points.len().max(1) as f64;
        let n = points.len();
        Self::new(points, vec![w; n])
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `G(x) = sum_j w_j 1{p_j <= x}`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .filter(|(p, _)| **p <= x)
            .map(|(_, w)| w)
            .sum()
    }
}

/// `sup_x |G(x) - F(x)|`, evaluated exactly at both one-sided limits of every
/// breakpoint of either step function.
pub fn ks_sup(ws: &WeightedSample, ecdf: &Ecdf) -> f64 {
    let mut sim: Vec<(f64, f64)> = ws.points.iter().copied().zip(ws.weights.iter().copied()).collect();
    sim.sort_by(|a, b| a.0.total_cmp(&b.0));
    let data = ecdf.points();
    let n = data.len() as f64;
    let (mut i, mut j) = (0, 0);
    let (mut g, mut f) = (0.0_f64, 0.0_f64);
    let mut sup = 0.0_f64;
    while i < sim.len() || j < data.len() {
        let next = match (sim.get(i), data.get(j)) {
            (Some(s), Some(&d)) => s.0.min(d),
            (Some(s), None) => s.0,
            (None, Some(&d)) => d,
            (None, None) => unreachable!(),
        };
        // Left limit at `next` equals the value on the preceding plateau.
        sup = sup.max((g - f).abs());
        while i < sim.len() && sim[i].0 == next {
            g += sim[i].1;
            i += 1;
        }
        let mut cnt = 0usize;
        while j < data.len() && data[j] == next {
            cnt += 1;
            j += 1;
        }
        f += cnt as f64 / n;
        sup = sup.max((g - f).abs());
    }
    sup.min(1.0)
}

/// Kolmogorov distribution `K(x) = P(sup |BB| <= x)`.
///
/// Uses `1 - 2 sum (-1)^(k-1) exp(-2 k^2 x^2)` for `x >= 1` and the
/// equivalent `sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2))` below, where
/// the alternating form converges too slowly.
pub fn kolmogorov_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        let mut sum = 0.0;
        let mut k = 1u32;
        loop {
            let term = (-2.0 * f64::from(k * k) * x * x).exp();
            if term < SERIES_TOL {
                break;
            }
            sum += if k % 2 == 1 { term } else { -term };
            k += 1;
        }
        (1.0 - 2.0 * sum).clamp(0.0, 1.0)
    } else {
        let pi2 = std::f64::consts::PI * std::f64::consts::PI;
        let mut sum = 0.0_f64;
        let mut k = 1u32;
        loop {
            let odd = f64::from(2 * k - 1);
            let term = (-odd * odd * pi2 / (8.0 * x * x)).exp();
            if term < SERIES_TOL * sum.max(f64::MIN_POSITIVE) || term == 0.0 {
                break;
            }
            sum += term;
            k += 1;
        }
        ((2.0 * std::f64::consts::PI).sqrt() / x * sum).clamp(0.0, 1.0)
    }
}

/// Quantile of the Kolmogorov distribution by bisection.
pub fn kolmogorov_quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::invalid(format!("quantile level must lie in (0, 1), got {p}")));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    while kolmogorov_cdf(hi) < p {
        hi *= 2.0;
    }
    while hi - lo > 1e-10 {
        let mid = 0.5 * (lo + hi);
        if kolmogorov_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Bonferroni-corrected KS threshold `q_{1 - alpha/m}`.
pub fn bonferroni_threshold(alpha: f64, m: usize) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) || m == 0 {
        return Err(Error::invalid(format!("need alpha in (0,1) and m >= 1, got {alpha}, {m}")));
    }
    kolmogorov_quantile(1.0 - alpha / m as f64)
}
