use std::f64::consts::PI;

use super::constants::*;
use super::{check_len, ModelDims, ParamBox, SimulationModel};
use crate::error::{Error, Result};
use crate::summary::TimeSeries;

/// Two-tone synthetic model with one component in each default band:
///
/// ```text
/// y(t) = e1 sin(2 pi (0.5 + e2/4) t dt + 2 pi a1)
///      + (0.3 + a2) e3 cos(2 pi (2.5 + e4/2) t dt)
/// ```
///
/// on `A = [0,1]^2`, `E0 = [0,2]^4`, 256 samples at 30 Hz.
///
/// Requirements compare three amplitude metrics of `y` against design
/// thresholds `tau_i(theta)`; `g_i = metric_i - tau_i`:
///
/// * metric 1: `max(0, max_t y)`
/// * metric 2: `max(0, -min_t y)`
/// * metric 3: `sqrt(2) * rms(y)`
///
/// `tau_i = th_i + th_{i+3} th_{i+6} - 0.1 (th_i^2 + th_{i+3}^2 + th_{i+6}^2)`
/// (1-based), so all metrics lie in `[0, AMPLITUDE_BOUND]`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Oscillator;

impl Oscillator {
    pub fn a_box() -> ParamBox {
        ParamBox::new(A_LO.to_vec(), A_HI.to_vec()).expect("constant box")
    }

    pub fn e_box() -> ParamBox {
        ParamBox::new(E_LO.to_vec(), E_HI.to_vec()).expect("constant box")
    }

    pub fn theta_baseline() -> Vec<f64> {
        THETA_BASELINE.to_vec()
    }

    /// Design thresholds `tau(theta)`.
    pub fn thresholds(theta: &[f64]) -> [f64; N_REQUIREMENTS] {
        let mut tau = [0.0; N_REQUIREMENTS];
        for (i, t) in tau.iter_mut().enumerate() {
            let (p, q, r) = (theta[i], theta[i + 3], theta[i + 6]);
            *t = p + q * r - 0.1 * (p * p + q * q + r * r);
        }
        tau
    }

    fn check_inputs(a: &[f64], e: &[f64]) -> Result<()> {
        check_len("a", a, DIM_A)?;
        check_len("e", e, DIM_E)?;
        if !Self::a_box().contains(a) {
            return Err(Error::invalid(format!("a = {a:?} outside A")));
        }
        if !Self::e_box().contains(e) {
            return Err(Error::invalid(format!("e = {e:?} outside E0")));
        }
        Ok(())
    }

    fn trajectory(a: &[f64], e: &[f64]) -> Vec<f64> {
        let f1 = 0.5 + e[1] / 4.0;
        let f2 = 2.5 + e[3] / 2.0;
        let amp2 = (0.3 + a[1]) * e[2];
        (0..SAMPLES)
            .map(|t| {
                let s = t as f64 * DT;
                e[0] * (2.0 * PI * f1 * s + 2.0 * PI * a[0]).sin() + amp2 * (2.0 * PI * f2 * s).cos()
            })
            .collect()
    }
}

impl SimulationModel for Oscillator {
    fn dims(&self) -> ModelDims {
        ModelDims {
            a: DIM_A,
            e: DIM_E,
            theta: DIM_THETA,
            requirements: N_REQUIREMENTS,
        }
    }

    fn simulate(&self, a: &[f64], e: &[f64]) -> Result<TimeSeries> {
        Self::check_inputs(a, e)?;
        TimeSeries::new(Self::trajectory(a, e), DT)
    }

    fn requirements(&self, a: &[f64], e: &[f64], theta: &[f64]) -> Result<Vec<f64>> {
        Self::check_inputs(a, e)?;
        check_len("theta", theta, DIM_THETA)?;
        let y = Self::trajectory(a, e);
        let max = y.iter().copied().fold(f64::NEG_INFINITY, f64::max).max(0.0);
        let min = y.iter().copied().fold(f64::INFINITY, f64::min);
        let rms = (y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64).sqrt();
        let metrics = [max, (-min).max(0.0), std::f64::consts::SQRT_2 * rms];
        let tau = Self::thresholds(theta);
        Ok(metrics.iter().zip(tau).map(|(m, t)| m - t).collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::sample_uniform;
    use crate::summary::{extract_summary, BandPair};

    #[test]
    fn silent_when_amplitudes_vanish() {
        let y = Oscillator.simulate(&[0.3, 0.9], &[0.0, 1.2, 0.0, 0.7]).unwrap();
        assert_eq!(y.len(), SAMPLES);
        assert!(y.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn deterministic_and_fixed_shape() {
        let (a, e) = ([0.1, 0.6], [1.3, 0.4, 0.9, 1.7]);
        let y1 = Oscillator.simulate(&a, &e).unwrap();
        let y2 = Oscillator.simulate(&a, &e).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(y1.dt(), DT);
        let g1 = Oscillator.requirements(&a, &e, &THETA_BASELINE).unwrap();
        assert_eq!(g1, Oscillator.requirements(&a, &e, &THETA_BASELINE).unwrap());
    }

    #[test]
    fn rejects_out_of_box() {
        assert!(Oscillator.simulate(&[1.2, 0.0], &[1.0; 4]).is_err());
        assert!(Oscillator.simulate(&[0.5, 0.5], &[1.0, 1.0, 2.5, 1.0]).is_err());
        assert!(Oscillator.simulate(&[0.5], &[1.0; 4]).is_err());
    }

    #[test]
    fn low_band_peak_tracks_e2() {
        let bands = BandPair::default();
        let step = 1.0 / (SAMPLES as f64 * DT);
        for (k, e2) in [0.0, 0.7, 1.3, 2.0].into_iter().enumerate() {
            // Phase a1 = 0.25 makes the low component a pure cosine.
            let e = [1.5, e2, 0.4, 0.3 * k as f64];
            let sv = extract_summary(&Oscillator.simulate(&[0.25, 0.5], &e).unwrap(), &bands).unwrap();
            let f1 = 0.5 + e2 / 4.0;
            assert!((sv.0[1] - f1).abs() <= step, "e2={e2}: {} vs {f1}", sv.0[1]);
        }
    }

    #[test]
    fn threshold_extremes() {
        let pts = sample_uniform(&Oscillator::a_box(), 50, 1);
        let es = sample_uniform(&Oscillator::e_box(), 50, 2);
        // tau = 5 + 9 - 4.3 = 9.7 > AMPLITUDE_BOUND
        let high = [5.0, 5.0, 5.0, 3.0, 3.0, 3.0, 3.0, 3.0, 3.0];
        let zero = [0.0; DIM_THETA];
        for (a, e) in pts.iter().zip(&es) {
            assert!(Oscillator.requirements(a, e, &high).unwrap().iter().all(|&g| g < 0.0));
            assert!(Oscillator.requirements(a, e, &zero).unwrap().iter().all(|&g| g >= 0.0));
        }
        assert!(Oscillator::thresholds(&high).iter().all(|&t| t > AMPLITUDE_BOUND));
    }

    #[test]
    fn baseline_failure_rates_are_nondegenerate() {
        let a = sample_uniform(&Oscillator::a_box(), 1000, 5);
        let e = sample_uniform(&Oscillator::e_box(), 1000, 6);
        let mut fails = [0usize; N_REQUIREMENTS];
        for (ai, ei) in a.iter().zip(&e) {
            let g = Oscillator.requirements(ai, ei, &THETA_BASELINE).unwrap();
            for (f, v) in fails.iter_mut().zip(g) {
                *f += usize::from(v >= 0.0);
            }
        }
        for (i, f) in fails.iter().enumerate() {
            let rate = *f as f64 / 1000.0;
            assert!((0.05..=0.95).contains(&rate), "g{} rate {rate}", i + 1);
        }
    }

    #[test]
    fn requirements_lipschitz_in_theta() {
        let a = sample_uniform(&Oscillator::a_box(), 20, 7);
        let e = sample_uniform(&Oscillator::e_box(), 20, 8);
        let h = 1e-6;
        for (ai, ei) in a.iter().zip(&e) {
            for d in 0..DIM_THETA {
                let mut th = THETA_BASELINE;
                let g0 = Oscillator.requirements(ai, ei, &th).unwrap();
                th[d] += h;
                let g1 = Oscillator.requirements(ai, ei, &th).unwrap();
                for (x, y) in g0.iter().zip(&g1) {
                    assert!((x - y).abs() / h < 10.0);
                }
            }
        }
    }
}
