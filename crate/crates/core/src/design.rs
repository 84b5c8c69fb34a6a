//! Robust design: the best-case failure probability over the eligible set
//! and a Kiefer-Wolfowitz coordinate finite-difference optimizer for it.

use rayon::prelude::*;

use crate::eligibility::{
    build_indicator_tensor, construct_from_summaries, simulate_summaries, EligibilityOptions, EligibleSet, TieRule,
    WeightPolytope,
};
use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::model::{sample_uniform, ParamBox, SimulationModel};
use crate::reliability::{indicator, FailureIndicators};
use crate::seed;
use crate::summary::BandPair;

/// `max_e min_W sum_j W_j 1{any g(a_j, e, theta) >= 0}` over fixed polytopes.
pub fn robust_objective(set: &EligibleSet, model: &dyn SimulationModel, theta: &[f64]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::EmptyEligibleSet);
    }
    let vals: Vec<f64> = set
        .members
        .par_iter()
        .map(|m| {
            let fi = FailureIndicators::evaluate(model, &m.e, &set.a_samples, theta)?;
            polytope_min(&m.polytope, &fi.combined)
        })
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

fn polytope_min(poly: &WeightPolytope, fails: &[bool]) -> Result<f64> {
    poly.optimize(&indicator(fails), Sense::Minimize).map(|(v, _)| v.clamp(0.0, 1.0))
}

/// How the aleatory samples behind the polytopes are chosen at each `theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplePolicy {
    /// Reuse the polytopes the eligible set was built with; the seed is
    /// ignored and the objective is deterministic.
    Frozen,
    /// Keep the eligible `e` values and rebuild their polytopes on fresh
    /// a-samples drawn from the evaluation seed.
    FreshA,
    /// Draw fresh a-samples and rerun eligibility over all candidate `e`.
    Recompute,
}

/// The robust objective as a function of `(theta, seed)`.
pub struct RobustObjective<'a> {
    pub model: &'a dyn SimulationModel,
    pub set: &'a EligibleSet,
    pub data_summaries: &'a [Vec<f64>],
    /// Candidate values for [`SamplePolicy::Recompute`].
    pub candidates: &'a [Vec<f64>],
    pub a_box: ParamBox,
    pub bands: BandPair,
    pub q_threshold: f64,
    pub tie_rule: TieRule,
    pub policy: SamplePolicy,
}

impl RobustObjective<'_> {
    pub fn eval(&self, theta: &[f64], seed: u64) -> Result<f64> {
        match self.policy {
            SamplePolicy::Frozen => robust_objective(self.set, self.model, theta),
            SamplePolicy::FreshA => {
                let a = sample_uniform(&self.a_box, self.set.k(), seed);
                let vals: Vec<f64> = self
                    .set
                    .members
                    .par_iter()
                    .map(|m| self.fresh_member_value(&m.e, &a, theta))
                    .collect::<Result<_>>()?;
                Ok(vals.into_iter().fold(0.0, f64::max))
            }
            SamplePolicy::Recompute => {
                let a = sample_uniform(&self.a_box, self.set.k(), seed);
                let opts = EligibilityOptions {
                    q_threshold: Some(self.q_threshold),
                    keep_tensors: true,
                    tie_rule: self.tie_rule,
                    ..EligibilityOptions::default()
                };
                let run = construct_from_summaries(self.data_summaries, self.model, self.candidates, &a, &self.bands, &opts)?;
                robust_objective(&EligibleSet::from_run(&run, &a)?, self.model, theta)
            }
        }
    }

    /// When the fresh polytope is empty the threshold is raised to the
    /// fresh `q*` so the frozen member still contributes.
    fn fresh_member_value(&self, e: &[f64], a: &[Vec<f64>], theta: &[f64]) -> Result<f64> {
        let sims = simulate_summaries(self.model, e, a, &self.bands)?;
        let tensor = build_indicator_tensor(self.data_summaries, &sims)?;
        let mut poly = WeightPolytope::with_rule(tensor, self.q_threshold, self.tie_rule)?;
        let fi = FailureIndicators::evaluate(self.model, e, a, theta)?;
        match polytope_min(&poly, &fi.combined) {
            Err(Error::EmptyPolytope { .. }) => {
                let q = poly.min_q()?.q_star;
                poly = poly.with_threshold(q.max(self.q_threshold) * (1.0 + 1e-9));
                polytope_min(&poly, &fi.combined)
            }
            other => other,
        }
    }
}

/// Which iterate [`kw_optimize`] reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Selection {
    Last,
    BestSeen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KwConfig {
    pub c0: f64,
    pub a0: f64,
    pub n_max: usize,
    /// `c_n = c0 / n^exponent`.
    pub exponent: f64,
    pub theta_baseline: Vec<f64>,
    pub selection: Selection,
    /// Slack allowed above the baseline assessment before the last iterate
    /// is replaced by the best-seen one.
    pub eps_report: f64,
}

impl KwConfig {
    pub fn new(theta_baseline: Vec<f64>) -> Self {
        KwConfig {
            c0: 0.1,
            a0: 0.1,
            n_max: 8,
            exponent: 0.25,
            theta_baseline,
            selection: Selection::Last,
            eps_report: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c0 > 0.0 && self.a0 > 0.0 && self.exponent > 0.0 && self.exponent.is_finite()) {
            return Err(Error::invalid("kw c0, a0 and exponent must be positive"));
        }
        if self.n_max == 0 {
            return Err(Error::invalid("kw n_max must be >= 1"));
        }
        if self.theta_baseline.is_empty() || self.theta_baseline.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("theta baseline must be a nonempty finite vector"));
        }
        if !(self.eps_report >= 0.0) {
            return Err(Error::invalid("eps_report must be >= 0"));
        }
        Ok(())
    }

    pub fn c_n(&self, n: usize) -> f64 {
        self.c0 / (n as f64).powf(self.exponent)
    }

    pub fn a_n(&self, n: usize) -> f64 {
        self.a0 / n as f64
    }

    pub fn theta_at(&self, x: &[f64]) -> Vec<f64> {
        self.theta_baseline.iter().zip(x).map(|(b, x)| b * x).collect()
    }
}

/// One central difference along coordinate `coord` at outer iteration `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct KwStep {
    pub n: usize,
    pub coord: usize,
    pub seed: u64,
    pub c_n: f64,
    pub a_n: f64,
    pub x_before: Vec<f64>,
    pub u: f64,
    pub l: f64,
    pub g: f64,
    pub x_after: Vec<f64>,
}

impl KwStep {
    pub fn theta_plus(&self, cfg: &KwConfig) -> Vec<f64> {
        let mut x = self.x_before.clone();
        x[self.coord] += self.c_n;
        cfg.theta_at(&x)
    }

    pub fn theta_minus(&self, cfg: &KwConfig) -> Vec<f64> {
        let mut x = self.x_before.clone();
        x[self.coord] -= self.c_n;
        cfg.theta_at(&x)
    }
}

/// Objective value at an iterate, all evaluated with the assessment seed.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    /// Outer iterations completed (0 = baseline).
    pub n: usize,
    pub x: Vec<f64>,
    pub f: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct KwTrace {
    pub steps: Vec<KwStep>,
    pub assessments: Vec<Assessment>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KwResult {
    pub theta_new: Vec<f64>,
    pub x_new: Vec<f64>,
    pub selected: Selection,
    pub f_baseline: f64,
    pub f_new: f64,
    pub assess_seed: u64,
    pub trace: KwTrace,
}

/// Objective failure with the trace recorded up to that point.
#[derive(Debug, thiserror::Error)]
#[error("{error} (after {} finite-difference steps)", trace.steps.len())]
pub struct KwError {
    pub error: Error,
    pub trace: KwTrace,
}

pub fn step_seed(master: u64, n: usize, coord: usize, dim: usize) -> u64 {
    seed::derive(master, "kw-step", (n * dim + coord) as u64)
}

pub fn assess_seed(master: u64) -> u64 {
    seed::derive(master, "kw-assess", 0)
}

/// Algorithm: for `n = 1..=n_max` and each coordinate `i`, estimate
/// `g = (f(b o (x + c_n e_i)) - f(b o (x - c_n e_i))) / (2 c_n)` with one
/// seed shared by both evaluations and set `x_i <- x_i - a_n g`, where `b`
/// is the baseline design and `x` starts at all ones.
pub fn kw_optimize<F>(f: F, cfg: &KwConfig, master_seed: u64) -> std::result::Result<KwResult, KwError>
where
    F: Fn(&[f64], u64) -> Result<f64> + Sync,
{
    let mut trace = KwTrace::default();
    if let Err(error) = cfg.validate() {
        return Err(KwError { error, trace });
    }
    let dim = cfg.theta_baseline.len();
    let assess = assess_seed(master_seed);
    let mut x = vec![1.0; dim];
    macro_rules! attempt {
        ($e:expr) => {
            match $e {
                Ok(v) => v,
                Err(error) => return Err(KwError { error, trace }),
            }
        };
    }
    let f_baseline = attempt!(f(&cfg.theta_baseline, assess));
    trace.assessments.push(Assessment {
        n: 0,
        x: x.clone(),
        f: f_baseline,
    });
    for n in 1..=cfg.n_max {
        let (c_n, a_n) = (cfg.c_n(n), cfg.a_n(n));
        for i in 0..dim {
            let seed = step_seed(master_seed, n, i, dim);
            let mut step = KwStep {
                n,
                coord: i,
                seed,
                c_n,
                a_n,
                x_before: x.clone(),
                u: f64::NAN,
                l: f64::NAN,
                g: f64::NAN,
                x_after: Vec::new(),
            };
            let (plus, minus) = (step.theta_plus(cfg), step.theta_minus(cfg));
            let (u, l) = rayon::join(|| f(&plus, seed), || f(&minus, seed));
            let (u, l) = (attempt!(u), attempt!(l));
            let g = (u - l) / (2.0 * c_n);
            x[i] -= a_n * g;
            step.u = u;
            step.l = l;
            step.g = g;
            step.x_after = x.clone();
            trace.steps.push(step);
        }
        let fx = attempt!(f(&cfg.theta_at(&x), assess));
        trace.assessments.push(Assessment { n, x: x.clone(), f: fx });
    }
    let last = trace.assessments.last().expect("baseline assessed").clone();
    let best = trace
        .assessments
        .iter()
        .fold(&trace.assessments[0], |b, a| if a.f < b.f { a } else { b })
        .clone();
    let (chosen, selected) = match cfg.selection {
        Selection::Last if last.f <= f_baseline + cfg.eps_report => (last, Selection::Last),
        _ => (best, Selection::BestSeen),
    };
    Ok(KwResult {
        theta_new: cfg.theta_at(&chosen.x),
        x_new: chosen.x,
        selected,
        f_baseline,
        f_new: chosen.f,
        assess_seed: assess,
        trace,
    })
}

/// Recompute `(u, l, g)` of a logged step.
pub fn replay_step<F>(f: F, cfg: &KwConfig, step: &KwStep) -> Result<(f64, f64, f64)>
where
    F: Fn(&[f64], u64) -> Result<f64>,
{
    let u = f(&step.theta_plus(cfg), step.seed)?;
    let l = f(&step.theta_minus(cfg), step.seed)?;
    Ok((u, l, (u - l) / (2.0 * step.c_n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eligibility::{build_indicator_tensor, EligibleMember};
    use crate::model::ModelDims;
    use crate::summary::TimeSeries;

    struct Constant(f64);

    impl SimulationModel for Constant {
        fn dims(&self) -> ModelDims {
            ModelDims {
                a: 1,
                e: 1,
                theta: 1,
                requirements: 2,
            }
        }

        fn simulate(&self, _a: &[f64], _e: &[f64]) -> Result<TimeSeries> {
            Err(Error::Model("no outputs".into()))
        }

        fn requirements(&self, _a: &[f64], _e: &[f64], _theta: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![self.0, -1.0])
        }
    }

    fn set() -> EligibleSet {
        let data: Vec<Vec<f64>> = (0..3).map(|i| vec![i as f64]).collect();
        let sims: Vec<Vec<f64>> = (0..5).map(|j| vec![j as f64 * 0.6]).collect();
        let tensor = build_indicator_tensor(&data, &sims).unwrap();
        EligibleSet {
            a_samples: (0..5).map(|j| vec![j as f64]).collect(),
            members: vec![EligibleMember {
                e: vec![0.0],
                polytope: WeightPolytope::new(tensor, 1.5).unwrap(),
            }],
        }
    }

    #[test]
    fn objective_extremes() {
        let s = set();
        assert!((robust_objective(&s, &Constant(0.5), &[1.0]).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(robust_objective(&s, &Constant(-0.5), &[1.0]).unwrap(), 0.0);
        let empty = EligibleSet {
            a_samples: s.a_samples.clone(),
            members: Vec::new(),
        };
        assert!(matches!(robust_objective(&empty, &Constant(0.5), &[1.0]), Err(Error::EmptyEligibleSet)));
    }

    #[test]
    fn schedules() {
        let cfg = KwConfig::new(vec![1.0; 9]);
        assert_eq!((cfg.c0, cfg.a0, cfg.n_max), (0.1, 0.1, 8));
        assert_eq!(cfg.c_n(16), cfg.c0 / 2.0);
        assert_eq!(cfg.a_n(16), cfg.a0 / 16.0);
        assert_eq!(cfg.c_n(1), cfg.c0);
    }

    #[test]
    fn constant_objective_does_not_move() {
        let cfg = KwConfig::new(vec![1.2, 0.7, 3.0]);
        let res = kw_optimize(|_: &[f64], _| Ok(0.25), &cfg, 1).unwrap();
        assert_eq!(res.theta_new, cfg.theta_baseline);
        assert_eq!(res.x_new, vec![1.0; 3]);
        assert_eq!(res.trace.steps.len(), 8 * 3);
        assert_eq!(res.trace.assessments.len(), 9);
        assert!(res.trace.steps.iter().all(|s| s.g == 0.0));
    }

    #[test]
    fn quadratic_descends() {
        let mut cfg = KwConfig::new(vec![1.0; 4]);
        cfg.n_max = 50;
        let f = |th: &[f64], _| Ok(th.iter().map(|t| (t - 1.2) * (t - 1.2)).sum::<f64>());
        let res = kw_optimize(f, &cfg, 0).unwrap();
        assert!(res.f_new < res.f_baseline);
        assert_eq!(res.selected, Selection::Last);
        // Exact central differences: x_n - 1.2 = -0.2 prod (1 - 0.2/m).
        let expect = 1.2 - 0.2 * (1..=50).map(|m| 1.0 - 0.2 / m as f64).product::<f64>();
        for t in &res.theta_new {
            assert!((t - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn trace_replays_and_seeds_are_shared() {
        let f = |th: &[f64], seed: u64| Ok(th.iter().sum::<f64>() * 0.01 + (seed % 1000) as f64 * 1e-6);
        let mut cfg = KwConfig::new(vec![1.0, 2.0]);
        cfg.n_max = 3;
        let res = kw_optimize(f, &cfg, 9).unwrap();
        for step in &res.trace.steps {
            let (u, l, g) = replay_step(f, &cfg, step).unwrap();
            assert_eq!((u, l, g), (step.u, step.l, step.g));
            assert_eq!(step.seed, step_seed(9, step.n, step.coord, 2));
        }
    }

    #[test]
    fn best_seen_fallback() {
        // Gradient points uphill in the assessment: every move makes f worse.
        let f = |th: &[f64], seed: u64| {
            let s: f64 = th.iter().sum();
            Ok(if seed == assess_seed(4) { s } else { -s })
        };
        let cfg = KwConfig::new(vec![1.0, 1.0]);
        let res = kw_optimize(f, &cfg, 4).unwrap();
        assert_eq!(res.selected, Selection::BestSeen);
        assert_eq!(res.theta_new, vec![1.0, 1.0]);
        assert!(res.f_new <= res.f_baseline);
    }

    #[test]
    fn errors_carry_partial_trace() {
        let f = |th: &[f64], _| if th[0] > 1.05 { Err(Error::Model("boom".into())) } else { Ok(-th[0]) };
        let cfg = KwConfig::new(vec![1.0]);
        let err = kw_optimize(f, &cfg, 0).unwrap_err();
        assert!(matches!(err.error, Error::Model(_)));
        assert_eq!(err.trace.assessments.len(), 1);
        let mut bad = KwConfig::new(vec![1.0]);
        bad.c0 = 0.0;
        assert!(kw_optimize(|_: &[f64], _| Ok(0.0), &bad, 0).is_err());
    }
}
