//! Eligibility of sampled epistemic values.
//!
//! For one epistemic value `e`, simulate `k` outputs at shared aleatory
//! samples, summarize them, and ask for probability weights `W` on those
//! samples whose weighted CDF stays inside `F(s-) - q/sqrt(n1)` and
//! `F(s+) + q/sqrt(n1)` for every data summary `s` and every coordinate.
//! The smallest such `q` is the degree of eligibility `q*`; `e` is eligible
//! when `q*` does not exceed the KS threshold. The weights feasible at the
//! threshold form the [`WeightPolytope`] used for downstream bounds.

use std::collections::HashMap;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::empirical::{bonferroni_threshold, Ecdf};
use crate::error::{Error, Result};
use crate::lp::{LinearProgram, LpError, Relation, Sense};
use crate::model::{ParamBox, SimulationModel};
use crate::seed;
use crate::summary::{extract_summary, BandPair, TimeSeries, SUMMARY_LEN};

/// `bits[j, i, r] = 1{ sim[j][r] <= data[i][r] }` with the summaries it was
/// built from.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorTensor {
    k: usize,
    n1: usize,
    m: usize,
    data: Vec<f64>,
    sims: Vec<f64>,
    bits: Vec<u64>,
}

impl IndicatorTensor {
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn bit(&self, j: usize, i: usize, r: usize) -> bool {
        let idx = (j * self.n1 + i) * self.m + r;
        self.bits[idx / 64] >> (idx % 64) & 1 == 1
    }

    pub fn data_summary(&self, i: usize) -> &[f64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn sim_summary(&self, j: usize) -> &[f64] {
        &self.sims[j * self.m..(j + 1) * self.m]
    }
}

fn flatten<R: AsRef<[f64]>>(rows: &[R], what: &str) -> Result<(Vec<f64>, usize)> {
    let m = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    if rows.is_empty() || m == 0 {
        return Err(Error::invalid(format!("{what} matrix is empty")));
    }
    let mut flat = Vec::with_capacity(rows.len() * m);
    for (i, r) in rows.iter().enumerate() {
        let r = r.as_ref();
        if r.len() != m {
            return Err(Error::invalid(format!("{what} row {i} has {} columns, expected {m}", r.len())));
        }
        if let Some(c) = r.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("{what} entry ({i}, {c}) is not finite")));
        }
        flat.extend_from_slice(r);
    }
    Ok((flat, m))
}

pub fn build_indicator_tensor<D: AsRef<[f64]>, S: AsRef<[f64]>>(
    data_summaries: &[D],
    sim_summaries: &[S],
) -> Result<IndicatorTensor> {
    let (data, m) = flatten(data_summaries, "data summary")?;
    let (sims, ms) = flatten(sim_summaries, "simulation summary")?;
    if m != ms {
        return Err(Error::invalid(format!(
            "data summaries have {m} columns but simulation summaries have {ms}"
        )));
    }
    let (n1, k) = (data_summaries.len(), sim_summaries.len());
    let mut bits = vec![0u64; (k * n1 * m).div_ceil(64)];
    for j in 0..k {
        let s = &sims[j * m..(j + 1) * m];
        for i in 0..n1 {
            let d = &data[i * m..(i + 1) * m];
            for r in 0..m {
                if s[r] <= d[r] {
                    let idx = (j * n1 + i) * m + r;
                    bits[idx / 64] |= 1 << (idx % 64);
                }
            }
        }
    }
    Ok(IndicatorTensor {
        k,
        n1,
        m,
        data,
        sims,
        bits,
    })
}

/// How a simulated summary equal to a data summary is treated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieRule {
    /// Constrain both `F_W(s)` against `F(s+)` and `F_W(s-)` against
    /// `F(s-)` at every data value `s`; this is exactly
    /// `sup |F_W - F| <= q/sqrt(n1)` even when summaries take repeated
    /// values (frequency slots live on the DFT grid).
    #[default]
    Exact,
    /// Only `F(s+) - q/sqrt(n1) <= F_W(s) <= F(s-) + q/sqrt(n1)`. Equal to
    /// [`TieRule::Exact`] when no simulated value equals a data value, and
    /// stricter otherwise.
    Sandwich,
}

/// One distinct constraint pattern: `a . W <= upper + q/sqrt(n1)` and
/// `a . W >= lower - q/sqrt(n1)`, where `a` is a 0/1 row.
#[derive(Debug, Clone)]
struct SandwichRow {
    pattern: Vec<bool>,
    upper: f64,
    lower: f64,
}

/// The constraints of a tensor, reduced to distinct data values and
/// distinct indicator rows. Rows whose pattern is all-zero or all-one only
/// bound `q` and are folded into `q_floor`.
#[derive(Debug, Clone)]
struct Sandwich {
    k: usize,
    sqrt_n: f64,
    rows: Vec<SandwichRow>,
    q_floor: f64,
}

impl Sandwich {
    fn new(t: &IndicatorTensor, rule: TieRule) -> Result<Self> {
        let mut sw = Sandwich {
            k: t.k,
            sqrt_n: (t.n1 as f64).sqrt(),
            rows: Vec::new(),
            q_floor: 0.0,
        };
        let mut index: HashMap<Vec<bool>, usize> = HashMap::new();
        for r in 0..t.m {
            let col: Vec<f64> = (0..t.n1).map(|i| t.data_summary(i)[r]).collect();
            let ecdf = Ecdf::new(col.clone())?;
            let mut order: Vec<usize> = (0..t.n1).collect();
            order.sort_by(|&a, &b| col[a].total_cmp(&col[b]));
            order.dedup_by(|a, b| col[*a] == col[*b]);
            for i in order {
                let v = col[i];
                let (left, right) = (ecdf.left(v), ecdf.right(v));
                let le: Vec<bool> = (0..t.k).map(|j| t.bit(j, i, r)).collect();
                match rule {
                    TieRule::Sandwich => sw.push(&mut index, le, left, right),
                    TieRule::Exact => {
                        let lt: Vec<bool> = (0..t.k).map(|j| t.sim_summary(j)[r] < v).collect();
                        sw.push(&mut index, le, right, right);
                        sw.push(&mut index, lt, left, left);
                    }
                }
            }
        }
        Ok(sw)
    }

    fn push(&mut self, index: &mut HashMap<Vec<bool>, usize>, pattern: Vec<bool>, upper: f64, lower: f64) {
        if pattern.iter().all(|&b| !b) {
            self.q_floor = self.q_floor.max(self.sqrt_n * lower);
            return;
        }
        if pattern.iter().all(|&b| b) {
            self.q_floor = self.q_floor.max(self.sqrt_n * (1.0 - upper));
            return;
        }
        match index.get(&pattern) {
            Some(&at) => {
                let row = &mut self.rows[at];
                row.upper = row.upper.min(upper);
                row.lower = row.lower.max(lower);
            }
            None => {
                index.insert(pattern.clone(), self.rows.len());
                self.rows.push(SandwichRow { pattern, upper, lower });
            }
        }
    }

    fn pattern_coeffs(&self, row: &SandwichRow, extra: usize) -> Vec<f64> {
        let mut c: Vec<f64> = row.pattern.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        c.resize(self.k + extra, 0.0);
        c
    }

    fn simplex_row(&self, extra: usize) -> Vec<f64> {
        let mut c = vec![1.0; self.k];
        c.resize(self.k + extra, 0.0);
        c
    }

    /// Variables `(W_1..W_k, q')` with `q = q_floor + q'`; minimizes `q'`.
    fn min_q_program(&self) -> LinearProgram {
        let k = self.k;
        let mut obj = vec![0.0; k + 1];
        obj[k] = 1.0;
        let mut lp = LinearProgram::new(k + 1, Sense::Minimize, obj);
        let slack = self.q_floor / self.sqrt_n;
        for row in &self.rows {
            // aW <= 1 and aW >= 0 hold on the simplex; such rows never bind.
            let upper = row.upper + slack;
            if upper < 1.0 {
                let mut c = self.pattern_coeffs(row, 1);
                c[k] = -1.0 / self.sqrt_n;
                lp.add_constraint(c, Relation::Le, upper);
            }
            let lower = row.lower - slack;
            if lower > 0.0 {
                let mut c = self.pattern_coeffs(row, 1);
                c[k] = 1.0 / self.sqrt_n;
                lp.add_constraint(c, Relation::Ge, lower);
            }
        }
        lp.add_constraint(self.simplex_row(1), Relation::Eq, 1.0);
        lp
    }

    /// Constraints on `W` alone at a fixed `q`, with the given objective.
    fn fixed_q_program(&self, q: f64, sense: Sense, objective: Vec<f64>) -> LinearProgram {
        let mut lp = LinearProgram::new(self.k, sense, objective);
        let slack = q / self.sqrt_n;
        for row in &self.rows {
            if row.upper + slack < 1.0 {
                lp.add_constraint(self.pattern_coeffs(row, 0), Relation::Le, row.upper + slack);
            }
            if row.lower - slack > 0.0 {
                lp.add_constraint(self.pattern_coeffs(row, 0), Relation::Ge, row.lower - slack);
            }
        }
        lp.add_constraint(self.simplex_row(0), Relation::Eq, 1.0);
        lp
    }

    /// Largest sandwich violation of `w` at level `q`, over the unreduced
    /// pattern set (folded rows included).
    fn violation(&self, w: &[f64], q: f64) -> f64 {
        let slack = q / self.sqrt_n;
        let mut worst = (self.q_floor - q).max(0.0) / self.sqrt_n;
        for row in &self.rows {
            let s: f64 = row.pattern.iter().zip(w).filter(|(b, _)| **b).map(|(_, x)| x).sum();
            worst = worst.max(s - row.upper - slack).max(row.lower - slack - s);
        }
        worst
    }
}

fn normalize_weights(x: &[f64]) -> Vec<f64> {
    let mut w: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    w
}

/// Optimal `q*` of the min-q program and a witness weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct MinQ {
    pub q_star: f64,
    pub weights: Vec<f64>,
}

pub fn solve_min_q(tensor: &IndicatorTensor) -> Result<MinQ> {
    solve_min_q_with(tensor, TieRule::default())
}

pub fn solve_min_q_with(tensor: &IndicatorTensor, rule: TieRule) -> Result<MinQ> {
    solve_sandwich(&Sandwich::new(tensor, rule)?)
}

fn solve_sandwich(sandwich: &Sandwich) -> Result<MinQ> {
    let lp = sandwich.min_q_program();
    let sol = match lp.solve() {
        Ok(s) => s,
        Err(LpError::Infeasible { rows, cols }) | Err(LpError::Unbounded { rows, cols }) => {
            return Err(Error::Internal(format!(
                "min-q program reported infeasible or unbounded ({rows} x {cols}); it is feasible and bounded by construction"
            )))
        }
        Err(e) => return Err(e.into()),
    };
    let k = sandwich.k;
    let q_star = sandwich.q_floor + sol.x[k].max(0.0);
    let weights = normalize_weights(&sol.x[..k]);
    Ok(MinQ { q_star, weights })
}

/// Whether some weight vector satisfies the sandwich at level `q`; solved as
/// its own feasibility program.
pub fn check_feasible(tensor: &IndicatorTensor, q: f64) -> Result<bool> {
    check_feasible_with(tensor, q, TieRule::default())
}

pub fn check_feasible_with(tensor: &IndicatorTensor, q: f64, rule: TieRule) -> Result<bool> {
    if !(q >= 0.0) {
        return Err(Error::invalid(format!("threshold must be >= 0, got {q}")));
    }
    feasible_at(&Sandwich::new(tensor, rule)?, q)
}

fn feasible_at(sandwich: &Sandwich, q: f64) -> Result<bool> {
    if q < sandwich.q_floor {
        return Ok(false);
    }
    let lp = sandwich.fixed_q_program(q, Sense::Minimize, vec![0.0; sandwich.k]);
    match lp.solve() {
        Ok(_) => Ok(true),
        Err(LpError::Infeasible { .. }) => Ok(false),
        Err(e) => Err(e.into()),
    }
}

/// Feasible weights at a fixed threshold.
#[derive(Debug, Clone)]
pub struct WeightPolytope {
    tensor: IndicatorTensor,
    q_threshold: f64,
    sandwich: Sandwich,
}

impl WeightPolytope {
    pub fn new(tensor: IndicatorTensor, q_threshold: f64) -> Result<Self> {
        Self::with_rule(tensor, q_threshold, TieRule::default())
    }

    pub fn with_rule(tensor: IndicatorTensor, q_threshold: f64, rule: TieRule) -> Result<Self> {
        if !(q_threshold > 0.0) {
            return Err(Error::invalid(format!("q threshold must be > 0, got {q_threshold}")));
        }
        let sandwich = Sandwich::new(&tensor, rule)?;
        Ok(WeightPolytope {
            tensor,
            q_threshold,
            sandwich,
        })
    }

    pub fn tensor(&self) -> &IndicatorTensor {
        &self.tensor
    }

    pub fn q_threshold(&self) -> f64 {
        self.q_threshold
    }

    pub fn n1(&self) -> usize {
        self.tensor.n1
    }

    pub fn k(&self) -> usize {
        self.tensor.k
    }

    pub fn is_empty(&self) -> Result<bool> {
        Ok(!feasible_at(&self.sandwich, self.q_threshold)?)
    }

    /// Same tensor, different threshold.
    pub fn with_threshold(&self, q_threshold: f64) -> Self {
        WeightPolytope {
            tensor: self.tensor.clone(),
            q_threshold,
            sandwich: self.sandwich.clone(),
        }
    }

    pub fn min_q(&self) -> Result<MinQ> {
        solve_sandwich(&self.sandwich)
    }

    /// Optimum of `c . W` over the polytope, with the optimizing weights.
    pub fn optimize(&self, c: &[f64], sense: Sense) -> Result<(f64, Vec<f64>)> {
        if c.len() != self.k() {
            return Err(Error::invalid(format!("objective has {} entries, expected {}", c.len(), self.k())));
        }
        if self.q_threshold < self.sandwich.q_floor {
            return Err(Error::EmptyPolytope {
                q_threshold: self.q_threshold,
            });
        }
        let lp = self.sandwich.fixed_q_program(self.q_threshold, sense, c.to_vec());
        match lp.solve() {
            Ok(sol) => {
                let w = normalize_weights(&sol.x);
                let value = c.iter().zip(&w).map(|(a, b)| a * b).sum();
                Ok((value, w))
            }
            Err(LpError::Infeasible { .. }) => Err(Error::EmptyPolytope {
                q_threshold: self.q_threshold,
            }),
            Err(e) => Err(e.into()),
        }
    }

    /// Sandwich violation of `w` at this polytope's threshold.
    pub fn violation(&self, w: &[f64]) -> f64 {
        self.sandwich.violation(w, self.q_threshold)
    }
}

pub fn bound_linear_over_polytope(poly: &WeightPolytope, c: &[f64], sense: Sense) -> Result<f64> {
    poly.optimize(c, sense).map(|(v, _)| v)
}

/// Summaries of a set of series, one row per series.
pub fn summarize_all(series: &[TimeSeries], bands: &BandPair) -> Result<Vec<Vec<f64>>> {
    series
        .iter()
        .map(|ts| extract_summary(ts, bands).map(|sv| sv.0.to_vec()))
        .collect()
}

/// Summaries of `model` outputs at `e` for every shared aleatory sample.
pub fn simulate_summaries(
    model: &dyn SimulationModel,
    e: &[f64],
    a_samples: &[Vec<f64>],
    bands: &BandPair,
) -> Result<Vec<Vec<f64>>> {
    a_samples
        .iter()
        .map(|a| {
            let y = model.simulate(a, e)?;
            extract_summary(&y, bands)
                .map(|sv| sv.0.to_vec())
                .map_err(|err| match err {
                    Error::InvalidInput(msg) => Error::Model(msg),
                    other => other,
                })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EligibilityOptions {
    pub alpha: f64,
    /// Overrides the Bonferroni KS threshold when set.
    pub q_threshold: Option<f64>,
    pub keep_witness: bool,
    /// Keep the indicator tensor of every eligible record.
    pub keep_tensors: bool,
    pub tie_rule: TieRule,
}

impl Default for EligibilityOptions {
    fn default() -> Self {
        EligibilityOptions {
            alpha: 0.05,
            q_threshold: None,
            keep_witness: false,
            keep_tensors: false,
            tie_rule: TieRule::default(),
        }
    }
}

impl EligibilityOptions {
    pub fn threshold(&self, m: usize) -> Result<f64> {
        match self.q_threshold {
            Some(q) if q > 0.0 => Ok(q),
            Some(q) => Err(Error::invalid(format!("q threshold must be > 0, got {q}"))),
            None => bonferroni_threshold(self.alpha, m),
        }
    }
}

#[derive(Debug, Clone)]
pub struct EligibilityRecord {
    pub index: usize,
    pub e: Vec<f64>,
    pub q_star: f64,
    pub eligible: bool,
    pub witness_weights: Option<Vec<f64>>,
    pub tensor: Option<IndicatorTensor>,
}

#[derive(Debug)]
pub struct RecordFailure {
    pub index: usize,
    pub e: Vec<f64>,
    pub error: Error,
}

#[derive(Debug)]
pub struct EligibilityRun {
    pub threshold: f64,
    pub tie_rule: TieRule,
    pub m: usize,
    pub n1: usize,
    pub k: usize,
    /// In e-sample order.
    pub outcomes: Vec<std::result::Result<EligibilityRecord, RecordFailure>>,
}

impl EligibilityRun {
    pub fn records(&self) -> impl Iterator<Item = &EligibilityRecord> {
        self.outcomes.iter().filter_map(|o| o.as_ref().ok())
    }

    pub fn eligible(&self) -> impl Iterator<Item = &EligibilityRecord> {
        self.records().filter(|r| r.eligible)
    }

    pub fn failures(&self) -> impl Iterator<Item = &RecordFailure> {
        self.outcomes.iter().filter_map(|o| o.as_ref().err())
    }

    /// Eligible share among records that evaluated successfully.
    pub fn eligible_fraction(&self) -> f64 {
        let ok = self.records().count();
        if ok == 0 {
            return 0.0;
        }
        self.eligible().count() as f64 / ok as f64
    }

    /// `k / n1`; large values are needed for the coverage guarantee.
    pub fn k_over_n1(&self) -> f64 {
        self.k as f64 / self.n1 as f64
    }
}

fn evaluate_e(
    index: usize,
    e: &[f64],
    data_summaries: &[Vec<f64>],
    sims: Result<Vec<Vec<f64>>>,
    threshold: f64,
    opts: &EligibilityOptions,
) -> std::result::Result<EligibilityRecord, RecordFailure> {
    let fail = |error| RecordFailure {
        index,
        e: e.to_vec(),
        error,
    };
    let sims = sims.map_err(fail)?;
    let tensor = build_indicator_tensor(data_summaries, &sims).map_err(fail)?;
    let MinQ { q_star, weights } = solve_min_q_with(&tensor, opts.tie_rule).map_err(fail)?;
    let eligible = q_star <= threshold;
    Ok(EligibilityRecord {
        index,
        e: e.to_vec(),
        q_star,
        eligible,
        witness_weights: opts.keep_witness.then_some(weights),
        tensor: (opts.keep_tensors && eligible).then_some(tensor),
    })
}

/// Algorithm: simulate at every `(a_r, e_l)`, summarize, solve the min-q
/// program per `e_l`, and flag `q*_l <= threshold`. The aleatory samples are
/// shared by all `e_l`.
pub fn construct_eligibility_set(
    data: &[TimeSeries],
    model: &dyn SimulationModel,
    e_samples: &[Vec<f64>],
    a_samples: &[Vec<f64>],
    bands: &BandPair,
    opts: &EligibilityOptions,
) -> Result<EligibilityRun> {
    let data_summaries = summarize_all(data, bands)?;
    construct_from_summaries(&data_summaries, model, e_samples, a_samples, bands, opts)
}

pub fn construct_from_summaries(
    data_summaries: &[Vec<f64>],
    model: &dyn SimulationModel,
    e_samples: &[Vec<f64>],
    a_samples: &[Vec<f64>],
    bands: &BandPair,
    opts: &EligibilityOptions,
) -> Result<EligibilityRun> {
    if data_summaries.is_empty() || a_samples.is_empty() || e_samples.is_empty() {
        return Err(Error::invalid("need at least one data series, one a-sample and one e-sample"));
    }
    let threshold = opts.threshold(SUMMARY_LEN)?;
    let outcomes: Vec<_> = e_samples
        .par_iter()
        .enumerate()
        .map(|(l, e)| {
            let sims = simulate_summaries(model, e, a_samples, bands);
            evaluate_e(l, e, data_summaries, sims, threshold, opts)
        })
        .collect();
    finish_run(threshold, opts.tie_rule, data_summaries.len(), a_samples.len(), outcomes)
}

fn finish_run(
    threshold: f64,
    tie_rule: TieRule,
    n1: usize,
    k: usize,
    outcomes: Vec<std::result::Result<EligibilityRecord, RecordFailure>>,
) -> Result<EligibilityRun> {
    if outcomes.iter().all(|o| o.is_err()) {
        let first = outcomes
            .into_iter()
            .find_map(|o| o.err())
            .map(|f| f.error)
            .unwrap_or_else(|| Error::Internal("no records".into()));
        return Err(first);
    }
    Ok(EligibilityRun {
        threshold,
        tie_rule,
        m: SUMMARY_LEN,
        n1,
        k,
        outcomes,
    })
}

/// An eligible epistemic value together with its weight polytope.
#[derive(Debug, Clone)]
pub struct EligibleMember {
    pub e: Vec<f64>,
    pub polytope: WeightPolytope,
}

/// The eligible set with the aleatory samples its polytopes are defined on.
#[derive(Debug, Clone)]
pub struct EligibleSet {
    pub a_samples: Vec<Vec<f64>>,
    pub members: Vec<EligibleMember>,
}

impl EligibleSet {
    /// From a run made with `keep_tensors`.
    pub fn from_run(run: &EligibilityRun, a_samples: &[Vec<f64>]) -> Result<Self> {
        let members = run
            .eligible()
            .map(|r| {
                let tensor = r
                    .tensor
                    .clone()
                    .ok_or_else(|| Error::invalid("run was made without keep_tensors"))?;
                Ok(EligibleMember {
                    e: r.e.clone(),
                    polytope: WeightPolytope::with_rule(tensor, run.threshold, run.tie_rule)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::checked(a_samples.to_vec(), members)
    }

    /// Re-simulate the polytopes of the given eligible values.
    pub fn rebuild(
        data_summaries: &[Vec<f64>],
        model: &dyn SimulationModel,
        eligible_e: &[Vec<f64>],
        a_samples: &[Vec<f64>],
        bands: &BandPair,
        q_threshold: f64,
        tie_rule: TieRule,
    ) -> Result<Self> {
        let members = eligible_e
            .par_iter()
            .map(|e| {
                let sims = simulate_summaries(model, e, a_samples, bands)?;
                let tensor = build_indicator_tensor(data_summaries, &sims)?;
                Ok(EligibleMember {
                    e: e.clone(),
                    polytope: WeightPolytope::with_rule(tensor, q_threshold, tie_rule)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::checked(a_samples.to_vec(), members)
    }

    fn checked(a_samples: Vec<Vec<f64>>, members: Vec<EligibleMember>) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::EmptyEligibleSet);
        }
        Ok(EligibleSet { a_samples, members })
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn k(&self) -> usize {
        self.a_samples.len()
    }
}

/// Range-shrinkage score of one epistemic dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct DimScore {
    pub dim: usize,
    pub score: f64,
    pub p05: f64,
    pub p95: f64,
}

/// Linear-interpolation percentile of sorted values, `p` in `[0, 1]`.
fn percentile(sorted: &[f64], p: f64) -> f64 {
    let pos = p * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Score per dimension `1 - (p95 - p05) / prior width` over the eligible
/// records; highest score (most reducible range) first.
pub fn range_shrinkage_ranking<'a>(
    records: impl IntoIterator<Item = &'a EligibilityRecord>,
    prior: &ParamBox,
) -> Result<Vec<DimScore>> {
    let eligible: Vec<Vec<f64>> = records.into_iter().filter(|r| r.eligible).map(|r| r.e.clone()).collect();
    range_shrinkage_scores(&eligible, prior)
}

/// [`range_shrinkage_ranking`] over raw epistemic values.
pub fn range_shrinkage_scores(eligible_e: &[Vec<f64>], prior: &ParamBox) -> Result<Vec<DimScore>> {
    if eligible_e.is_empty() {
        return Err(Error::EmptyEligibleSet);
    }
    if let Some(e) = eligible_e.iter().find(|e| e.len() != prior.dim()) {
        return Err(Error::invalid(format!("e has {} entries, prior box has {}", e.len(), prior.dim())));
    }
    let mut scores = Vec::with_capacity(prior.dim());
    for d in 0..prior.dim() {
        let mut vals: Vec<f64> = eligible_e.iter().map(|e| e[d]).collect();
        vals.sort_by(f64::total_cmp);
        let (p05, p95) = (percentile(&vals, 0.05), percentile(&vals, 0.95));
        let width = prior.width(d);
        let score = if width > 0.0 { 1.0 - (p95 - p05) / width } else { 1.0 };
        scores.push(DimScore { dim: d, score, p05, p95 });
    }
    scores.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.dim.cmp(&b.dim)));
    Ok(scores)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub size: usize,
    pub seed: u64,
    pub evaluated: usize,
    pub eligible: usize,
    pub eligible_fraction: f64,
    /// Per epistemic dimension `(min, max)` over eligible values, `None` when
    /// nothing is eligible.
    pub ranges: Vec<Option<(f64, f64)>>,
}

/// Subsample the data without replacement at each size and seed and rerun
/// eligibility with the same e- and a-samples.
#[allow(clippy::too_many_arguments)]
pub fn n1_impact_study(
    data: &[TimeSeries],
    model: &dyn SimulationModel,
    sizes: &[usize],
    seeds: &[u64],
    e_samples: &[Vec<f64>],
    a_samples: &[Vec<f64>],
    bands: &BandPair,
    opts: &EligibilityOptions,
) -> Result<Vec<StudyRow>> {
    let n1 = data.len();
    if let Some(&bad) = sizes.iter().find(|&&s| s == 0 || s > n1) {
        return Err(Error::invalid(format!("subsample size {bad} outside 1..={n1}")));
    }
    let data_summaries = summarize_all(data, bands)?;
    let threshold = opts.threshold(SUMMARY_LEN)?;
    let sims: Vec<Result<Vec<Vec<f64>>>> = e_samples
        .par_iter()
        .map(|e| simulate_summaries(model, e, a_samples, bands))
        .collect();
    let dim_e = e_samples.first().map(Vec::len).unwrap_or(0);
    let mut rows = Vec::new();
    for &size in sizes {
        for &s in seeds {
            let mut rng = seed::rng(seed::derive(s, "n1-subsample", size as u64));
            let mut idx = sample(&mut rng, n1, size).into_vec();
            idx.sort_unstable();
            let sub: Vec<Vec<f64>> = idx.iter().map(|&i| data_summaries[i].clone()).collect();
            let outcomes: Vec<_> = e_samples
                .par_iter()
                .zip(&sims)
                .enumerate()
                .map(|(l, (e, sm))| {
                    let sm = match sm {
                        Ok(v) => Ok(v.clone()),
                        Err(err) => Err(Error::Model(err.to_string())),
                    };
                    evaluate_e(l, e, &sub, sm, threshold, opts)
                })
                .collect();
            let run = finish_run(threshold, opts.tie_rule, size, a_samples.len(), outcomes)?;
            let ranges = (0..dim_e)
                .map(|d| {
                    run.eligible().map(|r| r.e[d]).fold(None, |acc: Option<(f64, f64)>, v| {
                        Some(acc.map_or((v, v), |(lo, hi)| (lo.min(v), hi.max(v))))
                    })
                })
                .collect();
            rows.push(StudyRow {
                size,
                seed: s,
                evaluated: run.records().count(),
                eligible: run.eligible().count(),
                eligible_fraction: run.eligible_fraction(),
                ranges,
            });
        }
    }
    Ok(rows)
}
