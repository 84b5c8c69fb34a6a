//! Failure-probability ranges, severities and per-e best/worst case
//! failure probabilities, as linear bounds over eligibility weight polytopes.

use rayon::prelude::*;

use crate::eligibility::{range_shrinkage_scores, DimScore, EligibleSet, WeightPolytope};
use crate::error::{Error, Result};
use crate::lp::Sense;
use crate::model::{ParamBox, SimulationModel};

/// Requirement values at one `e` over the shared aleatory samples.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureIndicators {
    /// `g[j][i] = g_i(a_j, e, theta)`.
    pub g: Vec<Vec<f64>>,
    /// `per_requirement[i][j] = 1{g_i(a_j) >= 0}`.
    pub per_requirement: Vec<Vec<bool>>,
    /// `combined[j] = 1{any i fails at a_j}`.
    pub combined: Vec<bool>,
}

impl FailureIndicators {
    pub fn from_values(g: Vec<Vec<f64>>) -> Result<Self> {
        let n_req = g.first().map(Vec::len).unwrap_or(0);
        if g.iter().any(|row| row.len() != n_req) {
            return Err(Error::Model("requirement vectors of different lengths".into()));
        }
        if g.iter().flatten().any(|v| v.is_nan()) {
            return Err(Error::Model("requirement value is NaN".into()));
        }
        let per_requirement: Vec<Vec<bool>> = (0..n_req).map(|i| g.iter().map(|row| row[i] >= 0.0).collect()).collect();
        let combined = g.iter().map(|row| row.iter().any(|&v| v >= 0.0)).collect();
        Ok(FailureIndicators {
            g,
            per_requirement,
            combined,
        })
    }

    pub fn evaluate(model: &dyn SimulationModel, e: &[f64], a_samples: &[Vec<f64>], theta: &[f64]) -> Result<Self> {
        let g = a_samples
            .iter()
            .map(|a| model.requirements(a, e, theta))
            .collect::<Result<Vec<_>>>()?;
        Self::from_values(g)
    }

    pub fn n_requirements(&self) -> usize {
        self.per_requirement.len()
    }

    /// Objective vector `g_i * 1{g_i >= 0}` for requirement `i`.
    pub fn positive_part(&self, i: usize) -> Vec<f64> {
        self.g.iter().map(|row| row[i].max(0.0)).collect()
    }
}

pub(crate) fn indicator(bits: &[bool]) -> Vec<f64> {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// Polytope range of a 0/1 objective, clamped to `[0, 1]`.
fn bounds(poly: &WeightPolytope, c: &[f64]) -> Result<Range> {
    let (lo, _) = poly.optimize(c, Sense::Minimize)?;
    let (hi, _) = poly.optimize(c, Sense::Maximize)?;
    let lo = lo.clamp(0.0, 1.0);
    Ok(Range { lo, hi: hi.clamp(lo, 1.0) })
}

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    fn hull(self, other: Range) -> Range {
        Range {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

/// Best- and worst-case probability that any requirement fails, at one `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct RminRmax {
    pub e: Vec<f64>,
    pub r_min: f64,
    pub r_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReliabilityReport {
    pub requirement_ranges: Vec<Range>,
    pub combined: Range,
    pub severities: Vec<f64>,
    pub table: Vec<RminRmax>,
}

/// Everything the report needs at one eligible `e`.
struct MemberBounds {
    requirement: Vec<Range>,
    combined: Range,
    severity: Vec<f64>,
}

fn indicators_per_member(
    set: &EligibleSet,
    model: &dyn SimulationModel,
    theta: &[f64],
) -> Result<Vec<FailureIndicators>> {
    if set.is_empty() {
        return Err(Error::EmptyEligibleSet);
    }
    set.members
        .par_iter()
        .map(|m| FailureIndicators::evaluate(model, &m.e, &set.a_samples, theta))
        .collect()
}

fn member_bounds(poly: &WeightPolytope, fi: &FailureIndicators) -> Result<MemberBounds> {
    let requirement = fi
        .per_requirement
        .iter()
        .map(|bits| bounds(poly, &indicator(bits)))
        .collect::<Result<Vec<_>>>()?;
    let combined = bounds(poly, &indicator(&fi.combined))?;
    let severity = (0..fi.n_requirements())
        .map(|i| poly.optimize(&fi.positive_part(i), Sense::Maximize).map(|(v, _)| v.max(0.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MemberBounds {
        requirement,
        combined,
        severity,
    })
}

/// Ranges of `R_i(theta)` per requirement and of `R(theta)`, over every
/// eligible `e` and every weight vector in its polytope.
pub fn failure_prob_range(set: &EligibleSet, model: &dyn SimulationModel, theta: &[f64]) -> Result<(Vec<Range>, Range)> {
    let fis = indicators_per_member(set, model, theta)?;
    let per: Vec<(Vec<Range>, Range)> = set
        .members
        .par_iter()
        .zip(&fis)
        .map(|(m, fi)| {
            let req = fi
                .per_requirement
                .iter()
                .map(|bits| bounds(&m.polytope, &indicator(bits)))
                .collect::<Result<Vec<_>>>()?;
            Ok((req, bounds(&m.polytope, &indicator(&fi.combined))?))
        })
        .collect::<Result<_>>()?;
    Ok(fold_ranges(per.into_iter()))
}

fn fold_ranges(mut it: impl Iterator<Item = (Vec<Range>, Range)>) -> (Vec<Range>, Range) {
    let (mut req, mut comb) = it.next().expect("nonempty eligible set");
    for (r, c) in it {
        req.iter_mut().zip(r).for_each(|(a, b)| *a = a.hull(b));
        comb = comb.hull(c);
    }
    (req, comb)
}

/// `s_i(theta)`: largest expected positive part of `g_i` over the eligible
/// set and its polytopes.
pub fn severity(set: &EligibleSet, model: &dyn SimulationModel, theta: &[f64], i: usize) -> Result<f64> {
    let fis = indicators_per_member(set, model, theta)?;
    if i >= fis[0].n_requirements() {
        return Err(Error::invalid(format!(
            "requirement index {i} out of range 0..{}",
            fis[0].n_requirements()
        )));
    }
    let vals: Vec<f64> = set
        .members
        .par_iter()
        .zip(&fis)
        .map(|(m, fi)| m.polytope.optimize(&fi.positive_part(i), Sense::Maximize).map(|(v, _)| v.max(0.0)))
        .collect::<Result<_>>()?;
    Ok(vals.into_iter().fold(0.0, f64::max))
}

/// Per eligible `e`: polytope min and max of the combined failure indicator.
pub fn rmin_rmax_table(set: &EligibleSet, model: &dyn SimulationModel, theta: &[f64]) -> Result<Vec<RminRmax>> {
    let fis = indicators_per_member(set, model, theta)?;
    set.members
        .par_iter()
        .zip(&fis)
        .map(|(m, fi)| {
            let r = bounds(&m.polytope, &indicator(&fi.combined))?;
            Ok(RminRmax {
                e: m.e.clone(),
                r_min: r.lo,
                r_max: r.hi,
            })
        })
        .collect()
}

/// Ranges, severities and the R_min/R_max table from one pass of
/// requirement evaluations.
pub fn reliability_report(set: &EligibleSet, model: &dyn SimulationModel, theta: &[f64]) -> Result<ReliabilityReport> {
    let fis = indicators_per_member(set, model, theta)?;
    let per: Vec<MemberBounds> = set
        .members
        .par_iter()
        .zip(&fis)
        .map(|(m, fi)| member_bounds(&m.polytope, fi))
        .collect::<Result<_>>()?;
    let (requirement_ranges, combined) = fold_ranges(per.iter().map(|b| (b.requirement.clone(), b.combined)));
    let mut severities = vec![0.0_f64; requirement_ranges.len()];
    for b in &per {
        severities.iter_mut().zip(&b.severity).for_each(|(s, v)| *s = s.max(*v));
    }
    let table = set
        .members
        .iter()
        .zip(&per)
        .map(|(m, b)| RminRmax {
            e: m.e.clone(),
            r_min: b.combined.lo,
            r_max: b.combined.hi,
        })
        .collect();
    Ok(ReliabilityReport {
        requirement_ranges,
        combined,
        severities,
        table,
    })
}

/// Range-shrinkage scores computed only over rows whose `R_min` is at or
/// below the median `R_min`: which epistemic dimensions must be narrowed to
/// reach the low-failure region.
pub fn low_rmin_ranking(table: &[RminRmax], prior: &ParamBox) -> Result<Vec<DimScore>> {
    if table.is_empty() {
        return Err(Error::EmptyEligibleSet);
    }
    let mut r: Vec<f64> = table.iter().map(|row| row.r_min).collect();
    r.sort_by(f64::total_cmp);
    let median = r[(r.len() - 1) / 2];
    let low: Vec<Vec<f64>> = table.iter().filter(|row| row.r_min <= median).map(|row| row.e.clone()).collect();
    range_shrinkage_scores(&low, prior)
}
