//! Brute-force oracles shared by the integration tests.
//!
//! The LP oracle builds every constraint straight from the definitions (one
//! pair per data point and coordinate, no reduction) and enumerates vertices
//! by solving every square subsystem of active constraints.

#![allow(dead_code)]

use drocal::eligibility::{build_indicator_tensor, EligibleMember, EligibleSet, TieRule, WeightPolytope};
use drocal::model::{ModelDims, SimulationModel};
use drocal::summary::TimeSeries;
use drocal::{seed, Error, Result};
use rand::Rng;

pub const FEAS_TOL: f64 = 1e-9;

/// `lower - q/sqrt(n) <= a . W <= upper + q/sqrt(n)`.
pub struct RawRow {
    pub a: Vec<f64>,
    pub lower: f64,
    pub upper: f64,
}

fn count(col: &[f64], pred: impl Fn(f64) -> bool) -> f64 {
    col.iter().filter(|&&v| pred(v)).count() as f64 / col.len() as f64
}

pub fn raw_rows(data: &[Vec<f64>], sims: &[Vec<f64>], rule: TieRule) -> Vec<RawRow> {
    let m = data[0].len();
    let mut rows = Vec::new();
    for r in 0..m {
        let col: Vec<f64> = data.iter().map(|d| d[r]).collect();
        for &s in &col {
            let left = count(&col, |v| v < s);
            let right = count(&col, |v| v <= s);
            let le: Vec<f64> = sims.iter().map(|x| if x[r] <= s { 1.0 } else { 0.0 }).collect();
            match rule {
                TieRule::Sandwich => rows.push(RawRow {
                    a: le,
                    lower: right,
                    upper: left,
                }),
                TieRule::Exact => {
                    let lt: Vec<f64> = sims.iter().map(|x| if x[r] < s { 1.0 } else { 0.0 }).collect();
                    rows.push(RawRow {
                        a: le,
                        lower: right,
                        upper: right,
                    });
                    rows.push(RawRow {
                        a: lt,
                        lower: left,
                        upper: left,
                    });
                }
            }
        }
    }
    rows
}

/// Solve the square system `m x = b`; `None` if (near) singular.
#[allow(clippy::needless_range_loop)]
pub fn solve_square(mut m: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| m[i][c].abs().total_cmp(&m[j][c].abs()))?;
        if m[p][c].abs() < 1e-10 {
            return None;
        }
        m.swap(c, p);
        b.swap(c, p);
        for i in 0..n {
            if i != c {
                let f = m[i][c] / m[c][c];
                if f != 0.0 {
                    for j in c..n {
                        m[i][j] -= f * m[c][j];
                    }
                    b[i] -= f * b[c];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / m[i][i]).collect())
}

/// Inequality `g . x <= h`.
struct Ineq {
    g: Vec<f64>,
    h: f64,
}

fn combinations(n: usize, k: usize, f: &mut impl FnMut(&[usize])) {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
        if cur.len() == k {
            f(cur);
            return;
        }
        for i in start..n {
            if n - i < k - cur.len() {
                break;
            }
            cur.push(i);
            rec(i + 1, n, k, cur, f);
            cur.pop();
        }
    }
    rec(0, n, k, &mut Vec::new(), f);
}

/// Vertices of `{x : eq . x = 1, ineqs}` in `dim` dimensions.
fn vertices(dim: usize, eq: &[f64], ineqs: &[Ineq]) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    combinations(ineqs.len(), dim - 1, &mut |idx| {
        let mut m = vec![eq.to_vec()];
        let mut b = vec![1.0];
        for &i in idx {
            m.push(ineqs[i].g.clone());
            b.push(ineqs[i].h);
        }
        if let Some(x) = solve_square(m, b) {
            if ineqs.iter().all(|c| c.g.iter().zip(&x).map(|(g, v)| g * v).sum::<f64>() <= c.h + FEAS_TOL) {
                out.push(x);
            }
        }
    });
    out
}

/// `q*` by enumerating vertices of the polytope in `(W, q)`.
pub fn oracle_min_q(data: &[Vec<f64>], sims: &[Vec<f64>], rule: TieRule) -> f64 {
    let k = sims.len();
    let sn = (data.len() as f64).sqrt();
    let mut ineqs = Vec::new();
    for row in raw_rows(data, sims, rule) {
        let mut up = row.a.clone();
        up.push(-1.0 / sn);
        ineqs.push(Ineq { g: up, h: row.upper });
        let mut lo: Vec<f64> = row.a.iter().map(|v| -v).collect();
        lo.push(-1.0 / sn);
        ineqs.push(Ineq { g: lo, h: -row.lower });
    }
    for j in 0..=k {
        let mut g = vec![0.0; k + 1];
        g[j] = -1.0;
        ineqs.push(Ineq { g, h: 0.0 });
    }
    let mut eq = vec![1.0; k];
    eq.push(0.0);
    vertices(k + 1, &eq, &ineqs)
        .iter()
        .map(|x| x[k])
        .fold(f64::INFINITY, f64::min)
}

/// Vertices of the weight polytope at threshold `q`.
pub fn oracle_polytope(data: &[Vec<f64>], sims: &[Vec<f64>], q: f64, rule: TieRule) -> Vec<Vec<f64>> {
    let k = sims.len();
    let eps = q / (data.len() as f64).sqrt();
    let mut ineqs = Vec::new();
    for row in raw_rows(data, sims, rule) {
        ineqs.push(Ineq {
            g: row.a.clone(),
            h: row.upper + eps,
        });
        ineqs.push(Ineq {
            g: row.a.iter().map(|v| -v).collect(),
            h: eps - row.lower,
        });
    }
    for j in 0..k {
        let mut g = vec![0.0; k];
        g[j] = -1.0;
        ineqs.push(Ineq { g, h: 0.0 });
    }
    vertices(k, &vec![1.0; k], &ineqs)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Extremes of `c . W` over a vertex list, `None` if empty.
pub fn oracle_extremes(verts: &[Vec<f64>], c: &[f64]) -> Option<(f64, f64)> {
    verts.iter().map(|w| dot(c, w)).fold(None, |acc, v| {
        Some(acc.map_or((v, v), |(lo, hi): (f64, f64)| (lo.min(v), hi.max(v))))
    })
}

/// A random tiny instance: `k <= 5`, `n1 <= 3`, `m <= 2`. Values are drawn
/// from a coarse grid half the time so ties between data and simulations
/// occur.
pub fn tiny_instance<R: Rng>(rng: &mut R) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let k = rng.random_range(1..=5);
    let n1 = rng.random_range(1..=3);
    let m = rng.random_range(1..=2);
    let coarse = rng.random_bool(0.5);
    let mut matrix = |rows: usize| -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| {
                (0..m)
                    .map(|_| if coarse { f64::from(rng.random_range(0..4u8)) } else { rng.random::<f64>() })
                    .collect()
            })
            .collect()
    };
    let data = matrix(n1);
    let sims = matrix(k);
    (data, sims)
}

/// `a = [j]`, `e = [l]`; requirement values read from a table.
pub struct Table(pub Vec<Vec<Vec<f64>>>);

impl SimulationModel for Table {
    fn dims(&self) -> ModelDims {
        ModelDims {
            a: 1,
            e: 1,
            theta: 1,
            requirements: 2,
        }
    }

    fn simulate(&self, _a: &[f64], _e: &[f64]) -> Result<TimeSeries> {
        Err(Error::Model("table model has no outputs".into()))
    }

    fn requirements(&self, a: &[f64], e: &[f64], _theta: &[f64]) -> Result<Vec<f64>> {
        Ok(self.0[e[0] as usize][a[0] as usize].clone())
    }
}

pub struct TinyCase {
    pub set: EligibleSet,
    pub model: Table,
    /// Oracle vertices per member.
    pub vertices: Vec<Vec<Vec<f64>>>,
}

/// Two eligible members sharing `k` a-samples, each with its own polytope.
pub fn tiny_case(s: u64) -> TinyCase {
    let mut rng = seed::rng(s);
    let (data, sims0) = tiny_instance(&mut rng);
    let k = sims0.len();
    let m = data[0].len();
    let sims1: Vec<Vec<f64>> = (0..k).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect();
    let sims = [sims0, sims1];
    let q = sims
        .iter()
        .map(|s| oracle_min_q(&data, s, TieRule::Exact))
        .fold(0.0, f64::max)
        + rng.random_range(0.0..0.5)
        + 1e-6;
    let table = Table(
        (0..2)
            .map(|_| {
                (0..k)
                    .map(|_| (0..2).map(|_| rng.random_range(-1.0..1.0)).collect())
                    .collect()
            })
            .collect(),
    );
    let members = (0..2)
        .map(|l| EligibleMember {
            e: vec![l as f64],
            polytope: WeightPolytope::new(build_indicator_tensor(&data, &sims[l]).unwrap(), q).unwrap(),
        })
        .collect();
    TinyCase {
        set: EligibleSet {
            a_samples: (0..k).map(|j| vec![j as f64]).collect(),
            members,
        },
        vertices: sims.iter().map(|s| oracle_polytope(&data, s, q, TieRule::Exact)).collect(),
        model: table,
    }
}

/// Reliability quantities of a [`TinyCase`] computed from its vertices.
pub struct TinyExpect {
    pub requirement_ranges: Vec<(f64, f64)>,
    pub combined: (f64, f64),
    pub severities: Vec<f64>,
    /// `(R_min, R_max)` per member.
    pub rows: Vec<(f64, f64)>,
    pub objective: f64,
}

pub fn tiny_expect(case: &TinyCase) -> TinyExpect {
    let g = &case.model.0;
    let members = g.len();
    let reqs = g[0][0].len();
    let ind = |l: usize, i: Option<usize>| -> Vec<f64> {
        g[l].iter()
            .map(|row| {
                let fail = match i {
                    Some(i) => row[i] >= 0.0,
                    None => row.iter().any(|&v| v >= 0.0),
                };
                if fail { 1.0 } else { 0.0 }
            })
            .collect()
    };
    let ext = |l: usize, c: &[f64]| oracle_extremes(&case.vertices[l], c).expect("nonempty polytope");
    let hull = |i: Option<usize>| {
        (0..members).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), l| {
            let (a, b) = ext(l, &ind(l, i));
            (lo.min(a), hi.max(b))
        })
    };
    let rows: Vec<(f64, f64)> = (0..members).map(|l| ext(l, &ind(l, None))).collect();
    TinyExpect {
        requirement_ranges: (0..reqs).map(|i| hull(Some(i))).collect(),
        combined: hull(None),
        severities: (0..reqs)
            .map(|i| {
                (0..members)
                    .map(|l| {
                        let c: Vec<f64> = g[l].iter().map(|row| row[i].max(0.0)).collect();
                        ext(l, &c).1
                    })
                    .fold(0.0, f64::max)
            })
            .collect(),
        objective: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        rows,
    }
}
