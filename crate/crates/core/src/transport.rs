//! Bounded-Lipschitz (Kantorovich) distance between finitely supported
//! measures, solved exactly as a linear program.
//!
//! With `ψ_i = φ_i + s ≥ 0` the program becomes
//!
//! ```text
//! maximize   Σ c_i ψ_i − (Σ c_i) s
//! subject to ψ_i − 2s          ≤ 0
//!            ψ_i − ψ_j − L d_ij ≤ 0   (ordered pairs, generated lazily)
//!            s + L             ≤ 1
//! ```
//!
//! whose right-hand sides are nonnegative, so the slack basis is feasible.
//! Pair constraints are added in rounds and re-optimized with dual simplex
//! pivots.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compactification::{metric_d, CompactificationError, CompactificationSpec};
use crate::measure::DiscreteMeasure;
use crate::vecops;

pub const MAX_POINTS: usize = 512;
pub const METRIC_TOL: f64 = 1e-9;
const PIVOT_TOL: f64 = 1e-9;
const RATIO_TIE: f64 = 1e-12;
const PERTURBATION: f64 = 1e-7;
const FEAS_TOL: f64 = 1e-11;
const INITIAL_NEIGHBOURS: usize = 8;
const MAX_ROWS_PER_ROUND: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error("distance matrix is {rows}x{cols}, expected {n}x{n}")]
    Shape { rows: usize, cols: usize, n: usize },
    #[error("distance matrix not a metric at ({i},{j},{k}): violation {violation:e}")]
    NotMetric { i: usize, j: usize, k: usize, violation: f64 },
    #[error("at most {MAX_POINTS} support points are supported, got {0}")]
    TooManyPoints(usize),
    #[error("weight vector has length {0}, expected {1}")]
    WeightLength(usize, usize),
    #[error("support point not in metric space")]
    UnknownPoint,
    #[error("simplex did not converge after {iterations} pivots (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error(transparent)]
    Compactification(#[from] CompactificationError),
}

pub type Result<T> = std::result::Result<T, TransportError>;

/// Finite set of points with a validated distance matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMetricSpace {
    points: Vec<Vec<f64>>,
    dist: Vec<Vec<f64>>,
}

impl FiniteMetricSpace {
    pub fn new(points: Vec<Vec<f64>>, dist: Vec<Vec<f64>>) -> Result<Self> {
        let n = points.len();
        if dist.len() != n || dist.iter().any(|r| r.len() != n) {
            return Err(TransportError::Shape { rows: dist.len(), cols: dist.first().map_or(0, Vec::len), n });
        }
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            if dist[i][i].abs() > METRIC_TOL {
                return Err(TransportError::NotMetric { i, j: i, k: i, violation: dist[i][i].abs() });
            }
            for j in 0..n {
                let asym = (dist[i][j] - dist[j][i]).abs();
                if asym > METRIC_TOL || dist[i][j] < -METRIC_TOL {
                    return Err(TransportError::NotMetric { i, j, k: j, violation: asym });
                }
            }
        }
        #[allow(clippy::needless_range_loop)]
        for i in 0..n {
            for j in 0..n {
                let dij = dist[i][j];
                for k in 0..n {
                    let violation = dij - dist[i][k] - dist[k][j];
                    if violation > METRIC_TOL {
                        return Err(TransportError::NotMetric { i, j, k, violation });
                    }
                }
            }
        }
        Ok(Self { points, dist })
    }

    pub fn euclidean(points: Vec<Vec<f64>>) -> Self {
        let dist = points.iter().map(|a| points.iter().map(|b| vecops::dist(a, b)).collect()).collect();
        Self { points, dist }
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn dist(&self) -> &[Vec<f64>] {
        &self.dist
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Weight vector of `m` on this space's points.
    pub fn embed(&self, m: &DiscreteMeasure) -> Result<Vec<f64>> {
        let tol = m.dedup_tol();
        let mut out = vec![0.0; self.len()];
        for (x, w) in m.atoms() {
            let i = self.points.iter().position(|p| vecops::dist(p, x) <= tol).ok_or(TransportError::UnknownPoint)?;
            out[i] += w;
        }
        Ok(out)
    }
}

/// Distance matrix of the compactification metric on ball-coordinate points.
pub fn metric_space_from_spec(points: Vec<Vec<f64>>, spec: &CompactificationSpec) -> Result<FiniteMetricSpace> {
    let n = points.len();
    let mut dist = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = metric_d(&points[i], &points[j], spec)?;
            dist[i][j] = d;
            dist[j][i] = d;
        }
    }
    FiniteMetricSpace::new(points, dist)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KantorovichResult {
    pub value: f64,
    pub iterations: usize,
    pub duality_gap: f64,
    pub rounds: usize,
    pub pair_constraints: usize,
}

/// `sup { Σ φ_i (a_i − b_i) : sup|φ| + Lip(φ) ≤ 1 }` over the space.
pub fn lip_dual_distance(space: &FiniteMetricSpace, a: &[f64], b: &[f64]) -> Result<KantorovichResult> {
    let n = space.len();
    if a.len() != n {
        return Err(TransportError::WeightLength(a.len(), n));
    }
    if b.len() != n {
        return Err(TransportError::WeightLength(b.len(), n));
    }
    if n > MAX_POINTS {
        return Err(TransportError::TooManyPoints(n));
    }
    let c: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if n == 0 || c.iter().all(|&v| v == 0.0) {
        return Ok(KantorovichResult { value: 0.0, iterations: 0, duality_gap: 0.0, rounds: 0, pair_constraints: 0 });
    }
    BlProgram::new(space, &c).solve()
}

/// Merges both supports into a metric space built by `metric`, then solves.
pub fn kantorovich(
    m1: &DiscreteMeasure,
    m2: &DiscreteMeasure,
    metric: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<KantorovichResult> {
    let tol = m1.dedup_tol().max(m2.dedup_tol());
    let mut points: Vec<Vec<f64>> = Vec::new();
    for p in m1.points().iter().chain(m2.points()) {
        if !points.iter().any(|q| vecops::dist(p, q) <= tol) {
            points.push(p.clone());
        }
    }
    if points.len() > MAX_POINTS {
        return Err(TransportError::TooManyPoints(points.len()));
    }
    let dist = points.iter().map(|x| points.iter().map(|y| metric(x, y)).collect()).collect();
    let space = FiniteMetricSpace::new(points, dist)?;
    let a = space.embed(m1)?;
    let b = space.embed(m2)?;
    lip_dual_distance(&space, &a, &b)
}

/// Dense dictionary `x_B = rhs − A x_N`, objective `z0 + cost · x_N`.
struct Dictionary {
    a: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Right-hand-side perturbation carried through the same pivots;
    /// breaks the heavy degeneracy of the zero rows.
    pert: Vec<f64>,
    perturbed: bool,
    cost: Vec<f64>,
    z0: f64,
    /// Variable label of each nonbasic column.
    nonbasic: Vec<usize>,
    /// Variable label of each basic row.
    basic: Vec<usize>,
    iterations: usize,
}

impl Dictionary {
    fn pivot(&mut self, r: usize, e: usize) {
        let piv = self.a[r][e];
        let inv = 1.0 / piv;
        self.rhs[r] *= inv;
        self.pert[r] *= inv;
        for (j, v) in self.a[r].iter_mut().enumerate() {
            *v = if j == e { inv } else { *v * inv };
        }
        let (row_r, rhs_r, pert_r) = (self.a[r].clone(), self.rhs[r], self.pert[r]);
        for i in 0..self.a.len() {
            if i == r {
                continue;
            }
            let f = self.a[i][e];
            if f == 0.0 {
                continue;
            }
            self.rhs[i] -= f * rhs_r;
            self.pert[i] -= f * pert_r;
            for (j, v) in self.a[i].iter_mut().enumerate() {
                *v = if j == e { -f * row_r[e] } else { *v - f * row_r[j] };
            }
        }
        let f = self.cost[e];
        self.z0 += f * rhs_r;
        for (j, v) in self.cost.iter_mut().enumerate() {
            *v = if j == e { -f * row_r[e] } else { *v - f * row_r[j] };
        }
        std::mem::swap(&mut self.basic[r], &mut self.nonbasic[e]);
        self.iterations += 1;
    }

    fn max_iterations(&self) -> usize {
        50 * (self.a.len() + self.cost.len()) + 1000
    }

    /// Primal simplex from a feasible dictionary. Dantzig pricing, with
    /// Bland's rule after a run of degenerate pivots.
    fn primal(&mut self) -> Result<()> {
        let mut degenerate_run = 0usize;
        loop {
            let bland = degenerate_run > 50;
            let entering = if bland {
                (0..self.cost.len()).filter(|&j| self.cost[j] > PIVOT_TOL).min_by_key(|&j| self.nonbasic[j])
            } else {
                (0..self.cost.len())
                    .filter(|&j| self.cost[j] > PIVOT_TOL)
                    .max_by(|&x, &y| self.cost[x].total_cmp(&self.cost[y]))
            };
            let Some(e) = entering else { return Ok(()) };
            let candidates: Vec<(usize, f64)> = (0..self.a.len())
                .filter(|&i| self.a[i][e] > PIVOT_TOL)
                .map(|i| (i, self.eff(i).max(0.0) / self.a[i][e]))
                .collect();
            let leaving = best_pivot(&candidates, |i| self.a[i][e].abs(), |i| self.basic[i]);
            // Unbounded cannot happen: s + L ≤ 1 and ψ_i ≤ 2s bound every variable.
            let Some((r, ratio)) = leaving else {
                return Err(TransportError::NoConvergence { iterations: self.iterations, residual: f64::INFINITY });
            };
            degenerate_run = if ratio == 0.0 { degenerate_run + 1 } else { 0 };
            self.pivot(r, e);
            if self.iterations > self.max_iterations() {
                return Err(self.no_convergence());
            }
        }
    }

    /// Dual simplex from a dual-feasible dictionary (all costs ≤ 0).
    fn dual(&mut self) -> Result<()> {
        loop {
            let leaving = (0..self.rhs.len())
                .filter(|&i| self.eff(i) < -FEAS_TOL)
                .min_by(|&x, &y| self.eff(x).total_cmp(&self.eff(y)).then(self.basic[x].cmp(&self.basic[y])));
            let Some(r) = leaving else { return Ok(()) };
            let candidates: Vec<(usize, f64)> = (0..self.cost.len())
                .filter(|&j| self.a[r][j] < -PIVOT_TOL)
                .map(|j| (j, self.cost[j].min(0.0) / self.a[r][j]))
                .collect();
            let entering = best_pivot(&candidates, |j| self.a[r][j].abs(), |j| self.nonbasic[j]);
            let Some((e, _)) = entering else {
                return Err(TransportError::NoConvergence { iterations: self.iterations, residual: -self.rhs[r] });
            };
            self.pivot(r, e);
            if self.iterations > self.max_iterations() {
                return Err(self.no_convergence());
            }
        }
    }

    fn eff(&self, i: usize) -> f64 {
        self.rhs[i] + self.pert[i]
    }

    fn drop_perturbation(&mut self) {
        self.perturbed = false;
        self.pert.iter_mut().for_each(|v| *v = 0.0);
    }

    fn no_convergence(&self) -> TransportError {
        let infeas = self.rhs.iter().fold(0.0f64, |m, &v| m.max(-v));
        let reduced = self.cost.iter().fold(0.0f64, |m, &v| m.max(v));
        TransportError::NoConvergence { iterations: self.iterations, residual: infeas.max(reduced) }
    }

    /// Current value of an original variable.
    fn value(&self, var: usize) -> f64 {
        self.basic.iter().position(|&b| b == var).map_or(0.0, |r| self.rhs[r])
    }

    /// Appends `Σ coef_k x_k ≤ 0` over original variables, rewritten in
    /// terms of the current nonbasic columns.
    fn add_row(&mut self, coef: &[(usize, f64)], slack_label: usize) {
        let mut row = vec![0.0; self.cost.len()];
        let mut rhs = 0.0;
        let mut pert = if self.perturbed { perturbation(slack_label) } else { 0.0 };
        for &(var, c) in coef {
            if let Some(j) = self.nonbasic.iter().position(|&v| v == var) {
                row[j] += c;
            } else if let Some(r) = self.basic.iter().position(|&v| v == var) {
                rhs -= c * self.rhs[r];
                pert -= c * self.pert[r];
                for (acc, v) in row.iter_mut().zip(&self.a[r]) {
                    *acc -= c * v;
                }
            }
        }
        self.a.push(row);
        self.rhs.push(rhs);
        self.pert.push(pert);
        self.basic.push(slack_label);
    }
}

/// Deterministic per-row perturbation in `[1, 2)·1e-7`.
fn perturbation(label: usize) -> f64 {
    let frac = (label as f64 * 0.618_033_988_749_895).fract();
    PERTURBATION * (1.0 + frac)
}

/// Minimum-ratio candidate; near-ties go to the largest pivot magnitude,
/// then to the smallest variable label.
fn best_pivot(
    candidates: &[(usize, f64)],
    magnitude: impl Fn(usize) -> f64,
    label: impl Fn(usize) -> usize,
) -> Option<(usize, f64)> {
    let theta = candidates.iter().map(|c| c.1).fold(f64::INFINITY, f64::min);
    candidates
        .iter()
        .copied()
        .filter(|c| c.1 <= theta + RATIO_TIE * (1.0 + theta.abs()))
        .max_by(|x, y| magnitude(x.0).total_cmp(&magnitude(y.0)).then(label(y.0).cmp(&label(x.0))))
}

struct BlProgram<'a> {
    space: &'a FiniteMetricSpace,
    c: &'a [f64],
}

impl<'a> BlProgram<'a> {
    fn new(space: &'a FiniteMetricSpace, c: &'a [f64]) -> Self {
        Self { space, c }
    }

    // Variables: ψ_0..ψ_{n-1}, s = n, L = n+1; slacks are labelled from n+2.
    fn solve(&self) -> Result<KantorovichResult> {
        let n = self.space.len();
        let (s, l) = (n, n + 1);
        let nvars = n + 2;
        let total: f64 = self.c.iter().sum();
        let mut cost: Vec<f64> = self.c.to_vec();
        cost.push(-total);
        cost.push(0.0);
        let mut a = Vec::with_capacity(n + 1);
        let mut rhs = Vec::with_capacity(n + 1);
        for i in 0..n {
            let mut row = vec![0.0; nvars];
            row[i] = 1.0;
            row[s] = -2.0;
            a.push(row);
            rhs.push(0.0);
        }
        let mut cap = vec![0.0; nvars];
        cap[s] = 1.0;
        cap[l] = 1.0;
        a.push(cap);
        rhs.push(1.0);
        let cap_label = nvars + n;
        let pert = (nvars..nvars + n + 1).map(perturbation).collect();
        let mut dict = Dictionary {
            pert,
            perturbed: true,
            basic: (nvars..nvars + n + 1).collect(),
            nonbasic: (0..nvars).collect(),
            a,
            rhs,
            cost,
            z0: 0.0,
            iterations: 0,
        };
        let mut next_label = nvars + n + 1;
        let mut pairs = 0usize;
        let mut pending = self.initial_pairs();
        let mut rounds = 0usize;
        let mut first = true;
        loop {
            for &(i, j) in &pending {
                dict.add_row(&[(i, 1.0), (j, -1.0), (l, -self.space.dist[i][j])], next_label);
                next_label += 1;
            }
            pairs += pending.len();
            if first {
                dict.primal()?;
                first = false;
            } else {
                dict.dual()?;
                dict.primal()?;
            }
            rounds += 1;
            pending = self.violated(&dict, l);
            if pending.is_empty() && dict.perturbed {
                dict.drop_perturbation();
                dict.dual()?;
                dict.primal()?;
                pending = self.violated(&dict, l);
            }
            if pending.is_empty() {
                break;
            }
        }
        let primal: f64 = (0..n).map(|i| self.c[i] * dict.value(i)).sum::<f64>() - total * dict.value(s);
        let duality_gap = (primal - dual_value(&dict, cap_label)).abs();
        Ok(KantorovichResult {
            value: dict.z0,
            iterations: dict.iterations,
            duality_gap,
            rounds,
            pair_constraints: pairs,
        })
    }

    fn initial_pairs(&self) -> Vec<(usize, usize)> {
        let n = self.space.len();
        let k = INITIAL_NEIGHBOURS.min(n.saturating_sub(1));
        let mut seen = std::collections::BTreeSet::new();
        for i in 0..n {
            let mut order: Vec<usize> = (0..n).filter(|&j| j != i).collect();
            order.sort_by(|&x, &y| self.space.dist[i][x].total_cmp(&self.space.dist[i][y]).then(x.cmp(&y)));
            for &j in order.iter().take(k) {
                seen.insert((i, j));
                seen.insert((j, i));
            }
        }
        seen.into_iter().collect()
    }

    fn violated(&self, dict: &Dictionary, l: usize) -> Vec<(usize, usize)> {
        let n = self.space.len();
        let psi: Vec<f64> = (0..n).map(|i| dict.value(i)).collect();
        let lip = dict.value(l);
        let mut out: Vec<(f64, usize, usize)> = Vec::new();
        for i in 0..n {
            for j in 0..n {
                let v = psi[i] - psi[j] - lip * self.space.dist[i][j];
                if i != j && v > FEAS_TOL {
                    out.push((v, i, j));
                }
            }
        }
        out.sort_by(|x, y| y.0.total_cmp(&x.0).then((x.1, x.2).cmp(&(y.1, y.2))));
        out.truncate(MAX_ROWS_PER_ROUND);
        out.into_iter().map(|(_, i, j)| (i, j)).collect()
    }
}

/// Dual objective: only the `s + L ≤ 1` row has a nonzero right-hand side.
fn dual_value(dict: &Dictionary, cap_label: usize) -> f64 {
    dict.nonbasic.iter().position(|&v| v == cap_label).map_or(0.0, |j| -dict.cost[j])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transform::catalog;

    fn two_point(t: f64) -> f64 {
        let space = FiniteMetricSpace::euclidean(vec![vec![0.0], vec![t]]);
        lip_dual_distance(&space, &[1.0, 0.0], &[0.0, 1.0]).unwrap().value
    }

    #[test]
    fn two_point_closed_form() {
        for t in [0.1, 1.0, 2.0, 10.0] {
            assert!((two_point(t) - 2.0 * t / (2.0 + t)).abs() < 1e-9, "t = {t}");
        }
        assert!((two_point(1e6) - 2.0).abs() < 1e-5);
    }

    #[test]
    fn identical_measures_are_at_zero() {
        let m = DiscreteMeasure::new(vec![vec![0.0], vec![1.0]], vec![0.3, 0.7]).unwrap();
        let r = kantorovich(&m, &m, vecops::dist).unwrap();
        assert_eq!(r.value, 0.0);
    }

    #[test]
    fn unequal_mass_single_point() {
        let space = FiniteMetricSpace::euclidean(vec![vec![0.0]]);
        let r = lip_dual_distance(&space, &[1.0], &[0.25]).unwrap();
        assert!((r.value - 0.75).abs() < 1e-12);
        assert!(r.duality_gap < 1e-12);
    }

    #[test]
    fn rejects_non_metric() {
        let d = vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]];
        let pts = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert!(matches!(FiniteMetricSpace::new(pts, d), Err(TransportError::NotMetric { .. })));
    }

    #[test]
    fn spec_metric_space() {
        let pts = vec![vec![0.0], vec![0.5], vec![-0.25]];
        let sphere = metric_space_from_spec(pts.clone(), &CompactificationSpec::sphere(1)).unwrap();
        assert_eq!(sphere.dist(), FiniteMetricSpace::euclidean(pts).dist());
        let spec = CompactificationSpec::new(1, 1.0, vec![catalog::logsin(1).unwrap()]).unwrap();
        let pts = vec![vec![0.999_99], vec![0.999_995]];
        let space = metric_space_from_spec(pts.clone(), &spec).unwrap();
        let g = &spec.generators()[0];
        let raw: Vec<f64> =
            pts.iter().map(|p| g.value_at_raw(&crate::transform::from_ball_point(p).unwrap())).collect();
        assert!(space.dist()[0][1] >= 0.5 * (raw[0] - raw[1]).abs());
        assert!(space.dist().iter().enumerate().all(|(i, r)| r[i] == 0.0));
    }
}
