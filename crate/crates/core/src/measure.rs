//! Finite atomic measures: scalar and vector weights, parametrized fibers,
//! disintegration, pushforward, Radon–Nikodym splitting and atomic parts.
//!
//! Every measure is a sorted list of atoms. Atoms closer than `dedup_tol`
//! are merged at construction, so two measures with equal atom lists are
//! equal as measures.

use std::cmp::Ordering;
use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::vecops;

pub type Point = Vec<f64>;

pub const DEFAULT_DEDUP_TOL: f64 = 1e-12;
/// Allowed deviation of a probability fiber's mass from 1.
pub const TOL_PROB: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasureError {
    #[error("empty measure")]
    Empty,
    #[error("invalid weight {weight} at atom {index}")]
    BadWeight { index: usize, weight: f64 },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },
    #[error("{points} points but {weights} weights")]
    Length { points: usize, weights: usize },
    #[error("missing fiber for marginal atom {0}")]
    MissingFiber(usize),
    #[error("fiber at cell {cell} has mass {mass}, expected 1")]
    NotProbability { cell: usize, mass: f64 },
    #[error("invalid measure JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, MeasureError>;

fn canonical(mut p: Point) -> Point {
    for x in p.iter_mut() {
        if *x == 0.0 {
            *x = 0.0; // drop the sign of -0.0
        }
    }
    p
}

fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            other => return other,
        }
    }
    a.len().cmp(&b.len())
}

/// Sorts atoms lexicographically and merges those within `tol` of an
/// earlier representative. The representative keeps its coordinates.
fn merge_atoms<W>(
    points: Vec<Point>,
    weights: Vec<W>,
    tol: f64,
    mut combine: impl FnMut(&mut W, W),
) -> (Vec<Point>, Vec<W>) {
    let mut atoms: Vec<(Point, W)> = points.into_iter().map(canonical).zip(weights).collect();
    atoms.sort_by(|a, b| lex_cmp(&a.0, &b.0));
    let mut kept_p: Vec<Point> = Vec::with_capacity(atoms.len());
    let mut kept_w: Vec<W> = Vec::with_capacity(atoms.len());
    for (p, w) in atoms {
        let mut target = None;
        for k in (0..kept_p.len()).rev() {
            let q = &kept_p[k];
            if let (Some(&p0), Some(&q0)) = (p.first(), q.first()) {
                if q0 < p0 - tol {
                    break;
                }
            }
            if vecops::dist(&p, q) <= tol {
                target = Some(k);
                break;
            }
            if tol == 0.0 {
                break;
            }
        }
        match target {
            Some(k) => combine(&mut kept_w[k], w),
            None => {
                kept_p.push(p);
                kept_w.push(w);
            }
        }
    }
    (kept_p, kept_w)
}

fn check_dims(points: &[Point]) -> Result<usize> {
    let dim = points.first().map_or(0, Vec::len);
    for p in points {
        if p.len() != dim {
            return Err(MeasureError::Dimension { expected: dim, found: p.len() });
        }
    }
    Ok(dim)
}

/// Nonnegative finite measure carried by finitely many points of `R^k`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMeasure {
    points: Vec<Point>,
    weights: Vec<f64>,
    dim: usize,
    dedup_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct ScalarJson {
    points: Vec<Point>,
    weights: Vec<f64>,
}

impl DiscreteMeasure {
    pub fn new(points: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        Self::with_tol(points, weights, DEFAULT_DEDUP_TOL)
    }

    pub fn with_tol(points: Vec<Point>, weights: Vec<f64>, dedup_tol: f64) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(MeasureError::Length { points: points.len(), weights: weights.len() });
        }
        for (index, &weight) in weights.iter().enumerate() {
            if !(weight >= 0.0 && weight.is_finite()) {
                return Err(MeasureError::BadWeight { index, weight });
            }
        }
        let dim = check_dims(&points)?;
        let (points, weights) = merge_atoms(points, weights, dedup_tol, |a, b| *a += b);
        Ok(Self { points, weights, dim, dedup_tol })
    }

    /// The zero measure on `R^dim`.
    pub fn zero(dim: usize) -> Self {
        Self { points: Vec::new(), weights: Vec::new(), dim, dedup_tol: DEFAULT_DEDUP_TOL }
    }

    pub fn dirac(point: Point, weight: f64) -> Result<Self> {
        Self::new(vec![point], vec![weight])
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], f64)> + '_ {
        self.points.iter().map(Vec::as_slice).zip(self.weights.iter().copied())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dedup_tol(&self) -> f64 {
        self.dedup_tol
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Mass of a set of atom indices; additive over disjoint index sets.
    pub fn mass_of(&self, indices: impl IntoIterator<Item = usize>) -> f64 {
        indices.into_iter().map(|i| self.weights[i]).sum()
    }

    pub fn integrate(&self, f: impl Fn(&[f64]) -> f64) -> f64 {
        self.atoms().map(|(p, w)| w * f(p)).sum()
    }

    /// First moment divided by mass.
    pub fn mean(&self) -> Result<Point> {
        let m = self.mass();
        if m <= 0.0 {
            return Err(MeasureError::Empty);
        }
        let mut acc = vec![0.0; self.dim];
        for (p, w) in self.atoms() {
            vecops::add_scaled_into(&mut acc, p, w / m);
        }
        Ok(acc)
    }

    pub fn scaled(&self, alpha: f64) -> Result<Self> {
        Self::with_tol(self.points.clone(), self.weights.iter().map(|w| w * alpha).collect(), self.dedup_tol)
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        if !self.is_empty() && !other.is_empty() && self.dim != other.dim {
            return Err(MeasureError::Dimension { expected: self.dim, found: other.dim });
        }
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let mut weights = self.weights.clone();
        weights.extend(other.weights.iter().copied());
        let mut out = Self::with_tol(points, weights, self.dedup_tol)?;
        if out.is_empty() {
            out.dim = self.dim.max(other.dim);
        }
        Ok(out)
    }

    /// Image measure under `map`; mapped atoms that collide are merged.
    pub fn pushforward(&self, map: impl Fn(&[f64]) -> Point) -> Self {
        let points: Vec<Point> = self.points.iter().map(|p| map(p)).collect();
        let dim = points.first().map_or(self.dim, Vec::len);
        let (points, weights) = merge_atoms(points, self.weights.clone(), self.dedup_tol, |a, b| *a += b);
        Self { points, weights, dim, dedup_tol: self.dedup_tol }
    }

    pub fn restrict(&self, keep: impl Fn(&[f64]) -> bool) -> Self {
        let (points, weights) = self.atoms().filter(|(p, _)| keep(p)).map(|(p, w)| (p.to_vec(), w)).unzip();
        Self { points, weights, dim: self.dim, dedup_tol: self.dedup_tol }
    }

    /// Splits into atoms of weight `>= atom_threshold` and the rest.
    pub fn atomic_split(&self, atom_threshold: f64) -> (Self, Self) {
        let heavy = |w: f64| w >= atom_threshold;
        let pick = |want: bool| {
            let (points, weights): (Vec<Point>, Vec<f64>) =
                self.atoms().filter(|(_, w)| heavy(*w) == want).map(|(p, w)| (p.to_vec(), w)).unzip();
            Self { points, weights, dim: self.dim, dedup_tol: self.dedup_tol }
        };
        (pick(true), pick(false))
    }

    /// Total variation `Σ|a_i - b_i|` over merged supports, matching atoms
    /// within `tol`.
    pub fn tv_distance(&self, other: &Self, tol: f64) -> f64 {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let mut signed = self.weights.clone();
        signed.extend(other.weights.iter().map(|w| -w));
        let (_, merged) = merge_atoms(points, signed, tol, |a, b| *a += b);
        merged.iter().map(|w| w.abs()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&ScalarJson { points: self.points.clone(), weights: self.weights.clone() })
            .expect("plain numeric data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: ScalarJson = serde_json::from_str(s).map_err(|e| MeasureError::Json(e.to_string()))?;
        Self::new(raw.points, raw.weights)
    }

    /// Median atom weight; the scale used for the default singular cutoff.
    pub fn median_weight(&self) -> f64 {
        if self.weights.is_empty() {
            return 0.0;
        }
        let mut w = self.weights.clone();
        w.sort_by(f64::total_cmp);
        w[w.len() / 2]
    }
}

impl Serialize for DiscreteMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        ScalarJson { points: self.points.clone(), weights: self.weights.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for DiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = ScalarJson::deserialize(d)?;
        Self::new(raw.points, raw.weights).map_err(serde::de::Error::custom)
    }
}

/// Finite `R^d`-valued measure on finitely many points.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorDiscreteMeasure {
    points: Vec<Point>,
    vweights: Vec<Vec<f64>>,
    value_dim: usize,
    dedup_tol: f64,
}

#[derive(Serialize, Deserialize)]
struct VectorJson {
    points: Vec<Point>,
    weights: Vec<Vec<f64>>,
}

impl VectorDiscreteMeasure {
    pub fn new(points: Vec<Point>, vweights: Vec<Vec<f64>>) -> Result<Self> {
        if points.len() != vweights.len() {
            return Err(MeasureError::Length { points: points.len(), weights: vweights.len() });
        }
        check_dims(&points)?;
        let value_dim = check_dims(&vweights)?;
        for (index, v) in vweights.iter().enumerate() {
            if let Some(&weight) = v.iter().find(|x| !x.is_finite()) {
                return Err(MeasureError::BadWeight { index, weight });
            }
        }
        let (points, vweights) =
            merge_atoms(points, vweights, DEFAULT_DEDUP_TOL, |a, b| vecops::add_scaled_into(a, &b, 1.0));
        Ok(Self { points, vweights, value_dim, dedup_tol: DEFAULT_DEDUP_TOL })
    }

    pub fn zero(value_dim: usize) -> Self {
        Self { points: Vec::new(), vweights: Vec::new(), value_dim, dedup_tol: DEFAULT_DEDUP_TOL }
    }

    /// `density · mu`, one vector per atom of `mu`.
    pub fn from_density(mu: &DiscreteMeasure, density: &[Vec<f64>]) -> Result<Self> {
        if density.len() != mu.len() {
            return Err(MeasureError::Length { points: mu.len(), weights: density.len() });
        }
        let v = mu.atoms().zip(density).map(|((_, w), d)| vecops::scale(d, w)).collect();
        Self::new(mu.points().to_vec(), v)
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn vweights(&self) -> &[Vec<f64>] {
        &self.vweights
    }

    pub fn atoms(&self) -> impl Iterator<Item = (&[f64], &[f64])> + '_ {
        self.points.iter().map(Vec::as_slice).zip(self.vweights.iter().map(Vec::as_slice))
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn value_dim(&self) -> usize {
        self.value_dim
    }

    pub fn total_variation(&self) -> f64 {
        self.vweights.iter().map(|v| vecops::norm(v)).sum()
    }

    /// Vector sum of all weights.
    pub fn total(&self) -> Vec<f64> {
        let mut acc = vec![0.0; self.value_dim];
        for v in &self.vweights {
            vecops::add_scaled_into(&mut acc, v, 1.0);
        }
        acc
    }

    /// The variation measure `|η|`.
    pub fn variation(&self) -> DiscreteMeasure {
        let w = self.vweights.iter().map(|v| vecops::norm(v)).collect();
        DiscreteMeasure::new(self.points.clone(), w).expect("norms are valid weights")
    }

    pub fn plus(&self, other: &Self) -> Result<Self> {
        let mut points = self.points.clone();
        points.extend(other.points.iter().cloned());
        let mut v = self.vweights.clone();
        v.extend(other.vweights.iter().cloned());
        if points.is_empty() {
            return Ok(Self::zero(self.value_dim.max(other.value_dim)));
        }
        Self::new(points, v)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            points: self.points.clone(),
            vweights: self.vweights.iter().map(|v| vecops::scale(v, alpha)).collect(),
            value_dim: self.value_dim,
            dedup_tol: self.dedup_tol,
        }
    }

    pub fn pushforward(&self, map: impl Fn(&[f64]) -> Point) -> Self {
        let points: Vec<Point> = self.points.iter().map(|p| map(p)).collect();
        let (points, vweights) =
            merge_atoms(points, self.vweights.clone(), self.dedup_tol, |a, b| vecops::add_scaled_into(a, &b, 1.0));
        Self { points, vweights, value_dim: self.value_dim, dedup_tol: self.dedup_tol }
    }

    pub fn restrict(&self, keep: impl Fn(&[f64]) -> bool) -> Self {
        let (points, vweights) = self.atoms().filter(|(p, _)| keep(p)).map(|(p, v)| (p.to_vec(), v.to_vec())).unzip();
        Self { points, vweights, value_dim: self.value_dim, dedup_tol: self.dedup_tol }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&VectorJson { points: self.points.clone(), weights: self.vweights.clone() })
            .expect("plain numeric data serializes")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: VectorJson = serde_json::from_str(s).map_err(|e| MeasureError::Json(e.to_string()))?;
        Self::new(raw.points, raw.weights)
    }
}

impl Serialize for VectorDiscreteMeasure {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VectorJson { points: self.points.clone(), weights: self.vweights.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for VectorDiscreteMeasure {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = VectorJson::deserialize(d)?;
        Self::new(raw.points, raw.weights).map_err(serde::de::Error::custom)
    }
}

/// A family of fibers indexed by spatial cells. Fibers on cells without
/// marginal mass are left undefined (`None`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParametrizedMeasure {
    cells: Vec<Point>,
    fibers: Vec<Option<DiscreteMeasure>>,
    sub_probability: bool,
}

impl ParametrizedMeasure {
    /// Probability fibers: every defined fiber must have mass 1.
    pub fn new(cells: Vec<Point>, fibers: Vec<Option<DiscreteMeasure>>) -> Result<Self> {
        Self::build(cells, fibers, false)
    }

    /// Fibers of mass at most 1.
    pub fn new_sub_probability(cells: Vec<Point>, fibers: Vec<Option<DiscreteMeasure>>) -> Result<Self> {
        Self::build(cells, fibers, true)
    }

    fn build(cells: Vec<Point>, fibers: Vec<Option<DiscreteMeasure>>, sub: bool) -> Result<Self> {
        if cells.len() != fibers.len() {
            return Err(MeasureError::Length { points: cells.len(), weights: fibers.len() });
        }
        for (cell, f) in fibers.iter().enumerate() {
            if let Some(f) = f {
                let mass = f.mass();
                let bad = if sub { mass > 1.0 + TOL_PROB } else { (mass - 1.0).abs() > TOL_PROB };
                if bad {
                    return Err(MeasureError::NotProbability { cell, mass });
                }
            }
        }
        Ok(Self { cells, fibers, sub_probability: sub })
    }

    pub fn cells(&self) -> &[Point] {
        &self.cells
    }

    pub fn fibers(&self) -> &[Option<DiscreteMeasure>] {
        &self.fibers
    }

    pub fn fiber(&self, cell: usize) -> Option<&DiscreteMeasure> {
        self.fibers.get(cell).and_then(Option::as_ref)
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn is_sub_probability(&self) -> bool {
        self.sub_probability
    }
}

/// A measure on `X × Z`; the first `x_dim` coordinates of each atom are `X`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProductMeasure {
    inner: DiscreteMeasure,
    x_dim: usize,
}

impl ProductMeasure {
    pub fn new(inner: DiscreteMeasure, x_dim: usize) -> Result<Self> {
        if !inner.is_empty() && inner.dim() < x_dim {
            return Err(MeasureError::Dimension { expected: x_dim, found: inner.dim() });
        }
        Ok(Self { inner, x_dim })
    }

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.inner
    }

    pub fn x_dim(&self) -> usize {
        self.x_dim
    }

    /// Projection onto the `X` factor.
    pub fn x_marginal(&self) -> DiscreteMeasure {
        let k = self.x_dim;
        self.inner.pushforward(|p| p[..k].to_vec())
    }
}

/// Splits a product measure into its `X` marginal and conditional fibers.
pub fn disintegrate(pm: &ProductMeasure) -> Result<(DiscreteMeasure, ParametrizedMeasure)> {
    let m = pm.measure();
    if m.mass() <= 0.0 {
        return Err(MeasureError::Empty);
    }
    let k = pm.x_dim();
    let z_dim = m.dim() - k;
    // Atoms are sorted lexicographically, so equal X prefixes are contiguous.
    let mut groups: Vec<(Point, Vec<(Point, f64)>)> = Vec::new();
    for (p, w) in m.atoms() {
        let (x, z) = p.split_at(k);
        match groups.last_mut() {
            Some((gx, members)) if gx.as_slice() == x => members.push((z.to_vec(), w)),
            _ => groups.push((x.to_vec(), vec![(z.to_vec(), w)])),
        }
    }
    let mut cells = Vec::with_capacity(groups.len());
    let mut marginal_w = Vec::with_capacity(groups.len());
    let mut fibers = Vec::with_capacity(groups.len());
    for (x, members) in groups {
        let total: f64 = members.iter().map(|(_, w)| w).sum();
        let fiber = if total > 0.0 {
            let (zs, ws): (Vec<Point>, Vec<f64>) = members.into_iter().map(|(z, w)| (z, w / total)).unzip();
            let mut f = DiscreteMeasure::with_tol(zs, ws, m.dedup_tol())?;
            f.dim = z_dim;
            Some(f)
        } else {
            None
        };
        cells.push(x);
        marginal_w.push(total);
        fibers.push(fiber);
    }
    let marginal = DiscreteMeasure::with_tol(cells.clone(), marginal_w, m.dedup_tol())?;
    Ok((marginal, ParametrizedMeasure::build(cells, fibers, false)?))
}

/// Inverse of [`disintegrate`]: `ν = ν_x ⊗ marginal`.
pub fn assemble(marginal: &DiscreteMeasure, fibers: &ParametrizedMeasure) -> Result<ProductMeasure> {
    let index: HashMap<Vec<u64>, usize> =
        fibers.cells().iter().enumerate().map(|(i, c)| (c.iter().map(|x| x.to_bits()).collect(), i)).collect();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (a, (x, m)) in marginal.atoms().enumerate() {
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let fiber = index.get(&key).and_then(|&i| fibers.fiber(i));
        match fiber {
            Some(f) => {
                for (z, q) in f.atoms() {
                    let mut p = x.to_vec();
                    p.extend_from_slice(z);
                    points.push(p);
                    weights.push(m * q);
                }
            }
            None if m == 0.0 => {}
            None => return Err(MeasureError::MissingFiber(a)),
        }
    }
    ProductMeasure::new(DiscreteMeasure::with_tol(points, weights, marginal.dedup_tol())?, marginal.dim())
}

/// Default singular cutoff: `1e-3 ×` the median weight of `mu`.
pub fn default_eps_sing(mu: &DiscreteMeasure) -> f64 {
    1e-3 * mu.median_weight()
}

/// Decomposition `l = density · mu + singular`.
#[derive(Debug, Clone, PartialEq)]
pub struct RnSplit {
    /// One vector per atom of `mu`.
    pub density: Vec<Vec<f64>>,
    pub singular: VectorDiscreteMeasure,
}

pub fn radon_nikodym(l: &VectorDiscreteMeasure, mu: &DiscreteMeasure, eps_sing: f64) -> RnSplit {
    let d = l.value_dim();
    let index: HashMap<Vec<u64>, usize> =
        mu.points().iter().enumerate().map(|(i, p)| (p.iter().map(|x| x.to_bits()).collect(), i)).collect();
    let mut density = vec![vec![0.0; d]; mu.len()];
    let mut sing_p = Vec::new();
    let mut sing_v = Vec::new();
    for (p, v) in l.atoms() {
        let key: Vec<u64> = p.iter().map(|x| x.to_bits()).collect();
        match index.get(&key) {
            Some(&i) if mu.weights()[i] > eps_sing => {
                let w = mu.weights()[i];
                density[i] = v.iter().map(|x| x / w).collect();
            }
            _ => {
                sing_p.push(p.to_vec());
                sing_v.push(v.to_vec());
            }
        }
    }
    let singular = if sing_p.is_empty() {
        VectorDiscreteMeasure::zero(d)
    } else {
        VectorDiscreteMeasure::new(sing_p, sing_v).expect("subset of a valid measure")
    };
    RnSplit { density, singular }
}

/// `∫√(1+|η/μ|²) dμ + |η^{s,μ}|(Ω)` with the default singular cutoff.
pub fn tv_pair(eta: &VectorDiscreteMeasure, mu: &DiscreteMeasure) -> f64 {
    tv_pair_with(eta, mu, default_eps_sing(mu))
}

pub fn tv_pair_with(eta: &VectorDiscreteMeasure, mu: &DiscreteMeasure, eps_sing: f64) -> f64 {
    let split = radon_nikodym(eta, mu, eps_sing);
    let ac: f64 = mu.weights().iter().zip(&split.density).map(|(w, g)| w * (1.0 + vecops::dot(g, g)).sqrt()).sum();
    ac + split.singular.total_variation()
}

/// Uniform midpoint quadrature of Lebesgue measure on `(0,1)^dim` with
/// `n` cells per axis.
pub fn lebesgue_grid(n: usize, dim: usize) -> DiscreteMeasure {
    let h = 1.0 / n as f64;
    let total = n.pow(dim as u32);
    let mut points = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; dim];
        for c in p.iter_mut().rev() {
            *c = ((rem % n) as f64 + 0.5) * h;
            rem /= n;
        }
        points.push(p);
    }
    DiscreteMeasure::new(points, vec![h.powi(dim as i32); total]).expect("grid weights are valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(points: &[&[f64]], w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::new(points.iter().map(|p| p.to_vec()).collect(), w.to_vec()).unwrap()
    }

    #[test]
    fn merges_duplicate_atoms() {
        let m = dm(&[&[1.0], &[0.0], &[1.0 + 1e-14]], &[0.25, 0.5, 0.25]);
        assert_eq!(m.len(), 2);
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn rejects_negative_weight() {
        let e = DiscreteMeasure::new(vec![vec![0.0]], vec![-1.0]).unwrap_err();
        assert!(matches!(e, MeasureError::BadWeight { .. }));
    }

    #[test]
    fn disintegrates_hand_example() {
        let pm = ProductMeasure::new(dm(&[&[0.0, 1.0], &[0.0, 2.0], &[1.0, 5.0]], &[0.2, 0.2, 0.6]), 1).unwrap();
        let (marg, fib) = disintegrate(&pm).unwrap();
        assert_eq!(marg.points(), &[vec![0.0], vec![1.0]]);
        assert!((marg.weights()[0] - 0.4).abs() < 1e-15);
        assert_eq!(fib.fiber(0).unwrap().weights(), &[0.5, 0.5]);
        assert_eq!(fib.fiber(1).unwrap().points(), &[vec![5.0]]);
    }

    #[test]
    fn disintegrate_rejects_zero_mass() {
        let pm = ProductMeasure::new(dm(&[&[0.0, 1.0]], &[0.0]), 1).unwrap();
        assert_eq!(disintegrate(&pm).unwrap_err().to_string(), "empty measure");
    }

    #[test]
    fn assemble_requires_fibers() {
        let marg = dm(&[&[0.0]], &[1.0]);
        let fib = ParametrizedMeasure::new(vec![vec![0.0]], vec![None]).unwrap();
        assert!(matches!(assemble(&marg, &fib), Err(MeasureError::MissingFiber(0))));
    }

    #[test]
    fn pushforward_merges_images() {
        let m = dm(&[&[-1.0], &[1.0]], &[0.5, 0.5]);
        let p = m.pushforward(|z| vec![z[0].abs()]);
        assert_eq!(p.points(), &[vec![1.0]]);
        assert_eq!(p.mass(), 1.0);
        let h = dm(&[&[4.0]], &[1.0]).pushforward(|z| vec![z[0] / 2.0]);
        assert_eq!(h.points(), &[vec![2.0]]);
    }

    #[test]
    fn restrict_half_grid() {
        let g = lebesgue_grid(100, 1);
        let half = g.restrict(|x| x[0] < 0.5);
        assert!((half.mass() - 0.5).abs() <= 0.01);
        assert_eq!(half.restrict(|x| x[0] < 0.5), half);
        assert_eq!(g.restrict(|_| false).mass(), 0.0);
    }

    #[test]
    fn atomic_split_filters() {
        let m = dm(&[&[0.0], &[1.0], &[2.0]], &[0.6, 0.3, 0.1]);
        let (a, d) = m.atomic_split(0.3);
        assert!((a.mass() - 0.9).abs() < 1e-15);
        assert_eq!(a.plus(&d).unwrap(), m);
    }

    #[test]
    fn radon_nikodym_cases() {
        let mu = lebesgue_grid(4, 1);
        let two = VectorDiscreteMeasure::from_density(&mu, &vec![vec![2.0]; 4]).unwrap();
        let s = radon_nikodym(&two, &mu, default_eps_sing(&mu));
        assert!(s.density.iter().all(|d| d == &vec![2.0]));
        assert!(s.singular.is_empty());

        let spike = VectorDiscreteMeasure::new(vec![vec![0.5]], vec![vec![1.0, 0.0]]).unwrap();
        let s = radon_nikodym(&spike, &mu, default_eps_sing(&mu));
        assert!(s.density.iter().all(|d| d == &vec![0.0, 0.0]));
        assert_eq!(s.singular, spike);
    }

    #[test]
    fn tv_pair_cases() {
        let mu = lebesgue_grid(64, 1);
        assert_eq!(tv_pair(&VectorDiscreteMeasure::zero(1), &mu), mu.mass());
        let spike = VectorDiscreteMeasure::new(vec![vec![0.5]], vec![vec![1.0]]).unwrap();
        assert!((tv_pair(&spike, &mu) - 2.0).abs() < 1e-12);
        let one = VectorDiscreteMeasure::from_density(&mu, &vec![vec![1.0]; 64]).unwrap();
        assert!((tv_pair(&one, &mu) - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_is_exact() {
        let m = dm(&[&[0.1, 0.7], &[1.0 / 3.0, -2.5e-7]], &[0.1 + 0.2, 1e-300]);
        let back = DiscreteMeasure::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
        let v = VectorDiscreteMeasure::new(vec![vec![0.3]], vec![vec![1.0 / 7.0, -3.0]]).unwrap();
        assert_eq!(VectorDiscreteMeasure::from_json(&v.to_json()).unwrap(), v);
    }
}
