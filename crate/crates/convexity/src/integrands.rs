//! Müller-type integrands `g_k`, `g_Λ`, index sets and the matrix catalog.

use serde::{Deserialize, Serialize};
use ymlab_core::transform::{catalog, Integrand, TransformError};

use crate::{ConvexityError, Result};

/// Largest exponent `j` for which `3^j` is formed.
pub const MAX_EXPONENT: u32 = 32;

/// `3^j`, exact in `f64` up to the guard.
pub fn pow3(j: u32) -> Result<f64> {
    if j > MAX_EXPONENT {
        return Err(ConvexityError::ExponentOverflow(j));
    }
    Ok(3u64.pow(j) as f64)
}

/// `|F11 − F22| + |F12 + F21|`, zero exactly on conformal matrices.
pub fn conformal_defect(f: &[f64]) -> f64 {
    (f[0] - f[3]).abs() + (f[1] + f[2]).abs()
}

pub fn trace(f: &[f64]) -> f64 {
    f[0] + f[3]
}

pub fn gk_value(k: f64, f: &[f64]) -> f64 {
    conformal_defect(f) + (2.0 * k - trace(f).abs()).max(0.0)
}

pub fn muller_gk(k: f64) -> Result<Integrand> {
    if !(k > 0.0 && k.is_finite()) {
        return Err(TransformError::BadParam(format!("k = {k}")).into());
    }
    Ok(Integrand::of_z(format!("muller_gk:{k}"), 1.0, 2.0 + 2.0 * k, 4, move |z| gk_value(k, z))?)
}

/// Finite subset of `{0..=N_max}` whose complement is also nonempty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSet {
    members: Vec<u32>,
    #[serde(rename = "N_max")]
    n_max: u32,
}

impl IndexSet {
    pub fn new(mut members: Vec<u32>, n_max: u32) -> Result<Self> {
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(ConvexityError::IndexSet("empty".into()));
        }
        if let Some(&top) = members.last().filter(|&&m| m > n_max) {
            return Err(ConvexityError::IndexSet(format!("member {top} above N_max = {n_max}")));
        }
        if members.len() as u64 == n_max as u64 + 1 {
            return Err(ConvexityError::IndexSet("complement empty below N_max".into()));
        }
        Ok(Self { members, n_max })
    }

    pub fn from_fn(n_max: u32, keep: impl Fn(u32) -> bool) -> Result<Self> {
        Self::new((0..=n_max).filter(|&j| keep(j)).collect(), n_max)
    }

    pub fn evens(n_max: u32) -> Result<Self> {
        Self::from_fn(n_max, |j| j % 2 == 0)
    }

    pub fn members(&self) -> &[u32] {
        &self.members
    }

    pub fn n_max(&self) -> u32 {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, j: u32) -> bool {
        self.members.binary_search(&j).is_ok()
    }

    pub fn complement(&self) -> Vec<u32> {
        (0..=self.n_max).filter(|&j| !self.contains(j)).collect()
    }

    pub fn symmetric_difference(&self, other: &IndexSet) -> Vec<u32> {
        let top = self.n_max.max(other.n_max);
        (0..=top).filter(|&j| self.contains(j) != other.contains(j)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let raw: IndexSet = serde_json::from_str(s)?;
        Self::new(raw.members, raw.n_max)
    }
}

/// `|F11−F22| + |F12+F21| + min_{i∈Λ} |tr F − 2·3^i|`.
pub fn g_lambda(set: &IndexSet) -> Result<Integrand> {
    let targets = set.members.iter().map(|&i| pow3(i).map(|p| 2.0 * p)).collect::<Result<Vec<_>>>()?;
    let label = format!("glambda:{}", set.members.iter().map(u32::to_string).collect::<Vec<_>>().join(","));
    let growth_c = 4.0 + targets[0];
    Ok(Integrand::of_z(label, 1.0, growth_c, 4, move |z| g_lambda_value(&targets, z))?)
}

/// `g_Λ` with `targets = 2·3^i` sorted ascending.
pub fn g_lambda_value(targets: &[f64], f: &[f64]) -> f64 {
    let t = trace(f);
    let pos = targets.partition_point(|&v| v < t);
    let nearest = [pos.checked_sub(1), Some(pos)]
        .into_iter()
        .flatten()
        .filter_map(|i| targets.get(i))
        .map(|&v| (t - v).abs())
        .fold(f64::INFINITY, f64::min);
    conformal_defect(f) + nearest
}

/// `g` applied to the leading 2×2 block of a row-major `m×n` matrix.
pub fn leading_block(m: usize, n: usize, inner: Integrand) -> Result<Integrand> {
    if m < 2 || n < 2 {
        return Err(TransformError::BadParam(format!("{m}x{n} has no 2x2 block")).into());
    }
    if inner.target_dim() != 4 {
        return Err(ConvexityError::NotMatrix(inner.target_dim()));
    }
    let label = format!("proj:{m}x{n}:{}", inner.label());
    let (p, c) = (inner.p(), inner.growth_c());
    Ok(Integrand::new(label, p, c, m * n, move |x, z| inner.eval(x, &[z[0], z[1], z[n], z[n + 1]]))?)
}

/// Core catalog extended with `muller_gk:<k>`, `glambda:<i,j,..>` and
/// `proj:<m>x<n>:<inner>`.
pub fn lookup(id: &str, d: usize) -> Result<Integrand> {
    let bad = || TransformError::UnknownId(id.to_string());
    let need_matrix = |f: Integrand| {
        if d == 4 {
            Ok(f)
        } else {
            Err(ConvexityError::NotMatrix(d))
        }
    };
    if let Some(k) = id.strip_prefix("muller_gk:") {
        return need_matrix(muller_gk(k.parse().map_err(|_| bad())?)?);
    }
    if let Some(list) = id.strip_prefix("glambda:") {
        let members = list
            .split(',')
            .map(|s| s.trim().parse::<u32>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        return need_matrix(g_lambda(&IndexSet::new(members, MAX_EXPONENT)?)?);
    }
    if let Some(rest) = id.strip_prefix("proj:") {
        let (shape, inner) = rest.split_once(':').ok_or_else(bad)?;
        let (m, n) = shape.split_once('x').ok_or_else(bad)?;
        let (m, n): (usize, usize) = (m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?);
        if m * n != d {
            return Err(ConvexityError::NotMatrix(d));
        }
        return leading_block(m, n, lookup(inner, 4)?);
    }
    Ok(catalog::lookup(id, d)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    const X: [f64; 2] = [0.5, 0.5];

    #[test]
    fn gk_closed_form_examples() {
        let g1 = muller_gk(1.0).unwrap();
        let g5 = muller_gk(5.0).unwrap();
        assert_eq!(g5.eval(&X, &[0.0; 4]), 10.0);
        assert_eq!(g5.eval(&X, &[5.0, 0.0, 0.0, 5.0]), 0.0);
        assert_eq!(g1.eval(&X, &[3.0, 0.0, 0.0, 1.0]), 2.0);
    }

    #[test]
    fn g_lambda_closed_form_examples() {
        let one = g_lambda(&IndexSet::new(vec![1], 8).unwrap()).unwrap();
        let two = g_lambda(&IndexSet::new(vec![1, 2], 8).unwrap()).unwrap();
        assert_eq!(one.eval(&X, &[3.0, 0.0, 0.0, 3.0]), 0.0);
        assert_eq!(one.eval(&X, &[9.0, 0.0, 0.0, 9.0]), 12.0);
        assert_eq!(two.eval(&X, &[9.0, 0.0, 0.0, 9.0]), 0.0);
    }

    #[test]
    fn g_lambda_vanishes_exactly_on_members() {
        let set = IndexSet::new(vec![0, 3, 7, 20, 32], 32).unwrap();
        let g = g_lambda(&set).unwrap();
        for j in 0..=32 {
            let s = pow3(j).unwrap();
            let v = g.eval(&X, &[s, 0.0, 0.0, s]);
            assert_eq!(v == 0.0, set.contains(j), "j = {j}");
        }
    }

    #[test]
    fn overflow_guard() {
        assert!(matches!(pow3(33), Err(ConvexityError::ExponentOverflow(33))));
        assert_eq!(pow3(32).unwrap(), 1_853_020_188_851_841.0);
        let big = IndexSet::new(vec![40], 64).unwrap();
        assert!(g_lambda(&big).is_err());
    }

    #[test]
    fn index_set_validation_and_json() {
        assert!(IndexSet::new(vec![], 4).is_err());
        assert!(IndexSet::new(vec![0, 1, 2, 3, 4], 4).is_err());
        assert!(IndexSet::new(vec![5], 4).is_err());
        let s = IndexSet::new(vec![4, 1, 1], 6).unwrap();
        assert_eq!(s.members(), &[1, 4]);
        assert_eq!(s.complement(), vec![0, 2, 3, 5, 6]);
        let json = s.to_json().unwrap();
        assert!(json.contains("\"N_max\":6"));
        assert_eq!(IndexSet::from_json(&json).unwrap(), s);
        assert!(IndexSet::from_json(r#"{"members":[0,1],"N_max":1}"#).is_err());
    }

    #[test]
    fn catalog_resolves_matrix_ids() {
        let g = lookup("muller_gk:2", 4).unwrap();
        assert_eq!(g.eval(&X, &[0.0; 4]), 4.0);
        let gl = lookup("glambda:1,2", 4).unwrap();
        assert_eq!(gl.eval(&X, &[9.0, 0.0, 0.0, 9.0]), 0.0);
        let p = lookup("proj:2x3:muller_gk:1", 6).unwrap();
        assert_eq!(p.eval(&X, &[3.0, 0.0, 7.0, 0.0, 1.0, 7.0]), 2.0);
        assert_eq!(lookup("abs", 4).unwrap().eval(&X, &[3.0, 0.0, 0.0, 4.0]), 5.0);
        assert!(lookup("muller_gk:1", 3).is_err());
        assert!(lookup("proj:2x3:abs", 4).is_err());
        assert!(lookup("nope", 4).is_err());
    }
}
