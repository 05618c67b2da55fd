//! p-growth integrands, the ball transform `T` and its inverse, recession
//! estimates, the perspective function and sampled Lipschitz norms.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::compactification::{BoundaryAtom, CompactPoint, CompactificationSpec};
use crate::vecops;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("ball point has norm {0} >= 1")]
    Domain(f64),
    #[error("integrand '{label}' violates its growth bound at |z| = {magnitude} (ratio {ratio})")]
    GrowthViolation { label: String, magnitude: f64, ratio: f64 },
    #[error("no recession")]
    NoRecession,
    #[error("magnitudes must increase and span at least 4 decades")]
    ShortMagnitudes,
    #[error("unknown integrand id '{0}'")]
    UnknownId(String),
    #[error("invalid parameter: {0}")]
    BadParam(String),
}

pub type Result<T> = std::result::Result<T, TransformError>;

pub type EvalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// Number of random samples used to certify the growth bound.
pub const GROWTH_SAMPLES: usize = 10_000;

/// A continuous `Φ(x, z)` with `|Φ(x,z)| ≤ C (1+|z|)^p`.
#[derive(Clone)]
pub struct Integrand {
    label: String,
    p: f64,
    growth_c: f64,
    target_dim: usize,
    eval: EvalFn,
}

impl fmt::Debug for Integrand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Integrand")
            .field("label", &self.label)
            .field("p", &self.p)
            .field("growth_c", &self.growth_c)
            .field("target_dim", &self.target_dim)
            .finish()
    }
}

impl Integrand {
    /// Builds an integrand and certifies its growth bound on random samples.
    pub fn new(
        label: impl Into<String>,
        p: f64,
        growth_c: f64,
        target_dim: usize,
        eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        if !(p >= 1.0) || !(growth_c >= 0.0) || target_dim == 0 {
            return Err(TransformError::BadParam(format!("p = {p}, C = {growth_c}, d = {target_dim}")));
        }
        let f = Self { label: label.into(), p, growth_c, target_dim, eval: Arc::new(eval) };
        f.certify_growth(GROWTH_SAMPLES, 0x6f72_6f77)?;
        Ok(f)
    }

    /// `z`-only integrand.
    pub fn of_z(
        label: impl Into<String>,
        p: f64,
        growth_c: f64,
        target_dim: usize,
        eval: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> Result<Self> {
        Self::new(label, p, growth_c, target_dim, move |_, z| eval(z))
    }

    fn certify_growth(&self, samples: usize, seed: u64) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for i in 0..samples {
            let x = [rng.gen::<f64>(), rng.gen::<f64>()];
            let magnitude = if i == 0 { 0.0 } else { 10f64.powf(rng.gen_range(-3.0..8.0)) };
            let z = vecops::scale(&random_unit(&mut rng, self.target_dim), magnitude);
            let bound = self.growth_c * (1.0 + magnitude).powf(self.p);
            let value = self.eval(&x, &z);
            if !value.is_finite() || value.abs() > bound * (1.0 + 1e-9) + 1e-12 {
                return Err(TransformError::GrowthViolation {
                    label: self.label.clone(),
                    magnitude,
                    ratio: value.abs() / bound,
                });
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn growth_c(&self) -> f64 {
        self.growth_c
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn eval(&self, x: &[f64], z: &[f64]) -> f64 {
        (self.eval)(x, z)
    }

    /// `Φ(x,z) / (1+|z|)^p`, the transform evaluated at the image of `z`.
    pub fn weighted(&self, x: &[f64], z: &[f64]) -> f64 {
        self.eval(x, z) / (1.0 + vecops::norm(z)).powf(self.p)
    }

    /// `(TΦ)(x, ẑ)` for `|ẑ| < 1`.
    pub fn ball_eval(&self, x: &[f64], zh: &[f64]) -> Result<f64> {
        let z = from_ball_point(zh)?;
        Ok(self.weighted(x, &z))
    }

    /// `Φ(x, R·z) / R^p` at a large radius; the recession value for
    /// integrands with regular recession.
    pub fn recession_value(&self, x: &[f64], z: &[f64]) -> f64 {
        const R: f64 = 1e8;
        self.eval(x, &vecops::scale(z, R)) / R.powf(self.p)
    }

    /// `α f + β g` with the combined growth constant.
    pub fn combine(alpha: f64, f: &Integrand, beta: f64, g: &Integrand) -> Result<Integrand> {
        if f.p != g.p || f.target_dim != g.target_dim {
            return Err(TransformError::BadParam("incompatible integrands".into()));
        }
        let (f2, g2) = (f.clone(), g.clone());
        Integrand::new(
            format!("{alpha}*{}+{beta}*{}", f.label, g.label),
            f.p,
            alpha.abs() * f.growth_c + beta.abs() * g.growth_c,
            f.target_dim,
            move |x, z| alpha * f2.eval(x, z) + beta * g2.eval(x, z),
        )
    }
}

pub(crate) fn random_unit(rng: &mut impl Rng, d: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = vecops::norm(&v);
        if n > 1e-3 && n <= 1.0 {
            return vecops::scale(&v, 1.0 / n);
        }
    }
}

/// `ẑ = z / (1+|z|)`.
pub fn to_ball_point(z: &[f64]) -> Vec<f64> {
    vecops::scale(z, 1.0 / (1.0 + vecops::norm(z)))
}

/// `z = ẑ / (1-|ẑ|)` for `|ẑ| < 1`.
pub fn from_ball_point(zh: &[f64]) -> Result<Vec<f64>> {
    let r = vecops::norm(zh);
    if !(r < 1.0) {
        return Err(TransformError::Domain(r));
    }
    Ok(vecops::scale(zh, 1.0 / (1.0 - r)))
}

pub type BallEvalFn = Arc<dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync>;

/// A bounded continuous function on `Ω × B^d`.
#[derive(Clone)]
pub struct BallFunction {
    eval: BallEvalFn,
    bound: f64,
    target_dim: usize,
}

impl fmt::Debug for BallFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BallFunction").field("bound", &self.bound).finish()
    }
}

impl BallFunction {
    pub fn new(bound: f64, target_dim: usize, eval: impl Fn(&[f64], &[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self { eval: Arc::new(eval), bound, target_dim }
    }

    pub fn eval(&self, x: &[f64], zh: &[f64]) -> Result<f64> {
        let r = vecops::norm(zh);
        if !(r < 1.0) {
            return Err(TransformError::Domain(r));
        }
        Ok((self.eval)(x, zh))
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// `(Tf)(x,ẑ) = (1-|ẑ|)^p f(x, ẑ/(1-|ẑ|))`.
///
/// The weight is computed as `(1+|z|)^{-p}` at the preimage point, so the
/// sup of `|Tf|` over ball samples is the `G_p` norm over their preimages.
pub fn to_ball(f: &Integrand) -> BallFunction {
    let g = f.clone();
    BallFunction::new(f.growth_c, f.target_dim, move |x, zh| {
        let z = vecops::scale(zh, 1.0 / (1.0 - vecops::norm(zh)));
        g.weighted(x, &z)
    })
}

/// `(T⁻¹g)(x,z) = (1+|z|)^p g(x, z/(1+|z|))`.
pub fn from_ball(g: &BallFunction, p: f64, label: impl Into<String>) -> Result<Integrand> {
    let h = g.clone();
    Integrand::new(label, p, g.bound, g.target_dim, move |x, z| {
        let r = vecops::norm(z);
        (1.0 + r).powf(p) * (h.eval)(x, &vecops::scale(z, 1.0 / (1.0 + r)))
    })
}

/// `G_p` norm of `f` over the given sample points.
pub fn gp_norm_sampled(f: &Integrand, samples: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    samples.iter().map(|(x, z)| f.weighted(x, z).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecessionParams {
    pub magnitudes: Vec<f64>,
    pub tol_rec: f64,
}

impl Default for RecessionParams {
    fn default() -> Self {
        Self { magnitudes: log_spaced(1.0, 6.0, 8), tol_rec: 1e-3 }
    }
}

/// `10^lo .. 10^hi` with `per_decade` points per decade.
pub fn log_spaced(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi - lo) * per_decade as f64).round() as usize;
    (0..=n).map(|i| 10f64.powf(lo + i as f64 / per_decade as f64)).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecessionEntry {
    pub direction: Vec<f64>,
    pub liminf_est: f64,
    pub limsup_est: f64,
    pub regular: bool,
    /// `f^∞(direction)` when the direction is regular.
    pub f_inf: Option<f64>,
}

/// Tracks `Tf` along rays `t·e` and judges regularity over the last two
/// decades of `magnitudes`.
pub fn recession_profile(
    f: &Integrand,
    x: &[f64],
    directions: &[Vec<f64>],
    params: &RecessionParams,
) -> Result<Vec<RecessionEntry>> {
    let mags = &params.magnitudes;
    let increasing = mags.windows(2).all(|w| w[0] < w[1]);
    if mags.len() < 2 || !increasing || mags[mags.len() - 1] / mags[0] < 1e4 * (1.0 - 1e-12) {
        return Err(TransformError::ShortMagnitudes);
    }
    let top = mags[mags.len() - 1];
    directions
        .iter()
        .map(|e| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for &t in mags {
                let value = f.weighted(x, &vecops::scale(e, t));
                if value.abs() > f.growth_c * (1.0 + 1e-9) + 1e-12 {
                    return Err(TransformError::GrowthViolation {
                        label: f.label.clone(),
                        magnitude: t,
                        ratio: value.abs() / f.growth_c,
                    });
                }
                if t >= top / 100.0 * (1.0 - 1e-12) {
                    lo = lo.min(value);
                    hi = hi.max(value);
                }
            }
            let scale = 1f64.max(lo.abs()).max(hi.abs());
            let regular = hi - lo < params.tol_rec * scale;
            // f(te)/t^p = f^∞ + c/t + o(1/t); one Richardson step removes c/t.
            let g = |t: f64| f.eval(x, &vecops::scale(e, t)) / t.powf(f.p);
            let unit = f.eval(x, e);
            let homogeneous = mags.iter().all(|&t| (g(t) - unit).abs() <= 1e-12 * unit.abs().max(1.0));
            let f_inf = match (regular, homogeneous) {
                (true, true) => Some(unit),
                (true, false) => Some((10.0 * g(top) - g(top / 10.0)) / 9.0),
                (false, _) => None,
            };
            Ok(RecessionEntry { direction: e.clone(), liminf_est: lo, limsup_est: hi, regular, f_inf })
        })
        .collect()
}

/// Deterministic direction net: both signs in `d = 1`, equally spaced angles
/// in `d = 2`, seeded random unit vectors otherwise.
pub fn direction_net(d: usize, count: usize) -> Vec<Vec<f64>> {
    match d {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => (0..count)
            .map(|k| {
                let a = 2.0 * std::f64::consts::PI * k as f64 / count as f64;
                vec![a.cos(), a.sin()]
            })
            .collect(),
        _ => {
            let mut rng = ChaCha8Rng::seed_from_u64(0x6469_7273);
            (0..count).map(|_| random_unit(&mut rng, d)).collect()
        }
    }
}

/// Default net size: 64 directions up to `d = 2`, 256 for matrices.
pub fn default_direction_count(d: usize) -> usize {
    if d <= 2 {
        64
    } else {
        256
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UpperRecessionParams {
    pub trials: usize,
    pub tol_equiv: f64,
    pub seed: u64,
}

impl Default for UpperRecessionParams {
    fn default() -> Self {
        Self { trials: 32, tol_equiv: 1e-2, seed: 7 }
    }
}

/// Heuristic lower bound for the upper recession `f^♯` at a boundary atom.
///
/// Around every witness point, random log-magnitude and angular
/// perturbations are kept when they stay within `tol_equiv` of the atom in
/// the compactification metric; the result is the largest `Tf` seen. It is
/// never below the plain tail maximum along the stored witness.
pub fn upper_recession(
    f: &Integrand,
    x: &[f64],
    atom: &BoundaryAtom,
    spec: &CompactificationSpec,
    params: &UpperRecessionParams,
) -> f64 {
    let witness = atom.witness();
    let tail = &witness[witness.len() / 2..];
    let anchor = atom.boundary_point();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ atom.id() as u64);
    let mut best = tail.iter().map(|z| f.weighted(x, z)).fold(f64::NEG_INFINITY, f64::max);
    let d = spec.target_dim();
    for z in tail {
        let r = vecops::norm(z);
        let e = vecops::scale(z, 1.0 / r);
        for _ in 0..params.trials {
            let radius = r * rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI).exp();
            let jitter = vecops::scale(&random_unit(&mut rng, d), rng.gen_range(0.0..params.tol_equiv / 4.0));
            let dir = match vecops::normalized(&vecops::add(&e, &jitter)) {
                Some(v) => v,
                None => continue,
            };
            let w = vecops::scale(&dir, radius);
            let candidate = CompactPoint::from_raw(&w, spec);
            if spec.metric(&candidate, &anchor) <= params.tol_equiv {
                best = best.max(f.weighted(x, &w));
            }
        }
    }
    best
}

/// `f̃(x,z,t) = f(x,z/t)|t|` for `t ≠ 0` and `f^∞(x,z)` at `t = 0`.
#[derive(Debug, Clone)]
pub struct Perspective {
    f: Integrand,
}

impl Perspective {
    pub fn eval(&self, x: &[f64], z: &[f64], t: f64) -> f64 {
        if t == 0.0 {
            self.f.recession_value(x, z)
        } else {
            self.f.eval(x, &vecops::scale(z, 1.0 / t)) * t.abs()
        }
    }
}

/// Perspective of a linear-growth integrand with regular recession.
pub fn perspective(f: &Integrand) -> Result<Perspective> {
    if f.p != 1.0 {
        return Err(TransformError::BadParam("perspective needs p = 1".into()));
    }
    let dirs = direction_net(f.target_dim, default_direction_count(f.target_dim));
    for x in [[0.25, 0.25], [0.5, 0.5], [0.75, 0.75]] {
        let profile = recession_profile(f, &x, &dirs, &RecessionParams::default())?;
        if profile.iter().any(|e| !e.regular) {
            return Err(TransformError::NoRecession);
        }
    }
    Ok(Perspective { f: f.clone() })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipNorms {
    /// `sup |Tf|` over the sampled points.
    pub sup_t: f64,
    /// Lipschitz constant of `Tf` in ball coordinates.
    pub lip_t: f64,
    /// Lipschitz constant of `f` itself.
    pub lip_f: f64,
    /// `sup |f|/(1+|z|) + Lip(f)`.
    pub weighted_lip: f64,
}

/// Sampled norms over point pairs given in target space.
pub fn lipschitz_norms(f: &Integrand, x: &[f64], pairs: &[(Vec<f64>, Vec<f64>)]) -> LipNorms {
    let mut sup_t: f64 = 0.0;
    let mut lip_t: f64 = 0.0;
    let mut lip_f: f64 = 0.0;
    for (z, w) in pairs {
        let (fz, fw) = (f.eval(x, z), f.eval(x, w));
        let (tz, tw) = (f.weighted(x, z), f.weighted(x, w));
        sup_t = sup_t.max(tz.abs()).max(tw.abs());
        let dz = vecops::dist(z, w);
        if dz > 0.0 {
            lip_f = lip_f.max((fz - fw).abs() / dz);
            let dh = vecops::dist(&to_ball_point(z), &to_ball_point(w));
            if dh > 0.0 {
                lip_t = lip_t.max((tz - tw).abs() / dh);
            }
        }
    }
    LipNorms { sup_t, lip_t, lip_f, weighted_lip: sup_t + lip_f }
}

/// Built-in integrands addressable by id.
pub mod catalog {
    use super::*;

    /// `abs`, `area`, `logsin`, `one`, `l1`, `linf`, `affine:c;a1,a2,...`.
    pub fn lookup(id: &str, d: usize) -> Result<Integrand> {
        match id {
            "abs" => abs(d),
            "area" => area(d),
            "logsin" => logsin(d),
            "one" => Integrand::of_z("one", 1.0, 1.0, d, |_| 1.0),
            "l1" => Integrand::of_z("l1", 1.0, (d as f64).sqrt(), d, |z| z.iter().map(|v| v.abs()).sum()),
            "linf" => Integrand::of_z("linf", 1.0, 1.0, d, |z| z.iter().fold(0.0, |m, v| m.max(v.abs()))),
            _ => match id.strip_prefix("affine:") {
                Some(rest) => affine_from_str(rest, d),
                None => Err(TransformError::UnknownId(id.into())),
            },
        }
    }

    pub fn abs(d: usize) -> Result<Integrand> {
        Integrand::of_z("abs", 1.0, 1.0, d, vecops::norm)
    }

    pub fn area(d: usize) -> Result<Integrand> {
        Integrand::of_z("area", 1.0, 1.0, d, |z| (1.0 + vecops::dot(z, z)).sqrt())
    }

    /// `|z|(1 + sin(ln(1+|z|)))`: linear growth without a recession limit.
    pub fn logsin(d: usize) -> Result<Integrand> {
        Integrand::of_z("logsin", 1.0, 2.0, d, |z| {
            let r = vecops::norm(z);
            r * (1.0 + r.ln_1p().sin())
        })
    }

    /// `c + a·z`.
    pub fn affine(c: f64, a: Vec<f64>) -> Result<Integrand> {
        let d = a.len();
        let bound = c.abs().max(vecops::norm(&a));
        let label = format!("affine:{c};{}", a.iter().map(f64::to_string).collect::<Vec<_>>().join(","));
        Integrand::of_z(label, 1.0, bound, d, move |z| c + vecops::dot(&a, z))
    }

    fn affine_from_str(rest: &str, d: usize) -> Result<Integrand> {
        let bad = || TransformError::BadParam(format!("affine spec '{rest}'"));
        let (c, a) = rest.split_once(';').ok_or_else(bad)?;
        let c: f64 = c.trim().parse().map_err(|_| bad())?;
        let a: Vec<f64> =
            a.split(',').map(|s| s.trim().parse::<f64>()).collect::<std::result::Result<_, _>>().map_err(|_| bad())?;
        if a.len() != d {
            return Err(bad());
        }
        affine(c, a)
    }
}
