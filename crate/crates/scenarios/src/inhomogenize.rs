//! Explicit gradient fields generating prescribed singular or absolutely
//! continuous targets on `(0,1)`, with term-by-term error budgets.
//!
//! Test integrands are `Φ(z) = (1+|z|)Ψ(ẑ)` for the target tests `Ψ` of the
//! standard sphere battery, so `sup|Ψ| ≤ 1`, `Lip Φ ≤ 1` and
//! `|Φ(Ve) − VΦ^∞(e)| ≤ 1`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use ymlab_core::compactification::{CompactPoint, CompactificationSpec};
use ymlab_core::young::{Battery, SpatialTest};

use crate::config::ScenarioConfig;
use crate::quadrature::{gauss5_rule, Bump};
use crate::report::{Report, Table};
use crate::{Result, ScenarioError};

const LIP_PHI: f64 = 1.0;

/// Sphere battery on `(0,1)` with scalar targets.
struct Tests {
    battery: Battery,
    spec: CompactificationSpec,
}

impl Tests {
    fn new() -> Self {
        let spec = CompactificationSpec::sphere(1);
        Self { battery: Battery::standard(1, &spec), spec }
    }

    fn phi(&self, z: f64) -> Vec<f64> {
        let p = CompactPoint::from_raw(&[z], &self.spec);
        self.battery.target.iter().map(|t| (1.0 + z.abs()) * t.eval(&p)).collect()
    }

    fn phi_inf(&self, e: f64) -> Vec<f64> {
        let p = CompactPoint::boundary(vec![e.signum()], Vec::new());
        self.battery.target.iter().map(|t| t.eval(&p)).collect()
    }

    fn eta(&self, x: f64) -> Vec<f64> {
        self.battery.spatial.iter().map(|s| s.eval(&[x])).collect()
    }

    fn kinks(&self) -> Vec<f64> {
        self.battery
            .spatial
            .iter()
            .flat_map(|s| match s {
                SpatialTest::Const(_) => Vec::new(),
                SpatialTest::Tent { center, radius } => vec![center[0] - radius, center[0], center[0] + radius],
            })
            .collect()
    }

    fn zeros(&self) -> Vec<Vec<f64>> {
        vec![vec![0.0; self.battery.target.len()]; self.battery.spatial.len()]
    }

    /// `[i][k] ↦ ∫₀¹ η_i(x) g(x)_k dx`, exact up to quadrature on each
    /// interval between `breaks` and the test kinks, subdivided to `h_max`.
    fn integrate(&self, breaks: &[f64], h_max: f64, g: impl Fn(f64) -> Vec<f64> + Sync) -> Vec<Vec<f64>> {
        let mut nodes: Vec<f64> =
            breaks.iter().chain(&self.kinks()).copied().filter(|x| (0.0..=1.0).contains(x)).collect();
        nodes.extend([0.0, 1.0]);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
        let intervals: Vec<(f64, f64)> = nodes
            .windows(2)
            .flat_map(|w| {
                let pieces = ((w[1] - w[0]) / h_max).ceil().max(1.0) as usize;
                let h = (w[1] - w[0]) / pieces as f64;
                (0..pieces).map(move |k| (w[0] + k as f64 * h, w[0] + (k + 1) as f64 * h))
            })
            .collect();
        intervals
            .par_iter()
            .fold(
                || self.zeros(),
                |mut acc, &(a, b)| {
                    for (x, w) in gauss5_rule(a, b) {
                        let (eta, vals) = (self.eta(x), g(x));
                        for (row, e) in acc.iter_mut().zip(&eta) {
                            if *e != 0.0 {
                                for (o, v) in row.iter_mut().zip(&vals) {
                                    *o += w * e * v;
                                }
                            }
                        }
                    }
                    acc
                },
            )
            .reduce(
                || self.zeros(),
                |mut a, b| {
                    for (ra, rb) in a.iter_mut().zip(b) {
                        for (x, y) in ra.iter_mut().zip(rb) {
                            *x += y;
                        }
                    }
                    a
                },
            )
    }
}

fn max_gap(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Budget {
    pub terms: Vec<(String, f64)>,
    pub total: f64,
}

impl Budget {
    fn new(terms: Vec<(&str, f64)>) -> Self {
        let terms: Vec<(&str, f64)> = terms.into_iter().map(|(n, v)| (n, v + 0.0)).collect();
        let total = terms.iter().map(|t| t.1).sum();
        Self { terms: terms.into_iter().map(|(n, v)| (n.to_string(), v)).collect(), total }
    }

    pub fn term(&self, name: &str) -> Option<f64> {
        self.terms.iter().find(|t| t.0 == name).map(|t| t.1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub level: u32,
    pub budget: Budget,
    /// Largest battery pairing difference between field and target.
    pub measured: f64,
}

/// `(direction ±1, weight)`.
pub type AngleWeights = Vec<(f64, f64)>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SingularAtom {
    pub x: f64,
    pub mass: f64,
    pub angle: AngleWeights,
}

fn angle_mean(angle: &AngleWeights) -> f64 {
    angle.iter().map(|(e, q)| e * q).sum()
}

fn validate_angle(angle: &AngleWeights) -> Result<()> {
    let mass: f64 = angle.iter().map(|a| a.1).sum();
    if (mass - 1.0).abs() > 1e-9 || angle.iter().any(|a| a.1 < 0.0 || a.0.abs() != 1.0) {
        return Err(ScenarioError::Invalid(format!("angle weights {angle:?} are not a probability on ±1")));
    }
    Ok(())
}

/// Spike layout of one cube: `(start, end, value)` segments of the
/// nonzero part, centred in `[lo, lo + side)`.
fn spikes(lo: f64, side: f64, fractions: &[(f64, f64)]) -> Vec<(f64, f64, f64)> {
    let total: f64 = fractions.iter().map(|f| f.0).sum();
    let mut at = lo + 0.5 * side * (1.0 - total);
    fractions
        .iter()
        .map(|&(h, v)| {
            let seg = (at, at + h * side, v);
            at += h * side;
            seg
        })
        .collect()
}

/// Field `φ_t * (ν̄ λ^s) + Σ_Q Dφ^Q` with `t = 2^{-a}` and cubes of side
/// `2^{-(a+b)}`; each `Dφ^Q` cancels the cube mean and adds spikes of
/// height `V = side^{-2}` carrying the angle weights.
#[derive(Debug, Clone)]
pub struct SingularConstruction {
    atoms: Vec<SingularAtom>,
    t: f64,
    side: f64,
    /// Per atom: `(first cube index, r_Q per cube)`.
    cubes: Vec<(i64, Vec<f64>)>,
    height: f64,
}

impl SingularConstruction {
    pub fn new(atoms: Vec<SingularAtom>, a: u32, b: u32) -> Result<Self> {
        let t = 0.5f64.powi(a as i32);
        let side = 0.5f64.powi((a + b) as i32);
        for atom in &atoms {
            validate_angle(&atom.angle)?;
            if !(atom.mass >= 0.0 && atom.mass.is_finite()) {
                return Err(ScenarioError::Invalid(format!("mass {}", atom.mass)));
            }
        }
        let delta = atoms.iter().map(|p| p.x.min(1.0 - p.x)).fold(f64::INFINITY, f64::min);
        if delta <= 2.0 * t {
            return Err(ScenarioError::IncreaseA { a, delta });
        }
        let mut xs: Vec<f64> = atoms.iter().map(|p| p.x).collect();
        xs.sort_by(f64::total_cmp);
        if xs.windows(2).any(|w| w[1] - w[0] <= 2.0 * (t + side)) {
            return Err(ScenarioError::Invalid(format!("atoms closer than 2t = {}; increase a", 2.0 * t)));
        }
        let bump = Bump::get();
        let cubes = atoms
            .iter()
            .map(|p| {
                let first = ((p.x - t) / side).floor() as i64;
                let last = ((p.x + t) / side).ceil() as i64;
                let r = (first..last)
                    .map(|k| {
                        let lo = k as f64 * side;
                        p.mass * bump.window(t, p.x, lo, lo + side) / side
                    })
                    .collect();
                (first, r)
            })
            .collect();
        Ok(Self { atoms, t, side, cubes, height: side.powi(-2) })
    }

    fn cube_spikes(&self, atom: usize, r: f64, lo: f64) -> Vec<(f64, f64, f64)> {
        let fractions: Vec<(f64, f64)> =
            self.atoms[atom].angle.iter().map(|&(e, q)| (r * q / self.height, e * self.height)).collect();
        spikes(lo, self.side, &fractions)
    }

    pub fn field(&self, x: f64) -> f64 {
        let bump = Bump::get();
        for (i, (p, (first, rs))) in self.atoms.iter().zip(&self.cubes).enumerate() {
            let k = (x / self.side).floor() as i64 - first;
            let Some(&r) = usize::try_from(k).ok().and_then(|k| rs.get(k)) else { continue };
            if r <= 0.0 {
                continue;
            }
            let bar = angle_mean(&p.angle);
            let lo = (first + k) as f64 * self.side;
            let spike: f64 = self.cube_spikes(i, r, lo).iter().filter(|s| (s.0..s.1).contains(&x)).map(|s| s.2).sum();
            return (p.mass * bump.scaled(self.t, x - p.x) - r) * bar + spike;
        }
        0.0
    }

    fn breaks(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, (first, rs)) in self.cubes.iter().enumerate() {
            for (k, &r) in rs.iter().enumerate() {
                let lo = (first + k as i64) as f64 * self.side;
                out.push(lo);
                if r > 0.0 {
                    out.extend(self.cube_spikes(i, r, lo).iter().flat_map(|s| [s.0, s.1]));
                }
            }
            out.push((first + rs.len() as i64) as f64 * self.side);
        }
        out
    }

    fn covered(&self) -> (f64, f64) {
        let cubes = self.cubes.iter().map(|(_, rs)| rs.iter().filter(|&&r| r > 0.0).count()).sum::<usize>();
        let h: f64 = self.cubes.iter().flat_map(|(_, rs)| rs).map(|r| r / self.height * self.side).sum();
        (cubes as f64 * self.side, h)
    }

    pub fn budget(&self, b: u32) -> Budget {
        let lambda: f64 = self.atoms.iter().map(|p| p.mass).sum();
        let (cover, weighted_h) = self.covered();
        let near_boundary: f64 = self.atoms.iter().filter(|p| p.x.min(1.0 - p.x) < 2.0 * self.t).map(|p| p.mass).sum();
        let m = Bump::get().max_slope();
        Budget::new(vec![
            ("E1", 0.0),
            ("E2", near_boundary),
            ("E3", self.t * lambda),
            ("E4", 2.0 * weighted_h),
            ("E5", self.side * (2.0 * cover + lambda)),
            ("E6", 0.0),
            ("E7", LIP_PHI * 2.0 * m * 0.5f64.powi(b as i32) * lambda),
            ("E_mollify", self.t * lambda),
        ])
    }

    /// Battery discrepancy against `(δ₀, λ^s, ν^∞)`.
    fn measured(&self, tests: &Tests) -> f64 {
        let h_max = (self.t / 8.0).min(1.0 / 64.0);
        let zero = tests.phi(0.0);
        let rhs = tests.integrate(&self.breaks(), h_max, |x| tests.phi(self.field(x)));
        let mut lhs = tests.integrate(&[], h_max, |_| zero.clone());
        for p in &self.atoms {
            let eta = tests.eta(p.x);
            let mut inf = vec![0.0; zero.len()];
            for &(e, q) in &p.angle {
                for (o, v) in inf.iter_mut().zip(tests.phi_inf(e)) {
                    *o += q * v;
                }
            }
            for (row, e) in lhs.iter_mut().zip(&eta) {
                for (o, v) in row.iter_mut().zip(&inf) {
                    *o += p.mass * e * v;
                }
            }
        }
        max_gap(&rhs, &lhs)
    }
}

pub fn inhomogenize_singular(atoms: &[SingularAtom], a: u32, b: u32) -> Result<Outcome> {
    let c = SingularConstruction::new(atoms.to_vec(), a, b)?;
    Ok(Outcome { level: a, budget: c.budget(b), measured: c.measured(&Tests::new()) })
}

/// Constant target on `[start, end)`: fiber atoms `(value, weight)`,
/// concentration density `lambda` and its angle weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcPiece {
    pub start: f64,
    pub end: f64,
    pub fiber: Vec<(f64, f64)>,
    pub lambda: f64,
    pub angle: AngleWeights,
}

impl AcPiece {
    fn mean(&self) -> f64 {
        self.fiber.iter().map(|(a, p)| a * p).sum()
    }

    /// `⟨ν, id⟩ + λ⟨ν^∞, id⟩`.
    fn barycentre(&self) -> f64 {
        self.mean() + self.lambda * angle_mean(&self.angle)
    }

    /// `⟨ν, |·|⟩ + λ`.
    fn magnitude(&self) -> f64 {
        self.fiber.iter().map(|(a, p)| a.abs() * p).sum::<f64>() + self.lambda
    }

    /// `⟨ν, 1+|·|⟩`.
    fn fiber_growth(&self) -> f64 {
        self.fiber.iter().map(|(a, p)| (1.0 + a.abs()) * p).sum()
    }
}

/// Piecewise-constant target, laminated on dyadic cubes of side `t = 2^{-d}`
/// away from the piece boundaries and `∂Ω`, with spikes of height
/// `V = 2^{2d+4}` carrying the concentration.
#[derive(Debug, Clone)]
pub struct AcConstruction {
    pieces: Vec<AcPiece>,
    t: f64,
    s: f64,
    height: f64,
    /// Cube indices in the cover `F`, with their piece.
    cover: Vec<(usize, usize)>,
}

impl AcConstruction {
    pub fn new(pieces: Vec<AcPiece>, d: u32) -> Result<Self> {
        if pieces.first().map(|p| p.start) != Some(0.0) || pieces.last().map(|p| p.end) != Some(1.0) {
            return Err(ScenarioError::Invalid("pieces must cover (0, 1)".into()));
        }
        if pieces.windows(2).any(|w| w[0].end != w[1].start) || pieces.iter().any(|p| p.start >= p.end) {
            return Err(ScenarioError::Invalid("pieces must be consecutive".into()));
        }
        for p in &pieces {
            validate_angle(&p.angle)?;
            let mass: f64 = p.fiber.iter().map(|f| f.1).sum();
            if (mass - 1.0).abs() > 1e-9 || p.fiber.iter().any(|f| f.1 < 0.0) || !(p.lambda >= 0.0) {
                return Err(ScenarioError::Invalid(format!("piece on [{}, {}) is not a target", p.start, p.end)));
            }
        }
        let n = 1usize << d;
        let t = 1.0 / n as f64;
        let s = 1.0 - t;
        let interior: Vec<f64> = pieces[1..].iter().map(|p| p.start).collect();
        let in_c = |x: f64| interior.iter().all(|b| (x - b).abs() >= t);
        let cover = (2..n.saturating_sub(2))
            .filter_map(|k| {
                let (lo, hi) = (k as f64 * t, (k + 1) as f64 * t);
                let probes = 64;
                let inside = (0..probes).filter(|&i| in_c(lo + (i as f64 + 0.5) * t / probes as f64)).count() as f64;
                let piece = pieces.iter().position(|p| p.start <= 0.5 * (lo + hi) && 0.5 * (lo + hi) < p.end)?;
                (inside / probes as f64 > s).then_some((k, piece))
            })
            .collect();
        Ok(Self { pieces, t, s, height: 2f64.powi(2 * d as i32 + 4), cover })
    }

    fn piece_at(&self, x: f64) -> &AcPiece {
        let k = self.pieces.partition_point(|p| p.end <= x).min(self.pieces.len() - 1);
        &self.pieces[k]
    }

    /// `(φ_t * v^a⌞Ω)(x)`.
    pub fn mollified(&self, x: f64) -> f64 {
        let bump = Bump::get();
        self.pieces.iter().map(|p| p.barycentre() * bump.window(self.t, x, p.start, p.end)).sum()
    }

    fn spike_fractions(&self, p: &AcPiece) -> Vec<(f64, f64)> {
        p.angle.iter().map(|&(e, q)| (p.lambda * q / self.height, e * self.height + p.mean())).collect()
    }

    /// Generator segments `(start, end, value)` on cube `k`.
    fn generator(&self, k: usize, p: &AcPiece) -> Vec<(f64, f64, f64)> {
        let lo = k as f64 * self.t;
        let spike = self.spike_fractions(p);
        let h: f64 = spike.iter().map(|f| f.0).sum();
        let mut segments = Vec::new();
        let mut at = lo;
        for &(a, q) in &p.fiber {
            let len = q * (1.0 - h) * self.t;
            segments.push((at, at + len, a));
            at += len;
        }
        for (hk, v) in spike {
            segments.push((at, at + hk * self.t, v));
            at += hk * self.t;
        }
        segments
    }

    fn cover_piece(&self, k: usize) -> Option<usize> {
        self.cover.binary_search_by_key(&k, |c| c.0).ok().map(|i| self.cover[i].1)
    }

    pub fn field(&self, x: f64) -> f64 {
        let k = (x / self.t).floor() as usize;
        let base = self.mollified(x);
        match self.cover_piece(k) {
            Some(pi) => {
                let p = &self.pieces[pi];
                let g = self.generator(k, p).into_iter().find(|s| (s.0..s.1).contains(&x)).map_or(p.mean(), |s| s.2);
                base + g - p.barycentre()
            }
            None => base,
        }
    }

    fn breaks(&self) -> Vec<f64> {
        let mut out: Vec<f64> = self.pieces.iter().map(|p| p.start).collect();
        for &(k, pi) in &self.cover {
            out.push(k as f64 * self.t);
            out.push((k + 1) as f64 * self.t);
            out.extend(self.generator(k, &self.pieces[pi]).iter().flat_map(|s| [s.0, s.1]));
        }
        out
    }

    fn integral(&self, lo: f64, hi: f64, f: impl Fn(f64) -> f64) -> f64 {
        let mut nodes: Vec<f64> = self.pieces.iter().map(|p| p.start).filter(|&b| lo < b && b < hi).collect();
        nodes.extend([lo, hi]);
        nodes.sort_by(f64::total_cmp);
        nodes.windows(2).map(|w| crate::quadrature::composite(w[0], w[1], 16, &f)).sum()
    }

    fn uncovered(&self) -> Vec<(f64, f64)> {
        let n = (1.0 / self.t).round() as usize;
        (0..n)
            .filter(|&k| self.cover_piece(k).is_none())
            .map(|k| (k as f64 * self.t, (k + 1) as f64 * self.t))
            .collect()
    }

    pub fn budget(&self) -> Budget {
        let t = self.t;
        let ratio = (1.0 - self.s) / self.s;
        let magnitude = |x: f64| self.piece_at(x).magnitude();
        let int_m = self.integral(0.0, 1.0, magnitude);
        let interior: Vec<f64> = self.pieces[1..].iter().map(|p| p.start).collect();
        let eps_luzin: f64 =
            interior.iter().map(|&b| self.integral((b - t).max(0.0), (b + t).min(1.0), magnitude)).sum();
        let outside = self.uncovered();
        let e1: f64 = outside.iter().map(|&(a, b)| self.integral(a, b, magnitude)).sum();
        let mut e4 = 0.0;
        let mut variation = 0.0;
        let mut e7 = 0.0;
        for &(k, pi) in &self.cover {
            let p = &self.pieces[pi];
            let h: f64 = self.spike_fractions(p).iter().map(|f| f.0).sum();
            let bar = p.mean().abs();
            e4 += t * h * (p.fiber_growth() + bar + 1.0);
            variation += t * (p.fiber_growth() + p.lambda + h * (1.0 + bar));
            let lo = k as f64 * t;
            e7 += crate::quadrature::composite(lo, lo + t, 8, |x| (self.mollified(x) - p.barycentre()).abs());
        }
        let e3 = ratio * int_m + eps_luzin;
        let e5 = LIP_PHI * (ratio * int_m + eps_luzin + e4);
        let e_out: f64 = outside.iter().map(|&(a, b)| self.integral(a, b, |x| 2.0 + self.mollified(x).abs())).sum();
        Budget::new(vec![
            ("E1", e1),
            ("E2", t * int_m),
            ("E3", e3),
            ("E4", e4),
            ("E5", e5),
            ("E6", t * variation),
            ("E7", LIP_PHI * e7),
            ("E_uncovered", e_out),
        ])
    }

    fn measured(&self, tests: &Tests) -> f64 {
        let h_max = self.t / 4.0;
        let rhs = tests.integrate(&self.breaks(), h_max, |x| tests.phi(self.field(x)));
        let targets: Vec<Vec<f64>> = self
            .pieces
            .iter()
            .map(|p| {
                let mut v = vec![0.0; tests.battery.target.len()];
                for &(a, q) in &p.fiber {
                    v.iter_mut().zip(tests.phi(a)).for_each(|(o, f)| *o += q * f);
                }
                for &(e, q) in &p.angle {
                    v.iter_mut().zip(tests.phi_inf(e)).for_each(|(o, f)| *o += p.lambda * q * f);
                }
                v
            })
            .collect();
        let starts: Vec<f64> = self.pieces.iter().map(|p| p.start).collect();
        let lhs = tests.integrate(&starts, h_max, |x| {
            let k = self.pieces.partition_point(|p| p.end <= x).min(self.pieces.len() - 1);
            targets[k].clone()
        });
        max_gap(&rhs, &lhs)
    }
}

pub fn inhomogenize_ac(pieces: &[AcPiece], d: u32) -> Result<Outcome> {
    let c = AcConstruction::new(pieces.to_vec(), d)?;
    Ok(Outcome { level: d, budget: c.budget(), measured: c.measured(&Tests::new()) })
}

pub fn default_singular_target() -> Vec<SingularAtom> {
    vec![SingularAtom { x: 0.5, mass: 1.0, angle: vec![(1.0, 0.7), (-1.0, 0.3)] }]
}

pub fn default_ac_target() -> Vec<AcPiece> {
    vec![
        AcPiece { start: 0.0, end: 0.5, fiber: vec![(-1.0, 0.5), (1.0, 0.5)], lambda: 0.5, angle: vec![(1.0, 1.0)] },
        AcPiece { start: 0.5, end: 1.0, fiber: vec![(-0.5, 1.0)], lambda: 0.0, angle: vec![(1.0, 1.0)] },
    ]
}

/// Budget total must bound the measured discrepancy at every level and
/// shrink by 10% per refinement while at or above `floor`.
fn record(report: &mut Report, outcomes: &[Outcome], floor: f64) {
    let mut header = vec!["level", "measured", "total"];
    let names: Vec<String> =
        outcomes.first().map(|o| o.budget.terms.iter().map(|t| t.0.clone()).collect()).unwrap_or_default();
    header.extend(names.iter().map(String::as_str));
    let mut table = Table::new("budget", &header);
    for o in outcomes {
        let mut row = vec![o.level as f64, o.measured, o.budget.total];
        row.extend(o.budget.terms.iter().map(|t| t.1));
        table.push(row);
        report.at_most(format!("measured_within_budget_{}", o.level), o.measured - o.budget.total, 0.0);
    }
    for w in outcomes.windows(2) {
        if w[0].budget.total >= floor {
            report.at_most(format!("budget_decrease_{}", w[1].level), w[1].budget.total / w[0].budget.total, 0.9);
        }
    }
    report.tables.push(table);
}

pub const BUDGET_FLOOR: f64 = 0.02;

pub fn singular_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("inhomogenize_singular");
    let target = default_singular_target();
    let outcomes =
        cfg.levels.iter().map(|&a| inhomogenize_singular(&target, a, cfg.inner_level)).collect::<Result<Vec<_>>>()?;
    record(&mut report, &outcomes, BUDGET_FLOOR);
    let empty = inhomogenize_singular(&[], cfg.levels.first().copied().unwrap_or(4), cfg.inner_level)?;
    report.at_most("empty_target_budget", empty.budget.total, 0.0);
    report.at_most("empty_target_measured", empty.measured, 1e-12);
    Ok(report)
}

pub fn ac_scenario(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("inhomogenize_ac");
    let target = default_ac_target();
    let outcomes = cfg.levels.iter().map(|&d| inhomogenize_ac(&target, d)).collect::<Result<Vec<_>>>()?;
    record(&mut report, &outcomes, BUDGET_FLOOR);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::gauss5;

    #[test]
    fn singular_cube_means_match_mollified_target() {
        let c = SingularConstruction::new(default_singular_target(), 4, 4).unwrap();
        let (first, rs) = &c.cubes[0];
        let total: f64 = rs.iter().map(|r| r * c.side).sum();
        assert!((total - 1.0).abs() < 1e-9);
        let (k, r) = rs.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
        let lo = (first + k as i64) as f64 * c.side;
        let mut nodes: Vec<f64> = c.breaks().into_iter().filter(|b| (lo..=lo + c.side).contains(b)).collect();
        nodes.extend([lo, lo + c.side]);
        nodes.sort_by(f64::total_cmp);
        nodes.dedup();
        let mean = nodes.windows(2).map(|w| crate::quadrature::composite(w[0], w[1], 64, |x| c.field(x))).sum::<f64>()
            / c.side;
        assert!((mean - r * 0.4).abs() < 1e-3 * r, "{mean} vs {}", r * 0.4);
    }

    #[test]
    fn singular_requires_distance_from_boundary() {
        let near = vec![SingularAtom { x: 0.1, mass: 1.0, angle: vec![(1.0, 1.0)] }];
        let err = SingularConstruction::new(near.clone(), 3, 4).unwrap_err();
        assert!(matches!(err, ScenarioError::IncreaseA { a: 3, .. }));
        assert!(err.to_string().contains("increase a"));
        assert!(SingularConstruction::new(near, 6, 4).is_ok());
    }

    #[test]
    fn ac_field_has_target_barycentre_on_cover() {
        let c = AcConstruction::new(default_ac_target(), 5).unwrap();
        let &(k, pi) = c.cover.first().unwrap();
        let lo = k as f64 * c.t;
        let brk: Vec<f64> = c.generator(k, &c.pieces[pi]).iter().flat_map(|s| [s.0, s.1]).collect();
        let mut nodes = brk;
        nodes.extend([lo, lo + c.t]);
        nodes.sort_by(f64::total_cmp);
        let mean: f64 =
            nodes.windows(2).map(|w| gauss5(w[0], w[1], |x| c.field(x) - c.mollified(x))).sum::<f64>() / c.t;
        assert!(mean.abs() < 1e-9, "{mean}");
        assert!(c.cover.iter().all(|&(k, _)| k >= 2));
    }

    #[test]
    fn rejects_malformed_targets() {
        let mut bad = default_ac_target();
        bad[1].start = 0.6;
        assert!(AcConstruction::new(bad, 4).is_err());
        let bad_angle = vec![SingularAtom { x: 0.5, mass: 1.0, angle: vec![(1.0, 0.5)] }];
        assert!(SingularConstruction::new(bad_angle, 4, 4).is_err());
    }
}
