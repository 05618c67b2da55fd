//! Separable metric compactifications of `R^d` generated by finitely many
//! integrands, with boundary atoms stored as witness sequences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::transform::{random_unit, Integrand, TransformError};
use crate::vecops;

pub const MAX_GENERATORS: usize = 16;
pub const DEFAULT_MAG_MIN: f64 = 1e3;
pub const DEFAULT_TOL_EQUIV: f64 = 5e-2;
pub const WITNESS_CAPACITY: usize = 64;
const NORMALIZATION_SAMPLES: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CompactificationError {
    #[error("at most {MAX_GENERATORS} generators are supported, got {0}")]
    TooManyGenerators(usize),
    #[error("generator '{label}' has p = {found}, expected {expected}")]
    GrowthMismatch { label: String, expected: f64, found: f64 },
    #[error("generator '{label}' acts on R^{found}, expected R^{expected}")]
    DimensionMismatch { label: String, expected: usize, found: usize },
    #[error("|z| = {0} is below mag_min = {1}")]
    BelowMagMin(f64, f64),
    #[error(transparent)]
    Integrand(#[from] TransformError),
    #[error("invalid spec JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, CompactificationError>;

#[derive(Debug, Clone)]
pub struct Generator {
    integrand: Integrand,
    /// Multiplier making the sampled `sup |Tf|` at most 1.
    scale: f64,
    /// Sampled Lipschitz constant of the normalized `Tf` in ball
    /// coordinates (diagnostic).
    sampled_lip: f64,
}

impl Generator {
    fn normalize(integrand: Integrand) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(0x6e6f_726d);
        let d = integrand.target_dim();
        let mut sup: f64 = 0.0;
        let mut pts: Vec<(Vec<f64>, f64)> = Vec::with_capacity(NORMALIZATION_SAMPLES);
        for i in 0..NORMALIZATION_SAMPLES {
            // Half uniform in radius, half crowding the boundary sphere.
            let r = if i % 2 == 0 { rng.gen::<f64>() } else { 1.0 - 10f64.powf(-rng.gen_range(0.0..8.0)) };
            let e = random_unit(&mut rng, d);
            let magnitude = r / (1.0 - r);
            let z = vecops::scale(&e, magnitude);
            let t = integrand.weighted(&[], &z);
            sup = sup.max(t.abs());
            pts.push((vecops::scale(&e, r), t));
        }
        let scale = 1.0 / sup.max(1.0);
        let mut lip: f64 = 0.0;
        for w in pts.windows(2) {
            let dh = vecops::dist(&w[0].0, &w[1].0);
            if dh > 0.0 {
                lip = lip.max(scale * (w[0].1 - w[1].1).abs() / dh);
            }
        }
        Self { integrand, scale, sampled_lip: lip }
    }

    pub fn integrand(&self) -> &Integrand {
        &self.integrand
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn sampled_lip(&self) -> f64 {
        self.sampled_lip
    }

    /// Normalized `Tf` at the image of the raw point `z`.
    pub fn value_at_raw(&self, z: &[f64]) -> f64 {
        self.scale * self.integrand.weighted(&[], z)
    }
}

/// A truncated generator family together with classification parameters.
#[derive(Debug, Clone)]
pub struct CompactificationSpec {
    generators: Vec<Generator>,
    p: f64,
    target_dim: usize,
    mag_min: f64,
    tol_equiv: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpecJson {
    pub generators: Vec<String>,
    pub p: f64,
    #[serde(default = "one")]
    pub d: usize,
    #[serde(default = "default_mag_min")]
    pub mag_min: f64,
    #[serde(default = "default_tol_equiv")]
    pub tol_equiv: f64,
}

fn one() -> usize {
    1
}

fn default_mag_min() -> f64 {
    DEFAULT_MAG_MIN
}

fn default_tol_equiv() -> f64 {
    DEFAULT_TOL_EQUIV
}

impl CompactificationSpec {
    /// The sphere compactification: no generators.
    pub fn sphere(target_dim: usize) -> Self {
        Self { generators: Vec::new(), p: 1.0, target_dim, mag_min: DEFAULT_MAG_MIN, tol_equiv: DEFAULT_TOL_EQUIV }
    }

    pub fn new(target_dim: usize, p: f64, generators: Vec<Integrand>) -> Result<Self> {
        Self::sphere(target_dim).with_p(p).stack(generators)
    }

    fn with_p(mut self, p: f64) -> Self {
        self.p = p;
        self
    }

    pub fn with_params(mut self, mag_min: f64, tol_equiv: f64) -> Self {
        self.mag_min = mag_min;
        self.tol_equiv = tol_equiv;
        self
    }

    /// Appends generators after the existing ones; old weights are kept, so
    /// the new metric dominates the old one.
    pub fn stack(&self, extra: Vec<Integrand>) -> Result<Self> {
        let total = self.generators.len() + extra.len();
        if total > MAX_GENERATORS {
            return Err(CompactificationError::TooManyGenerators(total));
        }
        let mut out = self.clone();
        for f in extra {
            if f.p() != self.p {
                return Err(CompactificationError::GrowthMismatch {
                    label: f.label().into(),
                    expected: self.p,
                    found: f.p(),
                });
            }
            if f.target_dim() != self.target_dim {
                return Err(CompactificationError::DimensionMismatch {
                    label: f.label().into(),
                    expected: self.target_dim,
                    found: f.target_dim(),
                });
            }
            out.generators.push(Generator::normalize(f));
        }
        Ok(out)
    }

    pub fn generators(&self) -> &[Generator] {
        &self.generators
    }

    pub fn is_sphere(&self) -> bool {
        self.generators.is_empty()
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn mag_min(&self) -> f64 {
        self.mag_min
    }

    pub fn tol_equiv(&self) -> f64 {
        self.tol_equiv
    }

    /// Weight `2^{-i}` of the `i`-th generator, counting from 1.
    pub fn weight(i: usize) -> f64 {
        0.5f64.powi(i as i32 + 1)
    }

    /// Index of the generator whose integrand carries `label`.
    pub fn generator_index(&self, label: &str) -> Option<usize> {
        self.generators.iter().position(|g| g.integrand.label() == label)
    }

    /// `|a-b| + Σ 2^{-i} |Tf_i(a) - Tf_i(b)|`.
    pub fn metric(&self, a: &CompactPoint, b: &CompactPoint) -> f64 {
        let gens: f64 = a.gens.iter().zip(&b.gens).enumerate().map(|(i, (x, y))| Self::weight(i) * (x - y).abs()).sum();
        vecops::dist(&a.ball, &b.ball) + gens
    }

    pub fn to_json(&self) -> SpecJson {
        SpecJson {
            generators: self.generators.iter().map(|g| g.integrand.label().to_string()).collect(),
            p: self.p,
            d: self.target_dim,
            mag_min: self.mag_min,
            tol_equiv: self.tol_equiv,
        }
    }

    /// Rebuilds a spec, resolving generator ids through `lookup`.
    pub fn from_json(
        raw: &SpecJson,
        lookup: impl Fn(&str, usize) -> std::result::Result<Integrand, TransformError>,
    ) -> Result<Self> {
        let gens = raw.generators.iter().map(|id| lookup(id, raw.d)).collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self::new(raw.d, raw.p, gens)?.with_params(raw.mag_min, raw.tol_equiv))
    }
}

/// A point of the compactified ball: ball coordinates plus generator
/// values (for boundary points, the recorded generator limits).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompactPoint {
    pub ball: Vec<f64>,
    pub gens: Vec<f64>,
}

impl CompactPoint {
    /// Image of a raw target-space point.
    pub fn from_raw(z: &[f64], spec: &CompactificationSpec) -> Self {
        let r = vecops::norm(z);
        Self {
            ball: vecops::scale(z, 1.0 / (1.0 + r)),
            gens: spec.generators.iter().map(|g| g.value_at_raw(z)).collect(),
        }
    }

    /// Interior point given in ball coordinates (`|ẑ| < 1`).
    pub fn from_ball(zh: &[f64], spec: &CompactificationSpec) -> Result<Self> {
        let z = crate::transform::from_ball_point(zh)?;
        Ok(Self { ball: zh.to_vec(), gens: spec.generators.iter().map(|g| g.value_at_raw(&z)).collect() })
    }

    pub fn boundary(dir: Vec<f64>, gen_limits: Vec<f64>) -> Self {
        Self { ball: dir, gens: gen_limits }
    }
}

/// `d(z,w)` for two interior points given in ball coordinates.
pub fn metric_d(zh: &[f64], wh: &[f64], spec: &CompactificationSpec) -> Result<f64> {
    Ok(spec.metric(&CompactPoint::from_ball(zh, spec)?, &CompactPoint::from_ball(wh, spec)?))
}

pub type AtomId = usize;

/// A boundary point represented by a diverging witness sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryAtom {
    id: AtomId,
    /// Witness points sorted by strictly increasing magnitude.
    witness: Vec<Vec<f64>>,
    dir: Vec<f64>,
    gen_limits: Vec<f64>,
    #[serde(skip)]
    witness_gens: Vec<Vec<f64>>,
}

impl BoundaryAtom {
    fn seeded(id: AtomId, z: &[f64], spec: &CompactificationSpec) -> Self {
        let mut atom =
            Self { id, witness: Vec::new(), dir: Vec::new(), gen_limits: Vec::new(), witness_gens: Vec::new() };
        atom.insert(z, spec);
        atom
    }

    /// Builds an atom from a full witness list (e.g. `n·e` for a direction).
    pub fn from_witness(id: AtomId, witness: &[Vec<f64>], spec: &CompactificationSpec) -> Self {
        let mut atom = Self::seeded(id, &witness[0], spec);
        for z in &witness[1..] {
            atom.insert(z, spec);
        }
        atom
    }

    /// Atom along direction `e` with witness `mag_min·2^k·e`, `k < 8`.
    pub fn along(id: AtomId, e: &[f64], spec: &CompactificationSpec) -> Self {
        let unit = vecops::normalized(e).expect("nonzero direction");
        let witness: Vec<Vec<f64>> = (0..8).map(|k| vecops::scale(&unit, spec.mag_min() * 2f64.powi(k))).collect();
        Self::from_witness(id, &witness, spec)
    }

    fn insert(&mut self, z: &[f64], spec: &CompactificationSpec) {
        let r = vecops::norm(z);
        let pos = self.witness.partition_point(|w| vecops::norm(w) < r);
        if pos < self.witness.len() && vecops::norm(&self.witness[pos]) <= r * (1.0 + 1e-12) {
            return; // magnitudes stay strictly increasing
        }
        if self.witness.len() == WITNESS_CAPACITY {
            if pos == 0 {
                return;
            }
            self.witness.remove(0);
            self.witness_gens.remove(0);
            self.witness.insert(pos - 1, z.to_vec());
            self.witness_gens.insert(pos - 1, CompactPoint::from_raw(z, spec).gens);
        } else {
            self.witness.insert(pos, z.to_vec());
            self.witness_gens.insert(pos, CompactPoint::from_raw(z, spec).gens);
        }
        self.refresh(spec);
    }

    fn refresh(&mut self, spec: &CompactificationSpec) {
        let n = self.witness.len();
        let tail = n / 2;
        let count = (n - tail) as f64;
        let mut dir = vec![0.0; spec.target_dim()];
        let mut limits = vec![0.0; spec.generators().len()];
        for (z, g) in self.witness[tail..].iter().zip(&self.witness_gens[tail..]) {
            vecops::add_scaled_into(&mut dir, z, 1.0 / vecops::norm(z));
            vecops::add_scaled_into(&mut limits, g, 1.0 / count);
        }
        self.dir = vecops::normalized(&dir).unwrap_or_else(|| vecops::basis(spec.target_dim(), 0));
        self.gen_limits = limits;
    }

    /// Recomputes cached generator values after deserialization.
    pub fn restore(&mut self, spec: &CompactificationSpec) {
        self.witness_gens = self.witness.iter().map(|z| CompactPoint::from_raw(z, spec).gens).collect();
        if !self.witness.is_empty() {
            self.refresh(spec);
        }
    }

    pub fn id(&self) -> AtomId {
        self.id
    }

    pub fn witness(&self) -> &[Vec<f64>] {
        &self.witness
    }

    pub fn dir(&self) -> &[f64] {
        &self.dir
    }

    pub fn gen_limits(&self) -> &[f64] {
        &self.gen_limits
    }

    pub fn boundary_point(&self) -> CompactPoint {
        CompactPoint::boundary(self.dir.clone(), self.gen_limits.clone())
    }

    /// Checks the witness invariants: increasing magnitudes reaching
    /// `mag_min`, Cauchy generator values on the tail, unit direction.
    pub fn is_valid(&self, spec: &CompactificationSpec) -> bool {
        let mags: Vec<f64> = self.witness.iter().map(|w| vecops::norm(w)).collect();
        let increasing = mags.windows(2).all(|w| w[0] < w[1]);
        let reaches = mags.last().is_some_and(|&m| m >= spec.mag_min());
        let tail = &self.witness_gens[self.witness_gens.len() / 2..];
        let cauchy = (0..self.gen_limits.len()).all(|i| {
            let (lo, hi) =
                tail.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), g| (lo.min(g[i]), hi.max(g[i])));
            hi - lo <= spec.tol_equiv()
        });
        increasing && reaches && cauchy && (vecops::norm(&self.dir) - 1.0).abs() <= 1e-9
    }
}

/// Projection of an atom onto the unit sphere.
pub fn sphere_project(atom: &BoundaryAtom) -> Vec<f64> {
    atom.dir.clone()
}

/// Registry of boundary atoms; mutation goes through [`AtomRegistry::classify`].
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AtomRegistry {
    atoms: Vec<BoundaryAtom>,
}

impl AtomRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn atoms(&self) -> &[BoundaryAtom] {
        &self.atoms
    }

    pub fn atom(&self, id: AtomId) -> Option<&BoundaryAtom> {
        self.atoms.get(id)
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    /// Rebuilds caches of every atom against `spec` (after deserialization).
    pub fn restore(&mut self, spec: &CompactificationSpec) {
        for a in &mut self.atoms {
            a.restore(spec);
        }
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// Registers an externally built atom and returns its id.
    pub fn push_along(&mut self, e: &[f64], spec: &CompactificationSpec) -> AtomId {
        let id = self.atoms.len();
        self.atoms.push(BoundaryAtom::along(id, e, spec));
        id
    }

    fn nearest(&self, z: &[f64], spec: &CompactificationSpec) -> Option<(AtomId, f64)> {
        let probe = CompactPoint::boundary(vecops::normalized(z)?, CompactPoint::from_raw(z, spec).gens);
        self.atoms
            .iter()
            .map(|a| (a.id, spec.metric(&probe, &a.boundary_point())))
            .filter(|&(_, d)| d <= spec.tol_equiv())
            .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
    }

    /// Read-only query against a frozen registry.
    pub fn lookup(&self, z: &[f64], spec: &CompactificationSpec) -> Option<AtomId> {
        self.nearest(z, spec).map(|(id, _)| id)
    }

    /// Assigns `z` to the matching atom (extending its witness) or
    /// registers a new atom seeded with `z`.
    pub fn classify(&mut self, z: &[f64], spec: &CompactificationSpec) -> Result<AtomId> {
        let r = vecops::norm(z);
        if r < spec.mag_min() {
            return Err(CompactificationError::BelowMagMin(r, spec.mag_min()));
        }
        match self.nearest(z, spec) {
            Some((id, _)) => {
                self.atoms[id].insert(z, spec);
                Ok(id)
            }
            None => {
                let id = self.atoms.len();
                self.atoms.push(BoundaryAtom::seeded(id, z, spec));
                Ok(id)
            }
        }
    }
}

/// Convenience wrapper: classify a single point against `registry`.
pub fn classify_point(z: &[f64], spec: &CompactificationSpec, registry: &mut AtomRegistry) -> Result<AtomId> {
    registry.classify(z, spec)
}
