//! Generalized Young measures as triples `(ν_x, λ, ν^∞_x)`: pairing with
//! integrands, elementary embeddings, estimation from sampled sequences and
//! the structure operations (decomposition, join, rescaling).

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::compactification::{
    AtomId, AtomRegistry, CompactPoint, CompactificationError, CompactificationSpec, SpecJson,
};
use crate::measure::{
    default_eps_sing, radon_nikodym, DiscreteMeasure, MeasureError, ParametrizedMeasure, Point, VectorDiscreteMeasure,
    TOL_PROB,
};
use crate::transform::{self, Integrand, RecessionParams, TransformError};
use crate::vecops;

#[derive(Debug, Error)]
pub enum YoungError {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error(transparent)]
    Compactification(#[from] CompactificationError),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error("integrand not continuous on this compactification")]
    NotContinuous { label: String, atom: AtomId },
    #[error("integrand '{label}' has p = {found}, triple has p = {expected}")]
    GrowthMismatch { label: String, expected: f64, found: f64 },
    #[error("values live in R^{found}, expected R^{expected}")]
    TargetDim { expected: usize, found: usize },
    #[error("malformed sequence: {0}")]
    Shape(String),
    #[error("cutoff {r_cut} is below the compactification's mag_min {mag_min}")]
    CutBelowMagMin { r_cut: f64, mag_min: f64 },
    #[error("vector-measure embedding needs p = 1")]
    NeedsLinearGrowth,
    #[error("no canonical embedding of vector measures into a compactification larger than the sphere")]
    EmbeddingRefused,
    #[error("concentrations not mutually singular")]
    NotMutuallySingular,
    #[error("first sequence does not converge strongly: cell {cell} has largest fiber weight {max_weight}")]
    NotDelta { cell: usize, max_weight: f64 },
    #[error("rescaling weight must be positive, found {value} at {x:?}")]
    NonPositiveWeight { value: f64, x: Point },
    #[error("explicit recession table has {found} entries, registry has {expected} atoms")]
    RecessionLength { expected: usize, found: usize },
    #[error("triples use different compactifications")]
    SpecMismatch,
    #[error("invalid triple: {0}")]
    Invalid(String),
    #[error("invalid triple JSON: {0}")]
    Json(String),
}

pub type Result<T> = std::result::Result<T, YoungError>;

/// Probability weights over boundary atoms attached to one λ-atom.
pub type AngleFiber = BTreeMap<AtomId, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    /// Values above this magnitude count as concentration.
    pub r_cut: f64,
    /// Histogram bins per axis of the ball.
    pub bins: usize,
}

impl EstimateParams {
    pub fn for_spec(spec: &CompactificationSpec) -> Self {
        Self { r_cut: spec.mag_min(), bins: default_bins(spec.target_dim()) }
    }

    pub fn with_r_cut(mut self, r_cut: f64) -> Self {
        self.r_cut = r_cut;
        self
    }
}

pub fn default_bins(d: usize) -> usize {
    if d == 1 {
        64
    } else {
        32
    }
}

/// Oscillation fibers on the cells of `mu`, concentration `λ` with one
/// angle fiber per λ-atom, and the registry resolving atom ids.
#[derive(Debug, Clone)]
pub struct YoungTriple {
    mu: DiscreteMeasure,
    osc: ParametrizedMeasure,
    conc: DiscreteMeasure,
    angle: Vec<AngleFiber>,
    registry: AtomRegistry,
    spec: CompactificationSpec,
    params: EstimateParams,
}

impl YoungTriple {
    pub fn new(
        mu: DiscreteMeasure,
        osc: ParametrizedMeasure,
        conc: DiscreteMeasure,
        angle: Vec<AngleFiber>,
        registry: AtomRegistry,
        spec: CompactificationSpec,
        params: EstimateParams,
    ) -> Result<Self> {
        if osc.len() != mu.len() || osc.cells().iter().zip(mu.points()).any(|(a, b)| a != b) {
            return Err(YoungError::Invalid("oscillation cells differ from the reference atoms".into()));
        }
        if osc.is_sub_probability() {
            return Err(YoungError::Invalid("oscillation fibers must be probabilities".into()));
        }
        let d = spec.target_dim();
        for (i, w) in mu.weights().iter().enumerate() {
            match osc.fiber(i) {
                None if *w > 0.0 => {
                    return Err(YoungError::Invalid(format!("missing fiber on cell {i}")));
                }
                Some(f) if !f.is_empty() && f.dim() != d => {
                    return Err(YoungError::TargetDim { expected: d, found: f.dim() });
                }
                Some(f) => {
                    let moment = f.integrate(|z| vecops::norm(z).powf(spec.p()));
                    if !moment.is_finite() {
                        return Err(YoungError::Invalid(format!("infinite moment on cell {i}")));
                    }
                }
                None => {}
            }
        }
        if angle.len() != conc.len() {
            return Err(YoungError::Invalid("one angle fiber per concentration atom expected".into()));
        }
        for (k, (fiber, w)) in angle.iter().zip(conc.weights()).enumerate() {
            if *w == 0.0 {
                continue;
            }
            let mass: f64 = fiber.values().sum();
            if (mass - 1.0).abs() > TOL_PROB || fiber.values().any(|&q| q < 0.0) {
                return Err(YoungError::Invalid(format!("angle fiber {k} has mass {mass}")));
            }
            if let Some(id) = fiber.keys().find(|&&id| registry.atom(id).is_none()) {
                return Err(YoungError::Invalid(format!("unknown atom id {id}")));
            }
        }
        Ok(Self { mu, osc, conc, angle, registry, spec, params })
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn osc(&self) -> &ParametrizedMeasure {
        &self.osc
    }

    pub fn conc(&self) -> &DiscreteMeasure {
        &self.conc
    }

    pub fn angle(&self) -> &[AngleFiber] {
        &self.angle
    }

    pub fn registry(&self) -> &AtomRegistry {
        &self.registry
    }

    pub fn spec(&self) -> &CompactificationSpec {
        &self.spec
    }

    pub fn params(&self) -> EstimateParams {
        self.params
    }

    pub fn lambda_mass(&self) -> f64 {
        self.conc.mass()
    }

    /// Atoms carrying angle weight, with their total `λ`-weighted share.
    pub fn atom_weights(&self) -> BTreeMap<AtomId, f64> {
        let mut out = BTreeMap::new();
        for (fiber, w) in self.angle.iter().zip(self.conc.weights()) {
            for (&id, &q) in fiber {
                *out.entry(id).or_insert(0.0) += w * q;
            }
        }
        out
    }

    /// Angle measure pushed to the unit sphere, weighted by `λ`.
    pub fn sphere_angle_measure(&self) -> Result<DiscreteMeasure> {
        let mut points = Vec::new();
        let mut weights = Vec::new();
        for (id, w) in self.atom_weights() {
            let atom = self.registry.atom(id).expect("validated id");
            points.push(atom.dir().to_vec());
            weights.push(w);
        }
        Ok(DiscreteMeasure::with_tol(points, weights, 1e-6)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&TripleJson {
            mu: self.mu.clone(),
            osc: self.osc.clone(),
            conc: self.conc.clone(),
            angle: self.angle.clone(),
            atoms: self.registry.clone(),
            spec: self.spec.to_json(),
            params: self.params,
        })
        .expect("triple serializes")
    }

    pub fn from_json(
        s: &str,
        lookup: impl Fn(&str, usize) -> std::result::Result<Integrand, TransformError>,
    ) -> Result<Self> {
        let raw: TripleJson = serde_json::from_str(s).map_err(|e| YoungError::Json(e.to_string()))?;
        let spec = CompactificationSpec::from_json(&raw.spec, lookup)?;
        let mut atoms = raw.atoms;
        atoms.restore(&spec);
        let osc = ParametrizedMeasure::new(raw.osc.cells().to_vec(), raw.osc.fibers().to_vec())?;
        Self::new(raw.mu, osc, raw.conc, raw.angle, atoms, spec, raw.params)
    }
}

#[derive(Serialize, Deserialize)]
struct TripleJson {
    mu: DiscreteMeasure,
    osc: ParametrizedMeasure,
    conc: DiscreteMeasure,
    angle: Vec<AngleFiber>,
    atoms: AtomRegistry,
    spec: SpecJson,
    params: EstimateParams,
}

/// Builds `λ` and aligned angle fibers from unsorted entries, merging
/// coincident points (fibers combine in proportion to their weights).
fn build_conc(x_dim: usize, entries: Vec<(Point, f64, AngleFiber)>) -> Result<(DiscreteMeasure, Vec<AngleFiber>)> {
    let entries: Vec<_> = entries.into_iter().filter(|e| e.1 > 0.0).collect();
    if entries.is_empty() {
        return Ok((DiscreteMeasure::zero(x_dim), Vec::new()));
    }
    let conc =
        DiscreteMeasure::new(entries.iter().map(|e| e.0.clone()).collect(), entries.iter().map(|e| e.1).collect())?;
    let mut angle = vec![AngleFiber::new(); conc.len()];
    for (p, w, fiber) in entries {
        let k =
            conc.points().iter().position(|q| vecops::dist(q, &p) <= conc.dedup_tol()).expect("merged point present");
        for (id, q) in fiber {
            *angle[k].entry(id).or_insert(0.0) += w * q;
        }
    }
    for (fiber, &total) in angle.iter_mut().zip(conc.weights()) {
        fiber.values_mut().for_each(|q| *q /= total);
    }
    Ok((conc, angle))
}

/// A finite family of fields `v_j` sampled on the atoms of `mu`, with
/// atoms grouped into coarse cells for estimation.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledSequence {
    mu: DiscreteMeasure,
    cell_of: Vec<usize>,
    centers: Vec<Point>,
    labels: Vec<usize>,
    fields: Vec<Vec<Vec<f64>>>,
    target_dim: usize,
}

impl SampledSequence {
    pub fn new(
        mu: DiscreteMeasure,
        cell_of: Vec<usize>,
        centers: Vec<Point>,
        labels: Vec<usize>,
        fields: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self> {
        if fields.is_empty() || mu.is_empty() {
            return Err(YoungError::Shape("sequence is empty".into()));
        }
        if labels.len() != fields.len() {
            return Err(YoungError::Shape(format!("{} labels for {} fields", labels.len(), fields.len())));
        }
        if cell_of.len() != mu.len() || cell_of.iter().any(|&c| c >= centers.len()) {
            return Err(YoungError::Shape("cell assignment does not cover the atoms".into()));
        }
        if centers.windows(2).any(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(YoungError::Shape("cell centers must be strictly increasing".into()));
        }
        let mut mass = vec![0.0; centers.len()];
        for (c, w) in cell_of.iter().zip(mu.weights()) {
            mass[*c] += w;
        }
        if let Some(c) = mass.iter().position(|&m| m <= 0.0) {
            return Err(YoungError::Shape(format!("cell {c} has no mass")));
        }
        let target_dim = fields[0].first().map_or(0, Vec::len);
        for f in &fields {
            if f.len() != mu.len() {
                return Err(YoungError::Shape("field length differs from the atom count".into()));
            }
            if let Some(v) = f.iter().find(|v| v.len() != target_dim) {
                return Err(YoungError::TargetDim { expected: target_dim, found: v.len() });
            }
            if f.iter().flatten().any(|x| !x.is_finite()) {
                return Err(YoungError::Shape("non-finite value".into()));
            }
        }
        Ok(Self { mu, cell_of, centers, labels, fields, target_dim })
    }

    /// Midpoint quadrature of `(0,1)^x_dim` with `cells` coarse cells per
    /// axis, each split into `sub` atoms per axis; `field(j, x)` gives `v_j(x)`.
    pub fn on_unit_cube(
        cells: usize,
        sub: usize,
        x_dim: usize,
        labels: Vec<usize>,
        field: impl Fn(usize, &[f64]) -> Vec<f64> + Sync,
    ) -> Result<Self> {
        let mu = crate::measure::lebesgue_grid(cells * sub, x_dim);
        let cell_of = mu
            .points()
            .iter()
            .map(|x| {
                x.iter().fold(0usize, |acc, &c| acc * cells + ((c * cells as f64).floor() as usize).min(cells - 1))
            })
            .collect();
        let centers = crate::measure::lebesgue_grid(cells, x_dim).points().to_vec();
        let fields = labels.par_iter().map(|&j| mu.points().iter().map(|x| field(j, x)).collect()).collect();
        Self::new(mu, cell_of, centers, labels, fields)
    }

    pub fn mu(&self) -> &DiscreteMeasure {
        &self.mu
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn fields(&self) -> &[Vec<Vec<f64>>] {
        &self.fields
    }

    pub fn centers(&self) -> &[Point] {
        &self.centers
    }

    pub fn cell_of(&self) -> &[usize] {
        &self.cell_of
    }

    pub fn target_dim(&self) -> usize {
        self.target_dim
    }

    pub fn x_dim(&self) -> usize {
        self.mu.dim()
    }

    /// Coarse-cell marginal of `mu`.
    pub fn cell_measure(&self) -> DiscreteMeasure {
        let mut mass = vec![0.0; self.centers.len()];
        for (c, w) in self.cell_of.iter().zip(self.mu.weights()) {
            mass[*c] += w;
        }
        DiscreteMeasure::new(self.centers.clone(), mass).expect("validated cells")
    }

    fn with_fields(&self, fields: Vec<Vec<Vec<f64>>>) -> Self {
        Self { fields, ..self.clone() }
    }

    /// Applies `map(label, x, v)` to every sample.
    pub fn map(&self, map: impl Fn(usize, &[f64], &[f64]) -> Vec<f64> + Sync) -> Self {
        let fields = self
            .labels
            .par_iter()
            .zip(&self.fields)
            .map(|(&j, f)| self.mu.points().iter().zip(f).map(|(x, v)| map(j, x, v)).collect())
            .collect();
        self.with_fields(fields)
    }

    /// Same samples against the reference measure `a·mu`.
    pub fn reweighted(&self, a: impl Fn(&[f64]) -> f64) -> Result<Self> {
        let mut weights = Vec::with_capacity(self.mu.len());
        for (x, w) in self.mu.atoms() {
            let value = a(x);
            if !(value > 0.0 && value.is_finite()) {
                return Err(YoungError::NonPositiveWeight { value, x: x.to_vec() });
            }
            weights.push(w * value);
        }
        let mu = DiscreteMeasure::with_tol(self.mu.points().to_vec(), weights, self.mu.dedup_tol())?;
        Ok(Self { mu, ..self.clone() })
    }

    /// Pointwise sum with a sequence sampled on the same grid and labels.
    pub fn plus(&self, other: &Self) -> Result<Self> {
        if self.mu != other.mu || self.labels != other.labels || self.cell_of != other.cell_of {
            return Err(YoungError::Shape("sequences live on different grids".into()));
        }
        let fields = self
            .fields
            .iter()
            .zip(&other.fields)
            .map(|(a, b)| a.iter().zip(b).map(|(u, v)| vecops::add(u, v)).collect())
            .collect();
        Ok(self.with_fields(fields))
    }

    /// Keeps the members whose label satisfies `keep`.
    pub fn select(&self, keep: impl Fn(usize) -> bool) -> Result<Self> {
        let (labels, fields): (Vec<usize>, Vec<_>) =
            self.labels.iter().zip(&self.fields).filter(|(j, _)| keep(**j)).map(|(j, f)| (*j, f.clone())).unzip();
        Self::new(self.mu.clone(), self.cell_of.clone(), self.centers.clone(), labels, fields)
    }

    /// `∫ f(x, v_j(x)) dμ` for the member at position `index`.
    pub fn integral(&self, index: usize, f: &Integrand) -> f64 {
        self.mu.atoms().zip(&self.fields[index]).map(|((x, w), v)| w * f.eval(x, v)).sum()
    }

    /// `∫_{|v_j|>k} |v_j| dμ` for the member at position `index`.
    pub fn tail_mass(&self, index: usize, k: f64) -> f64 {
        self.mu
            .weights()
            .iter()
            .zip(&self.fields[index])
            .map(|(w, v)| {
                let r = vecops::norm(v);
                if r > k {
                    w * r
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// `v_j dμ` as a vector measure.
    pub fn as_vector_measure(&self, index: usize) -> Result<VectorDiscreteMeasure> {
        let density: Vec<Vec<f64>> = self.fields[index].clone();
        Ok(VectorDiscreteMeasure::from_density(&self.mu, &density)?)
    }
}

#[derive(Default)]
struct Bin {
    weight: f64,
    sum: Vec<f64>,
    first: Option<Vec<f64>>,
    uniform: bool,
}

impl Bin {
    fn add(&mut self, v: &[f64], w: f64) {
        if self.sum.is_empty() {
            self.sum = vec![0.0; v.len()];
        }
        match &self.first {
            None => {
                self.first = Some(v.to_vec());
                self.uniform = true;
            }
            Some(f) if f.as_slice() != v => self.uniform = false,
            Some(_) => {}
        }
        self.weight += w;
        vecops::add_scaled_into(&mut self.sum, v, w);
    }

    fn representative(&self) -> Vec<f64> {
        match &self.first {
            Some(f) if self.uniform => f.clone(),
            _ => vecops::scale(&self.sum, 1.0 / self.weight),
        }
    }
}

fn bin_key(v: &[f64], bins: usize) -> Vec<i64> {
    transform::to_ball_point(v)
        .iter()
        .map(|&c| (((c + 1.0) * 0.5 * bins as f64).floor() as i64).clamp(0, bins as i64 - 1))
        .collect()
}

struct CellStats {
    bins: BTreeMap<Vec<i64>, Bin>,
    lambda: f64,
    votes: Vec<(Vec<f64>, f64)>,
}

/// Estimates the limit triple of `seq`, averaging over its members.
pub fn estimate(seq: &SampledSequence, spec: &CompactificationSpec, params: EstimateParams) -> Result<YoungTriple> {
    estimate_with_registry(seq, spec, params, AtomRegistry::new())
}

/// As [`estimate`], classifying boundary values into an existing registry
/// so that atom ids are comparable across estimates.
pub fn estimate_with_registry(
    seq: &SampledSequence,
    spec: &CompactificationSpec,
    params: EstimateParams,
    mut registry: AtomRegistry,
) -> Result<YoungTriple> {
    if params.r_cut < spec.mag_min() {
        return Err(YoungError::CutBelowMagMin { r_cut: params.r_cut, mag_min: spec.mag_min() });
    }
    if seq.target_dim != spec.target_dim() {
        return Err(YoungError::TargetDim { expected: spec.target_dim(), found: seq.target_dim });
    }
    let mut members = vec![Vec::new(); seq.centers.len()];
    for (a, &c) in seq.cell_of.iter().enumerate() {
        members[c].push(a);
    }
    let d = seq.target_dim;
    let zero = vec![0.0; d];
    let zero_key = bin_key(&zero, params.bins);
    let stats: Vec<CellStats> = members
        .par_iter()
        .map(|atoms| {
            let mut st = CellStats { bins: BTreeMap::new(), lambda: 0.0, votes: Vec::new() };
            for field in &seq.fields {
                for &a in atoms {
                    let (v, w) = (&field[a], seq.mu.weights()[a]);
                    let r = vecops::norm(v);
                    if r <= params.r_cut {
                        st.bins.entry(bin_key(v, params.bins)).or_default().add(v, w);
                    } else {
                        st.bins.entry(zero_key.clone()).or_default().add(&zero, w);
                        st.lambda += r * w;
                        st.votes.push((v.clone(), r * w));
                    }
                }
            }
            st
        })
        .collect();
    let nj = seq.fields.len() as f64;
    let cell_mu = seq.cell_measure();
    let mut fibers = Vec::with_capacity(stats.len());
    let mut conc_entries = Vec::new();
    for (c, st) in stats.into_iter().enumerate() {
        let total: f64 = st.bins.values().map(|b| b.weight).sum();
        let (reps, ws): (Vec<_>, Vec<_>) = st.bins.values().map(|b| (b.representative(), b.weight / total)).unzip();
        fibers.push(Some(DiscreteMeasure::new(reps, ws)?));
        if st.lambda > 0.0 {
            let mut fiber = AngleFiber::new();
            for (v, vote) in &st.votes {
                let id = registry.classify(v, spec)?;
                *fiber.entry(id).or_insert(0.0) += vote / st.lambda;
            }
            conc_entries.push((seq.centers[c].clone(), st.lambda / nj, fiber));
        }
    }
    let (conc, angle) = build_conc(seq.x_dim(), conc_entries)?;
    let osc = ParametrizedMeasure::new(cell_mu.points().to_vec(), fibers)?;
    YoungTriple::new(cell_mu, osc, conc, angle, registry, spec.clone(), params)
}

/// `ξ_v`: Dirac fibers at `v(x)` on each atom of `mu`, no concentration.
pub fn elementary(v: &[Vec<f64>], mu: &DiscreteMeasure, spec: &CompactificationSpec) -> Result<YoungTriple> {
    if v.len() != mu.len() {
        return Err(YoungError::Shape(format!("{} values for {} atoms", v.len(), mu.len())));
    }
    if let Some(z) = v.iter().find(|z| z.len() != spec.target_dim()) {
        return Err(YoungError::TargetDim { expected: spec.target_dim(), found: z.len() });
    }
    let fibers = v
        .iter()
        .map(|z| DiscreteMeasure::dirac(z.clone(), 1.0).map(Some))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let osc = ParametrizedMeasure::new(mu.points().to_vec(), fibers)?;
    YoungTriple::new(
        mu.clone(),
        osc,
        DiscreteMeasure::zero(mu.dim()),
        Vec::new(),
        AtomRegistry::new(),
        spec.clone(),
        EstimateParams::for_spec(spec),
    )
}

/// `ξ_l` for a vector measure: density fibers, `|l^s|` as concentration and
/// the polar direction as angle. Only the sphere compactification admits it.
pub fn elementary_measure(
    l: &VectorDiscreteMeasure,
    mu: &DiscreteMeasure,
    spec: &CompactificationSpec,
) -> Result<YoungTriple> {
    if spec.p() != 1.0 {
        return Err(YoungError::NeedsLinearGrowth);
    }
    if !spec.is_sphere() {
        return Err(YoungError::EmbeddingRefused);
    }
    if !l.is_empty() && l.value_dim() != spec.target_dim() {
        return Err(YoungError::TargetDim { expected: spec.target_dim(), found: l.value_dim() });
    }
    let split = radon_nikodym(l, mu, default_eps_sing(mu));
    let density: Vec<Vec<f64>> =
        split.density.into_iter().map(|g| if g.is_empty() { vec![0.0; spec.target_dim()] } else { g }).collect();
    let mut registry = AtomRegistry::new();
    let mut entries = Vec::new();
    for (x, v) in split.singular.atoms() {
        let mass = vecops::norm(v);
        if mass == 0.0 {
            continue;
        }
        let probe = vecops::scale(v, 2.0 * spec.mag_min() / mass);
        let id = registry.classify(&probe, spec)?;
        entries.push((x.to_vec(), mass, AngleFiber::from([(id, 1.0)])));
    }
    let base = elementary(&density, mu, spec)?;
    let (conc, angle) = build_conc(mu.dim(), entries)?;
    YoungTriple::new(base.mu, base.osc, conc, angle, registry, spec.clone(), base.params)
}

/// How the boundary term of a pairing obtains `f^∞` on each atom.
#[derive(Debug, Clone, Copy)]
pub enum RecessionMode<'a> {
    /// Generator limits for spec generators, otherwise a regular recession
    /// profile along the atom's direction.
    Auto,
    /// Values indexed by atom id.
    Explicit(&'a [f64]),
}

fn auto_recession(nu: &YoungTriple, f: &Integrand, x: &[f64], id: AtomId) -> Result<f64> {
    let atom = nu.registry.atom(id).expect("validated id");
    if let Some(i) = nu.spec.generator_index(f.label()) {
        let g = &nu.spec.generators()[i];
        return Ok(atom.gen_limits()[i] / g.scale());
    }
    let entry = transform::recession_profile(f, x, &[atom.dir().to_vec()], &RecessionParams::default())?;
    entry[0].f_inf.ok_or_else(|| YoungError::NotContinuous { label: f.label().to_string(), atom: id })
}

/// `∫⟨ν_x, f⟩ dμ + ∫⟨ν^∞_x, f^∞⟩ dλ`.
pub fn pair(nu: &YoungTriple, f: &Integrand, mode: RecessionMode<'_>) -> Result<f64> {
    if f.p() != nu.spec.p() {
        return Err(YoungError::GrowthMismatch { label: f.label().into(), expected: nu.spec.p(), found: f.p() });
    }
    if f.target_dim() != nu.spec.target_dim() {
        return Err(YoungError::TargetDim { expected: nu.spec.target_dim(), found: f.target_dim() });
    }
    if let RecessionMode::Explicit(table) = mode {
        if table.len() < nu.registry.len() {
            return Err(YoungError::RecessionLength { expected: nu.registry.len(), found: table.len() });
        }
    }
    let osc: f64 = nu
        .mu
        .atoms()
        .enumerate()
        .map(|(c, (x, m))| match nu.osc.fiber(c) {
            Some(fiber) if m > 0.0 => m * fiber.integrate(|z| f.eval(x, z)),
            _ => 0.0,
        })
        .sum();
    let mut conc = 0.0;
    for ((x, lam), fiber) in nu.conc.atoms().zip(&nu.angle) {
        for (&id, &q) in fiber {
            let rec = match mode {
                RecessionMode::Explicit(table) => table[id],
                RecessionMode::Auto => auto_recession(nu, f, x, id)?,
            };
            conc += lam * q * rec;
        }
    }
    Ok(osc + conc)
}

/// `ν̄ = ⟨ν_x, id⟩ μ + ⟨ν^∞_x, direction⟩ λ`; for `p > 1` only the first term.
pub fn barycentre(nu: &YoungTriple) -> Result<VectorDiscreteMeasure> {
    let d = nu.spec.target_dim();
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for (c, (x, m)) in nu.mu.atoms().enumerate() {
        if let Some(fiber) = nu.osc.fiber(c) {
            let mean = if fiber.is_empty() { vec![0.0; d] } else { fiber.mean()? };
            points.push(x.to_vec());
            weights.push(vecops::scale(&mean, m));
        }
    }
    if nu.spec.p() == 1.0 {
        for ((x, lam), fiber) in nu.conc.atoms().zip(&nu.angle) {
            let mut v = vec![0.0; d];
            for (&id, &q) in fiber {
                vecops::add_scaled_into(&mut v, nu.registry.atom(id).expect("validated id").dir(), lam * q);
            }
            points.push(x.to_vec());
            weights.push(v);
        }
    }
    if points.is_empty() {
        return Ok(VectorDiscreteMeasure::zero(d));
    }
    Ok(VectorDiscreteMeasure::new(points, weights)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquiIntegrability {
    pub flag: bool,
    pub tol: f64,
    /// `(k, sup_j ∫_{|v_j|>k} |v_j| dμ)`.
    pub profile: Vec<(f64, f64)>,
}

pub const DEFAULT_K_GRID: [f64; 3] = [10.0, 100.0, 1000.0];
pub const DEFAULT_TOL_EI: f64 = 0.05;

pub fn is_equiintegrable(seq: &SampledSequence, k_grid: &[f64], tol: f64) -> EquiIntegrability {
    let profile: Vec<(f64, f64)> = k_grid
        .iter()
        .map(|&k| {
            let sup = (0..seq.fields.len()).map(|i| seq.tail_mass(i, k)).fold(0.0, f64::max);
            (k, sup)
        })
        .collect();
    let flag = profile.last().is_none_or(|&(_, t)| t < tol);
    EquiIntegrability { flag, tol, profile }
}

/// `v_j = o_j + c_j` with `o_j = v_j·[|v_j| ≤ k]` at a fixed threshold `k`.
pub fn decompose(seq: &SampledSequence, k: f64) -> (SampledSequence, SampledSequence, f64) {
    let d = seq.target_dim;
    let osc = seq.map(|_, _, v| if vecops::norm(v) <= k { v.to_vec() } else { vec![0.0; d] });
    let conc = seq.map(|_, _, v| if vecops::norm(v) <= k { vec![0.0; d] } else { v.to_vec() });
    (osc, conc, k)
}

pub const DEFAULT_DELTA_TOL: f64 = 0.05;

/// Adds a strongly convergent sequence to an arbitrary one and predicts
/// the resulting triple: translated fibers, summed `λ`, glued angles.
pub fn join(
    vseq: &SampledSequence,
    wseq: &SampledSequence,
    spec: &CompactificationSpec,
    params: EstimateParams,
) -> Result<(SampledSequence, YoungTriple)> {
    let ev = estimate(vseq, spec, params)?;
    let ew = estimate(wseq, spec, params)?;
    let sum = vseq.plus(wseq)?;
    let threshold = 1e-9 * ev.lambda_mass().max(ew.lambda_mass()).max(1.0);
    for (x, a) in ev.conc.atoms().filter(|a| a.1 > threshold) {
        let overlap = ew.conc.atoms().any(|(y, b)| b > threshold && vecops::dist(x, y) <= ev.conc.dedup_tol());
        if overlap && a > threshold {
            return Err(YoungError::NotMutuallySingular);
        }
    }
    let mut shifts = Vec::with_capacity(ev.mu.len());
    for c in 0..ev.mu.len() {
        let fiber = ev.osc.fiber(c).expect("estimated cells carry fibers");
        let max_weight = fiber.weights().iter().fold(0.0f64, |m, &w| m.max(w));
        if max_weight < 1.0 - DEFAULT_DELTA_TOL {
            return Err(YoungError::NotDelta { cell: c, max_weight });
        }
        shifts.push(fiber.mean()?);
    }
    let fibers = (0..ew.mu.len())
        .map(|c| {
            let shift = &shifts[c];
            Some(ew.osc.fiber(c).expect("estimated cells carry fibers").pushforward(|z| vecops::add(z, shift)))
        })
        .collect();
    let osc = ParametrizedMeasure::new(ew.mu.points().to_vec(), fibers)?;
    let mut registry = AtomRegistry::new();
    let mut entries = Vec::new();
    for src in [&ev, &ew] {
        let mut remap = HashMap::new();
        for atom in src.registry.atoms() {
            let top = atom.witness().last().expect("atoms have witnesses");
            remap.insert(atom.id(), registry.classify(top, spec)?);
        }
        for ((x, lam), fiber) in src.conc.atoms().zip(&src.angle) {
            let mut glued = AngleFiber::new();
            for (id, q) in fiber {
                *glued.entry(remap[id]).or_insert(0.0) += q;
            }
            entries.push((x.to_vec(), lam, glued));
        }
    }
    let (conc, angle) = build_conc(ew.mu.dim(), entries)?;
    let predicted = YoungTriple::new(ew.mu.clone(), osc, conc, angle, registry, spec.clone(), params)?;
    Ok((sum, predicted))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RescaleReport {
    /// `μ`-averaged fiber distance, atoms within one bin merged.
    pub fiber_tv: f64,
    pub lambda_gap: f64,
    pub angle_tv: f64,
    pub tol: f64,
    pub pass: bool,
}

/// Compares the triple of `v_j` w.r.t. `μ` with that of `v_j/a` w.r.t. `a·μ`.
pub fn rescale_compare(
    seq: &SampledSequence,
    a: impl Fn(&[f64]) -> f64 + Sync,
    spec: &CompactificationSpec,
    params: EstimateParams,
    tol: f64,
) -> Result<RescaleReport> {
    let rescaled = seq.reweighted(&a)?.map(|_, x, v| vecops::scale(v, 1.0 / a(x)));
    let t1 = estimate(seq, spec, params)?;
    let t2 = estimate(&rescaled, spec, params)?;
    let bin_width = 2.0 / params.bins as f64;
    let mut fiber_tv = 0.0;
    let mut total = 0.0;
    for (c, (x, m)) in t1.mu.atoms().enumerate() {
        let scale = 1.0 / a(x);
        let (Some(f1), Some(f2)) = (t1.osc.fiber(c), t2.osc.fiber(c)) else { continue };
        let p1 = f1.pushforward(|z| transform::to_ball_point(&vecops::scale(z, scale)));
        let p2 = f2.pushforward(transform::to_ball_point);
        fiber_tv += m * p1.tv_distance(&p2, bin_width);
        total += m;
    }
    let fiber_tv = fiber_tv / total;
    let lambda_gap = t1.conc.tv_distance(&t2.conc, t1.conc.dedup_tol());
    let angle_tv = match (t1.lambda_mass(), t2.lambda_mass()) {
        (l1, l2) if l1 > 0.0 && l2 > 0.0 => {
            let s1 = t1.sphere_angle_measure()?.scaled(1.0 / l1)?;
            let s2 = t2.sphere_angle_measure()?.scaled(1.0 / l2)?;
            s1.tv_distance(&s2, 1e-6)
        }
        (l1, l2) if l1 == 0.0 && l2 == 0.0 => 0.0,
        _ => 1.0,
    };
    let pass = fiber_tv <= tol && lambda_gap <= tol && angle_tv <= tol;
    Ok(RescaleReport { fiber_tv, lambda_gap, angle_tv, tol, pass })
}

/// Spatial test function with `sup + Lip ≤ 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SpatialTest {
    Const(f64),
    /// `max(0, r − |x − c|)/(1 + r)`.
    Tent {
        center: Point,
        radius: f64,
    },
}

impl SpatialTest {
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Self::Const(c) => *c,
            Self::Tent { center, radius } => (radius - vecops::dist(x, center)).max(0.0) / (1.0 + radius),
        }
    }
}

/// Test function on the compactification with `sup + Lip ≤ 1` for its metric.
#[derive(Debug, Clone, PartialEq)]
pub enum TargetTest {
    Const(f64),
    /// Half of one ball coordinate.
    Coord(usize),
    Tent {
        center: Point,
        radius: f64,
    },
    /// Generator value times its metric weight.
    Generator(usize),
}

impl TargetTest {
    pub fn eval(&self, p: &CompactPoint) -> f64 {
        match self {
            Self::Const(c) => *c,
            Self::Coord(k) => 0.5 * p.ball[*k],
            Self::Tent { center, radius } => (radius - vecops::dist(&p.ball, center)).max(0.0) / (1.0 + radius),
            Self::Generator(i) => CompactificationSpec::weight(*i) * p.gens[*i],
        }
    }
}

/// Finite family of tensor tests `η ⊗ Ψ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Battery {
    pub spatial: Vec<SpatialTest>,
    pub target: Vec<TargetTest>,
}

impl Battery {
    /// Tents on a 9-point grid per axis of `[0,1]^x_dim` with radii
    /// 1/8, 1/4, 1/2; ball tents around `0`, `±e_k/2`, `±0.9e_k`.
    pub fn standard(x_dim: usize, spec: &CompactificationSpec) -> Self {
        let mut spatial = vec![SpatialTest::Const(0.5)];
        let grid = crate::measure::lebesgue_grid(9, x_dim);
        for radius in [0.125, 0.25, 0.5] {
            for c in grid.points() {
                // Shift midpoints (k+1/2)/9 to nodes k/8.
                let center: Point = c.iter().map(|v| (v * 9.0 - 0.5) / 8.0).collect();
                spatial.push(SpatialTest::Tent { center, radius });
            }
        }
        let d = spec.target_dim();
        let mut target = vec![TargetTest::Const(0.5)];
        target.extend((0..d).map(TargetTest::Coord));
        let mut centers = vec![vec![0.0; d]];
        for k in 0..d {
            for s in [0.5, -0.5, 0.9, -0.9] {
                centers.push(vecops::scale(&vecops::basis(d, k), s));
            }
        }
        for radius in [0.25, 0.5] {
            for c in &centers {
                target.push(TargetTest::Tent { center: c.clone(), radius });
            }
        }
        target.extend((0..spec.generators().len()).map(TargetTest::Generator));
        Self { spatial, target }
    }

    /// Pairings `⟨ν, η ⊗ Φ⟩` with `Φ = (1+|z|)^p Ψ(ẑ)`, indexed `[η][Ψ]`.
    pub fn pairings(&self, nu: &YoungTriple) -> Vec<Vec<f64>> {
        let p = nu.spec.p();
        let nt = self.target.len();
        let mut out = vec![vec![0.0; nt]; self.spatial.len()];
        let mut accumulate = |x: &[f64], psi: &[f64], w: f64| {
            for (row, eta) in out.iter_mut().zip(&self.spatial) {
                let e = eta.eval(x) * w;
                if e != 0.0 {
                    for (o, v) in row.iter_mut().zip(psi) {
                        *o += e * v;
                    }
                }
            }
        };
        for (c, (x, m)) in nu.mu.atoms().enumerate() {
            let Some(fiber) = nu.osc.fiber(c) else { continue };
            let mut psi = vec![0.0; nt];
            for (z, q) in fiber.atoms() {
                let point = CompactPoint::from_raw(z, &nu.spec);
                let weight = q * (1.0 + vecops::norm(z)).powf(p);
                for (acc, t) in psi.iter_mut().zip(&self.target) {
                    *acc += weight * t.eval(&point);
                }
            }
            accumulate(x, &psi, m);
        }
        for ((x, lam), fiber) in nu.conc.atoms().zip(&nu.angle) {
            let mut psi = vec![0.0; nt];
            for (&id, &q) in fiber {
                let point = nu.registry.atom(id).expect("validated id").boundary_point();
                for (acc, t) in psi.iter_mut().zip(&self.target) {
                    *acc += q * t.eval(&point);
                }
            }
            accumulate(x, &psi, lam);
        }
        out
    }
}

/// Largest pairing difference over the battery: a lower bound for the
/// Kantorovich distance of the two triples.
pub fn ym_distance(nu1: &YoungTriple, nu2: &YoungTriple, battery: &Battery) -> Result<f64> {
    if nu1.spec.to_json() != nu2.spec.to_json() {
        return Err(YoungError::SpecMismatch);
    }
    let a = battery.pairings(nu1);
    let b = battery.pairings(nu2);
    Ok(a.iter().flatten().zip(b.iter().flatten()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::lebesgue_grid;
    use crate::transform::catalog;

    fn sphere() -> CompactificationSpec {
        CompactificationSpec::sphere(1)
    }

    fn spike_triple(x0: f64) -> YoungTriple {
        let mu = lebesgue_grid(16, 1);
        let l = VectorDiscreteMeasure::new(vec![vec![x0]], vec![vec![1.0]]).unwrap();
        elementary_measure(&l, &mu, &sphere()).unwrap()
    }

    #[test]
    fn pairing_examples() {
        let nu = spike_triple(0.5);
        assert_eq!(nu.lambda_mass(), 1.0);
        let abs = catalog::abs(1).unwrap();
        let area = catalog::area(1).unwrap();
        assert!((pair(&nu, &abs, RecessionMode::Auto).unwrap() - 1.0).abs() < 1e-9);
        assert!((pair(&nu, &area, RecessionMode::Auto).unwrap() - 2.0).abs() < 1e-9);
        let explicit = vec![0.25; nu.registry().len()];
        assert!((pair(&nu, &abs, RecessionMode::Explicit(&explicit)).unwrap() - 0.25).abs() < 1e-12);
    }

    #[test]
    fn irregular_integrand_is_rejected_on_sphere() {
        let err = pair(&spike_triple(0.5), &catalog::logsin(1).unwrap(), RecessionMode::Auto).unwrap_err();
        assert_eq!(err.to_string(), "integrand not continuous on this compactification");
    }

    #[test]
    fn elementary_pairs_by_quadrature() {
        let mu = lebesgue_grid(1000, 1);
        let v: Vec<Vec<f64>> = mu.points().to_vec();
        let nu = elementary(&v, &mu, &sphere()).unwrap();
        let r = pair(&nu, &catalog::abs(1).unwrap(), RecessionMode::Auto).unwrap();
        assert!((r - 0.5).abs() < 1e-6);
        let b = barycentre(&nu).unwrap();
        assert_eq!(b, VectorDiscreteMeasure::from_density(&mu, &v).unwrap());
    }

    #[test]
    fn vector_measure_with_density_is_elementary() {
        let mu = lebesgue_grid(8, 1);
        let v: Vec<Vec<f64>> = mu.points().iter().map(|x| vec![x[0] * 3.0]).collect();
        let l = VectorDiscreteMeasure::from_density(&mu, &v).unwrap();
        let a = elementary_measure(&l, &mu, &sphere()).unwrap();
        let b = elementary(&v, &mu, &sphere()).unwrap();
        assert_eq!(a.lambda_mass(), 0.0);
        for c in 0..mu.len() {
            let (fa, fb) = (a.osc().fiber(c).unwrap(), b.osc().fiber(c).unwrap());
            assert!(fa.tv_distance(fb, 1e-12) < 1e-12);
        }
    }

    #[test]
    fn embedding_refused_beyond_sphere() {
        let spec = CompactificationSpec::new(1, 1.0, vec![catalog::logsin(1).unwrap()]).unwrap();
        let l = VectorDiscreteMeasure::new(vec![vec![0.5]], vec![vec![1.0]]).unwrap();
        assert!(matches!(elementary_measure(&l, &lebesgue_grid(4, 1), &spec), Err(YoungError::EmbeddingRefused)));
    }

    #[test]
    fn normalization_identity() {
        let nu = spike_triple(0.25);
        let one_plus = Integrand::of_z("1+|z|", 1.0, 1.0, 1, |z| 1.0 + vecops::norm(z)).unwrap();
        let moment: f64 =
            (0..nu.mu().len()).map(|c| nu.mu().weights()[c] * nu.osc().fiber(c).unwrap().integrate(vecops::norm)).sum();
        let r = pair(&nu, &one_plus, RecessionMode::Auto).unwrap();
        assert!((r - (nu.mu().mass() + moment + nu.lambda_mass())).abs() < 1e-9);
    }

    #[test]
    fn constant_sequence_is_recovered_exactly() {
        let seq = SampledSequence::on_unit_cube(16, 4, 1, vec![1, 2, 3], |_, _| vec![0.3]).unwrap();
        let spec = sphere();
        let t = estimate(&seq, &spec, EstimateParams::for_spec(&spec)).unwrap();
        let e = elementary(&vec![vec![0.3]; 16], &seq.cell_measure(), &spec).unwrap();
        assert_eq!(t.lambda_mass(), 0.0);
        assert_eq!(t.osc(), e.osc());
    }

    #[test]
    fn spike_concentrates() {
        let seq = SampledSequence::on_unit_cube(64, 4, 1, vec![256], |j, x| {
            vec![if x[0] < 1.0 / j as f64 { j as f64 } else { 0.0 }]
        })
        .unwrap();
        let spec = sphere().with_params(100.0, 5e-2);
        let t = estimate(&seq, &spec, EstimateParams::for_spec(&spec)).unwrap();
        assert!((t.lambda_mass() - 1.0).abs() < 1e-12);
        assert_eq!(t.registry().len(), 1);
        assert_eq!(t.registry().atoms()[0].dir(), &[1.0]);
        let b = barycentre(&t).unwrap();
        assert!((b.total()[0] - 1.0).abs() < 1e-9);
        let ei = is_equiintegrable(&seq, &[10.0, 100.0], DEFAULT_TOL_EI);
        assert!(!ei.flag);
        assert!(ei.profile.iter().all(|&(_, t)| (t - 1.0).abs() < 1e-9));
        assert!(is_equiintegrable(&seq, &[1000.0], DEFAULT_TOL_EI).flag);
    }

    #[test]
    fn ym_distance_examples() {
        let spec = sphere();
        let mu = lebesgue_grid(32, 1);
        let battery = Battery::standard(1, &spec);
        let zero = elementary(&vec![vec![0.0]; 32], &mu, &spec).unwrap();
        assert_eq!(ym_distance(&zero, &zero, &battery).unwrap(), 0.0);
        let shifted = elementary(&vec![vec![0.01]; 32], &mu, &spec).unwrap();
        let d = ym_distance(&zero, &shifted, &battery).unwrap();
        assert!(d > 0.0 && d <= 0.01 * mu.mass() + 1e-12);
        let d = ym_distance(&spike_triple(0.25), &spike_triple(0.75), &battery).unwrap();
        assert!(d > 0.1);
    }

    #[test]
    fn json_round_trip() {
        let nu = spike_triple(0.5);
        let back = YoungTriple::from_json(&nu.to_json(), catalog::lookup).unwrap();
        assert_eq!(back.to_json(), nu.to_json());
    }
}
