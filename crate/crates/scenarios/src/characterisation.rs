//! Checks a one-dimensional triple against the gradient of a piecewise
//! affine function with jumps.

use serde::{Deserialize, Serialize};
use ymlab_core::compactification::{AtomRegistry, CompactificationSpec};
use ymlab_core::measure::{lebesgue_grid, DiscreteMeasure, ParametrizedMeasure, VectorDiscreteMeasure};
use ymlab_core::transform::{recession_profile, Integrand, RecessionParams};
use ymlab_core::young::{barycentre, elementary_measure, AngleFiber, EstimateParams, YoungError, YoungTriple};

use crate::config::ScenarioConfig;
use crate::gallery::lookup_integrand;
use crate::report::Report;
use crate::{Result, ScenarioError};

/// `u' = slopes[i]` on `(breaks[i], breaks[i+1])`, plus jumps `[position, size]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseAffine {
    pub breaks: Vec<f64>,
    pub slopes: Vec<f64>,
    #[serde(default)]
    pub jumps: Vec<[f64; 2]>,
}

impl PiecewiseAffine {
    pub fn new(breaks: Vec<f64>, slopes: Vec<f64>, jumps: Vec<[f64; 2]>) -> Result<Self> {
        let u = Self { breaks, slopes, jumps };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ScenarioError::Invalid(format!("piecewise affine: {m}")));
        if self.breaks.first() != Some(&0.0) || self.breaks.last() != Some(&1.0) {
            return bad("breaks must run from 0 to 1");
        }
        if self.breaks.windows(2).any(|w| w[0] >= w[1]) {
            return bad("breaks must increase strictly");
        }
        if self.slopes.len() + 1 != self.breaks.len() {
            return bad("one slope per segment");
        }
        if self.jumps.iter().any(|j| !(j[0] > 0.0 && j[0] < 1.0)) {
            return bad("jumps must lie inside (0, 1)");
        }
        if self.slopes.iter().chain(self.jumps.iter().map(|j| &j[1])).any(|v| !v.is_finite()) {
            return bad("non-finite value");
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let u: Self = serde_json::from_str(s)?;
        u.validate()?;
        Ok(u)
    }

    pub fn slope_at(&self, x: f64) -> f64 {
        let k = self.breaks.partition_point(|&b| b <= x).clamp(1, self.slopes.len());
        self.slopes[k - 1]
    }

    /// `Du((0, y))`.
    pub fn cumulative(&self, y: f64) -> f64 {
        let ac: f64 = self.breaks.windows(2).zip(&self.slopes).map(|(w, s)| s * (y.min(w[1]) - w[0]).max(0.0)).sum();
        ac + self.jumps.iter().filter(|j| j[0] < y).map(|j| j[1]).sum::<f64>()
    }

    /// `Du` with the absolutely continuous part lumped onto the atoms of `mu`.
    pub fn derivative(&self, mu: &DiscreteMeasure) -> Result<VectorDiscreteMeasure> {
        let mut points: Vec<Vec<f64>> = mu.points().to_vec();
        let mut weights: Vec<Vec<f64>> = mu.atoms().map(|(x, w)| vec![w * self.slope_at(x[0])]).collect();
        for j in &self.jumps {
            points.push(vec![j[0]]);
            weights.push(vec![j[1]]);
        }
        Ok(VectorDiscreteMeasure::new(points, weights)?)
    }
}

/// `(f^∞(+1), f^∞(−1))`.
fn recession_pair(f: &Integrand) -> Result<(f64, f64)> {
    let entries = recession_profile(f, &[0.5], &[vec![1.0], vec![-1.0]], &RecessionParams::default())?;
    let value = |k: usize| {
        entries[k].f_inf.ok_or_else(|| {
            ScenarioError::Invalid(format!("'{}' has no recession limit along {:?}", f.label(), entries[k].direction))
        })
    };
    Ok((value(0)?, value(1)?))
}

/// Checks finiteness, the barycentre identity and, for every (convex)
/// integrand of `battery`, the pointwise Jensen inequalities: on cells
/// without jumps with `λ` read as a density, on cells with jumps with
/// `λ` read as the singular part.
pub fn verify_characterisation(
    nu: &YoungTriple,
    u: &PiecewiseAffine,
    battery: &[Integrand],
    tol: f64,
) -> Result<Report> {
    let mut report = Report::new("characterisation");
    if nu.spec().target_dim() != 1 || nu.mu().dim() != 1 {
        return Err(ScenarioError::Invalid("only scalar fields on an interval are supported".into()));
    }
    u.validate()?;
    let boundary: f64 = nu.conc().atoms().filter(|(x, _)| x[0] <= 1e-12 || x[0] >= 1.0 - 1e-12).map(|(_, w)| w).sum();
    if boundary > tol {
        return Err(ScenarioError::BoundaryMass(boundary));
    }

    let finite = nu.lambda_mass().is_finite()
        && nu.osc().fibers().iter().flatten().all(|f| f.integrate(|z| z[0].abs()).is_finite());
    report.holds("finite", finite);

    let centers: Vec<f64> = nu.mu().points().iter().map(|x| x[0]).collect();
    let mut edges = vec![0.0];
    edges.extend(centers.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    edges.push(1.0);
    let cell_of = |y: f64| edges.partition_point(|&e| e <= y).clamp(1, centers.len()) - 1;

    let bary = barycentre(nu)?;
    let deviation = edges[1..edges.len() - 1]
        .iter()
        .map(|&e| {
            let b: f64 = bary.atoms().filter(|(x, _)| x[0] < e).map(|(_, v)| v[0]).sum();
            (b - u.cumulative(e)).abs()
        })
        .fold(0.0, f64::max);
    report.at_most("barycentre", deviation, tol);

    let n = centers.len();
    let mut lambda = vec![0.0; n];
    let mut up_share = vec![0.0; n];
    for ((x, w), fiber) in nu.conc().atoms().zip(nu.angle()) {
        let c = cell_of(x[0]);
        let up: f64 = fiber
            .iter()
            .filter(|(id, _)| nu.registry().atom(**id).is_some_and(|a| a.dir()[0] > 0.0))
            .map(|(_, q)| q)
            .sum();
        lambda[c] += w;
        up_share[c] += w * up;
    }
    let mut jump = vec![0.0; n];
    let mut has_jump = vec![false; n];
    for j in &u.jumps {
        let c = cell_of(j[0]);
        jump[c] += j[1];
        has_jump[c] = true;
    }

    let (mut slack_ac, mut slack_sing) = (f64::INFINITY, f64::INFINITY);
    for f in battery {
        let (rec_up, rec_down) = recession_pair(f)?;
        for (c, (x, m)) in nu.mu().atoms().enumerate() {
            let Some(fiber) = nu.osc().fiber(c) else { continue };
            let osc = fiber.integrate(|z| f.eval(x, z));
            let conc = up_share[c] * rec_up + (lambda[c] - up_share[c]) * rec_down;
            let grad = f.eval(x, &[u.slope_at(x[0])]);
            if has_jump[c] {
                let polar = if jump[c] >= 0.0 { rec_up } else { rec_down };
                let s = m * (osc - grad) + conc - polar * jump[c].abs();
                slack_sing = slack_sing.min(s);
            } else if m > 0.0 {
                slack_ac = slack_ac.min(osc + conc / m - grad);
            }
        }
    }
    let finite_or_zero = |s: f64| if s.is_finite() { s } else { 0.0 };
    report.at_least("jensen_absolutely_continuous", finite_or_zero(slack_ac), -tol);
    report.at_least("jensen_singular", finite_or_zero(slack_sing), -tol);
    if !slack_sing.is_finite() {
        report.note("no jump cells");
    }
    Ok(report)
}

fn two_point_fibers(mu: &DiscreteMeasure, a: f64, b: f64) -> Result<ParametrizedMeasure> {
    let fiber = DiscreteMeasure::new(vec![vec![a], vec![b]], vec![0.5, 0.5])?;
    Ok(ParametrizedMeasure::new(mu.points().to_vec(), vec![Some(fiber); mu.len()])?)
}

fn laminate(mu: &DiscreteMeasure, spec: &CompactificationSpec, a: f64, b: f64) -> Result<YoungTriple> {
    Ok(YoungTriple::new(
        mu.clone(),
        two_point_fibers(mu, a, b)?,
        DiscreteMeasure::zero(1),
        Vec::new(),
        AtomRegistry::new(),
        spec.clone(),
        EstimateParams::for_spec(spec),
    )?)
}

pub fn characterisation(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("characterisation");
    let mu = lebesgue_grid(cfg.resolution, 1);
    let spec = CompactificationSpec::sphere(1);
    let battery = cfg.battery.iter().map(|id| lookup_integrand(id, 1)).collect::<Result<Vec<_>>>()?;

    let u = PiecewiseAffine::new(vec![0.0, 0.5, 1.0], vec![1.0, -2.0], vec![[0.3, 1.5], [0.7, -0.5]])?;
    let elementary = elementary_measure(&u.derivative(&mu)?, &mu, &spec)?;
    let r = verify_characterisation(&elementary, &u, &battery, cfg.tol)?;
    report.holds("elementary_passes", r.pass());
    report.absorb("elementary", r);

    let ramp = PiecewiseAffine::new(vec![0.0, 1.0], vec![1.0], Vec::new())?;
    let r = verify_characterisation(&laminate(&mu, &spec, -1.0, 3.0)?, &ramp, &battery, cfg.tol)?;
    report.holds("laminate_passes", r.pass());
    report.absorb("laminate", r);

    let r = verify_characterisation(&laminate(&mu, &spec, -1.0, 4.0)?, &ramp, &battery, cfg.tol)?;
    let barycentre_failed = r.check("barycentre").is_some_and(|c| !c.pass);
    report.holds("corrupted_barycentre_detected", barycentre_failed);

    let mut registry = AtomRegistry::new();
    let id = registry.push_along(&[1.0], &spec);
    let fibers =
        ParametrizedMeasure::new(mu.points().to_vec(), vec![Some(DiscreteMeasure::dirac(vec![0.0], 1.0)?); mu.len()])?;
    let edge = YoungTriple::new(
        mu.clone(),
        fibers,
        DiscreteMeasure::dirac(vec![0.0], 1.0)?,
        vec![AngleFiber::from([(id, 1.0)])],
        registry,
        spec.clone(),
        EstimateParams::for_spec(&spec),
    )
    .map_err(|e: YoungError| ScenarioError::from(e))?;
    let rejected =
        matches!(verify_characterisation(&edge, &ramp, &battery, cfg.tol), Err(ScenarioError::BoundaryMass(_)));
    report.holds("boundary_mass_rejected", rejected);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cumulative_and_slopes() {
        let u = PiecewiseAffine::new(vec![0.0, 0.5, 1.0], vec![1.0, -2.0], vec![[0.3, 1.5]]).unwrap();
        assert_eq!(u.slope_at(0.2), 1.0);
        assert_eq!(u.slope_at(0.75), -2.0);
        assert_eq!(u.slope_at(1.0), -2.0);
        assert!((u.cumulative(0.25) - 0.25).abs() < 1e-15);
        assert!((u.cumulative(0.75) - (0.5 + 1.5 - 0.5)).abs() < 1e-15);
    }

    #[test]
    fn validation() {
        assert!(PiecewiseAffine::new(vec![0.0, 1.0], vec![1.0, 2.0], vec![]).is_err());
        assert!(PiecewiseAffine::new(vec![0.1, 1.0], vec![1.0], vec![]).is_err());
        assert!(PiecewiseAffine::new(vec![0.0, 1.0], vec![1.0], vec![[1.0, 2.0]]).is_err());
        let json = r#"{"breaks":[0,1],"slopes":[2]}"#;
        assert_eq!(PiecewiseAffine::from_json(json).unwrap().slopes, vec![2.0]);
    }
}
