//! Jensen-type inequality `∫f dν⁰ + ∫f^♯ dν^∞ ≥ f(z)` over a battery.

use serde::{Deserialize, Serialize};
use ymlab_core::compactification::{BoundaryAtom, CompactificationSpec};
use ymlab_core::measure::DiscreteMeasure;
use ymlab_core::transform::{
    catalog, recession_profile, upper_recession, Integrand, RecessionParams, UpperRecessionParams,
};

use crate::envelope::{envelope_integrand, gk_envelope, EnvelopeParams, X_REF};
use crate::integrands::muller_gk;
use crate::{ConvexityError, Result};

pub const DEFAULT_TOL_JENSEN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certification {
    Convex,
    /// Rank-one convex envelope computed on a grid.
    Numeric,
    Unverified,
}

#[derive(Debug, Clone)]
pub struct BatteryEntry {
    pub integrand: Integrand,
    pub certification: Certification,
}

impl BatteryEntry {
    pub fn new(integrand: Integrand, certification: Certification) -> Self {
        Self { integrand, certification }
    }
}

/// Convex integrands on 2×2 matrices.
pub fn convex_battery() -> Result<Vec<BatteryEntry>> {
    let ids = ["abs", "area", "l1", "linf", "affine:0.5;1,-2,0.25,3"];
    ids.iter().map(|id| Ok(BatteryEntry::new(catalog::lookup(id, 4)?, Certification::Convex))).collect()
}

/// Lamination envelope of `g_k` on `[−4k,4k]^4`, extended by `g_k` outside.
pub fn gk_envelope_entry(k: f64, n: usize, params: EnvelopeParams) -> Result<BatteryEntry> {
    let (env, _) = gk_envelope(k, n, params)?;
    let f = envelope_integrand(env, muller_gk(k)?, format!("envelope:muller_gk:{k}"))?;
    Ok(BatteryEntry::new(f, Certification::Numeric))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenEntry {
    pub label: String,
    pub certification: Certification,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JensenReport {
    pub entries: Vec<JensenEntry>,
    pub min_slack: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `f^♯` at a boundary atom: the ray limit when regular, otherwise the
/// sampled upper recession over the atom's class.
fn upper_value(f: &Integrand, atom: &BoundaryAtom, spec: &CompactificationSpec) -> Result<f64> {
    let entry = recession_profile(f, &X_REF, &[atom.dir().to_vec()], &RecessionParams::default())?;
    Ok(match entry[0].f_inf {
        Some(v) => v,
        None => upper_recession(f, &X_REF, atom, spec, &UpperRecessionParams::default()),
    })
}

/// `nu_inf` pairs boundary atoms with their weights.
pub fn jensen_verify(
    nu0: &DiscreteMeasure,
    nu_inf: &[(BoundaryAtom, f64)],
    z: &[f64],
    battery: &[BatteryEntry],
    spec: &CompactificationSpec,
    tol: f64,
) -> Result<JensenReport> {
    if z.len() != 4 {
        return Err(ConvexityError::NotMatrix(z.len()));
    }
    let entries = battery
        .iter()
        .map(|b| {
            let f = &b.integrand;
            if f.p() != 1.0 && !nu_inf.is_empty() {
                return Err(ConvexityError::NeedsLinearGrowth(f.p()));
            }
            let mut lhs = nu0.integrate(|v| f.eval(&X_REF, v));
            for (atom, w) in nu_inf {
                lhs += w * upper_value(f, atom, spec)?;
            }
            let rhs = f.eval(&X_REF, z);
            Ok(JensenEntry { label: f.label().to_string(), certification: b.certification, lhs, rhs, slack: lhs - rhs })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_slack = entries.iter().map(|e| e.slack).fold(f64::INFINITY, f64::min);
    Ok(JensenReport { pass: min_slack >= -tol, entries, min_slack, tol })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dirac(z: Vec<f64>) -> DiscreteMeasure {
        DiscreteMeasure::dirac(z, 1.0).unwrap()
    }

    #[test]
    fn dirac_at_z_has_zero_slack() {
        let spec = CompactificationSpec::sphere(4);
        let z = vec![1.5, -0.5, 2.0, 0.25];
        let r =
            jensen_verify(&dirac(z.clone()), &[], &z, &convex_battery().unwrap(), &spec, DEFAULT_TOL_JENSEN).unwrap();
        assert!(r.pass);
        assert!(r.entries.iter().all(|e| e.slack == 0.0));
    }

    #[test]
    fn laminate_on_rank_one_segment() {
        let spec = CompactificationSpec::sphere(4);
        let nu0 = DiscreteMeasure::new(vec![vec![0.0; 4], vec![1.0, 0.0, 0.0, 0.0]], vec![0.5, 0.5]).unwrap();
        let r = jensen_verify(&nu0, &[], &[0.5, 0.0, 0.0, 0.0], &convex_battery().unwrap(), &spec, DEFAULT_TOL_JENSEN)
            .unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn pure_concentration_abs_equality() {
        let spec = CompactificationSpec::sphere(4);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let ab = vec![s, s, 0.0, 0.0];
        let atom = BoundaryAtom::along(0, &ab, &spec);
        let abs = BatteryEntry::new(catalog::abs(4).unwrap(), Certification::Convex);
        let r = jensen_verify(&dirac(vec![0.0; 4]), &[(atom, 1.0)], &ab, &[abs], &spec, DEFAULT_TOL_JENSEN).unwrap();
        assert!(r.min_slack.abs() <= 1e-9, "{r:?}");
    }
}
