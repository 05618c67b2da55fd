use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use crate::envelope::{lamination_envelope, rank_one_directions, EnvelopeParams, MatrixGrid, X_REF};
use crate::integrands::{g_lambda, pow3, IndexSet};
use crate::Result;

/// Nodes per axis of the grid localized around `3^j·1`.
pub const LOCAL_NODES: usize = 9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationEntry {
    pub j: u32,
    pub integrand_l: f64,
    pub integrand_g: f64,
    pub envelope_l: f64,
    pub envelope_g: f64,
    /// `|R̂g_L − R̂g_G| / 3^j` at `3^j·1`.
    pub gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    pub entries: Vec<SeparationEntry>,
    pub value: f64,
    pub argmax: Option<u32>,
}

/// Envelope value of `g_set` at `3^j·1` on the grid `3^j·1 + [−3^j, 3^j]^4`.
fn local_envelope(set: &IndexSet, j: u32, n: usize, params: EnvelopeParams) -> Result<(f64, f64)> {
    let s = pow3(j)?;
    let g = g_lambda(set)?;
    let center = [s, 0.0, 0.0, s];
    let grid = MatrixGrid::sample(&g, center, s, n)?;
    let (env, _) = lamination_envelope(&grid, &rank_one_directions(), params)?;
    Ok((g.eval(&X_REF, &center), env.values()[env.center_index()]))
}

pub fn separation(
    l: &IndexSet,
    g: &IndexSet,
    j_range: RangeInclusive<u32>,
    params: EnvelopeParams,
) -> Result<SeparationReport> {
    let mut entries = Vec::new();
    for j in j_range {
        pow3(j)?;
        let (integrand_l, envelope_l) = local_envelope(l, j, LOCAL_NODES, params)?;
        let (integrand_g, envelope_g) = local_envelope(g, j, LOCAL_NODES, params)?;
        let gap = (envelope_l - envelope_g).abs() / pow3(j)?;
        entries.push(SeparationEntry { j, integrand_l, integrand_g, envelope_l, envelope_g, gap });
    }
    let best = entries.iter().max_by(|a, b| a.gap.total_cmp(&b.gap));
    Ok(SeparationReport {
        value: best.map_or(0.0, |e| e.gap),
        argmax: best.filter(|e| e.gap > 0.0).map(|e| e.j),
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ConvexityError;

    #[test]
    fn identical_sets_do_not_separate() {
        let l = IndexSet::new(vec![2, 4], 10).unwrap();
        let r = separation(&l, &l, 1..=5, EnvelopeParams::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.argmax, None);
    }

    #[test]
    fn differing_index_separates() {
        let l = IndexSet::new(vec![2, 4], 10).unwrap();
        let g = IndexSet::new(vec![2, 3], 10).unwrap();
        let r = separation(&l, &g, 2..=4, EnvelopeParams::default()).unwrap();
        let at3 = &r.entries[1];
        assert_eq!((at3.integrand_l, at3.integrand_g), (36.0, 0.0));
        assert!(at3.gap > 0.0);
        assert!(at3.envelope_l <= at3.integrand_l);
        let shared = &r.entries[0];
        assert_eq!((shared.envelope_l, shared.envelope_g, shared.gap), (0.0, 0.0, 0.0));
    }

    #[test]
    fn guard_rejects_large_exponents() {
        let l = IndexSet::new(vec![1], 40).unwrap();
        let err = separation(&l, &l, 33..=33, EnvelopeParams::default()).unwrap_err();
        assert!(matches!(err, ConvexityError::ExponentOverflow(33)));
    }
}
