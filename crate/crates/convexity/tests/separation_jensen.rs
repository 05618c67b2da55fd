use proptest::prelude::*;
use ymlab_convexity::diagonal::{diagonal_incomparable, hits};
use ymlab_convexity::envelope::EnvelopeParams;
use ymlab_convexity::integrands::{g_lambda, pow3, IndexSet};
use ymlab_convexity::jensen::*;
use ymlab_convexity::separation::separation;
use ymlab_core::compactification::{BoundaryAtom, CompactificationSpec};
use ymlab_core::measure::DiscreteMeasure;

fn battery() -> Vec<BatteryEntry> {
    let mut b = convex_battery().unwrap();
    b.push(gk_envelope_entry(1.0, 17, EnvelopeParams::default()).unwrap());
    b
}

#[test]
fn jensen_holds_on_homogeneous_inputs_with_envelope() {
    let spec = CompactificationSpec::sphere(4);
    let battery = battery();
    let step = 0.5;
    let dirac = |z: Vec<f64>| DiscreteMeasure::dirac(z, 1.0).unwrap();
    let mut reports = Vec::new();
    let z = vec![1.5, -0.5, 1.0, 0.0];
    reports.push(jensen_verify(&dirac(z.clone()), &[], &z, &battery, &spec, DEFAULT_TOL_JENSEN).unwrap());
    for w in [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0]] {
        let a: Vec<f64> = w.iter().map(|v| -2.0 * step * v).collect();
        let b: Vec<f64> = w.iter().map(|v| 4.0 * step * v).collect();
        let nu0 = DiscreteMeasure::new(vec![a, b], vec![2.0 / 3.0, 1.0 / 3.0]).unwrap();
        reports.push(jensen_verify(&nu0, &[], &[0.0; 4], &battery, &spec, DEFAULT_TOL_JENSEN).unwrap());
        let z: Vec<f64> = w.iter().map(|v| 3.0 * step * v).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        let atom = BoundaryAtom::along(0, &z, &spec);
        reports.push(
            jensen_verify(&dirac(vec![0.0; 4]), &[(atom, norm)], &z, &battery, &spec, DEFAULT_TOL_JENSEN).unwrap(),
        );
    }
    for r in &reports {
        assert!(r.pass, "{r:?}");
        assert!(r.entries.iter().any(|e| e.certification == Certification::Numeric));
    }
}

#[test]
fn diagonal_sets_separate_from_family() {
    let family: Vec<IndexSet> =
        [3u32, 5, 7].iter().map(|&m| IndexSet::from_fn(32, |j| (j * m + 1) % 4 < 2).unwrap()).collect();
    let s = diagonal_incomparable(&family, 32).unwrap();
    for a in &family {
        let (inside, outside) = hits(&s, a);
        assert!(inside >= s.len() / 6 && outside >= s.len() / 6);
        let r = separation(&s, a, 2..=6, EnvelopeParams::default()).unwrap();
        assert!(r.value > 0.0, "{:?} {:?} {r:?}", s.members(), a.members());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_lambda_zero_set_is_exact(members in proptest::collection::btree_set(0u32..=32, 1..10)) {
        let set = IndexSet::new(members.into_iter().collect(), 32).unwrap();
        let g = g_lambda(&set).unwrap();
        for j in 0..=32 {
            let s = pow3(j).unwrap();
            prop_assert_eq!(g.eval(&[0.5, 0.5], &[s, 0.0, 0.0, s]) == 0.0, set.contains(j));
        }
    }

    #[test]
    fn diagonal_meets_quota(masks in proptest::collection::vec(proptest::collection::vec(any::<bool>(), 201), 1..4)) {
        prop_assume!(masks.iter().all(|m| m.iter().any(|&b| b) && m.iter().any(|&b| !b)));
        let family: Vec<IndexSet> = masks
            .iter()
            .map(|m| IndexSet::from_fn(200, |j| m[j as usize]).unwrap())
            .collect();
        let s = diagonal_incomparable(&family, 200).unwrap();
        let quota = s.len() / (2 * family.len());
        for a in &family {
            let (inside, outside) = hits(&s, a);
            prop_assert!(inside >= quota && outside >= quota);
        }
    }
}
