use minilp::{ComparisonOp, OptimizationDirection, Problem};
use proptest::prelude::*;
use ymlab_core::transport::{lip_dual_distance, FiniteMetricSpace};

/// Free-variable formulation: `|φ_i| ≤ s` as two rows, all ordered pairs.
fn oracle(dist: &[Vec<f64>], a: &[f64], b: &[f64]) -> f64 {
    let n = dist.len();
    let mut lp = Problem::new(OptimizationDirection::Maximize);
    let phi: Vec<_> = (0..n).map(|i| lp.add_var(a[i] - b[i], (f64::NEG_INFINITY, f64::INFINITY))).collect();
    let s = lp.add_var(0.0, (0.0, f64::INFINITY));
    let l = lp.add_var(0.0, (0.0, f64::INFINITY));
    for i in 0..n {
        lp.add_constraint([(phi[i], 1.0), (s, -1.0)], ComparisonOp::Le, 0.0);
        lp.add_constraint([(phi[i], -1.0), (s, -1.0)], ComparisonOp::Le, 0.0);
        for j in 0..n {
            if i != j {
                lp.add_constraint([(phi[i], 1.0), (phi[j], -1.0), (l, -dist[i][j])], ComparisonOp::Le, 0.0);
            }
        }
    }
    lp.add_constraint([(s, 1.0), (l, 1.0)], ComparisonOp::Le, 1.0);
    lp.solve().unwrap().objective()
}

fn instance(n: usize) -> impl Strategy<Value = (Vec<Vec<f64>>, Vec<f64>, Vec<f64>)> {
    (
        prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 2), n),
        prop::collection::vec(0.0f64..1.0, n),
        prop::collection::vec(0.0f64..1.0, n),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn matches_independent_oracle((pts, a, b) in instance(8)) {
        let space = FiniteMetricSpace::euclidean(pts);
        let ours = lip_dual_distance(&space, &a, &b).unwrap();
        let theirs = oracle(space.dist(), &a, &b);
        prop_assert!((ours.value - theirs).abs() < 1e-9, "{} vs {}", ours.value, theirs);
        prop_assert!(ours.duality_gap < 1e-9);
    }

    #[test]
    fn symmetric_and_homogeneous((pts, a, b) in instance(8), alpha in 0.1f64..10.0) {
        let space = FiniteMetricSpace::euclidean(pts);
        let ab = lip_dual_distance(&space, &a, &b).unwrap().value;
        let ba = lip_dual_distance(&space, &b, &a).unwrap().value;
        prop_assert!((ab - ba).abs() < 1e-9);
        prop_assert!(ab >= -1e-12);
        let sa: Vec<f64> = a.iter().map(|x| alpha * x).collect();
        let sb: Vec<f64> = b.iter().map(|x| alpha * x).collect();
        let scaled = lip_dual_distance(&space, &sa, &sb).unwrap().value;
        prop_assert!((scaled - alpha * ab).abs() < 1e-9 * (1.0 + alpha));
    }

    #[test]
    fn triangle_inequality(
        (pts, a, b) in instance(8),
        c in prop::collection::vec(0.0f64..1.0, 8),
    ) {
        let space = FiniteMetricSpace::euclidean(pts);
        let ab = lip_dual_distance(&space, &a, &b).unwrap().value;
        let bc = lip_dual_distance(&space, &b, &c).unwrap().value;
        let ac = lip_dual_distance(&space, &a, &c).unwrap().value;
        prop_assert!(ac <= ab + bc + 1e-9);
    }

    #[test]
    fn monotone_under_metric_enlargement((pts, a, b) in instance(8), eps in 0.0f64..2.0) {
        let space = FiniteMetricSpace::euclidean(pts.clone());
        let base = lip_dual_distance(&space, &a, &b).unwrap().value;
        let bigger: Vec<Vec<f64>> = space
            .dist()
            .iter()
            .enumerate()
            .map(|(i, row)| row.iter().enumerate().map(|(j, d)| if i == j { 0.0 } else { d + eps }).collect())
            .collect();
        let enlarged = FiniteMetricSpace::new(pts, bigger).unwrap();
        let refined = lip_dual_distance(&enlarged, &a, &b).unwrap();
        prop_assert!(refined.value >= base - 1e-9);
        prop_assert!((refined.value - oracle(enlarged.dist(), &a, &b)).abs() < 1e-9);
    }
}

#[test]
fn large_instance_uses_constraint_generation() {
    let n = 120;
    let pts: Vec<Vec<f64>> = (0..n).map(|i| vec![(i as f64 * 0.7).sin(), (i as f64 * 1.3).cos()]).collect();
    let a: Vec<f64> = (0..n).map(|i| ((i * 7) % 11) as f64 / 11.0).collect();
    let b: Vec<f64> = (0..n).map(|i| ((i * 5) % 13) as f64 / 13.0).collect();
    let space = FiniteMetricSpace::euclidean(pts);
    let r = lip_dual_distance(&space, &a, &b).unwrap();
    assert!(r.pair_constraints < n * (n - 1));
    assert!((r.value - oracle(space.dist(), &a, &b)).abs() < 1e-8);
    assert!(r.duality_gap < 1e-9);
}
