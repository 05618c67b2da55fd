use proptest::prelude::*;
use ymlab_core::compactification::{metric_d, CompactificationSpec};
use ymlab_core::measure::{
    assemble, disintegrate, lebesgue_grid, radon_nikodym, tv_pair, DiscreteMeasure, ProductMeasure,
    VectorDiscreteMeasure,
};
use ymlab_core::transform::{
    catalog, from_ball_point, perspective, recession_profile, to_ball_point, Integrand, RecessionParams,
};
use ymlab_core::young::{elementary_measure, pair, RecessionMode};

fn discrete(dim: usize, max_atoms: usize) -> impl Strategy<Value = DiscreteMeasure> {
    proptest::collection::vec((proptest::collection::vec(-5.0f64..5.0, dim), 0.01f64..2.0), 1..max_atoms).prop_map(
        |atoms| {
            let (p, w) = atoms.into_iter().unzip();
            DiscreteMeasure::new(p, w).unwrap()
        },
    )
}

/// Atoms on a coarse `X` lattice so that fibers have several members.
fn product() -> impl Strategy<Value = ProductMeasure> {
    proptest::collection::vec((0u8..4, -3.0f64..3.0, 0.01f64..1.0), 1..24).prop_map(|atoms| {
        let (p, w) = atoms.into_iter().map(|(x, z, w)| (vec![x as f64 / 4.0, z], w)).unzip();
        ProductMeasure::new(DiscreteMeasure::new(p, w).unwrap(), 1).unwrap()
    })
}

fn ball_point() -> impl Strategy<Value = Vec<f64>> {
    (0.0f64..3.0, 0.0f64..std::f64::consts::TAU).prop_map(|(decades, t)| {
        let r = 1.0 - 10f64.powf(-decades);
        vec![r * t.cos(), r * t.sin()]
    })
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn disintegration_round_trip(pm in product()) {
        let (marginal, fibers) = disintegrate(&pm).unwrap();
        let back = assemble(&marginal, &fibers).unwrap();
        prop_assert_eq!(back.measure().points(), pm.measure().points());
        for (a, b) in back.measure().weights().iter().zip(pm.measure().weights()) {
            prop_assert!((a - b).abs() <= 4.0 * f64::EPSILON * b);
        }
        let projected = pm.x_marginal();
        prop_assert_eq!(marginal.points(), projected.points());
    }

    #[test]
    fn pushforward_preserves_mass(m in discrete(2, 16), a in -2.0f64..2.0) {
        let image = m.pushforward(|p| vec![(a * p[0]).round(), p[1].abs()]);
        prop_assert!((image.mass() - m.mass()).abs() <= 1e-12 * m.mass().max(1.0));
    }

    #[test]
    fn radon_nikodym_reconstructs(dens in proptest::collection::vec(-3.0f64..3.0, 8), sing in 0.1f64..5.0) {
        let mu = lebesgue_grid(8, 1);
        let density: Vec<Vec<f64>> = dens.iter().map(|&d| vec![d]).collect();
        let ac = VectorDiscreteMeasure::from_density(&mu, &density).unwrap();
        let mut points: Vec<Vec<f64>> = ac.atoms().map(|(p, _)| p.to_vec()).collect();
        let mut values: Vec<Vec<f64>> = ac.atoms().map(|(_, v)| v.to_vec()).collect();
        points.push(vec![0.5]);
        values.push(vec![sing]);
        let l = VectorDiscreteMeasure::new(points, values).unwrap();
        let split = radon_nikodym(&l, &mu, 1e-6);
        for (i, (p, w)) in mu.atoms().enumerate() {
            let (_, v) = l.atoms().find(|(q, _)| *q == p).unwrap();
            let g = split.density[i].first().copied().unwrap_or(0.0);
            prop_assert!((g * w - v[0]).abs() <= 1e-15 * v[0].abs().max(1.0));
        }
        prop_assert_eq!(split.singular.len(), 1);
        prop_assert_eq!(split.singular.total_variation(), sing);
    }

    #[test]
    fn tv_pair_zero_and_monotone(m in discrete(1, 12), extra in 0.0f64..3.0) {
        let zero = VectorDiscreteMeasure::zero(1);
        prop_assert!((tv_pair(&zero, &m) - m.mass()).abs() <= 1e-12 * m.mass());
        let bump = VectorDiscreteMeasure::new(vec![vec![9.5]], vec![vec![extra]]).unwrap();
        prop_assert!(tv_pair(&bump, &m) >= tv_pair(&zero, &m));
    }

    #[test]
    fn measure_json_round_trip(m in discrete(3, 10)) {
        prop_assert_eq!(DiscreteMeasure::from_json(&m.to_json()).unwrap(), m);
    }

    #[test]
    fn ball_map_is_inverted(zh in ball_point()) {
        let z = from_ball_point(&zh).unwrap();
        let back = from_ball_point(&to_ball_point(&z)).unwrap();
        let err: Vec<f64> = back.iter().zip(&z).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&err) <= 1e-12 * (1.0 + norm(&z)));
        let err: Vec<f64> = to_ball_point(&z).iter().zip(&zh).map(|(a, b)| a - b).collect();
        prop_assert!(norm(&err) <= 1e-12);
    }

    #[test]
    fn metric_is_symmetric_and_triangular(a in ball_point(), b in ball_point(), c in ball_point()) {
        let spec = CompactificationSpec::sphere(2);
        let d = |u: &[f64], v: &[f64]| metric_d(u, v, &spec).unwrap();
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
    }

    #[test]
    fn pairing_is_linear(
        dens in proptest::collection::vec(-3.0f64..3.0, 16),
        sing in 0.1f64..4.0,
        alpha in -2.0f64..2.0,
        beta in -2.0f64..2.0,
    ) {
        let spec = CompactificationSpec::sphere(1);
        let mu = lebesgue_grid(16, 1);
        let density: Vec<Vec<f64>> = dens.iter().map(|&d| vec![d]).collect();
        let ac = VectorDiscreteMeasure::from_density(&mu, &density).unwrap();
        let mut points: Vec<Vec<f64>> = ac.atoms().map(|(p, _)| p.to_vec()).collect();
        let mut values: Vec<Vec<f64>> = ac.atoms().map(|(_, v)| v.to_vec()).collect();
        points.push(vec![0.5]);
        values.push(vec![-sing]);
        let nu = elementary_measure(&VectorDiscreteMeasure::new(points, values).unwrap(), &mu, &spec).unwrap();
        let (f, g) = (catalog::area(1).unwrap(), catalog::abs(1).unwrap());
        let h = Integrand::combine(alpha, &f, beta, &g).unwrap();
        let p = |f: &Integrand| pair(&nu, f, RecessionMode::Auto).unwrap();
        let scale = 1.0 + p(&f).abs() + p(&g).abs();
        prop_assert!((p(&h) - alpha * p(&f) - beta * p(&g)).abs() <= 1e-9 * scale);
    }
}

#[test]
fn homogeneous_recession_is_exact() {
    let f = catalog::abs(2).unwrap();
    let dirs: Vec<Vec<f64>> = (0..16)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / 16.0;
            vec![t.cos(), t.sin()]
        })
        .collect();
    let profile = recession_profile(&f, &[0.5, 0.5], &dirs, &RecessionParams::default()).unwrap();
    for (e, entry) in dirs.iter().zip(&profile) {
        assert!(entry.regular);
        assert_eq!(entry.f_inf, Some(f.eval(&[0.5, 0.5], e)));
    }
}

#[test]
fn perspective_at_unit_time_is_the_integrand() {
    let f = catalog::area(2).unwrap();
    let pf = perspective(&f).unwrap();
    for z in [[0.0, 0.0], [1.5, -2.0], [1e3, 7.0]] {
        assert_eq!(pf.eval(&[0.5, 0.5], &z, 1.0), f.eval(&[0.5, 0.5], &z));
    }
}
