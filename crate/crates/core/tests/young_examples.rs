use ymlab_core::compactification::CompactificationSpec;
use ymlab_core::measure::DiscreteMeasure;
use ymlab_core::transform::catalog;
use ymlab_core::young::*;

fn square_wave(j: usize, x: f64) -> f64 {
    (2.0 * std::f64::consts::PI * j as f64 * x).sin().signum()
}

fn spike(j: usize, x: f64) -> f64 {
    if x < 1.0 / j as f64 {
        j as f64
    } else {
        0.0
    }
}

fn spec(mag_min: f64) -> CompactificationSpec {
    CompactificationSpec::sphere(1).with_params(mag_min, 5e-2)
}

fn two_point() -> DiscreteMeasure {
    DiscreteMeasure::new(vec![vec![-1.0], vec![1.0]], vec![0.5, 0.5]).unwrap()
}

fn oscillation(cells: usize, labels: Vec<usize>) -> SampledSequence {
    SampledSequence::on_unit_cube(cells, 8, 1, labels, |j, x| vec![square_wave(j, x[0])]).unwrap()
}

fn mean_fiber_tv(t: &YoungTriple, target: &DiscreteMeasure, tol: f64) -> f64 {
    (0..t.mu().len()).map(|c| t.mu().weights()[c] * t.osc().fiber(c).unwrap().tv_distance(target, tol)).sum::<f64>()
        / t.mu().mass()
}

#[test]
fn oscillation_fibers_split_evenly() {
    let s = spec(1e3);
    let t = estimate(&oscillation(128, (64..=128).collect()), &s, EstimateParams::for_spec(&s)).unwrap();
    assert!(mean_fiber_tv(&t, &two_point(), 1e-9) <= 0.05);
    assert_eq!(t.lambda_mass(), 0.0);
    let b = barycentre(&t).unwrap();
    assert!(b.total_variation() < 0.05);
}

#[test]
fn spike_sequence_concentrates_at_origin() {
    let s = spec(32.0);
    let labels: Vec<usize> = (6..=10).map(|k| 1 << k).collect();
    let seq = SampledSequence::on_unit_cube(1024, 1, 1, labels, |j, x| vec![spike(j, x[0])]).unwrap();
    let t = estimate(&seq, &s, EstimateParams::for_spec(&s)).unwrap();
    assert!((t.lambda_mass() - 1.0).abs() < 1e-12);
    assert!(t.conc().points().iter().all(|x| x[0] < 1.0 / 64.0));
    let weights = t.atom_weights();
    assert_eq!(weights.len(), 1);
    let id = *weights.keys().next().unwrap();
    assert_eq!(t.registry().atom(id).unwrap().dir(), &[1.0]);
    let zero = DiscreteMeasure::dirac(vec![0.0], 1.0).unwrap();
    assert!(mean_fiber_tv(&t, &zero, 1e-9) < 0.05);
    let area = pair(&t, &catalog::area(1).unwrap(), RecessionMode::Auto).unwrap();
    assert!((area - 2.0).abs() < 0.05);
}

#[test]
fn decomposition_splits_mixed_sequence() {
    let s = spec(100.0);
    let params = EstimateParams::for_spec(&s);
    let seq =
        SampledSequence::on_unit_cube(256, 4, 1, vec![512, 1024], |j, x| vec![square_wave(j, x[0]) + spike(j, x[0])])
            .unwrap();
    let (o, c, k) = decompose(&seq, params.r_cut);
    assert_eq!(k, 100.0);
    assert!(is_equiintegrable(&o, &DEFAULT_K_GRID, DEFAULT_TOL_EI).flag);
    let (tm, to, tc) =
        (estimate(&seq, &s, params).unwrap(), estimate(&o, &s, params).unwrap(), estimate(&c, &s, params).unwrap());
    assert_eq!(to.lambda_mass(), 0.0);
    assert!((tc.lambda_mass() - tm.lambda_mass()).abs() < 1e-12);
    let zero = DiscreteMeasure::dirac(vec![0.0], 1.0).unwrap();
    assert!(mean_fiber_tv(&tc, &zero, 1e-9) < 0.05);
    let abs = catalog::abs(1).unwrap();
    let whole = pair(&tm, &abs, RecessionMode::Auto).unwrap();
    let parts = pair(&to, &abs, RecessionMode::Auto).unwrap() + pair(&tc, &abs, RecessionMode::Auto).unwrap();
    assert!((whole - parts).abs() <= 0.05 * whole);
    assert!((whole - 2.0).abs() < 0.05);
    let (_, c0, _) = decompose(&oscillation(64, vec![64]), 100.0);
    assert!(c0.fields().iter().flatten().all(|v| v[0] == 0.0));
}

#[test]
fn join_translates_fibers() {
    let s = spec(100.0);
    let params = EstimateParams::for_spec(&s);
    let labels = vec![256, 512];
    let v = SampledSequence::on_unit_cube(128, 8, 1, labels.clone(), |j, _| vec![1.0 + 1.0 / j as f64]).unwrap();
    let w = oscillation(128, labels);
    let (sum, predicted) = join(&v, &w, &s, params).unwrap();
    let target = DiscreteMeasure::new(vec![vec![0.0], vec![2.0]], vec![0.5, 0.5]).unwrap();
    assert!(mean_fiber_tv(&predicted, &target, 1e-2) < 0.05);
    let observed = estimate(&sum, &s, params).unwrap();
    assert!(ym_distance(&observed, &predicted, &Battery::standard(1, &s)).unwrap() <= 0.05);
}

#[test]
fn join_glues_separate_spikes() {
    let s = spec(100.0);
    let params = EstimateParams::for_spec(&s);
    let labels = vec![512, 1024];
    let at = |x0: f64, sign: f64| {
        move |j: usize, x: &[f64]| {
            vec![if (0.0..1.0 / j as f64).contains(&(x[0] - x0)) { sign * j as f64 } else { 0.0 }]
        }
    };
    let v = SampledSequence::on_unit_cube(128, 8, 1, labels.clone(), at(0.25, 1.0)).unwrap();
    let w = SampledSequence::on_unit_cube(128, 8, 1, labels.clone(), at(0.75, -1.0)).unwrap();
    let (sum, predicted) = join(&v, &w, &s, params).unwrap();
    assert!((predicted.lambda_mass() - 2.0).abs() < 1e-9);
    assert_eq!(predicted.registry().len(), 2);
    let observed = estimate(&sum, &s, params).unwrap();
    assert!(ym_distance(&observed, &predicted, &Battery::standard(1, &s)).unwrap() <= 0.05);
    let clash = SampledSequence::on_unit_cube(128, 8, 1, labels, at(0.25, -1.0)).unwrap();
    assert!(matches!(join(&v, &clash, &s, params), Err(YoungError::NotMutuallySingular)));
}

#[test]
fn rescaling_preserves_structure() {
    let s = spec(100.0);
    let params = EstimateParams::for_spec(&s);
    let osc = oscillation(128, vec![128, 256]);
    for a in [|_: &[f64]| 1.0, |_: &[f64]| 2.0, |x: &[f64]| 1.0 + x[0]] {
        let r = rescale_compare(&osc, a, &s, params, 0.05).unwrap();
        assert!(r.pass, "{r:?}");
    }
    let conc = SampledSequence::on_unit_cube(128, 8, 1, vec![512, 1024], |j, x| vec![spike(j, x[0])]).unwrap();
    let r = rescale_compare(&conc, |x: &[f64]| 1.0 + x[0], &s, params, 0.05).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(matches!(
        rescale_compare(&conc, |x: &[f64]| x[0] - 0.5, &s, params, 0.05),
        Err(YoungError::NonPositiveWeight { .. })
    ));
}
