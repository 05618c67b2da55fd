//! Oscillation, concentration and the non-unique-limit counterexample.

use std::f64::consts::PI;

use ymlab_core::compactification::{AtomRegistry, CompactificationSpec, DEFAULT_TOL_EQUIV};
use ymlab_core::measure::{tv_pair_with, DiscreteMeasure};
use ymlab_core::transform::{catalog, Integrand};
use ymlab_core::young::{
    decompose, estimate, estimate_with_registry, is_equiintegrable, pair, rescale_compare, ym_distance, Battery,
    EstimateParams, RecessionMode, SampledSequence, YoungTriple, DEFAULT_K_GRID, DEFAULT_TOL_EI,
};

use crate::config::ScenarioConfig;
use crate::report::{Report, Table};
use crate::{Result, ScenarioError};

/// Catalog lookup plus `shift:c`, the scalar integrand `|z − c|`.
pub fn lookup_integrand(id: &str, d: usize) -> Result<Integrand> {
    if let Some(c) = id.strip_prefix("shift:") {
        let c: f64 = c.parse().map_err(|_| ScenarioError::Config(format!("bad integrand id '{id}'")))?;
        if d != 1 {
            return Err(ScenarioError::Config(format!("'{id}' is scalar, target dimension is {d}")));
        }
        return Ok(Integrand::of_z(id, 1.0, c.abs().max(1.0), 1, move |z| (z[0] - c).abs())?);
    }
    Ok(ymlab_convexity::integrands::lookup(id, d)?)
}

/// `+1` on the first half of each period `1/j`, `−1` on the second.
pub fn square_wave(j: usize, x: f64) -> f64 {
    if (j as f64 * x).fract() < 0.5 {
        1.0
    } else {
        -1.0
    }
}

/// `j` on `[½, ½ + 1/j)`, zero elsewhere.
pub fn spike(j: usize, x: f64) -> f64 {
    if (0.5..0.5 + 1.0 / j as f64).contains(&x) {
        j as f64
    } else {
        0.0
    }
}

/// Square wave of frequency `j` plus the spike of height `j`.
pub fn mixed(j: usize, x: f64) -> f64 {
    square_wave(j, x) + spike(j, x)
}

/// `μ`-averaged total variation between estimated fibers and `expected`.
pub fn mean_fiber_tv(nu: &YoungTriple, expected: &DiscreteMeasure) -> f64 {
    let (mut acc, mut total) = (0.0, 0.0);
    for (c, (_, m)) in nu.mu().atoms().enumerate() {
        if let Some(f) = nu.osc().fiber(c) {
            acc += m * f.tv_distance(expected, 1e-9);
            total += m;
        }
    }
    acc / total
}

fn point_masses(values: &[f64], weights: &[f64]) -> Result<DiscreteMeasure> {
    Ok(DiscreteMeasure::new(values.iter().map(|&v| vec![v]).collect(), weights.to_vec())?)
}

pub fn oscillation(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("oscillation");
    let spec = cfg.compactification(1)?;
    let params = EstimateParams::for_spec(&spec);
    let seq = SampledSequence::on_unit_cube(cfg.resolution, cfg.sub, 1, cfg.labels.clone(), |j, x| {
        vec![square_wave(j, x[0])]
    })?;
    let nu = estimate(&seq, &spec, params)?;
    let expected = point_masses(&[-1.0, 1.0], &[0.5, 0.5])?;
    report.at_most("fiber_tv", mean_fiber_tv(&nu, &expected), cfg.tol);
    report.at_most("lambda_mass", nu.lambda_mass(), 0.0);
    report.holds("equiintegrable", is_equiintegrable(&seq, &DEFAULT_K_GRID, DEFAULT_TOL_EI).flag);

    let last = cfg.labels.len() - 1;
    let mut table = Table::new("pairings", &["integrand", "pair", "quadrature", "exact"]);
    for (k, id) in cfg.battery.iter().enumerate() {
        let f = lookup_integrand(id, 1)?;
        let p = pair(&nu, &f, RecessionMode::Auto)?;
        let exact = expected.integrate(|z| f.eval(&[0.5], z));
        let q = seq.integral(last, &f);
        report.near(format!("pair_{id}"), p, exact, cfg.tol);
        report.near(format!("quadrature_{id}"), q, exact, cfg.tol);
        table.push(vec![k as f64, p, q, exact]);
    }
    report.tables.push(table);

    let two_scale = SampledSequence::on_unit_cube(cfg.resolution / 2, cfg.sub * 8, 1, cfg.labels.clone(), |j, x| {
        vec![square_wave(j, x[0]) + 0.5 * square_wave(3 * j, x[0])]
    })?;
    let nu2 = estimate(&two_scale, &spec, params)?;
    // Over one slow period the fast wave is positive on 1/3 of the first
    // half and 2/3 of the second.
    let third = 1.0 / 3.0;
    let expected2 = point_masses(&[-1.5, -0.5, 0.5, 1.5], &[third, 0.5 * third, 0.5 * third, third])?;
    report.at_most("two_scale_fiber_tv", mean_fiber_tv(&nu2, &expected2), cfg.tol);

    let a = |x: &[f64]| 1.0 + x[0];
    let smooth = rescale_compare(&seq, a, &spec, params, cfg.tol)?;
    report.holds("rescale_smooth", smooth.pass);
    let mut stairs = Table::new("staircase", &["n", "sup_gap", "fiber_tv", "lambda_gap", "pass"]);
    for n in [10.0, 20.0, 40.0, 80.0] {
        let a_n = move |x: &[f64]| (n * (1.0 + x[0])).floor() / n;
        let gap = seq.mu().points().iter().map(|x| (a_n(x) - a(x)).abs()).fold(0.0, f64::max);
        report.at_most(format!("staircase_gap_{n}"), gap, 1.0 / n);
        let r = rescale_compare(&seq, a_n, &spec, params, cfg.tol)?;
        report.holds(format!("rescale_staircase_{n}"), r.pass);
        stairs.push(vec![n, gap, r.fiber_tv, r.lambda_gap, f64::from(u8::from(r.pass))]);
    }
    report.tables.push(stairs);
    Ok(report)
}

pub fn concentration(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("concentration");
    let min_j = *cfg.labels.iter().min().expect("validated labels");
    let mag_min = (min_j as f64 * 0.75).min(ymlab_core::compactification::DEFAULT_MAG_MIN);
    let spec = cfg.compactification(1)?.with_params(mag_min, DEFAULT_TOL_EQUIV);
    let params = EstimateParams::for_spec(&spec);
    let seq =
        SampledSequence::on_unit_cube(cfg.resolution, cfg.sub, 1, cfg.labels.clone(), |j, x| vec![spike(j, x[0])])?;
    let nu = estimate(&seq, &spec, params)?;
    let area = catalog::area(1)?;
    let abs = catalog::abs(1)?;

    report.near("lambda_mass", nu.lambda_mass(), 1.0, 0.02);
    let radius = 1.0 / min_j as f64 + 1.0 / cfg.resolution as f64;
    let near_half: f64 = nu.conc().atoms().filter(|(x, _)| (x[0] - 0.5).abs() <= radius).map(|(_, w)| w).sum();
    report.at_least("lambda_near_half", near_half / nu.lambda_mass(), 0.98);
    let angle = nu.sphere_angle_measure()?;
    let up: f64 = angle.atoms().filter(|(e, _)| e[0] > 0.0).map(|(_, w)| w).sum();
    report.near("angle_up", up / nu.lambda_mass(), 1.0, 1e-9);
    report.near("pair_area", pair(&nu, &area, RecessionMode::Auto)?, 2.0, 0.05);
    report.near("pair_abs", pair(&nu, &abs, RecessionMode::Auto)?, 1.0, 0.02);

    let ei = is_equiintegrable(&seq, &DEFAULT_K_GRID, DEFAULT_TOL_EI);
    report.holds("not_equiintegrable", !ei.flag);
    let (osc, conc, _) = decompose(&seq, mag_min);
    report.holds("oscillation_part_equiintegrable", is_equiintegrable(&osc, &DEFAULT_K_GRID, DEFAULT_TOL_EI).flag);
    let conc_mass = (0..cfg.labels.len()).map(|i| conc.integral(i, &abs)).fold(f64::INFINITY, f64::min);
    report.near("concentration_part_mass", conc_mass, 1.0, 1e-9);

    let mut table = Table::new("concentration", &["j", "integral", "pair"]);
    for (i, &j) in cfg.labels.iter().enumerate() {
        let single = estimate(&seq.select(|l| l == j)?, &spec, params)?;
        table.push(vec![j as f64, seq.integral(i, &area), pair(&single, &area, RecessionMode::Auto)?]);
    }
    report.tables.push(table);
    Ok(report)
}

/// One row of the equi-integrability survey.
#[derive(Debug, Clone, PartialEq)]
pub struct EiRow {
    pub name: &'static str,
    pub equiintegrable: bool,
    pub lambda_mass: f64,
}

/// Oscillating, concentrating, mixed and constant sequences at a single
/// index `j`: equi-integrability flag against the estimated `λ`.
pub fn ei_survey(cells: usize, sub: usize, j: usize) -> Result<Vec<EiRow>> {
    let spec = CompactificationSpec::sphere(1);
    let params = EstimateParams::for_spec(&spec);
    type Field = fn(usize, f64) -> f64;
    let cases: [(&'static str, Field); 4] =
        [("oscillation", square_wave), ("concentration", spike), ("mixed", mixed), ("constant", |_, _| 3.0)];
    cases
        .into_iter()
        .map(|(name, field)| {
            let seq = SampledSequence::on_unit_cube(cells, sub, 1, vec![j], |j, x| vec![field(j, x[0])])?;
            let nu = estimate(&seq, &spec, params)?;
            Ok(EiRow {
                name,
                equiintegrable: is_equiintegrable(&seq, &DEFAULT_K_GRID, DEFAULT_TOL_EI).flag,
                lambda_mass: nu.lambda_mass(),
            })
        })
        .collect()
}

/// `m_j = e^{−(π/2 + πj)}`, so that `R_j = 1/m_j − 1` has
/// `sin ln(1 + R_j) = (−1)^j`.
pub fn bump_width(j: usize) -> f64 {
    (-(PI / 2.0 + PI * j as f64)).exp()
}

/// Height `R_j` on `[½, ½ + m_j)` and zero elsewhere, sampled on a uniform
/// grid refined by nested rings at `½`. Ring widths fall below the float
/// resolution, so each ring atom sits at a nominal position `½ + k·1e-9`
/// and carries its exact width as weight.
pub fn counterexample_sequence(cells: usize, sub: usize, labels: &[usize]) -> Result<SampledSequence> {
    let mut js = labels.to_vec();
    js.sort_unstable();
    js.dedup();
    let n = cells * sub;
    let h = 1.0 / n as f64;
    let widths: Vec<f64> = js.iter().map(|&j| bump_width(j)).collect();
    if widths[0] >= h || !cells.is_multiple_of(2) {
        return Err(ScenarioError::Config(format!(
            "bump width {} does not fit one atom of width {h} at an even cell count",
            widths[0]
        )));
    }
    // (position, weight, innermost label index covered)
    let mut atoms: Vec<(f64, f64, Option<usize>)> =
        (0..n).filter(|&k| k != n / 2).map(|k| ((k as f64 + 0.5) * h, h, None)).collect();
    atoms.push((0.5 + 0.5 * (widths[0] + h), h - widths[0], None));
    for i in 0..js.len() {
        let inner = widths.get(i + 1).copied().unwrap_or(0.0);
        atoms.push((0.5 + (js.len() - 1 - i) as f64 * 1e-9, widths[i] - inner, Some(i)));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mu = DiscreteMeasure::new(atoms.iter().map(|a| vec![a.0]).collect(), atoms.iter().map(|a| a.1).collect())?;
    if mu.len() != atoms.len() {
        return Err(ScenarioError::Invalid("mesh atoms merged".into()));
    }
    let cell_of = atoms.iter().map(|a| ((a.0 * cells as f64) as usize).min(cells - 1)).collect();
    let centers = (0..cells).map(|c| vec![(c as f64 + 0.5) / cells as f64]).collect();
    let fields = js
        .iter()
        .enumerate()
        .map(|(k, &j)| {
            let height = 1.0 / bump_width(j) - 1.0;
            atoms.iter().map(|a| vec![if a.2.is_some_and(|i| i >= k) { height } else { 0.0 }]).collect()
        })
        .collect();
    Ok(SampledSequence::new(mu, cell_of, centers, js, fields)?)
}

/// `tv_pair(δ_½, μ)` for Lebesgue `μ` on the unit interval.
const STRICT_LIMIT: f64 = 2.0;

pub fn counterexample(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("counterexample");
    let seq = counterexample_sequence(cfg.resolution, cfg.sub, &cfg.labels)?;
    let logsin = catalog::logsin(1)?;
    let abs = catalog::abs(1)?;

    let mut table = Table::new("counterexample", &["j", "integral_abs", "integral_logsin", "tv_pair"]);
    let (mut even, mut odd) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut strict_dev: f64 = 0.0;
    for (i, &j) in seq.labels().iter().enumerate() {
        let v = seq.integral(i, &logsin);
        if j % 2 == 0 {
            even = even.max(v);
        } else {
            odd = odd.min(v);
        }
        // Every mesh atom carries Lebesgue mass, so no atom is singular.
        let tv = tv_pair_with(&seq.as_vector_measure(i)?, seq.mu(), 0.0);
        strict_dev = strict_dev.max((tv - STRICT_LIMIT).abs() / STRICT_LIMIT);
        table.push(vec![j as f64, seq.integral(i, &abs), v, tv]);
    }
    report.tables.push(table);
    report.at_least("limsup_minus_liminf", even - odd, 1.8);
    report.at_most("mu_strict_relative_deviation", strict_dev, 0.03);

    let evens = seq.select(|j| j % 2 == 0)?;
    let odds = seq.select(|j| j % 2 == 1)?;

    let sphere = CompactificationSpec::sphere(1);
    let params = EstimateParams::for_spec(&sphere);
    let (se, so) = (estimate(&evens, &sphere, params)?, estimate(&odds, &sphere, params)?);
    let battery = Battery::standard(1, &sphere);
    report.at_most("sphere_ym_distance", ym_distance(&se, &so, &battery)?, cfg.tol);
    report.near("sphere_lambda_even", se.lambda_mass(), 1.0, 1e-3);
    report.near("sphere_lambda_odd", so.lambda_mass(), 1.0, 1e-3);
    let loc = se.conc().atoms().map(|(x, _)| (x[0] - 0.5).abs()).fold(0.0, f64::max);
    report.at_most("lambda_location", loc, 1.0 / cfg.resolution as f64);

    let spec = crate::config::resolve_spec("logsin", 1)?;
    let params = EstimateParams::for_spec(&spec);
    let le = estimate_with_registry(&evens, &spec, params, AtomRegistry::new())?;
    let lo = estimate_with_registry(&odds, &spec, params, le.registry().clone())?;
    let ids_even: Vec<_> = le.atom_weights().into_keys().collect();
    let ids_odd: Vec<_> = lo.atom_weights().into_keys().collect();
    report.holds("logsin_atoms_differ", ids_even.iter().all(|id| !ids_odd.contains(id)));
    let gap = pair(&le, &logsin, RecessionMode::Auto)? - pair(&lo, &logsin, RecessionMode::Auto)?;
    report.at_least("logsin_pair_gap", gap, 1.8);
    report.at_least("logsin_ym_distance", ym_distance(&le, &lo, &Battery::standard(1, &spec))?, cfg.tol);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_heights_hit_the_sine_extremes() {
        for j in 2..=13 {
            let r = 1.0 / bump_width(j) - 1.0;
            let s = r.ln_1p().sin();
            assert!((s - if j % 2 == 0 { 1.0 } else { -1.0 }).abs() < 1e-6, "j = {j}: {s}");
        }
    }

    #[test]
    fn counterexample_mesh_has_unit_mass_and_exact_bumps() {
        let seq = counterexample_sequence(256, 8, &(2..=13).collect::<Vec<_>>()).unwrap();
        assert!((seq.mu().mass() - 1.0).abs() < 1e-12);
        let abs = catalog::abs(1).unwrap();
        for (i, &j) in seq.labels().iter().enumerate() {
            let expect = 1.0 - bump_width(j);
            assert!((seq.integral(i, &abs) - expect).abs() < 1e-9, "j = {j}");
        }
    }

    #[test]
    fn shift_integrand() {
        let f = lookup_integrand("shift:-2", 1).unwrap();
        assert_eq!(f.eval(&[0.5], &[1.0]), 3.0);
        assert!(lookup_integrand("shift:x", 1).is_err());
        assert!(lookup_integrand("shift:1", 2).is_err());
        assert_eq!(lookup_integrand("abs", 2).unwrap().eval(&[0.5], &[3.0, 4.0]), 5.0);
    }

    #[test]
    fn square_wave_and_spike() {
        assert_eq!(square_wave(4, 0.1), 1.0);
        assert_eq!(square_wave(4, 0.2), -1.0);
        assert_eq!(spike(8, 0.55), 8.0);
        assert_eq!(spike(8, 0.63), 0.0);
    }
}
