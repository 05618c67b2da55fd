//! Area-strict and strict convergence of mollified measures.

use std::f64::consts::TAU;

use ymlab_core::compactification::CompactificationSpec;
use ymlab_core::measure::{lebesgue_grid, tv_pair, DiscreteMeasure, VectorDiscreteMeasure};
use ymlab_core::transform::{catalog, Integrand};
use ymlab_core::young::{elementary_measure, pair, ym_distance, Battery, RecessionMode};

use crate::config::ScenarioConfig;
use crate::quadrature::{composite, Bump};
use crate::report::{Report, Table};
use crate::{Result, ScenarioError};

fn is_nonincreasing(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12))
}

/// `φ_ε(x − ½)` sampled on the atoms of `mu`.
fn mollified_dirac(mu: &DiscreteMeasure, eps: f64) -> Vec<f64> {
    let bump = Bump::get();
    mu.points().iter().map(|x| bump.scaled(eps, x[0] - 0.5)).collect()
}

pub fn area_strict(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("area_strict");
    let mu = lebesgue_grid(cfg.resolution, 1);
    let spec = CompactificationSpec::sphere(1);
    let battery = Battery::standard(1, &spec);
    let dirac = VectorDiscreteMeasure::new(vec![vec![0.5]], vec![vec![1.0]])?;
    let limit = elementary_measure(&dirac, &mu, &spec)?;
    let area = catalog::area(1)?;
    report.near("limit_pair_area", pair(&limit, &area, RecessionMode::Auto)?, 2.0, 1e-9);
    report.near("limit_tv_pair", tv_pair(&dirac, &mu), 2.0, 1e-9);

    let mut table = Table::new("area_strict", &["level", "eps", "tv_pair", "deviation", "ym_distance"]);
    for &level in &cfg.levels {
        let eps = 0.5f64.powi(level as i32);
        let density: Vec<Vec<f64>> = mollified_dirac(&mu, eps).into_iter().map(|v| vec![v]).collect();
        let eta = VectorDiscreteMeasure::from_density(&mu, &density)?;
        let tv = tv_pair(&eta, &mu);
        let ym = ym_distance(&elementary_measure(&eta, &mu, &spec)?, &limit, &battery)?;
        table.push(vec![level as f64, eps, tv, (tv - 2.0).abs(), ym]);
    }
    let deviation = table.column("deviation").expect("column exists");
    let ym = table.column("ym_distance").expect("column exists");
    report.at_most("final_relative_deviation", deviation.last().copied().unwrap_or(f64::NAN) / 2.0, 0.02);
    report.holds("deviation_monotone", is_nonincreasing(&deviation));
    report.at_most("final_ym_distance", ym.last().copied().unwrap_or(f64::NAN), cfg.tol);
    report.tables.push(table);
    Ok(report)
}

/// Errors unless `f(tz) = t f(z)` on a probe set.
pub fn check_homogeneous(f: &Integrand) -> Result<()> {
    let d = f.target_dim();
    let x = vec![0.5];
    for k in 0..16 {
        let angle = TAU * k as f64 / 16.0;
        let z: Vec<f64> = (0..d).map(|i| ((i + 1) as f64 * angle + i as f64).cos()).collect();
        let base = f.eval(&x, &z);
        for t in [0.5, 2.0, 10.0] {
            let zt: Vec<f64> = z.iter().map(|v| v * t).collect();
            if (f.eval(&x, &zt) - t * base).abs() > 1e-9 * (1.0 + (t * base).abs()) {
                return Err(ScenarioError::NotHomogeneous(f.label().to_string()));
            }
        }
    }
    Ok(())
}

/// `2|z| + z₁`.
pub fn directional(d: usize) -> Result<Integrand> {
    Ok(Integrand::of_z("directional", 1.0, 3.0, d, |z| 2.0 * z.iter().map(|v| v * v).sum::<f64>().sqrt() + z[0])?)
}

/// `∫ f(ρ) dx` over the atoms of `mu`.
fn integrate_density(mu: &DiscreteMeasure, rho: &[Vec<f64>], f: &Integrand) -> f64 {
    mu.atoms().zip(rho).map(|((x, w), r)| w * f.eval(x, r)).sum()
}

/// `η = e₁δ_½ + (cos 2πx, sin 2πx) dx` mollified at scale `eps`; the
/// absolutely continuous part is convolved periodically.
fn mollified_eta(mu: &DiscreteMeasure, eps: f64) -> Vec<Vec<f64>> {
    let bump = Bump::get();
    let damping = composite(-1.0, 1.0, 256, |y| bump.value(y) * (TAU * eps * y).cos());
    mu.points()
        .iter()
        .map(|x| {
            let x = x[0];
            vec![bump.scaled(eps, x - 0.5) + damping * (TAU * x).cos(), damping * (TAU * x).sin()]
        })
        .collect()
}

pub fn reshetnyak(cfg: &ScenarioConfig) -> Result<Report> {
    let mut report = Report::new("reshetnyak");
    let mu = lebesgue_grid(cfg.resolution, 1);
    let abs = catalog::abs(2)?;
    let dir = directional(2)?;
    for f in [&abs, &dir] {
        check_homogeneous(f)?;
    }
    // Limits: ∫|(cos, sin)| + |e₁| and ∫(2 + cos) + (2 + 1).
    let (abs_limit, dir_limit) = (2.0, 5.0);

    let mut table =
        Table::new("reshetnyak", &["level", "eps", "abs", "directional", "control_abs", "control_directional"]);
    for &level in &cfg.levels {
        let eps = 0.5f64.powi(level as i32);
        let rho = mollified_eta(&mu, eps);
        let freq = TAU * f64::from(1u32 << level);
        let control: Vec<Vec<f64>> =
            mu.points().iter().zip(&rho).map(|(x, r)| vec![r[0], r[1] + (freq * x[0]).sin()]).collect();
        table.push(vec![
            level as f64,
            eps,
            integrate_density(&mu, &rho, &abs),
            integrate_density(&mu, &rho, &dir),
            integrate_density(&mu, &control, &abs),
            integrate_density(&mu, &control, &dir),
        ]);
    }
    let last = |name: &str| table.column(name).and_then(|c| c.last().copied()).unwrap_or(f64::NAN);
    report.near("strict_total_variation", last("abs"), abs_limit, 0.02);
    report.near("directional_limit", last("directional"), dir_limit, 0.05);
    let control_gap = (last("control_abs") - abs_limit).abs();
    report.at_least("control_total_variation_gap", control_gap, 0.1);
    report.note(format!(
        "control is not strictly convergent (variation gap {control_gap:.3}); its directional integral {:.4} is not compared",
        last("control_directional")
    ));
    report.tables.push(table);
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn homogeneity_probe() {
        assert!(check_homogeneous(&catalog::abs(2).unwrap()).is_ok());
        assert!(check_homogeneous(&directional(2).unwrap()).is_ok());
        let err = check_homogeneous(&catalog::area(2).unwrap()).unwrap_err();
        assert!(matches!(err, ScenarioError::NotHomogeneous(_)));
    }

    #[test]
    fn nonincreasing() {
        assert!(is_nonincreasing(&[3.0, 2.0, 2.0, 1.0]));
        assert!(!is_nonincreasing(&[1.0, 2.0]));
    }
}
