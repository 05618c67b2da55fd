use proptest::prelude::*;
use ymlab_scenarios::cli::run_scenario;
use ymlab_scenarios::config::{ScenarioConfig, SCENARIOS};
use ymlab_scenarios::inhomogenize::{inhomogenize_ac, inhomogenize_singular, AcPiece, Outcome, SingularAtom};

fn assert_budget(o: &Outcome) -> Result<(), TestCaseError> {
    let sum: f64 = o.budget.terms.iter().map(|t| t.1).sum();
    prop_assert!(o.budget.total >= 0.0);
    prop_assert!(o.budget.terms.iter().all(|t| t.1 >= 0.0), "{:?}", o.budget);
    prop_assert_eq!(o.budget.total, sum);
    prop_assert!(o.measured <= o.budget.total, "measured {} above budget {}", o.measured, o.budget.total);
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn singular_budget_covers_discrepancy(
        x in 0.3f64..0.7,
        mass in 0.1f64..2.0,
        up in 0.0f64..=1.0,
        a in 4u32..=6,
    ) {
        let atom = SingularAtom { x, mass, angle: vec![(1.0, up), (-1.0, 1.0 - up)] };
        assert_budget(&inhomogenize_singular(&[atom], a, 8).unwrap())?;
    }

    #[test]
    fn ac_budget_covers_discrepancy(
        value in -2.0f64..2.0,
        spread in 0.0f64..1.5,
        lambda in 0.0f64..1.0,
        up in 0.0f64..=1.0,
        d in 4u32..=6,
    ) {
        let piece = AcPiece {
            start: 0.0,
            end: 1.0,
            fiber: vec![(value - spread, 0.5), (value + spread, 0.5)],
            lambda,
            angle: vec![(1.0, up), (-1.0, 1.0 - up)],
        };
        assert_budget(&inhomogenize_ac(&[piece], d).unwrap())?;
    }
}

proptest! {
    #[test]
    fn resolution_must_be_a_power_of_two(resolution in 1usize..5000) {
        let json = format!(r#"{{"resolution": {resolution}}}"#);
        let parsed = ScenarioConfig::from_json(&json, "oscillation");
        prop_assert_eq!(parsed.is_ok(), resolution.is_power_of_two());
    }

    #[test]
    fn overlay_keeps_unset_defaults(seed in any::<u64>(), tol in 1e-6f64..1.0, k in 0usize..8) {
        let id = SCENARIOS[k];
        let cfg = ScenarioConfig::from_json(&format!(r#"{{"seed": {seed}, "tol": {tol}}}"#), id).unwrap();
        let base = ScenarioConfig::default_for(id).unwrap();
        prop_assert_eq!(cfg.seed, seed);
        prop_assert_eq!(cfg.tol, tol);
        prop_assert_eq!(cfg.labels, base.labels);
        prop_assert_eq!(cfg.resolution, base.resolution);
    }
}

#[test]
fn empty_labels_are_rejected() {
    assert!(ScenarioConfig::from_json(r#"{"labels": []}"#, "oscillation").is_err());
    assert!(ScenarioConfig::from_json(r#"{"colour": 1}"#, "oscillation").is_err());
}

#[test]
fn reruns_are_bit_identical() {
    for id in ["characterisation", "oscillation"] {
        let cfg = ScenarioConfig::default_for(id).unwrap();
        let first = run_scenario(&cfg).unwrap().to_json().unwrap();
        let second = run_scenario(&cfg).unwrap().to_json().unwrap();
        assert_eq!(first, second, "{id}");
    }
}

#[test]
fn every_check_is_a_complete_triplet() {
    let report = run_scenario(&ScenarioConfig::default_for("characterisation").unwrap()).unwrap();
    let json: serde_json::Value = serde_json::from_str(&report.to_json().unwrap()).unwrap();
    for check in json["checks"].as_array().unwrap() {
        for key in ["tolerance", "measured", "pass"] {
            assert!(!check[key].is_null(), "{check}");
        }
    }
}
