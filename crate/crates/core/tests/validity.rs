use std::sync::Arc;

use prophunt::circuit::{random_schedule, random_valid_schedule, validate_schedule, InvalidSchedule};
use prophunt::code::{load_code, make_rotated_surface};
use prophunt::tableau::noiseless_detectors_deterministic;

#[test]
fn parity_criterion_agrees_with_tableau_on_random_surface_schedules() {
    let code = Arc::new(make_rotated_surface(3).unwrap());
    let mut rng = prophunt::rng(11);
    let (mut valid, mut invalid) = (0, 0);
    for _ in 0..200 {
        let s = random_schedule(code.clone(), 3, &mut rng);
        let fast = validate_schedule(&s);
        assert!(!matches!(fast, Err(InvalidSchedule::Cycle { .. })));
        let oracle = noiseless_detectors_deterministic(&s, 2).unwrap();
        assert_eq!(fast.is_ok(), oracle, "{fast:?}");
        if oracle {
            valid += 1;
        } else {
            invalid += 1;
        }
    }
    assert!(valid > 0 && invalid > 0, "{valid} valid, {invalid} invalid");
}

#[test]
fn random_valid_schedules_on_lifted_product_code_are_deterministic() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/lp_39_3_3.json");
    let code = Arc::new(load_code(path).unwrap());
    let mut rng = prophunt::rng(5);
    for _ in 0..10 {
        let s = random_valid_schedule(code.clone(), 8, &mut rng);
        assert_eq!(validate_schedule(&s), Ok(()));
        assert!(noiseless_detectors_deterministic(&s, 2).unwrap());
        let bad = random_schedule(code.clone(), 8, &mut rng);
        assert_eq!(
            validate_schedule(&bad).is_ok(),
            noiseless_detectors_deterministic(&bad, 2).unwrap()
        );
    }
}
