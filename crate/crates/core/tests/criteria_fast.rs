//! The quick acceptance checks as ordinary tests, so a failure shows its
//! detail in the test report.

mod common;

fn assert_passes(o: common::Outcome) {
    assert!(o.passed, "{}", o.detail);
}

#[test]
fn published_tables_reproduce() {
    assert_passes(common::tables());
}

#[test]
fn bptt_and_ffn_gradients_match_finite_differences() {
    assert_passes(common::gradients(20));
}

#[test]
fn reruns_and_round_trips_are_bit_exact() {
    assert_passes(common::determinism_and_round_trips());
}

#[test]
fn training_locations_respect_every_sampling_constraint() {
    assert_passes(common::sampling_constraints());
}

#[test]
fn oracle_equivalences_hold() {
    assert_passes(common::oracles());
}

#[test]
fn relative_error_treats_round_off_pairs_as_equal() {
    assert_eq!(common::relative_error(1e-12, -3e-12), 0.0);
    assert!(common::relative_error(1e-3, 1.1e-3) > 0.05);
    assert_eq!(common::relative_error(0.0, 1e-6), 1.0);
    assert!(common::relative_error(0.0, 5e-8).is_infinite());
}
