use stefan_core::acceptance::{self, CriterionOutcome};

fn workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn report(o: CriterionOutcome) {
    println!("{o}");
    assert!(o.passed, "{o}");
}

#[test]
fn criterion_01_stefan_similarity_front() {
    report(acceptance::stefan_benchmark());
}

#[test]
fn criterion_02_heat_against_series() {
    report(acceptance::heat_cross_check());
}

#[test]
fn criterion_03_noise_covariance() {
    report(acceptance::noise_covariance());
}

#[test]
fn criterion_04_hilbert_schmidt_bound() {
    report(acceptance::hilbert_schmidt());
}

#[test]
fn criterion_05_smoothing_constants() {
    report(acceptance::semigroup_smoothing());
}

#[test]
fn criterion_06_truncation_coincidence() {
    report(acceptance::truncation_coincidence());
}

#[test]
fn criterion_07_no_blowup_with_bounded_front_law() {
    report(acceptance::global_existence_regime(workers()));
}

#[test]
fn criterion_08_trace_crosses_before_norm() {
    report(acceptance::blowup_boundary_coincidence(workers()));
}

#[test]
fn criterion_09_chain_rule_residual_orders() {
    report(acceptance::chain_rule());
}

#[test]
fn criterion_10_shift_algebra() {
    report(acceptance::shift_algebra());
}

#[test]
fn criterion_11_worker_count_independence() {
    report(acceptance::determinism());
}
