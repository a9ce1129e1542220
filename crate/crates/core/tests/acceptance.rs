//! Acceptance suite: one test per release criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! Statistical criteria run at their full prescribed ensemble sizes and
//! stated tolerances; the wall-clock budgets are asserted with generous
//! margins on a single core.

use std::time::Instant;

use pipeflow_core::bounds::{gamma_additive_lambda, gamma_strat_lambda};
use pipeflow_core::forcing::RngStream;
use pipeflow_core::validate::{
    check_bound_domination, check_gamma_kappa_limits, check_gamma_vs_quadrature,
    check_martingale, check_optimal_time, check_orderings, check_presets_end_to_end,
    check_spectral_identities, check_tams_toy, CheckOutcome,
};

const SEED: u64 = 424_242;

fn report(criterion: usize, outcome: &CheckOutcome, elapsed_s: f64, budget_s: f64) {
    let status = if outcome.passed { "PASS" } else { "FAIL" };
    println!(
        "ACCEPTANCE {criterion} [{status}] {}: {} ({elapsed_s:.1}s of {budget_s:.0}s budget)",
        outcome.name, outcome.details
    );
    assert!(outcome.passed, "criterion {criterion} failed: {}", outcome.details);
    assert!(
        elapsed_s < budget_s,
        "criterion {criterion} exceeded its runtime budget: {elapsed_s:.1}s > {budget_s:.0}s"
    );
}

#[test]
fn acceptance_1_gamma_closed_forms_match_quadrature() {
    let start = Instant::now();
    let outcome = check_gamma_vs_quadrature(
        &|l1, l2, t, k, sr, sx, p| gamma_additive_lambda(l1, l2, t, k, sr, sx, p),
        &|l1, l2, t, k, sr, sx, p| gamma_strat_lambda(l1, l2, t, k, sr, sx, p),
    );
    report(1, &outcome, start.elapsed().as_secs_f64(), 10.0);
}

#[test]
fn acceptance_2_gamma_kappa_zero_limits() {
    let start = Instant::now();
    let outcome = check_gamma_kappa_limits();
    report(2, &outcome, start.elapsed().as_secs_f64(), 10.0);
}

#[test]
fn acceptance_3_martingale_mean_is_constant() {
    let start = Instant::now();
    let outcome = check_martingale(10_000, RngStream::new(SEED, 1 << 20));
    report(3, &outcome, start.elapsed().as_secs_f64(), 120.0);
}

#[test]
fn acceptance_4_pathwise_orderings() {
    let start = Instant::now();
    let outcome = check_orderings(200, RngStream::new(SEED, 2 << 20));
    report(4, &outcome, start.elapsed().as_secs_f64(), 180.0);
}

#[test]
fn acceptance_5_bound_domination() {
    let start = Instant::now();
    let outcomes = check_bound_domination(10_000, RngStream::new(SEED, 3 << 20));
    let elapsed = start.elapsed().as_secs_f64();
    let all_passed = outcomes.iter().all(|o| o.passed);
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("ACCEPTANCE 5 [{status}] {}: {}", outcome.name, outcome.details);
    }
    println!("ACCEPTANCE 5 total runtime {elapsed:.1}s of 600s budget");
    assert!(all_passed, "bound domination failed");
    assert!(elapsed < 600.0, "domination exceeded its runtime budget: {elapsed:.1}s");
}

#[test]
fn acceptance_6_tams_toy_calibration() {
    let start = Instant::now();
    let outcome = check_tams_toy(100, 1_000_000, RngStream::new(SEED, 4 << 20));
    report(6, &outcome, start.elapsed().as_secs_f64(), 120.0);
}

#[test]
fn acceptance_7_optimal_time_diagnostic() {
    let start = Instant::now();
    let outcome = check_optimal_time();
    report(7, &outcome, start.elapsed().as_secs_f64(), 10.0);
}

#[test]
fn acceptance_8_semigroup_and_spectral_identities() {
    let start = Instant::now();
    let outcome = check_spectral_identities();
    report(8, &outcome, start.elapsed().as_secs_f64(), 5.0);
}

#[test]
fn acceptance_9_presets_end_to_end() {
    let start = Instant::now();
    let outcomes = check_presets_end_to_end(50, true, RngStream::new(SEED, 5 << 20));
    let elapsed = start.elapsed().as_secs_f64();
    let all_passed = outcomes.iter().all(|o| o.passed);
    for outcome in &outcomes {
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!("ACCEPTANCE 9 [{status}] {}: {}", outcome.name, outcome.details);
    }
    println!("ACCEPTANCE 9 total runtime {elapsed:.1}s");
    assert!(all_passed, "preset end-to-end reproduction failed");
}
