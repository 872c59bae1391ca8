//! Brute-force oracles for the metric, association, precoder and fitness kernels.

mod common;

use common::oracle;

const INSTANCES: u64 = 200;

#[test]
fn inv_condition_number_matches_constructed_spectrum() {
    oracle::inv_condition_number_matches_constructed_spectrum(11, INSTANCES);
}

#[test]
fn inv_condition_number_is_zero_for_rank_deficient() {
    oracle::inv_condition_number_is_zero_for_rank_deficient(12, INSTANCES);
}

#[test]
fn cross_corr_matches_double_sum() {
    oracle::cross_corr_matches_double_sum(13, INSTANCES);
}

#[test]
fn avg_gain_matches_loop() {
    oracle::avg_gain_matches_loop(14, INSTANCES);
}

#[test]
fn select_serving_matches_exhaustive_scan() {
    oracle::select_serving_matches_exhaustive_scan(15, INSTANCES);
}

#[test]
fn dl_precoder_matches_exhaustive_scan() {
    oracle::dl_precoder_matches_exhaustive_scan(16, INSTANCES);
}

#[test]
fn fitness_matches_oracle_on_both_paths() {
    oracle::fitness_matches_oracle_on_both_paths(17, INSTANCES);
}
