//! Solvers checked against independent dense reference computations.

mod support;

use support::oracles;

#[test]
fn ridge_matches_closed_form() {
    let gap = oracles::ridge_gap(20);
    assert!(gap < 1e-8, "{gap}");
}

#[test]
fn lasso_at_lambda_max_is_exactly_zero() {
    // just below the threshold one coefficient must enter
    assert_eq!(oracles::lasso_threshold_violations(10), (0, 0));
}

#[test]
fn pcr_full_rank_matches_ols() {
    let gap = oracles::pcr_full_rank_gap(10);
    assert!(gap < 1e-8, "{gap}");
}

#[test]
fn pcr_components_follow_eigenvectors() {
    let gap = oracles::pcr_eigen_gap();
    assert!(gap < 1e-8, "{gap}");
}

#[test]
fn svr_dual_matches_enumerated_qp() {
    let gap = oracles::svr_qp_gap(10);
    assert!(gap < 1e-4, "{gap}");
}

#[test]
fn forest_splits_match_exhaustive_search() {
    assert_eq!(oracles::split_mismatches(10), 0);
}

#[test]
fn boosting_with_unit_step_reaches_ols_on_orthonormal_design() {
    let gap = oracles::blm_orthonormal_gap(5);
    assert!(gap < 1e-4, "{gap}");
}
