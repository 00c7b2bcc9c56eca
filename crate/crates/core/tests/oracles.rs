mod common;

use common::oracles;

#[test]
fn vocabulary_matches_full_sort() {
    oracles::vocabulary_top_k(200, 1).unwrap();
}

#[test]
fn translation_matches_map_lookup() {
    oracles::translation_naive_map(200, 2).unwrap();
}

#[test]
fn featurization_matches_sum_divide() {
    oracles::featurization_sum_divide(200, 3).unwrap();
}

#[test]
fn auc_roc_matches_pairwise_statistic() {
    oracles::auc_mann_whitney(200, 4).unwrap();
}

#[test]
fn pr_points_match_confusion_counts() {
    oracles::pr_brute_force(200, 5).unwrap();
}

#[test]
fn gnb_file_merge_matches_single_fit() {
    oracles::gnb_merge_vs_concat(200, 6).unwrap();
}

#[test]
fn labels_match_exhaustive_loop() {
    oracles::groundtruth_double_loop(200, 7).unwrap();
}

#[test]
fn nce_gradients_match_central_differences() {
    oracles::nce_gradient_check(40, 10, 8).unwrap();
}
