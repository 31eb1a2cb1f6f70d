mod common;

use proptest::prelude::*;
use trajshift::projection::{project, project_corpus};
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy};

fn column_mean(strategy: Strategy, col: usize) -> f64 {
    let corpus = generate_corpus(&GenerationConfig::new(strategy, 500, 7)).unwrap();
    let m = project_corpus(&corpus).unwrap();
    m.column(col).mean().unwrap()
}

#[test]
fn generated_trajectories_match_the_exact_scan() {
    let corpus = generate_corpus(&GenerationConfig::new(Strategy::Mixed, 300, 3)).unwrap();
    for t in &corpus {
        let v = project(t).unwrap();
        common::matches_exact(v.as_array(), &common::exact_features(&t.text()), 1e-12).unwrap();
    }
}

#[test]
fn dfs_backtracks_more_than_bfs() {
    assert!(column_mean(Strategy::Bfs, 5) < column_mean(Strategy::Dfs, 5));
}

#[test]
fn corpus_matrix_rows_are_the_single_projections() {
    let corpus = generate_corpus(&GenerationConfig::new(Strategy::Dfs, 50, 9)).unwrap();
    let m = project_corpus(&corpus).unwrap();
    for (row, t) in m.rows().into_iter().zip(&corpus) {
        assert_eq!(row.to_vec(), project(t).unwrap().as_array().to_vec());
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn random_trees_match_the_exact_scan(seed in any::<u64>()) {
        let t = common::random_trajectory(seed);
        let v = project(&t).unwrap();
        prop_assert!(common::matches_exact(v.as_array(), &common::exact_features(&t.text()), 1e-12).is_ok());
    }

    #[test]
    fn move_fractions_partition_and_stay_bounded(seed in any::<u64>()) {
        let t = common::random_trajectory(seed);
        let v = project(&t).unwrap();
        let n = v.chi(4);
        let sum = v.chi(5) + v.chi(6) + v.chi(7);
        let expected = if n >= 2.0 { 1.0 } else { 0.0 };
        prop_assert!((sum - expected).abs() <= 1e-12);
        prop_assert!((0.0..=1.0).contains(&v.chi(9)) && (0.0..=1.0).contains(&v.chi(10)));
        prop_assert!(v.chi(2) >= 1.0 && v.chi(2) <= v.chi(1));
        prop_assert!(v.chi(3) >= 0.0 && v.chi(3) <= (v.chi(1) - 1.0) / 2.0 + 1e-12);
    }
}
