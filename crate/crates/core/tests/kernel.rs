use ndarray::{Array1, Array2};
use proptest::prelude::*;
use trajshift::kernel::{
    attention_score, delta_a, rotation_matrix, shift_sweep, translate_trajectory, Encoding, KernelConfig, KernelState,
    ShiftProbe,
};
use trajshift::projection::project;
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy as Search};

fn vector(d: usize, seed: u64) -> Array1<f64> {
    let mut rng = trajshift::rng::stream(seed, 1);
    ShiftProbe::random(d, 1, 0, &mut rng).xa
}

/// The rotary score written over complex pairs: Re Σ q_s · conj(k_s) · e^{i(j−i)θ_s}
/// with q = W_Q x_a and k = W_K x_b.
fn complex_score(state: &KernelState, cfg: &KernelConfig, xa: &Array1<f64>, xb: &Array1<f64>, i: usize, j: usize) -> f64 {
    let q = state.wq.dot(xa);
    let k = state.wk.dot(xb);
    let rel = j as f64 - i as f64;
    (0..cfg.head_dim / 2)
        .map(|s| {
            let theta = cfg.rope_base.powf(-2.0 * s as f64 / cfg.head_dim as f64) * rel;
            let (qr, qi, kr, ki) = (q[2 * s], q[2 * s + 1], k[2 * s], k[2 * s + 1]);
            // q · conj(e^{iφ} k)
            let (rr, ri) = (kr * theta.cos() - ki * theta.sin(), kr * theta.sin() + ki * theta.cos());
            qr * rr + qi * ri
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rope_scores_depend_only_on_offset(d in (1usize..=64).prop_map(|h| 2 * h), seed in any::<u64>(),
                                        i in 0usize..600, j in 0usize..600, k in 0usize..400) {
        let cfg = KernelConfig::new(d, 1024, Encoding::Rope, seed);
        let state = KernelState::new(&cfg).unwrap();
        let (xa, xb) = (vector(d, seed), vector(d, seed ^ 1));
        let base = attention_score(&state, &cfg, xa.view(), xb.view(), i, j).unwrap();
        let shifted = attention_score(&state, &cfg, xa.view(), xb.view(), i + k, j + k).unwrap();
        let oracle = complex_score(&state, &cfg, &xa, &xb, i, j);
        let scale = 1.0 + base.abs();
        prop_assert!((base - shifted).abs() <= 1e-9 * scale);
        prop_assert!((base - oracle).abs() <= 1e-9 * scale);
    }

    #[test]
    fn rotations_are_orthogonal_and_compose(d in (1usize..=16).prop_map(|h| 2 * h), s in 0.0..1000.0f64, t in 0.0..1000.0f64) {
        let cfg = KernelConfig::new(d, 8, Encoding::Rope, 0);
        let (rs, rt) = (rotation_matrix(&cfg, s), rotation_matrix(&cfg, t));
        let gram = rs.t().dot(&rs) - Array2::<f64>::eye(d);
        prop_assert!(gram.iter().all(|x| x.abs() <= 1e-12));
        let compose = rs.dot(&rt) - rotation_matrix(&cfg, s + t);
        prop_assert!(compose.iter().all(|x| x.abs() <= 1e-9));
    }

    #[test]
    fn ape_zero_product_scores_vanish(seed in any::<u64>(), a in 0usize..200, b in 0usize..200, k in 1usize..56) {
        for encoding in [Encoding::ApeLearned, Encoding::ApeSinusoidal] {
            let cfg = KernelConfig::new(32, 256, encoding, seed);
            let state = KernelState::with_zero_product(&cfg).unwrap();
            prop_assert!(state.product().iter().all(|&x| x == 0.0));
            let (xa, xb) = (vector(32, seed), vector(32, !seed));
            let probe = ShiftProbe { xa, xb, a, b, k };
            prop_assert_eq!(delta_a(&state, &cfg, &probe).unwrap(), 0.0);
        }
    }
}

#[test]
fn ape_shifts_move_scores_and_rope_shifts_do_not() {
    for encoding in Encoding::ALL {
        let cfg = KernelConfig::new(64, 1024, encoding, 8);
        let state = KernelState::new(&cfg).unwrap();
        let report = shift_sweep(&state, &cfg, 500, &[1, 16, 256], 9).unwrap();
        for row in &report.rows {
            assert_eq!(row.evaluated, 500);
            match encoding {
                Encoding::Rope => assert!(row.max_da <= 1e-9 && row.frac_positive == 0.0),
                _ => assert!(row.frac_positive == 1.0),
            }
        }
    }
}

#[test]
fn inert_insertion_only_adds_a_node() {
    let corpus = generate_corpus(&GenerationConfig::new(Search::Mixed, 100, 13)).unwrap();
    for (n, t) in corpus.iter().enumerate() {
        let pos = n % (t.nodes().len() + 1);
        let shifted = translate_trajectory(t, 20, pos, 4096).unwrap();
        assert_eq!(shifted.token_len(), t.token_len() + 20);
        let (u, v) = (project(t).unwrap(), project(&shifted).unwrap());
        assert_eq!(v.chi(4), u.chi(4) + 1.0);
        for i in [1, 8, 10, 11, 12] {
            assert_eq!(u.chi(i), v.chi(i), "χ{i}");
        }
    }
}
