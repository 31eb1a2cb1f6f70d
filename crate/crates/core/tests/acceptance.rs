mod common;

use std::fs;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trajshift::bounds::{ceiling, ceiling_fit, depth_bound, unified_bound, width_bound, BoundInputs, ALPHA_STEP, BETA_STEP};
use trajshift::dyck::{check_balanced_prefix, nesting_depth, psi, to_transitions, ROOT_OFFSET};
use trajshift::kernel::{delta_a, shift_sweep, translate_trajectory, Encoding, KernelConfig, KernelState, ShiftProbe};
use trajshift::pipeline::{run_pipeline, PipelineConfig, RunOptions};
use trajshift::projection::{project, read_features, structural_distance};
use trajshift::rng;
use trajshift::trajectory::corpus::read_corpus;
use trajshift::trajectory::{generate_corpus, GenerationConfig, Strategy};
use trajshift::transport::{exact_plan, sinkhorn_plan, CostMatrix, EmpiricalMeasure, SinkhornOptions, W1Report};

const SEED: u64 = 2024;
const STRATEGIES: [&str; 3] = ["bfs", "dfs", "mixed"];

type Outcome = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn w1_mean(dir: &Path, pair: &str) -> f64 {
    let text = fs::read_to_string(dir.join(format!("w1_{pair}.json"))).unwrap();
    serde_json::from_str::<W1Report>(&text).unwrap().mean
}

fn w1_ordering(run: &Path, seconds: f64) -> Outcome {
    let (same, mixed, dfs) = (w1_mean(run, "bfs_bfs"), w1_mean(run, "bfs_mixed"), w1_mean(run, "bfs_dfs"));
    let detail = format!("BFS,BFS {same:.4}  BFS,MIXED {mixed:.4}  BFS,DFS {dfs:.4}  in {seconds:.1}s on one thread");
    let bands = [(same, 0.05), (mixed, 0.40), (dfs, 0.80)]
        .iter()
        .all(|&(w, anchor)| (w - anchor).abs() <= 0.25);
    ensure(
        same < mixed && mixed < dfs && same < 0.15 && dfs - mixed >= 0.1 && bands && seconds < 300.0,
        detail,
    )
}

fn sinkhorn_vs_exact() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let opts = SinkhornOptions::default();
    let mut worst: f64 = f64::NEG_INFINITY;
    let instances = 200;
    for _ in 0..instances {
        let (n, m) = (rng.random_range(1..=20), rng.random_range(1..=20));
        let mut cloud = |k: usize| {
            let pts = Array2::from_shape_fn((k, 12), |_| rng.random_range(-3.0..3.0));
            EmpiricalMeasure::uniform(pts).unwrap()
        };
        let (a, b) = (cloud(n), cloud(m));
        let cost = CostMatrix::euclidean(&a, &b).unwrap().normalized;
        let plan = sinkhorn_plan(&cost, a.weights().view(), b.weights().view(), &opts).unwrap();
        let (exact, _) = exact_plan(&cost, a.weights().view(), b.weights().view()).unwrap();
        let slack = opts.lambda * ((n * m) as f64).ln() + 1e-6;
        worst = worst.max((plan.transport_cost - exact).abs() - slack);
    }
    ensure(worst <= 0.0, format!("{instances} instances, worst margin to the allowance {worst:.3e}"))
}

fn rope_equivariance() -> Outcome {
    let shifts = [1, 4, 16, 64, 256];
    let dims = [16, 64, 256];
    let per_dim = 100_000_usize.div_ceil(dims.len());
    let mut worst: f64 = 0.0;
    let mut evaluated = 0;
    for d in dims {
        let cfg = KernelConfig::new(d, 1024, Encoding::Rope, SEED);
        let state = KernelState::new(&cfg).unwrap();
        let report = shift_sweep(&state, &cfg, per_dim, &shifts, SEED + d as u64).unwrap();
        for row in &report.rows {
            worst = worst.max(row.max_da);
            evaluated += row.evaluated;
        }
    }
    ensure(worst <= 1e-9, format!("{evaluated} shifted scores, max ΔA {worst:.3e}"))
}

fn ape_sensitivity() -> Outcome {
    let shifts = [1, 4, 16, 64, 256];
    let probes = 100_000;
    let mut lines = Vec::new();
    let mut ok = true;
    for encoding in [Encoding::ApeLearned, Encoding::ApeSinusoidal] {
        let cfg = KernelConfig::new(64, 1024, encoding, SEED);
        let state = KernelState::new(&cfg).unwrap();
        let zero = KernelState::with_zero_product(&cfg).unwrap();
        let (mut moved, mut zero_exact) = (0usize, 0usize);
        for n in 0..probes {
            let mut r = rng::stream(SEED, n as u64);
            let probe = ShiftProbe::random(64, 1024 - 256, shifts[n % shifts.len()], &mut r);
            moved += (delta_a(&state, &cfg, &probe).unwrap() > 1e-6) as usize;
            zero_exact += (delta_a(&zero, &cfg, &probe).unwrap() == 0.0) as usize;
        }
        ok &= moved == probes && zero_exact == probes;
        lines.push(format!("{encoding}: {moved}/{probes} moved, {zero_exact}/{probes} zero under W_QᵀW_K = 0"));
    }
    ensure(ok, lines.join("; "))
}

fn dyck_correspondence() -> Outcome {
    let corpus = generate_corpus(&GenerationConfig::new(Strategy::Dfs, 10_000, SEED)).unwrap();
    let bad = corpus
        .iter()
        .filter(|t| {
            let d = psi(&to_transitions(t).unwrap());
            let chi1 = project(t).unwrap().chi(1) as usize;
            !check_balanced_prefix(&d).is_valid() || nesting_depth(&d).map(|n| n + ROOT_OFFSET) != Ok(chi1)
        })
        .count();
    ensure(bad == 0, format!("{} DFS trajectories, {bad} exceptions", corpus.len()))
}

fn projection_oracle(run: &Path) -> Outcome {
    let mut mismatches = Vec::new();
    for seed in 0..50 {
        let t = common::random_trajectory(seed);
        let v = project(&t).unwrap();
        if let Err(e) = common::matches_exact(v.as_array(), &common::exact_features(&t.text()), 1e-12) {
            mismatches.push(format!("tree {seed}: {e}"));
        }
    }
    let mut rows = 0;
    let mut broken = 0;
    for s in STRATEGIES {
        let m = read_features(&run.join(format!("{s}.features.csv"))).unwrap();
        for r in m.rows() {
            rows += 1;
            let expected = if r[3] >= 2.0 { 1.0 } else { 0.0 };
            broken += ((r[4] + r[5] + r[6] - expected).abs() > 1e-12) as usize;
        }
    }
    let detail = format!("50 hand-built trees, {} mismatches; partition broken on {broken}/{rows} rows", mismatches.len());
    ensure(mismatches.is_empty() && broken == 0, [vec![detail], mismatches].concat().join("; "))
}

fn translation_footprint() -> Outcome {
    let cfg = GenerationConfig {
        max_tokens: 960,
        ..GenerationConfig::new(Strategy::Mixed, 1000, SEED)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let (mut lo, mut hi, mut bad) = (f64::INFINITY, 0.0f64, 0);
    for t in generate_corpus(&cfg).unwrap() {
        let k = rng.random_range(16..=64);
        let pos = rng.random_range(0..=t.nodes().len());
        let shifted = translate_trajectory(&t, k, pos, 1024).unwrap();
        let (u, v) = (project(&t).unwrap(), project(&shifted).unwrap());
        let d = structural_distance(&u, &v);
        lo = lo.min(d);
        hi = hi.max(d);
        bad += (v.chi(4) != u.chi(4) + 1.0 || !(1.0..=1.2).contains(&d)) as usize;
    }
    ensure(bad == 0, format!("1000 translations, displacement in [{lo:.4}, {hi:.4}], {bad} outside"))
}

fn bound_calculators(run: &Path) -> Outcome {
    let mut problems = Vec::new();
    for s in STRATEGIES {
        let chi1: Vec<f64> = read_corpus(&run.join(format!("{s}.jsonl")))
            .unwrap()
            .iter()
            .map(|t| t.nodes().iter().map(|n| n.depth).max().unwrap() as f64)
            .collect();
        for l in 1..=6 {
            let inputs = BoundInputs {
                target_chi1_samples: chi1.clone(),
                ..realizable(0.5, 0.0, 1.0, 768, l)
            };
            let recount = chi1.iter().filter(|&&x| x > l as f64).count() as f64 / chi1.len() as f64;
            if depth_bound(&inputs).unwrap().1 != recount {
                problems.push(format!("{s} L={l}: p_deep differs from the recount"));
            }
        }
    }
    let eps = 0.01;
    let mut worst_ratio: f64 = 0.0;
    for m in (0..20).map(|i| 1u64 << i) {
        let ratio = (width_bound(1.0, 4 * m, eps) + eps) / (width_bound(1.0, m, eps) + eps);
        worst_ratio = worst_ratio.max((ratio - 0.5).abs() / 0.5);
    }
    if worst_ratio > 1e-12 {
        problems.push(format!("width quadrupling ratio off by {worst_ratio:.3e}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut checked = 0;
    while checked < 10_000 {
        let risk = rng.random_range(0.0..=1.0);
        let inputs = BoundInputs {
            k_f: rng.random_range(0.0..3.0),
            w1: rng.random_range(0.0..1.0),
            epsilon: rng.random_range(0.0..0.05),
            c_width: rng.random_range(0.01..20.0),
            alpha_circ: rng.random_range(0.1..2.0),
            target_chi1_samples: (0..rng.random_range(1..50)).map(|_| rng.random_range(1..=12) as f64).collect(),
            ..realizable(risk, 0.0, 1.0, rng.random_range(1..100_000), rng.random_range(1..=24))
        };
        let target_risk = rng.random_range(0.0..=1.0);
        let report = unified_bound(&inputs).unwrap();
        let realizable = [report.lb_width, report.lb_depth, report.lb_transport]
            .iter()
            .all(|&lb| lb <= target_risk)
            && target_risk <= report.upper_bound;
        if !realizable {
            continue;
        }
        checked += 1;
        if report.upper_bound < report.lower_bound || !report.consistent {
            problems.push(format!("upper {} below lower {}", report.upper_bound, report.lower_bound));
            break;
        }
    }
    let detail = format!("p_deep recounts on 3 corpora, width ratio error {worst_ratio:.1e}, {checked} realizable inputs");
    ensure(problems.is_empty(), [vec![detail], problems].concat().join("; "))
}

fn realizable(source_risk: f64, w1: f64, k_f: f64, m: u64, l: u32) -> BoundInputs {
    BoundInputs {
        m,
        l,
        alpha_circ: 1.0,
        epsilon: 0.01,
        c_width: 1.0,
        vocab_size: 50_257,
        k_f,
        w1,
        source_risk,
        target_chi1_samples: vec![1.0],
    }
}

fn ceiling_calibration() -> Outcome {
    let (a, b, c) = (0.538, 0.045, 0.15);
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut points = Vec::new();
    for l in 1..=24 {
        let l = l as f64;
        points.push((l, ceiling(a, b, c, l)));
        for _ in 0..3 {
            points.push((l, ceiling(a, b, c, l) - rng.random_range(0.001..0.05)));
        }
    }
    let fit = ceiling_fit(&points).unwrap();
    let recovered = (fit.alpha - c).abs() <= ALPHA_STEP
        && (fit.beta - b).abs() <= BETA_STEP
        && (fit.a_max - a).abs() <= BETA_STEP;
    // 0.538 − 0.045·e^{−1.8}, evaluated at 40 digits.
    let independent = 0.530_561_550_030_028_6;
    let at_12 = ceiling(a, b, c, 12.0);
    let detail = format!(
        "fit A={:.6} B={:.6} c={:.6}, {} violations; ceiling(12) = {at_12:.12}",
        fit.a_max, fit.beta, fit.alpha, fit.violations
    );
    ensure(recovered && fit.violations == 0 && (at_12 - independent).abs() <= 1e-9, detail)
}

fn determinism(first: &Path, second: &Path) -> Outcome {
    let mut compared = 0;
    let mut differing = Vec::new();
    for entry in fs::read_dir(first).unwrap() {
        let name = entry.unwrap().file_name();
        if name == "manifest.json" {
            continue;
        }
        compared += 1;
        if fs::read(first.join(&name)).unwrap() != fs::read(second.join(&name)).unwrap() {
            differing.push(name.to_string_lossy().into_owned());
        }
    }
    let detail = format!("{compared} artifacts compared, {} differ {differing:?}", differing.len());
    ensure(compared == 11 && differing.is_empty(), detail)
}

fn main() -> ExitCode {
    let dir = tempfile::tempdir().unwrap();
    let (run_a, run_b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = PipelineConfig::desk(SEED);
    let single = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    single.install(|| run_pipeline(&cfg, &run_a, RunOptions::default())).unwrap();
    let seconds = start.elapsed().as_secs_f64();
    run_pipeline(&cfg, &run_b, RunOptions::default()).unwrap();

    let criteria: [(&str, &dyn Fn() -> Outcome); 10] = [
        ("W1 ordering and scale", &|| w1_ordering(&run_a, seconds)),
        ("Sinkhorn against exact transport", &sinkhorn_vs_exact),
        ("RoPE shift equivariance", &rope_equivariance),
        ("APE shift sensitivity", &ape_sensitivity),
        ("Dyck correspondence", &dyck_correspondence),
        ("projection oracle", &|| projection_oracle(&run_a)),
        ("translation footprint", &translation_footprint),
        ("bound calculators", &|| bound_calculators(&run_a)),
        ("ceiling calibration", &ceiling_calibration),
        ("determinism", &|| determinism(&run_a, &run_b)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, detail) = match check() {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("{tag} {:>2} {name} ({:.1}s): {detail}", i + 1, start.elapsed().as_secs_f64());
    }
    println!("{}/{} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
