// Entropic and exact transport on random point clouds, with the entropic
// gap against its λ·log(nm) allowance.

use ndarray::Array2;
use rand::Rng;
use trajshift::rng;
use trajshift::transport::{exact_plan, sinkhorn_w1, standardize, CostMatrix, EmpiricalMeasure, SinkhornOptions};

pub fn run_example() -> anyhow::Result<f64> {
    let opts = SinkhornOptions::default();
    let mut worst: f64 = 0.0;
    for seed in 0..8 {
        let mut r = rng::stream(seed, 0);
        let (n, m) = (r.random_range(2..=20), r.random_range(2..=20));
        let a = EmpiricalMeasure::uniform(Array2::from_shape_fn((n, 3), |_| r.random::<f64>()))?;
        let b = EmpiricalMeasure::uniform(Array2::from_shape_fn((m, 3), |_| r.random::<f64>() + 0.5))?;
        let (std, _) = standardize(&[a, b])?;
        let plan = sinkhorn_w1(&std[0], &std[1], &opts)?;
        let cost = CostMatrix::euclidean(&std[0], &std[1])?;
        let (exact, _) = exact_plan(&cost.normalized, std[0].weights().view(), std[1].weights().view())?;
        let allowance = opts.lambda * ((n * m) as f64).ln();
        println!(
            "{n:>2}x{m:<2} sinkhorn {:.5}  exact {exact:.5}  gap {:.2e}  allowance {allowance:.3}  iters {}",
            plan.transport_cost,
            (plan.transport_cost - exact).abs(),
            plan.iterations_used
        );
        worst = worst.max((plan.transport_cost - exact).abs() / allowance);
    }
    println!("largest gap / allowance: {worst:.3}");
    Ok(worst)
}

#[allow(dead_code)]
fn main() -> anyhow::Result<()> {
    run_example().map(|_| ())
}
