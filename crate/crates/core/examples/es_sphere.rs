//! The evolution-strategies trainer on a quadratic, where the true
//! gradient is known.
//!
//!     cargo run --release --example es_sphere

use cloudsched::erl::{
    estimate_gradient, evaluate_population, sample_epsilons, train, ErlConfig, Optimizer, SphereObjective, TrainOptions,
};
use cloudsched::policy::ParamVector;

fn main() -> anyhow::Result<()> {
    let dim = 50;
    let target: Vec<f64> = (0..dim).map(|i| (i as f64 * 0.37).sin()).collect();
    let obj = SphereObjective { target: target.clone() };

    // One gradient estimate at the origin against the analytic gradient 2t.
    let theta = ParamVector::zeros(dim);
    let eps = sample_epsilons(1000, dim, 3, true);
    let fit: Vec<f64> = evaluate_population(&obj, &(), &theta, &eps, 0.01, false)?
        .iter()
        .map(|r| r.fitness)
        .collect();
    let g = estimate_gradient(&fit, &eps, 0.01, false);
    let dot: f64 = g.iter().zip(&target).map(|(a, t)| a * 2.0 * t).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    println!("cosine(estimate, true gradient) = {:.4}", dot / (norm(&g) * 2.0 * norm(&target)));

    for (label, optimizer, lr) in [("plain ascent", Optimizer::PlainAscent, 0.05), ("adam", Optimizer::adam(), 0.05)] {
        let config = ErlConfig {
            population_size: 100,
            generations: 200,
            noise_std: 0.1,
            learning_rate: lr,
            optimizer,
            ..ErlConfig::full_scale()
        };
        let out = train(&config, &obj, ParamVector::zeros(dim), &TrainOptions::default())?;
        let dist: f64 = out.params.as_slice().iter().zip(&target).map(|(p, t)| (p - t).powi(2)).sum::<f64>().sqrt();
        println!("{label:<13} distance to optimum {:.4} -> {dist:.4}", norm(&target));
    }
    Ok(())
}
