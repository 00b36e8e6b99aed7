//! Train a small self-attention policy with evolution strategies.
//!
//!     cargo run --release --example train_spn -- [generations] [out_dir]
//!
//! With `out_dir` the trainer writes `trainer_state.json` and `policy.ckpt`
//! there; running again with the same arguments resumes where it stopped.

use std::env;
use std::path::PathBuf;
use std::sync::Arc;

use cloudsched::bench::{synthetic_templates, WorkflowSet};
use cloudsched::cloud::default_catalog;
use cloudsched::erl::{train, write_training_log, ErlConfig, SchedulingObjective, TrainOptions, TrainingScenario};
use cloudsched::policy::{init_params, NetworkArch};

fn main() -> anyhow::Result<()> {
    let mut args = env::args().skip(1);
    let generations: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(40);
    let out_dir = args.next().map(PathBuf::from);

    let arch = NetworkArch::default();
    let objective = SchedulingObjective {
        arch,
        scenario: TrainingScenario {
            templates: synthetic_templates(WorkflowSet::Small, 0)?,
            n_workflows: 4,
            lambda: 0.01,
            gamma: 5.0,
            beta: 0.24,
            catalog: Arc::new(default_catalog()),
        },
    };
    let config = ErlConfig {
        population_size: 16,
        generations,
        checkpoint_every: 10,
        master_seed: 1,
        ..ErlConfig::full_scale()
    };
    let options = TrainOptions {
        resume: out_dir.is_some(),
        checkpoint_dir: out_dir,
        arch: Some(arch),
        parallel: true,
        ..TrainOptions::default()
    };

    let out = train(&config, &objective, init_params(&arch, config.master_seed), &options)?;
    write_training_log(std::io::stdout().lock(), &out.records)?;

    let window = out.records.len().min(5);
    let mean = |rs: &[cloudsched::erl::GenerationRecord]| rs.iter().map(|r| r.mean_total_cost).sum::<f64>() / rs.len() as f64;
    if window > 0 {
        println!(
            "first {window} generations mean cost {:.4}, last {window} {:.4}",
            mean(&out.records[..window]),
            mean(&out.records[out.records.len() - window..])
        );
    }
    Ok(())
}
