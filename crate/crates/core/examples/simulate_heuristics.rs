//! Run every rule-based baseline on one problem instance.
//!
//!     cargo run --example simulate_heuristics -- [gamma] [workflows]

use std::env;
use std::sync::Arc;

use cloudsched::bench::{synthetic_templates, WorkflowSet};
use cloudsched::cloud::default_catalog;
use cloudsched::policy::Baseline;
use cloudsched::simulator::{run, sample_instance};

fn main() -> anyhow::Result<()> {
    let mut args = env::args().skip(1);
    let gamma: f64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1.5);
    let n_workflows: usize = args.next().map(|s| s.parse()).transpose()?.unwrap_or(10);

    let catalog = Arc::new(default_catalog());
    let templates = synthetic_templates(WorkflowSet::Medium, 0)?;
    let instance = sample_instance(&templates, n_workflows, 0.01, gamma, 0.24, catalog.clone(), 17)?;
    println!(
        "instance {}: {} workflows, {} tasks, gamma {gamma}",
        instance.fingerprint(),
        instance.workflows.len(),
        instance.task_count()
    );

    println!("{:<18} {:>9} {:>9} {:>9} {:>5} {:>6}", "policy", "total", "vm_fee", "penalty", "vms", "late");
    for baseline in Baseline::ALL {
        let mut policy = baseline.build(7);
        let r = run(&instance, &mut policy)?;
        let late = r.per_workflow.iter().filter(|w| w.penalty > 0.0).count();
        println!(
            "{:<18} {:>9.3} {:>9.3} {:>9.4} {:>5} {:>6}",
            baseline.name(),
            r.total_cost,
            r.vm_fee,
            r.sla_penalty,
            r.instances.len(),
            late
        );
    }

    // Per-workflow detail for the cheapest-feasible rule.
    let r = run(&instance, &mut Baseline::CheapestFeasible.build(0))?;
    println!("\ncheapest-feasible, per workflow:");
    for w in &r.per_workflow {
        println!(
            "  wf {:>2} arrived {:>8.1} done {:>8.1} deadline {:>8.1} penalty {:.4}",
            w.workflow, w.arrival_time, w.completion_time, w.deadline, w.penalty
        );
    }
    Ok(())
}
