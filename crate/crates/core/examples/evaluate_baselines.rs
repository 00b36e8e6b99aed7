//! Compare baselines and an untrained network on held-out instances, with
//! rank-sum p-values against the best policy.
//!
//!     cargo run --release --example evaluate_baselines -- [instances]

use std::env;
use std::sync::Arc;

use cloudsched::bench::{
    build_scenario, evaluate, summarize, synthetic_templates, wilcoxon_rank_sum, PolicySpec, ScenarioConfig,
    WorkflowSet,
};
use cloudsched::cloud::default_catalog;
use cloudsched::policy::{init_params, Baseline, NetworkArch};

fn main() -> anyhow::Result<()> {
    let n_instances: usize = env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    let catalog = Arc::new(default_catalog());
    let templates = synthetic_templates(WorkflowSet::Small, 0)?;
    let scenario = ScenarioConfig {
        gamma: 1.5,
        n_instances,
        n_workflows_per_instance: 8,
        ..ScenarioConfig::default()
    };
    let instances = build_scenario(&scenario, &templates, catalog)?;

    let arch = NetworkArch::default();
    let mut policies: Vec<PolicySpec> = Baseline::ALL.into_iter().map(PolicySpec::Baseline).collect();
    policies.push(PolicySpec::network("untrained-spn", arch, init_params(&arch, 3))?);

    let report = evaluate(&policies, &scenario, &instances, true);
    println!("{:<18} {:>9} {:>9} {:>12}", "policy", "mean", "std", "p_vs_best");
    for row in summarize(&report) {
        let p = row.p_vs_best.map(|p| format!("{p:.3e}")).unwrap_or_else(|| "-".into());
        println!("{:<18} {:>9.3} {:>9.3} {:>12}", row.policy, row.mean, row.std, p);
    }

    // The same test on any two columns of paired costs.
    let costs = |name: &str| report.per_policy.iter().find(|p| p.policy == name).unwrap().costs();
    let t = wilcoxon_rank_sum(&costs("prolis-like"), &costs("random"))?;
    println!("\nprolis-like vs random: U = {}, z = {:.3}, p = {:.3e}", t.u, t.z, t.p_value);
    Ok(())
}
