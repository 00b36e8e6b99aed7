//! Scenario grids, batch evaluation of policies and report emission.

mod cli;
mod stats;

use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cli::{cli, WORKERS_ENV};
pub use stats::{average_ranks, mean, std_dev, wilcoxon_rank_sum, RankSum, StatsError};

use crate::cloud::VmCatalog;
use crate::erl::derive_seed;
use crate::policy::{Baseline, NetworkArch, ParamVector, Policy, PolicyError};
use crate::simulator::{run_observed, sample_instance, ProblemInstance, ScheduleResult, SimError};
use crate::workflow::{generate_pattern, Pattern, WorkflowError, WorkflowTemplate};

pub const GAMMA_SWEEP: [f64; 6] = [1.00, 1.25, 1.50, 1.75, 2.00, 2.25];

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("scenario configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WorkflowSet {
    Small,
    Medium,
    Large,
}

impl WorkflowSet {
    pub const ALL: [WorkflowSet; 3] = [WorkflowSet::Small, WorkflowSet::Medium, WorkflowSet::Large];

    /// Task counts for CyberShake, Montage, Inspiral and SIPHT.
    pub fn task_counts(self) -> [usize; 4] {
        match self {
            WorkflowSet::Small => [30, 25, 30, 30],
            WorkflowSet::Medium => [50, 50, 50, 60],
            WorkflowSet::Large => [100, 100, 100, 100],
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            WorkflowSet::Small => "S",
            WorkflowSet::Medium => "M",
            WorkflowSet::Large => "L",
        }
    }
}

impl fmt::Display for WorkflowSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WorkflowSet::Small => "small",
            WorkflowSet::Medium => "medium",
            WorkflowSet::Large => "large",
        })
    }
}

impl FromStr for WorkflowSet {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "small" | "s" => Ok(WorkflowSet::Small),
            "medium" | "m" => Ok(WorkflowSet::Medium),
            "large" | "l" => Ok(WorkflowSet::Large),
            _ => Err(format!("unknown workflow set `{s}` (expected small, medium or large)")),
        }
    }
}

/// Synthetic CyberShake, Montage, Inspiral and SIPHT templates at the sizes
/// of `set`.
pub fn synthetic_templates(set: WorkflowSet, seed: u64) -> Result<Vec<Arc<WorkflowTemplate>>, WorkflowError> {
    Pattern::GENERATED
        .iter()
        .zip(set.task_counts())
        .enumerate()
        .map(|(i, (&p, n))| generate_pattern(p, n, derive_seed(seed, i as u64)).map(Arc::new))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub workflow_set: WorkflowSet,
    pub gamma: f64,
    pub n_instances: usize,
    pub n_workflows_per_instance: usize,
    /// Workflow arrivals per second.
    pub lambda: f64,
    /// SLA penalty per hour of overrun.
    pub beta: f64,
    /// Instance `i` is sampled with seed `eval_seed + i`.
    pub eval_seed: u64,
    /// Seed for synthetic templates when none are supplied.
    pub template_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            workflow_set: WorkflowSet::Small,
            gamma: 1.0,
            n_instances: 30,
            n_workflows_per_instance: 30,
            lambda: 0.01,
            beta: 0.24,
            eval_seed: 1_000_000,
            template_seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(BenchError::Config(format!("gamma must be positive, got {}", self.gamma)));
        }
        if self.n_instances == 0 || self.n_workflows_per_instance == 0 {
            return Err(BenchError::Config("need at least one instance and one workflow".into()));
        }
        if !(self.lambda > 0.0) || !(self.beta >= 0.0) {
            return Err(BenchError::Config("lambda must be positive and beta non-negative".into()));
        }
        Ok(())
    }

    pub fn instance_seeds(&self) -> impl Iterator<Item = u64> + '_ {
        (0..self.n_instances as u64).map(|i| self.eval_seed.wrapping_add(i))
    }
}

/// Picks, for every pattern of the set, the template with that pattern and
/// task count.
pub fn select_templates(
    set: WorkflowSet,
    templates: &[Arc<WorkflowTemplate>],
) -> Result<Vec<Arc<WorkflowTemplate>>, BenchError> {
    Pattern::GENERATED
        .iter()
        .zip(set.task_counts())
        .map(|(&p, n)| {
            templates
                .iter()
                .find(|t| t.pattern() == p && t.len() == n)
                .cloned()
                .ok_or_else(|| BenchError::Config(format!("no {p} template with {n} tasks for the {set} set")))
        })
        .collect()
}

/// The instances of a scenario; every policy evaluated on the same config
/// sees the same list.
pub fn build_scenario(
    config: &ScenarioConfig,
    templates: &[Arc<WorkflowTemplate>],
    catalog: Arc<VmCatalog>,
) -> Result<Vec<ProblemInstance>, BenchError> {
    config.validate()?;
    let chosen = select_templates(config.workflow_set, templates)?;
    config
        .instance_seeds()
        .map(|seed| {
            Ok(sample_instance(
                &chosen,
                config.n_workflows_per_instance,
                config.lambda,
                config.gamma,
                config.beta,
                catalog.clone(),
                seed,
            )?)
        })
        .collect()
}

/// A policy that can be instantiated once per problem instance.
#[derive(Debug, Clone)]
pub enum PolicySpec {
    Baseline(Baseline),
    Network {
        name: String,
        arch: NetworkArch,
        params: Arc<ParamVector>,
    },
}

impl PolicySpec {
    pub fn network(name: impl Into<String>, arch: NetworkArch, params: ParamVector) -> Result<Self, PolicyError> {
        Policy::neural(arch, params.clone())?;
        Ok(PolicySpec::Network {
            name: name.into(),
            arch,
            params: Arc::new(params),
        })
    }

    pub fn name(&self) -> &str {
        match self {
            PolicySpec::Baseline(b) => b.name(),
            PolicySpec::Network { name, .. } => name,
        }
    }

    /// The random baseline draws from a stream tied to the instance seed.
    pub fn build(&self, instance_seed: u64) -> Result<Policy, PolicyError> {
        match self {
            PolicySpec::Baseline(b) => Ok(b.build(derive_seed(instance_seed, 0x5eed))),
            PolicySpec::Network { arch, params, .. } => Policy::neural(*arch, (**params).clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub instance_seed: u64,
    pub instance_hash: String,
    pub total_cost: f64,
    pub vm_fee: f64,
    pub sla_penalty: f64,
    /// Set when the run failed; the cost fields are NaN then.
    pub error: Option<String>,
}

impl Cell {
    pub fn is_ok(&self) -> bool {
        self.error.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyReport {
    pub policy: String,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_vm_fee: f64,
    pub mean_sla_penalty: f64,
    pub cells: Vec<Cell>,
}

impl PolicyReport {
    fn from_cells(policy: String, cells: Vec<Cell>) -> Self {
        let ok: Vec<&Cell> = cells.iter().filter(|c| c.is_ok()).collect();
        let col = |f: fn(&Cell) -> f64| ok.iter().map(|c| f(c)).collect::<Vec<_>>();
        let costs = col(|c| c.total_cost);
        Self {
            policy,
            mean_cost: mean(&costs),
            std_cost: std_dev(&costs),
            mean_vm_fee: mean(&col(|c| c.vm_fee)),
            mean_sla_penalty: mean(&col(|c| c.sla_penalty)),
            cells,
        }
    }

    /// Per-instance total costs, NaN for failed cells.
    pub fn costs(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.total_cost).collect()
    }

    pub fn failures(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_ok()).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub scenario: ScenarioConfig,
    pub per_policy: Vec<PolicyReport>,
}

impl EvalReport {
    pub fn policy(&self, name: &str) -> Option<&PolicyReport> {
        self.per_policy.iter().find(|p| p.policy == name)
    }
}

pub fn evaluate(
    policies: &[PolicySpec],
    scenario: &ScenarioConfig,
    instances: &[ProblemInstance],
    parallel: bool,
) -> EvalReport {
    evaluate_with(policies, scenario, instances, parallel, |_, _, _| {})
}

/// Runs every policy on every instance. `observe(policy, instance, result)`
/// sees each successful run; it may be called from several threads.
pub fn evaluate_with<F>(
    policies: &[PolicySpec],
    scenario: &ScenarioConfig,
    instances: &[ProblemInstance],
    parallel: bool,
    observe: F,
) -> EvalReport
where
    F: Fn(usize, usize, &ScheduleResult) + Sync,
{
    let hashes: Vec<String> = instances.iter().map(ProblemInstance::fingerprint).collect();
    let run_cell = |(p, i): (usize, usize)| {
        let instance = &instances[i];
        let outcome = policies[p]
            .build(instance.seed)
            .map_err(|e| e.to_string())
            .and_then(|mut policy| {
                run_observed(instance, &mut policy, |_, _| {}).map_err(|e| e.to_string())
            });
        let mut cell = Cell {
            instance_seed: instance.seed,
            instance_hash: hashes[i].clone(),
            total_cost: f64::NAN,
            vm_fee: f64::NAN,
            sla_penalty: f64::NAN,
            error: None,
        };
        match outcome {
            Ok(result) => {
                observe(p, i, &result);
                cell.total_cost = result.total_cost;
                cell.vm_fee = result.vm_fee;
                cell.sla_penalty = result.sla_penalty;
            }
            Err(e) => cell.error = Some(e),
        }
        cell
    };
    let keys: Vec<(usize, usize)> = (0..policies.len())
        .flat_map(|p| (0..instances.len()).map(move |i| (p, i)))
        .collect();
    let mut cells: Vec<Cell> = if parallel {
        keys.par_iter().copied().map(run_cell).collect()
    } else {
        keys.iter().copied().map(run_cell).collect()
    };

    let mut per_policy = Vec::with_capacity(policies.len());
    for spec in policies.iter().rev() {
        let tail = cells.split_off(cells.len() - instances.len());
        per_policy.push(PolicyReport::from_cells(spec.name().to_string(), tail));
    }
    per_policy.reverse();
    EvalReport {
        scenario: scenario.clone(),
        per_policy,
    }
}

/// Evaluates `policies` on every (gamma, set) pair, ordered by gamma and
/// then by set.
pub fn sweep(
    policies: &[PolicySpec],
    base: &ScenarioConfig,
    gammas: &[f64],
    sets: &[WorkflowSet],
    templates: &[Arc<WorkflowTemplate>],
    catalog: Arc<VmCatalog>,
    parallel: bool,
) -> Result<Vec<EvalReport>, BenchError> {
    let mut reports = Vec::new();
    for &gamma in gammas {
        for &set in sets {
            let config = ScenarioConfig {
                workflow_set: set,
                gamma,
                ..base.clone()
            };
            let instances = build_scenario(&config, templates, catalog.clone())?;
            reports.push(evaluate(policies, &config, &instances, parallel));
        }
    }
    Ok(reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub gamma: f64,
    pub set: WorkflowSet,
    pub policy: String,
    pub mean: f64,
    pub std: f64,
    /// Rank-sum p-value against the policy with the lowest mean; `None` for
    /// that policy itself or when the test is undefined.
    pub p_vs_best: Option<f64>,
}

pub fn summarize(report: &EvalReport) -> Vec<SummaryRow> {
    let complete = |p: &PolicyReport| p.failures() == 0;
    let best = report
        .per_policy
        .iter()
        .filter(|p| complete(p))
        .min_by(|a, b| a.mean_cost.total_cmp(&b.mean_cost));
    report
        .per_policy
        .iter()
        .map(|p| {
            let p_vs_best = match best {
                Some(b) if b.policy != p.policy && complete(p) => {
                    wilcoxon_rank_sum(&p.costs(), &b.costs()).ok().map(|r| r.p_value)
                }
                _ => None,
            };
            SummaryRow {
                gamma: report.scenario.gamma,
                set: report.scenario.workflow_set,
                policy: p.policy.clone(),
                mean: p.mean_cost,
                std: p.std_cost,
                p_vs_best,
            }
        })
        .collect()
}

pub const RESULTS_CSV_HEADER: &str =
    "gamma,set,policy,instance_seed,total_cost,vm_fee,sla_penalty,instance_hash";
pub const SUMMARY_CSV_HEADER: &str = "gamma,set,policy,mean,std,p_vs_best";

pub fn write_results_csv<W: Write>(mut out: W, reports: &[EvalReport]) -> std::io::Result<()> {
    writeln!(out, "{RESULTS_CSV_HEADER}")?;
    for r in reports {
        let s = &r.scenario;
        for p in &r.per_policy {
            for c in &p.cells {
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{}",
                    s.gamma, s.workflow_set, p.policy, c.instance_seed, c.total_cost, c.vm_fee, c.sla_penalty, c.instance_hash
                )?;
            }
        }
    }
    Ok(())
}

pub fn write_summary_csv<W: Write>(mut out: W, reports: &[EvalReport]) -> std::io::Result<()> {
    writeln!(out, "{SUMMARY_CSV_HEADER}")?;
    for r in reports {
        for row in summarize(r) {
            let p = row.p_vs_best.map(|p| p.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{},{},{}", row.gamma, row.set, row.policy, row.mean, row.std, p)?;
        }
    }
    Ok(())
}

/// One row per (gamma, set), one `mean(std)` column per policy.
pub fn write_table_csv<W: Write>(mut out: W, reports: &[EvalReport]) -> std::io::Result<()> {
    let mut names: Vec<&str> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in reports.iter().flat_map(|r| &r.per_policy) {
        if seen.insert(p.policy.as_str()) {
            names.push(&p.policy);
        }
    }
    writeln!(out, "scenario,gamma,set,{}", names.join(","))?;
    for r in reports {
        let s = &r.scenario;
        write!(out, "<{:.2} {}>,{},{}", s.gamma, s.workflow_set.label(), s.gamma, s.workflow_set)?;
        for name in &names {
            match r.policy(name) {
                Some(p) => write!(out, ",{:.2}({:.2})", p.mean_cost, p.std_cost)?,
                None => write!(out, ",")?,
            }
        }
        writeln!(out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cloud::default_catalog;

    fn small_config(n: usize) -> ScenarioConfig {
        ScenarioConfig {
            n_instances: n,
            n_workflows_per_instance: 3,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn set_sizes() {
        let t = synthetic_templates(WorkflowSet::Small, 0).unwrap();
        assert_eq!(t.iter().map(|t| t.len()).collect::<Vec<_>>(), vec![30, 25, 30, 30]);
        let t = synthetic_templates(WorkflowSet::Large, 0).unwrap();
        assert!(t.iter().all(|t| t.len() == 100));
    }

    #[test]
    fn missing_templates_are_a_config_error() {
        let small = synthetic_templates(WorkflowSet::Small, 0).unwrap();
        let config = ScenarioConfig {
            workflow_set: WorkflowSet::Medium,
            ..small_config(2)
        };
        assert!(matches!(
            build_scenario(&config, &small, Arc::new(default_catalog())),
            Err(BenchError::Config(_))
        ));
    }

    #[test]
    fn instance_seeds_are_consecutive_and_shared() {
        let t = synthetic_templates(WorkflowSet::Small, 0).unwrap();
        let config = small_config(3);
        let a = build_scenario(&config, &t, Arc::new(default_catalog())).unwrap();
        let b = build_scenario(&config, &t, Arc::new(default_catalog())).unwrap();
        let seeds: Vec<u64> = a.iter().map(|i| i.seed).collect();
        assert_eq!(seeds, vec![1_000_000, 1_000_001, 1_000_002]);
        let fp = |v: &[ProblemInstance]| v.iter().map(|i| i.fingerprint()).collect::<Vec<_>>();
        assert_eq!(fp(&a), fp(&b));
    }

    #[test]
    fn report_shape_and_identity() {
        let t = synthetic_templates(WorkflowSet::Small, 0).unwrap();
        let config = small_config(4);
        let inst = build_scenario(&config, &t, Arc::new(default_catalog())).unwrap();
        let policies = [
            PolicySpec::Baseline(Baseline::CheapestFeasible),
            PolicySpec::Baseline(Baseline::Random),
        ];
        let r = evaluate(&policies, &config, &inst, true);
        assert_eq!(r.per_policy.len(), 2);
        for p in &r.per_policy {
            assert_eq!(p.cells.len(), 4);
            assert_eq!(p.mean_cost, mean(&p.costs()));
            for c in &p.cells {
                assert!(c.is_ok());
                assert!((c.vm_fee + c.sla_penalty - c.total_cost).abs() <= 1e-9);
            }
        }
        assert_eq!(r, evaluate(&policies, &config, &inst, false));
        let hashes = |p: &PolicyReport| p.cells.iter().map(|c| c.instance_hash.clone()).collect::<Vec<_>>();
        assert_eq!(hashes(&r.per_policy[0]), hashes(&r.per_policy[1]));
    }

    #[test]
    fn failed_cells_are_marked() {
        let t = synthetic_templates(WorkflowSet::Small, 0).unwrap();
        let config = small_config(2);
        let inst = build_scenario(&config, &t, Arc::new(default_catalog())).unwrap();
        let bad = PolicySpec::Network {
            name: "broken".into(),
            arch: NetworkArch::default(),
            params: Arc::new(ParamVector::zeros(3)),
        };
        let r = evaluate(&[bad, PolicySpec::Baseline(Baseline::ProlisLike)], &config, &inst, false);
        assert_eq!(r.per_policy[0].failures(), 2);
        assert!(r.per_policy[0].cells[0].total_cost.is_nan());
        assert_eq!(r.per_policy[1].failures(), 0);
    }

    #[test]
    fn table_has_one_row_per_scenario() {
        let t: Vec<_> = WorkflowSet::ALL
            .iter()
            .flat_map(|&s| synthetic_templates(s, 0).unwrap())
            .collect();
        let base = ScenarioConfig {
            n_instances: 1,
            n_workflows_per_instance: 1,
            ..ScenarioConfig::default()
        };
        let reports = sweep(
            &[PolicySpec::Baseline(Baseline::GrpHeftLike)],
            &base,
            &GAMMA_SWEEP,
            &WorkflowSet::ALL,
            &t,
            Arc::new(default_catalog()),
            true,
        )
        .unwrap();
        let mut out = Vec::new();
        write_table_csv(&mut out, &reports).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text.lines().count(), 19);
        assert!(text.lines().nth(1).unwrap().starts_with("<1.00 S>,1,small,"));
    }
}
