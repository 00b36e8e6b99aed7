use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use super::{
    build_scenario, evaluate_with, synthetic_templates, write_results_csv, write_summary_csv,
    write_table_csv, EvalReport, PolicySpec, ScenarioConfig, WorkflowSet, GAMMA_SWEEP,
};
use crate::cloud::VmCatalog;
use crate::erl::{
    train, write_training_log, ErlConfig, Optimizer, SchedulingObjective, TrainOptions, TrainingScenario,
};
use crate::features::{write_state_rows, STATE_CSV_HEADER};
use crate::policy::{init_params, read_checkpoint, Baseline, MlpArchitecture, NetworkArch};
use crate::simulator::{read_result_json, read_trace_csv, replay, run_observed, write_result_json, write_trace_csv};
use crate::workflow::{generate_pattern, parse_dax, to_dax, Pattern, WorkflowTemplate, REFERENCE_CAPACITY};

/// Like `println!`, but a closed stdout (e.g. piped into `head`) is not fatal.
macro_rules! say {
    ($($t:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($t)*);
    }};
}

/// Worker-count override read when `--workers` is absent.
pub const WORKERS_ENV: &str = "CLOUDSCHED_WORKERS";

/// Contents of a `--config` file. Every section is optional.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
struct RunConfig {
    scenario: ScenarioConfig,
    erl: ErlConfig,
    architecture: NetworkArch,
    catalog: Option<serde_json::Value>,
}

impl RunConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("parsing config {}: {e}", p.display())))
            }
        }
    }

    fn catalog(&self) -> Result<Arc<VmCatalog>> {
        Ok(Arc::new(match &self.catalog {
            None => VmCatalog::default(),
            Some(v) => VmCatalog::from_json(&v.to_string())?,
        }))
    }
}

#[derive(Parser, Debug)]
#[command(name = "cloudsched", version, about = "Dynamic multi-workflow scheduling experiments")]
struct Cli {
    /// Parallel workers (defaults to $CLOUDSCHED_WORKERS, then all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Run on a single worker. Outputs are identical either way.
    #[arg(long, global = true)]
    deterministic: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a network policy with evolution strategies.
    Train(TrainArgs),
    /// Evaluate checkpoints and baselines on a scenario grid.
    Eval(EvalArgs),
    /// Evaluate on every gamma and workflow set and emit a summary table.
    Sweep(SweepArgs),
    /// Write workflow templates as JSON or DAX.
    GenWorkflows(GenArgs),
    /// Recompute costs from a trace and compare with the recorded result.
    Replay(ReplayArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum ArchChoice {
    Spn,
    Mlp,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum OptimizerChoice {
    Plain,
    Adam,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for the training log, checkpoint and trainer state.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    arch: Option<ArchChoice>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    optimizer: Option<OptimizerChoice>,
    #[arg(long)]
    no_mirror: bool,
    #[arg(long)]
    no_rank_shaping: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Independent training runs with master seeds `seed..seed+n`.
    #[arg(long, default_value_t = 1)]
    train_seeds: usize,
    #[arg(long)]
    set: Option<WorkflowSet>,
    #[arg(long)]
    workflows: Option<usize>,
    #[arg(long)]
    gamma_train: Option<f64>,
    #[arg(long)]
    template_seed: Option<u64>,
    #[arg(long)]
    checkpoint_every: Option<usize>,
    /// Continue from the trainer state found in the output directory.
    #[arg(long)]
    resume: bool,
    /// Record per-generation wall-clock time (otherwise the column is 0).
    #[arg(long)]
    wall_time: bool,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Network checkpoint(s) to evaluate.
    #[arg(long, num_args = 1..)]
    checkpoint: Vec<PathBuf>,
    /// Baselines: `all`, `none` or a comma-separated list.
    #[arg(long)]
    baselines: Option<String>,
    /// Number of evaluation instances per scenario.
    #[arg(long, visible_alias = "eval-seeds")]
    seeds: Option<usize>,
    /// Seed of the first evaluation instance.
    #[arg(long)]
    eval_seed: Option<u64>,
    #[arg(long)]
    workflows: Option<usize>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    template_seed: Option<u64>,
    /// Directory of template files (*.json, *.dax, *.xml) used instead of
    /// synthetic templates.
    #[arg(long)]
    templates: Option<PathBuf>,
    #[arg(long, default_value = "results")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    scenario: Vec<WorkflowSet>,
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    gamma: Vec<f64>,
    /// Write one trace CSV and result JSON per (policy, instance).
    #[arg(long)]
    trace_dir: Option<PathBuf>,
    /// Dump every decision state of the first policy on the first instance.
    #[arg(long)]
    dump_states: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum TemplateFormat {
    Json,
    Dax,
    Both,
}

#[derive(Args, Debug)]
struct GenArgs {
    #[arg(long)]
    out: PathBuf,
    /// Workflow set(s) to emit; all three when neither this nor `--pattern`
    /// is given.
    #[arg(long, num_args = 1.., value_delimiter = ',')]
    set: Vec<WorkflowSet>,
    #[arg(long, requires = "tasks", conflicts_with = "set")]
    pattern: Option<Pattern>,
    #[arg(long)]
    tasks: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value = "json")]
    format: TemplateFormat,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    trace: PathBuf,
    /// Result JSON written alongside the trace.
    #[arg(long)]
    result: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

/// Entry point of the `cloudsched` binary. Returns the process exit code:
/// 0 on success, 2 on usage errors, 1 on any other failure.
pub fn cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let parsed = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let workers = match resolve_workers(&parsed) {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e:#}");
            return 2;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let parallel = workers > 1;
    let outcome = pool.install(|| match parsed.command {
        Command::Train(a) => cmd_train(a, parallel),
        Command::Eval(a) => cmd_eval(a, parallel),
        Command::Sweep(a) => cmd_sweep(a, parallel),
        Command::GenWorkflows(a) => cmd_gen(a),
        Command::Replay(a) => cmd_replay(a),
    });
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<UsageError>() {
                2
            } else {
                1
            }
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn resolve_workers(cli: &Cli) -> Result<usize> {
    if cli.deterministic {
        return Ok(1);
    }
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(usage("--workers must be at least 1"));
        }
        return Ok(w);
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(w) if w > 0 => Ok(w),
            _ => Err(usage(format!("{WORKERS_ENV} must be a positive integer, got `{v}`"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn cmd_train(a: TrainArgs, parallel: bool) -> Result<i32> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let mut erl = cfg.erl.clone();
    let mut scenario = cfg.scenario.clone();
    if let Some(v) = a.generations {
        erl.generations = v;
    }
    if let Some(v) = a.population {
        erl.population_size = v;
    }
    if let Some(v) = a.sigma {
        erl.noise_std = v;
    }
    if let Some(v) = a.learning_rate {
        erl.learning_rate = v;
    }
    match a.optimizer {
        Some(OptimizerChoice::Plain) => erl.optimizer = Optimizer::PlainAscent,
        Some(OptimizerChoice::Adam) => erl.optimizer = Optimizer::adam(),
        None => {}
    }
    erl.mirrored_sampling &= !a.no_mirror;
    erl.rank_shaping &= !a.no_rank_shaping;
    if let Some(v) = a.seed {
        erl.master_seed = v;
    }
    if let Some(v) = a.gamma_train {
        erl.gamma_train = v;
    }
    if let Some(v) = a.checkpoint_every {
        erl.checkpoint_every = v;
    }
    if let Some(v) = a.set {
        scenario.workflow_set = v;
    }
    if let Some(v) = a.workflows {
        scenario.n_workflows_per_instance = v;
    }
    if let Some(v) = a.template_seed {
        scenario.template_seed = v;
    }
    let arch = match a.arch {
        Some(ArchChoice::Spn) => NetworkArch::default(),
        Some(ArchChoice::Mlp) => NetworkArch::Mlp(MlpArchitecture::default()),
        None => cfg.architecture,
    };
    erl.validate().map_err(|e| usage(e.to_string()))?;
    arch.validate().map_err(|e| usage(e.to_string()))?;
    if a.train_seeds == 0 {
        return Err(usage("--train-seeds must be at least 1"));
    }

    let objective = SchedulingObjective {
        arch,
        scenario: TrainingScenario {
            templates: synthetic_templates(scenario.workflow_set, scenario.template_seed)?,
            n_workflows: scenario.n_workflows_per_instance,
            lambda: scenario.lambda,
            gamma: erl.gamma_train,
            beta: scenario.beta,
            catalog: cfg.catalog()?,
        },
    };
    for k in 0..a.train_seeds {
        let mut run_cfg = erl.clone();
        run_cfg.master_seed = erl.master_seed.wrapping_add(k as u64);
        let dir = if a.train_seeds == 1 {
            a.out.clone()
        } else {
            a.out.join(format!("seed_{}", run_cfg.master_seed))
        };
        fs::create_dir_all(&dir)?;
        let options = TrainOptions {
            checkpoint_dir: Some(dir.clone()),
            arch: Some(arch),
            resume: a.resume,
            parallel,
            record_wall_time: a.wall_time,
            stop_after: None,
        };
        let initial = init_params(&arch, run_cfg.master_seed);
        let outcome = train(&run_cfg, &objective, initial, &options)?;
        write_training_log(create(&dir.join("training_log.csv"))?, &outcome.records)?;
        if let (Some(first), Some(last)) = (outcome.records.first(), outcome.records.last()) {
            say!(
                "{}: generations {}..={} mean cost {:.4} -> {:.4}",
                dir.display(),
                first.generation,
                last.generation,
                first.mean_total_cost,
                last.mean_total_cost
            );
        }
    }
    Ok(0)
}

fn parse_baselines(spec: Option<&str>, default_all: bool) -> Result<Vec<Baseline>> {
    match spec.map(str::trim) {
        None if default_all => Ok(Baseline::ALL.to_vec()),
        None | Some("none") | Some("") => Ok(Vec::new()),
        Some("all") => Ok(Baseline::ALL.to_vec()),
        Some(list) => list
            .split(',')
            .map(|s| s.trim().parse::<Baseline>().map_err(usage))
            .collect(),
    }
}

fn load_templates(dir: &Path) -> Result<Vec<Arc<WorkflowTemplate>>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let ext = p.extension().and_then(|e| e.to_str()).unwrap_or("");
        let text = || fs::read_to_string(&p).with_context(|| format!("reading {}", p.display()));
        let t = match ext {
            "json" => WorkflowTemplate::from_json(&text()?),
            "dax" | "xml" => parse_dax(&text()?),
            _ => continue,
        }
        .with_context(|| format!("loading {}", p.display()))?;
        out.push(Arc::new(t));
    }
    Ok(out)
}

struct Grid {
    policies: Vec<PolicySpec>,
    base: ScenarioConfig,
    catalog: Arc<VmCatalog>,
    templates: Option<Vec<Arc<WorkflowTemplate>>>,
}

impl Grid {
    fn from_args(g: &GridArgs, default_all_baselines: bool) -> Result<Self> {
        let cfg = RunConfig::load(g.config.as_deref())?;
        let mut base = cfg.scenario.clone();
        if let Some(v) = g.seeds {
            base.n_instances = v;
        }
        if let Some(v) = g.eval_seed {
            base.eval_seed = v;
        }
        if let Some(v) = g.workflows {
            base.n_workflows_per_instance = v;
        }
        if let Some(v) = g.lambda {
            base.lambda = v;
        }
        if let Some(v) = g.template_seed {
            base.template_seed = v;
        }
        let mut policies = Vec::new();
        for path in &g.checkpoint {
            let (arch, params) =
                read_checkpoint(path).with_context(|| format!("loading checkpoint {}", path.display()))?;
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .map_or_else(|| arch.label().to_string(), str::to_string);
            policies.push(PolicySpec::network(name, arch, params)?);
        }
        policies.extend(
            parse_baselines(g.baselines.as_deref(), default_all_baselines)?
                .into_iter()
                .map(PolicySpec::Baseline),
        );
        if policies.is_empty() {
            return Err(usage("nothing to evaluate: pass --checkpoint and/or --baselines"));
        }
        let names: Vec<&str> = policies.iter().map(PolicySpec::name).collect();
        if (1..names.len()).any(|i| names[..i].contains(&names[i])) {
            return Err(usage("policy names must be unique"));
        }
        let templates = g.templates.as_deref().map(load_templates).transpose()?;
        Ok(Self {
            policies,
            base,
            catalog: cfg.catalog()?,
            templates,
        })
    }

    fn templates_for(&self, set: WorkflowSet) -> Result<Vec<Arc<WorkflowTemplate>>> {
        match &self.templates {
            Some(t) => Ok(t.clone()),
            None => Ok(synthetic_templates(set, self.base.template_seed)?),
        }
    }
}

fn write_reports(out: &Path, reports: &[EvalReport], table: bool) -> Result<()> {
    fs::create_dir_all(out)?;
    let mut w = create(&out.join("results.csv"))?;
    write_results_csv(&mut w, reports)?;
    w.flush()?;
    let mut w = create(&out.join("summary.csv"))?;
    write_summary_csv(&mut w, reports)?;
    w.flush()?;
    if table {
        let mut w = create(&out.join("table.csv"))?;
        write_table_csv(&mut w, reports)?;
        w.flush()?;
    }
    let mut w = create(&out.join("report.json"))?;
    serde_json::to_writer_pretty(&mut w, reports)?;
    w.flush()?;
    Ok(())
}

fn print_summary(reports: &[EvalReport]) {
    for r in reports {
        for p in &r.per_policy {
            say!(
                "gamma={} set={} {:<18} mean={:.4} std={:.4} fee={:.4} penalty={:.4}{}",
                r.scenario.gamma,
                r.scenario.workflow_set,
                p.policy,
                p.mean_cost,
                p.std_cost,
                p.mean_vm_fee,
                p.mean_sla_penalty,
                match p.failures() {
                    0 => String::new(),
                    n => format!(" failed={n}"),
                }
            );
        }
    }
}

fn cmd_eval(a: EvalArgs, parallel: bool) -> Result<i32> {
    let grid = Grid::from_args(&a.grid, false)?;
    let sets = if a.scenario.is_empty() {
        vec![grid.base.workflow_set]
    } else {
        a.scenario.clone()
    };
    let gammas = if a.gamma.is_empty() {
        vec![grid.base.gamma]
    } else {
        a.gamma.clone()
    };
    if let Some(dir) = &a.trace_dir {
        fs::create_dir_all(dir)?;
    }
    let trace_errors = Mutex::new(Vec::<String>::new());
    let mut reports = Vec::new();
    for &gamma in &gammas {
        for &set in &sets {
            let config = ScenarioConfig {
                workflow_set: set,
                gamma,
                ..grid.base.clone()
            };
            config.validate().map_err(|e| usage(e.to_string()))?;
            let instances = build_scenario(&config, &grid.templates_for(set)?, grid.catalog.clone())?;
            if let (Some(path), true) = (&a.dump_states, reports.is_empty()) {
                dump_states(path, &grid.policies[0], &instances[0])?;
            }
            let report = evaluate_with(&grid.policies, &config, &instances, parallel, |p, i, result| {
                let Some(dir) = &a.trace_dir else { return };
                let stem = format!("{}_g{}_{}_{}", grid.policies[p].name(), gamma, set, instances[i].seed);
                let written = (|| -> Result<()> {
                    let mut t = create(&dir.join(format!("{stem}.trace.csv")))?;
                    write_trace_csv(&mut t, result, &grid.catalog)?;
                    t.flush()?;
                    let mut r = create(&dir.join(format!("{stem}.result.json")))?;
                    write_result_json(&mut r, result)?;
                    r.flush()?;
                    Ok(())
                })();
                if let Err(e) = written {
                    trace_errors.lock().unwrap().push(format!("{stem}: {e:#}"));
                }
            });
            reports.push(report);
        }
    }
    let errors = trace_errors.into_inner().unwrap();
    if let Some(e) = errors.first() {
        bail!("writing traces failed: {e}");
    }
    write_reports(&a.grid.out, &reports, false)?;
    print_summary(&reports);
    Ok(failure_code(&reports))
}

fn failure_code(reports: &[EvalReport]) -> i32 {
    let failed: usize = reports.iter().flat_map(|r| &r.per_policy).map(|p| p.failures()).sum();
    if failed > 0 {
        eprintln!("error: {failed} evaluation cell(s) failed; see results.csv");
        1
    } else {
        0
    }
}

fn dump_states(path: &Path, spec: &PolicySpec, instance: &crate::simulator::ProblemInstance) -> Result<()> {
    let mut out = create(path)?;
    writeln!(out, "{STATE_CSV_HEADER}")?;
    let mut policy = spec.build(instance.seed)?;
    let mut decision = 0;
    let mut io_error = None;
    run_observed(instance, &mut policy, |state, chosen| {
        if io_error.is_none() {
            io_error = write_state_rows(&mut out, decision, state, chosen).err();
        }
        decision += 1;
    })?;
    if let Some(e) = io_error {
        return Err(e.into());
    }
    out.flush()?;
    Ok(())
}

fn cmd_sweep(a: SweepArgs, parallel: bool) -> Result<i32> {
    let grid = Grid::from_args(&a.grid, true)?;
    let mut reports = Vec::new();
    for &gamma in &GAMMA_SWEEP {
        for set in WorkflowSet::ALL {
            let config = ScenarioConfig {
                workflow_set: set,
                gamma,
                ..grid.base.clone()
            };
            let instances = build_scenario(&config, &grid.templates_for(set)?, grid.catalog.clone())?;
            reports.push(super::evaluate(&grid.policies, &config, &instances, parallel));
        }
    }
    write_reports(&a.grid.out, &reports, true)?;
    print_summary(&reports);
    Ok(failure_code(&reports))
}

fn cmd_gen(a: GenArgs) -> Result<i32> {
    let mut templates = Vec::new();
    if let Some(pattern) = a.pattern {
        let n = a.tasks.ok_or_else(|| usage("--pattern needs --tasks"))?;
        templates.push(Arc::new(generate_pattern(pattern, n, a.seed)?));
    } else {
        let sets = if a.set.is_empty() {
            WorkflowSet::ALL.to_vec()
        } else {
            a.set.clone()
        };
        for set in sets {
            for t in synthetic_templates(set, a.seed)? {
                if !templates.iter().any(|u: &Arc<WorkflowTemplate>| u.name() == t.name()) {
                    templates.push(t);
                }
            }
        }
    }
    fs::create_dir_all(&a.out)?;
    for t in &templates {
        let stem = format!("{}_{}", t.pattern().to_string().to_lowercase(), t.len());
        if matches!(a.format, TemplateFormat::Json | TemplateFormat::Both) {
            fs::write(a.out.join(format!("{stem}.json")), t.to_json())?;
        }
        if matches!(a.format, TemplateFormat::Dax | TemplateFormat::Both) {
            fs::write(a.out.join(format!("{stem}.dax")), to_dax(t, REFERENCE_CAPACITY))?;
        }
        say!("{stem}: {} tasks, {} edges", t.len(), t.edge_count());
    }
    Ok(0)
}

fn cmd_replay(a: ReplayArgs) -> Result<i32> {
    let cfg = RunConfig::load(a.config.as_deref())?;
    let catalog = cfg.catalog()?;
    let trace = read_trace_csv(File::open(&a.trace).with_context(|| format!("opening {}", a.trace.display()))?)
        .with_context(|| format!("parsing {}", a.trace.display()))?;
    let recorded = read_result_json(File::open(&a.result).with_context(|| format!("opening {}", a.result.display()))?)
        .with_context(|| format!("parsing {}", a.result.display()))?;
    let cost = replay(&trace, &recorded.per_workflow, &catalog).map_err(|e| anyhow!(e))?;
    say!("vm_fee={}", cost.vm_fee);
    say!("sla_penalty={}", cost.sla_penalty);
    say!("total_cost={}", cost.total_cost);
    say!("recorded_total_cost={}", recorded.total_cost);
    let diff = (cost.total_cost - recorded.total_cost).abs();
    if diff <= 1e-9 {
        say!("match");
        Ok(0)
    } else {
        eprintln!("error: replayed total cost differs from the recorded one by {diff}");
        Ok(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(cli(["cloudsched", "eval", "--no-such-flag"]), 2);
        assert_eq!(cli(["cloudsched", "frobnicate"]), 2);
        assert_eq!(cli(["cloudsched", "eval", "--out", "/tmp/x"]), 2);
        assert_eq!(cli(["cloudsched", "--workers", "0", "gen-workflows", "--out", "/tmp/x"]), 2);
    }

    #[test]
    fn baseline_lists() {
        assert_eq!(parse_baselines(None, true).unwrap().len(), 4);
        assert!(parse_baselines(None, false).unwrap().is_empty());
        assert_eq!(
            parse_baselines(Some("random,prolis-like"), false).unwrap(),
            vec![Baseline::Random, Baseline::ProlisLike]
        );
        assert!(parse_baselines(Some("heft"), false).is_err());
    }

    #[test]
    fn config_sections_are_optional() {
        let c: RunConfig = serde_json::from_str(r#"{"scenario": {"gamma": 1.5}}"#).unwrap();
        assert_eq!(c.scenario.gamma, 1.5);
        assert_eq!(c.scenario.n_instances, 30);
        assert_eq!(c.erl.population_size, 40);
        assert!(serde_json::from_str::<RunConfig>(r#"{"scenario": {"gamma": "x"}}"#).is_err());
    }
}
