//! Evolution-strategies training of policy parameters.
//!
//! Each generation draws one training problem, perturbs the current
//! parameters with Gaussian noise, scores every perturbation by simulated
//! total cost (fitness is its negation) and moves the parameters along the
//! Monte-Carlo gradient estimate `1/(N sigma) * sum_i u_i eps_i`.
//!
//! All randomness is derived from `master_seed` and the generation index,
//! so a run resumed from a trainer-state file follows the same trajectory
//! as an uninterrupted one.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cloud::VmCatalog;
use crate::policy::{write_checkpoint, NetworkArch, ParamVector, Policy, PolicyError};
use crate::simulator::{run, sample_instance, ProblemInstance, SimError};
use crate::workflow::WorkflowTemplate;

#[derive(Debug, Error)]
pub enum ErlError {
    #[error("invalid trainer configuration: {0}")]
    Config(String),
    #[error("individual {individual} produced non-finite cost {cost}")]
    NonFinite { individual: usize, cost: f64 },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("trainer state: {0}")]
    State(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    /// `theta += alpha * g`
    PlainAscent,
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
}

impl Optimizer {
    pub fn adam() -> Self {
        Optimizer::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ErlConfig {
    pub population_size: usize,
    pub generations: usize,
    pub learning_rate: f64,
    pub noise_std: f64,
    pub mirrored_sampling: bool,
    pub rank_shaping: bool,
    pub optimizer: Optimizer,
    pub master_seed: u64,
    /// Write trainer state every this many generations (0 disables).
    pub checkpoint_every: usize,
    /// Deadline relaxation used for training problems.
    pub gamma_train: f64,
}

impl Default for ErlConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl ErlConfig {
    /// Population 40, 3000 generations, learning rate 0.01, noise 0.05.
    pub fn full_scale() -> Self {
        Self {
            population_size: 40,
            generations: 3000,
            learning_rate: 0.01,
            noise_std: 0.05,
            mirrored_sampling: true,
            rank_shaping: true,
            optimizer: Optimizer::PlainAscent,
            master_seed: 0,
            checkpoint_every: 0,
            gamma_train: 5.0,
        }
    }

    pub fn validate(&self) -> Result<(), ErlError> {
        if self.population_size < 2 {
            return Err(ErlError::Config("population size must be at least 2".into()));
        }
        if self.mirrored_sampling && !self.population_size.is_multiple_of(2) {
            return Err(ErlError::Config(
                "mirrored sampling needs an even population size".into(),
            ));
        }
        if self.generations == 0 {
            return Err(ErlError::Config("generations must be at least 1".into()));
        }
        if !(self.noise_std > 0.0) {
            return Err(ErlError::Config("noise std must be positive".into()));
        }
        if !(self.gamma_train > 0.0) {
            return Err(ErlError::Config("training gamma must be positive".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ErlError::Config("learning rate must be positive".into()));
        }
        Ok(())
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Child seed `index` of `base`; distinct indices give independent streams.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    splitmix64(base ^ splitmix64(index))
}

fn problem_seed(master: u64, generation: usize) -> u64 {
    derive_seed(derive_seed(master, generation as u64), 0)
}

fn noise_seed(master: u64, generation: usize) -> u64 {
    derive_seed(derive_seed(master, generation as u64), 1)
}

fn gaussian_vector(dim: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// `n` standard Gaussian vectors. Each vector (or each mirrored pair
/// `(e, -e)`) comes from its own seed derived from `generation_seed`.
pub fn sample_epsilons(n: usize, dim: usize, generation_seed: u64, mirrored: bool) -> Vec<Vec<f64>> {
    if mirrored {
        assert!(n.is_multiple_of(2), "mirrored sampling needs an even count");
        (0..n / 2)
            .flat_map(|p| {
                let e = gaussian_vector(dim, derive_seed(generation_seed, p as u64));
                let neg = e.iter().map(|v| -v).collect();
                [e, neg]
            })
            .collect()
    } else {
        (0..n)
            .map(|i| gaussian_vector(dim, derive_seed(generation_seed, i as u64)))
            .collect()
    }
}

/// Something whose cost can be evaluated for a parameter vector, one
/// shared problem per generation.
pub trait Objective: Sync {
    type Problem: Sync;

    fn problem(&self, generation: usize, seed: u64) -> Result<Self::Problem, ErlError>;

    fn total_cost(&self, problem: &Self::Problem, params: &ParamVector) -> Result<f64, ErlError>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitnessResult {
    pub individual_index: usize,
    pub fitness: f64,
    pub total_cost: f64,
}

/// Scores `center + sigma * eps_i` for every `i`; results are in index order
/// whether or not evaluation runs in parallel.
pub fn evaluate_population<O: Objective>(
    objective: &O,
    problem: &O::Problem,
    center: &ParamVector,
    epsilons: &[Vec<f64>],
    sigma: f64,
    parallel: bool,
) -> Result<Vec<FitnessResult>, ErlError> {
    let eval = |(i, eps): (usize, &Vec<f64>)| {
        let cost = objective.total_cost(problem, &center.perturbed(eps, sigma))?;
        if !cost.is_finite() {
            return Err(ErlError::NonFinite {
                individual: i,
                cost,
            });
        }
        Ok(FitnessResult {
            individual_index: i,
            fitness: -cost,
            total_cost: cost,
        })
    };
    if parallel {
        epsilons.par_iter().enumerate().map(eval).collect()
    } else {
        epsilons.iter().enumerate().map(eval).collect()
    }
}

/// Average ranks (ties share their mean rank) mapped linearly onto
/// `[-0.5, 0.5]`, highest fitness highest.
pub fn centered_ranks(fitnesses: &[f64]) -> Vec<f64> {
    let n = fitnesses.len();
    if n < 2 {
        return vec![0.0; n];
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| fitnesses[a].total_cmp(&fitnesses[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && fitnesses[order[j + 1]] == fitnesses[order[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = avg;
        }
        i = j + 1;
    }
    ranks.iter().map(|r| r / (n - 1) as f64 - 0.5).collect()
}

pub fn estimate_gradient(
    fitnesses: &[f64],
    epsilons: &[Vec<f64>],
    sigma: f64,
    rank_shaping: bool,
) -> Vec<f64> {
    assert_eq!(fitnesses.len(), epsilons.len());
    let n = fitnesses.len();
    let dim = epsilons.first().map_or(0, Vec::len);
    let weights = if rank_shaping {
        centered_ranks(fitnesses)
    } else {
        fitnesses.to_vec()
    };
    let mut g = vec![0.0; dim];
    for (u, eps) in weights.iter().zip(epsilons) {
        for (gj, e) in g.iter_mut().zip(eps) {
            *gj += u * e;
        }
    }
    let scale = 1.0 / (n as f64 * sigma);
    g.iter_mut().for_each(|v| *v *= scale);
    g
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerState {
    PlainAscent,
    Adam { m: Vec<f64>, v: Vec<f64>, step: u64 },
}

impl OptimizerState {
    fn new(optimizer: &Optimizer, dim: usize) -> Self {
        match optimizer {
            Optimizer::PlainAscent => OptimizerState::PlainAscent,
            Optimizer::Adam { .. } => OptimizerState::Adam {
                m: vec![0.0; dim],
                v: vec![0.0; dim],
                step: 0,
            },
        }
    }

    /// Moves `params` uphill along `gradient`.
    fn apply(&mut self, optimizer: &Optimizer, lr: f64, params: &mut [f64], gradient: &[f64]) {
        match (self, optimizer) {
            (OptimizerState::Adam { m, v, step }, Optimizer::Adam { beta1, beta2, epsilon }) => {
                *step += 1;
                let c1 = 1.0 - beta1.powi(*step as i32);
                let c2 = 1.0 - beta2.powi(*step as i32);
                for i in 0..params.len() {
                    let d = -gradient[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * d;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * d * d;
                    params[i] -= lr * (m[i] / c1) / ((v[i] / c2).sqrt() + epsilon);
                }
            }
            _ => {
                for (p, g) in params.iter_mut().zip(gradient) {
                    *p += lr * g;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub fitnesses: Vec<f64>,
    pub mean_total_cost: f64,
    pub best_total_cost: f64,
    pub param_norm: f64,
    pub wall_time: f64,
}

pub const TRAINING_LOG_HEADER: &str = "generation,mean_cost,best_cost,param_norm,wall_time";

pub fn write_training_log<W: Write>(mut out: W, records: &[GenerationRecord]) -> std::io::Result<()> {
    writeln!(out, "{TRAINING_LOG_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.generation, r.mean_total_cost, r.best_total_cost, r.param_norm, r.wall_time
        )?;
    }
    Ok(())
}

/// Everything needed to continue a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainerState {
    pub config: ErlConfig,
    pub next_generation: usize,
    pub params: Vec<f64>,
    pub optimizer: OptimizerState,
    pub records: Vec<GenerationRecord>,
}

pub const TRAINER_STATE_FILE: &str = "trainer_state.json";
pub const POLICY_CHECKPOINT_FILE: &str = "policy.ckpt";

impl TrainerState {
    pub fn save(&self, dir: &Path) -> Result<(), ErlError> {
        fs::create_dir_all(dir)?;
        let tmp = dir.join(format!("{TRAINER_STATE_FILE}.tmp"));
        fs::write(&tmp, serde_json::to_vec(self).map_err(|e| ErlError::State(e.to_string()))?)?;
        fs::rename(tmp, dir.join(TRAINER_STATE_FILE))?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Option<Self>, ErlError> {
        let path = dir.join(TRAINER_STATE_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map(Some)
            .map_err(|e| ErlError::State(e.to_string()))
    }
}

#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Where trainer state (and, with `arch`, a policy checkpoint) is written.
    pub checkpoint_dir: Option<PathBuf>,
    pub arch: Option<NetworkArch>,
    /// Continue from the trainer state in `checkpoint_dir` when present.
    pub resume: bool,
    pub parallel: bool,
    pub record_wall_time: bool,
    /// Stop after this many generations have been completed in total.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: ParamVector,
    pub records: Vec<GenerationRecord>,
}

pub fn train<O: Objective>(
    config: &ErlConfig,
    objective: &O,
    initial: ParamVector,
    options: &TrainOptions,
) -> Result<TrainOutcome, ErlError> {
    config.validate()?;
    let resumed = match (&options.checkpoint_dir, options.resume) {
        (Some(dir), true) => TrainerState::load(dir)?,
        _ => None,
    };
    let mut state = match resumed {
        Some(mut s) => {
            // The run length and checkpoint cadence may change between
            // sessions; anything else would alter the trajectory.
            let comparable = ErlConfig {
                generations: config.generations,
                checkpoint_every: config.checkpoint_every,
                ..s.config.clone()
            };
            if comparable != *config {
                return Err(ErlError::State(
                    "saved trainer state was produced with a different configuration".into(),
                ));
            }
            s.config = config.clone();
            if s.params.len() != initial.len() {
                return Err(ErlError::State("saved parameters have the wrong length".into()));
            }
            s
        }
        None => TrainerState {
            config: config.clone(),
            next_generation: 0,
            optimizer: OptimizerState::new(&config.optimizer, initial.len()),
            params: initial.into_inner(),
            records: Vec::new(),
        },
    };
    let end = options
        .stop_after
        .map_or(config.generations, |s| s.min(config.generations));

    let mut center = ParamVector::new(std::mem::take(&mut state.params));
    while state.next_generation < end {
        let generation = state.next_generation;
        let started = Instant::now();
        let problem = objective.problem(generation, problem_seed(config.master_seed, generation))?;
        let epsilons = sample_epsilons(
            config.population_size,
            center.len(),
            noise_seed(config.master_seed, generation),
            config.mirrored_sampling,
        );
        let results = evaluate_population(
            objective,
            &problem,
            &center,
            &epsilons,
            config.noise_std,
            options.parallel,
        )?;
        let fitnesses: Vec<f64> = results.iter().map(|r| r.fitness).collect();
        let gradient = estimate_gradient(&fitnesses, &epsilons, config.noise_std, config.rank_shaping);
        state
            .optimizer
            .apply(&config.optimizer, config.learning_rate, center.as_mut_slice(), &gradient);

        let n = fitnesses.len() as f64;
        state.records.push(GenerationRecord {
            generation,
            mean_total_cost: -fitnesses.iter().sum::<f64>() / n,
            best_total_cost: results.iter().map(|r| r.total_cost).fold(f64::INFINITY, f64::min),
            param_norm: center.norm(),
            wall_time: if options.record_wall_time {
                started.elapsed().as_secs_f64()
            } else {
                0.0
            },
            fitnesses,
        });
        state.next_generation += 1;

        let due = config.checkpoint_every > 0 && state.next_generation % config.checkpoint_every == 0;
        if let (true, Some(dir)) = (due || state.next_generation == end, &options.checkpoint_dir) {
            state.params = center.as_slice().to_vec();
            state.save(dir)?;
            state.params.clear();
            if let Some(arch) = &options.arch {
                write_checkpoint(dir.join(POLICY_CHECKPOINT_FILE), arch, &center)?;
            }
        }
    }
    Ok(TrainOutcome {
        params: center,
        records: state.records,
    })
}

/// Random training problems for scheduling policies.
#[derive(Debug, Clone)]
pub struct TrainingScenario {
    pub templates: Vec<Arc<WorkflowTemplate>>,
    pub n_workflows: usize,
    pub lambda: f64,
    pub gamma: f64,
    pub beta: f64,
    pub catalog: Arc<VmCatalog>,
}

/// Total simulated cost of a network policy.
#[derive(Debug, Clone)]
pub struct SchedulingObjective {
    pub arch: NetworkArch,
    pub scenario: TrainingScenario,
}

impl Objective for SchedulingObjective {
    type Problem = ProblemInstance;

    fn problem(&self, _generation: usize, seed: u64) -> Result<ProblemInstance, ErlError> {
        let s = &self.scenario;
        Ok(sample_instance(
            &s.templates,
            s.n_workflows,
            s.lambda,
            s.gamma,
            s.beta,
            s.catalog.clone(),
            seed,
        )?)
    }

    fn total_cost(&self, problem: &ProblemInstance, params: &ParamVector) -> Result<f64, ErlError> {
        let mut policy = Policy::neural(self.arch, params.clone())?;
        Ok(run(problem, &mut policy)?.total_cost)
    }
}

/// `||theta - target||^2` as a cost; a smooth test problem for the trainer.
#[derive(Debug, Clone)]
pub struct SphereObjective {
    pub target: Vec<f64>,
}

impl Objective for SphereObjective {
    type Problem = ();

    fn problem(&self, _generation: usize, _seed: u64) -> Result<(), ErlError> {
        Ok(())
    }

    fn total_cost(&self, _problem: &(), params: &ParamVector) -> Result<f64, ErlError> {
        Ok(params
            .as_slice()
            .iter()
            .zip(&self.target)
            .map(|(a, b)| (a - b) * (a - b))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrored_pairs_are_exact_negations() {
        let eps = sample_epsilons(4, 6, 17, true);
        for p in 0..2 {
            for (a, b) in eps[2 * p].iter().zip(&eps[2 * p + 1]) {
                assert_eq!(*b, -a);
            }
        }
        assert_eq!(eps, sample_epsilons(4, 6, 17, true));
        assert_ne!(eps[0], eps[2]);
    }

    #[test]
    fn two_point_gradient_by_hand() {
        let e = vec![0.3, -1.2, 2.0];
        let neg: Vec<f64> = e.iter().map(|v| -v).collect();
        // (1/(2*1)) * (1*e + (-1)*(-e)) = e
        let g = estimate_gradient(&[1.0, -1.0], &[e.clone(), neg], 1.0, false);
        assert_eq!(g, e);
    }

    #[test]
    fn equal_fitness_with_mirroring_cancels() {
        let eps = sample_epsilons(6, 5, 3, true);
        let g = estimate_gradient(&[-4.0; 6], &eps, 0.05, false);
        assert!(g.iter().all(|v| *v == 0.0));
        let g = estimate_gradient(&[-4.0; 6], &eps, 0.05, true);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn equal_fitness_without_shaping_scales_mean_noise() {
        let eps = sample_epsilons(4, 3, 8, false);
        let g = estimate_gradient(&[2.0; 4], &eps, 0.5, false);
        for j in 0..3 {
            let mean: f64 = eps.iter().map(|e| e[j]).sum::<f64>() / 4.0;
            assert!((g[j] - 2.0 / 0.5 * mean).abs() < 1e-12);
        }
    }

    #[test]
    fn centered_ranks_span_half_interval() {
        assert_eq!(centered_ranks(&[3.0, 1.0, 2.0]), vec![0.5, -0.5, 0.0]);
        assert_eq!(centered_ranks(&[1.0, 1.0, 5.0]), vec![-0.25, -0.25, 0.5]);
    }

    #[test]
    fn config_validation() {
        let mut c = ErlConfig::full_scale();
        assert!(c.validate().is_ok());
        c.population_size = 5;
        assert!(c.validate().is_err());
        c.mirrored_sampling = false;
        assert!(c.validate().is_ok());
        c.noise_std = 0.0;
        assert!(c.validate().is_err());
        let zero = ErlConfig { generations: 0, ..ErlConfig::full_scale() };
        assert!(zero.validate().is_err());
    }

    #[test]
    fn full_scale_preset() {
        let c = ErlConfig::full_scale();
        assert_eq!(
            (c.population_size, c.generations, c.learning_rate, c.noise_std),
            (40, 3000, 0.01, 0.05)
        );
    }

    #[test]
    fn zero_noise_population_is_uniform() {
        let obj = SphereObjective { target: vec![1.0; 4] };
        let center = ParamVector::zeros(4);
        let eps = sample_epsilons(6, 4, 1, true);
        let r = evaluate_population(&obj, &(), &center, &eps, 0.0, false).unwrap();
        assert!(r.iter().all(|x| x.fitness == r[0].fitness));
        assert!(r.iter().all(|x| x.fitness + x.total_cost == 0.0));
    }

    #[test]
    fn adam_descends_on_sphere() {
        let config = ErlConfig {
            population_size: 20,
            generations: 200,
            learning_rate: 0.05,
            noise_std: 0.1,
            optimizer: Optimizer::adam(),
            ..ErlConfig::full_scale()
        };
        let obj = SphereObjective { target: vec![0.0; 10] };
        let start = ParamVector::new(vec![1.0; 10]);
        let out = train(&config, &obj, start.clone(), &TrainOptions::default()).unwrap();
        assert!(out.params.norm() < 0.2 * start.norm());
    }
}
