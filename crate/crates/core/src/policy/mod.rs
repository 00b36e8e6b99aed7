//! Scheduling policies: map a [`DecisionState`] to the index of the
//! candidate VM that runs the ready task.

mod checkpoint;
mod mlp;
pub mod nn;
mod spn;

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::DecisionState;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CHECKPOINT_MAGIC};
pub use mlp::{mlp_forward, MlpArchitecture};
pub use spn::{spn_forward, NormPlacement, SpnArchitecture};

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("parameter vector has length {actual}, architecture needs {expected}")]
    ParamLength { expected: usize, actual: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Anything that can pick a candidate. Implementations must return an index
/// below `state.len()`.
pub trait SchedulingPolicy {
    fn select(&mut self, state: &DecisionState) -> usize;
}

impl<P: SchedulingPolicy + ?Sized> SchedulingPolicy for Box<P> {
    fn select(&mut self, state: &DecisionState) -> usize {
        (**self).select(state)
    }
}

/// Flat network parameters.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self + scale * direction`.
    pub fn perturbed(&self, direction: &[f64], scale: f64) -> Self {
        Self(self.0.iter().zip(direction).map(|(a, d)| a + scale * d).collect())
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// A trainable network shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NetworkArch {
    Spn(SpnArchitecture),
    Mlp(MlpArchitecture),
}

impl Default for NetworkArch {
    fn default() -> Self {
        NetworkArch::Spn(SpnArchitecture::default())
    }
}

impl NetworkArch {
    pub fn validate(&self) -> Result<(), PolicyError> {
        match self {
            NetworkArch::Spn(a) => a.validate(),
            NetworkArch::Mlp(a) => a.validate(),
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            NetworkArch::Spn(a) => a.param_count(),
            NetworkArch::Mlp(a) => a.param_count(),
        }
    }

    pub fn segments(&self) -> Vec<nn::Segment> {
        match self {
            NetworkArch::Spn(a) => a.segments(),
            NetworkArch::Mlp(a) => a.segments(),
        }
    }

    pub fn forward(&self, params: &[f64], state: &DecisionState) -> Result<Vec<f64>, PolicyError> {
        match self {
            NetworkArch::Spn(a) => spn_forward(a, params, state),
            NetworkArch::Mlp(a) => mlp_forward(a, params, state),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            NetworkArch::Spn(_) => "spn-cws",
            NetworkArch::Mlp(_) => "per-vm-mlp",
        }
    }
}

pub fn param_count(arch: &NetworkArch) -> usize {
    arch.param_count()
}

/// Fan-in scaled Gaussian weights, zero biases, unit layer-norm gains.
pub fn init_params(arch: &NetworkArch, seed: u64) -> ParamVector {
    ParamVector(nn::init_segments(&arch.segments(), seed))
}

/// Index of the largest priority, lowest index on ties. NaN never wins.
pub fn argmax(priorities: &[f64]) -> usize {
    let mut best = 0;
    let mut best_value = f64::NEG_INFINITY;
    for (i, &p) in priorities.iter().enumerate() {
        if p > best_value {
            best = i;
            best_value = p;
        }
    }
    best
}

fn min_by_key<F: Fn(usize) -> f64>(indices: impl Iterator<Item = usize>, key: F) -> Option<usize> {
    indices.fold(None, |best: Option<(usize, f64)>, i| {
        let k = key(i);
        match best {
            Some((_, bk)) if bk <= k => best,
            _ => Some((i, k)),
        }
    })
    .map(|(i, _)| i)
}

fn require_candidates(state: &DecisionState) {
    assert_eq!(
        state.candidates.len(),
        state.len(),
        "heuristic policies need candidate estimates aligned with vm_info"
    );
}

/// Cheapest (lowest added rental fee) candidate that meets the task
/// sub-deadline; otherwise the one finishing earliest.
pub fn prolis_like_select(state: &DecisionState) -> usize {
    require_candidates(state);
    let c = &state.candidates;
    min_by_key((0..c.len()).filter(|&i| c[i].meets_deadline), |i| c[i].incurred_fee)
        .or_else(|| min_by_key(0..c.len(), |i| c[i].est_completion))
        .unwrap_or(0)
}

/// Cheapest candidate meeting the sub-deadline; otherwise the fastest type,
/// earliest available among equals, regardless of cost.
pub fn grp_heft_like_select(state: &DecisionState) -> usize {
    require_candidates(state);
    let c = &state.candidates;
    if let Some(i) = min_by_key((0..c.len()).filter(|&i| c[i].meets_deadline), |i| c[i].incurred_fee) {
        return i;
    }
    let top = c.iter().map(|x| x.capacity).fold(f64::NEG_INFINITY, f64::max);
    min_by_key((0..c.len()).filter(|&i| c[i].capacity == top), |i| c[i].est_start).unwrap_or(0)
}

/// The flagged fittest candidate; otherwise the lowest incurred cost.
pub fn cheapest_feasible_select(state: &DecisionState) -> usize {
    if let Some(i) = state.fittest() {
        return i;
    }
    let costs: Vec<f64> = state.vm_info.iter().map(|r| -r[crate::features::INCURRED_COST]).collect();
    argmax(&costs)
}

pub enum Policy {
    SpnCws { arch: SpnArchitecture, params: ParamVector },
    PerVmMlp { arch: MlpArchitecture, params: ParamVector },
    ProLisLike,
    GrpHeftLike,
    Random(ChaCha8Rng),
    CheapestFeasible,
}

impl Policy {
    pub fn neural(arch: NetworkArch, params: ParamVector) -> Result<Self, PolicyError> {
        arch.validate()?;
        if params.len() != arch.param_count() {
            return Err(PolicyError::ParamLength {
                expected: arch.param_count(),
                actual: params.len(),
            });
        }
        Ok(match arch {
            NetworkArch::Spn(arch) => Policy::SpnCws { arch, params },
            NetworkArch::Mlp(arch) => Policy::PerVmMlp { arch, params },
        })
    }

    pub fn random(seed: u64) -> Self {
        Policy::Random(ChaCha8Rng::seed_from_u64(seed))
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::SpnCws { .. } => "spn-cws",
            Policy::PerVmMlp { .. } => "per-vm-mlp",
            Policy::ProLisLike => "prolis-like",
            Policy::GrpHeftLike => "grp-heft-like",
            Policy::Random(_) => "random",
            Policy::CheapestFeasible => "cheapest-feasible",
        }
    }

    /// Network priorities, or `None` for rule-based kinds.
    pub fn priorities(&self, state: &DecisionState) -> Option<Vec<f64>> {
        let out = match self {
            Policy::SpnCws { arch, params } => spn_forward(arch, params.as_slice(), state),
            Policy::PerVmMlp { arch, params } => mlp_forward(arch, params.as_slice(), state),
            _ => return None,
        };
        Some(out.expect("parameter length checked at construction"))
    }
}

impl fmt::Debug for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl SchedulingPolicy for Policy {
    fn select(&mut self, state: &DecisionState) -> usize {
        match self {
            Policy::SpnCws { .. } | Policy::PerVmMlp { .. } => {
                argmax(&self.priorities(state).expect("neural policy"))
            }
            Policy::ProLisLike => prolis_like_select(state),
            Policy::GrpHeftLike => grp_heft_like_select(state),
            Policy::Random(rng) => rng.gen_range(0..state.len()),
            Policy::CheapestFeasible => cheapest_feasible_select(state),
        }
    }
}

/// Picks a candidate with `policy`.
pub fn select(policy: &mut Policy, state: &DecisionState) -> usize {
    policy.select(state)
}

/// Names of the rule-based baselines accepted on the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Baseline {
    ProlisLike,
    GrpHeftLike,
    Random,
    CheapestFeasible,
}

impl Baseline {
    pub const ALL: [Baseline; 4] = [
        Baseline::ProlisLike,
        Baseline::GrpHeftLike,
        Baseline::Random,
        Baseline::CheapestFeasible,
    ];

    pub fn build(self, seed: u64) -> Policy {
        match self {
            Baseline::ProlisLike => Policy::ProLisLike,
            Baseline::GrpHeftLike => Policy::GrpHeftLike,
            Baseline::Random => Policy::random(seed),
            Baseline::CheapestFeasible => Policy::CheapestFeasible,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Baseline::ProlisLike => "prolis-like",
            Baseline::GrpHeftLike => "grp-heft-like",
            Baseline::Random => "random",
            Baseline::CheapestFeasible => "cheapest-feasible",
        }
    }
}

impl FromStr for Baseline {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Baseline::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown baseline `{s}` (expected one of prolis-like, grp-heft-like, random, cheapest-feasible)"))
    }
}
