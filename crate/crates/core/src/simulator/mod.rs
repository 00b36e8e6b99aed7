//! Discrete-event kernel for dynamic multi-workflow scheduling.
//!
//! Workflows arrive over time; every task that becomes ready is dispatched
//! immediately to a VM chosen by the policy. Each VM runs its tasks one at a
//! time in assignment order. At equal timestamps, task completions are
//! processed before arrivals; newly ready tasks of one event are dispatched
//! in ascending `(workflow, task)` order, each decision seeing the effect of
//! the previous ones.

mod io;
mod replay;

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::cmp::Reverse;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cloud::{exec_time, total_vm_fee, VmCatalog, VmInstance, SECONDS_PER_HOUR};
use crate::features::{
    arrival_rate_estimate, build_state, task_info, task_subdeadlines, CandidateHandle,
    CandidateView, DecisionContext, DecisionState,
};
use crate::policy::SchedulingPolicy;
use crate::workflow::{instantiate, Workflow, WorkflowError, WorkflowTemplate};

pub use io::{read_result_json, read_trace_csv, write_result_json, write_trace_csv, ResultJson, TraceRow, TRACE_CSV_HEADER};
pub use replay::{replay, ReplayCost, ReplayError};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Workflow(#[from] WorkflowError),
    #[error("policy selected candidate {index} but only {count} were offered")]
    PolicyIndex { index: usize, count: usize },
}

/// One scheduling problem: workflows sorted by arrival plus the VM catalog.
#[derive(Debug, Clone)]
pub struct ProblemInstance {
    pub workflows: Vec<Workflow>,
    pub catalog: Arc<VmCatalog>,
    pub gamma: f64,
    /// Configured arrival rate, used as the prior of the arrival-rate feature.
    pub lambda: f64,
    pub seed: u64,
}

impl ProblemInstance {
    pub fn new(
        workflows: Vec<Workflow>,
        catalog: Arc<VmCatalog>,
        gamma: f64,
        lambda: f64,
        seed: u64,
    ) -> Result<Self, SimError> {
        if workflows.windows(2).any(|w| w[0].arrival_time > w[1].arrival_time) {
            return Err(SimError::Argument("workflows must be sorted by arrival time".into()));
        }
        if !(lambda > 0.0) {
            return Err(SimError::Argument(format!("lambda must be positive, got {lambda}")));
        }
        Ok(Self {
            workflows,
            catalog,
            gamma,
            lambda,
            seed,
        })
    }

    pub fn task_count(&self) -> usize {
        self.workflows.iter().map(|w| w.template.len()).sum()
    }

    /// Short stable digest of everything that determines a run, used to
    /// show that two policies were compared on the same instance.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.catalog.to_json().as_bytes());
        for w in &self.workflows {
            h.update(w.template.to_json().as_bytes());
            for x in [w.arrival_time, w.deadline, w.penalty_rate] {
                h.update(x.to_le_bytes());
            }
        }
        let digest = h.finalize();
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Draws `n_workflows` templates uniformly with replacement and Poisson
/// arrivals of rate `lambda`, the first at time zero.
pub fn sample_instance(
    workflow_set: &[Arc<WorkflowTemplate>],
    n_workflows: usize,
    lambda: f64,
    gamma: f64,
    beta: f64,
    catalog: Arc<VmCatalog>,
    seed: u64,
) -> Result<ProblemInstance, SimError> {
    if workflow_set.is_empty() {
        return Err(SimError::Argument("workflow set is empty".into()));
    }
    if n_workflows == 0 {
        return Err(SimError::Argument("need at least one workflow".into()));
    }
    let gaps = Exp::new(lambda)
        .map_err(|_| SimError::Argument(format!("lambda must be positive, got {lambda}")))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let fastest = catalog.fastest_capacity();
    let mut arrival = 0.0;
    let mut workflows = Vec::with_capacity(n_workflows);
    for i in 0..n_workflows {
        if i > 0 {
            arrival += gaps.sample(&mut rng);
        }
        let template = workflow_set[rng.gen_range(0..workflow_set.len())].clone();
        workflows.push(instantiate(template, i, arrival, gamma, beta, fastest)?);
    }
    ProblemInstance::new(workflows, catalog, gamma, lambda, seed)
}

/// `penalty_rate` (per hour) times the overrun past the deadline in hours.
pub fn sla_penalty(workflow: &Workflow, wct: f64) -> f64 {
    workflow.penalty_rate * (wct - workflow.deadline).max(0.0) / SECONDS_PER_HOUR
}

/// Every leased instance by id, then one fresh candidate per catalog type.
pub fn candidate_vms(instances: &[VmInstance], catalog: &VmCatalog, now: f64) -> Vec<CandidateView> {
    let leased = instances.iter().map(|v| {
        let t = catalog.get(v.vm_type);
        CandidateView {
            handle: CandidateHandle::Leased(v.id),
            vm_type: v.vm_type,
            capacity: t.capacity,
            price_per_hour: t.price_per_hour,
            lease_start: v.lease_start,
            busy_until: v.busy_until,
            paid_hours: v.paid_hours(),
        }
    });
    let fresh = catalog.types().iter().enumerate().map(|(k, t)| CandidateView {
        handle: CandidateHandle::Fresh(k),
        vm_type: k,
        capacity: t.capacity,
        price_per_hour: t.price_per_hour,
        lease_start: now,
        busy_until: now,
        paid_hours: 0.0,
    });
    leased.chain(fresh).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EventKind {
    TaskCompletion { workflow: usize, task: usize, vm: usize },
    WorkflowArrival { workflow: usize },
}

impl EventKind {
    fn class(&self) -> u8 {
        match self {
            EventKind::TaskCompletion { .. } => 0,
            EventKind::WorkflowArrival { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent {
    pub time: f64,
    pub kind: EventKind,
    pub sequence: u64,
}

impl Eq for SimEvent {}

impl Ord for SimEvent {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time
            .total_cmp(&other.time)
            .then(self.kind.class().cmp(&other.kind.class()))
            .then(self.sequence.cmp(&other.sequence))
    }
}

impl PartialOrd for SimEvent {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceEntry {
    pub decision_time: f64,
    pub workflow: usize,
    pub task: usize,
    pub vm_id: usize,
    pub vm_type: usize,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WorkflowOutcome {
    pub workflow: usize,
    pub arrival_time: f64,
    pub completion_time: f64,
    pub deadline: f64,
    pub penalty_rate: f64,
    pub penalty: f64,
}

#[derive(Debug, Clone)]
pub struct ScheduleResult {
    pub total_cost: f64,
    pub vm_fee: f64,
    pub sla_penalty: f64,
    pub per_workflow: Vec<WorkflowOutcome>,
    pub trace: Vec<TraceEntry>,
    pub instances: Vec<VmInstance>,
}

struct Progress {
    remaining_preds: Vec<usize>,
    subdeadlines: Vec<f64>,
    completed: usize,
    completion_time: f64,
}

struct Kernel<'a> {
    problem: &'a ProblemInstance,
    queue: BinaryHeap<Reverse<SimEvent>>,
    sequence: u64,
    instances: Vec<VmInstance>,
    progress: Vec<Progress>,
    arrived: usize,
    first_arrival: f64,
    trace: Vec<TraceEntry>,
}

impl<'a> Kernel<'a> {
    fn new(problem: &'a ProblemInstance) -> Self {
        let fastest = problem.catalog.fastest_capacity();
        let progress = problem
            .workflows
            .iter()
            .map(|w| Progress {
                remaining_preds: w.template.tasks().iter().map(|t| t.predecessors.len()).collect(),
                subdeadlines: task_subdeadlines(&w.template, w.arrival_time, w.deadline, fastest),
                completed: 0,
                completion_time: w.arrival_time,
            })
            .collect();
        let mut kernel = Self {
            problem,
            queue: BinaryHeap::new(),
            sequence: 0,
            instances: Vec::new(),
            progress,
            arrived: 0,
            first_arrival: 0.0,
            trace: Vec::with_capacity(problem.task_count()),
        };
        for (i, w) in problem.workflows.iter().enumerate() {
            kernel.push(w.arrival_time, EventKind::WorkflowArrival { workflow: i });
        }
        kernel
    }

    fn push(&mut self, time: f64, kind: EventKind) {
        self.queue.push(Reverse(SimEvent {
            time,
            kind,
            sequence: self.sequence,
        }));
        self.sequence += 1;
    }

    fn dispatch<P, F>(
        &mut self,
        now: f64,
        workflow: usize,
        task: usize,
        policy: &mut P,
        observer: &mut F,
    ) -> Result<(), SimError>
    where
        P: SchedulingPolicy + ?Sized,
        F: FnMut(&DecisionState, usize),
    {
        let wf = &self.problem.workflows[workflow];
        let catalog = &*self.problem.catalog;
        let template = &wf.template;
        let node = template.task(task);
        let progress = &self.progress[workflow];
        let rate = arrival_rate_estimate(self.arrived, self.first_arrival, now, self.problem.lambda);
        let features = task_info(node.successors.len(), template.len(), progress.completed, rate);
        let ctx = DecisionContext {
            now,
            task_size: node.size,
            subdeadline: progress.subdeadlines[task],
            penalty_rate: wf.penalty_rate,
        };
        let candidates = candidate_vms(&self.instances, catalog, now);
        let state = build_state(features, &ctx, &candidates);
        let choice = policy.select(&state);
        if choice >= candidates.len() {
            return Err(SimError::PolicyIndex {
                index: choice,
                count: candidates.len(),
            });
        }
        observer(&state, choice);
        let vm_id = match candidates[choice].handle {
            CandidateHandle::Leased(id) => id,
            CandidateHandle::Fresh(k) => {
                let id = self.instances.len();
                self.instances.push(VmInstance::lease(id, k, now));
                id
            }
        };
        let instance = &mut self.instances[vm_id];
        let exec = exec_time(node.size, catalog.get(instance.vm_type));
        let (start, end) = instance.assign(workflow, task, now, exec);
        self.trace.push(TraceEntry {
            decision_time: now,
            workflow,
            task,
            vm_id,
            vm_type: instance.vm_type,
            start,
            end,
        });
        self.push(end, EventKind::TaskCompletion { workflow, task, vm: vm_id });
        Ok(())
    }
}

pub fn run<P: SchedulingPolicy + ?Sized>(
    instance: &ProblemInstance,
    policy: &mut P,
) -> Result<ScheduleResult, SimError> {
    run_observed(instance, policy, |_, _| {})
}

/// Like [`run`], calling `observer(state, chosen_index)` after every decision.
pub fn run_observed<P, F>(
    instance: &ProblemInstance,
    policy: &mut P,
    mut observer: F,
) -> Result<ScheduleResult, SimError>
where
    P: SchedulingPolicy + ?Sized,
    F: FnMut(&DecisionState, usize),
{
    let mut kernel = Kernel::new(instance);
    let mut ready: Vec<(usize, usize)> = Vec::new();
    while let Some(Reverse(event)) = kernel.queue.pop() {
        let now = event.time;
        ready.clear();
        match event.kind {
            EventKind::WorkflowArrival { workflow } => {
                if kernel.arrived == 0 {
                    kernel.first_arrival = now;
                }
                kernel.arrived += 1;
                ready.extend(instance.workflows[workflow].template.sources().map(|t| (workflow, t)));
            }
            EventKind::TaskCompletion { workflow, task, .. } => {
                let progress = &mut kernel.progress[workflow];
                progress.completed += 1;
                progress.completion_time = progress.completion_time.max(now);
                for &s in &instance.workflows[workflow].template.task(task).successors {
                    progress.remaining_preds[s] -= 1;
                    if progress.remaining_preds[s] == 0 {
                        ready.push((workflow, s));
                    }
                }
            }
        }
        ready.sort_unstable();
        for &(workflow, task) in &ready {
            kernel.dispatch(now, workflow, task, policy, &mut observer)?;
        }
    }
    debug_assert_eq!(kernel.trace.len(), instance.task_count());

    let per_workflow: Vec<WorkflowOutcome> = instance
        .workflows
        .iter()
        .zip(&kernel.progress)
        .enumerate()
        .map(|(i, (w, p))| WorkflowOutcome {
            workflow: i,
            arrival_time: w.arrival_time,
            completion_time: p.completion_time,
            deadline: w.deadline,
            penalty_rate: w.penalty_rate,
            penalty: sla_penalty(w, p.completion_time),
        })
        .collect();
    let vm_fee = total_vm_fee(&kernel.instances, &instance.catalog);
    let sla_penalty: f64 = per_workflow.iter().map(|o| o.penalty).sum();
    Ok(ScheduleResult {
        total_cost: vm_fee + sla_penalty,
        vm_fee,
        sla_penalty,
        per_workflow,
        trace: kernel.trace,
        instances: kernel.instances,
    })
}
