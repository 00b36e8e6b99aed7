//! Decision-state construction: three task features and four features per
//! candidate VM, plus the raw quantities heuristic policies rely on.

use std::io::Write;

use crate::cloud::{billed_hours, SECONDS_PER_HOUR};
use crate::workflow::{min_makespan, WorkflowTemplate};

pub const TASK_FEATURES: usize = 3;
pub const VM_FEATURES: usize = 4;

/// Column indices into a `vm_info` row.
pub const DEADLINE_MET: usize = 0;
pub const INCURRED_COST: usize = 1;
pub const REMAINING_TIME: usize = 2;
pub const FITTEST: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CandidateHandle {
    /// An instance already leased, by instance id.
    Leased(usize),
    /// A new instance of the given catalog type.
    Fresh(usize),
}

/// What the feature layer needs to know about one candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateView {
    pub handle: CandidateHandle,
    pub vm_type: usize,
    pub capacity: f64,
    pub price_per_hour: f64,
    /// Lease start; for a fresh candidate this is the decision time.
    pub lease_start: f64,
    pub busy_until: f64,
    /// Whole hours already paid (zero for a fresh candidate).
    pub paid_hours: f64,
}

/// Per-decision facts shared by every candidate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionContext {
    pub now: f64,
    pub task_size: f64,
    pub subdeadline: f64,
    pub penalty_rate: f64,
}

/// Raw per-candidate estimates backing one `vm_info` row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateInfo {
    pub handle: CandidateHandle,
    pub vm_type: usize,
    pub capacity: f64,
    pub price_per_hour: f64,
    pub est_start: f64,
    pub est_completion: f64,
    /// Extra rental fee this assignment adds.
    pub incurred_fee: f64,
    /// `incurred_fee` plus the sub-deadline overrun penalty.
    pub incurred_cost: f64,
    pub meets_deadline: bool,
    /// Paid rental time left after the task, in hours.
    pub remaining_hours: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionState {
    pub task_info: [f64; TASK_FEATURES],
    pub vm_info: Vec<[f64; VM_FEATURES]>,
    /// Aligned with `vm_info`; empty for states assembled from bare
    /// feature matrices.
    pub candidates: Vec<CandidateInfo>,
}

impl DecisionState {
    pub fn from_features(task_info: [f64; TASK_FEATURES], vm_info: Vec<[f64; VM_FEATURES]>) -> Self {
        Self {
            task_info,
            vm_info,
            candidates: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.vm_info.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vm_info.is_empty()
    }

    /// Row index of the flagged fittest candidate, if any.
    pub fn fittest(&self) -> Option<usize> {
        self.vm_info.iter().position(|row| row[FITTEST] == 1.0)
    }

    /// Same state with candidate rows reordered: row `i` of the result is
    /// row `perm[i]` of `self`. The fittest flag travels with its row.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        assert_eq!(perm.len(), self.len());
        Self {
            task_info: self.task_info,
            vm_info: perm.iter().map(|&i| self.vm_info[i]).collect(),
            candidates: if self.candidates.is_empty() {
                Vec::new()
            } else {
                perm.iter().map(|&i| self.candidates[i]).collect()
            },
        }
    }
}

/// `[successors / total, completed / total, arrival-rate estimate]`.
pub fn task_info(
    successors: usize,
    total_tasks: usize,
    completed: usize,
    arrival_rate: f64,
) -> [f64; TASK_FEATURES] {
    let total = total_tasks as f64;
    [successors as f64 / total, completed as f64 / total, arrival_rate]
}

/// Workflows arrived so far divided by the time since the first arrival;
/// falls back to `prior` until two workflows have arrived.
pub fn arrival_rate_estimate(arrived: usize, first_arrival: f64, now: f64, prior: f64) -> f64 {
    let elapsed = now - first_arrival;
    if arrived < 2 || elapsed <= 0.0 {
        prior
    } else {
        arrived as f64 / elapsed
    }
}

/// Absolute sub-deadline of every task. The budget `deadline - arrival`
/// is split over topological levels in proportion to each level's longest
/// task on the fastest type; a task's sub-deadline is the cumulative
/// budget through its level. The last level ends exactly at `deadline`.
pub fn task_subdeadlines(
    template: &WorkflowTemplate,
    arrival_time: f64,
    deadline: f64,
    fastest_capacity: f64,
) -> Vec<f64> {
    let levels = template.levels();
    let depth = levels.iter().copied().max().unwrap_or(0) + 1;
    let mut level_max = vec![0.0f64; depth];
    for (task, &l) in template.tasks().iter().zip(&levels) {
        level_max[l] = level_max[l].max(task.size / fastest_capacity);
    }
    let total: f64 = level_max.iter().sum();
    let budget = deadline - arrival_time;
    let mut cumulative = Vec::with_capacity(depth);
    let mut acc = 0.0;
    for (l, m) in level_max.iter().enumerate() {
        acc += m;
        cumulative.push(if l + 1 == depth {
            deadline
        } else {
            arrival_time + budget * (acc / total)
        });
    }
    levels.iter().map(|&l| cumulative[l]).collect()
}

/// Sub-deadline of a single task (see [`task_subdeadlines`]).
pub fn task_subdeadline(
    task: usize,
    template: &WorkflowTemplate,
    arrival_time: f64,
    deadline: f64,
    fastest_capacity: f64,
) -> f64 {
    task_subdeadlines(template, arrival_time, deadline, fastest_capacity)[task]
}

/// Estimates for one candidate. The returned raw quantities are turned
/// into a feature row by [`build_state`].
pub fn candidate_info(ctx: &DecisionContext, cand: &CandidateView) -> CandidateInfo {
    let est_start = ctx.now.max(cand.busy_until);
    let exec = ctx.task_size / cand.capacity;
    let est_completion = est_start + exec;
    let hours_after = billed_hours(est_completion - cand.lease_start);
    let incurred_fee = cand.price_per_hour * (hours_after - cand.paid_hours);
    let overrun = (est_completion - ctx.subdeadline).max(0.0);
    let incurred_cost = incurred_fee + ctx.penalty_rate * overrun / SECONDS_PER_HOUR;
    let paid_until = cand.lease_start + hours_after * SECONDS_PER_HOUR;
    CandidateInfo {
        handle: cand.handle,
        vm_type: cand.vm_type,
        capacity: cand.capacity,
        price_per_hour: cand.price_per_hour,
        est_start,
        est_completion,
        incurred_fee,
        incurred_cost,
        meets_deadline: est_completion <= ctx.subdeadline,
        remaining_hours: (paid_until - est_completion) / SECONDS_PER_HOUR,
    }
}

/// Four-feature row for one candidate given the decision-wide maximum
/// incurred cost and the fittest flag.
pub fn vm_info(info: &CandidateInfo, max_incurred_cost: f64, fittest: bool) -> [f64; VM_FEATURES] {
    let scale = if max_incurred_cost > 0.0 { max_incurred_cost } else { 1.0 };
    [
        f64::from(u8::from(info.meets_deadline)),
        info.incurred_cost / scale,
        info.remaining_hours,
        f64::from(u8::from(fittest)),
    ]
}

/// Index of the cheapest candidate (by incurred cost) that meets its
/// sub-deadline, lowest index on ties.
pub fn fittest_index(infos: &[CandidateInfo]) -> Option<usize> {
    infos
        .iter()
        .enumerate()
        .filter(|(_, c)| c.meets_deadline)
        .fold(None, |best: Option<(usize, f64)>, (i, c)| match best {
            Some((_, cost)) if cost <= c.incurred_cost => best,
            _ => Some((i, c.incurred_cost)),
        })
        .map(|(i, _)| i)
}

pub fn build_state(
    task_info: [f64; TASK_FEATURES],
    ctx: &DecisionContext,
    candidates: &[CandidateView],
) -> DecisionState {
    assert!(!candidates.is_empty(), "a decision needs at least one candidate");
    let infos: Vec<CandidateInfo> = candidates.iter().map(|c| candidate_info(ctx, c)).collect();
    let max_cost = infos.iter().map(|c| c.incurred_cost).fold(0.0, f64::max);
    let fittest = fittest_index(&infos);
    let vm_info = infos
        .iter()
        .enumerate()
        .map(|(i, c)| vm_info(c, max_cost, fittest == Some(i)))
        .collect();
    DecisionState {
        task_info,
        vm_info,
        candidates: infos,
    }
}

/// Writes one CSV row per candidate:
/// `decision,row,succ,completion,arrival_rate,deadline_met,incurred_cost,remaining,fittest,chosen`.
pub fn write_state_rows<W: Write>(
    out: &mut W,
    decision: usize,
    state: &DecisionState,
    chosen: usize,
) -> std::io::Result<()> {
    let [a, b, c] = state.task_info;
    for (i, row) in state.vm_info.iter().enumerate() {
        writeln!(
            out,
            "{decision},{i},{a},{b},{c},{},{},{},{},{}",
            row[0],
            row[1],
            row[2],
            row[3],
            u8::from(i == chosen)
        )?;
    }
    Ok(())
}

pub const STATE_CSV_HEADER: &str =
    "decision,row,succ,completion,arrival_rate,deadline_met,incurred_cost,remaining,fittest,chosen";

/// Convenience used by tests and examples: workflow-level sub-deadlines
/// for a template with `gamma`-relaxed deadline arriving at `arrival`.
pub fn subdeadlines_for_gamma(
    template: &WorkflowTemplate,
    arrival: f64,
    gamma: f64,
    fastest_capacity: f64,
) -> Vec<f64> {
    let deadline = arrival + gamma * min_makespan(template, fastest_capacity);
    task_subdeadlines(template, arrival, deadline, fastest_capacity)
}
