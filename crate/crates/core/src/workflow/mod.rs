//! Workflow DAGs: task templates, deadline arithmetic, synthetic pattern
//! generators and Pegasus DAX ingestion.

mod dax;
mod patterns;

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use dax::{parse_dax, parse_dax_with_capacity, to_dax, REFERENCE_CAPACITY};
pub use patterns::generate_pattern;

#[derive(Debug, Error, PartialEq)]
pub enum WorkflowError {
    #[error("DAX parse error at line {line}: {message}")]
    Parse { line: u32, message: String },
    #[error("job `{job}`: {message}")]
    InvalidJob { job: String, message: String },
    #[error("dependency cycle detected among tasks {0:?}")]
    Cycle(Vec<usize>),
    #[error("invalid task graph: {0}")]
    InvalidGraph(String),
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Stylized scientific workflow families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pattern {
    CyberShake,
    Montage,
    Inspiral,
    #[serde(rename = "SIPHT")]
    Sipht,
    Custom,
}

impl Pattern {
    pub const GENERATED: [Pattern; 4] = [
        Pattern::CyberShake,
        Pattern::Montage,
        Pattern::Inspiral,
        Pattern::Sipht,
    ];
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Pattern::CyberShake => "CyberShake",
            Pattern::Montage => "Montage",
            Pattern::Inspiral => "Inspiral",
            Pattern::Sipht => "SIPHT",
            Pattern::Custom => "Custom",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Pattern {
    type Err = WorkflowError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cybershake" => Ok(Pattern::CyberShake),
            "montage" => Ok(Pattern::Montage),
            "inspiral" => Ok(Pattern::Inspiral),
            "sipht" => Ok(Pattern::Sipht),
            "custom" => Ok(Pattern::Custom),
            other => Err(WorkflowError::Argument(format!("unknown pattern `{other}`"))),
        }
    }
}

/// A task node. `size` is in compute units; predecessor and successor
/// lists are sorted and mutually consistent.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskTemplate {
    pub id: usize,
    pub size: f64,
    pub predecessors: Vec<usize>,
    pub successors: Vec<usize>,
}

/// A validated workflow DAG.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkflowTemplate {
    name: String,
    pattern: Pattern,
    tasks: Vec<TaskTemplate>,
    topo_order: Vec<usize>,
}

impl WorkflowTemplate {
    /// Builds a template from task sizes and `(predecessor, successor)` edges.
    /// Duplicate edges are merged. Fails on self-loops, out-of-range ids,
    /// non-positive sizes and cycles.
    pub fn from_edges(
        name: impl Into<String>,
        pattern: Pattern,
        sizes: &[f64],
        edges: &[(usize, usize)],
    ) -> Result<Self, WorkflowError> {
        if sizes.is_empty() {
            return Err(WorkflowError::InvalidGraph("workflow has no tasks".into()));
        }
        let mut tasks: Vec<TaskTemplate> = sizes
            .iter()
            .enumerate()
            .map(|(id, &size)| TaskTemplate {
                id,
                size,
                predecessors: Vec::new(),
                successors: Vec::new(),
            })
            .collect();
        for t in &tasks {
            if !(t.size.is_finite() && t.size > 0.0) {
                return Err(WorkflowError::InvalidGraph(format!(
                    "task {} has non-positive size {}",
                    t.id, t.size
                )));
            }
        }
        for &(from, to) in edges {
            if from >= tasks.len() || to >= tasks.len() {
                return Err(WorkflowError::InvalidGraph(format!(
                    "edge {from}->{to} references a missing task"
                )));
            }
            if from == to {
                return Err(WorkflowError::Cycle(vec![from]));
            }
            tasks[from].successors.push(to);
            tasks[to].predecessors.push(from);
        }
        for t in &mut tasks {
            t.successors.sort_unstable();
            t.successors.dedup();
            t.predecessors.sort_unstable();
            t.predecessors.dedup();
        }
        let topo_order = topological_order(&tasks)?;
        Ok(Self {
            name: name.into(),
            pattern,
            tasks,
            topo_order,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn pattern(&self) -> Pattern {
        self.pattern
    }

    pub fn tasks(&self) -> &[TaskTemplate] {
        &self.tasks
    }

    pub fn task(&self, id: usize) -> &TaskTemplate {
        &self.tasks[id]
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// A topological order, smallest ready id first.
    pub fn topological_order(&self) -> &[usize] {
        &self.topo_order
    }

    pub fn sources(&self) -> impl Iterator<Item = usize> + '_ {
        self.tasks
            .iter()
            .filter(|t| t.predecessors.is_empty())
            .map(|t| t.id)
    }

    pub fn sinks(&self) -> impl Iterator<Item = usize> + '_ {
        self.tasks
            .iter()
            .filter(|t| t.successors.is_empty())
            .map(|t| t.id)
    }

    pub fn edge_count(&self) -> usize {
        self.tasks.iter().map(|t| t.successors.len()).sum()
    }

    /// Topological level of every task: 0 for sources, otherwise one more
    /// than the deepest predecessor.
    pub fn levels(&self) -> Vec<usize> {
        let mut level = vec![0usize; self.tasks.len()];
        for &id in &self.topo_order {
            level[id] = self.tasks[id]
                .predecessors
                .iter()
                .map(|&p| level[p] + 1)
                .max()
                .unwrap_or(0);
        }
        level
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&TemplateJson::from(self)).expect("template serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, WorkflowError> {
        let raw: TemplateJson = serde_json::from_str(text)
            .map_err(|e| WorkflowError::Argument(format!("template JSON: {e}")))?;
        raw.try_into()
    }
}

fn topological_order(tasks: &[TaskTemplate]) -> Result<Vec<usize>, WorkflowError> {
    let mut indegree: Vec<usize> = tasks.iter().map(|t| t.predecessors.len()).collect();
    let mut ready: VecDeque<usize> = (0..tasks.len()).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(tasks.len());
    while let Some(id) = ready.pop_front() {
        order.push(id);
        for &s in &tasks[id].successors {
            indegree[s] -= 1;
            if indegree[s] == 0 {
                ready.push_back(s);
            }
        }
    }
    if order.len() != tasks.len() {
        let stuck = (0..tasks.len()).filter(|&i| indegree[i] > 0).collect();
        return Err(WorkflowError::Cycle(stuck));
    }
    Ok(order)
}

#[derive(Serialize, Deserialize)]
struct TemplateJson {
    name: String,
    pattern: Pattern,
    tasks: Vec<TaskJson>,
}

#[derive(Serialize, Deserialize)]
struct TaskJson {
    id: usize,
    size: f64,
    predecessors: Vec<usize>,
}

impl From<&WorkflowTemplate> for TemplateJson {
    fn from(t: &WorkflowTemplate) -> Self {
        TemplateJson {
            name: t.name.clone(),
            pattern: t.pattern,
            tasks: t
                .tasks
                .iter()
                .map(|task| TaskJson {
                    id: task.id,
                    size: task.size,
                    predecessors: task.predecessors.clone(),
                })
                .collect(),
        }
    }
}

impl TryFrom<TemplateJson> for WorkflowTemplate {
    type Error = WorkflowError;

    fn try_from(raw: TemplateJson) -> Result<Self, Self::Error> {
        let n = raw.tasks.len();
        let mut sizes = vec![f64::NAN; n];
        let mut edges = Vec::new();
        for task in &raw.tasks {
            if task.id >= n || !sizes[task.id].is_nan() {
                return Err(WorkflowError::InvalidGraph(format!(
                    "task ids must be 0..{n} without gaps or duplicates (saw {})",
                    task.id
                )));
            }
            sizes[task.id] = task.size;
            edges.extend(task.predecessors.iter().map(|&p| (p, task.id)));
        }
        WorkflowTemplate::from_edges(raw.name, raw.pattern, &sizes, &edges)
    }
}

/// Critical-path length when every task runs on a VM of `fastest_capacity`
/// with unlimited parallelism and no queuing.
pub fn min_makespan(template: &WorkflowTemplate, fastest_capacity: f64) -> f64 {
    assert!(fastest_capacity > 0.0, "capacity must be positive");
    let mut finish = vec![0.0f64; template.len()];
    for &id in template.topological_order() {
        let task = template.task(id);
        let ready = task
            .predecessors
            .iter()
            .map(|&p| finish[p])
            .fold(0.0, f64::max);
        finish[id] = ready + task.size / fastest_capacity;
    }
    finish.into_iter().fold(0.0, f64::max)
}

/// A submitted workflow: a template plus arrival time, absolute SLA
/// deadline and penalty rate (currency per hour of overrun).
#[derive(Debug, Clone)]
pub struct Workflow {
    pub template: Arc<WorkflowTemplate>,
    pub instance_id: usize,
    pub arrival_time: f64,
    pub deadline: f64,
    pub penalty_rate: f64,
    pub gamma: f64,
    pub min_makespan: f64,
}

/// Attaches an SLA to a template: `deadline = arrival + gamma * min_makespan`.
pub fn instantiate(
    template: Arc<WorkflowTemplate>,
    instance_id: usize,
    arrival_time: f64,
    gamma: f64,
    beta: f64,
    fastest_capacity: f64,
) -> Result<Workflow, WorkflowError> {
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(WorkflowError::Argument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(WorkflowError::Argument(format!(
            "penalty rate must be non-negative, got {beta}"
        )));
    }
    if !(arrival_time >= 0.0 && arrival_time.is_finite()) {
        return Err(WorkflowError::Argument(format!(
            "arrival time must be non-negative, got {arrival_time}"
        )));
    }
    if !(fastest_capacity > 0.0) {
        return Err(WorkflowError::Argument("capacity must be positive".into()));
    }
    let mm = min_makespan(&template, fastest_capacity);
    Ok(Workflow {
        template,
        instance_id,
        arrival_time,
        deadline: arrival_time + gamma * mm,
        penalty_rate: beta,
        gamma,
        min_makespan: mm,
    })
}
