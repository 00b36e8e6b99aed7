//! Recomputes costs from a trace alone, without the simulator's own
//! bookkeeping. Used to audit reported results.

use std::collections::BTreeMap;

use thiserror::Error;

use super::{TraceRow, WorkflowOutcome};
use crate::cloud::VmCatalog;

#[derive(Debug, Error, PartialEq)]
pub enum ReplayError {
    #[error("trace references unknown VM type `{0}`")]
    UnknownType(String),
    #[error("VM {0} appears with more than one type")]
    MixedTypes(usize),
    #[error("VM {vm} runs overlapping tasks at t={at}")]
    Overlap { vm: usize, at: f64 },
    #[error("trace references workflow {0} with no deadline record")]
    UnknownWorkflow(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayCost {
    pub vm_fee: f64,
    pub sla_penalty: f64,
    pub total_cost: f64,
}

struct VmUsage<'a> {
    type_name: &'a str,
    intervals: Vec<(f64, f64)>,
}

pub fn replay(
    trace: &[TraceRow],
    workflows: &[WorkflowOutcome],
    catalog: &VmCatalog,
) -> Result<ReplayCost, ReplayError> {
    let mut vms: BTreeMap<usize, VmUsage> = BTreeMap::new();
    let mut wct: Vec<Option<f64>> = vec![None; workflows.len()];
    for row in trace {
        let usage = vms.entry(row.vm_id).or_insert_with(|| VmUsage {
            type_name: &row.vm_type,
            intervals: Vec::new(),
        });
        if usage.type_name != row.vm_type {
            return Err(ReplayError::MixedTypes(row.vm_id));
        }
        usage.intervals.push((row.start, row.end));
        let slot = wct
            .get_mut(row.workflow)
            .ok_or(ReplayError::UnknownWorkflow(row.workflow))?;
        *slot = Some(slot.map_or(row.end, |c: f64| c.max(row.end)));
    }

    let mut vm_fee = 0.0;
    for (&vm, usage) in &mut vms {
        let price = catalog
            .types()
            .iter()
            .find(|t| t.name == usage.type_name)
            .ok_or_else(|| ReplayError::UnknownType(usage.type_name.to_string()))?
            .price_per_hour;
        usage.intervals.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(w) = usage.intervals.windows(2).find(|w| w[1].0 < w[0].1) {
            return Err(ReplayError::Overlap { vm, at: w[1].0 });
        }
        let first = usage.intervals[0].0;
        let last = usage.intervals.iter().map(|i| i.1).fold(f64::MIN, f64::max);
        let hours = ((last - first) / 3600.0).ceil().max(1.0);
        vm_fee += price * hours;
    }

    let mut sla_penalty = 0.0;
    for (outcome, done) in workflows.iter().zip(&wct) {
        let done = done.unwrap_or(outcome.arrival_time);
        sla_penalty += outcome.penalty_rate * (done - outcome.deadline).max(0.0) / 3600.0;
    }
    Ok(ReplayCost {
        vm_fee,
        sla_penalty,
        total_cost: vm_fee + sla_penalty,
    })
}
