//! Trace CSV and result JSON.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{ScheduleResult, WorkflowOutcome};
use crate::cloud::VmCatalog;

pub const TRACE_CSV_HEADER: [&str; 7] =
    ["decision_time", "workflow", "task", "vm_id", "vm_type", "start", "end"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub decision_time: f64,
    pub workflow: usize,
    pub task: usize,
    pub vm_id: usize,
    pub vm_type: String,
    pub start: f64,
    pub end: f64,
}

/// Floats are written in shortest round-trip form, so reading a trace
/// back yields bit-identical values.
pub fn write_trace_csv<W: Write>(
    out: W,
    result: &ScheduleResult,
    catalog: &VmCatalog,
) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for e in &result.trace {
        w.serialize(TraceRow {
            decision_time: e.decision_time,
            workflow: e.workflow,
            task: e.task,
            vm_id: e.vm_id,
            vm_type: catalog.get(e.vm_type).name.clone(),
            start: e.start,
            end: e.end,
        })?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_trace_csv<R: Read>(input: R) -> csv::Result<Vec<TraceRow>> {
    csv::Reader::from_reader(input).deserialize().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultJson {
    pub total_cost: f64,
    pub vm_fee: f64,
    pub sla_penalty: f64,
    pub per_workflow: Vec<WorkflowOutcome>,
}

impl From<&ScheduleResult> for ResultJson {
    fn from(r: &ScheduleResult) -> Self {
        Self {
            total_cost: r.total_cost,
            vm_fee: r.vm_fee,
            sla_penalty: r.sla_penalty,
            per_workflow: r.per_workflow.clone(),
        }
    }
}

pub fn write_result_json<W: Write>(out: W, result: &ScheduleResult) -> serde_json::Result<()> {
    serde_json::to_writer_pretty(out, &ResultJson::from(result))
}

pub fn read_result_json<R: Read>(input: R) -> serde_json::Result<ResultJson> {
    serde_json::from_reader(input)
}
