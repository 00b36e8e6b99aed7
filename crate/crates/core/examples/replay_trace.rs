//! Schedule an instance, write the trace and result files, then recompute
//! the cost from the trace alone.
//!
//!     cargo run --example replay_trace -- [out_dir]

use std::env;
use std::fs::File;
use std::io::BufWriter;
use std::sync::Arc;

use cloudsched::bench::{synthetic_templates, WorkflowSet};
use cloudsched::cloud::default_catalog;
use cloudsched::policy::Baseline;
use cloudsched::simulator::{
    read_result_json, read_trace_csv, replay, run, sample_instance, write_result_json, write_trace_csv,
};

fn main() -> anyhow::Result<()> {
    let tmp = tempfile::tempdir()?;
    let dir = env::args().nth(1).map(Into::into).unwrap_or_else(|| tmp.path().to_path_buf());
    std::fs::create_dir_all(&dir)?;

    let catalog = Arc::new(default_catalog());
    let templates = synthetic_templates(WorkflowSet::Small, 0)?;
    let instance = sample_instance(&templates, 6, 0.01, 1.0, 0.24, catalog.clone(), 3)?;
    let result = run(&instance, &mut Baseline::Random.build(9))?;

    let trace_path = dir.join("random.trace.csv");
    let result_path = dir.join("random.result.json");
    write_trace_csv(BufWriter::new(File::create(&trace_path)?), &result, &catalog)?;
    write_result_json(BufWriter::new(File::create(&result_path)?), &result)?;
    println!("wrote {} ({} rows) and {}", trace_path.display(), result.trace.len(), result_path.display());

    let rows = read_trace_csv(File::open(&trace_path)?)?;
    let reported = read_result_json(File::open(&result_path)?)?;
    let cost = replay(&rows, &reported.per_workflow, &catalog)?;
    println!("reported  total {:.6} fee {:.6} penalty {:.6}", reported.total_cost, reported.vm_fee, reported.sla_penalty);
    println!("replayed  total {:.6} fee {:.6} penalty {:.6}", cost.total_cost, cost.vm_fee, cost.sla_penalty);
    println!("match: {}", cost.total_cost == reported.total_cost);
    Ok(())
}
