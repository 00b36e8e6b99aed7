//! Parse a Pegasus DAX file and print its structure.
//!
//!     cargo run --example dax_ingest -- path/to/workflow.dax
//!
//! Without an argument a small built-in diamond workflow is used.

use std::env;
use std::fs;

use cloudsched::cloud::default_catalog;
use cloudsched::workflow::{min_makespan, parse_dax, to_dax, REFERENCE_CAPACITY};

const DIAMOND: &str = r#"<?xml version="1.0" encoding="UTF-8"?>
<adag xmlns="http://pegasus.isi.edu/schema/DAX" name="diamond" jobCount="4">
  <job id="ID00000" name="preprocess" runtime="10.0"/>
  <job id="ID00001" name="findrange" runtime="12.5"/>
  <job id="ID00002" name="findrange" runtime="7.25"/>
  <job id="ID00003" name="analyze" runtime="3.0"/>
  <child ref="ID00001"><parent ref="ID00000"/></child>
  <child ref="ID00002"><parent ref="ID00000"/></child>
  <child ref="ID00003"><parent ref="ID00001"/><parent ref="ID00002"/></child>
</adag>"#;

fn main() -> anyhow::Result<()> {
    let text = match env::args().nth(1) {
        Some(path) => fs::read_to_string(path)?,
        None => DIAMOND.to_string(),
    };
    let wf = parse_dax(&text)?;
    let catalog = default_catalog();

    println!("{} ({}): {} tasks, {} edges", wf.name(), wf.pattern(), wf.len(), wf.edge_count());
    println!("sources {:?}, sinks {:?}", wf.sources().collect::<Vec<_>>(), wf.sinks().collect::<Vec<_>>());
    let levels = wf.levels();
    for task in wf.tasks().iter().take(12) {
        println!(
            "  task {:>3} level {:>2} size {:>9.2} preds {:?}",
            task.id, levels[task.id], task.size, task.predecessors
        );
    }
    if wf.len() > 12 {
        println!("  ... {} more", wf.len() - 12);
    }

    // runtimes in the file are seconds on a reference VM with this capacity
    println!("reference capacity {REFERENCE_CAPACITY}");
    println!("min makespan on {}: {:.2}s", catalog.get(catalog.fastest_index()).name, min_makespan(&wf, catalog.fastest_capacity()));

    let again = parse_dax(&to_dax(&wf, REFERENCE_CAPACITY))?;
    println!("DAX round trip preserves the DAG: {}", again.tasks() == wf.tasks());
    Ok(())
}
