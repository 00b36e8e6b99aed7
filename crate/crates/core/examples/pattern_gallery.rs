//! The four synthetic workflow families at a few sizes.
//!
//!     cargo run --example pattern_gallery

use cloudsched::cloud::default_catalog;
use cloudsched::workflow::{generate_pattern, min_makespan, Pattern};

fn main() -> anyhow::Result<()> {
    let fastest = default_catalog().fastest_capacity();
    println!("{:<11} {:>5} {:>6} {:>6} {:>7} {:>8} {:>10}", "pattern", "tasks", "edges", "levels", "sources", "sinks", "min_mksp");
    for pattern in Pattern::GENERATED {
        for n in [25, 50, 100] {
            let wf = generate_pattern(pattern, n, 42)?;
            let depth = wf.levels().into_iter().max().unwrap_or(0) + 1;
            println!(
                "{:<11} {:>5} {:>6} {:>6} {:>7} {:>8} {:>10.2}",
                pattern.to_string(),
                wf.len(),
                wf.edge_count(),
                depth,
                wf.sources().count(),
                wf.sinks().count(),
                min_makespan(&wf, fastest)
            );
        }
    }

    // Shape of a small Montage, level by level.
    let wf = generate_pattern(Pattern::Montage, 25, 42)?;
    let levels = wf.levels();
    let depth = levels.iter().max().copied().unwrap_or(0);
    println!("\nmontage_25 level widths:");
    for l in 0..=depth {
        let width = levels.iter().filter(|&&x| x == l).count();
        println!("  {l:>2} {}", "#".repeat(width));
    }
    Ok(())
}
