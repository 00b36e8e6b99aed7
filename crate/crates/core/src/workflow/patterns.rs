//! Stylized generators for the four scientific workflow families.
//!
//! Topology depends only on `(pattern, n_tasks)`; task sizes are drawn
//! log-uniformly in `[MIN_SIZE, MAX_SIZE]` compute units from the seed.
//! Below each family's minimum size the generator falls back to a
//! single fork-join (or a two-task chain).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Pattern, WorkflowError, WorkflowTemplate};

const MIN_SIZE: f64 = 10.0;
const MAX_SIZE: f64 = 1000.0;

pub fn generate_pattern(
    pattern: Pattern,
    n_tasks: usize,
    rng_seed: u64,
) -> Result<WorkflowTemplate, WorkflowError> {
    if n_tasks < 2 {
        return Err(WorkflowError::Argument(format!(
            "a generated workflow needs at least 2 tasks, got {n_tasks}"
        )));
    }
    let edges = match pattern {
        Pattern::CyberShake => cybershake(n_tasks),
        Pattern::Montage => montage(n_tasks),
        Pattern::Inspiral => inspiral(n_tasks),
        Pattern::Sipht => sipht(n_tasks),
        Pattern::Custom => fork_join(n_tasks),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let (lo, hi) = (MIN_SIZE.ln(), MAX_SIZE.ln());
    let sizes: Vec<f64> = (0..n_tasks).map(|_| rng.gen_range(lo..=hi).exp()).collect();
    WorkflowTemplate::from_edges(format!("{pattern}({n_tasks})"), pattern, &sizes, &edges)
}

fn fork_join(n: usize) -> Vec<(usize, usize)> {
    if n == 2 {
        return vec![(0, 1)];
    }
    let sink = n - 1;
    (1..sink).flat_map(|i| [(0, i), (i, sink)]).collect()
}

/// Roots fan out to synthesis tasks; each synthesis task feeds a peak
/// calculation; the two levels are zipped by two sinks.
fn cybershake(n: usize) -> Vec<(usize, usize)> {
    if n < 5 {
        return fork_join(n);
    }
    let roots = if n >= 12 { 2 } else { 1 };
    let rest = n - roots - 2;
    let pairs = rest / 2;
    let synth_count = pairs + rest % 2;
    let synth = roots;
    let peak = synth + synth_count;
    let zip_seis = n - 2;
    let zip_psa = n - 1;
    let mut edges = Vec::new();
    for i in 0..synth_count {
        edges.push((i % roots, synth + i));
        edges.push((synth + i, zip_seis));
        if i < pairs {
            edges.push((synth + i, peak + i));
            edges.push((peak + i, zip_psa));
        }
    }
    edges
}

/// Projections, pairwise difference fits, a background-model bottleneck,
/// per-image background correction, then a chain of aggregation stages.
fn montage(n: usize) -> Vec<(usize, usize)> {
    if n < 9 {
        return fork_join(n);
    }
    let rest = n - 6;
    let k = (rest / 4).max(1);
    let diffs = rest - 2 * k;
    let proj = 0;
    let diff = k;
    let concat = diff + diffs;
    let bg_model = concat + 1;
    let background = bg_model + 1;
    let imgtbl = background + k;
    let (add, shrink, jpeg) = (imgtbl + 1, imgtbl + 2, imgtbl + 3);
    debug_assert_eq!(jpeg, n - 1);
    let mut edges = Vec::new();
    for i in 0..diffs {
        edges.push((proj + i % k, diff + i));
        edges.push((proj + (i + 1) % k, diff + i));
        edges.push((diff + i, concat));
    }
    edges.push((concat, bg_model));
    for j in 0..k {
        edges.push((bg_model, background + j));
        edges.push((proj + j, background + j));
        edges.push((background + j, imgtbl));
    }
    edges.extend([(imgtbl, add), (add, shrink), (shrink, jpeg)]);
    edges
}

/// Two-stage pipelines (template bank -> inspiral) merging into a
/// reduction chain.
fn inspiral(n: usize) -> Vec<(usize, usize)> {
    let chain = (n / 10).max(1);
    let rest = n - chain;
    let pipelines = rest / 2;
    let single = rest % 2;
    let head = rest;
    let mut edges = Vec::new();
    for p in 0..pipelines {
        edges.push((2 * p, 2 * p + 1));
        edges.push((2 * p + 1, head));
    }
    if single == 1 {
        edges.push((rest - 1, head));
    }
    for c in 1..chain {
        edges.push((head + c - 1, head + c));
    }
    edges
}

/// A wide stage of independent tasks feeding a handful of collectors,
/// joined by a final sink when there is more than one collector.
fn sipht(n: usize) -> Vec<(usize, usize)> {
    let collectors = (n / 10).max(1);
    let sink = usize::from(collectors >= 2);
    let wide = n - collectors - sink;
    let mut edges: Vec<_> = (0..wide).map(|i| (i, wide + i % collectors)).collect();
    if sink == 1 {
        edges.extend((0..collectors).map(|c| (wide + c, n - 1)));
    }
    edges
}
