use std::collections::HashMap;
use std::sync::Arc;

use proptest::prelude::*;

use cloudsched::cloud::{default_catalog, exec_time, VmCatalog};
use cloudsched::erl::{centered_ranks, estimate_gradient, evaluate_population, sample_epsilons, SphereObjective};
use cloudsched::features::{CandidateHandle, DecisionState, VM_FEATURES};
use cloudsched::policy::{
    decode_checkpoint, encode_checkpoint, init_params, spn_forward, Baseline, NetworkArch, ParamVector,
    SchedulingPolicy, SpnArchitecture,
};
use cloudsched::simulator::{replay, run, sample_instance, write_trace_csv, read_trace_csv, ProblemInstance};
use cloudsched::workflow::{
    generate_pattern, min_makespan, parse_dax, to_dax, Pattern, WorkflowTemplate, REFERENCE_CAPACITY,
};

fn random_template(n: usize, sizes: &[f64], edge_bits: &[bool]) -> WorkflowTemplate {
    // Edges only go from lower to higher ids, so the graph is acyclic.
    let mut edges = Vec::new();
    let mut k = 0;
    for i in 0..n {
        for j in i + 1..n {
            if edge_bits[k % edge_bits.len()] {
                edges.push((i, j));
            }
            k += 1;
        }
    }
    WorkflowTemplate::from_edges("random", Pattern::Custom, &sizes[..n], &edges).unwrap()
}

/// Longest path by enumerating every source-to-sink path.
fn brute_force_makespan(t: &WorkflowTemplate, cap: f64) -> f64 {
    fn walk(t: &WorkflowTemplate, node: usize, cap: f64) -> f64 {
        let own = t.task(node).size / cap;
        own + t.task(node).successors.iter().map(|&s| walk(t, s, cap)).fold(0.0, f64::max)
    }
    (0..t.len())
        .filter(|&i| t.task(i).predecessors.is_empty())
        .map(|i| walk(t, i, cap))
        .fold(0.0, f64::max)
}

fn small_instance(seed: u64, n_workflows: usize, gamma: f64) -> ProblemInstance {
    let templates: Vec<Arc<WorkflowTemplate>> = Pattern::GENERATED
        .iter()
        .enumerate()
        .map(|(i, &p)| Arc::new(generate_pattern(p, 5 + (seed as usize + i) % 20, seed + i as u64).unwrap()))
        .collect();
    sample_instance(&templates, n_workflows, 0.01, gamma, 0.24, Arc::new(default_catalog()), seed).unwrap()
}

/// Always leases a fresh VM of one type; ignores deadlines entirely.
struct AlwaysFresh(usize);

impl SchedulingPolicy for AlwaysFresh {
    fn select(&mut self, state: &DecisionState) -> usize {
        state
            .candidates
            .iter()
            .position(|c| c.handle == CandidateHandle::Fresh(self.0))
            .unwrap()
    }
}

/// Reuses the lowest-id leased VM of one type, else leases one.
struct StickToType(usize);

impl SchedulingPolicy for StickToType {
    fn select(&mut self, state: &DecisionState) -> usize {
        state
            .candidates
            .iter()
            .position(|c| matches!(c.handle, CandidateHandle::Leased(_)) && c.vm_type == self.0)
            .or_else(|| state.candidates.iter().position(|c| c.handle == CandidateHandle::Fresh(self.0)))
            .unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_makespan_matches_path_enumeration(
        n in 1usize..=8,
        sizes in prop::collection::vec(1.0f64..500.0, 8),
        edge_bits in prop::collection::vec(any::<bool>(), 28),
    ) {
        let t = random_template(n, &sizes, &edge_bits);
        let cap = default_catalog().fastest_capacity();
        let dp = min_makespan(&t, cap);
        let brute = brute_force_makespan(&t, cap);
        prop_assert!((dp - brute).abs() <= 1e-9 * brute.max(1.0));
    }

    #[test]
    fn generators_give_valid_dags(n in 2usize..160, seed in any::<u64>()) {
        for p in Pattern::GENERATED {
            let t = generate_pattern(p, n, seed).unwrap();
            prop_assert_eq!(t.len(), n);
            prop_assert_eq!(t.topological_order().len(), n);
            prop_assert!(t.sources().count() >= 1 && t.sinks().count() >= 1);
            for task in t.tasks() {
                prop_assert!((10.0..=1000.0).contains(&task.size));
                for &s in &task.successors {
                    prop_assert!(t.task(s).predecessors.contains(&task.id));
                }
            }
            // deterministic per seed
            prop_assert_eq!(t.to_json(), generate_pattern(p, n, seed).unwrap().to_json());
        }
    }

    #[test]
    fn dax_round_trip_preserves_structure(n in 2usize..60, seed in any::<u64>()) {
        let t = generate_pattern(Pattern::Montage, n, seed).unwrap();
        let back = parse_dax(&to_dax(&t, REFERENCE_CAPACITY)).unwrap();
        prop_assert_eq!(back.len(), t.len());
        for (a, b) in t.tasks().iter().zip(back.tasks()) {
            prop_assert_eq!(&a.predecessors, &b.predecessors);
            prop_assert!((a.size - b.size).abs() <= 1e-9 * a.size);
        }
    }

    #[test]
    fn exec_time_is_linear(size in 0.1f64..1e6, k in 0.01f64..100.0) {
        for v in default_catalog().types() {
            let lhs = exec_time(k * size, v);
            let rhs = k * exec_time(size, v);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn schedules_respect_precedence_and_vm_exclusivity(
        seed in 0u64..10_000,
        n_workflows in 1usize..6,
        which in 0usize..4,
    ) {
        let inst = small_instance(seed, n_workflows, 1.5);
        let mut policy = Baseline::ALL[which].build(seed);
        let r = run(&inst, &mut policy).unwrap();
        prop_assert_eq!(r.trace.len(), inst.task_count());

        let mut end: HashMap<(usize, usize), f64> = HashMap::new();
        for e in &r.trace {
            end.insert((e.workflow, e.task), e.end);
        }
        for e in &r.trace {
            let wf = &inst.workflows[e.workflow];
            prop_assert!(e.start >= wf.arrival_time);
            prop_assert!(e.start >= e.decision_time);
            for &p in &wf.template.task(e.task).predecessors {
                prop_assert!(e.start >= end[&(e.workflow, p)]);
            }
            let vm = &inst.catalog.types()[e.vm_type];
            let expected = exec_time(wf.template.task(e.task).size, vm);
            prop_assert!((e.end - e.start - expected).abs() <= 1e-9 * expected.max(1.0));
        }
        let mut by_vm: HashMap<usize, Vec<(f64, f64)>> = HashMap::new();
        for e in &r.trace {
            by_vm.entry(e.vm_id).or_default().push((e.start, e.end));
        }
        for spans in by_vm.values_mut() {
            spans.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in spans.windows(2) {
                prop_assert!(w[1].0 >= w[0].1);
            }
        }
        prop_assert!((r.vm_fee + r.sla_penalty - r.total_cost).abs() <= 1e-9);
    }

    #[test]
    fn replay_agrees_with_simulator(seed in 0u64..10_000, n_workflows in 1usize..5, which in 0usize..4) {
        let inst = small_instance(seed, n_workflows, 1.25);
        let mut policy = Baseline::ALL[which].build(seed ^ 7);
        let r = run(&inst, &mut policy).unwrap();
        let mut csv = Vec::new();
        write_trace_csv(&mut csv, &r, &inst.catalog).unwrap();
        let rows = read_trace_csv(csv.as_slice()).unwrap();
        let cost = replay(&rows, &r.per_workflow, &inst.catalog).unwrap();
        prop_assert!((cost.total_cost - r.total_cost).abs() <= 1e-9);
        prop_assert!((cost.vm_fee - r.vm_fee).abs() <= 1e-9);
    }

    #[test]
    fn looser_deadlines_never_raise_penalties(
        seed in 0u64..10_000,
        vm_type in 0usize..6,
        sticky in any::<bool>(),
        g in 1.0f64..3.0,
        dg in 0.0f64..2.0,
    ) {
        let tight = small_instance(seed, 4, g);
        let loose = small_instance(seed, 4, g + dg);
        let (a, b) = if sticky {
            (run(&tight, &mut StickToType(vm_type)).unwrap(), run(&loose, &mut StickToType(vm_type)).unwrap())
        } else {
            (run(&tight, &mut AlwaysFresh(vm_type)).unwrap(), run(&loose, &mut AlwaysFresh(vm_type)).unwrap())
        };
        prop_assert_eq!(a.vm_fee, b.vm_fee);
        prop_assert!(b.sla_penalty <= a.sla_penalty);
        for (x, y) in a.per_workflow.iter().zip(&b.per_workflow) {
            prop_assert_eq!(x.completion_time, y.completion_time);
            prop_assert!(y.penalty <= x.penalty);
        }
    }

    #[test]
    fn spn_is_permutation_equivariant(
        seed in any::<u64>(),
        rows in prop::collection::vec(prop::array::uniform4(-2.0f64..2.0), 2..20),
        task in prop::array::uniform3(0.0f64..1.0),
        shuffle in any::<u64>(),
    ) {
        let arch = SpnArchitecture::default();
        let params = init_params(&NetworkArch::Spn(arch), seed);
        let state = DecisionState::from_features(task, rows);
        let n = state.len();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut s = shuffle;
        for i in (1..n).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            perm.swap(i, (s >> 33) as usize % (i + 1));
        }
        let base = spn_forward(&arch, params.as_slice(), &state).unwrap();
        let permuted = spn_forward(&arch, params.as_slice(), &state.permuted(&perm)).unwrap();
        for (i, &j) in perm.iter().enumerate() {
            prop_assert!((permuted[i] - base[j]).abs() <= 1e-9);
        }
    }

    #[test]
    fn checkpoints_round_trip_bit_exactly(seed in any::<u64>(), bits in prop::collection::vec(any::<u64>(), 16)) {
        let arch = NetworkArch::default();
        let mut p = init_params(&arch, seed);
        for (i, b) in bits.iter().enumerate() {
            p.as_mut_slice()[i * 97] = f64::from_bits(*b);
        }
        let (a, q) = decode_checkpoint(&encode_checkpoint(&arch, &p)).unwrap();
        prop_assert_eq!(a, arch);
        prop_assert!(p.as_slice().iter().zip(q.as_slice()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn rank_shaped_gradient_ignores_monotone_transforms(
        fit in prop::collection::vec(-100.0f64..100.0, 8),
        scale in 0.01f64..100.0,
        shift in -50.0f64..50.0,
        seed in any::<u64>(),
    ) {
        let eps = sample_epsilons(8, 5, seed, true);
        let g = estimate_gradient(&fit, &eps, 0.1, true);
        let affine: Vec<f64> = fit.iter().map(|f| scale * f + shift).collect();
        prop_assert_eq!(&g, &estimate_gradient(&affine, &eps, 0.1, true));
        let cubed: Vec<f64> = fit.iter().map(|f| f * f * f).collect();
        prop_assert_eq!(&g, &estimate_gradient(&cubed, &eps, 0.1, true));
    }

    #[test]
    fn centered_ranks_are_bounded_and_sum_to_zero(fit in prop::collection::vec(-5i32..5, 2..40)) {
        let f: Vec<f64> = fit.iter().map(|&x| f64::from(x)).collect();
        let u = centered_ranks(&f);
        prop_assert!(u.iter().all(|x| (-0.5..=0.5).contains(x)));
        prop_assert!(u.iter().sum::<f64>().abs() < 1e-9);
    }

    #[test]
    fn fitness_is_negated_cost(seed in any::<u64>(), sigma in 0.0f64..1.0) {
        let obj = SphereObjective { target: vec![0.5; 6] };
        let eps = sample_epsilons(6, 6, seed, true);
        let r = evaluate_population(&obj, &(), &ParamVector::zeros(6), &eps, sigma, false).unwrap();
        for (i, x) in r.iter().enumerate() {
            prop_assert_eq!(x.individual_index, i);
            prop_assert_eq!(x.fitness + x.total_cost, 0.0);
        }
    }
}

#[test]
fn epsilon_draws_are_standard_normal() {
    let eps = sample_epsilons(1000, 1000, 42, false);
    let all: Vec<f64> = eps.into_iter().flatten().collect();
    let mean = all.iter().sum::<f64>() / all.len() as f64;
    let var = all.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / all.len() as f64;
    assert!(mean.abs() < 0.01, "mean {mean}");
    assert!((var - 1.0).abs() < 0.01, "variance {var}");
}

#[test]
fn mirrored_sampling_does_not_increase_variance() {
    // Gradient of -||theta - t||^2 at theta = 0, estimated repeatedly.
    let dim = 10;
    let target: Vec<f64> = (0..dim).map(|i| (i as f64 - 4.5) / 5.0).collect();
    let obj = SphereObjective { target };
    let center = ParamVector::zeros(dim);
    let variance = |mirrored: bool| {
        let grads: Vec<Vec<f64>> = (0..100)
            .map(|trial| {
                let eps = sample_epsilons(20, dim, 1000 + trial, mirrored);
                let r = evaluate_population(&obj, &(), &center, &eps, 0.05, false).unwrap();
                let f: Vec<f64> = r.iter().map(|x| x.fitness).collect();
                estimate_gradient(&f, &eps, 0.05, false)
            })
            .collect();
        (0..dim)
            .map(|j| {
                let m = grads.iter().map(|g| g[j]).sum::<f64>() / grads.len() as f64;
                grads.iter().map(|g| (g[j] - m).powi(2)).sum::<f64>() / grads.len() as f64
            })
            .sum::<f64>()
    };
    let (plain, mirrored) = (variance(false), variance(true));
    assert!(mirrored <= plain, "mirrored {mirrored} vs plain {plain}");
}

#[test]
fn custom_catalog_changes_deadlines() {
    let slow = VmCatalog::from_json(r#"[{"name":"a","vcpu":2,"memory_gb":8,"price_per_hour":0.1},{"name":"b","vcpu":4,"memory_gb":16,"price_per_hour":0.2}]"#).unwrap();
    let t = Arc::new(generate_pattern(Pattern::Sipht, 12, 3).unwrap());
    let fast = sample_instance(std::slice::from_ref(&t), 2, 0.01, 1.5, 0.24, Arc::new(default_catalog()), 1).unwrap();
    let slowi = sample_instance(&[t], 2, 0.01, 1.5, 0.24, Arc::new(slow), 1).unwrap();
    assert!((slowi.workflows[0].min_makespan / fast.workflows[0].min_makespan - 12.0).abs() < 1e-9);
    assert_eq!(VM_FEATURES, 4);
}
