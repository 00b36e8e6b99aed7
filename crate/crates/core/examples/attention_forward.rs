//! Priorities from the self-attention network and the per-VM MLP.
//!
//! Changing one candidate's features moves the attention network's score
//! for every other candidate; the MLP scores each row in isolation.
//!
//!     cargo run --example attention_forward

use cloudsched::features::DecisionState;
use cloudsched::policy::{argmax, init_params, MlpArchitecture, NetworkArch, SpnArchitecture};

fn show(label: &str, xs: &[f64]) {
    let cells: Vec<String> = xs.iter().map(|x| format!("{x:+.4}")).collect();
    println!("  {label:<10} [{}]", cells.join(", "));
}

fn main() -> anyhow::Result<()> {
    // task: successor share, completed share, arrival rate
    let task = [0.4, 0.3, 0.01];
    // per VM: deadline met, normalized incurred cost, remaining paid time, fittest
    let rows = vec![
        [1.0, 0.10, 0.80, 0.0],
        [1.0, 0.60, 0.20, 1.0],
        [0.0, 0.00, 0.00, 0.0],
        [1.0, 0.35, 0.50, 0.0],
    ];
    let state = DecisionState::from_features(task, rows.clone());
    let mut changed = rows;
    changed[3] = [0.0, 1.0, 0.0, 0.0];
    let changed = DecisionState::from_features(task, changed);

    for arch in [NetworkArch::Spn(SpnArchitecture::default()), NetworkArch::Mlp(MlpArchitecture::default())] {
        let params = init_params(&arch, 11);
        let before = arch.forward(params.as_slice(), &state)?;
        let after = arch.forward(params.as_slice(), &changed)?;
        println!("{} ({} parameters)", arch.label(), arch.param_count());
        show("before", &before);
        show("after", &after);
        println!("  row 0 moved by {:.3e}, pick {} -> {}", (after[0] - before[0]).abs(), argmax(&before), argmax(&after));
    }

    // Reordering candidates reorders the scores.
    let arch = NetworkArch::default();
    let params = init_params(&arch, 11);
    let perm = [2, 0, 3, 1];
    let out = arch.forward(params.as_slice(), &state)?;
    let out_perm = arch.forward(params.as_slice(), &state.permuted(&perm))?;
    let dev = perm.iter().enumerate().map(|(i, &p)| (out_perm[i] - out[p]).abs()).fold(0.0, f64::max);
    println!("permutation equivariance: max deviation {dev:.1e}");
    Ok(())
}
