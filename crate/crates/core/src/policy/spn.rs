//! Self-attention priority network.
//!
//! Candidate VM rows are embedded, passed through one transformer encoder
//! layer so every candidate attends to every other, concatenated with an
//! embedding of the task features, and mapped to one priority per row.
//! There is no positional encoding: the network is permutation-equivariant
//! over candidates.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::nn::{add_in_place, layer_norm_in_place, relu_in_place, Cursor, Dense, Segment};
use super::PolicyError;
use crate::features::{DecisionState, TASK_FEATURES, VM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormPlacement {
    /// `LN(x + sublayer(x))`
    Post,
    /// `x + sublayer(LN(x))`
    Pre,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpnArchitecture {
    pub vm_features: usize,
    pub task_features: usize,
    pub vm_embed: usize,
    pub task_embed: usize,
    pub heads: usize,
    pub transformer_ffn_hidden: usize,
    pub task_ffn_hidden: usize,
    pub priority_ffn_hidden: usize,
    pub layer_norm_epsilon: f64,
    pub norm: NormPlacement,
    /// Attention logit scale; `None` means `1/sqrt(vm_embed / heads)`.
    pub attention_scale: Option<f64>,
}

impl Default for SpnArchitecture {
    fn default() -> Self {
        Self {
            vm_features: VM_FEATURES,
            task_features: TASK_FEATURES,
            vm_embed: 16,
            task_embed: 16,
            heads: 4,
            transformer_ffn_hidden: 64,
            task_ffn_hidden: 32,
            priority_ffn_hidden: 32,
            layer_norm_epsilon: 1e-5,
            norm: NormPlacement::Post,
            attention_scale: None,
        }
    }
}

impl SpnArchitecture {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let widths = [
            self.vm_embed,
            self.task_embed,
            self.heads,
            self.transformer_ffn_hidden,
            self.task_ffn_hidden,
            self.priority_ffn_hidden,
        ];
        if widths.contains(&0) {
            return Err(PolicyError::Architecture("all widths must be at least 1".into()));
        }
        if self.vm_features != VM_FEATURES || self.task_features != TASK_FEATURES {
            return Err(PolicyError::Architecture(format!(
                "input widths must be {VM_FEATURES} (VM) and {TASK_FEATURES} (task)"
            )));
        }
        if !self.vm_embed.is_multiple_of(self.heads) {
            return Err(PolicyError::Architecture(format!(
                "embedding width {} is not divisible by {} heads",
                self.vm_embed, self.heads
            )));
        }
        if !(self.layer_norm_epsilon > 0.0) {
            return Err(PolicyError::Architecture("layer-norm epsilon must be positive".into()));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.vm_embed / self.heads
    }

    /// Parameter blocks in storage order.
    pub fn segments(&self) -> Vec<Segment> {
        let (m, q) = (self.vm_features, self.task_features);
        let (e, t) = (self.vm_embed, self.task_embed);
        let (h_ffn, h_task, h_prio) = (
            self.transformer_ffn_hidden,
            self.task_ffn_hidden,
            self.priority_ffn_hidden,
        );
        vec![
            Segment::weight("vm_embed.w", m, e),
            Segment::bias("vm_embed.b", e),
            Segment::weight("attn.query.w", e, e),
            Segment::bias("attn.query.b", e),
            Segment::weight("attn.key.w", e, e),
            Segment::bias("attn.key.b", e),
            Segment::weight("attn.value.w", e, e),
            Segment::bias("attn.value.b", e),
            Segment::weight("attn.out.w", e, e),
            Segment::bias("attn.out.b", e),
            Segment::gain("norm1.gain", e),
            Segment::bias("norm1.bias", e),
            Segment::weight("ffn.hidden.w", e, h_ffn),
            Segment::bias("ffn.hidden.b", h_ffn),
            Segment::weight("ffn.out.w", h_ffn, e),
            Segment::bias("ffn.out.b", e),
            Segment::gain("norm2.gain", e),
            Segment::bias("norm2.bias", e),
            Segment::weight("task.hidden.w", q, h_task),
            Segment::bias("task.hidden.b", h_task),
            Segment::weight("task.out.w", h_task, t),
            Segment::bias("task.out.b", t),
            Segment::weight("priority.hidden.w", e + t, h_prio),
            Segment::bias("priority.hidden.b", h_prio),
            Segment::weight("priority.out.w", h_prio, 1),
            Segment::bias("priority.out.b", 1),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.segments().iter().map(|s| s.len).sum()
    }
}

struct Weights<'a> {
    embed: Dense<'a>,
    query: Dense<'a>,
    key: Dense<'a>,
    value: Dense<'a>,
    attn_out: Dense<'a>,
    norm1: (&'a [f64], &'a [f64]),
    ffn_hidden: Dense<'a>,
    ffn_out: Dense<'a>,
    norm2: (&'a [f64], &'a [f64]),
    task_hidden: Dense<'a>,
    task_out: Dense<'a>,
    prio_hidden: Dense<'a>,
    prio_out: Dense<'a>,
}

impl<'a> Weights<'a> {
    fn split(arch: &SpnArchitecture, params: &'a [f64]) -> Self {
        let e = arch.vm_embed;
        let mut c = Cursor::new(params);
        let w = Weights {
            embed: Dense::read(&mut c, arch.vm_features, e),
            query: Dense::read(&mut c, e, e),
            key: Dense::read(&mut c, e, e),
            value: Dense::read(&mut c, e, e),
            attn_out: Dense::read(&mut c, e, e),
            norm1: (c.take(e), c.take(e)),
            ffn_hidden: Dense::read(&mut c, e, arch.transformer_ffn_hidden),
            ffn_out: Dense::read(&mut c, arch.transformer_ffn_hidden, e),
            norm2: (c.take(e), c.take(e)),
            task_hidden: Dense::read(&mut c, arch.task_features, arch.task_ffn_hidden),
            task_out: Dense::read(&mut c, arch.task_ffn_hidden, arch.task_embed),
            prio_hidden: Dense::read(&mut c, e + arch.task_embed, arch.priority_ffn_hidden),
            prio_out: Dense::read(&mut c, arch.priority_ffn_hidden, 1),
        };
        debug_assert!(c.finished());
        w
    }
}

/// Multi-head scaled dot-product self-attention over `n` distinct rows,
/// row `j` standing for `counts[j]` identical candidates.
fn self_attention(arch: &SpnArchitecture, w: &Weights, x: &[f64], counts: &[f64]) -> Vec<f64> {
    let n = counts.len();
    let e = arch.vm_embed;
    let d = arch.head_dim();
    let scale = arch.attention_scale.unwrap_or(1.0 / (d as f64).sqrt());
    let q = w.query.forward(x, n);
    let k = w.key.forward(x, n);
    let v = w.value.forward(x, n);
    let mut mixed = vec![0.0; n * e];
    let mut scores = vec![0.0; n];
    for h in 0..arch.heads {
        let cols = h * d..(h + 1) * d;
        for i in 0..n {
            let qi = &q[i * e..][cols.clone()];
            for (j, s) in scores.iter_mut().enumerate() {
                let kj = &k[j * e..][cols.clone()];
                *s = scale * qi.iter().zip(kj).map(|(a, b)| a * b).sum::<f64>();
            }
            let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for (s, m) in scores.iter_mut().zip(counts) {
                *s = m * (*s - max).exp();
                total += *s;
            }
            let out = &mut mixed[i * e..][cols.clone()];
            for (j, s) in scores.iter().enumerate() {
                let a = s / total;
                for (o, vj) in out.iter_mut().zip(&v[j * e..][cols.clone()]) {
                    *o += a * vj;
                }
            }
        }
    }
    w.attn_out.forward(&mixed, n)
}

fn feed_forward(w: &Weights, x: &[f64], n: usize) -> Vec<f64> {
    let mut hidden = w.ffn_hidden.forward(x, n);
    relu_in_place(&mut hidden);
    w.ffn_out.forward(&hidden, n)
}

/// Priorities for every candidate row of `state`.
pub fn spn_forward(
    arch: &SpnArchitecture,
    params: &[f64],
    state: &DecisionState,
) -> Result<Vec<f64>, PolicyError> {
    let expected = arch.param_count();
    if params.len() != expected {
        return Err(PolicyError::ParamLength {
            expected,
            actual: params.len(),
        });
    }
    if state.is_empty() {
        return Err(PolicyError::Architecture("state has no candidates".into()));
    }
    let w = Weights::split(arch, params);
    let e = arch.vm_embed;
    let eps = arch.layer_norm_epsilon;

    // Identical candidate rows get identical outputs, so each distinct row
    // is computed once and weighted by its multiplicity in the softmax.
    let mut slot_of: HashMap<[u64; VM_FEATURES], usize> = HashMap::new();
    let mut raw: Vec<f64> = Vec::new();
    let mut counts: Vec<f64> = Vec::new();
    let rows: Vec<usize> = state
        .vm_info
        .iter()
        .map(|row| {
            let key = row.map(|v| if v == 0.0 { 0 } else { v.to_bits() });
            *slot_of.entry(key).or_insert_with(|| {
                raw.extend_from_slice(row);
                counts.push(0.0);
                counts.len() - 1
            })
        })
        .collect();
    for &r in &rows {
        counts[r] += 1.0;
    }
    let n = counts.len();
    let mut x = w.embed.forward(&raw, n);
    match arch.norm {
        NormPlacement::Post => {
            let attn = self_attention(arch, &w, &x, &counts);
            add_in_place(&mut x, &attn);
            layer_norm_in_place(&mut x, e, w.norm1.0, w.norm1.1, eps);
            let ffn = feed_forward(&w, &x, n);
            add_in_place(&mut x, &ffn);
            layer_norm_in_place(&mut x, e, w.norm2.0, w.norm2.1, eps);
        }
        NormPlacement::Pre => {
            let mut normed = x.clone();
            layer_norm_in_place(&mut normed, e, w.norm1.0, w.norm1.1, eps);
            let attn = self_attention(arch, &w, &normed, &counts);
            add_in_place(&mut x, &attn);
            let mut normed = x.clone();
            layer_norm_in_place(&mut normed, e, w.norm2.0, w.norm2.1, eps);
            let ffn = feed_forward(&w, &normed, n);
            add_in_place(&mut x, &ffn);
        }
    }

    let mut task_hidden = w.task_hidden.forward(&state.task_info, 1);
    relu_in_place(&mut task_hidden);
    let task = w.task_out.forward(&task_hidden, 1);

    let width = e + arch.task_embed;
    let mut joined = Vec::with_capacity(n * width);
    for row in x.chunks(e) {
        joined.extend_from_slice(row);
        joined.extend_from_slice(&task);
    }
    let mut hidden = w.prio_hidden.forward(&joined, n);
    relu_in_place(&mut hidden);
    let priorities = w.prio_out.forward(&hidden, n);
    Ok(rows.iter().map(|&r| priorities[r]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::init_params;
    use crate::policy::NetworkArch;

    fn state(rows: &[[f64; 4]]) -> DecisionState {
        DecisionState::from_features([0.2, 0.5, 0.01], rows.to_vec())
    }

    #[test]
    fn default_parameter_count() {
        assert_eq!(SpnArchitecture::default().param_count(), 5105);
    }

    #[test]
    fn single_candidate_gives_finite_priority() {
        let arch = SpnArchitecture::default();
        let p = init_params(&NetworkArch::Spn(arch), 3);
        let out = spn_forward(&arch, p.as_slice(), &state(&[[1.0, 0.3, 0.9, 1.0]])).unwrap();
        assert_eq!(out.len(), 1);
        assert!(out[0].is_finite());
    }

    #[test]
    fn identical_rows_tie() {
        let arch = SpnArchitecture::default();
        let p = init_params(&NetworkArch::Spn(arch), 4);
        let row = [0.0, 0.7, 0.2, 0.0];
        let out = spn_forward(&arch, p.as_slice(), &state(&[row, [1.0, 0.1, 0.5, 1.0], row])).unwrap();
        assert_eq!(out[0], out[2]);
    }

    #[test]
    fn duplicate_rows_match_explicit_attention() {
        // Reference: the same layer with every row computed separately.
        let arch = SpnArchitecture::default();
        let p = init_params(&NetworkArch::Spn(arch), 6);
        let rows = [[0.0, 0.7, 0.2, 0.0], [1.0, 0.1, 0.5, 1.0], [0.0, 0.7, 0.2, 0.0], [0.0, 0.7, 0.2, 0.0]];
        let st = state(&rows);
        let out = spn_forward(&arch, p.as_slice(), &st).unwrap();

        let w = Weights::split(&arch, p.as_slice());
        let raw: Vec<f64> = rows.iter().flatten().copied().collect();
        let mut x = w.embed.forward(&raw, 4);
        let attn = self_attention(&arch, &w, &x, &[1.0; 4]);
        add_in_place(&mut x, &attn);
        layer_norm_in_place(&mut x, 16, w.norm1.0, w.norm1.1, arch.layer_norm_epsilon);
        let ffn = feed_forward(&w, &x, 4);
        add_in_place(&mut x, &ffn);
        layer_norm_in_place(&mut x, 16, w.norm2.0, w.norm2.1, arch.layer_norm_epsilon);
        let mut th = w.task_hidden.forward(&st.task_info, 1);
        relu_in_place(&mut th);
        let task = w.task_out.forward(&th, 1);
        let joined: Vec<f64> = x.chunks(16).flat_map(|r| r.iter().chain(&task).copied()).collect();
        let mut h = w.prio_hidden.forward(&joined, 4);
        relu_in_place(&mut h);
        let expected = w.prio_out.forward(&h, 4);
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let arch = SpnArchitecture::default();
        let err = spn_forward(&arch, &[0.0; 10], &state(&[[0.0; 4]])).unwrap_err();
        assert!(matches!(err, PolicyError::ParamLength { expected: 5105, actual: 10 }));
    }

    #[test]
    fn pre_norm_variant_runs() {
        let arch = SpnArchitecture {
            norm: NormPlacement::Pre,
            heads: 2,
            ..Default::default()
        };
        let p = init_params(&NetworkArch::Spn(arch), 4);
        let out = spn_forward(&arch, p.as_slice(), &state(&[[0.0; 4], [1.0; 4]])).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn heads_must_divide_embedding() {
        let arch = SpnArchitecture {
            heads: 3,
            ..Default::default()
        };
        assert!(arch.validate().is_err());
    }
}
