//! Per-candidate feedforward scorer: each `[task_info ‖ vm_info_i]` row is
//! scored on its own, with no interaction between candidates.

use serde::{Deserialize, Serialize};

use super::nn::{relu_in_place, Cursor, Dense, Segment};
use super::PolicyError;
use crate::features::{DecisionState, TASK_FEATURES, VM_FEATURES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpArchitecture {
    pub hidden1: usize,
    pub hidden2: usize,
}

impl Default for MlpArchitecture {
    fn default() -> Self {
        Self {
            hidden1: 64,
            hidden2: 32,
        }
    }
}

impl MlpArchitecture {
    pub const INPUT: usize = TASK_FEATURES + VM_FEATURES;

    pub fn validate(&self) -> Result<(), PolicyError> {
        if self.hidden1 == 0 || self.hidden2 == 0 {
            return Err(PolicyError::Architecture("hidden widths must be at least 1".into()));
        }
        Ok(())
    }

    pub fn segments(&self) -> Vec<Segment> {
        vec![
            Segment::weight("hidden1.w", Self::INPUT, self.hidden1),
            Segment::bias("hidden1.b", self.hidden1),
            Segment::weight("hidden2.w", self.hidden1, self.hidden2),
            Segment::bias("hidden2.b", self.hidden2),
            Segment::weight("out.w", self.hidden2, 1),
            Segment::bias("out.b", 1),
        ]
    }

    pub fn param_count(&self) -> usize {
        self.segments().iter().map(|s| s.len).sum()
    }
}

pub fn mlp_forward(
    arch: &MlpArchitecture,
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
    let n = state.len();
    let mut c = Cursor::new(params);
    let l1 = Dense::read(&mut c, MlpArchitecture::INPUT, arch.hidden1);
    let l2 = Dense::read(&mut c, arch.hidden1, arch.hidden2);
    let l3 = Dense::read(&mut c, arch.hidden2, 1);

    let mut x = Vec::with_capacity(n * MlpArchitecture::INPUT);
    for row in &state.vm_info {
        x.extend_from_slice(&state.task_info);
        x.extend_from_slice(row);
    }
    let mut h = l1.forward(&x, n);
    relu_in_place(&mut h);
    let mut h = l2.forward(&h, n);
    relu_in_place(&mut h);
    Ok(l3.forward(&h, n))
}
