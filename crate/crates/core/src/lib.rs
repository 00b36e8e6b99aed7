//! Cost-aware dynamic multi-workflow scheduling in the cloud.
//!
//! * [`workflow`]: workflow DAGs, DAX ingestion, synthetic patterns, SLA deadlines
//! * [`cloud`]: VM catalog and hourly billing
//! * [`simulator`]: discrete-event kernel, trace replay
//! * [`features`]: task and per-VM decision features
//! * [`policy`]: self-attention and per-VM networks plus rule-based baselines
//! * [`erl`]: evolution-strategies trainer
//! * [`bench`]: scenarios, batch evaluation, rank-sum statistics and the CLI

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod bench;
pub mod cloud;
pub mod erl;
pub mod features;
pub mod policy;
pub mod simulator;
pub mod workflow;
