#![allow(dead_code)]

pub mod reference;

use std::path::PathBuf;
use std::sync::Arc;

use memix_core::model::fit::{fit_successor_table, DEFAULT_FIT_SCALE};
use memix_core::model::{golden_rows, load_weights, GoldenRow};
use memix_core::sim::{collect_miss_log, SimConfig};
use memix_core::token;
use memix_core::trace::{gen_synthetic, Workload, WorkloadParams};
use memix_core::{ModelConfig, ModelWeights, Trace};

pub const LINKED_NODES: usize = 1000;
pub const LINKED_ITERATIONS: u32 = 10;
pub const LINKED_SEED: u64 = 7;
pub const FIXTURE_CAPACITY: f64 = 0.3;
pub const GOLDEN_STEPS: usize = 256;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn weights_path() -> PathBuf {
    fixture_dir().join("linked.mxw")
}

pub fn golden_path() -> PathBuf {
    fixture_dir().join("linked_logits.csv")
}

pub fn linked_trace() -> Trace {
    gen_synthetic(Workload::LinkedTraversal, WorkloadParams::new(LINKED_NODES as u64, LINKED_ITERATIONS), LINKED_SEED)
        .unwrap()
}

pub fn linked_miss_log() -> Trace {
    let cfg = SimConfig { capacity_fraction: FIXTURE_CAPACITY, ..SimConfig::default() };
    collect_miss_log(&linked_trace(), &cfg).unwrap()
}

/// Rebuilds the checked-in weights from scratch.
pub fn build_fixture_weights() -> ModelWeights {
    fit_successor_table(&linked_miss_log().events, ModelConfig::default(), DEFAULT_FIT_SCALE).unwrap()
}

pub fn build_golden(weights: &ModelWeights) -> Vec<GoldenRow> {
    let k = weights.config.vocab;
    let tokens: Vec<_> =
        linked_miss_log().events.iter().take(GOLDEN_STEPS).map(|e| (token(e.vpn, k), token(e.pc, k))).collect();
    golden_rows(weights, &tokens).unwrap()
}

pub fn fixture_weights() -> Arc<ModelWeights> {
    Arc::new(load_weights(weights_path()).expect("checked-in fixture weights"))
}
