//! Trace-driven far-memory simulation with learned page prefetching.
//!
//! The crate is organised bottom-up:
//!
//! - [`trace`]: page-access and miss-log traces, the `MXT1` file format and
//!   synthetic workload generators.
//! - [`model`]: a tiny retention network evaluated one token at a time with
//!   constant work per step, plus the `MXW1` weight format.
//! - [`futuremap`]: per-page tables that turn predicted ordinals back into
//!   concrete page numbers.
//! - [`predictor`]: the online pipeline gluing the model and future maps to
//!   the miss stream.
//! - [`sim`]: the swap simulator, its prefetch policies and capacity sweeps.
//! - [`par`]: data-parallel helpers with a sequential fallback when the
//!   `parallel` feature is disabled.

pub mod futuremap;
pub mod model;
pub mod par;
pub mod predictor;
pub mod sim;
pub mod trace;

mod fsutil;

pub use fsutil::write_atomic;
pub use futuremap::{FutureMap, FutureMapStore};
pub use model::{ModelConfig, ModelWeights, RecurrentState};
pub use predictor::{Candidate, Predictor, PredictorConfig};
pub use sim::{Policy, SimConfig, SimReport};
pub use trace::{AccessEvent, Trace, TraceKind};

/// Default vocabulary size: number of ordinals and the token modulus.
pub const DEFAULT_VOCAB: usize = 64;

/// Token for an address or program counter: its residue mod `vocab`. Also the
/// ordinal of a successor page.
#[inline]
pub fn token(value: u64, vocab: usize) -> usize {
    (value % vocab as u64) as usize
}
