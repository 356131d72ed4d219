//! Page-access traces.
//!
//! A [`Trace`] is an ordered list of `(vpn, pc)` pairs. Full-access traces
//! drive the simulator, which derives the miss stream itself; miss logs are
//! what the simulator records at a given local-memory capacity and are the
//! training input for the sequence model.

mod format;
pub mod synth;

pub use format::{
    decode_trace, encode_trace, load_trace, load_trace_csv, read_trace_csv, save_trace, save_trace_csv,
    write_trace_csv, HEADER_LEN, MAGIC, RECORD_LEN, VERSION,
};
pub use synth::{gen_synthetic, Workload, WorkloadParams};

use thiserror::Error;

/// Exclusive upper bound on page numbers: 64-bit addresses with 4 KB pages.
pub const VPN_LIMIT: u64 = 1 << 52;

pub const DEFAULT_PAGE_SIZE_BITS: u8 = 12;

/// One memory access (or one page fault, in a miss log).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct AccessEvent {
    pub vpn: u64,
    /// Program counter of the access site. Opaque.
    pub pc: u64,
}

impl AccessEvent {
    pub const fn new(vpn: u64, pc: u64) -> Self {
        Self { vpn, pc }
    }
}

/// A fault delivered to a prefetch policy. Same shape as an access.
pub type MissEvent = AccessEvent;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TraceKind {
    FullAccess,
    /// Misses recorded while running with local memory sized at
    /// `capacity_fraction` of the footprint.
    MissLog {
        capacity_fraction: f32,
    },
}

impl TraceKind {
    pub fn code(self) -> u8 {
        match self {
            TraceKind::FullAccess => 0,
            TraceKind::MissLog { .. } => 1,
        }
    }

    pub fn capacity_fraction(self) -> Option<f32> {
        match self {
            TraceKind::FullAccess => None,
            TraceKind::MissLog { capacity_fraction } => Some(capacity_fraction),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub events: Vec<AccessEvent>,
    pub kind: TraceKind,
    pub page_size_bits: u8,
}

impl Trace {
    pub fn full_access(events: Vec<AccessEvent>) -> Self {
        Self { events, kind: TraceKind::FullAccess, page_size_bits: DEFAULT_PAGE_SIZE_BITS }
    }

    pub fn miss_log(events: Vec<AccessEvent>, capacity_fraction: f32) -> Self {
        Self { events, kind: TraceKind::MissLog { capacity_fraction }, page_size_bits: DEFAULT_PAGE_SIZE_BITS }
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    /// Number of distinct pages touched.
    pub fn footprint(&self) -> usize {
        let mut seen = std::collections::HashSet::with_capacity(self.events.len() / 2);
        self.events.iter().filter(|e| seen.insert(e.vpn)).count()
    }

    pub fn vpns(&self) -> impl Iterator<Item = u64> + '_ {
        self.events.iter().map(|e| e.vpn)
    }

    pub fn validate(&self) -> Result<(), TraceError> {
        if let TraceKind::MissLog { capacity_fraction } = self.kind {
            if !(capacity_fraction > 0.0 && capacity_fraction <= 1.0) {
                return Err(TraceError::BadCapacityFraction(capacity_fraction));
            }
        }
        if let Some((index, e)) = self.events.iter().enumerate().find(|(_, e)| e.vpn >= VPN_LIMIT) {
            return Err(TraceError::VpnOutOfRange { index, vpn: e.vpn });
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("bad magic {0:02x?}, expected \"MXT1\"")]
    BadMagic([u8; 4]),
    #[error("unsupported trace version {0}")]
    UnsupportedVersion(u8),
    #[error("unknown trace kind {0}")]
    UnknownKind(u8),
    #[error("truncated trace: {0}")]
    Truncated(&'static str),
    #[error("record {index}: vpn {vpn:#x} exceeds the 52-bit page number space")]
    VpnOutOfRange { index: usize, vpn: u64 },
    #[error("miss-log capacity fraction {0} outside (0, 1]")]
    BadCapacityFraction(f32),
    #[error("csv: {0}")]
    Csv(String),
    #[error("invalid workload parameters: {0}")]
    InvalidParams(String),
}
