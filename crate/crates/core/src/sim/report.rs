use serde::{Deserialize, Serialize};

use super::{Policy, SimConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub policy: String,
    pub capacity_fraction: f64,
    pub capacity_pages: usize,
    pub accesses: u64,
    pub footprint: usize,
    pub total_time_ns: u64,
    /// Time beyond `t_local` per access: demand faults and partial-hit waits.
    pub stall_ns: u64,
    pub misses: u64,
    /// Misses of the same trace and capacity without prefetching.
    pub baseline_misses: u64,
    pub prefetch_issued: u64,
    pub prefetch_useful: u64,
    pub prefetch_wasted: u64,
    pub prefetch_inflight_at_end: u64,
    /// Accesses to a page whose prefetch had not landed yet.
    pub partial_hits: u64,
    pub evictions: u64,
    /// Evictions caused by a landing prefetch.
    pub prefetch_evictions: u64,
    pub coverage: f64,
    pub accuracy: f64,
    pub futuremap_bytes: u64,
    pub peak_resident: usize,
}

impl SimReport {
    pub(crate) fn new(config: &SimConfig, footprint: usize, capacity_pages: usize, accesses: usize) -> Self {
        Self {
            policy: config.policy.name().to_string(),
            capacity_fraction: config.capacity_fraction,
            capacity_pages,
            accesses: accesses as u64,
            footprint,
            total_time_ns: 0,
            stall_ns: 0,
            misses: 0,
            baseline_misses: 0,
            prefetch_issued: 0,
            prefetch_useful: 0,
            prefetch_wasted: 0,
            prefetch_inflight_at_end: 0,
            partial_hits: 0,
            evictions: 0,
            prefetch_evictions: 0,
            coverage: 0.0,
            accuracy: 0.0,
            futuremap_bytes: 0,
            peak_resident: 0,
        }
    }

    pub fn policy(&self) -> Option<Policy> {
        self.policy.parse().ok()
    }

    pub(crate) fn finish(&mut self, baseline_misses: Option<u64>) {
        self.accuracy = ratio(self.prefetch_useful, self.prefetch_issued);
        if let Some(b) = baseline_misses {
            self.baseline_misses = b;
            self.coverage = if b == 0 { 0.0 } else { 1.0 - self.misses as f64 / b as f64 };
        }
    }

    /// Hits on resident pages, including prefetched ones.
    pub fn hits(&self) -> u64 {
        self.accesses - self.misses - self.partial_hits
    }

    /// Every issued prefetch ends up useful, wasted or still in flight.
    pub fn prefetches_balance(&self) -> bool {
        self.prefetch_issued == self.prefetch_useful + self.prefetch_wasted + self.prefetch_inflight_at_end
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}
