//! Prefetch policies. Each sees only hard misses and returns the pages it
//! wants fetched; the simulator handles admission and timing.

use std::collections::{HashMap, HashSet, VecDeque};
use std::sync::Arc;

use crate::futuremap::FutureMapStore;
use crate::model::{ModelError, ModelWeights};
use crate::predictor::{Predictor, PredictorConfig};
use crate::trace::{AccessEvent, MissEvent, VPN_LIMIT};

use super::memory::LocalMemory;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PrefetchRequest {
    pub vpn: u64,
    pub prob: f32,
}

impl PrefetchRequest {
    pub fn certain(vpn: u64) -> Self {
        Self { vpn, prob: 1.0 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrefetchOutcome {
    Useful,
    Wasted,
}

/// What a policy may look at when a miss is delivered.
pub struct MissContext<'a> {
    /// Position of the faulting access in the trace.
    pub index: usize,
    pub trace: &'a [AccessEvent],
    pub memory: &'a LocalMemory,
    /// Prefetch slots still free under the in-flight limit.
    pub free_slots: usize,
}

pub trait PrefetchPolicy {
    fn on_miss(&mut self, miss: MissEvent, ctx: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError>;

    fn on_outcome(&mut self, _outcome: PrefetchOutcome) {}

    /// Delay between the fault and prefetch issue (time spent predicting).
    fn issue_delay_ns(&self) -> u64 {
        0
    }

    fn futuremap_bytes(&self) -> usize {
        0
    }
}

fn offset(vpn: u64, delta: i64) -> Option<u64> {
    vpn.checked_add_signed(delta).filter(|&v| v < VPN_LIMIT)
}

#[derive(Debug, Default)]
pub struct NoPrefetch;

impl PrefetchPolicy for NoPrefetch {
    fn on_miss(&mut self, _: MissEvent, _: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError> {
        Ok(Vec::new())
    }
}

/// Linux-style readahead: a window after the miss, but only when the miss
/// directly follows the previous one.
#[derive(Debug)]
pub struct Readahead {
    window: u64,
    last_miss: Option<u64>,
}

impl Readahead {
    pub const DEFAULT_WINDOW: u64 = 8;

    pub fn new(window: u64) -> Self {
        Self { window, last_miss: None }
    }

    pub fn candidates(&mut self, vpn: u64) -> Vec<u64> {
        let sequential = self.last_miss.is_some_and(|last| last.checked_add(1) == Some(vpn));
        self.last_miss = Some(vpn);
        if !sequential {
            return Vec::new();
        }
        (1..=self.window).filter_map(|i| offset(vpn, i as i64)).collect()
    }
}

impl PrefetchPolicy for Readahead {
    fn on_miss(&mut self, miss: MissEvent, _: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError> {
        Ok(self.candidates(miss.vpn).into_iter().map(PrefetchRequest::certain).collect())
    }
}

/// Per-PC stride detection: fires once the same delta is seen twice in a row.
#[derive(Debug, Default)]
pub struct Stride {
    table: HashMap<u64, (u64, Option<i64>)>,
}

impl Stride {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn candidates(&mut self, vpn: u64, pc: u64) -> Vec<u64> {
        let mut out = Vec::new();
        match self.table.get_mut(&pc) {
            Some((last, delta)) => {
                let d = vpn.wrapping_sub(*last) as i64;
                if *delta == Some(d) && d != 0 {
                    out.extend(offset(vpn, d));
                }
                *last = vpn;
                *delta = Some(d);
            }
            None => {
                self.table.insert(pc, (vpn, None));
            }
        }
        out
    }
}

impl PrefetchPolicy for Stride {
    fn on_miss(&mut self, miss: MissEvent, _: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError> {
        Ok(self.candidates(miss.vpn, miss.pc).into_iter().map(PrefetchRequest::certain).collect())
    }
}

/// Majority trend over recent global miss deltas, with an adaptive window.
#[derive(Debug)]
pub struct LeapMajority {
    history: VecDeque<i64>,
    counts: HashMap<i64, usize>,
    last_miss: Option<u64>,
    window: u64,
}

impl LeapMajority {
    pub const HISTORY: usize = 32;
    pub const MAX_WINDOW: u64 = 8;

    pub fn new() -> Self {
        Self { history: VecDeque::with_capacity(Self::HISTORY), counts: HashMap::new(), last_miss: None, window: 1 }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    /// The delta seen in more than half of the history slots, if any.
    pub fn majority(&self) -> Option<i64> {
        self.counts.iter().find(|&(_, &c)| c > Self::HISTORY / 2).map(|(&d, _)| d)
    }

    pub fn candidates(&mut self, vpn: u64) -> Vec<u64> {
        if let Some(last) = self.last_miss {
            let d = vpn.wrapping_sub(last) as i64;
            if self.history.len() == Self::HISTORY {
                let old = self.history.pop_front().unwrap();
                let c = self.counts.get_mut(&old).unwrap();
                *c -= 1;
                if *c == 0 {
                    self.counts.remove(&old);
                }
            }
            self.history.push_back(d);
            *self.counts.entry(d).or_insert(0) += 1;
        }
        self.last_miss = Some(vpn);
        match self.majority() {
            Some(d) if d != 0 => (1..=self.window as i64).filter_map(|i| offset(vpn, d * i)).collect(),
            _ => Vec::new(),
        }
    }
}

impl Default for LeapMajority {
    fn default() -> Self {
        Self::new()
    }
}

impl PrefetchPolicy for LeapMajority {
    fn on_miss(&mut self, miss: MissEvent, _: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError> {
        Ok(self.candidates(miss.vpn).into_iter().map(PrefetchRequest::certain).collect())
    }

    fn on_outcome(&mut self, outcome: PrefetchOutcome) {
        self.window = match outcome {
            PrefetchOutcome::Useful => (self.window * 2).min(Self::MAX_WINDOW),
            PrefetchOutcome::Wasted => (self.window / 2).max(1),
        };
    }
}

/// Clairvoyant prefetcher: fetches the next pages the trace will touch that
/// are not already present, looking no further ahead than LRU could retain.
#[derive(Debug)]
pub struct Oracle {
    lookahead: usize,
}

impl Oracle {
    pub fn new(lookahead: usize) -> Self {
        Self { lookahead }
    }
}

impl PrefetchPolicy for Oracle {
    fn on_miss(&mut self, miss: MissEvent, ctx: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError> {
        let mut chosen = HashSet::new();
        let mut out = Vec::new();
        let end = (ctx.index + 1 + self.lookahead).min(ctx.trace.len());
        for e in &ctx.trace[ctx.index + 1..end] {
            if out.len() >= ctx.free_slots {
                break;
            }
            if e.vpn != miss.vpn && !ctx.memory.is_present(e.vpn) && chosen.insert(e.vpn) {
                out.push(PrefetchRequest::certain(e.vpn));
            }
        }
        Ok(out)
    }
}

/// The learned prefetcher: model plus future maps, with prediction time
/// overlapped with the demand fetch.
#[derive(Debug)]
pub struct Learned {
    predictor: Predictor,
    store: FutureMapStore,
    inference_ns: u64,
}

impl Learned {
    pub fn new(
        weights: Arc<ModelWeights>,
        config: PredictorConfig,
        store_capacity: usize,
        inference_ns: u64,
    ) -> Result<Self, ModelError> {
        let store = FutureMapStore::new(weights.config.vocab, store_capacity);
        Ok(Self { predictor: Predictor::new(weights, config)?, store, inference_ns })
    }

    pub fn store(&self) -> &FutureMapStore {
        &self.store
    }

    pub fn predictor(&self) -> &Predictor {
        &self.predictor
    }
}

impl PrefetchPolicy for Learned {
    fn on_miss(&mut self, miss: MissEvent, _: &MissContext<'_>) -> Result<Vec<PrefetchRequest>, ModelError> {
        Ok(self
            .predictor
            .on_miss(&mut self.store, miss)?
            .into_iter()
            .map(|c| PrefetchRequest { vpn: c.vpn, prob: c.prob })
            .collect())
    }

    fn issue_delay_ns(&self) -> u64 {
        self.inference_ns
    }

    fn futuremap_bytes(&self) -> usize {
        self.store.bytes()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readahead_gate() {
        let mut r = Readahead::new(8);
        assert!(r.candidates(10).is_empty());
        assert_eq!(r.candidates(11), (12..=19).collect::<Vec<_>>());
        assert_eq!(r.candidates(12), (13..=20).collect::<Vec<_>>());

        let mut r = Readahead::new(8);
        r.candidates(10);
        r.candidates(17);
        assert!(r.candidates(3).is_empty());
    }

    #[test]
    fn readahead_stops_at_vpn_limit() {
        let mut r = Readahead::new(8);
        r.candidates(VPN_LIMIT - 4);
        assert_eq!(r.candidates(VPN_LIMIT - 3), vec![VPN_LIMIT - 2, VPN_LIMIT - 1]);
    }

    #[test]
    fn stride_per_pc() {
        let mut s = Stride::new();
        assert!(s.candidates(0, 1).is_empty());
        assert!(s.candidates(100, 2).is_empty());
        assert!(s.candidates(3, 1).is_empty());
        assert_eq!(s.candidates(6, 1), vec![9]);
        // Other PC undisturbed by PC 1's stream.
        assert!(s.candidates(90, 2).is_empty());
        assert_eq!(s.candidates(80, 2), vec![70]);
        // A changed delta resets.
        assert!(s.candidates(10, 1).is_empty());
    }

    #[test]
    fn leap_needs_a_strict_majority() {
        let mut l = LeapMajority::new();
        let mut v = 100u64;
        for i in 0..40 {
            v = if i % 2 == 0 { v + 1 } else { v - 1 };
            assert!(l.candidates(v).is_empty());
        }
        assert_eq!(l.majority(), None);
    }

    #[test]
    fn leap_follows_majority_and_adapts() {
        let mut l = LeapMajority::new();
        let mut got = Vec::new();
        for i in 0..20u64 {
            got = l.candidates(1000 + 5 * i);
        }
        assert_eq!(l.majority(), Some(5));
        assert_eq!(got, vec![1000 + 5 * 19 + 5]);
        l.on_outcome(PrefetchOutcome::Useful);
        l.on_outcome(PrefetchOutcome::Useful);
        l.on_outcome(PrefetchOutcome::Useful);
        l.on_outcome(PrefetchOutcome::Useful);
        assert_eq!(l.window(), 8);
        assert_eq!(l.candidates(1100).len(), 8);
        l.on_outcome(PrefetchOutcome::Wasted);
        assert_eq!(l.window(), 4);
        for _ in 0..5 {
            l.on_outcome(PrefetchOutcome::Wasted);
        }
        assert_eq!(l.window(), 1);
    }
}
