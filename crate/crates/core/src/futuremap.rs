//! Future maps: per-page tables from predicted ordinal to concrete successor.
//!
//! The model only ever sees and predicts residues mod `K`; these tables hold
//! the runtime layout. Slot `i` of page `X`'s map holds the most recent page
//! `Y` with `Y mod K == i` that missed directly after `X`.

use std::collections::{BTreeMap, HashMap};

use serde::Serialize;

use crate::token;

const NULL_SLOT: u64 = u64::MAX;

/// Bytes accounted per map besides its slots: owner, two counters and the
/// recency stamp.
pub const MAP_HEADER_BYTES: usize = 32;

/// Default store capacity, enough for a 4 GB footprint of 4 KB pages.
pub const DEFAULT_STORE_CAPACITY: usize = 1 << 20;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FutureMap {
    owner_vpn: u64,
    slots: Box<[u64]>,
    pub hits: u64,
    pub updates: u64,
}

impl FutureMap {
    pub fn new(owner_vpn: u64, vocab: usize) -> Self {
        Self { owner_vpn, slots: vec![NULL_SLOT; vocab].into_boxed_slice(), hits: 0, updates: 0 }
    }

    pub fn owner(&self) -> u64 {
        self.owner_vpn
    }

    pub fn vocab(&self) -> usize {
        self.slots.len()
    }

    pub fn get(&self, ordinal: usize) -> Option<u64> {
        self.slots.get(ordinal).copied().filter(|&v| v != NULL_SLOT)
    }

    /// Records `to_vpn` in its residue slot, replacing any previous occupant.
    pub fn record(&mut self, to_vpn: u64) {
        let k = self.slots.len();
        self.slots[token(to_vpn, k)] = to_vpn;
        self.updates += 1;
    }

    pub fn slots(&self) -> impl Iterator<Item = Option<u64>> + '_ {
        self.slots.iter().map(|&v| (v != NULL_SLOT).then_some(v))
    }

    pub fn fanout(&self) -> usize {
        self.slots.iter().filter(|&&v| v != NULL_SLOT).count()
    }

    pub fn bytes(&self) -> usize {
        MAP_HEADER_BYTES + 8 * self.slots.len()
    }
}

/// All future maps of one application, bounded in count. When full, the map
/// updated least recently is dropped.
#[derive(Clone, Debug)]
pub struct FutureMapStore {
    vocab: usize,
    capacity: usize,
    maps: HashMap<u64, (FutureMap, u64)>,
    by_recency: BTreeMap<u64, u64>,
    clock: u64,
    evictions: u64,
}

impl FutureMapStore {
    /// # Panics
    /// If `vocab < 2` or `capacity == 0`.
    pub fn new(vocab: usize, capacity: usize) -> Self {
        assert!(vocab >= 2, "vocabulary must have at least two ordinals");
        assert!(capacity > 0, "store capacity must be positive");
        Self { vocab, capacity, maps: HashMap::new(), by_recency: BTreeMap::new(), clock: 0, evictions: 0 }
    }

    pub fn with_vocab(vocab: usize) -> Self {
        Self::new(vocab, DEFAULT_STORE_CAPACITY)
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn evictions(&self) -> u64 {
        self.evictions
    }

    pub fn get(&self, vpn: u64) -> Option<&FutureMap> {
        self.maps.get(&vpn).map(|(m, _)| m)
    }

    pub fn observe_transition(&mut self, from_vpn: u64, to_vpn: u64) {
        self.clock += 1;
        let stamp = self.clock;
        match self.maps.get_mut(&from_vpn) {
            Some((map, old)) => {
                self.by_recency.remove(old);
                *old = stamp;
                map.record(to_vpn);
            }
            None => {
                if self.maps.len() == self.capacity {
                    let (_, victim) = self.by_recency.pop_first().expect("store is non-empty");
                    self.maps.remove(&victim);
                    self.evictions += 1;
                }
                let mut map = FutureMap::new(from_vpn, self.vocab);
                map.record(to_vpn);
                self.maps.insert(from_vpn, (map, stamp));
            }
        }
        self.by_recency.insert(stamp, from_vpn);
    }

    /// The page recorded for `ordinal` after `from_vpn`, if that outcome has
    /// been seen. Out-of-range ordinals resolve to nothing.
    pub fn resolve(&mut self, from_vpn: u64, ordinal: usize) -> Option<u64> {
        let (map, _) = self.maps.get_mut(&from_vpn)?;
        let hit = map.get(ordinal);
        if hit.is_some() {
            map.hits += 1;
        }
        hit
    }

    /// Like [`resolve`](Self::resolve) without touching counters.
    pub fn peek(&self, from_vpn: u64, ordinal: usize) -> Option<u64> {
        self.get(from_vpn)?.get(ordinal)
    }

    /// Histogram: non-empty slot count -> number of maps with that count.
    pub fn fanout_stats(&self) -> BTreeMap<usize, usize> {
        let mut hist = BTreeMap::new();
        for (map, _) in self.maps.values() {
            *hist.entry(map.fanout()).or_insert(0) += 1;
        }
        hist
    }

    pub fn bytes(&self) -> usize {
        self.maps.len() * (MAP_HEADER_BYTES + 8 * self.vocab)
    }

    /// Maps sorted by owner page, for diagnostics.
    pub fn dump(&self) -> Vec<FutureMapDump> {
        let mut out: Vec<_> =
            self.maps.values().map(|(m, _)| FutureMapDump { vpn: m.owner(), slots: m.slots().collect() }).collect();
        out.sort_by_key(|d| d.vpn);
        out
    }

    pub fn dump_json(&self) -> String {
        serde_json::to_string(&self.dump()).expect("plain data serialises")
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FutureMapDump {
    pub vpn: u64,
    pub slots: Vec<Option<u64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synth::{gen_synthetic, Workload, WorkloadParams, GRAPH_MAX_OUT_DEGREE};
    use proptest::prelude::*;

    const X: u64 = 1000;

    #[test]
    fn four_slot_example() {
        let mut s = FutureMapStore::with_vocab(4);
        let b = 4 * 17 + 1;
        s.observe_transition(X, b);
        let slots: Vec<_> = s.get(X).unwrap().slots().collect();
        assert_eq!(slots, vec![None, Some(b), None, None]);
    }

    #[test]
    fn repeated_observation_is_idempotent() {
        let mut s = FutureMapStore::with_vocab(4);
        s.observe_transition(X, 9);
        let once: Vec<_> = s.get(X).unwrap().slots().collect();
        s.observe_transition(X, 9);
        assert_eq!(s.get(X).unwrap().slots().collect::<Vec<_>>(), once);
    }

    #[test]
    fn collisions_keep_most_recent() {
        // One-slot reference: the last write wins, in either order.
        for (first, second) in [(5u64, 13u64), (13, 5)] {
            let mut s = FutureMapStore::with_vocab(8);
            s.observe_transition(X, first);
            s.observe_transition(X, second);
            assert_eq!(s.resolve(X, 5), Some(second));
            assert_eq!(s.get(X).unwrap().fanout(), 1);
        }
    }

    #[test]
    fn resolve_unknown_is_none() {
        let mut s = FutureMapStore::with_vocab(64);
        assert_eq!(s.resolve(X, 3), None);
        s.observe_transition(X, 64 * 3 + 7);
        assert_eq!(s.resolve(X, 7), Some(64 * 3 + 7));
        assert_eq!(s.resolve(X, 8), None);
        assert_eq!(s.resolve(X, 999), None);
        assert_eq!(s.get(X).unwrap().hits, 1);
    }

    #[test]
    fn store_evicts_least_recently_updated() {
        let mut s = FutureMapStore::new(4, 2);
        s.observe_transition(1, 2);
        s.observe_transition(2, 3);
        s.observe_transition(1, 5); // refreshes map 1
        s.observe_transition(3, 4); // evicts map 2
        assert!(s.get(2).is_none());
        assert!(s.get(1).is_some() && s.get(3).is_some());
        assert_eq!(s.len(), 2);
        assert_eq!(s.evictions(), 1);
    }

    #[test]
    fn linked_traversal_resolves_every_transition_after_one_pass() {
        let t = gen_synthetic(Workload::LinkedTraversal, WorkloadParams::new(1000, 3), 21).unwrap();
        let mut s = FutureMapStore::with_vocab(64);
        let period = 1000;
        for (i, w) in t.events.windows(2).enumerate() {
            let (p, q) = (w[0].vpn, w[1].vpn);
            if i >= period {
                assert_eq!(s.resolve(p, token(q, 64)), Some(q), "transition {i}");
            }
            s.observe_transition(p, q);
        }
    }

    #[test]
    fn fanout_histograms() {
        assert!(FutureMapStore::with_vocab(64).fanout_stats().is_empty());

        let seq = gen_synthetic(Workload::Sequential, WorkloadParams::new(300, 2), 0).unwrap();
        let mut s = FutureMapStore::with_vocab(64);
        seq.events.windows(2).for_each(|w| s.observe_transition(w[0].vpn, w[1].vpn));
        assert_eq!(s.fanout_stats().keys().copied().collect::<Vec<_>>(), vec![1]);

        let graph = gen_synthetic(Workload::GraphWalk, WorkloadParams::new(2000, 3), 4).unwrap();
        let mut s = FutureMapStore::with_vocab(64);
        graph.events.windows(2).for_each(|w| s.observe_transition(w[0].vpn, w[1].vpn));
        let max = *s.fanout_stats().keys().max().unwrap();
        assert!(max <= GRAPH_MAX_OUT_DEGREE, "max fanout {max}");
    }

    #[test]
    fn json_dump_shape() {
        let mut s = FutureMapStore::with_vocab(2);
        s.observe_transition(7, 3);
        s.observe_transition(1, 4);
        assert_eq!(s.dump_json(), r#"[{"vpn":1,"slots":[4,null]},{"vpn":7,"slots":[null,3]}]"#);
        assert_eq!(s.bytes(), 2 * (MAP_HEADER_BYTES + 16));
    }

    proptest! {
        #[test]
        fn slots_stay_consistent(
            vocab in 2usize..70,
            cap in 1usize..40,
            ops in proptest::collection::vec((0u64..60, 0u64..5000), 1..400),
        ) {
            let mut s = FutureMapStore::new(vocab, cap);
            for &(from, to) in &ops {
                s.observe_transition(from, to);
                prop_assert_eq!(s.peek(from, token(to, vocab)), Some(to));
                prop_assert!(s.len() <= cap);
            }
            for d in s.dump() {
                prop_assert_eq!(d.slots.len(), vocab);
                for (i, slot) in d.slots.iter().enumerate() {
                    if let Some(v) = slot {
                        prop_assert_eq!(token(*v, vocab), i);
                    }
                }
            }
        }
    }
}
