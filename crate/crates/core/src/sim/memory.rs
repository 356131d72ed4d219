use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap};

/// Local memory: a bounded LRU-ordered resident set plus pages still in
/// flight from far memory. A page is never both resident and in flight.
#[derive(Clone, Debug)]
pub struct LocalMemory {
    capacity: usize,
    resident: HashMap<u64, u64>,
    lru: BTreeMap<u64, u64>,
    stamp: u64,
    inflight: HashMap<u64, u64>,
    completions: BinaryHeap<Reverse<(u64, u64, u64)>>,
    issue_seq: u64,
}

impl LocalMemory {
    /// # Panics
    /// If `capacity` is zero.
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "local memory needs at least one frame");
        Self {
            capacity,
            resident: HashMap::with_capacity(capacity),
            lru: BTreeMap::new(),
            stamp: 0,
            inflight: HashMap::new(),
            completions: BinaryHeap::new(),
            issue_seq: 0,
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn resident_len(&self) -> usize {
        self.resident.len()
    }

    pub fn inflight_len(&self) -> usize {
        self.inflight.len()
    }

    pub fn is_resident(&self, vpn: u64) -> bool {
        self.resident.contains_key(&vpn)
    }

    pub fn inflight_until(&self, vpn: u64) -> Option<u64> {
        self.inflight.get(&vpn).copied()
    }

    /// Resident or on its way.
    pub fn is_present(&self, vpn: u64) -> bool {
        self.is_resident(vpn) || self.inflight.contains_key(&vpn)
    }

    /// Moves a resident page to the most-recently-used position.
    pub fn touch(&mut self, vpn: u64) -> bool {
        let Some(old) = self.resident.get_mut(&vpn) else {
            return false;
        };
        self.stamp += 1;
        self.lru.remove(old);
        *old = self.stamp;
        self.lru.insert(self.stamp, vpn);
        true
    }

    /// Makes `vpn` resident at the MRU position, returning the evicted LRU
    /// page if memory was full.
    pub fn insert(&mut self, vpn: u64) -> Option<u64> {
        debug_assert!(!self.inflight.contains_key(&vpn));
        if self.touch(vpn) {
            return None;
        }
        let victim = if self.resident.len() == self.capacity {
            let (_, v) = self.lru.pop_first().expect("full memory has an LRU page");
            self.resident.remove(&v);
            Some(v)
        } else {
            None
        };
        self.stamp += 1;
        self.resident.insert(vpn, self.stamp);
        self.lru.insert(self.stamp, vpn);
        victim
    }

    pub fn begin_fetch(&mut self, vpn: u64, completes_at: u64) {
        debug_assert!(!self.is_present(vpn));
        self.issue_seq += 1;
        self.inflight.insert(vpn, completes_at);
        self.completions.push(Reverse((completes_at, self.issue_seq, vpn)));
    }

    /// Removes and returns the earliest in-flight page completing at or
    /// before `now`. The caller inserts it.
    pub fn pop_completed(&mut self, now: u64) -> Option<(u64, u64)> {
        let &Reverse((at, _, vpn)) = self.completions.peek()?;
        if at > now {
            return None;
        }
        self.completions.pop();
        self.inflight.remove(&vpn);
        Some((vpn, at))
    }

    pub fn inflight_pages(&self) -> impl Iterator<Item = u64> + '_ {
        self.inflight.keys().copied()
    }

    pub fn resident_pages(&self) -> impl Iterator<Item = u64> + '_ {
        self.resident.keys().copied()
    }
}
