//! Trace-driven swap simulator.
//!
//! Every access is replayed on a single virtual clock:
//!
//! - resident page: `t_local`;
//! - page still in flight from a prefetch: stall until it lands, then `t_local`;
//! - absent page: a demand fetch costing `t_far` (`max(t_far, t_inf)` for the
//!   learned policy, whose prediction runs while the fetch is outstanding),
//!   then `t_local`.
//!
//! Only hard misses reach the prefetch policy. Prefetches leave at the fault
//! (after `t_inf` for the learned policy), land `t_far` later and take a frame
//! on arrival, evicting the LRU page if memory is full.

pub mod memory;
pub mod policy;
mod report;
pub mod sweep;

use std::collections::HashSet;
use std::sync::Arc;

use thiserror::Error;

use crate::futuremap::DEFAULT_STORE_CAPACITY;
use crate::model::{ModelError, ModelWeights};
use crate::predictor::PredictorConfig;
use crate::trace::{AccessEvent, Trace, TraceKind};

pub use memory::LocalMemory;
pub use policy::{PrefetchOutcome, PrefetchPolicy, PrefetchRequest};
pub use report::SimReport;
pub use sweep::{sweep, write_sweep_csv, SweepRow, SWEEP_CSV_HEADER};

/// Largest footprint the simulator will track, in pages.
pub const MAX_FOOTPRINT_PAGES: usize = 1 << 28;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Policy {
    None,
    Readahead,
    Stride,
    LeapMajority,
    Memix,
    Oracle,
}

impl Policy {
    pub const ALL: [Policy; 6] =
        [Policy::None, Policy::Readahead, Policy::Stride, Policy::LeapMajority, Policy::Memix, Policy::Oracle];

    pub fn name(self) -> &'static str {
        match self {
            Policy::None => "none",
            Policy::Readahead => "readahead",
            Policy::Stride => "stride",
            Policy::LeapMajority => "leap",
            Policy::Memix => "memix",
            Policy::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(Policy::None),
            "readahead" => Ok(Policy::Readahead),
            "stride" => Ok(Policy::Stride),
            "leap" | "leapmajority" | "leap-majority" => Ok(Policy::LeapMajority),
            "memix" => Ok(Policy::Memix),
            "oracle" => Ok(Policy::Oracle),
            other => Err(format!("unknown policy {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimConfig {
    /// Local memory as a fraction of the trace footprint.
    pub capacity_fraction: f64,
    pub t_local_ns: u64,
    pub t_far_ns: u64,
    /// Inference time charged per miss for the learned policy.
    pub t_inf_ns: u64,
    pub max_inflight_prefetch: usize,
    pub policy: Policy,
    pub predictor: PredictorConfig,
    pub readahead_window: u64,
    pub futuremap_capacity: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            capacity_fraction: 0.5,
            t_local_ns: 100,
            t_far_ns: 6_000,
            t_inf_ns: 1_000,
            max_inflight_prefetch: 8,
            policy: Policy::None,
            predictor: PredictorConfig::default(),
            readahead_window: policy::Readahead::DEFAULT_WINDOW,
            futuremap_capacity: DEFAULT_STORE_CAPACITY,
        }
    }
}

impl SimConfig {
    pub fn with_policy(&self, policy: Policy) -> Self {
        Self { policy, ..self.clone() }
    }

    pub fn with_capacity(&self, capacity_fraction: f64) -> Self {
        Self { capacity_fraction, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::InvalidConfig(m));
        if !(self.capacity_fraction > 0.0 && self.capacity_fraction <= 1.0) {
            return bad(format!("capacity fraction {} outside (0, 1]", self.capacity_fraction));
        }
        if self.t_far_ns <= self.t_local_ns {
            return bad(format!(
                "far access ({} ns) must be slower than local access ({} ns)",
                self.t_far_ns, self.t_local_ns
            ));
        }
        if self.futuremap_capacity == 0 {
            return bad("future-map store capacity must be positive".into());
        }
        Ok(())
    }

    /// Local frames for a footprint: `ceil(fraction * footprint)`, at least 1.
    pub fn capacity_pages(&self, footprint: usize) -> usize {
        let exact = self.capacity_fraction * footprint as f64;
        // Absorb representation error such as 0.3 * 1000 = 300.00000000000006.
        ((exact - 1e-9).ceil() as usize).clamp(1, footprint.max(1))
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulator config: {0}")]
    InvalidConfig(String),
    #[error("simulator needs a full-access trace, got a miss log")]
    NotFullAccess,
    #[error("policy memix requires model weights")]
    MissingWeights,
    #[error("trace footprint of {0} pages exceeds the simulator limit")]
    FootprintTooLarge(usize),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Hooks into a simulation run.
pub trait SimObserver {
    fn on_miss(&mut self, _index: usize, _event: AccessEvent) {}

    /// Prefetches actually issued for a miss, after admission.
    fn on_prefetch(&mut self, _miss: AccessEvent, _issued: &[PrefetchRequest]) {}
}

impl SimObserver for () {}

/// Records the hard-miss stream.
#[derive(Debug, Default)]
pub struct MissRecorder {
    pub misses: Vec<AccessEvent>,
}

impl SimObserver for MissRecorder {
    fn on_miss(&mut self, _index: usize, event: AccessEvent) {
        self.misses.push(event);
    }
}

/// Records `(miss_vpn, candidate_vpn, prob)` for every issued prefetch.
#[derive(Debug, Default)]
pub struct CandidateLog {
    pub rows: Vec<(u64, u64, f32)>,
}

impl CandidateLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("miss_vpn,candidate_vpn,prob\n");
        for (m, c, p) in &self.rows {
            out.push_str(&format!("{m},{c},{p}\n"));
        }
        out
    }
}

impl SimObserver for CandidateLog {
    fn on_prefetch(&mut self, miss: AccessEvent, issued: &[PrefetchRequest]) {
        self.rows.extend(issued.iter().map(|r| (miss.vpn, r.vpn, r.prob)));
    }
}

fn build_policy(
    config: &SimConfig,
    weights: Option<&Arc<ModelWeights>>,
    capacity: usize,
) -> Result<Box<dyn PrefetchPolicy>, SimError> {
    Ok(match config.policy {
        Policy::None => Box::new(policy::NoPrefetch),
        Policy::Readahead => Box::new(policy::Readahead::new(config.readahead_window)),
        Policy::Stride => Box::new(policy::Stride::new()),
        Policy::LeapMajority => Box::new(policy::LeapMajority::new()),
        Policy::Oracle => Box::new(policy::Oracle::new(capacity / 2)),
        Policy::Memix => {
            let w = weights.ok_or(SimError::MissingWeights)?;
            Box::new(policy::Learned::new(
                w.clone(),
                config.predictor.clone(),
                config.futuremap_capacity,
                config.t_inf_ns,
            )?)
        }
    })
}

struct Engine {
    mem: LocalMemory,
    policy: Box<dyn PrefetchPolicy>,
    /// Prefetched pages that are resident but not yet accessed.
    untouched: HashSet<u64>,
    report: SimReport,
    now: u64,
}

impl Engine {
    fn land_prefetches(&mut self) {
        while let Some((vpn, _)) = self.mem.pop_completed(self.now) {
            if let Some(victim) = self.mem.insert(vpn) {
                self.report.prefetch_evictions += 1;
                self.evicted(victim);
            }
            self.untouched.insert(vpn);
        }
    }

    fn evicted(&mut self, victim: u64) {
        self.report.evictions += 1;
        if self.untouched.remove(&victim) {
            self.report.prefetch_wasted += 1;
            self.policy.on_outcome(PrefetchOutcome::Wasted);
        }
    }

    fn first_use(&mut self, vpn: u64) {
        if self.untouched.remove(&vpn) {
            self.report.prefetch_useful += 1;
            self.policy.on_outcome(PrefetchOutcome::Useful);
        }
    }
}

/// Replays `trace` without computing coverage (`baseline_misses` is left 0).
pub fn simulate(
    trace: &Trace,
    config: &SimConfig,
    weights: Option<&Arc<ModelWeights>>,
    observer: &mut dyn SimObserver,
) -> Result<SimReport, SimError> {
    config.validate()?;
    if trace.kind != TraceKind::FullAccess {
        return Err(SimError::NotFullAccess);
    }
    let footprint = trace.footprint();
    if footprint > MAX_FOOTPRINT_PAGES {
        return Err(SimError::FootprintTooLarge(footprint));
    }
    let capacity = config.capacity_pages(footprint);
    let fault_ns = if config.policy == Policy::Memix { config.t_far_ns.max(config.t_inf_ns) } else { config.t_far_ns };

    let mut e = Engine {
        mem: LocalMemory::new(capacity),
        policy: build_policy(config, weights, capacity)?,
        untouched: HashSet::new(),
        report: SimReport::new(config, footprint, capacity, trace.len()),
        now: 0,
    };
    let issue_delay = e.policy.issue_delay_ns();
    let mut issued = Vec::new();

    for (i, &access) in trace.events.iter().enumerate() {
        let vpn = access.vpn;
        e.land_prefetches();

        if e.mem.touch(vpn) {
            e.first_use(vpn);
        } else if let Some(ready) = e.mem.inflight_until(vpn) {
            e.report.partial_hits += 1;
            e.report.stall_ns += ready - e.now;
            e.now = ready;
            e.land_prefetches();
            e.mem.touch(vpn);
            e.first_use(vpn);
        } else {
            e.report.misses += 1;
            observer.on_miss(i, access);
            let fault_start = e.now;

            let ctx = policy::MissContext {
                index: i,
                trace: &trace.events,
                memory: &e.mem,
                free_slots: config.max_inflight_prefetch.saturating_sub(e.mem.inflight_len()),
            };
            let requests = e.policy.on_miss(access, &ctx)?;
            issued.clear();
            for req in requests {
                if e.mem.inflight_len() >= config.max_inflight_prefetch {
                    break;
                }
                if req.vpn == vpn || e.mem.is_present(req.vpn) {
                    continue;
                }
                e.mem.begin_fetch(req.vpn, fault_start + issue_delay + config.t_far_ns);
                e.report.prefetch_issued += 1;
                issued.push(req);
            }
            observer.on_prefetch(access, &issued);

            e.report.stall_ns += fault_ns;
            e.now = fault_start + fault_ns;
            e.land_prefetches();
            if let Some(victim) = e.mem.insert(vpn) {
                e.evicted(victim);
            }
        }
        e.now += config.t_local_ns;
        e.report.peak_resident = e.report.peak_resident.max(e.mem.resident_len());
        debug_assert!(e.mem.resident_len() <= capacity);
    }

    e.land_prefetches();
    let Engine { mem, policy, untouched, mut report, now } = e;
    report.prefetch_wasted += untouched.len() as u64;
    report.prefetch_inflight_at_end = mem.inflight_len() as u64;
    report.total_time_ns = now;
    report.futuremap_bytes = policy.futuremap_bytes() as u64;
    report.finish(None);
    Ok(report)
}

/// Runs one configuration, including a no-prefetch baseline for coverage.
pub fn run(trace: &Trace, config: &SimConfig, weights: Option<&Arc<ModelWeights>>) -> Result<SimReport, SimError> {
    let mut report = simulate(trace, config, weights, &mut ())?;
    let baseline = if config.policy == Policy::None {
        report.misses
    } else {
        simulate(trace, &config.with_policy(Policy::None), None, &mut ())?.misses
    };
    report.finish(Some(baseline));
    Ok(report)
}

/// The miss stream of `trace` with no prefetching at `capacity_fraction`.
pub fn collect_miss_log(trace: &Trace, config: &SimConfig) -> Result<Trace, SimError> {
    let mut rec = MissRecorder::default();
    simulate(trace, &config.with_policy(Policy::None), None, &mut rec)?;
    let mut log = Trace::miss_log(rec.misses, config.capacity_fraction as f32);
    log.page_size_bits = trace.page_size_bits;
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::synth::{gen_synthetic, Workload, WorkloadParams};

    fn cfg(policy: Policy, capacity: f64) -> SimConfig {
        SimConfig { policy, capacity_fraction: capacity, ..SimConfig::default() }
    }

    #[test]
    fn compulsory_misses_only_when_everything_fits() {
        let t = gen_synthetic(Workload::GraphWalk, WorkloadParams::new(300, 4), 1).unwrap();
        let c = cfg(Policy::None, 1.0);
        let r = run(&t, &c, None).unwrap();
        assert_eq!(r.misses as usize, t.footprint());
        assert_eq!(r.total_time_ns, t.len() as u64 * 100 + r.misses * 6_000);
        assert_eq!(r.evictions, 0);
        assert_eq!(r.coverage, 0.0);
    }

    #[test]
    fn capacity_rounding() {
        let c = cfg(Policy::None, 0.3);
        assert_eq!(c.capacity_pages(1000), 300);
        assert_eq!(c.capacity_pages(10), 3);
        assert_eq!(c.capacity_pages(1), 1);
        assert_eq!(cfg(Policy::None, 0.25).capacity_pages(10), 3);
        assert_eq!(cfg(Policy::None, 1.0).capacity_pages(7), 7);
    }

    #[test]
    fn config_errors() {
        let t = gen_synthetic(Workload::Sequential, WorkloadParams::new(10, 1), 0).unwrap();
        assert!(matches!(run(&t, &cfg(Policy::Memix, 0.5), None), Err(SimError::MissingWeights)));
        assert!(matches!(run(&t, &cfg(Policy::None, 0.0), None), Err(SimError::InvalidConfig(_))));
        assert!(matches!(run(&t, &cfg(Policy::None, 1.5), None), Err(SimError::InvalidConfig(_))));
        let slow_local = SimConfig { t_local_ns: 7_000, ..SimConfig::default() };
        assert!(run(&t, &slow_local, None).is_err());
        let log = Trace::miss_log(t.events.clone(), 0.5);
        assert!(matches!(run(&log, &SimConfig::default(), None), Err(SimError::NotFullAccess)));
    }

    /// Hand-simulated: 4 sequential pages, 2 frames, oracle with lookahead 1.
    ///
    /// t=0     miss 0: prefetch 1 (lands 6000); clock 6000 +100
    /// t=6100  1 resident (landed at 6000): hit, +100
    /// t=6200  miss 2: prefetch 3 (lands 12200); clock 12200 +100
    /// t=12300 3 resident: hit, +100 -> 12400
    #[test]
    fn oracle_small_hand_simulation() {
        let t = gen_synthetic(Workload::Sequential, WorkloadParams::new(4, 1), 0).unwrap();
        let r = run(&t, &cfg(Policy::Oracle, 0.5), None).unwrap();
        assert_eq!(r.misses, 2);
        assert_eq!(r.prefetch_issued, 2);
        assert_eq!(r.prefetch_useful, 2);
        assert_eq!(r.partial_hits, 0);
        assert_eq!(r.total_time_ns, 12_400);
        assert_eq!(r.baseline_misses, 4);
        assert_eq!(r.coverage, 0.5);
    }

    #[test]
    fn readahead_refires_on_each_sequential_miss_pair() {
        // Window 2: misses 0,1 fetch 2,3; miss 4 does not follow miss 1, miss
        // 5 does and fetches 6,7; and so on.
        let t = gen_synthetic(Workload::Sequential, WorkloadParams::new(16, 1), 0).unwrap();
        let c = SimConfig { readahead_window: 2, ..cfg(Policy::Readahead, 1.0) };
        let r = run(&t, &c, None).unwrap();
        assert_eq!(r.misses, 8);
        assert_eq!(r.prefetch_issued, 8);
        assert_eq!(r.prefetch_useful, 8);
        assert_eq!(r.partial_hits, 0);
        assert_eq!(r.total_time_ns, 16 * 100 + 8 * 6_000);
        assert_eq!(r.total_time_ns, t.len() as u64 * 100 + r.stall_ns);
    }

    #[test]
    fn learned_policy_overlaps_inference_with_fetch() {
        let t = gen_synthetic(Workload::Sequential, WorkloadParams::new(50, 1), 0).unwrap();
        let w = Arc::new(ModelWeights::zeros(crate::ModelConfig::default()).unwrap());
        let slow = SimConfig { t_inf_ns: 9_000, ..cfg(Policy::Memix, 1.0) };
        // Zero weights never clear min_prob, so this is pure miss cost.
        let r = run(&t, &slow, Some(&w)).unwrap();
        assert_eq!(r.total_time_ns, 50 * (100 + 9_000));
        let fast = SimConfig { t_inf_ns: 1_000, ..slow };
        let r = run(&t, &fast, Some(&w)).unwrap();
        assert_eq!(r.total_time_ns, 50 * (100 + 6_000));
        assert!(r.futuremap_bytes > 0);
    }

    #[test]
    fn miss_log_carries_capacity() {
        let t = gen_synthetic(Workload::Sequential, WorkloadParams::new(1000, 2), 0).unwrap();
        let log = collect_miss_log(&t, &cfg(Policy::None, 0.3)).unwrap();
        assert_eq!(log.kind, TraceKind::MissLog { capacity_fraction: 0.3 });
        assert_eq!(log.len(), 2000);
    }
}
