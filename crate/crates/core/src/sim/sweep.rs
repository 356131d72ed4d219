//! Policy x capacity sweeps.
//!
//! Each row is normalised to the same policy's run at capacity 1.0, and its
//! coverage is measured against the no-prefetch run at the row's capacity.
//! All cells are independent and run through [`crate::par`].

use std::collections::{BTreeSet, HashMap};
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;

use super::{simulate, Policy, SimConfig, SimError, SimReport};
use crate::model::ModelWeights;
use crate::par::{self, Execution};
use crate::trace::Trace;

pub const SWEEP_CSV_HEADER: [&str; 12] = [
    "policy",
    "capacity_fraction",
    "total_time_ns",
    "normalized",
    "misses",
    "issued",
    "useful",
    "wasted",
    "accuracy",
    "coverage",
    "evictions",
    "futuremap_bytes",
];

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub report: SimReport,
    /// Total time relative to the same policy with everything resident.
    pub normalized: f64,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    policy: &'a str,
    capacity_fraction: f64,
    total_time_ns: u64,
    normalized: f64,
    misses: u64,
    issued: u64,
    useful: u64,
    wasted: u64,
    accuracy: f64,
    coverage: f64,
    evictions: u64,
    futuremap_bytes: u64,
}

fn key(capacity: f64) -> u64 {
    capacity.to_bits()
}

/// Runs every `(policy, capacity)` pair, in policy-major order.
pub fn sweep(
    trace: &Trace,
    capacities: &[f64],
    policies: &[Policy],
    base: &SimConfig,
    weights: Option<&Arc<ModelWeights>>,
    exec: Execution,
) -> Result<Vec<SweepRow>, SimError> {
    for &c in capacities {
        base.with_capacity(c).validate()?;
    }
    if policies.contains(&Policy::Memix) && weights.is_none() {
        return Err(SimError::MissingWeights);
    }

    let mut cells = BTreeSet::new();
    for &p in policies {
        for &c in capacities.iter().chain([1.0].iter()) {
            cells.insert((p, key(c)));
        }
    }
    for &c in capacities {
        cells.insert((Policy::None, key(c)));
    }
    let cells: Vec<(Policy, u64)> = cells.into_iter().collect();

    let results = par::map(cells.clone(), exec, |(p, c)| {
        let cfg = SimConfig { policy: p, capacity_fraction: f64::from_bits(c), ..base.clone() };
        simulate(trace, &cfg, weights, &mut ())
    });
    let mut by_cell = HashMap::with_capacity(cells.len());
    for (cell, r) in cells.into_iter().zip(results) {
        by_cell.insert(cell, r?);
    }

    let mut rows = Vec::with_capacity(policies.len() * capacities.len());
    for &p in policies {
        let full = by_cell[&(p, key(1.0))].total_time_ns;
        for &c in capacities {
            let mut report = by_cell[&(p, key(c))].clone();
            report.finish(Some(by_cell[&(Policy::None, key(c))].misses));
            rows.push(SweepRow { normalized: report.total_time_ns as f64 / full as f64, report });
        }
    }
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        let r = &row.report;
        w.serialize(CsvRow {
            policy: &r.policy,
            capacity_fraction: r.capacity_fraction,
            total_time_ns: r.total_time_ns,
            normalized: row.normalized,
            misses: r.misses,
            issued: r.prefetch_issued,
            useful: r.prefetch_useful,
            wasted: r.prefetch_wasted,
            accuracy: r.accuracy,
            coverage: r.coverage,
            evictions: r.evictions,
            futuremap_bytes: r.futuremap_bytes,
        })?;
    }
    w.flush()?;
    Ok(())
}
