//! Synthetic workloads with known access semantics.
//!
//! The pointer-chasing generators (`LinkedTraversal`, `TreeDescent`,
//! `GraphWalk`) visit the same node sequence every iteration, but nodes are
//! scattered over a seeded random permutation of the page range. The
//! semantics repeat while the concrete layout is arbitrary.

use std::collections::VecDeque;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{AccessEvent, Trace, TraceError, VPN_LIMIT};

pub const PC_SEQUENTIAL: u64 = 0x40_1000;
pub const PC_STRIDED: u64 = 0x40_2000;
pub const PC_LINKED_NEXT: u64 = 0x40_3000;
pub const PC_TREE_ROOT: u64 = 0x40_4000;
pub const PC_TREE_LEFT: u64 = 0x40_4010;
pub const PC_TREE_RIGHT: u64 = 0x40_4020;
/// Graph edges: `PC_GRAPH_EDGE + 8 * edge_index`.
pub const PC_GRAPH_EDGE: u64 = 0x40_5000;

pub const GRAPH_MAX_OUT_DEGREE: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Workload {
    Sequential,
    Strided,
    LinkedTraversal,
    TreeDescent,
    GraphWalk,
}

impl Workload {
    pub const ALL: [Workload; 5] = [
        Workload::Sequential,
        Workload::Strided,
        Workload::LinkedTraversal,
        Workload::TreeDescent,
        Workload::GraphWalk,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Workload::Sequential => "seq",
            Workload::Strided => "stride",
            Workload::LinkedTraversal => "linked",
            Workload::TreeDescent => "tree",
            Workload::GraphWalk => "graph",
        }
    }
}

impl std::str::FromStr for Workload {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "seq" | "sequential" => Ok(Workload::Sequential),
            "stride" | "strided" => Ok(Workload::Strided),
            "linked" | "linkedtraversal" | "linked-traversal" => Ok(Workload::LinkedTraversal),
            "tree" | "treedescent" | "tree-descent" => Ok(Workload::TreeDescent),
            "graph" | "graphwalk" | "graph-walk" => Ok(Workload::GraphWalk),
            other => Err(format!("unknown workload {other:?}")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WorkloadParams {
    /// Distinct pages (nodes, for the pointer-chasing workloads).
    pub footprint: u64,
    pub iterations: u32,
    pub base_vpn: u64,
    /// Page stride; only used by `Strided`.
    pub stride: u64,
}

impl WorkloadParams {
    pub fn new(footprint: u64, iterations: u32) -> Self {
        Self { footprint, iterations, base_vpn: 0, stride: 1 }
    }

    pub fn with_base(mut self, base_vpn: u64) -> Self {
        self.base_vpn = base_vpn;
        self
    }

    pub fn with_stride(mut self, stride: u64) -> Self {
        self.stride = stride;
        self
    }
}

/// Generates a full-access trace. Output is a pure function of the arguments.
pub fn gen_synthetic(workload: Workload, params: WorkloadParams, seed: u64) -> Result<Trace, TraceError> {
    let WorkloadParams { footprint, iterations, base_vpn, stride } = params;
    if footprint == 0 {
        return Err(TraceError::InvalidParams("footprint must be at least one page".into()));
    }
    if iterations == 0 {
        return Err(TraceError::InvalidParams("iteration count must be positive".into()));
    }
    let span = match workload {
        Workload::Strided => {
            if stride == 0 {
                return Err(TraceError::InvalidParams("stride must be positive".into()));
            }
            stride.checked_mul(footprint)
        }
        _ => Some(footprint),
    };
    match span.and_then(|s| base_vpn.checked_add(s)) {
        Some(end) if end <= VPN_LIMIT => {}
        _ => return Err(TraceError::InvalidParams("page range exceeds the 52-bit vpn space".into())),
    }
    let footprint =
        usize::try_from(footprint).map_err(|_| TraceError::InvalidParams("footprint does not fit in memory".into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let one_pass = match workload {
        Workload::Sequential => (0..footprint as u64).map(|i| AccessEvent::new(base_vpn + i, PC_SEQUENTIAL)).collect(),
        Workload::Strided => {
            (0..footprint as u64).map(|i| AccessEvent::new(base_vpn + i * stride, PC_STRIDED)).collect()
        }
        Workload::LinkedTraversal => {
            let layout = random_layout(footprint, base_vpn, &mut rng);
            layout.iter().map(|&vpn| AccessEvent::new(vpn, PC_LINKED_NEXT)).collect()
        }
        Workload::TreeDescent => tree_descent(footprint, base_vpn, &mut rng),
        Workload::GraphWalk => graph_walk(footprint, base_vpn, &mut rng),
    };

    let mut events = Vec::with_capacity(one_pass.len() * iterations as usize);
    for _ in 0..iterations {
        events.extend_from_slice(&one_pass);
    }
    Ok(Trace::full_access(events))
}

/// Node `i` lives at `layout[i]`.
fn random_layout(nodes: usize, base_vpn: u64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut pages: Vec<u64> = (0..nodes as u64).map(|i| base_vpn + i).collect();
    pages.shuffle(rng);
    pages
}

/// Root-to-leaf descents of a heap-indexed complete binary tree.
fn tree_descent(nodes: usize, base_vpn: u64, rng: &mut ChaCha8Rng) -> Vec<AccessEvent> {
    let layout = random_layout(nodes, base_vpn, rng);
    let depth = (usize::BITS - nodes.leading_zeros()) as usize;
    let descents = nodes.div_ceil(depth);
    let mut out = Vec::with_capacity(descents * depth);
    for _ in 0..descents {
        let mut node = 0usize;
        out.push(AccessEvent::new(layout[0], PC_TREE_ROOT));
        loop {
            let right = rng.random_bool(0.5);
            let child = 2 * node + 1 + usize::from(right);
            if child >= nodes {
                break;
            }
            node = child;
            let pc = if right { PC_TREE_RIGHT } else { PC_TREE_LEFT };
            out.push(AccessEvent::new(layout[node], pc));
        }
    }
    out
}

/// A closed random walk over a sparse digraph with out-degree at most
/// [`GRAPH_MAX_OUT_DEGREE`]. Every node has a ring edge to `i + 1`, so the walk
/// can always return to its start; the return path is appended so that
/// repeating the walk only ever follows real edges.
fn graph_walk(nodes: usize, base_vpn: u64, rng: &mut ChaCha8Rng) -> Vec<AccessEvent> {
    let layout = random_layout(nodes, base_vpn, rng);
    if nodes == 1 {
        return vec![AccessEvent::new(layout[0], PC_GRAPH_EDGE)];
    }

    let adjacency: Vec<Vec<usize>> = (0..nodes)
        .map(|i| {
            let mut out = vec![(i + 1) % nodes];
            let extra = rng.random_range(0..GRAPH_MAX_OUT_DEGREE);
            for _ in 0..extra {
                let j = rng.random_range(0..nodes);
                if j != i && !out.contains(&j) {
                    out.push(j);
                }
            }
            out
        })
        .collect();

    // (node, index of the edge taken to reach it)
    let mut steps: Vec<(usize, usize)> = Vec::with_capacity(nodes * 2);
    let mut node = 0usize;
    steps.push((0, 0));
    for _ in 1..nodes {
        let e = rng.random_range(0..adjacency[node].len());
        node = adjacency[node][e];
        steps.push((node, e));
    }
    let closing = shortest_path(&adjacency, node, 0);
    let (&(_, start_edge), back) = closing.split_last().expect("path ends at the start node");
    steps.extend_from_slice(back);
    steps[0].1 = start_edge;

    steps.into_iter().map(|(n, e)| AccessEvent::new(layout[n], PC_GRAPH_EDGE + 8 * e as u64)).collect()
}

/// BFS path from `from` to `to`, excluding `from`, as (node, edge index) steps.
/// When `from == to` this is a shortest cycle back to `to`.
fn shortest_path(adjacency: &[Vec<usize>], from: usize, to: usize) -> Vec<(usize, usize)> {
    let mut prev: Vec<Option<(usize, usize)>> = vec![None; adjacency.len()];
    let mut seen = vec![false; adjacency.len()];
    seen[from] = true;
    let mut queue = VecDeque::from([from]);
    let mut last_hop = None;
    'bfs: while let Some(u) = queue.pop_front() {
        for (e, &v) in adjacency[u].iter().enumerate() {
            if v == to {
                last_hop = Some((u, e));
                break 'bfs;
            }
            if !seen[v] {
                seen[v] = true;
                prev[v] = Some((u, e));
                queue.push_back(v);
            }
        }
    }
    let (mut cur, e) = last_hop.expect("ring edges keep the graph strongly connected");
    let mut path = vec![(to, e)];
    while cur != from {
        let (p, e) = prev[cur].expect("bfs tree");
        path.push((cur, e));
        cur = p;
    }
    path.reverse();
    path
}
