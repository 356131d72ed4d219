use std::time::Instant;

use super::{ModelError, ModelWeights, Scratch};

/// Per-token `forward_step` latencies, in stream order.
#[derive(Clone, Debug)]
pub struct InferenceBench {
    pub samples_ns: Vec<u64>,
}

impl InferenceBench {
    pub fn mean_ns(&self) -> f64 {
        mean(&self.samples_ns)
    }

    /// Mean over tokens `[start, end)` of the measured stream.
    pub fn mean_range_ns(&self, start: usize, end: usize) -> f64 {
        mean(&self.samples_ns[start..end.min(self.samples_ns.len())])
    }

    pub fn percentile_ns(&self, pct: f64) -> u64 {
        if self.samples_ns.is_empty() {
            return 0;
        }
        let mut sorted = self.samples_ns.clone();
        sorted.sort_unstable();
        let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
        sorted[rank.clamp(1, sorted.len()) - 1]
    }

    pub fn p99_ns(&self) -> u64 {
        self.percentile_ns(99.0)
    }
}

fn mean(xs: &[u64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<u64>() as f64 / xs.len() as f64
    }
}

/// Times each step of `tokens` on the calling thread. The first `warmup`
/// tokens advance the state but are not recorded.
pub fn bench_inference(
    weights: &ModelWeights,
    tokens: &[(usize, usize)],
    warmup: usize,
) -> Result<InferenceBench, ModelError> {
    let mut state = weights.new_state();
    let mut scratch = Scratch::new(weights);
    let mut logits = vec![0.0; weights.config.vocab];
    let mut samples_ns = Vec::with_capacity(tokens.len().saturating_sub(warmup));
    for (i, &(a, p)) in tokens.iter().enumerate() {
        let t0 = Instant::now();
        weights.forward_step_with(&mut state, a, p, &mut scratch, &mut logits)?;
        let dt = t0.elapsed();
        std::hint::black_box(&logits);
        if i >= warmup {
            samples_ns.push(dt.as_nanos() as u64);
        }
    }
    Ok(InferenceBench { samples_ns })
}
