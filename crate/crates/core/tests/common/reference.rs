//! Deliberately naive reference implementations used as test oracles.

use std::collections::HashMap;

use memix_core::ModelWeights;

fn rms(x: &[f64]) -> Vec<f64> {
    let ms = x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64;
    let inv = 1.0 / (ms + 1e-6).sqrt();
    x.iter().map(|v| v * inv).collect()
}

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / std::f64::consts::PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

fn mat(x: &[f64], m: &[f32], cols: usize) -> Vec<f64> {
    (0..cols).map(|j| x.iter().enumerate().map(|(i, xi)| xi * m[i * cols + j] as f64).sum()).collect()
}

/// Whole-sequence retention in f64: for each position `t`,
/// `o_t = sum_{s<=t} gamma^(t-s) (q_t . k_s) v_s`, with no recurrent state.
pub fn parallel_logits(w: &ModelWeights, tokens: &[(usize, usize)]) -> Vec<Vec<f64>> {
    let c = &w.config;
    let (d, k, f) = (c.hidden, c.vocab, c.ffn_hidden());
    let mut xs: Vec<Vec<f64>> = tokens
        .iter()
        .map(|&(a, p)| (0..d).map(|j| w.embed_addr[a * d + j] as f64 + w.embed_pc[p * d + j] as f64).collect())
        .collect();
    for (l, layer) in w.layers.iter().enumerate() {
        let gamma = c.decay[l] as f64;
        let hs: Vec<Vec<f64>> = xs.iter().map(|x| rms(x)).collect();
        let q: Vec<_> = hs.iter().map(|h| mat(h, &layer.w_q, d)).collect();
        let kk: Vec<_> = hs.iter().map(|h| mat(h, &layer.w_k, d)).collect();
        let v: Vec<_> = hs.iter().map(|h| mat(h, &layer.w_v, d)).collect();
        for t in 0..xs.len() {
            let mut o = vec![0.0; d];
            for s in 0..=t {
                let score: f64 = q[t].iter().zip(&kk[s]).map(|(a, b)| a * b).sum::<f64>() * gamma.powi((t - s) as i32);
                for j in 0..d {
                    o[j] += score * v[s][j];
                }
            }
            let delta = mat(&o, &layer.w_o, d);
            for j in 0..d {
                xs[t][j] += delta[j];
            }
            let hidden: Vec<f64> = mat(&rms(&xs[t]), &layer.ffn_up, f).into_iter().map(gelu).collect();
            let delta = mat(&hidden, &layer.ffn_down, d);
            for j in 0..d {
                xs[t][j] += delta[j];
            }
        }
    }
    xs.iter().map(|x| mat(x, &w.head, k)).collect()
}

/// Indices of the accesses that miss in an LRU cache of `capacity` pages.
/// Eviction scans every resident page for the oldest use.
pub fn lru_miss_indices(vpns: &[u64], capacity: usize) -> Vec<usize> {
    let mut last_use: HashMap<u64, usize> = HashMap::new();
    let mut misses = Vec::new();
    for (i, &v) in vpns.iter().enumerate() {
        if !last_use.contains_key(&v) {
            misses.push(i);
            if last_use.len() == capacity {
                let (&oldest, _) = last_use.iter().min_by_key(|&(_, &t)| t).unwrap();
                last_use.remove(&oldest);
            }
        }
        last_use.insert(v, i);
    }
    misses
}
