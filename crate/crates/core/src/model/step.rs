use super::{ModelError, ModelWeights, RecurrentState};

pub const RMS_EPS: f32 = 1e-6;

/// Scale-only RMS normalisation (no learned gain).
pub fn rms_norm(x: &[f32], out: &mut [f32]) {
    let mean_sq = x.iter().map(|v| v * v).sum::<f32>() / x.len() as f32;
    let inv = 1.0 / (mean_sq + RMS_EPS).sqrt();
    out.iter_mut().zip(x).for_each(|(o, v)| *o = v * inv);
}

/// GELU, tanh approximation.
pub fn gelu(x: f32) -> f32 {
    const SQRT_2_OVER_PI: f32 = 0.797_884_6;
    0.5 * x * (1.0 + (SQRT_2_OVER_PI * (x + 0.044_715 * x * x * x)).tanh())
}

/// `out = x * m` for a row vector `x` and row-major `m` with `out.len()` columns.
#[inline]
fn vec_mat(x: &[f32], m: &[f32], out: &mut [f32]) {
    let cols = out.len();
    out.fill(0.0);
    for (xi, row) in x.iter().zip(m.chunks_exact(cols)) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += xi * w;
        }
    }
}

fn check_token(token: usize, vocab: usize) -> Result<(), ModelError> {
    if token < vocab {
        Ok(())
    } else {
        Err(ModelError::TokenOutOfRange { token, vocab })
    }
}

/// `E_addr[addr_tok] + E_pc[pc_tok]`.
pub fn embed_token(weights: &ModelWeights, addr_tok: usize, pc_tok: usize) -> Result<Vec<f32>, ModelError> {
    let mut out = vec![0.0; weights.config.hidden];
    embed_into(weights, addr_tok, pc_tok, &mut out)?;
    Ok(out)
}

fn embed_into(weights: &ModelWeights, addr_tok: usize, pc_tok: usize, out: &mut [f32]) -> Result<(), ModelError> {
    let (k, d) = (weights.config.vocab, weights.config.hidden);
    check_token(addr_tok, k)?;
    check_token(pc_tok, k)?;
    let a = &weights.embed_addr[addr_tok * d..(addr_tok + 1) * d];
    let p = &weights.embed_pc[pc_tok * d..(pc_tok + 1) * d];
    out.iter_mut().zip(a.iter().zip(p)).for_each(|(o, (a, p))| *o = a + p);
    Ok(())
}

/// Activation buffers for one forward step, sized for a config.
#[derive(Clone, Debug)]
pub struct Scratch {
    x: Vec<f32>,
    normed: Vec<f32>,
    q: Vec<f32>,
    k: Vec<f32>,
    v: Vec<f32>,
    o: Vec<f32>,
    delta: Vec<f32>,
    ffn: Vec<f32>,
}

impl Scratch {
    pub fn new(weights: &ModelWeights) -> Self {
        let d = weights.config.hidden;
        let z = || vec![0.0; d];
        Self {
            x: z(),
            normed: z(),
            q: z(),
            k: z(),
            v: z(),
            o: z(),
            delta: z(),
            ffn: vec![0.0; weights.config.ffn_hidden()],
        }
    }
}

impl ModelWeights {
    /// Advances `state` by one token and returns the logits.
    pub fn forward_step(
        &self,
        state: &mut RecurrentState,
        addr_tok: usize,
        pc_tok: usize,
    ) -> Result<Vec<f32>, ModelError> {
        let mut scratch = Scratch::new(self);
        let mut logits = vec![0.0; self.config.vocab];
        self.forward_step_with(state, addr_tok, pc_tok, &mut scratch, &mut logits)?;
        Ok(logits)
    }

    /// Allocation-free form of [`forward_step`](Self::forward_step).
    ///
    /// Per layer, with `h = rms(x)`:
    /// `S <- gamma * S + k^T v`, `x += (q S) W_O`, then `x += gelu(rms(x) F1) F2`.
    /// Logits are `x * head`. On error the state is left partially updated.
    pub fn forward_step_with(
        &self,
        state: &mut RecurrentState,
        addr_tok: usize,
        pc_tok: usize,
        s: &mut Scratch,
        logits: &mut [f32],
    ) -> Result<(), ModelError> {
        let d = self.config.hidden;
        if state.layers.len() != self.layers.len() {
            return Err(ModelError::StateMismatch { expected: self.layers.len(), found: state.layers.len() });
        }
        embed_into(self, addr_tok, pc_tok, &mut s.x)?;

        for (l, (layer, mem)) in self.layers.iter().zip(state.layers.iter_mut()).enumerate() {
            let gamma = self.config.decay[l];

            rms_norm(&s.x, &mut s.normed);
            vec_mat(&s.normed, &layer.w_q, &mut s.q);
            vec_mat(&s.normed, &layer.w_k, &mut s.k);
            vec_mat(&s.normed, &layer.w_v, &mut s.v);
            for (row, &ki) in mem.chunks_exact_mut(d).zip(&s.k) {
                for (m, &vj) in row.iter_mut().zip(&s.v) {
                    *m = gamma * *m + ki * vj;
                }
            }
            vec_mat(&s.q, mem, &mut s.o);
            vec_mat(&s.o, &layer.w_o, &mut s.delta);
            s.x.iter_mut().zip(&s.delta).for_each(|(x, r)| *x += r);

            rms_norm(&s.x, &mut s.normed);
            vec_mat(&s.normed, &layer.ffn_up, &mut s.ffn);
            s.ffn.iter_mut().for_each(|h| *h = gelu(*h));
            vec_mat(&s.ffn, &layer.ffn_down, &mut s.delta);
            s.x.iter_mut().zip(&s.delta).for_each(|(x, r)| *x += r);

            if !s.x.iter().all(|v| v.is_finite()) {
                return Err(ModelError::NonFinite { layer: l });
            }
        }

        vec_mat(&s.x, &self.head, logits);
        state.token_count += 1;
        if !logits.iter().all(|v| v.is_finite()) {
            return Err(ModelError::NonFinite { layer: self.layers.len() });
        }
        Ok(())
    }
}

/// Softmax over `logits`, then the `n` most probable ordinals. Ties go to the
/// lower ordinal.
pub fn predict_topn(logits: &[f32], n: usize) -> Result<Vec<(usize, f32)>, ModelError> {
    let vocab = logits.len();
    if n == 0 || n > vocab {
        return Err(ModelError::InvalidTopN { n, vocab });
    }
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max) as f64;
    let exps: Vec<f64> = logits.iter().map(|&z| (z as f64 - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let mut ranked: Vec<(usize, f32)> = exps.iter().enumerate().map(|(i, e)| (i, (e / total) as f32)).collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(n);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use proptest::prelude::*;

    fn zero_model() -> ModelWeights {
        ModelWeights::zeros(ModelConfig::default()).unwrap()
    }

    #[test]
    fn zero_tables_embed_to_zero() {
        assert_eq!(embed_token(&zero_model(), 3, 5).unwrap(), vec![0.0; 8]);
    }

    #[test]
    fn embedding_is_row_sum() {
        let mut w = zero_model();
        let e1: Vec<f32> = (0..8).map(|i| i as f32 * 0.5).collect();
        let e2: Vec<f32> = (0..8).map(|i| 1.0 - i as f32).collect();
        w.embed_addr[3 * 8..4 * 8].copy_from_slice(&e1);
        w.embed_pc[5 * 8..6 * 8].copy_from_slice(&e2);
        let want: Vec<f32> = e1.iter().zip(&e2).map(|(a, b)| a + b).collect();
        assert_eq!(embed_token(&w, 3, 5).unwrap(), want);
    }

    #[test]
    fn embedding_matches_scalar_loop() {
        let w = ModelWeights::random(ModelConfig::default(), 17, 1.0).unwrap();
        for a in 0..64 {
            for p in (0..64).step_by(7) {
                let got = embed_token(&w, a, p).unwrap();
                for (j, g) in got.iter().enumerate() {
                    let want = w.embed_addr[a * 8 + j] + w.embed_pc[p * 8 + j];
                    assert_eq!(g.to_bits(), want.to_bits());
                }
            }
        }
    }

    #[test]
    fn out_of_range_tokens_rejected() {
        let w = zero_model();
        assert!(matches!(embed_token(&w, 64, 0), Err(ModelError::TokenOutOfRange { token: 64, vocab: 64 })));
        let mut s = w.new_state();
        assert!(w.forward_step(&mut s, 0, 99).is_err());
    }

    #[test]
    fn zero_weights_give_uniform_distribution() {
        let w = zero_model();
        let mut s = w.new_state();
        let logits = w.forward_step(&mut s, 12, 40).unwrap();
        assert!(logits.iter().all(|&z| z == 0.0));
        let top = predict_topn(&logits, 64).unwrap();
        assert!(top.iter().all(|&(_, p)| (p - 0.015625).abs() < 1e-7));
        assert_eq!(s.token_count, 1);
    }

    #[test]
    fn tiny_decay_forgets_history() {
        let c = ModelConfig { decay: vec![f32::MIN_POSITIVE; 2], ..Default::default() };
        let w = ModelWeights::random(c, 5, 0.7).unwrap();
        let mut fresh = w.new_state();
        let mut warm = w.new_state();
        for t in 0..20 {
            w.forward_step(&mut warm, t, 63 - t).unwrap();
        }
        let a = w.forward_step(&mut fresh, 9, 4).unwrap();
        let b = w.forward_step(&mut warm, 9, 4).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() <= 1e-6, "{x} vs {y}");
        }
    }

    #[test]
    fn state_mismatch_detected() {
        let w = zero_model();
        let mut s = RecurrentState::new(&ModelConfig::new(64, 8, 3));
        assert!(matches!(w.forward_step(&mut s, 0, 0), Err(ModelError::StateMismatch { .. })));
    }

    #[test]
    fn non_finite_weights_surface_as_numeric_error() {
        let mut w = zero_model();
        w.embed_addr[0] = f32::NAN;
        let mut s = w.new_state();
        assert!(matches!(w.forward_step(&mut s, 0, 0), Err(ModelError::NonFinite { .. })));
    }

    #[test]
    fn forward_step_is_deterministic() {
        let w = ModelWeights::random(ModelConfig::default(), 1, 0.5).unwrap();
        let run = || {
            let mut s = w.new_state();
            (0..200).map(|t| w.forward_step(&mut s, (t * 7) % 64, (t * 3) % 64).unwrap()).collect::<Vec<_>>()
        };
        let (a, b) = (run(), run());
        assert!(a.iter().flatten().zip(b.iter().flatten()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn topn_tie_break_and_spike() {
        let zeros = vec![0.0f32; 64];
        assert_eq!(predict_topn(&zeros, 1).unwrap(), vec![(0, 1.0 / 64.0)]);
        let mut spike = zeros.clone();
        spike[7] = 10.0;
        let top = predict_topn(&spike, 3).unwrap();
        // e^10 / (e^10 + 63)
        let want = (10f64.exp() / (10f64.exp() + 63.0)) as f32;
        assert_eq!(top[0].0, 7);
        assert!(top[0].1 > 0.99 && (top[0].1 - want).abs() < 1e-6);
        assert_eq!((top[1].0, top[2].0), (0, 1));
        assert!(predict_topn(&zeros, 0).is_err());
        assert!(predict_topn(&zeros, 65).is_err());
    }

    #[test]
    fn gelu_reference_points() {
        assert_eq!(gelu(0.0), 0.0);
        assert!((gelu(1.0) - 0.841_192).abs() < 1e-5);
        assert!((gelu(-1.0) + 0.158_808).abs() < 1e-5);
        assert!(gelu(-10.0).abs() < 1e-6);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(logits in proptest::collection::vec(-50.0f32..50.0, 2..100)) {
            let all = predict_topn(&logits, logits.len()).unwrap();
            let sum: f32 = all.iter().map(|p| p.1).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6);
            prop_assert!(all.iter().all(|&(_, p)| (0.0..=1.0).contains(&p)));
            prop_assert!(all.windows(2).all(|w| w[0].1 >= w[1].1));
            let mut ords: Vec<_> = all.iter().map(|p| p.0).collect();
            ords.sort_unstable();
            prop_assert_eq!(ords, (0..logits.len()).collect::<Vec<_>>());
        }
    }
}
