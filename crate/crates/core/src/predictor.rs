//! Online prediction: miss stream in, prefetch candidates out.
//!
//! On every hard miss the predictor records the observed transition in the
//! future maps, advances the model by one token and resolves the most likely
//! ordinals against the faulting page's future map. Unresolvable ordinals are
//! dropped, so every candidate is a page that was really seen following the
//! current one.

use std::collections::VecDeque;
use std::sync::Arc;

use crate::futuremap::FutureMapStore;
use crate::model::{predict_topn, ModelError, ModelWeights, RecurrentState, Scratch};
use crate::token;
use crate::trace::MissEvent;

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorConfig {
    /// History length kept for inspection and restarts.
    pub history: usize,
    /// Ordinals considered per miss.
    pub top_n: usize,
    /// Ordinals below this probability are not prefetched.
    pub min_prob: f32,
    /// Speculative chain length; 1 disables chaining.
    pub depth: usize,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self { history: 8, top_n: 2, min_prob: 0.1, depth: 1 }
    }
}

impl PredictorConfig {
    pub fn validate(&self, vocab: usize) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidConfig(m));
        if self.history == 0 {
            return bad("history length must be at least 1".into());
        }
        if self.top_n == 0 || self.top_n > vocab {
            return bad(format!("top_n {} outside [1, {vocab}]", self.top_n));
        }
        // 1.0 is accepted and disables prefetching outright.
        if !(0.0..=1.0).contains(&self.min_prob) {
            return bad(format!("min_prob {} outside [0, 1]", self.min_prob));
        }
        if self.depth == 0 {
            return bad("depth must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Candidate {
    pub vpn: u64,
    pub ordinal: usize,
    pub prob: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PredictorState {
    /// Most recent `(addr_tok, pc_tok)` pairs, oldest first.
    pub history: VecDeque<(usize, usize)>,
    pub recurrent: RecurrentState,
    pub last_miss_vpn: Option<u64>,
}

#[derive(Clone, Debug)]
pub struct Predictor {
    weights: Arc<ModelWeights>,
    config: PredictorConfig,
    state: PredictorState,
    scratch: Scratch,
    logits: Vec<f32>,
    ranked: Vec<(usize, f32)>,
}

impl Predictor {
    pub fn new(weights: Arc<ModelWeights>, config: PredictorConfig) -> Result<Self, ModelError> {
        config.validate(weights.config.vocab)?;
        Ok(Self {
            state: PredictorState {
                history: VecDeque::with_capacity(config.history),
                recurrent: weights.new_state(),
                last_miss_vpn: None,
            },
            scratch: Scratch::new(&weights),
            logits: vec![0.0; weights.config.vocab],
            ranked: Vec::new(),
            weights,
            config,
        })
    }

    pub fn vocab(&self) -> usize {
        self.weights.config.vocab
    }

    pub fn config(&self) -> &PredictorConfig {
        &self.config
    }

    pub fn weights(&self) -> &Arc<ModelWeights> {
        &self.weights
    }

    pub fn state(&self) -> &PredictorState {
        &self.state
    }

    /// Ranked `(ordinal, probability)` pairs from the last committed step,
    /// before thresholding and resolution.
    pub fn last_ranked(&self) -> &[(usize, f32)] {
        &self.ranked
    }

    fn admits(&self, prob: f32) -> bool {
        self.config.min_prob < 1.0 && prob >= self.config.min_prob
    }

    pub fn on_miss(&mut self, store: &mut FutureMapStore, event: MissEvent) -> Result<Vec<Candidate>, ModelError> {
        let k = self.vocab();
        if let Some(prev) = self.state.last_miss_vpn {
            store.observe_transition(prev, event.vpn);
        }
        self.state.last_miss_vpn = Some(event.vpn);

        let tokens = (token(event.vpn, k), token(event.pc, k));
        if self.state.history.len() == self.config.history {
            self.state.history.pop_front();
        }
        self.state.history.push_back(tokens);
        self.weights.forward_step_with(
            &mut self.state.recurrent,
            tokens.0,
            tokens.1,
            &mut self.scratch,
            &mut self.logits,
        )?;
        self.ranked = predict_topn(&self.logits, self.config.top_n)?;

        let mut out: Vec<Candidate> = Vec::new();
        let push = |c: Candidate, out: &mut Vec<Candidate>| {
            if c.vpn != event.vpn && !out.iter().any(|o| o.vpn == c.vpn) {
                out.push(c);
            }
        };

        let mut best = None;
        for &(ordinal, prob) in &self.ranked {
            if !self.admits(prob) {
                break;
            }
            if let Some(vpn) = store.resolve(event.vpn, ordinal) {
                let c = Candidate { vpn, ordinal, prob };
                best.get_or_insert(c);
                push(c, &mut out);
            }
        }

        if self.config.depth > 1 {
            if let Some(mut from) = best {
                let mut spec_state = self.state.recurrent.clone();
                let mut logits = vec![0.0; k];
                let pc_tok = tokens.1;
                for _ in 1..self.config.depth {
                    self.weights.forward_step_with(
                        &mut spec_state,
                        token(from.vpn, k),
                        pc_tok,
                        &mut self.scratch,
                        &mut logits,
                    )?;
                    let mut next = None;
                    for (ordinal, prob) in predict_topn(&logits, self.config.top_n)? {
                        if !self.admits(prob) {
                            break;
                        }
                        if let Some(vpn) = store.peek(from.vpn, ordinal) {
                            let c = Candidate { vpn, ordinal, prob };
                            next.get_or_insert(c);
                            push(c, &mut out);
                        }
                    }
                    match next {
                        Some(c) => from = c,
                        None => break,
                    }
                }
            }
        }
        Ok(out)
    }

    /// Forgets history and recurrent state. Future maps are not touched.
    pub fn reset(&mut self) {
        self.state.history.clear();
        self.state.recurrent.reset();
        self.state.last_miss_vpn = None;
        self.ranked.clear();
    }
}
