//! Closed-form weights from a miss log.
//!
//! For every address token the most frequent next address token is written
//! into the embedding as a `±1` codeword, and the head scores each ordinal by
//! its own codeword. Layer weights stay zero, which makes every block the
//! identity, so the network reduces to a first-order table over residues.
//! Tokens never seen in the log embed to zero and predict uniformly.

use super::{ModelConfig, ModelError, ModelWeights};
use crate::token;
use crate::trace::AccessEvent;

/// Default embedding scale: neighbouring codewords differ by 8 logits.
pub const DEFAULT_FIT_SCALE: f32 = 2.0;

/// The `index`-th `±1` vector of length `d` with an even number of `-1`
/// entries. Distinct codewords differ in at least two places.
pub fn codeword(index: usize, d: usize) -> Vec<f32> {
    let bits = (0u64..).filter(|b| b.count_ones() % 2 == 0).nth(index).expect("codeword index in range");
    (0..d).map(|j| if bits >> j & 1 == 1 { -1.0 } else { 1.0 }).collect()
}

/// `table[a]` is the most frequent token following `a` (ties go to the
/// smaller token), or `None` if `a` never has a successor.
pub fn successor_table(events: &[AccessEvent], vocab: usize) -> Vec<Option<usize>> {
    let mut counts = vec![0u64; vocab * vocab];
    for w in events.windows(2) {
        counts[token(w[0].vpn, vocab) * vocab + token(w[1].vpn, vocab)] += 1;
    }
    counts
        .chunks(vocab)
        .map(|row| {
            let (best, &n) = row.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))?;
            (n > 0).then_some(best)
        })
        .collect()
}

/// Fraction of transitions in `events` whose next token `table` predicts.
pub fn table_accuracy(table: &[Option<usize>], events: &[AccessEvent]) -> f64 {
    let vocab = table.len();
    let n = events.len().saturating_sub(1);
    if n == 0 {
        return 0.0;
    }
    let hits = events.windows(2).filter(|w| table[token(w[0].vpn, vocab)] == Some(token(w[1].vpn, vocab))).count();
    hits as f64 / n as f64
}

pub fn fit_successor_table(
    events: &[AccessEvent],
    config: ModelConfig,
    scale: f32,
) -> Result<ModelWeights, ModelError> {
    config.validate()?;
    let (k, d) = (config.vocab, config.hidden);
    if d >= usize::BITS as usize || k > 1usize << (d - 1) {
        return Err(ModelError::InvalidConfig(format!("{k} codewords do not fit in hidden size {d}")));
    }
    let words: Vec<Vec<f32>> = (0..k).map(|i| codeword(i, d)).collect();
    let mut w = ModelWeights::zeros(config)?;
    for (a, next) in successor_table(events, k).into_iter().enumerate() {
        if let Some(b) = next {
            for (dst, src) in w.embed_addr[a * d..(a + 1) * d].iter_mut().zip(&words[b]) {
                *dst = scale * src;
            }
        }
    }
    for (j, word) in words.iter().enumerate() {
        for (i, &x) in word.iter().enumerate() {
            w.head[i * k + j] = x;
        }
    }
    Ok(w)
}
