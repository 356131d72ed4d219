//! Reference-logit fixtures: `position,addr_tok,pc_tok,logit_0..logit_{K-1}`,
//! one row per step of a token stream fed to a fresh state.

use std::io::{Read, Write};

use super::{ModelError, ModelWeights};

#[derive(Clone, Debug, PartialEq)]
pub struct GoldenRow {
    pub position: usize,
    pub addr_tok: usize,
    pub pc_tok: usize,
    pub logits: Vec<f32>,
}

fn csv_err(e: csv::Error) -> ModelError {
    ModelError::InvalidConfig(format!("golden fixture: {e}"))
}

/// Runs `tokens` through `weights` from a fresh state.
pub fn golden_rows(weights: &ModelWeights, tokens: &[(usize, usize)]) -> Result<Vec<GoldenRow>, ModelError> {
    let mut state = weights.new_state();
    tokens
        .iter()
        .enumerate()
        .map(|(position, &(addr_tok, pc_tok))| {
            Ok(GoldenRow { position, addr_tok, pc_tok, logits: weights.forward_step(&mut state, addr_tok, pc_tok)? })
        })
        .collect()
}

pub fn write_golden<W: Write>(rows: &[GoldenRow], out: W) -> Result<(), ModelError> {
    let mut w = csv::Writer::from_writer(out);
    let k = rows.first().map_or(0, |r| r.logits.len());
    let mut header = vec!["position".to_string(), "addr_tok".into(), "pc_tok".into()];
    header.extend((0..k).map(|j| format!("logit_{j}")));
    w.write_record(&header).map_err(csv_err)?;
    for r in rows {
        let mut rec = vec![r.position.to_string(), r.addr_tok.to_string(), r.pc_tok.to_string()];
        rec.extend(r.logits.iter().map(|x| format!("{x:e}")));
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_golden<R: Read>(input: R) -> Result<Vec<GoldenRow>, ModelError> {
    let mut rd = csv::Reader::from_reader(input);
    let bad = |m: String| ModelError::InvalidConfig(format!("golden fixture: {m}"));
    let mut rows = Vec::new();
    for rec in rd.records() {
        let rec = rec.map_err(csv_err)?;
        let field = |i: usize| rec.get(i).ok_or_else(|| bad(format!("missing column {i}")));
        let int = |i: usize| field(i)?.trim().parse::<usize>().map_err(|e| bad(e.to_string()));
        let logits = (3..rec.len())
            .map(|i| field(i)?.trim().parse::<f32>().map_err(|e| bad(e.to_string())))
            .collect::<Result<_, _>>()?;
        rows.push(GoldenRow { position: int(0)?, addr_tok: int(1)?, pc_tok: int(2)?, logits });
    }
    Ok(rows)
}

/// Largest absolute logit difference between `rows` and a replay of their
/// token stream.
pub fn golden_max_error(weights: &ModelWeights, rows: &[GoldenRow]) -> Result<f32, ModelError> {
    let tokens: Vec<_> = rows.iter().map(|r| (r.addr_tok, r.pc_tok)).collect();
    let ours = golden_rows(weights, &tokens)?;
    let mut worst = 0.0f32;
    for (a, b) in ours.iter().zip(rows) {
        if a.logits.len() != b.logits.len() {
            return Err(bad_width(b.logits.len(), a.logits.len()));
        }
        for (x, y) in a.logits.iter().zip(&b.logits) {
            worst = worst.max((x - y).abs());
        }
    }
    Ok(worst)
}

fn bad_width(found: usize, expected: usize) -> ModelError {
    ModelError::InvalidConfig(format!("golden fixture has {found} logits per row, model has {expected}"))
}
