use serde::{Deserialize, Serialize};

use super::vocab::TokenId;
use crate::error::{input, Error, Result};

/// How the logit row for a position is selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextMode {
    /// One row per (question, position).
    Question,
    /// One row per (question, previous token, position); position 0 uses a start slot.
    QuestionAndPrevToken,
}

impl ContextMode {
    pub(crate) fn code(self) -> u8 {
        match self {
            ContextMode::Question => 0,
            ContextMode::QuestionAndPrevToken => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ContextMode::Question),
            1 => Some(ContextMode::QuestionAndPrevToken),
            _ => None,
        }
    }
}

/// Logits of the toy policy, laid out row-major as `[context][slot][position][token]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    vocab_size: usize,
    max_len: usize,
    num_contexts: usize,
    mode: ContextMode,
    logits: Vec<f64>,
}

impl PolicyParams {
    pub fn zeros(
        vocab_size: usize,
        max_len: usize,
        num_contexts: usize,
        mode: ContextMode,
    ) -> Result<Self> {
        if vocab_size < 2 || max_len == 0 || num_contexts == 0 {
            return Err(input(format!(
                "degenerate policy shape V={vocab_size} T={max_len} contexts={num_contexts}"
            )));
        }
        let slots = slots_for(mode, vocab_size);
        Ok(PolicyParams {
            vocab_size,
            max_len,
            num_contexts,
            mode,
            logits: vec![0.0; num_contexts * slots * max_len * vocab_size],
        })
    }

    pub fn from_logits(
        vocab_size: usize,
        max_len: usize,
        num_contexts: usize,
        mode: ContextMode,
        logits: Vec<f64>,
    ) -> Result<Self> {
        let mut p = PolicyParams::zeros(vocab_size, max_len, num_contexts, mode)?;
        if logits.len() != p.logits.len() {
            return Err(input(format!(
                "expected {} logits, got {}",
                p.logits.len(),
                logits.len()
            )));
        }
        if let Some(i) = logits.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("logit {i} is not finite")));
        }
        p.logits = logits;
        Ok(p)
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab_size
    }
    pub fn max_len(&self) -> usize {
        self.max_len
    }
    pub fn num_contexts(&self) -> usize {
        self.num_contexts
    }
    pub fn mode(&self) -> ContextMode {
        self.mode
    }
    pub fn logits(&self) -> &[f64] {
        &self.logits
    }
    pub fn logits_mut(&mut self) -> &mut [f64] {
        &mut self.logits
    }

    pub fn slots(&self) -> usize {
        slots_for(self.mode, self.vocab_size)
    }

    pub fn same_shape(&self, other: &PolicyParams) -> bool {
        self.vocab_size == other.vocab_size
            && self.max_len == other.max_len
            && self.num_contexts == other.num_contexts
            && self.mode == other.mode
    }

    /// Offset of the logit row used at position `t` given the previous token.
    pub fn row_offset(&self, context: usize, prev: Option<TokenId>, t: usize) -> usize {
        debug_assert!(context < self.num_contexts && t < self.max_len);
        let slot = match self.mode {
            ContextMode::Question => 0,
            ContextMode::QuestionAndPrevToken => prev.map_or(0, |p| p + 1),
        };
        ((context * self.slots() + slot) * self.max_len + t) * self.vocab_size
    }

    pub fn row(&self, context: usize, prev: Option<TokenId>, t: usize) -> &[f64] {
        let off = self.row_offset(context, prev, t);
        &self.logits[off..off + self.vocab_size]
    }

    pub fn row_mut(&mut self, context: usize, prev: Option<TokenId>, t: usize) -> &mut [f64] {
        let off = self.row_offset(context, prev, t);
        let v = self.vocab_size;
        &mut self.logits[off..off + v]
    }

    pub(crate) fn check_sequence(&self, context: usize, token_ids: &[TokenId]) -> Result<()> {
        if context >= self.num_contexts {
            return Err(input(format!(
                "context {context} out of range ({} contexts)",
                self.num_contexts
            )));
        }
        if token_ids.len() > self.max_len {
            return Err(input(format!(
                "sequence of {} tokens exceeds max length {}",
                token_ids.len(),
                self.max_len
            )));
        }
        if let Some(&bad) = token_ids.iter().find(|&&v| v >= self.vocab_size) {
            return Err(input(format!(
                "token id {bad} out of range (V={})",
                self.vocab_size
            )));
        }
        Ok(())
    }

    /// Row offsets visited by a token sequence, one per position.
    pub fn row_offsets(&self, context: usize, token_ids: &[TokenId]) -> Vec<usize> {
        (0..token_ids.len())
            .map(|t| {
                let prev = if t == 0 { None } else { Some(token_ids[t - 1]) };
                self.row_offset(context, prev, t)
            })
            .collect()
    }
}

fn slots_for(mode: ContextMode, vocab_size: usize) -> usize {
    match mode {
        ContextMode::Question => 1,
        ContextMode::QuestionAndPrevToken => vocab_size + 1,
    }
}

/// `ln Σ exp(z)` computed with the max shift.
pub fn log_sum_exp(row: &[f64]) -> f64 {
    let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + row.iter().map(|z| (z - m).exp()).sum::<f64>().ln()
}

pub fn softmax(row: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(row);
    row.iter().map(|z| (z - lse).exp()).collect()
}

pub fn log_softmax_at(row: &[f64], v: usize) -> f64 {
    (row[v] - log_sum_exp(row)).min(0.0)
}

/// Per-token log-probabilities of `token_ids` under `params`.
pub fn logprob(params: &PolicyParams, context: usize, token_ids: &[TokenId]) -> Result<Vec<f64>> {
    params.check_sequence(context, token_ids)?;
    Ok(params
        .row_offsets(context, token_ids)
        .into_iter()
        .zip(token_ids)
        .map(|(off, &v)| log_softmax_at(&params.logits[off..off + params.vocab_size], v))
        .collect())
}

/// Gradient of one log-probability entry. Only one logit row is non-zero.
#[derive(Debug, Clone, PartialEq)]
pub struct RowGradient {
    pub offset: usize,
    pub values: Vec<f64>,
}

impl RowGradient {
    pub fn to_dense(&self, len: usize) -> Vec<f64> {
        let mut out = vec![0.0; len];
        out[self.offset..self.offset + self.values.len()].copy_from_slice(&self.values);
        out
    }
}

/// `∂ log π(token_ids[t]) / ∂ logits`: `onehot(v*) − softmax(row)` on the visited row.
pub fn logprob_grad(
    params: &PolicyParams,
    context: usize,
    token_ids: &[TokenId],
    t: usize,
) -> Result<RowGradient> {
    params.check_sequence(context, token_ids)?;
    if t >= token_ids.len() {
        return Err(input(format!(
            "position {t} out of range for a sequence of {}",
            token_ids.len()
        )));
    }
    let prev = if t == 0 { None } else { Some(token_ids[t - 1]) };
    let offset = params.row_offset(context, prev, t);
    let mut values = softmax(&params.logits[offset..offset + params.vocab_size]);
    for p in values.iter_mut() {
        *p = -*p;
    }
    values[token_ids[t]] += 1.0;
    Ok(RowGradient { offset, values })
}
