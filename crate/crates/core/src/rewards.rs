//! Rule-based rewards for tagged multiple-choice responses.
//!
//! A response is scored on four components: tag format, answer correctness, a cosine length
//! schedule over the reasoning span, and an n-gram repetition penalty. The total is their
//! weighted sum.

use std::collections::HashSet;
use std::f64::consts::PI;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::error::{config, input, Result};
use crate::policy::{letter_index, ANSWER_CLOSE, ANSWER_OPEN, THINK_CLOSE, THINK_OPEN};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardWeights {
    pub w_cls: f64,
    pub w_fmt: f64,
    pub w_cos: f64,
    pub w_rep: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        RewardWeights {
            w_cls: 3.0,
            w_fmt: 1.0,
            w_cos: 1.0,
            w_rep: 1.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<()> {
        let all = [self.w_cls, self.w_fmt, self.w_cos, self.w_rep];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(config(format!("reward weights must be finite and >= 0: {self:?}")));
        }
        Ok(())
    }

    pub fn combine(&self, format: f64, classification: f64, cosine: f64, repetition: f64) -> f64 {
        self.w_cls * classification + self.w_fmt * format + self.w_cos * cosine + self.w_rep * repetition
    }
}

/// Endpoints of the cosine length schedule for correct and wrong answers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineSchedule {
    pub max_len: usize,
    pub correct_at_zero: f64,
    pub correct_at_max: f64,
    pub wrong_at_zero: f64,
    pub wrong_at_max: f64,
}

impl Default for CosineSchedule {
    fn default() -> Self {
        CosineSchedule {
            max_len: 16,
            correct_at_zero: 1.0,
            correct_at_max: 0.0,
            wrong_at_zero: -0.5,
            wrong_at_max: 0.0,
        }
    }
}

impl CosineSchedule {
    pub fn validate(&self) -> Result<()> {
        if self.max_len == 0 {
            return Err(config("cosine schedule length must be positive"));
        }
        if !(self.correct_at_zero > self.correct_at_max) {
            return Err(config("correct answers must be rewarded more at length 0"));
        }
        if !(self.wrong_at_zero < self.wrong_at_max) {
            return Err(config("wrong answers must be rewarded more at full length"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Correct,
    WrongValid,
    Invalid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub format: u8,
    pub classification: i8,
    pub cosine: f64,
    pub repetition: f64,
    pub total: f64,
}

/// Letter inside the first `<answer>…</answer>` span, if the trimmed content is a single option letter.
pub fn parse_answer(text: &str) -> Option<char> {
    let start = text.find(ANSWER_OPEN)? + ANSWER_OPEN.len();
    let end = text[start..].find(ANSWER_CLOSE)? + start;
    let mut chars = text[start..end].trim().chars();
    match (chars.next(), chars.next()) {
        (Some(c), None) if letter_index(c).is_some() => Some(c),
        _ => None,
    }
}

/// Content of the think span when `text` is exactly `<think>…</think> <answer>…</answer>`.
fn strict_think_span(text: &str) -> Option<&str> {
    const TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];
    let mut hits: Vec<(usize, usize)> = Vec::new();
    for (k, tag) in TAGS.iter().enumerate() {
        hits.extend(text.match_indices(tag).map(|(at, _)| (at, k)));
    }
    hits.sort_unstable();
    if hits.iter().map(|&(_, k)| k).ne(0..4) {
        return None;
    }
    let gap = |a: usize, b: usize| text[a..b].trim().is_empty();
    let (t_open, t_close, a_open, a_close) = (hits[0].0, hits[1].0, hits[2].0, hits[3].0);
    let ok = gap(0, t_open)
        && gap(t_close + THINK_CLOSE.len(), a_open)
        && gap(a_close + ANSWER_CLOSE.len(), text.len());
    ok.then(|| &text[t_open + THINK_OPEN.len()..t_close])
}

pub fn format_reward(text: &str) -> u8 {
    u8::from(strict_think_span(text).is_some())
}

/// Number of whitespace-separated tokens strictly inside the think span; 0 if the format is invalid.
pub fn think_len(text: &str) -> usize {
    strict_think_span(text).map_or(0, |s| s.split_whitespace().count())
}

pub fn outcome(parsed: Option<char>, gold: char, n_options: usize) -> Result<Outcome> {
    Ok(match classification_reward(parsed, gold, n_options)? {
        1 => Outcome::Correct,
        0 => Outcome::WrongValid,
        _ => Outcome::Invalid,
    })
}

pub fn classification_reward(parsed: Option<char>, gold: char, n_options: usize) -> Result<i8> {
    let valid = |c: char| letter_index(c).is_some_and(|i| i < n_options);
    if !valid(gold) {
        return Err(input(format!(
            "gold answer {gold:?} is not among {n_options} options"
        )));
    }
    Ok(match parsed {
        Some(c) if c == gold => 1,
        Some(c) if valid(c) => 0,
        _ => -1,
    })
}

pub fn cosine_reward(outcome: Outcome, think_len: usize, sched: &CosineSchedule) -> Result<f64> {
    if sched.max_len == 0 {
        return Err(config("cosine schedule length must be positive"));
    }
    let (start, end) = match outcome {
        Outcome::Invalid => return Ok(-1.0),
        Outcome::Correct => (sched.correct_at_zero, sched.correct_at_max),
        Outcome::WrongValid => (sched.wrong_at_zero, sched.wrong_at_max),
    };
    let frac = think_len.min(sched.max_len) as f64 / sched.max_len as f64;
    Ok(end + 0.5 * (start - end) * (1.0 + (PI * frac).cos()))
}

/// `-(1 - distinct / total)` over the n-grams of `tokens`; 0 when shorter than `n`.
pub fn repetition_reward<T: Eq + Hash>(tokens: &[T], n: usize) -> Result<f64> {
    if n == 0 {
        return Err(input("n-gram order must be at least 1"));
    }
    if tokens.len() < n {
        return Ok(0.0);
    }
    let total = tokens.len() - n + 1;
    let distinct = tokens.windows(n).collect::<HashSet<_>>().len();
    Ok(-(1.0 - distinct as f64 / total as f64))
}

/// Configuration bundle for [`score`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RewardConfig {
    pub weights: RewardWeights,
    pub cosine: CosineSchedule,
    pub ngram: usize,
}

impl Default for RewardConfig {
    fn default() -> Self {
        RewardConfig {
            weights: RewardWeights::default(),
            cosine: CosineSchedule::default(),
            ngram: 3,
        }
    }
}

impl RewardConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        self.cosine.validate()?;
        if self.ngram == 0 {
            return Err(config("n-gram order must be at least 1"));
        }
        Ok(())
    }
}

/// Score one response. `token_ids` are the rendered tokens (no end-of-sequence marker).
pub fn score<T: Eq + Hash>(
    text: &str,
    token_ids: &[T],
    gold: char,
    n_options: usize,
    cfg: &RewardConfig,
) -> Result<RewardBreakdown> {
    let format = format_reward(text);
    let parsed = parse_answer(text);
    let classification = classification_reward(parsed, gold, n_options)?;
    let outcome = outcome(parsed, gold, n_options)?;
    let cosine = cosine_reward(outcome, think_len(text), &cfg.cosine)?;
    let repetition = repetition_reward(token_ids, cfg.ngram)?;
    let total = cfg
        .weights
        .combine(format as f64, classification as f64, cosine, repetition);
    Ok(RewardBreakdown {
        format,
        classification,
        cosine,
        repetition,
        total,
    })
}
