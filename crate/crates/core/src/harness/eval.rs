use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tasks::{TaskSet, Tier};
use crate::policy::{letter_index, softmax, PolicyParams, TokenId, Vocabulary};

/// Exact probabilities for one question under the policy's sampling distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuestionEval {
    /// Probability that the parsed answer equals the gold letter.
    pub accuracy: f64,
    /// Probability that the response has the strict think/answer layout.
    pub format_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub accuracy: f64,
    pub accuracy_easy: f64,
    pub accuracy_hard: f64,
    pub format_rate: f64,
    pub robust_accuracy: f64,
    pub per_question: Vec<QuestionEval>,
}

// format automaton
const F_START: usize = 0;
const F_THINK: usize = 1;
const F_AFTER_THINK: usize = 2;
const F_ANSWER: usize = 3;
const F_DONE: usize = 4;
const F_BAD: usize = 5;
const N_F: usize = 6;

// answer-parse automaton
const P_SEEK: usize = 0;
const P_OPEN: usize = 1;
const P_GOLD: usize = 2;
const P_OTHER: usize = 3;
const P_GARBAGE: usize = 4;
const P_DONE_GOLD: usize = 5;
const P_DONE_OTHER: usize = 6;
const N_P: usize = 7;

fn step_format(vocab: &Vocabulary, state: usize, v: TokenId) -> usize {
    let is_tag = vocab.is_structural(v);
    match state {
        F_START if v == vocab.think_open() => F_THINK,
        F_THINK if v == vocab.think_close() => F_AFTER_THINK,
        F_THINK if !is_tag => F_THINK,
        F_AFTER_THINK if v == vocab.answer_open() => F_ANSWER,
        F_ANSWER if v == vocab.answer_close() => F_DONE,
        F_ANSWER if !is_tag => F_ANSWER,
        _ => F_BAD,
    }
}

fn step_parse(vocab: &Vocabulary, state: usize, v: TokenId, gold: TokenId) -> usize {
    let close = v == vocab.answer_close();
    match state {
        P_SEEK if v == vocab.answer_open() => P_OPEN,
        P_SEEK => P_SEEK,
        P_OPEN if close => P_DONE_OTHER,
        P_OPEN if v == gold => P_GOLD,
        P_OPEN if vocab.choice_ids().contains(&v) => P_OTHER,
        P_GOLD if close => P_DONE_GOLD,
        P_OPEN | P_GOLD | P_OTHER | P_GARBAGE if close => P_DONE_OTHER,
        P_OPEN | P_GOLD | P_OTHER | P_GARBAGE => P_GARBAGE,
        done => done,
    }
}

/// Forward pass over (previous token, format state, parse state) up to the length limit.
pub fn evaluate_question(
    params: &PolicyParams,
    vocab: &Vocabulary,
    context: usize,
    gold_letter: char,
) -> QuestionEval {
    let v_len = vocab.len();
    let gold = vocab.choice_ids().start + letter_index(gold_letter).expect("valid gold");
    let eos = vocab.eos();
    let idx = |slot: usize, f: usize, p: usize| (slot * N_F + f) * N_P + p;
    let size = (v_len + 1) * N_F * N_P;
    let mut cur = vec![0.0; size];
    cur[idx(0, F_START, P_SEEK)] = 1.0;
    let (mut acc, mut fmt) = (0.0, 0.0);
    for t in 0..params.max_len() {
        let mut next = vec![0.0; size];
        for slot in 0..=v_len {
            let block = &cur[idx(slot, 0, 0)..idx(slot + 1, 0, 0)];
            if block.iter().all(|&m| m == 0.0) {
                continue;
            }
            let prev = slot.checked_sub(1);
            let probs = softmax(params.row(context, prev, t));
            for f in 0..N_F {
                for p in 0..N_P {
                    let mass = block[f * N_P + p];
                    if mass == 0.0 {
                        continue;
                    }
                    for (v, &pv) in probs.iter().enumerate() {
                        let m = mass * pv;
                        if v == eos {
                            fmt += if f == F_DONE { m } else { 0.0 };
                            acc += if p == P_DONE_GOLD { m } else { 0.0 };
                            continue;
                        }
                        let nf = step_format(vocab, f, v);
                        let np = step_parse(vocab, p, v, gold);
                        if nf == F_BAD && (np == P_DONE_GOLD || np == P_DONE_OTHER) {
                            // nothing left to decide
                            acc += if np == P_DONE_GOLD { m } else { 0.0 };
                            continue;
                        }
                        next[idx(v + 1, nf, np)] += m;
                    }
                }
            }
        }
        cur = next;
    }
    // truncated responses are judged on their text as is
    for slot in 0..=v_len {
        for f in 0..N_F {
            for p in 0..N_P {
                let m = cur[idx(slot, f, p)];
                fmt += if f == F_DONE { m } else { 0.0 };
                acc += if p == P_DONE_GOLD { m } else { 0.0 };
            }
        }
    }
    QuestionEval {
        accuracy: acc.clamp(0.0, 1.0),
        format_rate: fmt.clamp(0.0, 1.0),
    }
}

/// Gold-letter probability right after `<answer>` when the think span holds `len` tokens,
/// averaged over `lengths`.
pub fn robust_accuracy_question(
    params: &PolicyParams,
    vocab: &Vocabulary,
    context: usize,
    gold_letter: char,
    lengths: &[usize],
) -> f64 {
    let gold = vocab.choice_ids().start + letter_index(gold_letter).expect("valid gold");
    let usable: Vec<usize> = lengths
        .iter()
        .copied()
        .filter(|l| l + 3 < params.max_len())
        .collect();
    if usable.is_empty() {
        return 0.0;
    }
    usable
        .iter()
        .map(|l| softmax(params.row(context, Some(vocab.answer_open()), l + 3))[gold])
        .sum::<f64>()
        / usable.len() as f64
}

/// Think-span lengths `0..=8` other than the supervised template's.
pub fn held_out_lengths(template_len: usize) -> Vec<usize> {
    (0..=8).filter(|&l| l != template_len).collect()
}

fn mean_where(values: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
    let picked: Vec<f64> = values
        .iter()
        .enumerate()
        .filter(|(i, _)| keep(*i))
        .map(|(_, v)| *v)
        .collect();
    if picked.is_empty() {
        0.0
    } else {
        picked.iter().sum::<f64>() / picked.len() as f64
    }
}

pub fn evaluate(
    params: &PolicyParams,
    vocab: &Vocabulary,
    tasks: &TaskSet,
    robust_lengths: &[usize],
) -> EvalSummary {
    let rows: Vec<(QuestionEval, f64)> = (0..tasks.len())
        .into_par_iter()
        .map(|i| {
            let gold = tasks.samples[i].gold_letter();
            (
                evaluate_question(params, vocab, i, gold),
                robust_accuracy_question(params, vocab, i, gold, robust_lengths),
            )
        })
        .collect();
    let acc: Vec<f64> = rows.iter().map(|(q, _)| q.accuracy).collect();
    let fmt: Vec<f64> = rows.iter().map(|(q, _)| q.format_rate).collect();
    let robust: Vec<f64> = rows.iter().map(|(_, r)| *r).collect();
    EvalSummary {
        accuracy: mean_where(&acc, |_| true),
        accuracy_easy: mean_where(&acc, |i| tasks.tiers[i] == Tier::Easy),
        accuracy_hard: mean_where(&acc, |i| tasks.tiers[i] == Tier::Hard),
        format_rate: mean_where(&fmt, |_| true),
        robust_accuracy: mean_where(&robust, |_| true),
        per_question: rows.into_iter().map(|(q, _)| q).collect(),
    }
}
