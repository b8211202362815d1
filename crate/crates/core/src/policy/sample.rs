use rand::Rng;
use serde::{Deserialize, Serialize};

use super::params::{log_sum_exp, PolicyParams};
use super::vocab::{TokenId, Vocabulary};
use crate::error::{input, Result};
use crate::rewards::parse_answer;

/// One sampled response together with its behaviour-policy log-probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Response {
    pub token_ids: Vec<TokenId>,
    pub text: String,
    pub logprobs_old: Vec<f64>,
    /// No end-of-sequence token was emitted before the length limit.
    pub truncated: bool,
    pub parsed_answer: Option<char>,
}

impl Response {
    /// Build a response from explicit tokens; `logprobs_old` must match in length.
    pub fn from_tokens(
        vocab: &Vocabulary,
        token_ids: Vec<TokenId>,
        logprobs_old: Vec<f64>,
    ) -> Result<Self> {
        if token_ids.len() != logprobs_old.len() {
            return Err(input("token and log-probability counts differ"));
        }
        let text = vocab.render(&token_ids)?;
        let truncated = token_ids.last() != Some(&vocab.eos());
        let parsed_answer = parse_answer(&text);
        Ok(Response {
            token_ids,
            text,
            logprobs_old,
            truncated,
            parsed_answer,
        })
    }

    pub fn len(&self) -> usize {
        self.token_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.token_ids.is_empty()
    }
}

/// Draw `g` responses for one question context, token by token.
pub fn sample<R: Rng + ?Sized>(
    params: &PolicyParams,
    vocab: &Vocabulary,
    context: usize,
    g: usize,
    rng: &mut R,
) -> Result<Vec<Response>> {
    if g == 0 {
        return Err(input("group size must be at least 1"));
    }
    if vocab.len() != params.vocab_size() {
        return Err(input(format!(
            "vocabulary has {} tokens but params expect {}",
            vocab.len(),
            params.vocab_size()
        )));
    }
    if context >= params.num_contexts() {
        return Err(input(format!("context {context} out of range")));
    }
    (0..g)
        .map(|_| sample_one(params, vocab, context, rng))
        .collect()
}

fn sample_one<R: Rng + ?Sized>(
    params: &PolicyParams,
    vocab: &Vocabulary,
    context: usize,
    rng: &mut R,
) -> Result<Response> {
    let eos = vocab.eos();
    let mut ids = Vec::new();
    let mut lps = Vec::new();
    let mut prev = None;
    for t in 0..params.max_len() {
        let row = params.row(context, prev, t);
        let lse = log_sum_exp(row);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = None;
        for (v, z) in row.iter().enumerate() {
            let p = (z - lse).exp();
            if p > 0.0 {
                // last token with mass absorbs rounding in the cumulative sum
                chosen = Some(v);
            }
            acc += p;
            if u < acc {
                chosen = Some(v);
                break;
            }
        }
        let v = chosen.expect("softmax row has positive mass");
        ids.push(v);
        lps.push(super::params::log_softmax_at(row, v));
        prev = Some(v);
        if v == eos {
            break;
        }
    }
    Response::from_tokens(vocab, ids, lps)
}
