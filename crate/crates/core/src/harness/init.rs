use super::config::PolicyInit;
use super::tasks::TaskSet;
use crate::error::Result;
use crate::policy::{letter_index, ContextMode, PolicyParams, TokenId, Vocabulary};

pub fn vocabulary(init: &PolicyInit) -> Result<Vocabulary> {
    Vocabulary::new(crate::policy::CHOICE_LETTERS.len(), init.n_fillers)
}

/// Next-token distribution of the initial policy before noise is mixed in.
fn base_distribution(
    vocab: &Vocabulary,
    prev: Option<TokenId>,
    gold: TokenId,
    n_options: usize,
    prior: f64,
    init: &PolicyInit,
) -> Vec<f64> {
    let mut p = vec![0.0; vocab.len()];
    let fillers = vocab.filler_ids();
    match prev {
        None => p[vocab.think_open()] = 1.0,
        Some(v) if v == vocab.think_open() || fillers.contains(&v) => {
            let share = (1.0 - init.think_close_prob) / fillers.len() as f64;
            for f in fillers {
                p[f] = share;
            }
            p[vocab.think_close()] = init.think_close_prob;
        }
        Some(v) if v == vocab.think_close() => p[vocab.answer_open()] = 1.0,
        Some(v) if v == vocab.answer_open() => {
            let others = (1.0 - prior) / (n_options - 1) as f64;
            for id in vocab.choice_ids().take(n_options) {
                p[id] = if id == gold { prior } else { others };
            }
        }
        Some(v) if vocab.choice_ids().contains(&v) => p[vocab.answer_close()] = 1.0,
        Some(v) if v == vocab.answer_close() => p[vocab.eos()] = 1.0,
        Some(_) => p.iter_mut().for_each(|x| *x = 1.0 / vocab.len() as f64),
    }
    p
}

/// Tagged-response Markov chain per question: `<think>`, fillers closed with probability
/// `think_close_prob`, `</think> <answer>`, a letter drawn with the question's gold prior,
/// `</answer>`, end. Every row mixes in `noise` of uniform mass.
pub fn init_policy(tasks: &TaskSet, vocab: &Vocabulary, init: &PolicyInit) -> Result<PolicyParams> {
    let v = vocab.len();
    let mut params =
        PolicyParams::zeros(v, init.max_len, tasks.len(), ContextMode::QuestionAndPrevToken)?;
    for ctx in 0..tasks.len() {
        let q = tasks.rollout_question(ctx);
        let gold = vocab.choice_ids().start + letter_index(q.gold).expect("validated gold");
        let prevs = std::iter::once(None).chain((0..v).map(Some));
        for prev in prevs {
            let base = base_distribution(vocab, prev, gold, q.n_options, tasks.priors[ctx], init);
            let row: Vec<f64> = base
                .iter()
                .map(|p| ((1.0 - init.noise) * p + init.noise / v as f64).ln())
                .collect();
            for t in 0..init.max_len {
                params.row_mut(ctx, prev, t).copy_from_slice(&row);
            }
        }
    }
    Ok(params)
}
