//! Toy autoregressive categorical policy standing in for a language model.
//!
//! Every position of a response draws from `softmax(logits[row])`, where the row is picked by
//! the question context, the position and, in [`ContextMode::QuestionAndPrevToken`], the previous
//! token. Log-probability gradients are analytic.

pub mod checkpoint;
mod params;
mod sample;
mod vocab;

pub use params::{
    log_softmax_at, log_sum_exp, logprob, logprob_grad, softmax, ContextMode, PolicyParams,
    RowGradient,
};
pub use sample::{sample, Response};
pub use vocab::{
    index_letter, letter_index, TokenId, Vocabulary, ANSWER_CLOSE, ANSWER_OPEN, CHOICE_LETTERS,
    EOS, THINK_CLOSE, THINK_OPEN,
};

/// Default maximum response length in tokens.
pub const DEFAULT_MAX_LEN: usize = 32;
/// Default number of reasoning filler tokens.
pub const DEFAULT_FILLERS: usize = 4;
