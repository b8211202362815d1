use rand::RngCore;
use serde::{Deserialize, Serialize};

use super::advantage::{compute_advantages, difficulty_weight, reweight};
use super::GrpoConfig;
use crate::error::{input, Result};
use crate::policy::{letter_index, sample, PolicyParams, Response, Vocabulary};
use crate::rewards::{score, RewardBreakdown, RewardConfig};

/// What the engine needs to know about a question: its policy context and gold letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RolloutQuestion {
    pub context: usize,
    pub gold: char,
    pub n_options: usize,
}

impl RolloutQuestion {
    pub fn validate(&self) -> Result<()> {
        match letter_index(self.gold) {
            Some(i) if i < self.n_options => Ok(()),
            _ => Err(input(format!(
                "gold {:?} is not a valid letter for {} options",
                self.gold, self.n_options
            ))),
        }
    }
}

/// Source of response groups. The policy sampler is the production implementation; tests
/// script their own.
pub trait ResponseSampler {
    fn sample_group(
        &mut self,
        question: &RolloutQuestion,
        g: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Response>>;
}

/// Samples from a fixed behaviour policy.
pub struct PolicySampler<'a> {
    pub params: &'a PolicyParams,
    pub vocab: &'a Vocabulary,
}

impl ResponseSampler for PolicySampler<'_> {
    fn sample_group(
        &mut self,
        question: &RolloutQuestion,
        g: usize,
        rng: &mut dyn RngCore,
    ) -> Result<Vec<Response>> {
        sample(self.params, self.vocab, question.context, g, rng)
    }
}

/// A question's final response group with everything the objective needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupBatch {
    pub question: RolloutQuestion,
    pub responses: Vec<Response>,
    pub rewards: Vec<RewardBreakdown>,
    pub correct: Vec<bool>,
    /// Standardised advantages before difficulty reweighting.
    pub advantages: Vec<f64>,
    pub weight: f64,
    pub resample_rounds: usize,
}

impl GroupBatch {
    /// Score a response group and derive advantages and the difficulty weight.
    pub fn from_responses(
        question: RolloutQuestion,
        responses: Vec<Response>,
        resample_rounds: usize,
        rewards_cfg: &RewardConfig,
        cfg: &GrpoConfig,
    ) -> Result<Self> {
        let rewards = responses
            .iter()
            .map(|r| {
                let toks: Vec<&str> = r.text.split_whitespace().collect();
                score(&r.text, &toks, question.gold, question.n_options, rewards_cfg)
            })
            .collect::<Result<Vec<_>>>()?;
        let correct: Vec<bool> = responses
            .iter()
            .map(|r| r.parsed_answer == Some(question.gold))
            .collect();
        let totals: Vec<f64> = rewards.iter().map(|r| r.total).collect();
        let advantages = compute_advantages(&totals, cfg.eps_std)?;
        let weight = if cfg.reweight {
            difficulty_weight(&correct)
        } else {
            1.0
        };
        Ok(GroupBatch {
            question,
            responses,
            rewards,
            correct,
            advantages,
            weight,
            resample_rounds,
        })
    }

    pub fn reweighted_advantages(&self) -> Vec<f64> {
        reweight(&self.advantages, self.weight)
    }

    pub fn any_correct(&self) -> bool {
        self.correct.iter().any(|&c| c)
    }

    pub fn total_tokens(&self) -> usize {
        self.responses.iter().map(Response::len).sum()
    }

    pub fn mean_reward(&self) -> f64 {
        self.rewards.iter().map(|r| r.total).sum::<f64>() / self.rewards.len() as f64
    }

    pub fn correct_rate(&self) -> f64 {
        self.correct.iter().filter(|&&c| c).count() as f64 / self.correct.len() as f64
    }
}

/// Sample a group, redrawing the whole group while none of it is correct.
///
/// At most `cfg.max_resample_rounds` extra groups are drawn, and only when `cfg.resample` is set.
/// The last group drawn is returned either way; earlier groups are discarded.
pub fn rollout_with_resampling(
    question: &RolloutQuestion,
    sampler: &mut dyn ResponseSampler,
    rewards_cfg: &RewardConfig,
    cfg: &GrpoConfig,
    rng: &mut dyn RngCore,
) -> Result<GroupBatch> {
    question.validate()?;
    let max_rounds = if cfg.resample {
        cfg.max_resample_rounds
    } else {
        0
    };
    let mut rounds = 0;
    let mut responses = sampler.sample_group(question, cfg.group_size, rng)?;
    if responses.len() != cfg.group_size {
        return Err(input(format!(
            "sampler returned {} responses, expected {}",
            responses.len(),
            cfg.group_size
        )));
    }
    while rounds < max_rounds && !responses.iter().any(|r| r.parsed_answer == Some(question.gold))
    {
        responses = sampler.sample_group(question, cfg.group_size, rng)?;
        rounds += 1;
    }
    GroupBatch::from_responses(*question, responses, rounds, rewards_cfg, cfg)
}
