use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::advantage::{token_kl, token_kl_grad};
use super::rollout::GroupBatch;
use super::GrpoConfig;
use crate::error::{input, Result};
use crate::policy::{log_softmax_at, log_sum_exp, PolicyParams};

/// How the per-token KL penalty against the reference policy is computed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KlMode {
    /// `exp(ℓ_ref − ℓ_θ) − (ℓ_ref − ℓ_θ) − 1` on the sampled token.
    #[default]
    Estimator,
    /// Full `KL(π_θ ‖ π_ref)` summed over the vocabulary at each visited row.
    Exact,
}

/// Clipped surrogate `min(ρA, clip(ρ, 1−ε, 1+ε)A)`.
///
/// Returns the value, its derivative in `ρ`, and whether the clipped branch attains the
/// minimum. Ties go to the unclipped branch.
pub fn surrogate(ratio: f64, advantage: f64, eps: f64) -> (f64, f64, bool) {
    let unclipped = ratio * advantage;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * advantage;
    if unclipped <= clipped {
        (unclipped, advantage, false)
    } else {
        // strictly smaller only when ρ lies outside the clip range, where the branch is flat
        (clipped, 0.0, true)
    }
}

/// Objective value and its dense gradient over `theta`'s logits.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveOutput {
    pub value: f64,
    pub grad: Vec<f64>,
}

struct BatchTerms {
    value: f64,
    rows: Vec<(usize, Vec<f64>)>,
}

/// Token-level clipped objective with KL penalty, averaged over questions.
pub fn objective(
    batches: &[GroupBatch],
    theta: &PolicyParams,
    theta_old: &PolicyParams,
    theta_ref: &PolicyParams,
    cfg: &GrpoConfig,
) -> Result<ObjectiveOutput> {
    if !theta.same_shape(theta_old) || !theta.same_shape(theta_ref) {
        return Err(input("current, behaviour and reference policies differ in shape"));
    }
    let mut grad = vec![0.0; theta.logits().len()];
    if batches.is_empty() {
        return Ok(ObjectiveOutput { value: 0.0, grad });
    }
    let terms = batches
        .par_iter()
        .map(|b| batch_terms(b, theta, theta_old, theta_ref, cfg))
        .collect::<Result<Vec<_>>>()?;
    let n = batches.len() as f64;
    let mut value = 0.0;
    // merge in question order so the sum is reproducible
    for t in terms {
        value += t.value / n;
        for (off, row) in t.rows {
            for (g, r) in grad[off..off + row.len()].iter_mut().zip(row) {
                *g += r / n;
            }
        }
    }
    Ok(ObjectiveOutput { value, grad })
}

fn batch_terms(
    batch: &GroupBatch,
    theta: &PolicyParams,
    theta_old: &PolicyParams,
    theta_ref: &PolicyParams,
    cfg: &GrpoConfig,
) -> Result<BatchTerms> {
    let ctx = batch.question.context;
    let v = theta.vocab_size();
    let advantages = batch.reweighted_advantages();
    let total_tokens = batch.total_tokens();
    if total_tokens == 0 {
        return Ok(BatchTerms {
            value: 0.0,
            rows: Vec::new(),
        });
    }
    let scale = 1.0 / total_tokens as f64;
    let mut value = 0.0;
    let mut rows = Vec::with_capacity(total_tokens);
    for (resp, &adv) in batch.responses.iter().zip(&advantages) {
        theta.check_sequence(ctx, &resp.token_ids)?;
        for (t, off) in theta.row_offsets(ctx, &resp.token_ids).into_iter().enumerate() {
            let tok = resp.token_ids[t];
            let z = &theta.logits()[off..off + v];
            let z_old = &theta_old.logits()[off..off + v];
            let z_ref = &theta_ref.logits()[off..off + v];
            let lse = log_sum_exp(z);
            let lp = log_softmax_at(z, tok);
            let lp_old = log_softmax_at(z_old, tok);
            let ratio = (lp - lp_old).exp();
            let (m, dm_dratio, _) = surrogate(ratio, adv, cfg.clip_eps);
            let probs: Vec<f64> = z.iter().map(|x| (x - lse).exp()).collect();

            // d(term)/d(ℓ_θ) multiplies (onehot − softmax) on this row
            let mut coef = dm_dratio * ratio;
            let mut row = vec![0.0; v];
            let kl = match cfg.kl_mode {
                KlMode::Estimator => {
                    let lp_ref = log_softmax_at(z_ref, tok);
                    coef -= cfg.beta * token_kl_grad(lp, lp_ref);
                    token_kl(lp, lp_ref)
                }
                KlMode::Exact => {
                    let lse_ref = log_sum_exp(z_ref);
                    let diffs: Vec<f64> = z
                        .iter()
                        .zip(z_ref)
                        .map(|(a, b)| (a - lse) - (b - lse_ref))
                        .collect();
                    let kl: f64 = probs.iter().zip(&diffs).map(|(p, d)| p * d).sum();
                    for ((r, p), d) in row.iter_mut().zip(&probs).zip(&diffs) {
                        *r -= cfg.beta * p * (d - kl);
                    }
                    kl.max(0.0)
                }
            };
            value += m - cfg.beta * kl;
            if coef != 0.0 {
                for (r, p) in row.iter_mut().zip(&probs) {
                    *r -= coef * p;
                }
                row[tok] += coef;
            }
            for r in row.iter_mut() {
                *r *= scale;
            }
            rows.push((off, row));
        }
    }
    Ok(BatchTerms {
        value: value * scale,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_arithmetic() {
        let (m, _, clipped) = surrogate(1.5, 1.0, 0.2);
        assert!((m - 1.2).abs() < 1e-15);
        assert!(clipped);
        let (m, _, clipped) = surrogate(0.5, -1.0, 0.2);
        assert!((m + 0.8).abs() < 1e-15);
        assert!(clipped);
        let (m, d, clipped) = surrogate(1.0, 0.7, 0.2);
        assert_eq!((m, d, clipped), (0.7, 0.7, false));
        // on the favourable side of the clip range the unclipped branch is the minimum
        let (m, d, clipped) = surrogate(0.5, 1.0, 0.2);
        assert_eq!((m, d, clipped), (0.5, 1.0, false));
    }
}
