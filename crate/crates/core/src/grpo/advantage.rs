use crate::error::{input, Result};

/// Group-standardised rewards using the population standard deviation.
///
/// When the spread is at or below `eps_std` the group carries no signal and every advantage is 0.
pub fn compute_advantages(totals: &[f64], eps_std: f64) -> Result<Vec<f64>> {
    if totals.len() < 2 {
        return Err(input(format!(
            "advantages need at least 2 rewards, got {}",
            totals.len()
        )));
    }
    let n = totals.len() as f64;
    let mean = totals.iter().sum::<f64>() / n;
    let var = totals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    if std <= eps_std {
        return Ok(vec![0.0; totals.len()]);
    }
    Ok(totals.iter().map(|r| (r - mean) / std).collect())
}

/// `#incorrect / G + 1`, in `[1, 2]`.
pub fn difficulty_weight(correct_flags: &[bool]) -> f64 {
    if correct_flags.is_empty() {
        return 1.0;
    }
    let wrong = correct_flags.iter().filter(|&&c| !c).count();
    wrong as f64 / correct_flags.len() as f64 + 1.0
}

pub fn reweight(advantages: &[f64], weight: f64) -> Vec<f64> {
    advantages.iter().map(|a| weight * a).collect()
}

/// Non-negative per-token KL estimate `exp(d) - d - 1` with `d = ℓ_ref - ℓ_θ`.
pub fn token_kl(logprob_theta: f64, logprob_ref: f64) -> f64 {
    let d = logprob_ref - logprob_theta;
    (d.exp() - d - 1.0).max(0.0)
}

/// `∂ token_kl / ∂ ℓ_θ`.
pub(crate) fn token_kl_grad(logprob_theta: f64, logprob_ref: f64) -> f64 {
    1.0 - (logprob_ref - logprob_theta).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn advantage_examples() {
        let a = compute_advantages(&[5.0, 3.0, 1.0, 3.0], 1e-6).unwrap();
        let s = 2f64.sqrt();
        for (x, y) in a.iter().zip([s, 0.0, -s, 0.0]) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(compute_advantages(&[2.0; 5], 1e-6).unwrap(), vec![0.0; 5]);
        assert_eq!(compute_advantages(&[1.0, 0.0], 1e-6).unwrap(), vec![1.0, -1.0]);
        assert!(compute_advantages(&[1.0], 1e-6).is_err());
    }

    #[test]
    fn weight_examples() {
        let mut flags = vec![false; 6];
        flags.extend([true, true]);
        assert_eq!(difficulty_weight(&flags), 1.75);
        assert_eq!(difficulty_weight(&[true; 8]), 1.0);
        assert_eq!(difficulty_weight(&[false; 8]), 2.0);
    }

    #[test]
    fn reweight_examples() {
        assert_eq!(reweight(&[1.0, -1.0], 1.75), vec![1.75, -1.75]);
        assert_eq!(reweight(&[0.3, -0.2], 1.0), vec![0.3, -0.2]);
        assert_eq!(reweight(&[0.0, 0.0], 1.9), vec![0.0, 0.0]);
    }

    #[test]
    fn kl_examples() {
        assert_eq!(token_kl(-1.3, -1.3), 0.0);
        let v = token_kl(0.0, 2f64.ln());
        assert!((v - (1.0 - 2f64.ln())).abs() < 1e-15);
        assert!((v - 0.30685).abs() < 1e-5);
    }

    proptest! {
        #[test]
        fn kl_is_non_negative(a in -30.0f64..0.0, b in -30.0f64..0.0) {
            prop_assert!(token_kl(a, b) >= 0.0);
        }

        #[test]
        fn standardised_moments(totals in prop::collection::vec(-10.0f64..10.0, 2..32)) {
            let a = compute_advantages(&totals, 1e-6).unwrap();
            let n = a.len() as f64;
            let mean = a.iter().sum::<f64>() / n;
            let var = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            if a.iter().any(|&x| x != 0.0) {
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var.sqrt() - 1.0).abs() < 1e-9);
            }
        }

        #[test]
        fn reweight_keeps_sign(adv in prop::collection::vec(-5.0f64..5.0, 0..16), w in 1.0f64..2.0) {
            for (a, b) in adv.iter().zip(reweight(&adv, w)) {
                prop_assert_eq!(a.signum(), b.signum());
            }
        }
    }
}
