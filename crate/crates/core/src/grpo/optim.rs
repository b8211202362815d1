use serde::{Deserialize, Serialize};

/// Update rule applied to the objective gradient (ascent).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    GradientAscent,
    AdamW {
        beta1: f64,
        beta2: f64,
        eps: f64,
        weight_decay: f64,
    },
}

impl OptimizerKind {
    pub fn adamw() -> Self {
        OptimizerKind::AdamW {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Optimizer {
    kind: OptimizerKind,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize) -> Self {
        let (m, v) = match kind {
            OptimizerKind::GradientAscent => (Vec::new(), Vec::new()),
            OptimizerKind::AdamW { .. } => (vec![0.0; n_params], vec![0.0; n_params]),
        };
        Optimizer { kind, m, v, t: 0 }
    }

    /// Move `params` uphill along `grad`.
    pub fn apply(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        debug_assert_eq!(params.len(), grad.len());
        self.t += 1;
        match self.kind {
            OptimizerKind::GradientAscent => {
                if lr == 0.0 {
                    return;
                }
                for (p, g) in params.iter_mut().zip(grad) {
                    *p += lr * g;
                }
            }
            OptimizerKind::AdamW {
                beta1,
                beta2,
                eps,
                weight_decay,
            } => {
                let bc1 = 1.0 - beta1.powi(self.t as i32);
                let bc2 = 1.0 - beta2.powi(self.t as i32);
                for (((p, g), m), v) in params
                    .iter_mut()
                    .zip(grad)
                    .zip(self.m.iter_mut())
                    .zip(self.v.iter_mut())
                {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let step = (*m / bc1) / ((*v / bc2).sqrt() + eps);
                    *p += lr * step - lr * weight_decay * *p;
                }
            }
        }
    }
}
