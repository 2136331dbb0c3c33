use serde::{Deserialize, Serialize};

use super::{Gradients, Mlp, NeuralError};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// `θ ← θ − β·g`
    #[default]
    Sgd,
    /// Adaptive moment estimation with the usual (0.9, 0.999, 1e-8) constants.
    Adam,
}

/// Update rule bound to one network. Gradients are norm-clipped before
/// either rule is applied.
#[derive(Debug, Clone)]
pub enum Optimizer<F> {
    Sgd,
    Adam { m: Vec<F>, v: Vec<F>, t: i32 },
}

impl<F: Scalar> Optimizer<F> {
    pub fn new(kind: OptimizerKind, net: &Mlp<F>) -> Self {
        match kind {
            OptimizerKind::Sgd => Self::Sgd,
            OptimizerKind::Adam => Self::Adam {
                m: vec![F::zero(); net.param_count()],
                v: vec![F::zero(); net.param_count()],
                t: 0,
            },
        }
    }

    pub fn step(&mut self, net: &mut Mlp<F>, grads: &Gradients<F>, learning_rate: F, clip_norm: F) -> Result<(), NeuralError> {
        match self {
            Self::Sgd => net.apply(grads, learning_rate, clip_norm),
            Self::Adam { m, v, t } => {
                grads.check_shape(net)?;
                if m.len() != net.param_count() {
                    return Err(NeuralError::GradientShape);
                }
                let (b1, b2, eps) = (F::lit(0.9), F::lit(0.999), F::lit(1e-8));
                *t += 1;
                let c1 = F::one() - b1.powi(*t);
                let c2 = F::one() - b2.powi(*t);
                let clip = grads.clip_factor(clip_norm);
                for (i, (p, g)) in net.params_mut_zip(grads).enumerate() {
                    let g = g * clip;
                    m[i] = b1 * m[i] + (F::one() - b1) * g;
                    v[i] = b2 * v[i] + (F::one() - b2) * g * g;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    *p = *p - learning_rate * m_hat / (v_hat.sqrt() + eps);
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::Head;

    #[test]
    fn sgd_matches_apply() {
        let mut a = Mlp::<f64>::zeros(1, 1, 1, Head::Linear);
        let mut b = a.clone();
        let mut g = Gradients::zeros_like(&a);
        g.b2[0] = 2.0;
        Optimizer::new(OptimizerKind::Sgd, &a).step(&mut a, &g, 0.1, 1.0).unwrap();
        b.apply(&g, 0.1, 1.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn adam_first_step_is_learning_rate_sized() {
        let mut net = Mlp::<f64>::zeros(1, 1, 1, Head::Linear);
        let mut opt = Optimizer::new(OptimizerKind::Adam, &net);
        let mut g = Gradients::zeros_like(&net);
        g.b2[0] = 0.3;
        opt.step(&mut net, &g, 0.01, f64::INFINITY).unwrap();
        assert!((net.b2[0] + 0.01).abs() < 1e-9);
        assert_eq!(net.w1[0], 0.0);
    }
}
