use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::NeuralError;
use crate::scalar::Scalar;

/// Output transform of the last layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    /// Probability distribution over discrete actions.
    Softmax,
    /// Unbounded scalar (or vector) output.
    Linear,
}

/// Two-layer perceptron: `input -> dense -> relu -> dense -> head`.
///
/// Weight matrices are row-major with one row per output unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<F> {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    head: Head,
    pub(crate) w1: Vec<F>,
    pub(crate) b1: Vec<F>,
    pub(crate) w2: Vec<F>,
    pub(crate) b2: Vec<F>,
}

/// Same shapes as the parameters of the [`Mlp`] it was computed for.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F> {
    pub w1: Vec<F>,
    pub b1: Vec<F>,
    pub w2: Vec<F>,
    pub b2: Vec<F>,
}

/// Intermediate values of one forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Forward<F> {
    pub input: Vec<F>,
    pub pre_activation: Vec<F>,
    pub hidden: Vec<F>,
    /// Logits for a softmax head, outputs for a linear head.
    pub output: Vec<F>,
    /// Softmax probabilities; empty for a linear head.
    pub probs: Vec<F>,
}

fn softmax<F: Scalar>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|z| (*z - max).exp()).collect();
    let total: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

impl<F: Scalar> Mlp<F> {
    /// All-zero parameters.
    pub fn zeros(inputs: usize, hidden: usize, outputs: usize, head: Head) -> Self {
        Self {
            inputs,
            hidden,
            outputs,
            head,
            w1: vec![F::zero(); hidden * inputs],
            b1: vec![F::zero(); hidden],
            w2: vec![F::zero(); outputs * hidden],
            b2: vec![F::zero(); outputs],
        }
    }

    /// Weights uniform in `±sqrt(6 / (fan_in + fan_out))`, biases zero.
    pub fn new<R: Rng + ?Sized>(inputs: usize, hidden: usize, outputs: usize, head: Head, rng: &mut R) -> Self {
        let mut net = Self::zeros(inputs, hidden, outputs, head);
        let mut fill = |w: &mut [F], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for v in w {
                *v = F::lit(dist.sample(rng));
            }
        };
        fill(&mut net.w1, inputs, hidden);
        fill(&mut net.w2, hidden, outputs);
        net
    }

    pub(crate) fn from_parts(
        (inputs, hidden, outputs): (usize, usize, usize),
        head: Head,
        w1: Vec<F>,
        b1: Vec<F>,
        w2: Vec<F>,
        b2: Vec<F>,
    ) -> Result<Self, NeuralError> {
        let net = Self {
            inputs,
            hidden,
            outputs,
            head,
            w1,
            b1,
            w2,
            b2,
        };
        let want = Self::zeros(inputs, hidden, outputs, head);
        if net.w1.len() != want.w1.len()
            || net.b1.len() != want.b1.len()
            || net.w2.len() != want.w2.len()
            || net.b2.len() != want.b2.len()
        {
            return Err(NeuralError::Checkpoint("parameter arrays do not match layer sizes".into()));
        }
        Ok(net)
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn param_count(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> impl Iterator<Item = F> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }

    /// Mutable access to the `index`-th parameter in `w1, b1, w2, b2` order.
    pub fn param_mut(&mut self, index: usize) -> &mut F {
        let mut i = index;
        for part in [&mut self.w1, &mut self.b1, &mut self.w2, &mut self.b2] {
            if i < part.len() {
                return &mut part[i];
            }
            i -= part.len();
        }
        panic!("parameter index {index} out of range");
    }

    pub fn is_finite(&self) -> bool {
        self.params().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[F]) -> Result<Forward<F>, NeuralError> {
        if x.len() != self.inputs {
            return Err(NeuralError::InputDim {
                expected: self.inputs,
                got: x.len(),
            });
        }
        let mut pre = self.b1.clone();
        for (h, z) in pre.iter_mut().enumerate() {
            let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
            *z = *z + row.iter().zip(x).map(|(w, v)| *w * *v).sum::<F>();
        }
        let hidden: Vec<F> = pre.iter().map(|z| z.max(F::zero())).collect();
        let mut output = self.b2.clone();
        for (o, y) in output.iter_mut().enumerate() {
            let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
            *y = *y + row.iter().zip(&hidden).map(|(w, v)| *w * *v).sum::<F>();
        }
        let probs = match self.head {
            Head::Softmax => softmax(&output),
            Head::Linear => Vec::new(),
        };
        Ok(Forward {
            input: x.to_vec(),
            pre_activation: pre,
            hidden,
            output,
            probs,
        })
    }

    /// Action probabilities of a softmax-headed network.
    pub fn forward_actor(&self, x: &[F]) -> Result<Vec<F>, NeuralError> {
        self.expect_head(Head::Softmax)?;
        Ok(self.forward(x)?.probs)
    }

    /// State value of a single-output linear-headed network.
    pub fn forward_critic(&self, x: &[F]) -> Result<F, NeuralError> {
        self.expect_head(Head::Linear)?;
        if self.outputs != 1 {
            return Err(NeuralError::Head("value network must have one output"));
        }
        Ok(self.forward(x)?.output[0])
    }

    /// Gradient of `-log π(action | x) * advantage`.
    pub fn backward_policy(&self, fwd: &Forward<F>, action: usize, advantage: F) -> Result<Gradients<F>, NeuralError> {
        self.expect_head(Head::Softmax)?;
        if action >= self.outputs {
            return Err(NeuralError::ActionIndex {
                index: action,
                outputs: self.outputs,
            });
        }
        let d_out: Vec<F> = fwd
            .probs
            .iter()
            .enumerate()
            .map(|(j, p)| {
                let hot = if j == action { F::one() } else { F::zero() };
                (*p - hot) * advantage
            })
            .collect();
        Ok(self.backprop(fwd, &d_out))
    }

    /// Gradient of `(target - V(x))^2` with the target held constant.
    pub fn backward_value(&self, fwd: &Forward<F>, target: F) -> Result<Gradients<F>, NeuralError> {
        self.expect_head(Head::Linear)?;
        let d_out = vec![F::lit(2.0) * (fwd.output[0] - target)];
        Ok(self.backprop(fwd, &d_out))
    }

    /// Propagates `d_out` (loss gradient w.r.t. the pre-head outputs) back
    /// through both layers.
    fn backprop(&self, fwd: &Forward<F>, d_out: &[F]) -> Gradients<F> {
        let mut g = Gradients::zeros_like(self);
        let mut d_hidden = vec![F::zero(); self.hidden];
        for (o, d) in d_out.iter().enumerate() {
            g.b2[o] = *d;
            let row = o * self.hidden;
            for h in 0..self.hidden {
                g.w2[row + h] = *d * fwd.hidden[h];
                d_hidden[h] = d_hidden[h] + *d * self.w2[row + h];
            }
        }
        for h in 0..self.hidden {
            if fwd.pre_activation[h] <= F::zero() {
                continue;
            }
            let d = d_hidden[h];
            g.b1[h] = d;
            let row = h * self.inputs;
            for (i, x) in fwd.input.iter().enumerate() {
                g.w1[row + i] = d * *x;
            }
        }
        g
    }

    /// Plain gradient descent, `θ ← θ − lr·g`, after rescaling `g` to at
    /// most `clip_norm` in global L2 norm.
    pub fn apply(&mut self, grads: &Gradients<F>, learning_rate: F, clip_norm: F) -> Result<(), NeuralError> {
        grads.check_shape(self)?;
        let step = learning_rate * grads.clip_factor(clip_norm);
        for (p, g) in self.params_mut_zip(grads) {
            *p = *p - step * g;
        }
        Ok(())
    }

    pub(crate) fn params_mut_zip<'a>(&'a mut self, grads: &'a Gradients<F>) -> impl Iterator<Item = (&'a mut F, F)> + 'a {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
            .zip(grads.iter())
    }

    fn expect_head(&self, head: Head) -> Result<(), NeuralError> {
        if self.head != head {
            return Err(NeuralError::Head(match head {
                Head::Softmax => "operation needs a softmax head",
                Head::Linear => "operation needs a linear head",
            }));
        }
        Ok(())
    }
}

impl<F: Scalar> Gradients<F> {
    pub fn zeros_like(net: &Mlp<F>) -> Self {
        Self {
            w1: vec![F::zero(); net.w1.len()],
            b1: vec![F::zero(); net.b1.len()],
            w2: vec![F::zero(); net.w2.len()],
            b2: vec![F::zero(); net.b2.len()],
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = F> + '_ {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2).copied()
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut F> + '_ {
        self.w1
            .iter_mut()
            .chain(self.b1.iter_mut())
            .chain(self.w2.iter_mut())
            .chain(self.b2.iter_mut())
    }

    pub fn len(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn norm(&self) -> F {
        self.iter().map(|g| g * g).sum::<F>().sqrt()
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.iter_mut().zip(other.iter()) {
            *a = *a + b;
        }
    }

    pub fn scale(&mut self, factor: F) {
        for g in self.iter_mut() {
            *g = *g * factor;
        }
    }

    /// Factor that brings the global norm down to `clip_norm`, or 1.
    pub fn clip_factor(&self, clip_norm: F) -> F {
        let norm = self.norm();
        if norm > clip_norm && norm > F::zero() {
            clip_norm / norm
        } else {
            F::one()
        }
    }

    pub(crate) fn check_shape(&self, net: &Mlp<F>) -> Result<(), NeuralError> {
        if self.w1.len() != net.w1.len()
            || self.b1.len() != net.b1.len()
            || self.w2.len() != net.w2.len()
            || self.b2.len() != net.b2.len()
        {
            return Err(NeuralError::GradientShape);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_actor_is_uniform() {
        let net = Mlp::<f64>::zeros(14, 128, 40, Head::Softmax);
        let p = net.forward_actor(&[0.3; 14]).unwrap();
        assert!(p.iter().all(|v| (v - 1.0 / 40.0).abs() < 1e-15));
    }

    #[test]
    fn softmax_closed_form() {
        let p = softmax(&[2f64.ln(), 0.0]);
        assert!((p[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((p[1] - 1.0 / 3.0).abs() < 1e-15);
        let shifted = softmax(&[2f64.ln() + 700.0, 700.0]);
        assert!((shifted[0] - p[0]).abs() < 1e-12);
    }

    #[test]
    fn critic_hand_computed() {
        let mut net = Mlp::<f64>::zeros(1, 1, 1, Head::Linear);
        net.w1[0] = 1.0;
        net.w2[0] = 2.0;
        assert_eq!(net.forward_critic(&[3.0]).unwrap(), 6.0);
        assert_eq!(Mlp::<f64>::zeros(3, 4, 1, Head::Linear).forward_critic(&[1.0, 2.0, 3.0]).unwrap(), 0.0);

        // Negative pre-activation: only the output bias survives.
        net.b2[0] = 0.5;
        assert_eq!(net.forward_critic(&[-3.0]).unwrap(), 0.5);
    }

    #[test]
    fn dimension_and_head_errors() {
        let actor = Mlp::<f64>::zeros(3, 4, 5, Head::Softmax);
        assert!(matches!(actor.forward(&[1.0]), Err(NeuralError::InputDim { expected: 3, got: 1 })));
        assert!(actor.forward_critic(&[0.0; 3]).is_err());
        let fwd = actor.forward(&[0.0; 3]).unwrap();
        assert!(matches!(actor.backward_policy(&fwd, 5, 1.0), Err(NeuralError::ActionIndex { .. })));
        let critic = Mlp::<f64>::zeros(3, 4, 1, Head::Linear);
        assert!(critic.forward_actor(&[0.0; 3]).is_err());
    }

    #[test]
    fn zero_advantage_and_exact_target_give_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let actor = Mlp::<f64>::new(5, 8, 6, Head::Softmax, &mut rng);
        let fwd = actor.forward(&[0.1, -0.2, 0.3, 0.4, 0.5]).unwrap();
        let g = actor.backward_policy(&fwd, 2, 0.0).unwrap();
        assert!(g.iter().all(|v| v == 0.0));

        let critic = Mlp::<f64>::new(5, 8, 1, Head::Linear, &mut rng);
        let fwd = critic.forward(&[0.1, -0.2, 0.3, 0.4, 0.5]).unwrap();
        let g = critic.backward_value(&fwd, fwd.output[0]).unwrap();
        assert!(g.iter().all(|v| v == 0.0));
    }

    #[test]
    fn logit_gradient_is_probs_minus_one_hot() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let actor = Mlp::<f64>::new(4, 6, 3, Head::Softmax, &mut rng);
        let fwd = actor.forward(&[0.5, 0.1, -0.3, 0.9]).unwrap();
        let g = actor.backward_policy(&fwd, 1, 2.5).unwrap();
        for j in 0..3 {
            let hot = if j == 1 { 1.0 } else { 0.0 };
            assert!((g.b2[j] - (fwd.probs[j] - hot) * 2.5).abs() < 1e-15);
        }
    }

    #[test]
    fn value_gradient_linear_in_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let critic = Mlp::<f64>::new(4, 6, 1, Head::Linear, &mut rng);
        let fwd = critic.forward(&[0.5, 0.1, -0.3, 0.9]).unwrap();
        let v = fwd.output[0];
        let g1 = critic.backward_value(&fwd, v - 1.0).unwrap();
        let g3 = critic.backward_value(&fwd, v - 3.0).unwrap();
        for (a, b) in g1.iter().zip(g3.iter()) {
            assert!((3.0 * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn apply_examples() {
        let mut net = Mlp::<f64>::zeros(1, 1, 1, Head::Linear);
        net.b2[0] = 1.0;
        let before = net.clone();
        net.apply(&Gradients::zeros_like(&net), 0.1, 1.0).unwrap();
        assert_eq!(net, before);

        let mut g = Gradients::zeros_like(&net);
        g.b2[0] = 2.0;
        net.apply(&g, 0.1, f64::INFINITY).unwrap();
        assert!((net.b2[0] - 0.8).abs() < 1e-15);

        // Norm-10 gradient clipped to norm 1.
        let mut net = Mlp::<f64>::zeros(1, 1, 1, Head::Linear);
        let mut g = Gradients::zeros_like(&net);
        g.w2[0] = 6.0;
        g.b2[0] = 8.0;
        net.apply(&g, 1.0, 1.0).unwrap();
        assert!((net.w2[0] + 0.6).abs() < 1e-15);
        assert!((net.b2[0] + 0.8).abs() < 1e-15);
    }

    #[test]
    fn apply_rejects_foreign_gradients() {
        let mut net = Mlp::<f64>::zeros(2, 3, 1, Head::Linear);
        let other = Mlp::<f64>::zeros(2, 4, 1, Head::Linear);
        let g = Gradients::zeros_like(&other);
        assert!(matches!(net.apply(&g, 0.1, 1.0), Err(NeuralError::GradientShape)));
    }

    #[test]
    fn init_is_fan_balanced() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::<f64>::new(14, 128, 40, Head::Softmax, &mut rng);
        let l1 = (6.0f64 / 142.0).sqrt();
        let l2 = (6.0f64 / 168.0).sqrt();
        assert!(net.w1.iter().all(|w| w.abs() <= l1));
        assert!(net.w2.iter().all(|w| w.abs() <= l2));
        assert!(net.b1.iter().chain(&net.b2).all(|b| *b == 0.0));
        assert_eq!(net.param_count(), 14 * 128 + 128 + 128 * 40 + 40);
    }

    #[test]
    fn works_in_f32() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let actor = Mlp::<f32>::new(3, 8, 4, Head::Softmax, &mut rng);
        let p = actor.forward_actor(&[0.1, 0.2, 0.3]).unwrap();
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }
}
