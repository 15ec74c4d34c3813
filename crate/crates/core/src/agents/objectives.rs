//! Policy and value objectives with exact gradients.
//!
//! Every objective is expressed as a loss to minimize. Advantages, returns and
//! old log-probabilities are constants: no gradient flows through them.

use crate::agents::dist::{log_softmax, softmax};
use crate::agents::net::PolicyValueNet;
use crate::error::Result;
use crate::num::Real;

/// One training sample drawn from a finalized rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    pub features: Vec<T>,
    pub mod_index: usize,
    pub frame_index: usize,
    pub old_log_prob: T,
    pub advantage: T,
    pub ret: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicyObjective<T> {
    /// `E[log pi(a|s) A]`
    LogProb,
    /// `E[ratio A]` without clipping.
    Ratio,
    /// `E[min(ratio A, clip(ratio, 1-eps, 1+eps) A)]`
    Clipped { epsilon: T },
}

/// Composition of the combined loss `policy + vf_coef·value - ent_coef·entropy`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec<T> {
    pub policy: Option<PolicyObjective<T>>,
    pub vf_coef: T,
    pub ent_coef: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossOutput<T> {
    pub loss: T,
    /// Negated mean policy objective.
    pub policy_loss: T,
    /// Mean squared error to the returns.
    pub value_loss: T,
    /// Mean joint entropy of both heads.
    pub entropy: T,
    pub mean_ratio: T,
    pub clip_fraction: T,
    pub grad: Vec<T>,
}

/// Per-sample clipped surrogate term.
pub fn ppo_clip_term<T: Real>(ratio: T, advantage: T, epsilon: T) -> T {
    let clipped = ratio.max(T::one() - epsilon).min(T::one() + epsilon);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of the clipped term with respect to the log-probability. Zero
/// when the clipped branch is strictly smaller.
fn ppo_clip_term_grad<T: Real>(ratio: T, advantage: T, epsilon: T) -> (T, bool) {
    let clipped = ratio.max(T::one() - epsilon).min(T::one() + epsilon);
    if ratio * advantage <= clipped * advantage {
        (ratio * advantage, false)
    } else {
        (T::zero(), true)
    }
}

/// `dH/dz_k = -p_k (log p_k + H)`
fn entropy_and_grad<T: Real>(probs: &[T], log_probs: &[T]) -> (T, Vec<T>) {
    let h = -probs.iter().zip(log_probs).map(|(&p, &lp)| p * lp).sum::<T>();
    let g = probs.iter().zip(log_probs).map(|(&p, &lp)| -p * (lp + h)).collect();
    (h, g)
}

pub fn evaluate<T: Real>(net: &PolicyValueNet<T>, batch: &[Sample<T>], spec: &LossSpec<T>) -> Result<LossOutput<T>> {
    let mut grad = vec![T::zero(); net.params().len()];
    let mut out = LossOutput {
        loss: T::zero(),
        policy_loss: T::zero(),
        value_loss: T::zero(),
        entropy: T::zero(),
        mean_ratio: T::zero(),
        clip_fraction: T::zero(),
        grad: Vec::new(),
    };
    if batch.is_empty() {
        out.grad = grad;
        return Ok(out);
    }
    let n = T::from_count(batch.len() as u64);
    let shape = net.shape();
    let mut d_mod = vec![T::zero(); shape.n_mod];
    let mut d_frame = vec![T::zero(); shape.n_frames];

    for s in batch {
        let fwd = net.forward(&s.features)?;
        let pm = softmax(&fwd.mod_logits);
        let lpm = log_softmax(&fwd.mod_logits);
        let pf = softmax(&fwd.frame_logits);
        let lpf = log_softmax(&fwd.frame_logits);
        let log_prob = lpm[s.mod_index] + lpf[s.frame_index];
        let ratio = (log_prob - s.old_log_prob).exp();
        out.mean_ratio = out.mean_ratio + ratio / n;

        d_mod.iter_mut().for_each(|g| *g = T::zero());
        d_frame.iter_mut().for_each(|g| *g = T::zero());

        if let Some(policy) = spec.policy {
            let (term, d_term) = match policy {
                PolicyObjective::LogProb => (log_prob * s.advantage, s.advantage),
                PolicyObjective::Ratio => (ratio * s.advantage, ratio * s.advantage),
                PolicyObjective::Clipped { epsilon } => {
                    let (g, clipped) = ppo_clip_term_grad(ratio, s.advantage, epsilon);
                    if clipped {
                        out.clip_fraction = out.clip_fraction + T::one() / n;
                    }
                    (ppo_clip_term(ratio, s.advantage, epsilon), g)
                }
            };
            out.policy_loss = out.policy_loss - term / n;
            let d_lp = -d_term / n;
            for (k, g) in d_mod.iter_mut().enumerate() {
                let hit = if k == s.mod_index { T::one() } else { T::zero() };
                *g = *g + d_lp * (hit - pm[k]);
            }
            for (k, g) in d_frame.iter_mut().enumerate() {
                let hit = if k == s.frame_index { T::one() } else { T::zero() };
                *g = *g + d_lp * (hit - pf[k]);
            }
        }

        let (hm, ghm) = entropy_and_grad(&pm, &lpm);
        let (hf, ghf) = entropy_and_grad(&pf, &lpf);
        out.entropy = out.entropy + (hm + hf) / n;
        if spec.ent_coef != T::zero() {
            let c = spec.ent_coef / n;
            d_mod.iter_mut().zip(&ghm).for_each(|(g, &d)| *g = *g - c * d);
            d_frame.iter_mut().zip(&ghf).for_each(|(g, &d)| *g = *g - c * d);
        }

        let err = fwd.value - s.ret;
        out.value_loss = out.value_loss + err * err / n;
        let d_value = spec.vf_coef * T::lit(2.0) * err / n;

        net.backward(&fwd, &d_mod, &d_frame, d_value, &mut grad)?;
    }

    let policy_part = if spec.policy.is_some() { out.policy_loss } else { T::zero() };
    out.loss = policy_part + spec.vf_coef * out.value_loss - spec.ent_coef * out.entropy;
    out.grad = grad;
    Ok(out)
}

/// Advantage actor-critic policy loss, `-mean(log pi · A)`.
pub fn a2c_objective<T: Real>(net: &PolicyValueNet<T>, batch: &[Sample<T>]) -> Result<LossOutput<T>> {
    evaluate(
        net,
        batch,
        &LossSpec {
            policy: Some(PolicyObjective::LogProb),
            vf_coef: T::zero(),
            ent_coef: T::zero(),
        },
    )
}

/// Clipped-surrogate policy loss.
pub fn ppo_clip_objective<T: Real>(net: &PolicyValueNet<T>, batch: &[Sample<T>], epsilon: T) -> Result<LossOutput<T>> {
    evaluate(
        net,
        batch,
        &LossSpec {
            policy: Some(PolicyObjective::Clipped { epsilon }),
            vf_coef: T::zero(),
            ent_coef: T::zero(),
        },
    )
}

/// Unclipped importance-ratio policy loss.
pub fn ratio_objective<T: Real>(net: &PolicyValueNet<T>, batch: &[Sample<T>]) -> Result<LossOutput<T>> {
    evaluate(
        net,
        batch,
        &LossSpec {
            policy: Some(PolicyObjective::Ratio),
            vf_coef: T::zero(),
            ent_coef: T::zero(),
        },
    )
}

/// Value regression loss, `mean((V - R)^2)`.
pub fn value_objective<T: Real>(net: &PolicyValueNet<T>, batch: &[Sample<T>]) -> Result<LossOutput<T>> {
    evaluate(
        net,
        batch,
        &LossSpec {
            policy: None,
            vf_coef: T::one(),
            ent_coef: T::zero(),
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agents::net::NetShape;
    use crate::rng::seeded;
    use rand::Rng;

    #[test]
    fn clip_table() {
        assert_eq!(ppo_clip_term(1.3, 1.0, 0.2), 1.2);
        assert_eq!(ppo_clip_term(0.5, -1.0, 0.2), -0.8);
        for a in [-2.5, 0.0, 0.7] {
            assert_eq!(ppo_clip_term(1.0, a, 0.2), a);
        }
    }

    #[test]
    fn log_prob_times_advantage() {
        // Direct product: log pi = -0.5, A = 2 -> -1.
        let lp: f64 = -0.5;
        assert_eq!(lp * 2.0, -1.0);
    }

    fn batch(rng: &mut impl Rng, net: &PolicyValueNet<f64>, n: usize) -> Vec<Sample<f64>> {
        (0..n)
            .map(|_| {
                let features = vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
                let f = net.forward(&features).unwrap();
                let m = rng.random_range(0..4);
                let fr = rng.random_range(0..net.shape().n_frames);
                let lp = log_softmax(&f.mod_logits)[m] + log_softmax(&f.frame_logits)[fr];
                Sample {
                    features,
                    mod_index: m,
                    frame_index: fr,
                    old_log_prob: lp,
                    advantage: 0.0,
                    ret: f.value,
                }
            })
            .collect()
    }

    #[test]
    fn zero_advantage_zero_policy_gradient() {
        let mut rng = seeded(4);
        let net = PolicyValueNet::init(NetShape::new(6, 5), &mut rng);
        let b = batch(&mut rng, &net, 8);
        for out in [a2c_objective(&net, &b).unwrap(), ppo_clip_objective(&net, &b, 0.2).unwrap()] {
            assert!(out.grad.iter().all(|&g| g == 0.0));
        }
        // Perfect value fit has no gradient either.
        assert!(value_objective(&net, &b).unwrap().grad.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn value_loss_examples() {
        let net = PolicyValueNet::<f64>::zeros(NetShape::new(3, 2));
        let s = |ret| Sample {
            features: vec![0.0, 0.0],
            mod_index: 0,
            frame_index: 0,
            old_log_prob: 0.0,
            advantage: 0.0,
            ret,
        };
        // Zero net outputs V = 0; shift the return so V - R = 1 - 3.
        assert_eq!(value_objective(&net, &[s(2.0)]).unwrap().value_loss, 4.0);
        assert_eq!(value_objective(&net, &[s(0.0)]).unwrap().value_loss, 0.0);
        // dL/dV = 2 (V - R) / n lands on the value-head bias.
        let out = value_objective(&net, &[s(2.0), s(2.0)]).unwrap();
        let bias = net.shape().layout().last().unwrap().offset;
        assert!((out.grad[bias] - 2.0 * 2.0 * (0.0 - 2.0) / 2.0).abs() < 1e-12);
    }

    #[test]
    fn first_epoch_ratio_is_one() {
        let mut rng = seeded(8);
        let net = PolicyValueNet::init(NetShape::new(6, 5), &mut rng);
        let mut b = batch(&mut rng, &net, 16);
        b.iter_mut().for_each(|s| s.advantage = rng.random_range(-1.0..1.0));
        let out = ppo_clip_objective(&net, &b, 0.2).unwrap();
        assert!((out.mean_ratio - 1.0).abs() < 1e-12);
        assert_eq!(out.clip_fraction, 0.0);
        // At ratio 1 the clipped surrogate equals the A2C-style ratio objective.
        let r = ratio_objective(&net, &b).unwrap();
        assert!((out.policy_loss - r.policy_loss).abs() < 1e-12);
    }
}
