//! Categorical helpers for the two factored action heads.

use rand::Rng;

use crate::env::MdpAction;
use crate::error::{Error, Result};
use crate::num::Real;

pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = logits.iter().map(|&z| (z - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}

pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let lse = max + logits.iter().map(|&z| (z - max).exp()).sum::<T>().ln();
    logits.iter().map(|&z| z - lse).collect()
}

/// Shannon entropy (nats) of `softmax(logits)`.
pub fn entropy<T: Real>(logits: &[T]) -> T {
    let p = softmax(logits);
    let lp = log_softmax(logits);
    -p.iter().zip(&lp).map(|(&a, &b)| if a > T::zero() { a * b } else { T::zero() }).sum::<T>()
}

/// First index of the largest entry.
pub fn argmax<T: Real>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn check_finite<T: Real>(logits: &[T], head: &str) -> Result<()> {
    if logits.is_empty() || logits.iter().any(|z| !z.is_finite()) {
        return Err(Error::Numeric(format!("{head} logits must be finite and non-empty")));
    }
    Ok(())
}

/// Inverse-CDF draw from `softmax(logits)` using a single uniform.
fn sample_index<T: Real, R: Rng + ?Sized>(logits: &[T], rng: &mut R) -> usize {
    let probs = softmax(logits);
    let u = T::lit(rng.random::<f64>());
    let mut cum = T::zero();
    for (i, &p) in probs.iter().enumerate() {
        cum = cum + p;
        if u < cum {
            return i;
        }
    }
    argmax(&probs)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SampledAction<T> {
    pub action: MdpAction,
    pub mod_index: usize,
    pub frame_index: usize,
    /// `log pi(mod) + log pi(frames)`
    pub log_prob: T,
}

/// Picks an action from the two heads. Greedy mode takes the first argmax of
/// each head and consumes no randomness.
pub fn sample_action<T: Real, R: Rng + ?Sized>(
    mod_logits: &[T],
    frame_logits: &[T],
    rng: &mut R,
    greedy: bool,
) -> Result<SampledAction<T>> {
    check_finite(mod_logits, "modulation")?;
    check_finite(frame_logits, "frame")?;
    let (mod_index, frame_index) = if greedy {
        (argmax(mod_logits), argmax(frame_logits))
    } else {
        let m = sample_index(mod_logits, rng);
        (m, sample_index(frame_logits, rng))
    };
    let log_prob = joint_log_prob(mod_logits, frame_logits, mod_index, frame_index);
    Ok(SampledAction {
        action: MdpAction::from_indices(mod_index, frame_index)?,
        mod_index,
        frame_index,
        log_prob,
    })
}

pub fn joint_log_prob<T: Real>(mod_logits: &[T], frame_logits: &[T], mod_index: usize, frame_index: usize) -> T {
    log_softmax(mod_logits)[mod_index] + log_softmax(frame_logits)[frame_index]
}
