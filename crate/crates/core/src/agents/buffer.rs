//! Trajectory storage and advantage estimation.

use crate::error::{Error, Result};
use crate::num::Real;

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct Transition<T> {
    pub features: Vec<T>,
    pub mod_index: usize,
    pub frame_index: usize,
    /// Joint log-probability under the policy that collected it.
    pub log_prob: T,
    pub reward: T,
    pub value: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBuffer<T> {
    capacity: usize,
    steps: Vec<Transition<T>>,
    advantages: Vec<T>,
    returns: Vec<T>,
}

impl<T: Real> RolloutBuffer<T> {
    pub fn new(capacity: usize) -> Self {
        Self {
            capacity,
            steps: Vec::with_capacity(capacity),
            advantages: Vec::new(),
            returns: Vec::new(),
        }
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.steps.len() >= self.capacity
    }

    pub fn is_finalized(&self) -> bool {
        !self.steps.is_empty() && self.advantages.len() == self.steps.len()
    }

    /// Appends a transition; any previously computed advantages are discarded.
    pub fn push(&mut self, t: Transition<T>) -> Result<()> {
        if self.is_full() {
            return Err(Error::State(format!("rollout buffer full ({} steps)", self.capacity)));
        }
        self.advantages.clear();
        self.returns.clear();
        self.steps.push(t);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.steps.clear();
        self.advantages.clear();
        self.returns.clear();
    }

    pub fn steps(&self) -> &[Transition<T>] {
        &self.steps
    }

    pub fn advantages(&self) -> &[T] {
        &self.advantages
    }

    pub fn returns(&self) -> &[T] {
        &self.returns
    }

    /// Generalized advantage estimation over the stored rollout.
    ///
    /// `delta_t = r_t + gamma V_{t+1} - V_t`, `A_t = delta_t + gamma lambda A_{t+1}`,
    /// returns `= A + V`. `bootstrap_value` stands in for `V` after the last step.
    pub fn compute_gae(&mut self, gamma: T, lambda: T, bootstrap_value: T) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::State("cannot estimate advantages of an empty rollout".into()));
        }
        let n = self.steps.len();
        let mut adv = vec![T::zero(); n];
        let mut next_value = bootstrap_value;
        let mut running = T::zero();
        for t in (0..n).rev() {
            let s = &self.steps[t];
            let delta = s.reward + gamma * next_value - s.value;
            running = delta + gamma * lambda * running;
            adv[t] = running;
            next_value = s.value;
        }
        self.returns = adv.iter().zip(&self.steps).map(|(&a, s)| a + s.value).collect();
        self.advantages = adv;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(reward: f64, value: f64) -> Transition<f64> {
        Transition {
            features: vec![0.0, 0.0],
            mod_index: 0,
            frame_index: 0,
            log_prob: 0.0,
            reward,
            value,
        }
    }

    fn filled(rewards: &[f64], values: &[f64]) -> RolloutBuffer<f64> {
        let mut b = RolloutBuffer::new(rewards.len());
        for (&r, &v) in rewards.iter().zip(values) {
            b.push(step(r, v)).unwrap();
        }
        b
    }

    #[test]
    fn single_step_identity() {
        let mut b = filled(&[1.0], &[0.0]);
        b.compute_gae(1.0, 1.0, 0.0).unwrap();
        assert_eq!(b.advantages(), &[1.0]);
        assert_eq!(b.returns(), &[1.0]);
    }

    #[test]
    fn two_step_discounted_returns() {
        let mut b = filled(&[1.0, 1.0], &[0.0, 0.0]);
        b.compute_gae(0.5, 1.0, 0.0).unwrap();
        assert_eq!(b.returns(), &[1.5, 1.0]);
        assert_eq!(b.advantages(), b.returns());
    }

    #[test]
    fn lambda_zero_is_one_step_td() {
        let r = [0.3, -1.0, 2.0, 0.7];
        let v = [0.1, 0.4, -0.2, 0.9];
        let mut b = filled(&r, &v);
        b.compute_gae(0.9, 0.0, 0.5).unwrap();
        for t in 0..4 {
            let next = if t + 1 < 4 { v[t + 1] } else { 0.5 };
            assert!((b.advantages()[t] - (r[t] + 0.9 * next - v[t])).abs() < 1e-15);
        }
    }

    #[test]
    fn lambda_one_matches_monte_carlo_returns() {
        // Oracle: direct discounted sum with bootstrap tail.
        let r = [0.3, -1.0, 2.0, 0.7, -0.4];
        let v = [0.1, 0.4, -0.2, 0.9, 0.0];
        let (gamma, boot) = (0.8, 1.3);
        let mut b = filled(&r, &v);
        b.compute_gae(gamma, 1.0, boot).unwrap();
        for t in 0..r.len() {
            let mut g = 0.0;
            for (k, rk) in r[t..].iter().enumerate() {
                g += gamma.powi(k as i32) * rk;
            }
            g += gamma.powi((r.len() - t) as i32) * boot;
            assert!((b.returns()[t] - g).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_and_overfull_buffers() {
        let mut b = RolloutBuffer::<f64>::new(1);
        assert!(matches!(b.compute_gae(0.99, 0.95, 0.0), Err(Error::State(_))));
        b.push(step(0.0, 0.0)).unwrap();
        assert!(!b.is_finalized());
        assert!(b.push(step(0.0, 0.0)).is_err());
        b.compute_gae(0.99, 0.95, 0.0).unwrap();
        assert!(b.is_finalized());
        assert_eq!(b.advantages().len(), b.len());
    }
}
