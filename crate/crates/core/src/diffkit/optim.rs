//! Adam with decoupled weight decay and a step-decay learning-rate schedule.

use serde::{Deserialize, Serialize};

use super::DiffError;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam<T> {
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    m: Vec<T>,
    v: Vec<T>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(len: usize) -> Self {
        Self {
            beta1: T::lit(0.9),
            beta2: T::lit(0.999),
            eps: T::lit(1e-8),
            m: vec![T::zero(); len],
            v: vec![T::zero(); len],
            step: 0,
        }
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// One update. `weight_decay` holds a coefficient per coordinate and is
    /// applied as `p ← p − lr·wd·p`, separate from the moment estimates.
    /// On a non-finite gradient nothing is modified.
    pub fn step(
        &mut self,
        params: &mut [T],
        grads: &[T],
        lr: T,
        weight_decay: &[T],
    ) -> Result<(), DiffError> {
        let n = self.m.len();
        for (what, got) in [
            ("params", params.len()),
            ("gradient", grads.len()),
            ("weight decay", weight_decay.len()),
        ] {
            if got != n {
                return Err(DiffError::DimensionMismatch {
                    what,
                    expected: n,
                    got,
                });
            }
        }
        if let Some(i) = grads.iter().position(|g| !g.is_finite()) {
            return Err(DiffError::NonFiniteGradient { index: i });
        }
        self.step += 1;
        let t = i32::try_from(self.step).unwrap_or(i32::MAX);
        let c1 = T::one() - self.beta1.powi(t);
        let c2 = T::one() - self.beta2.powi(t);
        for i in 0..n {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (T::one() - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (T::one() - self.beta2) * g * g;
            let m_hat = self.m[i] / c1;
            let v_hat = self.v[i] / c2;
            params[i] -= lr * weight_decay[i] * params[i];
            params[i] -= lr * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// `base_lr · gamma^⌊epoch / step_epochs⌋`.
pub fn lr_schedule<T: Scalar>(epoch: usize, base_lr: T, gamma: T, step_epochs: usize) -> T {
    let k = epoch / step_epochs.max(1);
    base_lr * gamma.powi(i32::try_from(k).unwrap_or(i32::MAX))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let mut opt = Adam::new(1);
        let mut p = [0.0f64];
        opt.step(&mut p, &[1.0], 1e-3, &[0.0]).unwrap();
        assert!((p[0] + 1e-3).abs() < 1e-11);
    }

    #[test]
    fn zero_gradient_keeps_params() {
        let mut opt = Adam::new(2);
        let mut p = [0.3f64, -2.0];
        for _ in 0..5 {
            opt.step(&mut p, &[0.0, 0.0], 1e-2, &[0.0, 0.0]).unwrap();
        }
        assert_eq!(p, [0.3, -2.0]);
    }

    #[test]
    fn weight_decay_is_decoupled() {
        let mut opt = Adam::new(1);
        let mut p = [2.0f64];
        opt.step(&mut p, &[0.0], 0.1, &[0.5]).unwrap();
        assert!((p[0] - 1.9).abs() < 1e-15);
    }

    #[test]
    fn non_finite_gradient_is_rejected_untouched() {
        let mut opt = Adam::new(2);
        let mut p = [1.0f64, 1.0];
        let err = opt.step(&mut p, &[0.0, f64::NAN], 1e-3, &[0.0, 0.0]);
        assert!(matches!(err, Err(DiffError::NonFiniteGradient { index: 1 })));
        assert_eq!(p, [1.0, 1.0]);
        assert_eq!(opt.steps_taken(), 0);
    }

    #[test]
    fn step_decay() {
        assert_eq!(lr_schedule(0, 3e-3, 0.1, 1000), 3e-3);
        assert_eq!(lr_schedule(999, 3e-3, 0.1, 1000), 3e-3);
        assert!((lr_schedule(1000, 3e-3f64, 0.1, 1000) - 3e-4).abs() < 1e-18);
        assert_eq!(lr_schedule(5000, 0.01, 1.0, 1000), 0.01);
    }
}
