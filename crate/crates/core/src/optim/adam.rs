use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-2,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Bias-corrected first/second moment estimates for a flat parameter vector.
///
/// [`AdamState::step`] *ascends*: pass the gradient of the objective being
/// maximized.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub first_moment: Vec<T>,
    pub second_moment: Vec<T>,
    pub step_count: u64,
    pub hyper: AdamConfig,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, hyper: AdamConfig) -> Self {
        Self {
            first_moment: vec![T::zero(); len],
            second_moment: vec![T::zero(); len],
            step_count: 0,
            hyper,
        }
    }

    pub fn step(&mut self, params: &mut [T], grad: &[T]) -> Result<()> {
        let n = self.first_moment.len();
        for (context, len) in [("adam params", params.len()), ("adam gradient", grad.len())] {
            if len != n {
                return Err(Error::Dimension {
                    context,
                    expected: n,
                    actual: len,
                });
            }
        }
        if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite gradient at packed index {i} (step {})",
                self.step_count + 1
            )));
        }
        self.step_count += 1;
        let b1 = T::lit(self.hyper.beta1);
        let b2 = T::lit(self.hyper.beta2);
        let lr = T::lit(self.hyper.learning_rate);
        let eps = T::lit(self.hyper.epsilon);
        let t = i32::try_from(self.step_count).unwrap_or(i32::MAX);
        let c1 = T::one() - b1.powi(t);
        let c2 = T::one() - b2.powi(t);
        for (((p, &g), m), v) in params
            .iter_mut()
            .zip(grad)
            .zip(self.first_moment.iter_mut())
            .zip(self.second_moment.iter_mut())
        {
            *m = b1 * *m + (T::one() - b1) * g;
            *v = b2 * *v + (T::one() - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p += lr * m_hat / (v_hat.sqrt() + eps);
        }
        Ok(())
    }
}
