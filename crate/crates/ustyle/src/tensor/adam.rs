//! Adam optimizer with bias correction.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-parameter moment estimates plus the shared step counter and
/// hyperparameters.
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Completed update count; bias correction uses `t` after increment.
    pub t: u64,
    slots: Vec<Moments>,
}

struct Moments {
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    /// Optimizer for a fixed parameter list, given as the element count of
    /// each parameter tensor. Moments start at zero.
    pub fn new(lr: f64, param_sizes: &[usize]) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            slots: param_sizes
                .iter()
                .map(|&n| Moments {
                    m: vec![0.0; n],
                    v: vec![0.0; n],
                })
                .collect(),
        }
    }

    /// One Adam update over all parameters. `params` and `grads` must be
    /// aligned with the sizes given at construction.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[&[f64]]) -> Result<()> {
        if params.len() != self.slots.len() || grads.len() != self.slots.len() {
            return Err(Error::Contract(format!(
                "adam step with {} params / {} grads, expected {}",
                params.len(),
                grads.len(),
                self.slots.len()
            )));
        }
        for ((p, g), slot) in params.iter().zip(grads.iter()).zip(&self.slots) {
            if p.numel() != slot.m.len() || g.len() != slot.m.len() {
                return Err(Error::Contract(format!(
                    "adam slot size {} does not match param {} / grad {}",
                    slot.m.len(),
                    p.numel(),
                    g.len()
                )));
            }
        }
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((param, grad), slot) in params.iter_mut().zip(grads.iter()).zip(&mut self.slots) {
            for i in 0..grad.len() {
                let g = grad[i];
                slot.m[i] = self.beta1 * slot.m[i] + (1.0 - self.beta1) * g;
                slot.v[i] = self.beta2 * slot.v[i] + (1.0 - self.beta2) * g * g;
                let m_hat = slot.m[i] / bc1;
                let v_hat = slot.v[i] / bc2;
                param.data[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Tensor::filled(Shape::new(1, 1, 1, 3), 2.5);
        let before = p.data.clone();
        let mut opt = Adam::new(1e-2, &[3]);
        let zeros = vec![0.0; 3];
        opt.step(&mut [&mut p], &[&zeros]).unwrap();
        assert_eq!(p.data, before);
        assert_eq!(opt.t, 1);
    }

    #[test]
    fn shape_mismatch_is_a_contract_error() {
        let mut p = Tensor::zeros(Shape::new(1, 1, 1, 3));
        let mut opt = Adam::new(1e-2, &[4]);
        let g = vec![0.0; 4];
        let err = opt.step(&mut [&mut p], &[&g]).unwrap_err();
        assert!(matches!(err, Error::Contract(_)), "got {err}");
    }

    #[test]
    fn converges_on_scalar_quadratic() {
        // f(p) = (p - 3)^2, gradient 2(p - 3), from p = 0 at lr 0.1.
        let mut p = Tensor::zeros(Shape::scalar());
        let mut opt = Adam::new(0.1, &[1]);
        for _ in 0..500 {
            let g = vec![2.0 * (p.data[0] - 3.0)];
            opt.step(&mut [&mut p], &[&g]).unwrap();
        }
        assert!(
            (p.data[0] - 3.0).abs() < 0.01,
            "p = {} after 500 steps",
            p.data[0]
        );
    }
}
