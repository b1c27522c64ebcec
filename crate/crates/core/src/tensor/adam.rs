use crate::error::{config_err, PanError, Result};

use super::Param;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig {
            lr,
            ..Self::default()
        }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers are created on the first step
/// and must keep matching the parameter list afterwards.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update to every parameter, then zeroes the gradients.
    ///
    /// Nothing is modified if any gradient is non-finite; the error names the
    /// first offending parameter.
    pub fn step(&mut self, params: &mut [(String, &mut Param)]) -> Result<()> {
        for (name, p) in params.iter() {
            if let Some(idx) = p.grad.iter().position(|g| !g.is_finite()) {
                return Err(PanError::Numerical(format!(
                    "non-finite gradient {} in parameter `{name}` at index {idx}",
                    p.grad[idx]
                )));
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|(_, p)| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len()
            || self.m.iter().zip(params.iter()).any(|(m, (_, p))| m.len() != p.len())
        {
            return config_err("adam: parameter list changed shape between steps");
        }

        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for ((_, p), (m, v)) in params.iter_mut().zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            let Param { value, grad, .. } = &mut **p;
            for k in 0..value.len() {
                let g = grad[k];
                m[k] = beta1 * m[k] + (1.0 - beta1) * g;
                v[k] = beta2 * v[k] + (1.0 - beta2) * g * g;
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                value[k] -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
            p.zero_grad();
        }
        Ok(())
    }
}
