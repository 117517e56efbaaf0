use super::network::Network;
use super::tensor::{Scalar, Tensor};
use super::NnError;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// SSIM share of the generator loss.
    pub alpha: f64,
    /// Learning rate at the last epoch as a fraction of the initial one,
    /// reached by cosine decay. 1 keeps the rate constant.
    #[serde(default = "one")]
    pub final_lr_fraction: f64,
    pub seed: u64,
}

fn one() -> f64 {
    1.0
}

impl TrainConfig {
    pub fn generator() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 100,
            batch_size: 8,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            alpha: 0.84,
            final_lr_fraction: 1.0,
            seed: 0,
        }
    }

    pub fn pooling() -> Self {
        Self {
            learning_rate: 1e-4,
            ..Self::generator()
        }
    }

    /// Learning rate for a 0-based epoch.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        if self.epochs < 2 || self.final_lr_fraction >= 1.0 {
            return self.learning_rate;
        }
        let t = epoch.min(self.epochs - 1) as f64 / (self.epochs - 1) as f64;
        let f = self.final_lr_fraction
            + (1.0 - self.final_lr_fraction) * 0.5 * (1.0 + (std::f64::consts::PI * t).cos());
        self.learning_rate * f
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.batch_size == 0 {
            return Err(NnError::Config(
                "learning rate, epochs and batch size must be positive".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(NnError::Config(format!(
                "alpha must be in [0, 1], got {}",
                self.alpha
            )));
        }
        if !(self.final_lr_fraction > 0.0 && self.final_lr_fraction <= 1.0) {
            return Err(NnError::Config(format!(
                "final lr fraction must be in (0, 1], got {}",
                self.final_lr_fraction
            )));
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || !(self.eps > 0.0)
        {
            return Err(NnError::Config(
                "Adam betas must be in [0, 1) and eps positive".into(),
            ));
        }
        Ok(())
    }
}

/// Adam with bias correction. Moment buffers follow parameter visit order.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            t: 0,
            m: Vec::new(),
            v: Vec::new(),
        }
    }

    pub fn from_config(c: &TrainConfig) -> Self {
        Self::new(c.learning_rate, c.beta1, c.beta2, c.eps)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    fn update<F: Scalar>(&mut self, k: usize, p: &mut Tensor<F>) -> Result<(), NnError> {
        if k == self.m.len() {
            self.m.push(vec![0.0; p.len()]);
            self.v.push(vec![0.0; p.len()]);
        }
        if self.m[k].len() != p.len() {
            return Err(NnError::Shape(
                "optimizer state does not match parameters".into(),
            ));
        }
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        let (data, grad) = p.data_and_grad_mut();
        let grad = grad.ok_or_else(|| NnError::State("tensor has no gradient".into()))?;
        let (m, v) = (&mut self.m[k], &mut self.v[k]);
        for i in 0..data.len() {
            let g = grad[i].f64();
            m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
            v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
            let step = self.lr * (m[i] / bc1) / ((v[i] / bc2).sqrt() + self.eps);
            data[i] = F::of(data[i].f64() - step);
        }
        Ok(())
    }

    /// One update of every tensor from its attached gradient.
    pub fn step<F: Scalar>(&mut self, params: &mut [&mut Tensor<F>]) -> Result<(), NnError> {
        self.t += 1;
        for (k, p) in params.iter_mut().enumerate() {
            self.update(k, p)?;
        }
        Ok(())
    }

    pub fn step_network<F: Scalar>(&mut self, net: &mut Network<F>) -> Result<(), NnError> {
        self.t += 1;
        let mut k = 0;
        let mut result = Ok(());
        net.visit_params(&mut |_, t| {
            if result.is_ok() {
                result = self.update(k, t);
            }
            k += 1;
        });
        result
    }
}
