use serde::{Deserialize, Serialize};

use super::{NeuralError, ParamStore, Result, Scalar, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled decay coefficient, applied as `theta -= weight_decay * theta`.
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self { lr: 1e-4, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-6 }
    }
}

/// Adam with decoupled weight decay:
///
/// ```text
/// m = b1 m + (1 - b1) g;  v = b2 v + (1 - b2) g^2
/// theta -= lr * m_hat / (sqrt(v_hat) + eps) + wd * theta
/// ```
#[derive(Debug, Clone)]
pub struct AdamW<T> {
    pub config: AdamWConfig,
    pub step: u64,
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(config: AdamWConfig, params: &ParamStore<T>) -> Self {
        Self { config, step: 0, m: params.zeros_like(), v: params.zeros_like() }
    }

    /// Applies one update. A non-finite gradient leaves everything untouched.
    pub fn update(&mut self, params: &mut ParamStore<T>, grads: &[Tensor<T>]) -> Result<()> {
        for (i, g) in grads.iter().enumerate() {
            if !g.all_finite() {
                return Err(NeuralError::NanGradient(params.name(i).to_string()));
            }
        }
        self.step += 1;
        let c = &self.config;
        let (b1, b2) = (T::c(c.beta1), T::c(c.beta2));
        let bc1 = T::c(1.0 - c.beta1.powi(self.step as i32));
        let bc2 = T::c(1.0 - c.beta2.powi(self.step as i32));
        let (lr, eps, wd) = (T::c(c.lr), T::c(c.eps), T::c(c.weight_decay));
        for (i, g) in grads.iter().enumerate() {
            let p = params.tensor_mut(i);
            let (m, v) = (&mut self.m[i], &mut self.v[i]);
            for j in 0..g.data.len() {
                let gj = g.data[j];
                m.data[j] = b1 * m.data[j] + (T::one() - b1) * gj;
                v.data[j] = b2 * v.data[j] + (T::one() - b2) * gj * gj;
                let mh = m.data[j] / bc1;
                let vh = v.data[j] / bc2;
                let theta = p.data[j];
                p.data[j] = theta - (lr * mh / (vh.sqrt() + eps) + wd * theta);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.add("p", Tensor::scalar(v));
        s
    }

    #[test]
    fn zero_grad_zero_decay_is_identity() {
        let mut s = store(0.3);
        let mut opt = AdamW::new(AdamWConfig { weight_decay: 0.0, ..Default::default() }, &s);
        opt.update(&mut s, &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(s.tensor(0).item(), 0.3);
    }

    #[test]
    fn positive_gradient_decreases_parameter() {
        let mut s = store(1.0);
        let mut opt = AdamW::new(AdamWConfig::default(), &s);
        opt.update(&mut s, &[Tensor::scalar(1.0)]).unwrap();
        assert!(s.tensor(0).item() < 1.0);
    }

    #[test]
    fn three_steps_match_recurrence() {
        let cfg = AdamWConfig { lr: 1e-2, beta1: 0.9, beta2: 0.999, eps: 1e-8, weight_decay: 1e-3 };
        let gs = [0.5, -1.25, 2.0];
        let mut s = store(1.0);
        let mut opt = AdamW::new(cfg, &s);
        for g in gs {
            opt.update(&mut s, &[Tensor::scalar(g)]).unwrap();
        }
        let (mut theta, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for (t, g) in gs.iter().enumerate() {
            let t = (t + 1) as i32;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.9f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            theta -= 1e-2 * mh / (vh.sqrt() + 1e-8) + 1e-3 * theta;
        }
        assert!((s.tensor(0).item() - theta).abs() < 1e-12);
        assert_eq!(opt.step, 3);
    }

    #[test]
    fn nan_gradient_names_parameter() {
        let mut s = store(1.0);
        let mut opt = AdamW::new(AdamWConfig::default(), &s);
        match opt.update(&mut s, &[Tensor::scalar(f64::NAN)]) {
            Err(NeuralError::NanGradient(name)) => assert_eq!(name, "p"),
            other => panic!("{other:?}"),
        }
        assert_eq!(s.tensor(0).item(), 1.0);
        assert_eq!(opt.step, 0);
    }
}
