use std::f64::consts::PI;

use super::network::ParamStore;
use super::ModelError;
use crate::scalar::Scalar;

/// Optimizer and schedule settings. `effective_lr = base_lr · batch / 256`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for TrainConfig {
    /// Large-scale recipe: AdamW, base lr 1.5e-4, weight decay 0.1,
    /// batch 128, 10 warmup epochs of 100.
    fn default() -> Self {
        Self {
            base_lr: 1.5e-4,
            weight_decay: 0.1,
            batch_size: 128,
            warmup_epochs: 10,
            total_epochs: 100,
            beta1: 0.9,
            beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl TrainConfig {
    /// The same schedule shape with a learning rate sized for tiny models
    /// and few steps.
    pub fn desk() -> Self {
        Self {
            base_lr: 1.6e-2,
            weight_decay: 0.1,
            batch_size: 32,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.warmup_epochs >= self.total_epochs {
            return Err(ModelError::InvalidConfig(format!(
                "warmup_epochs ({}) must be below total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.batch_size == 0 || !(self.base_lr >= 0.0) || !(self.weight_decay >= 0.0) {
            return Err(ModelError::InvalidConfig("batch_size, base_lr and weight_decay must be non-negative, batch positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(ModelError::InvalidConfig("Adam betas must lie in [0, 1)".into()));
        }
        Ok(())
    }

    pub fn peak_lr(&self) -> f64 {
        self.base_lr * self.batch_size as f64 / 256.0
    }

    /// Learning rate at fractional epoch `t`: linear ramp from 0 over the
    /// warmup, then half-cosine decay to 0 at `total_epochs`.
    pub fn lr_at(&self, t: f64) -> f64 {
        let peak = self.peak_lr();
        let w = self.warmup_epochs as f64;
        let total = self.total_epochs as f64;
        if t < w {
            peak * t / w
        } else {
            let progress = ((t - w) / (total - w)).clamp(0.0, 1.0);
            peak * 0.5 * (1.0 + (PI * progress).cos())
        }
    }
}

/// AdamW with decoupled weight decay on tensors of rank ≥ 2 (kernels and
/// matrices; biases and per-channel vectors are not decayed).
#[derive(Clone, Debug, PartialEq)]
pub struct AdamW<T> {
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamW<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros = || params.entries.iter().map(|e| vec![T::zero(); e.tensor.len()]).collect();
        Self {
            m: zeros(),
            v: zeros(),
            step: 0,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn update(&mut self, params: &mut ParamStore<T>, grads: &[Vec<T>], lr: f64, cfg: &TrainConfig) {
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        let (b1, b2) = (T::from_f64_lossy(cfg.beta1), T::from_f64_lossy(cfg.beta2));
        let (one, eps) = (T::one(), T::from_f64_lossy(cfg.adam_epsilon));
        let lr_t = T::from_f64_lossy(lr);
        let (inv_c1, inv_c2) = (T::from_f64_lossy(1.0 / c1), T::from_f64_lossy(1.0 / c2));
        for (i, entry) in params.entries.iter_mut().enumerate() {
            if !entry.trainable {
                continue;
            }
            let decay = if entry.tensor.ndim() >= 2 {
                T::from_f64_lossy(lr * cfg.weight_decay)
            } else {
                T::zero()
            };
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], &grads[i]);
            for (j, p) in entry.tensor.data.iter_mut().enumerate() {
                m[j] = b1 * m[j] + (one - b1) * g[j];
                v[j] = b2 * v[j] + (one - b2) * g[j] * g[j];
                let mh = m[j] * inv_c1;
                let vh = v[j] * inv_c2;
                *p = *p - decay * *p - lr_t * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::network::ParamEntry;
    use crate::model::Tensor;

    fn store(values: Vec<f64>, shape: Vec<usize>) -> ParamStore<f64> {
        ParamStore {
            entries: vec![ParamEntry {
                name: "w".into(),
                tensor: Tensor::new(shape, values),
                trainable: true,
            }],
        }
    }

    #[test]
    fn schedule_endpoints() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.peak_lr(), 1.5e-4 * 0.5);
        assert_eq!(cfg.lr_at(0.0), 0.0);
        assert!((cfg.lr_at(5.0) - cfg.peak_lr() / 2.0).abs() < 1e-18);
        assert_eq!(cfg.lr_at(10.0), cfg.peak_lr());
        assert!(cfg.lr_at(100.0).abs() < 1e-18);
        assert!(cfg.lr_at(55.0) < cfg.lr_at(30.0));
    }

    #[test]
    fn warmup_must_precede_end() {
        let cfg = TrainConfig {
            warmup_epochs: 10,
            total_epochs: 10,
            ..TrainConfig::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn zero_gradients_without_decay_leave_params() {
        let mut p = store(vec![1.0, -2.0, 3.0, 0.5], vec![2, 2]);
        let before = p.clone();
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::desk()
        };
        let mut opt = AdamW::new(&p);
        opt.update(&mut p, &[vec![0.0; 4]], 0.1, &cfg);
        assert_eq!(p, before);
    }

    #[test]
    fn bias_vectors_are_not_decayed() {
        let mut p = store(vec![1.0, 2.0], vec![2]);
        let mut opt = AdamW::new(&p);
        opt.update(&mut p, &[vec![0.0; 2]], 0.1, &TrainConfig::desk());
        assert_eq!(p.entries[0].tensor.data, vec![1.0, 2.0]);
        let mut m = store(vec![1.0, 2.0], vec![1, 2]);
        let mut opt = AdamW::new(&m);
        opt.update(&mut m, &[vec![0.0; 2]], 0.1, &TrainConfig::desk());
        assert!((m.entries[0].tensor.data[0] - (1.0 - 0.1 * 0.1)).abs() < 1e-15);
    }

    #[test]
    fn quadratic_bowl_descends() {
        let mut p = store(vec![3.0, -2.0], vec![2]);
        let cfg = TrainConfig {
            weight_decay: 0.0,
            ..TrainConfig::desk()
        };
        let mut opt = AdamW::new(&p);
        let loss = |p: &ParamStore<f64>| p.entries[0].tensor.data.iter().map(|x| x * x).sum::<f64>();
        let mut last = loss(&p);
        for _ in 0..3 {
            let g: Vec<f64> = p.entries[0].tensor.data.iter().map(|x| 2.0 * x).collect();
            opt.update(&mut p, &[g], 0.1, &cfg);
            let l = loss(&p);
            assert!(l < last);
            last = l;
        }
    }

    #[test]
    fn frozen_entries_untouched() {
        let mut p = store(vec![1.0, 1.0], vec![1, 2]);
        p.entries[0].trainable = false;
        let mut opt = AdamW::new(&p);
        opt.update(&mut p, &[vec![5.0, 5.0]], 0.1, &TrainConfig::desk());
        assert_eq!(p.entries[0].tensor.data, vec![1.0, 1.0]);
    }
}
