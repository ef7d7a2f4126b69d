use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::nn::{Param, Real};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            eps: 1e-7,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let beta_ok = |b: f64| (0.0..1.0).contains(&b);
        if !(self.lr > 0.0 && self.lr.is_finite() && beta_ok(self.beta1) && beta_ok(self.beta2) && self.eps > 0.0) {
            return Err(Error::invalid("Adam needs lr > 0, 0 <= beta < 1 and eps > 0"));
        }
        Ok(())
    }
}

/// Adam with the bias correction folded into the step size:
/// `lr_t = lr·sqrt(1 - β2^t) / (1 - β1^t)`, `p -= lr_t·m / (sqrt(v) + ε)`.
/// Moments are kept for trainable parameters only, in parameter order.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam<T> {
    pub cfg: AdamConfig,
    pub t: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Real> Adam<T> {
    pub fn new<'a>(cfg: AdamConfig, params: impl IntoIterator<Item = &'a Param<T>>) -> Self {
        let sizes: Vec<usize> = params.into_iter().filter(|p| p.trainable).map(|p| p.len()).collect();
        Self {
            cfg,
            t: 0,
            m: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
            v: sizes.iter().map(|&n| vec![T::zero(); n]).collect(),
        }
    }

    pub fn step<'a>(&mut self, params: impl IntoIterator<Item = &'a mut Param<T>>) -> Result<()> {
        self.t += 1;
        let c = self.cfg;
        let t = self.t as f64;
        let lr_t = T::of(c.lr * (1.0 - c.beta2.powf(t)).sqrt() / (1.0 - c.beta1.powf(t)));
        let (b1, b2, eps) = (T::of(c.beta1), T::of(c.beta2), T::of(c.eps));
        let (ob1, ob2) = (T::one() - b1, T::one() - b2);
        let mut slot = 0;
        for p in params.into_iter().filter(|p| p.trainable) {
            let (m, v) = match (self.m.get_mut(slot), self.v.get_mut(slot)) {
                (Some(m), Some(v)) if m.len() == p.len() => (m, v),
                _ => return Err(Error::invalid(alloc::format!("optimizer state does not match parameter `{}`", p.name))),
            };
            for (((w, &g), m), v) in p.value.iter_mut().zip(&p.grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + ob1 * g;
                *v = b2 * *v + ob2 * g * g;
                *w -= lr_t * *m / (v.sqrt() + eps);
            }
            slot += 1;
        }
        if slot != self.m.len() {
            return Err(Error::invalid("optimizer state covers more parameters than given"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first step is lr·sign(g) up to ε.
        let mut p = Param::<f64>::new("w", &[3], vec![1.0, 1.0, 1.0], true);
        p.grad = vec![0.5, -2.0, 1e-3];
        let frozen = Param::<f64>::new("f", &[1], vec![7.0], false);
        let mut adam = Adam::new(AdamConfig::default(), [&p, &frozen]);
        let mut frozen2 = frozen.clone();
        adam.step([&mut p, &mut frozen2]).unwrap();
        assert!((p.value[0] - (1.0 - 2e-4)).abs() < 1e-8);
        assert!((p.value[1] - (1.0 + 2e-4)).abs() < 1e-8);
        assert!((p.value[2] - (1.0 - 2e-4)).abs() < 1e-6);
        assert_eq!(frozen2.value, vec![7.0]);
    }

    #[test]
    fn matches_textbook_form() {
        // The folded step equals the textbook bias-corrected update once ε
        // is negligible.
        let cfg = AdamConfig {
            eps: 1e-30,
            ..Default::default()
        };
        let mut p = Param::<f64>::new("w", &[1], vec![0.0], true);
        let mut adam = Adam::new(cfg, [&p]);
        let (mut m, mut v, mut w) = (0.0f64, 0.0f64, 0.0f64);
        for t in 1..=20 {
            let g = (t as f64 * 0.7).sin();
            p.grad = vec![g];
            adam.step([&mut p]).unwrap();
            m = 0.5 * m + 0.5 * g;
            v = 0.999 * v + 0.001 * g * g;
            let mh = m / (1.0 - 0.5f64.powi(t));
            let vh = v / (1.0 - 0.999f64.powi(t));
            w -= 2e-4 * mh / vh.sqrt();
            assert!((p.value[0] - w).abs() < 1e-12);
        }
    }
}
