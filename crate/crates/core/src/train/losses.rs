use alloc::format;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::nn::{Mode, Network, Real, Tensor};

/// Scores are clamped to `[SCORE_CLAMP, 1 - SCORE_CLAMP]` before taking logs.
pub const SCORE_CLAMP: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    /// Pixel (content) term.
    pub q: f64,
    /// Feature term.
    pub r: f64,
    /// Adversarial term of the generator objective.
    pub adv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { q: 1.0, r: 0.001, adv: 0.001 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.q, self.r, self.adv].iter().all(|w| w.is_finite() && *w >= 0.0) {
            Ok(())
        } else {
            Err(Error::invalid("loss weights must be finite and >= 0"))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContentFeatureLoss {
    /// `q·content + r·feature`.
    pub total: f64,
    /// Mean squared pixel error.
    pub content: f64,
    /// Mean squared feature error; 0 when `r == 0` (not evaluated).
    pub feature: f64,
}

pub(crate) fn mse<T: Real>(a: &Tensor<T>, b: &Tensor<T>) -> f64 {
    let n = a.len().max(1) as f64;
    a.data().iter().zip(b.data()).map(|(x, y)| (x.f64() - y.f64()).powi(2)).sum::<f64>() / n
}

fn check_pair<T: Real>(pred: &Tensor<T>, target: &Tensor<T>) -> Result<()> {
    if !pred.same_shape(target) {
        return Err(Error::invalid(format!(
            "prediction shape {:?} differs from target {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    Ok(())
}

/// `q·MSE(pred, target) + r·MSE(φ(pred), φ(target))` on maps in `[-1, 1]`.
pub fn content_feature_loss<T: Real, F: Network<T>>(pred: &Tensor<T>, target: &Tensor<T>, phi: &mut F, w: &LossWeights) -> Result<ContentFeatureLoss> {
    check_pair(pred, target)?;
    let content = mse(pred, target);
    let feature = if w.r > 0.0 {
        let fp = phi.forward(pred, Mode::Infer)?;
        let ft = phi.forward(target, Mode::Infer)?;
        mse(&fp, &ft)
    } else {
        0.0
    };
    Ok(ContentFeatureLoss {
        total: w.q * content + w.r * feature,
        content,
        feature,
    })
}

/// The loss together with its gradient with respect to `pred`.
pub fn content_feature_loss_grad<T: Real, F: Network<T>>(
    pred: &Tensor<T>,
    target: &Tensor<T>,
    phi: &mut F,
    w: &LossWeights,
) -> Result<(ContentFeatureLoss, Tensor<T>)> {
    check_pair(pred, target)?;
    let content = mse(pred, target);
    let k = T::of(2.0 * w.q / pred.len().max(1) as f64);
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - t) * k;
    }
    let mut feature = 0.0;
    if w.r > 0.0 {
        let ft = phi.forward(target, Mode::Infer)?;
        let fp = phi.forward(pred, Mode::Train)?;
        feature = mse(&fp, &ft);
        let kf = T::of(2.0 * w.r / fp.len().max(1) as f64);
        let mut dfp = fp;
        for (g, &t) in dfp.data_mut().iter_mut().zip(ft.data()) {
            *g = (*g - t) * kf;
        }
        grad.add_assign(&phi.backward(&dfp, false)?);
    }
    Ok((
        ContentFeatureLoss {
            total: w.q * content + w.r * feature,
            content,
            feature,
        },
        grad,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdversarialLosses {
    /// `-mean log D(real) - mean log(1 - D(fake))`.
    pub d_loss: f64,
    /// Non-saturating generator loss `-mean log D(fake)`.
    pub g_adv: f64,
}

fn clamp_score(s: f64) -> f64 {
    s.clamp(SCORE_CLAMP, 1.0 - SCORE_CLAMP)
}

/// Binary cross-entropy losses over every batch element and score position.
pub fn adversarial_losses<T: Real>(d_real: &[T], d_fake: &[T]) -> Result<AdversarialLosses> {
    if d_real.is_empty() || d_fake.is_empty() {
        return Err(Error::invalid("adversarial losses need at least one score on each side"));
    }
    let mean = |s: &[T], f: fn(f64) -> f64| s.iter().map(|v| f(clamp_score(v.f64()))).sum::<f64>() / s.len() as f64;
    let real = mean(d_real, |s| -s.ln());
    let fake = mean(d_fake, |s| -(1.0 - s).ln());
    let g_adv = mean(d_fake, |s| -s.ln());
    Ok(AdversarialLosses { d_loss: real + fake, g_adv })
}

/// Gradients of the losses with respect to the scores:
/// `(∂d_loss/∂real, ∂d_loss/∂fake, ∂g_adv/∂fake)`. Clamped scores get zero
/// gradient.
pub fn adversarial_grads<T: Real>(d_real: &[T], d_fake: &[T]) -> (alloc::vec::Vec<T>, alloc::vec::Vec<T>, alloc::vec::Vec<T>) {
    let inside = |s: f64| (SCORE_CLAMP..=1.0 - SCORE_CLAMP).contains(&s);
    let nr = d_real.len().max(1) as f64;
    let nf = d_fake.len().max(1) as f64;
    let real = d_real
        .iter()
        .map(|v| v.f64())
        .map(|s| T::of(if inside(s) { -1.0 / (nr * s) } else { 0.0 }))
        .collect();
    let fake = d_fake
        .iter()
        .map(|v| v.f64())
        .map(|s| T::of(if inside(s) { 1.0 / (nf * (1.0 - s)) } else { 0.0 }))
        .collect();
    let gen = d_fake
        .iter()
        .map(|v| v.f64())
        .map(|s| T::of(if inside(s) { -1.0 / (nf * s) } else { 0.0 }))
        .collect();
    (real, fake, gen)
}
