use alloc::format;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Discriminator, DiscriminatorConfig, Generator, GeneratorConfig, Mode, Network, Real, Tensor};
use crate::train::losses::mse;
use crate::train::{adversarial_grads, adversarial_losses, content_feature_loss_grad, Adam, AdamConfig, LossWeights};

/// One mini-batch: images `N×H×W×C` in `[0, 1]` and target maps
/// `N×(H/s)×(W/s)×1` in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch<T> {
    pub images: Tensor<T>,
    pub maps: Tensor<T>,
}

/// Converts `[0, 1]` single-channel maps to the generator's `[-1, 1]`
/// range, replicated to `channels`.
pub fn map_to_target<T: Real>(maps: &Tensor<T>, channels: usize) -> Result<Tensor<T>> {
    let two = T::of(2.0);
    maps.map(|m| two * m - T::one()).repeat_channels(channels)
}

/// Everything that changes during training.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub generator: Generator<T>,
    pub discriminator: Discriminator<T>,
    pub opt_g: Adam<T>,
    pub opt_d: Adam<T>,
    pub step: u64,
    /// Batch-sampling stream, carried so a resumed run draws the same batches.
    pub rng: ChaCha8Rng,
}

impl<T: Real> TrainState<T> {
    /// Fresh state; generator, discriminator and sampling stream derive
    /// distinct seeds from `seed`.
    pub fn new(g: GeneratorConfig, d: DiscriminatorConfig, opt: AdamConfig, seed: u64) -> Result<Self> {
        opt.validate()?;
        let generator = Generator::new(g, seed)?;
        let discriminator = Discriminator::new(d, seed ^ 0x9e37_79b9_7f4a_7c15)?;
        Ok(Self {
            opt_g: Adam::new(opt, generator.params()),
            opt_d: Adam::new(opt, discriminator.params()),
            generator,
            discriminator,
            step: 0,
            rng: ChaCha8Rng::seed_from_u64(seed.wrapping_add(1)),
        })
    }
}

/// Logged loss components of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepLosses {
    pub step: u64,
    pub d_loss: f64,
    pub g_adv: f64,
    pub content: f64,
    pub feature: f64,
    /// Generator objective `q·content + r·feature + adv·g_adv`.
    pub g_total: f64,
}

fn check_batch<T: Real>(batch: &Batch<T>, g: &GeneratorConfig) -> Result<()> {
    let [n, h, w, c] = batch.images.shape();
    let [mn, mh, mw, mc] = batch.maps.shape();
    if n == 0 || c != g.in_channels || mc != 1 || mn != n || h != mh * g.stride || w != mw * g.stride {
        return Err(Error::invalid(format!(
            "batch images {:?} and maps {:?} do not fit a stride-{} generator with {} input channels",
            batch.images.shape(),
            batch.maps.shape(),
            g.stride,
            g.in_channels
        )));
    }
    Ok(())
}

fn non_finite(step: u64, what: &str, losses: &StepLosses) -> Error {
    Error::NonFinite {
        step,
        detail: format!(
            "{what}: d_loss={} g_adv={} content={} feature={}",
            losses.d_loss, losses.g_adv, losses.content, losses.feature
        ),
    }
}

/// One discriminator update on the detached generator output followed by
/// one generator update. On a non-finite loss the step aborts before the
/// affected weights change.
pub fn train_step<T: Real, F: Network<T>>(state: &mut TrainState<T>, batch: &Batch<T>, phi: &mut F, w: &LossWeights) -> Result<StepLosses> {
    w.validate()?;
    check_batch(batch, state.generator.config())?;
    let target = map_to_target(&batch.maps, state.generator.config().out_channels)?;
    let step = state.step + 1;
    let mut log = StepLosses {
        step,
        d_loss: 0.0,
        g_adv: 0.0,
        content: 0.0,
        feature: 0.0,
        g_total: 0.0,
    };

    let pred = state.generator.forward(&batch.images, Mode::Train)?;

    // Discriminator: real and fake halves each see their own batch statistics.
    let d = &mut state.discriminator;
    d.zero_grad();
    let real = d.forward(&target, Mode::Train)?;
    let (d_real, _, _) = adversarial_grads(real.data(), real.data());
    d.backward(&Tensor::from_vec(real.batch(), real.height(), real.width(), 1, d_real)?, true)?;
    let fake = d.forward(&pred, Mode::Train)?;
    let (_, d_fake, _) = adversarial_grads(real.data(), fake.data());
    d.backward(&Tensor::from_vec(fake.batch(), fake.height(), fake.width(), 1, d_fake)?, true)?;
    let adv = adversarial_losses(real.data(), fake.data())?;
    log.d_loss = adv.d_loss;
    log.g_adv = adv.g_adv;
    if !log.d_loss.is_finite() {
        return Err(non_finite(step, "discriminator loss", &log));
    }
    state.opt_d.step(d.params_mut())?;

    // Generator: content and feature terms, plus the adversarial term through
    // the updated discriminator (its weights and moving statistics untouched).
    let (cf, mut dpred) = content_feature_loss_grad(&pred, &target, phi, w)?;
    log.content = cf.content;
    log.feature = cf.feature;
    if w.adv > 0.0 {
        let scores = d.forward(&pred, Mode::BatchStats)?;
        let g_adv = adversarial_losses(scores.data(), scores.data())?.g_adv;
        log.g_adv = g_adv;
        let (_, _, mut ds) = adversarial_grads(scores.data(), scores.data());
        let a = T::of(w.adv);
        ds.iter_mut().for_each(|v| *v *= a);
        let ds = Tensor::from_vec(scores.batch(), scores.height(), scores.width(), 1, ds)?;
        dpred.add_assign(&d.backward(&ds, false)?);
    }
    log.g_total = cf.total + w.adv * log.g_adv;
    if !(log.g_total.is_finite() && dpred.all_finite()) {
        return Err(non_finite(step, "generator objective", &log));
    }
    let g = &mut state.generator;
    g.zero_grad();
    g.backward(&dpred, true)?;
    state.opt_g.step(g.params_mut())?;
    state.step = step;
    Ok(log)
}

/// Plain heat-map regression: one Adam step on `q·MSE` with no
/// discriminator or feature term. Returns the content loss before the update.
pub fn supervised_step<T: Real>(generator: &mut Generator<T>, opt: &mut Adam<T>, batch: &Batch<T>, q: f64) -> Result<f64> {
    check_batch(batch, generator.config())?;
    let target = map_to_target(&batch.maps, generator.config().out_channels)?;
    let pred = generator.forward(&batch.images, Mode::Train)?;
    let k = T::of(2.0 * q / pred.len() as f64);
    let mut grad = pred.clone();
    for (g, &t) in grad.data_mut().iter_mut().zip(target.data()) {
        *g = (*g - t) * k;
    }
    let content = mse(&pred, &target);
    if !content.is_finite() {
        return Err(Error::NonFinite {
            step: opt.t + 1,
            detail: format!("content loss {content}"),
        });
    }
    generator.zero_grad();
    generator.backward(&grad, true)?;
    opt.step(generator.params_mut())?;
    Ok(content)
}
