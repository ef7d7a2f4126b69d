use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Act, Activation, BatchNorm, Conv2d, Mode, Network, Param, Real, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminatorConfig {
    pub in_channels: usize,
    pub first_channels: usize,
    /// `(channels, stride)` of every conv + leaky ReLU + batch-norm block.
    pub ladder: Vec<(usize, usize)>,
    pub kernel: usize,
    pub leaky_slope: f64,
    pub dense_units: usize,
}

impl Default for DiscriminatorConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            first_channels: 64,
            ladder: alloc::vec![(64, 2), (128, 1), (128, 2), (256, 1), (256, 2), (512, 1), (512, 2)],
            kernel: 3,
            leaky_slope: 0.2,
            dense_units: 1024,
        }
    }
}

impl DiscriminatorConfig {
    /// Total downsampling factor of the ladder.
    pub fn reduction(&self) -> usize {
        self.ladder.iter().map(|&(_, s)| s).product()
    }
}

#[derive(Debug, Clone)]
struct DiscBlock<T> {
    conv: Conv2d<T>,
    act: Act<T>,
    bn: BatchNorm<T>,
}

/// Map → per-position real/fake scores. Apart from the per-position dense
/// layers (1×1 convolutions) it is fully convolutional.
#[derive(Debug, Clone)]
pub struct Discriminator<T> {
    cfg: DiscriminatorConfig,
    first: Conv2d<T>,
    first_act: Act<T>,
    blocks: Vec<DiscBlock<T>>,
    dense1: Conv2d<T>,
    dense1_act: Act<T>,
    dense2: Conv2d<T>,
    out_act: Act<T>,
}

impl<T: Real> Discriminator<T> {
    pub fn new(cfg: DiscriminatorConfig, seed: u64) -> Result<Self> {
        if cfg.in_channels == 0 || cfg.first_channels == 0 || cfg.kernel == 0 || cfg.dense_units == 0 {
            return Err(Error::invalid("discriminator sizes must be >= 1"));
        }
        if cfg.ladder.iter().any(|&(c, s)| c == 0 || s == 0) {
            return Err(Error::invalid("discriminator ladder entries must be >= 1"));
        }
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let k = (cfg.kernel, cfg.kernel);
        let leaky = Activation::LeakyRelu(cfg.leaky_slope);
        let first = Conv2d::new("d.conv0", k, cfg.in_channels, cfg.first_channels, 1, true, rng);
        let mut cin = cfg.first_channels;
        let mut blocks = Vec::new();
        for (i, &(c, s)) in cfg.ladder.iter().enumerate() {
            blocks.push(DiscBlock {
                conv: Conv2d::new(&format!("d.conv{}", i + 1), k, cin, c, s, true, rng),
                act: Act::new(leaky),
                bn: BatchNorm::new(&format!("d.bn{}", i + 1), c),
            });
            cin = c;
        }
        let dense1 = Conv2d::new("d.dense1", (1, 1), cin, cfg.dense_units, 1, true, rng);
        let dense2 = Conv2d::new("d.dense2", (1, 1), cfg.dense_units, 1, 1, true, rng);
        Ok(Self {
            first,
            first_act: Act::new(leaky),
            blocks,
            dense1,
            dense1_act: Act::new(leaky),
            dense2,
            out_act: Act::new(Activation::Sigmoid),
            cfg,
        })
    }

    pub fn config(&self) -> &DiscriminatorConfig {
        &self.cfg
    }

    /// Smallest accepted input side: one output position per reduction cell.
    pub fn min_input(&self) -> usize {
        self.cfg.reduction()
    }
}

impl<T: Real> Network<T> for Discriminator<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let min = self.min_input();
        if x.height() < min || x.width() < min {
            return Err(Error::invalid(format!(
                "discriminator input {}x{} is smaller than {min}x{min}",
                x.width(),
                x.height()
            )));
        }
        let mut h = self.first_act.forward(self.first.forward(x, mode)?, mode);
        for b in &mut self.blocks {
            let r = b.act.forward(b.conv.forward(&h, mode)?, mode);
            h = b.bn.forward(&r, mode)?;
        }
        let h = self.dense1_act.forward(self.dense1.forward(&h, mode)?, mode);
        Ok(self.out_act.forward(self.dense2.forward(&h, mode)?, mode))
    }

    fn backward(&mut self, dy: &Tensor<T>, param_grads: bool) -> Result<Tensor<T>> {
        let d = self.out_act.backward(dy.clone())?;
        let d = self.dense2.backward(&d, param_grads)?;
        let d = self.dense1_act.backward(d)?;
        let mut d = self.dense1.backward(&d, param_grads)?;
        for b in self.blocks.iter_mut().rev() {
            let r = b.bn.backward(&d, param_grads)?;
            let r = b.act.backward(r)?;
            d = b.conv.backward(&r, param_grads)?;
        }
        let d = self.first_act.backward(d)?;
        self.first.backward(&d, param_grads)
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut v: Vec<&Param<T>> = self.first.params().into();
        for b in &self.blocks {
            v.extend(b.conv.params());
            v.extend(b.bn.params());
        }
        v.extend(self.dense1.params());
        v.extend(self.dense2.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v: Vec<&mut Param<T>> = self.first.params_mut().into();
        for b in &mut self.blocks {
            v.extend(b.conv.params_mut());
            v.extend(b.bn.params_mut());
        }
        v.extend(self.dense1.params_mut());
        v.extend(self.dense2.params_mut());
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_parameter_count() {
        let d = Discriminator::<f32>::new(DiscriminatorConfig::default(), 0).unwrap();
        assert_eq!(d.param_count().total, 5_219_137);
        assert_eq!(d.first.kernel.len() + d.first.bias.len(), 1_792);
    }

    #[test]
    fn output_shapes_and_range() {
        let mut d = Discriminator::<f32>::new(DiscriminatorConfig::default(), 0).unwrap();
        let x = Tensor::filled(1, 64, 64, 3, 0.3f32);
        let y = d.forward(&x, Mode::Infer).unwrap();
        assert_eq!(y.shape(), [1, 4, 4, 1]);
        assert!(y.data().iter().all(|&v| v > 0.0 && v < 1.0));
        let y = d.forward(&Tensor::filled(2, 32, 32, 3, -0.5f32), Mode::Infer).unwrap();
        assert_eq!(y.shape(), [2, 2, 2, 1]);
        assert_eq!(d.forward(&Tensor::filled(1, 16, 16, 3, 0.0f32), Mode::Infer).unwrap().shape(), [1, 1, 1, 1]);
        assert!(d.forward(&Tensor::filled(1, 15, 32, 3, 0.0f32), Mode::Infer).is_err());
    }
}
