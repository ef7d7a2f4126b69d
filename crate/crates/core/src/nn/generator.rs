use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Act, Activation, BatchNorm, Conv2d, Mode, Network, Param, Real, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub in_channels: usize,
    pub base_channels: usize,
    pub num_res_blocks: usize,
    pub head_kernel: usize,
    pub block_kernel: usize,
    /// Stride of the expansion convolution; output maps are `1/stride` of the input.
    pub stride: usize,
    pub expand_channels: usize,
    pub out_channels: usize,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            in_channels: 3,
            base_channels: 64,
            num_res_blocks: 16,
            head_kernel: 9,
            block_kernel: 3,
            stride: 4,
            expand_channels: 256,
            out_channels: 3,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.in_channels,
            self.base_channels,
            self.head_kernel,
            self.block_kernel,
            self.stride,
            self.expand_channels,
            self.out_channels,
        ];
        if positive.contains(&0) || self.num_res_blocks == 0 {
            return Err(Error::invalid("generator sizes, stride and block count must all be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct ResBlock<T> {
    conv1: Conv2d<T>,
    act: Act<T>,
    bn1: BatchNorm<T>,
    conv2: Conv2d<T>,
    bn2: BatchNorm<T>,
}

/// Image → map network: a residual trunk at full resolution, a strided
/// expansion and a tanh output head.
#[derive(Debug, Clone)]
pub struct Generator<T> {
    cfg: GeneratorConfig,
    head: Conv2d<T>,
    head_act: Act<T>,
    blocks: Vec<ResBlock<T>>,
    tail_conv: Conv2d<T>,
    tail_bn: BatchNorm<T>,
    expand: Conv2d<T>,
    expand_act: Act<T>,
    out_conv: Conv2d<T>,
    out_act: Act<T>,
}

impl<T: Real> Generator<T> {
    /// Glorot-initialized generator; weights are a pure function of the seed.
    pub fn new(cfg: GeneratorConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let c = cfg.base_channels;
        let hk = (cfg.head_kernel, cfg.head_kernel);
        let bk = (cfg.block_kernel, cfg.block_kernel);
        let mut head = Conv2d::new("head", hk, cfg.in_channels, c, 1, true, rng);
        head.input_grad = false;
        let blocks = (0..cfg.num_res_blocks)
            .map(|i| ResBlock {
                conv1: Conv2d::new(&format!("block{i}.conv1"), bk, c, c, 1, true, rng),
                act: Act::new(Activation::Relu),
                bn1: BatchNorm::new(&format!("block{i}.bn1"), c),
                conv2: Conv2d::new(&format!("block{i}.conv2"), bk, c, c, 1, true, rng),
                bn2: BatchNorm::new(&format!("block{i}.bn2"), c),
            })
            .collect();
        Ok(Self {
            cfg,
            head,
            head_act: Act::new(Activation::Relu),
            blocks,
            tail_conv: Conv2d::new("tail.conv", bk, c, c, 1, true, rng),
            tail_bn: BatchNorm::new("tail.bn", c),
            expand: Conv2d::new("expand", bk, c, cfg.expand_channels, cfg.stride, true, rng),
            expand_act: Act::new(Activation::Relu),
            out_conv: Conv2d::new("out", hk, cfg.expand_channels, cfg.out_channels, 1, true, rng),
            out_act: Act::new(Activation::Tanh),
        })
    }

    pub fn config(&self) -> &GeneratorConfig {
        &self.cfg
    }

    /// Whether `backward` also computes the gradient with respect to the
    /// input image (off by default; only gradient checks need it).
    pub fn set_input_grad(&mut self, on: bool) {
        self.head.input_grad = on;
    }
}

impl<T: Real> Network<T> for Generator<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let s = self.cfg.stride;
        if x.height() % s != 0 || x.width() % s != 0 {
            return Err(Error::invalid(format!(
                "generator input {}x{} is not a multiple of the stride {s}",
                x.width(),
                x.height()
            )));
        }
        let skip = self.head_act.forward(self.head.forward(x, mode)?, mode);
        let mut h = skip.clone();
        for b in &mut self.blocks {
            let r = b.conv1.forward(&h, mode)?;
            let r = b.act.forward(r, mode);
            let r = b.bn1.forward(&r, mode)?;
            let r = b.conv2.forward(&r, mode)?;
            let r = b.bn2.forward(&r, mode)?;
            h.add_assign(&r);
        }
        let mut t = self.tail_bn.forward(&self.tail_conv.forward(&h, mode)?, mode)?;
        t.add_assign(&skip);
        let e = self.expand_act.forward(self.expand.forward(&t, mode)?, mode);
        Ok(self.out_act.forward(self.out_conv.forward(&e, mode)?, mode))
    }

    /// The returned input gradient is empty unless enabled with
    /// [`Generator::set_input_grad`].
    fn backward(&mut self, dy: &Tensor<T>, param_grads: bool) -> Result<Tensor<T>> {
        let d = self.out_act.backward(dy.clone())?;
        let d = self.out_conv.backward(&d, param_grads)?;
        let d = self.expand_act.backward(d)?;
        let dt = self.expand.backward(&d, param_grads)?;
        let mut dskip = dt.clone();
        let d = self.tail_bn.backward(&dt, param_grads)?;
        let mut dh = self.tail_conv.backward(&d, param_grads)?;
        for b in self.blocks.iter_mut().rev() {
            let d = b.bn2.backward(&dh, param_grads)?;
            let d = b.conv2.backward(&d, param_grads)?;
            let d = b.bn1.backward(&d, param_grads)?;
            let d = b.act.backward(d)?;
            let d = b.conv1.backward(&d, param_grads)?;
            dh.add_assign(&d);
        }
        dskip.add_assign(&dh);
        let d = self.head_act.backward(dskip)?;
        self.head.backward(&d, param_grads)
    }

    fn params(&self) -> Vec<&Param<T>> {
        let mut v: Vec<&Param<T>> = self.head.params().into();
        for b in &self.blocks {
            v.extend(b.conv1.params());
            v.extend(b.bn1.params());
            v.extend(b.conv2.params());
            v.extend(b.bn2.params());
        }
        v.extend(self.tail_conv.params());
        v.extend(self.tail_bn.params());
        v.extend(self.expand.params());
        v.extend(self.out_conv.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v: Vec<&mut Param<T>> = self.head.params_mut().into();
        for b in &mut self.blocks {
            v.extend(b.conv1.params_mut());
            v.extend(b.bn1.params_mut());
            v.extend(b.conv2.params_mut());
            v.extend(b.bn2.params_mut());
        }
        v.extend(self.tail_conv.params_mut());
        v.extend(self.tail_bn.params_mut());
        v.extend(self.expand.params_mut());
        v.extend(self.out_conv.params_mut());
        v
    }
}
