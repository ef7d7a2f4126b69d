use alloc::format;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::{Act, Activation, Conv2d, MaxPool2, Mode, Network, Param, Real, Tensor};

/// Per-channel means subtracted by the Caffe-style VGG preprocessing.
pub const IMAGENET_BGR_MEAN: [f64; 3] = [103.939, 116.779, 123.68];

/// `(name, in, out)` of the VGG19 convolutions through `block3_conv3`.
const LAYERS: [(&str, usize, usize); 7] = [
    ("block1_conv1", 3, 64),
    ("block1_conv2", 64, 64),
    ("block2_conv1", 64, 128),
    ("block2_conv2", 128, 128),
    ("block3_conv1", 128, 256),
    ("block3_conv2", 256, 256),
    ("block3_conv3", 256, 256),
];

/// Pools follow these conv indices.
const POOL_AFTER: [usize; 2] = [1, 3];

#[derive(Debug, Clone)]
struct Stage<T> {
    conv: Conv2d<T>,
    act: Act<T>,
    pool: Option<MaxPool2>,
}

/// Frozen VGG19 prefix used as the perceptual feature map. Takes 3-channel
/// maps in `[-1, 1]`, re-expands them to `[0, 255]`, subtracts the ImageNet
/// means and returns 256 channels at a quarter of the input resolution.
#[derive(Debug, Clone)]
pub struct FeatureNet<T> {
    stages: Vec<Stage<T>>,
}

impl<T: Real> FeatureNet<T> {
    /// Glorot-initialized stand-in with fixed weights, for offline use.
    pub fn random(seed: u64) -> Self {
        let rng = &mut ChaCha8Rng::seed_from_u64(seed);
        let stages = LAYERS
            .iter()
            .enumerate()
            .map(|(i, &(name, cin, cout))| Stage {
                conv: Conv2d::new(name, (3, 3), cin, cout, 1, false, rng),
                act: Act::new(Activation::Relu),
                pool: POOL_AFTER.contains(&i).then(MaxPool2::new),
            })
            .collect();
        Self { stages }
    }

    /// Loads every parameter from `lookup(name) -> (shape, values)`, for
    /// example the entries of a converted Keras weight file
    /// (`block1_conv1.kernel` with shape `[3, 3, 3, 64]`, ...).
    pub fn from_named(mut lookup: impl FnMut(&str) -> Option<(Vec<usize>, Vec<T>)>) -> Result<Self> {
        let mut net = Self::random(0);
        for p in net.params_mut() {
            let (shape, values) = lookup(&p.name).ok_or_else(|| Error::invalid(format!("feature weights lack `{}`", p.name)))?;
            if shape != p.shape || values.len() != p.len() {
                return Err(Error::invalid(format!(
                    "feature weight `{}` has shape {:?}, expected {:?}",
                    p.name, shape, p.shape
                )));
            }
            p.value = values;
        }
        Ok(net)
    }

    /// Names and shapes of all parameters, in load order.
    pub fn param_specs() -> Vec<(alloc::string::String, Vec<usize>)> {
        Self::random(0).params().iter().map(|p| (p.name.clone(), p.shape.clone())).collect()
    }
}

impl<T: Real> Network<T> for FeatureNet<T> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        if x.channels() != 3 {
            return Err(Error::invalid(format!("feature net expects 3 channels, got {}", x.channels())));
        }
        if x.height() < 4 || x.width() < 4 {
            return Err(Error::invalid("feature net input must be at least 4x4"));
        }
        let half = T::of(127.5);
        let mean: Vec<T> = IMAGENET_BGR_MEAN.iter().map(|&m| T::of(m)).collect();
        let mut h = x.clone();
        for px in h.data_mut().chunks_exact_mut(3) {
            for (v, &m) in px.iter_mut().zip(&mean) {
                *v = (*v + T::one()) * half - m;
            }
        }
        for st in &mut self.stages {
            h = st.act.forward(st.conv.forward(&h, mode)?, mode);
            if let Some(pool) = &mut st.pool {
                h = pool.forward(&h, mode)?;
            }
        }
        Ok(h)
    }

    /// Weights are frozen: `param_grads` is ignored.
    fn backward(&mut self, dy: &Tensor<T>, _param_grads: bool) -> Result<Tensor<T>> {
        let mut d = dy.clone();
        for st in self.stages.iter_mut().rev() {
            if let Some(pool) = &mut st.pool {
                d = pool.backward(&d)?;
            }
            d = st.act.backward(d)?;
            d = st.conv.backward(&d, false)?;
        }
        d.scale(T::of(127.5));
        Ok(d)
    }

    fn params(&self) -> Vec<&Param<T>> {
        self.stages.iter().flat_map(|s| s.conv.params()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.stages.iter_mut().flat_map(|s| s.conv.params_mut()).collect()
    }
}
