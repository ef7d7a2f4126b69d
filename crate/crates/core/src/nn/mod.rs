//! A small NHWC network engine with hand-written backward passes, and the
//! three networks built on it: the map generator, the map discriminator and
//! the frozen VGG19 feature prefix.

mod discriminator;
mod feature;
mod generator;
mod layers;
mod param;
mod real;
mod tensor;

use alloc::vec::Vec;

pub use discriminator::{Discriminator, DiscriminatorConfig};
pub use feature::{FeatureNet, IMAGENET_BGR_MEAN};
pub use generator::{Generator, GeneratorConfig};
pub use layers::{same_padding, Act, Activation, BatchNorm, Conv2d, MaxPool2};
pub use param::{Param, ParamCount};
pub use real::Real;
pub use tensor::Tensor;

use crate::error::Result;

/// How a forward pass treats batch normalization and caching.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics, moving statistics updated, activations cached.
    Train,
    /// Batch statistics without touching the moving statistics; cached.
    BatchStats,
    /// Moving statistics, nothing cached.
    Infer,
}

impl Mode {
    pub fn caches(self) -> bool {
        self != Mode::Infer
    }

    pub fn batch_stats(self) -> bool {
        self != Mode::Infer
    }
}

/// Common interface of the built networks.
pub trait Network<T: Real> {
    fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>>;

    /// Backpropagates through the last caching forward pass. Parameter
    /// gradients accumulate only when `param_grads` is set; the returned
    /// tensor is the gradient with respect to the input.
    fn backward(&mut self, dy: &Tensor<T>, param_grads: bool) -> Result<Tensor<T>>;

    fn params(&self) -> Vec<&Param<T>>;

    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn param_count(&self) -> ParamCount {
        ParamCount::of(self.params())
    }

    fn zero_grad(&mut self) {
        self.params_mut().into_iter().for_each(|p| p.zero_grad());
    }
}
