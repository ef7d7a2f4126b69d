use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use rand::Rng;

use crate::nn::Real;

/// A named parameter array with its accumulated gradient. Non-trainable
/// parameters (batch-norm moving statistics, frozen feature weights) carry an
/// empty gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub value: Vec<T>,
    pub grad: Vec<T>,
    pub trainable: bool,
}

impl<T: Real> Param<T> {
    pub fn new(name: impl Into<String>, shape: &[usize], value: Vec<T>, trainable: bool) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), value.len());
        let grad = if trainable { vec![T::zero(); value.len()] } else { Vec::new() };
        Self {
            name: name.into(),
            shape: shape.to_vec(),
            value,
            grad,
            trainable,
        }
    }

    pub fn constant(name: impl Into<String>, shape: &[usize], v: T, trainable: bool) -> Self {
        Self::new(name, shape, vec![v; shape.iter().product()], trainable)
    }

    /// Glorot-uniform kernel: limit `sqrt(6 / (fan_in + fan_out))` with the
    /// receptive field counted into both fans.
    pub fn glorot(name: impl Into<String>, shape: &[usize], fan_in: usize, fan_out: usize, rng: &mut impl Rng, trainable: bool) -> Self {
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let value = (0..shape.iter().product()).map(|_| T::of(rng.random_range(-limit..limit))).collect();
        Self::new(name, shape, value, trainable)
    }

    pub fn len(&self) -> usize {
        self.value.len()
    }

    pub fn is_empty(&self) -> bool {
        self.value.is_empty()
    }

    pub fn zero_grad(&mut self) {
        self.grad.iter_mut().for_each(|g| *g = T::zero());
    }

    /// Marks a parameter frozen or trainable, allocating or dropping its gradient.
    pub fn set_trainable(&mut self, trainable: bool) {
        self.trainable = trainable;
        self.grad = if trainable { vec![T::zero(); self.value.len()] } else { Vec::new() };
    }
}

/// Parameter totals of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCount {
    pub total: usize,
    pub trainable: usize,
    pub non_trainable: usize,
}

impl ParamCount {
    pub fn of<'a, T: Real>(params: impl IntoIterator<Item = &'a Param<T>>) -> Self {
        let (mut trainable, mut non_trainable) = (0, 0);
        for p in params {
            if p.trainable {
                trainable += p.len();
            } else {
                non_trainable += p.len();
            }
        }
        Self {
            total: trainable + non_trainable,
            trainable,
            non_trainable,
        }
    }
}
