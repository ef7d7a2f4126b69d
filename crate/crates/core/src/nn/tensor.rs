use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::nn::Real;

/// Dense batch of feature maps in NHWC order.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<T> {
    n: usize,
    h: usize,
    w: usize,
    c: usize,
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(n: usize, h: usize, w: usize, c: usize) -> Self {
        Self::filled(n, h, w, c, T::zero())
    }

    pub fn filled(n: usize, h: usize, w: usize, c: usize, v: T) -> Self {
        Self {
            n,
            h,
            w,
            c,
            data: vec![v; n * h * w * c],
        }
    }

    pub fn from_vec(n: usize, h: usize, w: usize, c: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != n * h * w * c {
            return Err(Error::invalid(alloc::format!(
                "tensor data has {} values, shape {n}x{h}x{w}x{c} needs {}",
                data.len(),
                n * h * w * c
            )));
        }
        Ok(Self { n, h, w, c, data })
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.n, self.h, self.w, self.c]
    }

    pub fn batch(&self) -> usize {
        self.n
    }

    pub fn height(&self) -> usize {
        self.h
    }

    pub fn width(&self) -> usize {
        self.w
    }

    pub fn channels(&self) -> usize {
        self.c
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index(&self, b: usize, y: usize, x: usize, ch: usize) -> usize {
        ((b * self.h + y) * self.w + x) * self.c + ch
    }

    pub fn get(&self, b: usize, y: usize, x: usize, ch: usize) -> T {
        self.data[self.index(b, y, x, ch)]
    }

    pub fn set(&mut self, b: usize, y: usize, x: usize, ch: usize, v: T) {
        let i = self.index(b, y, x, ch);
        self.data[i] = v;
    }

    /// One batch element as its own tensor.
    pub fn item(&self, b: usize) -> Self {
        let sz = self.h * self.w * self.c;
        Self {
            n: 1,
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data[b * sz..(b + 1) * sz].to_vec(),
        }
    }

    /// Stacks equally shaped single or multi-item tensors along the batch axis.
    pub fn stack(items: &[Self]) -> Result<Self> {
        let first = items.first().ok_or_else(|| Error::invalid("cannot stack zero tensors"))?;
        let mut data = Vec::with_capacity(items.iter().map(|t| t.len()).sum());
        let mut n = 0;
        for t in items {
            if (t.h, t.w, t.c) != (first.h, first.w, first.c) {
                return Err(Error::invalid("stacked tensors differ in shape"));
            }
            n += t.n;
            data.extend_from_slice(&t.data);
        }
        Ok(Self {
            n,
            h: first.h,
            w: first.w,
            c: first.c,
            data,
        })
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.shape() == other.shape()
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            n: self.n,
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert!(self.same_shape(other), "tensor shape mismatch in add");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&mut self, s: T) {
        for v in &mut self.data {
            *v *= s;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Mean over channels, giving a single-channel tensor.
    pub fn channel_mean(&self) -> Self {
        let inv = T::one() / T::of(self.c as f64);
        let data = self.data.chunks_exact(self.c.max(1)).map(|px| px.iter().copied().sum::<T>() * inv).collect();
        Self {
            n: self.n,
            h: self.h,
            w: self.w,
            c: 1,
            data,
        }
    }

    /// Replicates a single-channel tensor `c` times along the channel axis.
    pub fn repeat_channels(&self, c: usize) -> Result<Self> {
        if self.c != 1 {
            return Err(Error::invalid("repeat_channels needs a single-channel tensor"));
        }
        let data = self.data.iter().flat_map(|&v| core::iter::repeat_n(v, c)).collect();
        Ok(Self {
            n: self.n,
            h: self.h,
            w: self.w,
            c,
            data,
        })
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            n: self.n,
            h: self.h,
            w: self.w,
            c: self.c,
            data: self.data.iter().map(|v| U::of(v.f64())).collect(),
        }
    }
}
