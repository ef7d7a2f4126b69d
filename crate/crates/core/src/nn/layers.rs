//! Layer building blocks. Every layer caches what its backward pass needs
//! when run in a caching mode; gradients of parameters accumulate.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

#[cfg(not(feature = "std"))]
use num_traits::Float;

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::real::{gemm, MatRef};
use crate::nn::{Mode, Param, Real, Tensor};

/// Upper bound on im2col scratch, in elements.
const COL_BUDGET: usize = 1 << 21;

/// Output size and leading pad of "same" padding: `ceil(n / s)` outputs,
/// with any odd padding element placed after the input.
pub fn same_padding(n: usize, k: usize, s: usize) -> (usize, usize) {
    let out = n.div_ceil(s);
    let total = ((out.saturating_sub(1)) * s + k).saturating_sub(n);
    (out, total / 2)
}

fn missing_cache(layer: &str) -> Error {
    Error::invalid(format!("{layer}: backward called without a caching forward pass"))
}

#[derive(Debug, Clone, Copy)]
struct ConvGeom {
    h: usize,
    w: usize,
    cin: usize,
    kh: usize,
    kw: usize,
    s: usize,
    oh: usize,
    ow: usize,
    pt: usize,
    pl: usize,
}

impl ConvGeom {
    fn k(&self) -> usize {
        self.kh * self.kw * self.cin
    }

    fn pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.s == 1
    }

    /// Output rows per im2col chunk.
    fn chunk_rows(&self) -> usize {
        (COL_BUDGET / (self.ow * self.k()).max(1)).clamp(1, self.oh)
    }

    /// Gathers receptive fields of output rows `oy0..oy1` of image `img`
    /// (an `h*w*cin` slice) into `col`, one output pixel per row.
    fn im2col<T: Real>(&self, img: &[T], oy0: usize, oy1: usize, col: &mut [T]) {
        let k = self.k();
        let rowlen = self.kw * self.cin;
        for oy in oy0..oy1 {
            for ox in 0..self.ow {
                let row = &mut col[((oy - oy0) * self.ow + ox) * k..][..k];
                for ky in 0..self.kh {
                    let dst = &mut row[ky * rowlen..][..rowlen];
                    let iy = (oy * self.s + ky) as isize - self.pt as isize;
                    if iy < 0 || iy >= self.h as isize {
                        dst.fill(T::zero());
                        continue;
                    }
                    let src_row = &img[iy as usize * self.w * self.cin..][..self.w * self.cin];
                    for kx in 0..self.kw {
                        let ix = (ox * self.s + kx) as isize - self.pl as isize;
                        let d = &mut dst[kx * self.cin..][..self.cin];
                        if ix < 0 || ix >= self.w as isize {
                            d.fill(T::zero());
                        } else {
                            d.copy_from_slice(&src_row[ix as usize * self.cin..][..self.cin]);
                        }
                    }
                }
            }
        }
    }

    /// Adjoint of `im2col`: scatter-adds `col` back into the image gradient.
    fn col2im<T: Real>(&self, col: &[T], oy0: usize, oy1: usize, img: &mut [T]) {
        let k = self.k();
        let rowlen = self.kw * self.cin;
        for oy in oy0..oy1 {
            for ox in 0..self.ow {
                let row = &col[((oy - oy0) * self.ow + ox) * k..][..k];
                for ky in 0..self.kh {
                    let iy = (oy * self.s + ky) as isize - self.pt as isize;
                    if iy < 0 || iy >= self.h as isize {
                        continue;
                    }
                    let src = &row[ky * rowlen..][..rowlen];
                    let dst_row = &mut img[iy as usize * self.w * self.cin..][..self.w * self.cin];
                    for kx in 0..self.kw {
                        let ix = (ox * self.s + kx) as isize - self.pl as isize;
                        if ix < 0 || ix >= self.w as isize {
                            continue;
                        }
                        let d = &mut dst_row[ix as usize * self.cin..][..self.cin];
                        for (a, &b) in d.iter_mut().zip(&src[kx * self.cin..][..self.cin]) {
                            *a += b;
                        }
                    }
                }
            }
        }
    }
}

/// 2-D convolution with "same" padding. Kernel layout is
/// `[kh, kw, cin, cout]`.
#[derive(Debug, Clone)]
pub struct Conv2d<T> {
    pub kernel: Param<T>,
    pub bias: Param<T>,
    pub stride: usize,
    /// Skip the input gradient when nothing upstream needs it.
    pub input_grad: bool,
    cache: Option<Tensor<T>>,
}

impl<T: Real> Conv2d<T> {
    pub fn new(name: &str, k: (usize, usize), cin: usize, cout: usize, stride: usize, trainable: bool, rng: &mut impl Rng) -> Self {
        let (kh, kw) = k;
        let field = kh * kw;
        Self {
            kernel: Param::glorot(format!("{name}.kernel"), &[kh, kw, cin, cout], field * cin, field * cout, rng, trainable),
            bias: Param::constant(format!("{name}.bias"), &[cout], T::zero(), trainable),
            stride,
            input_grad: true,
            cache: None,
        }
    }

    pub fn kernel_size(&self) -> (usize, usize) {
        (self.kernel.shape[0], self.kernel.shape[1])
    }

    pub fn in_channels(&self) -> usize {
        self.kernel.shape[2]
    }

    pub fn out_channels(&self) -> usize {
        self.kernel.shape[3]
    }

    pub fn params(&self) -> [&Param<T>; 2] {
        [&self.kernel, &self.bias]
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 2] {
        [&mut self.kernel, &mut self.bias]
    }

    fn geom(&self, x: &Tensor<T>) -> Result<ConvGeom> {
        let (kh, kw) = self.kernel_size();
        if x.channels() != self.in_channels() {
            return Err(Error::invalid(format!(
                "{}: expected {} input channels, got {}",
                self.kernel.name,
                self.in_channels(),
                x.channels()
            )));
        }
        if x.height() == 0 || x.width() == 0 {
            return Err(Error::invalid(format!("{}: empty spatial input", self.kernel.name)));
        }
        let (oh, pt) = same_padding(x.height(), kh, self.stride);
        let (ow, pl) = same_padding(x.width(), kw, self.stride);
        Ok(ConvGeom {
            h: x.height(),
            w: x.width(),
            cin: x.channels(),
            kh,
            kw,
            s: self.stride,
            oh,
            ow,
            pt,
            pl,
        })
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let g = self.geom(x)?;
        let cout = self.out_channels();
        let n = x.batch();
        let mut out = Tensor::zeros(n, g.oh, g.ow, cout);
        for px in out.data_mut().chunks_exact_mut(cout) {
            px.copy_from_slice(&self.bias.value);
        }
        let k = g.k();
        let w = MatRef::new(&self.kernel.value, cout);
        if g.pointwise() {
            let rows = n * g.h * g.w;
            gemm(rows, k, cout, T::one(), MatRef::new(x.data(), k), w, T::one(), out.data_mut(), cout);
        } else {
            let img_len = g.h * g.w * g.cin;
            let out_len = g.oh * g.ow * cout;
            let chunk = g.chunk_rows();
            let mut col = vec![T::zero(); chunk * g.ow * k];
            for b in 0..n {
                let img = &x.data()[b * img_len..][..img_len];
                let mut oy0 = 0;
                while oy0 < g.oh {
                    let oy1 = (oy0 + chunk).min(g.oh);
                    let p = (oy1 - oy0) * g.ow;
                    g.im2col(img, oy0, oy1, &mut col);
                    let dst = &mut out.data_mut()[b * out_len + oy0 * g.ow * cout..][..p * cout];
                    gemm(p, k, cout, T::one(), MatRef::new(&col, k), w, T::one(), dst, cout);
                    oy0 = oy1;
                }
            }
        }
        self.cache = mode.caches().then(|| x.clone());
        Ok(out)
    }

    /// Accumulates parameter gradients when `param_grads` is set and returns
    /// the input gradient (empty when `input_grad` is off).
    pub fn backward(&mut self, dy: &Tensor<T>, param_grads: bool) -> Result<Tensor<T>> {
        let x = self.cache.take().ok_or_else(|| missing_cache(&self.kernel.name))?;
        let g = self.geom(&x)?;
        let cout = self.out_channels();
        if dy.shape() != [x.batch(), g.oh, g.ow, cout] {
            return Err(Error::invalid(format!("{}: output gradient shape mismatch", self.kernel.name)));
        }
        let param_grads = param_grads && self.kernel.trainable;
        if param_grads {
            for px in dy.data().chunks_exact(cout) {
                for (gb, &d) in self.bias.grad.iter_mut().zip(px) {
                    *gb += d;
                }
            }
        }
        if !param_grads && !self.input_grad {
            return Ok(Tensor::zeros(0, 0, 0, 0));
        }
        let n = x.batch();
        let k = g.k();
        let mut dx = if self.input_grad {
            Tensor::zeros(n, g.h, g.w, g.cin)
        } else {
            Tensor::zeros(0, 0, 0, 0)
        };
        if g.pointwise() {
            let rows = n * g.h * g.w;
            if param_grads {
                gemm(
                    k,
                    rows,
                    cout,
                    T::one(),
                    MatRef::t(x.data(), k),
                    MatRef::new(dy.data(), cout),
                    T::one(),
                    &mut self.kernel.grad,
                    cout,
                );
            }
            if self.input_grad {
                gemm(
                    rows,
                    cout,
                    k,
                    T::one(),
                    MatRef::new(dy.data(), cout),
                    MatRef::t(&self.kernel.value, cout),
                    T::zero(),
                    dx.data_mut(),
                    k,
                );
            }
        } else {
            let img_len = g.h * g.w * g.cin;
            let out_len = g.oh * g.ow * cout;
            let chunk = g.chunk_rows();
            let mut col = vec![T::zero(); chunk * g.ow * k];
            for b in 0..n {
                let img = &x.data()[b * img_len..][..img_len];
                let mut oy0 = 0;
                while oy0 < g.oh {
                    let oy1 = (oy0 + chunk).min(g.oh);
                    let p = (oy1 - oy0) * g.ow;
                    let dyc = &dy.data()[b * out_len + oy0 * g.ow * cout..][..p * cout];
                    if param_grads {
                        g.im2col(img, oy0, oy1, &mut col);
                        gemm(
                            k,
                            p,
                            cout,
                            T::one(),
                            MatRef::t(&col, k),
                            MatRef::new(dyc, cout),
                            T::one(),
                            &mut self.kernel.grad,
                            cout,
                        );
                    }
                    if self.input_grad {
                        gemm(
                            p,
                            cout,
                            k,
                            T::one(),
                            MatRef::new(dyc, cout),
                            MatRef::t(&self.kernel.value, cout),
                            T::zero(),
                            &mut col,
                            k,
                        );
                        g.col2im(&col, oy0, oy1, &mut dx.data_mut()[b * img_len..][..img_len]);
                    }
                    oy0 = oy1;
                }
            }
        }
        Ok(dx)
    }
}

/// Batch normalization over N, H, W per channel with Keras defaults
/// (momentum 0.99, epsilon 1e-3).
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub gamma: Param<T>,
    pub beta: Param<T>,
    pub moving_mean: Param<T>,
    pub moving_var: Param<T>,
    pub momentum: f64,
    pub eps: f64,
    cache: Option<BnCache<T>>,
}

#[derive(Debug, Clone)]
struct BnCache<T> {
    xhat: Vec<T>,
    inv_std: Vec<T>,
    batch_stats: bool,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(name: &str, c: usize) -> Self {
        Self {
            gamma: Param::constant(format!("{name}.gamma"), &[c], T::one(), true),
            beta: Param::constant(format!("{name}.beta"), &[c], T::zero(), true),
            moving_mean: Param::constant(format!("{name}.moving_mean"), &[c], T::zero(), false),
            moving_var: Param::constant(format!("{name}.moving_variance"), &[c], T::one(), false),
            momentum: 0.99,
            eps: 1e-3,
            cache: None,
        }
    }

    pub fn params(&self) -> [&Param<T>; 4] {
        [&self.gamma, &self.beta, &self.moving_mean, &self.moving_var]
    }

    pub fn params_mut(&mut self) -> [&mut Param<T>; 4] {
        [&mut self.gamma, &mut self.beta, &mut self.moving_mean, &mut self.moving_var]
    }

    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let c = self.gamma.len();
        if x.channels() != c {
            return Err(Error::invalid(format!("{}: expected {c} channels, got {}", self.gamma.name, x.channels())));
        }
        let m = x.len() / c;
        let (mean, var): (Vec<f64>, Vec<f64>) = if mode.batch_stats() {
            if m == 0 {
                return Err(Error::invalid(format!("{}: empty batch", self.gamma.name)));
            }
            let mut sum = vec![0.0f64; c];
            for px in x.data().chunks_exact(c) {
                for (s, v) in sum.iter_mut().zip(px) {
                    *s += v.f64();
                }
            }
            let mean: Vec<f64> = sum.iter().map(|s| s / m as f64).collect();
            let mut sq = vec![0.0f64; c];
            for px in x.data().chunks_exact(c) {
                for ((s, v), mu) in sq.iter_mut().zip(px).zip(&mean) {
                    let d = v.f64() - mu;
                    *s += d * d;
                }
            }
            (mean, sq.iter().map(|s| s / m as f64).collect())
        } else {
            (
                self.moving_mean.value.iter().map(|v| v.f64()).collect(),
                self.moving_var.value.iter().map(|v| v.f64()).collect(),
            )
        };
        if mode == Mode::Train {
            let mo = self.momentum;
            for ch in 0..c {
                let mm = &mut self.moving_mean.value[ch];
                *mm = T::of(mm.f64() * mo + mean[ch] * (1.0 - mo));
                let mv = &mut self.moving_var.value[ch];
                *mv = T::of(mv.f64() * mo + var[ch] * (1.0 - mo));
            }
        }
        let inv_std: Vec<T> = var.iter().map(|v| T::of(1.0 / (v + self.eps).sqrt())).collect();
        let mean_t: Vec<T> = mean.iter().map(|&v| T::of(v)).collect();
        let mut out = Tensor::zeros(x.batch(), x.height(), x.width(), c);
        let mut xhat = if mode.caches() { vec![T::zero(); x.len()] } else { Vec::new() };
        for (i, (o, px)) in out.data_mut().chunks_exact_mut(c).zip(x.data().chunks_exact(c)).enumerate() {
            for ch in 0..c {
                let h = (px[ch] - mean_t[ch]) * inv_std[ch];
                if mode.caches() {
                    xhat[i * c + ch] = h;
                }
                o[ch] = h * self.gamma.value[ch] + self.beta.value[ch];
            }
        }
        self.cache = mode.caches().then_some(BnCache {
            xhat,
            inv_std,
            batch_stats: mode.batch_stats(),
        });
        Ok(out)
    }

    pub fn backward(&mut self, dy: &Tensor<T>, param_grads: bool) -> Result<Tensor<T>> {
        let cache = self.cache.take().ok_or_else(|| missing_cache(&self.gamma.name))?;
        let c = self.gamma.len();
        if dy.len() != cache.xhat.len() {
            return Err(Error::invalid(format!("{}: output gradient shape mismatch", self.gamma.name)));
        }
        let m = dy.len() / c;
        let mut sum_dy = vec![T::zero(); c];
        let mut sum_dy_xhat = vec![T::zero(); c];
        for (d, h) in dy.data().chunks_exact(c).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                sum_dy[ch] += d[ch];
                sum_dy_xhat[ch] += d[ch] * h[ch];
            }
        }
        if param_grads && self.gamma.trainable {
            for ch in 0..c {
                self.gamma.grad[ch] += sum_dy_xhat[ch];
                self.beta.grad[ch] += sum_dy[ch];
            }
        }
        let mut dx = Tensor::zeros(dy.batch(), dy.height(), dy.width(), c);
        let inv_m = T::one() / T::of(m as f64);
        for ((o, d), h) in dx.data_mut().chunks_exact_mut(c).zip(dy.data().chunks_exact(c)).zip(cache.xhat.chunks_exact(c)) {
            for ch in 0..c {
                let scale = self.gamma.value[ch] * cache.inv_std[ch];
                o[ch] = if cache.batch_stats {
                    scale * (d[ch] - sum_dy[ch] * inv_m - h[ch] * sum_dy_xhat[ch] * inv_m)
                } else {
                    scale * d[ch]
                };
            }
        }
        Ok(dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Activation {
    Relu,
    LeakyRelu(f64),
    Tanh,
    Sigmoid,
}

/// Parameter-free activation layer; caches its output.
#[derive(Debug, Clone)]
pub struct Act<T> {
    pub kind: Activation,
    cache: Option<Tensor<T>>,
}

impl<T: Real> Act<T> {
    pub fn new(kind: Activation) -> Self {
        Self { kind, cache: None }
    }

    pub fn apply(kind: Activation, v: T) -> T {
        match kind {
            Activation::Relu => v.max(T::zero()),
            Activation::LeakyRelu(a) => {
                if v > T::zero() {
                    v
                } else {
                    v * T::of(a)
                }
            }
            Activation::Tanh => v.tanh(),
            Activation::Sigmoid => T::one() / (T::one() + (-v).exp()),
        }
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode) -> Tensor<T> {
        let mut y = x;
        let kind = self.kind;
        y.data_mut().iter_mut().for_each(|v| *v = Self::apply(kind, *v));
        self.cache = mode.caches().then(|| y.clone());
        y
    }

    pub fn backward(&mut self, dy: Tensor<T>) -> Result<Tensor<T>> {
        let y = self.cache.take().ok_or_else(|| missing_cache("activation"))?;
        if !dy.same_shape(&y) {
            return Err(Error::invalid("activation: output gradient shape mismatch"));
        }
        let mut dx = dy;
        for (d, &o) in dx.data_mut().iter_mut().zip(y.data()) {
            let local = match self.kind {
                Activation::Relu => {
                    if o > T::zero() {
                        T::one()
                    } else {
                        T::zero()
                    }
                }
                Activation::LeakyRelu(a) => {
                    if o > T::zero() {
                        T::one()
                    } else {
                        T::of(a)
                    }
                }
                Activation::Tanh => T::one() - o * o,
                Activation::Sigmoid => o * (T::one() - o),
            };
            *d *= local;
        }
        Ok(dx)
    }
}

/// 2×2 max pooling with stride 2, dropping an odd trailing row/column.
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    cache: Option<(Vec<u32>, [usize; 4])>,
}

impl MaxPool2 {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn forward<T: Real>(&mut self, x: &Tensor<T>, mode: Mode) -> Result<Tensor<T>> {
        let [n, h, w, c] = x.shape();
        let (oh, ow) = (h / 2, w / 2);
        if oh == 0 || ow == 0 {
            return Err(Error::invalid("max pooling needs at least a 2x2 input"));
        }
        let mut out = Tensor::zeros(n, oh, ow, c);
        let mut arg = if mode.caches() { vec![0u32; out.len()] } else { Vec::new() };
        for b in 0..n {
            for oy in 0..oh {
                for ox in 0..ow {
                    for ch in 0..c {
                        let mut best = x.index(b, 2 * oy, 2 * ox, ch);
                        for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                            let i = x.index(b, 2 * oy + dy, 2 * ox + dx, ch);
                            if x.data()[i] > x.data()[best] {
                                best = i;
                            }
                        }
                        let o = out.index(b, oy, ox, ch);
                        out.data_mut()[o] = x.data()[best];
                        if mode.caches() {
                            arg[o] = best as u32;
                        }
                    }
                }
            }
        }
        self.cache = mode.caches().then_some((arg, [n, h, w, c]));
        Ok(out)
    }

    pub fn backward<T: Real>(&mut self, dy: &Tensor<T>) -> Result<Tensor<T>> {
        let (arg, [n, h, w, c]) = self.cache.take().ok_or_else(|| missing_cache("max pooling"))?;
        if dy.len() != arg.len() {
            return Err(Error::invalid("max pooling: output gradient shape mismatch"));
        }
        let mut dx = Tensor::zeros(n, h, w, c);
        for (&i, &d) in arg.iter().zip(dy.data()) {
            dx.data_mut()[i as usize] += d;
        }
        Ok(dx)
    }
}
