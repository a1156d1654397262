//! Minimal neural-network kernel: conv / dense / pooling layers with manual
//! backprop, plus an Adam optimizer.
//!
//! Layers operate on flat slices in `[channel][width][time]` layout (time
//! contiguous). Convolutions use a `(k, 1)` kernel sliding along time with
//! same padding, so each width column is an independent 1-D convolution.
//! Everything is generic over [`Scalar`] so production runs in `f32` while
//! gradient checks instantiate `f64`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;

use crate::rng::DetRng;

/// Element type of tensors: `f32` or `f64`.
pub trait Scalar:
    Float
    + num_traits::NumAssign
    + core::iter::Sum
    + core::fmt::Debug
    + Default
    + Send
    + Sync
    + 'static
{
    fn from_f64(v: f64) -> Self;
    fn as_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> f32 {
        v as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> f64 {
        v
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
}

/// Dense data plus shape; shapes are `[c_out, c_in, k]` for conv weights,
/// `[n_out, n_in]` for dense weights and `[n]` for biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    pub data: Vec<F>,
    pub shape: Vec<usize>,
}

impl<F: Scalar> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor { data: vec![F::zero(); len], shape: shape.to_vec() }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

/// Where a parameter's current values came from.
#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    RandomInit(u64),
    Donor(String),
}

impl Provenance {
    pub fn describe(&self) -> String {
        match self {
            Provenance::RandomInit(seed) => alloc::format!("random-init({seed})"),
            Provenance::Donor(id) => id.clone(),
        }
    }
}

/// A trainable (or frozen) tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Param<F> {
    pub value: Tensor<F>,
    pub frozen: bool,
    pub provenance: Provenance,
}

impl<F: Scalar> Param<F> {
    fn zeros(shape: &[usize], seed: u64) -> Self {
        Param {
            value: Tensor::zeros(shape),
            frozen: false,
            provenance: Provenance::RandomInit(seed),
        }
    }

    /// He-uniform initialization: `U(±sqrt(6 / fan_in))`.
    fn he_uniform(shape: &[usize], fan_in: usize, rng: &mut DetRng, seed: u64) -> Self {
        let mut p = Self::zeros(shape, seed);
        let limit = libm::sqrt(6.0 / fan_in as f64);
        for w in &mut p.value.data {
            *w = F::from_f64((rng.next_f64() * 2.0 - 1.0) * limit);
        }
        p
    }
}

/// Enumerates a model's parameters in a fixed, documented order.
pub trait ParamVisitor<F: Scalar> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param<F>));
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<F>));

    fn param_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, p| n += p.value.len());
        n
    }

    fn trainable_count(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_, p| {
            if !p.frozen {
                n += p.value.len()
            }
        });
        n
    }

    /// Freeze or unfreeze every parameter.
    fn set_frozen(&mut self, frozen: bool) {
        self.visit_mut(&mut |_, p| p.frozen = frozen);
    }
}

/// Per-parameter gradient accumulator, aligned with visit order.
#[derive(Debug, Clone)]
pub struct GradBuf<F> {
    pub slots: Vec<Vec<F>>,
}

impl<F: Scalar> GradBuf<F> {
    pub fn zeros_like(net: &impl ParamVisitor<F>) -> Self {
        let mut slots = Vec::new();
        net.visit(&mut |_, p| slots.push(vec![F::zero(); p.value.len()]));
        GradBuf { slots }
    }

    pub fn zero(&mut self) {
        for s in &mut self.slots {
            for g in s.iter_mut() {
                *g = F::zero();
            }
        }
    }

    pub fn add_from(&mut self, other: &GradBuf<F>) {
        for (a, b) in self.slots.iter_mut().zip(&other.slots) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += *y;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Convolution along time, kernel (k, 1), same padding
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Conv<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    pub c_in: usize,
    pub c_out: usize,
    pub k: usize,
}

impl<F: Scalar> Conv<F> {
    pub fn init(c_in: usize, c_out: usize, k: usize, rng: &mut DetRng, seed: u64) -> Self {
        Conv {
            weight: Param::he_uniform(&[c_out, c_in, k], c_in * k, rng, seed),
            bias: Param::zeros(&[c_out], seed),
            c_in,
            c_out,
            k,
        }
    }

    /// `out[co][w][x] = bias[co] + sum_{ci,j} weight[co][ci][j] * in[ci][w][x+j-k/2]`
    pub fn forward(&self, input: &[F], width: usize, t: usize, out: &mut [F]) {
        debug_assert_eq!(input.len(), self.c_in * width * t);
        debug_assert_eq!(out.len(), self.c_out * width * t);
        let w = &self.weight.value.data;
        let b = &self.bias.value.data;
        for co in 0..self.c_out {
            for wd in 0..width {
                let dst = &mut out[(co * width + wd) * t..(co * width + wd) * t + t];
                for d in dst.iter_mut() {
                    *d = b[co];
                }
                for ci in 0..self.c_in {
                    let src = &input[(ci * width + wd) * t..(ci * width + wd) * t + t];
                    let wrow = &w[(co * self.c_in + ci) * self.k..(co * self.c_in + ci) * self.k + self.k];
                    match self.k {
                        1 => {
                            let w0 = wrow[0];
                            for (d, s) in dst.iter_mut().zip(src) {
                                *d += w0 * *s;
                            }
                        }
                        3 => {
                            let (w0, w1, w2) = (wrow[0], wrow[1], wrow[2]);
                            dst[0] += w1 * src[0] + w2 * src[1];
                            for (d, win) in dst[1..t - 1].iter_mut().zip(src.windows(3)) {
                                *d += w0 * win[0] + w1 * win[1] + w2 * win[2];
                            }
                            dst[t - 1] += w0 * src[t - 2] + w1 * src[t - 1];
                        }
                        k => {
                            let half = k as isize / 2;
                            for x in 0..t as isize {
                                let mut acc = F::zero();
                                for (j, &wj) in wrow.iter().enumerate() {
                                    let sx = x + j as isize - half;
                                    if sx >= 0 && (sx as usize) < t {
                                        acc += wj * src[sx as usize];
                                    }
                                }
                                dst[x as usize] += acc;
                            }
                        }
                    }
                }
            }
        }
    }

    /// Backprop: writes `d_in` (overwritten) and accumulates weight/bias
    /// gradients into `gw` / `gb`.
    pub fn backward(
        &self,
        input: &[F],
        d_out: &[F],
        width: usize,
        t: usize,
        d_in: &mut [F],
        gw: &mut [F],
        gb: &mut [F],
    ) {
        for d in d_in.iter_mut() {
            *d = F::zero();
        }
        let w = &self.weight.value.data;
        let half = self.k as isize / 2;
        for co in 0..self.c_out {
            for wd in 0..width {
                let dout = &d_out[(co * width + wd) * t..(co * width + wd) * t + t];
                // Bias gradient.
                let mut bsum = F::zero();
                for &g in dout {
                    bsum += g;
                }
                gb[co] += bsum;
                for ci in 0..self.c_in {
                    let src = &input[(ci * width + wd) * t..(ci * width + wd) * t + t];
                    let din = &mut d_in[(ci * width + wd) * t..(ci * width + wd) * t + t];
                    let wbase = (co * self.c_in + ci) * self.k;
                    match self.k {
                        1 => {
                            let w0 = w[wbase];
                            let mut acc = F::zero();
                            for ((di, &g), &s) in din.iter_mut().zip(dout).zip(src) {
                                *di += w0 * g;
                                acc += g * s;
                            }
                            gw[wbase] += acc;
                        }
                        3 => {
                            let (w0, w1, w2) = (w[wbase], w[wbase + 1], w[wbase + 2]);
                            // d_in[y] += w0*dout[y+1] + w1*dout[y] + w2*dout[y-1]
                            din[0] += w1 * dout[0] + w0 * dout[1];
                            for (di, win) in din[1..t - 1].iter_mut().zip(dout.windows(3)) {
                                *di += w2 * win[0] + w1 * win[1] + w0 * win[2];
                            }
                            din[t - 1] += w2 * dout[t - 2] + w1 * dout[t - 1];
                            // Weight gradients: three shifted dot products.
                            let mut g0 = F::zero();
                            for (&g, &s) in dout[1..].iter().zip(&src[..t - 1]) {
                                g0 += g * s;
                            }
                            let mut g1 = F::zero();
                            for (&g, &s) in dout.iter().zip(src) {
                                g1 += g * s;
                            }
                            let mut g2 = F::zero();
                            for (&g, &s) in dout[..t - 1].iter().zip(&src[1..]) {
                                g2 += g * s;
                            }
                            gw[wbase] += g0;
                            gw[wbase + 1] += g1;
                            gw[wbase + 2] += g2;
                        }
                        k => {
                            for (j, gwj) in gw[wbase..wbase + k].iter_mut().enumerate() {
                                let mut acc = F::zero();
                                for x in 0..t as isize {
                                    let sx = x + j as isize - half;
                                    if sx >= 0 && (sx as usize) < t {
                                        acc += dout[x as usize] * src[sx as usize];
                                        din[sx as usize] += w[wbase + j] * dout[x as usize];
                                    }
                                }
                                *gwj += acc;
                            }
                        }
                    }
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct Dense<F> {
    pub weight: Param<F>,
    pub bias: Param<F>,
    pub n_in: usize,
    pub n_out: usize,
}

impl<F: Scalar> Dense<F> {
    pub fn init(n_in: usize, n_out: usize, rng: &mut DetRng, seed: u64) -> Self {
        Dense {
            weight: Param::he_uniform(&[n_out, n_in], n_in, rng, seed),
            bias: Param::zeros(&[n_out], seed),
            n_in,
            n_out,
        }
    }

    pub fn forward(&self, x: &[F], out: &mut [F]) {
        debug_assert_eq!(x.len(), self.n_in);
        debug_assert_eq!(out.len(), self.n_out);
        let w = &self.weight.value.data;
        for (o, dst) in out.iter_mut().enumerate() {
            let row = &w[o * self.n_in..(o + 1) * self.n_in];
            let mut acc = self.bias.value.data[o];
            for (&wi, &xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            *dst = acc;
        }
    }

    /// Backprop; `d_x` may be `None` for the first layer of a head trained on
    /// cached features.
    pub fn backward(
        &self,
        x: &[F],
        d_out: &[F],
        mut d_x: Option<&mut [F]>,
        gw: &mut [F],
        gb: &mut [F],
    ) {
        if let Some(dx) = d_x.as_deref_mut() {
            for d in dx.iter_mut() {
                *d = F::zero();
            }
        }
        let w = &self.weight.value.data;
        for (o, &g) in d_out.iter().enumerate() {
            gb[o] += g;
            let row = &w[o * self.n_in..(o + 1) * self.n_in];
            let grow = &mut gw[o * self.n_in..(o + 1) * self.n_in];
            for (gr, &xi) in grow.iter_mut().zip(x) {
                *gr += g * xi;
            }
            if let Some(dx) = d_x.as_deref_mut() {
                for (di, &wi) in dx.iter_mut().zip(row) {
                    *di += g * wi;
                }
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Activations and pooling
// ---------------------------------------------------------------------------

pub fn relu_inplace<F: Scalar>(x: &mut [F]) {
    for v in x.iter_mut() {
        if *v < F::zero() {
            *v = F::zero();
        }
    }
}

/// Masks `grad` by the ReLU derivative, using the layer output (`out > 0`).
pub fn relu_backward_inplace<F: Scalar>(out: &[F], grad: &mut [F]) {
    for (g, &o) in grad.iter_mut().zip(out) {
        if o <= F::zero() {
            *g = F::zero();
        }
    }
}

/// Max-pool (2,1) with stride (2,1) along time. `idx` records the winning
/// offset (0 or 1) per output element for backprop.
pub fn maxpool2_forward<F: Scalar>(
    input: &[F],
    planes: usize,
    t: usize,
    out: &mut [F],
    idx: &mut [u8],
) {
    let t_out = t / 2;
    debug_assert_eq!(out.len(), planes * t_out);
    for p in 0..planes {
        let src = &input[p * t..p * t + t];
        let dst = &mut out[p * t_out..(p + 1) * t_out];
        let ids = &mut idx[p * t_out..(p + 1) * t_out];
        for x in 0..t_out {
            let (a, b) = (src[2 * x], src[2 * x + 1]);
            if b > a {
                dst[x] = b;
                ids[x] = 1;
            } else {
                dst[x] = a;
                ids[x] = 0;
            }
        }
    }
}

pub fn maxpool2_backward<F: Scalar>(
    d_out: &[F],
    idx: &[u8],
    planes: usize,
    t: usize,
    d_in: &mut [F],
) {
    let t_out = t / 2;
    for d in d_in.iter_mut() {
        *d = F::zero();
    }
    for p in 0..planes {
        let dsrc = &d_out[p * t_out..(p + 1) * t_out];
        let ids = &idx[p * t_out..(p + 1) * t_out];
        let ddst = &mut d_in[p * t..p * t + t];
        for x in 0..t_out {
            ddst[2 * x + ids[x] as usize] = dsrc[x];
        }
    }
}

/// Numerically stable softmax into `probs`.
pub fn softmax<F: Scalar>(logits: &[F], probs: &mut [F]) {
    let mut max = logits[0];
    for &z in logits.iter().skip(1) {
        if z > max {
            max = z;
        }
    }
    let mut sum = F::zero();
    for (p, &z) in probs.iter_mut().zip(logits) {
        *p = (z - max).exp();
        sum += *p;
    }
    for p in probs.iter_mut() {
        *p /= sum;
    }
}

/// Cross-entropy loss of `probs` against `label` (natural log). Probabilities
/// that underflowed to zero are clamped to the smallest f32-representable
/// scale.
pub fn cross_entropy<F: Scalar>(probs: &[F], label: usize) -> F {
    let tiny = F::from_f64(1e-35);
    -(probs[label].max(tiny)).ln()
}

/// Exact softmax cross-entropy in log-sum-exp form; never produces infinities
/// for finite logits.
pub fn cross_entropy_from_logits<F: Scalar>(logits: &[F], label: usize) -> F {
    let mut max = logits[0];
    for &z in logits.iter().skip(1) {
        if z > max {
            max = z;
        }
    }
    let mut sum = F::zero();
    for &z in logits {
        sum += (z - max).exp();
    }
    max + sum.ln() - logits[label]
}

/// Gradient of softmax + cross-entropy w.r.t. the logits: `p - onehot`.
pub fn softmax_ce_grad<F: Scalar>(probs: &[F], label: usize, d_logits: &mut [F]) {
    for (d, &p) in d_logits.iter_mut().zip(probs) {
        *d = p;
    }
    d_logits[label] -= F::one();
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

/// Adaptive-moment gradient descent with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<F> {
    pub lr: F,
    pub beta1: F,
    pub beta2: F,
    pub eps: F,
    step_count: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Scalar> Adam<F> {
    pub fn new(net: &impl ParamVisitor<F>, lr: F) -> Self {
        let mut sizes = Vec::new();
        net.visit(&mut |_, p| sizes.push(p.value.len()));
        Adam {
            lr,
            beta1: F::from_f64(0.9),
            beta2: F::from_f64(0.999),
            eps: F::from_f64(1e-8),
            step_count: 0,
            m: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
            v: sizes.iter().map(|&s| vec![F::zero(); s]).collect(),
        }
    }

    /// One update. `grads` holds summed per-example gradients; `scale`
    /// (typically 1/batch) converts them to means. Frozen parameters are
    /// left untouched.
    pub fn step(&mut self, net: &mut impl ParamVisitor<F>, grads: &GradBuf<F>, scale: F) {
        self.step_count += 1;
        let bc1 = F::one() - self.beta1.powi(self.step_count as i32);
        let bc2 = F::one() - self.beta2.powi(self.step_count as i32);
        let lr = self.lr;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.eps);
        let (m, v) = (&mut self.m, &mut self.v);
        let mut i = 0;
        net.visit_mut(&mut |_, p| {
            if !p.frozen {
                let ms = &mut m[i];
                let vs = &mut v[i];
                let gs = &grads.slots[i];
                for ((w, &graw), (mi, vi)) in
                    p.value.data.iter_mut().zip(gs).zip(ms.iter_mut().zip(vs.iter_mut()))
                {
                    let g = graw * scale;
                    *mi = b1 * *mi + (F::one() - b1) * g;
                    *vi = b2 * *vi + (F::one() - b2) * g * g;
                    let mhat = *mi / bc1;
                    let vhat = *vi / bc2;
                    *w -= lr * mhat / (vhat.sqrt() + eps);
                }
            }
            i += 1;
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng() -> DetRng {
        DetRng::new(99)
    }

    #[test]
    fn dense_forward_known() {
        let mut d = Dense::<f64>::init(2, 2, &mut rng(), 0);
        d.weight.value.data = vec![1.0, 2.0, 3.0, 4.0];
        d.bias.value.data = vec![0.5, -0.5];
        let mut out = vec![0.0; 2];
        d.forward(&[1.0, -1.0], &mut out);
        assert_eq!(out, vec![1.0 - 2.0 + 0.5, 3.0 - 4.0 - 0.5]);
    }

    /// Naive reference convolution: same padding, kernel (k,1).
    fn conv_naive(
        w: &[f64],
        b: &[f64],
        c_in: usize,
        c_out: usize,
        k: usize,
        input: &[f64],
        width: usize,
        t: usize,
    ) -> Vec<f64> {
        let mut out = vec![0.0; c_out * width * t];
        let half = (k / 2) as isize;
        for co in 0..c_out {
            for wd in 0..width {
                for x in 0..t as isize {
                    let mut acc = b[co];
                    for ci in 0..c_in {
                        for j in 0..k as isize {
                            let sx = x + j - half;
                            if sx >= 0 && (sx as usize) < t {
                                acc += w[(co * c_in + ci) * k + j as usize]
                                    * input[(ci * width + wd) * t + sx as usize];
                            }
                        }
                    }
                    out[(co * width + wd) * t + x as usize] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv3_matches_naive() {
        let mut r = rng();
        let (c_in, c_out, width, t) = (3, 4, 2, 9);
        let conv = Conv::<f64>::init(c_in, c_out, 3, &mut r, 0);
        let input: Vec<f64> = (0..c_in * width * t).map(|_| r.normal()).collect();
        let mut out = vec![0.0; c_out * width * t];
        conv.forward(&input, width, t, &mut out);
        let expected = conv_naive(
            &conv.weight.value.data,
            &conv.bias.value.data,
            c_in,
            c_out,
            3,
            &input,
            width,
            t,
        );
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv1_is_per_position_mix() {
        let mut r = rng();
        let conv = Conv::<f64>::init(2, 3, 1, &mut r, 0);
        let input: Vec<f64> = (0..2 * 2 * 5).map(|_| r.normal()).collect();
        let mut out = vec![0.0; 3 * 2 * 5];
        conv.forward(&input, 2, 5, &mut out);
        let expected = conv_naive(
            &conv.weight.value.data,
            &conv.bias.value.data,
            2,
            3,
            1,
            &input,
            2,
            5,
        );
        for (a, b) in out.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn conv_backward_matches_finite_differences() {
        let mut r = rng();
        let (c_in, c_out, width, t) = (2, 2, 2, 6);
        let mut conv = Conv::<f64>::init(c_in, c_out, 3, &mut r, 0);
        let input: Vec<f64> = (0..c_in * width * t).map(|_| r.normal()).collect();
        let dout: Vec<f64> = (0..c_out * width * t).map(|_| r.normal()).collect();

        let mut din = vec![0.0; input.len()];
        let mut gw = vec![0.0; conv.weight.value.len()];
        let mut gb = vec![0.0; conv.bias.value.len()];
        conv.backward(&input, &dout, width, t, &mut din, &mut gw, &mut gb);

        // Scalar objective: L = sum(out * dout).
        let loss = |conv: &Conv<f64>, input: &[f64]| -> f64 {
            let mut out = vec![0.0; c_out * width * t];
            conv.forward(input, width, t, &mut out);
            out.iter().zip(&dout).map(|(o, g)| o * g).sum()
        };
        let h = 1e-6;
        for i in 0..gw.len() {
            conv.weight.value.data[i] += h;
            let up = loss(&conv, &input);
            conv.weight.value.data[i] -= 2.0 * h;
            let down = loss(&conv, &input);
            conv.weight.value.data[i] += h;
            let fd = (up - down) / (2.0 * h);
            assert!((fd - gw[i]).abs() < 1e-6, "gw[{i}]: {fd} vs {}", gw[i]);
        }
        for i in 0..din.len() {
            let mut inp = input.clone();
            inp[i] += h;
            let up = loss(&conv, &inp);
            inp[i] -= 2.0 * h;
            let down = loss(&conv, &inp);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - din[i]).abs() < 1e-6, "din[{i}]: {fd} vs {}", din[i]);
        }
    }

    #[test]
    fn maxpool_roundtrip() {
        let input = vec![1.0f64, 3.0, -2.0, -5.0, 4.0, 4.0];
        let mut out = vec![0.0; 3];
        let mut idx = vec![0u8; 3];
        maxpool2_forward(&input, 1, 6, &mut out, &mut idx);
        assert_eq!(out, vec![3.0, -2.0, 4.0]);
        assert_eq!(idx, vec![1, 0, 0]);
        let mut din = vec![0.0; 6];
        maxpool2_backward(&[1.0, 2.0, 3.0], &idx, 1, 6, &mut din);
        assert_eq!(din, vec![0.0, 1.0, 2.0, 0.0, 3.0, 0.0]);
    }

    #[test]
    fn softmax_uniform_on_constant_logits() {
        let mut probs = vec![0.0f64; 7];
        softmax(&[0.0; 7], &mut probs);
        for &p in &probs {
            assert!((p - 1.0 / 7.0).abs() < 1e-12);
        }
        let loss = cross_entropy(&probs, 3);
        assert!((loss - (7.0f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn adam_reduces_simple_quadratic() {
        // Single dense param fit to minimize ||w||^2 via grads = 2w.
        struct One(Param<f64>);
        impl ParamVisitor<f64> for One {
            fn visit(&self, f: &mut dyn FnMut(&str, &Param<f64>)) {
                f("w", &self.0);
            }
            fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
                f("w", &mut self.0);
            }
        }
        let mut net = One(Param {
            value: Tensor { data: vec![1.0, -2.0], shape: vec![2] },
            frozen: false,
            provenance: Provenance::RandomInit(0),
        });
        let mut adam = Adam::new(&net, 0.05);
        for _ in 0..500 {
            let grads = GradBuf { slots: vec![net.0.value.data.iter().map(|w| 2.0 * w).collect()] };
            adam.step(&mut net, &grads, 1.0);
        }
        assert!(net.0.value.data.iter().all(|w| w.abs() < 1e-2));
    }

    #[test]
    fn frozen_params_not_updated() {
        struct One(Param<f64>);
        impl ParamVisitor<f64> for One {
            fn visit(&self, f: &mut dyn FnMut(&str, &Param<f64>)) {
                f("w", &self.0);
            }
            fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<f64>)) {
                f("w", &mut self.0);
            }
        }
        let mut net = One(Param {
            value: Tensor { data: vec![1.5], shape: vec![1] },
            frozen: true,
            provenance: Provenance::RandomInit(0),
        });
        let mut adam = Adam::new(&net, 0.1);
        let grads = GradBuf { slots: vec![vec![10.0]] };
        adam.step(&mut net, &grads, 1.0);
        assert_eq!(net.0.value.data[0], 1.5);
    }
}
