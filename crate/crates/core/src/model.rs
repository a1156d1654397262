//! Model architecture and topologies.
//!
//! The backbone is a residual feature extractor over a `(N_IQ, 2, 1)` input
//! tensor (I/Q on the width-2 axis) followed by a decision head of two
//! 128-neuron dense layers and a softmax output. Three topologies are
//! assembled from it:
//!
//! * central — EGC over the RU frames, one classifier at the DU;
//! * distributed — one frozen RU classifier replicated per RU, soft
//!   decisions concatenated into a trainable voting head at the DU;
//! * hybrid — distributed plus a frozen DU feature extractor over the
//!   EGC-combined signal, its features concatenated after the soft
//!   decisions.
//!
//! The input layer clips a frame to the model's window and scales it to unit
//! RMS (receiver AGC); without any normalization layers in the network this
//! keeps inputs comparable across the -10..30 dB grid.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::dataset::FrameRecord;
use crate::error::{Error, Result};
use crate::nn::{
    maxpool2_backward, maxpool2_forward, relu_backward_inplace, relu_inplace,
    softmax, softmax_ce_grad, Conv, Dense, GradBuf, Param, ParamVisitor, Provenance, Scalar,
};
use crate::rng::DetRng;
use crate::signal::{egc_combine, IqFrame};

/// Filters per residual stack.
pub const STACK_FILTERS: usize = 32;
/// Neurons in each hidden dense layer of a decision head.
pub const HEAD_HIDDEN: usize = 128;
/// Width of the input tensor (I and Q).
pub const WIDTH: usize = 2;
/// Number of modulation classes.
pub const N_CLASSES: usize = 7;

/// Supported model input sizes.
pub const SUPPORTED_INPUT_SIZES: [usize; 4] = [128, 256, 512, 1024];
/// Supported residual-stack counts.
pub const SUPPORTED_STACKS: [usize; 4] = [4, 5, 6, 7];

/// Topology selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ModelKind {
    Central,
    Ru,
    DuFeature,
    Voting,
    DistributedEnsemble,
    HybridEnsemble,
}

/// Declarative description of a network build.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModelSpec {
    pub kind: ModelKind,
    /// `N_IQ`: samples consumed per frame (RU-side size for ensembles).
    pub input_size: usize,
    pub n_stacks: usize,
    pub n_ru: usize,
    /// DU branch input size (hybrid only).
    pub du_input_size: Option<usize>,
    /// DU branch stack count (hybrid only).
    pub du_n_stacks: Option<usize>,
    pub n_classes: usize,
}

impl ModelSpec {
    pub fn central(input_size: usize, n_stacks: usize, n_ru: usize) -> Self {
        ModelSpec {
            kind: ModelKind::Central,
            input_size,
            n_stacks,
            n_ru,
            du_input_size: None,
            du_n_stacks: None,
            n_classes: N_CLASSES,
        }
    }

    pub fn distributed(input_size: usize, n_stacks: usize, n_ru: usize) -> Self {
        ModelSpec { kind: ModelKind::DistributedEnsemble, ..Self::central(input_size, n_stacks, n_ru) }
    }

    pub fn hybrid(
        ru_input_size: usize,
        ru_n_stacks: usize,
        du_input_size: usize,
        du_n_stacks: usize,
        n_ru: usize,
    ) -> Self {
        ModelSpec {
            kind: ModelKind::HybridEnsemble,
            input_size: ru_input_size,
            n_stacks: ru_n_stacks,
            n_ru,
            du_input_size: Some(du_input_size),
            du_n_stacks: Some(du_n_stacks),
            n_classes: N_CLASSES,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check_pair = |input: usize, stacks: usize| -> Result<()> {
            if !SUPPORTED_INPUT_SIZES.contains(&input) {
                return Err(Error::InvalidArgument(format!(
                    "input size {input} not in supported set {SUPPORTED_INPUT_SIZES:?}"
                )));
            }
            if !SUPPORTED_STACKS.contains(&stacks) {
                return Err(Error::InvalidArgument(format!(
                    "stack count {stacks} not in supported set {SUPPORTED_STACKS:?}"
                )));
            }
            if input % (1 << stacks) != 0 {
                return Err(Error::InvalidArgument(format!(
                    "input size {input} not divisible by 2^{stacks} (pooling)"
                )));
            }
            Ok(())
        };
        check_pair(self.input_size, self.n_stacks)?;
        if self.kind == ModelKind::HybridEnsemble {
            let du_in = self.du_input_size.ok_or_else(|| {
                Error::InvalidArgument("hybrid spec needs du_input_size".to_string())
            })?;
            let du_stacks = self.du_n_stacks.ok_or_else(|| {
                Error::InvalidArgument("hybrid spec needs du_n_stacks".to_string())
            })?;
            check_pair(du_in, du_stacks)?;
        }
        if self.n_classes != N_CLASSES {
            return Err(Error::InvalidArgument(format!(
                "n_classes must be {N_CLASSES}, got {}",
                self.n_classes
            )));
        }
        if self.n_ru < 1 && self.kind != ModelKind::HybridEnsemble {
            return Err(Error::InvalidArgument("n_ru must be at least 1".to_string()));
        }
        Ok(())
    }

    /// Short identifier used in provenance strings and file names.
    pub fn id(&self) -> String {
        match self.kind {
            ModelKind::HybridEnsemble => format!(
                "hybrid(ru={}x{},du={}x{},n_ru={})",
                self.input_size,
                self.n_stacks,
                self.du_input_size.unwrap_or(0),
                self.du_n_stacks.unwrap_or(0),
                self.n_ru
            ),
            kind => format!(
                "{}(in={},stacks={},n_ru={})",
                match kind {
                    ModelKind::Central => "central",
                    ModelKind::Ru => "ru",
                    ModelKind::DuFeature => "du_feature",
                    ModelKind::Voting => "voting",
                    ModelKind::DistributedEnsemble => "distributed",
                    ModelKind::HybridEnsemble => unreachable!(),
                },
                self.input_size,
                self.n_stacks,
                self.n_ru
            ),
        }
    }
}

/// A 7-way probability vector over modulation classes.
#[derive(Debug, Clone, PartialEq)]
pub struct SoftDecision {
    pub probs: Vec<f32>,
}

impl SoftDecision {
    /// Index of the most confident class (ties break to the lowest index).
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate().skip(1) {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn sum(&self) -> f32 {
        self.probs.iter().sum()
    }
}

/// First `n` samples of a frame, order preserved.
pub fn clip_input(frame: &IqFrame, n: usize) -> Result<IqFrame> {
    if n == 0 || n > frame.len() {
        return Err(Error::InvalidArgument(format!(
            "clip size {n} out of range 1..={}",
            frame.len()
        )));
    }
    Ok(IqFrame { samples: frame.samples[..n].to_vec(), meta: frame.meta.clone() })
}

/// Serialize the first `n` samples into the flat `[w][t]` input tensor
/// (I plane then Q plane), scaled to unit RMS over the window.
pub fn prepare_input<F: Scalar>(frame: &IqFrame, n: usize) -> Result<Vec<F>> {
    if n == 0 || n > frame.len() {
        return Err(Error::InvalidArgument(format!(
            "input window {n} out of range 1..={}",
            frame.len()
        )));
    }
    let window = &frame.samples[..n];
    let energy: f64 = window.iter().map(|s| s.norm_sqr()).sum();
    let rms = libm::sqrt(energy / n as f64);
    let scale = if rms > 0.0 { 1.0 / rms } else { 1.0 };
    let mut out = vec![F::zero(); 2 * n];
    for (x, s) in window.iter().enumerate() {
        out[x] = F::from_f64(s.re * scale);
        out[n + x] = F::from_f64(s.im * scale);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Feature extractor
// ---------------------------------------------------------------------------

/// One residual stack: entry 1x1 conv, two residual units, max-pool (2,1).
#[derive(Debug, Clone)]
struct StackLayer<F> {
    entry: Conv<F>,
    u1a: Conv<F>,
    u1b: Conv<F>,
    u2a: Conv<F>,
    u2b: Conv<F>,
}

/// Series of residual stacks mapping `(N_IQ, 2, 1)` to a feature vector of
/// length `32 * (N_IQ / 2^n_stacks) * 2`.
#[derive(Debug, Clone)]
pub struct FeatureExtractor<F> {
    stacks: Vec<StackLayer<F>>,
    pub input_size: usize,
    pub n_stacks: usize,
}

/// Parameters per stack in visit order (5 convs, weight+bias each).
const PARAMS_PER_STACK: usize = 10;

impl<F: Scalar> FeatureExtractor<F> {
    pub fn new(input_size: usize, n_stacks: usize, rng: &mut DetRng, seed: u64) -> Result<Self> {
        if n_stacks == 0 || input_size % (1 << n_stacks) != 0 {
            return Err(Error::InvalidArgument(format!(
                "input size {input_size} not divisible by 2^{n_stacks} (pooling infeasible)"
            )));
        }
        let mut stacks = Vec::with_capacity(n_stacks);
        for i in 0..n_stacks {
            let c_in = if i == 0 { 1 } else { STACK_FILTERS };
            stacks.push(StackLayer {
                entry: Conv::init(c_in, STACK_FILTERS, 1, rng, seed),
                u1a: Conv::init(STACK_FILTERS, STACK_FILTERS, 3, rng, seed),
                u1b: Conv::init(STACK_FILTERS, STACK_FILTERS, 3, rng, seed),
                u2a: Conv::init(STACK_FILTERS, STACK_FILTERS, 3, rng, seed),
                u2b: Conv::init(STACK_FILTERS, STACK_FILTERS, 3, rng, seed),
            });
        }
        Ok(FeatureExtractor { stacks, input_size, n_stacks })
    }

    /// Flattened feature length: `32 * (input_size / 2^n_stacks) * 2`.
    pub fn feature_len(&self) -> usize {
        STACK_FILTERS * (self.input_size >> self.n_stacks) * WIDTH
    }

    fn time_at(&self, stack: usize) -> usize {
        self.input_size >> stack
    }

    pub fn make_workspace(&self) -> FxWorkspace<F> {
        let mut ws = FxWorkspace {
            entry_out: Vec::new(),
            u1_mid: Vec::new(),
            u1_out: Vec::new(),
            u2_mid: Vec::new(),
            u2_out: Vec::new(),
            pool_out: Vec::new(),
            pool_idx: Vec::new(),
            s1: Vec::new(),
            s2: Vec::new(),
            s3: Vec::new(),
            carry_a: Vec::new(),
            carry_b: Vec::new(),
        };
        let max_plane = STACK_FILTERS * WIDTH * self.input_size;
        for i in 0..self.n_stacks {
            let plane = STACK_FILTERS * WIDTH * self.time_at(i);
            ws.entry_out.push(vec![F::zero(); plane]);
            ws.u1_mid.push(vec![F::zero(); plane]);
            ws.u1_out.push(vec![F::zero(); plane]);
            ws.u2_mid.push(vec![F::zero(); plane]);
            ws.u2_out.push(vec![F::zero(); plane]);
            ws.pool_out.push(vec![F::zero(); plane / 2]);
            ws.pool_idx.push(vec![0u8; plane / 2]);
        }
        ws.s1 = vec![F::zero(); max_plane];
        ws.s2 = vec![F::zero(); max_plane];
        ws.s3 = vec![F::zero(); max_plane];
        ws.carry_a = vec![F::zero(); max_plane];
        ws.carry_b = vec![F::zero(); max_plane];
        ws
    }

    /// Forward pass; the returned slice is the flattened feature vector.
    pub fn forward<'w>(&self, input: &[F], ws: &'w mut FxWorkspace<F>) -> &'w [F] {
        debug_assert_eq!(input.len(), WIDTH * self.input_size);
        for (i, stack) in self.stacks.iter().enumerate() {
            let t = self.time_at(i);
            let plane = STACK_FILTERS * WIDTH * t;
            // Split the workspace stack-wise to borrow the previous pool
            // output as this stack's input.
            let (prev, cur) = ws.pool_out.split_at_mut(i);
            let x: &[F] = if i == 0 { input } else { &prev[i - 1] };

            stack.entry.forward(x, WIDTH, t, &mut ws.entry_out[i][..plane]);

            // Residual unit 1.
            stack.u1a.forward(&ws.entry_out[i], WIDTH, t, &mut ws.u1_mid[i][..plane]);
            relu_inplace(&mut ws.u1_mid[i]);
            stack.u1b.forward(&ws.u1_mid[i], WIDTH, t, &mut ws.u1_out[i][..plane]);
            for (o, &s) in ws.u1_out[i].iter_mut().zip(&ws.entry_out[i]) {
                *o += s;
            }
            relu_inplace(&mut ws.u1_out[i]);

            // Residual unit 2.
            stack.u2a.forward(&ws.u1_out[i], WIDTH, t, &mut ws.u2_mid[i][..plane]);
            relu_inplace(&mut ws.u2_mid[i]);
            stack.u2b.forward(&ws.u2_mid[i], WIDTH, t, &mut ws.u2_out[i][..plane]);
            for (o, &s) in ws.u2_out[i].iter_mut().zip(&ws.u1_out[i]) {
                *o += s;
            }
            relu_inplace(&mut ws.u2_out[i]);

            maxpool2_forward(
                &ws.u2_out[i],
                STACK_FILTERS * WIDTH,
                t,
                &mut cur[0][..plane / 2],
                &mut ws.pool_idx[i][..plane / 2],
            );
        }
        &ws.pool_out[self.n_stacks - 1]
    }

    /// Backprop from a gradient at the feature vector. Gradients are
    /// accumulated into `grads` starting at slot `base` (10 slots per stack).
    pub fn backward(
        &self,
        input: &[F],
        d_features: &[F],
        ws: &mut FxWorkspace<F>,
        grads: &mut GradBuf<F>,
        base: usize,
    ) {
        let FxWorkspace {
            entry_out,
            u1_mid,
            u1_out,
            u2_mid,
            u2_out,
            pool_out,
            pool_idx,
            s1,
            s2,
            s3,
            carry_a,
            carry_b,
        } = ws;
        carry_a[..d_features.len()].copy_from_slice(d_features);

        for i in (0..self.n_stacks).rev() {
            let stack = &self.stacks[i];
            let t = self.time_at(i);
            let plane = STACK_FILTERS * WIDTH * t;
            let sbase = base + i * PARAMS_PER_STACK;

            // Pool backward into s1 (gradient at u2_out).
            maxpool2_backward(
                &carry_a[..plane / 2],
                &pool_idx[i][..plane / 2],
                STACK_FILTERS * WIDTH,
                t,
                &mut s1[..plane],
            );

            // Residual unit 2 backward.
            relu_backward_inplace(&u2_out[i], &mut s1[..plane]);
            {
                let (gw, gb) = slot_pair(grads, sbase + 6);
                stack.u2b.backward(&u2_mid[i], &s1[..plane], WIDTH, t, &mut s2[..plane], gw, gb);
            }
            relu_backward_inplace(&u2_mid[i], &mut s2[..plane]);
            {
                let (gw, gb) = slot_pair(grads, sbase + 4);
                stack.u2a.backward(&u1_out[i], &s2[..plane], WIDTH, t, &mut s3[..plane], gw, gb);
            }
            for (d, &skip) in s3[..plane].iter_mut().zip(&s1[..plane]) {
                *d += skip;
            }

            // Residual unit 1 backward (gradient at u1_out currently in s3).
            relu_backward_inplace(&u1_out[i], &mut s3[..plane]);
            {
                let (gw, gb) = slot_pair(grads, sbase + 2);
                stack.u1b.backward(&u1_mid[i], &s3[..plane], WIDTH, t, &mut s2[..plane], gw, gb);
            }
            relu_backward_inplace(&u1_mid[i], &mut s2[..plane]);
            {
                let (gw, gb) = slot_pair(grads, sbase + 0);
                stack.u1a.backward(&entry_out[i], &s2[..plane], WIDTH, t, &mut s1[..plane], gw, gb);
            }
            for (d, &skip) in s1[..plane].iter_mut().zip(&s3[..plane]) {
                *d += skip;
            }

            // Entry conv backward (gradient at entry_out in s1).
            let x: &[F] = if i == 0 { input } else { &pool_out[i - 1] };
            let x_len = x.len();
            {
                let (gw, gb) = slot_pair(grads, sbase + 8);
                stack.entry.backward(x, &s1[..plane], WIDTH, t, &mut carry_b[..x_len], gw, gb);
            }
            core::mem::swap(carry_a, carry_b);
        }
    }

    fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        for (i, s) in self.stacks.iter().enumerate() {
            f(&format!("{prefix}.s{i}.u1a.weight"), &s.u1a.weight);
            f(&format!("{prefix}.s{i}.u1a.bias"), &s.u1a.bias);
            f(&format!("{prefix}.s{i}.u1b.weight"), &s.u1b.weight);
            f(&format!("{prefix}.s{i}.u1b.bias"), &s.u1b.bias);
            f(&format!("{prefix}.s{i}.u2a.weight"), &s.u2a.weight);
            f(&format!("{prefix}.s{i}.u2a.bias"), &s.u2a.bias);
            f(&format!("{prefix}.s{i}.u2b.weight"), &s.u2b.weight);
            f(&format!("{prefix}.s{i}.u2b.bias"), &s.u2b.bias);
            f(&format!("{prefix}.s{i}.entry.weight"), &s.entry.weight);
            f(&format!("{prefix}.s{i}.entry.bias"), &s.entry.bias);
        }
    }

    fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        for (i, s) in self.stacks.iter_mut().enumerate() {
            f(&format!("{prefix}.s{i}.u1a.weight"), &mut s.u1a.weight);
            f(&format!("{prefix}.s{i}.u1a.bias"), &mut s.u1a.bias);
            f(&format!("{prefix}.s{i}.u1b.weight"), &mut s.u1b.weight);
            f(&format!("{prefix}.s{i}.u1b.bias"), &mut s.u1b.bias);
            f(&format!("{prefix}.s{i}.u2a.weight"), &mut s.u2a.weight);
            f(&format!("{prefix}.s{i}.u2a.bias"), &mut s.u2a.bias);
            f(&format!("{prefix}.s{i}.u2b.weight"), &mut s.u2b.weight);
            f(&format!("{prefix}.s{i}.u2b.bias"), &mut s.u2b.bias);
            f(&format!("{prefix}.s{i}.entry.weight"), &mut s.entry.weight);
            f(&format!("{prefix}.s{i}.entry.bias"), &mut s.entry.bias);
        }
    }
}

/// Activation storage for one feature-extractor pass.
#[derive(Debug, Clone)]
pub struct FxWorkspace<F> {
    entry_out: Vec<Vec<F>>,
    u1_mid: Vec<Vec<F>>,
    u1_out: Vec<Vec<F>>,
    u2_mid: Vec<Vec<F>>,
    u2_out: Vec<Vec<F>>,
    pool_out: Vec<Vec<F>>,
    pool_idx: Vec<Vec<u8>>,
    s1: Vec<F>,
    s2: Vec<F>,
    s3: Vec<F>,
    carry_a: Vec<F>,
    carry_b: Vec<F>,
}

impl<F: Scalar> FxWorkspace<F> {
    pub fn features(&self) -> &[F] {
        self.pool_out.last().expect("workspace of an empty extractor")
    }
}

fn slot_pair<F>(grads: &mut GradBuf<F>, i: usize) -> (&mut [F], &mut [F]) {
    let (left, right) = grads.slots.split_at_mut(i + 1);
    (&mut left[i], &mut right[0])
}

// ---------------------------------------------------------------------------
// Decision head
// ---------------------------------------------------------------------------

/// dense(128) + ReLU, dense(128) + ReLU, dense(n_classes), softmax.
#[derive(Debug, Clone)]
pub struct DecisionHead<F> {
    pub fc1: Dense<F>,
    pub fc2: Dense<F>,
    pub fc3: Dense<F>,
    pub n_in: usize,
    pub n_classes: usize,
}

impl<F: Scalar> DecisionHead<F> {
    pub fn new(n_in: usize, n_classes: usize, rng: &mut DetRng, seed: u64) -> Self {
        DecisionHead {
            fc1: Dense::init(n_in, HEAD_HIDDEN, rng, seed),
            fc2: Dense::init(HEAD_HIDDEN, HEAD_HIDDEN, rng, seed),
            fc3: Dense::init(HEAD_HIDDEN, n_classes, rng, seed),
            n_in,
            n_classes,
        }
    }

    pub fn make_workspace(&self) -> HeadWorkspace<F> {
        HeadWorkspace {
            h1: vec![F::zero(); HEAD_HIDDEN],
            h2: vec![F::zero(); HEAD_HIDDEN],
            logits: vec![F::zero(); self.n_classes],
            probs: vec![F::zero(); self.n_classes],
            d_logits: vec![F::zero(); self.n_classes],
            d_h2: vec![F::zero(); HEAD_HIDDEN],
            d_h1: vec![F::zero(); HEAD_HIDDEN],
        }
    }

    pub fn forward<'w>(&self, x: &[F], ws: &'w mut HeadWorkspace<F>) -> &'w [F] {
        self.fc1.forward(x, &mut ws.h1);
        relu_inplace(&mut ws.h1);
        self.fc2.forward(&ws.h1, &mut ws.h2);
        relu_inplace(&mut ws.h2);
        self.fc3.forward(&ws.h2, &mut ws.logits);
        softmax(&ws.logits, &mut ws.probs);
        &ws.probs
    }

    /// Backprop of softmax cross-entropy. Writes the input gradient into
    /// `d_x` when given; accumulates parameter gradients at slots
    /// `base..base+6` (fc1.w, fc1.b, fc2.w, fc2.b, fc3.w, fc3.b).
    pub fn backward(
        &self,
        x: &[F],
        label: usize,
        ws: &mut HeadWorkspace<F>,
        d_x: Option<&mut [F]>,
        grads: &mut GradBuf<F>,
        base: usize,
    ) {
        softmax_ce_grad(&ws.probs, label, &mut ws.d_logits);
        {
            let (gw, gb) = slot_pair(grads, base + 4);
            self.fc3.backward(&ws.h2, &ws.d_logits, Some(&mut ws.d_h2), gw, gb);
        }
        relu_backward_inplace(&ws.h2, &mut ws.d_h2);
        {
            let (gw, gb) = slot_pair(grads, base + 2);
            self.fc2.backward(&ws.h1, &ws.d_h2, Some(&mut ws.d_h1), gw, gb);
        }
        relu_backward_inplace(&ws.h1, &mut ws.d_h1);
        {
            let (gw, gb) = slot_pair(grads, base);
            self.fc1.backward(x, &ws.d_h1, d_x, gw, gb);
        }
    }

    /// Loss of the most recent forward pass in `ws` against `label`
    /// (log-sum-exp form, exact for finite logits).
    pub fn last_loss(&self, ws: &HeadWorkspace<F>, label: usize) -> F {
        crate::nn::cross_entropy_from_logits(&ws.logits, label)
    }

    /// Trainable parameter count: `in*128 + 128 + 128*128 + 128 + 128*c + c`.
    pub fn param_count(&self) -> usize {
        self.n_in * HEAD_HIDDEN
            + HEAD_HIDDEN
            + HEAD_HIDDEN * HEAD_HIDDEN
            + HEAD_HIDDEN
            + HEAD_HIDDEN * self.n_classes
            + self.n_classes
    }

    fn visit_with(&self, prefix: &str, f: &mut dyn FnMut(&str, &Param<F>)) {
        f(&format!("{prefix}.fc1.weight"), &self.fc1.weight);
        f(&format!("{prefix}.fc1.bias"), &self.fc1.bias);
        f(&format!("{prefix}.fc2.weight"), &self.fc2.weight);
        f(&format!("{prefix}.fc2.bias"), &self.fc2.bias);
        f(&format!("{prefix}.fc3.weight"), &self.fc3.weight);
        f(&format!("{prefix}.fc3.bias"), &self.fc3.bias);
    }

    fn visit_with_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        f(&format!("{prefix}.fc1.weight"), &mut self.fc1.weight);
        f(&format!("{prefix}.fc1.bias"), &mut self.fc1.bias);
        f(&format!("{prefix}.fc2.weight"), &mut self.fc2.weight);
        f(&format!("{prefix}.fc2.bias"), &mut self.fc2.bias);
        f(&format!("{prefix}.fc3.weight"), &mut self.fc3.weight);
        f(&format!("{prefix}.fc3.bias"), &mut self.fc3.bias);
    }
}

/// Activation storage for one decision-head pass.
#[derive(Debug, Clone)]
pub struct HeadWorkspace<F> {
    h1: Vec<F>,
    h2: Vec<F>,
    logits: Vec<F>,
    pub probs: Vec<F>,
    d_logits: Vec<F>,
    d_h2: Vec<F>,
    d_h1: Vec<F>,
}

// ---------------------------------------------------------------------------
// Classifier: feature extractor + decision head
// ---------------------------------------------------------------------------

/// The full single-branch network (central model, RU model, donor models).
#[derive(Debug, Clone)]
pub struct Classifier<F> {
    pub fx: FeatureExtractor<F>,
    pub head: DecisionHead<F>,
}

impl<F: Scalar> Classifier<F> {
    pub fn new(input_size: usize, n_stacks: usize, n_classes: usize, seed: u64) -> Result<Self> {
        let mut rng = DetRng::new(seed);
        let fx = FeatureExtractor::new(input_size, n_stacks, &mut rng, seed)?;
        let head = DecisionHead::new(fx.feature_len(), n_classes, &mut rng, seed);
        Ok(Classifier { fx, head })
    }

    pub fn input_size(&self) -> usize {
        self.fx.input_size
    }

    pub fn make_workspace(&self) -> ClassifierWorkspace<F> {
        ClassifierWorkspace {
            fx: self.fx.make_workspace(),
            head: self.head.make_workspace(),
            d_feat: vec![F::zero(); self.fx.feature_len()],
        }
    }

    /// Forward pass over a prepared input vector; returns class probabilities.
    pub fn forward<'w>(&self, input: &[F], ws: &'w mut ClassifierWorkspace<F>) -> &'w [F] {
        self.fx.forward(input, &mut ws.fx);
        self.head.forward(ws.fx.features(), &mut ws.head);
        &ws.head.probs
    }

    /// Forward + backward for one example; gradients are accumulated.
    /// Returns the cross-entropy loss.
    pub fn example_grad(
        &self,
        input: &[F],
        label: usize,
        ws: &mut ClassifierWorkspace<F>,
        grads: &mut GradBuf<F>,
    ) -> F {
        let ClassifierWorkspace { fx, head, d_feat } = ws;
        self.fx.forward(input, fx);
        self.head.forward(fx.features(), head);
        let loss = self.head.last_loss(head, label);
        let head_base = self.fx.n_stacks * PARAMS_PER_STACK;
        self.head.backward(fx.features(), label, head, Some(d_feat), grads, head_base);
        self.fx.backward(input, d_feat, fx, grads, 0);
        loss
    }
}

/// Activation storage for one classifier pass.
#[derive(Debug, Clone)]
pub struct ClassifierWorkspace<F> {
    pub fx: FxWorkspace<F>,
    pub head: HeadWorkspace<F>,
    d_feat: Vec<F>,
}

impl<F: Scalar> ParamVisitor<F> for Classifier<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param<F>)) {
        self.fx.visit_with("feature_extraction", f);
        self.head.visit_with("decision", f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.fx.visit_with_mut("feature_extraction", f);
        self.head.visit_with_mut("decision", f);
    }
}

impl<F: Scalar> ParamVisitor<F> for DecisionHead<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param<F>)) {
        self.visit_with("voting", f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.visit_with_mut("voting", f);
    }
}

// ---------------------------------------------------------------------------
// Weight bundles and transfer
// ---------------------------------------------------------------------------

/// Functional blocks a parameter key can belong to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Block {
    FeatureExtraction,
    Decision,
    Voting,
}

impl Block {
    pub fn of_key(key: &str) -> Option<Block> {
        for segment in key.split('.') {
            match segment {
                "feature_extraction" => return Some(Block::FeatureExtraction),
                "decision" => return Some(Block::Decision),
                "voting" => return Some(Block::Voting),
                _ => {}
            }
        }
        None
    }
}

/// One named tensor of a serialized model.
#[derive(Debug, Clone, PartialEq)]
pub struct BundleEntry {
    pub key: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
    pub frozen: bool,
    pub provenance: String,
}

/// Named-tensor snapshot of a model's parameters (always `f32`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct WeightBundle {
    pub entries: Vec<BundleEntry>,
}

impl WeightBundle {
    pub fn from_net<F: Scalar>(net: &impl ParamVisitor<F>) -> Self {
        let mut entries = Vec::new();
        net.visit(&mut |key, p| {
            entries.push(BundleEntry {
                key: key.to_string(),
                shape: p.value.shape.clone(),
                data: p.value.data.iter().map(|v| v.as_f64() as f32).collect(),
                frozen: p.frozen,
                provenance: p.provenance.describe(),
            });
        });
        WeightBundle { entries }
    }

    pub fn get(&self, key: &str) -> Option<&BundleEntry> {
        self.entries.iter().find(|e| e.key == key)
    }

    /// Load values (and frozen flags) into `net`. The key sets and shapes
    /// must match exactly.
    pub fn apply_to<F: Scalar>(&self, net: &mut impl ParamVisitor<F>) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        let mut seen = 0usize;
        net.visit_mut(&mut |key, p| {
            match self.get(key) {
                Some(e) if e.shape == p.value.shape => {
                    for (w, &v) in p.value.data.iter_mut().zip(&e.data) {
                        *w = F::from_f64(v as f64);
                    }
                    p.frozen = e.frozen;
                    p.provenance = if e.provenance.starts_with("random-init(") {
                        // Recover the seed when possible; keep the string otherwise.
                        Provenance::Donor(e.provenance.clone())
                    } else {
                        Provenance::Donor(e.provenance.clone())
                    };
                    seen += 1;
                }
                Some(_) => bad.push(format!("{key} (shape mismatch)")),
                None => bad.push(format!("{key} (missing)")),
            }
        });
        if seen != self.entries.len() {
            for e in &self.entries {
                let mut found = false;
                net.visit(&mut |key, _| {
                    if key == e.key {
                        found = true;
                    }
                });
                if !found {
                    bad.push(format!("{} (extra in bundle)", e.key));
                }
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::IncompatibleSpec { keys: bad })
        }
    }

    /// Digest over the canonical byte encoding (keys, shapes, little-endian
    /// values, frozen flags). Used to assert byte-level freeze contracts.
    pub fn checksum(&self) -> u64 {
        let mut h = crate::rng::Fnv64::new();
        for e in &self.entries {
            h.update(e.key.as_bytes());
            for &d in &e.shape {
                h.update(&(d as u64).to_le_bytes());
            }
            for &v in &e.data {
                h.update(&v.to_le_bytes());
            }
            h.update(&[e.frozen as u8]);
        }
        h.finish()
    }

    /// Checksum of the subset of entries whose key starts with `prefix`.
    pub fn checksum_of(&self, prefix: &str) -> u64 {
        let mut h = crate::rng::Fnv64::new();
        for e in self.entries.iter().filter(|e| e.key.starts_with(prefix)) {
            h.update(e.key.as_bytes());
            for &v in &e.data {
                h.update(&v.to_le_bytes());
            }
        }
        h.finish()
    }
}

/// Copy the donor's parameters for `blocks` into `recipient` (bit-exact in
/// `f32`), marking them frozen with donor provenance. Shape or key mismatches
/// fail with the offending keys listed.
pub fn transfer_weights<F: Scalar>(
    donor: &WeightBundle,
    recipient: &mut impl ParamVisitor<F>,
    blocks: &[Block],
    donor_id: &str,
) -> Result<()> {
    let mut bad: Vec<String> = Vec::new();
    recipient.visit_mut(&mut |key, p| {
        let block = match Block::of_key(key) {
            Some(b) if blocks.contains(&b) => b,
            _ => return,
        };
        let _ = block;
        match donor.get(key) {
            Some(e) if e.shape == p.value.shape => {
                for (w, &v) in p.value.data.iter_mut().zip(&e.data) {
                    *w = F::from_f64(v as f64);
                }
                p.frozen = true;
                p.provenance = Provenance::Donor(donor_id.to_string());
            }
            Some(e) => bad.push(format!(
                "{key}: donor shape {:?} vs recipient {:?}",
                e.shape, p.value.shape
            )),
            None => bad.push(format!("{key}: missing in donor")),
        }
    });
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::IncompatibleSpec { keys: bad })
    }
}

// ---------------------------------------------------------------------------
// Assembled topologies
// ---------------------------------------------------------------------------

/// EGC over the RU frames, then one classifier over the combined window.
#[derive(Debug, Clone)]
pub struct CentralModel<F> {
    pub spec: ModelSpec,
    pub net: Classifier<F>,
}

impl<F: Scalar> CentralModel<F> {
    pub fn assemble(spec: &ModelSpec, seed: u64) -> Result<Self> {
        if spec.kind != ModelKind::Central {
            return Err(Error::InvalidArgument(format!(
                "assemble_central requires a central spec, got {:?}",
                spec.kind
            )));
        }
        spec.validate()?;
        Ok(CentralModel {
            spec: spec.clone(),
            net: Classifier::new(spec.input_size, spec.n_stacks, spec.n_classes, seed)?,
        })
    }

    /// EGC-combine, clip to the model window, normalize.
    pub fn prepare(&self, record: &FrameRecord) -> Result<Vec<F>> {
        let combined = egc_combine(&record.ru_frames)?;
        prepare_input(&combined, self.spec.input_size)
    }

    pub fn classify_with(
        &self,
        record: &FrameRecord,
        ws: &mut ClassifierWorkspace<F>,
    ) -> Result<SoftDecision> {
        let input = self.prepare(record)?;
        let probs = self.net.forward(&input, ws);
        Ok(SoftDecision { probs: probs.iter().map(|p| p.as_f64() as f32).collect() })
    }

    pub fn classify(&self, record: &FrameRecord) -> Result<SoftDecision> {
        let mut ws = self.net.make_workspace();
        self.classify_with(record, &mut ws)
    }
}

/// Frozen RU classifier replicated per RU; concatenated soft decisions feed
/// a trainable voting head. No IQ path to the DU.
#[derive(Debug, Clone)]
pub struct DistributedModel<F> {
    pub spec: ModelSpec,
    /// One parameter set shared by every RU branch.
    pub ru_net: Classifier<F>,
    pub voting: DecisionHead<F>,
    pub n_ru: usize,
}

impl<F: Scalar> DistributedModel<F> {
    /// Assemble from a frozen RU classifier. A voting head of input width
    /// `7 * n_ru` is freshly initialized from `voting_seed`.
    pub fn assemble(ru_net: Classifier<F>, n_ru: usize, voting_seed: u64) -> Result<Self> {
        if n_ru < 1 {
            return Err(Error::InvalidArgument("distributed model needs n_ru >= 1".to_string()));
        }
        if ru_net.trainable_count() != 0 {
            return Err(Error::ContractViolation(
                "RU weights must be frozen before assembly".to_string(),
            ));
        }
        let n_classes = ru_net.head.n_classes;
        let mut rng = DetRng::new(voting_seed);
        let voting = DecisionHead::new(n_classes * n_ru, n_classes, &mut rng, voting_seed);
        let spec = ModelSpec {
            kind: ModelKind::DistributedEnsemble,
            input_size: ru_net.input_size(),
            n_stacks: ru_net.fx.n_stacks,
            n_ru,
            du_input_size: None,
            du_n_stacks: None,
            n_classes,
        };
        Ok(DistributedModel { spec, ru_net, voting, n_ru })
    }

    pub fn concat_len(&self) -> usize {
        self.spec.n_classes * self.n_ru
    }

    /// Per-RU soft decisions concatenated in RU order.
    pub fn concat_into(
        &self,
        record: &FrameRecord,
        ws: &mut ClassifierWorkspace<F>,
        out: &mut Vec<F>,
    ) -> Result<()> {
        if record.ru_frames.len() < self.n_ru {
            return Err(Error::InvalidArgument(format!(
                "record has {} RU frames, model expects {}",
                record.ru_frames.len(),
                self.n_ru
            )));
        }
        out.clear();
        for frame in record.ru_frames.iter().take(self.n_ru) {
            let input = prepare_input::<F>(frame, self.spec.input_size)?;
            let probs = self.ru_net.forward(&input, ws);
            out.extend_from_slice(probs);
        }
        Ok(())
    }

    pub fn classify(&self, record: &FrameRecord) -> Result<SoftDecision> {
        let mut ws = self.ru_net.make_workspace();
        let mut head_ws = self.voting.make_workspace();
        let mut concat = Vec::with_capacity(self.concat_len());
        self.concat_into(record, &mut ws, &mut concat)?;
        let probs = self.voting.forward(&concat, &mut head_ws);
        Ok(SoftDecision { probs: probs.iter().map(|p| p.as_f64() as f32).collect() })
    }
}

impl<F: Scalar> ParamVisitor<F> for DistributedModel<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param<F>)) {
        self.ru_net.fx.visit_with("ru.feature_extraction", f);
        self.ru_net.head.visit_with("ru.decision", f);
        self.voting.visit_with("voting", f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.ru_net.fx.visit_with_mut("ru.feature_extraction", f);
        self.ru_net.head.visit_with_mut("ru.decision", f);
        self.voting.visit_with_mut("voting", f);
    }
}

/// Distributed plus a frozen DU feature extractor over the EGC signal.
#[derive(Debug, Clone)]
pub struct HybridModel<F> {
    pub spec: ModelSpec,
    pub ru_net: Classifier<F>,
    pub du_fx: FeatureExtractor<F>,
    pub voting: DecisionHead<F>,
    pub n_ru: usize,
}

impl<F: Scalar> HybridModel<F> {
    /// Assemble from a frozen RU classifier and a frozen DU feature
    /// extractor. `n_ru == 0` is a degenerate test-only configuration that
    /// reduces to a central model over the DU branch.
    pub fn assemble(
        ru_net: Classifier<F>,
        du_fx: FeatureExtractor<F>,
        n_ru: usize,
        voting_seed: u64,
    ) -> Result<Self> {
        if ru_net.trainable_count() != 0 {
            return Err(Error::ContractViolation(
                "RU weights must be frozen before assembly".to_string(),
            ));
        }
        let mut frozen_du = true;
        du_fx.visit_with("feature_extraction", &mut |_, p: &Param<F>| {
            frozen_du &= p.frozen;
        });
        if !frozen_du {
            return Err(Error::ContractViolation(
                "DU feature extractor must be frozen before assembly".to_string(),
            ));
        }
        let n_classes = ru_net.head.n_classes;
        let concat_len = n_classes * n_ru + du_fx.feature_len();
        let mut rng = DetRng::new(voting_seed);
        let voting = DecisionHead::new(concat_len, n_classes, &mut rng, voting_seed);
        let spec = ModelSpec {
            kind: ModelKind::HybridEnsemble,
            input_size: ru_net.input_size(),
            n_stacks: ru_net.fx.n_stacks,
            n_ru,
            du_input_size: Some(du_fx.input_size),
            du_n_stacks: Some(du_fx.n_stacks),
            n_classes,
        };
        Ok(HybridModel { spec, ru_net, du_fx, voting, n_ru })
    }

    pub fn concat_len(&self) -> usize {
        self.spec.n_classes * self.n_ru + self.du_fx.feature_len()
    }

    /// `[RU soft decisions .. DU features]` in that order.
    pub fn concat_into(
        &self,
        record: &FrameRecord,
        ru_ws: &mut ClassifierWorkspace<F>,
        du_ws: &mut FxWorkspace<F>,
        out: &mut Vec<F>,
    ) -> Result<()> {
        out.clear();
        for frame in record.ru_frames.iter().take(self.n_ru) {
            let input = prepare_input::<F>(frame, self.spec.input_size)?;
            let probs = self.ru_net.forward(&input, ru_ws);
            out.extend_from_slice(probs);
        }
        if self.n_ru > record.ru_frames.len() {
            return Err(Error::InvalidArgument(format!(
                "record has {} RU frames, model expects {}",
                record.ru_frames.len(),
                self.n_ru
            )));
        }
        let combined = egc_combine(&record.ru_frames)?;
        let du_input = prepare_input::<F>(&combined, self.du_fx.input_size)?;
        let features = self.du_fx.forward(&du_input, du_ws);
        out.extend_from_slice(features);
        Ok(())
    }

    pub fn classify(&self, record: &FrameRecord) -> Result<SoftDecision> {
        let mut ru_ws = self.ru_net.make_workspace();
        let mut du_ws = self.du_fx.make_workspace();
        let mut head_ws = self.voting.make_workspace();
        let mut concat = Vec::with_capacity(self.concat_len());
        self.concat_into(record, &mut ru_ws, &mut du_ws, &mut concat)?;
        let probs = self.voting.forward(&concat, &mut head_ws);
        Ok(SoftDecision { probs: probs.iter().map(|p| p.as_f64() as f32).collect() })
    }
}

impl<F: Scalar> ParamVisitor<F> for HybridModel<F> {
    fn visit(&self, f: &mut dyn FnMut(&str, &Param<F>)) {
        self.ru_net.fx.visit_with("ru.feature_extraction", f);
        self.ru_net.head.visit_with("ru.decision", f);
        self.du_fx.visit_with("du.feature_extraction", f);
        self.voting.visit_with("voting", f);
    }
    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut Param<F>)) {
        self.ru_net.fx.visit_with_mut("ru.feature_extraction", f);
        self.ru_net.head.visit_with_mut("ru.decision", f);
        self.du_fx.visit_with_mut("du.feature_extraction", f);
        self.voting.visit_with_mut("voting", f);
    }
}

/// Checksum of the current checkpoint state of any visitable model.
pub fn bundle_checksum<F: Scalar>(net: &impl ParamVisitor<F>) -> u64 {
    WeightBundle::from_net(net).checksum()
}
