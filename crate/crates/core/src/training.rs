//! Supervised training with early stopping, plus the one-, two- and
//! three-phase pipelines for central, distributed and hybrid models.
//!
//! Training is deterministic given `(hp.seed, dataset seeds)`: weight init,
//! epoch shuffles and batch chunking are all derived seeds, and per-example
//! gradients are reduced in fixed index order regardless of worker count.
//!
//! Donor trainings (the central models feeding transfer learning) are pure
//! functions of `(dataset, input_size, n_stacks, seed)`, so a [`DonorCache`]
//! memoizes them; a distributed and a hybrid pipeline sharing one RU shape
//! train the donor once, which is exactly the checkpoint-reuse the topology
//! is designed for.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::dataset::FrameRecord;
use crate::error::{Error, Result};
use crate::model::{
    prepare_input, transfer_weights, Block, CentralModel, Classifier, ClassifierWorkspace,
    DecisionHead, DistributedModel, HeadWorkspace, HybridModel, ModelKind, ModelSpec,
    WeightBundle,
};
use crate::nn::{Adam, GradBuf, ParamVisitor, Scalar};
use crate::rng::{hash64, DetRng};
use crate::signal::egc_combine;

/// Seed-derivation tags for the training domain.
mod tag {
    pub const SHUFFLE: u64 = 0x5F;
    pub const DONOR: u64 = 0xD0;
    pub const VOTING: u64 = 0x70;
    pub const MC_RUN: u64 = 0x3C;
}

/// Fixed per-batch work unit; keeps gradient reduction order independent of
/// the worker count.
const GRAD_CHUNK: usize = 16;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Hyperparams {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams { epochs: 10, batch_size: 128, learning_rate: 1e-3, seed: 0 }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.epochs < 1 {
            return Err(Error::InvalidArgument("epochs must be at least 1".to_string()));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidArgument("batch_size must be at least 1".to_string()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::InvalidArgument("learning_rate must be positive".to_string()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub metrics: Vec<EpochMetrics>,
    /// 1-based epoch with the highest validation accuracy (earliest on ties).
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub best_weights: WeightBundle,
    pub wall_time_s: f64,
}

/// Model-selection rule: highest validation accuracy, earliest epoch on ties.
#[derive(Debug, Clone, Default)]
pub(crate) struct BestTracker {
    pub best_epoch: usize,
    pub best_acc: f64,
}

impl BestTracker {
    pub fn update(&mut self, epoch: usize, acc: f64) -> bool {
        if self.best_epoch == 0 || acc > self.best_acc {
            self.best_epoch = epoch;
            self.best_acc = acc;
            true
        } else {
            false
        }
    }
}

/// Anything trainable by [`train_supervised`]: a vector-in, probabilities-out
/// network with enumerable parameters.
pub trait TrainableNet<F: Scalar>: ParamVisitor<F> + Send + Sync {
    type Ws: Send;
    fn make_ws(&self) -> Self::Ws;
    fn forward_probs<'w>(&self, x: &[F], ws: &'w mut Self::Ws) -> &'w [F];
    /// Forward + backward for one example, accumulating gradients; returns
    /// the loss.
    fn example_grad(&self, x: &[F], label: usize, ws: &mut Self::Ws, grads: &mut GradBuf<F>)
        -> F;
}

impl<F: Scalar> TrainableNet<F> for Classifier<F> {
    type Ws = ClassifierWorkspace<F>;
    fn make_ws(&self) -> Self::Ws {
        self.make_workspace()
    }
    fn forward_probs<'w>(&self, x: &[F], ws: &'w mut Self::Ws) -> &'w [F] {
        self.forward(x, ws)
    }
    fn example_grad(
        &self,
        x: &[F],
        label: usize,
        ws: &mut Self::Ws,
        grads: &mut GradBuf<F>,
    ) -> F {
        Classifier::example_grad(self, x, label, ws, grads)
    }
}

impl<F: Scalar> TrainableNet<F> for DecisionHead<F> {
    type Ws = HeadWorkspace<F>;
    fn make_ws(&self) -> Self::Ws {
        self.make_workspace()
    }
    fn forward_probs<'w>(&self, x: &[F], ws: &'w mut Self::Ws) -> &'w [F] {
        self.forward(x, ws)
    }
    fn example_grad(
        &self,
        x: &[F],
        label: usize,
        ws: &mut Self::Ws,
        grads: &mut GradBuf<F>,
    ) -> F {
        self.forward(x, ws);
        let loss = self.last_loss(ws, label);
        self.backward(x, label, ws, None, grads, 0);
        loss
    }
}

/// A labeled training example: prepared input vector plus class index.
pub type Example<F> = (Vec<F>, usize);

#[cfg(feature = "std")]
fn now_seconds() -> f64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

#[cfg(not(feature = "std"))]
fn now_seconds() -> f64 {
    0.0
}

/// Sum of per-example gradients and losses over one batch, reduced in fixed
/// chunk order (deterministic under any worker count).
fn batch_grads<F: Scalar, N: TrainableNet<F>>(
    net: &N,
    batch: &[&Example<F>],
    acc: &mut GradBuf<F>,
) -> f64 {
    let chunk_results: Vec<(GradBuf<F>, f64)> = {
        let work = |chunk: &[&Example<F>]| {
            let mut ws = net.make_ws();
            let mut grads = GradBuf::zeros_like(net);
            let mut loss_sum = 0.0f64;
            for (x, label) in chunk.iter().map(|e| (&e.0, e.1)) {
                loss_sum += net.example_grad(x, label, &mut ws, &mut grads).as_f64();
            }
            (grads, loss_sum)
        };
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            batch.par_chunks(GRAD_CHUNK).map(work).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            batch.chunks(GRAD_CHUNK).map(work).collect()
        }
    };
    let mut loss = 0.0;
    for (g, l) in &chunk_results {
        acc.add_from(g);
        loss += l;
    }
    loss
}

/// Fraction of examples whose argmax prediction matches the label.
pub fn accuracy_on<F: Scalar, N: TrainableNet<F>>(net: &N, examples: &[Example<F>]) -> f64 {
    if examples.is_empty() {
        return 0.0;
    }
    let count = |chunk: &[Example<F>]| {
        let mut ws = net.make_ws();
        let mut correct = 0usize;
        for (x, label) in chunk.iter().map(|e| (&e.0, e.1)) {
            let probs = net.forward_probs(x, &mut ws);
            let mut best = 0;
            for i in 1..probs.len() {
                if probs[i] > probs[best] {
                    best = i;
                }
            }
            if best == label {
                correct += 1;
            }
        }
        correct
    };
    let correct: usize = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            examples.par_chunks(GRAD_CHUNK).map(count).sum()
        }
        #[cfg(not(feature = "parallel"))]
        {
            examples.chunks(GRAD_CHUNK).map(count).sum()
        }
    };
    correct as f64 / examples.len() as f64
}

/// Mini-batch Adam over cross-entropy with per-epoch validation and early
/// stopping. The network is left at the best-epoch weights, which are also
/// returned as a bundle. Frozen parameters are never touched.
pub fn train_supervised<F: Scalar, N: TrainableNet<F>>(
    net: &mut N,
    train: &[Example<F>],
    val: &[Example<F>],
    hp: &Hyperparams,
) -> Result<TrainResult> {
    hp.validate()?;
    if net.trainable_count() == 0 {
        return Err(Error::ContractViolation(
            "model has no trainable parameters".to_string(),
        ));
    }
    if train.is_empty() || val.is_empty() {
        return Err(Error::InvalidArgument("train and val splits must be non-empty".to_string()));
    }

    let started = now_seconds();
    let mut adam = Adam::new(net, F::from_f64(hp.learning_rate));
    let mut grads = GradBuf::zeros_like(net);
    let mut tracker = BestTracker::default();
    let mut best_weights = WeightBundle::from_net(net);
    let mut metrics = Vec::with_capacity(hp.epochs);
    let mut order: Vec<usize> = (0..train.len()).collect();

    for epoch in 1..=hp.epochs {
        let epoch_start = now_seconds();
        let mut rng = DetRng::new(hash64(&[hp.seed, tag::SHUFFLE, epoch as u64]));
        rng.shuffle(&mut order);

        let mut loss_sum = 0.0f64;
        for (batch_idx, batch_ids) in order.chunks(hp.batch_size).enumerate() {
            let batch: Vec<&Example<F>> = batch_ids.iter().map(|&i| &train[i]).collect();
            grads.zero();
            let batch_loss = batch_grads(net, &batch, &mut grads);
            if !batch_loss.is_finite() {
                return Err(Error::Divergence { epoch, batch: batch_idx });
            }
            loss_sum += batch_loss;
            adam.step(net, &grads, F::from_f64(1.0 / batch.len() as f64));
        }

        let val_accuracy = accuracy_on(net, val);
        if tracker.update(epoch, val_accuracy) {
            best_weights = WeightBundle::from_net(net);
        }
        metrics.push(EpochMetrics {
            epoch,
            train_loss: loss_sum / train.len() as f64,
            val_accuracy,
            wall_time_s: now_seconds() - epoch_start,
        });
    }

    best_weights.apply_to(net)?;
    Ok(TrainResult {
        metrics,
        best_epoch: tracker.best_epoch,
        best_val_accuracy: tracker.best_acc,
        best_weights,
        wall_time_s: now_seconds() - started,
    })
}

// ---------------------------------------------------------------------------
// Example preparation
// ---------------------------------------------------------------------------

/// EGC-combine a record and clip/normalize to `input_size`.
pub fn central_example<F: Scalar>(record: &FrameRecord, input_size: usize) -> Result<Example<F>> {
    let combined = egc_combine(&record.ru_frames)?;
    Ok((prepare_input(&combined, input_size)?, record.label.index()))
}

/// Central examples for a whole split.
pub fn central_examples<F: Scalar>(
    records: &[FrameRecord],
    input_size: usize,
) -> Result<Vec<Example<F>>> {
    records.iter().map(|r| central_example(r, input_size)).collect()
}

/// One example per (record, RU) pair: each branch frame clipped and
/// normalized on its own. Covers the full per-branch SNR range.
pub fn per_branch_examples<F: Scalar>(
    records: &[FrameRecord],
    input_size: usize,
) -> Result<Vec<Example<F>>> {
    let mut out = Vec::with_capacity(records.len() * records.first().map_or(0, |r| r.ru_frames.len()));
    for r in records {
        for frame in &r.ru_frames {
            out.push((prepare_input(frame, input_size)?, r.label.index()));
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Approach {
    Central,
    Distributed,
    Hybrid,
}

impl Approach {
    pub fn name(self) -> &'static str {
        match self {
            Approach::Central => "central",
            Approach::Distributed => "distributed",
            Approach::Hybrid => "hybrid",
        }
    }
}

/// Train/val/test record slices.
#[derive(Clone, Copy)]
pub struct DataSplits<'a> {
    pub train: &'a [FrameRecord],
    pub val: &'a [FrameRecord],
    pub test: &'a [FrameRecord],
}

/// One experiment: approach, model shape and hyperparameters.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub approach: Approach,
    pub spec: ModelSpec,
    pub hp: Hyperparams,
    /// Data the RU donor trains on (distributed/hybrid phase 1).
    pub ru_donor: DonorData,
}

impl PipelineConfig {
    pub fn new(approach: Approach, spec: ModelSpec, hp: Hyperparams) -> Self {
        PipelineConfig { approach, spec, hp, ru_donor: DonorData::PerBranch }
    }
}

/// A trained model of any topology.
#[derive(Debug, Clone)]
pub enum AnyModel<F> {
    Central(CentralModel<F>),
    Distributed(DistributedModel<F>),
    Hybrid(HybridModel<F>),
}

/// Per-phase training results, tagged by phase name.
pub type PhaseResults = Vec<(String, TrainResult)>;

/// What a donor training consumes.
///
/// `Egc` (the combined signal) matches the training schematic and is always
/// used for the central baseline and the hybrid DU donor. For RU donors the
/// default is `PerBranch`: single-RU windows whose SNR spread covers what
/// the deployed RU model will actually see. On narrow SNR grids an
/// EGC-trained RU donor is out of distribution on low-SNR branches and the
/// distributed model falls measurably behind the central baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum DonorData {
    Egc,
    PerBranch,
}

impl DonorData {
    fn tag(self) -> u64 {
        match self {
            DonorData::Egc => 0,
            DonorData::PerBranch => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DonorData::Egc => "egc",
            DonorData::PerBranch => "per_branch",
        }
    }
}

/// Memoized donor trainings keyed by `(input_size, n_stacks, data mode, seed)`.
#[derive(Debug, Default)]
pub struct DonorCache {
    entries: BTreeMap<(usize, usize, DonorData, u64), (WeightBundle, TrainResult)>,
}

impl DonorCache {
    pub fn new() -> Self {
        DonorCache { entries: BTreeMap::new() }
    }

    /// Seed a donor training derives from the run seed, its shape and its
    /// data mode only, so equal donors share one training within a run.
    pub fn donor_seed(run_seed: u64, input_size: usize, n_stacks: usize, mode: DonorData) -> u64 {
        hash64(&[run_seed, tag::DONOR, input_size as u64, n_stacks as u64, mode.tag()])
    }

    /// Human-readable provenance id of a donor.
    pub fn donor_id(hp_seed: u64, input_size: usize, n_stacks: usize, mode: DonorData) -> String {
        format!(
            "donor:central(in={input_size},stacks={n_stacks},data={},seed={})",
            mode.name(),
            Self::donor_seed(hp_seed, input_size, n_stacks, mode)
        )
    }

    /// Train (or reuse) the central donor for `(input_size, n_stacks, mode)`.
    pub fn get_or_train(
        &mut self,
        input_size: usize,
        n_stacks: usize,
        mode: DonorData,
        data: &DataSplits<'_>,
        hp: &Hyperparams,
    ) -> Result<&(WeightBundle, TrainResult)> {
        let seed = Self::donor_seed(hp.seed, input_size, n_stacks, mode);
        let key = (input_size, n_stacks, mode, seed);
        if !self.entries.contains_key(&key) {
            let (train, val) = match mode {
                DonorData::Egc => (
                    central_examples::<f32>(data.train, input_size)?,
                    central_examples::<f32>(data.val, input_size)?,
                ),
                DonorData::PerBranch => (
                    per_branch_examples::<f32>(data.train, input_size)?,
                    per_branch_examples::<f32>(data.val, input_size)?,
                ),
            };
            let mut net = Classifier::<f32>::new(
                input_size,
                n_stacks,
                crate::model::N_CLASSES,
                seed,
            )?;
            let result = train_supervised(&mut net, &train, &val, hp)?;
            self.entries.insert(key, (WeightBundle::from_net(&net), result));
        }
        Ok(self.entries.get(&key).unwrap())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Insert an externally trained donor (e.g. loaded from a checkpoint).
    pub fn insert(
        &mut self,
        input_size: usize,
        n_stacks: usize,
        mode: DonorData,
        seed: u64,
        bundle: WeightBundle,
        result: TrainResult,
    ) {
        self.entries.insert((input_size, n_stacks, mode, seed), (bundle, result));
    }
}

fn tag_phase(e: Error, phase: &str) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::InvalidArgument(format!("[{phase}] {m}")),
        Error::ContractViolation(m) => Error::ContractViolation(format!("[{phase}] {m}")),
        other => other,
    }
}

/// Build a frozen RU (or DU donor) classifier from a donor bundle.
fn frozen_classifier_from_donor(
    input_size: usize,
    n_stacks: usize,
    donor: &WeightBundle,
    donor_id: &str,
) -> Result<Classifier<f32>> {
    let mut net = Classifier::<f32>::new(input_size, n_stacks, crate::model::N_CLASSES, 0)?;
    transfer_weights(donor, &mut net, &[Block::FeatureExtraction, Block::Decision], donor_id)?;
    Ok(net)
}

/// Single train_supervised run over EGC-combined inputs.
pub fn train_central_pipeline(
    spec: &ModelSpec,
    data: &DataSplits<'_>,
    hp: &Hyperparams,
    donors: &mut DonorCache,
) -> Result<(CentralModel<f32>, PhaseResults)> {
    if spec.kind != ModelKind::Central {
        return Err(Error::InvalidArgument("central pipeline needs a central spec".to_string()));
    }
    spec.validate()?;
    let (bundle, result) = donors
        .get_or_train(spec.input_size, spec.n_stacks, DonorData::Egc, data, hp)
        .map_err(|e| tag_phase(e, "central"))?
        .clone();
    let mut net =
        Classifier::<f32>::new(spec.input_size, spec.n_stacks, spec.n_classes, 0)?;
    bundle.apply_to(&mut net)?;
    net.set_frozen(false);
    Ok((
        CentralModel { spec: spec.clone(), net },
        alloc::vec![("central".to_string(), result)],
    ))
}

/// Phase 1: central donor at the RU shape, transferred and frozen.
/// Phase 2: voting head over concatenated per-RU soft decisions.
pub fn train_distributed_pipeline(
    spec: &ModelSpec,
    data: &DataSplits<'_>,
    hp: &Hyperparams,
    ru_donor: DonorData,
    donors: &mut DonorCache,
) -> Result<(DistributedModel<f32>, PhaseResults)> {
    if spec.kind != ModelKind::DistributedEnsemble {
        return Err(Error::InvalidArgument(
            "distributed pipeline needs a distributed spec".to_string(),
        ));
    }
    spec.validate()?;
    let mut phases = PhaseResults::new();

    // Phase 1.
    let donor_id = DonorCache::donor_id(hp.seed, spec.input_size, spec.n_stacks, ru_donor);
    let (donor_bundle, donor_result) = donors
        .get_or_train(spec.input_size, spec.n_stacks, ru_donor, data, hp)
        .map_err(|e| tag_phase(e, "phase1-ru-donor"))?
        .clone();
    phases.push(("phase1-ru-donor".to_string(), donor_result));
    let ru = frozen_classifier_from_donor(spec.input_size, spec.n_stacks, &donor_bundle, &donor_id)
        .map_err(|e| tag_phase(e, "phase1-ru-donor"))?;

    // Phase 2.
    let voting_seed = hash64(&[hp.seed, tag::VOTING, spec.n_ru as u64]);
    let mut model = DistributedModel::assemble(ru, spec.n_ru, voting_seed)
        .map_err(|e| tag_phase(e, "phase2-voting"))?;
    let train = concat_examples_distributed(&model, data.train)
        .map_err(|e| tag_phase(e, "phase2-voting"))?;
    let val = concat_examples_distributed(&model, data.val)
        .map_err(|e| tag_phase(e, "phase2-voting"))?;
    let result = train_supervised(&mut model.voting, &train, &val, hp)
        .map_err(|e| tag_phase(e, "phase2-voting"))?;
    phases.push(("phase2-voting".to_string(), result));

    Ok((model, phases))
}

/// Phases 1 and 2 train the RU and DU donors (independent); phase 3 trains
/// the voting head over `[soft decisions .. DU features]`.
pub fn train_hybrid_pipeline(
    spec: &ModelSpec,
    data: &DataSplits<'_>,
    hp: &Hyperparams,
    ru_donor: DonorData,
    donors: &mut DonorCache,
) -> Result<(HybridModel<f32>, PhaseResults)> {
    if spec.kind != ModelKind::HybridEnsemble {
        return Err(Error::InvalidArgument("hybrid pipeline needs a hybrid spec".to_string()));
    }
    spec.validate()?;
    let du_input = spec.du_input_size.expect("validated");
    let du_stacks = spec.du_n_stacks.expect("validated");
    let mut phases = PhaseResults::new();

    // Phase 1: RU donor.
    let ru_donor_id = DonorCache::donor_id(hp.seed, spec.input_size, spec.n_stacks, ru_donor);
    let (ru_bundle, ru_result) = donors
        .get_or_train(spec.input_size, spec.n_stacks, ru_donor, data, hp)
        .map_err(|e| tag_phase(e, "phase1-ru-donor"))?
        .clone();
    phases.push(("phase1-ru-donor".to_string(), ru_result));
    let ru = frozen_classifier_from_donor(spec.input_size, spec.n_stacks, &ru_bundle, &ru_donor_id)
        .map_err(|e| tag_phase(e, "phase1-ru-donor"))?;

    // Phase 2: DU donor (always EGC-fed; that is the signal it will see).
    let du_donor_id = DonorCache::donor_id(hp.seed, du_input, du_stacks, DonorData::Egc);
    let (du_bundle, du_result) = donors
        .get_or_train(du_input, du_stacks, DonorData::Egc, data, hp)
        .map_err(|e| tag_phase(e, "phase2-du-donor"))?
        .clone();
    phases.push(("phase2-du-donor".to_string(), du_result));
    let du_net = frozen_classifier_from_donor(du_input, du_stacks, &du_bundle, &du_donor_id)
        .map_err(|e| tag_phase(e, "phase2-du-donor"))?;
    let du_fx = du_net.fx;

    // Phase 3: voting head.
    let voting_seed = hash64(&[hp.seed, tag::VOTING, spec.n_ru as u64, du_input as u64]);
    let mut model = HybridModel::assemble(ru, du_fx, spec.n_ru, voting_seed)
        .map_err(|e| tag_phase(e, "phase3-voting"))?;
    let train = concat_examples_hybrid(&model, data.train)
        .map_err(|e| tag_phase(e, "phase3-voting"))?;
    let val =
        concat_examples_hybrid(&model, data.val).map_err(|e| tag_phase(e, "phase3-voting"))?;
    let result = train_supervised(&mut model.voting, &train, &val, hp)
        .map_err(|e| tag_phase(e, "phase3-voting"))?;
    phases.push(("phase3-voting".to_string(), result));

    Ok((model, phases))
}

/// Cached voting-head inputs for a distributed model (the RU weights are
/// frozen, so soft decisions are computed once per record).
pub fn concat_examples_distributed(
    model: &DistributedModel<f32>,
    records: &[FrameRecord],
) -> Result<Vec<Example<f32>>> {
    let work = |chunk: &[FrameRecord]| -> Result<Vec<Example<f32>>> {
        let mut ws = model.ru_net.make_workspace();
        let mut out = Vec::with_capacity(chunk.len());
        for r in chunk {
            let mut v = Vec::with_capacity(model.concat_len());
            model.concat_into(r, &mut ws, &mut v)?;
            out.push((v, r.label.index()));
        }
        Ok(out)
    };
    collect_chunks(records, work)
}

/// Cached voting-head inputs for a hybrid model.
pub fn concat_examples_hybrid(
    model: &HybridModel<f32>,
    records: &[FrameRecord],
) -> Result<Vec<Example<f32>>> {
    let work = |chunk: &[FrameRecord]| -> Result<Vec<Example<f32>>> {
        let mut ru_ws = model.ru_net.make_workspace();
        let mut du_ws = model.du_fx.make_workspace();
        let mut out = Vec::with_capacity(chunk.len());
        for r in chunk {
            let mut v = Vec::with_capacity(model.concat_len());
            model.concat_into(r, &mut ru_ws, &mut du_ws, &mut v)?;
            out.push((v, r.label.index()));
        }
        Ok(out)
    };
    collect_chunks(records, work)
}

fn collect_chunks<T: Send, W>(records: &[FrameRecord], work: W) -> Result<Vec<T>>
where
    W: Fn(&[FrameRecord]) -> Result<Vec<T>> + Send + Sync,
{
    let chunked: Vec<Result<Vec<T>>> = {
        #[cfg(feature = "parallel")]
        {
            use rayon::prelude::*;
            records.par_chunks(GRAD_CHUNK).map(&work).collect()
        }
        #[cfg(not(feature = "parallel"))]
        {
            records.chunks(GRAD_CHUNK).map(&work).collect()
        }
    };
    let mut out = Vec::with_capacity(records.len());
    for c in chunked {
        out.extend(c?);
    }
    Ok(out)
}

/// Dispatch a pipeline by approach.
pub fn run_pipeline(
    pc: &PipelineConfig,
    data: &DataSplits<'_>,
    donors: &mut DonorCache,
) -> Result<(AnyModel<f32>, PhaseResults)> {
    match pc.approach {
        Approach::Central => {
            let (m, p) = train_central_pipeline(&pc.spec, data, &pc.hp, donors)?;
            Ok((AnyModel::Central(m), p))
        }
        Approach::Distributed => {
            let (m, p) = train_distributed_pipeline(&pc.spec, data, &pc.hp, pc.ru_donor, donors)?;
            Ok((AnyModel::Distributed(m), p))
        }
        Approach::Hybrid => {
            let (m, p) = train_hybrid_pipeline(&pc.spec, data, &pc.hp, pc.ru_donor, donors)?;
            Ok((AnyModel::Hybrid(m), p))
        }
    }
}

/// Hyperparameters for Monte-Carlo run `run_idx` (fresh init and shuffles,
/// same dataset).
pub fn mc_run_hp(hp: &Hyperparams, run_idx: usize) -> Hyperparams {
    Hyperparams { seed: hash64(&[hp.seed, tag::MC_RUN, run_idx as u64]), ..hp.clone() }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_tracker_earliest_max() {
        let mut t = BestTracker::default();
        assert!(t.update(1, 0.30));
        assert!(t.update(2, 0.50));
        assert!(!t.update(3, 0.45));
        assert_eq!(t.best_epoch, 2);
        assert_eq!(t.best_acc, 0.50);
        // Ties keep the earliest epoch.
        assert!(!t.update(4, 0.50));
        assert_eq!(t.best_epoch, 2);
    }

    #[test]
    fn hyperparams_validation() {
        assert!(Hyperparams::default().validate().is_ok());
        assert!(Hyperparams { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(Hyperparams { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(Hyperparams { learning_rate: 0.0, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn mc_run_seeds_differ() {
        let hp = Hyperparams::default();
        assert_ne!(mc_run_hp(&hp, 0).seed, mc_run_hp(&hp, 1).seed);
        assert_eq!(mc_run_hp(&hp, 0).seed, mc_run_hp(&hp, 0).seed);
    }
}
