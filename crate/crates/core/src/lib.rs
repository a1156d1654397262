//! Core library for desk-scale automatic modulation classification (AMC)
//! experiments in cell-free radio networks.
//!
//! The crate covers the full in-memory pipeline:
//!
//! * [`signal`] — constellation generation, modulation, flat-fading channels
//!   with exact SNR planning, and equal-gain combining (EGC).
//! * [`dataset`] — the synthetic (modulation × SNR × frame × RU) grid with
//!   deterministic seed derivation and split assignment.
//! * [`nn`] — a small dependency-free neural-network kernel (conv / dense /
//!   pooling layers with manual backprop and an Adam optimizer).
//! * [`model`] — the residual feature extractor and decision head, assembled
//!   into central, distributed (per-RU voting) and hybrid topologies with
//!   weight transfer and freezing.
//! * [`training`] — supervised training with early stopping and the one-,
//!   two- and three-phase pipelines.
//! * [`flops`] — analytic per-layer FLOP accounting per placement (RU / DU).
//! * [`eval`] — accuracy / confusion-matrix evaluation, Monte-Carlo
//!   averaging, and the shipped reference accuracy curves.
//!
//! Everything is deterministic given explicit seeds. The crate is
//! `no_std`-compatible (with `alloc`); file formats, the CLI and report
//! rendering live in the companion `cfamc` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod eval;
pub mod flops;
pub mod model;
pub mod nn;
pub mod rng;
pub mod signal;
pub mod training;

pub use error::{Error, Result};
