//! Raman spectrum denoising toolkit.
//!
//! * [`synth`] builds clean spectra, fluorescence-like baselines and noisy
//!   pairs at a calibrated SNR.
//! * [`airpls`] removes baselines.
//! * [`wavelet`] denoises with six shrinkage rules.
//! * [`cnn`] is a from-scratch 1-D convolutional regression network.
//! * [`metrics`] scores outputs; [`bench`] chains everything.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod airpls;
pub mod bench;
pub mod cnn;
pub mod error;
pub mod metrics;
pub mod rng;
pub mod spectrum;
pub mod synth;
pub mod wavelet;

pub use error::{Error, Result};
pub use spectrum::{
    make_spectrum, read_dataset, write_dataset, Dataset, Spectrum, SpectrumPair, Split,
};
