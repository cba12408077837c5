//! Convolutive non-negative autoencoder models of audio spectrograms.
//!
//! The crate trains three autoencoder families (feed-forward, CNN-CNN, and
//! recurrent-convolutional) generatively on clean-source magnitude
//! spectrograms, separates two-source mixtures by optimizing the
//! autoencoder inputs while the weights stay frozen, and scores the masked
//! time-domain outputs with projection-based SDR/SIR/SAR metrics.

pub mod autodiff;
pub mod dsp;
pub mod error;
pub mod metrics;
pub mod model;
pub mod separation;

pub use error::{Error, Result};
