//! Spectral analysis of cough recordings guided by occlusion maps.
//!
//! The pipeline: decode WAV audio, decimate 5x behind an anti-alias filter,
//! cut the signal into 1-second chunks, turn each chunk into a 45x100 power
//! spectrogram, score windows with a CNN (or a band-energy reference
//! scorer), compute occlusion maps for high-confidence cough windows,
//! average per patient, threshold-weight the averaged spectrogram by its
//! map, extract seven spectral features, and compare patient groups with a
//! Gaussianity-gated t / Mann-Whitney protocol.

pub mod audio;
pub mod cnn;
pub mod error;
pub mod features;
mod matfile;
pub mod special;
pub mod spectrogram;
pub mod stats;
pub mod xai;

pub use error::{Error, Result};
