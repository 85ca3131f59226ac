//! Faster-than-Nyquist (FTN) link simulator with frequency-domain
//! superimposed-pilot channel estimation and spectral interference
//! alignment (SIA).
//!
//! The signal chain is split into small modules that mirror the physical
//! processing stages:
//!
//! - [`dsp`]: unitary DFT, circulant eigenvalues, PSD factorization and
//!   seeded complex-Gaussian streams.
//! - [`waveform`]: raised-cosine ISI kernel and the Toeplitz/circulant ISI
//!   matrices.
//! - [`channel`]: Rayleigh block-fading taps, colored noise and the
//!   through-channel operators.
//! - [`pilot`]: Chu pilot comb, superimposition and the SIA projector.
//! - [`estimation`]: LS/MMSE comb estimators and their closed-form MSE.
//! - [`detector`]: FDE weights, equalization and ISTA-style detection.
//! - [`harness`]: configuration, seeded Monte Carlo sweeps and result files.
//!
//! All numerical modules are generic over [`Real`] (`f32` or `f64`). The
//! aliases below fix the scalar to `f64`, which is what the harness uses.

// `!(x >= 0)` is used on purpose to reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod detector;
pub mod dsp;
pub mod error;
pub mod estimation;
pub mod harness;
pub mod pilot;
pub mod scalar;
pub mod waveform;

pub use error::{Error, Result};
pub use scalar::Real;

/// Complex sample in double precision.
pub type Cplx = num_complex::Complex<f64>;
/// Complex sample in single precision.
pub type Cplx32 = num_complex::Complex<f32>;

pub type Dft = dsp::Dft<f64>;
pub type FtnParams = waveform::FtnParams<f64>;
pub type IsiKernel = waveform::IsiKernel<f64>;
pub type ChannelRealization = channel::ChannelRealization<f64>;
pub type ColoredNoiseGen = channel::ColoredNoiseGen<f64>;
pub type PilotConfig = pilot::PilotConfig<f64>;
pub type PilotComb = estimation::PilotComb<f64>;
pub type CombObservation = estimation::CombObservation<f64>;
pub type ChannelEstimate = estimation::ChannelEstimate<f64>;
pub type Constellation = detector::Constellation<f64>;
pub type EqualizerWeights = detector::EqualizerWeights<f64>;

pub type IsiKernel32 = waveform::IsiKernel<f32>;
pub type Constellation32 = detector::Constellation<f32>;

pub use detector::Criterion;
pub use dsp::RngStream;
pub use pilot::SiaProjector;
