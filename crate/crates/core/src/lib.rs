//! Rolling-shutter optical camera communication at one symbol per pixel row.
//!
//! The camera is modeled as a rectangular matched filter of width `T_exp`
//! followed by sampling at the row rate `1/T_exp`. A timing offset between the
//! LED symbol clock and the row sweep turns into inter-symbol interference,
//! which the receiver removes with a least-squares channel estimate from a
//! known preamble and a zero-forcing equalizer.
//!
//! Modules, in signal order:
//!
//! - [`modem`]: M-PAM Gray mapping, framing, DC-biased rectangular pulses, slicing
//! - [`optics`]: LED low-pass, optical path gain, AWGN
//! - [`camera`]: exposure matched filter, row sampling, stripe images and PGM I/O
//! - [`equalizer`]: preamble sync, LS channel estimation, ZF design and equalization
//! - [`metrics`]: error rates, histograms, cluster counting
//! - [`numerics`]: convolution, Toeplitz matrices, QR least squares, seeded Gaussian
//! - [`link`]: the above wired together for simulation and decoding

pub mod camera;
pub mod equalizer;
pub mod error;
pub mod link;
pub mod metrics;
pub mod modem;
pub mod numerics;
pub mod optics;
pub mod waveform;

pub use error::{Error, Result};
pub use waveform::Waveform;
