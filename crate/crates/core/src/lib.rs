//! Local wavelet spectra of two-dimensional fields and spectrum-based
//! verification of ensemble forecasts.
//!
//! The crate is organised bottom-up:
//!
//! * [`wavelet`] builds discrete 1D/2D wavelets, autocorrelation wavelets and
//!   the operator matrix used for bias correction.
//! * [`ndwt`] tapers and pads fields and computes the non-decimated 2D wavelet
//!   transform and its raw periodogram.
//! * [`lws`] smooths and bias-corrects periodograms into local wavelet spectra
//!   and reduces them to averaged, standardized spectrum vectors.
//! * [`sim`] synthesises locally stationary wavelet fields with a prescribed
//!   spectrum and converts between spectra and autocovariances.
//! * [`lda`] and [`verify`] implement Fisher discriminant analysis, Gaussian
//!   log-likelihood scores and posterior attribution under cross-validation.
//! * [`io`], [`manifest`], [`pipeline`] and [`report`] provide file formats
//!   and the command implementations used by the `wavespec` binary.

pub mod demo;
pub mod error;
pub mod field;
pub mod io;
pub mod lda;
pub mod lws;
pub mod manifest;
pub mod ndwt;
pub mod pipeline;
pub mod report;
pub mod sim;
pub mod verify;
pub mod wavelet;

pub use error::{Error, Result};
pub use field::Field2D;
pub use wavelet::{Direction, Family, FilterPair, OperatorMatrix};
