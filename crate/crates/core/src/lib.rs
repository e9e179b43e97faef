//! Shape-variant context for semantic segmentation.
//!
//! A paired convolution compares every pixel with each neighbour in a
//! `K x K` window and a Gaussian turns the discrepancies into a per-pixel
//! shape mask. The mask reweights a location-invariant kernel bank
//! ([`svconv`]), so the receptive field follows semantically related
//! pixels instead of a fixed square. A labeling-denoising decoder
//! ([`denoise`]) suppresses low-level scores of classes that the
//! higher-level scores consider absent.
//!
//! Every operator has a hand-derived backward pass. [`gradcheck`] checks
//! them against central finite differences and [`reference`] holds naive
//! loop implementations used as test oracles.

pub mod ablation;
pub mod cli;
pub mod data;
pub mod denoise;
pub mod error;
pub mod gradcheck;
pub mod net;
pub mod ops;
pub mod paired;
pub mod reference;
pub mod svconv;
pub mod tensor;

pub use error::{Error, Result};
pub use paired::{PairedConvParams, ShapeMask};
pub use svconv::SvConvLayer;
pub use tensor::Tensor;
