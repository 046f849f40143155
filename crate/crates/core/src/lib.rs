//! Evaluation engine for historical representation in text-to-image model
//! outputs.
//!
//! The engine ingests a corpus of generated images plus sidecar observation
//! files and scores it on three axes:
//!
//! * [`style`]: dominant visual style per period, with classifier-noise-aware
//!   bootstrap intervals.
//! * [`anachronism`]: language-model anachronism proposals verified by a
//!   panel of vision-language models, scored by frequency and severity.
//! * [`demographics`]: face-classifier demographics against language-model
//!   baseline estimates, as under/over-representation.
//!
//! Remote models are reached through [`gateway`], whose response cache makes
//! every run replayable offline. Numeric kernels are generic over
//! [`scalar::Real`]; the aliases below fix them to `f64`.

pub mod anachronism;
pub mod corpus;
pub mod demographics;
pub mod error;
pub mod gateway;
pub mod manifest;
pub mod report;
pub mod scalar;
pub mod style;

pub use error::{Error, Result};

pub type LinearProbe = style::LinearProbe<f64>;
pub type TrainedProbe = style::TrainedProbe<f64>;
pub type ProbeGradient = style::Gradient<f64>;
