//! Full-body human motion synthesis from sparse head/hand tracking.
//!
//! The crate implements an MLP-based conditional diffusion model (and its
//! single-pass predictive baseline) that maps a 54-channel tracking signal
//! from a headset and two hand controllers to 22-joint full-body rotations
//! in the continuous 6d representation, together with forward kinematics,
//! the training loops, the evaluation metric suite, and a procedural gait
//! generator for hermetic desk-scale experiments.
//!
//! All numeric code is generic over the scalar type ([`scalar::Scalar`]);
//! the aliases below pin the f32 configuration used by training, inference,
//! and the on-disk formats. Gradient-check suites instantiate the same code
//! at f64.

pub mod cli;
pub mod diffusion;
pub mod error;
pub mod features;
pub mod gradcheck;
pub mod lossmetrics;
pub mod network;
pub mod numerics;
pub mod rotations;
pub mod skeleton;
pub mod scalar;
pub mod synthdata;
pub mod training;

pub use error::{Error, Result};

/// Storage scalar used by training, inference, and file formats.
pub type Real = f32;

/// Dense matrix in storage precision.
pub type RealTensor = numerics::Tensor2<Real>;
