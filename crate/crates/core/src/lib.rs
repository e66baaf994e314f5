//! Learned HR-to-LR image degradation modeling.
//!
//! The crate trains a supervised degradation network built around an
//! adaptive blurring layer: a fixed bank of discretized anisotropic
//! Gaussian kernels combined per channel by learned weights that sum to
//! one. Widening or narrowing the bank by a single scalar factor adapts a
//! trained model to a different imaging system without retraining.
//!
//! Everything here is `no_std` + `alloc`: pure computation over heap
//! buffers, deterministic for fixed seeds. File formats and the command
//! line live in the companion `lrsim-cli` crate.

#![no_std]

extern crate alloc;

mod fmath;

pub mod conv;
pub mod gauss;
pub mod image;
pub mod metrics;
pub mod net;
pub mod optim;
pub mod rng;
pub mod sweep;
pub mod synth;
pub mod tensor;
pub mod train;

pub use gauss::{BankSpec, Covariance2, KernelBank};
pub use image::{GrayImage, ImagePair, PatchSpec};
pub use net::{DegradationModel, NetConfig};
pub use sweep::SweepReport;
pub use tensor::Tensor;
pub use train::{TrainConfig, TrainLog};
