//! Core library for joint space-time video upsampling.
//!
//! A low-resolution, low-frame-rate frame sequence goes in; a spatially
//! ×r upsampled sequence with N extra interpolated frames between each
//! input pair comes out. Everything numeric lives here: the tensor type
//! and reverse-mode autograd tape, the network (shared-weight dense-block
//! encoder, early fusion with spatio-temporal weights, flow-based feature
//! interpolation, shared-weight decoder with sub-pixel upscaling), the
//! two-phase training loop, the degradation/augmentation data pipeline
//! and the PSNR/SSIM metrics.
//!
//! The crate is `no_std`-compatible (`--no-default-features`, requires
//! `alloc`); file I/O, checkpoints and the CLI live in the companion
//! `stvu-cli` crate.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod augment;
pub mod autograd;
pub mod config;
pub mod decoder;
pub mod degrade;
pub mod encoder;
pub mod efst;
pub mod flow;
pub mod frame;
pub mod gemm;
pub mod gradcheck;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod nn;
pub mod ops;
pub mod optim;
pub mod rng;
pub mod sample;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod train;

pub use config::{ConfigError, ModelConfig, ValidatedConfig};
pub use frame::{Clip, FlowField, Frame, TimeIndex};
pub use model::Network;
pub use scalar::Scalar;
pub use tensor::Tensor;
