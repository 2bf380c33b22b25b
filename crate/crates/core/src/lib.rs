//! Full-matrix adaptive optimization with a windowed, low-rank preconditioner.
//!
//! The central object is the operator `[(G Gᵀ)^{1/2} + εI]⁻¹`, where `G` is a
//! `d × r` window of recent gradients. It is applied using only an `r × r`
//! symmetric eigendecomposition and `d × r` products ([`lowrank`]), which makes
//! the full-matrix update cost `O(d r² + r³)` per step instead of `O(d³)`.
//!
//! Modules:
//!
//! - [`lowrank`]: the fast preconditioner and a dense brute-force reference.
//! - [`window`]: the cyclic, exponentially attenuated gradient window.
//! - [`optimizers`]: GGT and the baselines (SGD, AdaGrad, Adam, windowed
//!   diagonal, dense full-matrix AdaGrad) behind one [`optimizers::Optimizer`] trait.
//! - [`problems`]: stochastic gradient oracles for the synthetic benchmarks.
//! - [`theory`]: AdaGrad with epochs, the proximal non-convex reduction, and the
//!   adaptivity ratio.
//! - [`spectra`]: eigenvalue snapshots of `GᵀG` taken during training.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! and `*32` aliases below fix the common instantiations.

// `!(x > 0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod linalg;
pub mod lowrank;
pub mod optimizers;
pub mod problems;
pub mod scalar;
pub mod spectra;
pub mod theory;
pub mod window;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type LowRankFactor64 = lowrank::LowRankFactor<f64>;
pub type LowRankFactor32 = lowrank::LowRankFactor<f32>;
pub type Preconditioner64 = lowrank::Preconditioner<f64>;
pub type Preconditioner32 = lowrank::Preconditioner<f32>;
pub type GradientWindow64 = window::GradientWindow<f64>;
pub type GradientWindow32 = window::GradientWindow<f32>;
pub type GgtConfig64 = optimizers::GgtConfig<f64>;
pub type GgtConfig32 = optimizers::GgtConfig<f32>;
pub type Ggt64 = optimizers::Ggt<f64>;
pub type Ggt32 = optimizers::Ggt<f32>;
pub type SpectrumSnapshot64 = spectra::SpectrumSnapshot<f64>;
pub type SpectrumSnapshot32 = spectra::SpectrumSnapshot<f32>;
