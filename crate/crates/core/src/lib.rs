//! Archimedean copulas represented through their Williamson measures.
//!
//! A [`WilliamsonMeasure`] γ on `(0, ∞)` determines the generator
//! `ψ(z) = ∫ (1 − t·z)_+^{d−1} dγ(t)` and with it the copula
//! `C(x) = ψ(φ(x₁) + ⋯ + φ(x_d))`. Kernels, level-set masses and the Kendall
//! distribution function are all computed from truncated moments of γ.

// `!(a > b)` is used on purpose so that NaN takes the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx;
pub mod checks;
pub mod copula;
pub mod error;
pub mod gallery;
pub mod generator;
pub mod measure;
pub mod quadrature;
pub mod sampling;
pub mod stats;

pub use copula::{ArchimedeanCopula, Branch, KernelEval, Method};
pub use error::{Error, Result};
pub use generator::{Extended, Generator};
pub use measure::{rescale, Atom, Law, WilliamsonMeasure};
pub use sampling::{SamplerConfig, Points};
