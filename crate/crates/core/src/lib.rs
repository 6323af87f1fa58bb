//! Simulation and verification toolkit for stable limit laws of products of
//! i.i.d. positive random matrices.
//!
//! The crate is organized bottom-up:
//!
//! - [`matrix`] and [`pattern`]: allowable matrices, size functionals, Perron
//!   roots, and the decision procedure for the contraction condition (C).
//! - [`projective`]: the simplex, the projective action, the bounded distance
//!   `d`, the cocycle `ξ(g, x) = ln ‖g x‖₁`, and contraction coefficients.
//! - [`sampler`] and [`walk`]: matrix laws, the renormalized random walk, and
//!   the observables comparing scalar products, norms and spectral radii.
//! - [`stationary`]: backward-product sampling of the invariant measure ν.
//! - [`tail`]: tail-condition checks and the scaling sequences `a_n`, `b_n`.
//! - [`stable`]: the walk-versus-i.i.d. comparison and stable characteristic
//!   functions.
//! - [`spectral`]: discretized transfer and Fourier kernels for `q = 2`.
//! - [`acceptance`]: the end-to-end verification criteria.

pub mod acceptance;
pub mod error;
pub mod matrix;
pub mod pattern;
pub mod projective;
pub mod reference;
pub mod rng;
pub mod sampler;
pub mod slowly_varying;
pub mod spectral;
pub mod stable;
pub mod stationary;
pub mod stats;
pub mod tail;
pub mod walk;

pub use error::{Error, Result};
pub use matrix::{MatrixClass, Perron, PositiveMatrix, SizeFunctionals};
pub use pattern::{check_condition_c, BooleanPattern, ConditionC};
pub use projective::{act, contraction_coeff, dist, m_coeff, project, xi, ContractionEstimate, SimplexPoint};
pub use rng::SeedStream;
pub use sampler::{HeavyTailLaw, MatrixSampler, SamplerSpec, ScaledDraw, WeightedMatrix};
pub use slowly_varying::SlowlyVaryingSpec;
