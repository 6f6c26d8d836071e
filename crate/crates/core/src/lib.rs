//! Finite-difference simulation of the one-dimensional focusing stochastic
//! nonlinear Schrödinger equation
//!
//! ```text
//! i u_t + u_xx + |u|^{2 sigma} u = eps f(u)
//! ```
//!
//! with additive or multiplicative space-time white noise, three
//! mass-conservative time-stepping schemes and mass-conservative adaptive mesh
//! refinement for following blow-up.
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the `*64` and
//! `*32` aliases below fix the precision.

pub mod error;
pub mod experiments;
pub mod mesh;
pub mod noise;
pub mod observables;
pub mod scalar;
pub mod schemes;

pub use error::{Error, Result};
pub use scalar::{Scalar, C};

pub type Mesh64 = mesh::Mesh<f64>;
pub type Mesh32 = mesh::Mesh<f32>;
pub type State64 = schemes::State<f64>;
pub type State32 = schemes::State<f32>;
pub type SolverConfig64 = schemes::SolverConfig<f64>;
pub type SolverConfig32 = schemes::SolverConfig<f32>;
pub type NoiseModel64 = noise::NoiseModel<f64>;
pub type NoiseModel32 = noise::NoiseModel<f32>;
pub type Complex64 = C<f64>;
pub type Complex32 = C<f32>;
