//! Numerical laboratory for inertial manifolds of 1D reaction–diffusion–advection
//! systems
//!
//! ```text
//! ∂ₜu + f(u)∂ₓu − ∂²ₓu + g(u) = 0,   x ∈ (0, L)
//! ```
//!
//! The pipeline: spectral discretization ([`spectral`]), time integration and
//! dissipativity ([`dynamics`]), the nonlocal change of variables `u = a(v)v`
//! ([`diffeo`]), the transformed equation with small advection
//! ([`transformed`]), the Lyapunov–Perron construction of the manifold
//! ([`manifold`]) and the Neumann / gradient-nonlinearity reductions
//! ([`neumann`]).
//!
//! Everything is generic over the scalar type ([`Real`]); the aliases below
//! fix it to `f64`, which is what the harness uses.

pub mod diffeo;
pub mod dynamics;
pub mod error;
pub mod manifold;
pub mod matrix;
pub mod neumann;
pub mod nonlinearity;
pub mod sampling;
pub mod scalar;
pub mod spectral;
pub mod transformed;

pub use error::{Error, Result};
pub use scalar::Real;
pub use spectral::{BasisKind, Block, Grid, Samples};

pub type SpectralField = spectral::SpectralField<f64>;
pub type SpectralField32 = spectral::SpectralField<f32>;
pub type MatrixField = matrix::MatrixField<f64>;
pub type Trajectory = dynamics::Trajectory<f64>;
pub type ManifoldGraph = manifold::ManifoldGraph<f64>;
