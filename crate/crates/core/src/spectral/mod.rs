//! Eigenbasis arithmetic for `-d²/dx²` on `(0, L)`.
//!
//! Dirichlet fields are expanded in `e_k(x) = sqrt(2/L) sin(kπx/L)`, `k ≥ 1`;
//! Neumann fields in `e_0 = sqrt(1/L)`, `e_k = sqrt(2/L) cos(kπx/L)`. Both
//! bases are orthonormal in `L²` and diagonalize `-d²/dx²` with eigenvalue
//! `(π/L)² k²`, so spectral truncation is simultaneously the `L²` and `H¹`
//! orthoprojector.

mod field;
mod grid;

pub mod direct;

pub use field::{Block, SpectralField};
pub use grid::{Grid, Samples};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisKind {
    DirichletSine,
    NeumannCosine,
}

impl BasisKind {
    /// Index of the lowest retained mode.
    pub fn first_mode(self) -> usize {
        match self {
            BasisKind::DirichletSine => 1,
            BasisKind::NeumannCosine => 0,
        }
    }

    /// Number of stored coefficients for a field resolved up to mode `n_modes`.
    pub fn coeff_count(self, n_modes: usize) -> usize {
        match self {
            BasisKind::DirichletSine => n_modes,
            BasisKind::NeumannCosine => n_modes + 1,
        }
    }

    /// The basis in which the x-derivative of a field in `self` is expanded.
    pub fn derivative_basis(self) -> BasisKind {
        match self {
            BasisKind::DirichletSine => BasisKind::NeumannCosine,
            BasisKind::NeumannCosine => BasisKind::DirichletSine,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::DirichletSine => "dirichlet",
            BasisKind::NeumannCosine => "neumann",
        }
    }
}

/// Squared wavenumber scale `(π/L)²`.
#[inline]
pub fn wavenumber_sq<T: Real>(length: T) -> T {
    let q = T::PI() / length;
    q * q
}

/// Laplacian eigenvalue `(π/L)² k²` of mode `k`.
pub fn eigenvalue<T: Real>(k: usize, length: T, basis: BasisKind) -> Result<T> {
    if !(length > T::zero()) {
        return Err(Error::Domain(format!("length must be positive, got {length}")));
    }
    if k < basis.first_mode() {
        return Err(Error::Domain(format!(
            "mode {k} does not exist in the {} basis",
            basis.name()
        )));
    }
    Ok(eigenvalue_unchecked(k, length))
}

#[inline]
pub(crate) fn eigenvalue_unchecked<T: Real>(k: usize, length: T) -> T {
    wavenumber_sq(length) * T::of(k * k)
}

/// `λ_{n+1} - λ_n = (π/L)² (2n + 1)`, formed from the integer difference so
/// that no cancellation occurs at large `n`.
pub fn gap_difference<T: Real>(n: usize, length: T) -> T {
    wavenumber_sq(length) * T::of(2 * n + 1)
}

/// `(λ_{n+1} - λ_n) / (λ_n^{1/2} + λ_{n+1}^{1/2})`, which equals `π/L` for every `n`.
pub fn gap_ratio<T: Real>(n: usize, length: T) -> T {
    let q = T::PI() / length;
    // sqrt(λ_n) + sqrt(λ_{n+1}) = (π/L)(2n + 1)
    gap_difference(n, length) / (q * T::of(2 * n + 1))
}

/// Eigenvalue gap quantities for the cut between modes `n` and `n + 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapQuantities {
    pub lambda_n: f64,
    pub lambda_n1: f64,
    pub gap_difference: f64,
    pub gap_ratio: f64,
}

pub fn gap_quantities<T: Real>(n: usize, length: T) -> GapQuantities {
    GapQuantities {
        lambda_n: eigenvalue_unchecked(n, length).f64(),
        lambda_n1: eigenvalue_unchecked(n + 1, length).f64(),
        gap_difference: gap_difference(n, length).f64(),
        gap_ratio: gap_ratio(n, length).f64(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn eigenvalues_of_reference_modes() {
        assert!((eigenvalue(3, PI, BasisKind::DirichletSine).unwrap() - 9.0).abs() < 1e-12);
        assert!((eigenvalue(1, PI, BasisKind::DirichletSine).unwrap() - 1.0).abs() < 1e-14);
        assert_eq!(eigenvalue(0, 2.0, BasisKind::NeumannCosine).unwrap(), 0.0);
    }

    #[test]
    fn eigenvalue_rejects_invalid_modes() {
        assert!(matches!(
            eigenvalue(0, PI, BasisKind::DirichletSine),
            Err(Error::Domain(_))
        ));
        assert!(eigenvalue(1, -1.0, BasisKind::NeumannCosine).is_err());
    }

    #[test]
    fn gap_ratio_values() {
        assert!((gap_ratio(1, PI) - 1.0).abs() < 1e-15);
        assert!((gap_ratio(100, PI) - 1.0).abs() < 1e-15);
        assert!((gap_ratio(4, 2.0 * PI) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gap_difference_values() {
        assert!((gap_difference(5, PI) - 11.0).abs() < 1e-13);
        assert!((gap_difference(1, PI) - 3.0).abs() < 1e-14);
        let expected = 21.0 * PI * PI;
        assert!((gap_difference(10, 1.0) - expected).abs() < 1e-12 * expected);
    }

    #[test]
    fn gap_difference_matches_eigenvalue_difference() {
        for n in 1..50 {
            let direct: f64 = eigenvalue(n + 1, 1.3, BasisKind::DirichletSine).unwrap()
                - eigenvalue(n, 1.3, BasisKind::DirichletSine).unwrap();
            let g: f64 = gap_difference(n, 1.3);
            assert!((direct - g).abs() <= 1e-11 * g);
        }
    }

    #[test]
    fn single_precision_gap_ratio() {
        let r: f32 = gap_ratio(7, std::f32::consts::PI);
        assert!((r - 1.0).abs() < 1e-6);
    }
}
