use serde::{Deserialize, Serialize};

use super::{eigenvalue_unchecked, BasisKind};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// An `m`-component function on `(0, L)` stored by its eigenbasis coefficients.
///
/// Coefficients are component-major: component `c` occupies
/// `coeffs[c * count .. (c + 1) * count]` where `count` is
/// [`BasisKind::coeff_count`]. Coefficient `i` belongs to mode
/// `i + basis.first_mode()`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct SpectralField<T> {
    basis: BasisKind,
    #[serde(rename = "L")]
    length: T,
    m: usize,
    #[serde(rename = "N_total")]
    n_modes: usize,
    coeffs: Vec<T>,
}

impl<T: Real> SpectralField<T> {
    pub fn zeros(basis: BasisKind, length: T, m: usize, n_modes: usize) -> Self {
        SpectralField {
            basis,
            length,
            m,
            n_modes,
            coeffs: vec![T::zero(); m * basis.coeff_count(n_modes)],
        }
    }

    pub fn from_coeffs(
        basis: BasisKind,
        length: T,
        m: usize,
        n_modes: usize,
        coeffs: Vec<T>,
    ) -> Result<Self> {
        let expected = m * basis.coeff_count(n_modes);
        if coeffs.len() != expected {
            return Err(Error::SizeMismatch { expected, got: coeffs.len() });
        }
        if !(length > T::zero()) {
            return Err(Error::Domain("length must be positive".into()));
        }
        Ok(SpectralField { basis, length, m, n_modes, coeffs })
    }

    /// Single eigenmode `e_k` placed in component `c`.
    pub fn mode(basis: BasisKind, length: T, m: usize, n_modes: usize, c: usize, k: usize) -> Result<Self> {
        let mut v = Self::zeros(basis, length, m, n_modes);
        if c >= m || k < basis.first_mode() || k > n_modes {
            return Err(Error::Domain(format!("mode ({c}, {k}) out of range")));
        }
        let count = v.count();
        v.coeffs[c * count + k - basis.first_mode()] = T::one();
        Ok(v)
    }

    #[inline]
    pub fn basis(&self) -> BasisKind {
        self.basis
    }
    #[inline]
    pub fn length(&self) -> T {
        self.length
    }
    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }
    #[inline]
    pub fn n_modes(&self) -> usize {
        self.n_modes
    }
    /// Coefficients stored per component.
    #[inline]
    pub fn count(&self) -> usize {
        self.basis.coeff_count(self.n_modes)
    }
    #[inline]
    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }
    #[inline]
    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }
    #[inline]
    pub fn component(&self, c: usize) -> &[T] {
        let n = self.count();
        &self.coeffs[c * n..(c + 1) * n]
    }
    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        let n = self.count();
        &mut self.coeffs[c * n..(c + 1) * n]
    }

    /// Mode number of coefficient slot `i` within a component.
    #[inline]
    pub fn mode_of(&self, i: usize) -> usize {
        i + self.basis.first_mode()
    }

    /// Laplacian eigenvalue of coefficient slot `i`.
    #[inline]
    pub fn eigen(&self, i: usize) -> T {
        eigenvalue_unchecked(self.mode_of(i), self.length)
    }

    pub fn same_layout(&self, other: &Self) -> bool {
        self.basis == other.basis
            && self.m == other.m
            && self.n_modes == other.n_modes
            && self.length == other.length
    }

    fn check_layout(&self, other: &Self) -> Result<()> {
        if self.basis != other.basis {
            return Err(Error::BasisMismatch(format!(
                "{} vs {}",
                self.basis.name(),
                other.basis.name()
            )));
        }
        if !self.same_layout(other) {
            return Err(Error::SizeMismatch { expected: self.coeffs.len(), got: other.coeffs.len() });
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.basis, self.length, self.m, self.n_modes)
    }

    pub fn l2_norm(&self) -> T {
        crate::scalar::norm2(&self.coeffs)
    }

    pub fn h1_norm_sq(&self) -> T {
        let n = self.count();
        let mut acc = T::zero();
        for c in 0..self.m {
            for (i, &x) in self.component(c).iter().enumerate().take(n) {
                acc += (T::one() + self.eigen(i)) * x * x;
            }
        }
        acc
    }

    /// `sqrt(Σ (1 + λ_k) |v_k|²)`, i.e. `sqrt(‖v‖² + ‖∂ₓv‖²)`.
    pub fn h1_norm(&self) -> T {
        self.h1_norm_sq().sqrt()
    }

    /// `‖∂²ₓ v‖_{L²} = sqrt(Σ λ_k² |v_k|²)`.
    pub fn h2_seminorm(&self) -> T {
        let mut acc = T::zero();
        for c in 0..self.m {
            for (i, &x) in self.component(c).iter().enumerate() {
                let l = self.eigen(i);
                acc += l * l * x * x;
            }
        }
        acc.sqrt()
    }

    /// `(L², H¹, L∞)` norms; the sup norm is taken on a grid oversampled 4×.
    pub fn norms(&self, grid: &super::Grid<T>) -> (T, T, T) {
        (self.l2_norm(), self.h1_norm(), grid.sup_norm(self, 4))
    }

    pub fn h1_inner(&self, other: &Self) -> T {
        let mut acc = T::zero();
        for c in 0..self.m {
            let (a, b) = (self.component(c), other.component(c));
            for i in 0..a.len() {
                acc += (T::one() + self.eigen(i)) * a[i] * b[i];
            }
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_layout(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, &b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_layout(other)?;
        let mut out = self.clone();
        out.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, &b)| *a -= b);
        Ok(out)
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().for_each(|a| *a *= s);
        out
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: T, other: &Self) -> Result<()> {
        self.check_layout(other)?;
        self.coeffs.iter_mut().zip(&other.coeffs).for_each(|(a, &b)| *a += s * b);
        Ok(())
    }

    fn check_cut(&self, k: usize) -> Result<()> {
        if k < 1 || k > self.count() {
            return Err(Error::Domain(format!(
                "projection index {k} outside 1..={}",
                self.count()
            )));
        }
        Ok(())
    }

    /// Orthoprojector onto the first `k` eigenfunctions.
    pub fn project_low(&self, k: usize) -> Result<Self> {
        self.check_cut(k)?;
        let mut out = self.clone();
        let n = self.count();
        for c in 0..self.m {
            out.coeffs[c * n + k..(c + 1) * n].iter_mut().for_each(|x| *x = T::zero());
        }
        Ok(out)
    }

    /// Complementary projector `Id - P_k`.
    pub fn project_high(&self, k: usize) -> Result<Self> {
        self.check_cut(k)?;
        let mut out = self.clone();
        let n = self.count();
        for c in 0..self.m {
            out.coeffs[c * n..c * n + k].iter_mut().for_each(|x| *x = T::zero());
        }
        Ok(out)
    }

    /// Exact x-derivative, expanded in the complementary basis.
    pub fn derivative(&self) -> Self {
        let q = T::PI() / self.length;
        let target = self.basis.derivative_basis();
        let mut out = Self::zeros(target, self.length, self.m, self.n_modes);
        for c in 0..self.m {
            let src = self.component(c).to_vec();
            let dst = out.component_mut(c);
            match self.basis {
                // d/dx sqrt(2/L) sin(kπx/L) = (kπ/L) sqrt(2/L) cos(kπx/L)
                BasisKind::DirichletSine => {
                    for (i, &x) in src.iter().enumerate() {
                        let k = i + 1;
                        dst[k] = q * T::of(k) * x;
                    }
                }
                // d/dx sqrt(2/L) cos(kπx/L) = -(kπ/L) sqrt(2/L) sin(kπx/L)
                BasisKind::NeumannCosine => {
                    for (i, &x) in src.iter().enumerate().skip(1) {
                        dst[i - 1] = -q * T::of(i) * x;
                    }
                }
            }
        }
        out
    }

    /// `∂²ₓ v = -Σ λ_k v_k e_k`.
    pub fn second_derivative(&self) -> Self {
        let mut out = self.clone();
        let n = self.count();
        for c in 0..self.m {
            for i in 0..n {
                out.coeffs[c * n + i] = -self.eigen(i) * self.coeffs[c * n + i];
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }

    /// Builds an `m'`-component field by concatenating components.
    pub fn stack(parts: &[&Self]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| Error::Domain("nothing to stack".into()))?;
        let mut coeffs = Vec::new();
        let mut m = 0;
        for p in parts {
            if p.basis != first.basis || p.n_modes != first.n_modes || p.length != first.length {
                return Err(Error::BasisMismatch("stacked fields differ in layout".into()));
            }
            coeffs.extend_from_slice(&p.coeffs);
            m += p.m;
        }
        Self::from_coeffs(first.basis, first.length, m, first.n_modes, coeffs)
    }

    /// Components `range` as a new field.
    pub fn components(&self, range: std::ops::Range<usize>) -> Self {
        let n = self.count();
        SpectralField {
            basis: self.basis,
            length: self.length,
            m: range.len(),
            n_modes: self.n_modes,
            coeffs: self.coeffs[range.start * n..range.end * n].to_vec(),
        }
    }

    /// Converts the scalar type (e.g. for mixed-precision comparisons).
    pub fn cast<U: Real>(&self) -> SpectralField<U> {
        SpectralField {
            basis: self.basis,
            length: U::lit(self.length.f64()),
            m: self.m,
            n_modes: self.n_modes,
            coeffs: self.coeffs.iter().map(|x| U::lit(x.f64())).collect(),
        }
    }
}

/// Several spectral fields, possibly in different bases, treated as one
/// phase-space element (e.g. the `(u, w)` pair of the Neumann embedding).
///
/// Norms are Hilbert sums of the block norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct Block<T> {
    pub parts: Vec<SpectralField<T>>,
}

impl<T: Real> Block<T> {
    pub fn single(v: SpectralField<T>) -> Self {
        Block { parts: vec![v] }
    }

    pub fn zeros_like(&self) -> Self {
        Block { parts: self.parts.iter().map(|p| p.zeros_like()).collect() }
    }

    pub fn h1_norm_sq(&self) -> T {
        self.parts.iter().map(|p| p.h1_norm_sq()).sum()
    }

    pub fn h1_norm(&self) -> T {
        self.h1_norm_sq().sqrt()
    }

    pub fn l2_norm(&self) -> T {
        self.parts.iter().map(|p| p.l2_norm().powi(2)).sum::<T>().sqrt()
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.parts.len() != other.parts.len() {
            return Err(Error::SizeMismatch { expected: self.parts.len(), got: other.parts.len() });
        }
        Ok(Block {
            parts: self.parts.iter().zip(&other.parts).map(|(a, b)| a.sub(b)).collect::<Result<_>>()?,
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.parts.len() != other.parts.len() {
            return Err(Error::SizeMismatch { expected: self.parts.len(), got: other.parts.len() });
        }
        Ok(Block {
            parts: self.parts.iter().zip(&other.parts).map(|(a, b)| a.add(b)).collect::<Result<_>>()?,
        })
    }

    pub fn scale(&self, s: T) -> Self {
        Block { parts: self.parts.iter().map(|p| p.scale(s)).collect() }
    }

    pub fn is_finite(&self) -> bool {
        self.parts.iter().all(|p| p.is_finite())
    }
}
