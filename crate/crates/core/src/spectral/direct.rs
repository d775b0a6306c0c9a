//! Direct-summation transforms, `O(N · M)`.
//!
//! Slow but transparent; the FFT path in [`Grid`](super::Grid) is checked
//! against these.

use super::{BasisKind, Grid, Samples, SpectralField};
use crate::scalar::Real;

fn basis_fn<T: Real>(basis: BasisKind, k: usize, x: T, length: T) -> T {
    let arg = T::PI() * T::of(k) * x / length;
    match (basis, k) {
        (BasisKind::NeumannCosine, 0) => (T::one() / length).sqrt(),
        (BasisKind::NeumannCosine, _) => (T::lit(2.0) / length).sqrt() * arg.cos(),
        (BasisKind::DirichletSine, _) => (T::lit(2.0) / length).sqrt() * arg.sin(),
    }
}

/// Evaluates `v` at arbitrary points.
pub fn evaluate<T: Real>(v: &SpectralField<T>, xs: &[T]) -> Samples<T> {
    let mut out = Samples::zeros(v.m(), xs.len());
    for c in 0..v.m() {
        let coeffs = v.component(c);
        for (j, &x) in xs.iter().enumerate() {
            let mut acc = T::zero();
            for (i, &a) in coeffs.iter().enumerate() {
                acc += a * basis_fn(v.basis(), v.mode_of(i), x, v.length());
            }
            out.component_mut(c)[j] = acc;
        }
    }
    out
}

pub fn synthesize<T: Real>(v: &SpectralField<T>, grid: &Grid<T>) -> Samples<T> {
    evaluate(v, grid.points())
}

pub fn analyze<T: Real>(values: &Samples<T>, basis: BasisKind, grid: &Grid<T>) -> SpectralField<T> {
    let mut field = SpectralField::zeros(basis, grid.length(), values.m, grid.n_modes());
    let count = field.count();
    for c in 0..values.m {
        for i in 0..count {
            let k = i + basis.first_mode();
            let mut acc = T::zero();
            for (j, (&x, &w)) in grid.points().iter().zip(grid.weights()).enumerate() {
                acc += w * values.at(c, j) * basis_fn(basis, k, x, grid.length());
            }
            field.component_mut(c)[i] = acc;
        }
    }
    field
}
