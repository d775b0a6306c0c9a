use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{BasisKind, SpectralField};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Collocation grid for fields resolved up to mode `n_modes`.
///
/// The grid has `M = 2 n_modes + 2` uniform intervals; the `M - 1 = 2 n_modes + 1`
/// interior nodes are the collocation points and the two boundary nodes carry
/// the half trapezoid weights. Trapezoid quadrature on this grid is exact for
/// products of eigenfunctions with combined wavenumber below `2M`, so quadratic
/// grid products of resolved fields are analyzed without aliasing.
pub struct Grid<T: Real> {
    n_modes: usize,
    length: T,
    intervals: usize,
    points: Vec<T>,
    weights: Vec<T>,
    plans: Mutex<Plans<T>>,
}

struct Plans<T: Real> {
    planner: FftPlanner<T>,
    cache: HashMap<usize, Arc<dyn Fft<T>>>,
}

/// Grid values of an `m`-component function, component-major, `M + 1` nodes each.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples<T> {
    pub m: usize,
    pub nodes: usize,
    pub data: Vec<T>,
}

impl<T: Real> Samples<T> {
    pub fn zeros(m: usize, nodes: usize) -> Self {
        Samples { m, nodes, data: vec![T::zero(); m * nodes] }
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[T] {
        &self.data[c * self.nodes..(c + 1) * self.nodes]
    }

    #[inline]
    pub fn component_mut(&mut self, c: usize) -> &mut [T] {
        &mut self.data[c * self.nodes..(c + 1) * self.nodes]
    }

    #[inline]
    pub fn at(&self, c: usize, j: usize) -> T {
        self.data[c * self.nodes + j]
    }

    /// Copies the `m`-vector at node `j` into `out`.
    #[inline]
    pub fn gather(&self, j: usize, out: &mut [T]) {
        for (c, o) in out.iter_mut().enumerate().take(self.m) {
            *o = self.data[c * self.nodes + j];
        }
    }

    #[inline]
    pub fn scatter(&mut self, j: usize, values: &[T]) {
        for (c, &v) in values.iter().enumerate().take(self.m) {
            self.data[c * self.nodes + j] = v;
        }
    }

    pub fn max_abs(&self) -> T {
        let mut best = T::zero();
        let mut u = vec![T::zero(); self.m];
        for j in 0..self.nodes {
            self.gather(j, &mut u);
            let n = crate::scalar::norm2(&u);
            if n > best {
                best = n;
            }
        }
        best
    }
}

impl<T: Real> Grid<T> {
    pub fn new(n_modes: usize, length: T) -> Result<Arc<Self>> {
        if n_modes == 0 {
            return Err(Error::Domain("n_modes must be at least 1".into()));
        }
        if !(length > T::zero()) {
            return Err(Error::Domain(format!("length must be positive, got {length}")));
        }
        let intervals = 2 * n_modes + 2;
        let h = length / T::of(intervals);
        let points = (0..=intervals).map(|j| h * T::of(j)).collect();
        let mut weights = vec![h; intervals + 1];
        weights[0] = h / T::lit(2.0);
        weights[intervals] = h / T::lit(2.0);
        Ok(Arc::new(Grid {
            n_modes,
            length,
            intervals,
            points,
            weights,
            plans: Mutex::new(Plans { planner: FftPlanner::new(), cache: HashMap::new() }),
        }))
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn length(&self) -> T {
        self.length
    }

    /// Number of uniform intervals `M`.
    pub fn intervals(&self) -> usize {
        self.intervals
    }

    /// All `M + 1` nodes including both boundary points.
    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn spacing(&self) -> T {
        self.length / T::of(self.intervals)
    }

    fn plan(&self, len: usize) -> Arc<dyn Fft<T>> {
        let mut plans = self.plans.lock().expect("fft plan cache poisoned");
        if let Some(p) = plans.cache.get(&len) {
            return Arc::clone(p);
        }
        let p = plans.planner.plan_fft_forward(len);
        plans.cache.insert(len, Arc::clone(&p));
        p
    }

    /// Computes `C_j = Σ_k x_k cos(πkj/P)` and `S_j = Σ_k x_k sin(πkj/P)`
    /// for `j = 0..=P` with one complex FFT of length `2P`.
    pub(crate) fn trig_sums(&self, input: &[T], p: usize, cos: &mut [T], sin: &mut [T]) {
        debug_assert!(input.len() <= 2 * p);
        let fft = self.plan(2 * p);
        let mut buf: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); 2 * p];
        for (b, &x) in buf.iter_mut().zip(input) {
            b.re = x;
        }
        fft.process(&mut buf);
        for j in 0..=p {
            cos[j] = buf[j].re;
            sin[j] = -buf[j].im;
        }
    }

    fn check_field(&self, v: &SpectralField<T>) -> Result<()> {
        if v.n_modes() != self.n_modes {
            return Err(Error::SizeMismatch { expected: self.n_modes, got: v.n_modes() });
        }
        Ok(())
    }

    /// Grid values of `v` at the `M + 1` nodes.
    pub fn synthesize(&self, v: &SpectralField<T>) -> Result<Samples<T>> {
        self.check_field(v)?;
        Ok(self.synthesize_on(v, self.intervals))
    }

    /// Grid values of `v` on a uniform grid with `intervals` subintervals
    /// (used for refined sampling, e.g. RK4 midpoints and oversampled maxima).
    pub fn synthesize_on(&self, v: &SpectralField<T>, intervals: usize) -> Samples<T> {
        let nodes = intervals + 1;
        let mut out = Samples::zeros(v.m(), nodes);
        let mut cos = vec![T::zero(); nodes];
        let mut sin = vec![T::zero(); nodes];
        let l = v.length();
        let s2 = (T::lit(2.0) / l).sqrt();
        let s1 = (T::one() / l).sqrt();
        let mut padded = vec![T::zero(); v.n_modes() + 1];
        for c in 0..v.m() {
            let coeffs = v.component(c);
            match v.basis() {
                BasisKind::DirichletSine => {
                    padded[0] = T::zero();
                    padded[1..].copy_from_slice(coeffs);
                    self.trig_sums(&padded, intervals, &mut cos, &mut sin);
                    for (o, s) in out.component_mut(c).iter_mut().zip(&sin) {
                        *o = s2 * *s;
                    }
                }
                BasisKind::NeumannCosine => {
                    padded.copy_from_slice(coeffs);
                    let c0 = padded[0];
                    padded[0] = T::zero();
                    self.trig_sums(&padded, intervals, &mut cos, &mut sin);
                    for (o, cv) in out.component_mut(c).iter_mut().zip(&cos) {
                        *o = s1 * c0 + s2 * *cv;
                    }
                }
            }
        }
        out
    }

    /// Spectral coefficients (modes up to `n_modes`) of grid values by
    /// trapezoid quadrature against the eigenfunctions.
    pub fn analyze(&self, values: &Samples<T>, basis: BasisKind) -> Result<SpectralField<T>> {
        if values.nodes != self.intervals + 1 {
            return Err(Error::SizeMismatch { expected: self.intervals + 1, got: values.nodes });
        }
        let p = self.intervals;
        let mut field = SpectralField::zeros(basis, self.length, values.m, self.n_modes);
        let mut weighted = vec![T::zero(); p + 1];
        let mut cos = vec![T::zero(); p + 1];
        let mut sin = vec![T::zero(); p + 1];
        let s2 = (T::lit(2.0) / self.length).sqrt();
        let s1 = (T::one() / self.length).sqrt();
        for c in 0..values.m {
            for ((wv, &x), &w) in weighted.iter_mut().zip(values.component(c)).zip(&self.weights) {
                *wv = x * w;
            }
            self.trig_sums(&weighted, p, &mut cos, &mut sin);
            let out = field.component_mut(c);
            match basis {
                BasisKind::DirichletSine => {
                    for (i, o) in out.iter_mut().enumerate() {
                        *o = s2 * sin[i + 1];
                    }
                }
                BasisKind::NeumannCosine => {
                    out[0] = s1 * cos[0];
                    for (i, o) in out.iter_mut().enumerate().skip(1) {
                        *o = s2 * cos[i];
                    }
                }
            }
        }
        Ok(field)
    }

    /// Oversampled pointwise maximum of `|v(x)|` (Euclidean over components),
    /// on a grid `factor` times finer than the collocation grid.
    pub fn sup_norm(&self, v: &SpectralField<T>, factor: usize) -> T {
        self.synthesize_on(v, self.intervals * factor.max(1)).max_abs()
    }

    /// Trapezoid inner product of two scalar grid functions.
    pub fn integrate(&self, values: &[T]) -> T {
        values.iter().zip(&self.weights).map(|(&v, &w)| v * w).sum()
    }
}

impl<T: Real> std::fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Grid")
            .field("n_modes", &self.n_modes)
            .field("length", &self.length)
            .field("intervals", &self.intervals)
            .finish()
    }
}
