//! Modewise solution operator of `y' = −μ y + h` in the `θ`-weighted space,
//! discretized by the exponential trapezoid rule (exact for piecewise-linear
//! forcing).
//!
//! Everything here acts on scaled variables `ŷ(t) = e^{θt} y(t)`, which turn
//! the equation into `ŷ' = −ν ŷ + ĥ` with `ν = μ − θ` and the weighted norm
//! into the plain trapezoid `L²` norm on `[−T, 0]`. Modes with `ν > 0` are
//! integrated forward from `ŷ(−T) = 0`, modes with `ν < 0` backward from
//! `ŷ(0) = 0`.

use crate::error::{Error, Result};
use crate::scalar::Real;

/// `φ₁(x) = (1 − e^{−x})/x` and `ψ(x) = (1 − e^{−x}(1 + x))/x²`.
pub fn phi_psi<T: Real>(x: T) -> (T, T) {
    if x.abs() < T::lit(1e-2) {
        // Taylor series: φ₁ = Σ (−x)^k/(k+1)!, ψ = Σ (−x)^k (k+1)/(k+2)!
        let mut phi1 = T::zero();
        let mut psi = T::zero();
        let mut pow = T::one();
        let mut fact = T::one();
        for k in 0..8 {
            fact = fact * T::of(k + 1);
            phi1 += pow / fact;
            psi += pow * T::of(k + 1) / (fact * T::of(k + 2));
            pow = -pow * x;
        }
        (phi1, psi)
    } else {
        let e = (-x).exp();
        ((T::one() - e) / x, (T::one() - e * (T::one() + x)) / (x * x))
    }
}

/// Step weights for one mode: `y_next = decay·y + w_near·h_near + w_far·h_far`
/// where "near" is the node being stepped from.
#[derive(Debug, Clone, Copy)]
pub struct ModeStep<T> {
    pub forward: bool,
    pub decay: T,
    pub w_from: T,
    pub w_to: T,
}

impl<T: Real> ModeStep<T> {
    pub fn new(nu: T, dt: T) -> Result<Self> {
        if nu == T::zero() {
            return Err(Error::Configuration("θ coincides with an eigenvalue".into()));
        }
        let x = nu.abs() * dt;
        let (phi1, psi) = phi_psi(x);
        let decay = (-x).exp();
        if nu > T::zero() {
            // forward: h_a weighted by ψ, h_b by φ₁ − ψ
            Ok(ModeStep { forward: true, decay, w_from: dt * psi, w_to: dt * (phi1 - psi) })
        } else {
            // backward: ŷ_a = e^{−x}ŷ_b − [(φ₁ − ψ)dt·h_a + ψ dt·h_b]
            Ok(ModeStep { forward: false, decay, w_from: -dt * psi, w_to: -dt * (phi1 - psi) })
        }
    }

    /// Applies the scaled resolvent to one mode's forcing samples.
    pub fn apply(&self, h: &[T], out: &mut [T]) {
        let n = h.len();
        if n == 0 {
            return;
        }
        if self.forward {
            out[0] = T::zero();
            for j in 1..n {
                out[j] = self.decay * out[j - 1] + self.w_from * h[j - 1] + self.w_to * h[j];
            }
        } else {
            out[n - 1] = T::zero();
            for j in (0..n - 1).rev() {
                out[j] = self.decay * out[j + 1] + self.w_from * h[j + 1] + self.w_to * h[j];
            }
        }
    }

    /// Transpose (in the plain Euclidean sense) of [`Self::apply`].
    pub fn apply_transpose(&self, g: &[T], out: &mut [T]) {
        let n = g.len();
        if n == 0 {
            return;
        }
        // forward: R_ij = w_from E^{i-j-1} [j ≤ i-1] + w_to E^{i-j} [1 ≤ j ≤ i]
        // backward is the index-reversed mirror image.
        let idx = |k: usize| if self.forward { k } else { n - 1 - k };
        let mut lam_next = T::zero();
        let mut lam = vec![T::zero(); n];
        for k in (0..n).rev() {
            let l = g[idx(k)] + self.decay * lam_next;
            lam[k] = l;
            lam_next = l;
        }
        for k in 0..n {
            let mut v = T::zero();
            if k + 1 < n {
                v += self.w_from * lam[k + 1];
            }
            if k >= 1 {
                v += self.w_to * lam[k];
            }
            out[idx(k)] = v;
        }
    }
}

/// Trapezoid weights on `n` nodes of spacing `dt`.
pub fn trapezoid_weights<T: Real>(n: usize, dt: T) -> Vec<T> {
    let mut w = vec![dt; n];
    if n > 0 {
        w[0] = dt / T::lit(2.0);
        w[n - 1] = dt / T::lit(2.0);
    }
    w
}

/// Operator norm of one mode's discrete resolvent in the trapezoid-weighted
/// `L²` norm, by power iteration on `W^{-1/2} Rᵀ W R W^{-1/2}`.
pub fn mode_operator_norm<T: Real>(step: &ModeStep<T>, nodes: usize, dt: T, iterations: usize) -> T {
    let w = trapezoid_weights(nodes, dt);
    let sw: Vec<T> = w.iter().map(|x| x.sqrt()).collect();
    let mut x: Vec<T> = (0..nodes).map(|j| T::one() + T::lit(0.1) * T::of(j % 7)).collect();
    let mut h = vec![T::zero(); nodes];
    let mut y = vec![T::zero(); nodes];
    let mut g = vec![T::zero(); nodes];
    let mut norm = T::zero();
    for _ in 0..iterations {
        let xn = crate::scalar::norm2(&x);
        if xn == T::zero() {
            return T::zero();
        }
        x.iter_mut().for_each(|v| *v /= xn);
        for j in 0..nodes {
            h[j] = x[j] / sw[j];
        }
        step.apply(&h, &mut y);
        let yn: T = y.iter().zip(&w).map(|(&a, &b)| a * a * b).sum::<T>().sqrt();
        norm = yn;
        for j in 0..nodes {
            g[j] = y[j] * w[j];
        }
        step.apply_transpose(&g, &mut h);
        for j in 0..nodes {
            x[j] = h[j] / sw[j];
        }
    }
    norm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn phi_psi_exact(x: f64) -> (f64, f64) {
        let e = (-x).exp();
        ((-x).exp_m1() / -x, (1.0 - e * (1.0 + x)) / (x * x))
    }

    #[test]
    fn series_and_closed_form_agree_at_switch() {
        let (p1, s1) = phi_psi(0.99e-2f64);
        let (p2, s2) = phi_psi(1.01e-2f64);
        assert!((p1 - p2).abs() < 1e-4 && (s1 - s2).abs() < 1e-4);
        let (p, s) = phi_psi(1e-2f64);
        let (pe, se) = phi_psi_exact(1e-2);
        assert!((p - pe).abs() < 1e-12 && (s - se).abs() < 1e-12);
    }

    #[test]
    fn constant_forcing_reaches_steady_state() {
        let step = ModeStep::new(2.0f64, 0.01).unwrap();
        let h = vec![1.0; 3000];
        let mut y = vec![0.0; 3000];
        step.apply(&h, &mut y);
        assert!((y[2999] - 0.5).abs() < 1e-12);
        let step = ModeStep::new(-2.0f64, 0.01).unwrap();
        step.apply(&h, &mut y);
        assert!((y[0] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn transpose_matches_dense() {
        for nu in [1.5f64, -0.7] {
            let step = ModeStep::new(nu, 0.1).unwrap();
            let n = 6;
            let mut dense = vec![vec![0.0; n]; n];
            let mut e = vec![0.0; n];
            let mut col = vec![0.0; n];
            for j in 0..n {
                e.iter_mut().for_each(|x| *x = 0.0);
                e[j] = 1.0;
                step.apply(&e, &mut col);
                for i in 0..n {
                    dense[i][j] = col[i];
                }
            }
            let g: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 0.3).collect();
            let mut out = vec![0.0; n];
            step.apply_transpose(&g, &mut out);
            for j in 0..n {
                let exact: f64 = (0..n).map(|i| dense[i][j] * g[i]).sum();
                assert!((exact - out[j]).abs() < 1e-14);
            }
        }
    }
}
