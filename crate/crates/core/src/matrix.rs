//! Small dense `m × m` matrices (row-major slices) and x-dependent matrix fields.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

pub fn identity<T: Real>(m: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * m];
    for i in 0..m {
        out[i * m + i] = T::one();
    }
    out
}

/// `out = a · b`
#[inline]
pub fn matmul<T: Real>(a: &[T], b: &[T], out: &mut [T], m: usize) {
    for i in 0..m {
        for j in 0..m {
            let mut acc = T::zero();
            for l in 0..m {
                acc += a[i * m + l] * b[l * m + j];
            }
            out[i * m + j] = acc;
        }
    }
}

/// `out = a · x`
#[inline]
pub fn matvec<T: Real>(a: &[T], x: &[T], out: &mut [T], m: usize) {
    for i in 0..m {
        let mut acc = T::zero();
        for l in 0..m {
            acc += a[i * m + l] * x[l];
        }
        out[i] = acc;
    }
}

pub fn transpose<T: Real>(a: &[T], m: usize) -> Vec<T> {
    let mut out = vec![T::zero(); m * m];
    for i in 0..m {
        for j in 0..m {
            out[j * m + i] = a[i * m + j];
        }
    }
    out
}

/// Frobenius norm.
pub fn fro<T: Real>(a: &[T]) -> T {
    crate::scalar::norm2(a)
}

/// Inverse by Gauss–Jordan elimination with partial pivoting; returns the
/// inverse and the determinant.
pub fn inverse<T: Real>(a: &[T], m: usize) -> Option<(Vec<T>, T)> {
    let mut work = a.to_vec();
    let mut inv = identity::<T>(m);
    let mut det = T::one();
    for col in 0..m {
        let mut piv = col;
        for r in col + 1..m {
            if work[r * m + col].abs() > work[piv * m + col].abs() {
                piv = r;
            }
        }
        let p = work[piv * m + col];
        if p == T::zero() || !p.is_finite() {
            return None;
        }
        if piv != col {
            for c in 0..m {
                work.swap(piv * m + c, col * m + c);
                inv.swap(piv * m + c, col * m + c);
            }
            det = -det;
        }
        det *= p;
        let ip = T::one() / p;
        for c in 0..m {
            work[col * m + c] *= ip;
            inv[col * m + c] *= ip;
        }
        for r in 0..m {
            if r != col {
                let factor = work[r * m + col];
                if factor != T::zero() {
                    for c in 0..m {
                        work[r * m + c] = work[r * m + c] - factor * work[col * m + c];
                        inv[r * m + c] = inv[r * m + c] - factor * inv[col * m + c];
                    }
                }
            }
        }
    }
    Some((inv, det))
}

/// Matrix exponential by scaling and squaring with a Taylor core.
pub fn expm<T: Real>(a: &[T], m: usize) -> Vec<T> {
    let norm = fro(a);
    let mut s = 0;
    let mut scale = T::one();
    while norm * scale > T::lit(0.5) {
        scale = scale / T::lit(2.0);
        s += 1;
    }
    let scaled: Vec<T> = a.iter().map(|&x| x * scale).collect();
    let mut result = identity::<T>(m);
    let mut term = identity::<T>(m);
    let mut tmp = vec![T::zero(); m * m];
    for k in 1..=20 {
        matmul(&term, &scaled, &mut tmp, m);
        let inv_k = T::one() / T::of(k);
        for (t, &x) in term.iter_mut().zip(&tmp) {
            *t = x * inv_k;
        }
        for (r, &t) in result.iter_mut().zip(&term) {
            *r += t;
        }
    }
    for _ in 0..s {
        matmul(&result, &result, &mut tmp, m);
        result.copy_from_slice(&tmp);
    }
    result
}

/// An invertible `m × m` matrix `a(x)` sampled at the `M + 1` grid nodes,
/// together with its x-derivative supplied by the generating ODE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct MatrixField<T> {
    pub m: usize,
    pub length: T,
    pub nodes: usize,
    /// Row-major matrices, `m * m` entries per node.
    pub values: Vec<T>,
    /// `∂ₓ a` at each node, same layout.
    pub deriv: Vec<T>,
}

impl<T: Real> MatrixField<T> {
    pub fn identity(m: usize, length: T, nodes: usize) -> Self {
        let id = identity::<T>(m);
        let values = (0..nodes).flat_map(|_| id.iter().copied()).collect();
        MatrixField { m, length, nodes, values, deriv: vec![T::zero(); nodes * m * m] }
    }

    #[inline]
    pub fn at(&self, j: usize) -> &[T] {
        let s = self.m * self.m;
        &self.values[j * s..(j + 1) * s]
    }

    #[inline]
    pub fn deriv_at(&self, j: usize) -> &[T] {
        let s = self.m * self.m;
        &self.deriv[j * s..(j + 1) * s]
    }

    /// `max_x ‖a(x)‖ + max_x ‖a'(x)‖` (Frobenius).
    pub fn w1inf_norm(&self) -> T {
        let s = self.m * self.m;
        let a = self.values.chunks(s).map(fro).fold(T::zero(), T::max);
        let d = self.deriv.chunks(s).map(fro).fold(T::zero(), T::max);
        a + d
    }

    pub fn sup_norm(&self) -> T {
        self.values.chunks(self.m * self.m).map(fro).fold(T::zero(), T::max)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.values.len() != other.values.len() {
            return Err(Error::SizeMismatch { expected: self.values.len(), got: other.values.len() });
        }
        Ok(MatrixField {
            m: self.m,
            length: self.length,
            nodes: self.nodes,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect(),
            deriv: self.deriv.iter().zip(&other.deriv).map(|(&a, &b)| a - b).collect(),
        })
    }

    /// W^{1,∞} distance.
    pub fn distance(&self, other: &Self) -> Result<T> {
        Ok(self.sub(other)?.w1inf_norm())
    }

    /// Smallest `|det a(x)|` over the grid.
    pub fn min_abs_det(&self) -> T {
        (0..self.nodes)
            .map(|j| inverse(self.at(j), self.m).map(|(_, d)| d.abs()).unwrap_or(T::zero()))
            .fold(T::infinity(), T::min)
    }

    /// Pointwise inverse; `deriv` of the result is `-a⁻¹ a' a⁻¹`.
    pub fn pointwise_inverse(&self) -> Result<Self> {
        let m = self.m;
        let s = m * m;
        let mut values = vec![T::zero(); self.values.len()];
        let mut deriv = vec![T::zero(); self.values.len()];
        let mut tmp = vec![T::zero(); s];
        for j in 0..self.nodes {
            let (inv, det) = inverse(self.at(j), m).ok_or(Error::DegenerateMatrix { index: j, det: 0.0 })?;
            if det.abs() < T::lit(1e-8) {
                return Err(Error::DegenerateMatrix { index: j, det: det.abs().f64() });
            }
            matmul(&inv, self.deriv_at(j), &mut tmp, m);
            let mut d = vec![T::zero(); s];
            matmul(&tmp, &inv, &mut d, m);
            values[j * s..(j + 1) * s].copy_from_slice(&inv);
            for (o, &x) in deriv[j * s..(j + 1) * s].iter_mut().zip(&d) {
                *o = -x;
            }
        }
        Ok(MatrixField { m, length: self.length, nodes: self.nodes, values, deriv })
    }

    pub fn transpose(&self) -> Self {
        let s = self.m * self.m;
        let mut out = self.clone();
        for j in 0..self.nodes {
            out.values[j * s..(j + 1) * s].copy_from_slice(&transpose(self.at(j), self.m));
            out.deriv[j * s..(j + 1) * s].copy_from_slice(&transpose(self.deriv_at(j), self.m));
        }
        out
    }

    /// CSV rows `x_index,i,j,value`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x_index,i,j,value\n");
        for x in 0..self.nodes {
            let a = self.at(x);
            for i in 0..self.m {
                for j in 0..self.m {
                    s.push_str(&format!("{x},{i},{j},{:e}\n", a[i * self.m + j].f64()));
                }
            }
        }
        s
    }
}

/// Classical RK4 for the block lower-triangular matrix system
///
/// ```text
/// a' = A(x) a,            a(0) = Id
/// b' = A(x) b + C(x) a,   b(0) = 0      (only when `c` is given)
/// ```
///
/// with one step per grid interval. `coef` and `c` hold `m × m` matrices
/// sampled on the half-step grid (`2M + 1` nodes: nodes and midpoints).
/// Returns `(a, a', b, b')` at the `M + 1` nodes.
pub(crate) fn rk4_matrix_system<T: Real>(
    m: usize,
    intervals: usize,
    length: T,
    coef: &[T],
    c: Option<&[T]>,
) -> (Vec<T>, Vec<T>, Option<(Vec<T>, Vec<T>)>) {
    let s = m * m;
    let nodes = intervals + 1;
    let h = length / T::of(intervals);
    let half = h / T::lit(2.0);
    let sixth = h / T::lit(6.0);
    let mut a_out = vec![T::zero(); nodes * s];
    let mut da_out = vec![T::zero(); nodes * s];
    let mut b_state = c.map(|_| (vec![T::zero(); nodes * s], vec![T::zero(); nodes * s]));

    let mut a = identity::<T>(m);
    let mut b = vec![T::zero(); s];
    let at = |fine: usize| &coef[fine * s..(fine + 1) * s];
    let ct = |fine: usize| c.map(|cc| &cc[fine * s..(fine + 1) * s]);

    let mut k1 = (vec![T::zero(); s], vec![T::zero(); s]);
    let mut k2 = k1.clone();
    let mut k3 = k1.clone();
    let mut k4 = k1.clone();
    let mut ya = vec![T::zero(); s];
    let mut yb = vec![T::zero(); s];
    let mut tmp = vec![T::zero(); s];

    let eval = |fine: usize, ya: &[T], yb: &[T], k: &mut (Vec<T>, Vec<T>), tmp: &mut [T]| {
        matmul(at(fine), ya, &mut k.0, m);
        if let Some(cm) = ct(fine) {
            matmul(at(fine), yb, &mut k.1, m);
            matmul(cm, ya, tmp, m);
            for (o, &t) in k.1.iter_mut().zip(tmp.iter()) {
                *o += t;
            }
        }
    };

    let mut store = |j: usize, a: &[T], b: &[T], tmp: &mut [T]| {
        a_out[j * s..(j + 1) * s].copy_from_slice(a);
        matmul(at(2 * j), a, &mut da_out[j * s..(j + 1) * s], m);
        if let (Some((bv, bd)), Some(cm)) = (b_state.as_mut(), ct(2 * j)) {
            bv[j * s..(j + 1) * s].copy_from_slice(b);
            let db = &mut bd[j * s..(j + 1) * s];
            matmul(at(2 * j), b, db, m);
            matmul(cm, a, tmp, m);
            for (o, &t) in db.iter_mut().zip(tmp.iter()) {
                *o += t;
            }
        }
    };

    store(0, &a, &b, &mut tmp);
    for j in 0..intervals {
        let f0 = 2 * j;
        eval(f0, &a, &b, &mut k1, &mut tmp);
        for i in 0..s {
            ya[i] = a[i] + half * k1.0[i];
            yb[i] = b[i] + half * k1.1[i];
        }
        eval(f0 + 1, &ya, &yb, &mut k2, &mut tmp);
        for i in 0..s {
            ya[i] = a[i] + half * k2.0[i];
            yb[i] = b[i] + half * k2.1[i];
        }
        eval(f0 + 1, &ya, &yb, &mut k3, &mut tmp);
        for i in 0..s {
            ya[i] = a[i] + h * k3.0[i];
            yb[i] = b[i] + h * k3.1[i];
        }
        eval(f0 + 2, &ya, &yb, &mut k4, &mut tmp);
        let two = T::lit(2.0);
        for i in 0..s {
            a[i] += sixth * (k1.0[i] + two * k2.0[i] + two * k3.0[i] + k4.0[i]);
            b[i] += sixth * (k1.1[i] + two * k2.1[i] + two * k3.1[i] + k4.1[i]);
        }
        store(j + 1, &a, &b, &mut tmp);
    }
    drop(store);
    (a_out, da_out, b_state)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_2x2() {
        let a = [2.0f64, 1.0, 1.0, 3.0];
        let (inv, det) = inverse(&a, 2).unwrap();
        assert!((det - 5.0).abs() < 1e-14);
        let mut prod = [0.0; 4];
        matmul(&a, &inv, &mut prod, 2);
        for (p, i) in prod.iter().zip(identity::<f64>(2)) {
            assert!((p - i).abs() < 1e-14);
        }
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        assert!(inverse(&[1.0, 2.0, 2.0, 4.0], 2).is_none());
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 0.7_f64;
        let e = expm(&[0.0, -t, t, 0.0], 2);
        assert!((e[0] - t.cos()).abs() < 1e-14);
        assert!((e[2] - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn rk4_reproduces_scalar_exponential() {
        // a' = 0.3 a on [0, 2]
        let intervals = 40;
        let coef = vec![0.3; 2 * intervals + 1];
        let (a, da, _) = rk4_matrix_system(1, intervals, 2.0, &coef, None);
        assert!((a[intervals] - (0.6f64).exp()).abs() < 1e-9);
        assert!((da[intervals] - 0.3 * (0.6f64).exp()).abs() < 1e-9);
    }

    #[test]
    fn rk4_inhomogeneous_block() {
        // a' = 0, b' = a  with a = 1  =>  b(x) = x
        let intervals = 10;
        let coef = vec![0.0f64; 2 * intervals + 1];
        let c = vec![1.0f64; 2 * intervals + 1];
        let (_, _, b) = rk4_matrix_system(1, intervals, 1.0, &coef, Some(&c));
        let (b, db) = b.unwrap();
        assert!((b[intervals] - 1.0).abs() < 1e-14);
        assert!((db[3] - 1.0).abs() < 1e-14);
    }
}
