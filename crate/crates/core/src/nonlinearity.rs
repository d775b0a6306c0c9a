//! The nonlinearities `f: ℝ^m → ℝ^{m×m}` (advection matrix) and
//! `g: ℝ^m → ℝ^m` (reaction), their compactly supported cut-offs, and the
//! gradient-dependent `f(u, ∂ₓu)` used by the Neumann / general reductions.

use std::sync::Arc;

use crate::scalar::Real;

/// Quintic smoothstep `q(s) = 6s⁵ − 15s⁴ + 10s³` clamped to `[0, 1]`;
/// `C²` with `q'(0) = q'(1) = q''(0) = q''(1) = 0`.
pub fn smoothstep<T: Real>(s: T) -> (T, T, T) {
    if s <= T::zero() {
        return (T::zero(), T::zero(), T::zero());
    }
    if s >= T::one() {
        return (T::one(), T::zero(), T::zero());
    }
    let s2 = s * s;
    let s3 = s2 * s;
    let q = s3 * (T::lit(10.0) + s * (T::lit(-15.0) + T::lit(6.0) * s));
    let dq = T::lit(30.0) * s2 * (s - T::one()) * (s - T::one());
    let d2q = T::lit(60.0) * s * (T::one() - T::lit(3.0) * s + T::lit(2.0) * s2);
    (q, dq, d2q)
}

/// `max |q'| = q'(1/2) = 15/8`.
pub const SMOOTHSTEP_MAX_SLOPE: f64 = 1.875;

/// Radial bump `χ(|y|²/R²)`: equal to 1 for `|y| ≤ R/2`, 0 for `|y| ≥ R`,
/// reversed quintic smoothstep in `z = |y|²/R² ∈ [1/4, 1]`.
#[derive(Debug, Clone, Copy)]
pub struct Bump<T> {
    pub radius: T,
}

impl<T: Real> Bump<T> {
    fn s_of(&self, y: &[T]) -> (T, T) {
        let r2 = self.radius * self.radius;
        let z = crate::scalar::dot(y, y) / r2;
        let width = T::lit(0.75);
        ((z - T::lit(0.25)) / width, T::one() / (width * r2))
    }

    pub fn value(&self, y: &[T]) -> T {
        let (s, _) = self.s_of(y);
        T::one() - smoothstep(s).0
    }

    /// Value and gradient.
    pub fn grad(&self, y: &[T], out: &mut [T]) -> T {
        let (s, ds) = self.s_of(y);
        let (q, dq, _) = smoothstep(s);
        for (o, &yl) in out.iter_mut().zip(y) {
            *o = -dq * ds * T::lit(2.0) * yl;
        }
        T::one() - q
    }

    /// Hessian, row-major `d × d`.
    pub fn hessian(&self, y: &[T], out: &mut [T]) {
        let d = y.len();
        let (s, ds) = self.s_of(y);
        let (_, dq, d2q) = smoothstep(s);
        let two = T::lit(2.0);
        for l in 0..d {
            for p in 0..d {
                let mut h = -d2q * ds * ds * two * y[l] * two * y[p];
                if l == p {
                    h -= dq * ds * two;
                }
                out[l * d + p] = h;
            }
        }
    }
}

/// The pair `(f, g)` of the RDA system with first derivatives.
///
/// Layouts: `f` is row-major `m × m`; `df[(i*m + j)*m + l] = ∂f_ij/∂u_l`;
/// `dg[i*m + l] = ∂g_i/∂u_l`.
pub trait Nonlinearity<T: Real>: Send + Sync {
    fn m(&self) -> usize;
    /// `f` and `g` vanish for `|u| ≥ support_radius`.
    fn support_radius(&self) -> T;
    fn f(&self, u: &[T], out: &mut [T]);
    fn df(&self, u: &[T], out: &mut [T]);
    fn g(&self, u: &[T], out: &mut [T]);
    fn dg(&self, u: &[T], out: &mut [T]);

    /// `true` iff `f ≡ 0`; lets callers skip the matrix ODE work.
    fn f_vanishes(&self) -> bool {
        false
    }

    fn g_zero_at_origin(&self) -> bool {
        let m = self.m();
        let mut g0 = vec![T::zero(); m];
        self.g(&vec![T::zero(); m], &mut g0);
        g0.iter().all(|x| *x == T::zero())
    }

    /// `f'(u)[h]`, the directional derivative of `f` (an `m × m` matrix).
    fn df_dir(&self, u: &[T], h: &[T], out: &mut [T]) {
        let m = self.m();
        let mut d = vec![T::zero(); m * m * m];
        self.df(u, &mut d);
        for ij in 0..m * m {
            out[ij] = (0..m).map(|l| d[ij * m + l] * h[l]).sum();
        }
    }
}

impl<T: Real, N: Nonlinearity<T> + ?Sized> Nonlinearity<T> for Arc<N> {
    fn m(&self) -> usize {
        (**self).m()
    }
    fn support_radius(&self) -> T {
        (**self).support_radius()
    }
    fn f(&self, u: &[T], out: &mut [T]) {
        (**self).f(u, out)
    }
    fn df(&self, u: &[T], out: &mut [T]) {
        (**self).df(u, out)
    }
    fn g(&self, u: &[T], out: &mut [T]) {
        (**self).g(u, out)
    }
    fn dg(&self, u: &[T], out: &mut [T]) {
        (**self).dg(u, out)
    }
    fn f_vanishes(&self) -> bool {
        (**self).f_vanishes()
    }
}

pub type MapFn<T> = Arc<dyn Fn(&[T], &mut [T]) + Send + Sync>;

/// Smooth, not necessarily compactly supported `(f_raw, g_raw)` with derivatives.
#[derive(Clone)]
pub struct RawPair<T> {
    pub m: usize,
    pub f: MapFn<T>,
    pub df: MapFn<T>,
    pub g: MapFn<T>,
    pub dg: MapFn<T>,
}

impl<T: Real> RawPair<T> {
    pub fn zero(m: usize) -> Self {
        let z: MapFn<T> = Arc::new(|_, out: &mut [T]| out.iter_mut().for_each(|x| *x = T::zero()));
        RawPair { m, f: z.clone(), df: z.clone(), g: z.clone(), dg: z }
    }

    /// Scales both `f` and `g` by `eps`.
    pub fn scaled(self, eps: T) -> Self {
        let scale = |h: MapFn<T>| -> MapFn<T> {
            Arc::new(move |u: &[T], out: &mut [T]| {
                h(u, out);
                out.iter_mut().for_each(|x| *x *= eps);
            })
        };
        RawPair { m: self.m, f: scale(self.f), df: scale(self.df), g: scale(self.g), dg: scale(self.dg) }
    }
}

/// `f = χ(|u|²/R²) f_raw`, `g = χ(|u|²/R²) g_raw`.
#[derive(Clone)]
pub struct CutoffNonlinearity<T> {
    raw: RawPair<T>,
    bump: Bump<T>,
    f_zero: bool,
}

/// Cut-off of a raw pair outside the ball of the given radius.
pub fn make_cutoff_nonlinearity<T: Real>(raw: RawPair<T>, radius: T) -> CutoffNonlinearity<T> {
    CutoffNonlinearity { raw, bump: Bump { radius }, f_zero: false }
}

impl<T: Real> CutoffNonlinearity<T> {
    pub fn raw(&self) -> &RawPair<T> {
        &self.raw
    }

    /// Marks `f ≡ 0` (set by presets whose `f_raw` is identically zero).
    pub fn with_vanishing_f(mut self) -> Self {
        self.f_zero = true;
        self
    }
}

impl<T: Real> Nonlinearity<T> for CutoffNonlinearity<T> {
    fn m(&self) -> usize {
        self.raw.m
    }

    fn support_radius(&self) -> T {
        self.bump.radius
    }

    fn f_vanishes(&self) -> bool {
        self.f_zero
    }

    fn f(&self, u: &[T], out: &mut [T]) {
        let chi = self.bump.value(u);
        if chi == T::zero() {
            out.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        (self.raw.f)(u, out);
        out.iter_mut().for_each(|x| *x *= chi);
    }

    fn df(&self, u: &[T], out: &mut [T]) {
        let m = self.raw.m;
        let mut grad = vec![T::zero(); m];
        let chi = self.bump.grad(u, &mut grad);
        if chi == T::zero() {
            out.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        let mut fr = vec![T::zero(); m * m];
        (self.raw.f)(u, &mut fr);
        (self.raw.df)(u, out);
        for ij in 0..m * m {
            for l in 0..m {
                out[ij * m + l] = chi * out[ij * m + l] + grad[l] * fr[ij];
            }
        }
    }

    fn g(&self, u: &[T], out: &mut [T]) {
        let chi = self.bump.value(u);
        if chi == T::zero() {
            out.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        (self.raw.g)(u, out);
        out.iter_mut().for_each(|x| *x *= chi);
    }

    fn dg(&self, u: &[T], out: &mut [T]) {
        let m = self.raw.m;
        let mut grad = vec![T::zero(); m];
        let chi = self.bump.grad(u, &mut grad);
        if chi == T::zero() {
            out.iter_mut().for_each(|x| *x = T::zero());
            return;
        }
        let mut gr = vec![T::zero(); m];
        (self.raw.g)(u, &mut gr);
        (self.raw.dg)(u, out);
        for i in 0..m {
            for l in 0..m {
                out[i * m + l] = chi * out[i * m + l] + grad[l] * gr[i];
            }
        }
    }
}

/// Built-in nonlinearities.
pub mod presets {
    use super::*;

    /// `f ≡ 0`, `g ≡ 0`.
    pub fn zero<T: Real>(m: usize) -> CutoffNonlinearity<T> {
        make_cutoff_nonlinearity(RawPair::zero(m), T::lit(1.0)).with_vanishing_f()
    }

    /// Scalar Burgers advection `f_raw(u) = u` with mild linear reaction
    /// `g_raw(u) = -γ u`.
    pub fn burgers_raw<T: Real>(gamma: T) -> RawPair<T> {
        RawPair {
            m: 1,
            f: Arc::new(|u: &[T], out: &mut [T]| out[0] = u[0]),
            df: Arc::new(|_, out: &mut [T]| out[0] = T::one()),
            g: Arc::new(move |u: &[T], out: &mut [T]| out[0] = -gamma * u[0]),
            dg: Arc::new(move |_, out: &mut [T]| out[0] = -gamma),
        }
    }

    pub const BURGERS_GAMMA: f64 = 0.5;
    pub const BURGERS_RADIUS: f64 = 2.0;

    pub fn burgers_cutoff<T: Real>() -> CutoffNonlinearity<T> {
        make_cutoff_nonlinearity(burgers_raw(T::lit(BURGERS_GAMMA)), T::lit(BURGERS_RADIUS))
    }

    /// Two-component system with a non-commuting advection matrix
    ///
    /// ```text
    /// f_raw(u) = [[ u₁,      ½u₂ ],
    ///             [ -½u₂,   u₁+u₂ ]]
    /// g_raw(u) = ( -½u₁ + u₁u₂², -⅓u₂ - u₁²u₂ )
    /// ```
    pub fn coupled_raw<T: Real>() -> RawPair<T> {
        let h = T::lit(0.5);
        let third = T::lit(1.0 / 3.0);
        RawPair {
            m: 2,
            f: Arc::new(move |u: &[T], o: &mut [T]| {
                o[0] = u[0];
                o[1] = h * u[1];
                o[2] = -h * u[1];
                o[3] = u[0] + u[1];
            }),
            df: Arc::new(move |_, o: &mut [T]| {
                // (i*2 + j)*2 + l
                o.iter_mut().for_each(|x| *x = T::zero());
                o[0] = T::one(); // f00/du0
                o[3] = h; // f01/du1
                o[5] = -h; // f10/du1
                o[6] = T::one(); // f11/du0
                o[7] = T::one(); // f11/du1
            }),
            g: Arc::new(move |u: &[T], o: &mut [T]| {
                o[0] = -h * u[0] + u[0] * u[1] * u[1];
                o[1] = -third * u[1] - u[0] * u[0] * u[1];
            }),
            dg: Arc::new(move |u: &[T], o: &mut [T]| {
                o[0] = -h + u[1] * u[1];
                o[1] = T::lit(2.0) * u[0] * u[1];
                o[2] = -T::lit(2.0) * u[0] * u[1];
                o[3] = -third - u[0] * u[0];
            }),
        }
    }

    pub const COUPLED_RADIUS: f64 = 2.0;

    pub fn coupled_2d<T: Real>() -> CutoffNonlinearity<T> {
        make_cutoff_nonlinearity(coupled_raw(), T::lit(COUPLED_RADIUS))
    }

    /// `f ≡ A` on the plateau `|u| ≤ R/2`, `g ≡ 0`.
    pub fn constant_matrix<T: Real>(a: Vec<T>, radius: T) -> CutoffNonlinearity<T> {
        let m = (a.len() as f64).sqrt() as usize;
        let z: MapFn<T> = Arc::new(|_, out: &mut [T]| out.iter_mut().for_each(|x| *x = T::zero()));
        let raw = RawPair {
            m,
            f: Arc::new(move |_, out: &mut [T]| out.copy_from_slice(&a)),
            df: z.clone(),
            g: z.clone(),
            dg: z,
        };
        make_cutoff_nonlinearity(raw, radius)
    }

    /// `f ≡ 0`, `g = χ · g_raw` with the given raw reaction.
    pub fn reaction_only<T: Real>(m: usize, g: MapFn<T>, dg: MapFn<T>, radius: T) -> CutoffNonlinearity<T> {
        let z = RawPair::<T>::zero(m);
        let raw = RawPair { m, f: z.f, df: z.df, g, dg };
        make_cutoff_nonlinearity(raw, radius).with_vanishing_f()
    }
}

/// Gradient-dependent nonlinearity `f(u, p)`, `p = ∂ₓu`, `f: ℝ^m × ℝ^m → ℝ^m`.
///
/// First derivatives are row-major `m × m` (`f_u[i*m + l] = ∂f_i/∂u_l`);
/// second derivatives are `m × m × m` (`f_uu[(i*m + l)*m + r] = ∂²f_i/∂u_l∂u_r`).
pub trait GradientNonlinearity<T: Real>: Send + Sync {
    fn m(&self) -> usize;
    fn f(&self, u: &[T], p: &[T], out: &mut [T]);
    fn f_u(&self, u: &[T], p: &[T], out: &mut [T]);
    fn f_p(&self, u: &[T], p: &[T], out: &mut [T]);
    fn f_uu(&self, u: &[T], p: &[T], out: &mut [T]);
    fn f_up(&self, u: &[T], p: &[T], out: &mut [T]);
    fn f_pp(&self, u: &[T], p: &[T], out: &mut [T]);
    /// Joint support radius in `(u, p)`.
    fn support_radius(&self) -> T;
}

/// Raw scalar-per-component gradient nonlinearity `f_i(u, p) = h(u_i, p_i)`
/// with all derivatives of `h` up to second order, cut off by
/// `χ((|u|² + |p|²)/R²)`.
#[derive(Clone)]
pub struct CutoffGradient<T> {
    m: usize,
    /// `h(u, p) -> [h, h_u, h_p, h_uu, h_up, h_pp]`
    h: Arc<dyn Fn(T, T) -> [T; 6] + Send + Sync>,
    bump: Bump<T>,
}

impl<T: Real> CutoffGradient<T> {
    pub fn new(m: usize, radius: T, h: Arc<dyn Fn(T, T) -> [T; 6] + Send + Sync>) -> Self {
        CutoffGradient { m, h, bump: Bump { radius } }
    }

    fn joint(&self, u: &[T], p: &[T]) -> Vec<T> {
        u.iter().chain(p).copied().collect()
    }

    /// Value, gradient (length 2m) and hessian (2m × 2m) of `f_i`.
    fn component(&self, i: usize, u: &[T], p: &[T]) -> (T, Vec<T>, Vec<T>) {
        let m = self.m;
        let d = 2 * m;
        let y = self.joint(u, p);
        let mut cg = vec![T::zero(); d];
        let chi = self.bump.grad(&y, &mut cg);
        let mut ch = vec![T::zero(); d * d];
        self.bump.hessian(&y, &mut ch);
        let [h, hu, hp, huu, hup, hpp] = (self.h)(u[i], p[i]);
        // raw gradient / hessian of h(u_i, p_i) in the joint variable
        let mut rg = vec![T::zero(); d];
        rg[i] = hu;
        rg[m + i] = hp;
        let mut rh = vec![T::zero(); d * d];
        rh[i * d + i] = huu;
        rh[i * d + m + i] = hup;
        rh[(m + i) * d + i] = hup;
        rh[(m + i) * d + m + i] = hpp;
        let val = chi * h;
        let grad: Vec<T> = (0..d).map(|a| chi * rg[a] + cg[a] * h).collect();
        let mut hess = vec![T::zero(); d * d];
        for a in 0..d {
            for b in 0..d {
                hess[a * d + b] = ch[a * d + b] * h + cg[a] * rg[b] + cg[b] * rg[a] + chi * rh[a * d + b];
            }
        }
        (val, grad, hess)
    }
}

impl<T: Real> GradientNonlinearity<T> for CutoffGradient<T> {
    fn m(&self) -> usize {
        self.m
    }

    fn support_radius(&self) -> T {
        self.bump.radius
    }

    fn f(&self, u: &[T], p: &[T], out: &mut [T]) {
        let chi = self.bump.value(&self.joint(u, p));
        for i in 0..self.m {
            out[i] = if chi == T::zero() { T::zero() } else { chi * (self.h)(u[i], p[i])[0] };
        }
    }

    fn f_u(&self, u: &[T], p: &[T], out: &mut [T]) {
        let m = self.m;
        for i in 0..m {
            let (_, g, _) = self.component(i, u, p);
            out[i * m..(i + 1) * m].copy_from_slice(&g[..m]);
        }
    }

    fn f_p(&self, u: &[T], p: &[T], out: &mut [T]) {
        let m = self.m;
        for i in 0..m {
            let (_, g, _) = self.component(i, u, p);
            out[i * m..(i + 1) * m].copy_from_slice(&g[m..]);
        }
    }

    fn f_uu(&self, u: &[T], p: &[T], out: &mut [T]) {
        self.hessian_block(u, p, out, 0, 0)
    }

    fn f_up(&self, u: &[T], p: &[T], out: &mut [T]) {
        self.hessian_block(u, p, out, 0, self.m)
    }

    fn f_pp(&self, u: &[T], p: &[T], out: &mut [T]) {
        self.hessian_block(u, p, out, self.m, self.m)
    }
}

impl<T: Real> CutoffGradient<T> {
    fn hessian_block(&self, u: &[T], p: &[T], out: &mut [T], ro: usize, co: usize) {
        let m = self.m;
        let d = 2 * m;
        for i in 0..m {
            let (_, _, h) = self.component(i, u, p);
            for l in 0..m {
                for r in 0..m {
                    out[(i * m + l) * m + r] = h[(ro + l) * d + co + r];
                }
            }
        }
    }
}

pub mod gradient_presets {
    use super::*;

    pub const RADIUS: f64 = 3.0;

    /// `f_i(u, p) = u_i p_i`; satisfies `f(0, p) = 0`.
    pub fn quadratic<T: Real>(m: usize) -> CutoffGradient<T> {
        CutoffGradient::new(
            m,
            T::lit(RADIUS),
            Arc::new(|u: T, p: T| [u * p, p, u, T::zero(), T::one(), T::zero()]),
        )
    }

    /// `f_i(u, p) = u_i p_i + c sin(p_i)`; `f(0, p) ≠ 0`.
    pub fn general<T: Real>(m: usize) -> CutoffGradient<T> {
        let c = T::lit(0.3);
        CutoffGradient::new(
            m,
            T::lit(RADIUS),
            Arc::new(move |u: T, p: T| {
                [u * p + c * p.sin(), p, u + c * p.cos(), T::zero(), T::one(), -c * p.sin()]
            }),
        )
    }

    pub fn zero<T: Real>(m: usize) -> CutoffGradient<T> {
        CutoffGradient::new(m, T::lit(RADIUS), Arc::new(|_: T, _: T| [T::zero(); 6]))
    }
}

/// Largest relative mismatch between the supplied derivatives of `f`, `g`
/// and central finite differences, over `points` random states in the
/// support ball.
pub fn derivative_mismatch<N: Nonlinearity<f64> + ?Sized>(nl: &N, seed: u64, points: usize) -> f64 {
    use rand::Rng;
    let m = nl.m();
    let mut rng = crate::sampling::rng(seed);
    let r = nl.support_radius();
    let eps = 1e-6;
    let mut worst: f64 = 0.0;
    let mut fp = vec![0.0; m * m];
    let mut fm = vec![0.0; m * m];
    let mut gp = vec![0.0; m];
    let mut gm = vec![0.0; m];
    let mut df = vec![0.0; m * m * m];
    let mut dg = vec![0.0; m * m];
    for _ in 0..points {
        let u: Vec<f64> = (0..m).map(|_| rng.gen_range(-r..r) / (m as f64).sqrt()).collect();
        nl.df(&u, &mut df);
        nl.dg(&u, &mut dg);
        let scale = 1.0 + df.iter().chain(&dg).fold(0.0f64, |a, &b| a.max(b.abs()));
        for l in 0..m {
            let mut up = u.clone();
            let mut um = u.clone();
            up[l] += eps;
            um[l] -= eps;
            nl.f(&up, &mut fp);
            nl.f(&um, &mut fm);
            nl.g(&up, &mut gp);
            nl.g(&um, &mut gm);
            for ij in 0..m * m {
                let fd = (fp[ij] - fm[ij]) / (2.0 * eps);
                worst = worst.max((fd - df[ij * m + l]).abs() / scale);
            }
            for i in 0..m {
                let fd = (gp[i] - gm[i]) / (2.0 * eps);
                worst = worst.max((fd - dg[i * m + l]).abs() / scale);
            }
        }
    }
    worst
}

#[cfg(test)]
mod tests {
    use super::presets::*;
    use super::*;

    #[test]
    fn smoothstep_endpoints() {
        assert_eq!(smoothstep(0.0f64), (0.0, 0.0, 0.0));
        assert_eq!(smoothstep(1.0f64), (1.0, 0.0, 0.0));
        let (q, dq, _) = smoothstep(0.5f64);
        assert!((q - 0.5).abs() < 1e-15);
        assert!((dq - SMOOTHSTEP_MAX_SLOPE).abs() < 1e-15);
    }

    #[test]
    fn cutoff_support_and_plateau() {
        let nl = burgers_cutoff::<f64>();
        let mut f = [0.0];
        nl.f(&[2.0], &mut f);
        assert_eq!(f[0], 0.0);
        nl.f(&[-2.5], &mut f);
        assert_eq!(f[0], 0.0);
        nl.f(&[0.99], &mut f);
        assert_eq!(f[0], 0.99);
        let mut g = [0.0];
        nl.g(&[0.7], &mut g);
        assert_eq!(g[0], -0.5 * 0.7);
    }

    #[test]
    fn burgers_cutoff_derivative_matches_finite_differences() {
        assert!(derivative_mismatch(&burgers_cutoff::<f64>(), 1, 100) < 1e-6);
    }

    #[test]
    fn coupled_derivatives_match_finite_differences() {
        assert!(derivative_mismatch(&coupled_2d::<f64>(), 2, 100) < 1e-6);
    }

    #[test]
    fn g_vanishes_at_origin_for_presets() {
        assert!(burgers_cutoff::<f64>().g_zero_at_origin());
        assert!(coupled_2d::<f64>().g_zero_at_origin());
    }

    #[test]
    fn quadratic_gradient_derivatives_are_symbolic() {
        use rand::Rng;
        let nl = gradient_presets::quadratic::<f64>(1);
        let mut rng = crate::sampling::rng(9);
        for _ in 0..100 {
            // inside the plateau: (u² + p²) ≤ R²/4
            let u = rng.gen_range(-1.0..1.0);
            let p = rng.gen_range(-1.0..1.0);
            let mut o = [0.0];
            nl.f_u(&[u], &[p], &mut o);
            assert!((o[0] - p).abs() < 1e-8);
            nl.f_p(&[u], &[p], &mut o);
            assert!((o[0] - u).abs() < 1e-8);
            nl.f_up(&[u], &[p], &mut o);
            assert!((o[0] - 1.0).abs() < 1e-8);
            nl.f_uu(&[u], &[p], &mut o);
            assert!(o[0].abs() < 1e-8);
            nl.f_pp(&[u], &[p], &mut o);
            assert!(o[0].abs() < 1e-8);
        }
    }

    #[test]
    fn general_gradient_derivatives_match_finite_differences_in_annulus() {
        let nl = gradient_presets::general::<f64>(1);
        let eps = 1e-5;
        for &(u, p) in &[(1.2, 1.1), (-0.9, 1.7), (2.0, -1.0), (0.3, 0.2)] {
            let f = |u: f64, p: f64| {
                let mut o = [0.0];
                nl.f(&[u], &[p], &mut o);
                o[0]
            };
            let fu = |u: f64, p: f64| {
                let mut o = [0.0];
                nl.f_u(&[u], &[p], &mut o);
                o[0]
            };
            let fp = |u: f64, p: f64| {
                let mut o = [0.0];
                nl.f_p(&[u], &[p], &mut o);
                o[0]
            };
            let mut o = [0.0];
            assert!(((f(u + eps, p) - f(u - eps, p)) / (2.0 * eps) - fu(u, p)).abs() < 1e-7);
            assert!(((f(u, p + eps) - f(u, p - eps)) / (2.0 * eps) - fp(u, p)).abs() < 1e-7);
            nl.f_uu(&[u], &[p], &mut o);
            assert!(((fu(u + eps, p) - fu(u - eps, p)) / (2.0 * eps) - o[0]).abs() < 1e-6);
            nl.f_up(&[u], &[p], &mut o);
            assert!(((fu(u, p + eps) - fu(u, p - eps)) / (2.0 * eps) - o[0]).abs() < 1e-6);
            nl.f_pp(&[u], &[p], &mut o);
            assert!(((fp(u, p + eps) - fp(u, p - eps)) / (2.0 * eps) - o[0]).abs() < 1e-6);
        }
    }
}
