//! Tabulated manifold graph with a local linear interpolator, plus the
//! invariance and tracking checks.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::perron::{perron_solve_with, Forcing, Layout, PerronConfig};
use crate::dynamics::phi1;
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::spectral::Block;

/// `M` sampled at base points of `P_nΦ`.
///
/// Base points are low-mode coordinate vectors; images are full flattened
/// coordinate vectors whose low slots are zero.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct ManifoldGraph<T: Real> {
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    pub theta: f64,
    pub base_points: Vec<Vec<T>>,
    pub images: Vec<Vec<T>>,
    /// `H¹` weights of the low coordinates and of all coordinates.
    pub low_weight: Vec<T>,
    pub h1_weight: Vec<T>,
    /// Perron iterations and largest contraction factor per base point.
    pub iterations: Vec<usize>,
    pub factors: Vec<f64>,
}

impl<T: Real> ManifoldGraph<T> {
    pub fn is_empty(&self) -> bool {
        self.base_points.is_empty()
    }

    pub fn len(&self) -> usize {
        self.base_points.len()
    }

    fn low_dist(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).zip(&self.low_weight).map(|((&x, &y), &w)| (x - y) * (x - y) * w).sum::<T>().sqrt()
    }

    fn full_dist(&self, a: &[T], b: &[T]) -> T {
        a.iter().zip(b).zip(&self.h1_weight).map(|((&x, &y), &w)| (x - y) * (x - y) * w).sum::<T>().sqrt()
    }

    /// Interpolated image: value at the nearest base point plus a gradient
    /// correction fitted by least squares on the `2d + 1` nearest base points
    /// (`d` the low dimension). Returns the image and whether the query lies
    /// farther from its nearest base point than the fitting stencil reaches
    /// (extrapolation).
    pub fn eval(&self, query: &[T]) -> Result<(Vec<T>, bool)> {
        self.eval_excluding(query, None)
    }

    fn eval_excluding(&self, query: &[T], skip: Option<usize>) -> Result<(Vec<T>, bool)> {
        if self.is_empty() {
            return Err(Error::EmptyGraph);
        }
        let d = query.len();
        let mut order: Vec<(f64, usize)> = (0..self.len())
            .filter(|&i| Some(i) != skip)
            .map(|i| (self.low_dist(query, &self.base_points[i]).f64(), i))
            .collect();
        if order.is_empty() {
            return Err(Error::EmptyGraph);
        }
        order.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let (d0, i0) = order[0];
        let stencil: Vec<usize> = order.iter().skip(1).take(2 * d + 1).map(|&(_, i)| i).collect();
        let reach = stencil
            .iter()
            .map(|&i| self.low_dist(&self.base_points[i], &self.base_points[i0]).f64())
            .fold(0.0, f64::max);
        let extrapolated = d0 > reach;
        let mut out = self.images[i0].clone();
        if stencil.is_empty() {
            return Ok((out, true));
        }
        let p0 = &self.base_points[i0];
        let x = DMatrix::from_fn(stencil.len(), d, |r, c| (self.base_points[stencil[r]][c] - p0[c]).f64());
        let svd = x.svd(true, true);
        let dq = DVector::from_fn(d, |c, _| (query[c] - p0[c]).f64());
        let img0 = &self.images[i0];
        for slot in 0..img0.len() {
            let y = DVector::from_fn(stencil.len(), |r, _| (self.images[stencil[r]][slot] - img0[slot]).f64());
            if y.iter().all(|v| *v == 0.0) {
                continue;
            }
            let grad = svd.solve(&y, 1e-12).map_err(|e| Error::Solver(e.to_string()))?;
            out[slot] += T::lit(grad.dot(&dq));
        }
        Ok((out, extrapolated))
    }

    /// Leave-one-out interpolation error, the local sampling error estimate.
    pub fn loo_error(&self) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for i in 0..self.len() {
            let (pred, _) = self.eval_excluding(&self.base_points[i], Some(i))?;
            worst = worst.max(self.full_dist(&pred, &self.images[i]).f64());
        }
        Ok(worst)
    }

    /// Largest `‖M(p₁) − M(p₂)‖_{H¹}/‖p₁ − p₂‖_{H¹}` over base-point pairs.
    pub fn lipschitz_sampled(&self) -> f64 {
        let mut best: f64 = 0.0;
        for i in 0..self.len() {
            for j in 0..i {
                let dp = self.low_dist(&self.base_points[i], &self.base_points[j]).f64();
                if dp > 0.0 {
                    best = best.max(self.full_dist(&self.images[i], &self.images[j]).f64() / dp);
                }
            }
        }
        best
    }
}

/// Perron solves at every base point (low-mode coordinate vectors).
pub fn build_manifold<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    base_points: &[Vec<T>],
    cfg: &PerronConfig,
) -> Result<ManifoldGraph<T>> {
    let layout = Layout::new(forcing);
    let theta = T::lit(cfg.theta);
    let low = layout.low_mask(theta);
    let low_weight: Vec<T> =
        layout.h1_weight.iter().zip(&low).filter(|(_, &l)| l).map(|(&w, _)| w).collect();
    let mut images = Vec::with_capacity(base_points.len());
    let mut iterations = Vec::with_capacity(base_points.len());
    let mut factors = Vec::with_capacity(base_points.len());
    for p in base_points {
        if p.len() != low_weight.len() {
            return Err(Error::SizeMismatch { expected: low_weight.len(), got: p.len() });
        }
        let sol = perron_solve_with(forcing, &layout, &layout.from_low_coords(p, theta), cfg)?;
        images.push(layout.flatten(&sol.image));
        iterations.push(sol.iterations);
        factors.push(sol.max_factor());
    }
    Ok(ManifoldGraph {
        n: cfg.n,
        k: cfg.k,
        theta: cfg.theta,
        base_points: base_points.to_vec(),
        images,
        low_weight,
        h1_weight: layout.h1_weight.clone(),
        iterations,
        factors,
    })
}

/// One exponential-Euler step of `∂ₜv + (A + shift)v = 𝓕(v)`.
pub fn exp_euler_block<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    layout: &Layout<T>,
    v: &Block<T>,
    dt: T,
) -> Result<Block<T>> {
    let (f, _) = forcing.eval(v, None)?;
    let x = layout.flatten(v);
    let h = layout.flatten(&f);
    let y: Vec<T> = x
        .iter()
        .zip(&h)
        .zip(&layout.mu)
        .map(|((&xi, &hi), &mu)| {
            let z = mu * dt;
            (-z).exp() * xi + dt * phi1(z) * hi
        })
        .collect();
    Ok(layout.unflatten(&y))
}

/// Result of [`invariance_residual`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceReport {
    /// `‖Q_n v(dt) − M(P_n v(dt))‖_{H¹}` per base point.
    pub residuals: Vec<f64>,
    /// Residual divided by `1 + ‖p‖_{H¹}`, maximized over base points.
    pub max_relative: f64,
    /// Queries that fell outside the interpolation stencil.
    pub extrapolated: usize,
    /// Fixed-point tolerance + horizon tail + leave-one-out interpolation error.
    pub budget: f64,
}

/// Advances `p + M(p)` by one step and measures the distance of the result
/// from the graph.
pub fn invariance_residual<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    graph: &ManifoldGraph<T>,
    cfg: &PerronConfig,
    dt: T,
) -> Result<InvarianceReport> {
    if graph.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let layout = Layout::new(forcing);
    let theta = T::lit(cfg.theta);
    let mut residuals = Vec::new();
    let mut max_relative: f64 = 0.0;
    let mut extrapolated = 0;
    for (p, img) in graph.base_points.iter().zip(&graph.images) {
        let mut x = img.clone();
        let low = layout.low_mask(theta);
        let mut it = p.iter();
        for (v, &l) in x.iter_mut().zip(&low) {
            if l {
                *v = *it.next().expect("low coordinate");
            }
        }
        let next = exp_euler_block(forcing, &layout, &layout.unflatten(&x), dt)?;
        let q = layout.low_coords(&next, theta);
        let (m, ex) = graph.eval(&q)?;
        if ex {
            extrapolated += 1;
        }
        let high = layout.flatten(&layout.split(&next, theta, false));
        let r = graph.full_dist(&high, &m).f64();
        let pn = graph.low_dist(p, &vec![T::zero(); p.len()]).f64();
        max_relative = max_relative.max(r / (1.0 + pn));
        residuals.push(r);
    }
    let tail = (-cfg.half_gap * cfg.horizon).exp();
    let budget = cfg.tol + tail + graph.loo_error()?;
    Ok(InvarianceReport { residuals, max_relative, extrapolated, budget })
}

/// Fitted exponential decay of the distance to the manifold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackingFit {
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
    pub floor: f64,
    /// Slope of `log d(t)` on the fitting window.
    pub slope: f64,
    pub rate: f64,
    pub theta: f64,
    pub window: (usize, usize),
    /// `d(0)` at or below the floor, or too few points in the window.
    pub degenerate: bool,
}

/// Fits `log d(t)`, `d(t) = ‖Q_n v(t) − M(P_n v(t))‖_{H¹}`, on the window where
/// `d ∈ [10·floor, d(0)/10]`. The floor is
/// `max(1e-9·(1 + max‖v‖), dt·max‖M(P_n v)‖)`, the second term being the
/// first-order shift between the integrator's invariant manifold and `M`.
pub fn tracking_verify<T: Real, F: Forcing<T> + ?Sized, G>(
    forcing: &F,
    times: &[f64],
    states: &[Block<T>],
    theta: f64,
    dt: f64,
    mut m_of: G,
) -> Result<TrackingFit>
where
    G: FnMut(&Block<T>) -> Result<Block<T>>,
{
    let layout = Layout::new(forcing);
    let th = T::lit(theta);
    let mut distances = Vec::with_capacity(states.len());
    let mut vmax: f64 = 0.0;
    let mut mmax: f64 = 0.0;
    for v in states {
        let p = layout.split(v, th, true);
        let q = layout.split(v, th, false);
        let m = m_of(&p)?;
        mmax = mmax.max(m.h1_norm().f64());
        vmax = vmax.max(v.h1_norm().f64());
        distances.push(q.sub(&m)?.h1_norm().f64());
    }
    let floor = (1e-9 * (1.0 + vmax)).max(dt * mmax);
    let d0 = distances.first().copied().unwrap_or(0.0);
    let mut lo = usize::MAX;
    let mut hi = 0;
    for (i, &d) in distances.iter().enumerate() {
        if d <= d0 / 10.0 && d >= 10.0 * floor {
            lo = lo.min(i);
            hi = hi.max(i);
        }
    }
    let mut fit = TrackingFit {
        times: times.to_vec(),
        distances: distances.clone(),
        floor,
        slope: 0.0,
        rate: 0.0,
        theta,
        window: (lo.min(hi), hi),
        degenerate: true,
    };
    if d0 <= floor || lo == usize::MAX || hi < lo + 2 {
        return Ok(fit);
    }
    let xs: Vec<f64> = times[lo..=hi].to_vec();
    let ys: Vec<f64> = distances[lo..=hi].iter().map(|d| d.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    fit.slope = sxy / sxx;
    fit.rate = -fit.slope;
    fit.degenerate = false;
    Ok(fit)
}

/// [`tracking_verify`] with `M` evaluated by a fresh Perron solve at every
/// recorded state (no interpolation error).
pub fn tracking_perron<T: Real, F: Forcing<T> + ?Sized>(
    forcing: &F,
    cfg: &PerronConfig,
    times: &[f64],
    states: &[Block<T>],
    dt: f64,
) -> Result<TrackingFit> {
    let layout = Layout::new(forcing);
    tracking_verify(forcing, times, states, cfg.theta, dt, |p| {
        Ok(perron_solve_with(forcing, &layout, p, cfg)?.image)
    })
}
