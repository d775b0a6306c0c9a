//! Seeded random fields for probes, Lipschitz sampling and property checks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::spectral::{BasisKind, SpectralField};
use crate::scalar::Real;

pub type SampleRng = ChaCha8Rng;

pub fn rng(seed: u64) -> SampleRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Shape of the coefficient spectrum of a random field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Spectrum {
    /// Independent Gaussian-like coefficients with magnitude `~ k^{-decay}`
    /// restricted to modes `≤ max_mode`.
    Smooth { decay: f64, max_mode: usize },
    /// Same-signed coefficients `~ k^{-3/2}` up to the resolution limit; the
    /// slowest decay compatible with a finite `H¹` norm up to a log factor.
    /// These fields nearly saturate `‖Q_K v‖_{L∞} ≲ K^{-1/2} ‖v‖_{H¹}`.
    Rough { alternate: bool },
}

fn gaussian(rng: &mut SampleRng) -> f64 {
    // Box-Muller
    let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Random field with the given spectrum, rescaled to `‖v‖_{H¹} = h1_norm`.
pub fn random_field<T: Real>(
    rng: &mut SampleRng,
    basis: BasisKind,
    length: T,
    m: usize,
    n_modes: usize,
    spectrum: Spectrum,
    h1_norm: T,
) -> SpectralField<T> {
    let mut v = SpectralField::zeros(basis, length, m, n_modes);
    let count = v.count();
    for c in 0..m {
        let sign: f64 = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        for i in 0..count {
            let k = (i + basis.first_mode()).max(1) as f64;
            let value = match spectrum {
                Spectrum::Smooth { decay, max_mode } => {
                    if (i + basis.first_mode()) > max_mode {
                        0.0
                    } else {
                        gaussian(rng) * k.powf(-decay)
                    }
                }
                Spectrum::Rough { alternate } => {
                    let s = if alternate && (i % 2 == 1) { -sign } else { sign };
                    s * (1.0 + 0.2 * rng.gen_range(-1.0..1.0)) * k.powf(-1.5)
                }
            };
            v.component_mut(c)[i] = T::lit(value);
        }
    }
    let n = v.h1_norm();
    if n > T::zero() {
        v = v.scale(h1_norm / n);
    }
    v
}

/// Random smooth field with a uniformly drawn norm in `[0, radius]`.
pub fn random_in_ball<T: Real>(
    rng: &mut SampleRng,
    basis: BasisKind,
    length: T,
    m: usize,
    n_modes: usize,
    spectrum: Spectrum,
    radius: T,
) -> SpectralField<T> {
    let r = T::lit(rng.gen_range(0.05..1.0)) * radius;
    random_field(rng, basis, length, m, n_modes, spectrum, r)
}

pub fn uniform(rng: &mut SampleRng, lo: f64, hi: f64) -> f64 {
    rng.gen_range(lo..hi)
}
