//! Symmetric alpha-stable noise.
//!
//! Conventions: `S_alpha(scale, 0, 0)` has characteristic function
//! `exp(-scale^alpha |k|^alpha)`, so the standard law at `alpha = 2` is a
//! centred Gaussian with variance 2. The Levy motion `L_t` has increments
//! `L_t - L_s ~ S_alpha((t - s)^(1/alpha), 0, 0)` and jump measure
//! `c_alpha / |y|^(1 + alpha) dy`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::special::gamma;

/// Minimum sample count accepted by [`tail_diagnostic`].
pub const MIN_TAIL_SAMPLES: usize = 100_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("stability index {alpha} outside {range}")]
    OutOfRange { alpha: f64, range: &'static str },
    #[error("noise intensity must be finite and nonnegative, got {0}")]
    NegativeIntensity(f64),
    #[error("jump measure is singular at y = 0")]
    SingularAtZero,
    #[error("need at least {needed} samples, got {got}")]
    InsufficientSamples { needed: usize, got: usize },
}

/// Symmetric stable noise `sigma dL^alpha`. Skewness and shift are fixed at 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StableSpec {
    pub alpha: f64,
    pub sigma: f64,
}

impl StableSpec {
    pub fn new(alpha: f64, sigma: f64) -> Result<Self, NoiseError> {
        if !(alpha > 0.0 && alpha <= 2.0) {
            return Err(NoiseError::OutOfRange {
                alpha,
                range: "(0, 2]",
            });
        }
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(NoiseError::NegativeIntensity(sigma));
        }
        Ok(Self { alpha, sigma })
    }

    /// `alpha = 2` is handled as Brownian noise.
    pub fn is_brownian(&self) -> bool {
        self.alpha == 2.0
    }
}

/// Normalisation of the jump measure,
/// `C_alpha = alpha Gamma((1 + alpha)/2) / (2^(1 - alpha) sqrt(pi) Gamma(1 - alpha/2))`,
/// which makes the generator's symbol exactly `-|k|^alpha`.
pub fn c_alpha(alpha: f64) -> Result<f64, NoiseError> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(NoiseError::OutOfRange {
            alpha,
            range: "(0, 2)",
        });
    }
    Ok(alpha * gamma((1.0 + alpha) / 2.0)
        / (2f64.powf(1.0 - alpha) * PI.sqrt() * gamma(1.0 - alpha / 2.0)))
}

/// Tail constant of `S_alpha(1, beta, 0)`:
/// `P(X > y) ~ tail_constant(alpha) (1 + beta)/2 y^-alpha`.
///
/// Equals `2 c_alpha(alpha) / alpha`; computed here from its own closed form
/// `(1 - alpha) / (Gamma(2 - alpha) cos(pi alpha / 2))`.
pub fn tail_constant(alpha: f64) -> Result<f64, NoiseError> {
    if !(alpha > 0.0 && alpha < 2.0) {
        return Err(NoiseError::OutOfRange {
            alpha,
            range: "(0, 2)",
        });
    }
    if (alpha - 1.0).abs() < 1e-12 {
        return Ok(2.0 / PI);
    }
    Ok((1.0 - alpha) / (gamma(2.0 - alpha) * (PI * alpha / 2.0).cos()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpMeasure {
    pub alpha: f64,
    pub c_alpha: f64,
}

impl JumpMeasure {
    pub fn new(alpha: f64) -> Result<Self, NoiseError> {
        Ok(Self {
            alpha,
            c_alpha: c_alpha(alpha)?,
        })
    }

    pub fn density(&self, y: f64) -> Result<f64, NoiseError> {
        if y == 0.0 {
            return Err(NoiseError::SingularAtZero);
        }
        Ok(self.c_alpha / y.abs().powf(1.0 + self.alpha))
    }

    /// Mass of `{|y| > r}`.
    pub fn tail_mass(&self, r: f64) -> f64 {
        2.0 * self.c_alpha / (self.alpha * r.powf(self.alpha))
    }
}

/// The RNG stream type. Streams are keyed by `(seed, index)`; ChaCha's
/// 64-bit stream id makes distinct indices independent.
pub type StreamRng = ChaCha8Rng;

pub fn stream(seed: u64, index: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

/// One draw from `S_alpha(1, 0, 0)` by the Chambers-Mallows-Stuck transform.
pub fn sample_standard<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    if alpha == 2.0 {
        let z: f64 = rng.sample(StandardNormal);
        return std::f64::consts::SQRT_2 * z;
    }
    let u = PI * (open_unit(rng) - 0.5);
    if alpha == 1.0 {
        return u.tan();
    }
    let w = -open_unit(rng).ln();
    let first = (alpha * u).sin() / u.cos().powf(1.0 / alpha);
    let second = (((1.0 - alpha) * u).cos() / w).powf((1.0 - alpha) / alpha);
    let x = first * second;
    // u = +-pi/2 is excluded by open_unit, so x is finite
    debug_assert!(x.is_finite() || u.abs() >= FRAC_PI_2 - 1e-15);
    x
}

/// Increment of `sigma L^alpha` over a step `dt`.
pub fn increment<R: Rng + ?Sized>(spec: &StableSpec, dt: f64, rng: &mut R) -> f64 {
    if spec.sigma == 0.0 {
        return 0.0;
    }
    if spec.is_brownian() {
        let z: f64 = rng.sample(StandardNormal);
        return spec.sigma * (2.0 * dt).sqrt() * z;
    }
    spec.sigma * dt.powf(1.0 / spec.alpha) * sample_standard(spec.alpha, rng)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailEstimate {
    pub y: f64,
    /// `y^alpha P(X > y)`
    pub right: f64,
    /// `y^alpha P(X < -y)`
    pub left: f64,
    /// Binomial standard error of `right`.
    pub right_se: f64,
    /// The limit `tail_constant(alpha) sigma^alpha / 2`.
    pub theoretical: f64,
}

/// Empirical `y^alpha P(X > y)` for samples of `sigma L_1^alpha`.
pub fn tail_diagnostic(
    alpha: f64,
    sigma: f64,
    samples: &[f64],
    y: f64,
) -> Result<TailEstimate, NoiseError> {
    let theoretical = tail_constant(alpha)? * sigma.powf(alpha) / 2.0;
    if samples.len() < MIN_TAIL_SAMPLES {
        return Err(NoiseError::InsufficientSamples {
            needed: MIN_TAIL_SAMPLES,
            got: samples.len(),
        });
    }
    let n = samples.len() as f64;
    let above = samples.iter().filter(|&&x| x > y).count() as f64;
    let below = samples.iter().filter(|&&x| x < -y).count() as f64;
    let scale = y.powf(alpha);
    let p = above / n;
    Ok(TailEstimate {
        y,
        right: scale * p,
        left: scale * below / n,
        right_se: scale * (p * (1.0 - p) / n).sqrt(),
        theoretical,
    })
}

/// Least-squares slope of `log P(|X| > y)` against `log y` on `n_points`
/// log-spaced abscissae in `[y_lo, y_hi]`.
pub fn survival_slope(samples: &[f64], y_lo: f64, y_hi: f64, n_points: usize) -> f64 {
    let mut mags: Vec<f64> = samples.iter().map(|x| x.abs()).collect();
    mags.sort_by(|a, b| a.total_cmp(b));
    let n = mags.len() as f64;
    let pts: Vec<(f64, f64)> = (0..n_points)
        .filter_map(|k| {
            let y = y_lo * (y_hi / y_lo).powf(k as f64 / (n_points - 1) as f64);
            let idx = mags.partition_point(|&m| m <= y);
            let surv = (mags.len() - idx) as f64 / n;
            (surv > 0.0).then(|| (y.ln(), surv.ln()))
        })
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// `(y, empirical, theoretical)` rows of the right tail as CSV.
pub fn tail_csv(alpha: f64, sigma: f64, samples: &[f64], ys: &[f64]) -> Result<String, NoiseError> {
    let mut out = String::from("y,empirical_tail,theoretical_tail\n");
    for &y in ys {
        let est = tail_diagnostic(alpha, sigma, samples, y)?;
        out.push_str(&format!("{},{},{}\n", y, est.right, est.theoretical));
    }
    Ok(out)
}
