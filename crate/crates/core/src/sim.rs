//! Gaussian-process snippet simulator.
//!
//! Latent curves are drawn exactly: for each subject the finite-dimensional
//! Gaussian vector `(X(T_1), …, X(T_m))` is sampled through a Cholesky
//! factor of the true covariance matrix at the sampled points (with a tiny
//! diagonal jitter retry for finite-rank covariances), never through grid
//! interpolation.
//!
//! Randomness: one ChaCha8 stream per subject (`set_stream(i)`) from the
//! config seed, so subjects can be generated concurrently and the dataset is
//! a pure function of the config.

use std::fmt;
use std::sync::Arc;

use rand::distr::uniform::SampleUniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg::cholesky_with_jitter;
use crate::num::Real;
use crate::types::{trapezoid, SnippetDataset, Subject};

/// True covariance structure on `[0, 1]`.
#[derive(Clone)]
pub enum CovSetting<F> {
    /// `σ_X(s) σ_X(t) e^{−|s−t|}` with `σ_X²(t) = √t e^{−(t−0.1)²/10} + 1`
    /// (an exponential correlation with a nonconstant variance function).
    I,
    /// `Σ_{k=1}^{50} 2k^{−2} φ_k(s) φ_k(t)` with `φ_k(t) = √2 sin(2kπt)`.
    II,
    /// `Σ_{j,k=1}^{5} e^{−|j−k|}/5 · φ_j(s) φ_k(t)`.
    III,
    /// User-supplied covariance function.
    Custom(Arc<dyn Fn(F, F) -> F + Send + Sync>),
}

impl<F> fmt::Debug for CovSetting<F> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CovSetting::I => write!(f, "I"),
            CovSetting::II => write!(f, "II"),
            CovSetting::III => write!(f, "III"),
            CovSetting::Custom(_) => write!(f, "Custom"),
        }
    }
}

/// True mean function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MeanFn {
    /// `2t² cos(2πt)`
    #[default]
    Mu1,
    /// `e^t/2`
    Mu2,
    Zero,
}

/// Observation design.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// Random per-subject count, uniform on
    /// `{max(2, mean_m−2), …, mean_m+2}`, times i.i.d. uniform on the
    /// snippet interval.
    Sparse { mean_m: usize },
    /// Fixed count, times i.i.d. uniform on the snippet interval.
    SparseFixed { m: usize },
    /// Fixed count on an equally spaced grid spanning the snippet interval.
    Dense { m: usize },
}

/// Noise level, either directly or through the signal-to-noise ratio
/// `E‖X−μ‖² / Var(ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NoiseSpec<F> {
    Sigma0Sq(F),
    Snr(F),
}

/// Simulation scenario.
#[derive(Debug, Clone)]
pub struct SimConfig<F> {
    pub cov: CovSetting<F>,
    pub mean: MeanFn,
    pub design: Design,
    pub n: usize,
    pub delta: F,
    pub noise: NoiseSpec<F>,
    pub seed: u64,
}

impl<F: Real> SimConfig<F> {
    fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidSimConfig(msg.into()));
        if self.n < 1 {
            return bad("n must be at least 1");
        }
        if !(self.delta > F::zero() && self.delta <= F::one()) {
            return bad("delta must lie in (0, 1]");
        }
        match self.design {
            Design::Sparse { mean_m } if mean_m < 2 => bad("sparse mean_m must be >= 2"),
            Design::SparseFixed { m } if m < 2 => bad("fixed sparse m must be >= 2"),
            Design::Dense { m } if m < 2 => bad("dense m must be >= 2"),
            _ => Ok(()),
        }?;
        match self.noise {
            NoiseSpec::Sigma0Sq(v) if v < F::zero() => bad("sigma0_sq must be >= 0"),
            NoiseSpec::Snr(r) if !(r > F::zero()) => bad("snr must be > 0"),
            _ => Ok(()),
        }
    }
}

/// True mean value.
pub fn true_mean<F: Real>(mean: MeanFn, t: F) -> F {
    let two_pi = F::cast(2.0 * std::f64::consts::PI);
    match mean {
        MeanFn::Mu1 => F::cast(2.0) * t * t * (two_pi * t).cos(),
        MeanFn::Mu2 => t.exp() / F::cast(2.0),
        MeanFn::Zero => F::zero(),
    }
}

fn phi<F: Real>(k: usize, t: F) -> F {
    let two_pi = F::cast(2.0 * std::f64::consts::PI);
    F::cast(std::f64::consts::SQRT_2) * (two_pi * F::usize(k) * t).sin()
}

/// Variance function of setting I.
pub fn setting_i_var<F: Real>(t: F) -> F {
    let d = t - F::cast(0.1);
    t.sqrt() * (-d * d / F::cast(10.0)).exp() + F::one()
}

/// True covariance value.
pub fn true_cov<F: Real>(setting: &CovSetting<F>, s: F, t: F) -> F {
    match setting {
        CovSetting::I => {
            (setting_i_var(s) * setting_i_var(t)).sqrt() * (-(s - t).abs()).exp()
        }
        CovSetting::II => {
            let mut acc = F::zero();
            for k in 1..=50usize {
                let w = F::cast(2.0) / (F::usize(k) * F::usize(k));
                acc += w * (phi(k, s) * phi(k, t));
            }
            acc
        }
        CovSetting::III => {
            // Accumulated over j ≤ k with the cross terms paired, so the
            // value is exactly symmetric in (s, t).
            let mut acc = F::zero();
            for j in 1..=5usize {
                for k in j..=5usize {
                    let c = F::cast((-((k - j) as f64)).exp() / 5.0);
                    let cross = if j == k {
                        phi(j, s) * phi(j, t)
                    } else {
                        phi(j, s) * phi(k, t) + phi(k, s) * phi(j, t)
                    };
                    acc += c * cross;
                }
            }
            acc
        }
        CovSetting::Custom(f) => f(s, t),
    }
}

/// Ground-truth handles attached to a simulated dataset.
#[derive(Debug, Clone)]
pub struct GroundTruth<F> {
    pub cov: CovSetting<F>,
    pub mean: MeanFn,
    pub sigma0_sq: F,
}

impl<F: Real> GroundTruth<F> {
    pub fn mean_at(&self, t: F) -> F {
        true_mean(self.mean, t)
    }

    pub fn cov_at(&self, s: F, t: F) -> F {
        true_cov(&self.cov, s, t)
    }

    /// `σ_X²(t) = C(t, t)`.
    pub fn var_at(&self, t: F) -> F {
        true_cov(&self.cov, t, t)
    }
}

/// Noise variance implied by a config: explicit, or `∫C(t,t)dt / SNR` with
/// the integral taken by 201-point trapezoid quadrature.
pub fn noise_variance_of<F: Real>(config: &SimConfig<F>) -> F {
    match config.noise {
        NoiseSpec::Sigma0Sq(v) => v,
        NoiseSpec::Snr(snr) => {
            let pts = 201usize;
            let xs: Vec<F> = (0..pts)
                .map(|i| F::usize(i) / F::usize(pts - 1))
                .collect();
            let ys: Vec<F> = xs.iter().map(|&t| true_cov(&config.cov, t, t)).collect();
            trapezoid(&xs, &ys) / snr
        }
    }
}

/// Snaps a value to the 2⁻³² grid so dense snippet endpoints differ by
/// exactly `δ` when `δ` is dyadic.
fn snap<F: Real>(x: F) -> F {
    let scale = F::cast(4_294_967_296.0);
    (x * scale).round() / scale
}

/// Draws a snippet dataset and its ground truth.
pub fn sample_dataset<F>(config: &SimConfig<F>) -> Result<(SnippetDataset<F>, GroundTruth<F>)>
where
    F: Real + SampleUniform,
    StandardNormal: Distribution<F>,
{
    config.validate()?;
    let sigma0_sq = noise_variance_of(config);
    let sigma0 = sigma0_sq.sqrt();
    let half_delta = config.delta / F::cast(2.0);

    let mut subjects = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        rng.set_stream(i as u64);

        let center = if config.delta >= F::one() {
            half_delta
        } else {
            rng.random_range(half_delta..=(F::one() - half_delta))
        };
        let times: Vec<F> = match config.design {
            Design::Sparse { mean_m } => {
                let lo_m = mean_m.saturating_sub(2).max(2);
                let hi_m = mean_m + 2;
                let m = rng.random_range(lo_m..=hi_m);
                random_times(&mut rng, center, half_delta, m)
            }
            Design::SparseFixed { m } => random_times(&mut rng, center, half_delta, m),
            Design::Dense { m } => {
                let lo = snap(center - half_delta)
                    .max(F::zero())
                    .min(F::one() - config.delta);
                (0..m)
                    .map(|j| {
                        if j + 1 == m {
                            lo + config.delta
                        } else {
                            lo + config.delta * F::usize(j) / F::usize(m - 1)
                        }
                    })
                    .collect()
            }
        };

        let m = times.len();
        let mut cov = vec![F::zero(); m * m];
        for j in 0..m {
            for l in 0..=j {
                let v = true_cov(&config.cov, times[j], times[l]);
                cov[j * m + l] = v;
                cov[l * m + j] = v;
            }
        }
        let chol = cholesky_with_jitter(&cov, m)?;
        let z: Vec<F> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let mut values = Vec::with_capacity(m);
        for j in 0..m {
            let mut x = true_mean(config.mean, times[j]);
            for l in 0..=j {
                x += chol[j * m + l] * z[l];
            }
            let eps: F = rng.sample(StandardNormal);
            values.push(x + sigma0 * eps);
        }
        subjects.push(Subject::new(format!("sim{i:05}"), times, values));
    }

    let ds = SnippetDataset::new(F::zero(), F::one(), subjects)?;
    Ok((
        ds,
        GroundTruth {
            cov: config.cov.clone(),
            mean: config.mean,
            sigma0_sq,
        },
    ))
}

fn random_times<F, R>(rng: &mut R, center: F, half_delta: F, m: usize) -> Vec<F>
where
    F: Real + SampleUniform,
    R: Rng,
{
    let lo = center - half_delta;
    let hi = center + half_delta;
    let mut times: Vec<F> = (0..m).map(|_| rng.random_range(lo..hi)).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times
}
