//! Monte-Carlo benchmark harness: replicate simulation, estimation, scoring
//! against the generating truth, and aggregation into RMSE/RMISE summaries.
//!
//! Error metrics follow the usual Monte-Carlo displays: for the noise
//! variance `RMSE = sqrt(N⁻¹ Σ_r |σ̂₀² − σ₀²|²)`, and for the variance and
//! covariance functions `RMISE = sqrt(N⁻¹ Σ_r ∫ |error_r|²)` with trapezoid
//! quadrature over the evaluation grid (squared again over both axes for the
//! covariance surface). Per-replicate squared contributions are retained so
//! results can be re-aggregated and written out deterministically.

use std::fmt;
use std::time::Instant;

use rand::distr::uniform::SampleUniform;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::corr::CorrFamily;
use crate::error::{Error, Result};
use crate::fit::{build_raw_pairs, fit_theta, select_dn, DnSelect, FitConfig};
use crate::kernel::{estimate_mean, SmoothConfig, SmoothEstimate};
use crate::noise::{empirical_h0, noise_variance_at, NoiseOptions, NoiseVariance};
use crate::num::{derive_seed, Real};
use crate::sim::{sample_dataset, GroundTruth, SimConfig};
use crate::types::{estimate_span, EvalGrid, SnippetDataset};
use crate::variance::{assemble_variance, estimate_varsigma_sq, varsigma_l2_norm, VarianceEstimate};

/// Estimation methods benchmarked against the truth.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Noise-variance estimator alone.
    SnptNoise,
    /// Semi-parametric pipeline with the Matérn correlation family.
    Snptm,
    /// Semi-parametric pipeline with the sine-basis family, dimension
    /// selected from candidates.
    Snptf,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::SnptNoise => "snpt-noise",
            Method::Snptm => "snptm",
            Method::Snptf => "snptf",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    RmseSigma0,
    RmiseVar,
    RmiseCov,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::RmseSigma0 => "rmse_sigma0",
            Metric::RmiseVar => "rmise_var",
            Metric::RmiseCov => "rmise_cov",
        })
    }
}

/// A benchmark cell.
#[derive(Debug, Clone)]
pub struct BenchScenario<F> {
    pub sim: SimConfig<F>,
    pub replicates: usize,
    pub methods: Vec<Method>,
    pub metrics: Vec<Metric>,
    pub grid_len: usize,
    /// Sine-basis dimension candidates for the SNPTF method.
    pub dn_candidates: Vec<usize>,
    pub dn_method: DnSelect,
    /// Master seed; replicate seeds are derived from it.
    pub seed: u64,
}

impl<F: Real> BenchScenario<F> {
    pub fn new(sim: SimConfig<F>, replicates: usize, seed: u64) -> Self {
        BenchScenario {
            sim,
            replicates,
            methods: vec![Method::SnptNoise],
            metrics: vec![Metric::RmseSigma0],
            grid_len: crate::types::DEFAULT_GRID_LEN,
            dn_candidates: vec![1, 2, 3, 4, 5],
            dn_method: DnSelect::Cv5,
            seed,
        }
    }
}

/// One per-replicate squared-error contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct RepRow<F> {
    pub replicate: usize,
    pub method: Method,
    pub metric: Metric,
    /// `|σ̂₀²−σ₀²|²` or the integrated squared error of the replicate.
    pub sq_error: F,
}

/// Aggregate over replicates for one (method, metric) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSummary<F> {
    pub method: Method,
    pub metric: Metric,
    /// `sqrt(mean(sq_error))`.
    pub value: F,
    /// Bootstrap standard error; `None` for a single replicate.
    pub se: Option<F>,
    pub n_used: usize,
}

#[derive(Debug, Clone)]
pub struct BenchResult<F> {
    pub rows: Vec<RepRow<F>>,
    pub summaries: Vec<MetricSummary<F>>,
    /// Failed replicates with the stage error message.
    pub failures: Vec<(usize, String)>,
    pub replicates: usize,
    pub wall_secs: f64,
}

impl<F: Real> BenchResult<F> {
    /// Deterministic CSV of the per-replicate rows.
    pub fn rows_csv(&self) -> String {
        let mut out = String::from("replicate,method,metric,sq_error\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{},{}\n",
                row.replicate, row.method, row.metric, row.sq_error
            ));
        }
        out
    }

    pub fn summary_for(&self, method: Method, metric: Metric) -> Option<&MetricSummary<F>> {
        self.summaries
            .iter()
            .find(|s| s.method == method && s.metric == metric)
    }
}

/// Base pipeline stages shared by every method in a replicate.
struct BaseFit<F> {
    mean: SmoothEstimate<F>,
    variance: VarianceEstimate<F>,
    noise: NoiseVariance<F>,
    delta_hat: F,
}

fn base_stages<F: Real>(
    ds: &SnippetDataset<F>,
    grid: &EvalGrid<F>,
    seed: u64,
) -> Result<BaseFit<F>> {
    let mean_cfg = SmoothConfig {
        seed: derive_seed(seed, 1),
        ..SmoothConfig::default()
    };
    let mean = estimate_mean(ds, &mean_cfg).map_err(|e| e.in_stage("mean"))?;
    let vs_cfg = SmoothConfig {
        seed: derive_seed(seed, 2),
        ..SmoothConfig::default()
    };
    let varsigma =
        estimate_varsigma_sq(ds, &mean, &vs_cfg).map_err(|e| e.in_stage("variance-function"))?;
    let span = estimate_span(ds);
    let norm = varsigma_l2_norm(&varsigma, grid);
    let (h0, fallback) =
        empirical_h0(ds, norm, span.delta_hat).map_err(|e| e.in_stage("noise-bandwidth"))?;
    let noise = noise_variance_at(ds, h0, fallback, &NoiseOptions::default())
        .map_err(|e| e.in_stage("noise-variance"))?;
    let variance = assemble_variance(varsigma, &noise, grid);
    Ok(BaseFit {
        mean,
        variance,
        noise,
        delta_hat: span.delta_hat,
    })
}

/// Integrated squared error of the variance function over the grid.
fn ise_var<F: Real>(base: &BaseFit<F>, truth: &GroundTruth<F>, grid: &EvalGrid<F>) -> F {
    let weights = crate::cov::trapezoid_weights(grid);
    grid.points()
        .iter()
        .zip(&weights)
        .map(|(&t, &w)| {
            let e = base.variance.sigma_x_sq(t) - truth.var_at(t);
            w * e * e
        })
        .sum()
}

/// Double-trapezoid integrated squared error of a covariance surface.
fn ise_cov<F: Real>(
    cov_hat: impl Fn(F, F) -> F,
    truth: &GroundTruth<F>,
    grid: &EvalGrid<F>,
) -> F {
    let weights = crate::cov::trapezoid_weights(grid);
    let pts = grid.points();
    let mut acc = F::zero();
    for (i, (&s, &wi)) in pts.iter().zip(&weights).enumerate() {
        for (&t, &wj) in pts.iter().zip(&weights).skip(i) {
            let e = cov_hat(s, t) - truth.cov_at(s, t);
            let contrib = wi * wj * e * e;
            // Off-diagonal contributions appear on both sides of the
            // diagonal.
            acc += if s == t { contrib } else { contrib + contrib };
        }
    }
    acc
}

fn replicate_rows<F>(
    scenario: &BenchScenario<F>,
    r: usize,
    grid: &EvalGrid<F>,
) -> Result<Vec<RepRow<F>>>
where
    F: Real + SampleUniform,
    StandardNormal: Distribution<F>,
{
    let mut sim = scenario.sim.clone();
    sim.seed = derive_seed(scenario.seed, 2 * r as u64);
    let pipeline_seed = derive_seed(scenario.seed, 2 * r as u64 + 1);
    let (ds, truth) = sample_dataset(&sim)?;

    let base = base_stages(&ds, grid, pipeline_seed)?;
    let mut rows = Vec::new();

    let want = |m: Metric| scenario.metrics.contains(&m);

    for &method in &scenario.methods {
        match method {
            Method::SnptNoise => {
                if want(Metric::RmseSigma0) {
                    let e = base.noise.sigma0_sq - truth.sigma0_sq;
                    rows.push(RepRow {
                        replicate: r,
                        method,
                        metric: Metric::RmseSigma0,
                        sq_error: e * e,
                    });
                }
            }
            Method::Snptm | Method::Snptf => {
                if want(Metric::RmiseVar) {
                    rows.push(RepRow {
                        replicate: r,
                        method,
                        metric: Metric::RmiseVar,
                        sq_error: ise_var(&base, &truth, grid),
                    });
                }
                if want(Metric::RmiseCov) {
                    let sigma_x = |t: F| base.variance.sigma_x(t);
                    let fit_cfg = FitConfig {
                        span_hint: base.delta_hat,
                        ..FitConfig::default()
                    };
                    let family = match method {
                        Method::Snptm => CorrFamily::Matern,
                        _ => {
                            let dn = select_dn(
                                &ds,
                                &base.mean,
                                &sigma_x,
                                &scenario.dn_candidates,
                                scenario.dn_method,
                                derive_seed(pipeline_seed, 3),
                                &fit_cfg,
                            )
                            .map_err(|e| e.in_stage("dimension-selection"))?;
                            CorrFamily::fourier(dn)
                        }
                    };
                    let pairs =
                        build_raw_pairs(&ds, &base.mean).map_err(|e| e.in_stage("raw-covariances"))?;
                    let fit = fit_theta(&pairs, &sigma_x, &family, &fit_cfg)
                        .map_err(|e| e.in_stage("correlation-fit"))?;
                    let model = family.model(&fit.theta_hat)?;
                    let cov_hat = |s: F, t: F| {
                        if s == t {
                            return base.variance.sigma_x_sq(t);
                        }
                        let (a, b) = if s <= t { (s, t) } else { (t, s) };
                        match model.eval(a, b) {
                            Some(rho) => sigma_x(s) * sigma_x(t) * rho,
                            None => F::zero(),
                        }
                    };
                    rows.push(RepRow {
                        replicate: r,
                        method,
                        metric: Metric::RmiseCov,
                        sq_error: ise_cov(cov_hat, &truth, grid),
                    });
                }
            }
        }
    }
    Ok(rows)
}

/// Runs all replicates of a scenario. Failed replicates are recorded and
/// excluded; the run aborts only when more than 20% fail.
pub fn run_benchmark<F>(scenario: &BenchScenario<F>) -> Result<BenchResult<F>>
where
    F: Real + SampleUniform,
    StandardNormal: Distribution<F>,
{
    if scenario.replicates < 1 {
        return Err(Error::InvalidSimConfig("replicates must be >= 1".into()));
    }
    let started = Instant::now();
    let grid = EvalGrid::uniform(F::zero(), F::one(), scenario.grid_len);

    let outcomes: Vec<Result<Vec<RepRow<F>>>> = (0..scenario.replicates)
        .into_par_iter()
        .map(|r| replicate_rows(scenario, r, &grid))
        .collect();

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(mut rep) => rows.append(&mut rep),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if failures.len() * 5 > scenario.replicates {
        return Err(Error::BenchAborted {
            failed: failures.len(),
            total: scenario.replicates,
        });
    }

    let mut summaries = Vec::new();
    for &method in &scenario.methods {
        for &metric in &scenario.metrics {
            let values: Vec<F> = rows
                .iter()
                .filter(|row| row.method == method && row.metric == metric)
                .map(|row| row.sq_error)
                .collect();
            if values.is_empty() {
                continue;
            }
            let n = values.len();
            let mean: F = values.iter().copied().sum::<F>() / F::usize(n);
            let value = mean.sqrt();
            let se = bootstrap_se(&values, scenario.seed);
            summaries.push(MetricSummary {
                method,
                metric,
                value,
                se,
                n_used: n,
            });
        }
    }

    Ok(BenchResult {
        rows,
        summaries,
        failures,
        replicates: scenario.replicates,
        wall_secs: started.elapsed().as_secs_f64(),
    })
}

const BOOTSTRAP_RESAMPLES: usize = 20;

/// Standard error of `sqrt(mean(values))` across bootstrap resamples of the
/// per-replicate squared errors.
fn bootstrap_se<F: Real>(values: &[F], seed: u64) -> Option<F> {
    let n = values.len();
    if n < 2 {
        return None;
    }
    let mut stats = Vec::with_capacity(BOOTSTRAP_RESAMPLES);
    for b in 0..BOOTSTRAP_RESAMPLES {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, 0xB007 + b as u64));
        let mut acc = F::zero();
        for _ in 0..n {
            acc += values[rng.random_range(0..n)];
        }
        stats.push((acc / F::usize(n)).sqrt());
    }
    let b = F::usize(BOOTSTRAP_RESAMPLES);
    let mean: F = stats.iter().copied().sum::<F>() / b;
    let var: F = stats
        .iter()
        .map(|&s| (s - mean) * (s - mean))
        .sum::<F>()
        / (b - F::one());
    Some(var.sqrt())
}

/// One point of the bandwidth-constant calibration.
#[derive(Debug, Clone)]
pub struct CalibrationPoint<F> {
    pub h_hat: F,
    pub n: usize,
    pub mean_m: F,
    pub delta_hat: F,
    pub varsigma_norm: F,
    /// `δ̂ ‖ς̂‖₂ (n m̄²)^{−1/5}`.
    pub x: F,
}

#[derive(Debug, Clone)]
pub struct Calibration<F> {
    pub c: F,
    pub points: Vec<CalibrationPoint<F>>,
}

/// Least-squares slope through the origin for `(h, x)` pairs: `Σhx / Σx²`.
pub fn regress_through_origin<F: Real>(pairs: &[(F, F)]) -> F {
    let num: F = pairs.iter().map(|&(h, x)| h * x).sum();
    let den: F = pairs.iter().map(|&(_, x)| x * x).sum();
    num / den
}

fn golden_section<F: Real>(f: impl Fn(F) -> F, mut lo: F, mut hi: F, iters: usize) -> F {
    let inv_phi = F::cast(0.618_033_988_749_894_8);
    let mut a = hi - (hi - lo) * inv_phi;
    let mut b = lo + (hi - lo) * inv_phi;
    let mut fa = f(a);
    let mut fb = f(b);
    for _ in 0..iters {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - (hi - lo) * inv_phi;
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + (hi - lo) * inv_phi;
            fb = f(b);
        }
    }
    (lo + hi) / F::cast(2.0)
}

/// Calibrates the constant of the empirical `h₀` rule over a collection of
/// simulation settings: per setting, finds the bandwidth minimizing the sum
/// of squared noise-variance errors across `g` independent datasets, then
/// regresses the optimal bandwidths on `δ̂ ‖ς̂‖₂ (n m̄²)^{−1/5}` through the
/// origin.
pub fn calibrate_h0_constant<F>(
    settings: &[SimConfig<F>],
    g: usize,
    seed: u64,
) -> Result<Calibration<F>>
where
    F: Real + SampleUniform,
    StandardNormal: Distribution<F>,
{
    if settings.is_empty() {
        return Err(Error::InvalidSimConfig("no calibration settings".into()));
    }
    if g < 2 {
        return Err(Error::InvalidSimConfig(
            "calibration needs at least 2 datasets per setting".into(),
        ));
    }

    let mut points = Vec::with_capacity(settings.len());
    for (k, setting) in settings.iter().enumerate() {
        let truth_sigma0 = crate::sim::noise_variance_of(setting);
        let batch: Vec<(SnippetDataset<F>, F, F, F, F)> = (0..g)
            .into_par_iter()
            .map(|r| -> Result<_> {
                let mut sim = setting.clone();
                sim.seed = derive_seed(seed, (k * g + r) as u64);
                let (ds, _) = sample_dataset(&sim)?;
                let stage_seed = derive_seed(sim.seed, 0xCA11);
                let grid = EvalGrid::default_for(&ds);
                let mean_cfg = SmoothConfig {
                    seed: derive_seed(stage_seed, 1),
                    ..SmoothConfig::default()
                };
                let mean = estimate_mean(&ds, &mean_cfg)?;
                let vs_cfg = SmoothConfig {
                    seed: derive_seed(stage_seed, 2),
                    ..SmoothConfig::default()
                };
                let varsigma = estimate_varsigma_sq(&ds, &mean, &vs_cfg)?;
                let norm = varsigma_l2_norm(&varsigma, &grid);
                let span = estimate_span(&ds);
                let min_gap = smallest_gap(&ds);
                let mean_m = ds_mean_m(&ds);
                Ok((ds, norm, span.delta_hat, mean_m, min_gap))
            })
            .collect::<Result<_>>()?;

        // Bracket where every dataset has at least one qualifying pair.
        let lo = batch
            .iter()
            .map(|b| b.4)
            .fold(F::zero(), F::max)
            * (F::one() + F::cast(1e-9))
            + F::min_positive_value();
        let hi = batch.iter().map(|b| b.2).fold(F::zero(), F::max);
        let objective = |h: F| -> F {
            batch
                .iter()
                .map(|(ds, _, _, _, _)| {
                    match noise_variance_at(ds, h, false, &NoiseOptions::default()) {
                        Ok(nv) => {
                            let e = nv.sigma0_sq - truth_sigma0;
                            e * e
                        }
                        Err(_) => F::infinity(),
                    }
                })
                .sum()
        };
        let h_hat = golden_section(objective, lo, hi, 80);

        let inv_g = F::one() / F::usize(g);
        let delta_hat: F = batch.iter().map(|b| b.2).sum::<F>() * inv_g;
        let varsigma_norm: F = batch.iter().map(|b| b.1).sum::<F>() * inv_g;
        let mean_m: F = batch.iter().map(|b| b.3).sum::<F>() * inv_g;
        let n = setting.n;
        let x = delta_hat
            * varsigma_norm
            * (F::usize(n) * mean_m * mean_m).powf(F::cast(-0.2));
        points.push(CalibrationPoint {
            h_hat,
            n,
            mean_m,
            delta_hat,
            varsigma_norm,
            x,
        });
    }

    let pairs: Vec<(F, F)> = points.iter().map(|p| (p.h_hat, p.x)).collect();
    Ok(Calibration {
        c: regress_through_origin(&pairs),
        points,
    })
}

fn ds_mean_m<F: Real>(ds: &SnippetDataset<F>) -> F {
    ds.mean_m()
}

fn smallest_gap<F: Real>(ds: &SnippetDataset<F>) -> F {
    let mut min = F::infinity();
    for s in ds.subjects() {
        for w in s.times.windows(2) {
            min = min.min(w[1] - w[0]);
        }
    }
    if min.is_finite() {
        min
    } else {
        F::zero()
    }
}
