//! Variance function estimation.
//!
//! `ς²(t) = E{Y(t) − μ(t)}² = σ_X²(t) + σ₀²` is estimated by ridged
//! local-linear smoothing of the squared mean-residuals; subtracting the
//! noise variance and flooring at a tiny positive value gives `σ̂_X²(t)`.

use crate::error::Result;
use crate::kernel::{smooth_responses, SmoothConfig, SmoothEstimate};
use crate::noise::NoiseVariance;
use crate::num::Real;
use crate::types::{trapezoid, EvalGrid, SnippetDataset};

/// Assembled variance-function estimate.
#[derive(Debug, Clone)]
pub struct VarianceEstimate<F> {
    pub varsigma_sq: SmoothEstimate<F>,
    pub sigma0_sq: F,
    /// Positivity floor applied to `ς̂²(t) − σ̂₀²`.
    pub floor: F,
    /// `‖ς̂‖₂ = (∫ max(ς̂², 0))^{1/2}` on the assembly grid.
    pub l2_norm_varsigma: F,
}

impl<F: Real> VarianceEstimate<F> {
    /// `σ̂_X²(t) = max(ς̂²(t) − σ̂₀², floor)`.
    pub fn sigma_x_sq(&self, t: F) -> F {
        (self.varsigma_sq.eval(t) - self.sigma0_sq).max(self.floor)
    }

    /// `σ̂_X(t)`; always real thanks to the floor.
    pub fn sigma_x(&self, t: F) -> F {
        self.sigma_x_sq(t).sqrt()
    }
}

/// Smooths the squared residuals `{Y_ij − μ̂(T_ij)}²` with its own
/// cross-validated bandwidth.
pub fn estimate_varsigma_sq<F: Real>(
    ds: &SnippetDataset<F>,
    mu_hat: &SmoothEstimate<F>,
    config: &SmoothConfig<F>,
) -> Result<SmoothEstimate<F>> {
    let responses: Vec<F> = ds
        .observations()
        .map(|(t, y)| {
            let r = y - mu_hat.eval(t);
            r * r
        })
        .collect();
    smooth_responses(ds, &responses, config)
}

/// `‖ς̂‖₂`: square root of the trapezoid integral of the positive part of
/// `ς̂²` over the grid.
pub fn varsigma_l2_norm<F: Real>(varsigma_sq: &SmoothEstimate<F>, grid: &EvalGrid<F>) -> F {
    let ys: Vec<F> = grid
        .points()
        .iter()
        .map(|&t| varsigma_sq.eval(t).max(F::zero()))
        .collect();
    trapezoid(grid.points(), &ys).sqrt()
}

/// Positivity floor: `10⁻⁶ · max_grid ς̂²(t)`, or zero when the maximum is
/// nonpositive.
pub fn positivity_floor<F: Real>(varsigma_sq: &SmoothEstimate<F>, grid: &EvalGrid<F>) -> F {
    let max = grid
        .points()
        .iter()
        .map(|&t| varsigma_sq.eval(t))
        .fold(F::neg_infinity(), F::max);
    if max > F::zero() {
        F::cast(1e-6) * max
    } else {
        F::zero()
    }
}

/// Combines `ς̂²` and `σ̂₀²` into the variance-function estimate.
pub fn assemble_variance<F: Real>(
    varsigma_sq: SmoothEstimate<F>,
    noise: &NoiseVariance<F>,
    grid: &EvalGrid<F>,
) -> VarianceEstimate<F> {
    let floor = positivity_floor(&varsigma_sq, grid);
    let l2_norm_varsigma = varsigma_l2_norm(&varsigma_sq, grid);
    VarianceEstimate {
        varsigma_sq,
        sigma0_sq: noise.sigma0_sq,
        floor,
        l2_norm_varsigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{local_linear_fit, BandwidthSelect, KernelFamily, WeightScheme};
    use crate::types::Subject;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_dataset(seed: u64, n: usize, value: impl Fn(f64) -> f64) -> SnippetDataset<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let subjects = (0..n)
            .map(|i| {
                let m = rng.random_range(2..5);
                let mut times: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
                times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                let values = times.iter().map(|&t| value(t)).collect();
                Subject::new(format!("s{i}"), times, values)
            })
            .collect();
        SnippetDataset::new(0.0, 1.0, subjects).unwrap()
    }

    fn constant_smooth(ds: &SnippetDataset<f64>, c: f64, h: f64) -> SmoothEstimate<f64> {
        let resp = vec![c; ds.total_obs()];
        local_linear_fit(ds, &resp, h, KernelFamily::Epanechnikov, WeightScheme::Obs, 1e-8)
            .unwrap()
    }

    #[test]
    fn constant_residual_responses_reproduce_constant() {
        let ds = random_dataset(1, 40, |t| t);
        let mu = local_linear_fit(
            &ds,
            &ds.observations().map(|(_, y)| y).collect::<Vec<_>>(),
            0.3,
            KernelFamily::Epanechnikov,
            WeightScheme::Obs,
            1e-8,
        )
        .unwrap();
        // Shift every value by 2 relative to the fitted mean: squared
        // residuals are the constant 4.
        let shifted = SnippetDataset::new(
            0.0,
            1.0,
            ds.subjects()
                .iter()
                .map(|s| {
                    Subject::new(
                        s.id.clone(),
                        s.times.clone(),
                        s.times.iter().map(|&t| mu.eval(t) + 2.0).collect(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let cfg = SmoothConfig {
            bandwidth: BandwidthSelect::Fixed(0.3),
            ..SmoothConfig::default()
        };
        let vs = estimate_varsigma_sq(&shifted, &mu, &cfg).unwrap();
        for &t in &[0.25, 0.5, 0.75] {
            assert!((vs.eval(t) - 4.0).abs() < 1e-9);
        }
    }

    #[test]
    fn scaling_responses_scales_varsigma_quadratically() {
        // At fixed bandwidths, scaling Y by c scales ς̂² by c² (the mean
        // residuals scale by c when μ̂ is refit at the same h).
        let ds = random_dataset(7, 30, |t| (5.0 * t).sin() + 0.5);
        let c = 3.0;
        let scaled = SnippetDataset::new(
            0.0,
            1.0,
            ds.subjects()
                .iter()
                .map(|s| {
                    Subject::new(
                        s.id.clone(),
                        s.times.clone(),
                        s.values.iter().map(|&y| c * y).collect(),
                    )
                })
                .collect(),
        )
        .unwrap();
        let fixed = |h: f64| SmoothConfig {
            bandwidth: BandwidthSelect::Fixed(h),
            ..SmoothConfig::default()
        };
        let mu1 = crate::kernel::estimate_mean(&ds, &fixed(0.2)).unwrap();
        let mu2 = crate::kernel::estimate_mean(&scaled, &fixed(0.2)).unwrap();
        let vs1 = estimate_varsigma_sq(&ds, &mu1, &fixed(0.25)).unwrap();
        let vs2 = estimate_varsigma_sq(&scaled, &mu2, &fixed(0.25)).unwrap();
        for &t in &[0.2, 0.5, 0.8] {
            assert!(
                (vs2.eval(t) - c * c * vs1.eval(t)).abs() < 1e-9 * vs1.eval(t).abs().max(1.0)
            );
        }
    }

    #[test]
    fn assemble_subtracts_and_floors() {
        let ds = random_dataset(2, 10, |_| 0.0);
        let grid = EvalGrid::uniform(0.0, 1.0, 51);

        let vs = constant_smooth(&ds, 1.0, 0.5);
        let noise = NoiseVariance {
            sigma0_sq: 0.25,
            h0_used: 0.1,
            fallback_triggered: false,
            ridged: false,
        };
        let v = assemble_variance(vs, &noise, &grid);
        assert!((v.sigma_x_sq(0.5) - 0.75).abs() < 1e-9);

        // Clamp branch: ς̂² = 0.1 < σ̂₀² = 0.25 → floor.
        let vs_small = constant_smooth(&ds, 0.1, 0.5);
        let v2 = assemble_variance(vs_small, &noise, &grid);
        let floor = v2.floor;
        assert!(floor > 0.0 && floor < 1e-6);
        assert_eq!(v2.sigma_x_sq(0.5), floor);
        assert!(v2.sigma_x(0.5) >= 0.0);
    }

    #[test]
    fn l2_norm_of_constant_four_is_two() {
        let ds = random_dataset(3, 10, |_| 0.0);
        let grid = EvalGrid::uniform(0.0, 1.0, 51);
        let vs = constant_smooth(&ds, 4.0, 0.5);
        let norm = varsigma_l2_norm(&vs, &grid);
        assert!((norm - 2.0).abs() < 1e-9);
    }

    #[test]
    fn norm_monotone_under_pointwise_increase() {
        let ds = random_dataset(4, 10, |_| 0.0);
        let grid = EvalGrid::uniform(0.0, 1.0, 51);
        let lo = constant_smooth(&ds, 1.0, 0.5);
        let hi = constant_smooth(&ds, 1.5, 0.5);
        assert!(varsigma_l2_norm(&hi, &grid) > varsigma_l2_norm(&lo, &grid));
    }

    #[test]
    fn sigma_x_never_below_floor() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let ds = random_dataset(6, 25, |t| (7.0 * t).sin());
        let resp: Vec<f64> = ds
            .observations()
            .map(|(_, _)| rng.random_range(-0.2..0.3))
            .collect();
        let vs = local_linear_fit(
            &ds,
            &resp,
            0.15,
            KernelFamily::Epanechnikov,
            WeightScheme::Obs,
            1e-8,
        )
        .unwrap();
        let grid = EvalGrid::uniform(0.0, 1.0, 51);
        let noise = NoiseVariance {
            sigma0_sq: 0.1,
            h0_used: 0.05,
            fallback_triggered: false,
            ridged: false,
        };
        let v = assemble_variance(vs, &noise, &grid);
        for &t in grid.points() {
            assert!(v.sigma_x_sq(t) >= v.floor);
            assert!(v.sigma_x(t).is_finite());
        }
    }
}
