//! Measurement-error variance estimation from near-diagonal observation
//! pairs.
//!
//! Over ordered within-subject pairs `j ≠ l` with `|T_ij − T_il| < h₀`, the
//! pair statistics are
//!
//! ```text
//! Â₀ = n⁻¹ Σ_i [m_i(m_i−1)]⁻¹ Σ_{j≠l} Y_ij²        1{|T_ij−T_il| < h₀}
//! Â₁ = n⁻¹ Σ_i [m_i(m_i−1)]⁻¹ Σ_{j≠l} Y_ij Y_il    1{|T_ij−T_il| < h₀}
//! B̂  = n⁻¹ Σ_i [m_i(m_i−1)]⁻¹ Σ_{j≠l}              1{|T_ij−T_il| < h₀}
//! ```
//!
//! and the noise variance estimate is `σ̂₀² = (Â₀ − Â₁)/B̂`, which is
//! nonnegative by the AM–GM inequality. Subjects with a single observation
//! are skipped and do not count toward `n` here. The bandwidth follows the
//! empirical rule `h₀ = 0.29 δ̂ ‖ς̂‖₂ (n m̄²)^{−1/5}` with a fallback that
//! widens `h₀` until a tenth of all ordered pairs qualify.

use crate::error::{Error, Result};
use crate::kernel::{default_ridge, SmoothConfig};
use crate::num::Real;
use crate::types::{EvalGrid, SnippetDataset};

/// Near-diagonal pair statistics.
#[derive(Debug, Clone, PartialEq)]
pub struct PairStats<F> {
    pub a0_hat: F,
    pub a1_hat: F,
    pub b_hat: F,
    pub h0: F,
    /// Ordered pairs with `|T_ij − T_il| < h0`.
    pub pair_count: usize,
}

/// Noise variance estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseVariance<F> {
    pub sigma0_sq: F,
    pub h0_used: F,
    pub fallback_triggered: bool,
    pub ridged: bool,
}

/// Options for [`estimate_noise_variance_with`].
#[derive(Debug, Clone, Default)]
pub struct NoiseOptions {
    /// Use the ridged form `(Â₀ − Â₁)/(B̂ + Δ)` with `Δ = (n m̄)⁻² h₀`.
    pub ridged: bool,
}

/// Computes the pair statistics at bandwidth `h0` over subjects with at
/// least two observations.
pub fn pair_stats<F: Real>(ds: &SnippetDataset<F>, h0: F) -> Result<PairStats<F>> {
    if !(h0 > F::zero()) {
        return Err(Error::NonpositiveBandwidth(h0.widen()));
    }
    let mut a0 = F::zero();
    let mut a1 = F::zero();
    let mut b = F::zero();
    let mut pair_count = 0usize;
    let mut eligible = 0usize;
    for subject in ds.subjects() {
        let m = subject.m();
        if m < 2 {
            continue;
        }
        eligible += 1;
        let inv = F::one() / (F::usize(m) * F::usize(m - 1));
        let mut sa0 = F::zero();
        let mut sa1 = F::zero();
        let mut sb = F::zero();
        for j in 0..m {
            for l in 0..m {
                if j == l {
                    continue;
                }
                if (subject.times[j] - subject.times[l]).abs() < h0 {
                    let yj = subject.values[j];
                    sa0 += yj * yj;
                    sa1 += yj * subject.values[l];
                    sb += F::one();
                    pair_count += 1;
                }
            }
        }
        a0 += inv * sa0;
        a1 += inv * sa1;
        b += inv * sb;
    }
    if eligible == 0 {
        return Err(Error::NoEligibleSubjects);
    }
    let n = F::usize(eligible);
    Ok(PairStats {
        a0_hat: a0 / n,
        a1_hat: a1 / n,
        b_hat: b / n,
        h0,
        pair_count,
    })
}

/// All within-subject gaps `|T_ij − T_il|` over unordered pairs, ascending.
fn sorted_pair_gaps<F: Real>(ds: &SnippetDataset<F>) -> Vec<F> {
    let mut gaps = Vec::new();
    for subject in ds.subjects() {
        let m = subject.m();
        for j in 0..m {
            for l in (j + 1)..m {
                gaps.push((subject.times[l] - subject.times[j]).abs());
            }
        }
    }
    gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
    gaps
}

/// Total ordered within-subject pair count `Σ_i m_i(m_i−1)`.
fn total_ordered_pairs<F: Real>(ds: &SnippetDataset<F>) -> usize {
    ds.subjects()
        .iter()
        .map(|s| s.m() * s.m().saturating_sub(1))
        .sum()
}

fn nudge_up<F: Real>(x: F) -> F {
    if x == F::zero() {
        F::min_positive_value()
    } else {
        x * (F::one() + F::cast(8.0) * F::epsilon())
    }
}

/// The empirical bandwidth rule `h₀ = 0.29 δ̂ ‖ς̂‖₂ (n m̄²)^{−1/5}` with the
/// sparse-data fallback: if fewer than `10⁻¹ Σ m_i(m_i−1)` ordered pairs fall
/// within `h₀`, the minimal bandwidth reaching that count is used instead.
///
/// Returns the bandwidth and whether the fallback fired.
pub fn empirical_h0<F: Real>(
    ds: &SnippetDataset<F>,
    varsigma_norm: F,
    delta_hat: F,
) -> Result<(F, bool)> {
    let total = total_ordered_pairs(ds);
    if total == 0 {
        return Err(Error::NoEligiblePairs);
    }
    let n = F::usize(ds.n_subjects());
    let mean_m = ds.mean_m();
    let rule = F::cast(0.29)
        * delta_hat
        * varsigma_norm
        * (n * mean_m * mean_m).powf(F::cast(-0.2));

    let threshold = F::cast(0.1) * F::usize(total);
    let gaps = sorted_pair_gaps(ds);
    // Ordered pairs within h: twice the unordered gaps strictly below h.
    let ordered_within = |h: F| -> F {
        let count = gaps.partition_point(|&g| g < h);
        F::usize(2 * count)
    };
    if rule > F::zero() && ordered_within(rule) >= threshold {
        return Ok((rule, false));
    }
    // Minimal h admitting the required count: the k-th smallest gap must
    // satisfy g_(k) < h, so step one ulp above it.
    let needed = (threshold.widen() / 2.0).ceil() as usize;
    let k = needed.clamp(1, gaps.len());
    Ok((nudge_up(gaps[k - 1]), true))
}

/// Estimates `σ₀²` with an explicit bandwidth.
pub fn noise_variance_at<F: Real>(
    ds: &SnippetDataset<F>,
    h0: F,
    fallback_triggered: bool,
    opts: &NoiseOptions,
) -> Result<NoiseVariance<F>> {
    let stats = pair_stats(ds, h0)?;
    if stats.pair_count == 0 {
        return Err(Error::NoEligiblePairs);
    }
    let num = stats.a0_hat - stats.a1_hat;
    let sigma0_sq = if opts.ridged {
        let nm = F::usize(ds.n_subjects()) * ds.mean_m();
        let delta = h0 / (nm * nm);
        num / (stats.b_hat + delta)
    } else {
        num / stats.b_hat
    };
    // AM–GM guarantees Â₁ ≤ Â₀; clamp pure rounding noise at zero.
    let sigma0_sq = sigma0_sq.max(F::zero());
    Ok(NoiseVariance {
        sigma0_sq,
        h0_used: h0,
        fallback_triggered,
        ridged: opts.ridged,
    })
}

/// Estimates the measurement-error variance `σ̂₀² = (Â₀ − Â₁)/B̂`.
///
/// When `h0` is `None` the empirical rule is used, which needs `‖ς̂‖₂`; that
/// requires fitting the mean and the pooled second-moment function first, so
/// this convenience path runs both with default settings. Pipelines that
/// already hold those fits should compute `h0` via [`empirical_h0`] and pass
/// it explicitly.
pub fn estimate_noise_variance<F: Real>(
    ds: &SnippetDataset<F>,
    h0: Option<F>,
) -> Result<NoiseVariance<F>> {
    estimate_noise_variance_with(ds, h0, &NoiseOptions::default())
}

pub fn estimate_noise_variance_with<F: Real>(
    ds: &SnippetDataset<F>,
    h0: Option<F>,
    opts: &NoiseOptions,
) -> Result<NoiseVariance<F>> {
    match h0 {
        Some(h) => noise_variance_at(ds, h, false, opts),
        None => {
            let mean = crate::kernel::estimate_mean(ds, &SmoothConfig::default())?;
            let varsigma =
                crate::variance::estimate_varsigma_sq(ds, &mean, &SmoothConfig::default())?;
            let grid = EvalGrid::default_for(ds);
            let norm = crate::variance::varsigma_l2_norm(&varsigma, &grid);
            let span = crate::types::estimate_span(ds);
            let (h, fell_back) = empirical_h0(ds, norm, span.delta_hat)?;
            noise_variance_at(ds, h, fell_back, opts)
        }
    }
}

/// Pointwise heteroscedastic noise variance `σ̂₀²(t)` on a grid; entries are
/// `None` where no pair has both observations within `h0` of `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HeteroNoise<F> {
    pub grid: EvalGrid<F>,
    pub values: Vec<Option<F>>,
    pub h0: F,
}

pub fn estimate_noise_variance_hetero<F: Real>(
    ds: &SnippetDataset<F>,
    h0: F,
    grid: &EvalGrid<F>,
) -> Result<HeteroNoise<F>> {
    if !(h0 > F::zero()) {
        return Err(Error::NonpositiveBandwidth(h0.widen()));
    }
    let mut values = Vec::with_capacity(grid.len());
    for &t in grid.points() {
        let mut a0 = F::zero();
        let mut a1 = F::zero();
        let mut b = F::zero();
        let mut eligible = 0usize;
        let mut any_pair = false;
        for subject in ds.subjects() {
            let m = subject.m();
            if m < 2 {
                continue;
            }
            eligible += 1;
            let inv = F::one() / (F::usize(m) * F::usize(m - 1));
            let mut sa0 = F::zero();
            let mut sa1 = F::zero();
            let mut sb = F::zero();
            for j in 0..m {
                if (subject.times[j] - t).abs() >= h0 {
                    continue;
                }
                for l in 0..m {
                    if j == l || (subject.times[l] - t).abs() >= h0 {
                        continue;
                    }
                    let yj = subject.values[j];
                    sa0 += yj * yj;
                    sa1 += yj * subject.values[l];
                    sb += F::one();
                    any_pair = true;
                }
            }
            a0 += inv * sa0;
            a1 += inv * sa1;
            b += inv * sb;
        }
        if eligible == 0 || !any_pair {
            values.push(None);
        } else {
            let n = F::usize(eligible);
            values.push(Some(((a0 - a1) / n / (b / n)).max(F::zero())));
        }
    }
    Ok(HeteroNoise {
        grid: grid.clone(),
        values,
        h0,
    })
}

/// Ridge constant for the ridged noise estimator, `Δ = (n m̄)⁻² h₀`.
pub fn noise_ridge<F: Real>(ds: &SnippetDataset<F>, h0: F) -> F {
    default_ridge(ds.n_subjects(), ds.mean_m()) * h0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Subject;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn two_point_dataset() -> SnippetDataset<f64> {
        SnippetDataset::new(
            0.0,
            1.0,
            vec![Subject::new("a", vec![0.1, 0.15], vec![1.0, 2.0])],
        )
        .unwrap()
    }

    #[test]
    fn hand_enumerated_two_point_example() {
        let ds = two_point_dataset();
        let stats = pair_stats(&ds, 0.1).unwrap();
        assert_eq!(stats.pair_count, 2);
        assert!((stats.b_hat - 1.0).abs() < 1e-15);
        assert!((stats.a0_hat - 2.5).abs() < 1e-15);
        assert!((stats.a1_hat - 2.0).abs() < 1e-15);
        let nv = estimate_noise_variance(&ds, Some(0.1)).unwrap();
        assert!((nv.sigma0_sq - 0.5).abs() < 1e-15);
    }

    #[test]
    fn no_pair_within_tiny_bandwidth() {
        let ds = two_point_dataset();
        let stats = pair_stats(&ds, 0.01).unwrap();
        assert_eq!(stats.pair_count, 0);
        assert_eq!(stats.b_hat, 0.0);
        assert!(matches!(
            estimate_noise_variance(&ds, Some(0.01)),
            Err(Error::NoEligiblePairs)
        ));
    }

    #[test]
    fn singleton_subjects_are_skipped() {
        let ds: SnippetDataset<f64> = SnippetDataset::new(
            0.0,
            1.0,
            vec![
                Subject::new("solo", vec![0.5], vec![100.0]),
                Subject::new("pair", vec![0.1, 0.15], vec![1.0, 2.0]),
            ],
        )
        .unwrap();
        // The singleton must not dilute the averaging denominator.
        let stats = pair_stats(&ds, 0.1).unwrap();
        assert!((stats.a0_hat - 2.5).abs() < 1e-15);

        let only_solo =
            SnippetDataset::new(0.0, 1.0, vec![Subject::new("solo", vec![0.5], vec![1.0])])
                .unwrap();
        assert!(matches!(
            pair_stats(&only_solo, 0.1),
            Err(Error::NoEligibleSubjects)
        ));
        assert!(matches!(
            empirical_h0(&only_solo, 1.0, 0.2),
            Err(Error::NoEligiblePairs)
        ));
    }

    #[test]
    fn am_gm_bound_on_randomized_datasets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..200 {
            let n = rng.random_range(1..6);
            let subjects = (0..n)
                .map(|i| {
                    let m = rng.random_range(2..5);
                    let mut times: Vec<f64> =
                        (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
                    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    let values = (0..m).map(|_| rng.random_range(-3.0..3.0)).collect();
                    Subject::new(format!("s{i}"), times, values)
                })
                .collect();
            let ds = SnippetDataset::new(0.0, 1.0, subjects).unwrap();
            let h0 = rng.random_range(0.01..0.8);
            let stats = pair_stats(&ds, h0).unwrap();
            assert!(
                stats.a1_hat <= stats.a0_hat + 1e-12,
                "AM-GM violated: {stats:?}"
            );
        }
    }

    #[test]
    fn pair_count_monotone_in_h0() {
        let ds = two_point_dataset();
        let mut last = 0usize;
        for &h in &[0.01, 0.049, 0.051, 0.2, 0.5] {
            let c = pair_stats(&ds, h).unwrap().pair_count;
            assert!(c >= last);
            last = c;
        }
    }

    #[test]
    fn scale_equivariance_at_fixed_h0() {
        let ds: SnippetDataset<f64> = SnippetDataset::new(
            0.0,
            1.0,
            vec![
                Subject::new("a", vec![0.1, 0.13, 0.4], vec![1.0, -0.5, 2.0]),
                Subject::new("b", vec![0.6, 0.62], vec![0.3, 0.4]),
            ],
        )
        .unwrap();
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
        let s1 = pair_stats(&ds, 0.1).unwrap();
        let s2 = pair_stats(&scaled, 0.1).unwrap();
        assert!((s2.a0_hat - c * c * s1.a0_hat).abs() < 1e-12);
        assert!((s2.a1_hat - c * c * s1.a1_hat).abs() < 1e-12);
        assert_eq!(s2.b_hat, s1.b_hat);
        let v1 = noise_variance_at(&ds, 0.1, false, &NoiseOptions::default()).unwrap();
        let v2 = noise_variance_at(&scaled, 0.1, false, &NoiseOptions::default()).unwrap();
        assert!((v2.sigma0_sq - c * c * v1.sigma0_sq).abs() < 1e-12);
    }

    #[test]
    fn empirical_rule_arithmetic() {
        // n = 200, m̄ = 4, δ̂ = 0.25, ‖ς̂‖₂ = 1.5 → 0.29·0.25·1.5·3200^(−1/5),
        // with enough near pairs that the fallback stays quiet.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let subjects = (0..200)
            .map(|i| {
                let center = rng.random_range(0.12..0.88);
                let times: Vec<f64> = (0..4)
                    .map(|k| center + 0.002 * k as f64)
                    .collect();
                let values = vec![0.0; 4];
                Subject::new(format!("s{i}"), times, values)
            })
            .collect::<Vec<_>>();
        // Force δ̂ = 0.25 exactly with one wide subject (dyadic endpoints).
        let mut subjects = subjects;
        subjects[0] = Subject::new("wide", vec![0.25, 0.252, 0.254, 0.5], vec![0.0; 4]);
        let ds = SnippetDataset::new(0.0, 1.0, subjects).unwrap();
        assert_eq!(crate::types::estimate_span(&ds).delta_hat, 0.25);

        let (h, fell_back) = empirical_h0(&ds, 1.5, 0.25).unwrap();
        let expect = 0.29 * 0.25 * 1.5 * 3200f64.powf(-0.2);
        assert!(!fell_back);
        assert!((h - expect).abs() < 1e-12);
        assert!((expect - 0.02165).abs() < 1e-4);

        // Linearity in the norm.
        let (h2, _) = empirical_h0(&ds, 3.0, 0.25).unwrap();
        assert!((h2 - 2.0 * h).abs() < 1e-12);
    }

    #[test]
    fn fallback_returns_gap_order_statistic() {
        // Two subjects with two observations each: 4 ordered pairs total,
        // threshold 0.4 → need the smallest gap admitted strictly.
        let ds = SnippetDataset::new(
            0.0,
            1.0,
            vec![
                Subject::new("a", vec![0.1, 0.3], vec![1.0, 2.0]),
                Subject::new("b", vec![0.5, 0.9], vec![0.0, 1.0]),
            ],
        )
        .unwrap();
        // A norm so small the rule yields essentially zero.
        let (h, fell_back) = empirical_h0(&ds, 1e-12, 0.4).unwrap();
        assert!(fell_back);
        assert!(h > 0.2 && h < 0.2000001);
        // The admitted bandwidth must actually capture the pair.
        assert_eq!(pair_stats(&ds, h).unwrap().pair_count, 2);
    }

    #[test]
    fn ridged_variant_shrinks_estimate() {
        let ds = two_point_dataset();
        let plain = noise_variance_at(&ds, 0.1, false, &NoiseOptions { ridged: false }).unwrap();
        let ridged = noise_variance_at(&ds, 0.1, false, &NoiseOptions { ridged: true }).unwrap();
        assert!(ridged.sigma0_sq < plain.sigma0_sq);
        assert!(ridged.ridged);
        let delta = noise_ridge(&ds, 0.1);
        let expect = (2.5 - 2.0) / (1.0 + delta);
        assert!((ridged.sigma0_sq - expect).abs() < 1e-14);
    }

    #[test]
    fn hetero_flags_uncovered_points_and_stays_nonnegative() {
        let ds = SnippetDataset::new(
            0.0,
            1.0,
            vec![
                Subject::new("a", vec![0.1, 0.12], vec![1.0, 1.5]),
                Subject::new("b", vec![0.11, 0.14], vec![2.0, 0.5]),
            ],
        )
        .unwrap();
        let grid = EvalGrid::from_points(vec![0.12, 0.9]).unwrap();
        let het = estimate_noise_variance_hetero(&ds, 0.05, &grid).unwrap();
        let v = het.values[0].unwrap();
        assert!(v >= 0.0);
        assert_eq!(het.values[1], None);
    }
}
