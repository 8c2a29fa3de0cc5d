//! Shared test oracles, independent of the library's implementation paths.

#![allow(dead_code)]

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use snipcov_core::types::{SnippetDataset, Subject};

/// Adaptive-Simpson quadrature of the integral representation
/// `K_ν(x) = ∫₀^∞ exp(−x cosh u) cosh(νu) du`.
pub fn bessel_k_quadrature(nu: f64, x: f64) -> f64 {
    let f = |u: f64| (-x * u.cosh()).exp() * (nu * u).cosh();
    // Beyond x·cosh(u) ≈ 750 the integrand has fully underflowed.
    let u_max = (750.0 / x).max(2.0).acosh() + 1.0;
    // Seed the absolute error budget from a coarse pass over the peak (at
    // sinh u* = ν/x) so negligible tails are not over-refined.
    let u_peak = (nu / x).asinh().min(u_max);
    let mut coarse: f64 = 0.0;
    let pts = 4096;
    for i in 0..pts {
        let u = u_max * (i as f64 + 0.5) / pts as f64;
        coarse += f(u) * u_max / pts as f64;
    }
    let scale = coarse.max(f(u_peak)).max(f64::MIN_POSITIVE);
    adaptive_simpson(&f, 0.0, u_max, 1e-11 * scale, 40)
}

fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, eps_abs: f64, depth: u32) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, eps_abs, depth)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    eps_abs: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * eps_abs {
        left + right + delta / 15.0
    } else {
        simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps_abs, depth - 1)
            + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps_abs, depth - 1)
    }
}

/// Half-integer Matérn closed forms at smoothness ν ∈ {1/2, 3/2, 5/2}.
pub fn matern_half_integer(nu: f64, theta2: f64, d: f64) -> f64 {
    let z = (2.0 * nu).sqrt() * d / theta2;
    if nu == 0.5 {
        (-z).exp()
    } else if nu == 1.5 {
        (1.0 + z) * (-z).exp()
    } else if nu == 2.5 {
        (1.0 + z + z * z / 3.0) * (-z).exp()
    } else {
        panic!("no closed form for nu = {nu}");
    }
}

/// Exhaustive enumeration of the near-diagonal pair statistics over ordered
/// within-subject pairs.
#[derive(Debug)]
pub struct BrutePairStats {
    pub a0: f64,
    pub a1: f64,
    pub b: f64,
    pub pair_count: usize,
}

pub fn brute_force_pair_stats(ds: &SnippetDataset<f64>, h0: f64) -> Option<BrutePairStats> {
    let mut a0 = 0.0;
    let mut a1 = 0.0;
    let mut b = 0.0;
    let mut pair_count = 0usize;
    let mut eligible = 0usize;
    for subject in ds.subjects() {
        let m = subject.m();
        if m < 2 {
            continue;
        }
        eligible += 1;
        let inv = 1.0 / (m * (m - 1)) as f64;
        let mut sa0 = 0.0;
        let mut sa1 = 0.0;
        let mut sb = 0.0;
        for j in 0..m {
            for l in 0..m {
                if j == l {
                    continue;
                }
                if (subject.times[j] - subject.times[l]).abs() < h0 {
                    sa0 += subject.values[j] * subject.values[j];
                    sa1 += subject.values[j] * subject.values[l];
                    sb += 1.0;
                    pair_count += 1;
                }
            }
        }
        a0 += inv * sa0;
        a1 += inv * sa1;
        b += inv * sb;
    }
    if eligible == 0 {
        return None;
    }
    let n = eligible as f64;
    Some(BrutePairStats {
        a0: a0 / n,
        a1: a1 / n,
        b: b / n,
        pair_count,
    })
}

/// Random snippet dataset on [0, 1] with values from a caller-supplied map.
pub fn random_dataset(
    seed: u64,
    n_subjects: usize,
    m_range: std::ops::Range<usize>,
    mut value: impl FnMut(&mut ChaCha8Rng, f64) -> f64,
) -> SnippetDataset<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let subjects = (0..n_subjects)
        .map(|i| {
            let m = rng.random_range(m_range.clone());
            let mut times: Vec<f64> = (0..m).map(|_| rng.random_range(0.0..1.0)).collect();
            times.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let values: Vec<f64> = times.iter().map(|&t| value(&mut rng, t)).collect();
            Subject::new(format!("s{i}"), times, values)
        })
        .collect();
    SnippetDataset::new(0.0, 1.0, subjects).unwrap()
}

/// Analytic gradient of the least-squares criterion for the power
/// exponential and rational quadratic families (test-side oracle for the
/// finite-difference check).
pub fn analytic_gradient(
    theta: &[f64],
    pairs: &snipcov_core::RawCovPairs<f64>,
    sigma_x: &dyn Fn(f64) -> f64,
    family: &snipcov_core::CorrFamily<f64>,
) -> [f64; 2] {
    use snipcov_core::CorrFamily;
    let mut grad = [0.0f64; 2];
    for sp in &pairs.subjects {
        for p in &sp.pairs {
            let d = (p.s - p.t).abs();
            let a = sigma_x(p.s) * sigma_x(p.t);
            let (rho, drho) = match family {
                CorrFamily::PowerExp => {
                    let q = (d / theta[1]).powf(theta[0]);
                    let rho = (-q).exp();
                    if d == 0.0 {
                        (1.0, [0.0, 0.0])
                    } else {
                        (
                            rho,
                            [
                                -rho * q * (d / theta[1]).ln(),
                                rho * q * theta[0] / theta[1],
                            ],
                        )
                    }
                }
                CorrFamily::RationalQuad => {
                    let u = d * d / (theta[1] * theta[1]);
                    let rho = (1.0 + u).powf(-theta[0]);
                    (
                        rho,
                        [
                            -rho * (1.0 + u).ln(),
                            rho * theta[0] * 2.0 * u / (theta[1] * (1.0 + u)),
                        ],
                    )
                }
                other => panic!("no analytic gradient for {other:?}"),
            };
            let resid = a * rho - p.c;
            grad[0] += sp.weight * 2.0 * resid * a * drho[0];
            grad[1] += sp.weight * 2.0 * resid * a * drho[1];
        }
    }
    grad
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
