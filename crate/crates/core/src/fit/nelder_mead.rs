//! Nelder–Mead simplex minimization in an unconstrained space.
//!
//! Standard reflection/expansion/contraction/shrink coefficients
//! (1, 2, ½, ½). Non-finite objective values are ordered worst, so the
//! simplex backs away from regions where the model overflows. The best
//! vertex value is nonincreasing across iterations.

use crate::num::Real;

#[derive(Debug, Clone)]
pub struct NelderMeadOptions<F> {
    pub max_iters: usize,
    /// Convergence threshold on the objective spread across the simplex.
    pub f_tol: F,
    /// Convergence threshold on the simplex diameter.
    pub x_tol: F,
}

impl<F: Real> NelderMeadOptions<F> {
    /// Defaults scaled to the problem dimension: tolerance 1e-8, at most
    /// `500·dim` iterations.
    pub fn for_dim(dim: usize) -> Self {
        NelderMeadOptions {
            max_iters: 500 * dim.max(1),
            f_tol: F::cast(1e-8),
            x_tol: F::cast(1e-8),
        }
    }
}

#[derive(Debug, Clone)]
pub struct NelderMeadResult<F> {
    pub x: Vec<F>,
    pub fx: F,
    pub iterations: usize,
    pub converged: bool,
}

/// Orders values with non-finite entries last.
fn worse<F: Real>(a: F, b: F) -> bool {
    match (a.is_finite(), b.is_finite()) {
        (true, true) => a > b,
        (false, true) => true,
        _ => false,
    }
}

/// Minimizes `f` starting from `x0`, displacing each coordinate by `steps`
/// to form the initial simplex.
pub fn nelder_mead<F: Real>(
    f: impl Fn(&[F]) -> F,
    x0: &[F],
    steps: &[F],
    opts: &NelderMeadOptions<F>,
) -> NelderMeadResult<F> {
    let n = x0.len();
    if n == 0 {
        let fx = f(x0);
        return NelderMeadResult {
            x: Vec::new(),
            fx,
            iterations: 0,
            converged: true,
        };
    }
    debug_assert_eq!(steps.len(), n);

    let mut simplex: Vec<Vec<F>> = Vec::with_capacity(n + 1);
    simplex.push(x0.to_vec());
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += steps[i];
        simplex.push(v);
    }
    let mut values: Vec<F> = simplex.iter().map(|v| f(v)).collect();

    let alpha = F::one();
    let gamma = F::cast(2.0);
    let rho = F::cast(0.5);
    let sigma = F::cast(0.5);

    let mut iterations = 0usize;
    let mut converged = false;
    while iterations < opts.max_iters {
        iterations += 1;

        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| {
            if worse(values[a], values[b]) {
                std::cmp::Ordering::Greater
            } else if worse(values[b], values[a]) {
                std::cmp::Ordering::Less
            } else {
                std::cmp::Ordering::Equal
            }
        });
        simplex = order.iter().map(|&k| simplex[k].clone()).collect();
        values = order.iter().map(|&k| values[k]).collect();

        let spread = if values[n].is_finite() {
            (values[n] - values[0]).abs()
        } else {
            F::infinity()
        };
        let mut diameter = F::zero();
        for v in simplex.iter().skip(1) {
            let d: F = v
                .iter()
                .zip(&simplex[0])
                .map(|(&a, &b)| (a - b) * (a - b))
                .sum::<F>()
                .sqrt();
            diameter = diameter.max(d);
        }
        if spread < opts.f_tol && diameter < opts.x_tol {
            converged = true;
            break;
        }

        // Centroid of all but the worst vertex.
        let mut centroid = vec![F::zero(); n];
        for v in simplex.iter().take(n) {
            for (c, &vi) in centroid.iter_mut().zip(v) {
                *c += vi;
            }
        }
        for c in centroid.iter_mut() {
            *c /= F::usize(n);
        }

        let mix = |a: &[F], b: &[F], w: F| -> Vec<F> {
            a.iter().zip(b).map(|(&ai, &bi)| ai + w * (bi - ai)).collect()
        };

        // Reflection: x_r = centroid + α(centroid − worst).
        let reflected = mix(&centroid, &simplex[n], -alpha);
        let f_reflected = f(&reflected);
        if !worse(f_reflected, values[0]) {
            // Expansion.
            let expanded = mix(&centroid, &reflected, gamma);
            let f_expanded = f(&expanded);
            if worse(f_reflected, f_expanded) {
                simplex[n] = expanded;
                values[n] = f_expanded;
            } else {
                simplex[n] = reflected;
                values[n] = f_reflected;
            }
        } else if !worse(f_reflected, values[n - 1]) {
            simplex[n] = reflected;
            values[n] = f_reflected;
        } else {
            // Contraction toward the better of worst/reflected.
            let (base, f_base) = if worse(values[n], f_reflected) {
                (&reflected, f_reflected)
            } else {
                (&simplex[n], values[n])
            };
            let contracted = mix(&centroid, base, rho);
            let f_contracted = f(&contracted);
            if !worse(f_contracted, f_base) {
                simplex[n] = contracted;
                values[n] = f_contracted;
            } else {
                // Shrink toward the best vertex.
                for k in 1..=n {
                    simplex[k] = mix(&simplex[0], &simplex[k], sigma);
                    values[k] = f(&simplex[k]);
                }
            }
        }
    }

    let mut best = 0usize;
    for k in 1..=n {
        if worse(values[best], values[k]) {
            best = k;
        }
    }
    NelderMeadResult {
        x: simplex[best].clone(),
        fx: values[best],
        iterations,
        converged,
    }
}
