//! Parametric correlation families.
//!
//! Families:
//!
//! * power exponential   `ρ(s,t) = exp(−|s−t|^θ₁ / θ₂^θ₁)`, `0 < θ₁ ≤ 2, θ₂ > 0`
//! * rational quadratic  `ρ(s,t) = (1 + |s−t|²/θ₂²)^{−θ₁}`, `θ₁, θ₂ > 0`
//! * Matérn              `ρ(s,t) = z^θ₁ B_{θ₁}(z) / (Γ(θ₁) 2^{θ₁−1})` with
//!   `z = √(2θ₁)|s−t|/θ₂` and `B` the modified Bessel function of the second
//!   kind
//! * convex combinations of correlation functions
//! * a sine-basis family `κ_θ(s,t) = Σ θ_j φ_j(s)φ_j(t) / (ψ(s)ψ(t))` with
//!   `φ_j(t) = √2 sin(2jπt)`, simplex-constrained weights and
//!   `ψ(t) = (Σ θ_j φ_j²(t))^{1/2}`.
//!
//! The sine-basis family is undefined where every `φ_j` vanishes (the
//! half-integer points of the unit interval); evaluation returns `None`
//! there and fitting excludes such pairs.

pub mod special;

use crate::error::{Error, Result};
use crate::num::Real;

pub use special::{bessel_k, gamma};

/// A correlation model: family plus parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrelationModel<F> {
    PowerExp { theta: [F; 2] },
    RationalQuad { theta: [F; 2] },
    Matern { theta: [F; 2] },
    ConvexMix {
        components: Vec<CorrelationModel<F>>,
        weights: Vec<F>,
    },
    /// Sine-basis family on the given domain (defaults to the unit interval);
    /// `theta` lives on the simplex and `dim = theta.len()`.
    FourierBasis {
        theta: Vec<F>,
        domain: (F, F),
    },
}

/// Near-diagonal cutoff for the Matérn family: below this scaled distance the
/// exact limit value 1 is returned, avoiding the 0·∞ form.
const MATERN_DIAG_CUTOFF: f64 = 1e-10;

/// Tolerance for detecting the universal zeros of the sine basis
/// (half-integer points of the rescaled domain).
const FOURIER_NODE_TOL: f64 = 1e-9;

impl<F: Real> CorrelationModel<F> {
    pub fn fourier(theta: Vec<F>) -> Self {
        CorrelationModel::FourierBasis {
            theta,
            domain: (F::zero(), F::one()),
        }
    }

    /// Stable family tag for run summaries.
    pub fn family_name(&self) -> &'static str {
        match self {
            CorrelationModel::PowerExp { .. } => "powerexp",
            CorrelationModel::RationalQuad { .. } => "rationalquad",
            CorrelationModel::Matern { .. } => "matern",
            CorrelationModel::ConvexMix { .. } => "mix",
            CorrelationModel::FourierBasis { .. } => "fourier",
        }
    }

    /// Parameter vector (simplex weights for mixes and the sine basis).
    pub fn theta(&self) -> Vec<F> {
        match self {
            CorrelationModel::PowerExp { theta }
            | CorrelationModel::RationalQuad { theta }
            | CorrelationModel::Matern { theta } => theta.to_vec(),
            CorrelationModel::ConvexMix { weights, .. } => weights.clone(),
            CorrelationModel::FourierBasis { theta, .. } => theta.clone(),
        }
    }

    /// Number of free parameters under the family's natural parametrization.
    pub fn dim(&self) -> usize {
        match self {
            CorrelationModel::PowerExp { .. }
            | CorrelationModel::RationalQuad { .. }
            | CorrelationModel::Matern { .. } => 2,
            CorrelationModel::ConvexMix { weights, .. } => weights.len(),
            CorrelationModel::FourierBasis { theta, .. } => theta.len(),
        }
    }

    /// Checks the family's parameter constraints.
    pub fn validate(&self) -> Result<()> {
        let simplex = |w: &[F], what: &str| -> Result<()> {
            if w.is_empty() {
                return Err(Error::InvalidParameters(format!("{what}: empty weights")));
            }
            if w.iter().any(|&v| v < F::zero() || !v.is_finite()) {
                return Err(Error::InvalidParameters(format!(
                    "{what}: weights must be nonnegative"
                )));
            }
            let sum: F = w.iter().copied().sum();
            if (sum - F::one()).abs() > F::cast(1e-8) {
                return Err(Error::InvalidParameters(format!(
                    "{what}: weights must sum to 1, got {}",
                    sum.widen()
                )));
            }
            Ok(())
        };
        match self {
            CorrelationModel::PowerExp { theta } => {
                if !(theta[0] > F::zero() && theta[0] <= F::cast(2.0)) || !(theta[1] > F::zero()) {
                    return Err(Error::InvalidParameters(format!(
                        "power exponential requires 0 < θ1 ≤ 2 and θ2 > 0, got ({}, {})",
                        theta[0].widen(),
                        theta[1].widen()
                    )));
                }
                Ok(())
            }
            CorrelationModel::RationalQuad { theta } | CorrelationModel::Matern { theta } => {
                if !(theta[0] > F::zero()) || !(theta[1] > F::zero()) {
                    return Err(Error::InvalidParameters(format!(
                        "parameters must be positive, got ({}, {})",
                        theta[0].widen(),
                        theta[1].widen()
                    )));
                }
                Ok(())
            }
            CorrelationModel::ConvexMix {
                components,
                weights,
            } => {
                if components.len() != weights.len() {
                    return Err(Error::InvalidParameters(
                        "mix: component and weight counts differ".into(),
                    ));
                }
                simplex(weights, "mix")?;
                components.iter().try_for_each(|c| c.validate())
            }
            CorrelationModel::FourierBasis { theta, domain } => {
                if !(domain.0 < domain.1) {
                    return Err(Error::InvalidParameters("basis: invalid domain".into()));
                }
                simplex(theta, "basis")
            }
        }
    }

    /// Evaluates `ρ_θ(s, t)`; `None` marks the undefined points of the
    /// sine-basis family.
    pub fn eval(&self, s: F, t: F) -> Option<F> {
        match self {
            CorrelationModel::PowerExp { theta } => {
                if s == t {
                    return Some(F::one());
                }
                let d = (s - t).abs();
                Some((-(d / theta[1]).powf(theta[0])).exp())
            }
            CorrelationModel::RationalQuad { theta } => {
                if s == t {
                    return Some(F::one());
                }
                let d = (s - t).abs();
                let q = d / theta[1];
                Some((F::one() + q * q).powf(-theta[0]))
            }
            CorrelationModel::Matern { theta } => Some(matern(theta[0], theta[1], (s - t).abs())),
            CorrelationModel::ConvexMix {
                components,
                weights,
            } => {
                let mut acc = F::zero();
                for (c, &w) in components.iter().zip(weights) {
                    acc += w * c.eval(s, t)?;
                }
                Some(acc)
            }
            CorrelationModel::FourierBasis { theta, domain } => {
                let u = (s - domain.0) / (domain.1 - domain.0);
                let v = (t - domain.0) / (domain.1 - domain.0);
                if fourier_degenerate_unit(u) || fourier_degenerate_unit(v) {
                    return None;
                }
                if s == t {
                    return Some(F::one());
                }
                let mut num = F::zero();
                let mut ps = F::zero();
                let mut pt = F::zero();
                let two_pi = F::cast(2.0 * std::f64::consts::PI);
                for (j, &w) in theta.iter().enumerate() {
                    let freq = two_pi * F::usize(j + 1);
                    // The √2 normalization cancels in the ratio; grouping
                    // the product keeps evaluation exactly symmetric.
                    let fs = (freq * u).sin();
                    let ft = (freq * v).sin();
                    num += w * (fs * ft);
                    ps += w * (fs * fs);
                    pt += w * (ft * ft);
                }
                Some(num / (ps.sqrt() * pt.sqrt()))
            }
        }
    }
}

/// Matérn correlation at distance `d ≥ 0` with smoothness `θ1` and range `θ2`.
fn matern<F: Real>(theta1: F, theta2: F, d: F) -> F {
    let z = (F::cast(2.0) * theta1).sqrt() * d / theta2;
    if z < F::cast(MATERN_DIAG_CUTOFF) {
        return F::one();
    }
    let k = match bessel_k(theta1, z) {
        Ok(k) => k,
        Err(_) => return F::nan(),
    };
    let rho = z.powf(theta1) * k / (gamma(theta1) * F::cast(2.0).powf(theta1 - F::one()));
    // Rounding can push the value a few ulps above the exact limit of 1.
    rho.min(F::one())
}

/// True where every sine basis function vanishes on the rescaled domain
/// (half-integer points), independent of θ.
fn fourier_degenerate_unit<F: Real>(u: F) -> bool {
    let v = (u + u).widen();
    (v - v.round()).abs() <= FOURIER_NODE_TOL
}

/// Returns whether the sine-basis family is undefined at raw abscissa `t`.
pub fn fourier_degenerate<F: Real>(t: F, domain: (F, F)) -> bool {
    fourier_degenerate_unit((t - domain.0) / (domain.1 - domain.0))
}

/// Family descriptor used by the fitting routines; carries everything fixed
/// during optimization (for the sine basis: its dimension and domain, for a
/// mix: the fixed components).
#[derive(Debug, Clone, PartialEq)]
pub enum CorrFamily<F> {
    PowerExp,
    RationalQuad,
    Matern,
    FourierBasis { dim: usize, domain: (F, F) },
    /// Convex mix of fixed components; the simplex weights are fitted.
    ConvexMix(Vec<CorrelationModel<F>>),
}

impl<F: Real> CorrFamily<F> {
    pub fn fourier(dim: usize) -> Self {
        CorrFamily::FourierBasis {
            dim,
            domain: (F::zero(), F::one()),
        }
    }

    /// Length of the full parameter vector θ.
    pub fn theta_len(&self) -> usize {
        match self {
            CorrFamily::PowerExp | CorrFamily::RationalQuad | CorrFamily::Matern => 2,
            CorrFamily::FourierBasis { dim, .. } => *dim,
            CorrFamily::ConvexMix(components) => components.len(),
        }
    }

    /// Builds the concrete model for a parameter vector.
    pub fn model(&self, theta: &[F]) -> Result<CorrelationModel<F>> {
        let expect = self.theta_len();
        if theta.len() != expect {
            return Err(Error::InvalidParameters(format!(
                "expected {expect} parameters, got {}",
                theta.len()
            )));
        }
        let model = match self {
            CorrFamily::PowerExp => CorrelationModel::PowerExp {
                theta: [theta[0], theta[1]],
            },
            CorrFamily::RationalQuad => CorrelationModel::RationalQuad {
                theta: [theta[0], theta[1]],
            },
            CorrFamily::Matern => CorrelationModel::Matern {
                theta: [theta[0], theta[1]],
            },
            CorrFamily::FourierBasis { domain, .. } => CorrelationModel::FourierBasis {
                theta: theta.to_vec(),
                domain: *domain,
            },
            CorrFamily::ConvexMix(components) => CorrelationModel::ConvexMix {
                components: components.clone(),
                weights: theta.to_vec(),
            },
        };
        model.validate()?;
        Ok(model)
    }

    /// The parameter constraint set.
    pub fn param_domain(&self) -> ParamDomain<F> {
        match self {
            CorrFamily::PowerExp => ParamDomain::Box(vec![
                CoordDomain::OpenClosed(F::zero(), F::cast(2.0)),
                CoordDomain::Positive,
            ]),
            CorrFamily::RationalQuad | CorrFamily::Matern => {
                ParamDomain::Box(vec![CoordDomain::Positive, CoordDomain::Positive])
            }
            CorrFamily::FourierBasis { dim, .. } => ParamDomain::Simplex { dim: *dim },
            CorrFamily::ConvexMix(components) => ParamDomain::Simplex {
                dim: components.len(),
            },
        }
    }
}

/// Machine-checkable constraint set for a parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub enum ParamDomain<F> {
    /// Independent per-coordinate constraints.
    Box(Vec<CoordDomain<F>>),
    /// `θ_j ≥ 0, Σ θ_j = 1`; `dim − 1` free parameters.
    Simplex { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoordDomain<F> {
    /// `(0, ∞)`
    Positive,
    /// `(lo, hi]`
    OpenClosed(F, F),
}

impl<F: Real> ParamDomain<F> {
    /// Number of free parameters after accounting for the simplex constraint.
    pub fn free_dim(&self) -> usize {
        match self {
            ParamDomain::Box(coords) => coords.len(),
            ParamDomain::Simplex { dim } => dim.saturating_sub(1),
        }
    }

    pub fn contains(&self, theta: &[F]) -> bool {
        match self {
            ParamDomain::Box(coords) => {
                theta.len() == coords.len()
                    && theta.iter().zip(coords).all(|(&v, c)| match *c {
                        CoordDomain::Positive => v > F::zero() && v.is_finite(),
                        CoordDomain::OpenClosed(lo, hi) => v > lo && v <= hi,
                    })
            }
            ParamDomain::Simplex { dim } => {
                theta.len() == *dim
                    && theta.iter().all(|&v| v >= F::zero() && v.is_finite())
                    && (theta.iter().copied().sum::<F>() - F::one()).abs() <= F::cast(1e-8)
            }
        }
    }
}

/// Convenience: the parameter constraint set of a family.
pub fn param_domain<F: Real>(family: &CorrFamily<F>) -> ParamDomain<F> {
    family.param_domain()
}
