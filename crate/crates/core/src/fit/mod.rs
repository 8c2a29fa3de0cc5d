//! Least-squares fitting of the correlation parameters.
//!
//! The criterion is
//!
//! ```text
//! Q̂_n(θ) = Σ_i [m_i(m_i−1)]⁻¹ Σ_{j≠l} {σ̂_X(T_ij) σ̂_X(T_il) ρ_θ(T_ij,T_il) − C_ijl}²
//! ```
//!
//! over the raw covariances `C_ijl = {Y_ij − μ̂(T_ij)}{Y_il − μ̂(T_il)}` of
//! every ordered within-subject pair. Each unordered pair appears twice with
//! an identical contribution, matching the displayed double sum. Constrained
//! parameters are optimized through smooth reparametrizations (log for
//! positive coordinates, a scaled logit for the power-exponential exponent,
//! softmax for simplex weights) with Nelder–Mead multi-start in the
//! unconstrained space.

pub mod nelder_mead;

use rayon::prelude::*;

use crate::corr::{fourier_degenerate, CoordDomain, CorrFamily, CorrelationModel, ParamDomain};
use crate::error::{Error, Result};
use crate::kernel::SmoothEstimate;
use crate::num::Real;
use crate::types::{fold_partition, SnippetDataset};

pub use nelder_mead::{nelder_mead, NelderMeadOptions, NelderMeadResult};

/// One ordered raw-covariance pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RawPair<F> {
    pub s: F,
    pub t: F,
    pub c: F,
}

/// Ordered raw-covariance pairs of one subject with its `1/(m(m−1))` weight.
#[derive(Debug, Clone, PartialEq)]
pub struct SubjectPairs<F> {
    pub weight: F,
    pub pairs: Vec<RawPair<F>>,
}

/// Raw within-subject cross-covariances for all pair-eligible subjects.
#[derive(Debug, Clone, PartialEq)]
pub struct RawCovPairs<F> {
    pub subjects: Vec<SubjectPairs<F>>,
}

impl<F: Real> RawCovPairs<F> {
    /// Total ordered pair count.
    pub fn total_pairs(&self) -> usize {
        self.subjects.iter().map(|s| s.pairs.len()).sum()
    }
}

/// Enumerates all ordered pairs `j ≠ l` of subjects with `m_i ≥ 2`, in
/// subject order then `(j, l)` order.
pub fn build_raw_pairs<F: Real>(
    ds: &SnippetDataset<F>,
    mu_hat: &SmoothEstimate<F>,
) -> Result<RawCovPairs<F>> {
    let mut subjects = Vec::new();
    for subject in ds.subjects() {
        let m = subject.m();
        if m < 2 {
            continue;
        }
        let residuals: Vec<F> = subject
            .times
            .iter()
            .zip(&subject.values)
            .map(|(&t, &y)| y - mu_hat.eval(t))
            .collect();
        let mut pairs = Vec::with_capacity(m * (m - 1));
        for j in 0..m {
            for l in 0..m {
                if j != l {
                    pairs.push(RawPair {
                        s: subject.times[j],
                        t: subject.times[l],
                        c: residuals[j] * residuals[l],
                    });
                }
            }
        }
        subjects.push(SubjectPairs {
            weight: F::one() / (F::usize(m) * F::usize(m - 1)),
            pairs,
        });
    }
    if subjects.is_empty() {
        return Err(Error::NoEligibleSubjects);
    }
    Ok(RawCovPairs { subjects })
}

/// Objective terms with the variance factors baked in; the exclusion set is
/// fixed before optimization (sine-basis pairs whose abscissae sit on the
/// universal basis zeros), so the objective is one fixed function of θ
/// throughout a fit.
struct PreparedObjective<F> {
    /// `(s, t, σ̂_X(s)σ̂_X(t), C, weight)`
    terms: Vec<(F, F, F, F, F)>,
    excluded: usize,
    /// Positive pair distances, for the tabulated Matérn path.
    distances: Vec<F>,
    /// Hoisted sine-basis products, for the sine-basis path.
    fourier: Option<FourierTerms<F>>,
}

/// Per-pair sine-basis products `φ_j(s)φ_j(t)`, `φ_j(s)²`, `φ_j(t)²`,
/// hoisted out of the θ loop. Evaluation is arithmetic-identical to
/// [`CorrelationModel::eval`]; only the basis values are cached.
struct FourierTerms<F> {
    dim: usize,
    /// `dim` cross products per term, then the two squared blocks.
    cross: Vec<F>,
    sq_s: Vec<F>,
    sq_t: Vec<F>,
    diagonal: Vec<bool>,
}

impl<F: Real> FourierTerms<F> {
    fn build(dim: usize, domain: (F, F), terms: &[(F, F, F, F, F)]) -> Self {
        let two_pi = F::cast(2.0 * std::f64::consts::PI);
        let width = domain.1 - domain.0;
        let mut cross = Vec::with_capacity(dim * terms.len());
        let mut sq_s = Vec::with_capacity(dim * terms.len());
        let mut sq_t = Vec::with_capacity(dim * terms.len());
        let mut diagonal = Vec::with_capacity(terms.len());
        for &(s, t, _, _, _) in terms {
            let u = (s - domain.0) / width;
            let v = (t - domain.0) / width;
            diagonal.push(s == t);
            for j in 0..dim {
                let freq = two_pi * F::usize(j + 1);
                let fs = (freq * u).sin();
                let ft = (freq * v).sin();
                cross.push(fs * ft);
                sq_s.push(fs * fs);
                sq_t.push(ft * ft);
            }
        }
        FourierTerms {
            dim,
            cross,
            sq_s,
            sq_t,
            diagonal,
        }
    }

    fn rho(&self, term_idx: usize, theta: &[F]) -> F {
        if self.diagonal[term_idx] {
            return F::one();
        }
        let base = term_idx * self.dim;
        let mut num = F::zero();
        let mut ps = F::zero();
        let mut pt = F::zero();
        for (j, &w) in theta.iter().enumerate() {
            num += w * self.cross[base + j];
            ps += w * self.sq_s[base + j];
            pt += w * self.sq_t[base + j];
        }
        num / (ps.sqrt() * pt.sqrt())
    }
}

/// Pair count above which the Matérn correlation is evaluated through a
/// log-distance table per objective call instead of one Bessel evaluation
/// per pair. Node count scales with the pair count; cubic interpolation on
/// the log scale keeps the error at the level of the Bessel evaluation
/// itself (the function is analytic in `ln d` away from zero distance).
const MATERN_TABLE_MIN_PAIRS: usize = 512;

struct MaternTable<F> {
    log_lo: F,
    inv_step: F,
    values: Vec<F>,
    d_lo: F,
    theta: [F; 2],
}

impl<F: Real> MaternTable<F> {
    fn build(theta: &[F], distances: &[F], pairs: usize) -> Option<Self> {
        let d_lo = distances.first().copied()?;
        let d_hi = distances.last().copied()?;
        if !(d_lo > F::zero()) || !(d_hi > d_lo) {
            return None;
        }
        let model = CorrelationModel::Matern {
            theta: [theta[0], theta[1]],
        };
        let size = (pairs / 4).clamp(256, 2048);
        let log_lo = d_lo.ln();
        let step = (d_hi.ln() - log_lo) / F::usize(size - 1);
        // One guard node on each side for the cubic stencil.
        let mut values = Vec::with_capacity(size + 2);
        for i in 0..size + 2 {
            let ld = log_lo + step * (F::usize(i) - F::one());
            let v = model.eval(F::zero(), ld.exp())?;
            if !v.is_finite() {
                return None;
            }
            values.push(v);
        }
        Some(MaternTable {
            log_lo,
            inv_step: F::one() / step,
            values,
            d_lo,
            theta: [theta[0], theta[1]],
        })
    }

    fn eval(&self, d: F) -> F {
        if d < self.d_lo {
            // Below the table range (only possible for near-duplicate
            // times): evaluate directly.
            let model = CorrelationModel::Matern { theta: self.theta };
            return model.eval(F::zero(), d).unwrap_or(F::nan());
        }
        let u = (d.ln() - self.log_lo) * self.inv_step + F::one();
        let max_i = self.values.len() - 3;
        let i = u.floor().to_usize().unwrap_or(1).clamp(1, max_i);
        let x = u - F::usize(i);
        let (p0, p1, p2, p3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        let half = F::cast(0.5);
        // Catmull-Rom cubic through the four surrounding nodes.
        let a = half * (-p0 + F::cast(3.0) * (p1 - p2) + p3);
        let b = p0 - F::cast(2.5) * p1 + F::cast(2.0) * p2 - half * p3;
        let c = half * (p2 - p0);
        let v = ((a * x + b) * x + c) * x + p1;
        v.min(F::one())
    }
}

fn degenerate_abscissa<F: Real>(family: &CorrFamily<F>, x: F) -> bool {
    match family {
        CorrFamily::FourierBasis { domain, .. } => fourier_degenerate(x, *domain),
        CorrFamily::ConvexMix(components) => components.iter().any(|c| match c {
            crate::corr::CorrelationModel::FourierBasis { domain, .. } => {
                fourier_degenerate(x, *domain)
            }
            _ => false,
        }),
        _ => false,
    }
}

fn prepare_objective<F: Real>(
    pairs: &RawCovPairs<F>,
    sigma_x: &impl Fn(F) -> F,
    family: &CorrFamily<F>,
) -> PreparedObjective<F> {
    let mut terms = Vec::with_capacity(pairs.total_pairs());
    let mut excluded = 0usize;
    for subject in &pairs.subjects {
        for p in &subject.pairs {
            if degenerate_abscissa(family, p.s) || degenerate_abscissa(family, p.t) {
                excluded += 1;
                continue;
            }
            terms.push((p.s, p.t, sigma_x(p.s) * sigma_x(p.t), p.c, subject.weight));
        }
    }
    let mut distances: Vec<F> = Vec::new();
    if matches!(family, CorrFamily::Matern) && terms.len() >= MATERN_TABLE_MIN_PAIRS {
        distances = terms
            .iter()
            .map(|&(s, t, _, _, _)| (s - t).abs())
            .filter(|&d| d > F::zero())
            .collect();
        distances.sort_by(|a, b| a.partial_cmp(b).unwrap());
    }
    let fourier = match family {
        CorrFamily::FourierBasis { dim, domain } => {
            Some(FourierTerms::build(*dim, *domain, &terms))
        }
        _ => None,
    };
    PreparedObjective {
        terms,
        excluded,
        distances,
        fourier,
    }
}

impl<F: Real> PreparedObjective<F> {
    fn eval(&self, family: &CorrFamily<F>, theta: &[F]) -> F {
        let model = match family.model(theta) {
            Ok(m) => m,
            Err(_) => return F::infinity(),
        };
        if !self.distances.is_empty() {
            if let Some(table) = MaternTable::build(theta, &self.distances, self.terms.len()) {
                let mut q = F::zero();
                for &(s, t, a, c, w) in &self.terms {
                    let d = (s - t).abs();
                    let rho = if d > F::zero() { table.eval(d) } else { F::one() };
                    let r = a * rho - c;
                    q += w * r * r;
                }
                return q;
            }
            return F::infinity();
        }
        if let Some(fourier) = &self.fourier {
            let mut q = F::zero();
            for (idx, &(_, _, a, c, w)) in self.terms.iter().enumerate() {
                let r = a * fourier.rho(idx, theta) - c;
                q += w * r * r;
            }
            return q;
        }
        let mut q = F::zero();
        for &(s, t, a, c, w) in &self.terms {
            // Degenerate pairs were dropped up front; `None` cannot occur.
            let rho = model.eval(s, t).unwrap_or(F::zero());
            let r = a * rho - c;
            q += w * r * r;
        }
        q
    }
}

/// Evaluates `Q̂_n(θ)` for a parameter vector in the family's domain.
pub fn objective<F: Real>(
    theta: &[F],
    pairs: &RawCovPairs<F>,
    sigma_x: &impl Fn(F) -> F,
    family: &CorrFamily<F>,
) -> Result<F> {
    family.model(theta)?;
    let prepared = prepare_objective(pairs, sigma_x, family);
    Ok(prepared.eval(family, theta))
}

/// Like [`objective`] but also reports how many pairs were excluded as
/// undefined for the family.
pub fn objective_with_exclusions<F: Real>(
    theta: &[F],
    pairs: &RawCovPairs<F>,
    sigma_x: &impl Fn(F) -> F,
    family: &CorrFamily<F>,
) -> Result<(F, usize)> {
    family.model(theta)?;
    let prepared = prepare_objective(pairs, sigma_x, family);
    Ok((prepared.eval(family, theta), prepared.excluded))
}

/// Smooth bijection between the constrained parameter space and `R^k`.
enum Reparam<F> {
    Coords(Vec<CoordDomain<F>>),
    Simplex { dim: usize },
}

const LOGIT_CLAMP: f64 = 40.0;

impl<F: Real> Reparam<F> {
    fn for_domain(domain: &ParamDomain<F>) -> Self {
        match domain {
            ParamDomain::Box(coords) => Reparam::Coords(coords.clone()),
            ParamDomain::Simplex { dim } => Reparam::Simplex { dim: *dim },
        }
    }

    fn free_dim(&self) -> usize {
        match self {
            Reparam::Coords(coords) => coords.len(),
            Reparam::Simplex { dim } => dim - 1,
        }
    }

    fn to_theta(&self, z: &[F]) -> Vec<F> {
        let clamp = F::cast(LOGIT_CLAMP);
        match self {
            Reparam::Coords(coords) => z
                .iter()
                .zip(coords)
                .map(|(&zi, c)| match *c {
                    CoordDomain::Positive => zi.max(-clamp).min(clamp).exp(),
                    CoordDomain::OpenClosed(lo, hi) => {
                        let u = zi.max(-clamp).min(clamp);
                        lo + (hi - lo) / (F::one() + (-u).exp())
                    }
                })
                .collect(),
            Reparam::Simplex { dim } => {
                let mut w: Vec<F> = z
                    .iter()
                    .map(|&zi| zi.max(-clamp).min(clamp).exp())
                    .collect();
                w.push(F::one());
                let total: F = w.iter().copied().sum();
                debug_assert_eq!(w.len(), *dim);
                w.into_iter().map(|v| v / total).collect()
            }
        }
    }

    fn to_z(&self, theta: &[F]) -> Vec<F> {
        match self {
            Reparam::Coords(coords) => theta
                .iter()
                .zip(coords)
                .map(|(&v, c)| match *c {
                    CoordDomain::Positive => v.ln(),
                    CoordDomain::OpenClosed(lo, hi) => {
                        let u = ((v - lo) / (hi - lo))
                            .max(F::cast(1e-16))
                            .min(F::one() - F::cast(1e-16));
                        (u / (F::one() - u)).ln()
                    }
                })
                .collect(),
            Reparam::Simplex { .. } => {
                let floor = F::cast(1e-12);
                let last = theta.last().copied().unwrap_or(F::one()).max(floor);
                theta[..theta.len() - 1]
                    .iter()
                    .map(|&v| (v.max(floor) / last).ln())
                    .collect()
            }
        }
    }
}

/// Result of a correlation-parameter fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<F> {
    pub theta_hat: Vec<F>,
    /// `Q̂_n(θ̂)`.
    pub objective_value: F,
    pub n_starts: usize,
    pub converged: bool,
    pub excluded_pair_count: usize,
}

/// Fit configuration.
#[derive(Debug, Clone)]
pub struct FitConfig<F> {
    /// Scale hint for range parameters; the snippet span `δ̂` in pipelines.
    pub span_hint: F,
    /// Additional user-provided starts in θ space.
    pub extra_starts: Vec<Vec<F>>,
    pub options: Option<NelderMeadOptions<F>>,
}

impl<F: Real> Default for FitConfig<F> {
    fn default() -> Self {
        FitConfig {
            span_hint: F::one(),
            extra_starts: Vec::new(),
            options: None,
        }
    }
}

/// Fixed start grid: for two-parameter families, four span-scaled range
/// values crossed with two interior shape values; for simplex families, the
/// uniform vector plus a first-coordinate-heavy one.
pub fn default_start_grid<F: Real>(family: &CorrFamily<F>, span: F) -> Vec<Vec<F>> {
    default_starts(family, span)
}

fn default_starts<F: Real>(family: &CorrFamily<F>, span: F) -> Vec<Vec<F>> {
    let span = if span > F::zero() { span } else { F::one() };
    match family {
        CorrFamily::PowerExp | CorrFamily::RationalQuad | CorrFamily::Matern => {
            let shape: [f64; 2] = match family {
                CorrFamily::PowerExp => [0.7, 1.5],
                _ => [0.5, 1.5],
            };
            let mut starts = Vec::with_capacity(8);
            for &scale in &[0.1, 0.5, 1.0, 2.0] {
                for &t1 in &shape {
                    starts.push(vec![F::cast(t1), F::cast(scale) * span]);
                }
            }
            starts
        }
        CorrFamily::FourierBasis { dim, .. } => simplex_starts(*dim),
        CorrFamily::ConvexMix(components) => simplex_starts(components.len()),
    }
}

fn simplex_starts<F: Real>(dim: usize) -> Vec<Vec<F>> {
    let uniform = vec![F::one() / F::usize(dim); dim];
    if dim == 1 {
        return vec![uniform];
    }
    let mut heavy = vec![F::cast(0.15) / F::usize(dim - 1); dim];
    heavy[0] = F::cast(0.85);
    vec![uniform, heavy]
}

/// Minimizes `Q̂_n` by reparametrized Nelder–Mead multi-start.
pub fn fit_theta<F: Real>(
    pairs: &RawCovPairs<F>,
    sigma_x: &(impl Fn(F) -> F + Sync),
    family: &CorrFamily<F>,
    config: &FitConfig<F>,
) -> Result<FitResult<F>> {
    if pairs.subjects.is_empty() {
        return Err(Error::NoEligibleSubjects);
    }
    let prepared = prepare_objective(pairs, sigma_x, family);
    if prepared.terms.is_empty() {
        return Err(Error::NoEligiblePairs);
    }
    let reparam = Reparam::for_domain(&family.param_domain());
    let dim = reparam.free_dim();

    if dim == 0 {
        // Zero-dimensional simplex: θ = (1) is forced.
        let theta = vec![F::one()];
        let value = prepared.eval(family, &theta);
        return Ok(FitResult {
            theta_hat: theta,
            objective_value: value,
            n_starts: 1,
            converged: true,
            excluded_pair_count: prepared.excluded,
        });
    }

    let mut starts = default_starts(family, config.span_hint);
    starts.extend(config.extra_starts.iter().cloned());
    let opts = config
        .options
        .clone()
        .unwrap_or_else(|| NelderMeadOptions::for_dim(dim));
    let steps = vec![F::cast(0.5); dim];

    let runs: Vec<NelderMeadResult<F>> = starts
        .par_iter()
        .map(|theta0| {
            let z0 = reparam.to_z(theta0);
            nelder_mead(
                |z: &[F]| prepared.eval(family, &reparam.to_theta(z)),
                &z0,
                &steps,
                &opts,
            )
        })
        .collect();

    let mut best: Option<(usize, &NelderMeadResult<F>)> = None;
    for (i, run) in runs.iter().enumerate() {
        if !run.fx.is_finite() {
            continue;
        }
        match best {
            Some((_, b)) if !(run.fx < b.fx) => {}
            _ => best = Some((i, run)),
        }
    }
    let (_, best) = best.ok_or(Error::AllStartsFailed)?;
    Ok(FitResult {
        theta_hat: reparam.to_theta(&best.x),
        objective_value: best.fx,
        n_starts: starts.len(),
        converged: best.converged,
        excluded_pair_count: prepared.excluded,
    })
}

/// Dimension-selection method for the sine-basis family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DnSelect {
    /// Five-fold cross-validation on held-out raw covariances.
    Cv5,
    /// `N_pairs · ln(Q̂_n(θ̂)/N_pairs) + 2(d_n − 1)`, smaller is better.
    Aic,
}

/// Selects the sine-basis dimension from `candidates` (ties toward the
/// smaller dimension).
pub fn select_dn<F: Real>(
    ds: &SnippetDataset<F>,
    mu_hat: &SmoothEstimate<F>,
    sigma_x: &(impl Fn(F) -> F + Sync),
    candidates: &[usize],
    method: DnSelect,
    seed: u64,
    config: &FitConfig<F>,
) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::EmptyCandidateList);
    }
    let mut sorted = candidates.to_vec();
    sorted.sort_unstable();
    if sorted.len() == 1 {
        return Ok(sorted[0]);
    }
    let pairs = build_raw_pairs(ds, mu_hat)?;

    let mut best: Option<(F, usize)> = None;
    for &dn in &sorted {
        let family = CorrFamily::fourier(dn);
        let score = match method {
            DnSelect::Aic => {
                let fit = fit_theta(&pairs, sigma_x, &family, config)?;
                let n_pairs = pairs.total_pairs() - fit.excluded_pair_count;
                let n = F::usize(n_pairs.max(1));
                n * (fit.objective_value / n).max(F::min_positive_value()).ln()
                    + F::cast(2.0) * F::usize(dn.saturating_sub(1))
            }
            DnSelect::Cv5 => {
                let folds = 5usize.min(ds.n_subjects());
                if folds < 2 {
                    return Err(Error::TooFewSubjects {
                        n: ds.n_subjects(),
                        folds: 5,
                    });
                }
                let eligible: Vec<usize> = (0..ds.n_subjects())
                    .filter(|&i| ds.subjects()[i].m() >= 2)
                    .collect();
                let fold_of = fold_partition(eligible.len(), folds, seed);
                let mut total = F::zero();
                for fold in 0..folds {
                    let train: Vec<usize> = eligible
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| fold_of[k] != fold)
                        .map(|(_, &i)| i)
                        .collect();
                    if train.is_empty() {
                        continue;
                    }
                    let train_pairs = build_raw_pairs(&ds.subset(&train), mu_hat)?;
                    let fit = fit_theta(&train_pairs, sigma_x, &family, config)?;
                    let model = family.model(&fit.theta_hat)?;
                    for (k, &i) in eligible.iter().enumerate() {
                        if fold_of[k] != fold {
                            continue;
                        }
                        let subject = &ds.subjects()[i];
                        let m = subject.m();
                        let w = F::one() / (F::usize(m) * F::usize(m - 1));
                        let res: Vec<F> = subject
                            .times
                            .iter()
                            .zip(&subject.values)
                            .map(|(&t, &y)| y - mu_hat.eval(t))
                            .collect();
                        for j in 0..m {
                            for l in 0..m {
                                if j == l {
                                    continue;
                                }
                                let (s, t) = (subject.times[j], subject.times[l]);
                                if let Some(rho) = model.eval(s, t) {
                                    let r = sigma_x(s) * sigma_x(t) * rho - res[j] * res[l];
                                    total += w * r * r;
                                }
                            }
                        }
                    }
                }
                total
            }
        };
        match best {
            Some((b, _)) if !(score < b) => {}
            _ => best = Some((score, dn)),
        }
    }
    Ok(best.unwrap().1)
}
