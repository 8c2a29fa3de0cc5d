//! Shared domain types: snippet datasets, evaluation grids and span
//! estimation.
//!
//! A *functional snippet* dataset holds `n` subjects, each observed at sorted
//! times `T_i1 < … < T_im_i` inside a common domain `[a, b]`, with responses
//! `Y_ij`. All types are immutable after construction and safe to share
//! across threads.

use crate::error::{Error, Result};
use crate::num::Real;

/// One subject's observations. Times are sorted ascending after validation;
/// duplicate times are allowed and kept as distinct observations.
#[derive(Debug, Clone, PartialEq)]
pub struct Subject<F> {
    pub id: String,
    pub times: Vec<F>,
    pub values: Vec<F>,
}

impl<F: Real> Subject<F> {
    pub fn new(id: impl Into<String>, times: Vec<F>, values: Vec<F>) -> Self {
        Subject {
            id: id.into(),
            times,
            values,
        }
    }

    /// Number of observations `m_i`.
    pub fn m(&self) -> usize {
        self.times.len()
    }

    /// Span `max_j T_ij − min_j T_ij`; zero for a single observation.
    pub fn span(&self) -> F {
        match (self.times.first(), self.times.last()) {
            (Some(&a), Some(&b)) => b - a,
            _ => F::zero(),
        }
    }
}

/// Validated snippet dataset on a common domain.
#[derive(Debug, Clone, PartialEq)]
pub struct SnippetDataset<F> {
    domain_lo: F,
    domain_hi: F,
    subjects: Vec<Subject<F>>,
    duplicate_time_subjects: Vec<String>,
}

impl<F: Real> SnippetDataset<F> {
    /// Validates raw data and returns a dataset with per-subject times sorted
    /// ascending (values co-sorted). Duplicate times within a subject are
    /// kept and the subject id is recorded in the warning list.
    pub fn new(domain_lo: F, domain_hi: F, subjects: Vec<Subject<F>>) -> Result<Self> {
        if !(domain_lo < domain_hi) {
            return Err(Error::InvalidDomain {
                lo: domain_lo.widen(),
                hi: domain_hi.widen(),
            });
        }
        if subjects.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut sorted = Vec::with_capacity(subjects.len());
        let mut duplicate_time_subjects = Vec::new();
        for subject in subjects {
            let Subject { id, times, values } = subject;
            if times.len() != values.len() {
                return Err(Error::LengthMismatch {
                    subject: id,
                    times: times.len(),
                    values: values.len(),
                });
            }
            if times.is_empty() {
                return Err(Error::EmptySubject { subject: id });
            }
            for &t in &times {
                if !(t >= domain_lo && t <= domain_hi) {
                    return Err(Error::TimeOutOfDomain {
                        subject: id,
                        t: t.widen(),
                        lo: domain_lo.widen(),
                        hi: domain_hi.widen(),
                    });
                }
            }
            // Stable sort by time, carrying values along.
            let mut order: Vec<usize> = (0..times.len()).collect();
            order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap());
            let sorted_times: Vec<F> = order.iter().map(|&k| times[k]).collect();
            let sorted_values: Vec<F> = order.iter().map(|&k| values[k]).collect();
            if sorted_times.windows(2).any(|w| w[0] == w[1]) {
                duplicate_time_subjects.push(id.clone());
            }
            sorted.push(Subject {
                id,
                times: sorted_times,
                values: sorted_values,
            });
        }
        Ok(SnippetDataset {
            domain_lo,
            domain_hi,
            subjects: sorted,
            duplicate_time_subjects,
        })
    }

    pub fn domain_lo(&self) -> F {
        self.domain_lo
    }

    pub fn domain_hi(&self) -> F {
        self.domain_hi
    }

    pub fn subjects(&self) -> &[Subject<F>] {
        &self.subjects
    }

    pub fn n_subjects(&self) -> usize {
        self.subjects.len()
    }

    /// Subjects that contained duplicate observation times.
    pub fn duplicate_time_subjects(&self) -> &[String] {
        &self.duplicate_time_subjects
    }

    /// Total number of observations across subjects.
    pub fn total_obs(&self) -> usize {
        self.subjects.iter().map(Subject::m).sum()
    }

    /// Average number of observations per subject, `m̄ = n⁻¹ Σ m_i`.
    pub fn mean_m(&self) -> F {
        F::usize(self.total_obs()) / F::usize(self.n_subjects())
    }

    /// All observations flattened as `(time, value)` in subject order.
    pub fn observations(&self) -> impl Iterator<Item = (F, F)> + '_ {
        self.subjects
            .iter()
            .flat_map(|s| s.times.iter().copied().zip(s.values.iter().copied()))
    }

    /// Restriction to a subset of subjects (indices must be valid).
    pub fn subset(&self, keep: &[usize]) -> SnippetDataset<F> {
        SnippetDataset {
            domain_lo: self.domain_lo,
            domain_hi: self.domain_hi,
            subjects: keep.iter().map(|&i| self.subjects[i].clone()).collect(),
            duplicate_time_subjects: Vec::new(),
        }
    }
}

/// Validates a raw dataset; alias of [`SnippetDataset::new`] for callers that
/// already hold a (possibly unsorted) dataset shape.
pub fn validate_dataset<F: Real>(
    domain_lo: F,
    domain_hi: F,
    subjects: Vec<Subject<F>>,
) -> Result<SnippetDataset<F>> {
    SnippetDataset::new(domain_lo, domain_hi, subjects)
}

/// Sorted evaluation abscissae inside the domain.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid<F> {
    points: Vec<F>,
}

/// Default number of grid points for estimate evaluation and quadrature.
pub const DEFAULT_GRID_LEN: usize = 51;

impl<F: Real> EvalGrid<F> {
    /// `len` equally spaced points covering `[lo, hi]`.
    pub fn uniform(lo: F, hi: F, len: usize) -> Self {
        assert!(len >= 2, "grid needs at least two points");
        let step = (hi - lo) / F::usize(len - 1);
        let mut points: Vec<F> = (0..len).map(|i| lo + step * F::usize(i)).collect();
        points[len - 1] = hi;
        EvalGrid { points }
    }

    /// Default 51-point grid over the dataset domain.
    pub fn default_for(ds: &SnippetDataset<F>) -> Self {
        Self::uniform(ds.domain_lo(), ds.domain_hi(), DEFAULT_GRID_LEN)
    }

    pub fn from_points(points: Vec<F>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidSimConfig("empty evaluation grid".into()));
        }
        if points.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidSimConfig(
                "grid points must be strictly increasing".into(),
            ));
        }
        Ok(EvalGrid { points })
    }

    pub fn points(&self) -> &[F] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Estimated snippet span.
#[derive(Debug, Clone, PartialEq)]
pub struct SnippetSpan<F> {
    /// `δ̂ = max_i (max_j T_ij − min_j T_ij)`.
    pub delta_hat: F,
    pub per_subject_spans: Vec<F>,
}

/// Estimates the snippet span; subjects with one observation contribute zero.
pub fn estimate_span<F: Real>(ds: &SnippetDataset<F>) -> SnippetSpan<F> {
    let per_subject_spans: Vec<F> = ds.subjects().iter().map(Subject::span).collect();
    let delta_hat = per_subject_spans
        .iter()
        .copied()
        .fold(F::zero(), |a, b| a.max(b));
    SnippetSpan {
        delta_hat,
        per_subject_spans,
    }
}

/// Trapezoid quadrature of samples `ys` at sorted abscissae `xs`.
pub fn trapezoid<F: Real>(xs: &[F], ys: &[F]) -> F {
    assert_eq!(xs.len(), ys.len());
    let mut acc = F::zero();
    let half = F::cast(0.5);
    for i in 1..xs.len() {
        acc += (xs[i] - xs[i - 1]) * (ys[i] + ys[i - 1]) * half;
    }
    acc
}

/// Deterministic random partition of `n` subjects into `folds` roughly even
/// folds; returns the fold id of each subject.
pub fn fold_partition(n: usize, folds: usize, seed: u64) -> Vec<usize> {
    use rand::seq::SliceRandom;
    use rand::SeedableRng;

    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    let base = n / folds;
    let extra = n % folds;
    let mut pos = 0usize;
    for fold in 0..folds {
        let size = base + usize::from(fold < extra);
        for &subject in &order[pos..pos + size] {
            fold_of[subject] = fold;
        }
        pos += size;
    }
    fold_of
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(subjects: Vec<Subject<f64>>) -> SnippetDataset<f64> {
        SnippetDataset::new(0.0, 1.0, subjects).unwrap()
    }

    #[test]
    fn sorts_times_and_cosorts_values() {
        let d = ds(vec![Subject::new("a", vec![0.2, 0.1], vec![5.0, 3.0])]);
        assert_eq!(d.subjects()[0].times, vec![0.1, 0.2]);
        assert_eq!(d.subjects()[0].values, vec![3.0, 5.0]);
    }

    #[test]
    fn rejects_time_out_of_domain() {
        let err = SnippetDataset::new(0.0, 1.0, vec![Subject::new("a", vec![1.5], vec![0.0])])
            .unwrap_err();
        assert!(matches!(err, Error::TimeOutOfDomain { .. }));
    }

    #[test]
    fn rejects_empty_dataset_and_bad_domain() {
        assert!(matches!(
            SnippetDataset::<f64>::new(0.0, 1.0, vec![]).unwrap_err(),
            Error::EmptyDataset
        ));
        assert!(matches!(
            SnippetDataset::new(1.0, 0.0, vec![Subject::new("a", vec![0.5], vec![0.0])])
                .unwrap_err(),
            Error::InvalidDomain { .. }
        ));
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = SnippetDataset::new(
            0.0,
            1.0,
            vec![Subject::new("a", vec![0.1, 0.2], vec![1.0])],
        )
        .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { .. }));
    }

    #[test]
    fn duplicates_kept_but_flagged() {
        let d = ds(vec![Subject::new("a", vec![0.3, 0.3], vec![1.0, 2.0])]);
        assert_eq!(d.subjects()[0].m(), 2);
        assert_eq!(d.duplicate_time_subjects(), ["a".to_string()]);
    }

    #[test]
    fn validation_is_idempotent() {
        let d = ds(vec![
            Subject::new("a", vec![0.9, 0.1, 0.5], vec![3.0, 1.0, 2.0]),
            Subject::new("b", vec![0.4, 0.4], vec![0.0, 1.0]),
        ]);
        let again =
            SnippetDataset::new(d.domain_lo(), d.domain_hi(), d.subjects().to_vec()).unwrap();
        assert_eq!(again.subjects(), d.subjects());
    }

    #[test]
    fn span_is_max_over_subjects() {
        let d = ds(vec![
            Subject::new("a", vec![0.1, 0.2], vec![0.0, 0.0]),
            Subject::new("b", vec![0.3, 0.55], vec![0.0, 0.0]),
            Subject::new("c", vec![0.0, 0.18], vec![0.0, 0.0]),
        ]);
        let span = estimate_span(&d);
        assert!((span.delta_hat - 0.25).abs() < 1e-15);
        assert_eq!(span.per_subject_spans.len(), 3);
    }

    #[test]
    fn span_examples() {
        let d = ds(vec![
            Subject::new("a", vec![0.1, 0.3], vec![0.0, 0.0]),
            Subject::new("b", vec![0.5, 0.6], vec![0.0, 0.0]),
        ]);
        assert!((estimate_span(&d).delta_hat - 0.2).abs() < 1e-15);

        let single = ds(vec![Subject::new("a", vec![0.5], vec![1.0])]);
        assert_eq!(estimate_span(&single).delta_hat, 0.0);
    }

    #[test]
    fn span_invariant_under_permutation_and_dominated_additions() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.random_range(1..6);
            let mut subjects = Vec::new();
            for i in 0..n {
                let lo: f64 = rng.random_range(0.0..0.5);
                let w: f64 = rng.random_range(0.0..0.4);
                subjects.push(Subject::new(format!("s{i}"), vec![lo, lo + w], vec![0.0; 2]));
            }
            let base = ds(subjects.clone());
            let delta = estimate_span(&base).delta_hat;

            subjects.reverse();
            let permuted = ds(subjects.clone());
            assert_eq!(estimate_span(&permuted).delta_hat, delta);

            let lo = 0.1;
            subjects.push(Subject::new("extra", vec![lo, lo + 0.5 * delta], vec![0.0; 2]));
            let extended = ds(subjects);
            assert_eq!(estimate_span(&extended).delta_hat, delta);
        }
    }

    #[test]
    fn uniform_grid_hits_endpoints() {
        let g = EvalGrid::uniform(0.0, 1.0, 51);
        assert_eq!(g.len(), 51);
        assert_eq!(g.points()[0], 0.0);
        assert_eq!(g.points()[50], 1.0);
    }

    #[test]
    fn trapezoid_constant_and_linear() {
        let g = EvalGrid::uniform(0.0f64, 1.0, 51);
        let ones = vec![1.0; 51];
        assert!((trapezoid(g.points(), &ones) - 1.0).abs() < 1e-14);
        let lin: Vec<f64> = g.points().iter().map(|&t| 2.0 * t).collect();
        assert!((trapezoid(g.points(), &lin) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn fold_partition_is_even_and_deterministic() {
        let folds = fold_partition(11, 5, 42);
        let mut counts = [0usize; 5];
        for &f in &folds {
            counts[f] += 1;
        }
        assert_eq!(counts.iter().sum::<usize>(), 11);
        assert!(counts.iter().all(|&c| c == 2 || c == 3));
        assert_eq!(folds, fold_partition(11, 5, 42));
        assert_ne!(folds, fold_partition(11, 5, 43));
    }
}
