//! Finite metric measure spaces.
//!
//! A [`FiniteMMSpace`] is a finite point set with a distance matrix and a
//! probability vector. Two spaces are identified when they agree after
//! restricting to the support of the measure and collapsing points at
//! distance zero, which is what [`canonicalize`] computes.

mod coupling;
mod polynomial;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rational::{Rational, Scalar};

pub use coupling::Coupling;
pub use polynomial::{evaluate_polynomial, monte_carlo_polynomial, MonteCarloEstimate, TestFunction, DEFAULT_TUPLE_CAP};

#[derive(Clone, PartialEq)]
pub struct FiniteMMSpace<S = Rational> {
    labels: Vec<String>,
    dist: Vec<Vec<S>>,
    weights: Vec<S>,
}

/// A failed mm-space axiom. Indices are zero-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "axiom", rename_all = "snake_case")]
pub enum Violation {
    Empty,
    DimensionMismatch { field: &'static str, expected: usize, found: usize },
    NonzeroDiagonal { i: usize },
    NegativeDistance { i: usize, j: usize },
    Asymmetric { i: usize, j: usize },
    /// `d(i, k) > d(i, j) + d(j, k)`.
    Triangle { i: usize, j: usize, k: usize },
    NegativeWeight { i: usize },
    MassNotOne { total: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Empty => write!(f, "space has no points"),
            Violation::DimensionMismatch { field, expected, found } => {
                write!(f, "{field} has length {found}, expected {expected}")
            }
            Violation::NonzeroDiagonal { i } => write!(f, "d({i},{i}) != 0"),
            Violation::NegativeDistance { i, j } => write!(f, "d({i},{j}) < 0"),
            Violation::Asymmetric { i, j } => write!(f, "d({i},{j}) != d({j},{i})"),
            Violation::Triangle { i, j, k } => {
                write!(f, "triangle inequality fails at ({i},{j},{k}): d({i},{k}) > d({i},{j}) + d({j},{k})")
            }
            Violation::NegativeWeight { i } => write!(f, "weight {i} is negative"),
            Violation::MassNotOne { total } => write!(f, "weights sum to {total}, not 1"),
        }
    }
}

impl<S: Scalar> fmt::Debug for FiniteMMSpace<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FiniteMMSpace")
            .field("labels", &self.labels)
            .field("dist", &self.dist)
            .field("weights", &self.weights)
            .finish()
    }
}

impl<S: Scalar> FiniteMMSpace<S> {
    /// Builds a space and rejects it unless [`validate`] reports nothing.
    pub fn new(labels: Vec<String>, dist: Vec<Vec<S>>, weights: Vec<S>) -> Result<Self> {
        let space = Self::new_unchecked(labels, dist, weights);
        let violations = validate(&space);
        if violations.is_empty() {
            Ok(space)
        } else {
            Err(Error::InvalidSpace { op: "FiniteMMSpace::new", violations })
        }
    }

    pub fn new_unchecked(labels: Vec<String>, dist: Vec<Vec<S>>, weights: Vec<S>) -> Self {
        FiniteMMSpace { labels, dist, weights }
    }

    /// Labels `0..n`, validated.
    pub fn from_matrix(dist: Vec<Vec<S>>, weights: Vec<S>) -> Result<Self> {
        let labels = (0..weights.len()).map(|i| i.to_string()).collect();
        Self::new(labels, dist, weights)
    }

    /// Uniform measure on the given metric.
    pub fn uniform(dist: Vec<Vec<S>>) -> Result<Self> {
        let n = dist.len();
        if n == 0 {
            return Err(Error::InvalidSpace { op: "FiniteMMSpace::uniform", violations: vec![Violation::Empty] });
        }
        let w = S::one() / S::from_int(n as i64);
        Self::from_matrix(dist, vec![w; n])
    }

    /// The one-point space.
    pub fn point() -> Self {
        FiniteMMSpace {
            labels: vec!["0".to_string()],
            dist: vec![vec![S::zero()]],
            weights: vec![S::one()],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn dist(&self, i: usize, j: usize) -> &S {
        &self.dist[i][j]
    }

    pub fn matrix(&self) -> &[Vec<S>] {
        &self.dist
    }

    pub fn weights(&self) -> &[S] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> &S {
        &self.weights[i]
    }

    pub fn diameter(&self) -> S {
        let mut d = S::zero();
        for row in &self.dist {
            for x in row {
                if *x > d {
                    d = x.clone();
                }
            }
        }
        d
    }

    /// Subspace on `indices` (in that order), keeping the weights as given.
    pub fn restrict_unchecked(&self, indices: &[usize]) -> Self {
        FiniteMMSpace {
            labels: indices.iter().map(|&i| self.labels[i].clone()).collect(),
            dist: indices
                .iter()
                .map(|&i| indices.iter().map(|&j| self.dist[i][j].clone()).collect())
                .collect(),
            weights: indices.iter().map(|&i| self.weights[i].clone()).collect(),
        }
    }

    /// Replaces `point` by two copies at distance zero carrying `fraction` and
    /// `1 - fraction` of its weight. The result is isomorphic to `self`.
    pub fn split_point(&self, point: usize, fraction: &S) -> Self {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.insert(point + 1, point);
        let mut out = self.restrict_unchecked(&order);
        let w = self.weights[point].clone();
        out.weights[point] = w.clone() * fraction.clone();
        out.weights[point + 1] = w * (S::one() - fraction.clone());
        out.labels[point + 1] = format!("{}'", self.labels[point]);
        out
    }
}

impl FiniteMMSpace<Rational> {
    /// Approximate copy for float mode.
    pub fn to_f64(&self) -> FiniteMMSpace<f64> {
        FiniteMMSpace {
            labels: self.labels.clone(),
            dist: self.dist.iter().map(|r| r.iter().map(Rational::to_f64).collect()).collect(),
            weights: self.weights.iter().map(Rational::to_f64).collect(),
        }
    }
}

/// Checks every mm-space axiom; the result is empty iff the space is valid.
/// Dimension problems are reported instead of panicking.
pub fn validate<S: Scalar>(space: &FiniteMMSpace<S>) -> Vec<Violation> {
    let n = space.weights.len();
    let mut out = Vec::new();
    if n == 0 {
        out.push(Violation::Empty);
    }
    if space.labels.len() != n {
        out.push(Violation::DimensionMismatch { field: "labels", expected: n, found: space.labels.len() });
    }
    if space.dist.len() != n {
        out.push(Violation::DimensionMismatch { field: "dist", expected: n, found: space.dist.len() });
    }
    for row in &space.dist {
        if row.len() != n {
            out.push(Violation::DimensionMismatch { field: "dist row", expected: n, found: row.len() });
        }
    }
    if !out.is_empty() {
        return out;
    }
    let d = &space.dist;
    for i in 0..n {
        if !d[i][i].near_zero() {
            out.push(Violation::NonzeroDiagonal { i });
        }
        for j in 0..n {
            if d[i][j] < -S::tolerance() {
                out.push(Violation::NegativeDistance { i, j });
            }
            if j > i && !(d[i][j].clone() - d[j][i].clone()).near_zero() {
                out.push(Violation::Asymmetric { i, j });
            }
        }
    }
    for i in 0..n {
        for k in i + 1..n {
            for j in 0..n {
                if j == i || j == k {
                    continue;
                }
                if !d[i][k].le_tol(&(d[i][j].clone() + d[j][k].clone())) {
                    out.push(Violation::Triangle { i, j, k });
                }
            }
        }
    }
    let mut total = S::zero();
    for (i, w) in space.weights.iter().enumerate() {
        if *w < -S::tolerance() {
            out.push(Violation::NegativeWeight { i });
        }
        total = total + w.clone();
    }
    let defect = total.clone() - S::one();
    let mass_ok = if S::EXACT { defect.near_zero() } else { defect.abs_val().to_f64() <= 1e-9 };
    if !mass_ok {
        out.push(Violation::MassNotOne { total: total.to_string() });
    }
    out
}

/// Canonical form: zero-weight points dropped, points at distance zero merged
/// (weights summed, first label kept), order of first occurrence preserved.
pub fn canonicalize<S: Scalar>(space: &FiniteMMSpace<S>) -> FiniteMMSpace<S> {
    canonicalize_with_tolerance(space, &S::tolerance())
}

/// As [`canonicalize`], merging points with `d <= tol`.
pub fn canonicalize_with_tolerance<S: Scalar>(space: &FiniteMMSpace<S>, tol: &S) -> FiniteMMSpace<S> {
    let n = space.len();
    let mut class_of: Vec<Option<usize>> = vec![None; n];
    let mut reps: Vec<usize> = Vec::new();
    let mut weights: Vec<S> = Vec::new();
    for i in 0..n {
        if !space.weights[i].is_positive() {
            continue;
        }
        let found = reps.iter().position(|&r| space.dist[r][i] <= *tol);
        match found {
            Some(c) => {
                class_of[i] = Some(c);
                weights[c] = weights[c].clone() + space.weights[i].clone();
            }
            None => {
                class_of[i] = Some(reps.len());
                reps.push(i);
                weights.push(space.weights[i].clone());
            }
        }
    }
    let mut out = space.restrict_unchecked(&reps);
    out.weights = weights;
    out
}

pub fn is_canonical<S: Scalar>(space: &FiniteMMSpace<S>) -> bool {
    let n = space.len();
    space.weights.iter().all(Scalar::is_positive)
        && (0..n).all(|i| (i + 1..n).all(|j| space.dist[i][j].is_positive()))
}

/// Whether the canonical forms of `a` and `b` are related by a
/// weight-preserving isometry (backtracking search; tiny spaces only).
pub fn are_isomorphic<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>) -> bool {
    let a = canonicalize(a);
    let b = canonicalize(b);
    if a.len() != b.len() {
        return false;
    }
    let n = a.len();
    let mut image = vec![usize::MAX; n];
    let mut used = vec![false; n];

    fn extend<S: Scalar>(
        i: usize,
        a: &FiniteMMSpace<S>,
        b: &FiniteMMSpace<S>,
        image: &mut [usize],
        used: &mut [bool],
    ) -> bool {
        if i == a.len() {
            return true;
        }
        for j in 0..b.len() {
            if used[j] || !(a.weights[i].clone() - b.weights[j].clone()).near_zero() {
                continue;
            }
            let consistent =
                (0..i).all(|k| (a.dist[i][k].clone() - b.dist[j][image[k]].clone()).near_zero());
            if !consistent {
                continue;
            }
            image[i] = j;
            used[j] = true;
            if extend(i + 1, a, b, image, used) {
                return true;
            }
            used[j] = false;
        }
        false
    }

    extend(0, &a, &b, &mut image, &mut used)
}

/// Random valid canonical space with at most `n_max` points and diameter at
/// most `diam_max`, reproducible from `seed`.
///
/// Raw distances are drawn from `{1/8, ..., 8/8} * diam_max` and closed under
/// shortest paths, so the triangle inequality holds by construction. Weights
/// are drawn from `{1..6}` and normalized.
pub fn sample_mm_space(seed: u64, n_max: usize, diam_max: Rational) -> FiniteMMSpace<Rational> {
    assert!(n_max >= 1, "sample_mm_space needs n_max >= 1");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(1..=n_max);
    sample_with_size(&mut rng, n, diam_max)
}

pub(crate) fn sample_with_size(rng: &mut impl Rng, n: usize, diam_max: Rational) -> FiniteMMSpace<Rational> {
    let step = diam_max * Rational::new(1, 8);
    let mut dist = vec![vec![Rational::ZERO; n]; n];
    for i in 0..n {
        for j in i + 1..n {
            let k: i32 = rng.gen_range(1..=8);
            dist[i][j] = step * Rational::from(k);
            dist[j][i] = dist[i][j];
        }
    }
    for m in 0..n {
        for i in 0..n {
            for j in 0..n {
                let via = dist[i][m] + dist[m][j];
                if via < dist[i][j] {
                    dist[i][j] = via;
                }
            }
        }
    }
    let raw: Vec<i128> = (0..n).map(|_| rng.gen_range(1..=6)).collect();
    let total: i128 = raw.iter().sum();
    let weights = raw.iter().map(|&w| Rational::new(w, total)).collect();
    let labels = (0..n).map(|i| format!("p{i}")).collect();
    FiniteMMSpace::new_unchecked(labels, dist, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    fn r(n: i128) -> Rational {
        Rational::from(n)
    }

    #[test]
    fn one_point_space_is_valid() {
        assert!(validate(&FiniteMMSpace::<Rational>::point()).is_empty());
    }

    #[test]
    fn triangle_violation_is_reported_with_witness() {
        let dist = vec![vec![r(0), r(1), r(3)], vec![r(1), r(0), r(1)], vec![r(3), r(1), r(0)]];
        let s = FiniteMMSpace::new_unchecked(vec!["a".into(), "b".into(), "c".into()], dist, vec![q(1, 3); 3]);
        assert_eq!(validate(&s), vec![Violation::Triangle { i: 0, j: 1, k: 2 }]);
    }

    #[test]
    fn mass_defect_is_reported() {
        let s = FiniteMMSpace::new_unchecked(
            vec!["a".into(), "b".into()],
            vec![vec![r(0), r(1)], vec![r(1), r(0)]],
            vec![q(1, 2), q(3, 5)],
        );
        assert_eq!(validate(&s), vec![Violation::MassNotOne { total: "11/10".into() }]);
    }

    #[test]
    fn dimension_mismatch_is_a_violation_not_a_panic() {
        let s = FiniteMMSpace::new_unchecked(vec!["a".into()], vec![vec![r(0), r(1)]], vec![r(1)]);
        let v = validate(&s);
        assert!(matches!(v[0], Violation::DimensionMismatch { field: "dist row", .. }));
    }

    #[test]
    fn asymmetry_and_diagonal() {
        let s = FiniteMMSpace::new_unchecked(
            vec!["a".into(), "b".into()],
            vec![vec![r(1), r(1)], vec![r(2), r(0)]],
            vec![q(1, 2), q(1, 2)],
        );
        let v = validate(&s);
        assert!(v.contains(&Violation::NonzeroDiagonal { i: 0 }));
        assert!(v.contains(&Violation::Asymmetric { i: 0, j: 1 }));
    }

    #[test]
    fn canonicalize_merges_distance_zero() {
        let s = FiniteMMSpace::new(
            vec!["a".into(), "b".into()],
            vec![vec![r(0), r(0)], vec![r(0), r(0)]],
            vec![q(3, 10), q(7, 10)],
        )
        .unwrap();
        let c = canonicalize(&s);
        assert_eq!(c.len(), 1);
        assert_eq!(c.weights(), &[r(1)]);
        assert_eq!(c.labels(), &["a".to_string()]);
    }

    #[test]
    fn canonicalize_drops_zero_weight() {
        let d = vec![vec![r(0), r(1), r(2)], vec![r(1), r(0), r(1)], vec![r(2), r(1), r(0)]];
        let s = FiniteMMSpace::from_matrix(d, vec![q(1, 2), q(1, 2), r(0)]).unwrap();
        let c = canonicalize(&s);
        assert_eq!(c, s.restrict_unchecked(&[0, 1]));
    }

    #[test]
    fn canonicalize_is_identity_on_canonical_input() {
        for seed in 0..50 {
            let s = sample_mm_space(seed, 5, r(2));
            assert!(is_canonical(&s));
            assert_eq!(canonicalize(&s), s);
        }
    }

    #[test]
    fn float_merge_uses_tolerance() {
        let s = FiniteMMSpace::<f64>::new_unchecked(
            vec!["a".into(), "b".into()],
            vec![vec![0.0, 1e-14], vec![1e-14, 0.0]],
            vec![0.5, 0.5],
        );
        assert_eq!(canonicalize(&s).len(), 1);
        assert_eq!(canonicalize_with_tolerance(&s, &0.0).len(), 2);
    }

    #[test]
    fn sampling_is_deterministic_and_valid() {
        assert_eq!(sample_mm_space(0, 1, r(1)).len(), 1);
        assert_eq!(sample_mm_space(3, 6, r(1)), sample_mm_space(3, 6, r(1)));
        assert!(validate(&sample_mm_space(7, 4, r(1))).is_empty());
        for seed in 0..1000 {
            let s = sample_mm_space(seed, 6, q(3, 2));
            assert!(validate(&s).is_empty(), "seed {seed}");
            assert!(s.diameter() <= q(3, 2));
        }
    }

    #[test]
    fn isomorphism_search() {
        let a = FiniteMMSpace::from_matrix(
            vec![vec![r(0), r(1), r(2)], vec![r(1), r(0), r(2)], vec![r(2), r(2), r(0)]],
            vec![q(1, 4), q(1, 4), q(1, 2)],
        )
        .unwrap();
        let b = a.restrict_unchecked(&[2, 0, 1]);
        assert!(are_isomorphic(&a, &b));
        assert!(are_isomorphic(&a, &a.split_point(1, &q(1, 3))));
        let c = FiniteMMSpace::from_matrix(
            vec![vec![r(0), r(1), r(2)], vec![r(1), r(0), r(2)], vec![r(2), r(2), r(0)]],
            vec![q(1, 2), q(1, 4), q(1, 4)],
        )
        .unwrap();
        assert!(!are_isomorphic(&a, &c));
    }
}
