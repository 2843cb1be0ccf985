//! Metric gluings of two finite mm-spaces and the Gromov–Prohorov upper
//! bound obtained by minimizing the Prohorov distance of the pushed-forward
//! measures over gluings.
//!
//! For a correspondence `K` and `eps >= distortion(K) / 2` the cross distance
//! `w(x, y) = min over (a, b) in K of d_1(x, a) + eps + d_2(b, y)` defines a
//! pseudometric on the disjoint union. Cross distances grow with `eps`, so for
//! a fixed `K` the Prohorov distance is smallest at `eps = distortion(K) / 2`
//! and larger grid values need not be tried.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::mm_core::FiniteMMSpace;
use crate::prohorov::{prohorov_flow, CommonSpaceMeasures};
use crate::rational::{Rational, Scalar};

use super::distortion;

/// Largest number of positive-weight pairs for which every correspondence is
/// tried.
pub const FULL_SEARCH_PAIRS: usize = 12;

/// A pseudometric on `X_1 ⊔ X_2`: indices `0..n1` are `X_1`, then `X_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GluedSpace<S> {
    n1: usize,
    dist: Vec<Vec<S>>,
}

impl<S: Scalar> GluedSpace<S> {
    /// Assembles the block matrix from a cross-distance matrix `w`
    /// (`n1 x n2`) without checking the triangle inequality.
    pub fn from_cross(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, w: &[Vec<S>]) -> Result<Self> {
        let (n1, n2) = (a.len(), b.len());
        if w.len() != n1 || w.iter().any(|r| r.len() != n2) {
            return Err(invalid("GluedSpace::from_cross", "cross", format!("expected {n1}x{n2} entries")));
        }
        let mut dist = vec![vec![S::zero(); n1 + n2]; n1 + n2];
        for i in 0..n1 {
            for j in 0..n1 {
                dist[i][j] = a.dist(i, j).clone();
            }
            for y in 0..n2 {
                dist[i][n1 + y] = w[i][y].clone();
                dist[n1 + y][i] = w[i][y].clone();
            }
        }
        for x in 0..n2 {
            for y in 0..n2 {
                dist[n1 + x][n1 + y] = b.dist(x, y).clone();
            }
        }
        Ok(GluedSpace { n1, dist })
    }

    pub fn len(&self) -> usize {
        self.dist.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dist.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> &S {
        &self.dist[i][j]
    }

    /// Distance between `x` in `X_1` and `y` in `X_2`.
    pub fn cross(&self, x: usize, y: usize) -> &S {
        &self.dist[x][self.n1 + y]
    }

    pub fn matrix(&self) -> &[Vec<S>] {
        &self.dist
    }

    /// The two measures pushed into the glued space.
    pub fn measures(&self, a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>) -> Result<CommonSpaceMeasures<S>> {
        let mut mu = a.weights().to_vec();
        mu.extend(std::iter::repeat_n(S::zero(), b.len()));
        let mut nu = vec![S::zero(); a.len()];
        nu.extend(b.weights().iter().cloned());
        CommonSpaceMeasures::new(self.dist.clone(), mu, nu)
    }

    /// Prohorov distance between the two pushed-forward measures.
    pub fn prohorov(&self, a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>) -> Result<S> {
        Ok(prohorov_flow(&self.measures(a, b)?))
    }
}

/// Triples `(i, j, k)` with `d(i, k) > d(i, j) + d(j, k)` beyond tolerance.
pub fn check_triangle<S: Scalar>(glued: &GluedSpace<S>) -> Vec<(usize, usize, usize)> {
    let n = glued.len();
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let via = glued.dist[i][j].clone() + glued.dist[j][k].clone();
                if !glued.dist[i][k].le_tol(&via) {
                    out.push((i, j, k));
                }
            }
        }
    }
    out
}

/// The gluing along a correspondence `K` at slack `eps`.
pub fn build_glued_space<S: Scalar>(
    a: &FiniteMMSpace<S>,
    b: &FiniteMMSpace<S>,
    pairs: &[(usize, usize)],
    eps: &S,
) -> Result<GluedSpace<S>> {
    const OP: &str = "build_glued_space";
    if pairs.is_empty() {
        return Err(invalid(OP, "pairs", "correspondence is empty"));
    }
    if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= a.len() || y >= b.len()) {
        return Err(invalid(OP, "pairs", format!("pair ({x},{y}) out of range")));
    }
    let dis = distortion(pairs, a, b);
    let two = S::from_int(2);
    if !dis.le_tol(&(two * eps.clone())) {
        return Err(invalid(OP, "eps", format!("{eps} is below half the distortion {dis}")));
    }
    let w: Vec<Vec<S>> = (0..a.len())
        .map(|x| {
            (0..b.len())
                .map(|y| {
                    pairs
                        .iter()
                        .map(|&(p, q)| a.dist(x, p).clone() + eps.clone() + b.dist(q, y).clone())
                        .reduce(|u, v| u.min_of(v))
                        .expect("pairs is nonempty")
                })
                .collect()
        })
        .collect();
    let glued = GluedSpace::from_cross(a, b, &w)?;
    let bad = check_triangle(&glued);
    if let Some(&(i, j, k)) = bad.first() {
        return Err(Error::Internal { op: OP, detail: format!("triangle inequality fails at ({i},{j},{k})") });
    }
    Ok(glued)
}

/// Search budget for [`glued_upper_bound`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlueSearch {
    /// Every correspondence is tried when there are at most this many
    /// positive-weight pairs; otherwise `random_subsets` are sampled.
    pub full_search_pairs: usize,
    pub random_subsets: usize,
    /// Random cross matrices (closed under the min-plus product) tried in
    /// addition to correspondence gluings.
    pub random_cross: usize,
    pub seed: u64,
}

impl Default for GlueSearch {
    fn default() -> Self {
        GlueSearch { full_search_pairs: FULL_SEARCH_PAIRS, random_subsets: 512, random_cross: 16, seed: 0 }
    }
}

/// Best gluing found.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlueBound<S> {
    pub value: S,
    /// Correspondence of the best gluing, empty if a random cross matrix won.
    pub pairs: Vec<(usize, usize)>,
    pub eps: Option<S>,
    /// `true` when every correspondence was tried.
    pub exhaustive: bool,
}

/// Minimum over the searched gluings of the Prohorov distance between the
/// pushed-forward measures: an upper bound on the Gromov–Prohorov distance,
/// attained by correspondence gluings when the search is exhaustive.
pub fn glued_upper_bound<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, search: &GlueSearch) -> Result<GlueBound<S>> {
    const OP: &str = "glued_upper_bound";
    for s in [a, b] {
        let v = crate::mm_core::validate(s);
        if !v.is_empty() {
            return Err(Error::InvalidSpace { op: OP, violations: v });
        }
    }
    let pairs: Vec<(usize, usize)> = (0..a.len())
        .flat_map(|x| (0..b.len()).map(move |y| (x, y)))
        .filter(|&(x, y)| a.weight(x).is_positive() && b.weight(y).is_positive())
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let exhaustive = pairs.len() <= search.full_search_pairs;
    let subsets: Vec<u128> = if exhaustive {
        (1..(1u128 << pairs.len())).collect()
    } else {
        (0..search.random_subsets)
            .map(|_| loop {
                let m: u128 = (0..pairs.len()).filter(|_| rng.gen_bool(0.5)).fold(0, |m, k| m | (1 << k));
                if m != 0 {
                    break m;
                }
            })
            .collect()
    };

    let two = S::from_int(2);
    let mut best: Option<GlueBound<S>> = None;
    for mask in subsets {
        let k: Vec<(usize, usize)> = (0..pairs.len()).filter(|&i| mask & (1 << i) != 0).map(|i| pairs[i]).collect();
        let eps = distortion(&k, a, b) / two.clone();
        if let Some(b) = &best {
            if eps >= b.value {
                continue;
            }
        }
        let value = build_glued_space(a, b, &k, &eps)?.prohorov(a, b)?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(GlueBound { value, pairs: k, eps: Some(eps), exhaustive });
        }
    }

    let reach = a.diameter().max_of(b.diameter()) / two;
    for _ in 0..search.random_cross {
        let raw: Vec<Vec<S>> = (0..a.len())
            .map(|_| {
                (0..b.len())
                    .map(|_| reach.clone() + reach.clone() * S::from_rational(&Rational::new(rng.gen_range(0..=8), 8)))
                    .collect()
            })
            .collect();
        let closed = min_plus_closure(a, b, &raw);
        let glued = GluedSpace::from_cross(a, b, &closed)?;
        if !check_triangle(&glued).is_empty() {
            return Err(Error::Internal { op: OP, detail: "closed random gluing violates the triangle inequality".into() });
        }
        let value = glued.prohorov(a, b)?;
        if best.as_ref().is_none_or(|b| value < b.value) {
            best = Some(GlueBound { value, pairs: Vec::new(), eps: None, exhaustive });
        }
    }
    best.ok_or_else(|| Error::Internal { op: OP, detail: "no gluing evaluated".into() })
}

/// `w'(x, y) = min over a, b of d_1(x, a) + w(a, b) + d_2(b, y)`.
fn min_plus_closure<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, w: &[Vec<S>]) -> Vec<Vec<S>> {
    (0..a.len())
        .map(|x| {
            (0..b.len())
                .map(|y| {
                    let mut m: Option<S> = None;
                    for p in 0..a.len() {
                        for q in 0..b.len() {
                            let v = a.dist(x, p).clone() + w[p][q].clone() + b.dist(q, y).clone();
                            m = Some(match m {
                                Some(c) => c.min_of(v),
                                None => v,
                            });
                        }
                    }
                    m.expect("spaces are nonempty")
                })
                .collect()
        })
        .collect()
}
