//! Gromov's box distance and the Gromov–Prohorov distance on finite
//! mm-spaces.
//!
//! # Reduction to correspondences
//!
//! A pair of parametrizations `phi_1, phi_2 : [0,1] -> X_i` induces the
//! coupling `xi(x, y) = Leb(phi_1 = x, phi_2 = y)`, and every coupling arises
//! this way. Both pullback distances are constant on the product of two
//! coupling cells, so the constraint `|r_1 - r_2| <= eps` on `S x S` only
//! depends on the set `K` of cells that `S` meets with positive measure: it
//! holds iff `distortion(K) <= eps`. Keeping the whole of each such cell
//! costs nothing and maximizes the kept mass, so
//!
//! ```text
//! box_lambda(X_1, X_2) = min over K of max(distortion(K), (1 - xi(K)) / lambda)
//! ```
//!
//! minimized over couplings too. For fixed `K` the best coupling puts as much
//! mass on `K` as any sub-coupling can, which is a bipartite max-flow
//! (`maxmass(K)`); a sub-coupling always extends to a full coupling because
//! both marginal defects have the same total. Only cells of positive-weight
//! points matter.
//!
//! # Search
//!
//! A set `K` is admissible at level `delta` iff it is a clique in the graph
//! joining pairs `(x, y), (x', y')` with `|d_1(x, x') - d_2(y, y')| <= delta`,
//! and `maxmass` grows with `K`, so only maximal cliques need evaluating.
//! Levels are visited in increasing order with Bron–Kerbosch enumeration;
//! branches are cut once `delta` or the mass bound `maxmass(R u P)` already
//! exceeds the incumbent. Among equally good sets the lexicographically
//! smallest sorted pair list seen is kept; the search stops once the
//! objective reaches 0.

mod glue;
mod parametrization;

use std::cmp::Ordering;

use serde::Serialize;

use crate::error::{invalid, Error, Result};
use crate::flow::{max_sub_coupling, max_sub_coupling_mass};
use crate::mm_core::{Coupling, FiniteMMSpace};
use crate::rational::{Rational, Scalar};

pub use glue::{build_glued_space, check_triangle, glued_upper_bound, GlueBound, GlueSearch, GluedSpace, FULL_SEARCH_PAIRS};
pub use parametrization::{box_of_parametrizations, coupling_to_parametrizations, IntervalParametrization, ParamBox};

/// Default cap on `n_1 * n_2` for exact optimization.
pub const DEFAULT_MAX_PAIRS: usize = 20;

/// Hard limit of the bitset representation.
const BITSET_LIMIT: usize = 128;

type Bits = u128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BoxConfig {
    /// Largest `n_1 * n_2` solved exactly; larger inputs get a heuristic
    /// upper bound.
    pub max_pairs: usize,
}

impl Default for BoxConfig {
    fn default() -> Self {
        BoxConfig { max_pairs: DEFAULT_MAX_PAIRS }
    }
}

/// A set of matched pairs with its distortion and the largest sub-coupling
/// mass it supports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correspondence<S> {
    pairs: Vec<(usize, usize)>,
    distortion: S,
    maxmass: S,
}

impl<S: Scalar> Correspondence<S> {
    pub fn new(mut pairs: Vec<(usize, usize)>, a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>) -> Result<Self> {
        pairs.sort_unstable();
        pairs.dedup();
        if let Some(&(x, y)) = pairs.iter().find(|&&(x, y)| x >= a.len() || y >= b.len()) {
            return Err(invalid("Correspondence::new", "pairs", format!("pair ({x},{y}) out of range")));
        }
        let distortion = distortion(&pairs, a, b);
        let maxmass = max_sub_coupling_mass(a.weights(), b.weights(), &pairs);
        Ok(Correspondence { pairs, distortion, maxmass })
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn distortion(&self) -> &S {
        &self.distortion
    }

    pub fn maxmass(&self) -> &S {
        &self.maxmass
    }

    /// `max(distortion, (1 - maxmass) / lambda)`.
    pub fn box_objective(&self, lambda: &S) -> S {
        objective(&self.distortion, &self.maxmass, lambda)
    }
}

/// `max |d_1(x, x') - d_2(y, y')|` over members of `pairs`; zero for at most
/// one pair.
pub fn distortion<S: Scalar>(pairs: &[(usize, usize)], a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>) -> S {
    let mut worst = S::zero();
    for (k, &(x, y)) in pairs.iter().enumerate() {
        for &(x2, y2) in &pairs[k + 1..] {
            let gap = (a.dist(x, x2).clone() - b.dist(y, y2).clone()).abs_val();
            if gap > worst {
                worst = gap;
            }
        }
    }
    worst
}

fn objective<S: Scalar>(distortion: &S, mass: &S, lambda: &S) -> S {
    let mass_term = (S::one() - mass.clone()) / lambda.clone();
    distortion.clone().max_of(mass_term.max_of(S::zero()))
}

/// Result of a box or Gromov–Prohorov computation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoxResult<S> {
    pub value: S,
    /// Optimal (or best found) correspondence.
    pub correspondence: Correspondence<S>,
    /// `false` when the inputs exceeded the exact cap and `value` is only an
    /// upper bound.
    pub exact: bool,
}

fn check_inputs<S: Scalar>(op: &'static str, a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, lambda: &S) -> Result<()> {
    for (field, s) in [("a", a), ("b", b)] {
        let v = crate::mm_core::validate(s);
        if !v.is_empty() {
            let _ = field;
            return Err(Error::InvalidSpace { op, violations: v });
        }
    }
    if !lambda.is_positive() {
        return Err(invalid(op, "lambda", "must be positive"));
    }
    Ok(())
}

/// Gromov's box distance with parameter `lambda`, optimized over
/// correspondences (see the module docs).
pub fn box_lambda<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, lambda: &S, config: &BoxConfig) -> Result<BoxResult<S>> {
    check_inputs("box_lambda", a, b, lambda)?;
    Ok(optimize(a, b, lambda, config))
}

/// Gromov–Prohorov distance as half the box distance with `lambda = 1/2`,
/// i.e. `min over K of max(distortion(K) / 2, 1 - maxmass(K))`.
pub fn gromov_prohorov<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, config: &BoxConfig) -> Result<BoxResult<S>> {
    let half = S::from_rational(&Rational::new(1, 2));
    let mut r = box_lambda(a, b, &half, config)?;
    r.value = r.value * half;
    Ok(r)
}

/// Gromov–Prohorov upper bound from the greedy heuristic alone.
pub fn gromov_prohorov_heuristic<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>) -> Result<BoxResult<S>> {
    let half = S::from_rational(&Rational::new(1, 2));
    check_inputs("gromov_prohorov", a, b, &half)?;
    let mut r = heuristic(a, b, &half);
    r.value = r.value * half;
    Ok(r)
}

/// The optimal sub-coupling supported on `pairs`, completed to a full
/// coupling of the two weight vectors.
pub fn coupling_for_correspondence<S: Scalar>(
    a: &FiniteMMSpace<S>,
    b: &FiniteMMSpace<S>,
    pairs: &[(usize, usize)],
) -> Coupling<S> {
    let (_, plan) = max_sub_coupling(a.weights(), b.weights(), pairs);
    let sub = Coupling::new(plan, a.weights(), b.weights()).expect("max-flow plan respects the marginals");
    sub.complete(a.weights(), b.weights())
}

struct Problem<'a, S> {
    a: &'a FiniteMMSpace<S>,
    b: &'a FiniteMMSpace<S>,
    lambda: &'a S,
    pairs: Vec<(usize, usize)>,
    conflict: Vec<Vec<S>>,
}

impl<'a, S: Scalar> Problem<'a, S> {
    fn new(a: &'a FiniteMMSpace<S>, b: &'a FiniteMMSpace<S>, lambda: &'a S) -> Self {
        let pairs: Vec<(usize, usize)> = (0..a.len())
            .flat_map(|x| (0..b.len()).map(move |y| (x, y)))
            .filter(|&(x, y)| a.weight(x).is_positive() && b.weight(y).is_positive())
            .collect();
        let conflict = pairs
            .iter()
            .map(|&(x, y)| {
                pairs.iter().map(|&(x2, y2)| (a.dist(x, x2).clone() - b.dist(y, y2).clone()).abs_val()).collect()
            })
            .collect();
        Problem { a, b, lambda, pairs, conflict }
    }

    fn members(&self, set: Bits) -> Vec<(usize, usize)> {
        (0..self.pairs.len()).filter(|&k| set & (1 << k) != 0).map(|k| self.pairs[k]).collect()
    }

    fn mass(&self, set: Bits) -> S {
        max_sub_coupling_mass(self.a.weights(), self.b.weights(), &self.members(set))
    }

    fn evaluate(&self, set: Bits) -> (S, Vec<(usize, usize)>) {
        let members = self.members(set);
        let dis = distortion(&members, self.a, self.b);
        let mass = max_sub_coupling_mass(self.a.weights(), self.b.weights(), &members);
        (objective(&dis, &mass, self.lambda), members)
    }

    fn correspondence(&self, members: Vec<(usize, usize)>) -> Correspondence<S> {
        Correspondence::new(members, self.a, self.b).expect("indices come from the problem")
    }
}

struct Incumbent<S> {
    value: S,
    members: Vec<(usize, usize)>,
}

impl<S: Scalar> Incumbent<S> {
    fn offer(&mut self, value: S, members: Vec<(usize, usize)>) {
        let better = match value.partial_cmp(&self.value) {
            Some(Ordering::Less) => true,
            Some(Ordering::Equal) => members < self.members,
            _ => false,
        };
        if better {
            self.value = value;
            self.members = members;
        }
    }
}

fn optimize<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, lambda: &S, config: &BoxConfig) -> BoxResult<S> {
    let problem = Problem::new(a, b, lambda);
    let n = problem.pairs.len();
    if n > config.max_pairs.min(BITSET_LIMIT) {
        return heuristic(a, b, lambda);
    }
    let all: Bits = if n == BITSET_LIMIT { Bits::MAX } else { (1 << n) - 1 };
    let (v, m) = problem.evaluate(all);
    let mut best = Incumbent { value: v, members: m };

    let mut levels: Vec<S> = problem.conflict.iter().flatten().cloned().collect();
    levels.push(S::zero());
    levels.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    levels.dedup_by(|x, y| (x.clone() - y.clone()).near_zero());

    for delta in &levels {
        if *delta > best.value || best.value.near_zero() {
            break;
        }
        let adjacency: Vec<Bits> = (0..n)
            .map(|p| (0..n).filter(|&q| q != p && problem.conflict[p][q].le_tol(delta)).fold(0, |m, q| m | (1 << q)))
            .collect();
        bron_kerbosch(&problem, &adjacency, delta, 0, all, 0, &mut best);
    }
    let value = best.value.clone();
    BoxResult { value, correspondence: problem.correspondence(best.members), exact: true }
}

fn bron_kerbosch<S: Scalar>(
    problem: &Problem<'_, S>,
    adjacency: &[Bits],
    delta: &S,
    clique: Bits,
    candidates: Bits,
    excluded: Bits,
    best: &mut Incumbent<S>,
) {
    if *delta > best.value || best.value.near_zero() {
        return;
    }
    if candidates == 0 {
        if excluded == 0 {
            let (v, m) = problem.evaluate(clique);
            best.offer(v, m);
        }
        return;
    }
    let reachable = problem.mass(clique | candidates);
    if objective(&S::zero(), &reachable, problem.lambda) > best.value {
        return;
    }
    let pivot_pool = candidates | excluded;
    let pivot = (0..adjacency.len())
        .filter(|&u| pivot_pool & (1 << u) != 0)
        .max_by_key(|&u| (adjacency[u] & candidates).count_ones())
        .expect("pool is nonempty");
    let mut todo = candidates & !adjacency[pivot];
    let (mut candidates, mut excluded) = (candidates, excluded);
    while todo != 0 {
        let v = todo.trailing_zeros() as usize;
        let bit: Bits = 1 << v;
        todo &= !bit;
        bron_kerbosch(
            problem,
            adjacency,
            delta,
            clique | bit,
            candidates & adjacency[v],
            excluded & adjacency[v],
            best,
        );
        candidates &= !bit;
        excluded |= bit;
    }
}

/// Greedy removal from the full pair set followed by single-pair toggling.
/// Returns an upper bound marked inexact.
fn heuristic<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, lambda: &S) -> BoxResult<S> {
    let problem = Problem::new(a, b, lambda);
    let pairs = problem.pairs.clone();
    improve(a, b, lambda, &pairs)
}

/// Upper bound on the box distance from correspondences inside `start`:
/// pairs are peeled off in order of their worst conflict with the rest,
/// the best prefix is kept, then single pairs of `start` are toggled while
/// that helps. The result is marked inexact.
pub fn improve_correspondence<S: Scalar>(
    a: &FiniteMMSpace<S>,
    b: &FiniteMMSpace<S>,
    lambda: &S,
    start: &[(usize, usize)],
) -> Result<BoxResult<S>> {
    check_inputs("improve_correspondence", a, b, lambda)?;
    if start.is_empty() {
        return Err(invalid("improve_correspondence", "start", "correspondence is empty"));
    }
    if let Some(&(x, y)) = start.iter().find(|&&(x, y)| x >= a.len() || y >= b.len()) {
        return Err(invalid("improve_correspondence", "start", format!("pair ({x},{y}) out of range")));
    }
    Ok(improve(a, b, lambda, start))
}

fn improve<S: Scalar>(a: &FiniteMMSpace<S>, b: &FiniteMMSpace<S>, lambda: &S, start: &[(usize, usize)]) -> BoxResult<S> {
    let mut pool = start.to_vec();
    pool.sort_unstable();
    pool.dedup();
    let eval = |k: &[(usize, usize)]| {
        let dis = distortion(k, a, b);
        let mass = max_sub_coupling_mass(a.weights(), b.weights(), k);
        objective(&dis, &mass, lambda)
    };
    let conflict = |p: &(usize, usize), q: &(usize, usize)| (a.dist(p.0, q.0).clone() - b.dist(p.1, q.1).clone()).abs_val();

    let mut best = Incumbent { value: eval(&pool), members: pool.clone() };
    let mut current = pool.clone();
    while current.len() > 1 {
        let worst = (0..current.len())
            .map(|i| {
                let (mut max, mut sum) = (S::zero(), S::zero());
                for (j, q) in current.iter().enumerate() {
                    if j != i {
                        let c = conflict(&current[i], q);
                        sum = sum + c.clone();
                        max = max.max_of(c);
                    }
                }
                (max, sum, i)
            })
            .reduce(|x, y| {
                let key = |t: &(S, S, usize)| (t.0.clone(), t.1.clone());
                match key(&y).partial_cmp(&key(&x)) {
                    Some(Ordering::Greater) => y,
                    _ => x,
                }
            })
            .expect("at least two pairs");
        if worst.0.near_zero() {
            break;
        }
        current.remove(worst.2);
        best.offer(eval(&current), current.clone());
    }

    let mut current = best.members.clone();
    let mut improved = true;
    while improved {
        improved = false;
        for p in &pool {
            let mut trial = current.clone();
            match trial.binary_search(p) {
                Ok(i) => {
                    trial.remove(i);
                }
                Err(i) => trial.insert(i, *p),
            }
            if trial.is_empty() {
                continue;
            }
            let v = eval(&trial);
            if v < best.value {
                best.offer(v, trial.clone());
                current = trial;
                improved = true;
            }
        }
    }
    let value = best.value.clone();
    let correspondence = Correspondence::new(best.members, a, b).expect("pairs were checked");
    BoxResult { value, correspondence, exact: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mm_core::{are_isomorphic, canonicalize, sample_mm_space};

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    fn r(n: i128) -> Rational {
        Rational::from(n)
    }

    fn two_point(dist: Rational, w: Rational) -> FiniteMMSpace {
        FiniteMMSpace::from_matrix(vec![vec![r(0), dist], vec![dist, r(0)]], vec![w, r(1) - w]).unwrap()
    }

    /// Subset enumeration with max-mass from a min-cut formula.
    fn box_oracle(a: &FiniteMMSpace, b: &FiniteMMSpace, lambda: Rational) -> Rational {
        let pairs: Vec<(usize, usize)> = (0..a.len()).flat_map(|x| (0..b.len()).map(move |y| (x, y))).collect();
        let mut best = None::<Rational>;
        for mask in 1u32..1 << pairs.len() {
            let k: Vec<_> = (0..pairs.len()).filter(|i| mask & (1 << i) != 0).map(|i| pairs[i]).collect();
            let mass = (0u32..1 << a.len())
                .map(|s| {
                    let out: Rational = (0..a.len()).filter(|x| s & (1 << x) == 0).map(|x| *a.weight(x)).sum();
                    let nb: Rational = (0..b.len())
                        .filter(|&y| k.iter().any(|&(x, yy)| yy == y && s & (1 << x) != 0))
                        .map(|y| *b.weight(y))
                        .sum();
                    out + nb
                })
                .min()
                .unwrap();
            let mut dis = Rational::ZERO;
            for &(x, y) in &k {
                for &(x2, y2) in &k {
                    dis = dis.max((*a.dist(x, x2) - *b.dist(y, y2)).abs());
                }
            }
            let v = dis.max((Rational::ONE - mass) / lambda);
            best = Some(best.map_or(v, |b| b.min(v)));
        }
        best.unwrap()
    }

    #[test]
    fn identical_spaces_are_at_distance_zero() {
        for seed in 0..20 {
            let s = sample_mm_space(seed, 4, r(2));
            assert_eq!(box_lambda(&s, &s, &r(1), &BoxConfig::default()).unwrap().value, Rational::ZERO);
            assert_eq!(gromov_prohorov(&s, &s, &BoxConfig::default()).unwrap().value, Rational::ZERO);
        }
    }

    #[test]
    fn point_versus_weighted_pair() {
        let p = FiniteMMSpace::point();
        let s = two_point(r(1), q(3, 4));
        let boxed = box_lambda(&p, &s, &q(1, 2), &BoxConfig::default()).unwrap();
        assert_eq!(boxed.value, q(1, 2));
        assert_eq!(boxed.correspondence.pairs(), &[(0, 0)]);
        assert_eq!(gromov_prohorov(&p, &s, &BoxConfig::default()).unwrap().value, q(1, 4));
        assert_eq!(box_oracle(&p, &s, q(1, 2)), q(1, 2));
    }

    #[test]
    fn matches_subset_enumeration_oracle() {
        for seed in 0..120 {
            let a = sample_mm_space(2 * seed, 3, r(2));
            let b = sample_mm_space(2 * seed + 1, 3, r(2));
            for lambda in [q(1, 4), q(1, 2), r(1), r(2)] {
                let v = box_lambda(&a, &b, &lambda, &BoxConfig::default()).unwrap();
                assert_eq!(v.value, box_oracle(&a, &b, lambda), "seed {seed} lambda {lambda}");
                assert_eq!(v.correspondence.box_objective(&lambda), v.value);
            }
        }
    }

    #[test]
    fn lambda_monotonicity_and_box_comparison() {
        let lambdas = [q(1, 4), q(1, 2), r(1), r(2)];
        for seed in 0..60 {
            let a = sample_mm_space(1000 + seed, 4, r(1));
            let b = sample_mm_space(2000 + seed, 4, r(1));
            let vals: Vec<Rational> =
                lambdas.iter().map(|l| box_lambda(&a, &b, l, &BoxConfig::default()).unwrap().value).collect();
            for i in 0..4 {
                for j in 0..i {
                    let (big, small) = (lambdas[i], lambdas[j]);
                    assert!(vals[i] <= vals[j]);
                    assert!(vals[j] <= big / small * vals[i]);
                }
            }
            let gp = gromov_prohorov(&a, &b, &BoxConfig::default()).unwrap().value;
            assert!(gp <= vals[2] && vals[2] <= r(2) * gp);
        }
    }

    #[test]
    fn splitting_points_changes_nothing() {
        for seed in 0..30 {
            let a = sample_mm_space(300 + seed, 3, r(2));
            let b = sample_mm_space(400 + seed, 3, r(2));
            let split = a.split_point(0, &q(2, 5));
            let cfg = BoxConfig::default();
            assert_eq!(gromov_prohorov(&a, &b, &cfg).unwrap().value, gromov_prohorov(&split, &b, &cfg).unwrap().value);
            assert_eq!(box_lambda(&a, &b, &r(1), &cfg).unwrap().value, box_lambda(&split, &b, &r(1), &cfg).unwrap().value);
        }
    }

    #[test]
    fn zero_distance_iff_isomorphic() {
        let cfg = BoxConfig::default();
        for seed in 0..40 {
            let a = sample_mm_space(500 + seed, 3, r(1));
            let b = sample_mm_space(600 + seed, 3, r(1));
            let perm: Vec<usize> = (0..a.len()).rev().collect();
            let a2 = a.restrict_unchecked(&perm);
            assert_eq!(gromov_prohorov(&a, &a2, &cfg).unwrap().value, Rational::ZERO);
            let zero = gromov_prohorov(&a, &b, &cfg).unwrap().value.is_zero();
            assert_eq!(zero, are_isomorphic(&canonicalize(&a), &canonicalize(&b)));
        }
    }

    #[test]
    fn heuristic_is_an_upper_bound() {
        for seed in 0..30 {
            let a = sample_mm_space(700 + seed, 4, r(2));
            let b = sample_mm_space(800 + seed, 4, r(2));
            let exact = gromov_prohorov(&a, &b, &BoxConfig::default()).unwrap();
            let h = gromov_prohorov_heuristic(&a, &b).unwrap();
            assert!(!h.exact);
            assert!(h.value >= exact.value);
        }
    }

    #[test]
    fn over_cap_falls_back_to_bound() {
        let a = sample_mm_space(1, 6, r(1));
        let b = sample_mm_space(2, 6, r(1));
        let tight = BoxConfig { max_pairs: 1 };
        let r1 = gromov_prohorov(&a, &b, &tight).unwrap();
        if a.len() * b.len() > 1 {
            assert!(!r1.exact);
        }
    }

    #[test]
    fn rejects_nonpositive_lambda_and_invalid_spaces() {
        let p = FiniteMMSpace::<Rational>::point();
        assert!(box_lambda(&p, &p, &r(0), &BoxConfig::default()).is_err());
        let bad = FiniteMMSpace::new_unchecked(vec!["x".into()], vec![vec![r(0)]], vec![q(1, 2)]);
        assert!(box_lambda(&p, &bad, &r(1), &BoxConfig::default()).is_err());
    }

    #[test]
    fn float_mode_agrees() {
        for seed in 0..20 {
            let a = sample_mm_space(900 + seed, 3, r(2));
            let b = sample_mm_space(950 + seed, 3, r(2));
            let e = gromov_prohorov(&a, &b, &BoxConfig::default()).unwrap().value.to_f64();
            let f = gromov_prohorov(&a.to_f64(), &b.to_f64(), &BoxConfig::default()).unwrap().value;
            assert!((e - f).abs() < 1e-9);
        }
    }
}
