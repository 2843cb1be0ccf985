//! Prohorov distance between two probability vectors on one finite
//! (pseudo)metric space.
//!
//! Both routes reduce the infimum over `eps > 0` to the sorted distinct
//! distances `0 = r_0 < r_1 < ... < r_K`: for `eps` in `(r_k, r_{k+1}]` the
//! open neighbourhood `A^eps` equals the closed one `{d(A, .) <= r_k}`, so the
//! defining condition is a fixed threshold `g_k <= eps` on that interval and
//! the infimum is `r_k` if `g_k <= r_k`, `g_k` if `r_k < g_k <= r_{k+1}`, and
//! empty otherwise. The returned value is this infimum; the defining
//! condition itself may fail exactly at it.
//!
//! * [`prohorov_bruteforce`] takes `g_k = max_A mu(A) - nu(A^eps)` over all
//!   `2^n` subsets, in both directions.
//! * [`prohorov_flow`] takes `g_k = 1 - F_k` where `F_k` is the largest
//!   sub-coupling mass on pairs with `d <= r_k` (a bipartite max-flow grown
//!   incrementally as `k` increases).

use crate::error::{invalid, Error, Result};
use crate::flow::BipartiteTransport;
use crate::mm_core::{Coupling, FiniteMMSpace};
use crate::rational::Scalar;

/// Default limit on `n` for [`prohorov_bruteforce`].
pub const BRUTEFORCE_CAP: usize = 12;

/// Two probability vectors on one finite pseudometric space.
#[derive(Debug, Clone, PartialEq)]
pub struct CommonSpaceMeasures<S> {
    dist: Vec<Vec<S>>,
    mu: Vec<S>,
    nu: Vec<S>,
}

impl<S: Scalar> CommonSpaceMeasures<S> {
    /// Validates the metric axioms (zero distances between distinct points
    /// are allowed) and that both vectors are probability vectors.
    pub fn new(dist: Vec<Vec<S>>, mu: Vec<S>, nu: Vec<S>) -> Result<Self> {
        const OP: &str = "CommonSpaceMeasures::new";
        let n = dist.len();
        if n == 0 {
            return Err(invalid(OP, "dist", "no points"));
        }
        if dist.iter().any(|r| r.len() != n) {
            return Err(invalid(OP, "dist", "matrix is not square"));
        }
        for (name, w) in [("mu", &mu), ("nu", &nu)] {
            if w.len() != n {
                return Err(invalid(OP, if name == "mu" { "mu" } else { "nu" }, format!("length {} != {n}", w.len())));
            }
            if w.iter().any(|x| *x < -S::tolerance()) {
                return Err(invalid(OP, if name == "mu" { "mu" } else { "nu" }, "negative weight"));
            }
            let total = w.iter().fold(S::zero(), |a, b| a + b.clone());
            let ok = if S::EXACT { (total.clone() - S::one()).near_zero() } else { (total.to_f64() - 1.0).abs() <= 1e-9 };
            if !ok {
                return Err(invalid(OP, if name == "mu" { "mu" } else { "nu" }, format!("sums to {total}, not 1")));
            }
        }
        for i in 0..n {
            if !dist[i][i].near_zero() {
                return Err(invalid(OP, "dist", format!("d({i},{i}) != 0")));
            }
            for j in 0..n {
                if dist[i][j] < -S::tolerance() || !(dist[i][j].clone() - dist[j][i].clone()).near_zero() {
                    return Err(invalid(OP, "dist", format!("entry ({i},{j}) is negative or asymmetric")));
                }
                for k in 0..n {
                    if !dist[i][k].le_tol(&(dist[i][j].clone() + dist[j][k].clone())) {
                        return Err(invalid(OP, "dist", format!("triangle inequality fails at ({i},{j},{k})")));
                    }
                }
            }
        }
        Ok(CommonSpaceMeasures { dist, mu, nu })
    }

    /// The metric of `space` with two measures on it.
    pub fn on_space(space: &FiniteMMSpace<S>, mu: Vec<S>, nu: Vec<S>) -> Result<Self> {
        Self::new(space.matrix().to_vec(), mu, nu)
    }

    pub fn len(&self) -> usize {
        self.mu.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mu.is_empty()
    }

    pub fn dist(&self, i: usize, j: usize) -> &S {
        &self.dist[i][j]
    }

    pub fn mu(&self) -> &[S] {
        &self.mu
    }

    pub fn nu(&self) -> &[S] {
        &self.nu
    }

    pub fn swapped(&self) -> Self {
        CommonSpaceMeasures { dist: self.dist.clone(), mu: self.nu.clone(), nu: self.mu.clone() }
    }

    /// Sorted distinct distances, always starting with zero.
    pub fn thresholds(&self) -> Vec<S> {
        let mut t: Vec<S> = vec![S::zero()];
        for row in &self.dist {
            t.extend(row.iter().cloned());
        }
        t.sort_by(|a, b| a.partial_cmp(b).expect("distances are comparable"));
        t.dedup_by(|a, b| (a.clone() - b.clone()).near_zero());
        t
    }
}

/// Infimum over the interval structure described in the module docs, given
/// the per-interval thresholds `g_k`.
fn infimum_from_gaps<S: Scalar>(thresholds: &[S], gap: impl Fn(usize) -> S) -> S {
    for (k, r) in thresholds.iter().enumerate() {
        let g = gap(k);
        if g.le_tol(r) {
            return r.clone();
        }
        match thresholds.get(k + 1) {
            Some(next) if g.le_tol(next) => return g,
            Some(_) => continue,
            None => return g,
        }
    }
    unreachable!("threshold list is never empty")
}

/// Prohorov distance from the set definition, by enumerating all subsets.
pub fn prohorov_bruteforce<S: Scalar>(cm: &CommonSpaceMeasures<S>) -> Result<S> {
    prohorov_bruteforce_capped(cm, BRUTEFORCE_CAP)
}

pub fn prohorov_bruteforce_capped<S: Scalar>(cm: &CommonSpaceMeasures<S>, cap: usize) -> Result<S> {
    let n = cm.len();
    if n > cap.min(24) {
        return Err(Error::TooLarge { op: "prohorov_bruteforce", size: n, cap, hint: "use prohorov_flow" });
    }
    let thresholds = cm.thresholds();
    let one_way = |mu: &[S], nu: &[S]| infimum_from_gaps(&thresholds, |k| subset_gap(cm, mu, nu, &thresholds[k]));
    let a = one_way(&cm.mu, &cm.nu);
    let b = one_way(&cm.nu, &cm.mu);
    Ok(a.max_of(b))
}

/// `max_A mu(A) - nu({x : d(A, x) <= r})` over all subsets `A`.
fn subset_gap<S: Scalar>(cm: &CommonSpaceMeasures<S>, mu: &[S], nu: &[S], r: &S) -> S {
    let n = cm.len();
    let near: Vec<u32> = (0..n)
        .map(|x| (0..n).filter(|&y| cm.dist[x][y].le_tol(r)).fold(0u32, |m, y| m | (1 << y)))
        .collect();
    let full = 1usize << n;
    let mut mu_sum: Vec<S> = vec![S::zero(); full];
    let mut nu_sum: Vec<S> = vec![S::zero(); full];
    let mut hood: Vec<u32> = vec![0; full];
    let mut best = S::zero();
    for mask in 1..full {
        let low = mask.trailing_zeros() as usize;
        let rest = mask & (mask - 1);
        mu_sum[mask] = mu_sum[rest].clone() + mu[low].clone();
        nu_sum[mask] = nu_sum[rest].clone() + nu[low].clone();
        hood[mask] = hood[rest] | near[low];
    }
    for mask in 1..full {
        let g = mu_sum[mask].clone() - nu_sum[hood[mask] as usize].clone();
        if g > best {
            best = g;
        }
    }
    best
}

/// Prohorov distance from the coupling characterization, via max-flow.
pub fn prohorov_flow<S: Scalar>(cm: &CommonSpaceMeasures<S>) -> S {
    let thresholds = cm.thresholds();
    let masses = flow_masses(cm, &thresholds);
    infimum_from_gaps(&thresholds, |k| S::one() - masses[k].clone())
}

/// `F_k` for every threshold: the largest sub-coupling mass on `d <= r_k`.
fn flow_masses<S: Scalar>(cm: &CommonSpaceMeasures<S>, thresholds: &[S]) -> Vec<S> {
    let n = cm.len();
    let mut pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| cm.mu[i].is_positive() && cm.nu[j].is_positive())
        .collect();
    pairs.sort_by(|a, b| cm.dist[a.0][a.1].partial_cmp(&cm.dist[b.0][b.1]).expect("comparable"));
    let mut transport = BipartiteTransport::new(&cm.mu, &cm.nu);
    let mut next = 0;
    let mut out = Vec::with_capacity(thresholds.len());
    for r in thresholds {
        while next < pairs.len() && cm.dist[pairs[next].0][pairs[next].1].le_tol(r) {
            transport.allow(pairs[next].0, pairs[next].1);
            next += 1;
        }
        out.push(transport.max_mass());
    }
    out
}

/// A full coupling placing at most `eps` mass on pairs at distance `>= eps`,
/// or `None` if no such coupling exists.
pub fn coupling_within<S: Scalar>(cm: &CommonSpaceMeasures<S>, eps: &S) -> Option<Coupling<S>> {
    let n = cm.len();
    let mut transport = BipartiteTransport::new(&cm.mu, &cm.nu);
    for i in 0..n {
        for j in 0..n {
            if cm.dist[i][j] < *eps && cm.mu[i].is_positive() && cm.nu[j].is_positive() {
                transport.allow(i, j);
            }
        }
    }
    let mass = transport.max_mass();
    if !(S::one() - mass).le_tol(eps) {
        return None;
    }
    let plan = transport.plan();
    let sub = Coupling::new(plan, &cm.mu, &cm.nu).ok()?;
    Some(sub.complete(&cm.mu, &cm.nu))
}

/// Total-variation distance `max_A |mu(A) - nu(A)|`.
pub fn total_variation<S: Scalar>(mu: &[S], nu: &[S]) -> S {
    mu.iter()
        .zip(nu)
        .map(|(a, b)| (a.clone() - b.clone()).max_of(S::zero()))
        .fold(S::zero(), |x, y| x + y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mm_core::sample_mm_space;
    use crate::rational::Rational;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    fn two_points() -> Vec<Vec<Rational>> {
        vec![vec![Rational::ZERO, Rational::ONE], vec![Rational::ONE, Rational::ZERO]]
    }

    fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
        let raw: Vec<i128> = (0..n).map(|_| rng.gen_range(0..=4)).collect();
        let total: i128 = raw.iter().sum();
        if total == 0 {
            let mut v = vec![Rational::ZERO; n];
            v[0] = Rational::ONE;
            return v;
        }
        raw.iter().map(|&w| Rational::new(w, total)).collect()
    }

    #[test]
    fn identical_measures_are_at_distance_zero() {
        let cm = CommonSpaceMeasures::new(two_points(), vec![q(1, 3), q(2, 3)], vec![q(1, 3), q(2, 3)]).unwrap();
        assert_eq!(prohorov_bruteforce(&cm).unwrap(), Rational::ZERO);
        assert_eq!(prohorov_flow(&cm), Rational::ZERO);
    }

    #[test]
    fn point_masses_at_distance_one() {
        let cm = CommonSpaceMeasures::new(two_points(), vec![Rational::ONE, Rational::ZERO], vec![Rational::ZERO, Rational::ONE])
            .unwrap();
        assert_eq!(prohorov_bruteforce(&cm).unwrap(), Rational::ONE);
        assert_eq!(prohorov_flow(&cm), Rational::ONE);
    }

    #[test]
    fn small_mass_gap() {
        let cm =
            CommonSpaceMeasures::new(two_points(), vec![q(9, 10), q(1, 10)], vec![Rational::ONE, Rational::ZERO]).unwrap();
        assert_eq!(prohorov_bruteforce(&cm).unwrap(), q(1, 10));
        assert_eq!(prohorov_flow(&cm), q(1, 10));
    }

    #[test]
    fn far_apart_points_cap_at_one() {
        let d = vec![vec![Rational::ZERO, Rational::from(5)], vec![Rational::from(5), Rational::ZERO]];
        let cm = CommonSpaceMeasures::new(d, vec![Rational::ONE, Rational::ZERO], vec![Rational::ZERO, Rational::ONE]).unwrap();
        assert_eq!(prohorov_flow(&cm), Rational::ONE);
        assert_eq!(prohorov_bruteforce(&cm).unwrap(), Rational::ONE);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(CommonSpaceMeasures::new(two_points(), vec![q(1, 2), q(1, 3)], vec![q(1, 2), q(1, 2)]).is_err());
        assert!(CommonSpaceMeasures::new(two_points(), vec![Rational::ONE], vec![q(1, 2), q(1, 2)]).is_err());
    }

    #[test]
    fn bruteforce_cap() {
        let cm = CommonSpaceMeasures::new(two_points(), vec![q(1, 2), q(1, 2)], vec![q(1, 2), q(1, 2)]).unwrap();
        assert!(matches!(prohorov_bruteforce_capped(&cm, 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn flow_equals_bruteforce_and_bounds_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for seed in 0..300 {
            let space = sample_mm_space(seed, 6, Rational::from(2));
            let n = space.len();
            let cm = CommonSpaceMeasures::on_space(&space, random_measure(&mut rng, n), random_measure(&mut rng, n)).unwrap();
            let flow = prohorov_flow(&cm);
            assert_eq!(flow, prohorov_bruteforce(&cm).unwrap(), "seed {seed}");
            assert_eq!(flow, prohorov_flow(&cm.swapped()));
            assert!(flow <= Rational::ONE);
            assert!(flow <= total_variation(cm.mu(), cm.nu()));
            let supp_diam = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| cm.mu()[i].is_positive() && cm.nu()[j].is_positive())
                .map(|(i, j)| *cm.dist(i, j))
                .max()
                .unwrap();
            assert!(flow <= supp_diam);
        }
    }

    #[test]
    fn witness_coupling_is_good_just_above_the_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for seed in 0..100 {
            let space = sample_mm_space(seed, 5, Rational::ONE);
            let n = space.len();
            let cm = CommonSpaceMeasures::on_space(&space, random_measure(&mut rng, n), random_measure(&mut rng, n)).unwrap();
            let d = prohorov_flow(&cm);
            let eps = d + q(1, 1000);
            let c = coupling_within(&cm, &eps).expect("coupling exists above the infimum");
            assert!(c.mass_where(|i, j| *cm.dist(i, j) >= eps) <= eps);
            if d > Rational::ZERO {
                let below = d - d.min(q(1, 1000)) * q(1, 2);
                assert!(coupling_within(&cm, &below).is_none());
            }
        }
    }

    #[test]
    fn float_mode_matches_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..50 {
            let space = sample_mm_space(seed, 5, Rational::ONE);
            let n = space.len();
            let (mu, nu) = (random_measure(&mut rng, n), random_measure(&mut rng, n));
            let exact = prohorov_flow(&CommonSpaceMeasures::on_space(&space, mu.clone(), nu.clone()).unwrap());
            let fs = space.to_f64();
            let approx = prohorov_flow(
                &CommonSpaceMeasures::on_space(&fs, mu.iter().map(|x| x.to_f64()).collect(), nu.iter().map(|x| x.to_f64()).collect())
                    .unwrap(),
            );
            assert!((exact.to_f64() - approx).abs() < 1e-9);
        }
    }
}
