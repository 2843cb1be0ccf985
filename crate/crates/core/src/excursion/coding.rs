//! Extraction of the finite mm-space `(T_h, d_h, mu_h)` coded by an
//! excursion.
//!
//! `[0,1]` is cut into segments, each segment is represented by one time in
//! it, segments whose representatives are at `d_h`-distance 0 are merged and
//! each tree point carries the total length of its segments.
//!
//! * Piecewise constant: `d_h` vanishes inside every open piece, so one
//!   segment per piece gives the coded space exactly (breakpoints are
//!   Lebesgue-null).
//! * Piecewise linear: segments are cut wherever `h` crosses a critical
//!   level (heights of local extrema and plateaus, `h(0)` and `h(1)`, plus an
//!   optional level grid). Inside a segment `h` is monotone, so `d_h(s, t) =
//!   |h(s) - h(t)|` there, and the segment maps onto an arc of the tree. The
//!   representative is the time at the middle height. Segments on the same
//!   arc between the same levels then share a tree point. Moving every `t`
//!   to its representative moves it by at most half the height variation of
//!   its segment, which bounds the Gromov–Prohorov distance to the exact
//!   coded tree; that bound is reported.
//!
//! Non-critical breakpoints (where the slope keeps its sign) are not cut, so
//! inserting redundant breakpoints changes nothing.

use std::collections::BTreeSet;

use crate::mm_core::FiniteMMSpace;
use crate::rational::{Rational, Scalar};

use super::{Excursion, ExcursionKind};

/// Optional refinement of the coding.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Resolution {
    /// Extra cut times in `(0,1)`.
    pub cuts: Vec<Rational>,
    /// If set, every multiple of this height is also a critical level.
    pub level_step: Option<Rational>,
}

/// The coded finite tree.
#[derive(Debug, Clone, PartialEq)]
pub struct CodedTree {
    pub space: FiniteMMSpace<Rational>,
    /// Segments `[a, b]` of the partition, in order.
    pub segments: Vec<(Rational, Rational)>,
    /// Tree point of each segment.
    pub projection: Vec<usize>,
    /// Representative time of each tree point.
    pub representatives: Vec<Rational>,
    /// Upper bound on the Gromov–Prohorov distance between `space` and the
    /// exact coded tree (0 for piecewise-constant input).
    pub bound: Rational,
}

/// Codes `h` as a finite tree.
pub fn code_excursion(h: &Excursion, resolution: &Resolution) -> CodedTree {
    let mut cuts: BTreeSet<Rational> = critical_cuts(h, resolution.level_step.as_ref()).into_iter().collect();
    if h.kind() == ExcursionKind::PiecewiseConstant {
        cuts.extend(h.breakpoints().iter().copied());
    }
    cuts.extend(resolution.cuts.iter().copied().filter(|t| t.is_positive() && *t < Rational::ONE));
    let cuts: Vec<Rational> = cuts.into_iter().collect();
    let segments: Vec<(Rational, Rational)> = cuts.windows(2).map(|w| (w[0], w[1])).collect();

    let two = Rational::from(2);
    let mut bound = Rational::ZERO;
    let reps: Vec<Rational> = segments
        .iter()
        .map(|&(a, b)| {
            let mid = (a + b) / two;
            if h.kind() == ExcursionKind::PiecewiseConstant {
                return mid;
            }
            let (ha, hb) = (h.value_at(&a), h.value_at(&b));
            bound = bound.max((hb - ha).abs() / two);
            if ha == hb {
                mid
            } else {
                time_at_level(h, &a, &b, &((ha + hb) / two))
            }
        })
        .collect();

    let mut leaders: Vec<usize> = Vec::new();
    let mut projection = Vec::with_capacity(segments.len());
    let mut mass: Vec<Rational> = Vec::new();
    for (k, &(a, b)) in segments.iter().enumerate() {
        match leaders.iter().position(|&l| h.dh_unchecked(&reps[l], &reps[k]).is_zero()) {
            Some(p) => {
                projection.push(p);
                mass[p] += b - a;
            }
            None => {
                projection.push(leaders.len());
                leaders.push(k);
                mass.push(b - a);
            }
        }
    }
    let representatives: Vec<Rational> = leaders.iter().map(|&l| reps[l]).collect();
    let dist: Vec<Vec<Rational>> = representatives
        .iter()
        .map(|s| representatives.iter().map(|t| h.dh_unchecked(s, t)).collect())
        .collect();
    let labels = representatives.iter().map(|t| format!("t={t}")).collect();
    let space = FiniteMMSpace::new(labels, dist, mass).expect("d_h restricted to representatives is a pseudometric");
    CodedTree { space, segments, projection, representatives, bound }
}

/// Cut times of the piecewise-linear coding: every time at which `h` is at a
/// critical level, plus 0 and 1. For piecewise-constant input only 0 and 1.
pub fn critical_cuts(h: &Excursion, level_step: Option<&Rational>) -> Vec<Rational> {
    let mut cuts: BTreeSet<Rational> = [Rational::ZERO, Rational::ONE].into_iter().collect();
    if h.kind() == ExcursionKind::PiecewiseConstant {
        return cuts.into_iter().collect();
    }
    let levels = critical_levels(h, level_step);
    let b = h.breakpoints();
    for i in 0..h.pieces() {
        let (u, v) = h.piece_ends(i);
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        for level in levels.range(lo..=hi) {
            if u == v {
                cuts.insert(b[i]);
                cuts.insert(b[i + 1]);
            } else {
                cuts.insert(b[i] + (b[i + 1] - b[i]) * (*level - u) / (v - u));
            }
        }
    }
    cuts.into_iter().collect()
}

fn critical_levels(h: &Excursion, level_step: Option<&Rational>) -> BTreeSet<Rational> {
    let m = h.pieces();
    let sign = |i: usize| {
        let (u, v) = h.piece_ends(i);
        u.cmp(&v)
    };
    let mut levels: BTreeSet<Rational> = [h.at_breakpoint(0), h.at_breakpoint(m)].into_iter().collect();
    for i in 1..m {
        if sign(i - 1) != sign(i) || sign(i) == std::cmp::Ordering::Equal {
            levels.insert(h.at_breakpoint(i));
        }
    }
    if let Some(step) = level_step.filter(|s| s.is_positive()) {
        let top = h.max_height();
        let mut l = *step;
        while l < top {
            levels.insert(l);
            l += *step;
        }
    }
    levels
}

/// A time in `[a, b]` where the monotone piecewise-linear `h` equals `level`.
fn time_at_level(h: &Excursion, a: &Rational, b: &Rational, level: &Rational) -> Rational {
    let mut knots = vec![*a];
    knots.extend(h.breakpoints().iter().copied().filter(|t| a < t && t < b));
    knots.push(*b);
    for w in knots.windows(2) {
        let (u, v) = (h.value_at(&w[0]), h.value_at(&w[1]));
        let (lo, hi) = if u <= v { (u, v) } else { (v, u) };
        if lo <= *level && *level <= hi {
            if u == v {
                return w[0];
            }
            return w[0] + (w[1] - w[0]) * (*level - u) / (v - u);
        }
    }
    unreachable!("a monotone segment attains every level between its end values")
}

/// Quadruples `i < j < k < l` violating the four point condition: among
/// `d_ij + d_kl`, `d_ik + d_jl`, `d_il + d_jk` the two largest must agree.
pub fn four_point_check<S: Scalar>(space: &FiniteMMSpace<S>) -> Vec<[usize; 4]> {
    let n = space.len();
    let d = |i: usize, j: usize| space.dist(i, j).clone();
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            for k in j + 1..n {
                for l in k + 1..n {
                    let mut sums = [d(i, j) + d(k, l), d(i, k) + d(j, l), d(i, l) + d(j, k)];
                    sums.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
                    if !(sums[2].clone() - sums[1].clone()).near_zero() {
                        out.push([i, j, k, l]);
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::sample_excursion;
    use crate::mm_core::{are_isomorphic, canonicalize};

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    #[test]
    fn zero_excursion_codes_a_point() {
        let t = code_excursion(&Excursion::zero(), &Resolution::default());
        assert_eq!(t.space.len(), 1);
        assert_eq!(t.space.weights(), &[Rational::ONE]);
        assert_eq!(t.bound, Rational::ZERO);
    }

    #[test]
    fn grid_indicator_codes_a_star() {
        for n in 1..=6 {
            let t = code_excursion(&Excursion::grid_indicator(n).unwrap(), &Resolution::default());
            assert_eq!(t.space.len(), n as usize);
            for i in 0..n as usize {
                assert_eq!(t.space.weight(i), &q(1, n as i128));
                for j in 0..n as usize {
                    let expect = if i == j { Rational::ZERO } else { Rational::from(2) };
                    assert_eq!(t.space.dist(i, j), &expect);
                }
            }
        }
    }

    #[test]
    fn tent_codes_a_path_with_uniform_mass() {
        let t = code_excursion(&Excursion::tent(), &Resolution { cuts: vec![], level_step: Some(q(1, 4)) });
        assert_eq!(t.space.len(), 4);
        assert!(t.space.weights().iter().all(|w| *w == q(1, 4)));
        assert_eq!(t.bound, q(1, 8));
        let heights: Vec<Rational> = t.representatives.iter().map(|r| Excursion::tent().eval(r).unwrap()).collect();
        assert_eq!(heights, vec![q(1, 8), q(3, 8), q(5, 8), q(7, 8)]);
        assert_eq!(*t.space.dist(0, 3), q(3, 4));
    }

    #[test]
    fn four_point_condition_holds_for_codes() {
        for seed in 0..60 {
            for kind in [ExcursionKind::PiecewiseLinear, ExcursionKind::PiecewiseConstant] {
                let h = sample_excursion(seed, kind, 5);
                let t = code_excursion(&h, &Resolution { cuts: vec![q(1, 3)], level_step: Some(q(1, 2)) });
                assert!(four_point_check(&t.space).is_empty());
                assert_eq!(t.space.weights().iter().copied().sum::<Rational>(), Rational::ONE);
            }
        }
    }

    #[test]
    fn four_cycle_is_not_a_tree() {
        let r = |n: i128| Rational::from(n);
        let square = FiniteMMSpace::uniform(vec![
            vec![r(0), r(1), r(2), r(1)],
            vec![r(1), r(0), r(1), r(2)],
            vec![r(2), r(1), r(0), r(1)],
            vec![r(1), r(2), r(1), r(0)],
        ])
        .unwrap();
        assert_eq!(four_point_check(&square), vec![[0, 1, 2, 3]]);
        assert!(four_point_check(&FiniteMMSpace::<Rational>::point()).is_empty());
    }

    #[test]
    fn redundant_breakpoints_do_not_change_the_code() {
        for seed in 0..60 {
            for kind in [ExcursionKind::PiecewiseLinear, ExcursionKind::PiecewiseConstant] {
                let h = sample_excursion(seed, kind, 4);
                let g = h.with_breakpoint(&q(5, 11)).unwrap().with_breakpoint(&q(7, 9)).unwrap();
                let res = Resolution { cuts: vec![], level_step: Some(q(1, 4)) };
                let a = canonicalize(&code_excursion(&h, &res).space);
                let b = canonicalize(&code_excursion(&g, &res).space);
                assert!(are_isomorphic(&a, &b), "seed {seed} {kind}");
            }
        }
    }

    #[test]
    fn projection_covers_every_segment() {
        let h = sample_excursion(9, ExcursionKind::PiecewiseLinear, 5);
        let t = code_excursion(&h, &Resolution::default());
        assert_eq!(t.projection.len(), t.segments.len());
        for (k, &(a, b)) in t.segments.iter().enumerate() {
            assert!(a < b);
            let p = t.projection[k];
            let rep = t.representatives[p];
            let mid = (a + b) / Rational::from(2);
            assert!(h.dh(&rep, &mid).unwrap() <= t.bound * Rational::from(2));
        }
    }
}
