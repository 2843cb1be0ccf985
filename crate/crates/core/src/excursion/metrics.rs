//! Distances between excursions: the measure-based `d_lambda`, the
//! epigraph Hausdorff distance `d_gamma`, and their sum.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use crate::rational::Rational;

use super::{common_pieces, Excursion, ExcursionKind};

/// `inf { eps > 0 : Leb(|h - g| > eps) < eps }`, exact.
///
/// `m(eps) = Leb(|h - g| > eps)` is nonincreasing, right-continuous and
/// affine between the extreme values of `|h - g|` on the pieces of the
/// common refinement, so on each such interval the condition `m(eps) < eps`
/// is a linear inequality.
pub fn d_lambda(h: &Excursion, g: &Excursion) -> Rational {
    let two = Rational::from(2);
    // (length, smaller, larger) of |h - g| on monotone parts.
    let mut parts: Vec<(Rational, Rational, Rational)> = Vec::new();
    for (a, b) in common_pieces(h, g) {
        let mid = (a + b) / two;
        let (hl, hr) = h.limits_on(&a, &b, &mid);
        let (gl, gr) = g.limits_on(&a, &b, &mid);
        let (fa, fb) = (hl - gl, hr - gr);
        if fa.is_negative() != fb.is_negative() && !fa.is_zero() && !fb.is_zero() {
            let root = a + (b - a) * fa / (fa - fb);
            parts.push((root - a, Rational::ZERO, fa.abs()));
            parts.push((b - root, Rational::ZERO, fb.abs()));
        } else {
            let (x, y) = (fa.abs(), fb.abs());
            parts.push((b - a, x.min(y), x.max(y)));
        }
    }
    let mut levels: Vec<Rational> = parts.iter().flat_map(|&(_, lo, hi)| [lo, hi]).collect();
    levels.push(Rational::ZERO);
    levels.sort();
    levels.dedup();
    for (k, start) in levels.iter().enumerate() {
        let end = levels.get(k + 1);
        let probe = match end {
            Some(e) => (*start + *e) / two,
            None => *start + Rational::ONE,
        };
        let (mut p, mut q) = (Rational::ZERO, Rational::ZERO);
        for &(len, lo, hi) in &parts {
            if lo == hi {
                if lo > probe {
                    p += len;
                }
            } else if probe < lo {
                p += len;
            } else if probe < hi {
                p += len * hi / (hi - lo);
                q -= len / (hi - lo);
            }
        }
        let root = p / (Rational::ONE - q);
        if root < *start {
            return *start;
        }
        if end.is_none_or(|e| root < *e) {
            return root;
        }
    }
    unreachable!("the last interval always satisfies the condition")
}

/// Hausdorff distance between epigraphs, exact for two piecewise-constant
/// inputs and certified to an interval otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GammaValue {
    /// Exact square of the distance when known.
    pub square: Option<Rational>,
    pub lo: f64,
    pub hi: f64,
}

impl GammaValue {
    fn from_square(square: Rational) -> Self {
        let v = square.sqrt_exact().map_or_else(|| square.to_f64().sqrt(), |r| r.to_f64());
        GammaValue { square: Some(square), lo: v, hi: v }
    }

    /// The exact value if it is rational.
    pub fn exact(&self) -> Option<Rational> {
        self.square.and_then(|s| s.sqrt_exact())
    }

    pub fn estimate(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Budget for the certified (non-exact) Hausdorff computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaOptions {
    /// Target width of the returned interval.
    pub tolerance: f64,
    /// Maximum number of distance evaluations per direction.
    pub budget: usize,
}

impl Default for GammaOptions {
    fn default() -> Self {
        GammaOptions { tolerance: 1e-9, budget: 200_000 }
    }
}

pub fn d_gamma(h: &Excursion, g: &Excursion) -> GammaValue {
    d_gamma_with(h, g, &GammaOptions::default())
}

/// Epigraphs are closed upward, so the distance from a point of `epi(h)`
/// to `epi(g)` only decreases when moving up; each directed part is a
/// supremum over the lower boundary `{(t, h(t))}`.
pub fn d_gamma_with(h: &Excursion, g: &Excursion, options: &GammaOptions) -> GammaValue {
    if h.kind() == ExcursionKind::PiecewiseConstant && g.kind() == ExcursionKind::PiecewiseConstant {
        return GammaValue::from_square(directed_pc_square(h, g).max(directed_pc_square(g, h)));
    }
    let (lo1, hi1) = directed_certified(h, g, options);
    let (lo2, hi2) = directed_certified(g, h, options);
    GammaValue { square: None, lo: lo1.max(lo2), hi: hi1.max(hi2) }
}

/// Region `{l <= t <= r, y >= base}` of a piecewise-constant epigraph.
struct Rect {
    l: Rational,
    r: Rational,
    base: Rational,
}

fn pc_rects(g: &Excursion) -> Vec<Rect> {
    let b = g.breakpoints();
    let mut out: Vec<Rect> = (0..g.pieces()).map(|i| Rect { l: b[i], r: b[i + 1], base: g.values()[i] }).collect();
    out.extend(b.iter().enumerate().map(|(i, t)| Rect { l: *t, r: *t, base: g.breakpoint_values()[i] }));
    out
}

fn square_dist(t: &Rational, y: &Rational, rects: &[Rect]) -> Rational {
    rects
        .iter()
        .map(|c| {
            let dx = if *t < c.l {
                c.l - *t
            } else if *t > c.r {
                *t - c.r
            } else {
                Rational::ZERO
            };
            let dy = (c.base - *y).max(Rational::ZERO);
            dx * dx + dy * dy
        })
        .min()
        .expect("an epigraph has at least one piece")
}

/// Squared directed distance from the lower boundary of `epi(h)` to
/// `epi(g)`, both piecewise constant.
///
/// On a piece of height `c` the squared distance is the lower envelope of
/// one convex function per rectangle: flat over `[l, r]`, parabolic outside.
/// Its maximum over `[a, b]` is attained at `a`, `b`, a plateau end, or a
/// crossing of a rising and a falling parabola (where the quadratic terms
/// cancel, so the crossing is rational). A maximum inside a plateau lies in
/// a set bounded by such points and shares its value with them.
fn directed_pc_square(h: &Excursion, g: &Excursion) -> Rational {
    let rects = pc_rects(g);
    let two = Rational::from(2);
    let hb = h.breakpoints();
    let mut best = Rational::ZERO;
    for (i, t) in hb.iter().enumerate() {
        best = best.max(square_dist(t, &h.breakpoint_values()[i], &rects));
    }
    for i in 0..h.pieces() {
        let (a, b, c) = (hb[i], hb[i + 1], h.values()[i]);
        let kappa: Vec<Rational> = rects
            .iter()
            .map(|r| {
                let dy = (r.base - c).max(Rational::ZERO);
                dy * dy
            })
            .collect();
        let mut candidates = vec![a, b];
        candidates.extend(rects.iter().flat_map(|r| [r.l, r.r]).filter(|t| a <= *t && *t <= b));
        for (ri, rise) in rects.iter().enumerate() {
            for (fi, fall) in rects.iter().enumerate() {
                if rise.r == fall.l {
                    continue;
                }
                let t = (rise.r + fall.l) / two + (kappa[ri] - kappa[fi]) / (two * (rise.r - fall.l));
                if a <= t && t <= b {
                    candidates.push(t);
                }
            }
        }
        for t in &candidates {
            best = best.max(square_dist(t, &c, &rects));
        }
    }
    best
}

/// Convex piece `{s0 <= t <= s1, y >= line(t)}` of an epigraph, in floats.
#[derive(Debug, Clone, Copy)]
struct Cell {
    s0: f64,
    s1: f64,
    y0: f64,
    y1: f64,
}

impl Cell {
    fn floor(&self, t: f64) -> f64 {
        if self.s1 == self.s0 {
            self.y0
        } else {
            self.y0 + (self.y1 - self.y0) * (t - self.s0) / (self.s1 - self.s0)
        }
    }

    fn dist(&self, t: f64, y: f64) -> f64 {
        if self.s0 <= t && t <= self.s1 && y >= self.floor(t) {
            return 0.0;
        }
        let side = |s: f64, base: f64| ((t - s).powi(2) + (base - y).max(0.0).powi(2)).sqrt();
        let mut d = side(self.s0, self.y0).min(side(self.s1, self.y1));
        let (dx, dy) = (self.s1 - self.s0, self.y1 - self.y0);
        let len2 = dx * dx + dy * dy;
        if len2 > 0.0 {
            let u = (((t - self.s0) * dx + (y - self.y0) * dy) / len2).clamp(0.0, 1.0);
            let (px, py) = (self.s0 + u * dx, self.y0 + u * dy);
            d = d.min(((t - px).powi(2) + (y - py).powi(2)).sqrt());
        }
        d
    }
}

fn cells(g: &Excursion) -> Vec<Cell> {
    let b: Vec<f64> = g.breakpoints().iter().map(Rational::to_f64).collect();
    let mut out: Vec<Cell> = (0..g.pieces())
        .map(|i| {
            let (u, v) = g.piece_ends(i);
            Cell { s0: b[i], s1: b[i + 1], y0: u.to_f64(), y1: v.to_f64() }
        })
        .collect();
    if g.kind() == ExcursionKind::PiecewiseConstant {
        out.extend(g.breakpoint_values().iter().zip(&b).map(|(v, t)| Cell { s0: *t, s1: *t, y0: v.to_f64(), y1: v.to_f64() }));
    }
    out
}

fn dist_to(cells: &[Cell], t: f64, y: f64) -> f64 {
    cells.iter().map(|c| c.dist(t, y)).fold(f64::INFINITY, f64::min)
}

struct Interval {
    upper: f64,
    a: f64,
    b: f64,
    piece: usize,
}

impl PartialEq for Interval {
    fn eq(&self, other: &Self) -> bool {
        self.upper.total_cmp(&other.upper) == Ordering::Equal
    }
}
impl Eq for Interval {}
impl PartialOrd for Interval {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Interval {
    fn cmp(&self, other: &Self) -> Ordering {
        self.upper.total_cmp(&other.upper)
    }
}

/// Upper bound on the distance from the segment `p`-`q` to the union of
/// `cells`: distance to a convex set is convex along a segment, so for each
/// cell it peaks at an endpoint.
fn segment_bound(cells: &[Cell], p: (f64, f64), q: (f64, f64)) -> f64 {
    cells.iter().map(|c| c.dist(p.0, p.1).max(c.dist(q.0, q.1))).fold(f64::INFINITY, f64::min)
}

/// Branch and bound over the lower boundary of `epi(h)`. On a piece with
/// slope `k` the distance to `epi(g)` is `sqrt(1 + k^2)`-Lipschitz in `t`;
/// the bound from [`segment_bound`] is used when smaller.
fn directed_certified(h: &Excursion, g: &Excursion, options: &GammaOptions) -> (f64, f64) {
    let target = cells(g);
    let b: Vec<f64> = h.breakpoints().iter().map(Rational::to_f64).collect();
    let lines: Vec<(f64, f64, f64)> = (0..h.pieces())
        .map(|i| {
            let (u, v) = h.piece_ends(i);
            let (u, v) = (u.to_f64(), v.to_f64());
            let slope = (v - u) / (b[i + 1] - b[i]);
            (u, slope, (1.0 + slope * slope).sqrt())
        })
        .collect();
    let height = |piece: usize, t: f64| lines[piece].0 + lines[piece].1 * (t - b[piece]);
    let mut lo: f64 = 0.0;
    let mut evals = 0usize;
    for (i, t) in b.iter().enumerate() {
        lo = lo.max(dist_to(&target, *t, h.at_breakpoint(i).to_f64()));
        evals += 1;
    }
    let mut heap = BinaryHeap::new();
    let bound = |piece: usize, x: f64, y: f64, lo: &mut f64, evals: &mut usize| {
        let c = (x + y) / 2.0;
        let v = dist_to(&target, c, height(piece, c));
        *lo = lo.max(v);
        *evals += 1;
        let convex = segment_bound(&target, (x, height(piece, x)), (y, height(piece, y)));
        Interval { upper: (v + lines[piece].2 * (y - x) / 2.0).min(convex), a: x, b: y, piece }
    };
    for piece in 0..h.pieces() {
        let (a, e) = (b[piece], b[piece + 1]);
        for end in [a, e] {
            lo = lo.max(dist_to(&target, end, height(piece, end)));
        }
        evals += 2;
        heap.push(bound(piece, a, e, &mut lo, &mut evals));
    }
    while let Some(top) = heap.peek() {
        if top.upper - lo <= options.tolerance || evals >= options.budget {
            break;
        }
        let Interval { a, b: e, piece, .. } = heap.pop().expect("peeked");
        let mid = (a + e) / 2.0;
        heap.push(bound(piece, a, mid, &mut lo, &mut evals));
        heap.push(bound(piece, mid, e, &mut lo, &mut evals));
    }
    let hi = heap.peek().map_or(lo, |top| top.upper.max(lo));
    (lo, hi)
}

/// `d_gamma + d_lambda`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExcursionDistance {
    pub gamma: GammaValue,
    pub lambda: Rational,
    pub lo: f64,
    pub hi: f64,
}

impl ExcursionDistance {
    /// Exact value when `d_gamma` is rational.
    pub fn exact(&self) -> Option<Rational> {
        self.gamma.exact().map(|g| g + self.lambda)
    }

    pub fn estimate(&self) -> f64 {
        (self.lo + self.hi) / 2.0
    }
}

pub fn d_excursion(h: &Excursion, g: &Excursion, options: &GammaOptions) -> ExcursionDistance {
    let gamma = d_gamma_with(h, g, options);
    let lambda = d_lambda(h, g);
    let l = lambda.to_f64();
    ExcursionDistance { gamma, lambda, lo: gamma.lo + l, hi: gamma.hi + l }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::excursion::sample_excursion;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    /// Grid oracle for `d_lambda`: scan eps on a fine grid using exact
    /// measures of `{|h - g| > eps}` computed by sampling many points.
    fn d_lambda_grid(h: &Excursion, g: &Excursion) -> f64 {
        let n = 4000;
        let diffs: Vec<f64> = (0..n)
            .map(|k| {
                let t = Rational::new(2 * k + 1, 2 * n);
                (h.eval(&t).unwrap() - g.eval(&t).unwrap()).abs().to_f64()
            })
            .collect();
        let mut eps = 0.0;
        while eps < 1.5 {
            let m = diffs.iter().filter(|d| **d > eps).count() as f64 / n as f64;
            if m < eps {
                return eps;
            }
            eps += 1e-3;
        }
        1.0
    }

    #[test]
    fn lambda_examples() {
        let tent = Excursion::tent();
        assert_eq!(d_lambda(&tent, &tent), Rational::ZERO);
        for n in 1..6 {
            assert_eq!(d_lambda(&Excursion::grid_indicator(n).unwrap(), &Excursion::unit_step()), Rational::ZERO);
        }
        for c in [q(1, 3), q(1, 2), Rational::ONE, Rational::from(3)] {
            let raised = Excursion::pc(vec![Rational::ZERO, Rational::ONE], vec![c], None).unwrap();
            assert_eq!(d_lambda(&Excursion::zero(), &raised), c.min(Rational::ONE));
        }
    }

    #[test]
    fn lambda_matches_grid_oracle() {
        for seed in 0..40 {
            let h = sample_excursion(seed, ExcursionKind::PiecewiseLinear, 4);
            let g = sample_excursion(seed + 500, ExcursionKind::PiecewiseConstant, 4);
            let exact = d_lambda(&h, &g).to_f64();
            let grid = d_lambda_grid(&h, &g);
            assert!((exact - grid).abs() < 5e-3, "seed {seed}: {exact} vs {grid}");
        }
    }

    #[test]
    fn gamma_examples() {
        let zero_pc = Excursion::pc(vec![Rational::ZERO, Rational::ONE], vec![Rational::ZERO], None).unwrap();
        for n in 1..=8 {
            let h = Excursion::grid_indicator(n).unwrap();
            assert_eq!(d_gamma(&h, &zero_pc).exact(), Some(q(1, 2 * n as i128)));
            let mixed = d_gamma(&h, &Excursion::zero());
            assert!((mixed.estimate() - 1.0 / (2.0 * n as f64)).abs() < 1e-8);
        }
        let tent = Excursion::tent();
        let same = d_gamma(&tent, &tent);
        assert!(same.hi < 1e-8);
        let h2 = Excursion::grid_indicator(2).unwrap();
        let h4 = Excursion::grid_indicator(4).unwrap();
        assert!(d_gamma(&h2, &h4).exact().unwrap() <= q(1, 4));
    }

    #[test]
    fn exact_and_certified_routes_agree_on_step_functions() {
        for seed in 0..40 {
            let h = sample_excursion(seed, ExcursionKind::PiecewiseConstant, 4);
            let g = sample_excursion(seed + 77, ExcursionKind::PiecewiseConstant, 4);
            let exact = d_gamma(&h, &g);
            let (lo1, hi1) = directed_certified(&h, &g, &GammaOptions::default());
            let (lo2, hi2) = directed_certified(&g, &h, &GammaOptions::default());
            let (lo, hi) = (lo1.max(lo2), hi1.max(hi2));
            assert!(lo <= exact.hi + 1e-9 && exact.lo <= hi + 1e-9, "seed {seed}: {exact:?} vs [{lo}, {hi}]");
        }
    }

    #[test]
    fn ordered_pairs_reduce_to_one_direction() {
        for seed in 0..20 {
            let h = sample_excursion(seed, ExcursionKind::PiecewiseLinear, 4);
            let bump = Excursion::pl(vec![Rational::ZERO, q(1, 2), Rational::ONE], vec![Rational::ZERO, q(1, 2), q(1, 4)]).unwrap();
            let mut values = h.values().to_vec();
            for (v, t) in values.iter_mut().zip(h.breakpoints()) {
                *v += bump.eval(t).unwrap();
            }
            let higher = Excursion::pl(h.breakpoints().to_vec(), values).unwrap();
            let (lo, hi) = directed_certified(&higher, &h, &GammaOptions::default());
            assert!(hi < 1e-8, "epi(higher) lies inside epi(h): {lo} {hi}");
            let both = d_gamma(&h, &higher);
            let (lo, hi) = directed_certified(&h, &higher, &GammaOptions::default());
            assert!((both.lo - lo).abs() < 1e-12 && (both.hi - hi).abs() < 1e-12);
        }
    }

    #[test]
    fn certified_interval_is_tight() {
        for seed in 0..20 {
            let h = sample_excursion(seed, ExcursionKind::PiecewiseLinear, 5);
            let g = sample_excursion(seed + 1, ExcursionKind::PiecewiseLinear, 5);
            let v = d_gamma(&h, &g);
            assert!(v.width() <= 1e-9, "seed {seed}: {v:?}");
        }
    }

    #[test]
    fn excursion_distance_dominates_parts() {
        let h = Excursion::grid_indicator(3).unwrap();
        let g = Excursion::tent();
        let d = d_excursion(&h, &g, &GammaOptions::default());
        assert!(d.lo + 1e-12 >= d.gamma.lo && d.lo + 1e-12 >= d.lambda.to_f64());
    }
}
