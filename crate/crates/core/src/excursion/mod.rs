//! Piecewise excursions on `[0,1]`, the tree pseudometric
//! `d_h(s,t) = h(s) + h(t) - 2 inf_{[s,t]} h` they code, and distances
//! between excursions.
//!
//! Two kinds are supported, both with exact rational data:
//!
//! * piecewise linear: heights at the breakpoints, interpolated linearly;
//! * piecewise constant: one value per open piece plus an explicit value at
//!   every breakpoint, at most the adjacent piece values so that the function
//!   is lower semi-continuous.

mod coding;
mod metrics;

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::rational::Rational;

pub use coding::{code_excursion, critical_cuts, four_point_check, CodedTree, Resolution};
pub use metrics::{d_excursion, d_gamma, d_gamma_with, d_lambda, ExcursionDistance, GammaOptions, GammaValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExcursionKind {
    #[serde(rename = "pl")]
    PiecewiseLinear,
    #[serde(rename = "pc")]
    PiecewiseConstant,
}

impl fmt::Display for ExcursionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExcursionKind::PiecewiseLinear => "pl",
            ExcursionKind::PiecewiseConstant => "pc",
        })
    }
}

/// A nonnegative piecewise function on `[0,1]` with `h(0) = 0`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Excursion {
    kind: ExcursionKind,
    breakpoints: Vec<Rational>,
    /// PL: heights at the breakpoints. PC: values on the open pieces.
    values: Vec<Rational>,
    /// PC only: values at the breakpoints. Empty for PL.
    breakpoint_values: Vec<Rational>,
}

impl Excursion {
    /// Piecewise-linear excursion through `(breakpoints[i], values[i])`.
    pub fn pl(breakpoints: Vec<Rational>, values: Vec<Rational>) -> Result<Self> {
        let h = Excursion { kind: ExcursionKind::PiecewiseLinear, breakpoints, values, breakpoint_values: Vec::new() };
        h.check()?;
        Ok(h)
    }

    /// Piecewise-constant excursion. Missing breakpoint values default to
    /// the minimum of the adjacent piece values (and 0 at `t = 0`).
    pub fn pc(breakpoints: Vec<Rational>, values: Vec<Rational>, breakpoint_values: Option<Vec<Rational>>) -> Result<Self> {
        let breakpoint_values = match breakpoint_values {
            Some(v) => v,
            None => {
                if values.len() + 1 != breakpoints.len() {
                    return Err(invalid("Excursion::pc", "values", "need one value per piece"));
                }
                let m = values.len();
                (0..=m)
                    .map(|i| match i {
                        0 => Rational::ZERO,
                        i if i == m => values[m - 1],
                        i => values[i - 1].min(values[i]),
                    })
                    .collect()
            }
        };
        let h = Excursion { kind: ExcursionKind::PiecewiseConstant, breakpoints, values, breakpoint_values };
        h.check()?;
        Ok(h)
    }

    fn check(&self) -> Result<()> {
        const OP: &str = "Excursion";
        let b = &self.breakpoints;
        if b.len() < 2 || !b[0].is_zero() || b[b.len() - 1] != Rational::ONE {
            return Err(invalid(OP, "breakpoints", "must start at 0, end at 1 and have at least two entries"));
        }
        if let Some(i) = b.windows(2).position(|w| w[1] <= w[0]) {
            return Err(invalid(OP, "breakpoints", format!("not strictly increasing at index {}", i + 1)));
        }
        if let Some(i) = self.values.iter().chain(&self.breakpoint_values).position(|v| v.is_negative()) {
            return Err(invalid(OP, "values", format!("entry {i} is negative")));
        }
        match self.kind {
            ExcursionKind::PiecewiseLinear => {
                if self.values.len() != b.len() {
                    return Err(invalid(OP, "values", format!("expected {} heights, found {}", b.len(), self.values.len())));
                }
                if !self.values[0].is_zero() {
                    return Err(invalid(OP, "values", "h(0) must be 0"));
                }
                if !self.breakpoint_values.is_empty() {
                    return Err(invalid(OP, "breakpoint_values", "only used by piecewise-constant excursions"));
                }
            }
            ExcursionKind::PiecewiseConstant => {
                if self.values.len() + 1 != b.len() {
                    return Err(invalid(OP, "values", format!("expected {} piece values, found {}", b.len() - 1, self.values.len())));
                }
                if self.breakpoint_values.len() != b.len() {
                    return Err(invalid(
                        OP,
                        "breakpoint_values",
                        format!("expected {} entries, found {}", b.len(), self.breakpoint_values.len()),
                    ));
                }
                if !self.breakpoint_values[0].is_zero() {
                    return Err(invalid(OP, "breakpoint_values", "h(0) must be 0"));
                }
                for (i, v) in self.breakpoint_values.iter().enumerate() {
                    let left = i.checked_sub(1).map(|j| self.values[j]);
                    let right = self.values.get(i).copied();
                    if left.into_iter().chain(right).any(|p| *v > p) {
                        return Err(invalid(
                            OP,
                            "breakpoint_values",
                            format!("value {v} at breakpoint {i} exceeds an adjacent piece (not lower semi-continuous)"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }

    /// The zero excursion.
    pub fn zero() -> Self {
        Excursion::pl(vec![Rational::ZERO, Rational::ONE], vec![Rational::ZERO; 2]).expect("valid")
    }

    /// Linear up to height 1 at `1/2` and back down to 0.
    pub fn tent() -> Self {
        Excursion::pl(
            vec![Rational::ZERO, Rational::new(1, 2), Rational::ONE],
            vec![Rational::ZERO, Rational::ONE, Rational::ZERO],
        )
        .expect("valid")
    }

    /// `h_n(t) = 1` off the grid `{k/n}` and `0` on it.
    pub fn grid_indicator(n: u32) -> Result<Self> {
        if n == 0 {
            return Err(invalid("Excursion::grid_indicator", "n", "must be positive"));
        }
        let breaks = (0..=n).map(|k| Rational::new(k as i128, n as i128)).collect();
        Excursion::pc(breaks, vec![Rational::ONE; n as usize], Some(vec![Rational::ZERO; n as usize + 1]))
    }

    /// The step function equal to 1 except at `t = 0`.
    pub fn unit_step() -> Self {
        Excursion::pc(vec![Rational::ZERO, Rational::ONE], vec![Rational::ONE], None).expect("valid")
    }

    pub fn kind(&self) -> ExcursionKind {
        self.kind
    }

    pub fn breakpoints(&self) -> &[Rational] {
        &self.breakpoints
    }

    pub fn values(&self) -> &[Rational] {
        &self.values
    }

    pub fn breakpoint_values(&self) -> &[Rational] {
        &self.breakpoint_values
    }

    pub fn pieces(&self) -> usize {
        self.breakpoints.len() - 1
    }

    /// `(left limit, right limit)` of the affine function on piece `i`.
    pub fn piece_ends(&self, i: usize) -> (Rational, Rational) {
        match self.kind {
            ExcursionKind::PiecewiseLinear => (self.values[i], self.values[i + 1]),
            ExcursionKind::PiecewiseConstant => (self.values[i], self.values[i]),
        }
    }

    /// Value at breakpoint `i`.
    pub fn at_breakpoint(&self, i: usize) -> Rational {
        match self.kind {
            ExcursionKind::PiecewiseLinear => self.values[i],
            ExcursionKind::PiecewiseConstant => self.breakpoint_values[i],
        }
    }

    /// Largest value.
    pub fn max_height(&self) -> Rational {
        self.values.iter().copied().fold(Rational::ZERO, Rational::max)
    }

    /// Index of the piece containing `t` in its half-open interior
    /// `[t_i, t_{i+1})` (the last piece also contains 1), and whether `t`
    /// is a breakpoint.
    fn locate(&self, t: &Rational) -> (usize, Option<usize>) {
        let i = self.breakpoints.partition_point(|b| b <= t).saturating_sub(1).min(self.pieces() - 1);
        let at = self.breakpoints.binary_search(t).ok();
        (i, at)
    }

    fn check_time(op: &'static str, t: &Rational) -> Result<()> {
        if t.is_negative() || *t > Rational::ONE {
            return Err(invalid(op, "t", format!("{t} is outside [0,1]")));
        }
        Ok(())
    }

    /// `h(t)`.
    pub fn eval(&self, t: &Rational) -> Result<Rational> {
        Self::check_time("eval", t)?;
        Ok(self.value_at(t))
    }

    fn value_at(&self, t: &Rational) -> Rational {
        let (i, at) = self.locate(t);
        if let Some(k) = at {
            return self.at_breakpoint(k);
        }
        let (l, r) = self.piece_ends(i);
        let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
        l + (r - l) * (*t - a) / (b - a)
    }

    /// `inf h` over the closed interval between `s` and `t`.
    pub fn infimum(&self, s: &Rational, t: &Rational) -> Result<Rational> {
        Self::check_time("infimum", s)?;
        Self::check_time("infimum", t)?;
        Ok(self.inf_between(s, t))
    }

    pub(crate) fn inf_between(&self, s: &Rational, t: &Rational) -> Rational {
        let (lo, hi) = if s <= t { (*s, *t) } else { (*t, *s) };
        let mut m = self.value_at(&lo).min(self.value_at(&hi));
        if lo == hi {
            return m;
        }
        for (k, b) in self.breakpoints.iter().enumerate() {
            if lo < *b && *b < hi {
                m = m.min(self.at_breakpoint(k));
            }
        }
        if self.kind == ExcursionKind::PiecewiseConstant {
            for i in 0..self.pieces() {
                if self.breakpoints[i] < hi && lo < self.breakpoints[i + 1] {
                    m = m.min(self.values[i]);
                }
            }
        }
        m
    }

    /// `d_h(s, t) = h(s) + h(t) - 2 inf_{[s,t]} h`.
    pub fn dh(&self, s: &Rational, t: &Rational) -> Result<Rational> {
        Self::check_time("dh", s)?;
        Self::check_time("dh", t)?;
        Ok(self.dh_unchecked(s, t))
    }

    pub(crate) fn dh_unchecked(&self, s: &Rational, t: &Rational) -> Rational {
        self.value_at(s) + self.value_at(t) - Rational::from(2) * self.inf_between(s, t)
    }

    /// The same function with an extra breakpoint at `t` (a no-op if `t` is
    /// already one).
    pub fn with_breakpoint(&self, t: &Rational) -> Result<Self> {
        Self::check_time("with_breakpoint", t)?;
        let (i, at) = self.locate(t);
        if at.is_some() {
            return Ok(self.clone());
        }
        let mut h = self.clone();
        h.breakpoints.insert(i + 1, *t);
        match self.kind {
            ExcursionKind::PiecewiseLinear => h.values.insert(i + 1, self.value_at(t)),
            ExcursionKind::PiecewiseConstant => {
                h.values.insert(i + 1, self.values[i]);
                h.breakpoint_values.insert(i + 1, self.values[i]);
            }
        }
        h.check()?;
        Ok(h)
    }

    /// Same breakpoints, heights multiplied by `c >= 0`.
    pub fn scaled(&self, c: &Rational) -> Result<Self> {
        if c.is_negative() {
            return Err(invalid("Excursion::scaled", "c", "must be nonnegative"));
        }
        let mut h = self.clone();
        h.values.iter_mut().for_each(|v| *v = *v * *c);
        h.breakpoint_values.iter_mut().for_each(|v| *v = *v * *c);
        Ok(h)
    }

    /// `sup |h - g|` over `[0,1]`, exact.
    pub fn sup_distance(&self, other: &Excursion) -> Rational {
        let mut sup = Rational::ZERO;
        for t in merge_breakpoints(self, other) {
            sup = sup.max((self.value_at(&t) - other.value_at(&t)).abs());
        }
        for (a, b) in common_pieces(self, other) {
            let mid = (a + b) / Rational::from(2);
            let (hl, hr) = self.limits_on(&a, &b, &mid);
            let (gl, gr) = other.limits_on(&a, &b, &mid);
            sup = sup.max((hl - gl).abs()).max((hr - gr).abs());
        }
        sup
    }

    /// Limits at `a+` and `b-` of the affine piece containing `mid`.
    pub(crate) fn limits_on(&self, a: &Rational, b: &Rational, mid: &Rational) -> (Rational, Rational) {
        let (i, _) = self.locate(mid);
        let (l, r) = self.piece_ends(i);
        let (ta, tb) = (self.breakpoints[i], self.breakpoints[i + 1]);
        let at = |t: &Rational| l + (r - l) * (*t - ta) / (tb - ta);
        (at(a), at(b))
    }
}

/// Sorted union of the breakpoints of two excursions.
pub(crate) fn merge_breakpoints(h: &Excursion, g: &Excursion) -> Vec<Rational> {
    let mut t: Vec<Rational> = h.breakpoints.iter().chain(&g.breakpoints).copied().collect();
    t.sort();
    t.dedup();
    t
}

/// Intervals of the common refinement.
pub(crate) fn common_pieces(h: &Excursion, g: &Excursion) -> Vec<(Rational, Rational)> {
    merge_breakpoints(h, g).windows(2).map(|w| (w[0], w[1])).collect()
}

/// Random excursion with at most `max_pieces` pieces, breakpoints on the
/// grid `k / (2 max_pieces)` and heights in `{0, 1/4, ..., 2}`.
pub fn sample_excursion(seed: u64, kind: ExcursionKind, max_pieces: usize) -> Excursion {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_excursion_with(&mut rng, kind, max_pieces)
}

pub(crate) fn sample_excursion_with(rng: &mut impl Rng, kind: ExcursionKind, max_pieces: usize) -> Excursion {
    let max_pieces = max_pieces.max(1);
    let grid = 2 * max_pieces as i128;
    let pieces = rng.gen_range(1..=max_pieces);
    let mut inner: Vec<i128> = (1..grid).collect();
    for i in 0..inner.len() {
        let j = rng.gen_range(i..inner.len());
        inner.swap(i, j);
    }
    let mut cuts: Vec<i128> = inner[..pieces - 1].to_vec();
    cuts.sort_unstable();
    let breaks: Vec<Rational> = std::iter::once(0)
        .chain(cuts)
        .chain(std::iter::once(grid))
        .map(|k| Rational::new(k, grid))
        .collect();
    let mut height = || Rational::new(rng.gen_range(0..=8), 4);
    match kind {
        ExcursionKind::PiecewiseLinear => {
            let mut values: Vec<Rational> = (0..breaks.len()).map(|_| height()).collect();
            values[0] = Rational::ZERO;
            Excursion::pl(breaks, values).expect("sampled excursion is valid")
        }
        ExcursionKind::PiecewiseConstant => {
            let values: Vec<Rational> = (0..pieces).map(|_| height()).collect();
            let mut bv: Vec<Rational> = (0..=pieces)
                .map(|i| {
                    let left = i.checked_sub(1).map(|j| values[j]);
                    let cap = left.into_iter().chain(values.get(i).copied()).fold(Rational::from(2), Rational::min);
                    let v = height();
                    if v <= cap {
                        v
                    } else {
                        cap
                    }
                })
                .collect();
            bv[0] = Rational::ZERO;
            Excursion::pc(breaks, values, Some(bv)).expect("sampled excursion is valid")
        }
    }
}
