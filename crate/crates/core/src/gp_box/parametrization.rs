//! Measure-preserving step parametrizations `[0,1] -> X` and the box
//! distance between the pullback distance functions of two of them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mm_core::{Coupling, FiniteMMSpace};
use crate::rational::Scalar;

use super::{distortion, objective};

/// `[breaks[i], breaks[i+1])` is mapped to `assignment[i]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalParametrization<S> {
    pub breaks: Vec<S>,
    pub assignment: Vec<usize>,
}

impl<S: Scalar> IntervalParametrization<S> {
    /// Checks the partition and that the map pushes Lebesgue measure to the
    /// weights of `space`.
    pub fn validate(&self, space: &FiniteMMSpace<S>) -> Result<()> {
        const OP: &str = "IntervalParametrization::validate";
        let b = &self.breaks;
        if b.len() < 2 || !b[0].near_zero() || !(b[b.len() - 1].clone() - S::one()).near_zero() {
            return Err(invalid(OP, "breaks", "must run from 0 to 1 with at least one interval"));
        }
        if b.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid(OP, "breaks", "must be strictly increasing"));
        }
        if self.assignment.len() != b.len() - 1 {
            return Err(invalid(OP, "assignment", format!("expected {} entries", b.len() - 1)));
        }
        if let Some(p) = self.assignment.iter().find(|&&p| p >= space.len()) {
            return Err(invalid(OP, "assignment", format!("point {p} out of range")));
        }
        for x in 0..space.len() {
            let len = self.measure_of(x);
            if !(len.clone() - space.weight(x).clone()).near_zero() {
                return Err(invalid(OP, "assignment", format!("point {x} gets length {len}, weight is {}", space.weight(x))));
            }
        }
        Ok(())
    }

    /// Lebesgue measure of the preimage of `x`.
    pub fn measure_of(&self, x: usize) -> S {
        self.assignment
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p == x)
            .fold(S::zero(), |acc, (i, _)| acc + self.breaks[i + 1].clone() - self.breaks[i].clone())
    }

    /// Image of the half-open interval starting at or before `t`.
    pub fn point_at(&self, t: &S) -> usize {
        let i = self.breaks[1..].iter().position(|b| t < b).unwrap_or(self.assignment.len() - 1);
        self.assignment[i]
    }
}

/// Parametrizations realizing a full coupling: positive cells are laid out
/// consecutively on `[0,1]` in row-major order.
pub fn coupling_to_parametrizations<S: Scalar>(
    xi: &Coupling<S>,
    a: &FiniteMMSpace<S>,
    b: &FiniteMMSpace<S>,
) -> Result<(IntervalParametrization<S>, IntervalParametrization<S>)> {
    let xi = Coupling::new_full(xi.matrix().to_vec(), a.weights(), b.weights())?;
    for (x, row) in xi.matrix().iter().enumerate() {
        let s = row.iter().fold(S::zero(), |acc, v| acc + v.clone());
        if !(s.clone() - a.weight(x).clone()).near_zero() {
            return Err(invalid("coupling_to_parametrizations", "xi", format!("row {x} sums to {s}, not its weight")));
        }
    }
    let mut breaks = vec![S::zero()];
    let (mut first, mut second) = (Vec::new(), Vec::new());
    let mut t = S::zero();
    for (x, y) in xi.support() {
        t = t + xi.entry(x, y).clone();
        breaks.push(t.clone());
        first.push(x);
        second.push(y);
    }
    if let Some(last) = breaks.last_mut() {
        *last = S::one();
    }
    Ok((
        IntervalParametrization { breaks: breaks.clone(), assignment: first },
        IntervalParametrization { breaks, assignment: second },
    ))
}

/// Result of [`box_of_parametrizations`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamBox<S> {
    pub value: S,
    /// The induced coupling cells kept by the optimum.
    pub kept: Vec<(usize, usize)>,
    /// `false` when the number of cells exceeded the cap and `value` is an
    /// upper bound.
    pub exact: bool,
}

/// Box distance with parameter `lambda` between the pullbacks `d_1 o p1` and
/// `d_2 o p2`. Both are constant on the cells of the induced coupling, so the
/// minimization runs over sets of cells (by enumeration up to `cap` cells,
/// greedily above).
pub fn box_of_parametrizations<S: Scalar>(
    p1: &IntervalParametrization<S>,
    p2: &IntervalParametrization<S>,
    a: &FiniteMMSpace<S>,
    b: &FiniteMMSpace<S>,
    lambda: &S,
    cap: usize,
) -> Result<ParamBox<S>> {
    p1.validate(a)?;
    p2.validate(b)?;
    if !lambda.is_positive() {
        return Err(invalid("box_of_parametrizations", "lambda", "must be positive"));
    }
    let mut cuts: Vec<S> = p1.breaks.iter().chain(&p2.breaks).cloned().collect();
    cuts.sort_by(|x, y| x.partial_cmp(y).expect("comparable"));
    cuts.dedup_by(|x, y| (x.clone() - y.clone()).near_zero());
    let mut cells: Vec<((usize, usize), S)> = Vec::new();
    for w in cuts.windows(2) {
        let cell = (p1.point_at(&w[0]), p2.point_at(&w[0]));
        let len = w[1].clone() - w[0].clone();
        match cells.iter_mut().find(|(c, _)| *c == cell) {
            Some((_, m)) => *m = m.clone() + len,
            None => cells.push((cell, len)),
        }
    }
    cells.sort_by_key(|x| x.0);

    let eval = |mask: u64| {
        let kept: Vec<(usize, usize)> = (0..cells.len()).filter(|&i| mask & (1 << i) != 0).map(|i| cells[i].0).collect();
        let mass = (0..cells.len()).filter(|&i| mask & (1 << i) != 0).fold(S::zero(), |acc, i| acc + cells[i].1.clone());
        (objective(&distortion(&kept, a, b), &mass, lambda), kept)
    };
    let n = cells.len();
    let exact = n <= cap.min(63);
    let (value, kept) = if exact {
        let mut best = eval(0);
        for mask in 1..1u64 << n {
            let c = eval(mask);
            if c.0 < best.0 {
                best = c;
            }
        }
        best
    } else {
        let mut current: u64 = if n >= 64 { u64::MAX } else { (1 << n) - 1 };
        let mut best = eval(current);
        while current != 0 {
            let step = (0..n.min(64))
                .filter(|&i| current & (1 << i) != 0)
                .map(|i| (eval(current & !(1 << i)), current & !(1 << i)))
                .reduce(|x, y| if y.0 .0 < x.0 .0 { y } else { x })
                .expect("current is nonempty");
            current = step.1;
            if step.0 .0 < best.0 {
                best = step.0;
            }
        }
        best
    };
    Ok(ParamBox { value, kept, exact })
}
