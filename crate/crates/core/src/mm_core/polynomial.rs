//! Polynomials: expectations of a bounded test function of the distance
//! matrix of `n` points sampled independently from the measure.

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::FiniteMMSpace;
use crate::error::{invalid, Error, Result};
use crate::rational::{Rational, Scalar};

/// Largest number of `n`-tuples summed by [`evaluate_polynomial`] unless the
/// caller passes its own cap.
pub const DEFAULT_TUPLE_CAP: usize = 1 << 20;

/// Built-in family of bounded test functions on `n x n` distance matrices.
/// Entry indices are zero-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TestFunction {
    Constant { value: Rational },
    /// `min(r_ij, cap)`
    TruncatedEntry { i: usize, j: usize, cap: Rational },
    /// `prod_e min(r_e, cap)`
    TruncatedMonomial { entries: Vec<(usize, usize)>, cap: Rational },
    /// `clamp((level - r_ij) / width, 0, 1)`
    SmoothIndicator { i: usize, j: usize, level: Rational, width: Rational },
    /// `min(max_ij r_ij, cap)`
    MaxEntry { cap: Rational },
}

impl TestFunction {
    /// Sup-norm bound `M` with `|phi| <= M`.
    pub fn bound(&self) -> Rational {
        match self {
            TestFunction::Constant { value } => value.abs(),
            TestFunction::TruncatedEntry { cap, .. } | TestFunction::MaxEntry { cap } => cap.abs(),
            TestFunction::TruncatedMonomial { entries, cap } => {
                entries.iter().fold(Rational::ONE, |acc, _| acc * cap.abs())
            }
            TestFunction::SmoothIndicator { .. } => Rational::ONE,
        }
    }

    fn check(&self, n: usize) -> Result<()> {
        let entry_ok = |i: usize, j: usize| i < n && j < n;
        let ok = match self {
            TestFunction::Constant { .. } | TestFunction::MaxEntry { .. } => true,
            TestFunction::TruncatedEntry { i, j, .. } => entry_ok(*i, *j),
            TestFunction::TruncatedMonomial { entries, .. } => entries.iter().all(|&(i, j)| entry_ok(i, j)),
            TestFunction::SmoothIndicator { i, j, width, .. } => {
                if !width.is_positive() {
                    return Err(invalid("evaluate_polynomial", "phi.width", "must be positive"));
                }
                entry_ok(*i, *j)
            }
        };
        if ok {
            Ok(())
        } else {
            Err(invalid("evaluate_polynomial", "phi", format!("entry index out of range for order {n}")))
        }
    }

    /// Evaluates on an `n x n` matrix given as a lookup closure.
    pub fn eval<S: Scalar>(&self, n: usize, r: impl Fn(usize, usize) -> S) -> S {
        match self {
            TestFunction::Constant { value } => S::from_rational(value),
            TestFunction::TruncatedEntry { i, j, cap } => r(*i, *j).min_of(S::from_rational(cap)),
            TestFunction::TruncatedMonomial { entries, cap } => {
                let cap = S::from_rational(cap);
                entries.iter().fold(S::one(), |acc, &(i, j)| acc * r(i, j).min_of(cap.clone()))
            }
            TestFunction::SmoothIndicator { i, j, level, width } => {
                let v = (S::from_rational(level) - r(*i, *j)) / S::from_rational(width);
                v.max_of(S::zero()).min_of(S::one())
            }
            TestFunction::MaxEntry { cap } => {
                let mut m = S::zero();
                for a in 0..n {
                    for b in 0..n {
                        m = m.max_of(r(a, b));
                    }
                }
                m.min_of(S::from_rational(cap))
            }
        }
    }
}

/// Exact polynomial value: the sum over all `n`-tuples of points of the
/// product of their weights times `phi` of their distance matrix.
pub fn evaluate_polynomial<S: Scalar>(
    space: &FiniteMMSpace<S>,
    n: usize,
    phi: &TestFunction,
    tuple_cap: usize,
) -> Result<S> {
    if n == 0 {
        return Err(invalid("evaluate_polynomial", "n", "order must be at least 1"));
    }
    phi.check(n)?;
    let size = space.len();
    let tuples = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(size)).unwrap_or(usize::MAX);
    if tuples > tuple_cap {
        return Err(Error::TooLarge {
            op: "evaluate_polynomial",
            size: tuples,
            cap: tuple_cap,
            hint: "use monte_carlo_polynomial for an estimate",
        });
    }
    let mut idx = vec![0usize; n];
    let mut total = S::zero();
    loop {
        let w = idx.iter().fold(S::one(), |acc, &i| acc * space.weight(i).clone());
        if !w.near_zero() || S::EXACT {
            let v = phi.eval(n, |a, b| space.dist(idx[a], idx[b]).clone());
            total = total + w * v;
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return Ok(total);
            }
            idx[pos] += 1;
            if idx[pos] < size {
                break;
            }
            idx[pos] = 0;
            pos += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonteCarloEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: usize,
}

/// Monte Carlo estimate of the polynomial from `samples` independent
/// `n`-tuples drawn from the measure.
pub fn monte_carlo_polynomial<S: Scalar>(
    space: &FiniteMMSpace<S>,
    n: usize,
    phi: &TestFunction,
    samples: usize,
    seed: u64,
) -> Result<MonteCarloEstimate> {
    if n == 0 || samples < 2 {
        return Err(invalid("monte_carlo_polynomial", "n/samples", "need n >= 1 and samples >= 2"));
    }
    phi.check(n)?;
    let weights: Vec<f64> = space.weights().iter().map(Scalar::to_f64).collect();
    let picker = WeightedIndex::new(&weights)
        .map_err(|e| invalid("monte_carlo_polynomial", "weights", e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = vec![0usize; n];
    let (mut sum, mut sum_sq) = (0.0f64, 0.0f64);
    for _ in 0..samples {
        for slot in idx.iter_mut() {
            *slot = picker.sample(&mut rng);
        }
        let v = phi.eval(n, |a, b| space.dist(idx[a], idx[b]).to_f64());
        sum += v;
        sum_sq += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = ((sum_sq - m * mean * mean) / (m - 1.0)).max(0.0);
    Ok(MonteCarloEstimate { mean, std_error: (var / m).sqrt(), samples })
}
