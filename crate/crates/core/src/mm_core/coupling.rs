use serde::Serialize;

use crate::error::{invalid, Result};
use crate::rational::Scalar;

/// A (sub-)coupling of two weight vectors: a nonnegative matrix whose row
/// sums are at most the first weights and column sums at most the second.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Coupling<S> {
    matrix: Vec<Vec<S>>,
    mass: S,
}

impl<S: Scalar> Coupling<S> {
    /// Checks the sub-marginal constraints against `mu` and `nu`.
    pub fn new(matrix: Vec<Vec<S>>, mu: &[S], nu: &[S]) -> Result<Self> {
        const OP: &str = "Coupling::new";
        if matrix.len() != mu.len() || matrix.iter().any(|r| r.len() != nu.len()) {
            return Err(invalid(OP, "matrix", format!("expected {}x{} entries", mu.len(), nu.len())));
        }
        let mut mass = S::zero();
        for (i, row) in matrix.iter().enumerate() {
            let mut s = S::zero();
            for (j, v) in row.iter().enumerate() {
                if *v < -S::tolerance() {
                    return Err(invalid(OP, "matrix", format!("entry ({i},{j}) is negative")));
                }
                s = s + v.clone();
            }
            if !s.le_tol(&mu[i]) {
                return Err(invalid(OP, "matrix", format!("row {i} sums to {s}, above its weight {}", mu[i])));
            }
            mass = mass + s;
        }
        for (j, w) in nu.iter().enumerate() {
            let s = matrix.iter().fold(S::zero(), |a, r| a + r[j].clone());
            if !s.le_tol(w) {
                return Err(invalid(OP, "matrix", format!("column {j} sums to {s}, above its weight {w}")));
            }
        }
        Ok(Coupling { matrix, mass })
    }

    /// Like [`Coupling::new`] but also requires both marginals to match exactly.
    pub fn new_full(matrix: Vec<Vec<S>>, mu: &[S], nu: &[S]) -> Result<Self> {
        let c = Self::new(matrix, mu, nu)?;
        if !(c.mass.clone() - S::one()).near_zero() {
            return Err(invalid("Coupling::new_full", "matrix", format!("total mass {} is not 1", c.mass)));
        }
        Ok(c)
    }

    /// Product coupling `mu (x) nu`.
    pub fn product(mu: &[S], nu: &[S]) -> Self {
        let matrix: Vec<Vec<S>> =
            mu.iter().map(|a| nu.iter().map(|b| a.clone() * b.clone()).collect()).collect();
        let mass = mu.iter().fold(S::zero(), |x, a| x + a.clone()) * nu.iter().fold(S::zero(), |x, b| x + b.clone());
        Coupling { matrix, mass }
    }

    pub fn matrix(&self) -> &[Vec<S>] {
        &self.matrix
    }

    pub fn mass(&self) -> &S {
        &self.mass
    }

    pub fn entry(&self, i: usize, j: usize) -> &S {
        &self.matrix[i][j]
    }

    /// Extends a sub-coupling to a full coupling by spreading the two
    /// marginal defects (which carry equal mass) as a product.
    pub fn complete(&self, mu: &[S], nu: &[S]) -> Self {
        let row_defect: Vec<S> = self
            .matrix
            .iter()
            .zip(mu)
            .map(|(r, w)| w.clone() - r.iter().fold(S::zero(), |a, v| a + v.clone()))
            .collect();
        let col_defect: Vec<S> = (0..nu.len())
            .map(|j| nu[j].clone() - self.matrix.iter().fold(S::zero(), |a, r| a + r[j].clone()))
            .collect();
        let defect = row_defect.iter().fold(S::zero(), |a, v| a + v.clone());
        let mut matrix = self.matrix.clone();
        if defect.is_positive() {
            for (i, a) in row_defect.iter().enumerate() {
                for (j, b) in col_defect.iter().enumerate() {
                    matrix[i][j] = matrix[i][j].clone() + a.clone() * b.clone() / defect.clone();
                }
            }
        }
        Coupling { matrix, mass: S::one() }
    }

    /// Mass carried by pairs with `pred(i, j)`.
    pub fn mass_where(&self, pred: impl Fn(usize, usize) -> bool) -> S {
        let mut m = S::zero();
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if pred(i, j) {
                    m = m + v.clone();
                }
            }
        }
        m
    }

    /// Cells with positive mass, row-major.
    pub fn support(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (i, row) in self.matrix.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if v.is_positive() {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::Rational;

    fn q(p: i128, d: i128) -> Rational {
        Rational::new(p, d)
    }

    #[test]
    fn completion_restores_marginals() {
        let mu = [q(1, 2), q(1, 2)];
        let nu = [q(1, 4), q(3, 4)];
        let sub = Coupling::new(vec![vec![q(1, 4), Rational::ZERO], vec![Rational::ZERO, q(1, 4)]], &mu, &nu).unwrap();
        assert_eq!(*sub.mass(), q(1, 2));
        let full = sub.complete(&mu, &nu);
        assert!(Coupling::new_full(full.matrix().to_vec(), &mu, &nu).is_ok());
        assert_eq!(full.entry(0, 0), &q(1, 4));
    }

    #[test]
    fn rejects_excess_row_mass() {
        let mu = [q(1, 2), q(1, 2)];
        let nu = [q(1, 2), q(1, 2)];
        let m = vec![vec![q(1, 2), q(1, 4)], vec![Rational::ZERO, Rational::ZERO]];
        assert!(Coupling::new(m, &mu, &nu).is_err());
    }

    #[test]
    fn product_is_full() {
        let mu = [q(1, 3), q(2, 3)];
        let nu = [q(1, 5), q(4, 5)];
        let p = Coupling::product(&mu, &nu);
        assert!(Coupling::new_full(p.matrix().to_vec(), &mu, &nu).is_ok());
    }
}
