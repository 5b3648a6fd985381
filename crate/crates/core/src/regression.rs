//! Least-squares regression on polynomial bases, used by the Monte Carlo
//! backends for conditional expectations.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// Monomials in `dim` variables of total degree at most `degree`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyBasis {
    dim: usize,
    exponents: Vec<Vec<u32>>,
}

impl PolyBasis {
    pub fn new(dim: usize, degree: u32) -> Self {
        let mut exponents = vec![vec![0; dim]];
        for total in 1..=degree {
            let mut current = vec![0u32; dim];
            push_compositions(total, 0, &mut current, &mut exponents);
        }
        Self { dim, exponents }
    }

    pub fn len(&self) -> usize {
        self.exponents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.exponents.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        self.exponents
            .iter()
            .map(|e| e.iter().zip(x).map(|(&p, &v)| v.powi(p as i32)).product())
            .collect()
    }
}

fn push_compositions(remaining: u32, slot: usize, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if slot + 1 == current.len() {
        current[slot] = remaining;
        out.push(current.clone());
        current[slot] = 0;
        return;
    }
    for take in (0..=remaining).rev() {
        current[slot] = take;
        push_compositions(remaining - take, slot + 1, current, out);
    }
    current[slot] = 0;
}

/// Factorised design matrix; solves several right-hand sides against the
/// same sample points.
pub struct Regressor {
    basis: PolyBasis,
    svd: SVD<f64, nalgebra::Dyn, nalgebra::Dyn>,
    rows: usize,
}

impl Regressor {
    pub fn new(basis: PolyBasis, points: &[Vec<f64>]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Precondition("regression needs at least one sample".into()));
        }
        let cols = basis.len();
        let mut design = DMatrix::zeros(points.len(), cols);
        for (r, x) in points.iter().enumerate() {
            if x.len() != basis.dim() {
                return Err(Error::Dimension { expected: basis.dim(), got: x.len() });
            }
            for (c, v) in basis.eval(x).into_iter().enumerate() {
                design[(r, c)] = v;
            }
        }
        Ok(Self {
            basis,
            svd: design.svd(true, true),
            rows: points.len(),
        })
    }

    /// Least-squares coefficients for `targets` (one per sample point).
    pub fn fit(&self, targets: &[f64]) -> Result<Fit> {
        if targets.len() != self.rows {
            return Err(Error::Dimension { expected: self.rows, got: targets.len() });
        }
        let b = DVector::from_column_slice(targets);
        let max_sv = self.svd.singular_values.max();
        let coef = self
            .svd
            .solve(&b, max_sv * 1e-12)
            .map_err(|e| Error::Inconsistent(format!("least squares failed: {e}")))?;
        Ok(Fit {
            basis: self.basis.clone(),
            coef: coef.iter().copied().collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Fit {
    basis: PolyBasis,
    coef: Vec<f64>,
}

impl Fit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.basis.eval(x).iter().zip(&self.coef).map(|(a, b)| a * b).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn basis_sizes() {
        assert_eq!(PolyBasis::new(1, 3).len(), 4);
        assert_eq!(PolyBasis::new(2, 2).len(), 6);
        assert_eq!(PolyBasis::new(3, 0).len(), 1);
    }

    #[test]
    fn recovers_a_cubic() {
        let pts: Vec<Vec<f64>> = (0..40).map(|i| vec![-2.0 + 0.1 * i as f64]).collect();
        let ys: Vec<f64> = pts.iter().map(|x| 1.0 - x[0] + 0.5 * x[0].powi(3)).collect();
        let fit = Regressor::new(PolyBasis::new(1, 3), &pts).unwrap().fit(&ys).unwrap();
        assert!((fit.predict(&[0.7]) - (1.0 - 0.7 + 0.5 * 0.343)).abs() < 1e-9);
    }

    #[test]
    fn constant_design_gives_the_mean() {
        let pts = vec![vec![0.0]; 4];
        let fit = Regressor::new(PolyBasis::new(1, 2), &pts).unwrap().fit(&[1.0, 2.0, 3.0, 6.0]).unwrap();
        assert!((fit.predict(&[0.0]) - 3.0).abs() < 1e-12);
    }
}
