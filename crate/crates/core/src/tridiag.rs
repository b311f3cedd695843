//! Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Tridiagonal matrix stored by diagonals; `lower[0]` and `upper[n - 1]` are unused.
#[derive(Debug, Clone, Default)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn zeros(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    /// `y = A x`.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.lower[i] * x[i - 1];
            }
            if i + 1 < n {
                s += self.upper[i] * x[i + 1];
            }
            y[i] = s;
        }
    }

    /// Solves `A x = rhs` in place; `scratch` must have the same length.
    pub fn solve_in_place(&self, rhs: &mut [f64], scratch: &mut [f64]) -> Result<()> {
        let n = self.len();
        debug_assert_eq!(rhs.len(), n);
        debug_assert_eq!(scratch.len(), n);
        if n == 0 {
            return Ok(());
        }
        let mut pivot = self.diag[0];
        if pivot == 0.0 || !pivot.is_finite() {
            return Err(Error::ZeroPivot { row: 0 });
        }
        scratch[0] = self.upper[0] / pivot;
        rhs[0] /= pivot;
        for i in 1..n {
            pivot = self.diag[i] - self.lower[i] * scratch[i - 1];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::ZeroPivot { row: i });
            }
            scratch[i] = if i + 1 < n {
                self.upper[i] / pivot
            } else {
                0.0
            };
            rhs[i] = (rhs[i] - self.lower[i] * rhs[i - 1]) / pivot;
        }
        for i in (0..n - 1).rev() {
            rhs[i] -= scratch[i] * rhs[i + 1];
        }
        Ok(())
    }

    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let mut x = rhs.to_vec();
        let mut scratch = vec![0.0; rhs.len()];
        self.solve_in_place(&mut x, &mut scratch)?;
        Ok(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_against_dense_product() {
        let n = 7;
        let mut a = Tridiagonal::zeros(n);
        for i in 0..n {
            a.diag[i] = 4.0 + i as f64 * 0.1;
            a.lower[i] = -1.0 + 0.05 * i as f64;
            a.upper[i] = -0.7;
        }
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let mut b = vec![0.0; n];
        a.apply(&x, &mut b);
        let sol = a.solve(&b).unwrap();
        for (p, q) in sol.iter().zip(&x) {
            assert!((p - q).abs() < 1e-13);
        }
    }

    #[test]
    fn zero_pivot_is_reported() {
        let mut a = Tridiagonal::zeros(3);
        a.diag = vec![1.0, 1.0, 1.0];
        a.upper[0] = 1.0;
        a.lower[1] = 1.0;
        assert_eq!(a.solve(&[1.0, 1.0, 1.0]), Err(Error::ZeroPivot { row: 1 }));
    }
}
