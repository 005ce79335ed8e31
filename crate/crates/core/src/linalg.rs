//! Dense complex LU factorization with partial pivoting.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct ComplexLu<T> {
    lu: Vec<Vec<Complex<T>>>,
    perm: Vec<usize>,
    norm1: T,
}

impl<T: Real> ComplexLu<T> {
    pub fn factor(a: &[Vec<Complex<T>>]) -> Result<Self> {
        let n = a.len();
        if a.iter().any(|row| row.len() != n) {
            return Err(Error::InvalidParameter("matrix must be square".into()));
        }
        let norm1 = (0..n)
            .map(|j| a.iter().map(|row| row[j].norm()).sum::<T>())
            .fold(T::zero(), T::max);
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let (piv, big) =
                (k..n)
                    .map(|i| (i, lu[i][k].norm()))
                    .fold(
                        (k, -T::one()),
                        |best, cur| if cur.1 > best.1 { cur } else { best },
                    );
            if big.is_zero() || !big.is_finite() {
                return Err(Error::SingularSystem {
                    cond: f64::INFINITY,
                    limit: 0.0,
                });
            }
            lu.swap(k, piv);
            perm.swap(k, piv);
            let pivot = lu[k][k];
            for i in (k + 1)..n {
                let (top, rest) = lu.split_at_mut(i);
                let (row_k, row_i) = (&top[k], &mut rest[0]);
                let factor = row_i[k] / pivot;
                row_i[k] = factor;
                for (x, &t) in row_i[k + 1..].iter_mut().zip(&row_k[k + 1..]) {
                    *x -= factor * t;
                }
            }
        }
        Ok(Self { lu, perm, norm1 })
    }

    pub fn solve(&self, b: &[Complex<T>]) -> Vec<Complex<T>> {
        let n = self.lu.len();
        let mut x: Vec<Complex<T>> = self.perm.iter().map(|&i| b[i]).collect();
        for i in 0..n {
            for j in 0..i {
                let t = self.lu[i][j] * x[j];
                x[i] -= t;
            }
        }
        for i in (0..n).rev() {
            for j in (i + 1)..n {
                let t = self.lu[i][j] * x[j];
                x[i] -= t;
            }
            x[i] /= self.lu[i][i];
        }
        x
    }

    /// `||A||_1 ||A^{-1}||_1`, with the inverse formed column by column
    /// (the systems here are small).
    pub fn condition(&self) -> T {
        let n = self.lu.len();
        let mut inv_norm = T::zero();
        for j in 0..n {
            let mut e = vec![Complex::new(T::zero(), T::zero()); n];
            e[j] = Complex::new(T::one(), T::zero());
            let col = self.solve(&e);
            inv_norm = inv_norm.max(col.iter().map(|z| z.norm()).sum());
        }
        self.norm1 * inv_norm
    }
}

/// Solves `A x = b`, refusing systems whose condition estimate exceeds `limit`.
pub fn solve_checked<T: Real>(
    a: &[Vec<Complex<T>>],
    b: &[Complex<T>],
    limit: f64,
) -> Result<(Vec<Complex<T>>, f64)> {
    let lu = ComplexLu::factor(a).map_err(|e| match e {
        Error::SingularSystem { cond, .. } => Error::SingularSystem { cond, limit },
        other => other,
    })?;
    let cond = lu.condition().to_f64_lossy();
    if !(cond <= limit) {
        return Err(Error::SingularSystem { cond, limit });
    }
    Ok((lu.solve(b), cond))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex<f64> {
        Complex::new(re, im)
    }

    #[test]
    fn solves_small_complex_system() {
        let a = vec![
            vec![c(0.0, 1.0), c(2.0, 0.0), c(1.0, -1.0)],
            vec![c(1.0, 0.0), c(0.0, 0.0), c(3.0, 0.5)],
            vec![c(-1.0, 2.0), c(1.0, 1.0), c(0.0, 0.0)],
        ];
        let x_true = vec![c(1.0, -2.0), c(0.5, 0.25), c(-3.0, 1.0)];
        let b: Vec<_> = a
            .iter()
            .map(|row| row.iter().zip(&x_true).map(|(r, x)| r * x).sum())
            .collect();
        let (x, cond) = solve_checked(&a, &b, 1e12).unwrap();
        for (u, v) in x.iter().zip(&x_true) {
            assert!((u - v).norm() < 1e-13);
        }
        assert!(cond >= 1.0);
    }

    #[test]
    fn singular_system_rejected() {
        let a = vec![
            vec![c(1.0, 0.0), c(2.0, 0.0)],
            vec![c(2.0, 0.0), c(4.0, 0.0)],
        ];
        let err = solve_checked(&a, &[c(1.0, 0.0), c(2.0, 0.0)], 1e12).unwrap_err();
        assert_eq!(err.kind(), "SingularSystem");
    }

    #[test]
    fn condition_of_diagonal() {
        let a = vec![
            vec![c(1e-3, 0.0), c(0.0, 0.0)],
            vec![c(0.0, 0.0), c(10.0, 0.0)],
        ];
        let lu = ComplexLu::factor(&a).unwrap();
        assert!((lu.condition() - 1e4).abs() < 1e-8);
    }
}
