//! Collocation rows of the transform identity.
//!
//! Writing `w = mu + s`, `z_j = mu + xi_j` and `P_m = E[e^{-mu A} (mu A)^m / m!]`,
//! every unknown-dependent term of the identity is affine in
//! `(c_0, c_1, .., c_N)`. The series over derivative order are summed in closed
//! form through `alpha(-xi)`, `alpha(-s)` and finitely many `P_m`, except for
//! the normalized tails `sum_{m>i} (z/mu)^(m-i-1) P_m`, which are summed
//! directly when `|z| <= mu/2` (no cancellation there).

use num_complex::Complex;

use super::roots::CharacteristicProblem;
use crate::error::{Error, Result};
use crate::scalar::Real;

const SERIES_CUTOFF: f64 = 1e-14;
pub const K_MAX: usize = 500;

pub struct CollocationSystem<'a, T> {
    prob: &'a CharacteristicProblem<T>,
    roots: &'a [Complex<T>],
    /// `P_0 .. P_{N-1}`.
    mass: Vec<T>,
    /// `P[B <= A]`.
    p_b_le_a: T,
    /// Per root: `alpha(-xi)`, `J(xi)`, tails `ts_i(z)` for `i < N`, and
    /// `S_i(xi) = sum_{k<=i} P_k mu^(i-k) / (mu - xi)^(i-k+1)`.
    per_root: Vec<RootTerms<T>>,
}

struct RootTerms<T> {
    alpha_neg: Complex<T>,
    j: Complex<T>,
    tails: Vec<Complex<T>>,
    s_terms: Vec<Complex<T>>,
}

impl<'a, T: Real> CollocationSystem<'a, T> {
    pub fn new(prob: &'a CharacteristicProblem<T>, roots: &'a [Complex<T>]) -> Result<Self> {
        let n = prob.degree();
        let mu = prob.mu();
        let mass: Vec<T> = (0..n).map(|m| prob.arrival.poisson_mass(mu, m)).collect();
        let mut p_b_le_a = T::one();
        for (order, k) in prob.service.components() {
            p_b_le_a -= k * mass[..order].iter().copied().sum::<T>();
        }
        let mut per_root = Vec::with_capacity(roots.len());
        for &xi in roots {
            let z = xi + mu;
            let alpha_neg = prob.arrival.lst_reflected(xi);
            let tails = (0..n)
                .map(|i| normalized_tail(prob, &mass, alpha_neg, z, i))
                .collect::<Result<Vec<_>>>()?;
            let mut j = Complex::new(T::zero(), T::zero());
            let head = (alpha_neg - T::one()) / xi;
            for (order, k) in prob.service.components() {
                let tail_sum = tails[..order]
                    .iter()
                    .fold(Complex::new(T::zero(), T::zero()), |a, t| a + *t);
                j += (head - tail_sum / mu) * k;
            }
            let inv = (Complex::new(mu, T::zero()) - xi).inv();
            let s_terms = (0..n)
                .map(|i| {
                    (0..=i).fold(Complex::new(T::zero(), T::zero()), |acc, kk| {
                        let e = i - kk;
                        acc + inv.powi(e as i32 + 1) * (mass[kk] * mu.powi(e as i32))
                    })
                })
                .collect();
            per_root.push(RootTerms {
                alpha_neg,
                j,
                tails,
                s_terms,
            });
        }
        Ok(Self {
            prob,
            roots,
            mass,
            p_b_le_a,
            per_root,
        })
    }

    pub fn p_b_le_a(&self) -> T {
        self.p_b_le_a
    }

    /// Normalization row `c0 - sum c_j / xi_j = 1`.
    pub fn normalization_row(&self) -> Vec<Complex<T>> {
        std::iter::once(Complex::new(T::one(), T::zero()))
            .chain(self.roots.iter().map(|xi| -xi.inv()))
            .collect()
    }

    /// Coefficients of `(c0, c_1, .., c_N)` in the identity at `s`; the
    /// right-hand side is `1 - p`.
    pub fn row(&self, s: Complex<T>) -> Result<Vec<Complex<T>>> {
        let prob = self.prob;
        let p = prob.p;
        let q = T::one() - p;
        let mu = prob.mu();
        let w = s + mu;
        let r = Complex::new(mu, T::zero()) / w;
        let alpha_s = prob.arrival.lst_reflected(s);
        let beta = prob.service.lst(s)?;
        let d_tilde = Complex::new(T::one(), T::zero()) - alpha_s * beta * p;
        let zero = Complex::new(T::zero(), T::zero());

        // powers r^k, k = 0..=N
        let n = prob.degree();
        let mut rp = Vec::with_capacity(n + 1);
        let mut acc = Complex::new(T::one(), T::zero());
        for _ in 0..=n {
            rp.push(acc);
            acc *= r;
        }

        let mut out = Vec::with_capacity(self.roots.len() + 1);
        let mut m0 = zero;
        let mut idle = zero;
        for (order, k) in prob.service.components() {
            let mut inner = rp[order] * alpha_s;
            for i in 0..order {
                inner -= rp[order - i] * self.mass[i];
                idle += (Complex::new(T::one(), T::zero()) - rp[order - i]) * (k * self.mass[i]);
            }
            m0 += inner * k;
        }
        out.push(d_tilde - Complex::new(p * self.p_b_le_a, T::zero()) + m0 * p + idle * q);

        for (xi, t) in self.roots.iter().zip(&self.per_root) {
            let eta = *xi - s;
            let mut integral = zero;
            let mut idle = zero;
            for (order, k) in prob.service.components() {
                let mut inner = rp[order] * (t.alpha_neg - alpha_s) / eta;
                for i in 0..order {
                    inner -= rp[order - i] * t.tails[i] / mu;
                    idle += t.s_terms[i] * (Complex::new(T::one(), T::zero()) - rp[order - i]) * k;
                }
                integral += inner * k;
            }
            out.push(d_tilde / (s - *xi) - t.j * p + integral * p + idle * q);
        }
        Ok(out)
    }
}

/// `sum_{m>i} (z/mu)^(m-i-1) P_m`, i.e. `E[e^{-mu A} sum_{m>i} (zA)^m/m!] / (z/mu)^(i+1)`.
fn normalized_tail<T: Real>(
    prob: &CharacteristicProblem<T>,
    mass: &[T],
    alpha_neg: Complex<T>,
    z: Complex<T>,
    i: usize,
) -> Result<Complex<T>> {
    let mu = prob.mu();
    let u = z / mu;
    if z.norm() <= mu * T::lit(0.5) {
        let cutoff = T::lit(SERIES_CUTOFF);
        let mut acc = Complex::new(T::zero(), T::zero());
        let mut pow = Complex::new(T::one(), T::zero());
        let mut prev = T::infinity();
        for m in (i + 1)..=K_MAX {
            let pm = prob.arrival.poisson_mass(mu, m);
            acc += pow * pm;
            if pm < cutoff && pm <= prev {
                return Ok(acc);
            }
            prev = pm;
            pow *= u;
        }
        return Err(Error::SeriesNotConverged { order: K_MAX });
    }
    let mut head = Complex::new(T::zero(), T::zero());
    let mut pow = Complex::new(T::one(), T::zero());
    for m in 0..=i {
        let pm = if m < mass.len() {
            mass[m]
        } else {
            prob.arrival.poisson_mass(mu, m)
        };
        head += pow * pm;
        pow *= u;
    }
    Ok((alpha_neg - head) / pow)
}
