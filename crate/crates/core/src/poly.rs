//! Dense polynomials with coefficients in ascending order of powers, and a
//! simultaneous (Aberth–Ehrlich) root finder.

use num_complex::Complex;
use num_traits::Zero;

use crate::scalar::Real;

pub fn mul_real<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    if a.is_empty() || b.is_empty() {
        return Vec::new();
    }
    let mut out = vec![T::zero(); a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

pub fn add_real<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = vec![T::zero(); a.len().max(b.len())];
    for (i, &x) in a.iter().enumerate() {
        out[i] += x;
    }
    for (i, &y) in b.iter().enumerate() {
        out[i] += y;
    }
    out
}

pub fn scale_real<T: Real>(a: &[T], k: T) -> Vec<T> {
    a.iter().map(|&x| x * k).collect()
}

/// `(c0 + c1 s)^n`.
pub fn pow_linear<T: Real>(c0: T, c1: T, n: usize) -> Vec<T> {
    let mut out = vec![T::one()];
    for _ in 0..n {
        out = mul_real(&out, &[c0, c1]);
    }
    out
}

/// Horner evaluation of a real polynomial at a complex point.
pub fn eval_real<T: Real>(coeffs: &[T], s: Complex<T>) -> Complex<T> {
    coeffs
        .iter()
        .rev()
        .fold(Complex::zero(), |acc, &c| acc * s + c)
}

/// Value and first derivative.
pub fn eval_real_with_deriv<T: Real>(coeffs: &[T], s: Complex<T>) -> (Complex<T>, Complex<T>) {
    let mut p = Complex::zero();
    let mut dp = Complex::zero();
    for &c in coeffs.iter().rev() {
        dp = dp * s + p;
        p = p * s + c;
    }
    (p, dp)
}

pub fn derivative_real<T: Real>(coeffs: &[T]) -> Vec<T> {
    coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(i, &c)| c * T::of_usize(i))
        .collect()
}

/// Drops (numerically) vanishing leading coefficients.
pub fn trim_real<T: Real>(coeffs: &[T]) -> Vec<T> {
    let scale = coeffs.iter().fold(T::zero(), |m, c| m.max(c.abs()));
    let mut v = coeffs.to_vec();
    while v.len() > 1 && v.last().is_some_and(|c| c.abs() <= scale * T::epsilon()) {
        v.pop();
    }
    v
}

/// All complex roots of a real polynomial by Aberth–Ehrlich iteration.
///
/// Starting points lie on a circle whose radius comes from the Fujiwara
/// bound, rotated off the real axis so conjugate pairs separate.
pub fn roots_real<T: Real>(coeffs: &[T]) -> Vec<Complex<T>> {
    let coeffs = trim_real(coeffs);
    let deg = coeffs.len().saturating_sub(1);
    if deg == 0 {
        return Vec::new();
    }
    let lead = coeffs[deg];
    let monic: Vec<T> = coeffs.iter().map(|&c| c / lead).collect();
    if deg == 1 {
        return vec![Complex::new(-monic[0], T::zero())];
    }
    // Fujiwara bound on root moduli
    let mut radius = T::zero();
    for k in 1..=deg {
        let c = monic[deg - k].abs();
        let r = if k == deg {
            (c / T::lit(2.0)).powf(T::one() / T::of_usize(k))
        } else {
            c.powf(T::one() / T::of_usize(k))
        };
        radius = radius.max(r);
    }
    let radius = T::lit(2.0) * radius.max(T::lit(1e-3));
    let two_pi = T::PI() + T::PI();
    let mut z: Vec<Complex<T>> = (0..deg)
        .map(|k| {
            let theta = two_pi * T::of_usize(k) / T::of_usize(deg) + T::lit(0.4);
            Complex::from_polar(radius * T::lit(0.5), theta)
        })
        .collect();

    let dcoeffs = derivative_real(&monic);
    let tol = T::epsilon() * T::lit(4.0);
    for _ in 0..500 {
        let mut max_step = T::zero();
        for i in 0..deg {
            let (p, _) = eval_real_with_deriv(&monic, z[i]);
            if p.is_zero() {
                continue;
            }
            let dp = eval_real(&dcoeffs, z[i]);
            let ratio = p / dp;
            let mut sum = Complex::zero();
            for (j, &zj) in z.iter().enumerate() {
                if j != i {
                    let d = z[i] - zj;
                    if !d.is_zero() {
                        sum += d.inv();
                    }
                }
            }
            let denom = Complex::new(T::one(), T::zero()) - ratio * sum;
            let step = if denom.is_zero() {
                ratio
            } else {
                ratio / denom
            };
            if step.re.is_finite() && step.im.is_finite() {
                z[i] -= step;
                let rel = step.norm() / z[i].norm().max(T::one());
                max_step = max_step.max(rel);
            }
        }
        if max_step <= tol {
            break;
        }
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_roots() {
        // s^2 + s - 1
        let r = roots_real(&[-1.0, 1.0, 1.0]);
        let mut re: Vec<f64> = r.iter().map(|z| z.re).collect();
        re.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((re[0] - (-1.0 - 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((re[1] - (-1.0 + 5f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!(r.iter().all(|z| z.im.abs() < 1e-14));
    }

    #[test]
    fn complex_pair_and_residuals() {
        // (s^2 + 2s + 5)(s - 3)(s + 0.5)
        let p = mul_real(&mul_real(&[5.0, 2.0, 1.0], &[-3.0, 1.0]), &[0.5, 1.0]);
        let roots = roots_real(&p);
        assert_eq!(roots.len(), 4);
        for z in &roots {
            assert!(eval_real(&p, *z).norm() < 1e-12, "{z}");
        }
        assert!(roots
            .iter()
            .any(|z| (z - Complex::new(-1.0, 2.0)).norm() < 1e-12));
        assert!(roots
            .iter()
            .any(|z| (z - Complex::new(-1.0, -2.0)).norm() < 1e-12));
    }

    #[test]
    fn pow_linear_binomial() {
        let p = pow_linear(2.0, 1.0, 3);
        assert_eq!(p, vec![8.0, 12.0, 6.0, 1.0]);
    }

    #[test]
    fn higher_degree_wilkinson_like() {
        let mut p = vec![1.0];
        for k in 1..=8 {
            p = mul_real(&p, &[-(k as f64), 1.0]);
        }
        let mut r: Vec<f64> = roots_real(&p).iter().map(|z| z.re).collect();
        r.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (k, v) in r.iter().enumerate() {
            assert!((v - (k + 1) as f64).abs() < 1e-8, "{v}");
        }
    }
}
