use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

use crate::dd::DoubleDouble;

/// Real scalar the engines are generic over: `f32`, `f64` or [`DoubleDouble`].
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Infallible for the implementors in this crate.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Carries an absolute/relative tolerance stated for `f64` over to this
    /// type, keeping the same fraction of significant digits.
    fn tol(f64_tol: f64) -> Self {
        let scale = Self::epsilon().to_f64_lossy().ln() / f64::EPSILON.ln();
        Self::lit(f64_tol.ln() * scale).exp()
    }
}

impl Real for f32 {}
impl Real for f64 {}
impl Real for DoubleDouble {}

/// `ln(n!)` by direct summation for small `n`, Stirling's series beyond.
pub fn ln_factorial<T: Real>(n: usize) -> T {
    if n < 64 {
        let mut acc = T::zero();
        for k in 2..=n {
            acc += T::of_usize(k).ln();
        }
        return acc;
    }
    let x = T::of_usize(n + 1);
    let half = T::lit(0.5);
    let ln_2pi = (T::PI() + T::PI()).ln();
    let x2 = x * x;
    (x - half) * x.ln() - x + half * ln_2pi + T::one() / (T::lit(12.0) * x)
        - T::one() / (T::lit(360.0) * x * x2)
        + T::one() / (T::lit(1260.0) * x2 * x2 * x)
        - T::one() / (T::lit(1680.0) * x2 * x2 * x2 * x)
}

/// Shortest decimal rendering after rounding to 12 significant digits, so
/// `0.3 + 0.6` prints as `0.9`.
pub fn display_rounded(x: f64) -> String {
    if !x.is_finite() || x == 0.0 {
        return format!("{x}");
    }
    let rounded: f64 = format!("{x:.11e}").parse().unwrap_or(x);
    format!("{rounded}")
}

/// Neumaier-compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum<T> {
    sum: T,
    comp: T,
    largest: T,
}

impl<T: Real> CompensatedSum<T> {
    pub fn new() -> Self {
        Self {
            sum: T::zero(),
            comp: T::zero(),
            largest: T::zero(),
        }
    }

    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
        self.largest = self.largest.max(x.abs());
    }

    pub fn value(&self) -> T {
        self.sum + self.comp
    }

    /// Largest |term| seen so far.
    pub fn largest_term(&self) -> T {
        self.largest
    }
}

impl<T: Real> Extend<T> for CompensatedSum<T> {
    fn extend<I: IntoIterator<Item = T>>(&mut self, iter: I) {
        for x in iter {
            self.add(x);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tol_is_identity_for_f64() {
        assert!((f64::tol(1e-9) - 1e-9).abs() < 1e-20);
        let t32 = f32::tol(1e-9);
        assert!(t32 > 1e-5 && t32 < 1e-3, "{t32}");
        let tdd = DoubleDouble::tol(1e-9).to_f64_lossy();
        assert!(tdd < 1e-17, "{tdd}");
    }

    #[test]
    fn ln_factorial_matches_direct_product() {
        let mut direct = 0.0f64;
        for n in 1..=120usize {
            direct += (n as f64).ln();
            let v: f64 = ln_factorial(n);
            assert!((v - direct).abs() < 1e-11 * direct.max(1.0), "n={n}");
        }
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::<f64>::new();
        s.extend([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(s.value(), 2.0);
        assert_eq!(s.largest_term(), 1e100);
    }
}
