//! Double-double floating point: an unevaluated sum `hi + lo` of two `f64`
//! with `|lo| <= ulp(hi)/2`, giving roughly 106 bits of significand.
//!
//! Arithmetic, `sqrt`, `exp`, `ln`, `powi` and `powf` are carried out to full
//! double-double accuracy. Trigonometric and hyperbolic functions delegate to
//! `f64` and are only accurate to double precision.

use std::cmp::Ordering;
use std::fmt;
use std::iter::{Product, Sum};
use std::num::FpCategory;
use std::ops::{
    Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign,
};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};

#[derive(Clone, Copy, Default)]
pub struct DoubleDouble {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

const LN2: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::LN_2, 2.3190468138462996e-17);
const PI: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::PI, 1.2246467991473532e-16);
const E: DoubleDouble = DoubleDouble::from_parts(std::f64::consts::E, 1.4456468917292502e-16);
const LN10: DoubleDouble =
    DoubleDouble::from_parts(std::f64::consts::LN_10, -2.1707562233822494e-16);
const SQRT2: DoubleDouble =
    DoubleDouble::from_parts(std::f64::consts::SQRT_2, -9.667293313452913e-17);

impl DoubleDouble {
    /// 2^-104.
    pub const EPSILON: f64 = 4.930380657631324e-32;

    #[inline]
    pub const fn of(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub const fn from_parts(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub fn hi(self) -> f64 {
        self.hi
    }

    pub fn lo(self) -> f64 {
        self.lo
    }

    #[inline]
    fn renorm(hi: f64, lo: f64) -> Self {
        if !hi.is_finite() {
            return Self { hi, lo: 0.0 };
        }
        let (h, l) = quick_two_sum(hi, lo);
        Self { hi: h, lo: l }
    }

    #[inline]
    fn add_f64(self, b: f64) -> Self {
        let (s1, s2) = two_sum(self.hi, b);
        Self::renorm(s1, s2 + self.lo)
    }

    #[inline]
    fn mul_f64(self, b: f64) -> Self {
        let (p1, p2) = two_prod(self.hi, b);
        Self::renorm(p1, p2 + self.lo * b)
    }

    #[inline]
    fn ldexp(self, k: i32) -> Self {
        let s = 2f64.powi(k);
        Self {
            hi: self.hi * s,
            lo: self.lo * s,
        }
    }

    fn exp_impl(self) -> Self {
        if self.hi > 709.782712893384 {
            return Self::of(f64::INFINITY);
        }
        if self.hi < -745.1332191019411 {
            return Self::zero();
        }
        if self.hi == 0.0 && self.lo == 0.0 {
            return Self::one();
        }
        // x = m ln2 + r, then exp(r) = (exp(r / 2^9))^(2^9)
        let m = (self.hi / LN2.hi + 0.5).floor();
        let r = (self - LN2 * Self::of(m)).ldexp(-9);
        // s = exp(r) - 1 by Taylor series
        let mut term = r;
        let mut s = r;
        let thresh = Self::EPSILON * 1e-2;
        for k in 2..40 {
            term = term * r / Self::of(k as f64);
            s += term;
            if term.hi.abs() <= thresh * s.hi.abs() {
                break;
            }
        }
        // exp(2r) - 1 = 2 s + s^2
        for _ in 0..9 {
            s = s.ldexp(1) + s * s;
        }
        (s + Self::one()).ldexp(m as i32)
    }

    fn ln_impl(self) -> Self {
        if self.hi.is_nan() || self.hi < 0.0 {
            return Self::of(f64::NAN);
        }
        if self.hi == 0.0 {
            return Self::of(f64::NEG_INFINITY);
        }
        if self.hi.is_infinite() {
            return self;
        }
        if self.hi == 1.0 && self.lo == 0.0 {
            return Self::zero();
        }
        // Newton on exp(y) = x doubles the number of correct digits.
        let mut y = Self::of(self.hi.ln());
        y = y + self * (-y).exp_impl() - Self::one();
        y
    }

    fn sqrt_impl(self) -> Self {
        if self.hi == 0.0 {
            return Self::zero();
        }
        if self.hi < 0.0 {
            return Self::of(f64::NAN);
        }
        if self.hi.is_infinite() {
            return self;
        }
        let x = 1.0 / self.hi.sqrt();
        let ax = self.hi * x;
        let (sq_hi, sq_lo) = two_prod(ax, ax);
        let diff = self - Self::renorm(sq_hi, sq_lo);
        Self::of(ax).add_f64(diff.hi * (x * 0.5))
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }
}

impl From<DoubleDouble> for f64 {
    fn from(x: DoubleDouble) -> f64 {
        x.hi + x.lo
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.hi == other.hi && self.lo == other.lo
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi.partial_cmp(&other.hi)? {
            Ordering::Equal => self.lo.partial_cmp(&other.lo),
            o => Some(o),
        }
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi, self.lo)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.hi, f)
    }
}

impl fmt::LowerExp for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&self.hi, f)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        Self {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    #[inline]
    fn add(self, b: Self) -> Self {
        let (s1, s2) = two_sum(self.hi, b.hi);
        if !s1.is_finite() {
            return Self::of(s1);
        }
        let (t1, t2) = two_sum(self.lo, b.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        Self::renorm(s1, s2 + t2)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    #[inline]
    fn sub(self, b: Self) -> Self {
        self + (-b)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    #[inline]
    fn mul(self, b: Self) -> Self {
        let (p1, p2) = two_prod(self.hi, b.hi);
        if !p1.is_finite() {
            return Self::of(p1);
        }
        Self::renorm(p1, p2 + (self.hi * b.lo + self.lo * b.hi))
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    #[inline]
    fn div(self, b: Self) -> Self {
        let q1 = self.hi / b.hi;
        if !q1.is_finite() || q1 == 0.0 {
            return Self::of(q1);
        }
        let r = self - b.mul_f64(q1);
        let q2 = r.hi / b.hi;
        let r = r - b.mul_f64(q2);
        let q3 = r.hi / b.hi;
        let (q1, q2) = quick_two_sum(q1, q2);
        Self { hi: q1, lo: q2 }.add_f64(q3)
    }
}

impl Rem for DoubleDouble {
    type Output = Self;
    fn rem(self, b: Self) -> Self {
        self - (self / b).trunc() * b
    }
}

macro_rules! assign_op {
    ($tr:ident, $m:ident, $op:tt) => {
        impl $tr for DoubleDouble {
            #[inline]
            fn $m(&mut self, rhs: Self) {
                *self = *self $op rhs;
            }
        }
    };
}
assign_op!(AddAssign, add_assign, +);
assign_op!(SubAssign, sub_assign, -);
assign_op!(MulAssign, mul_assign, *);
assign_op!(DivAssign, div_assign, /);
assign_op!(RemAssign, rem_assign, %);

impl Sum for DoubleDouble {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + b)
    }
}

impl<'a> Sum<&'a DoubleDouble> for DoubleDouble {
    fn sum<I: Iterator<Item = &'a Self>>(iter: I) -> Self {
        iter.fold(Self::zero(), |a, b| a + *b)
    }
}

impl Product for DoubleDouble {
    fn product<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::one(), |a, b| a * b)
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        Self { hi: 0.0, lo: 0.0 }
    }
    fn is_zero(&self) -> bool {
        self.hi == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        Self { hi: 1.0, lo: 0.0 }
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = num_traits::ParseFloatError;
    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::of)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        let t = self.trunc();
        t.hi.to_i64().map(|h| h.wrapping_add(t.lo as i64))
    }
    fn to_u64(&self) -> Option<u64> {
        let t = self.trunc();
        if t.hi < 0.0 {
            return None;
        }
        t.hi.to_u64().map(|h| (h as i128 + t.lo as i128) as u64)
    }
    fn to_f64(&self) -> Option<f64> {
        Some(self.hi + self.lo)
    }
    fn to_f32(&self) -> Option<f32> {
        Some((self.hi + self.lo) as f32)
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::renorm(hi, lo))
    }
    fn from_u64(n: u64) -> Option<Self> {
        let hi = n as f64;
        let lo = (n as i128 - hi as i128) as f64;
        Some(Self::renorm(hi, lo))
    }
    fn from_f64(n: f64) -> Option<Self> {
        Some(Self::of(n))
    }
    fn from_f32(n: f32) -> Option<Self> {
        Some(Self::of(n as f64))
    }
}

impl NumCast for DoubleDouble {
    fn from<T: ToPrimitive>(n: T) -> Option<Self> {
        if let Some(i) = n.to_i64() {
            if let Some(f) = n.to_f64() {
                if f == i as f64 {
                    return <Self as FromPrimitive>::from_i64(i);
                }
            }
        }
        n.to_f64().map(<Self as From<f64>>::from)
    }
}

impl Float for DoubleDouble {
    fn nan() -> Self {
        Self::of(f64::NAN)
    }
    fn infinity() -> Self {
        Self::of(f64::INFINITY)
    }
    fn neg_infinity() -> Self {
        Self::of(f64::NEG_INFINITY)
    }
    fn neg_zero() -> Self {
        Self::of(-0.0)
    }
    fn min_value() -> Self {
        Self::of(f64::MIN)
    }
    fn min_positive_value() -> Self {
        Self::of(f64::MIN_POSITIVE)
    }
    fn epsilon() -> Self {
        Self::of(Self::EPSILON)
    }
    fn max_value() -> Self {
        Self::of(f64::MAX)
    }
    fn is_nan(self) -> bool {
        self.hi.is_nan()
    }
    fn is_infinite(self) -> bool {
        self.hi.is_infinite()
    }
    fn is_finite(self) -> bool {
        self.hi.is_finite()
    }
    fn is_normal(self) -> bool {
        self.hi.is_normal()
    }
    fn classify(self) -> FpCategory {
        self.hi.classify()
    }
    fn floor(self) -> Self {
        let hi = self.hi.floor();
        if hi == self.hi {
            Self::renorm(hi, self.lo.floor())
        } else {
            Self::of(hi)
        }
    }
    fn ceil(self) -> Self {
        let hi = self.hi.ceil();
        if hi == self.hi {
            Self::renorm(hi, self.lo.ceil())
        } else {
            Self::of(hi)
        }
    }
    fn round(self) -> Self {
        if self.hi >= 0.0 {
            (self + Self::of(0.5)).floor()
        } else {
            (self - Self::of(0.5)).ceil()
        }
    }
    fn trunc(self) -> Self {
        if self.hi >= 0.0 {
            self.floor()
        } else {
            self.ceil()
        }
    }
    fn fract(self) -> Self {
        self - self.trunc()
    }
    fn abs(self) -> Self {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }
    fn signum(self) -> Self {
        Self::of(self.hi.signum())
    }
    fn is_sign_positive(self) -> bool {
        self.hi.is_sign_positive()
    }
    fn is_sign_negative(self) -> bool {
        self.hi.is_sign_negative()
    }
    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }
    fn recip(self) -> Self {
        Self::one() / self
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Self::one();
        }
        let mut base = self;
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc *= base;
            }
            base = base * base;
            e >>= 1;
        }
        if n < 0 {
            acc.recip()
        } else {
            acc
        }
    }
    fn powf(self, n: Self) -> Self {
        if n.is_zero() {
            return Self::one();
        }
        if self.is_zero() {
            return if n.hi > 0.0 {
                Self::zero()
            } else {
                Self::infinity()
            };
        }
        if n.fract().is_zero() && n.hi.abs() < i32::MAX as f64 {
            return self.powi(n.hi as i32);
        }
        (n * self.ln_impl()).exp_impl()
    }
    fn sqrt(self) -> Self {
        self.sqrt_impl()
    }
    fn exp(self) -> Self {
        self.exp_impl()
    }
    fn exp2(self) -> Self {
        (self * LN2).exp_impl()
    }
    fn ln(self) -> Self {
        self.ln_impl()
    }
    fn log(self, base: Self) -> Self {
        self.ln_impl() / base.ln_impl()
    }
    fn log2(self) -> Self {
        self.ln_impl() / LN2
    }
    fn log10(self) -> Self {
        self.ln_impl() / LN10
    }
    fn max(self, other: Self) -> Self {
        if self.is_nan() || other > self {
            other
        } else {
            self
        }
    }
    fn min(self, other: Self) -> Self {
        if self.is_nan() || other < self {
            other
        } else {
            self
        }
    }
    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Self::zero()
        }
    }
    fn cbrt(self) -> Self {
        if self.is_zero() {
            return self;
        }
        let y = Self::of(self.hi.cbrt());
        // one Newton step on y^3 = x
        y - (y * y * y - self) / (Self::of(3.0) * y * y)
    }
    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt_impl()
    }
    fn sin(self) -> Self {
        Self::of(self.hi.sin())
    }
    fn cos(self) -> Self {
        Self::of(self.hi.cos())
    }
    fn tan(self) -> Self {
        Self::of(self.hi.tan())
    }
    fn asin(self) -> Self {
        Self::of(self.hi.asin())
    }
    fn acos(self) -> Self {
        Self::of(self.hi.acos())
    }
    fn atan(self) -> Self {
        Self::of(self.hi.atan())
    }
    fn atan2(self, other: Self) -> Self {
        Self::of(self.hi.atan2(other.hi))
    }
    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }
    fn exp_m1(self) -> Self {
        if self.hi.abs() < 1e-3 {
            // cancellation-free Taylor sum
            let mut term = self;
            let mut s = self;
            for k in 2..30 {
                term = term * self / Self::of(k as f64);
                s += term;
            }
            s
        } else {
            self.exp_impl() - Self::one()
        }
    }
    fn ln_1p(self) -> Self {
        (Self::one() + self).ln_impl()
    }
    fn sinh(self) -> Self {
        let e = self.exp_impl();
        (e - e.recip()).ldexp(-1)
    }
    fn cosh(self) -> Self {
        let e = self.exp_impl();
        (e + e.recip()).ldexp(-1)
    }
    fn tanh(self) -> Self {
        self.sinh() / self.cosh()
    }
    fn asinh(self) -> Self {
        Self::of(self.hi.asinh())
    }
    fn acosh(self) -> Self {
        Self::of(self.hi.acosh())
    }
    fn atanh(self) -> Self {
        Self::of(self.hi.atanh())
    }
    fn integer_decode(self) -> (u64, i16, i8) {
        self.hi.integer_decode()
    }
}

impl FloatConst for DoubleDouble {
    fn E() -> Self {
        E
    }
    fn FRAC_1_PI() -> Self {
        PI.recip()
    }
    fn FRAC_1_SQRT_2() -> Self {
        SQRT2.recip()
    }
    fn FRAC_2_PI() -> Self {
        Self::of(2.0) / PI
    }
    fn FRAC_2_SQRT_PI() -> Self {
        Self::of(2.0) / PI.sqrt_impl()
    }
    fn FRAC_PI_2() -> Self {
        PI.ldexp(-1)
    }
    fn FRAC_PI_3() -> Self {
        PI / Self::of(3.0)
    }
    fn FRAC_PI_4() -> Self {
        PI.ldexp(-2)
    }
    fn FRAC_PI_6() -> Self {
        PI / Self::of(6.0)
    }
    fn FRAC_PI_8() -> Self {
        PI.ldexp(-3)
    }
    fn LN_10() -> Self {
        LN10
    }
    fn LN_2() -> Self {
        LN2
    }
    fn LOG10_E() -> Self {
        LN10.recip()
    }
    fn LOG2_E() -> Self {
        LN2.recip()
    }
    fn PI() -> Self {
        PI
    }
    fn SQRT_2() -> Self {
        SQRT2
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dd(x: f64) -> DoubleDouble {
        DoubleDouble::of(x)
    }

    fn close(a: DoubleDouble, b: DoubleDouble, rel: f64) -> bool {
        ((a - b).abs() / b.abs()).hi <= rel
    }

    #[test]
    fn one_third_times_three_is_one() {
        let third = dd(1.0) / dd(3.0);
        let back = third * dd(3.0);
        assert!((back - dd(1.0)).abs().hi < 1e-31);
        assert!(third.lo() != 0.0);
    }

    #[test]
    fn exp_ln_roundtrip() {
        for &x in &[1e-20, 0.3, 1.0, 2.5, 17.0, 200.0] {
            let v = dd(x);
            assert!(close(v.ln().exp(), v, 1e-30), "x={x}");
        }
        for &x in &[-30.0, -1.0, -1e-5, 0.7, 40.0] {
            let v = dd(x);
            assert!(close(v.exp().ln(), v, 1e-29), "x={x}");
        }
    }

    #[test]
    fn exp_of_one_is_e() {
        assert!(close(dd(1.0).exp(), E, 1e-31));
        assert!(close(dd(2.0).ln(), LN2, 1e-31));
        assert!(close(dd(10.0).ln(), LN10, 1e-31));
    }

    #[test]
    fn sqrt_squares_back() {
        for &x in &[2.0, 5.0 / 9.0, 1e-10, 12345.678] {
            let r = dd(x).sqrt();
            assert!(close(r * r, dd(x), 1e-31));
        }
        assert!(close(dd(2.0).sqrt(), SQRT2, 1e-31));
    }

    #[test]
    fn powi_and_powf_agree() {
        let b = dd(1.0) / dd(3.0);
        assert!(close(b.powi(7), b * b * b * b * b * b * b, 1e-30));
        assert!(close(b.powf(dd(7.0)), b.powi(7), 1e-30));
        assert!(close(dd(2.0).powf(dd(0.5)), SQRT2, 1e-30));
        assert!(close(b.powi(-2), dd(9.0), 1e-30));
    }

    #[test]
    fn floor_handles_low_word() {
        let x = DoubleDouble::from_parts(3.0, -1e-20);
        assert_eq!(x.floor(), dd(2.0));
        assert_eq!(dd(2.75).floor(), dd(2.0));
        assert_eq!(dd(-2.25).trunc(), dd(-2.0));
    }

    #[test]
    fn overflow_is_infinite_not_nan() {
        assert!(dd(1000.0).exp().is_infinite());
        assert_eq!(dd(-1000.0).exp(), dd(0.0));
        assert!((dd(1e300) * dd(1e300)).is_infinite());
    }
}
