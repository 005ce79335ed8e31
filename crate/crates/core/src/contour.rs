//! Argument-principle zero counting on axis-aligned rectangles.

use num_complex::Complex;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rect<T> {
    pub re_min: T,
    pub re_max: T,
    pub im_min: T,
    pub im_max: T,
}

impl<T: Real> Rect<T> {
    pub fn contains(&self, z: Complex<T>) -> bool {
        z.re > self.re_min && z.re < self.re_max && z.im > self.im_min && z.im < self.im_max
    }

    fn corners(&self) -> [Complex<T>; 4] {
        [
            Complex::new(self.re_min, self.im_min),
            Complex::new(self.re_max, self.im_min),
            Complex::new(self.re_max, self.im_max),
            Complex::new(self.re_min, self.im_max),
        ]
    }
}

const INITIAL_PIECES: usize = 64;
const MAX_DEPTH: usize = 60;
const MAX_STEP_ANGLE: f64 = 0.4;

/// Winding number of `f` along the boundary of `rect`, traversed
/// counter-clockwise. For `f` analytic inside, this is the number of zeros
/// (with multiplicity) minus the number of poles.
///
/// Each edge is split adaptively until consecutive argument increments are
/// small and consistent under bisection.
pub fn winding_number<T, F>(f: F, rect: &Rect<T>) -> Result<i64>
where
    T: Real,
    F: Fn(Complex<T>) -> Complex<T>,
{
    let corners = rect.corners();
    let mut total = T::zero();
    for e in 0..4 {
        let a = corners[e];
        let b = corners[(e + 1) % 4];
        let pieces = T::of_usize(INITIAL_PIECES);
        let mut za = a;
        let mut fa = eval_checked(&f, za)?;
        for k in 1..=INITIAL_PIECES {
            let zb = a + (b - a) * (T::of_usize(k) / pieces);
            let fb = eval_checked(&f, zb)?;
            total += segment(&f, za, zb, fa, fb, 0)?;
            za = zb;
            fa = fb;
        }
    }
    let turns = total / (T::PI() + T::PI());
    let rounded = turns.round();
    if (turns - rounded).abs() > T::lit(0.05) {
        return Err(Error::IllConditioned(format!(
            "winding number not integral: {}",
            turns.to_f64_lossy()
        )));
    }
    rounded
        .to_i64()
        .ok_or_else(|| Error::IllConditioned("winding number overflow".into()))
}

fn eval_checked<T: Real, F: Fn(Complex<T>) -> Complex<T>>(
    f: &F,
    z: Complex<T>,
) -> Result<Complex<T>> {
    let v = f(z);
    if !(v.re.is_finite() && v.im.is_finite()) || v.norm_sqr().is_zero() {
        return Err(Error::IllConditioned(format!(
            "function vanishes or is not finite on the contour at {} + {}i",
            z.re.to_f64_lossy(),
            z.im.to_f64_lossy()
        )));
    }
    Ok(v)
}

fn segment<T: Real, F: Fn(Complex<T>) -> Complex<T>>(
    f: &F,
    za: Complex<T>,
    zb: Complex<T>,
    fa: Complex<T>,
    fb: Complex<T>,
    depth: usize,
) -> Result<T> {
    let whole = (fb / fa).arg();
    let zm = (za + zb) * T::lit(0.5);
    let fm = eval_checked(f, zm)?;
    let left = (fm / fa).arg();
    let right = (fb / fm).arg();
    if whole.abs() < T::lit(MAX_STEP_ANGLE) && (left + right - whole).abs() < T::lit(1e-3) {
        return Ok(left + right);
    }
    if depth >= MAX_DEPTH {
        return Err(Error::IllConditioned(
            "argument increments unresolved at maximum subdivision depth".into(),
        ));
    }
    Ok(segment(f, za, zm, fa, fm, depth + 1)? + segment(f, zm, zb, fm, fb, depth + 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(r: f64) -> Rect<f64> {
        Rect {
            re_min: -r,
            re_max: r,
            im_min: -r,
            im_max: r,
        }
    }

    #[test]
    fn counts_polynomial_zeros() {
        let f = |z: Complex<f64>| (z - 0.5) * (z + Complex::new(0.2, 0.3)) * (z - 3.0);
        assert_eq!(winding_number(f, &rect(1.0)).unwrap(), 2);
        assert_eq!(winding_number(f, &rect(4.0)).unwrap(), 3);
    }

    #[test]
    fn counts_poles_negatively() {
        let f = |z: Complex<f64>| (z - 0.1).inv();
        assert_eq!(winding_number(f, &rect(1.0)).unwrap(), -1);
    }

    #[test]
    fn entire_function_zeros() {
        // e^z - 1 has zeros at 2 pi i k
        let f = |z: Complex<f64>| z.exp() - 1.0;
        let r = Rect {
            re_min: -1.0,
            re_max: 1.0,
            im_min: -10.0,
            im_max: 10.0,
        };
        assert_eq!(winding_number(f, &r).unwrap(), 3);
    }

    #[test]
    fn near_boundary_zero_resolved() {
        let eps = 1e-9;
        let f = |z: Complex<f64>| z - Complex::new(-2.0 * eps, 0.0);
        let r = Rect {
            re_min: -1.0,
            re_max: -eps,
            im_min: -1.0,
            im_max: 1.0,
        };
        assert_eq!(winding_number(f, &r).unwrap(), 1);
    }

    #[test]
    fn zero_on_contour_is_an_error() {
        let f = |z: Complex<f64>| z - 1.0;
        assert!(winding_number(f, &rect(1.0)).is_err());
    }
}
