use num_complex::Complex;

use crate::contour::{winding_number, Rect};
use crate::dist::{InterarrivalDist, MixedErlangDist, ModelParams, ServiceDist};
use crate::error::{Error, Result};
use crate::poly;
use crate::scalar::Real;

const RESIDUAL_TOL: f64 = 1e-9;
const CLUSTER_TOL: f64 = 1e-6;
const CONTOUR_EPS: f64 = 1e-9;

/// `D(s) = (mu + s)^N - p alpha(-s) sum_n kappa_n mu^n (mu + s)^(N - n)`.
#[derive(Clone, Debug)]
pub struct CharacteristicProblem<T> {
    pub p: T,
    pub service: MixedErlangDist<T>,
    pub arrival: InterarrivalDist<T>,
    q: Vec<T>,
}

impl<T: Real> CharacteristicProblem<T> {
    pub fn new(p: T, service: MixedErlangDist<T>, arrival: InterarrivalDist<T>) -> Result<Self> {
        if !(p > T::zero()) || p > T::one() {
            return Err(Error::Unsupported(format!(
                "the transform method needs 0 < p <= 1, got p = {p}; use fixedpoint or simulate"
            )));
        }
        arrival.validate()?;
        if arrival.poisson_mass(service.mu(), 0) <= T::zero() {
            return Err(Error::InvalidParameter(
                "alpha(mu) vanishes in working precision".into(),
            ));
        }
        let q = service.numerator_poly();
        Ok(Self {
            p,
            service,
            arrival,
            q,
        })
    }

    pub fn from_model(m: &ModelParams<T>) -> Result<Self> {
        match &m.service {
            ServiceDist::MixedErlang(d) => Self::new(m.p, d.clone(), m.arrival.clone()),
            ServiceDist::Deterministic(_) => Err(Error::Unsupported(
                "the transform method needs mixed-Erlang service".into(),
            )),
        }
    }

    pub fn degree(&self) -> usize {
        self.service.order()
    }

    pub fn mu(&self) -> T {
        self.service.mu()
    }

    pub fn rho(&self) -> T {
        self.service.mean() / self.arrival.mean()
    }

    pub fn eval(&self, s: Complex<T>) -> Complex<T> {
        let n = self.degree() as i32;
        (s + self.mu()).powi(n)
            - self.arrival.lst_reflected(s) * poly::eval_real(&self.q, s) * self.p
    }

    pub fn eval_with_deriv(&self, s: Complex<T>) -> (Complex<T>, Complex<T>) {
        let n = self.degree();
        let w = s + self.mu();
        let wn1 = w.powi(n as i32 - 1);
        let (a, da) = self.arrival.lst_reflected_with_deriv(s);
        let (q, dq) = poly::eval_real_with_deriv(&self.q, s);
        let d = wn1 * w - a * q * self.p;
        let dd = wn1 * T::of_usize(n) - (da * q + a * dq) * self.p;
        (d, dd)
    }

    /// Magnitude scale `(mu + |s|)^N` for residual checks.
    fn scale(&self, s: Complex<T>) -> T {
        (self.mu() + s.norm()).powi(self.degree() as i32)
    }

    /// The contour used to certify the left-half-plane root count.
    pub fn certification_rect(&self) -> Rect<T> {
        let r = T::lit(10.0) * (self.mu() + self.arrival.rate_scale());
        Rect {
            re_min: -r,
            re_max: -T::lit(CONTOUR_EPS),
            im_min: -r,
            im_max: r,
        }
    }

    /// Argument-principle count of zeros of `D` in the certification rectangle.
    pub fn winding_count(&self) -> Result<i64> {
        winding_number(|s| self.eval(s), &self.certification_rect())
    }
}

/// Finds the `N` zeros of `D` with negative real part.
pub fn find_roots<T: Real>(prob: &CharacteristicProblem<T>) -> Result<Vec<Complex<T>>> {
    find_roots_certified(prob).map(|(roots, _)| roots)
}

/// As [`find_roots`], also returning the certified winding number.
pub fn find_roots_certified<T: Real>(
    prob: &CharacteristicProblem<T>,
) -> Result<(Vec<Complex<T>>, i64)> {
    let n = prob.degree();
    if prob.p >= T::one() && !(prob.rho() < T::one()) {
        return Err(Error::UnstableP1 {
            rho: prob.rho().to_f64_lossy(),
        });
    }
    let mu = prob.mu();
    let candidates = match prob.arrival.rational_reflected() {
        Some((num, den)) => polynomial_candidates(prob, &num, &den),
        None => newton_candidates(prob),
    };
    let mut roots = close_under_conjugation(candidates, mu)?;
    roots.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(
                a.im.abs()
                    .partial_cmp(&b.im.abs())
                    .unwrap_or(std::cmp::Ordering::Equal),
            )
            .then(b.im.partial_cmp(&a.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    for i in 0..roots.len() {
        for j in (i + 1)..roots.len() {
            if (roots[i] - roots[j]).norm() < T::lit(CLUSTER_TOL) * mu {
                return Err(Error::NearMultipleRoots {
                    a: fmt_c(roots[i]),
                    b: fmt_c(roots[j]),
                    tol: CLUSTER_TOL * mu.to_f64_lossy(),
                });
            }
        }
    }
    for z in &roots {
        if prob.eval(*z).norm() > T::tol(RESIDUAL_TOL) * prob.scale(*z) {
            return Err(Error::RootCountMismatch {
                expected: n,
                found: roots.len(),
            });
        }
    }
    let winding = prob.winding_count().map_err(|_| Error::RootCountMismatch {
        expected: n,
        found: roots.len(),
    })?;
    if winding != n as i64 || roots.len() != n {
        return Err(Error::RootCountMismatch {
            expected: n,
            found: if winding != n as i64 {
                winding.max(0) as usize
            } else {
                roots.len()
            },
        });
    }
    Ok((roots, winding))
}

fn fmt_c<T: Real>(z: Complex<T>) -> String {
    format!("{}{:+}i", z.re.to_f64_lossy(), z.im.to_f64_lossy())
}

fn left_half_tol<T: Real>(mu: T) -> T {
    T::lit(1e-9) * mu
}

/// Rational `alpha(-s) = num/den`: roots of `den (mu+s)^N - p num Q`, polished on `D`.
fn polynomial_candidates<T: Real>(
    prob: &CharacteristicProblem<T>,
    num: &[T],
    den: &[T],
) -> Vec<Complex<T>> {
    let mu = prob.mu();
    let lhs = poly::mul_real(den, &poly::pow_linear(mu, T::one(), prob.degree()));
    let rhs = poly::scale_real(&poly::mul_real(num, &prob.q), -prob.p);
    let cleared = poly::add_real(&lhs, &rhs);
    poly::roots_real(&cleared)
        .into_iter()
        .filter(|z| z.re < -left_half_tol(mu))
        .map(|z| polish(prob, z))
        .collect()
}

fn polish<T: Real>(prob: &CharacteristicProblem<T>, mut z: Complex<T>) -> Complex<T> {
    let mut best = prob.eval(z).norm();
    for _ in 0..8 {
        let (d, dd) = prob.eval_with_deriv(z);
        if dd.norm().is_zero() {
            break;
        }
        let next = z - d / dd;
        let val = prob.eval(next).norm();
        if !(val < best) {
            break;
        }
        best = val;
        z = next;
    }
    z
}

/// Entire `alpha(-s)`: Newton iterations on `D / prod (s - found)` seeded on a
/// grid over the disk `|s + mu| <= mu`, which contains every left-half-plane
/// zero because `|p alpha(-s)| <= 1` there forces `|beta(s)| >= 1`.
fn newton_candidates<T: Real>(prob: &CharacteristicProblem<T>) -> Vec<Complex<T>> {
    let mu = prob.mu();
    let n = prob.degree();
    let mut found: Vec<Complex<T>> = Vec::new();
    let grid = 24usize;
    'seeds: for gi in 0..grid {
        for gj in 0..grid {
            if found.len() >= n {
                break 'seeds;
            }
            let re = -mu * T::lit(2.0) * (T::of_usize(gi) + T::lit(0.5)) / T::of_usize(grid);
            let im =
                mu * (T::lit(2.0) * (T::of_usize(gj) + T::lit(0.5)) / T::of_usize(grid) - T::one());
            let seed = Complex::new(re, im);
            if (seed + mu).norm() > mu {
                continue;
            }
            if let Some(z) = deflated_newton(prob, seed, &found) {
                let z = polish(prob, z);
                let inside =
                    z.re < -left_half_tol(mu) && (z + mu).norm() <= mu * T::lit(1.0 + 1e-6);
                let fresh = found.iter().all(|f| (*f - z).norm() > T::lit(1e-9) * mu);
                if inside && fresh {
                    found.push(z);
                    let conj = z.conj();
                    if z.im.abs() > T::lit(1e-10) * mu && found.len() < n {
                        found.push(polish(prob, conj));
                    }
                }
            }
        }
    }
    found
}

fn deflated_newton<T: Real>(
    prob: &CharacteristicProblem<T>,
    mut z: Complex<T>,
    found: &[Complex<T>],
) -> Option<Complex<T>> {
    let mu = prob.mu();
    for _ in 0..200 {
        let (d, dd) = prob.eval_with_deriv(z);
        if d.norm().is_zero() {
            return Some(z);
        }
        let mut logd = dd / d;
        for f in found {
            logd -= (z - *f).inv();
        }
        if logd.norm().is_zero() {
            return None;
        }
        let step = logd.inv();
        z -= step;
        if !(z.re.is_finite() && z.im.is_finite()) || (z + mu).norm() > T::lit(4.0) * mu {
            return None;
        }
        if step.norm() <= T::lit(1e-14) * mu {
            return Some(z);
        }
    }
    None
}

/// Snaps near-real roots onto the axis and pairs complex roots with exact
/// conjugates.
fn close_under_conjugation<T: Real>(roots: Vec<Complex<T>>, mu: T) -> Result<Vec<Complex<T>>> {
    let real_tol = T::lit(1e-10) * mu;
    let pair_tol = T::lit(1e-6) * mu;
    let mut out = Vec::with_capacity(roots.len());
    let mut used = vec![false; roots.len()];
    for i in 0..roots.len() {
        if used[i] {
            continue;
        }
        used[i] = true;
        let z = roots[i];
        if z.im.abs() <= real_tol {
            out.push(Complex::new(z.re, T::zero()));
            continue;
        }
        let partner = (0..roots.len()).filter(|&j| !used[j]).min_by(|&a, &b| {
            let da = (roots[a] - z.conj()).norm();
            let db = (roots[b] - z.conj()).norm();
            da.partial_cmp(&db).unwrap_or(std::cmp::Ordering::Equal)
        });
        match partner {
            Some(j) if (roots[j] - z.conj()).norm() <= pair_tol => {
                used[j] = true;
                let avg = (z + roots[j].conj()) * T::lit(0.5);
                let upper = Complex::new(avg.re, avg.im.abs());
                out.push(upper);
                out.push(upper.conj());
            }
            _ => {
                return Err(Error::RootCountMismatch {
                    expected: roots.len(),
                    found: out.len(),
                })
            }
        }
    }
    Ok(out)
}
