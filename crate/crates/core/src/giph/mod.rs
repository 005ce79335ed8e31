//! Mixed-Erlang service with a general interarrival family.
//!
//! The waiting time has an atom `c0` at zero and density
//! `f(x) = sum_i c_i exp(xi_i x)`, where `xi_i` are the `N` left-half-plane
//! zeros of the characteristic function `D` (see [`CharacteristicProblem`]).
//! The constants solve an `(N+1)`-dimensional linear system: normalization
//! plus the transform identity collocated on the imaginary axis.

mod roots;
mod system;

use num_complex::Complex;

pub use roots::{find_roots, find_roots_certified, CharacteristicProblem};
pub use system::{CollocationSystem, K_MAX};

use crate::dist::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::solve_checked;
use crate::scalar::Real;

pub const COND_LIMIT: f64 = 1e12;
pub const RESIDUAL_LIMIT: f64 = 1e-7;

#[derive(Clone, Debug)]
pub struct GiPhSolution<T> {
    pub c0: T,
    pub roots: Vec<Complex<T>>,
    pub coeffs: Vec<Complex<T>>,
    pub params: ModelParams<T>,
    /// Largest relative collocation residual at the held-out points.
    pub residual: T,
    pub condition: f64,
    /// Collocation spacing actually used.
    pub tau: T,
    /// Zero count certified by the argument principle.
    pub winding: i64,
}

impl<T: Real> GiPhSolution<T> {
    fn density_complex(&self, x: T) -> Complex<T> {
        self.roots
            .iter()
            .zip(&self.coeffs)
            .fold(Complex::new(T::zero(), T::zero()), |acc, (xi, c)| {
                acc + *c * (*xi * x).exp()
            })
    }

    pub fn density(&self, x: T) -> T {
        let v = self.density_complex(x);
        debug_assert!(
            v.im.abs() <= T::lit(1e-10) * (T::one() + v.re.abs()),
            "imaginary density part {}",
            v.im
        );
        v.re
    }

    pub fn cdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let mut acc = Complex::new(self.c0, T::zero());
        for (xi, c) in self.roots.iter().zip(&self.coeffs) {
            acc += *c * ((*xi * x).exp() - T::one()) / *xi;
        }
        acc.re.max(T::zero()).min(T::one())
    }

    /// `c0 - sum c_i / xi_i - 1`.
    pub fn normalization_error(&self) -> T {
        let mut acc = Complex::new(self.c0 - T::one(), T::zero());
        for (xi, c) in self.roots.iter().zip(&self.coeffs) {
            acc -= *c / *xi;
        }
        acc.norm()
    }

    /// Slowest decay rate `min |Re xi_i|`.
    pub fn decay_rate(&self) -> T {
        self.roots.iter().map(|z| -z.re).fold(T::infinity(), T::min)
    }

    /// Waiting-time transform `omega(s) = c0 + sum c_i / (s - xi_i)`.
    pub fn lst(&self, s: Complex<T>) -> Complex<T> {
        self.roots
            .iter()
            .zip(&self.coeffs)
            .fold(Complex::new(self.c0, T::zero()), |acc, (xi, c)| {
                acc + *c / (s - *xi)
            })
    }
}

/// Solves for the waiting-time law with the default collocation spacing
/// `mu / 2`, retrying with `mu / 4`, `mu`, `2 mu` on trouble.
pub fn solve<T: Real>(m: &ModelParams<T>) -> Result<GiPhSolution<T>> {
    m.require_stable()?;
    let prob = CharacteristicProblem::from_model(m)?;
    let (roots, winding) = find_roots_certified(&prob)?;
    let mu = prob.mu();
    let mut last_err = None;
    for factor in [0.5, 0.25, 1.0, 2.0] {
        match solve_with_roots(m, &prob, &roots, winding, mu * T::lit(factor)) {
            Ok(sol) => return Ok(sol),
            Err(e @ (Error::SingularSystem { .. } | Error::ResidualTooLarge { .. })) => {
                last_err = Some(e)
            }
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::MaxIterations(4)))
}

/// Single attempt with collocation points `s_m = i tau m`.
pub fn solve_with_tau<T: Real>(m: &ModelParams<T>, tau: T) -> Result<GiPhSolution<T>> {
    m.require_stable()?;
    let prob = CharacteristicProblem::from_model(m)?;
    let (roots, winding) = find_roots_certified(&prob)?;
    solve_with_roots(m, &prob, &roots, winding, tau)
}

fn solve_with_roots<T: Real>(
    m: &ModelParams<T>,
    prob: &CharacteristicProblem<T>,
    roots: &[Complex<T>],
    winding: i64,
    tau: T,
) -> Result<GiPhSolution<T>> {
    let n = prob.degree();
    let sys = CollocationSystem::new(prob, roots)?;
    let rhs_val = Complex::new(T::one() - prob.p, T::zero());
    let mut matrix = vec![sys.normalization_row()];
    let mut rhs = vec![Complex::new(T::one(), T::zero())];
    for k in 1..=n {
        matrix.push(sys.row(Complex::new(T::zero(), tau * T::of_usize(k)))?);
        rhs.push(rhs_val);
    }
    let (x, condition) = solve_checked(&matrix, &rhs, COND_LIMIT)?;

    let mut residual = T::zero();
    for k in 1..=(2 * n) {
        let s = Complex::new(T::zero(), tau * (T::of_usize(k) + T::lit(0.5)));
        let row = sys.row(s)?;
        let lhs = row
            .iter()
            .zip(&x)
            .fold(Complex::new(T::zero(), T::zero()), |a, (r, c)| a + *r * *c);
        residual = residual.max((lhs - rhs_val).norm() / (lhs.norm() + T::one()));
    }
    if !(residual <= T::lit(RESIDUAL_LIMIT)) {
        return Err(Error::ResidualTooLarge {
            residual: residual.to_f64_lossy(),
            limit: RESIDUAL_LIMIT,
        });
    }

    let coeffs = symmetrize(roots, &x[1..])?;
    let c0 = x[0].re;
    if !(c0 > T::zero() && c0 <= T::one() + T::lit(1e-9)) {
        return Err(Error::IllConditioned(format!(
            "atom c0 = {} outside (0, 1]",
            c0.to_f64_lossy()
        )));
    }
    Ok(GiPhSolution {
        c0: c0.min(T::one()),
        roots: roots.to_vec(),
        coeffs,
        params: m.clone(),
        residual,
        condition,
        tau,
        winding,
    })
}

/// Enforces `c(conj xi) = conj c(xi)` after checking it holds to `1e-9`.
fn symmetrize<T: Real>(roots: &[Complex<T>], coeffs: &[Complex<T>]) -> Result<Vec<Complex<T>>> {
    let mut out = coeffs.to_vec();
    for i in 0..roots.len() {
        if roots[i].im.is_zero() {
            let c = coeffs[i];
            if c.im.abs() > T::lit(1e-9) * (T::one() + c.norm()) {
                return Err(Error::IllConditioned(format!(
                    "coefficient of real root has imaginary part {}",
                    c.im.to_f64_lossy()
                )));
            }
            out[i] = Complex::new(c.re, T::zero());
        } else if roots[i].im > T::zero() {
            let j = (0..roots.len())
                .find(|&j| j != i && roots[j] == roots[i].conj())
                .ok_or_else(|| Error::IllConditioned("root set not conjugate-closed".into()))?;
            let (a, b) = (coeffs[i], coeffs[j].conj());
            if (a - b).norm() > T::lit(1e-9) * (T::one() + a.norm()) {
                return Err(Error::IllConditioned(format!(
                    "conjugate coefficients differ by {}",
                    (a - b).norm().to_f64_lossy()
                )));
            }
            let avg = (a + b) * T::lit(0.5);
            out[i] = avg;
            out[j] = avg.conj();
        }
    }
    Ok(out)
}

/// Closed form at `p = 1`: `omega(s) = ((mu+s)/mu)^N prod xi_i/(xi_i - s)`,
/// expanded into partial fractions at the simple poles `xi_i`.
pub fn solve_p1_closed_form<T: Real>(m: &ModelParams<T>) -> Result<GiPhSolution<T>> {
    if m.p < T::one() {
        return Err(Error::InvalidParameter(format!(
            "closed form requires p = 1, got {}",
            m.p
        )));
    }
    m.require_stable()?;
    let prob = CharacteristicProblem::from_model(m)?;
    let (roots, winding) = find_roots_certified(&prob)?;
    let mu = prob.mu();
    let n = prob.degree() as i32;
    let one = Complex::new(T::one(), T::zero());
    let c0 = roots.iter().fold(one, |a, xi| a * (-*xi / mu)).re;
    let raw: Vec<Complex<T>> = roots
        .iter()
        .enumerate()
        .map(|(i, &xi)| {
            let mut c = -xi * ((xi + mu) / mu).powi(n);
            for (j, &xj) in roots.iter().enumerate() {
                if j != i {
                    c = c * xj / (xj - xi);
                }
            }
            c
        })
        .collect();
    let coeffs = symmetrize(&roots, &raw)?;
    Ok(GiPhSolution {
        c0,
        roots,
        coeffs,
        params: m.clone(),
        residual: T::zero(),
        condition: 1.0,
        tau: T::zero(),
        winding,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::{InterarrivalDist, MixedErlangDist, ServiceDist};

    fn model(p: f64, arrival: InterarrivalDist<f64>, mu: f64, kappa: Vec<f64>) -> ModelParams<f64> {
        ModelParams::new(
            p,
            arrival,
            ServiceDist::MixedErlang(MixedErlangDist::new(mu, kappa).unwrap()),
        )
        .unwrap()
    }

    fn exp(l: f64) -> InterarrivalDist<f64> {
        InterarrivalDist::exponential(l).unwrap()
    }

    #[test]
    fn mm1_matches_classical_law() {
        let sol = solve(&model(1.0, exp(1.0), 2.0, vec![1.0])).unwrap();
        assert!((sol.c0 - 0.5).abs() < 1e-12);
        assert!((sol.coeffs[0].re - 0.5).abs() < 1e-12);
        assert!((sol.cdf(2f64.ln()) - 0.75).abs() < 1e-12);
        assert!((sol.cdf(0.0) - sol.c0).abs() < 1e-15);
    }

    #[test]
    fn p_b_le_a_geometric_closure() {
        let m = model(0.5, exp(1.0), 2.0, vec![1.0]);
        let prob = CharacteristicProblem::from_model(&m).unwrap();
        let roots = find_roots(&prob).unwrap();
        let sys = CollocationSystem::new(&prob, &roots).unwrap();
        assert!((sys.p_b_le_a() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn identity_near_zero_reproduces_normalization() {
        let m = model(0.5, exp(1.0), 2.0, vec![0.3, 0.7]);
        let sol = solve(&m).unwrap();
        let prob = CharacteristicProblem::from_model(&m).unwrap();
        let sys = CollocationSystem::new(&prob, &sol.roots).unwrap();
        let s = Complex::new(0.0, 1e-7);
        let row = sys.row(s).unwrap();
        // at s -> 0 the identity's row degenerates to (1 - p) times normalization
        let norm = sys.normalization_row();
        for (r, nrm) in row.iter().zip(&norm) {
            assert!((*r - *nrm * 0.5).norm() < 1e-5, "{r} vs {nrm}");
        }
    }

    #[test]
    fn invariants_for_mixed_erlang() {
        for p in [0.25, 0.5, 0.75] {
            let sol = solve(&model(p, exp(1.0), 2.0, vec![0.3, 0.7])).unwrap();
            assert!(sol.normalization_error() < 1e-9);
            assert!(sol.residual < 1e-7);
            assert!(sol.c0 > 0.0 && sol.c0 <= 1.0);
            for k in 0..2000 {
                assert!(sol.density(k as f64 * 0.01) >= -1e-10);
            }
            let far = 40.0 / sol.decay_rate();
            assert!((sol.cdf(far) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn closed_form_agrees_with_system_at_p1() {
        for kappa in [vec![1.0], vec![0.0, 1.0], vec![0.2, 0.3, 0.5]] {
            let d = MixedErlangDist::new(3.0, kappa.clone()).unwrap();
            let lambda = 0.5 / d.mean();
            let m = model(1.0, exp(lambda), 3.0, kappa);
            let a = solve(&m).unwrap();
            let b = solve_p1_closed_form(&m).unwrap();
            assert!((a.c0 - b.c0).abs() < 1e-8);
            for (x, y) in a.coeffs.iter().zip(&b.coeffs) {
                assert!((x - y).norm() < 1e-8, "{x} vs {y}");
            }
            assert!((b.lst(Complex::new(0.0, 0.0)).re - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn other_arrival_families_normalize() {
        let arrivals = vec![
            InterarrivalDist::erlang(2, 2.0).unwrap(),
            InterarrivalDist::deterministic(1.0).unwrap(),
            InterarrivalDist::hyperexponential(vec![0.4, 0.6], vec![0.5, 2.0]).unwrap(),
        ];
        for a in arrivals {
            for p in [0.3, 0.8] {
                let sol = solve(&model(p, a.clone(), 2.0, vec![0.3, 0.7]))
                    .unwrap_or_else(|e| panic!("{a:?} p={p}: {e}"));
                assert!(sol.normalization_error() < 1e-9);
                assert!(sol.residual < 1e-7, "{a:?} p={p}: {}", sol.residual);
            }
        }
    }

    #[test]
    fn deterministic_service_rejected() {
        let m = ModelParams::new(0.5, exp(1.0), ServiceDist::deterministic(1.0).unwrap()).unwrap();
        assert_eq!(solve(&m).unwrap_err().kind(), "Unsupported");
    }
}
