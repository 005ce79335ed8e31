//! Exponential interarrivals (rate `lambda`), deterministic service `b`.
//!
//! On `(0, b)` the density is `d1 e^{r1 x} + d2 e^{r2 x}` with
//! `r_{1,2} = ±lambda sqrt(p(2-p))`. On band `[ib, (i+1)b]` the distribution
//! function is
//!
//! ```text
//! F_i(x) = 1 - p^i (1 - C0) + sum_j K_j^i (d_j/r_j) e^{r_j (x - ib)}
//!        + sum_{j<i} (-lambda p)^j g_{i-j} y_j(x) e^{lambda (x - ib)}
//! ```
//!
//! with `K_j = lambda p / (lambda - r_j)`, `C0 = pi0 - d1/r1 - d2/r2`, the
//! Abel polynomials `y_0 = 1`, `y_j(x) = x (x - jb)^(j-1) / j!`, and scaled
//! constants `g_i = gamma_i e^{lambda i b}`. Everything is affine in `pi0`,
//! which is fixed by pinning the mass at the end of the last band.
//!
//! The alternating band sums cancel heavily (roughly one decimal digit per
//! band), so the engine is meant to be run in [`DoubleDouble`](crate::DoubleDouble).

use std::ops::{Add, Mul, Sub};

use crate::dist::{InterarrivalDist, ModelParams, ServiceDist};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const I_MAX: usize = 200;
pub const DEFAULT_EPS_TAIL: f64 = 1e-10;
/// Largest acceptable `(largest term / |sum|) * epsilon`; `1e12` magnitude
/// ratio in `f64`.
const CONDITION_BUDGET: f64 = 1e-4;
const OVERFLOW_GUARD: f64 = 1e300;
const HEAVY_P: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MdParams<T> {
    pub lambda: T,
    pub b: T,
    pub p: T,
}

impl<T: Real> MdParams<T> {
    pub fn new(lambda: T, b: T, p: T) -> Result<Self> {
        if !(lambda > T::zero()) || !lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {lambda}"
            )));
        }
        if !(b > T::zero()) || !b.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "b must be positive, got {b}"
            )));
        }
        if !(p >= T::zero() && p <= T::one()) {
            return Err(Error::InvalidParameter(format!(
                "p must lie in [0, 1], got {p}"
            )));
        }
        Ok(Self { lambda, b, p })
    }

    pub fn from_model(m: &ModelParams<T>) -> Result<Self> {
        match (&m.arrival, &m.service) {
            (InterarrivalDist::Exponential { rate }, ServiceDist::Deterministic(b)) => {
                Self::new(*rate, *b, m.p)
            }
            _ => Err(Error::Unsupported(
                "the band recursion needs exponential arrivals and deterministic service".into(),
            )),
        }
    }

    pub fn rho(&self) -> T {
        self.lambda * self.b
    }
}

/// `c + s * pi0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Affine<T> {
    pub c: T,
    pub s: T,
}

impl<T: Real> Affine<T> {
    pub fn constant(c: T) -> Self {
        Self { c, s: T::zero() }
    }

    pub fn at(self, pi0: T) -> T {
        self.c + self.s * pi0
    }

    pub fn magnitude(self, pi0: T) -> T {
        self.c.abs().max((self.s * pi0).abs())
    }

    pub fn scale(self, k: T) -> Self {
        Self {
            c: self.c * k,
            s: self.s * k,
        }
    }

    fn is_finite_below(self, limit: T) -> bool {
        self.c.abs() < limit && self.s.abs() < limit
    }
}

impl<T: Real> Add for Affine<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            c: self.c + o.c,
            s: self.s + o.s,
        }
    }
}

impl<T: Real> Sub for Affine<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self {
            c: self.c - o.c,
            s: self.s - o.s,
        }
    }
}

impl<T: Real> Mul<T> for Affine<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        self.scale(k)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MdForm {
    /// `0 < p < 1`: band recursion.
    Banded,
    /// `p = 0`: uniform density on `(0, b)`.
    Uniform,
    /// `p = 1`: Erlang's M/D/1 formula.
    Erlang,
}

/// Constants of the two-exponential density and the band recursion, all
/// affine in `pi0`.
#[derive(Clone, Debug)]
pub struct MdConstants<T> {
    pub r1: T,
    pub d1: Affine<T>,
    pub d2: Affine<T>,
    pub c0: Affine<T>,
    k: [T; 2],
    /// `1 - e^{b r_j} (lambda - r_j) / (lambda p)`.
    kappa: [T; 2],
}

impl<T: Real> MdConstants<T> {
    pub fn new(m: &MdParams<T>) -> Self {
        let (lambda, b, p) = (m.lambda, m.b, m.p);
        let one = T::one();
        let two = T::lit(2.0);
        let r1 = lambda * (p * (two - p)).sqrt();
        let e = (b * r1).exp();
        let den = (e - one) * lambda * lambda * (two - p) * (one - p)
            + e * r1 * (r1 - lambda * (two - p));
        // 1 - p(1 - pi0) - 2 pi0
        let a = Affine {
            c: one - p,
            s: p - two,
        };
        let d1 = a.scale(lambda * lambda * (one - p) * r1 / den);
        let d2 = a.scale(e * lambda * r1 * (lambda - r1) / den);
        let r = [r1, -r1];
        let c0 = Affine {
            c: T::zero(),
            s: one,
        } - d1.scale(r[0].recip())
            - d2.scale(r[1].recip());
        let k = [lambda * p / (lambda - r[0]), lambda * p / (lambda - r[1])];
        let kappa = [
            one - (b * r[0]).exp() * (lambda - r[0]) / (lambda * p),
            one - (b * r[1]).exp() * (lambda - r[1]) / (lambda * p),
        ];
        Self {
            r1,
            d1,
            d2,
            c0,
            k,
            kappa,
        }
    }

    fn r(&self) -> [T; 2] {
        [self.r1, -self.r1]
    }

    fn d(&self) -> [Affine<T>; 2] {
        [self.d1, self.d2]
    }
}

/// Scaled constants `g_i = gamma_i e^{lambda i b}` for `i = 0..=bands`
/// (`g_0 = 0`), affine in `pi0`.
pub fn gamma_recursion<T: Real>(
    m: &MdParams<T>,
    k: &MdConstants<T>,
    bands: usize,
) -> Result<Vec<Affine<T>>> {
    let mut g = vec![Affine::constant(T::zero())];
    extend_gamma(m, k, &mut g, bands)?;
    Ok(g)
}

fn extend_gamma<T: Real>(
    m: &MdParams<T>,
    k: &MdConstants<T>,
    g: &mut Vec<Affine<T>>,
    upto: usize,
) -> Result<()> {
    let (lambda, b, p) = (m.lambda, m.b, m.p);
    let elb = (lambda * b).exp();
    let base = k.c0 - Affine::constant(T::one());
    let r = k.r();
    let d = k.d();
    let x = -lambda * p * b;
    let limit = T::lit(OVERFLOW_GUARD);
    while g.len() <= upto {
        let i = g.len();
        let mut v = base.scale((T::one() - p) * p.powi(i as i32 - 1));
        for j in 0..2 {
            v = v - d[j].scale(k.k[j].powi(i as i32) * k.kappa[j] / r[j]);
        }
        let it = T::of_usize(i);
        // i (i-j)^(j-1) x^j / j!
        let mut xpow_fact = T::one();
        for j in 1..i {
            xpow_fact = xpow_fact * x / T::of_usize(j);
            let w = it * T::of_usize(i - j).powi(j as i32 - 1) * xpow_fact;
            v = v + (g[i - 1 - j].scale(elb) - g[i - j]).scale(w);
        }
        v = v + g[i - 1].scale(elb);
        if !v.is_finite_below(limit) {
            return Err(Error::IllConditioned(format!(
                "scaled band constant {i} exceeds {OVERFLOW_GUARD:e}"
            )));
        }
        g.push(v);
    }
    Ok(())
}

/// Value and largest-term magnitude of `F_i(x)` or `f_i(x)` as affine
/// functions of `pi0`.
fn band_eval<T: Real>(
    m: &MdParams<T>,
    k: &MdConstants<T>,
    g: &[Affine<T>],
    i: usize,
    x: T,
    pi0: T,
    density: bool,
) -> (Affine<T>, T) {
    let (lambda, b, p) = (m.lambda, m.b, m.p);
    let r = k.r();
    let d = k.d();
    let ib = T::of_usize(i) * b;
    let mut acc = Affine::constant(T::zero());
    let mut mag = T::zero();
    let mut push = |t: Affine<T>, acc: &mut Affine<T>| {
        mag = mag.max(t.magnitude(pi0));
        *acc = *acc + t;
    };
    if !density {
        let pi = p.powi(i as i32);
        push(Affine::constant(T::one() - pi), &mut acc);
        push(k.c0.scale(pi), &mut acc);
    }
    for j in 0..2 {
        let e = (r[j] * (x - ib)).exp() * k.k[j].powi(i as i32);
        let t = if density {
            d[j].scale(e)
        } else {
            d[j].scale(e / r[j])
        };
        push(t, &mut acc);
    }
    if i > 0 {
        let el = (lambda * (x - ib)).exp();
        let mlp = -lambda * p;
        // y_j(x) and y_{j-1}(x - b) via running factors
        let mut coef = T::one();
        for j in 0..i {
            if j > 0 {
                coef *= mlp;
            }
            let y = abel(j, x, b);
            let w = if density {
                let dy = if j == 0 {
                    T::zero()
                } else {
                    abel(j - 1, x - b, b)
                };
                dy + lambda * y
            } else {
                y
            };
            push(g[i - j].scale(coef * w * el), &mut acc);
        }
    }
    (acc, mag)
}

/// `y_0 = 1`, `y_j(x) = x (x - jb)^(j-1) / j!`.
fn abel<T: Real>(j: usize, x: T, b: T) -> T {
    if j == 0 {
        return T::one();
    }
    let mut v = x;
    let base = x - T::of_usize(j) * b;
    for t in 1..j {
        v = v * base / T::of_usize(t + 1);
    }
    v
}

#[derive(Clone, Debug)]
pub struct MdSolution<T> {
    pub params: MdParams<T>,
    pub form: MdForm,
    pub pi0: T,
    pub r1: T,
    pub r2: T,
    pub d1: T,
    pub d2: T,
    /// Intervals `[ib, (i+1)b]`, `i < bands`, represented exactly.
    pub bands: usize,
    /// Estimated `1 - F(bands * b)`.
    pub tail_bound: T,
    /// Geometric decay factor per band used beyond the last band.
    pub tail_ratio: T,
    pub eps_tail: T,
    /// Non-fatal diagnostics (`IllConditioned`).
    pub warnings: Vec<Error>,
    /// Largest `(largest term / |F|)` seen across band ends.
    pub magnitude_ratio: T,
    constants: Option<MdConstants<T>>,
    g: Vec<Affine<T>>,
}

impl<T: Real> MdSolution<T> {
    /// `gamma_1 .. gamma_{bands-1}` (unscaled; far bands may underflow).
    pub fn gamma(&self) -> Vec<T> {
        let (lambda, b) = (self.params.lambda, self.params.b);
        self.g
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, g)| g.at(self.pi0) * (-lambda * T::of_usize(i) * b).exp())
            .collect()
    }

    /// `F_i(x)` for `ib <= x <= (i+1)b`.
    pub fn band_cdf(&self, i: usize, x: T) -> Result<T> {
        let b = self.params.b;
        let lo = T::of_usize(i) * b;
        let hi = lo + b;
        let slack = T::lit(1e-12) * b;
        if i >= self.bands || x < lo - slack || x > hi + slack {
            return Err(Error::OutOfBand {
                band: i,
                x: x.to_f64_lossy(),
                lo: lo.to_f64_lossy(),
                hi: hi.to_f64_lossy(),
            });
        }
        Ok(self.band_value(i, x, false))
    }

    /// `f_i(x)` for `ib <= x <= (i+1)b`.
    pub fn band_pdf(&self, i: usize, x: T) -> Result<T> {
        self.band_cdf(i, x)?;
        Ok(self.band_value(i, x, true))
    }

    /// `F_i` evaluated with an arbitrary atom, for affinity checks.
    pub fn band_cdf_with_pi0(&self, i: usize, x: T, pi0: T) -> T {
        match &self.constants {
            Some(k) => band_eval(&self.params, k, &self.g, i, x, pi0, false)
                .0
                .at(pi0),
            None => self.band_value(i, x, false),
        }
    }

    fn band_value(&self, i: usize, x: T, density: bool) -> T {
        match self.form {
            MdForm::Banded => {
                let k = self.constants.as_ref().expect("banded constants");
                band_eval(&self.params, k, &self.g, i, x, self.pi0, density)
                    .0
                    .at(self.pi0)
            }
            MdForm::Uniform => {
                let rate = self.d1;
                if density {
                    if i == 0 {
                        rate
                    } else {
                        T::zero()
                    }
                } else if i == 0 {
                    self.pi0 + rate * x
                } else {
                    T::one()
                }
            }
            MdForm::Erlang => erlang_value(&self.params, i, x, density).0,
        }
    }

    pub fn cdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let b = self.params.b;
        let i = (x / b).floor().to_usize().unwrap_or(usize::MAX);
        if i < self.bands {
            return self.band_value(i, x, false).max(T::zero()).min(T::one());
        }
        let t = (x / b - T::of_usize(self.bands)).max(T::zero());
        (T::one() - self.tail_bound * self.tail_ratio.powf(t))
            .max(T::zero())
            .min(T::one())
    }

    pub fn pdf(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        let b = self.params.b;
        let i = (x / b).floor().to_usize().unwrap_or(usize::MAX);
        if i < self.bands {
            return self.band_value(i, x, true);
        }
        if self.tail_ratio <= T::zero() {
            return T::zero();
        }
        let t = (x / b - T::of_usize(self.bands)).max(T::zero());
        -self.tail_bound * self.tail_ratio.ln() / b * self.tail_ratio.powf(t)
    }

    /// `max_i |F_i(ib) - F_{i-1}(ib)|`.
    pub fn continuity_mismatch(&self) -> T {
        let b = self.params.b;
        (1..self.bands)
            .map(|i| {
                let x = T::of_usize(i) * b;
                (self.band_value(i, x, false) - self.band_value(i - 1, x, false)).abs()
            })
            .fold(T::zero(), T::max)
    }

    /// `(f(b-) - f(b+)) - lambda pi0`.
    pub fn density_jump_check(&self) -> Result<T> {
        if self.form != MdForm::Banded {
            return Err(Error::InvalidParameter(
                "density jump check needs 0 < p < 1".into(),
            ));
        }
        let b = self.params.b;
        let left = self.band_value(0, b, true);
        let right = self.band_value(1, b, true);
        Ok(left - right - self.params.lambda * self.pi0)
    }

    /// Band-0 density `d1 e^{r1 x} + d2 e^{r2 x}` and its first two derivatives.
    pub fn inner_density(&self, x: T) -> (T, T, T) {
        let (e1, e2) = ((self.r1 * x).exp(), (self.r2 * x).exp());
        let f = self.d1 * e1 + self.d2 * e2;
        let f1 = self.r1 * self.d1 * e1 + self.r2 * self.d2 * e2;
        let f2 = self.r1 * self.r1 * self.d1 * e1 + self.r2 * self.r2 * self.d2 * e2;
        (f, f1, f2)
    }

    /// Largest residuals of `f' = lambda f(x) - lambda (1-p) f(b-x)` and
    /// `f'' = lambda^2 p (2-p) f` at `points` interior points of `(0, b)`.
    pub fn ode_residuals(&self, points: usize) -> (T, T) {
        let MdParams { lambda, b, p } = self.params;
        let mut first = T::zero();
        let mut second = T::zero();
        for k in 1..=points {
            let x = b * T::of_usize(k) / T::of_usize(points + 1);
            let (f, f1, f2) = self.inner_density(x);
            let (fr, _, _) = self.inner_density(b - x);
            first = first.max((f1 - lambda * f + lambda * (T::one() - p) * fr).abs());
            second = second.max((f2 - lambda * lambda * p * (T::lit(2.0) - p) * f).abs());
        }
        (first, second)
    }
}

/// Band recursion for `0 < p < 1`.
pub fn solve_md<T: Real>(m: &MdParams<T>, eps_tail: T) -> Result<MdSolution<T>> {
    if !(m.p > T::zero() && m.p < T::one()) {
        return Err(Error::InvalidParameter(format!(
            "band recursion needs 0 < p < 1, got {}",
            m.p
        )));
    }
    if !(eps_tail > T::zero() && eps_tail <= T::lit(1e-3)) {
        return Err(Error::InvalidParameter(format!(
            "eps_tail must lie in (0, 1e-3], got {eps_tail}"
        )));
    }
    let mut warnings = precheck_warnings(m);
    let k = MdConstants::new(m);
    let q = (-decay_rate(m) * m.b).exp();
    let mut g = vec![Affine::constant(T::zero())];
    let budget = T::lit(CONDITION_BUDGET) / T::epsilon();
    let mut accepted: Option<Fit<T>> = None;
    for nb in 2..=I_MAX {
        if let Err(e) = extend_gamma(m, &k, &mut g, nb - 1) {
            warnings.push(e);
            break;
        }
        let fit = fit_pi0(m, &k, &g, nb, q);
        let resolved = fit.last_mass > T::zero() && fit.abs_err <= T::lit(1e-2) * fit.last_mass;
        // early fits may have a non-positive last mass before the tail is geometric
        if !resolved && accepted.is_none() && fit.ratio <= budget && fit.pi0.is_finite() {
            continue;
        }
        if !(fit.ratio <= budget) || !resolved || !fit.pi0.is_finite() {
            warnings.push(Error::IllConditioned(format!(
                "band sums lose all significant digits beyond {} bands (magnitude ratio {:e}); \
                 tail bound {:e} not reduced further, consider the fixedpoint engine",
                nb - 1,
                fit.ratio.to_f64_lossy(),
                accepted
                    .as_ref()
                    .map_or(f64::NAN, |a| a.tail.to_f64_lossy())
            )));
            break;
        }
        let done = fit.tail <= eps_tail;
        accepted = Some(fit);
        if done {
            break;
        }
        if nb == I_MAX {
            return Err(Error::TailNotConverged {
                bands: nb,
                tail: accepted
                    .as_ref()
                    .map_or(f64::NAN, |a| a.tail.to_f64_lossy()),
                eps: eps_tail.to_f64_lossy(),
            });
        }
    }
    let fit = match accepted {
        Some(f) => f,
        None => {
            let nb = 2;
            if g.len() < nb {
                return Err(Error::IllConditioned(
                    "band constants overflow before two bands".into(),
                ));
            }
            fit_pi0(m, &k, &g, nb, q)
        }
    };
    g.truncate(fit.bands);
    Ok(MdSolution {
        params: *m,
        form: MdForm::Banded,
        pi0: fit.pi0,
        r1: k.r1,
        r2: -k.r1,
        d1: k.d1.at(fit.pi0),
        d2: k.d2.at(fit.pi0),
        bands: fit.bands,
        tail_bound: fit.tail,
        tail_ratio: fit.q,
        eps_tail,
        warnings,
        magnitude_ratio: fit.ratio,
        constants: Some(k),
        g,
    })
}

struct Fit<T> {
    bands: usize,
    pi0: T,
    tail: T,
    q: T,
    ratio: T,
    /// Rounding error estimate `largest term * epsilon * bands`.
    abs_err: T,
    last_mass: T,
}

/// Pins `F_{nb-1}(nb b) = 1 - tail(pi0)` where the tail continues the mass of
/// the last band geometrically at the asymptotic ratio `q = e^{-theta b}`.
/// Both sides are affine in `pi0`, so the pin is a single linear equation.
fn fit_pi0<T: Real>(
    m: &MdParams<T>,
    k: &MdConstants<T>,
    g: &[Affine<T>],
    nb: usize,
    q: T,
) -> Fit<T> {
    let b = m.b;
    let last = nb - 1;
    let end = T::of_usize(nb) * b;
    let (f_end, _) = band_eval(m, k, g, last, end, T::zero(), false);
    let (f_start, _) = band_eval(m, k, g, last, end - b, T::zero(), false);
    let w = q / (T::one() - q);
    // (1 + w) F_end - w F_start = 1
    let lhs = f_end.scale(T::one() + w) - f_start.scale(w);
    let pi0 = (T::one() - lhs.c) / lhs.s;
    let last_mass = f_end.at(pi0) - f_start.at(pi0);
    let tail = last_mass * w;
    let mut ratio = T::zero();
    let mut largest = T::zero();
    for i in 0..nb {
        let x = T::of_usize(i + 1) * b;
        let (v, mag) = band_eval(m, k, g, i, x, pi0, false);
        let val = v.at(pi0).abs();
        ratio = ratio.max(mag / val.max(T::min_positive_value()));
        largest = largest.max(mag);
    }
    Fit {
        bands: nb,
        pi0,
        tail,
        q,
        ratio,
        abs_err: largest * T::epsilon() * T::of_usize(nb),
        last_mass,
    }
}

/// Warnings raised before any computation.
pub fn precheck_warnings<T: Real>(m: &MdParams<T>) -> Vec<Error> {
    let mut w = Vec::new();
    if m.p > T::lit(HEAVY_P) && m.p < T::one() {
        w.push(Error::IllConditioned(format!(
            "p = {} > {HEAVY_P}: the band recursion is unsuitable this close to p = 1; \
             use the fixedpoint engine",
            m.p.to_f64_lossy()
        )));
    }
    if m.p >= T::one() && m.rho() > T::lit(HEAVY_P) {
        w.push(Error::IllConditioned(format!(
            "rho = {} > {HEAVY_P}: Erlang's formula suffers roundoff under heavy traffic",
            m.rho().to_f64_lossy()
        )));
    }
    w
}

/// `p = 0`: `pi0 = 1/(1 + lambda b)` and density `lambda pi0` on `(0, b)`.
pub fn solve_md_p0<T: Real>(m: &MdParams<T>) -> Result<MdSolution<T>> {
    if !m.p.is_zero() {
        return Err(Error::InvalidParameter(format!(
            "closed form requires p = 0, got {}",
            m.p
        )));
    }
    let pi0 = (T::one() + m.lambda * m.b).recip();
    Ok(MdSolution {
        params: *m,
        form: MdForm::Uniform,
        pi0,
        r1: T::zero(),
        r2: T::zero(),
        d1: m.lambda * pi0,
        d2: T::zero(),
        bands: 1,
        tail_bound: T::zero(),
        tail_ratio: T::zero(),
        eps_tail: T::zero(),
        warnings: Vec::new(),
        magnitude_ratio: T::one(),
        constants: None,
        g: Vec::new(),
    })
}

/// `p = 1`: `F(x) = (1-rho) sum_{j<=i} (-lambda(x-jb))^j / j! e^{lambda(x-jb)}`
/// on band `i`. Bands are kept while the alternating sum retains precision and
/// `1 - F` exceeds `eps_tail`; beyond, the tail decays as `e^{-theta x}` with
/// `lambda (e^{theta b} - 1) = theta`.
pub fn solve_md_p1_erlang<T: Real>(m: &MdParams<T>, eps_tail: T) -> Result<MdSolution<T>> {
    if m.p < T::one() {
        return Err(Error::InvalidParameter(format!(
            "Erlang's formula requires p = 1, got {}",
            m.p
        )));
    }
    let rho = m.rho();
    if !(rho < T::one()) {
        return Err(Error::UnstableP1 {
            rho: rho.to_f64_lossy(),
        });
    }
    let mut warnings = precheck_warnings(m);
    let budget = T::lit(CONDITION_BUDGET) / T::epsilon();
    let mut bands = 1;
    let mut ratio = T::one();
    loop {
        let x = T::of_usize(bands) * m.b;
        let (v, mag) = erlang_value(m, bands - 1, x, false);
        let r = mag / v.abs().max(T::min_positive_value());
        // the exponential continuation needs 1 - F itself to be accurate
        let abs_err = mag * T::epsilon() * T::of_usize(bands);
        if !(r <= budget) || !(abs_err <= T::lit(1e-3) * (T::one() - v)) {
            bands -= 1;
            warnings.push(Error::IllConditioned(format!(
                "Erlang's sum loses precision beyond {bands} bands; exponential tail used beyond"
            )));
            break;
        }
        ratio = ratio.max(r);
        if T::one() - v <= eps_tail || bands >= 10 * I_MAX {
            break;
        }
        bands += 1;
    }
    let bands = bands.max(1);
    let theta = decay_rate(m);
    let tail =
        (T::one() - erlang_value(m, bands - 1, T::of_usize(bands) * m.b, false).0).max(T::zero());
    Ok(MdSolution {
        params: *m,
        form: MdForm::Erlang,
        pi0: T::one() - rho,
        r1: T::zero(),
        r2: T::zero(),
        d1: T::zero(),
        d2: T::zero(),
        bands,
        tail_bound: tail,
        tail_ratio: (-theta * m.b).exp(),
        eps_tail,
        warnings,
        magnitude_ratio: ratio,
        constants: None,
        g: Vec::new(),
    })
}

fn erlang_value<T: Real>(m: &MdParams<T>, i: usize, x: T, density: bool) -> (T, T) {
    let (lambda, b) = (m.lambda, m.b);
    let scale = T::one() - m.rho();
    let mut acc = T::zero();
    let mut mag = T::zero();
    for j in 0..=i {
        let y = x - T::of_usize(j) * b;
        let e = (lambda * y).exp();
        let u = -lambda * y;
        // u^j / j!
        let mut term = T::one();
        for t in 1..=j {
            term = term * u / T::of_usize(t);
        }
        let v = if density {
            // d/dx [u^j/j! e^{lambda y}] = lambda (u^j/j! - u^(j-1)/(j-1)!) e^{lambda y}
            let prev = if j == 0 {
                T::zero()
            } else {
                let mut t = T::one();
                for s in 1..j {
                    t = t * u / T::of_usize(s);
                }
                t
            };
            lambda * (term - prev) * e
        } else {
            term * e
        };
        mag = mag.max(v.abs());
        acc += v;
    }
    (scale * acc, scale * mag)
}

/// Positive root of `lambda p e^{theta b} = lambda + theta`, the decay rate of
/// `1 - F` (requires `lambda b < 1` when `p = 1`).
fn decay_rate<T: Real>(m: &MdParams<T>) -> T {
    let (lambda, b, p) = (m.lambda, m.b, m.p);
    let h = |t: T| lambda * p * (t * b).exp() - lambda - t;
    let mut lo = T::lit(1e-300).max(T::min_positive_value());
    let mut hi = T::one() / b;
    while h(hi) < T::zero() {
        hi *= T::lit(2.0);
    }
    // h < 0 just right of 0: p < 1, or lambda b < 1 at p = 1
    for _ in 0..400 {
        let mid = (lo + hi) * T::lit(0.5);
        if h(mid) < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= T::epsilon() * hi {
            break;
        }
    }
    (lo + hi) * T::lit(0.5)
}

/// Dispatches on `p`: closed forms at the endpoints, band recursion inside.
pub fn solve_any<T: Real>(m: &MdParams<T>, eps_tail: T) -> Result<MdSolution<T>> {
    if m.p.is_zero() {
        solve_md_p0(m)
    } else if m.p >= T::one() {
        solve_md_p1_erlang(m, eps_tail)
    } else {
        solve_md(m, eps_tail)
    }
}
