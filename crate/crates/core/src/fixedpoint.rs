//! Contraction iteration for the distribution function of `W`.
//!
//! With `X = B - A`, the stationary law is the unique fixed point of
//!
//! ```text
//! (TF)(x) = p E[F(x - X); X <= x] + (1 - p) (1 - E[F(X - x); X > x])
//! ```
//!
//! which contracts in sup-norm with factor `max{p, 1-p}` (`P[X > 0]` at
//! `p = 0`). `F` lives on a uniform grid, is linear between nodes and frozen at
//! `F(x_max)` beyond; the Stieltjes sums use cell averages of `F` against the
//! exact increments of `F_X` between grid offsets, so the discrete map has
//! nonnegative weights summing to at most one and contracts exactly.

use rayon::prelude::*;

use crate::dist::{erlang_sf, InterarrivalDist, ModelParams, ServiceDist};
use crate::error::{Error, Result};
use crate::scalar::{ln_factorial, Real};

pub const MAX_ITERATIONS: usize = 100_000;
pub const DEFAULT_N: usize = 2000;
pub const DEFAULT_TOL: f64 = 1e-6;
/// Default `x_max` in units of `E[B]`.
pub const DEFAULT_SPAN: f64 = 20.0;
const MAX_DOUBLINGS: usize = 8;

/// Values of a distribution function on `x_k = k x_max / n`, `k = 0..=n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction<T> {
    pub x_max: T,
    pub n: usize,
    pub values: Vec<T>,
}

impl<T: Real> GridFunction<T> {
    pub fn constant(x_max: T, n: usize, c: T) -> Self {
        Self {
            x_max,
            n,
            values: vec![c; n + 1],
        }
    }

    pub fn from_fn(x_max: T, n: usize, f: impl Fn(T) -> T) -> Self {
        let h = x_max / T::of_usize(n);
        Self {
            x_max,
            n,
            values: (0..=n).map(|k| f(h * T::of_usize(k))).collect(),
        }
    }

    pub fn step(&self) -> T {
        self.x_max / T::of_usize(self.n)
    }

    pub fn x(&self, k: usize) -> T {
        self.step() * T::of_usize(k)
    }

    /// Linear interpolation; `0` left of the origin, frozen beyond `x_max`.
    pub fn eval(&self, x: T) -> T {
        if x < T::zero() {
            return T::zero();
        }
        if x >= self.x_max {
            return self.values[self.n];
        }
        let t = x / self.step();
        let k = t.floor().to_usize().unwrap_or(0).min(self.n - 1);
        let w = t - T::of_usize(k);
        self.values[k] * (T::one() - w) + self.values[k + 1] * w
    }

    /// Density by differences: one-sided at the ends, central inside.
    pub fn density(&self, x: T) -> T {
        if x < T::zero() || x > self.x_max {
            return T::zero();
        }
        let h = self.step();
        let k = (x / h).round().to_usize().unwrap_or(0).min(self.n);
        let v = &self.values;
        if k == 0 {
            (v[1] - v[0]) / h
        } else if k == self.n {
            (v[k] - v[k - 1]) / h
        } else {
            (v[k + 1] - v[k - 1]) / (h + h)
        }
    }

    pub fn sup_distance(&self, other: &Self) -> T {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (*a - *b).abs())
            .fold(T::zero(), T::max)
    }

    /// Largest decrease between consecutive nodes (zero when monotone).
    pub fn monotonicity_defect(&self) -> T {
        self.values
            .windows(2)
            .map(|w| w[0] - w[1])
            .fold(T::zero(), T::max)
    }

    /// Same function on a grid twice as wide with the same step.
    fn widened(&self) -> Self {
        let n = 2 * self.n;
        let last = self.values[self.n];
        let mut values = self.values.clone();
        values.resize(n + 1, last);
        Self {
            x_max: self.x_max + self.x_max,
            n,
            values,
        }
    }
}

/// Law of `X = B - A`.
#[derive(Clone, Debug, PartialEq)]
pub struct XDistribution<T> {
    arrival: InterarrivalDist<T>,
    service: ServiceDist<T>,
}

impl<T: Real> XDistribution<T> {
    pub fn new(m: &ModelParams<T>) -> Result<Self> {
        if let (InterarrivalDist::Deterministic { .. }, ServiceDist::Deterministic(_)) =
            (&m.arrival, &m.service)
        {
            return Err(Error::Unsupported(
                "deterministic interarrival and service times give X an atom".into(),
            ));
        }
        Ok(Self {
            arrival: m.arrival.clone(),
            service: m.service.clone(),
        })
    }

    /// `F_X(y) = E[F_B(y + A)]`.
    pub fn cdf(&self, y: T) -> Result<T> {
        use InterarrivalDist as A;
        let v = match (&self.arrival, &self.service) {
            (A::Deterministic { value }, s) => s.cdf(y + *value),
            (A::Exponential { rate }, s) => exp_arrival_cdf(*rate, s, y),
            (A::HyperExponential { weights, rates }, s) => weights
                .iter()
                .zip(rates)
                .map(|(&w, &r)| w * exp_arrival_cdf(r, s, y))
                .sum(),
            (A::Erlang { shape, rate }, ServiceDist::Deterministic(b)) => {
                erlang_sf(*shape, *rate, *b - y)
            }
            (A::Erlang { shape, rate }, s) => erlang_arrival_cdf(*shape, *rate, s, y),
        };
        Ok(v.max(T::zero()).min(T::one()))
    }

    /// `F_X(j h)` for `j = -n ..= 2n`, the offsets `apply_t` needs.
    pub fn table(&self, n: usize, h: T) -> Result<XTable<T>> {
        let g = (0..=3 * n)
            .into_par_iter()
            .map(|i| self.cdf(h * (T::of_usize(i) - T::of_usize(n))))
            .collect::<Result<Vec<_>>>()?;
        Ok(XTable::from_values(n, g))
    }
}

fn exp_arrival_cdf<T: Real>(lambda: T, s: &ServiceDist<T>, y: T) -> T {
    match s {
        ServiceDist::Deterministic(b) => {
            if y >= *b {
                T::one()
            } else {
                (-lambda * (*b - y)).exp()
            }
        }
        ServiceDist::MixedErlang(_) => erlang_arrival_cdf(1, lambda, s, y),
    }
}

/// `P[B - A <= y]` for `A ~ Erlang(k, lambda)` and mixed-Erlang `B` by racing
/// the phases: when one variable finishes, the other has a negative-binomial
/// number of completed phases and an Erlang remainder.
fn erlang_arrival_cdf<T: Real>(k: usize, lambda: T, s: &ServiceDist<T>, y: T) -> T {
    let ServiceDist::MixedErlang(d) = s else {
        unreachable!("deterministic service has its own closed form")
    };
    let mu = d.mu();
    let tot = lambda + mu;
    let (pa, pb) = (lambda / tot, mu / tot);
    // P[j phases of the other done when `n` phases of this one finish]
    let negbin = |n: usize, j: usize, own: T, other: T| {
        (ln_factorial::<T>(n + j - 1) - ln_factorial::<T>(n - 1) - ln_factorial::<T>(j)).exp()
            * own.powi(n as i32)
            * other.powi(j as i32)
    };
    let mut acc = T::zero();
    if y < T::zero() {
        // A - B >= -y: A still has k - i phases when B finishes
        for (n, kappa) in d.components() {
            for i in 0..k {
                acc += kappa * negbin(n, i, pb, pa) * erlang_sf(k - i, lambda, -y);
            }
        }
        acc
    } else {
        for (n, kappa) in d.components() {
            for j in 0..n {
                acc += kappa * negbin(k, j, pa, pb) * erlang_sf(n - j, mu, y);
            }
        }
        T::one() - acc
    }
}

/// `F_X` sampled at `j h`, `j = -n ..= 2n`, with its increments.
#[derive(Clone, Debug)]
pub struct XTable<T> {
    n: usize,
    g: Vec<T>,
    /// `d[i] = g[i] - g[i - 1]`, `d[0] = g[0]`.
    d: Vec<T>,
}

impl<T: Real> XTable<T> {
    fn from_values(n: usize, g: Vec<T>) -> Self {
        let mut d = Vec::with_capacity(g.len());
        d.push(g[0]);
        d.extend(g.windows(2).map(|w| w[1] - w[0]));
        Self { n, g, d }
    }

    /// `F_X(0)`.
    pub fn at_zero(&self) -> T {
        self.g[self.n]
    }
}

/// One application of the map on `f`'s grid.
pub fn apply_t<T: Real>(f: &GridFunction<T>, table: &XTable<T>, p: T) -> GridFunction<T> {
    let n = f.n;
    assert_eq!(table.n, n, "table built for a different grid");
    let v = &f.values;
    let cells: Vec<T> = v.windows(2).map(|w| (w[0] + w[1]) * T::lit(0.5)).collect();
    let last = v[n];
    let (g, d) = (&table.g, &table.d);
    let q = T::one() - p;
    let values = (0..=n)
        .into_par_iter()
        .map(|k| {
            // p part: cell m covers X in (x_k - x_{m+1}, x_k - x_m]
            let mut below = last * g[k];
            for (a, dg) in cells.iter().zip(d[k + 1..=k + n].iter().rev()) {
                below += *a * *dg;
            }
            // (1-p) part: cell m covers X in (x_k + x_m, x_k + x_{m+1}]
            let mut above = last * (T::one() - g[k + 2 * n]);
            for (a, dg) in cells.iter().zip(&d[k + n + 1..=k + 2 * n]) {
                above += *a * *dg;
            }
            (p * below + q * (T::one() - above))
                .max(T::zero())
                .min(T::one())
        })
        .collect();
    GridFunction {
        x_max: f.x_max,
        n,
        values,
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FixedPointOptions {
    pub n: usize,
    /// Defaults to `DEFAULT_SPAN * E[B]`.
    pub x_max: Option<f64>,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self {
            n: DEFAULT_N,
            x_max: None,
            tol: DEFAULT_TOL,
            max_iterations: MAX_ITERATIONS,
        }
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointRun<T> {
    pub f: GridFunction<T>,
    pub iterations: usize,
    /// Sup-norm size of the final step.
    pub last_step: T,
    /// Contraction factor used in the stopping rule.
    pub contraction: T,
    /// `1 - F(x_max)`.
    pub tail: T,
}

/// Contraction factor: `max{p, 1-p}`, or `P[X > 0]` at `p = 0`.
pub fn contraction_factor<T: Real>(p: T, fx0: T) -> T {
    if p.is_zero() {
        T::one() - fx0
    } else {
        p.max(T::one() - p)
    }
}

pub fn solve_fixed_point<T: Real>(
    m: &ModelParams<T>,
    opts: &FixedPointOptions,
) -> Result<FixedPointRun<T>> {
    let x_max = match opts.x_max {
        Some(x) => T::lit(x),
        None => T::lit(DEFAULT_SPAN) * m.service.mean(),
    };
    let start = GridFunction::constant(x_max, opts.n, T::one());
    solve_from(m, start, opts)
}

/// Iterates from `start`; the grid is doubled in width (same step) while the
/// tail beyond `x_max` exceeds `tol`.
pub fn solve_from<T: Real>(
    m: &ModelParams<T>,
    start: GridFunction<T>,
    opts: &FixedPointOptions,
) -> Result<FixedPointRun<T>> {
    if m.p >= T::one() {
        return Err(Error::NoContraction);
    }
    if opts.n < 2 || !(opts.tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fixed point needs n >= 2 and tol > 0, got n = {} and tol = {}",
            opts.n, opts.tol
        )));
    }
    if !(start.x_max > T::zero()) {
        return Err(Error::InvalidParameter(format!(
            "x_max must be positive, got {}",
            start.x_max
        )));
    }
    let xd = XDistribution::new(m)?;
    let tol = T::lit(opts.tol);
    let mut f = start;
    let mut total = 0;
    for doubling in 0..=MAX_DOUBLINGS {
        let table = xd.table(f.n, f.step())?;
        let q = contraction_factor(m.p, table.at_zero());
        if !(q < T::one()) {
            return Err(Error::NoContraction);
        }
        let stop = if q.is_zero() {
            T::infinity()
        } else {
            tol * (T::one() - q) / q
        };
        let mut last_step = T::infinity();
        while last_step > stop {
            if total >= opts.max_iterations {
                return Err(Error::MaxIterations(total));
            }
            let next = apply_t(&f, &table, m.p);
            last_step = next.sup_distance(&f);
            f = next;
            total += 1;
        }
        let tail = T::one() - f.values[f.n];
        if tail <= tol || doubling == MAX_DOUBLINGS {
            let defect = f.monotonicity_defect();
            if defect > tol {
                return Err(Error::IllConditioned(format!(
                    "fixed point is not monotone (decrease {:e})",
                    defect.to_f64_lossy()
                )));
            }
            return Ok(FixedPointRun {
                f,
                iterations: total,
                last_step,
                contraction: q,
                tail,
            });
        }
        f = f.widened();
    }
    unreachable!("loop returns on its last pass")
}
