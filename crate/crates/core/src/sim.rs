//! Direct simulation of `W_{n+1} = max{0, B_n - A_n + Y_n W_n}`.
//!
//! Replication `r` draws from `ChaCha8Rng::seed_from_u64(derive_seed(seed, r))`,
//! so a fixed seed reproduces the sample stream bit for bit on any thread count.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, Gamma};
use rayon::prelude::*;

use crate::dist::{InterarrivalDist, ModelParams, ServiceDist};
use crate::error::{Error, Result};

pub const DEFAULT_BURN_IN: usize = 10_000;

#[derive(Clone, Debug)]
pub struct SimConfig {
    pub model: ModelParams<f64>,
    /// Total recorded samples, split evenly over replications.
    pub samples: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub replications: usize,
    /// Record every `thin`-th step.
    pub thin: usize,
}

impl SimConfig {
    pub fn new(model: ModelParams<f64>, samples: usize, seed: u64) -> Self {
        Self {
            model,
            samples,
            burn_in: DEFAULT_BURN_IN,
            seed,
            replications: 1,
            thin: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.replications == 0 || self.thin == 0 {
            return Err(Error::InvalidParameter(format!(
                "samples, replications and thin must be >= 1, got {}, {}, {}",
                self.samples, self.replications, self.thin
            )));
        }
        if self.replications > self.samples {
            return Err(Error::InvalidParameter(format!(
                "{} replications cannot share {} samples",
                self.replications, self.samples
            )));
        }
        self.model.require_stable()
    }

    fn share(&self, r: usize) -> usize {
        let base = self.samples / self.replications;
        base + usize::from(r < self.samples % self.replications)
    }
}

/// SplitMix64 finalizer.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of replication `r`: `splitmix64(seed ^ splitmix64(r))`.
pub fn derive_seed(seed: u64, r: u64) -> u64 {
    splitmix64(seed ^ splitmix64(r))
}

enum Sampler {
    Const(f64),
    Exp(Exp<f64>),
    Gamma(Gamma<f64>),
    Mixture(WeightedIndex<f64>, Vec<Sampler>),
}

impl Sampler {
    fn arrival(a: &InterarrivalDist<f64>) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::InvalidParameter(e.to_string());
        Ok(match a {
            InterarrivalDist::Exponential { rate } => {
                Sampler::Exp(Exp::new(*rate).map_err(|e| bad(&e))?)
            }
            InterarrivalDist::Erlang { shape, rate } => {
                Sampler::Gamma(Gamma::new(*shape as f64, rate.recip()).map_err(|e| bad(&e))?)
            }
            InterarrivalDist::Deterministic { value } => Sampler::Const(*value),
            InterarrivalDist::HyperExponential { weights, rates } => Sampler::Mixture(
                WeightedIndex::new(weights).map_err(|e| bad(&e))?,
                rates
                    .iter()
                    .map(|r| Exp::new(*r).map(Sampler::Exp).map_err(|e| bad(&e)))
                    .collect::<Result<_>>()?,
            ),
        })
    }

    fn service(s: &ServiceDist<f64>) -> Result<Self> {
        let bad = |e: &dyn std::fmt::Display| Error::InvalidParameter(e.to_string());
        Ok(match s {
            ServiceDist::Deterministic(b) => Sampler::Const(*b),
            ServiceDist::MixedErlang(d) => {
                let scale = d.mu().recip();
                Sampler::Mixture(
                    WeightedIndex::new(d.kappa()).map_err(|e| bad(&e))?,
                    (1..=d.order())
                        .map(|n| {
                            Gamma::new(n as f64, scale)
                                .map(Sampler::Gamma)
                                .map_err(|e| bad(&e))
                        })
                        .collect::<Result<_>>()?,
                )
            }
        })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            Sampler::Const(c) => *c,
            Sampler::Exp(d) => d.sample(rng),
            Sampler::Gamma(d) => d.sample(rng),
            Sampler::Mixture(w, parts) => parts[w.sample(rng)].draw(rng),
        }
    }
}

/// Raw sample stream of every replication, in replication order.
pub fn simulate_replications(cfg: &SimConfig) -> Result<Vec<Vec<f64>>> {
    cfg.validate()?;
    let a = Sampler::arrival(&cfg.model.arrival)?;
    let b = Sampler::service(&cfg.model.service)?;
    let p = cfg.model.p;
    Ok((0..cfg.replications)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, r as u64));
            let mut w = 0.0f64;
            let mut step = |rng: &mut ChaCha8Rng| {
                let bn = b.draw(rng);
                let an = a.draw(rng);
                let y = if rng.random_bool(p) { w } else { -w };
                w = (bn - an + y).max(0.0);
                w
            };
            for _ in 0..cfg.burn_in {
                step(&mut rng);
            }
            let n = cfg.share(r);
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                for _ in 1..cfg.thin {
                    step(&mut rng);
                }
                out.push(step(&mut rng));
            }
            out
        })
        .collect())
}

pub fn simulate(cfg: &SimConfig) -> Result<EmpiricalDistribution> {
    let reps = simulate_replications(cfg)?;
    Ok(EmpiricalDistribution::new(reps.concat()))
}

/// Sorted sample of `W`.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalDistribution {
    values: Vec<f64>,
    pub atom_at_zero: f64,
    pub n: usize,
}

impl EmpiricalDistribution {
    pub fn new(mut values: Vec<f64>) -> Self {
        values.sort_by(f64::total_cmp);
        let n = values.len();
        let zeros = values.partition_point(|v| *v <= 0.0);
        Self {
            atom_at_zero: if n == 0 { 0.0 } else { zeros as f64 / n as f64 },
            n,
            values,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Fraction of the sample `<= x`.
    pub fn cdf(&self, x: f64) -> f64 {
        self.values.partition_point(|v| *v <= x) as f64 / self.n as f64
    }

    /// Lower empirical quantile.
    pub fn quantile(&self, q: f64) -> f64 {
        let k = ((q * self.n as f64).ceil() as usize).clamp(1, self.n);
        self.values[k - 1]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }
}

/// `sup |F_n - F|` over the sample, ties grouped: at each distinct value `v`
/// both `|F(v) - #{<= v}/n|` and `|F(v-) - #{< v}/n|` count, so the atom at
/// zero is compared against `cdf(0)`.
pub fn ks_statistic(emp: &EmpiricalDistribution, cdf: impl Fn(f64) -> f64 + Sync) -> f64 {
    let n = emp.n as f64;
    let v = &emp.values;
    // start index of each run of equal values
    let mut starts: Vec<usize> = (0..v.len())
        .filter(|&i| i == 0 || v[i] != v[i - 1])
        .collect();
    starts.push(v.len());
    starts
        .par_windows(2)
        .map(|w| {
            let (i, j) = (w[0], w[1]);
            let x = v[i];
            let left = if x <= 0.0 {
                0.0
            } else {
                cdf(x - x.abs() * 1e-12)
            };
            (cdf(x) - j as f64 / n)
                .abs()
                .max((left - i as f64 / n).abs())
        })
        .reduce(|| 0.0, f64::max)
}

/// Two-sample statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &EmpiricalDistribution, b: &EmpiricalDistribution) -> f64 {
    let (x, y) = (&a.values, &b.values);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < x.len() && j < y.len() {
        let t = x[i].min(y[j]);
        while i < x.len() && x[i] <= t {
            i += 1;
        }
        while j < y.len() && y[j] <= t {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dist::MixedErlangDist;

    fn model(p: f64, a: InterarrivalDist<f64>, s: ServiceDist<f64>) -> ModelParams<f64> {
        ModelParams::new(p, a, s).unwrap()
    }

    #[test]
    fn service_shorter_than_gap_keeps_queue_empty() {
        let m = model(
            0.7,
            InterarrivalDist::deterministic(2.0).unwrap(),
            ServiceDist::deterministic(1.0).unwrap(),
        );
        let mut cfg = SimConfig::new(m, 1000, 5);
        cfg.burn_in = 0;
        let emp = simulate(&cfg).unwrap();
        assert_eq!(emp.atom_at_zero, 1.0);
    }

    #[test]
    fn same_seed_same_stream() {
        let m = model(
            0.4,
            InterarrivalDist::hyperexponential(vec![0.5, 0.5], vec![1.0, 3.0]).unwrap(),
            ServiceDist::MixedErlang(MixedErlangDist::new(2.0, vec![0.3, 0.7]).unwrap()),
        );
        let mut cfg = SimConfig::new(m, 5000, 99);
        cfg.replications = 3;
        let a = simulate_replications(&cfg).unwrap();
        let b = simulate_replications(&cfg).unwrap();
        assert_eq!(a, b);
        assert_ne!(a[0], a[1]);
        assert_eq!(a.iter().map(Vec::len).sum::<usize>(), 5000);
        cfg.seed = 100;
        assert_ne!(simulate_replications(&cfg).unwrap(), a);
    }

    #[test]
    fn derived_seeds_are_distinct() {
        let seeds: std::collections::BTreeSet<u64> = (0..1000).map(|r| derive_seed(7, r)).collect();
        assert_eq!(seeds.len(), 1000);
    }

    #[test]
    fn ks_of_own_ecdf_is_zero() {
        let emp = EmpiricalDistribution::new(vec![0.0, 0.0, 1.0, 2.0, 2.0, 3.5]);
        assert_eq!(ks_statistic(&emp, |x| emp.cdf(x)), 0.0);
        assert!(ks_statistic(&emp, |_| 0.5) >= 0.4);
        assert!((emp.atom_at_zero - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ks_two_sample_basics() {
        let a = EmpiricalDistribution::new(vec![1.0, 2.0, 3.0, 4.0]);
        let b = EmpiricalDistribution::new(vec![5.0, 6.0]);
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_two_sample(&a, &b), 1.0);
    }

    #[test]
    fn unstable_p1_is_refused() {
        let m = model(
            1.0,
            InterarrivalDist::exponential(1.0).unwrap(),
            ServiceDist::deterministic(1.5).unwrap(),
        );
        assert!(matches!(
            simulate(&SimConfig::new(m, 10, 1)),
            Err(Error::UnstableP1 { .. })
        ));
    }

    #[test]
    fn quantiles_are_order_statistics() {
        let emp = EmpiricalDistribution::new((1..=10).map(f64::from).collect());
        assert_eq!(emp.quantile(0.5), 5.0);
        assert_eq!(emp.quantile(0.99), 10.0);
        assert_eq!(emp.quantile(0.1), 1.0);
    }
}
