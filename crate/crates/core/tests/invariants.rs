use lqsolve_core::dist::{InterarrivalDist, MixedErlangDist, ModelParams, ServiceDist};
use lqsolve_core::fixedpoint::{apply_t, GridFunction, XDistribution};
use lqsolve_core::sim::{simulate, SimConfig};
use lqsolve_core::{giph, DoubleDouble as D};
use proptest::prelude::*;

fn weights(raw: Vec<f64>) -> Vec<f64> {
    let s: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / s).collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_solution_is_a_distribution(
        p in 0.05f64..0.95,
        lambda in 0.3f64..3.0,
        mu in 0.5f64..4.0,
        raw in prop::collection::vec(0.05f64..1.0, 1..4),
    ) {
        let m = ModelParams::new(
            p,
            InterarrivalDist::exponential(lambda).unwrap(),
            ServiceDist::MixedErlang(MixedErlangDist::new(mu, weights(raw)).unwrap()),
        ).unwrap();
        let g = giph::solve(&m).unwrap();
        prop_assert!(g.normalization_error() < 1e-9);
        prop_assert!(g.c0 > 0.0 && g.c0 <= 1.0);
        let mut prev = g.cdf(0.0);
        for k in 1..200 {
            let f = g.cdf(k as f64 * 0.1);
            prop_assert!(f >= prev - 1e-12 && f <= 1.0 + 1e-12);
            prev = f;
        }
    }

    #[test]
    fn operator_maps_distributions_to_distributions(
        p in 0.0f64..1.0,
        b in 0.2f64..2.0,
        cuts in prop::collection::vec(0.0f64..1.0, 1..30),
    ) {
        let m = ModelParams::new(
            p,
            InterarrivalDist::exponential(1.0).unwrap(),
            ServiceDist::deterministic(b).unwrap(),
        ).unwrap();
        let n = 400;
        let x_max = 10.0;
        let mut cuts = cuts;
        cuts.sort_by(f64::total_cmp);
        let f = GridFunction::from_fn(x_max, n, |x| {
            cuts.iter().filter(|&&c| c * x_max <= x).count() as f64 / cuts.len() as f64
        });
        let table = XDistribution::new(&m).unwrap().table(n, x_max / n as f64).unwrap();
        let tf = apply_t(&f, &table, p);
        prop_assert!(tf.monotonicity_defect() <= 1e-12);
        prop_assert!(tf.values.iter().all(|v| (0.0..=1.0).contains(v)));
    }

    #[test]
    fn double_double_round_trips(a in -1e6f64..1e6, b in 1e-3f64..1e3) {
        let (x, y) = (D::of(a), D::of(b));
        let back = (x / y) * y - x;
        prop_assert!(back.hi().abs() <= 1e-28 * a.abs().max(1.0));
        prop_assert_eq!((x + y - y).hi(), a);
    }

    #[test]
    fn simulation_is_reproducible(seed in any::<u64>(), reps in 1usize..5) {
        let m = ModelParams::new(
            0.5,
            InterarrivalDist::erlang(2, 1.0).unwrap(),
            ServiceDist::deterministic(0.7).unwrap(),
        ).unwrap();
        let cfg = SimConfig { replications: reps, burn_in: 100, ..SimConfig::new(m, 2_000, seed) };
        let (a, b) = (simulate(&cfg).unwrap(), simulate(&cfg).unwrap());
        prop_assert_eq!(a.values(), b.values());
        prop_assert_eq!(a.n, 2_000);
    }
}
