use lqsolve_core::dist::{InterarrivalDist, MixedErlangDist, ModelParams, ServiceDist};
use lqsolve_core::fixedpoint::{solve_fixed_point, FixedPointOptions, GridFunction};
use lqsolve_core::md::{solve_any, MdForm, MdParams};
use lqsolve_core::sim::{ks_statistic, simulate, SimConfig};
use lqsolve_core::{giph, DoubleDouble as D, Real};

fn grid_sup(f: &GridFunction<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    (0..=f.n)
        .map(|k| (f.values[k] - cdf(f.x(k))).abs())
        .fold(0.0, f64::max)
}

fn me(p: f64, arrival: InterarrivalDist<f64>, mu: f64, kappa: Vec<f64>) -> ModelParams<f64> {
    ModelParams::new(
        p,
        arrival,
        ServiceDist::MixedErlang(MixedErlangDist::new(mu, kappa).unwrap()),
    )
    .unwrap()
}

#[test]
fn band_recursion_matches_fixed_point_where_well_conditioned() {
    for lambda in [0.5, 1.0, 1.5, 2.0] {
        for p in [0.1, 0.25, 0.5] {
            let s = solve_any(
                &MdParams::new(D::of(lambda), D::of(1.0), D::of(p)).unwrap(),
                D::of(1e-10),
            )
            .unwrap();
            assert_eq!(s.form, MdForm::Banded);
            if !s.warnings.is_empty() {
                continue;
            }
            let m = ModelParams::new(
                p,
                InterarrivalDist::exponential(lambda).unwrap(),
                ServiceDist::deterministic(1.0).unwrap(),
            )
            .unwrap();
            let fp = solve_fixed_point(
                &m,
                &FixedPointOptions {
                    n: 4000,
                    ..Default::default()
                },
            )
            .unwrap();
            let d = grid_sup(&fp.f, |x| s.cdf(D::of(x)).to_f64_lossy());
            assert!(d < 1e-4, "lambda {lambda} p {p}: {d:e}");
        }
    }
}

#[test]
fn transform_method_matches_fixed_point_across_arrival_families() {
    let arrivals = [
        InterarrivalDist::exponential(1.0).unwrap(),
        InterarrivalDist::erlang(3, 3.0).unwrap(),
        InterarrivalDist::hyperexponential(vec![0.4, 0.6], vec![0.5, 3.0]).unwrap(),
    ];
    for a in arrivals {
        for p in [0.3, 0.8] {
            let m = me(p, a.clone(), 3.0, vec![0.2, 0.5, 0.3]);
            let g = giph::solve(&m).unwrap();
            let fp = solve_fixed_point(&m, &FixedPointOptions::default()).unwrap();
            let d = grid_sup(&fp.f, |x| g.cdf(x));
            assert!(d < 1e-4, "{a:?} p {p}: {d:e}");
        }
    }
}

#[test]
fn mm1_waiting_time_is_recovered() {
    // P[W > x] = rho e^{-mu (1 - rho) x}
    for rho in [0.2, 0.5, 0.8] {
        let m = me(
            1.0,
            InterarrivalDist::exponential(rho).unwrap(),
            1.0,
            vec![1.0],
        );
        let g = giph::solve(&m).unwrap();
        for x in [0.0, 0.5, 2.0, 7.0] {
            let exact = 1.0 - rho * (-(1.0 - rho) * x).exp();
            assert!((g.cdf(x) - exact).abs() < 1e-12, "rho {rho} x {x}");
        }
    }
}

#[test]
fn simulation_agrees_with_transform_method() {
    let m = me(
        0.6,
        InterarrivalDist::erlang(2, 2.0).unwrap(),
        2.0,
        vec![0.5, 0.5],
    );
    let g = giph::solve(&m).unwrap();
    let cfg = SimConfig {
        replications: 4,
        ..SimConfig::new(m, 400_000, 5)
    };
    let ks = ks_statistic(&simulate(&cfg).unwrap(), |x| g.cdf(x));
    assert!(ks < 5e-3, "{ks:e}");
}
