//! One PASS/FAIL line per acceptance criterion; exits nonzero if any fails.

use std::path::Path;
use std::process::Command as Process;
use std::time::{Duration, Instant};

use lqsolve::run::auto_thin;
use lqsolve_core::dist::{InterarrivalDist, MixedErlangDist, ModelParams, ServiceDist};
use lqsolve_core::fixedpoint::{self, apply_t, FixedPointOptions, GridFunction, XDistribution};
use lqsolve_core::md::{self, MdForm};
use lqsolve_core::sim::{self, SimConfig};
use lqsolve_core::{giph, DoubleDouble, Error, MdParams, MdSolution, Real};
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Dd = DoubleDouble;

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new() -> Self {
        Self {
            pass: true,
            detail: String::new(),
        }
    }

    fn check(&mut self, label: &str, ok: bool, shown: impl std::fmt::Display) {
        self.pass &= ok;
        if !self.detail.is_empty() {
            self.detail.push_str("; ");
        }
        self.detail
            .push_str(&format!("{label} {shown}{}", if ok { "" } else { " (!)" }));
    }

    fn at_most(&mut self, label: &str, value: f64, limit: f64) {
        self.check(label, value <= limit, format!("{value:.2e}"));
    }

    fn within(&mut self, label: &str, elapsed: Duration, limit: Duration) {
        self.check(
            label,
            elapsed < limit,
            format!("{:.2}s", elapsed.as_secs_f64()),
        );
    }
}

fn dd(x: f64) -> Dd {
    Dd::of(x)
}

fn md_solve(lambda: f64, b: f64, p: Dd) -> Result<MdSolution, Error> {
    md::solve_any(
        &MdParams::new(dd(lambda), dd(b), p)?,
        dd(md::DEFAULT_EPS_TAIL),
    )
}

fn md_model(lambda: f64, b: f64, p: f64) -> ModelParams<f64> {
    ModelParams::new(
        p,
        InterarrivalDist::exponential(lambda).unwrap(),
        ServiceDist::deterministic(b).unwrap(),
    )
    .unwrap()
}

fn me_model(p: f64, lambda: f64, mu: f64, kappa: Vec<f64>) -> ModelParams<f64> {
    ModelParams::new(
        p,
        InterarrivalDist::exponential(lambda).unwrap(),
        ServiceDist::MixedErlang(MixedErlangDist::new(mu, kappa).unwrap()),
    )
    .unwrap()
}

/// Sup distance at the grid nodes and cell midpoints.
fn grid_distance(f: &GridFunction<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    let h = f.step();
    (0..=f.n)
        .flat_map(|k| [f.x(k), f.x(k) + 0.5 * h])
        .filter(|&x| x <= f.x_max)
        .map(|x| (f.eval(x) - cdf(x)).abs())
        .fold(0.0, f64::max)
}

fn simulate(m: &ModelParams<f64>, samples: usize, seed: u64) -> sim::EmpiricalDistribution {
    let cfg = SimConfig {
        replications: 8,
        thin: auto_thin(m),
        ..SimConfig::new(m.clone(), samples, seed)
    };
    sim::simulate(&cfg).expect("simulation runs")
}

/// Density by central differences of the distribution function, so the ODE
/// checks do not reuse the solver's own derivative formulas.
fn density_derivatives(s: &MdSolution, x: Dd) -> (Dd, Dd, Dd) {
    let h = dd(1e-7);
    let f = |x: Dd| s.pdf(x);
    let (l, c, r) = (f(x - h), f(x), f(x + h));
    let f1 = (r - l) / (dd(2.0) * h);
    let k = dd(1e-5);
    let f2 = (f(x + k) - dd(2.0) * c + f(x - k)) / (k * k);
    (c, f1, f2)
}

fn ode_defect(s: &MdSolution, points: usize) -> (f64, f64) {
    let MdParams { lambda, b, p } = s.params;
    let (mut first, mut second) = (0.0f64, 0.0f64);
    for k in 1..=points {
        let x = b * dd(k as f64) / dd((points + 1) as f64);
        let (f, f1, f2) = density_derivatives(s, x);
        let fr = s.pdf(b - x);
        let one = dd(1.0);
        first = first.max(
            (f1 - lambda * f + lambda * (one - p) * fr)
                .abs()
                .to_f64_lossy(),
        );
        second = second.max(
            (f2 - lambda * lambda * p * (dd(2.0) - p) * f)
                .abs()
                .to_f64_lossy(),
        );
    }
    (first, second)
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let t = Instant::now();
    let s = md_solve(2.0, 1.0, dd(0.0)).expect("p = 0 solves");
    let elapsed = t.elapsed();
    o.check("form", s.form == MdForm::Uniform, format!("{:?}", s.form));
    o.at_most(
        "|pi0 - 1/3|",
        (s.pi0 - dd(1.0) / dd(3.0)).abs().to_f64_lossy(),
        1e-12,
    );
    let density = (1..100)
        .map(|k| {
            (s.pdf(dd(k as f64 / 100.0)) - dd(2.0) / dd(3.0))
                .abs()
                .to_f64_lossy()
        })
        .fold(0.0, f64::max);
    o.at_most("|f - 2/3| on (0,1)", density, 1e-12);
    o.at_most(
        "F(1) - 1",
        (s.cdf(dd(1.0)) - dd(1.0)).abs().to_f64_lossy(),
        1e-12,
    );
    o.within("runtime", elapsed, Duration::from_secs(1));
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let t = Instant::now();
    let s = md_solve(2.0, 1.0, dd(1.0) / dd(3.0)).expect("figure 1 solves");
    o.at_most("continuity", s.continuity_mismatch().to_f64_lossy(), 1e-10);
    let jump = s.pdf(dd(1.0) - dd(1e-20)) - s.pdf(dd(1.0) + dd(1e-20));
    let lambda_pi0 = dd(2.0) * s.pi0;
    o.at_most(
        "|jump - lambda pi0|",
        (jump - lambda_pi0).abs().to_f64_lossy(),
        1e-8,
    );

    let m = md_model(2.0, 1.0, 1.0 / 3.0);
    let opts = FixedPointOptions {
        n: 4000,
        ..FixedPointOptions::default()
    };
    let fp = fixedpoint::solve_fixed_point(&m, &opts).expect("fixed point converges");
    let cdf = |x: f64| s.cdf(dd(x)).to_f64_lossy();
    o.at_most("KS fixedpoint", grid_distance(&fp.f, cdf), 1e-4);
    let emp = simulate(&m, 1_000_000, 11);
    o.at_most("KS simulation", sim::ks_statistic(&emp, cdf), 5e-3);
    o.within("runtime", t.elapsed(), Duration::from_secs(30));
    o
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    for (i, rho) in [0.3, 0.5, 0.9].into_iter().enumerate() {
        let s = md_solve(rho, 1.0, dd(1.0)).expect("stable p = 1 solves");
        let exact = dd(1.0) - dd(rho);
        let f0 = s.cdf(dd(0.0));
        o.check(
            &format!("rho {rho}: F(0) = 1 - rho"),
            f0 == exact,
            format!("{:.2e}", (f0 - exact).abs().to_f64_lossy()),
        );
        let emp = simulate(&md_model(rho, 1.0, 1.0), 1_000_000, 20 + i as u64);
        let ks = sim::ks_statistic(&emp, |x| s.cdf(dd(x)).to_f64_lossy());
        o.at_most("KS", ks, 5e-3);
    }
    o
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let m = me_model(1.0, 1.0, 2.0, vec![1.0]);
    let g = giph::solve(&m).expect("M/M/1 solves");
    o.at_most(
        "|xi1 + 1|",
        (g.roots[0] - num_complex::Complex::new(-1.0, 0.0)).norm(),
        1e-9,
    );
    o.at_most("|c0 - 1/2|", (g.c0 - 0.5).abs(), 1e-9);
    o.at_most(
        "|c1 - 1/2|",
        (g.coeffs[0] - num_complex::Complex::new(0.5, 0.0)).norm(),
        1e-9,
    );
    for n in 1..=3usize {
        let mut kappa = vec![0.0; n];
        kappa[n - 1] = 1.0;
        let m = me_model(1.0, 1.0, 2.0 * n as f64, kappa);
        let a = giph::solve(&m).expect("solves");
        let b = giph::solve_p1_closed_form(&m).expect("closed form");
        let law = (0..=200)
            .map(|k| k as f64 * 0.05)
            .map(|x| (a.cdf(x) - b.cdf(x)).abs())
            .fold((a.c0 - b.c0).abs(), f64::max);
        o.at_most(&format!("N={n} |solve - closed form|"), law, 1e-8);
    }
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    for (i, p) in [0.25, 0.5, 0.75].into_iter().enumerate() {
        let t = Instant::now();
        let m = me_model(p, 1.0, 2.0, vec![0.3, 0.7]);
        let g = giph::solve(&m).expect("solves");
        let fp =
            fixedpoint::solve_fixed_point(&m, &FixedPointOptions::default()).expect("converges");
        let emp = simulate(&m, 1_000_000, 30 + i as u64);
        let elapsed = t.elapsed();
        let tag = format!("p={p}");
        o.at_most(
            &format!("{tag} normalization"),
            g.normalization_error(),
            1e-9,
        );
        o.at_most("residual", g.residual, 1e-7);
        o.at_most("KS fixedpoint", grid_distance(&fp.f, |x| g.cdf(x)), 1e-3);
        o.at_most("KS simulation", sim::ks_statistic(&emp, |x| g.cdf(x)), 5e-3);
        o.check("winding", g.winding == 2 && g.roots.len() == 2, g.winding);
        o.within("runtime", elapsed, Duration::from_secs(10));
    }
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let mut worst = (0.0f64, 0.0f64);
    let mut cases = 0;
    let mut instances: Vec<(f64, Dd)> = Vec::new();
    for lambda in [0.5, 1.0, 1.5, 2.0] {
        for p in [0.1, 0.25, 0.5, 0.75] {
            instances.push((lambda, dd(p)));
        }
    }
    instances.push((2.0, dd(1.0) / dd(3.0)));
    for (lambda, p) in instances {
        let s = md_solve(lambda, 1.0, p).expect("banded case solves");
        let (a, b) = ode_defect(&s, 100);
        worst = (worst.0.max(a), worst.1.max(b));
        cases += 1;
    }
    o.at_most(
        &format!("{cases} instances, first-order ODE"),
        worst.0,
        1e-8,
    );
    o.at_most("second-order ODE", worst.1, 1e-8);
    o
}

fn random_cdf(rng: &mut ChaCha8Rng, x_max: f64, n: usize) -> GridFunction<f64> {
    let mut increments: Vec<f64> = (0..=n).map(|_| rng.random::<f64>().powi(4)).collect();
    let total: f64 = increments.iter().sum::<f64>() / rng.random_range(1.0..1.5);
    let mut acc = 0.0;
    for v in increments.iter_mut() {
        acc += *v / total;
        *v = acc.min(1.0);
    }
    GridFunction {
        x_max,
        n,
        values: increments,
    }
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let n = 2000;
    let x_max = 20.0;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for p in [0.1, 0.5, 0.9] {
        let m = md_model(2.0, 1.0, p);
        let table = XDistribution::new(&m)
            .unwrap()
            .table(n, x_max / n as f64)
            .unwrap();
        let mut slack = f64::INFINITY;
        for _ in 0..50 {
            let f1 = random_cdf(&mut rng, x_max, n);
            let f2 = random_cdf(&mut rng, x_max, n);
            let lhs = apply_t(&f1, &table, p).sup_distance(&apply_t(&f2, &table, p));
            let rhs = p.max(1.0 - p) * f1.sup_distance(&f2) + 2.0 / n as f64;
            slack = slack.min(rhs - lhs);
        }
        o.check(
            &format!("p={p} min slack"),
            slack >= 0.0,
            format!("{slack:.2e}"),
        );
    }
    o
}

fn lqsolve(args: &[&str]) -> std::process::Output {
    Process::new(env!("CARGO_BIN_EXE_lqsolve"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let tmp = tempfile::tempdir().unwrap();
    let configs = [
        (
            "fig1.conf",
            "[model]\np = 1/3\nlambda = 2\nb = 1\n\n[output]\nsamples_csv = true\n",
        ),
        (
            "me.conf",
            "[model]\np = 0.5\narrival = erlang:2:2\nmu = 2\nkappa = 0.3,0.7\n",
        ),
    ];
    for (name, text) in configs {
        let path = tmp.path().join(name);
        std::fs::write(&path, text).unwrap();
        let run = |k: usize| {
            let out = tmp.path().join(format!("{name}.{k}"));
            let args = [
                "validate",
                "--config",
                path.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--seed",
                "99",
                "--samples",
                "200000",
                "--json",
            ];
            let res = lqsolve(&args);
            (res.stdout, res.status.code(), dir_bytes(&out))
        };
        let (a, b) = (run(1), run(2));
        let files = a.2.len();
        o.check(
            &format!("{name}: {files} files + stdout identical"),
            a == b && files >= 4,
            format!("exit {:?}", a.1),
        );
    }
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let unstable = md_solve(1.0, 1.2, dd(1.0));
    o.check(
        "md p=1 rho=1.2",
        matches!(unstable, Err(Error::UnstableP1 { .. })),
        "UnstableP1",
    );
    let g = giph::solve(&me_model(1.0, 1.0, 1.0, vec![1.0]));
    o.check(
        "giph p=1 rho=1",
        matches!(g, Err(Error::UnstableP1 { .. })),
        "UnstableP1",
    );

    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("unstable.conf");
    std::fs::write(&path, "[model]\np = 1\nlambda = 1.2\nb = 1\n").unwrap();
    let res = lqsolve(&["validate", "--config", path.to_str().unwrap(), "--json"]);
    let text = String::from_utf8_lossy(&res.stdout);
    o.check(
        "validate report",
        text.contains("\"UnstableP1\"") && res.status.code() != Some(0),
        format!("exit {:?}", res.status.code()),
    );

    let path = tmp.path().join("p99.conf");
    std::fs::write(&path, "[model]\np = 0.99\nlambda = 0.5\nb = 1\n").unwrap();
    let res = lqsolve(&["md", "--config", path.to_str().unwrap(), "--json"]);
    let report: serde_json::Value = serde_json::from_slice(&res.stdout).expect("json report");
    let warned = report["engines"][0]["warnings"]
        .as_array()
        .is_some_and(|w| w.iter().any(|w| w["kind"] == "IllConditioned"));
    o.check("md p=0.99 --json", warned, "IllConditioned warning");
    o
}

fn main() {
    let criteria: [Criterion; 9] = [
        ("M/D p=0 closed form", criterion_1),
        ("M/D figure 1 (b=1, lambda=2, p=1/3)", criterion_2),
        ("M/D p=1 Erlang formula", criterion_3),
        ("GI/PH M/M/1 and p=1 closed form", criterion_4),
        ("GI/PH mixed Erlang, p in {0.25, 0.5, 0.75}", criterion_5),
        ("M/D ODE checks", criterion_6),
        ("fixed-point contraction", criterion_7),
        ("determinism", criterion_8),
        ("documented failure modes", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let o = run();
        failed += usize::from(!o.pass);
        println!(
            "{} criterion {}: {name}: {}",
            if o.pass { "PASS" } else { "FAIL" },
            i + 1,
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
