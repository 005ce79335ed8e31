use std::fmt::Write as _;

use lqsolve_core::dist::ModelParams;
use lqsolve_core::fixedpoint::{self, FixedPointOptions, FixedPointRun};
use lqsolve_core::giph;
use lqsolve_core::md::{self, MdForm};
use lqsolve_core::sim::{self, EmpiricalDistribution, SimConfig};
use lqsolve_core::{DoubleDouble, Error, GiPhSolution, MdSolution, Real};
use num_traits::Float;
use serde::Serialize;

use crate::config::{render_number, to_dd, to_f64, Config, Grid, ServiceSpec};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_REPLICATIONS: usize = 8;
pub const DEFAULT_EPS_TAIL: f64 = 1e-10;

/// Thresholds of the `validate` table.
pub const KS_MD_FIXEDPOINT: f64 = 1e-4;
pub const KS_GIPH_FIXEDPOINT: f64 = 1e-3;
pub const KS_SIMULATION: f64 = 5e-3;
pub const CONTINUITY: f64 = 1e-10;
pub const DENSITY_JUMP: f64 = 1e-8;
pub const ODE_RESIDUAL: f64 = 1e-8;
pub const NORMALIZATION: f64 = 1e-9;
pub const CLOSED_FORM: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Giph,
    Md,
    Fixedpoint,
    Simulate,
    Validate,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Giph => "giph",
            Command::Md => "md",
            Command::Fixedpoint => "fixedpoint",
            Command::Simulate => "simulate",
            Command::Validate => "validate",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub command: Command,
    pub config: Config,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    ValidationFailure,
    InputError,
    NumericalFailure,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Pass => 0,
            Status::ValidationFailure => 1,
            Status::InputError => 2,
            Status::NumericalFailure => 3,
        }
    }

    fn of_error(e: &Error) -> Self {
        if e.is_input_error() {
            Status::InputError
        } else {
            Status::NumericalFailure
        }
    }

    /// Input errors dominate numerical failures, which dominate failed checks.
    fn worst(self, other: Self) -> Self {
        let rank = |s: Status| match s {
            Status::Pass => 0,
            Status::ValidationFailure => 1,
            Status::NumericalFailure => 2,
            Status::InputError => 3,
        };
        if rank(other) > rank(self) {
            other
        } else {
            self
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostic {
    pub kind: String,
    pub message: String,
}

impl From<&Error> for Diagnostic {
    fn from(e: &Error) -> Self {
        let kind = e.kind();
        let text = e.to_string();
        let message = text
            .strip_prefix(&format!("{kind}: "))
            .unwrap_or(&text)
            .to_string();
        Self {
            kind: kind.to_string(),
            message,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModelSummary {
    pub p: String,
    pub arrival: String,
    pub service: String,
    pub rho: f64,
    pub stability: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComplexValue {
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GiphSummary {
    pub p: f64,
    pub mu: f64,
    pub kappa: Vec<f64>,
    pub arrival: String,
    pub c0: f64,
    pub roots: Vec<ComplexValue>,
    pub coeffs: Vec<ComplexValue>,
    pub residual: f64,
    pub condition: f64,
    pub winding: i64,
    pub normalization_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MdSummary {
    pub form: String,
    pub lambda: f64,
    pub b: f64,
    pub p: f64,
    pub pi0: f64,
    pub r1: f64,
    pub r2: f64,
    pub d1: f64,
    pub d2: f64,
    pub gamma: Vec<f64>,
    pub bands: usize,
    pub tail_bound: f64,
    pub eps_tail: f64,
    pub continuity: f64,
    pub density_jump: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FixedPointSummary {
    pub p: f64,
    pub n: usize,
    pub x_max: f64,
    pub tol: f64,
    pub iterations: usize,
    pub last_step: f64,
    pub contraction: f64,
    pub tail: f64,
    pub pi0: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Quantile {
    pub q: f64,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SimSummary {
    pub n: usize,
    pub atom: f64,
    pub mean: f64,
    pub quantiles: Vec<Quantile>,
    pub seed: u64,
    pub replications: usize,
    pub burn_in: usize,
    pub thin: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Summary {
    Giph(GiphSummary),
    Md(MdSummary),
    FixedPoint(FixedPointSummary),
    Simulate(SimSummary),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EngineReport {
    pub engine: String,
    pub summary: Option<Summary>,
    pub warnings: Vec<Diagnostic>,
    pub error: Option<Diagnostic>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Report {
    pub command: Command,
    pub version: String,
    pub status: Status,
    pub exit_code: i32,
    pub model: Option<ModelSummary>,
    pub engines: Vec<EngineReport>,
    pub checks: Vec<Check>,
}

/// Files produced by a run, in write order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Artifacts {
    pub files: Vec<(String, String)>,
}

/// A solved law, as the CSV writer sees it.
enum Law {
    Giph(GiPhSolution),
    Md(Box<MdSolution>),
    FixedPoint(FixedPointRun<f64>),
    Simulate(EmpiricalDistribution),
}

impl Law {
    fn cdf(&self, x: f64) -> f64 {
        match self {
            Law::Giph(g) => g.cdf(x),
            Law::Md(s) => s.cdf(DoubleDouble::of(x)).to_f64_lossy(),
            Law::FixedPoint(r) => r.f.eval(x),
            Law::Simulate(e) => e.cdf(x),
        }
    }

    /// Density of the continuous part; `step` sets the difference width of
    /// the empirical estimate.
    fn pdf(&self, x: f64, step: f64) -> f64 {
        match self {
            Law::Giph(g) => g.density(x),
            Law::Md(s) => s.pdf(DoubleDouble::of(x)).to_f64_lossy(),
            Law::FixedPoint(r) => r.f.density(x),
            Law::Simulate(e) => {
                let lo = if x <= 0.0 { 0.0 } else { e.cdf(x) };
                (e.cdf(x + step) - lo) / step
            }
        }
    }
}

pub fn csv(law_cdf: impl Fn(f64) -> f64, law_pdf: impl Fn(f64) -> f64, grid: &Grid) -> String {
    let mut out = String::from("x,cdf,pdf\n");
    for x in grid.points() {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e}", x, law_cdf(x), law_pdf(x));
    }
    out
}

fn law_csv(law: &Law, grid: &Grid) -> String {
    let step = to_f64(&grid.step);
    csv(|x| law.cdf(x), |x| law.pdf(x, step), grid)
}

fn default_grid(m: &ModelParams<f64>) -> Grid {
    use crate::config::Rational;
    // 20 E[B] in steps of E[B] / 50, snapped to a decimal step
    let mean = m.service.mean();
    let step = 10f64.powf((mean / 50.0).log10().floor());
    let step_r = crate::config::parse_number(&format!("{step:e}")).unwrap_or(Rational::new(1, 100));
    let span = (20.0 * mean / step).ceil() as i128;
    Grid {
        max: step_r * Rational::from_integer(span),
        step: step_r,
    }
}

fn model_summary(cfg: &Config, m: &ModelParams<f64>) -> ModelSummary {
    let service = match &cfg.model.service {
        ServiceSpec::Deterministic(b) => format!("det:{}", render_number(b)),
        ServiceSpec::MixedErlang { mu, kappa } => format!(
            "mixed-erlang:{}:{}",
            render_number(mu),
            kappa
                .iter()
                .map(render_number)
                .collect::<Vec<_>>()
                .join(",")
        ),
    };
    let stab = m.check_stability();
    ModelSummary {
        p: render_number(&cfg.model.p),
        arrival: cfg.model.arrival.render(),
        service,
        rho: stab.rho,
        stability: format!("{:?}", stab.status),
    }
}

fn complex_list(v: &[num_complex::Complex<f64>]) -> Vec<ComplexValue> {
    v.iter()
        .map(|z| ComplexValue { re: z.re, im: z.im })
        .collect()
}

fn giph_summary(g: &GiPhSolution, cfg: &Config) -> GiphSummary {
    let (mu, kappa) = match &g.params.service {
        lqsolve_core::dist::ServiceDist::MixedErlang(d) => (d.mu(), d.kappa().to_vec()),
        lqsolve_core::dist::ServiceDist::Deterministic(_) => {
            unreachable!("giph needs mixed Erlang")
        }
    };
    GiphSummary {
        p: g.params.p,
        mu,
        kappa,
        arrival: cfg.model.arrival.render(),
        c0: g.c0,
        roots: complex_list(&g.roots),
        coeffs: complex_list(&g.coeffs),
        residual: g.residual,
        condition: g.condition,
        winding: g.winding,
        normalization_error: g.normalization_error(),
    }
}

fn md_summary(s: &MdSolution) -> MdSummary {
    let f = |x: DoubleDouble| x.to_f64_lossy();
    MdSummary {
        form: format!("{:?}", s.form).to_lowercase(),
        lambda: f(s.params.lambda),
        b: f(s.params.b),
        p: f(s.params.p),
        pi0: f(s.pi0),
        r1: f(s.r1),
        r2: f(s.r2),
        d1: f(s.d1),
        d2: f(s.d2),
        gamma: s.gamma().into_iter().map(f).collect(),
        bands: s.bands,
        tail_bound: f(s.tail_bound),
        eps_tail: f(s.eps_tail),
        continuity: f(s.continuity_mismatch()),
        density_jump: s.density_jump_check().ok().map(f),
    }
}

fn fixedpoint_summary(r: &FixedPointRun<f64>, p: f64, tol: f64) -> FixedPointSummary {
    FixedPointSummary {
        p,
        n: r.f.n,
        x_max: r.f.x_max,
        tol,
        iterations: r.iterations,
        last_step: r.last_step,
        contraction: r.contraction,
        tail: r.tail,
        pi0: r.f.values[0],
    }
}

const QUANTILES: [f64; 8] = [0.1, 0.25, 0.5, 0.75, 0.9, 0.95, 0.975, 0.99];

fn sim_summary(e: &EmpiricalDistribution, cfg: &SimConfig) -> SimSummary {
    SimSummary {
        n: e.n,
        atom: e.atom_at_zero,
        mean: e.mean(),
        quantiles: QUANTILES
            .iter()
            .map(|&q| Quantile {
                q,
                value: e.quantile(q),
            })
            .collect(),
        seed: cfg.seed,
        replications: cfg.replications,
        burn_in: cfg.burn_in,
        thin: cfg.thin,
    }
}

fn engine_error(engine: &str, e: &Error) -> EngineReport {
    EngineReport {
        engine: engine.into(),
        summary: None,
        warnings: Vec::new(),
        error: Some(e.into()),
    }
}

fn run_giph(m: &ModelParams<f64>) -> Result<GiPhSolution, Error> {
    if m.p == 0.0 {
        return Err(Error::Unsupported(
            "the transform method needs p > 0; use fixedpoint or simulate".into(),
        ));
    }
    giph::solve(m)
}

fn run_md(cfg: &Config, m: &ModelParams<f64>) -> Result<MdSolution, Error> {
    let (lambda, b) = cfg.model.md_pair().ok_or_else(|| {
        Error::Unsupported(
            "the band recursion needs exponential interarrivals and deterministic service".into(),
        )
    })?;
    m.require_stable()?;
    let params = md::MdParams::new(to_dd(&lambda), to_dd(&b), to_dd(&cfg.model.p))?;
    let eps = cfg.engine.eps_tail.map_or(DEFAULT_EPS_TAIL, |r| to_f64(&r));
    md::solve_any(&params, DoubleDouble::of(eps))
}

fn fixedpoint_options(cfg: &Config) -> FixedPointOptions {
    let d = FixedPointOptions::default();
    FixedPointOptions {
        n: cfg.engine.n.unwrap_or(d.n),
        x_max: cfg.engine.x_max.map(|r| to_f64(&r)),
        tol: cfg.engine.tol.map_or(d.tol, |r| to_f64(&r)),
        max_iterations: d.max_iterations,
    }
}

/// Thinning when none is configured: `p = 1` chains mix in `O(1/(1-rho))`
/// steps, so every `ceil(5/(1-rho))`-th step is kept; `p < 1` chains
/// regenerate geometrically fast and keep every step.
pub fn auto_thin(m: &ModelParams<f64>) -> usize {
    let rho = m.rho();
    if m.p >= 1.0 && rho < 1.0 {
        (5.0 / (1.0 - rho)).ceil() as usize
    } else {
        1
    }
}

fn sim_config(cfg: &Config, m: &ModelParams<f64>) -> SimConfig {
    let e = &cfg.engine;
    SimConfig {
        model: m.clone(),
        samples: e.samples.unwrap_or(DEFAULT_SAMPLES),
        burn_in: e.burn_in.unwrap_or(sim::DEFAULT_BURN_IN),
        seed: e.seed.unwrap_or(DEFAULT_SEED),
        replications: e
            .replications
            .unwrap_or(DEFAULT_REPLICATIONS)
            .min(e.samples.unwrap_or(DEFAULT_SAMPLES)),
        thin: e.thin.unwrap_or_else(|| auto_thin(m)),
    }
}

fn samples_csv(e: &EmpiricalDistribution) -> String {
    let mut out = String::from("w\n");
    for v in e.values() {
        let _ = writeln!(out, "{v:.16e}");
    }
    out
}

fn finish(
    command: Command,
    model: Option<ModelSummary>,
    engines: Vec<EngineReport>,
    checks: Vec<Check>,
    mut status: Status,
) -> Report {
    if checks.iter().any(|c| !c.pass) {
        status = status.worst(Status::ValidationFailure);
    }
    Report {
        command,
        version: env!("CARGO_PKG_VERSION").into(),
        status,
        exit_code: status.exit_code(),
        model,
        engines,
        checks,
    }
}

fn input_error_report(command: Command, e: &Error) -> (Report, Artifacts) {
    let status = Status::of_error(e);
    (
        finish(
            command,
            None,
            vec![engine_error(command.name(), e)],
            Vec::new(),
            status,
        ),
        Artifacts::default(),
    )
}

/// Runs one command; never panics on bad input, every failure lands in the
/// report with its exit status.
pub fn execute(spec: &RunSpec) -> (Report, Artifacts) {
    let cfg = &spec.config;
    let m = match cfg.model.to_model() {
        Ok(m) => m,
        Err(e) => return input_error_report(spec.command, &e),
    };
    let model = Some(model_summary(cfg, &m));
    let grid = cfg.output.grid.clone().unwrap_or_else(|| default_grid(&m));
    let mut files = Artifacts::default();
    let cmd = spec.command;
    let single = |engine: &str,
                  result: Result<(Law, EngineReport), Error>,
                  files: &mut Artifacts| match result {
        Ok((law, report)) => {
            files
                .files
                .push((format!("{engine}.csv"), law_csv(&law, &grid)));
            (vec![report], Status::Pass, Some(law))
        }
        Err(e) => (vec![engine_error(engine, &e)], Status::of_error(&e), None),
    };
    let (engines, checks, status) = match cmd {
        Command::Giph => {
            let (r, s, _) = single(
                "giph",
                run_giph(&m).map(|g| {
                    let rep = EngineReport {
                        engine: "giph".into(),
                        summary: Some(Summary::Giph(giph_summary(&g, cfg))),
                        warnings: Vec::new(),
                        error: None,
                    };
                    (Law::Giph(g), rep)
                }),
                &mut files,
            );
            (r, Vec::new(), s)
        }
        Command::Md => {
            let (r, s, _) = single(
                "md",
                run_md(cfg, &m).map(|sol| {
                    let rep = EngineReport {
                        engine: "md".into(),
                        summary: Some(Summary::Md(md_summary(&sol))),
                        warnings: sol.warnings.iter().map(Diagnostic::from).collect(),
                        error: None,
                    };
                    (Law::Md(Box::new(sol)), rep)
                }),
                &mut files,
            );
            (r, Vec::new(), s)
        }
        Command::Fixedpoint => {
            let opts = fixedpoint_options(cfg);
            let (r, s, _) = single(
                "fixedpoint",
                fixedpoint::solve_fixed_point(&m, &opts).map(|run| {
                    let rep = EngineReport {
                        engine: "fixedpoint".into(),
                        summary: Some(Summary::FixedPoint(fixedpoint_summary(&run, m.p, opts.tol))),
                        warnings: Vec::new(),
                        error: None,
                    };
                    (Law::FixedPoint(run), rep)
                }),
                &mut files,
            );
            (r, Vec::new(), s)
        }
        Command::Simulate => {
            let sc = sim_config(cfg, &m);
            let (r, s, law) = single(
                "simulate",
                sim::simulate(&sc).map(|emp| {
                    let rep = EngineReport {
                        engine: "simulate".into(),
                        summary: Some(Summary::Simulate(sim_summary(&emp, &sc))),
                        warnings: Vec::new(),
                        error: None,
                    };
                    (Law::Simulate(emp), rep)
                }),
                &mut files,
            );
            if let (Some(Law::Simulate(emp)), true) = (law, cfg.output.samples_csv) {
                files.files.push(("samples.csv".into(), samples_csv(&emp)));
            }
            (r, Vec::new(), s)
        }
        Command::Validate => validate(cfg, &m, &grid, &mut files),
    };
    (finish(cmd, model, engines, checks, status), files)
}

/// Every applicable engine, concurrently; pairwise distances and structural
/// checks afterwards, in a fixed order.
fn validate(
    cfg: &Config,
    m: &ModelParams<f64>,
    grid: &Grid,
    files: &mut Artifacts,
) -> (Vec<EngineReport>, Vec<Check>, Status) {
    if let Err(e) = m.require_stable() {
        return (
            vec![engine_error("validate", &e)],
            Vec::new(),
            Status::of_error(&e),
        );
    }
    let use_md = cfg.model.md_pair().is_some();
    let use_giph = matches!(cfg.model.service, ServiceSpec::MixedErlang { .. }) && m.p > 0.0;
    let use_fp = m.p < 1.0;
    let opts = fixedpoint_options(cfg);
    let sc = sim_config(cfg, m);

    let (md_res, giph_res, fp_res, sim_res) = std::thread::scope(|s| {
        let md_h = use_md.then(|| s.spawn(|| run_md(cfg, m)));
        let giph_h = use_giph.then(|| s.spawn(|| run_giph(m)));
        let fp_h = use_fp.then(|| s.spawn(|| fixedpoint::solve_fixed_point(m, &opts)));
        let sim_h = s.spawn(|| sim::simulate(&sc));
        (
            md_h.map(join),
            giph_h.map(join),
            fp_h.map(join),
            join(sim_h),
        )
    });

    let mut engines = Vec::new();
    let mut checks = Vec::new();
    let mut status = Status::Pass;
    let mut fail = |e: &Error, engine: &str, engines: &mut Vec<EngineReport>| {
        status = status
            .worst(Status::of_error(e))
            .worst(Status::ValidationFailure);
        engines.push(engine_error(engine, e));
    };

    let md_sol = match md_res {
        Some(Ok(sol)) => {
            engines.push(EngineReport {
                engine: "md".into(),
                summary: Some(Summary::Md(md_summary(&sol))),
                warnings: sol.warnings.iter().map(Diagnostic::from).collect(),
                error: None,
            });
            md_checks(&sol, &mut checks);
            files.files.push((
                "md.csv".into(),
                law_csv(&Law::Md(Box::new(sol.clone())), grid),
            ));
            Some(sol)
        }
        Some(Err(e)) => {
            fail(&e, "md", &mut engines);
            None
        }
        None => None,
    };
    let giph_sol = match giph_res {
        Some(Ok(g)) => {
            engines.push(EngineReport {
                engine: "giph".into(),
                summary: Some(Summary::Giph(giph_summary(&g, cfg))),
                warnings: Vec::new(),
                error: None,
            });
            giph_checks(&g, m, &mut checks);
            files
                .files
                .push(("giph.csv".into(), law_csv(&Law::Giph(g.clone()), grid)));
            Some(g)
        }
        Some(Err(e)) => {
            fail(&e, "giph", &mut engines);
            None
        }
        None => None,
    };
    let fp = match fp_res {
        Some(Ok(run)) => {
            engines.push(EngineReport {
                engine: "fixedpoint".into(),
                summary: Some(Summary::FixedPoint(fixedpoint_summary(&run, m.p, opts.tol))),
                warnings: Vec::new(),
                error: None,
            });
            Some(run)
        }
        Some(Err(e)) => {
            fail(&e, "fixedpoint", &mut engines);
            None
        }
        None => None,
    };
    let emp = match sim_res {
        Ok(emp) => {
            engines.push(EngineReport {
                engine: "simulate".into(),
                summary: Some(Summary::Simulate(sim_summary(&emp, &sc))),
                warnings: Vec::new(),
                error: None,
            });
            if m.p < 1.0 {
                checks.push(Check {
                    name: "simulate: regeneration (atom > 0)".into(),
                    value: emp.atom_at_zero,
                    threshold: 0.0,
                    pass: emp.atom_at_zero > 0.0,
                });
            }
            Some(emp)
        }
        Err(e) => {
            fail(&e, "simulate", &mut engines);
            None
        }
    };

    let grid_sup = |run: &FixedPointRun<f64>, cdf: &dyn Fn(f64) -> f64| {
        (0..=run.f.n)
            .map(|k| (run.f.values[k] - cdf(run.f.x(k))).abs())
            .fold(0.0, f64::max)
    };
    let md_cdf = md_sol
        .as_ref()
        .map(|s| move |x: f64| s.cdf(DoubleDouble::of(x)).to_f64_lossy());
    if let (Some(cdf), Some(run)) = (&md_cdf, &fp) {
        checks.push(Check::at_most(
            "KS md vs fixedpoint",
            grid_sup(run, cdf),
            KS_MD_FIXEDPOINT,
        ));
    }
    if let (Some(g), Some(run)) = (&giph_sol, &fp) {
        checks.push(Check::at_most(
            "KS giph vs fixedpoint",
            grid_sup(run, &|x| g.cdf(x)),
            KS_GIPH_FIXEDPOINT,
        ));
    }
    if let Some(emp) = &emp {
        if let Some(cdf) = &md_cdf {
            checks.push(Check::at_most(
                "KS md vs simulate",
                sim::ks_statistic(emp, cdf),
                KS_SIMULATION,
            ));
        }
        if let Some(g) = &giph_sol {
            checks.push(Check::at_most(
                "KS giph vs simulate",
                sim::ks_statistic(emp, |x| g.cdf(x)),
                KS_SIMULATION,
            ));
        }
        if let (None, None, Some(run)) = (&md_sol, &giph_sol, &fp) {
            checks.push(Check::at_most(
                "KS fixedpoint vs simulate",
                sim::ks_statistic(emp, |x| run.f.eval(x)),
                KS_SIMULATION,
            ));
        }
    }
    if let Some(run) = fp {
        files.files.push((
            "fixedpoint.csv".into(),
            law_csv(&Law::FixedPoint(run), grid),
        ));
    }
    if let Some(emp) = emp {
        let law = Law::Simulate(emp);
        files
            .files
            .push(("simulate.csv".into(), law_csv(&law, grid)));
        if let (Law::Simulate(emp), true) = (&law, cfg.output.samples_csv) {
            files.files.push(("samples.csv".into(), samples_csv(emp)));
        }
    }
    (engines, checks, status)
}

fn join<T>(h: std::thread::ScopedJoinHandle<'_, T>) -> T {
    h.join().expect("engine thread panicked")
}

fn md_checks(s: &MdSolution, checks: &mut Vec<Check>) {
    let f = |x: DoubleDouble| x.to_f64_lossy();
    let MdSolution { params, .. } = s;
    match s.form {
        MdForm::Banded => {
            checks.push(Check::at_most(
                "md: band continuity",
                f(s.continuity_mismatch()),
                CONTINUITY,
            ));
            if let Ok(j) = s.density_jump_check() {
                checks.push(Check::at_most(
                    "md: density jump - lambda pi0",
                    f(j).abs(),
                    DENSITY_JUMP,
                ));
            }
            let (r1, r2) = s.ode_residuals(100);
            checks.push(Check::at_most(
                "md: f' functional ODE residual",
                f(r1),
                ODE_RESIDUAL,
            ));
            checks.push(Check::at_most("md: f'' ODE residual", f(r2), ODE_RESIDUAL));
            checks.push(Check::at_most(
                "md: tail bound",
                f(s.tail_bound),
                f(s.eps_tail),
            ));
        }
        MdForm::Uniform => {
            let exact = (DoubleDouble::of(1.0) + params.lambda * params.b).recip();
            checks.push(Check::at_most(
                "md: pi0 = 1/(1 + lambda b)",
                f((s.pi0 - exact).abs()),
                1e-12,
            ));
        }
        MdForm::Erlang => {
            let exact = DoubleDouble::of(1.0) - params.rho();
            checks.push(Check::at_most(
                "md: F(0) = 1 - rho",
                f((s.cdf(DoubleDouble::of(0.0)) - exact).abs()),
                1e-15,
            ));
        }
    }
}

fn giph_checks(g: &GiPhSolution, m: &ModelParams<f64>, checks: &mut Vec<Check>) {
    checks.push(Check::at_most(
        "giph: normalization",
        g.normalization_error(),
        NORMALIZATION,
    ));
    checks.push(Check::at_most(
        "giph: collocation residual",
        g.residual,
        giph::RESIDUAL_LIMIT,
    ));
    let n = g.roots.len() as f64;
    checks.push(Check {
        name: "giph: winding number = N".into(),
        value: g.winding as f64,
        threshold: n,
        pass: g.winding as f64 == n,
    });
    if m.p >= 1.0 {
        match giph::solve_p1_closed_form(m) {
            Ok(c) => {
                let diff = g
                    .coeffs
                    .iter()
                    .zip(&c.coeffs)
                    .map(|(a, b)| (a - b).norm())
                    .fold((g.c0 - c.c0).abs(), f64::max);
                checks.push(Check::at_most(
                    "giph: closed form at p = 1",
                    diff,
                    CLOSED_FORM,
                ));
            }
            Err(e) => checks.push(Check {
                name: format!("giph: closed form at p = 1 ({})", e.kind()),
                value: f64::NAN,
                threshold: CLOSED_FORM,
                pass: false,
            }),
        }
    }
}

/// Plain-text rendering for terminals.
pub fn human(report: &Report) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "lqsolve {} {}", report.command.name(), report.version);
    if let Some(m) = &report.model {
        let _ = writeln!(
            out,
            "model: p = {}, arrival {}, service {}, rho = {}, {}",
            m.p, m.arrival, m.service, m.rho, m.stability
        );
    }
    for e in &report.engines {
        match (&e.summary, &e.error) {
            (_, Some(err)) => {
                let _ = writeln!(out, "{}: error {}: {}", e.engine, err.kind, err.message);
            }
            (Some(s), None) => {
                let line = match s {
                    Summary::Giph(g) => format!(
                        "c0 = {}, {} roots, residual {:e}",
                        g.c0,
                        g.roots.len(),
                        g.residual
                    ),
                    Summary::Md(s) => format!(
                        "pi0 = {}, {} bands, tail {:e}",
                        s.pi0, s.bands, s.tail_bound
                    ),
                    Summary::FixedPoint(f) => {
                        format!("F(0) = {}, {} iterations, n = {}", f.pi0, f.iterations, f.n)
                    }
                    Summary::Simulate(s) => {
                        format!("atom = {}, mean = {}, n = {}", s.atom, s.mean, s.n)
                    }
                };
                let _ = writeln!(out, "{}: {line}", e.engine);
            }
            (None, None) => {}
        }
        for w in &e.warnings {
            let _ = writeln!(out, "{}: warning {}: {}", e.engine, w.kind, w.message);
        }
    }
    for c in &report.checks {
        let _ = writeln!(
            out,
            "{} {} = {:e} (limit {:e})",
            if c.pass { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.threshold
        );
    }
    let _ = writeln!(
        out,
        "status: {:?} (exit {})",
        report.status, report.exit_code
    );
    out
}
