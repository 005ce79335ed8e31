//! Key-value run configuration.
//!
//! ```text
//! [model]
//! p = 1/3
//! lambda = 2          # or: arrival = exp:2 | erlang:3:2 | det:0.8 | hyperexp:0.4,0.6:0.5,3
//! b = 1               # or: mu = 2 and kappa = 0.3,0.7
//!
//! [engine]
//! eps_tail = 1e-10
//! n = 4000
//! samples = 1000000
//! seed = 42
//!
//! [output]
//! dir = out
//! grid = 10:0.01
//! ```
//!
//! Every number is read as an exact rational (`1/3`, `0.3`, `1e-10`) and only
//! converted when an engine needs it.

use std::collections::BTreeMap;
use std::fmt;

use lqsolve_core::dist::{InterarrivalDist, MixedErlangDist, ModelParams, ServiceDist};
use lqsolve_core::DoubleDouble;
use num_rational::Ratio;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Rational = Ratio<i128>;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ConfigError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub enum ArrivalSpec {
    Exponential(Rational),
    Erlang(usize, Rational),
    Deterministic(Rational),
    HyperExponential(Vec<Rational>, Vec<Rational>),
}

#[derive(Clone, Debug, PartialEq)]
pub enum ServiceSpec {
    Deterministic(Rational),
    MixedErlang { mu: Rational, kappa: Vec<Rational> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ModelSpec {
    pub p: Rational,
    pub arrival: ArrivalSpec,
    pub service: ServiceSpec,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EngineSpec {
    pub eps_tail: Option<Rational>,
    pub tol: Option<Rational>,
    pub n: Option<usize>,
    pub x_max: Option<Rational>,
    pub samples: Option<usize>,
    pub seed: Option<u64>,
    pub burn_in: Option<usize>,
    pub replications: Option<usize>,
    pub thin: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Grid {
    pub max: Rational,
    pub step: Rational,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self, String> {
        let (max, step) = s
            .split_once(':')
            .ok_or_else(|| format!("grid must be <max>:<step>, got {s:?}"))?;
        let grid = Grid {
            max: parse_number(max.trim())?,
            step: parse_number(step.trim())?,
        };
        if !grid.max.is_positive() || !grid.step.is_positive() {
            return Err(format!("grid max and step must be positive, got {s:?}"));
        }
        Ok(grid)
    }

    /// `floor(max / step) + 1`.
    pub fn rows(&self) -> usize {
        (self.max / self.step).floor().to_integer() as usize + 1
    }

    pub fn points(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.rows()).map(|k| to_f64(&(self.step * Rational::from_integer(k as i128))))
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}",
            render_number(&self.max),
            render_number(&self.step)
        )
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct OutputSpec {
    pub dir: Option<String>,
    pub grid: Option<Grid>,
    pub samples_csv: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    pub model: ModelSpec,
    pub engine: EngineSpec,
    pub output: OutputSpec,
}

/// Decimal (`0.3`, `-2.5e-3`) or fraction of decimals (`1/3`), exactly.
pub fn parse_number(s: &str) -> Result<Rational, String> {
    if let Some((n, d)) = s.split_once('/') {
        let (n, d) = (parse_decimal(n.trim())?, parse_decimal(d.trim())?);
        if d.is_zero() {
            return Err(format!("zero denominator in {s:?}"));
        }
        return Ok(n / d);
    }
    parse_decimal(s)
}

fn parse_decimal(s: &str) -> Result<Rational, String> {
    let bad = || format!("not a number: {s:?}");
    let (mantissa, exp) = match s.find(['e', 'E']) {
        Some(i) => (&s[..i], s[i + 1..].parse::<i32>().map_err(|_| bad())?),
        None => (s, 0),
    };
    let (neg, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int, frac) = digits.split_once('.').unwrap_or((digits, ""));
    if int.is_empty() && frac.is_empty()
        || !(int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()))
    {
        return Err(bad());
    }
    let too_big = || format!("{s:?} exceeds the exact-rational range");
    let mut num: i128 = 0;
    for c in int.chars().chain(frac.chars()) {
        num = num
            .checked_mul(10)
            .and_then(|v| v.checked_add(i128::from(c as u8 - b'0')))
            .ok_or_else(too_big)?;
    }
    let scale = exp - frac.len() as i32;
    let pow = 10i128
        .checked_pow(scale.unsigned_abs())
        .ok_or_else(too_big)?;
    let value = if scale >= 0 {
        Rational::from_integer(num.checked_mul(pow).ok_or_else(too_big)?)
    } else {
        Rational::new(num, pow)
    };
    Ok(if neg { -value } else { value })
}

/// Shortest exact rendering: a decimal when the denominator divides a power
/// of ten, a fraction otherwise.
pub fn render_number(r: &Rational) -> String {
    if r.is_integer() {
        return r.numer().to_string();
    }
    let mut d = *r.denom();
    let (mut twos, mut fives) = (0u32, 0u32);
    while d % 2 == 0 {
        d /= 2;
        twos += 1;
    }
    while d % 5 == 0 {
        d /= 5;
        fives += 1;
    }
    if d != 1 {
        return format!("{}/{}", r.numer(), r.denom());
    }
    let places = twos.max(fives);
    let scaled = r * Rational::from_integer(10i128.pow(places));
    let digits = scaled.to_integer().abs().to_string();
    let digits = format!("{digits:0>width$}", width = places as usize + 1);
    let (int, frac) = digits.split_at(digits.len() - places as usize);
    format!("{}{int}.{frac}", if r.is_negative() { "-" } else { "" })
}

pub fn to_f64(r: &Rational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// Exact when numerator and denominator fit in 53 bits (`1/3` is `1 / 3` in
/// double-double, not the rounded `f64`).
pub fn to_dd(r: &Rational) -> DoubleDouble {
    const LIMIT: i128 = 1 << 53;
    if r.numer().abs() < LIMIT && *r.denom() < LIMIT {
        DoubleDouble::of(*r.numer() as f64) / DoubleDouble::of(*r.denom() as f64)
    } else {
        DoubleDouble::of(to_f64(r))
    }
}

fn render_list(v: &[Rational]) -> String {
    v.iter().map(render_number).collect::<Vec<_>>().join(",")
}

impl ArrivalSpec {
    pub fn render(&self) -> String {
        match self {
            ArrivalSpec::Exponential(r) => format!("exp:{}", render_number(r)),
            ArrivalSpec::Erlang(k, r) => format!("erlang:{k}:{}", render_number(r)),
            ArrivalSpec::Deterministic(a) => format!("det:{}", render_number(a)),
            ArrivalSpec::HyperExponential(w, r) => {
                format!("hyperexp:{}:{}", render_list(w), render_list(r))
            }
        }
    }

    fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').map(str::trim).collect();
        let list = |t: &str| {
            t.split(',')
                .map(|x| parse_number(x.trim()))
                .collect::<Result<Vec<_>, _>>()
        };
        match parts.as_slice() {
            ["exp", r] => Ok(ArrivalSpec::Exponential(parse_number(r)?)),
            ["erlang", k, r] => Ok(ArrivalSpec::Erlang(
                k.parse().map_err(|_| format!("Erlang shape must be a positive integer, got {k:?}"))?,
                parse_number(r)?,
            )),
            ["det", a] => Ok(ArrivalSpec::Deterministic(parse_number(a)?)),
            ["hyperexp", w, r] => Ok(ArrivalSpec::HyperExponential(list(w)?, list(r)?)),
            _ => Err(format!(
                "arrival must be exp:<rate>, erlang:<k>:<rate>, det:<a> or hyperexp:<weights>:<rates>, got {s:?}"
            )),
        }
    }

    pub fn to_dist(&self) -> lqsolve_core::Result<InterarrivalDist<f64>> {
        match self {
            ArrivalSpec::Exponential(r) => InterarrivalDist::exponential(to_f64(r)),
            ArrivalSpec::Erlang(k, r) => InterarrivalDist::erlang(*k, to_f64(r)),
            ArrivalSpec::Deterministic(a) => InterarrivalDist::deterministic(to_f64(a)),
            ArrivalSpec::HyperExponential(w, r) => InterarrivalDist::hyperexponential(
                w.iter().map(to_f64).collect(),
                r.iter().map(to_f64).collect(),
            ),
        }
    }
}

impl ServiceSpec {
    pub fn to_dist(&self) -> lqsolve_core::Result<ServiceDist<f64>> {
        match self {
            ServiceSpec::Deterministic(b) => ServiceDist::deterministic(to_f64(b)),
            ServiceSpec::MixedErlang { mu, kappa } => Ok(ServiceDist::MixedErlang(
                MixedErlangDist::new(to_f64(mu), kappa.iter().map(to_f64).collect())?,
            )),
        }
    }
}

impl ModelSpec {
    pub fn to_model(&self) -> lqsolve_core::Result<ModelParams<f64>> {
        ModelParams::new(
            to_f64(&self.p),
            self.arrival.to_dist()?,
            self.service.to_dist()?,
        )
    }

    /// `(lambda, b)` when interarrivals are exponential and service deterministic.
    pub fn md_pair(&self) -> Option<(Rational, Rational)> {
        match (&self.arrival, &self.service) {
            (ArrivalSpec::Exponential(l), ServiceSpec::Deterministic(b)) => Some((*l, *b)),
            _ => None,
        }
    }
}

/// Where each key was seen, for anchoring semantic errors.
type Positions = BTreeMap<(String, String), (usize, usize)>;

const MODEL_KEYS: &[&str] = &["p", "lambda", "arrival", "b", "mu", "kappa"];
const ENGINE_KEYS: &[&str] = &[
    "eps_tail",
    "tol",
    "n",
    "x_max",
    "samples",
    "seed",
    "burn_in",
    "replications",
    "thin",
];
const OUTPUT_KEYS: &[&str] = &["dir", "grid", "samples_csv"];

pub fn parse_config(text: &str) -> Result<Config, ConfigError> {
    let mut section: Option<String> = None;
    let mut values: BTreeMap<(String, String), String> = BTreeMap::new();
    let mut pos = Positions::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split(['#', ';']).next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let indent = content.len() - content.trim_start().len();
        let err = |column: usize, message: String| ConfigError {
            line,
            column,
            message,
        };
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| err(indent + 1, "unterminated section header".into()))?
                .trim();
            if !["model", "engine", "output"].contains(&name) {
                return Err(err(indent + 2, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(err(
                indent + 1,
                format!("expected key = value, got {trimmed:?}"),
            ));
        };
        let sec = section
            .clone()
            .ok_or_else(|| err(indent + 1, "key outside any section".into()))?;
        let key_name = key.trim();
        let allowed = match sec.as_str() {
            "model" => MODEL_KEYS,
            "engine" => ENGINE_KEYS,
            _ => OUTPUT_KEYS,
        };
        if !allowed.contains(&key_name) {
            return Err(err(
                indent + 1,
                format!("unknown key {key_name:?} in [{sec}]"),
            ));
        }
        let value_col = key.len() + 2 + (value.len() - value.trim_start().len());
        let k = (sec, key_name.to_string());
        if pos.contains_key(&k) {
            return Err(err(indent + 1, format!("duplicate key {key_name:?}")));
        }
        pos.insert(k.clone(), (line, value_col));
        values.insert(k, value.trim().to_string());
    }
    build(&values, &pos)
}

fn build(
    values: &BTreeMap<(String, String), String>,
    pos: &Positions,
) -> Result<Config, ConfigError> {
    let get = |sec: &str, key: &str| {
        values
            .get(&(sec.to_string(), key.to_string()))
            .map(String::as_str)
    };
    let at = |sec: &str, key: &str, message: String| {
        let (line, column) = pos
            .get(&(sec.to_string(), key.to_string()))
            .copied()
            .unwrap_or((0, 0));
        ConfigError {
            line,
            column,
            message,
        }
    };
    let num = |sec: &str, key: &str| -> Result<Option<Rational>, ConfigError> {
        get(sec, key)
            .map(|v| parse_number(v).map_err(|m| at(sec, key, m)))
            .transpose()
    };
    fn int<I: std::str::FromStr>(
        v: Option<&str>,
        err: impl Fn(String) -> ConfigError,
    ) -> Result<Option<I>, ConfigError> {
        v.map(|s| {
            s.parse::<I>()
                .map_err(|_| err(format!("expected a nonnegative integer, got {s:?}")))
        })
        .transpose()
    }
    let missing = |key: &str| ConfigError {
        line: 0,
        column: 0,
        message: format!("[model] is missing {key}"),
    };

    let p = num("model", "p")?.ok_or_else(|| missing("p"))?;
    if p < Rational::zero() || p > Rational::one() {
        return Err(at(
            "model",
            "p",
            format!("p must lie in [0, 1], got {}", render_number(&p)),
        ));
    }
    let arrival = match (num("model", "lambda")?, get("model", "arrival")) {
        (Some(_), Some(_)) => {
            return Err(at(
                "model",
                "arrival",
                "give either lambda or arrival, not both".into(),
            ))
        }
        (Some(l), None) => ArrivalSpec::Exponential(l),
        (None, Some(a)) => ArrivalSpec::parse(a).map_err(|m| at("model", "arrival", m))?,
        (None, None) => return Err(missing("lambda or arrival")),
    };
    let arrival_key = if get("model", "lambda").is_some() {
        "lambda"
    } else {
        "arrival"
    };
    arrival
        .to_dist()
        .map_err(|e| at("model", arrival_key, strip_kind(&e)))?;
    let service = match (num("model", "b")?, num("model", "mu")?) {
        (Some(_), Some(_)) => {
            return Err(at("model", "mu", "give either b or mu, not both".into()))
        }
        (Some(b), None) => {
            if get("model", "kappa").is_some() {
                return Err(at("model", "kappa", "kappa needs mu, not b".into()));
            }
            ServiceSpec::Deterministic(b)
        }
        (None, Some(mu)) => {
            let kappa = match get("model", "kappa") {
                Some(k) => k
                    .split(',')
                    .map(|x| parse_number(x.trim()))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|m| at("model", "kappa", m))?,
                None => vec![Rational::one()],
            };
            ServiceSpec::MixedErlang { mu, kappa }
        }
        (None, None) => return Err(missing("b or mu")),
    };
    let service_key = match &service {
        ServiceSpec::Deterministic(_) => "b",
        ServiceSpec::MixedErlang { .. } if get("model", "kappa").is_some() => "kappa",
        ServiceSpec::MixedErlang { .. } => "mu",
    };
    if let Err(e) = service.to_dist() {
        let key = if e.to_string().contains("mu must") {
            "mu"
        } else {
            service_key
        };
        return Err(at("model", key, strip_kind(&e)));
    }

    let engine = EngineSpec {
        eps_tail: num("engine", "eps_tail")?,
        tol: num("engine", "tol")?,
        n: int(get("engine", "n"), |m| at("engine", "n", m))?,
        x_max: num("engine", "x_max")?,
        samples: int(get("engine", "samples"), |m| at("engine", "samples", m))?,
        seed: int(get("engine", "seed"), |m| at("engine", "seed", m))?,
        burn_in: int(get("engine", "burn_in"), |m| at("engine", "burn_in", m))?,
        replications: int(get("engine", "replications"), |m| {
            at("engine", "replications", m)
        })?,
        thin: int(get("engine", "thin"), |m| at("engine", "thin", m))?,
    };
    for (key, v) in [
        ("eps_tail", &engine.eps_tail),
        ("tol", &engine.tol),
        ("x_max", &engine.x_max),
    ] {
        if v.is_some_and(|r| !r.is_positive()) {
            return Err(at("engine", key, format!("{key} must be positive")));
        }
    }
    for (key, v) in [
        ("n", engine.n),
        ("samples", engine.samples),
        ("replications", engine.replications),
        ("thin", engine.thin),
    ] {
        if v == Some(0) {
            return Err(at("engine", key, format!("{key} must be >= 1")));
        }
    }
    let output = OutputSpec {
        dir: get("output", "dir").map(str::to_string),
        grid: get("output", "grid")
            .map(|g| Grid::parse(g).map_err(|m| at("output", "grid", m)))
            .transpose()?,
        samples_csv: match get("output", "samples_csv") {
            None | Some("false") => false,
            Some("true") => true,
            Some(v) => {
                return Err(at(
                    "output",
                    "samples_csv",
                    format!("expected true or false, got {v:?}"),
                ))
            }
        },
    };
    Ok(Config {
        model: ModelSpec {
            p,
            arrival,
            service,
        },
        engine,
        output,
    })
}

/// Error message without the `Kind: ` prefix some variants carry.
fn strip_kind(e: &lqsolve_core::Error) -> String {
    let s = e.to_string();
    s.strip_prefix("invalid parameter: ")
        .map(str::to_string)
        .unwrap_or(s)
}

/// Canonical text form; `parse_config(render(c)) == c`.
pub fn render(c: &Config) -> String {
    let mut out = String::from("[model]\n");
    out += &format!("p = {}\n", render_number(&c.model.p));
    out += &format!("arrival = {}\n", c.model.arrival.render());
    match &c.model.service {
        ServiceSpec::Deterministic(b) => out += &format!("b = {}\n", render_number(b)),
        ServiceSpec::MixedErlang { mu, kappa } => {
            out += &format!(
                "mu = {}\nkappa = {}\n",
                render_number(mu),
                render_list(kappa)
            );
        }
    }
    let e = &c.engine;
    let mut engine = String::new();
    let mut put = |k: &str, v: Option<String>| {
        if let Some(v) = v {
            engine += &format!("{k} = {v}\n");
        }
    };
    put("eps_tail", e.eps_tail.as_ref().map(render_number));
    put("tol", e.tol.as_ref().map(render_number));
    put("n", e.n.map(|v| v.to_string()));
    put("x_max", e.x_max.as_ref().map(render_number));
    put("samples", e.samples.map(|v| v.to_string()));
    put("seed", e.seed.map(|v| v.to_string()));
    put("burn_in", e.burn_in.map(|v| v.to_string()));
    put("replications", e.replications.map(|v| v.to_string()));
    put("thin", e.thin.map(|v| v.to_string()));
    if !engine.is_empty() {
        out += "\n[engine]\n";
        out += &engine;
    }
    let o = &c.output;
    if o.dir.is_some() || o.grid.is_some() || o.samples_csv {
        out += "\n[output]\n";
        if let Some(d) = &o.dir {
            out += &format!("dir = {d}\n");
        }
        if let Some(g) = &o.grid {
            out += &format!("grid = {g}\n");
        }
        if o.samples_csv {
            out += "samples_csv = true\n";
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i128, d: i128) -> Rational {
        Rational::new(n, d)
    }

    #[test]
    fn numbers_are_exact() {
        assert_eq!(parse_number("1/3").unwrap(), r(1, 3));
        assert_eq!(parse_number("0.3").unwrap(), r(3, 10));
        assert_eq!(parse_number("1e-10").unwrap(), r(1, 10_000_000_000));
        assert_eq!(parse_number("-2.5E1").unwrap(), r(-25, 1));
        assert_eq!(parse_number("0.5/2").unwrap(), r(1, 4));
        assert!(parse_number("1/0").is_err());
        assert!(parse_number("abc").is_err());
        assert!(parse_number(".").is_err());
    }

    #[test]
    fn rendering_is_shortest_exact() {
        assert_eq!(render_number(&r(1, 3)), "1/3");
        assert_eq!(render_number(&r(3, 10)), "0.3");
        assert_eq!(render_number(&r(-1, 40)), "-0.025");
        assert_eq!(render_number(&r(7, 1)), "7");
        for s in ["1/3", "0.3", "1e-10", "12.5", "-3/7"] {
            let v = parse_number(s).unwrap();
            assert_eq!(parse_number(&render_number(&v)).unwrap(), v, "{s}");
        }
    }

    #[test]
    fn figure_configuration() {
        let c = parse_config("[model]\np = 1/3\nlambda = 2\nb = 1\n").unwrap();
        assert_eq!(c.model.p, r(1, 3));
        assert_eq!(c.model.md_pair(), Some((r(2, 1), r(1, 1))));
        assert_eq!(
            to_dd(&c.model.p) * DoubleDouble::of(3.0),
            DoubleDouble::of(1.0)
        );
    }

    #[test]
    fn mixed_erlang_configuration() {
        let c =
            parse_config("[model]\np = 0.5\narrival = exp:1\nmu = 2\nkappa = 0.3,0.7\n").unwrap();
        let m = c.model.to_model().unwrap();
        match m.service {
            ServiceDist::MixedErlang(d) => assert_eq!(d.order(), 2),
            _ => panic!("expected mixed Erlang"),
        }
    }

    #[test]
    fn weight_sum_error_is_anchored() {
        let e =
            parse_config("[model]\np = 0.5\nlambda = 1\nmu = 2\nkappa = 0.3,0.6\n").unwrap_err();
        assert_eq!(e.line, 5);
        assert_eq!(e.column, 9);
        assert!(e.message.contains("weights sum 0.9 ≠ 1"), "{e}");
    }

    #[test]
    fn syntax_errors_are_anchored() {
        let e = parse_config("[model]\np = 1/3\n  oops\n").unwrap_err();
        assert_eq!((e.line, e.column), (3, 3));
        let e = parse_config("[model]\np = 2\nlambda = 1\nb = 1\n").unwrap_err();
        assert_eq!(e.line, 2);
        let e = parse_config("[modle]\n").unwrap_err();
        assert!(e.message.contains("unknown section"));
        let e = parse_config("[model]\np = 0.5\np = 0.4\n").unwrap_err();
        assert!(e.message.contains("duplicate"));
        let e = parse_config("[model]\np = 0.5\nlambda = 1\narrival = exp:1\nb = 1\n").unwrap_err();
        assert_eq!(e.line, 4);
    }

    #[test]
    fn round_trip() {
        let text =
            "[model]\np = 1/3\narrival = hyperexp:0.4,0.6:0.5,3\nmu = 2\nkappa = 0.3,0.7\n\n\
                    [engine]\neps_tail = 1e-10\nn = 4000\nseed = 7\nthin = 3\n\n\
                    [output]\ndir = out\ngrid = 10:1/100\nsamples_csv = true\n";
        let c = parse_config(text).unwrap();
        assert_eq!(parse_config(&render(&c)).unwrap(), c);
        assert_eq!(c.output.grid.as_ref().unwrap().rows(), 1001);
    }
}
