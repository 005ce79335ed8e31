//! Steady-state waiting-time laws for the Lindley recursion with a random sign,
//! `W_{n+1} = max{0, B_n - A_n + Y_n W_n}`, `P[Y_n = 1] = p`.
//!
//! Engines:
//! - [`giph`]: mixed-Erlang service, general interarrival family (transform method);
//! - [`md`]: exponential interarrivals, deterministic service (band recursion);
//! - [`fixedpoint`]: contraction iteration on the distribution function;
//! - [`sim`]: direct simulation of the recursion.
//!
//! All numerical code is generic over [`Real`]; the aliases below fix `f64`
//! (and [`DoubleDouble`] for the band recursion, which cancels heavily).

// `!(x > y)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod dd;
pub mod dist;
pub mod error;
pub mod fixedpoint;
pub mod giph;
pub mod linalg;
pub mod md;
pub mod poly;
pub mod scalar;
pub mod sim;

pub use dd::DoubleDouble;
pub use error::{Error, Result};
pub use scalar::{CompensatedSum, Real};

pub type MixedErlang = dist::MixedErlangDist<f64>;
pub type Interarrival = dist::InterarrivalDist<f64>;
pub type Service = dist::ServiceDist<f64>;
pub type Model = dist::ModelParams<f64>;
pub type GiPhSolution = giph::GiPhSolution<f64>;
pub type GridFunction = fixedpoint::GridFunction<f64>;
pub type MdParams = md::MdParams<DoubleDouble>;
pub type MdSolution = md::MdSolution<DoubleDouble>;
