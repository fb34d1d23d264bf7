//! Confidence bounds on total and subpopulation weight.
//!
//! WS bounds rest on `v(t, s_0..s_h)`, the sum of `h + 1` independent
//! exponentials with rates `t - s_j`: conditioned on the prefix sums of a
//! sketch, it is the distribution of the next rank. A candidate weight `x`
//! is consistent with an observed rank `τ` at level δ when `τ` is not in
//! the δ tail of `v(x, ·)`; the bounds are the extreme consistent `x`.

mod lexicographic;
mod other;
mod sum_exp;
mod ws;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub use lexicographic::ws_bounds_subpop_with_total;
pub use other::{pri_bounds_subpop, wsr_bounds_total};
pub use sum_exp::{quantile_method_solve, sample_root_distribution, sample_sum_exp, solve_normal_approx, Side, SumExpSpec};
pub use ws::{ws_bounds_subpop, ws_bounds_total, ws_density_cdf};

/// Draws used by the quantile method unless told otherwise.
pub const DEFAULT_DRAWS: usize = 200;

/// How WS bound equations are solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundMethod {
    /// Normal approximation of `v(x, ·)` by its mean and variance.
    Normal,
    /// Empirical quantile of roots of parametric samples.
    Quantile { draws: usize },
    /// Exact density of the next rank (total weight only).
    Density,
}

impl BoundMethod {
    pub fn quantile() -> Self {
        BoundMethod::Quantile { draws: DEFAULT_DRAWS }
    }

    pub fn name(self) -> &'static str {
        match self {
            BoundMethod::Normal => "normal",
            BoundMethod::Quantile { .. } => "quantile",
            BoundMethod::Density => "density",
        }
    }
}

impl fmt::Display for BoundMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BoundMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normal" => Ok(BoundMethod::Normal),
            "quantile" => Ok(BoundMethod::quantile()),
            "density" => Ok(BoundMethod::Density),
            _ => Err(Error::input(format!(
                "unknown bound method `{s}` (valid: normal, quantile, density)"
            ))),
        }
    }
}

/// A two-sided interval; each side holds with probability at least `1 - delta`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConfidenceInterval {
    pub lower: f64,
    pub upper: f64,
    pub delta: f64,
    /// e.g. `ws-normal`, `ws-lexicographic`, `pri-chernoff`, `exact`.
    pub method: String,
}

impl ConfidenceInterval {
    pub(crate) fn new(lower: f64, upper: f64, delta: f64, method: impl Into<String>) -> Self {
        let lower = lower.max(0.0);
        ConfidenceInterval {
            lower,
            upper: upper.max(lower),
            delta,
            method: method.into(),
        }
    }

    pub(crate) fn exact(value: f64, delta: f64) -> Self {
        ConfidenceInterval::new(value, value, delta, "exact")
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn contains(&self, x: f64) -> bool {
        self.lower <= x && x <= self.upper
    }
}
