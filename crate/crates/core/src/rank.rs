//! Random rank assignment.
//!
//! Every item receives an independent random rank drawn from a distribution
//! parameterized by its weight. Exponential ranks (`Ws`) turn a bottom-k
//! sketch into weighted sampling without replacement; priority ranks (`Pri`)
//! are uniform on `[0, 1/w]`; uniform ranks ignore weights entirely.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::BottomKSketch;

/// Seedable counter-based generator used throughout the crate.
pub type SketchRng = ChaCha8Rng;

/// Returns an independent generator for `(seed, stream)`.
///
/// Streams with the same seed never overlap, so repetition `i` of an
/// experiment can own stream `i` regardless of how repetitions are scheduled.
pub fn seeded_rng(seed: u64, stream: u64) -> SketchRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform draw from the open interval (0, 1).
#[inline]
pub fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(Open01)
}

/// Family of weight-parameterized rank distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankFamily {
    /// Exponential ranks, density `w e^{-wx}`.
    #[serde(rename = "ws", alias = "exponential")]
    Ws,
    /// Priority ranks, uniform on `[0, 1/w]`.
    #[serde(rename = "pri", alias = "priority")]
    Pri,
    /// Unweighted uniform ranks on `[0, 1]`.
    Uniform,
}

impl RankFamily {
    pub fn name(self) -> &'static str {
        match self {
            RankFamily::Ws => "ws",
            RankFamily::Pri => "pri",
            RankFamily::Uniform => "uniform",
        }
    }

    /// `F_w(x)`, the probability that an item of weight `w` gets rank at most `x`.
    pub fn cdf(self, weight: f64, x: f64) -> Result<f64> {
        check_weight(weight)?;
        if x.is_nan() || x < 0.0 {
            return Err(Error::domain(format!("rank argument must be nonnegative, got {x}")));
        }
        Ok(self.cdf_unchecked(weight, x))
    }

    #[inline]
    pub(crate) fn cdf_unchecked(self, weight: f64, x: f64) -> f64 {
        match self {
            RankFamily::Ws => {
                if x.is_infinite() {
                    1.0
                } else {
                    -(-weight * x).exp_m1()
                }
            }
            RankFamily::Pri => (weight * x).min(1.0),
            RankFamily::Uniform => x.min(1.0),
        }
    }

    /// Rank obtained directly from a uniform variate `u` in (0, 1).
    #[inline]
    pub fn rank_from_uniform(self, weight: f64, u: f64) -> f64 {
        match self {
            RankFamily::Ws => -u.ln() / weight,
            RankFamily::Pri => u / weight,
            RankFamily::Uniform => u,
        }
    }

    /// `F_w^{-1}(p)` for `p` in [0, 1).
    #[inline]
    pub fn inverse_cdf(self, weight: f64, p: f64) -> f64 {
        match self {
            RankFamily::Ws => -(-p).ln_1p() / weight,
            RankFamily::Pri => p / weight,
            RankFamily::Uniform => p,
        }
    }

    /// Draws a rank conditioned on being below `bound`, i.e. from the density
    /// `f_w(x) / F_w(bound)` on `[0, bound)`.
    pub(crate) fn draw_below<R: Rng + ?Sized>(self, weight: f64, bound: f64, rng: &mut R) -> f64 {
        let mass = self.cdf_unchecked(weight, bound);
        let x = self.inverse_cdf(weight, open_unit(rng) * mass);
        if x < bound {
            x
        } else {
            // rounding at the top of the support
            f64::from_bits(bound.to_bits() - 1)
        }
    }
}

impl fmt::Display for RankFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for RankFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ws" | "exp" | "exponential" => Ok(RankFamily::Ws),
            "pri" | "priority" => Ok(RankFamily::Pri),
            "uniform" | "unweighted" => Ok(RankFamily::Uniform),
            other => Err(Error::input(format!(
                "unknown rank family `{other}` (expected ws, pri or uniform)"
            ))),
        }
    }
}

/// A rank together with the identifier of the item holding it.
///
/// Ordering is lexicographic on `(value, owner)` so ties in floating-point
/// values still produce a strict total order.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RankValue<'a> {
    pub value: f64,
    pub owner: &'a str,
}

impl Eq for RankValue<'_> {}

impl PartialOrd for RankValue<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for RankValue<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.value
            .total_cmp(&other.value)
            .then_with(|| self.owner.cmp(other.owner))
    }
}

pub(crate) fn check_weight(weight: f64) -> Result<()> {
    if weight.is_finite() && weight > 0.0 {
        Ok(())
    } else {
        Err(Error::domain(format!("weight must be positive and finite, got {weight}")))
    }
}

/// Draws the rank of an item with the given weight.
pub fn draw_rank<R: Rng + ?Sized>(weight: f64, family: RankFamily, rng: &mut R) -> Result<f64> {
    check_weight(weight)?;
    Ok(family.rank_from_uniform(weight, open_unit(rng)))
}

/// `F_w(x)` for the given family.
pub fn rank_cdf(family: RankFamily, weight: f64, x: f64) -> Result<f64> {
    family.cdf(weight, x)
}

/// Redraws ranks for every sketch entry from its distribution truncated to
/// `[0, r_{k+1})`. Returned ranks follow the entry order of the sketch.
pub fn redraw_sketch_ranks<R: Rng + ?Sized>(sketch: &BottomKSketch, rng: &mut R) -> Result<Vec<f64>> {
    let bound = sketch.r_k_plus_1().ok_or_else(|| {
        Error::State("rank redraw needs the (k+1)-st smallest rank; the sketch is exact".into())
    })?;
    let family = sketch.family();
    Ok(sketch
        .entries()
        .iter()
        .map(|e| family.draw_below(e.weight, bound, rng))
        .collect())
}
