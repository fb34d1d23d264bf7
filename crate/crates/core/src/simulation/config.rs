use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::estimators::ScParams;

/// Weight distribution of the synthetic set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Distribution {
    /// `u^{-1/α}` with `u` uniform on (0, 1], so the minimum weight is 1.
    Pareto { alpha: f64, n: usize },
    /// Uniform on (0, 1].
    Uniform { n: usize },
}

impl Distribution {
    pub fn n(&self) -> usize {
        match *self {
            Distribution::Pareto { n, .. } | Distribution::Uniform { n } => n,
        }
    }

    fn with_n(self, n: usize) -> Self {
        match self {
            Distribution::Pareto { alpha, .. } => Distribution::Pareto { alpha, n },
            Distribution::Uniform { .. } => Distribution::Uniform { n },
        }
    }
}

/// A group size; `Whole` is the entire set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupSize {
    Fixed(usize),
    Whole,
}

impl GroupSize {
    pub fn resolve(self, n: usize) -> usize {
        match self {
            GroupSize::Fixed(g) => g,
            GroupSize::Whole => n,
        }
    }
}

macro_rules! named_enum {
    ($(#[$m:meta])* $name:ident, $what:literal { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn name(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                $name::ALL.iter().copied().find(|v| v.name() == s).ok_or_else(|| {
                    let names: Vec<_> = $name::ALL.iter().map(|v| v.name()).collect();
                    Error::config(format!(concat!("unknown ", $what, " `{}` (valid: {})"), s, names.join(", ")))
                })
            }
        }
    };
}

named_enum!(
    /// Estimators compared by the estimator experiment.
    SimEstimator, "estimator" {
        WsMl => "ws-ml",
        WsRc => "ws-rc",
        PriRc => "pri-rc",
        WsScExact => "ws-sc-exact",
        WsScMarkov => "ws-sc-markov",
        WsPrefix => "ws-prefix",
        WsrHt => "wsr-ht",
        WsrRatio => "wsr-ratio",
        Wsr => "wsr",
    }
);

named_enum!(
    /// Bound methods compared by the bounds experiment.
    SimBound, "bound method" {
        WsNormal => "ws-normal",
        WsQuantile => "ws-quantile",
        WsDensity => "ws-density",
        WsW => "ws-w",
        Pri => "pri",
        Wsr => "wsr",
    }
);

named_enum!(
    /// Which experiments `simulate` runs.
    Experiment, "experiment" {
        Estimators => "estimators",
        Bounds => "bounds",
        Both => "both",
    }
);

/// Everything an experiment run depends on.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub distribution: Distribution,
    pub k_values: Vec<usize>,
    /// Group sizes swept by the estimator experiment.
    pub group_sizes: Vec<GroupSize>,
    /// Group sizes used by the bounds experiment.
    pub bound_group_sizes: Vec<GroupSize>,
    pub repetitions: usize,
    pub estimators: Vec<SimEstimator>,
    pub bounds: Vec<SimBound>,
    pub delta: f64,
    pub sc: ScParams,
    pub draws: usize,
    pub seed: u64,
    pub experiment: Experiment,
    /// Per-group rows are written only when a partition has at most this many groups.
    pub group_rows: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            distribution: Distribution::Pareto { alpha: 1.2, n: 1000 },
            k_values: vec![4, 16, 40, 100, 500],
            group_sizes: vec![GroupSize::Fixed(1), GroupSize::Fixed(10), GroupSize::Fixed(100), GroupSize::Whole],
            bound_group_sizes: vec![GroupSize::Fixed(200), GroupSize::Whole],
            repetitions: 500,
            estimators: vec![
                SimEstimator::WsMl,
                SimEstimator::WsRc,
                SimEstimator::PriRc,
                SimEstimator::WsScMarkov,
                SimEstimator::WsPrefix,
                SimEstimator::Wsr,
            ],
            bounds: vec![SimBound::WsQuantile, SimBound::WsW, SimBound::Pri, SimBound::Wsr],
            delta: 0.05,
            sc: ScParams::default(),
            draws: 200,
            seed: 1,
            experiment: Experiment::Both,
            group_rows: 20,
        }
    }
}

impl ExperimentConfig {
    /// The larger setting: 20000 items and 1000 repetitions.
    pub fn full_scale(mut self) -> Self {
        self.distribution = self.distribution.with_n(20_000);
        self.repetitions = 1000;
        self
    }

    /// Reads `key = value` lines; `#` starts a comment. Unset keys keep
    /// their defaults.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut kind = "pareto".to_string();
        let mut alpha = 1.2;
        let mut n = cfg.distribution.n();
        let mut full = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: String| Error::config(format!("line {}: {msg}", lineno + 1));
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| at(format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let wrap = |e: Error| match e {
                Error::Config(m) => at(m),
                other => at(other.to_string()),
            };
            match key {
                "distribution" => kind = value.to_string(),
                "alpha" => alpha = num(value).map_err(wrap)?,
                "n" => n = num(value).map_err(wrap)?,
                "k" => cfg.k_values = list(value, num).map_err(wrap)?,
                "g" => cfg.group_sizes = list(value, group).map_err(wrap)?,
                "bound_g" => cfg.bound_group_sizes = list(value, group).map_err(wrap)?,
                "repetitions" | "reps" => cfg.repetitions = num(value).map_err(wrap)?,
                "estimators" => cfg.estimators = list(value, str::parse).map_err(wrap)?,
                "bounds" => cfg.bounds = list(value, str::parse).map_err(wrap)?,
                "delta" => cfg.delta = num(value).map_err(wrap)?,
                "inperm" => cfg.sc.inperm = num(value).map_err(wrap)?,
                "permnum" => cfg.sc.permnum = num(value).map_err(wrap)?,
                "draws" => cfg.draws = num(value).map_err(wrap)?,
                "seed" => cfg.seed = num(value).map_err(wrap)?,
                "experiment" => cfg.experiment = value.parse().map_err(wrap)?,
                "group_rows" => cfg.group_rows = num(value).map_err(wrap)?,
                "scale" => {
                    full = match value {
                        "full" => true,
                        "desk" => false,
                        _ => return Err(at(format!("scale must be `desk` or `full`, got `{value}`"))),
                    }
                }
                _ => return Err(at(format!("unknown key `{key}`"))),
            }
        }
        cfg.distribution = match kind.as_str() {
            "pareto" => Distribution::Pareto { alpha, n },
            "uniform" => Distribution::Uniform { n },
            other => return Err(Error::config(format!("unknown distribution `{other}` (valid: pareto, uniform)"))),
        };
        if full {
            cfg = cfg.full_scale();
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.distribution.n();
        if n == 0 {
            return Err(Error::config("n must be at least 1"));
        }
        if let Distribution::Pareto { alpha, .. } = self.distribution {
            if !(alpha > 0.0 && alpha.is_finite()) {
                return Err(Error::config(format!("alpha must be positive, got {alpha}")));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::config("repetitions must be at least 1"));
        }
        if self.k_values.is_empty() || self.k_values.contains(&0) {
            return Err(Error::config("k values must be a nonempty list of positive integers"));
        }
        for g in self.group_sizes.iter().chain(&self.bound_group_sizes) {
            let g = g.resolve(n);
            if g == 0 || n % g != 0 {
                return Err(Error::config(format!("group size {g} does not divide n = {n}")));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 0.5) {
            return Err(Error::config(format!("delta must lie in (0, 0.5], got {}", self.delta)));
        }
        if self.sc.inperm == 0 || self.sc.permnum == 0 {
            return Err(Error::config("inperm and permnum must be at least 1"));
        }
        if self.draws == 0 {
            return Err(Error::config("draws must be at least 1"));
        }
        Ok(())
    }
}

fn num<T: FromStr>(s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::config(format!("not a valid number: `{s}`")))
}

fn group(s: &str) -> Result<GroupSize> {
    if s == "n" {
        Ok(GroupSize::Whole)
    } else {
        num(s).map(GroupSize::Fixed)
    }
}

fn list<T>(s: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    s.split(',').map(str::trim).filter(|t| !t.is_empty()).map(item).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::parse(
            "# small run\ndistribution = uniform\nn = 100\nk = 4, 8\ng = 1, 10, n\nbound_g = 50\nreps = 10\nestimators = ws-rc,wsr\n",
        )
        .unwrap();
        assert_eq!(cfg.distribution, Distribution::Uniform { n: 100 });
        assert_eq!(cfg.k_values, vec![4, 8]);
        assert_eq!(cfg.group_sizes[2].resolve(100), 100);
        assert_eq!(cfg.estimators, vec![SimEstimator::WsRc, SimEstimator::Wsr]);
    }

    #[test]
    fn unknown_names_list_valid_ones() {
        let err = ExperimentConfig::parse("estimators = ws-rc, nope\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1") && msg.contains("ws-sc-markov"), "{msg}");
        assert!(matches!(ExperimentConfig::parse("colour = red"), Err(Error::Config(_))));
    }

    #[test]
    fn group_must_divide_n() {
        assert!(ExperimentConfig::parse("n = 100\ng = 7\nbound_g = n\n").is_err());
    }

    #[test]
    fn full_scale_flag() {
        let cfg = ExperimentConfig::parse("scale = full\ng = 1, 4000\nbound_g = 4000\n").unwrap();
        assert_eq!(cfg.distribution.n(), 20_000);
        assert_eq!(cfg.repetitions, 1000);
    }
}
