//! `bottomk`: build and merge sketches, estimate subpopulation weights,
//! compute confidence bounds and run the simulation suite.
//!
//! Exit codes: 0 ok, 1 numerical failure, 2 bad input, 3 estimator or
//! bound not applicable to the sketch, 4 bad experiment config.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bottomk::confidence::{
    pri_bounds_subpop, ws_bounds_subpop, ws_bounds_subpop_with_total, ws_bounds_total, wsr_bounds_total,
    ConfidenceInterval, DEFAULT_DRAWS,
};
use bottomk::estimators::{
    ml_subpop, ml_subpop_with_total, ml_total_weight, prefix_adjusted_weights, rc_adjusted_weights,
    sc_adjusted_weights_exact, sc_adjusted_weights_markov, wsr_ht_adjusted_weights, wsr_ratio_adjusted_weights,
    wsr_total_weight,
};
use bottomk::simulation::{run_experiments, ExperimentConfig, SimBound, SimEstimator};
use bottomk::{
    build_bottom_k, build_k_mins, deserialize_sketch, merge_sketches, read_items_csv, seeded_rng, serialize_sketch,
    BottomKSketch, BoundMethod, Error, KMinsSketch, Predicate, RankFamily, ScParams, Sketch,
};
use clap::{Parser, Subcommand};
use serde_json::json;

/// Seed used when `--seed` is not given.
const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(name = "bottomk", version, about = "Bottom-k sketches: estimates and confidence bounds for subpopulation weight")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sketch a CSV file of `id,weight[,attr:<name>...]` rows.
    Sketch {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        k: usize,
        /// ws, pri or uniform
        #[arg(long, default_value = "ws")]
        family: RankFamily,
        /// Build a k-mins (with-replacement) sketch instead of a bottom-k one.
        #[arg(long)]
        kmins: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge two bottom-k sketches of disjoint sets into a bottom-k sketch of their union.
    Merge {
        first: PathBuf,
        second: PathBuf,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Estimate the weight of a subpopulation.
    Estimate {
        #[arg(long)]
        sketch: PathBuf,
        /// ws-rc, pri-rc, ws-sc-exact, ws-sc-markov, ws-prefix, ws-ml, wsr-ht, wsr-ratio, wsr
        #[arg(long)]
        estimator: String,
        /// Predicate over item attributes; the whole set when omitted.
        #[arg(long)]
        predicate: Option<String>,
        /// Total weight of the set; overrides the value stored in the sketch.
        #[arg(long)]
        total: Option<f64>,
        #[arg(long, default_value_t = 20)]
        inperm: usize,
        #[arg(long, default_value_t = 20)]
        permnum: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Confidence bounds on the weight of a subpopulation.
    Bounds {
        #[arg(long)]
        sketch: PathBuf,
        /// ws-normal, ws-quantile, ws-density, ws-w, pri, wsr
        #[arg(long)]
        method: String,
        #[arg(long)]
        predicate: Option<String>,
        #[arg(long, default_value_t = 0.05)]
        delta: f64,
        #[arg(long)]
        total: Option<f64>,
        #[arg(long, default_value_t = DEFAULT_DRAWS)]
        draws: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Run the experiments described by a `key = value` config file and write CSV.
    Simulate {
        config: PathBuf,
        /// 20000 items and 1000 repetitions.
        #[arg(long)]
        full_scale: bool,
        /// Write the table here instead of standard output.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug)]
enum CliError {
    Lib(Error),
    Io(PathBuf, io::Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(..) => 2,
            CliError::Lib(e) => match e {
                Error::Input(_) | Error::Parse { .. } | Error::Evaluation { .. } | Error::Domain(_) => 2,
                Error::Capability(_) | Error::State(_) => 3,
                Error::Config(_) => 4,
                Error::Numerical(_) => 1,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn load(path: &Path) -> CliResult<Sketch> {
    let text = read(path)?;
    deserialize_sketch(&text).map_err(|e| match e {
        Error::Parse { location, message } => Error::Parse {
            location: format!("{}: {location}", path.display()),
            message,
        }
        .into(),
        other => other.into(),
    })
}

fn predicate(expr: &Option<String>) -> CliResult<Predicate> {
    Ok(match expr {
        Some(e) => Predicate::parse(e)?,
        None => Predicate::True,
    })
}

fn bottom_k<'a>(sketch: &'a Sketch, family: RankFamily, what: &str) -> CliResult<&'a BottomKSketch> {
    match sketch {
        Sketch::BottomK(s) if s.family() == family => Ok(s),
        Sketch::BottomK(s) => Err(Error::Capability(format!("{what} needs a {family} bottom-k sketch, got {}", s.family())).into()),
        Sketch::KMins(_) => Err(Error::Capability(format!("{what} needs a {family} bottom-k sketch, got a k-mins sketch")).into()),
    }
}

fn kmins<'a>(sketch: &'a Sketch, what: &str) -> CliResult<&'a KMinsSketch> {
    match sketch {
        Sketch::KMins(s) => Ok(s),
        Sketch::BottomK(_) => Err(Error::Capability(format!("{what} needs a k-mins sketch")).into()),
    }
}

fn total_weight(sketch: &Sketch, given: Option<f64>, what: &str) -> CliResult<f64> {
    let stored = match sketch {
        Sketch::BottomK(s) => s.total_weight(),
        Sketch::KMins(_) => None,
    };
    given.or(stored).ok_or_else(|| {
        Error::Capability(format!("{what} needs the total weight; pass --total or sketch the full set")).into()
    })
}

fn cmd_sketch(input: &Path, k: usize, family: RankFamily, kmins: bool, seed: u64, out: &Path) -> CliResult<()> {
    let file = fs::File::open(input).map_err(|e| CliError::Io(input.to_path_buf(), e))?;
    let items = read_items_csv(file, &input.display().to_string())?;
    let mut rng = seeded_rng(seed, 0);
    let sketch = if kmins {
        if family != RankFamily::Ws {
            return Err(Error::Capability("k-mins sketches use ws ranks".into()).into());
        }
        Sketch::KMins(build_k_mins(&items, k, &mut rng)?)
    } else {
        Sketch::BottomK(build_bottom_k(&items, k, family, &mut rng)?)
    };
    write(out, &serialize_sketch(&sketch))?;
    let total: f64 = items.iter().map(|i| i.weight).sum();
    let summary = match &sketch {
        Sketch::BottomK(s) => json!({
            "kind": "bottom-k",
            "k": k,
            "family": family.name(),
            "items": items.len(),
            "total_weight": total,
            "entries": s.len(),
            "r_k_plus_1": s.r_k_plus_1(),
        }),
        Sketch::KMins(s) => json!({
            "kind": "k-mins",
            "k": k,
            "items": items.len(),
            "total_weight": total,
            "mean_rank": s.mean_rank(),
        }),
    };
    println!("{summary}");
    Ok(())
}

fn cmd_merge(first: &Path, second: &Path, k: usize, out: &Path) -> CliResult<()> {
    let (a, b) = (load(first)?, load(second)?);
    let (Sketch::BottomK(a), Sketch::BottomK(b)) = (&a, &b) else {
        return Err(Error::Capability("only bottom-k sketches can be merged".into()).into());
    };
    let merged = merge_sketches(a, b, k)?;
    println!(
        "{}",
        json!({"k": k, "entries": merged.len(), "r_k_plus_1": merged.r_k_plus_1()})
    );
    write(out, &serialize_sketch(&Sketch::BottomK(merged)))
}

fn cmd_estimate(
    path: &Path,
    estimator: &str,
    expr: &Option<String>,
    total: Option<f64>,
    sc: ScParams,
    seed: u64,
) -> CliResult<()> {
    let est: SimEstimator = estimator.parse().map_err(|e: Error| Error::Input(e.to_string().replace("config error: ", "")))?;
    let sketch = load(path)?;
    let pred = predicate(expr)?;
    let name = est.name();
    let mut rng = seeded_rng(seed, 0);
    let mut used_total = None;
    let value = match est {
        SimEstimator::WsRc => rc_adjusted_weights(bottom_k(&sketch, RankFamily::Ws, name)?)?.estimate_subpop(&pred)?,
        SimEstimator::PriRc => rc_adjusted_weights(bottom_k(&sketch, RankFamily::Pri, name)?)?.estimate_subpop(&pred)?,
        SimEstimator::WsScExact | SimEstimator::WsScMarkov | SimEstimator::WsPrefix => {
            let s = bottom_k(&sketch, RankFamily::Ws, name)?;
            let w = total_weight(&sketch, total, name)?;
            used_total = Some(w);
            let aw = match est {
                SimEstimator::WsScExact => sc_adjusted_weights_exact(s, w)?,
                SimEstimator::WsScMarkov => sc_adjusted_weights_markov(s, w, sc, &mut rng)?,
                _ => prefix_adjusted_weights(s, w)?,
            };
            aw.estimate_subpop(&pred)?
        }
        SimEstimator::WsMl => {
            let s = bottom_k(&sketch, RankFamily::Ws, name)?;
            match (total, expr) {
                (Some(w), Some(_)) => {
                    used_total = Some(w);
                    ml_subpop_with_total(s, &pred, w)?
                }
                (_, Some(_)) => ml_subpop(s, &pred)?,
                (_, None) => ml_total_weight(s)?,
            }
        }
        SimEstimator::WsrHt | SimEstimator::WsrRatio => {
            let s = kmins(&sketch, name)?;
            let w = total_weight(&sketch, total, name)?;
            used_total = Some(w);
            let aw = if est == SimEstimator::WsrHt {
                wsr_ht_adjusted_weights(s, w)?
            } else {
                wsr_ratio_adjusted_weights(s, w)?
            };
            aw.estimate_subpop(&pred)?
        }
        SimEstimator::Wsr => {
            if expr.is_some() {
                return Err(Error::Capability("wsr estimates the total weight only; use wsr-ht or wsr-ratio".into()).into());
            }
            wsr_total_weight(kmins(&sketch, name)?)?.unbiased
        }
    };
    println!(
        "{}",
        json!({
            "method": name,
            "estimate": value,
            "predicate": pred.to_string(),
            "total_weight": used_total,
        })
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_bounds(
    path: &Path,
    method: &str,
    expr: &Option<String>,
    delta: f64,
    total: Option<f64>,
    draws: usize,
    seed: u64,
) -> CliResult<()> {
    let bound: SimBound = method.parse().map_err(|e: Error| Error::Input(e.to_string().replace("config error: ", "")))?;
    let sketch = load(path)?;
    let pred = predicate(expr)?;
    let name = bound.name();
    let mut rng = seeded_rng(seed, 0);
    let ci: ConfidenceInterval = match bound {
        SimBound::WsNormal | SimBound::WsQuantile | SimBound::WsDensity => {
            let s = bottom_k(&sketch, RankFamily::Ws, name)?;
            let m = match bound {
                SimBound::WsNormal => BoundMethod::Normal,
                SimBound::WsQuantile => BoundMethod::Quantile { draws },
                _ => BoundMethod::Density,
            };
            if expr.is_some() {
                ws_bounds_subpop(s, &pred, delta, m, &mut rng)?
            } else {
                ws_bounds_total(s, delta, m, &mut rng)?
            }
        }
        SimBound::WsW => {
            let s = bottom_k(&sketch, RankFamily::Ws, name)?;
            let w = total_weight(&sketch, total, name)?;
            ws_bounds_subpop_with_total(s, &pred, w, delta, draws, &mut rng)?
        }
        SimBound::Pri => pri_bounds_subpop(bottom_k(&sketch, RankFamily::Pri, name)?, &pred, delta)?,
        SimBound::Wsr => {
            if expr.is_some() {
                return Err(Error::Capability("wsr bounds the total weight only".into()).into());
            }
            wsr_bounds_total(kmins(&sketch, name)?, delta)?
        }
    };
    println!(
        "{}",
        json!({
            "method": name,
            "solver": ci.method,
            "lower": ci.lower,
            "upper": ci.upper,
            "delta": ci.delta,
            "predicate": pred.to_string(),
        })
    );
    Ok(())
}

fn cmd_simulate(config: &Path, full_scale: bool, out: &Option<PathBuf>) -> CliResult<()> {
    let text = read(config)?;
    let mut cfg = ExperimentConfig::parse(&text).map_err(|e| match e {
        Error::Config(m) => Error::Config(format!("{}: {m}", config.display())),
        other => other,
    })?;
    if full_scale {
        cfg = cfg.full_scale();
        cfg.validate()?;
    }
    let csv = run_experiments(&cfg)?.to_csv();
    match out {
        Some(p) => write(p, &csv),
        None => io::stdout()
            .write_all(csv.as_bytes())
            .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Sketch {
            input,
            k,
            family,
            kmins,
            seed,
            out,
        } => cmd_sketch(&input, k, family, kmins, seed, &out),
        Command::Merge { first, second, k, out } => cmd_merge(&first, &second, k, &out),
        Command::Estimate {
            sketch,
            estimator,
            predicate,
            total,
            inperm,
            permnum,
            seed,
        } => {
            let sc = ScParams::new(inperm, permnum)?;
            cmd_estimate(&sketch, &estimator, &predicate, total, sc, seed)
        }
        Command::Bounds {
            sketch,
            method,
            predicate,
            delta,
            total,
            draws,
            seed,
        } => cmd_bounds(&sketch, &method, &predicate, delta, total, draws, seed),
        Command::Simulate {
            config,
            full_scale,
            out,
        } => cmd_simulate(&config, full_scale, &out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bottomk: {e}");
            ExitCode::from(e.code())
        }
    }
}
