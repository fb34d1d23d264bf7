use rayon::prelude::*;

use super::config::{Experiment, ExperimentConfig, SimBound, SimEstimator};
use super::{gen_weighted_set, group_attribute, group_partition, Accumulator, MetricsTable};
use crate::confidence::{
    pri_bounds_subpop, ws_bounds_subpop, ws_bounds_subpop_with_total, ws_bounds_total, wsr_bounds_total, BoundMethod,
    ConfidenceInterval,
};
use crate::error::{Error, Result};
use crate::estimators::{
    ml_subpop, ml_total_weight, prefix_adjusted_weights, rc_adjusted_weights, sc_adjusted_weights_exact,
    sc_adjusted_weights_markov, wsr_ht_adjusted_weights, wsr_ratio_adjusted_weights, wsr_total_weight, AdjustedWeights,
};
use crate::predicate::Predicate;
use crate::rank::{seeded_rng, RankFamily, SketchRng};
use crate::sketch::{build_bottom_k, build_k_mins, BottomKSketch, KMinsSketch, WeightedItem};
use crate::simulation::config::GroupSize;

struct Partition {
    g: usize,
    predicates: Vec<Predicate>,
    /// group index of item `i` (ids are `0..n`)
    group_of: Vec<usize>,
    truth: Vec<f64>,
}

struct Setup {
    items: Vec<WeightedItem>,
    total: f64,
    partitions: Vec<Partition>,
}

fn prepare(cfg: &ExperimentConfig, sizes: &[GroupSize]) -> Result<Setup> {
    cfg.validate()?;
    let n = cfg.distribution.n();
    let mut items = gen_weighted_set(&cfg.distribution, &mut seeded_rng(cfg.seed, 0));
    let mut partitions = Vec::new();
    for size in sizes {
        let g = size.resolve(n);
        if partitions.iter().any(|p: &Partition| p.g == g) {
            continue;
        }
        let predicates = group_partition(&mut items, g)?;
        let name = group_attribute(g);
        let group_of: Vec<usize> = items
            .iter()
            .map(|it| it.attributes[&name].parse().expect("tagged by group_partition"))
            .collect();
        let mut truth = vec![0.0; n / g];
        for (it, &j) in items.iter().zip(&group_of) {
            truth[j] += it.weight;
        }
        partitions.push(Partition {
            g,
            predicates,
            group_of,
            truth,
        });
    }
    let total = items.iter().map(|i| i.weight).sum();
    Ok(Setup { items, total, partitions })
}

fn item_index(id: &str) -> usize {
    id.parse().expect("simulation ids are item indices")
}

fn group_sums(p: &Partition, aw: &AdjustedWeights<'_>) -> Vec<f64> {
    let mut sums = vec![0.0; p.truth.len()];
    for (e, a) in aw.iter() {
        sums[p.group_of[item_index(&e.id)]] += a;
    }
    sums
}

fn run_reps<F>(cfg: &ExperimentConfig, rep: F) -> Result<MetricsTable>
where
    F: Fn(usize) -> Result<Accumulator> + Sync + Send,
{
    let parts: Vec<Accumulator> = (0..cfg.repetitions).into_par_iter().map(rep).collect::<Result<_>>()?;
    let mut acc = Accumulator::default();
    for p in parts {
        acc.merge(p);
    }
    Ok(acc.into_table())
}

fn rep_rng(cfg: &ExperimentConfig, rep: usize) -> SketchRng {
    seeded_rng(cfg.seed, rep as u64 + 1)
}

/// Squared error summed over groups and relative error per group for each
/// estimator, `k` and group size.
pub fn run_estimator_experiment(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let setup = prepare(cfg, &cfg.group_sizes)?;
    if cfg.estimators.contains(&SimEstimator::Wsr) && cfg.k_values.iter().any(|&k| k < 2) {
        return Err(Error::config("the unbiased wsr estimator needs every k >= 2"));
    }
    let n = setup.items.len();
    let uses = |fam: &[SimEstimator]| cfg.estimators.iter().any(|e| fam.contains(e));
    let need_ws = uses(&[
        SimEstimator::WsMl,
        SimEstimator::WsRc,
        SimEstimator::WsScExact,
        SimEstimator::WsScMarkov,
        SimEstimator::WsPrefix,
    ]);
    let need_pri = uses(&[SimEstimator::PriRc]);
    let need_kmins = uses(&[SimEstimator::WsrHt, SimEstimator::WsrRatio, SimEstimator::Wsr]);

    run_reps(cfg, |rep| {
        let mut rng = rep_rng(cfg, rep);
        let mut acc = Accumulator::default();
        for &k in &cfg.k_values {
            let ws = need_ws.then(|| build_bottom_k(&setup.items, k, RankFamily::Ws, &mut rng)).transpose()?;
            let pri = need_pri.then(|| build_bottom_k(&setup.items, k, RankFamily::Pri, &mut rng)).transpose()?;
            let kmins = need_kmins.then(|| build_k_mins(&setup.items, k, &mut rng)).transpose()?;
            for &est in &cfg.estimators {
                let ws = || ws.as_ref().expect("built");
                let kmins = || kmins.as_ref().expect("built");
                let aw = match est {
                    SimEstimator::WsRc => Some(rc_adjusted_weights(ws())?),
                    SimEstimator::PriRc => Some(rc_adjusted_weights(pri.as_ref().expect("built"))?),
                    SimEstimator::WsScExact => Some(sc_adjusted_weights_exact(ws(), setup.total)?),
                    SimEstimator::WsScMarkov => Some(sc_adjusted_weights_markov(ws(), setup.total, cfg.sc, &mut rng)?),
                    SimEstimator::WsPrefix => Some(prefix_adjusted_weights(ws(), setup.total)?),
                    SimEstimator::WsrHt => Some(wsr_ht_adjusted_weights(kmins(), setup.total)?),
                    SimEstimator::WsrRatio => Some(wsr_ratio_adjusted_weights(kmins(), setup.total)?),
                    SimEstimator::WsMl | SimEstimator::Wsr => None,
                };
                for p in &setup.partitions {
                    let estimates = match (&aw, est) {
                        (Some(aw), _) => group_sums(p, aw),
                        (None, SimEstimator::WsMl) => ml_groups(ws(), p, n)?,
                        (None, SimEstimator::Wsr) if p.g == n => vec![wsr_total_weight(kmins())?.unbiased],
                        // the k-mins total estimator has no subpopulation form
                        (None, _) => continue,
                    };
                    record_estimates(&mut acc, cfg, est.name(), k, p, &estimates, setup.total);
                }
            }
        }
        Ok(acc)
    })
}

fn ml_groups(ws: &BottomKSketch, p: &Partition, n: usize) -> Result<Vec<f64>> {
    if p.g == n {
        return Ok(vec![ml_total_weight(ws)?]);
    }
    // groups absent from the sketch estimate to 0
    let mut out = vec![0.0; p.truth.len()];
    let mut present: Vec<usize> = ws.entries().iter().map(|e| p.group_of[item_index(&e.id)]).collect();
    present.sort_unstable();
    present.dedup();
    for j in present {
        out[j] = ml_subpop(ws, &p.predicates[j])?;
    }
    Ok(out)
}

fn record_estimates(acc: &mut Accumulator, cfg: &ExperimentConfig, method: &str, k: usize, p: &Partition, est: &[f64], total: f64) {
    let w2 = total * total;
    let mut sse = 0.0;
    let mut rel = 0.0;
    let per_group = p.truth.len() <= cfg.group_rows;
    for (j, (&e, &t)) in est.iter().zip(&p.truth).enumerate() {
        let sq = (e - t) * (e - t) / w2;
        let r = (e - t).abs() / t;
        sse += sq;
        rel += r;
        if per_group {
            acc.add(method, k, p.g, Some(j), "sq_err", sq, 1);
            acc.add(method, k, p.g, Some(j), "abs_rel_err", r, 1);
        }
    }
    acc.add(method, k, p.g, None, "sse", sse, 1);
    acc.add(method, k, p.g, None, "abs_rel_err", rel, est.len() as u64);
}

/// Normalized bounds, widths and in-bounds rates for each bound method,
/// `k` and group size.
pub fn run_bounds_experiment(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let setup = prepare(cfg, &cfg.bound_group_sizes)?;
    let n = setup.items.len();
    let need_ws = cfg
        .bounds
        .iter()
        .any(|b| matches!(b, SimBound::WsNormal | SimBound::WsQuantile | SimBound::WsDensity | SimBound::WsW));
    let need_pri = cfg.bounds.contains(&SimBound::Pri);
    let need_kmins = cfg.bounds.contains(&SimBound::Wsr);
    let delta = cfg.delta;

    run_reps(cfg, |rep| {
        let mut rng = rep_rng(cfg, rep);
        let mut acc = Accumulator::default();
        for &k in &cfg.k_values {
            let ws = need_ws.then(|| build_bottom_k(&setup.items, k, RankFamily::Ws, &mut rng)).transpose()?;
            let pri = need_pri.then(|| build_bottom_k(&setup.items, k, RankFamily::Pri, &mut rng)).transpose()?;
            let kmins: Option<KMinsSketch> = need_kmins.then(|| build_k_mins(&setup.items, k, &mut rng)).transpose()?;
            for &bound in &cfg.bounds {
                for p in &setup.partitions {
                    let whole = p.g == n;
                    let ws = || ws.as_ref().expect("built");
                    let mut intervals = Vec::with_capacity(p.predicates.len());
                    for pred in &p.predicates {
                        let ci: ConfidenceInterval = match bound {
                            SimBound::WsNormal | SimBound::WsQuantile | SimBound::WsDensity => {
                                let method = match bound {
                                    SimBound::WsNormal => BoundMethod::Normal,
                                    SimBound::WsQuantile => BoundMethod::Quantile { draws: cfg.draws },
                                    _ => BoundMethod::Density,
                                };
                                if whole {
                                    ws_bounds_total(ws(), delta, method, &mut rng)?
                                } else if method == BoundMethod::Density {
                                    break;
                                } else {
                                    ws_bounds_subpop(ws(), pred, delta, method, &mut rng)?
                                }
                            }
                            SimBound::WsW => ws_bounds_subpop_with_total(ws(), pred, setup.total, delta, cfg.draws, &mut rng)?,
                            SimBound::Pri => pri_bounds_subpop(pri.as_ref().expect("built"), pred, delta)?,
                            SimBound::Wsr if whole => wsr_bounds_total(kmins.as_ref().expect("built"), delta)?,
                            SimBound::Wsr => break,
                        };
                        intervals.push(ci);
                    }
                    if !intervals.is_empty() {
                        record_bounds(&mut acc, cfg, bound.name(), k, p, &intervals);
                    }
                }
            }
        }
        Ok(acc)
    })
}

fn record_bounds(acc: &mut Accumulator, cfg: &ExperimentConfig, method: &str, k: usize, p: &Partition, cis: &[ConfidenceInterval]) {
    let per_group = p.truth.len() <= cfg.group_rows;
    let mut sums = [0.0f64; 8];
    const NAMES: [&str; 8] = [
        "lower",
        "upper",
        "width",
        "in_bounds",
        "lower_violation",
        "upper_violation",
        "sq_err_lower",
        "sq_err_upper",
    ];
    for (j, (ci, &t)) in cis.iter().zip(&p.truth).enumerate() {
        let values = [
            ci.lower / t,
            ci.upper / t,
            ci.width() / t,
            f64::from(u8::from(ci.contains(t))),
            f64::from(u8::from(t < ci.lower)),
            f64::from(u8::from(t > ci.upper)),
            ((ci.lower - t) / t).powi(2),
            ((ci.upper - t) / t).powi(2),
        ];
        for (m, v) in values.iter().enumerate() {
            sums[m] += v;
            if per_group {
                acc.add(method, k, p.g, Some(j), NAMES[m], *v, 1);
            }
        }
    }
    for (m, s) in sums.iter().enumerate() {
        acc.add(method, k, p.g, None, NAMES[m], *s, cis.len() as u64);
    }
}

/// Runs the experiments selected by `cfg.experiment`.
pub fn run_experiments(cfg: &ExperimentConfig) -> Result<MetricsTable> {
    let mut table = MetricsTable::default();
    if matches!(cfg.experiment, Experiment::Estimators | Experiment::Both) {
        table.extend(run_estimator_experiment(cfg)?);
    }
    if matches!(cfg.experiment, Experiment::Bounds | Experiment::Both) {
        table.extend(run_bounds_experiment(cfg)?);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulation::Distribution;

    fn small() -> ExperimentConfig {
        ExperimentConfig {
            distribution: Distribution::Pareto { alpha: 1.2, n: 60 },
            k_values: vec![4, 10],
            group_sizes: vec![GroupSize::Fixed(1), GroupSize::Fixed(20), GroupSize::Whole],
            bound_group_sizes: vec![GroupSize::Fixed(20), GroupSize::Whole],
            repetitions: 20,
            estimators: SimEstimator::ALL.to_vec(),
            bounds: SimBound::ALL.to_vec(),
            draws: 50,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn deterministic_and_complete() {
        let cfg = small();
        let a = run_experiments(&cfg).unwrap();
        let b = run_experiments(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        // exact subset conditioning estimates the whole set without error
        for k in [4, 10] {
            assert!(a.get("ws-sc-exact", k, 60, "sse").unwrap() < 1e-20);
            assert!(a.get("ws-rc", k, 60, "sse").unwrap() > 0.0);
        }
        assert!(a.get("wsr", 4, 20, "sse").is_none());
        assert!(a.get("ws-density", 4, 60, "in_bounds").is_some());
        assert!(a.get("ws-density", 4, 20, "in_bounds").is_none());
        for r in a.rows.iter().filter(|r| r.metric.contains("violation") || r.metric == "in_bounds") {
            assert!((0.0..=1.0).contains(&r.value));
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let cfg = ExperimentConfig {
            estimators: vec![SimEstimator::WsScMarkov, SimEstimator::WsRc],
            bounds: vec![SimBound::WsQuantile],
            ..small()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let a = one.install(|| run_experiments(&cfg)).unwrap();
        let b = run_experiments(&cfg).unwrap();
        assert_eq!(a, b);
    }
}
