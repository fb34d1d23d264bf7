//! Synthetic experiments: estimator error against `k` and group size, and
//! coverage and width of confidence bounds.
//!
//! One weighted set is drawn per configuration; each repetition draws
//! fresh sketches from its own RNG stream, so results do not depend on how
//! repetitions are scheduled across threads.

mod config;
mod run;

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::rank::open_unit;
use crate::sketch::WeightedItem;

pub use config::{Distribution, Experiment, ExperimentConfig, GroupSize, SimBound, SimEstimator};
pub use run::{run_bounds_experiment, run_estimator_experiment, run_experiments};

/// Items `0..n` with i.i.d. weights from `distribution`.
pub fn gen_weighted_set<R: Rng + ?Sized>(distribution: &Distribution, rng: &mut R) -> Vec<WeightedItem> {
    let weight = |rng: &mut R| match *distribution {
        Distribution::Pareto { alpha, .. } => open_unit(rng).powf(-1.0 / alpha),
        Distribution::Uniform { .. } => 1.0 - rng.random::<f64>(),
    };
    (0..distribution.n())
        .map(|i| WeightedItem::new(i.to_string(), weight(rng)))
        .collect()
}

/// Attribute holding an item's group index for group size `g`.
pub fn group_attribute(g: usize) -> String {
    format!("g{g}")
}

/// Sorts items by weight (ties keep input order), cuts them into
/// consecutive groups of `g`, tags each item with its group index and
/// returns one predicate per group.
pub fn group_partition(items: &mut [WeightedItem], g: usize) -> Result<Vec<Predicate>> {
    let n = items.len();
    if g == 0 || n % g != 0 {
        return Err(Error::input(format!("group size {g} does not divide {n} items")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| items[a].weight.total_cmp(&items[b].weight));
    let name = group_attribute(g);
    for (pos, &i) in order.iter().enumerate() {
        items[i].attributes.insert(name.clone(), (pos / g).to_string());
    }
    Ok((0..n / g).map(|j| Predicate::equals(name.clone(), j.to_string())).collect())
}

/// One aggregated value.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub method: String,
    pub k: usize,
    pub g: usize,
    /// `None` for the aggregate over all groups of the partition.
    pub group: Option<usize>,
    pub metric: String,
    pub value: f64,
    /// Number of observations averaged.
    pub count: u64,
}

type Key = (String, usize, usize, Option<usize>, &'static str);

/// Running sums, merged in repetition order.
#[derive(Debug, Default, Clone)]
pub(crate) struct Accumulator {
    sums: BTreeMap<Key, (f64, u64)>,
}

impl Accumulator {
    /// Adds `sum`, the total of `count` observations.
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn add(
        &mut self,
        method: &str,
        k: usize,
        g: usize,
        group: Option<usize>,
        metric: &'static str,
        sum: f64,
        count: u64,
    ) {
        let e = self.sums.entry((method.to_string(), k, g, group, metric)).or_insert((0.0, 0));
        e.0 += sum;
        e.1 += count;
    }

    pub(crate) fn merge(&mut self, other: Accumulator) {
        for (key, (s, c)) in other.sums {
            let e = self.sums.entry(key).or_insert((0.0, 0));
            e.0 += s;
            e.1 += c;
        }
    }

    pub(crate) fn into_table(self) -> MetricsTable {
        let rows = self
            .sums
            .into_iter()
            .map(|((method, k, g, group, metric), (sum, count))| MetricRow {
                method,
                k,
                g,
                group,
                metric: metric.to_string(),
                value: sum / count as f64,
                count,
            })
            .collect();
        MetricsTable { rows }
    }
}

/// Experiment output in long format.
///
/// Metrics (each a mean over repetitions, and over groups for aggregate rows):
///
/// - `sse`: sum over the groups of a partition of the squared error, divided by `W²`
/// - `abs_rel_err`: `|estimate - w(J)| / w(J)`
/// - `sq_err`: per-group squared error divided by `W²`
/// - `lower`, `upper`, `width`: bounds and interval width divided by `w(J)`
/// - `in_bounds`, `lower_violation`, `upper_violation`: rates
/// - `sq_err_lower`, `sq_err_upper`: squared bound error divided by `w(J)²`
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsTable {
    pub rows: Vec<MetricRow>,
}

impl MetricsTable {
    /// Aggregate value for `(method, k, g, metric)`.
    pub fn get(&self, method: &str, k: usize, g: usize, metric: &str) -> Option<f64> {
        self.find(method, k, g, None, metric).map(|r| r.value)
    }

    pub fn find(&self, method: &str, k: usize, g: usize, group: Option<usize>, metric: &str) -> Option<&MetricRow> {
        self.rows
            .iter()
            .find(|r| r.method == method && r.k == k && r.g == g && r.group == group && r.metric == metric)
    }

    pub fn extend(&mut self, other: MetricsTable) {
        self.rows.extend(other.rows);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("# one row per (method, k, g, group, metric); group `all` aggregates over the partition\n");
        out.push_str("# value is a mean over `count` observations\n");
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["method", "k", "g", "group", "metric", "value", "count"])
            .expect("in-memory write");
        for r in &self.rows {
            let group = r.group.map_or_else(|| "all".to_string(), |j| j.to_string());
            let mut value = String::new();
            write!(value, "{}", r.value).expect("in-memory write");
            w.write_record([
                r.method.as_str(),
                &r.k.to_string(),
                &r.g.to_string(),
                &group,
                &r.metric,
                &value,
                &r.count.to_string(),
            ])
            .expect("in-memory write");
        }
        out.push_str(&String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8"));
        out
    }
}
