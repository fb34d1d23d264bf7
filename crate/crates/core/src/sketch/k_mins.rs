use rand::Rng;

use super::{SketchEntry, WeightedItem};
use crate::error::{Error, Result};
use crate::rank::{check_weight, open_unit, RankFamily};

/// Minimum-rank entries of `k` independent exponential rank assignments.
///
/// Equivalent to `k` weighted draws with replacement.
#[derive(Debug, Clone, PartialEq)]
pub struct KMinsSketch {
    k: usize,
    mins: Vec<SketchEntry>,
}

impl KMinsSketch {
    pub fn from_parts(mins: Vec<SketchEntry>) -> Result<Self> {
        if mins.is_empty() {
            return Err(Error::input("k-mins sketch needs at least one entry"));
        }
        for e in &mins {
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::input(format!("entry `{}` has invalid weight {}", e.id, e.weight)));
            }
            if !(e.rank.is_finite() && e.rank >= 0.0) {
                return Err(Error::input(format!("entry `{}` has invalid rank {}", e.id, e.rank)));
            }
        }
        Ok(KMinsSketch { k: mins.len(), mins })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// One entry per rank assignment, in assignment order.
    pub fn mins(&self) -> &[SketchEntry] {
        &self.mins
    }

    pub fn family(&self) -> RankFamily {
        RankFamily::Ws
    }

    /// Mean of the `k` minimum ranks.
    pub fn mean_rank(&self) -> f64 {
        self.mins.iter().map(|e| e.rank).sum::<f64>() / self.k as f64
    }
}

/// Builds a k-mins sketch with exponential ranks.
///
/// The minimum of independent exponentials with rates `w(i)` is exponential
/// with rate `w(I)`, and the minimizer is `i` with probability `w(i)/w(I)`
/// independently of the value; each assignment is drawn that way rather
/// than by ranking every item.
pub fn build_k_mins<R: Rng + ?Sized>(items: &[WeightedItem], k: usize, rng: &mut R) -> Result<KMinsSketch> {
    if k < 1 {
        return Err(Error::input("k must be at least 1"));
    }
    if items.is_empty() {
        return Err(Error::input("cannot sketch an empty item set"));
    }
    let mut cumulative = Vec::with_capacity(items.len());
    let mut acc = 0.0;
    for item in items {
        check_weight(item.weight)
            .map_err(|_| Error::input(format!("item `{}` has invalid weight {}", item.id, item.weight)))?;
        acc += item.weight;
        cumulative.push(acc);
    }
    let total = acc;
    let mins = (0..k)
        .map(|_| {
            let rank = -open_unit(rng).ln() / total;
            let target = open_unit(rng) * total;
            let idx = cumulative.partition_point(|&c| c <= target).min(items.len() - 1);
            SketchEntry::from_item(&items[idx], rank)
        })
        .collect();
    Ok(KMinsSketch { k, mins })
}
