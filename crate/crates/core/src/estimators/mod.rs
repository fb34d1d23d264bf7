//! Adjusted weights and point estimates of total and subpopulation weight.
//!
//! An adjusted-weight assignment gives each sketched item a value whose
//! expectation over sketches is the item's weight (items outside the sketch
//! get zero). Summing adjusted weights over the items matching a predicate
//! estimates the subpopulation weight.

mod ml;
mod prefix;
mod rc;
mod subset;
mod wsr;

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::sketch::{BottomKSketch, SketchEntry};

pub(crate) use ml::masked_prefix;
pub use ml::{ml_subpop, ml_subpop_with_total, ml_total_weight, ml_total_weight_redraw};
pub use prefix::prefix_adjusted_weights;
pub(crate) use subset::ln_prod_inclusion;
pub use rc::rc_adjusted_weights;
pub use subset::{
    f_subset_prob, f_subset_prob_inclusion_exclusion, f_subset_prob_quadrature, sc_adjusted_weights_exact,
    sc_adjusted_weights_markov, ScParams, EXACT_SUBSET_LIMIT,
};
pub use wsr::{
    wsr_ht_adjusted_weights, wsr_ratio_adjusted_weights, wsr_subpop_with_total, wsr_total_weight, wsr_total_weight_ml,
    WsrSubpopEstimate, WsrTotalEstimate,
};

/// Which estimator produced an assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EstimatorKind {
    WsRc,
    PriRc,
    WsScExact,
    WsScMarkov,
    WsPrefix,
    WsrHt,
    WsrRatio,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 7] = [
        EstimatorKind::WsRc,
        EstimatorKind::PriRc,
        EstimatorKind::WsScExact,
        EstimatorKind::WsScMarkov,
        EstimatorKind::WsPrefix,
        EstimatorKind::WsrHt,
        EstimatorKind::WsrRatio,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::WsRc => "ws-rc",
            EstimatorKind::PriRc => "pri-rc",
            EstimatorKind::WsScExact => "ws-sc-exact",
            EstimatorKind::WsScMarkov => "ws-sc-markov",
            EstimatorKind::WsPrefix => "ws-prefix",
            EstimatorKind::WsrHt => "wsr-ht",
            EstimatorKind::WsrRatio => "wsr-ratio",
        }
    }

    /// Whether the estimator needs the total weight of the set.
    pub fn uses_total_weight(self) -> bool {
        !matches!(self, EstimatorKind::WsRc | EstimatorKind::PriRc)
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = EstimatorKind::ALL.iter().map(|k| k.name()).collect();
                Error::input(format!("unknown estimator `{s}` (valid: {})", names.join(", ")))
            })
    }
}

/// Adjusted weights for the items of one sketch.
#[derive(Debug, Clone)]
pub struct AdjustedWeights<'a> {
    kind: EstimatorKind,
    items: Vec<(&'a SketchEntry, f64)>,
}

impl<'a> AdjustedWeights<'a> {
    pub(crate) fn new(kind: EstimatorKind, items: Vec<(&'a SketchEntry, f64)>) -> Self {
        AdjustedWeights { kind, items }
    }

    pub(crate) fn from_entries(kind: EstimatorKind, entries: &'a [SketchEntry], weights: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), weights.len());
        AdjustedWeights {
            kind,
            items: entries.iter().zip(weights).collect(),
        }
    }

    pub fn kind(&self) -> EstimatorKind {
        self.kind
    }

    pub fn uses_total_weight(&self) -> bool {
        self.kind.uses_total_weight()
    }

    /// `(entry, adjusted weight)` pairs, one per distinct sketched item.
    pub fn iter(&self) -> impl Iterator<Item = (&'a SketchEntry, f64)> + '_ {
        self.items.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<f64> {
        self.items.iter().find(|(e, _)| e.id == id).map(|(_, a)| *a)
    }

    /// Adjusted weights in sketch order.
    pub fn values(&self) -> Vec<f64> {
        self.items.iter().map(|(_, a)| *a).collect()
    }

    /// Sum of all adjusted weights.
    pub fn total(&self) -> f64 {
        self.items.iter().map(|(_, a)| a).sum()
    }

    /// Sum of adjusted weights over items satisfying `predicate`.
    pub fn estimate_subpop(&self, predicate: &Predicate) -> Result<f64> {
        let mut sum = 0.0;
        for (e, a) in &self.items {
            if predicate.eval(&e.id, &e.attributes)? {
                sum += a;
            }
        }
        Ok(sum)
    }

    /// Sum of adjusted weights over items accepted by `keep`.
    pub fn estimate_where<F: FnMut(&SketchEntry) -> bool>(&self, mut keep: F) -> f64 {
        self.items.iter().filter(|(e, _)| keep(e)).map(|(_, a)| a).sum()
    }

    /// Estimate of `Σ h(i)` over matching items, as `Σ h(i) a(i) / w(i)`.
    pub fn estimate_value<H: FnMut(&SketchEntry) -> f64>(&self, predicate: &Predicate, mut h: H) -> Result<f64> {
        let mut sum = 0.0;
        for (e, a) in &self.items {
            if predicate.eval(&e.id, &e.attributes)? {
                sum += h(e) * a / e.weight;
            }
        }
        Ok(sum)
    }
}

/// Which sketch entries satisfy the predicate, in sketch order.
pub(crate) fn match_mask(entries: &[SketchEntry], predicate: &Predicate) -> Result<Vec<bool>> {
    entries.iter().map(|e| predicate.eval(&e.id, &e.attributes)).collect()
}

pub(crate) fn require_ws(sketch: &BottomKSketch, what: &str) -> Result<()> {
    if sketch.family() == crate::rank::RankFamily::Ws {
        Ok(())
    } else {
        Err(Error::capability(format!(
            "{what} is defined for ws sketches, not {}",
            sketch.family()
        )))
    }
}

/// Validates a total weight against a sketch. Returns `W - w(s)`.
pub(crate) fn unseen_weight(sketch: &BottomKSketch, total: f64) -> Result<f64> {
    let ws = sketch.sketch_weight();
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::input(format!("total weight must be positive, got {total}")));
    }
    let slack = 1e-12 * ws.max(total);
    if total < ws - slack {
        return Err(Error::input(format!(
            "total weight {total} is below the sketched weight {ws}"
        )));
    }
    let unseen = (total - ws).max(0.0);
    if sketch.is_exact() && unseen > 1e-9 * total {
        return Err(Error::input(format!(
            "the sketch holds the whole set (weight {ws}) but the total weight is {total}"
        )));
    }
    Ok(if unseen <= slack { 0.0 } else { unseen })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_names_round_trip() {
        for k in EstimatorKind::ALL {
            assert_eq!(k.name().parse::<EstimatorKind>().unwrap(), k);
        }
        let err = "nope".parse::<EstimatorKind>().unwrap_err();
        assert!(err.to_string().contains("ws-rc"));
    }
}
