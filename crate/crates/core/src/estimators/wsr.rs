//! Estimators for k-mins (weighted sampling with replacement) sketches.

use std::collections::HashMap;

use super::{AdjustedWeights, EstimatorKind};
use crate::error::{Error, Result};
use crate::predicate::Predicate;
use crate::sketch::{KMinsSketch, SketchEntry};

/// Total-weight estimates from the `k` minimum ranks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsrTotalEstimate {
    /// `(k - 1) / Σ r`, unbiased for `w(I)`.
    pub unbiased: f64,
    /// `k / Σ r`, the maximum-likelihood estimate.
    pub ml: f64,
    /// `Σ r / k`, unbiased for `1 / w(I)`.
    pub inverse_weight: f64,
}

/// Total weight from a k-mins sketch. The unbiased form needs `k ≥ 2`.
pub fn wsr_total_weight(sketch: &KMinsSketch) -> Result<WsrTotalEstimate> {
    let k = sketch.k();
    if k < 2 {
        return Err(Error::capability("the unbiased k-mins estimator needs k >= 2"));
    }
    let sum: f64 = sketch.mins().iter().map(|e| e.rank).sum();
    Ok(WsrTotalEstimate {
        unbiased: (k - 1) as f64 / sum,
        ml: k as f64 / sum,
        inverse_weight: sum / k as f64,
    })
}

/// `k / Σ r`, defined for every `k ≥ 1`.
pub fn wsr_total_weight_ml(sketch: &KMinsSketch) -> f64 {
    let sum: f64 = sketch.mins().iter().map(|e| e.rank).sum();
    sketch.k() as f64 / sum
}

/// Subpopulation estimates from a k-mins sketch with known total weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WsrSubpopEstimate {
    /// Horvitz–Thompson over distinct sampled items.
    pub ht: f64,
    /// Fraction of the `k` draws (with multiplicity) that match, times `W`.
    pub ratio: f64,
}

fn check_total(sketch: &KMinsSketch, total: f64) -> Result<()> {
    let max = sketch.mins().iter().map(|e| e.weight).fold(0.0, f64::max);
    if !(total.is_finite() && total > 0.0) || total < max {
        return Err(Error::input(format!(
            "total weight {total} is below the largest sampled weight {max}"
        )));
    }
    Ok(())
}

// distinct entries with their multiplicities, in first-seen order
fn distinct(sketch: &KMinsSketch) -> Vec<(&SketchEntry, usize)> {
    let mut index: HashMap<&str, usize> = HashMap::new();
    let mut out: Vec<(&SketchEntry, usize)> = Vec::new();
    for e in sketch.mins() {
        match index.get(e.id.as_str()) {
            Some(&i) => out[i].1 += 1,
            None => {
                index.insert(&e.id, out.len());
                out.push((e, 1));
            }
        }
    }
    out
}

/// HT adjusted weights `w / (1 - (1 - w/W)^k)` on the distinct sampled items.
pub fn wsr_ht_adjusted_weights(sketch: &KMinsSketch, total: f64) -> Result<AdjustedWeights<'_>> {
    check_total(sketch, total)?;
    let k = sketch.k() as f64;
    let items = distinct(sketch)
        .into_iter()
        .map(|(e, _)| {
            let p = -((-e.weight / total).ln_1p() * k).exp_m1();
            (e, e.weight / p)
        })
        .collect();
    Ok(AdjustedWeights::new(EstimatorKind::WsrHt, items))
}

/// Ratio adjusted weights: `multiplicity · W / k` per distinct sampled item.
pub fn wsr_ratio_adjusted_weights(sketch: &KMinsSketch, total: f64) -> Result<AdjustedWeights<'_>> {
    check_total(sketch, total)?;
    let k = sketch.k() as f64;
    let items = distinct(sketch)
        .into_iter()
        .map(|(e, m)| (e, m as f64 * total / k))
        .collect();
    Ok(AdjustedWeights::new(EstimatorKind::WsrRatio, items))
}

pub fn wsr_subpop_with_total(sketch: &KMinsSketch, predicate: &Predicate, total: f64) -> Result<WsrSubpopEstimate> {
    Ok(WsrSubpopEstimate {
        ht: wsr_ht_adjusted_weights(sketch, total)?.estimate_subpop(predicate)?,
        ratio: wsr_ratio_adjusted_weights(sketch, total)?.estimate_subpop(predicate)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sketch::Attributes;

    fn kmins(entries: &[(&str, f64, f64)]) -> KMinsSketch {
        KMinsSketch::from_parts(
            entries
                .iter()
                .map(|&(id, weight, rank)| SketchEntry {
                    id: id.into(),
                    weight,
                    rank,
                    attributes: Attributes::from([("g".to_string(), id.to_string())]),
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn plug_in_values() {
        // all ranks 1/w with w = 4, k = 5
        let s = kmins(&[("a", 4.0, 0.25); 5]);
        let t = wsr_total_weight(&s).unwrap();
        assert!((t.unbiased - 4.0 * 4.0 / 5.0).abs() < 1e-12);
        assert!((t.ml - 4.0).abs() < 1e-12);
        assert!((t.inverse_weight - 0.25).abs() < 1e-12);
    }

    #[test]
    fn k_one_has_no_unbiased_form() {
        let s = kmins(&[("a", 1.0, 0.5)]);
        assert!(matches!(wsr_total_weight(&s), Err(Error::Capability(_))));
        assert_eq!(wsr_total_weight_ml(&s), 2.0);
    }

    #[test]
    fn ratio_match_all_is_total() {
        let s = kmins(&[("a", 1.0, 0.1), ("b", 2.0, 0.2), ("a", 1.0, 0.3)]);
        let e = wsr_subpop_with_total(&s, &Predicate::True, 10.0).unwrap();
        assert!((e.ratio - 10.0).abs() < 1e-12);
        let none = wsr_subpop_with_total(&s, &Predicate::equals("g", "zzz"), 10.0).unwrap();
        assert_eq!((none.ht, none.ratio), (0.0, 0.0));
        let ht = wsr_ht_adjusted_weights(&s, 10.0).unwrap();
        assert_eq!(ht.len(), 2);
        let want = 1.0 / (1.0 - 0.9f64.powi(3));
        assert!((ht.get("a").unwrap() - want).abs() < 1e-12);
    }

    #[test]
    fn total_below_sampled_weight_rejected() {
        let s = kmins(&[("a", 5.0, 0.1)]);
        assert!(matches!(wsr_ht_adjusted_weights(&s, 4.0), Err(Error::Input(_))));
    }
}
