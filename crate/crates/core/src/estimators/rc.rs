use super::{AdjustedWeights, EstimatorKind};
use crate::error::{Error, Result};
use crate::rank::RankFamily;
use crate::sketch::BottomKSketch;

/// WS rank-conditioning adjusted weight `w / (1 - e^{-w r})`.
#[inline]
pub(crate) fn ws_rc(weight: f64, r: f64) -> f64 {
    if r.is_infinite() {
        weight
    } else {
        weight / -(-weight * r).exp_m1()
    }
}

/// Rank-conditioning adjusted weights.
///
/// Conditioned on the k-th smallest rank among the other items, which is
/// `r_{k+1}` for every sketched item, the inclusion probability of `i` is
/// `F_{w(i)}(r_{k+1})`. WS: `w / (1 - e^{-w r_{k+1}})`; PRI:
/// `max(w, 1/r_{k+1})`.
pub fn rc_adjusted_weights(sketch: &BottomKSketch) -> Result<AdjustedWeights<'_>> {
    let kind = match sketch.family() {
        RankFamily::Ws => EstimatorKind::WsRc,
        RankFamily::Pri => EstimatorKind::PriRc,
        RankFamily::Uniform => {
            return Err(Error::capability(
                "rank conditioning is defined for ws and pri sketches, not uniform",
            ))
        }
    };
    let entries = sketch.entries();
    let weights = match sketch.r_k_plus_1() {
        None => entries.iter().map(|e| e.weight).collect(),
        Some(r) => match kind {
            EstimatorKind::WsRc => entries.iter().map(|e| ws_rc(e.weight, r)).collect(),
            _ => entries.iter().map(|e| e.weight.max(1.0 / r)).collect(),
        },
    };
    Ok(AdjustedWeights::from_entries(kind, entries, weights))
}
