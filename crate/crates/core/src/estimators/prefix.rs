use super::{require_ws, unseen_weight, AdjustedWeights, EstimatorKind};
use crate::error::Result;
use crate::sketch::BottomKSketch;

/// Prefix-conditioning adjusted weights.
///
/// For `i` in the sketch, condition on the ordered sequence `i_1..i_{k-1}`
/// of the other sketched items. With `S_m` the prefix sums of that
/// sequence, the probability of `i` landing at position `j` is
///
/// ```text
/// ∏_{m<j} w(i_m)/(W - S_{m-1}) · w(i)/(W - S_{j-1}) · ∏_{m≥j} w(i_m)/(W - S_{m-1} - w(i))
/// ```
///
/// and of `i` missing the sketch is
/// `∏_m w(i_m)/(W - S_{m-1}) · (W - w(i) - S_{k-1})/(W - S_{k-1})`.
/// The adjusted weight is `w(i)` over the normalized inclusion probability.
pub fn prefix_adjusted_weights(sketch: &BottomKSketch, total: f64) -> Result<AdjustedWeights<'_>> {
    require_ws(sketch, "prefix conditioning")?;
    let ell = unseen_weight(sketch, total)?;
    let entries = sketch.entries();
    let weights: Vec<f64> = entries.iter().map(|e| e.weight).collect();
    if ell == 0.0 || weights.len() < sketch.k() {
        return Ok(AdjustedWeights::from_entries(EstimatorKind::WsPrefix, entries, weights));
    }
    let k = weights.len();
    let mut others = Vec::with_capacity(k);
    let mut adjusted = Vec::with_capacity(k);
    for (i, &w) in weights.iter().enumerate() {
        // prefix sums S_0..S_{k-1} of the other items in rank order
        others.clear();
        let mut acc = 0.0;
        others.push(0.0);
        for (j, &v) in weights.iter().enumerate() {
            if j != i {
                acc += v;
                others.push(acc);
            }
        }
        let p = inclusion_given_prefix(&others, w, total);
        adjusted.push(w / p);
    }
    Ok(AdjustedWeights::from_entries(EstimatorKind::WsPrefix, entries, adjusted))
}

/// `P(i ∈ s | prefix)` given prefix sums `S_0..S_{k-1}` of the other items.
///
/// Common factors `∏ w(i_m) / (W - S_{m-1})` are divided out and the
/// remaining position terms combined in log space.
pub(crate) fn inclusion_given_prefix(prefix: &[f64], w: f64, total: f64) -> f64 {
    let k = prefix.len();
    // position j (1-based) term relative to the common factor:
    //   w/(W - S_{j-1}) · ∏_{m=j}^{k-1} (W - S_{m-1}) / (W - S_{m-1} - w)
    let mut log_terms = Vec::with_capacity(k);
    let mut suffix = 0.0;
    for j in (1..=k).rev() {
        if j < k {
            let free = total - prefix[j - 1];
            suffix += free.ln() - (free - w).ln();
        }
        log_terms.push(w.ln() - (total - prefix[j - 1]).ln() + suffix);
    }
    let missing = total - w - prefix[k - 1];
    let hi = log_terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let inside: f64 = log_terms.iter().map(|t| (t - hi).exp()).sum();
    if missing <= 0.0 {
        return 1.0;
    }
    let out = (missing.ln() - (total - prefix[k - 1]).ln() - hi).exp();
    inside / (inside + out)
}
