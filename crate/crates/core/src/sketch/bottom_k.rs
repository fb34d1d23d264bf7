use std::cmp::Ordering;
use std::collections::HashSet;

use rand::Rng;

use super::{SketchEntry, WeightedItem};
use crate::error::{Error, Result};
use crate::rank::{check_weight, draw_rank, RankFamily, RankValue};

/// The `k` lowest-rank entries of a rank assignment plus the (k+1)-st rank.
#[derive(Debug, Clone, PartialEq)]
pub struct BottomKSketch {
    k: usize,
    entries: Vec<SketchEntry>,
    r_k_plus_1: Option<f64>,
    family: RankFamily,
    total_weight: Option<f64>,
    ground_set_size: Option<u64>,
}

impl BottomKSketch {
    /// Assembles a sketch from its parts, checking every invariant.
    ///
    /// Entries may be given in any order; they are sorted by rank.
    pub fn from_parts(
        k: usize,
        family: RankFamily,
        mut entries: Vec<SketchEntry>,
        r_k_plus_1: Option<f64>,
        total_weight: Option<f64>,
        ground_set_size: Option<u64>,
    ) -> Result<Self> {
        if k < 1 {
            return Err(Error::input("k must be at least 1"));
        }
        let mut seen = HashSet::with_capacity(entries.len());
        for e in &entries {
            if !(e.weight.is_finite() && e.weight > 0.0) {
                return Err(Error::input(format!(
                    "entry `{}` has invalid weight {}",
                    e.id, e.weight
                )));
            }
            if !(e.rank.is_finite() && e.rank >= 0.0) {
                return Err(Error::input(format!("entry `{}` has invalid rank {}", e.id, e.rank)));
            }
            if !seen.insert(e.id.as_str()) {
                return Err(Error::input(format!("duplicate entry id `{}`", e.id)));
            }
        }
        entries.sort_by(cmp_entries);
        match r_k_plus_1 {
            Some(r) => {
                if entries.len() != k {
                    return Err(Error::input(format!(
                        "sketch with a (k+1)-st rank must hold exactly k={k} entries, found {}",
                        entries.len()
                    )));
                }
                if !(r.is_finite() || r == f64::INFINITY) || r.is_nan() {
                    return Err(Error::input(format!("invalid (k+1)-st rank {r}")));
                }
                if let Some(last) = entries.last() {
                    if !(r > last.rank) {
                        return Err(Error::input(format!(
                            "(k+1)-st rank {r} does not exceed the rank of entry `{}`",
                            last.id
                        )));
                    }
                }
            }
            None => {
                if entries.len() > k {
                    return Err(Error::input(format!(
                        "sketch holds {} entries but k={k}",
                        entries.len()
                    )));
                }
            }
        }
        if let Some(w) = total_weight {
            let sum: f64 = entries.iter().map(|e| e.weight).sum();
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::input(format!("invalid total weight {w}")));
            }
            if w < sum * (1.0 - 1e-12) {
                return Err(Error::input(format!(
                    "total weight {w} is below the sketched weight {sum}"
                )));
            }
        }
        if let Some(n) = ground_set_size {
            if (n as usize) < entries.len() || (r_k_plus_1.is_some() && n as usize <= k) {
                return Err(Error::input(format!("ground set size {n} is inconsistent with the entries")));
            }
        }
        Ok(BottomKSketch {
            k,
            entries,
            r_k_plus_1,
            family,
            total_weight,
            ground_set_size,
        })
    }

    /// A sketch of the empty set.
    pub fn empty(k: usize, family: RankFamily) -> Result<Self> {
        Self::from_parts(k, family, Vec::new(), None, None, None)
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Entries in increasing rank order.
    pub fn entries(&self) -> &[SketchEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn r_k_plus_1(&self) -> Option<f64> {
        self.r_k_plus_1
    }

    pub fn family(&self) -> RankFamily {
        self.family
    }

    pub fn total_weight(&self) -> Option<f64> {
        self.total_weight
    }

    pub fn ground_set_size(&self) -> Option<u64> {
        self.ground_set_size
    }

    /// True when the sketch holds the whole set (no (k+1)-st rank).
    pub fn is_exact(&self) -> bool {
        self.r_k_plus_1.is_none()
    }

    /// Largest retained rank, `r_k`.
    pub fn largest_rank(&self) -> Option<f64> {
        self.entries.last().map(|e| e.rank)
    }

    /// `w(s)`, the total weight of the sketched items.
    pub fn sketch_weight(&self) -> f64 {
        self.entries.iter().map(|e| e.weight).sum()
    }

    /// Prefix sums `s_0 = 0, s_1, …, s_k` of entry weights in rank order.
    pub fn prefix_sums(&self) -> Vec<f64> {
        prefix_sums(self.entries.iter().map(|e| e.weight))
    }

    pub fn with_total_weight(mut self, total: f64) -> Result<Self> {
        let sum = self.sketch_weight();
        if !(total.is_finite() && total > 0.0) || total < sum * (1.0 - 1e-12) {
            return Err(Error::input(format!(
                "total weight {total} is below the sketched weight {sum}"
            )));
        }
        self.total_weight = Some(total);
        Ok(self)
    }

    /// Keeps the `k` lowest entries; the first dropped rank becomes `r_{k+1}`.
    pub fn truncate(&self, k: usize) -> Result<Self> {
        if k < 1 {
            return Err(Error::input("k must be at least 1"));
        }
        if k > self.k && !self.is_exact() {
            return Err(Error::input(format!(
                "cannot grow a sketch from k={} to k={k}",
                self.k
            )));
        }
        let mut out = self.clone();
        out.k = k;
        if self.entries.len() > k {
            out.r_k_plus_1 = Some(self.entries[k].rank);
            out.entries.truncate(k);
        }
        Ok(out)
    }
}

pub(crate) fn cmp_entries(a: &SketchEntry, b: &SketchEntry) -> Ordering {
    a.rank_value().cmp(&b.rank_value())
}

pub(crate) fn prefix_sums(weights: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut out = vec![0.0];
    let mut acc = 0.0;
    for w in weights {
        acc += w;
        out.push(acc);
    }
    out
}

fn check_items(items: &[WeightedItem], k: usize) -> Result<()> {
    if k < 1 {
        return Err(Error::input("k must be at least 1"));
    }
    if items.is_empty() {
        return Err(Error::input("cannot sketch an empty item set"));
    }
    let mut seen = HashSet::with_capacity(items.len());
    for item in items {
        check_weight(item.weight)
            .map_err(|_| Error::input(format!("item `{}` has invalid weight {}", item.id, item.weight)))?;
        if !seen.insert(item.id.as_str()) {
            return Err(Error::input(format!("duplicate item id `{}`", item.id)));
        }
    }
    Ok(())
}

/// Builds a bottom-k sketch under a fresh rank assignment.
pub fn build_bottom_k<R: Rng + ?Sized>(
    items: &[WeightedItem],
    k: usize,
    family: RankFamily,
    rng: &mut R,
) -> Result<BottomKSketch> {
    check_items(items, k)?;
    let ranks = items
        .iter()
        .map(|it| draw_rank(it.weight, family, rng))
        .collect::<Result<Vec<_>>>()?;
    select(items, &ranks, k, family)
}

/// Builds a bottom-k sketch from an explicit rank assignment.
///
/// `ranks[i]` is the rank of `items[i]`. Sharing one assignment across
/// builds makes sketches of subsets and unions directly comparable.
pub fn build_bottom_k_with_ranks(
    items: &[WeightedItem],
    ranks: &[f64],
    k: usize,
    family: RankFamily,
) -> Result<BottomKSketch> {
    check_items(items, k)?;
    if ranks.len() != items.len() {
        return Err(Error::input(format!(
            "{} ranks given for {} items",
            ranks.len(),
            items.len()
        )));
    }
    if let Some(i) = ranks.iter().position(|r| !(r.is_finite() && *r >= 0.0)) {
        return Err(Error::input(format!("item `{}` has invalid rank {}", items[i].id, ranks[i])));
    }
    select(items, ranks, k, family)
}

fn select(items: &[WeightedItem], ranks: &[f64], k: usize, family: RankFamily) -> Result<BottomKSketch> {
    let key = |i: usize| RankValue {
        value: ranks[i],
        owner: &items[i].id,
    };
    let mut order: Vec<usize> = (0..items.len()).collect();
    let cmp = |a: &usize, b: &usize| key(*a).cmp(&key(*b));
    if order.len() > k + 1 {
        order.select_nth_unstable_by(k, cmp);
        order.truncate(k + 1);
    }
    order.sort_unstable_by(cmp);
    let r_k_plus_1 = if order.len() > k {
        Some(ranks[order.pop().unwrap()])
    } else {
        None
    };
    let entries = order
        .iter()
        .map(|&i| SketchEntry::from_item(&items[i], ranks[i]))
        .collect();
    let total: f64 = items.iter().map(|i| i.weight).sum();
    Ok(BottomKSketch {
        k,
        entries,
        r_k_plus_1,
        family,
        total_weight: Some(total),
        ground_set_size: Some(items.len() as u64),
    })
}

/// Sketch of the union of two disjoint sets from their sketches.
///
/// The result holds the `k` smallest entries of both; its (k+1)-st rank is
/// the (k+1)-st smallest among the entries and the two input thresholds.
/// The total weight is not carried over.
pub fn merge_sketches(s1: &BottomKSketch, s2: &BottomKSketch, k: usize) -> Result<BottomKSketch> {
    if s1.family != s2.family {
        return Err(Error::input(format!(
            "cannot merge a {} sketch with a {} sketch",
            s1.family, s2.family
        )));
    }
    if k < 1 {
        return Err(Error::input("k must be at least 1"));
    }
    for s in [s1, s2] {
        if !s.is_exact() && k > s.k {
            return Err(Error::input(format!(
                "merged k={k} exceeds the k={} of an input sketch",
                s.k
            )));
        }
    }
    let mut entries: Vec<SketchEntry> = Vec::with_capacity(s1.len() + s2.len());
    entries.extend(s1.entries.iter().cloned());
    let ids: HashSet<&str> = s1.entries.iter().map(|e| e.id.as_str()).collect();
    for e in &s2.entries {
        if ids.contains(e.id.as_str()) {
            return Err(Error::input(format!(
                "item `{}` appears in both sketches; merged sets must be disjoint",
                e.id
            )));
        }
        entries.push(e.clone());
    }
    entries.sort_by(cmp_entries);

    // An input threshold sits after at least k entries of its own sketch,
    // so it can only be the (k+1)-st value or later.
    let mut r_k_plus_1 = entries.get(k).map(|e| e.rank);
    for r in [s1.r_k_plus_1, s2.r_k_plus_1].into_iter().flatten() {
        r_k_plus_1 = Some(r_k_plus_1.map_or(r, |cur| cur.min(r)));
    }
    entries.truncate(k);
    Ok(BottomKSketch {
        k,
        entries,
        r_k_plus_1,
        family: s1.family,
        total_weight: None,
        ground_set_size: None,
    })
}
