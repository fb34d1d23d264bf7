use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rand::Rng;

use super::{BottomKSketch, SketchEntry, WeightedItem};
use crate::error::{Error, Result};
use crate::rank::{check_weight, open_unit, RankFamily};

// Max-heap element: the largest retained rank sits on top.
struct Slot(SketchEntry);

impl PartialEq for Slot {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Slot {}

impl PartialOrd for Slot {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Slot {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_value().cmp(&other.0.rank_value())
    }
}

/// Single-pass bottom-k builder.
///
/// Keeps the `k + 1` smallest ranks seen so far in a max-heap. For
/// exponential ranks, once the heap is full the builder does not draw a
/// rank for every item: it draws how much weight passes before the next
/// item beats the current maximum, `P(skip <= x) = 1 - exp(-x r_max)`, and
/// only draws ranks for items that cross that point.
pub struct StreamSketcher<R> {
    k: usize,
    family: RankFamily,
    rng: R,
    heap: BinaryHeap<Slot>,
    // weight still to pass before the next acceptance
    skip: Option<f64>,
    total: f64,
    count: u64,
}

impl<R: Rng> StreamSketcher<R> {
    pub fn new(k: usize, family: RankFamily, rng: R) -> Result<Self> {
        if k < 1 {
            return Err(Error::input("k must be at least 1"));
        }
        Ok(StreamSketcher {
            k,
            family,
            rng,
            heap: BinaryHeap::with_capacity(k + 2),
            skip: None,
            total: 0.0,
            count: 0,
        })
    }

    pub fn push(&mut self, item: WeightedItem) -> Result<()> {
        check_weight(item.weight)
            .map_err(|_| Error::input(format!("item `{}` has invalid weight {}", item.id, item.weight)))?;
        self.total += item.weight;
        self.count += 1;

        if self.heap.len() <= self.k {
            let rank = self.family.rank_from_uniform(item.weight, open_unit(&mut self.rng));
            self.insert(item, rank);
            return Ok(());
        }

        let r_max = self.heap.peek().expect("heap is full").0.rank;
        match self.family {
            RankFamily::Ws => {
                let remaining = match self.skip {
                    Some(x) => x,
                    None => -open_unit(&mut self.rng).ln() / r_max,
                };
                if remaining > item.weight {
                    self.skip = Some(remaining - item.weight);
                } else {
                    // the item's rank is below r_max; its value is the truncated draw
                    let rank = self.family.draw_below(item.weight, r_max, &mut self.rng);
                    self.insert(item, rank);
                    self.skip = None;
                }
            }
            RankFamily::Pri | RankFamily::Uniform => {
                let rank = self.family.rank_from_uniform(item.weight, open_unit(&mut self.rng));
                let top = &self.heap.peek().expect("heap is full").0;
                let beats = crate::rank::RankValue {
                    value: rank,
                    owner: &item.id,
                } < top.rank_value();
                if beats {
                    self.insert(item, rank);
                }
            }
        }
        Ok(())
    }

    fn insert(&mut self, item: WeightedItem, rank: f64) {
        self.heap.push(Slot(SketchEntry {
            id: item.id,
            weight: item.weight,
            rank,
            attributes: item.attributes,
        }));
        if self.heap.len() > self.k + 1 {
            self.heap.pop();
        }
    }

    pub fn finish(self) -> Result<BottomKSketch> {
        let mut entries: Vec<SketchEntry> = self.heap.into_sorted_vec().into_iter().map(|s| s.0).collect();
        let r_k_plus_1 = if entries.len() > self.k {
            entries.pop().map(|e| e.rank)
        } else {
            None
        };
        let total = (self.count > 0).then_some(self.total);
        BottomKSketch::from_parts(self.k, self.family, entries, r_k_plus_1, total, Some(self.count))
    }
}

/// Builds a bottom-k sketch in one pass over `items`.
pub fn build_bottom_k_stream<R, I>(items: I, k: usize, family: RankFamily, rng: R) -> Result<BottomKSketch>
where
    R: Rng,
    I: IntoIterator<Item = WeightedItem>,
{
    let mut sketcher = StreamSketcher::new(k, family, rng)?;
    for item in items {
        sketcher.push(item)?;
    }
    sketcher.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::seeded_rng;

    #[test]
    fn single_item_stream() {
        let s = build_bottom_k_stream(
            vec![WeightedItem::new("only", 2.5)],
            3,
            RankFamily::Ws,
            seeded_rng(1, 0),
        )
        .unwrap();
        assert_eq!(s.len(), 1);
        assert!(s.r_k_plus_1().is_none());
        assert_eq!(s.total_weight(), Some(2.5));
    }

    #[test]
    fn stream_invariants_hold() {
        for family in [RankFamily::Ws, RankFamily::Pri] {
            let items = (0..500).map(|i| WeightedItem::new(i.to_string(), 1.0 + (i % 7) as f64));
            let s = build_bottom_k_stream(items, 10, family, seeded_rng(3, 0)).unwrap();
            assert_eq!(s.len(), 10);
            assert!(s.r_k_plus_1().unwrap() > s.largest_rank().unwrap());
            assert_eq!(s.ground_set_size(), Some(500));
        }
    }

    #[test]
    fn k_zero_rejected() {
        assert!(StreamSketcher::new(0, RankFamily::Ws, seeded_rng(1, 0)).is_err());
    }
}
