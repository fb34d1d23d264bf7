//! Bottom-k and k-mins sketches.

mod bottom_k;
mod io;
mod k_mins;
mod stream;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::rank::RankValue;

pub use bottom_k::{build_bottom_k, build_bottom_k_with_ranks, merge_sketches, BottomKSketch};
pub use io::{deserialize_sketch, read_items_csv, serialize_sketch, Sketch, FORMAT_NAME, FORMAT_VERSION};
pub use k_mins::{build_k_mins, KMinsSketch};
pub use stream::{build_bottom_k_stream, StreamSketcher};

/// Flat attribute map used by predicates.
pub type Attributes = BTreeMap<String, String>;

/// A record of the summarized set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedItem {
    pub id: String,
    pub weight: f64,
    #[serde(default)]
    pub attributes: Attributes,
}

impl WeightedItem {
    pub fn new(id: impl Into<String>, weight: f64) -> Self {
        WeightedItem {
            id: id.into(),
            weight,
            attributes: Attributes::new(),
        }
    }

    pub fn with_attribute(mut self, name: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(name.into(), value.into());
        self
    }
}

/// An item retained in a sketch together with its rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchEntry {
    pub id: String,
    pub weight: f64,
    pub rank: f64,
    #[serde(default)]
    pub attributes: Attributes,
}

impl SketchEntry {
    pub(crate) fn from_item(item: &WeightedItem, rank: f64) -> Self {
        SketchEntry {
            id: item.id.clone(),
            weight: item.weight,
            rank,
            attributes: item.attributes.clone(),
        }
    }

    pub fn rank_value(&self) -> RankValue<'_> {
        RankValue {
            value: self.rank,
            owner: &self.id,
        }
    }
}
