//! Bottom-k sketches for weighted sets.
//!
//! Build a sketch once, then answer subpopulation-weight queries with
//! adjusted-weight estimators and confidence bounds:
//!
//! ```
//! use bottomk::{build_bottom_k, estimators, seeded_rng, Predicate, RankFamily, WeightedItem};
//!
//! let items: Vec<_> = (0..100)
//!     .map(|i| WeightedItem::new(i.to_string(), 1.0 + i as f64).with_attribute("odd", (i % 2).to_string()))
//!     .collect();
//! let mut rng = seeded_rng(7, 0);
//! let sketch = build_bottom_k(&items, 16, RankFamily::Ws, &mut rng).unwrap();
//! let rc = estimators::rc_adjusted_weights(&sketch).unwrap();
//! let odd = rc.estimate_subpop(&Predicate::equals("odd", "1")).unwrap();
//! assert!(odd > 0.0);
//! ```

pub mod confidence;
pub mod error;
pub mod estimators;
pub mod numeric;
pub mod predicate;
pub mod rank;
pub mod simulation;
pub mod sketch;

pub use confidence::{BoundMethod, ConfidenceInterval};
pub use error::{Error, Result};
pub use estimators::{AdjustedWeights, EstimatorKind, ScParams};
pub use predicate::Predicate;
pub use rank::{draw_rank, rank_cdf, redraw_sketch_ranks, seeded_rng, RankFamily, RankValue, SketchRng};
pub use sketch::{
    build_bottom_k, build_bottom_k_stream, build_bottom_k_with_ranks, build_k_mins, deserialize_sketch,
    merge_sketches, read_items_csv, serialize_sketch, Attributes, BottomKSketch, KMinsSketch, Sketch,
    SketchEntry, StreamSketcher, WeightedItem,
};
