//! Sketch documents and item CSV input.
//!
//! Sketches are stored as versioned JSON. Floats are written in shortest
//! round-trip decimal form, so a read-back sketch is bit-identical.

use std::collections::HashSet;
use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{Attributes, BottomKSketch, KMinsSketch, SketchEntry, WeightedItem};
use crate::error::{Error, Result};
use crate::rank::RankFamily;

pub const FORMAT_NAME: &str = "bottomk-sketch";
pub const FORMAT_VERSION: u32 = 1;

/// Either kind of sketch, as stored in a document.
#[derive(Debug, Clone, PartialEq)]
pub enum Sketch {
    BottomK(BottomKSketch),
    KMins(KMinsSketch),
}

#[derive(Serialize, Deserialize)]
struct Document {
    format: String,
    version: u32,
    #[serde(flatten)]
    body: Body,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind")]
enum Body {
    #[serde(rename = "bottom-k")]
    BottomK {
        family: RankFamily,
        k: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        r_k_plus_1: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        total_weight: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        ground_set_size: Option<u64>,
        entries: Vec<SketchEntry>,
    },
    #[serde(rename = "k-mins")]
    KMins { family: RankFamily, k: usize, mins: Vec<SketchEntry> },
}

/// Writes a sketch as a pretty-printed JSON document.
pub fn serialize_sketch(sketch: &Sketch) -> String {
    let body = match sketch {
        Sketch::BottomK(s) => Body::BottomK {
            family: s.family(),
            k: s.k(),
            r_k_plus_1: s.r_k_plus_1(),
            total_weight: s.total_weight(),
            ground_set_size: s.ground_set_size(),
            entries: s.entries().to_vec(),
        },
        Sketch::KMins(s) => Body::KMins {
            family: RankFamily::Ws,
            k: s.k(),
            mins: s.mins().to_vec(),
        },
    };
    let doc = Document {
        format: FORMAT_NAME.to_string(),
        version: FORMAT_VERSION,
        body,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("sketch documents always serialize");
    out.push('\n');
    out
}

/// Reads a sketch document, validating every entry.
pub fn deserialize_sketch(text: &str) -> Result<Sketch> {
    let doc: Document = serde_json::from_str(text).map_err(|e| {
        Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string())
    })?;
    if doc.format != FORMAT_NAME {
        return Err(Error::parse("format", format!("expected `{FORMAT_NAME}`, found `{}`", doc.format)));
    }
    if doc.version != FORMAT_VERSION {
        return Err(Error::parse(
            "version",
            format!("unsupported version {} (this build reads {FORMAT_VERSION})", doc.version),
        ));
    }
    match doc.body {
        Body::BottomK {
            family,
            k,
            r_k_plus_1,
            total_weight,
            ground_set_size,
            entries,
        } => {
            check_entries(&entries, "entries", true)?;
            let s = BottomKSketch::from_parts(k, family, entries, r_k_plus_1, total_weight, ground_set_size)
                .map_err(|e| Error::parse("sketch", strip(e)))?;
            Ok(Sketch::BottomK(s))
        }
        Body::KMins { family, k, mins } => {
            if family != RankFamily::Ws {
                return Err(Error::parse("family", "k-mins sketches use exponential ranks"));
            }
            check_entries(&mins, "mins", false)?;
            if mins.len() != k {
                return Err(Error::parse("mins", format!("k={k} but {} entries", mins.len())));
            }
            let s = KMinsSketch::from_parts(mins).map_err(|e| Error::parse("mins", strip(e)))?;
            Ok(Sketch::KMins(s))
        }
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Input(m) => m,
        other => other.to_string(),
    }
}

fn check_entries(entries: &[SketchEntry], field: &str, unique: bool) -> Result<()> {
    let mut seen = HashSet::new();
    for (i, e) in entries.iter().enumerate() {
        let at = || format!("{field}[{i}] (id `{}`)", e.id);
        if !(e.weight.is_finite() && e.weight > 0.0) {
            return Err(Error::parse(at(), format!("weight must be positive, found {}", e.weight)));
        }
        if !(e.rank.is_finite() && e.rank >= 0.0) {
            return Err(Error::parse(at(), format!("rank must be nonnegative, found {}", e.rank)));
        }
        if unique && !seen.insert(e.id.as_str()) {
            return Err(Error::parse(at(), "duplicate id"));
        }
    }
    Ok(())
}

/// Reads items from CSV with header `id,weight,attr:<name>...`.
///
/// `source` names the input in error locations (`source:line`).
pub fn read_items_csv<R: Read>(reader: R, source: &str) -> Result<Vec<WeightedItem>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::parse(format!("{source}:1"), e.to_string()))?
        .clone();
    let mut id_col = None;
    let mut weight_col = None;
    let mut attr_cols = Vec::new();
    for (i, h) in headers.iter().enumerate() {
        match h {
            "id" => id_col = Some(i),
            "weight" => weight_col = Some(i),
            other => match other.strip_prefix("attr:") {
                Some(name) if !name.is_empty() => attr_cols.push((i, name.to_string())),
                _ => {
                    return Err(Error::parse(
                        format!("{source}:1"),
                        format!("unexpected column `{other}` (expected id, weight, attr:<name>)"),
                    ))
                }
            },
        }
    }
    let (id_col, weight_col) = match (id_col, weight_col) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            return Err(Error::parse(
                format!("{source}:1"),
                "header must contain `id` and `weight` columns",
            ))
        }
    };

    let mut items = Vec::new();
    let mut seen = HashSet::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            Error::parse(format!("{source}:{line}"), e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let at = || format!("{source}:{line}");
        let id = record.get(id_col).unwrap_or("").to_string();
        if id.is_empty() {
            return Err(Error::parse(at(), "empty id"));
        }
        let raw = record.get(weight_col).unwrap_or("");
        let weight: f64 = raw
            .parse()
            .map_err(|_| Error::parse(at(), format!("invalid weight `{raw}` for item `{id}`")))?;
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::parse(at(), format!("weight of item `{id}` must be positive, found {raw}")));
        }
        if !seen.insert(id.clone()) {
            return Err(Error::parse(at(), format!("duplicate id `{id}`")));
        }
        let mut attributes = Attributes::new();
        for (col, name) in &attr_cols {
            if let Some(v) = record.get(*col) {
                if !v.is_empty() {
                    attributes.insert(name.clone(), v.to_string());
                }
            }
        }
        items.push(WeightedItem { id, weight, attributes });
    }
    Ok(items)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rank::seeded_rng;
    use crate::sketch::{build_bottom_k, build_k_mins};

    fn sample() -> Vec<WeightedItem> {
        (0..20)
            .map(|i| WeightedItem::new(format!("n{i}"), 0.1 + i as f64 / 3.0).with_attribute("parity", (i % 2).to_string()))
            .collect()
    }

    #[test]
    fn bottom_k_round_trip() {
        let mut rng = seeded_rng(9, 0);
        for k in [3, 40] {
            let s = Sketch::BottomK(build_bottom_k(&sample(), k, RankFamily::Ws, &mut rng).unwrap());
            let back = deserialize_sketch(&serialize_sketch(&s)).unwrap();
            assert_eq!(back, s);
        }
    }

    #[test]
    fn k_mins_round_trip() {
        let mut rng = seeded_rng(9, 1);
        let s = Sketch::KMins(build_k_mins(&sample(), 5, &mut rng).unwrap());
        assert_eq!(deserialize_sketch(&serialize_sketch(&s)).unwrap(), s);
    }

    #[test]
    fn missing_threshold_means_exact() {
        let doc = r#"{"format":"bottomk-sketch","version":1,"kind":"bottom-k","family":"ws","k":2,
            "entries":[{"id":"a","weight":1.0,"rank":0.2}]}"#;
        match deserialize_sketch(doc).unwrap() {
            Sketch::BottomK(s) => assert!(s.r_k_plus_1().is_none()),
            _ => panic!("wrong kind"),
        }
    }

    #[test]
    fn negative_weight_names_entry() {
        let doc = r#"{"format":"bottomk-sketch","version":1,"kind":"bottom-k","family":"ws","k":2,
            "entries":[{"id":"a","weight":1.0,"rank":0.2},{"id":"b","weight":-1,"rank":0.3}]}"#;
        let err = deserialize_sketch(doc).unwrap_err();
        assert!(matches!(&err, Error::Parse { location, .. } if location.contains("`b`")), "{err}");
    }

    #[test]
    fn syntax_error_has_line() {
        let err = deserialize_sketch("{\n  \"format\": ").unwrap_err();
        assert!(matches!(&err, Error::Parse { location, .. } if location.starts_with("line 2")), "{err}");
    }

    #[test]
    fn csv_reads_attributes() {
        let text = "id,weight,attr:region\na,1.5,us\nb,2,eu\n";
        let items = read_items_csv(text.as_bytes(), "t.csv").unwrap();
        assert_eq!(items.len(), 2);
        assert_eq!(items[1].weight, 2.0);
        assert_eq!(items[0].attributes["region"], "us");
    }

    #[test]
    fn csv_bad_weight_names_row() {
        let text = "id,weight\na,1\nb,abc\n";
        let err = read_items_csv(text.as_bytes(), "t.csv").unwrap_err();
        assert!(matches!(&err, Error::Parse { location, .. } if location == "t.csv:3"), "{err}");
    }
}
