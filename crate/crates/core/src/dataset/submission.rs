//! Detection-results JSON: a flat array of
//! `{"image_id", "category_id", "bbox": [x, y, w, h], "score"}` entries.
//! Ground truth uses the same shape without `score`.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

use super::{Annotation, Dataset, Detection, DistressClass, ImageRecord};
use crate::error::{Error, Result};
use crate::geometry::BBox;

/// Detections grouped by image id. Per-image order is preserved.
pub type Predictions = BTreeMap<String, Vec<Detection>>;

struct Entry {
    image_id: String,
    label: DistressClass,
    bbox: BBox,
    score: Option<f64>,
}

fn parse_entries(json_text: &str, with_score: bool) -> Result<Vec<Entry>> {
    let root: Value = serde_json::from_str(json_text).map_err(|e| Error::Parse {
        source_name: "results JSON".into(),
        line: Some(e.line()),
        message: e.to_string(),
    })?;
    let Value::Array(items) = root else {
        return Err(Error::schema("$", "top level must be an array"));
    };
    items
        .iter()
        .enumerate()
        .map(|(i, item)| parse_entry(i, item, with_score))
        .collect()
}

fn parse_entry(i: usize, item: &Value, with_score: bool) -> Result<Entry> {
    let at = |field: &str| format!("[{i}].{field}");
    let Value::Object(obj) = item else {
        return Err(Error::schema(format!("[{i}]"), "entry must be an object"));
    };
    let allowed = ["image_id", "category_id", "bbox", "score"];
    if let Some(extra) = obj.keys().find(|k| !allowed.contains(&k.as_str())) {
        return Err(Error::schema(at(extra), "unexpected member"));
    }
    let field = |name: &str| -> Result<&Value> {
        obj.get(name)
            .ok_or_else(|| Error::schema(at(name), "missing member"))
    };

    let image_id = field("image_id")?
        .as_str()
        .ok_or_else(|| Error::schema(at("image_id"), "must be a string"))?
        .to_string();

    let cat = field("category_id")?;
    let cat_index = cat
        .as_i64()
        .ok_or_else(|| Error::schema(at("category_id"), "must be an integer"))?;
    let label = DistressClass::from_ordinal(cat_index)
        .map_err(|_| Error::schema(at("category_id"), format!("unknown class {cat_index}")))?;

    let Value::Array(coords) = field("bbox")? else {
        return Err(Error::schema(at("bbox"), "must be an array of 4 numbers"));
    };
    if coords.len() != 4 {
        return Err(Error::schema(
            at("bbox"),
            format!("must have 4 elements, found {}", coords.len()),
        ));
    }
    let mut xywh = [0.0; 4];
    for (k, (slot, v)) in xywh.iter_mut().zip(coords).enumerate() {
        *slot = v
            .as_f64()
            .ok_or_else(|| Error::schema(format!("[{i}].bbox[{k}]"), "must be a number"))?;
    }
    let bbox = BBox::from_xywh(xywh[0], xywh[1], xywh[2], xywh[3])
        .map_err(|e| Error::validation(format!("{}: {e}", at("bbox"))))?;

    // ground truth tolerates a score member so scored files convert directly
    let score = match obj.get("score") {
        None if with_score => return Err(Error::schema(at("score"), "missing member")),
        None => None,
        Some(v) => {
            let s = v
                .as_f64()
                .ok_or_else(|| Error::schema(at("score"), "must be a number"))?;
            if !(0.0..=1.0).contains(&s) {
                return Err(Error::validation(format!(
                    "{}: confidence {s} outside [0, 1]",
                    at("score")
                )));
            }
            Some(s)
        }
    };

    Ok(Entry {
        image_id,
        label,
        bbox,
        score,
    })
}

/// Parses a submission document into detections grouped per image.
pub fn parse_submission(json_text: &str) -> Result<Predictions> {
    let mut out = Predictions::new();
    for e in parse_entries(json_text, true)? {
        let det = Detection::new(e.bbox, e.label, e.score.unwrap_or(1.0))?;
        out.entry(e.image_id).or_default().push(det);
    }
    Ok(out)
}

#[derive(Serialize)]
struct OutEntry<'a> {
    image_id: &'a str,
    category_id: usize,
    bbox: [f64; 4],
    #[serde(skip_serializing_if = "Option::is_none")]
    score: Option<f64>,
}

fn to_json(entries: &[OutEntry<'_>]) -> String {
    serde_json::to_string_pretty(entries).expect("plain data always serializes")
}

/// Inverse of [`parse_submission`]. Entries are emitted image by image in
/// id order, preserving per-image detection order.
pub fn write_submission(predictions: &Predictions) -> String {
    let entries: Vec<OutEntry<'_>> = predictions
        .iter()
        .flat_map(|(id, dets)| {
            dets.iter().map(move |d| OutEntry {
                image_id: id,
                category_id: d.label.ordinal(),
                bbox: d.bbox.to_xywh(),
                score: Some(d.confidence),
            })
        })
        .collect();
    to_json(&entries)
}

/// Parses ground-truth JSON. The format carries no image sizes, so each
/// image's extent is the smallest integer size covering all of its boxes.
/// Images without boxes cannot be expressed in this format.
pub fn parse_ground_truth(json_text: &str) -> Result<Dataset> {
    let mut grouped: BTreeMap<String, Vec<Annotation>> = BTreeMap::new();
    let mut order: Vec<String> = Vec::new();
    for e in parse_entries(json_text, false)? {
        if !grouped.contains_key(&e.image_id) {
            order.push(e.image_id.clone());
        }
        grouped
            .entry(e.image_id)
            .or_default()
            .push(Annotation::new(e.bbox, e.label));
    }
    let records = order
        .into_iter()
        .map(|id| {
            let anns = grouped.remove(&id).unwrap_or_default();
            let extent =
                |f: fn(&Annotation) -> f64| anns.iter().map(f).fold(1.0f64, f64::max).ceil() as u32;
            let width = extent(|a| a.bbox.x_max());
            let height = extent(|a| a.bbox.y_max());
            ImageRecord::new(id, width, height, anns)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records)
}

/// Writes every annotation of `dataset` as a ground-truth entry.
pub fn write_ground_truth(dataset: &Dataset) -> String {
    let entries: Vec<OutEntry<'_>> = dataset
        .iter()
        .flat_map(|r| {
            r.annotations.iter().map(move |a| OutEntry {
                image_id: &r.image_id,
                category_id: a.label.ordinal(),
                bbox: a.bbox.to_xywh(),
                score: None,
            })
        })
        .collect();
    to_json(&entries)
}
