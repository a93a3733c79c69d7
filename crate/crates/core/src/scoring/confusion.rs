use std::fmt::Write as _;

use serde::Serialize;

use super::greedy;
use crate::dataset::{Annotation, Dataset, Detection, DistressClass};
use crate::error::{Error, Result};

const SIZE: usize = DistressClass::COUNT + 1;
const NONE: usize = DistressClass::COUNT;

/// 8x8 counts: rows are reference labels, columns candidate labels, and the
/// last row/column is "none" (missed reference boxes land in the none column,
/// spurious candidate boxes in the none row).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    pub labels: Labels,
    pub matrix: [[u64; SIZE]; SIZE],
}

/// Serializes as the row/column label list.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Labels;

impl Serialize for Labels {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeSeq;
        let mut seq = s.serialize_seq(Some(SIZE))?;
        for c in DistressClass::ALL {
            seq.serialize_element(c.name())?;
        }
        seq.serialize_element("none")?;
        seq.end()
    }
}

fn slot(c: Option<DistressClass>) -> usize {
    c.map_or(NONE, DistressClass::ordinal)
}

impl ConfusionMatrix {
    /// Label-agnostic matching of one image's boxes, tallied by label pair.
    pub(crate) fn from_pairs(reference: &[Annotation], candidate: &[Detection], iou: f64) -> Self {
        let m = greedy(reference, candidate, iou, false);
        let mut cm = ConfusionMatrix::default();
        for p in m.pairs {
            cm.matrix[reference[p.gt_index].label.ordinal()]
                [candidate[p.det_index].label.ordinal()] += 1;
        }
        for g in m.unmatched_gts {
            cm.matrix[reference[g].label.ordinal()][NONE] += 1;
        }
        for d in m.unmatched_dets {
            cm.matrix[NONE][candidate[d].label.ordinal()] += 1;
        }
        cm
    }

    pub fn get(&self, reference: Option<DistressClass>, candidate: Option<DistressClass>) -> u64 {
        self.matrix[slot(reference)][slot(candidate)]
    }

    pub(crate) fn add(&mut self, other: &ConfusionMatrix) {
        for (ra, rb) in self.matrix.iter_mut().zip(&other.matrix) {
            for (a, b) in ra.iter_mut().zip(rb) {
                *a += b;
            }
        }
    }

    /// Matched boxes whose labels agree.
    pub fn diagonal(&self) -> u64 {
        (0..DistressClass::COUNT).map(|i| self.matrix[i][i]).sum()
    }

    /// Total reference boxes (all rows except "none").
    pub fn reference_total(&self) -> u64 {
        self.matrix[..NONE].iter().flatten().sum()
    }

    pub fn to_table(&self) -> String {
        let names: Vec<&str> = DistressClass::ALL
            .iter()
            .map(|c| c.name())
            .chain(std::iter::once("none"))
            .collect();
        let mut s = String::new();
        let _ = write!(s, "{:<13}", "ref \\ cand");
        for n in &names {
            let _ = write!(s, " {:>12}", n);
        }
        s.push('\n');
        for (name, row) in names.iter().zip(&self.matrix) {
            let _ = write!(s, "{:<13}", name);
            for v in row {
                let _ = write!(s, " {:>12}", v);
            }
            s.push('\n');
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnotationAgreement {
    pub confusion: ConfusionMatrix,
    /// Percentage of reference boxes matched by a candidate box of the same
    /// label. With no reference boxes this is 100 when the candidate is also
    /// empty and 0 otherwise.
    pub accuracy_percent: f64,
}

/// Compares two annotation sets over the same images, e.g. a team's labels
/// against the organizers' reference.
pub fn annotation_confusion(
    reference: &Dataset,
    candidate: &Dataset,
    iou_threshold: f64,
) -> Result<AnnotationAgreement> {
    let mut mismatched: Vec<String> = reference
        .ids()
        .filter(|id| !candidate.contains(id))
        .chain(candidate.ids().filter(|id| !reference.contains(id)))
        .map(str::to_string)
        .collect();
    if !mismatched.is_empty() {
        mismatched.sort();
        return Err(Error::validation(format!(
            "reference and candidate cover different images: {}",
            mismatched.join(", ")
        )));
    }

    let mut confusion = ConfusionMatrix::default();
    for r in reference {
        let cand = candidate.get(&r.image_id).expect("id sets checked above");
        let dets: Vec<Detection> = cand
            .annotations
            .iter()
            .copied()
            .map(Detection::from)
            .collect();
        confusion.add(&ConfusionMatrix::from_pairs(
            &r.annotations,
            &dets,
            iou_threshold,
        ));
    }
    let total = confusion.reference_total();
    let accuracy_percent = if total == 0 {
        if candidate.annotation_count() == 0 {
            100.0
        } else {
            0.0
        }
    } else {
        100.0 * confusion.diagonal() as f64 / total as f64
    };
    Ok(AnnotationAgreement {
        confusion,
        accuracy_percent,
    })
}
