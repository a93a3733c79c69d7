//! Pascal VOC XML annotations.

use std::fmt::Write as _;

use roxmltree::{Document, Node};

use super::{Annotation, DistressClass, ImageRecord, ImageSource};
use crate::error::{Error, Result};
use crate::geometry::BBox;

fn parse_err(image_id: &str, line: Option<usize>, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: format!("VOC annotation for {image_id:?}"),
        line,
        message: message.into(),
    }
}

struct Ctx<'a, 'input> {
    doc: &'a Document<'input>,
    image_id: &'a str,
}

impl<'a, 'input> Ctx<'a, 'input> {
    fn line_of(&self, node: Node) -> usize {
        self.doc.text_pos_at(node.range().start).row as usize
    }

    fn child<'n>(&self, node: Node<'n, 'input>, tag: &str) -> Result<Node<'n, 'input>> {
        node.children()
            .find(|c| c.has_tag_name(tag))
            .ok_or_else(|| {
                parse_err(
                    self.image_id,
                    Some(self.line_of(node)),
                    format!("<{}> is missing <{tag}>", node.tag_name().name()),
                )
            })
    }

    fn text(&self, node: Node<'_, 'input>, tag: &str) -> Result<String> {
        let c = self.child(node, tag)?;
        Ok(c.text().unwrap_or("").trim().to_string())
    }

    fn number(&self, node: Node<'_, 'input>, tag: &str) -> Result<f64> {
        let c = self.child(node, tag)?;
        let raw = c.text().unwrap_or("").trim();
        raw.parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| {
                parse_err(
                    self.image_id,
                    Some(self.line_of(c)),
                    format!("<{tag}> value {raw:?} is not a number"),
                )
            })
    }
}

/// Parses one Pascal VOC document. Pixels are not loaded.
pub fn parse_voc(xml_text: &str, image_id: &str) -> Result<ImageRecord> {
    let doc = Document::parse(xml_text).map_err(|e| {
        let pos = e.pos();
        parse_err(image_id, Some(pos.row as usize), e.to_string())
    })?;
    let root = doc.root_element();
    let ctx = Ctx {
        doc: &doc,
        image_id,
    };
    if !root.has_tag_name("annotation") {
        return Err(parse_err(
            image_id,
            Some(ctx.line_of(root)),
            format!(
                "root element is <{}>, expected <annotation>",
                root.tag_name().name()
            ),
        ));
    }

    let size = ctx.child(root, "size")?;
    let dim = |tag: &str| -> Result<u32> {
        let v = ctx.number(size, tag)?;
        if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
            Ok(v as u32)
        } else {
            Err(parse_err(
                image_id,
                Some(ctx.line_of(size)),
                format!("<{tag}> must be a positive integer, got {v}"),
            ))
        }
    };
    let width = dim("width")?;
    let height = dim("height")?;

    let source = root
        .children()
        .find(|c| c.has_tag_name("source"))
        .and_then(|s| s.children().find(|c| c.has_tag_name("database")))
        .and_then(|d| d.text())
        .map(|t| match t.trim().to_ascii_uppercase().as_str() {
            "ARAN" => ImageSource::Aran,
            "STREET_VIEW" => ImageSource::StreetView,
            "SYNTHETIC" => ImageSource::Synthetic,
            _ => ImageSource::Unknown,
        })
        .unwrap_or_default();

    let mut annotations = Vec::new();
    for object in root.children().filter(|c| c.has_tag_name("object")) {
        let name = ctx.text(object, "name")?;
        let label: DistressClass = name.parse()?;
        let bndbox = ctx.child(object, "bndbox")?;
        let coords = [
            ctx.number(bndbox, "xmin")?,
            ctx.number(bndbox, "ymin")?,
            ctx.number(bndbox, "xmax")?,
            ctx.number(bndbox, "ymax")?,
        ];
        let bbox = BBox::new(coords[0], coords[1], coords[2], coords[3]).map_err(|e| {
            Error::validation(format!("{image_id:?} line {}: {e}", ctx.line_of(bndbox)))
        })?;
        annotations.push(Annotation::new(bbox, label));
    }

    let mut record = ImageRecord::new(image_id, width, height, annotations)?;
    record.source = source;
    Ok(record)
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Serializes a record as Pascal VOC. Coordinates use the shortest decimal form
/// that parses back to the same value, so the round trip is exact.
pub fn write_voc(record: &ImageRecord) -> String {
    let mut s = String::new();
    s.push_str("<annotation>\n");
    let _ = writeln!(s, "  <filename>{}</filename>", escape(&record.image_id));
    let database = match record.source {
        ImageSource::Aran => "ARAN",
        ImageSource::StreetView => "STREET_VIEW",
        ImageSource::Synthetic => "SYNTHETIC",
        ImageSource::Unknown => "UNKNOWN",
    };
    let _ = writeln!(
        s,
        "  <source>\n    <database>{database}</database>\n  </source>"
    );
    let _ = writeln!(
        s,
        "  <size>\n    <width>{}</width>\n    <height>{}</height>\n    <depth>3</depth>\n  </size>",
        record.width, record.height
    );
    for a in &record.annotations {
        let b = &a.bbox;
        let _ = write!(
            s,
            "  <object>\n    <name>{}</name>\n    <pose>Unspecified</pose>\n    <truncated>0</truncated>\n    <difficult>0</difficult>\n    <bndbox>\n      <xmin>{}</xmin>\n      <ymin>{}</ymin>\n      <xmax>{}</xmax>\n      <ymax>{}</ymax>\n    </bndbox>\n  </object>\n",
            a.label.name(),
            b.x_min(),
            b.y_min(),
            b.x_max(),
            b.y_max()
        );
    }
    s.push_str("</annotation>\n");
    s
}
