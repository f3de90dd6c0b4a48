//! PDF text extraction that keeps reading order per page and marks layout
//! blocks with blank lines.
//!
//! A new baseline close to the previous one starts a new line; a vertical jump
//! larger than `BLOCK_GAP` line heights starts a new block.

use std::collections::BTreeMap;

use lopdf::content::Content;
use lopdf::{Document, Encoding, Object, ObjectId};

const BLOCK_GAP: f64 = 1.5;
const IDENTITY: [f64; 6] = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0];
/// TJ kerning (thousandths of text space) beyond which a word break is assumed.
const TJ_SPACE_THRESHOLD: f64 = -200.0;

pub(crate) fn extract(bytes: &[u8]) -> Result<String, String> {
    let doc = Document::load_mem(bytes).map_err(|e| format!("malformed PDF: {e}"))?;
    let mut pages = Vec::new();
    for (_, page_id) in doc.get_pages() {
        pages.push(page_text(&doc, page_id)?);
    }
    Ok(pages.join("\n\n"))
}

struct TextCursor<'a> {
    text_matrix: [f64; 6],
    line_matrix: [f64; 6],
    leading: f64,
    font_size: f64,
    encoding: Option<&'a Encoding<'a>>,
    last_baseline: Option<f64>,
    out: String,
}

impl<'a> TextCursor<'a> {
    fn new() -> Self {
        TextCursor {
            text_matrix: IDENTITY,
            line_matrix: IDENTITY,
            leading: 0.0,
            font_size: 12.0,
            encoding: None,
            last_baseline: None,
            out: String::new(),
        }
    }

    fn translate(&mut self, tx: f64, ty: f64) {
        let m = self.line_matrix;
        self.line_matrix = [
            m[0],
            m[1],
            m[2],
            m[3],
            m[4] + tx * m[0] + ty * m[2],
            m[5] + tx * m[1] + ty * m[3],
        ];
        self.text_matrix = self.line_matrix;
    }

    fn line_height(&self) -> f64 {
        let scale = (self.text_matrix[2].powi(2) + self.text_matrix[3].powi(2)).sqrt();
        let h = self.font_size.abs() * if scale > 0.0 { scale } else { 1.0 };
        if h > 0.0 {
            h
        } else {
            12.0
        }
    }

    fn break_before_show(&mut self) {
        let y = self.text_matrix[5];
        if let Some(prev) = self.last_baseline {
            let dy = (prev - y).abs();
            if dy > 1e-6 {
                let sep = if dy > BLOCK_GAP * self.line_height() {
                    "\n\n"
                } else {
                    "\n"
                };
                while self.out.ends_with(' ') {
                    self.out.pop();
                }
                self.out.push_str(sep);
            }
        }
        self.last_baseline = Some(y);
    }

    fn show(&mut self, operands: &[Object]) {
        self.break_before_show();
        for operand in operands {
            match operand {
                Object::String(bytes, _) => self.push_bytes(bytes),
                Object::Array(items) => {
                    for item in items {
                        match item {
                            Object::String(bytes, _) => self.push_bytes(bytes),
                            other => {
                                if let Some(k) = number(other) {
                                    if k < TJ_SPACE_THRESHOLD && !self.out.ends_with(' ') {
                                        self.out.push(' ');
                                    }
                                }
                            }
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn push_bytes(&mut self, bytes: &[u8]) {
        match self
            .encoding
            .and_then(|enc| Document::decode_text(enc, bytes).ok())
        {
            Some(s) => self.out.push_str(&s),
            // no usable font encoding: read as Latin-1
            None => self.out.extend(bytes.iter().map(|&b| b as char)),
        }
    }
}

fn number(obj: &Object) -> Option<f64> {
    obj.as_float().ok().map(f64::from)
}

fn operand(ops: &[Object], i: usize) -> f64 {
    ops.get(i).and_then(number).unwrap_or(0.0)
}

fn page_text(doc: &Document, page_id: ObjectId) -> Result<String, String> {
    let fonts = doc.get_page_fonts(page_id).map_err(|e| e.to_string())?;
    let encodings: BTreeMap<Vec<u8>, Encoding> = fonts
        .into_iter()
        .filter_map(|(name, font)| font.get_font_encoding(doc).ok().map(|enc| (name, enc)))
        .collect();
    let content = Content::decode(&doc.get_page_content(page_id)).map_err(|e| e.to_string())?;

    let mut cursor = TextCursor::new();
    for op in &content.operations {
        let ops = &op.operands;
        match op.operator.as_str() {
            "BT" => {
                cursor.text_matrix = IDENTITY;
                cursor.line_matrix = IDENTITY;
            }
            "Tf" => {
                cursor.encoding = ops
                    .first()
                    .and_then(|o| o.as_name().ok())
                    .and_then(|name| encodings.get(name));
                cursor.font_size = operand(ops, 1);
            }
            "TL" => cursor.leading = operand(ops, 0),
            "Td" => cursor.translate(operand(ops, 0), operand(ops, 1)),
            "TD" => {
                cursor.leading = -operand(ops, 1);
                cursor.translate(operand(ops, 0), operand(ops, 1));
            }
            "Tm" => {
                let m = [
                    operand(ops, 0),
                    operand(ops, 1),
                    operand(ops, 2),
                    operand(ops, 3),
                    operand(ops, 4),
                    operand(ops, 5),
                ];
                cursor.text_matrix = m;
                cursor.line_matrix = m;
            }
            "T*" => {
                let leading = cursor.leading;
                cursor.translate(0.0, -leading);
            }
            "Tj" | "TJ" => cursor.show(ops),
            "'" => {
                let leading = cursor.leading;
                cursor.translate(0.0, -leading);
                cursor.show(ops);
            }
            "\"" => {
                let leading = cursor.leading;
                cursor.translate(0.0, -leading);
                if let Some(s) = ops.get(2) {
                    cursor.show(std::slice::from_ref(s));
                }
            }
            _ => {}
        }
    }
    Ok(cursor.out)
}
