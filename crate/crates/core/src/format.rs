//! On-disk formats for formal contexts: canonical JSON and Burmeister `.cxt`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::context::{ContextError, FormalContext, QualityDimension};

/// Dimension name given to attributes read from a `.cxt` file.
pub const CXT_DIMENSION: &str = "attributes";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Cxt,
}

impl Format {
    /// Guess from a file extension; anything but `.cxt` is JSON.
    pub fn from_path(path: &std::path::Path) -> Format {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("cxt") => Format::Cxt,
            _ => Format::Json,
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "cxt" => Ok(Format::Cxt),
            other => Err(format!("unknown context format `{other}`")),
        }
    }
}

// Field order is the sorted key order of the canonical document.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ContextDoc {
    dimensions: Vec<QualityDimension>,
    #[serde(default)]
    granules: BTreeMap<String, u64>,
    incidence: Vec<Vec<u8>>,
    objects: Vec<String>,
}

pub fn parse_context(bytes: &[u8], format: Format) -> Result<FormalContext, ContextError> {
    match format {
        Format::Json => parse_json(bytes),
        Format::Cxt => parse_cxt(bytes),
    }
}

pub fn serialize_context(ctx: &FormalContext, format: Format) -> Result<Vec<u8>, ContextError> {
    match format {
        Format::Json => Ok(to_json(ctx)),
        Format::Cxt => {
            if ctx.dimensions().len() > 1 {
                return Err(ContextError::CxtLossy(format!(
                    "{} quality dimensions would be flattened",
                    ctx.dimensions().len()
                )));
            }
            if let Some(i) = ctx.granules().iter().position(|g| g.0 != 0) {
                return Err(ContextError::CxtLossy(format!(
                    "object `{}` has granule {}",
                    ctx.objects()[i],
                    ctx.granules()[i].0
                )));
            }
            Ok(to_cxt(ctx))
        }
    }
}

/// Burmeister export that drops dimension grouping and granules.
pub fn serialize_cxt_flattened(ctx: &FormalContext) -> Vec<u8> {
    to_cxt(ctx)
}

fn to_json(ctx: &FormalContext) -> Vec<u8> {
    let doc = ContextDoc {
        dimensions: ctx.dimensions().to_vec(),
        granules: ctx.granule_map(),
        incidence: ctx
            .incidence_matrix()
            .into_iter()
            .map(|r| r.into_iter().map(u8::from).collect())
            .collect(),
        objects: ctx.objects().to_vec(),
    };
    let mut out = serde_json::to_vec(&doc).expect("context document serializes");
    out.push(b'\n');
    out
}

fn parse_json(bytes: &[u8]) -> Result<FormalContext, ContextError> {
    let doc: ContextDoc = serde_json::from_slice(bytes).map_err(|e| ContextError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut incidence = Vec::with_capacity(doc.incidence.len());
    for (i, row) in doc.incidence.iter().enumerate() {
        let mut bits = Vec::with_capacity(row.len());
        for &v in row {
            match v {
                0 => bits.push(false),
                1 => bits.push(true),
                other => {
                    return Err(ContextError::Parse {
                        line: 0,
                        column: 0,
                        message: format!("incidence row {i} holds {other}; only 0 and 1 are allowed"),
                    })
                }
            }
        }
        incidence.push(bits);
    }
    let granules = if doc.granules.is_empty() { None } else { Some(doc.granules) };
    FormalContext::new(doc.objects, doc.dimensions, incidence, granules)
}

fn to_cxt(ctx: &FormalContext) -> Vec<u8> {
    let mut s = String::new();
    let _ = write!(s, "B\n\n{}\n{}\n\n", ctx.object_count(), ctx.attribute_count());
    for o in ctx.objects() {
        s.push_str(o);
        s.push('\n');
    }
    for a in ctx.attributes() {
        s.push_str(a);
        s.push('\n');
    }
    for row in ctx.rows() {
        for j in 0..ctx.attribute_count() {
            s.push(if row.contains(j) { 'X' } else { '.' });
        }
        s.push('\n');
    }
    s.into_bytes()
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn next(&mut self, what: &str) -> Result<&'a str, ContextError> {
        match self.inner.next() {
            Some((i, l)) => {
                self.last = i + 1;
                Ok(l.trim_end_matches('\r'))
            }
            None => Err(ContextError::Parse {
                line: self.last + 1,
                column: 1,
                message: format!("unexpected end of input, expected {what}"),
            }),
        }
    }

    fn error(&self, column: usize, message: String) -> ContextError {
        ContextError::Parse { line: self.last, column, message }
    }

    fn count(&mut self, what: &str) -> Result<usize, ContextError> {
        let l = self.next(what)?;
        l.trim().parse().map_err(|_| self.error(1, format!("expected {what}, found `{l}`")))
    }
}

fn parse_cxt(bytes: &[u8]) -> Result<FormalContext, ContextError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ContextError::Parse {
        line: 0,
        column: e.valid_up_to(),
        message: "input is not UTF-8".into(),
    })?;
    let mut lines = Lines { inner: text.lines().enumerate(), last: 0 };
    let header = lines.next("header `B`")?;
    if header.trim() != "B" {
        return Err(lines.error(1, format!("expected header `B`, found `{header}`")));
    }
    // The second line is the (usually empty) context name.
    lines.next("context name line")?;
    let n_objects = lines.count("object count")?;
    let n_attributes = lines.count("attribute count")?;

    let mut pending = None;
    if n_objects + n_attributes > 0 {
        let mut line = lines.next("object names")?;
        while line.trim().is_empty() {
            line = lines.next("object names")?;
        }
        pending = Some(line);
    }
    let mut objects = Vec::with_capacity(n_objects);
    let mut attributes = Vec::with_capacity(n_attributes);
    for k in 0..n_objects + n_attributes {
        let name = match pending.take() {
            Some(l) => l,
            None => lines.next(if k < n_objects { "object name" } else { "attribute name" })?,
        };
        if k < n_objects {
            objects.push(name.to_string());
        } else {
            attributes.push(name.to_string());
        }
    }
    let mut incidence = Vec::with_capacity(n_objects);
    for _ in 0..n_objects {
        let row = lines.next("incidence row")?;
        let cells: Vec<char> = row.trim_end().chars().collect();
        if cells.len() != n_attributes {
            return Err(lines.error(1, format!("row has {} cells, expected {n_attributes}", cells.len())));
        }
        let mut bits = Vec::with_capacity(n_attributes);
        for (c, ch) in cells.into_iter().enumerate() {
            match ch {
                'X' | 'x' => bits.push(true),
                '.' => bits.push(false),
                other => return Err(lines.error(c + 1, format!("unexpected cell `{other}`"))),
            }
        }
        incidence.push(bits);
    }
    let dimensions = if attributes.is_empty() {
        Vec::new()
    } else {
        vec![QualityDimension { name: CXT_DIMENSION.to_string(), attributes }]
    };
    FormalContext::new(objects, dimensions, incidence, None)
}
