//! JSON codecs.
//!
//! Every document is a JSON object carrying `"format": 1` next to the payload
//! fields. Emitted JSON is canonical: compact, object keys sorted, integer
//! sets sorted. Unknown fields are an error in strict mode; in lax mode they
//! are kept and written back out on emit.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};
use thiserror::Error;

pub const FORMAT_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Mode {
    #[default]
    Strict,
    Lax,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema violation at {path}: {message}")]
    SchemaViolation { path: String, message: String },
}

impl CodecError {
    fn schema(path: impl Into<String>, message: impl Into<String>) -> Self {
        CodecError::SchemaViolation {
            path: path.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Seg {
    Key(String),
    Index(usize),
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
struct Path(Vec<Seg>);

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str(".");
        }
        for (i, seg) in self.0.iter().enumerate() {
            match seg {
                Seg::Key(k) if i == 0 => write!(f, "{k}")?,
                Seg::Key(k) => write!(f, ".{k}")?,
                Seg::Index(n) => write!(f, "[{n}]")?,
            }
        }
        Ok(())
    }
}

impl Path {
    fn child(&self, seg: Seg) -> Path {
        let mut p = self.clone();
        p.0.push(seg);
        p
    }
}

/// A parsed document: the typed payload plus, in lax mode, the fields the
/// schema does not know about.
#[derive(Debug, Clone, PartialEq)]
pub struct Document<T> {
    pub value: T,
    unknown: Vec<(Path, Value)>,
}

impl<T> Document<T> {
    pub fn into_inner(self) -> T {
        self.value
    }

    /// Paths of the preserved unknown fields.
    pub fn unknown_paths(&self) -> Vec<String> {
        self.unknown.iter().map(|(p, _)| p.to_string()).collect()
    }
}

impl<T: Serialize> Document<T> {
    pub fn emit(&self) -> Vec<u8> {
        let mut v = with_format(&self.value);
        for (path, extra) in &self.unknown {
            graft(&mut v, &path.0, extra.clone());
        }
        to_bytes(&v)
    }
}

/// Collects fields of `input` that have no counterpart in `canon`.
fn unknown_fields(input: &Value, canon: &Value, path: &Path, out: &mut Vec<(Path, Value)>) {
    match (input, canon) {
        (Value::Object(a), Value::Object(b)) => {
            for (k, v) in a {
                let p = path.child(Seg::Key(k.clone()));
                match b.get(k) {
                    Some(w) => unknown_fields(v, w, &p, out),
                    None => out.push((p, v.clone())),
                }
            }
        }
        (Value::Array(a), Value::Array(b)) if a.len() == b.len() => {
            for (i, (v, w)) in a.iter().zip(b).enumerate() {
                unknown_fields(v, w, &path.child(Seg::Index(i)), out);
            }
        }
        _ => {}
    }
}

fn graft(target: &mut Value, path: &[Seg], extra: Value) {
    match (path, target) {
        ([Seg::Key(k)], Value::Object(m)) => {
            m.entry(k.clone()).or_insert(extra);
        }
        ([Seg::Key(k), rest @ ..], Value::Object(m)) => {
            if let Some(next) = m.get_mut(k) {
                graft(next, rest, extra);
            }
        }
        ([Seg::Index(i), rest @ ..], Value::Array(a)) => {
            if let Some(next) = a.get_mut(*i) {
                graft(next, rest, extra);
            }
        }
        _ => {}
    }
}

pub fn parse_instance<T>(bytes: &[u8], mode: Mode) -> Result<Document<T>, CodecError>
where
    T: DeserializeOwned + Serialize,
{
    let mut input: Value = serde_json::from_slice(bytes).map_err(|e| CodecError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let Value::Object(map) = &mut input else {
        return Err(CodecError::schema(".", "expected a JSON object"));
    };
    match map.remove("format") {
        None => return Err(CodecError::schema("format", "missing field")),
        Some(Value::Number(n)) if n.as_u64() == Some(FORMAT_VERSION) => {}
        Some(other) => {
            return Err(CodecError::schema(
                "format",
                format!("unsupported format {other}, expected {FORMAT_VERSION}"),
            ))
        }
    }
    let value: T = serde_path_to_error::deserialize(input.clone()).map_err(|e| {
        let path = e.path().to_string();
        CodecError::schema(path, e.into_inner().to_string())
    })?;
    let canon = serde_json::to_value(&value).map_err(|e| CodecError::schema(".", e.to_string()))?;
    let mut unknown = Vec::new();
    unknown_fields(&input, &canon, &Path::default(), &mut unknown);
    if mode == Mode::Strict {
        if let Some((path, _)) = unknown.first() {
            return Err(CodecError::schema(path.to_string(), "unknown field"));
        }
    }
    Ok(Document { value, unknown })
}

fn with_format<T: Serialize>(value: &T) -> Value {
    let v = serde_json::to_value(value).expect("report types serialize to JSON");
    let mut map = match v {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert("value".into(), other);
            m
        }
    };
    map.insert("format".into(), FORMAT_VERSION.into());
    Value::Object(map)
}

fn to_bytes(v: &Value) -> Vec<u8> {
    serde_json::to_vec(v).expect("values serialize")
}

/// Canonical bytes for `value`, with the format field added.
pub fn emit_report<T: Serialize>(value: &T) -> Vec<u8> {
    to_bytes(&with_format(value))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::setfam::IndexedFamily;

    #[test]
    fn family_round_trip() {
        let canon = br#"{"format":1,"ground_size":4,"sets":[[0,1],[2],[]]}"#;
        let doc = parse_instance::<IndexedFamily>(canon, Mode::Strict).unwrap();
        assert_eq!(doc.emit(), canon.to_vec());
    }

    #[test]
    fn canonicalizes_order_and_whitespace() {
        let raw = br#"{ "sets": [[3, 1, 1], [2]],
            "ground_size": 4, "format": 1 }"#;
        let doc = parse_instance::<IndexedFamily>(raw, Mode::Strict).unwrap();
        assert_eq!(
            String::from_utf8(doc.emit()).unwrap(),
            r#"{"format":1,"ground_size":4,"sets":[[1,3],[2]]}"#
        );
    }

    #[test]
    fn unknown_field_strict_and_lax() {
        let raw = br#"{"format":1,"ground_size":2,"sets":[[0]],"note":"x"}"#;
        let err = parse_instance::<IndexedFamily>(raw, Mode::Strict).unwrap_err();
        assert_eq!(
            err,
            CodecError::SchemaViolation {
                path: "note".into(),
                message: "unknown field".into()
            }
        );
        let doc = parse_instance::<IndexedFamily>(raw, Mode::Lax).unwrap();
        assert_eq!(doc.unknown_paths(), vec!["note"]);
        assert_eq!(
            String::from_utf8(doc.emit()).unwrap(),
            r#"{"format":1,"ground_size":2,"note":"x","sets":[[0]]}"#
        );
    }

    #[test]
    fn nested_unknown_field_path() {
        use crate::topo::FiniteSpace;
        #[derive(Debug, serde::Serialize, serde::Deserialize)]
        struct Wrap {
            space: FiniteSpace,
        }
        let raw = br#"{"format":1,"space":{"points":1,"basis":[[0]],"extra":true}}"#;
        let err = parse_instance::<Wrap>(raw, Mode::Strict).unwrap_err();
        assert!(
            matches!(err, CodecError::SchemaViolation { ref path, .. } if path == "space.extra")
        );
    }

    #[test]
    fn syntax_error_position() {
        let err = parse_instance::<IndexedFamily>(b"{\n  \"format\": 1,\n  oops", Mode::Strict)
            .unwrap_err();
        assert!(matches!(err, CodecError::Syntax { line: 3, .. }), "{err}");
    }

    #[test]
    fn format_field_checked() {
        let missing =
            parse_instance::<IndexedFamily>(br#"{"ground_size":1,"sets":[]}"#, Mode::Strict);
        assert!(
            matches!(missing, Err(CodecError::SchemaViolation { ref path, .. }) if path == "format")
        );
        let wrong = parse_instance::<IndexedFamily>(
            br#"{"format":2,"ground_size":1,"sets":[]}"#,
            Mode::Lax,
        );
        assert!(wrong.is_err());
    }

    #[test]
    fn schema_error_has_path() {
        let raw = br#"{"format":1,"ground_size":2,"sets":[[0],["a"]]}"#;
        let err = parse_instance::<IndexedFamily>(raw, Mode::Strict).unwrap_err();
        assert!(
            matches!(err, CodecError::SchemaViolation { ref path, .. } if path.starts_with("sets[1]")),
            "{err}"
        );
    }
}
