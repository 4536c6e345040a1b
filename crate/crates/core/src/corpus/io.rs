use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::record::{validate_record, DialogueRecord, Pos, Token};
use crate::util::write_atomic;
use crate::{Error, Result};

/// Key marking an artifact header line in JSONL outputs. Loaders skip it.
pub const HEADER_KEY: &str = "_header";

#[derive(Debug, Serialize, Deserialize)]
struct TokenWire {
    surface: String,
    pos: String,
    content: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct UtteranceWire {
    text: String,
    tokens: Vec<TokenWire>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RecordWire {
    dialogue_id: String,
    #[serde(default)]
    context: Vec<String>,
    utterance: UtteranceWire,
    references: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    meta: BTreeMap<String, Value>,
}

impl From<&DialogueRecord> for RecordWire {
    fn from(r: &DialogueRecord) -> Self {
        RecordWire {
            dialogue_id: r.dialogue_id.clone(),
            context: r.context.clone(),
            utterance: UtteranceWire {
                text: r.utterance_text(),
                tokens: r
                    .utterance
                    .iter()
                    .map(|t| TokenWire {
                        surface: t.surface.clone(),
                        pos: t.pos.as_str().to_string(),
                        content: t.is_content,
                    })
                    .collect(),
            },
            references: r.references.clone(),
            meta: r.meta.clone(),
        }
    }
}

/// Serializes one record as a single JSON line (no trailing newline).
pub fn record_to_json(record: &DialogueRecord) -> String {
    serde_json::to_string(&RecordWire::from(record)).expect("record serialization is infallible")
}

fn schema_violations(value: &Value) -> Vec<String> {
    let mut missing = Vec::new();
    let Some(obj) = value.as_object() else {
        return vec!["<root>: not an object".to_string()];
    };
    let mut want = |key: &str, ok: fn(&Value) -> bool| match obj.get(key) {
        None => missing.push(format!("{key}: missing")),
        Some(v) if !ok(v) => missing.push(format!("{key}: wrong type")),
        _ => {}
    };
    want("dialogue_id", Value::is_string);
    want("utterance", Value::is_object);
    want("references", Value::is_array);
    if let Some(ctx) = obj.get("context") {
        if !ctx.is_array() {
            missing.push("context: wrong type".to_string());
        }
    }
    if let Some(utt) = obj.get("utterance").and_then(Value::as_object) {
        match utt.get("tokens") {
            None => missing.push("utterance.tokens: missing".to_string()),
            Some(Value::Array(tokens)) => {
                for (i, t) in tokens.iter().enumerate() {
                    for key in ["surface", "pos", "content"] {
                        if t.get(key).is_none() {
                            missing.push(format!("utterance.tokens[{i}].{key}: missing"));
                        }
                    }
                }
            }
            Some(_) => missing.push("utterance.tokens: wrong type".to_string()),
        }
        if !utt.contains_key("text") {
            missing.push("utterance.text: missing".to_string());
        }
    }
    missing
}

/// Parses one JSONL line. `line_no` is 1-based and only used in errors.
pub fn parse_record_line(line: &str, line_no: usize) -> Result<DialogueRecord> {
    let value: Value = serde_json::from_str(line).map_err(|e| Error::Parse {
        line: line_no,
        message: e.to_string(),
    })?;
    let violations = schema_violations(&value);
    if !violations.is_empty() {
        return Err(Error::Validation {
            line: line_no,
            fields: violations,
        });
    }
    let wire: RecordWire = serde_json::from_value(value).map_err(|e| Error::Validation {
        line: line_no,
        fields: vec![e.to_string()],
    })?;
    let mut utterance = Vec::with_capacity(wire.utterance.tokens.len());
    let mut bad = Vec::new();
    for (i, t) in wire.utterance.tokens.into_iter().enumerate() {
        match t.pos.parse::<Pos>() {
            Ok(pos) => utterance.push(Token {
                surface: t.surface,
                pos,
                is_content: t.content,
            }),
            Err(_) => bad.push(format!("utterance.tokens[{i}].pos: unknown tag `{}`", t.pos)),
        }
    }
    if !bad.is_empty() {
        return Err(Error::Validation {
            line: line_no,
            fields: bad,
        });
    }
    let record = DialogueRecord {
        dialogue_id: wire.dialogue_id,
        context: wire.context,
        utterance,
        references: wire.references,
        meta: wire.meta,
    };
    let report = validate_record(&record);
    if !report.is_valid() {
        return Err(Error::Validation {
            line: line_no,
            fields: report.violations,
        });
    }
    Ok(record)
}

pub fn is_header_line(line: &str) -> bool {
    line.trim_start().starts_with(&format!("{{\"{HEADER_KEY}\""))
}

/// Loads a JSONL dataset. Blank lines and artifact header lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<DialogueRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut records = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() || is_header_line(&line) {
            continue;
        }
        records.push(parse_record_line(&line, i + 1)?);
    }
    Ok(records)
}

/// Writes records as JSONL, optionally preceded by a header line carrying
/// the resolved configuration.
pub fn write_dataset(
    path: impl AsRef<Path>,
    records: &[DialogueRecord],
    header: Option<&Value>,
) -> Result<()> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&header_line(h));
        out.push('\n');
    }
    for r in records {
        out.push_str(&record_to_json(r));
        out.push('\n');
    }
    write_atomic(path.as_ref(), out.as_bytes())
}

pub fn header_line(config: &Value) -> String {
    let mut obj = serde_json::Map::new();
    obj.insert(HEADER_KEY.to_string(), serde_json::json!({ "config": config }));
    Value::Object(obj).to_string()
}
