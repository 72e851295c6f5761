//! Distribution files: a JSON array of `{"x", "y", "z", "p"}` records, or a
//! whitespace table with one `x y z p` row per line.

use std::path::Path;

use broja_core::distributions::{Label, Outcome};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum InputError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid JSON input: {0}")]
    Json(#[from] serde_json::Error),
    #[error("line {line}: {message}")]
    Table { line: usize, message: String },
    #[error("input contains no records")]
    Empty,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    x: Label,
    y: Label,
    z: Label,
    p: f64,
}

pub fn read_input(path: &Path) -> Result<Vec<(Outcome, f64)>, InputError> {
    let text = std::fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_input(&text)
}

pub fn parse_input(text: &str) -> Result<Vec<(Outcome, f64)>, InputError> {
    let trimmed = text.trim_start();
    let rows = if trimmed.starts_with('[') {
        let records: Vec<Record> = serde_json::from_str(trimmed)?;
        records
            .into_iter()
            .map(|r| {
                (
                    Outcome {
                        x: r.x,
                        y: r.y,
                        z: r.z,
                    },
                    r.p,
                )
            })
            .collect()
    } else {
        parse_table(text)?
    };
    if rows.is_empty() {
        return Err(InputError::Empty);
    }
    Ok(rows)
}

fn parse_table(text: &str) -> Result<Vec<(Outcome, f64)>, InputError> {
    let mut rows = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if rows.is_empty() && fields == ["x", "y", "z", "p"] {
            continue;
        }
        let [x, y, z, p] = fields[..] else {
            return Err(InputError::Table {
                line: k + 1,
                message: format!("expected 4 fields `x y z p`, found {}", fields.len()),
            });
        };
        let p: f64 = p.parse().map_err(|_| InputError::Table {
            line: k + 1,
            message: format!("`{p}` is not a number"),
        })?;
        rows.push((
            Outcome::new(Label::parse(x), Label::parse(y), Label::parse(z)),
            p,
        ));
    }
    Ok(rows)
}
