//! Line-delimited JSON helpers shared by every file format in the crate.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum JsonlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
}

/// Parse JSONL text. Blank lines are skipped; line numbers are 1-based.
pub fn parse_bytes<T: DeserializeOwned>(bytes: &[u8]) -> Result<Vec<T>, JsonlError> {
    let mut out = Vec::new();
    for (idx, raw) in bytes.split(|&b| b == b'\n').enumerate() {
        let line = idx + 1;
        let text = std::str::from_utf8(raw).map_err(|e| JsonlError::Line {
            line,
            message: format!("invalid UTF-8: {e}"),
        })?;
        let text = text.strip_suffix('\r').unwrap_or(text);
        if text.trim().is_empty() {
            continue;
        }
        let value = serde_json::from_str(text).map_err(|e| JsonlError::Line {
            line,
            message: e.to_string(),
        })?;
        out.push(value);
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>, JsonlError> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_bytes(&bytes)
}

pub fn to_string<T: Serialize>(items: &[T]) -> String {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item).expect("serializable record"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<(), JsonlError> {
    let path = path.as_ref();
    let wrap = |source| JsonlError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut file = io::BufWriter::new(fs::File::create(path).map_err(wrap)?);
    file.write_all(to_string(items).as_bytes()).map_err(wrap)?;
    file.flush().map_err(wrap)
}
