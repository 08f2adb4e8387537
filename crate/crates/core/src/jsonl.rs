//! One-record-per-line JSON files, used for findings and TLS observations.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Parses every non-blank line as one record. Errors carry the 1-based record index.
pub fn parse<T: DeserializeOwned>(context: &str, text: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    let mut index = 0;
    for line in text.lines() {
        if line.trim().is_empty() {
            continue;
        }
        index += 1;
        let record = serde_json::from_str(line).map_err(|e| Error::format(context, index, e))?;
        out.push(record);
    }
    Ok(out)
}

pub fn read<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    for line in BufReader::new(file).lines() {
        text.push_str(&line.map_err(|e| Error::io(path, e))?);
        text.push('\n');
    }
    parse(&path.display().to_string(), &text)
}

pub fn to_string<T: Serialize>(records: &[T]) -> String {
    let mut out = String::new();
    for r in records {
        // Serialization of plain data types cannot fail.
        out.push_str(&serde_json::to_string(r).expect("record serializes"));
        out.push('\n');
    }
    out
}

pub fn write<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(to_string(records).as_bytes())
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}
