//! Label CSV (`vertex_index,class_id`) and class-table JSON.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassInfo, ClassTable, LabelMap};
use crate::error::{Error, Result};

const HEADER: &str = "vertex_index,class_id";

/// Read a label CSV. Vertices absent from the file are background; the
/// returned map ends at the highest listed index, so callers should
/// [`LabelMap::fit_to`] their geometry.
pub fn load_labels(path: impl AsRef<Path>, classes: &ClassTable) -> Result<LabelMap> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_labels(path, &text, classes)
}

pub fn parse_labels(path: &Path, text: &str, classes: &ClassTable) -> Result<LabelMap> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    match lines.next() {
        Some((_, h)) if h.replace(' ', "") == HEADER => {}
        _ => return Err(Error::parse(path, 1, format!("expected header {HEADER:?}"))),
    }
    let mut rows: BTreeMap<usize, u32> = BTreeMap::new();
    for (lineno, line) in lines {
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',').map(str::trim);
        let (Some(i), Some(c), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(Error::parse(path, lineno, "expected two columns"));
        };
        let index: usize = i
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad vertex index {i:?}")))?;
        let class: u32 = c
            .parse()
            .map_err(|_| Error::parse(path, lineno, format!("bad class id {c:?}")))?;
        if !classes.contains(class) {
            return Err(Error::UnknownClass(class));
        }
        if rows.insert(index, class).is_some() {
            return Err(Error::DuplicateIndex {
                index,
                line: lineno,
            });
        }
    }
    let n = rows.keys().next_back().map_or(0, |&m| m + 1);
    let mut labels = vec![0u32; n];
    for (i, c) in rows {
        labels[i] = c;
    }
    LabelMap::new(labels, classes.clone())
}

/// Write every vertex, background included, so the map length survives a
/// round trip.
pub fn save_labels(labels: &LabelMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_labels(labels)).map_err(|e| Error::io(path, e))
}

pub fn format_labels(labels: &LabelMap) -> String {
    let mut out = String::with_capacity(labels.len() * 8 + 32);
    out.push_str(HEADER);
    out.push('\n');
    for (i, c) in labels.labels().iter().enumerate() {
        let _ = writeln!(out, "{i},{c}");
    }
    out
}

#[derive(Serialize, Deserialize)]
struct ClassFile {
    classes: Vec<ClassInfo>,
}

pub fn load_class_table(path: impl AsRef<Path>) -> Result<ClassTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: ClassFile = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    ClassTable::new(file.classes)
}

pub fn save_class_table(table: &ClassTable, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = ClassFile {
        classes: table.classes().to_vec(),
    };
    let text = serde_json::to_string_pretty(&file).map_err(|e| Error::json(path, e))?;
    std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
