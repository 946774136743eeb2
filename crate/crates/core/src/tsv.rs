//! Line-oriented text helpers shared by the tab-separated artifacts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Non-empty, non-comment lines of a file with their 1-based line numbers.
pub fn data_lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_data_lines(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

pub fn read_data_lines<R: BufRead>(reader: R) -> std::io::Result<Vec<(usize, String)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches('\r');
        if trimmed.trim().is_empty() || trimmed.trim_start().starts_with('#') {
            continue;
        }
        out.push((i + 1, trimmed.to_string()));
    }
    Ok(out)
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(BufWriter::new(file))
}

/// Write `text` to `path` atomically enough for our purposes: build in
/// memory, write once.
pub fn write_string(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Fields that end up in a tab-separated cell may not contain separators.
pub fn check_field(value: &str, what: &str) -> std::result::Result<(), String> {
    if value.contains(['\t', '\n', '\r']) {
        Err(format!("{what} {value:?} contains a tab or newline"))
    } else {
        Ok(())
    }
}
