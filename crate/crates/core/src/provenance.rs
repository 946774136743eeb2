//! Provenance headers written at the top of every output artifact.
//!
//! Tab-separated files carry the header as leading `# key: value` lines.
//! Line-delimited JSON files carry it as a first line of the form
//! `{"provenance": {...}}`, and the model file embeds it as a field.
//! No timestamps are recorded, so rerunning a stage with identical inputs
//! reproduces its outputs byte for byte.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const TOOL: &str = "langflow";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub config: BTreeMap<String, String>,
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str) -> Self {
        Provenance {
            tool: TOOL.to_string(),
            version: VERSION.to_string(),
            command: command.to_string(),
            seed: None,
            config: BTreeMap::new(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn config(mut self, key: &str, value: impl ToString) -> Self {
        self.config.insert(key.to_string(), value.to_string());
        self
    }

    pub fn input(mut self, name: &str, digest: impl Into<String>) -> Self {
        self.inputs.insert(name.to_string(), digest.into());
        self
    }

    /// Header block for tab-separated outputs, each line starting with `# `.
    pub fn header(&self) -> String {
        let mut out = format!("# tool: {} {}\n# command: {}\n", self.tool, self.version, self.command);
        if let Some(seed) = self.seed {
            out.push_str(&format!("# seed: {seed}\n"));
        }
        for (k, v) in &self.config {
            out.push_str(&format!("# config.{k}: {v}\n"));
        }
        for (k, v) in &self.inputs {
            out.push_str(&format!("# input.{k}: {v}\n"));
        }
        out
    }

    /// First line for line-delimited JSON outputs (newline included).
    pub fn json_line(&self) -> String {
        let mut line = serde_json::json!({ "provenance": self }).to_string();
        line.push('\n');
        line
    }

    /// Parse the leading `# ` block of a tab-separated artifact.
    pub fn parse_header(text: &str) -> Option<Provenance> {
        let mut prov: Option<Provenance> = None;
        for line in text.lines() {
            let Some(rest) = line.strip_prefix("# ") else { break };
            let Some((key, value)) = rest.split_once(": ") else { continue };
            match key {
                "tool" => {
                    let (tool, version) = value.split_once(' ').unwrap_or((value, ""));
                    let mut p = Provenance::new("");
                    p.tool = tool.to_string();
                    p.version = version.to_string();
                    prov = Some(p);
                }
                "command" => prov.as_mut()?.command = value.to_string(),
                "seed" => prov.as_mut()?.seed = value.parse().ok(),
                _ => {
                    let p = prov.as_mut()?;
                    if let Some(k) = key.strip_prefix("config.") {
                        p.config.insert(k.to_string(), value.to_string());
                    } else if let Some(k) = key.strip_prefix("input.") {
                        p.inputs.insert(k.to_string(), value.to_string());
                    }
                }
            }
        }
        prov
    }

    /// Read the provenance of any artifact format this crate writes.
    pub fn read_from(path: &Path) -> Result<Option<Provenance>> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut reader = BufReader::new(file);
        let mut first = String::new();
        reader.read_line(&mut first).map_err(|e| Error::io(path, e))?;
        if first.starts_with("# ") {
            let mut rest = String::new();
            reader.read_to_string(&mut rest).map_err(|e| Error::io(path, e))?;
            return Ok(Provenance::parse_header(&(first + &rest)));
        }
        if first.starts_with('{') {
            #[derive(Deserialize)]
            struct Wrapped {
                provenance: Provenance,
            }
            if let Ok(w) = serde_json::from_str::<Wrapped>(first.trim_end()) {
                return Ok(Some(w.provenance));
            }
            // Whole-file JSON documents (the model file) embed it as a field.
            let mut rest = String::new();
            reader.read_to_string(&mut rest).map_err(|e| Error::io(path, e))?;
            if let Ok(w) = serde_json::from_str::<Wrapped>(&(first + &rest)) {
                return Ok(Some(w.provenance));
            }
        }
        Ok(None)
    }
}

pub fn digest_bytes(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut out = String::from("sha256:");
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    out
}

/// Digest of a file, or of a directory's regular files in name order.
pub fn digest_path(path: &Path) -> Result<String> {
    let mut hasher = Sha256::new();
    if path.is_dir() {
        let mut entries: Vec<_> = std::fs::read_dir(path)
            .map_err(|e| Error::io(path, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        entries.sort();
        for entry in entries {
            let name = entry.file_name().unwrap_or_default().to_string_lossy().into_owned();
            let bytes = std::fs::read(&entry).map_err(|e| Error::io(&entry, e))?;
            hasher.update((name.len() as u64).to_le_bytes());
            hasher.update(name.as_bytes());
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
        }
    } else {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        hasher.update(&bytes);
    }
    let digest = hasher.finalize();
    let mut out = String::from("sha256:");
    for b in digest.iter() {
        out.push_str(&format!("{b:02x}"));
    }
    Ok(out)
}
