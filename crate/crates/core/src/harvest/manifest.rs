//! Append-only JSON-lines provenance log.
//!
//! Every line is one [`ImageRecord`]. A later line for the same
//! `(class_id, url)` supersedes earlier ones; the in-memory [`Manifest`] holds
//! the effective record for each key in first-appearance order.

use std::collections::HashMap;
use std::fmt;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::HarvestError;
use crate::dedup::PHash64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    Pending,
    Downloaded,
    Failed,
    Rejected,
    RemovedDuplicate,
}

impl fmt::Display for RecordStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RecordStatus::Pending => "pending",
            RecordStatus::Downloaded => "downloaded",
            RecordStatus::Failed => "failed",
            RecordStatus::Rejected => "rejected",
            RecordStatus::RemovedDuplicate => "removed_duplicate",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageRecord {
    pub class_id: String,
    pub url: String,
    pub provider: String,
    pub rank: u64,
    pub local_path: Option<String>,
    pub status: RecordStatus,
    pub byte_size: Option<u64>,
    pub width: Option<u32>,
    pub height: Option<u32>,
    pub error: Option<String>,
    pub phash: Option<PHash64>,
    pub fetched_at: DateTime<Utc>,
}

impl ImageRecord {
    pub fn pending(class_id: &str, url: &str, provider: &str, rank: u64) -> Self {
        ImageRecord {
            class_id: class_id.to_string(),
            url: url.to_string(),
            provider: provider.to_string(),
            rank,
            local_path: None,
            status: RecordStatus::Pending,
            byte_size: None,
            width: None,
            height: None,
            error: None,
            phash: None,
            fetched_at: Utc::now(),
        }
    }

    pub fn key(&self) -> (String, String) {
        (self.class_id.clone(), self.url.clone())
    }

    /// `downloaded` records must carry their path, size and dimensions.
    pub fn is_consistent(&self) -> bool {
        self.status != RecordStatus::Downloaded
            || (self.local_path.is_some()
                && self.byte_size.is_some()
                && self.width.is_some()
                && self.height.is_some())
    }
}

/// Effective manifest state, optionally backed by an append log on disk.
#[derive(Default)]
pub struct Manifest {
    records: Vec<ImageRecord>,
    index: HashMap<(String, String), usize>,
    log: Option<BufWriter<File>>,
    path: Option<PathBuf>,
}

impl fmt::Debug for Manifest {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Manifest")
            .field("records", &self.records.len())
            .field("path", &self.path)
            .finish()
    }
}

impl PartialEq for Manifest {
    fn eq(&self, other: &Self) -> bool {
        self.records == other.records
    }
}

impl Manifest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_records(records: impl IntoIterator<Item = ImageRecord>) -> Self {
        let mut m = Manifest::new();
        for r in records {
            m.apply(r);
        }
        m
    }

    fn apply(&mut self, record: ImageRecord) {
        let key = record.key();
        match self.index.get(&key) {
            Some(&i) => self.records[i] = record,
            None => {
                self.index.insert(key, self.records.len());
                self.records.push(record);
            }
        }
    }

    /// Records `record` as the new effective state for its key and, when the
    /// manifest is file-backed, appends and flushes one line.
    pub fn append(&mut self, record: ImageRecord) -> Result<(), HarvestError> {
        if let Some(log) = self.log.as_mut() {
            let line = serde_json::to_string(&record)?;
            log.write_all(line.as_bytes())?;
            log.write_all(b"\n")?;
            log.flush()?;
        }
        self.apply(record);
        Ok(())
    }

    pub fn get(&self, class_id: &str, url: &str) -> Option<&ImageRecord> {
        self.index
            .get(&(class_id.to_string(), url.to_string()))
            .map(|&i| &self.records[i])
    }

    pub fn records(&self) -> &[ImageRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    /// Effective records of one class, sorted by rank.
    pub fn class_records(&self, class_id: &str) -> Vec<&ImageRecord> {
        let mut v: Vec<&ImageRecord> =
            self.records.iter().filter(|r| r.class_id == class_id).collect();
        v.sort_by_key(|r| r.rank);
        v
    }

    /// Distinct class ids in sorted order.
    pub fn class_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.records.iter().map(|r| r.class_id.clone()).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    /// Serializes the effective state, one record per line.
    pub fn to_jsonl(&self) -> Result<String, HarvestError> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    /// Replays a JSON-lines log. A corrupt final line is dropped with a
    /// warning; a corrupt interior line is an error.
    pub fn parse_jsonl(text: &str) -> Result<(Self, Vec<String>), HarvestError> {
        let (m, warnings, _, _) = parse_log(text)?;
        Ok((m, warnings))
    }

    /// Loads a manifest file and keeps it open for appending. A torn trailing
    /// line is truncated away first so new appends start on a clean line.
    /// A missing file starts an empty manifest.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<String>), HarvestError> {
        let path = path.as_ref();
        let (mut m, warnings) = if path.exists() {
            let text = std::fs::read_to_string(path)?;
            let (m, warnings, valid_len, unterminated) = parse_log(&text)?;
            if valid_len < text.len() {
                let f = OpenOptions::new().write(true).open(path)?;
                f.set_len(valid_len as u64)?;
            }
            if unterminated {
                OpenOptions::new().append(true).open(path)?.write_all(b"\n")?;
            }
            (m, warnings)
        } else {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                std::fs::create_dir_all(dir)?;
            }
            (Manifest::new(), Vec::new())
        };
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        m.log = Some(BufWriter::new(file));
        m.path = Some(path.to_path_buf());
        Ok((m, warnings))
    }

    /// Rewrites the backing file with the effective state only.
    pub fn compact(&mut self) -> Result<(), HarvestError> {
        let Some(path) = self.path.clone() else {
            return Ok(());
        };
        let tmp = path.with_extension("jsonl.tmp");
        std::fs::write(&tmp, self.to_jsonl()?)?;
        std::fs::rename(&tmp, &path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        self.log = Some(BufWriter::new(file));
        Ok(())
    }
}

/// Parses a log, returning the manifest, warnings, the byte length of the
/// valid prefix, and whether that prefix ends without a newline.
fn parse_log(text: &str) -> Result<(Manifest, Vec<String>, usize, bool), HarvestError> {
    let mut m = Manifest::new();
    let mut warnings = Vec::new();
    let mut valid_len = 0;
    let mut offset = 0;
    let lines: Vec<&str> = text.split_inclusive('\n').collect();
    let last_content = lines.iter().rposition(|l| !l.trim().is_empty());
    for (i, raw) in lines.iter().enumerate() {
        offset += raw.len();
        let line = raw.trim();
        if line.is_empty() {
            valid_len = offset;
            continue;
        }
        match serde_json::from_str::<ImageRecord>(line) {
            Ok(rec) => {
                m.apply(rec);
                valid_len = offset;
            }
            Err(e) if Some(i) == last_content => {
                warnings.push(format!("line {}: truncated trailing record dropped ({e})", i + 1));
            }
            Err(e) => {
                return Err(HarvestError::CorruptManifest { line: i + 1, reason: e.to_string() })
            }
        }
    }
    let unterminated = valid_len > 0 && !text[..valid_len].ends_with('\n');
    Ok((m, warnings, valid_len, unterminated))
}

/// Loads a manifest for reading only.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<(Manifest, Vec<String>), HarvestError> {
    let text = std::fs::read_to_string(path.as_ref())?;
    Manifest::parse_jsonl(&text)
}
