//! Average-hash fingerprints and near-duplicate removal.
//!
//! Records are swept in ascending rank. A record is dropped when its hash is
//! within `threshold` bits of any record already kept, so the earliest result
//! of every duplicate group survives.

mod bktree;
mod phash;

use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::harvest::{HarvestError, ImageRecord, Manifest, RecordStatus};

pub use bktree::HammingIndex;
pub use phash::{ahash, ahash_bytes, ahash_file, ahash_rgb8, hamming, luma601, PHash64};

/// Default near-duplicate threshold in bits.
pub const DEFAULT_THRESHOLD: u32 = 5;

#[derive(Debug, Error)]
pub enum DedupError {
    #[error("not a 16-digit hex hash: {0:?}")]
    BadHash(String),
    #[error("cannot decode image: {0}")]
    Decode(String),
    #[error("record {class_id}/{url} has no phash")]
    MissingHash { class_id: String, url: String },
    #[error("threshold {0} is outside 0..=64")]
    Threshold(u32),
    #[error(transparent)]
    Manifest(#[from] HarvestError),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Which records are compared with each other.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DedupScope {
    #[default]
    PerClass,
    Global,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Removal {
    /// Index of the removed record in the input slice.
    pub removed: usize,
    /// Index of the kept record it collided with (nearest, then earliest).
    pub kept: usize,
    pub distance: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DedupPartition {
    /// Input indices of kept records, in sweep order.
    pub kept: Vec<usize>,
    pub removed: Vec<Removal>,
}

/// Greedy keep-earliest sweep over one group of records.
pub fn dedup_class(records: &[ImageRecord], threshold: u32) -> Result<DedupPartition, DedupError> {
    let hashes: Vec<(u64, PHash64)> = records
        .iter()
        .map(|r| {
            r.phash.map(|h| (r.rank, h)).ok_or_else(|| DedupError::MissingHash {
                class_id: r.class_id.clone(),
                url: r.url.clone(),
            })
        })
        .collect::<Result<_, _>>()?;
    let mut order: Vec<usize> = (0..records.len()).collect();
    order.sort_by_key(|&i| (hashes[i].0, records[i].class_id.as_str()));
    dedup_sweep(&order, |i| hashes[i].1, threshold)
}

/// Sweep over pre-ordered indices. `hash_of` maps an index to its hash.
pub fn dedup_sweep(
    order: &[usize],
    hash_of: impl Fn(usize) -> PHash64,
    threshold: u32,
) -> Result<DedupPartition, DedupError> {
    if threshold > 64 {
        return Err(DedupError::Threshold(threshold));
    }
    let mut index: HammingIndex<usize> = HammingIndex::new();
    let mut out = DedupPartition::default();
    for &i in order {
        let h = hash_of(i);
        let nearest = index
            .radius_query(h, threshold)
            .into_iter()
            .map(|(_, &k, d)| (d, k))
            .min();
        match nearest {
            Some((distance, k)) => {
                out.removed.push(Removal { removed: i, kept: out.kept[k], distance })
            }
            None => {
                index.insert(h, out.kept.len());
                out.kept.push(i);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DedupReportRow {
    pub class_id: String,
    pub kept_path: String,
    pub removed_path: String,
    pub distance: u32,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct DedupReport {
    pub examined: usize,
    pub kept: usize,
    pub rows: Vec<DedupReportRow>,
}

impl DedupReport {
    pub fn to_csv(&self) -> Result<String, DedupError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["class_id", "kept_path", "removed_path", "distance"])?;
        for r in &self.rows {
            w.write_record([&r.class_id, &r.kept_path, &r.removed_path, &r.distance.to_string()])?;
        }
        Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct HashSummary {
    pub hashed: usize,
    pub already_hashed: usize,
    pub failed: usize,
}

/// Hashes every downloaded record lacking a `phash`, in parallel, and appends
/// the updated records in rank order. Unreadable files become `rejected`.
pub fn hash_manifest(manifest: &mut Manifest) -> Result<HashSummary, DedupError> {
    let mut todo: Vec<ImageRecord> = manifest
        .records()
        .iter()
        .filter(|r| r.status == RecordStatus::Downloaded && r.phash.is_none())
        .cloned()
        .collect();
    let already = manifest
        .records()
        .iter()
        .filter(|r| r.status == RecordStatus::Downloaded && r.phash.is_some())
        .count();
    todo.sort_by(|a, b| (&a.class_id, a.rank).cmp(&(&b.class_id, b.rank)));
    let results: Vec<Result<PHash64, DedupError>> = todo
        .par_iter()
        .map(|r| match r.local_path.as_deref() {
            Some(p) => ahash_file(Path::new(p)),
            None => Err(DedupError::Decode("no local path".into())),
        })
        .collect();
    let mut summary = HashSummary { already_hashed: already, ..Default::default() };
    for (mut rec, res) in todo.into_iter().zip(results) {
        match res {
            Ok(h) => {
                rec.phash = Some(h);
                summary.hashed += 1;
            }
            Err(e) => {
                rec.status = RecordStatus::Rejected;
                rec.error = Some(format!("hash failed: {e}"));
                summary.failed += 1;
            }
        }
        manifest.append(rec)?;
    }
    Ok(summary)
}

/// Marks near-duplicates among downloaded records as `removed_duplicate`.
/// Every record must already carry a hash (see [`hash_manifest`]).
pub fn dedup_manifest(
    manifest: &mut Manifest,
    threshold: u32,
    scope: DedupScope,
) -> Result<DedupReport, DedupError> {
    let live: Vec<ImageRecord> = manifest
        .records()
        .iter()
        .filter(|r| r.status == RecordStatus::Downloaded)
        .cloned()
        .collect();
    let groups: Vec<Vec<ImageRecord>> = match scope {
        DedupScope::Global => vec![live],
        DedupScope::PerClass => {
            let mut by_class: std::collections::BTreeMap<String, Vec<ImageRecord>> =
                Default::default();
            for r in live {
                by_class.entry(r.class_id.clone()).or_default().push(r);
            }
            by_class.into_values().collect()
        }
    };
    let mut report = DedupReport::default();
    for group in groups {
        let part = dedup_class(&group, threshold)?;
        report.examined += group.len();
        report.kept += part.kept.len();
        for rm in &part.removed {
            let removed = &group[rm.removed];
            let kept = &group[rm.kept];
            report.rows.push(DedupReportRow {
                class_id: removed.class_id.clone(),
                kept_path: kept.local_path.clone().unwrap_or_default(),
                removed_path: removed.local_path.clone().unwrap_or_default(),
                distance: rm.distance,
            });
            let mut updated = removed.clone();
            updated.status = RecordStatus::RemovedDuplicate;
            updated.error = Some(format!("within {} bits of {}", rm.distance, kept.url));
            manifest.append(updated)?;
        }
    }
    Ok(report)
}

/// `local_path,phash_hex` rows for every hashed record.
pub fn hash_dump_csv(manifest: &Manifest) -> Result<String, DedupError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["local_path", "phash_hex"])?;
    for r in manifest.records() {
        if let (Some(p), Some(h)) = (&r.local_path, r.phash) {
            w.write_record([p.as_str(), &h.to_hex()])?;
        }
    }
    Ok(String::from_utf8(w.into_inner().map_err(|e| e.into_error())?).expect("csv is utf-8"))
}
