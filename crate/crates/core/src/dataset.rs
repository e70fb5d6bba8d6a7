//! Split generation and corpus statistics.
//!
//! Only records whose effective status is `downloaded` count as usable:
//! `rejected` and `removed_duplicate` images never enter splits or stats.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harvest::{ImageRecord, Manifest, RecordStatus};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("per-class target must be at least 1")]
    InvalidTarget,
    #[error("split listing line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// Uniform sample without replacement.
    Random,
    /// Earliest-ranked survivors first.
    ControlledChronological,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub strategy: SplitStrategy,
    pub per_class_target: Option<usize>,
    pub seed: u64,
}

impl SplitConfig {
    pub fn chronological(target: usize) -> Self {
        SplitConfig {
            strategy: SplitStrategy::ControlledChronological,
            per_class_target: Some(target),
            seed: 0,
        }
    }

    pub fn random(target: Option<usize>, seed: u64) -> Self {
        SplitConfig { strategy: SplitStrategy::Random, per_class_target: target, seed }
    }
}

/// A split: class id to local paths, each list in rank order.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitListing {
    pub classes: BTreeMap<String, Vec<String>>,
    /// Classes that had fewer survivors than the target.
    pub warnings: Vec<String>,
    /// Classes present in the manifest with no usable image at all.
    pub shortfall: Vec<String>,
}

impl SplitListing {
    /// `class_id<TAB>local_path` rows, class-then-rank order.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (class, paths) in &self.classes {
            for p in paths {
                let _ = writeln!(out, "{class}\t{p}");
            }
        }
        out
    }

    pub fn parse_tsv(text: &str) -> Result<Self, DatasetError> {
        let mut listing = SplitListing::default();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let (class, path) = line.split_once('\t').ok_or_else(|| DatasetError::Parse {
                line: i + 1,
                reason: "expected `class_id<TAB>local_path`".into(),
            })?;
            listing.classes.entry(class.to_string()).or_default().push(path.to_string());
        }
        Ok(listing)
    }

    pub fn counts(&self) -> BTreeMap<String, usize> {
        self.classes.iter().map(|(c, v)| (c.clone(), v.len())).collect()
    }

    /// Copies the listed files into `<dest>/<class_id>/`.
    pub fn materialize(&self, dest: &Path) -> Result<usize, DatasetError> {
        let mut n = 0;
        for (class, paths) in &self.classes {
            let dir = dest.join(class);
            std::fs::create_dir_all(&dir)?;
            for p in paths {
                let src = PathBuf::from(p);
                let name = src.file_name().ok_or_else(|| DatasetError::Parse {
                    line: 0,
                    reason: format!("path without file name: {p}"),
                })?;
                std::fs::copy(&src, dir.join(name))?;
                n += 1;
            }
        }
        Ok(n)
    }
}

fn usable(r: &ImageRecord) -> bool {
    r.status == RecordStatus::Downloaded && r.local_path.is_some()
}

/// Builds a split from the effective manifest state.
pub fn make_split(manifest: &Manifest, config: &SplitConfig) -> Result<SplitListing, DatasetError> {
    if config.per_class_target == Some(0) {
        return Err(DatasetError::InvalidTarget);
    }
    let mut listing = SplitListing::default();
    for class in manifest.class_ids() {
        let survivors: Vec<&ImageRecord> =
            manifest.class_records(&class).into_iter().filter(|r| usable(r)).collect();
        if survivors.is_empty() {
            log::warn!("class {class}: no usable images");
            listing.shortfall.push(class);
            continue;
        }
        let target = config.per_class_target.unwrap_or(survivors.len());
        if survivors.len() < target {
            let msg = format!("class {class}: {} images available, target {target}", survivors.len());
            log::warn!("{msg}");
            listing.warnings.push(msg);
        }
        let take = target.min(survivors.len());
        let chosen: Vec<&ImageRecord> = match config.strategy {
            SplitStrategy::ControlledChronological => survivors[..take].to_vec(),
            SplitStrategy::Random => {
                let mut rng = ChaCha8Rng::seed_from_u64(class_seed(config.seed, &class));
                let mut picked: Vec<&ImageRecord> =
                    survivors.choose_multiple(&mut rng, take).copied().collect();
                picked.sort_by_key(|r| r.rank);
                picked
            }
        };
        listing.classes.insert(
            class,
            chosen.iter().map(|r| r.local_path.clone().unwrap_or_default()).collect(),
        );
    }
    Ok(listing)
}

// Per-class stream so one class's size does not perturb another's draw.
fn class_seed(seed: u64, class: &str) -> u64 {
    class
        .bytes()
        .fold(seed ^ 0xcbf2_9ce4_8422_2325, |h, b| (h ^ b as u64).wrapping_mul(0x100_0000_01b3))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub per_class: BTreeMap<String, usize>,
    pub average: f64,
    pub minimum: usize,
    pub maximum: usize,
    pub total: usize,
}

impl CorpusStats {
    pub fn from_counts(per_class: BTreeMap<String, usize>) -> Self {
        if per_class.is_empty() {
            return CorpusStats::default();
        }
        let total: usize = per_class.values().sum();
        CorpusStats {
            average: total as f64 / per_class.len() as f64,
            minimum: *per_class.values().min().unwrap(),
            maximum: *per_class.values().max().unwrap(),
            total,
            per_class,
        }
    }

    /// Summary block with the usual corpus-table columns, then per-class detail.
    pub fn to_csv(&self, name: &str) -> Result<String, DatasetError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "DB Name",
            "Average number of images per class",
            "Minimum number of images per class",
            "Maximum number of images per class",
            "total number",
        ])?;
        w.write_record([
            name.to_string(),
            format_avg(self.average),
            self.minimum.to_string(),
            self.maximum.to_string(),
            self.total.to_string(),
        ])?;
        let mut detail = csv::Writer::from_writer(Vec::new());
        detail.write_record(["class_id", "images"])?;
        for (c, n) in &self.per_class {
            detail.write_record([c.clone(), n.to_string()])?;
        }
        let mut bytes = w.into_inner().map_err(|e| e.into_error())?;
        // blank line between the summary block and the per-class block
        bytes.push(b'\n');
        bytes.extend(detail.into_inner().map_err(|e| e.into_error())?);
        Ok(String::from_utf8(bytes).expect("csv is utf-8"))
    }
}

fn format_avg(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

/// Counts usable images per class in a manifest.
pub fn compute_stats(manifest: &Manifest) -> CorpusStats {
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for r in manifest.records().iter().filter(|r| usable(r)) {
        *counts.entry(r.class_id.clone()).or_default() += 1;
    }
    CorpusStats::from_counts(counts)
}

pub fn split_stats(listing: &SplitListing) -> CorpusStats {
    CorpusStats::from_counts(listing.counts())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(classes: &[(&str, usize)]) -> Manifest {
        let mut recs = Vec::new();
        for (c, n) in classes {
            for i in 0..*n {
                let mut r = ImageRecord::pending(c, &format!("http://{c}/{i}"), "fx", i as u64);
                r.status = RecordStatus::Downloaded;
                r.local_path = Some(format!("{c}/{i}.jpg"));
                recs.push(r);
            }
        }
        Manifest::from_records(recs)
    }

    #[test]
    fn chronological_prefix() {
        let m = manifest(&[("jay", 5)]);
        let s = make_split(&m, &SplitConfig::chronological(3)).unwrap();
        assert_eq!(s.classes["jay"], ["jay/0.jpg", "jay/1.jpg", "jay/2.jpg"]);
        assert!(s.warnings.is_empty());
    }

    #[test]
    fn chronological_skips_removed() {
        let mut m = manifest(&[("jay", 5)]);
        let mut r = m.get("jay", "http://jay/1").unwrap().clone();
        r.status = RecordStatus::RemovedDuplicate;
        m.append(r).unwrap();
        let s = make_split(&m, &SplitConfig::chronological(3)).unwrap();
        assert_eq!(s.classes["jay"], ["jay/0.jpg", "jay/2.jpg", "jay/3.jpg"]);
    }

    #[test]
    fn random_is_seeded() {
        let m = manifest(&[("a", 40), ("b", 30)]);
        let cfg = SplitConfig::random(Some(10), 7);
        let x = make_split(&m, &cfg).unwrap();
        assert_eq!(x, make_split(&m, &cfg).unwrap());
        assert_eq!(x.classes["a"].len(), 10);
        let y = make_split(&m, &SplitConfig::random(Some(10), 8)).unwrap();
        assert_ne!(x.classes["a"], y.classes["a"]);
    }

    #[test]
    fn shortfall_takes_all_and_warns() {
        let m = manifest(&[("a", 4)]);
        let s = make_split(&m, &SplitConfig::chronological(10)).unwrap();
        assert_eq!(s.classes["a"].len(), 4);
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn empty_class_goes_to_shortfall() {
        let mut m = manifest(&[("a", 2)]);
        let mut r = ImageRecord::pending("b", "http://b/0", "fx", 0);
        r.status = RecordStatus::Failed;
        m.append(r).unwrap();
        let s = make_split(&m, &SplitConfig::chronological(1)).unwrap();
        assert_eq!(s.shortfall, ["b"]);
        assert!(!s.classes.contains_key("b"));
    }

    #[test]
    fn zero_target_rejected() {
        assert!(make_split(&Manifest::new(), &SplitConfig::chronological(0)).is_err());
    }

    #[test]
    fn stats_arithmetic() {
        let st = compute_stats(&manifest(&[("a", 2), ("b", 5), ("c", 11)]));
        assert_eq!((st.minimum, st.maximum, st.total), (2, 11, 18));
        assert_eq!(st.average, 6.0);
        assert_eq!(compute_stats(&Manifest::new()), CorpusStats::default());
    }

    #[test]
    fn stats_csv_schema() {
        let st = CorpusStats::from_counts([("a".to_string(), 1321), ("b".to_string(), 13331)].into());
        let csv = st.to_csv("Random Split").unwrap();
        let mut lines = csv.lines();
        assert!(lines.next().unwrap().starts_with("DB Name,Average number of images per class"));
        assert_eq!(lines.next().unwrap(), "Random Split,7326,1321,13331,14652");
    }

    #[test]
    fn listing_round_trip() {
        let m = manifest(&[("a", 3), ("b", 2)]);
        let s = make_split(&m, &SplitConfig::chronological(2)).unwrap();
        let back = SplitListing::parse_tsv(&s.to_tsv()).unwrap();
        assert_eq!(back.classes, s.classes);
        assert_eq!(split_stats(&back).total, 4);
    }
}
