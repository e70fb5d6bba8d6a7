use std::collections::BTreeMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use chrono::Utc;
use sha2::{Digest, Sha256};

use super::manifest::{ImageRecord, Manifest, RecordStatus};
use super::{HarvestError, ImageHit, RetryPolicy, DEFAULT_WORKERS};

/// Body and content type of a successful fetch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FetchedBody {
    pub content_type: Option<String>,
    pub bytes: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct FetchError {
    pub message: String,
    pub retryable: bool,
}

/// Transport used by [`download_batch`]. Implementations must be shareable
/// across worker threads.
pub trait Fetcher: Sync {
    fn fetch(&self, url: &str) -> Result<FetchedBody, FetchError>;
}

/// Blocking HTTP fetcher with a per-request timeout and a body size limit.
pub struct HttpFetcher {
    agent: ureq::Agent,
    max_bytes: u64,
}

impl HttpFetcher {
    pub fn new(timeout: Duration) -> Self {
        let config = ureq::Agent::config_builder()
            .timeout_global(Some(timeout))
            .http_status_as_error(false)
            .user_agent("webcorpus/0.1")
            .build();
        HttpFetcher { agent: ureq::Agent::new_with_config(config), max_bytes: 64 * 1024 * 1024 }
    }
}

impl Fetcher for HttpFetcher {
    fn fetch(&self, url: &str) -> Result<FetchedBody, FetchError> {
        let mut resp = self.agent.get(url).call().map_err(|e| FetchError {
            retryable: !matches!(e, ureq::Error::BadUri(_) | ureq::Error::Protocol(_)),
            message: e.to_string(),
        })?;
        let status = resp.status().as_u16();
        if !(200..300).contains(&status) {
            return Err(FetchError {
                message: format!("http status {status}"),
                retryable: status == 429 || status >= 500,
            });
        }
        let content_type = resp
            .headers()
            .get("content-type")
            .and_then(|v| v.to_str().ok())
            .map(|s| s.to_string());
        let bytes = resp
            .body_mut()
            .with_config()
            .limit(self.max_bytes)
            .read_to_vec()
            .map_err(|e| FetchError { message: e.to_string(), retryable: true })?;
        Ok(FetchedBody { content_type, bytes })
    }
}

#[derive(Debug, Clone)]
pub struct DownloadOptions {
    pub root: PathBuf,
    pub workers: usize,
    pub retry: RetryPolicy,
    /// Minimum `(width, height)`; smaller images are recorded as rejected.
    pub min_resolution: Option<(u32, u32)>,
}

impl DownloadOptions {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        DownloadOptions {
            root: root.into(),
            workers: DEFAULT_WORKERS,
            retry: RetryPolicy::default(),
            min_resolution: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct DownloadSummary {
    pub attempted: usize,
    pub downloaded: usize,
    pub failed: usize,
    pub rejected: usize,
    /// Hits already settled in the manifest and not attempted again.
    pub skipped: usize,
}

/// File name for a downloaded image: zero-padded rank, then 16 hex digits of
/// the URL's SHA-256.
pub fn image_file_name(rank: u64, url: &str, ext: &str) -> String {
    let digest = Sha256::digest(url.as_bytes());
    let hex: String = digest[..8].iter().map(|b| format!("{b:02x}")).collect();
    format!("{rank:06}_{hex}.{ext}")
}

fn validate_class_id(class_id: &str) -> Result<(), HarvestError> {
    let bad = class_id.is_empty()
        || class_id == "."
        || class_id == ".."
        || class_id.contains(['/', '\\', '\0']);
    if bad {
        return Err(HarvestError::InvalidConfig(format!(
            "class id {class_id:?} cannot be used as a directory name"
        )));
    }
    Ok(())
}

struct Job<'a> {
    class_id: &'a str,
    hit: &'a ImageHit,
}

enum Outcome {
    Done(ImageRecord),
    Fatal(ImageRecord, std::io::Error),
}

/// Downloads every hit into `<root>/<class_id>/` with at most `workers`
/// requests in flight. Each hit gets a `pending` line before its attempt and
/// a final `downloaded`/`failed`/`rejected` line after it.
///
/// Hits whose effective record is already `downloaded` (file present),
/// `rejected` or `removed_duplicate` are skipped, so re-runs are idempotent.
/// A write failure on disk aborts the batch; records appended so far remain.
pub fn download_batch(
    manifest: &mut Manifest,
    hits_by_class: &BTreeMap<String, Vec<ImageHit>>,
    fetcher: &dyn Fetcher,
    opts: &DownloadOptions,
) -> Result<DownloadSummary, HarvestError> {
    if opts.workers == 0 {
        return Err(HarvestError::InvalidConfig("workers must be at least 1".into()));
    }
    let mut summary = DownloadSummary::default();
    let mut jobs = Vec::new();
    for (class_id, hits) in hits_by_class {
        validate_class_id(class_id)?;
        std::fs::create_dir_all(opts.root.join(class_id))?;
        for hit in hits {
            if is_settled(manifest.get(class_id, &hit.url)) {
                summary.skipped += 1;
                continue;
            }
            manifest.append(ImageRecord::pending(class_id, &hit.url, &hit.provider, hit.rank))?;
            jobs.push(Job { class_id, hit });
        }
    }
    summary.attempted = jobs.len();

    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let (tx, rx) = mpsc::channel::<Outcome>();
    let mut fatal: Option<String> = None;

    thread::scope(|scope| {
        for _ in 0..opts.workers.min(jobs.len().max(1)) {
            let tx = tx.clone();
            let (jobs, next, abort) = (&jobs, &next, &abort);
            scope.spawn(move || loop {
                if abort.load(Ordering::SeqCst) {
                    break;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(job) = jobs.get(i) else { break };
                let outcome = attempt(job, fetcher, opts);
                if matches!(outcome, Outcome::Fatal(..)) {
                    abort.store(true, Ordering::SeqCst);
                }
                if tx.send(outcome).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        // single writer: only this thread touches the manifest
        for outcome in rx {
            let record = match outcome {
                Outcome::Done(r) => r,
                Outcome::Fatal(r, e) => {
                    fatal.get_or_insert_with(|| format!("{}: {e}", r.url));
                    continue;
                }
            };
            match record.status {
                RecordStatus::Downloaded => summary.downloaded += 1,
                RecordStatus::Failed => summary.failed += 1,
                RecordStatus::Rejected => summary.rejected += 1,
                _ => {}
            }
            if let Err(e) = manifest.append(record) {
                abort.store(true, Ordering::SeqCst);
                fatal.get_or_insert_with(|| format!("manifest append: {e}"));
            }
        }
    });

    match fatal {
        Some(msg) => Err(HarvestError::Storage(msg)),
        None => Ok(summary),
    }
}

fn is_settled(existing: Option<&ImageRecord>) -> bool {
    match existing {
        Some(r) => match r.status {
            RecordStatus::Downloaded => {
                r.local_path.as_deref().is_some_and(|p| Path::new(p).is_file())
            }
            RecordStatus::Rejected | RecordStatus::RemovedDuplicate => true,
            RecordStatus::Pending | RecordStatus::Failed => false,
        },
        None => false,
    }
}

fn attempt(job: &Job<'_>, fetcher: &dyn Fetcher, opts: &DownloadOptions) -> Outcome {
    let mut record = ImageRecord::pending(job.class_id, &job.hit.url, &job.hit.provider, job.hit.rank);
    let fetched = opts.retry.run(|| fetcher.fetch(&job.hit.url), |e| e.retryable);
    record.fetched_at = Utc::now();
    let body = match fetched {
        Ok(b) => b,
        Err(e) => {
            record.status = RecordStatus::Failed;
            record.error = Some(e.message);
            return Outcome::Done(record);
        }
    };
    record.byte_size = Some(body.bytes.len() as u64);
    if let Some(ct) = &body.content_type {
        let mime = ct.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
        if !mime.starts_with("image/") {
            record.status = RecordStatus::Rejected;
            record.error = Some(format!("non-image content type: {mime}"));
            return Outcome::Done(record);
        }
    }
    let reader = match image::ImageReader::new(Cursor::new(&body.bytes)).with_guessed_format() {
        Ok(r) => r,
        Err(e) => {
            record.status = RecordStatus::Rejected;
            record.error = Some(format!("undecodable image: {e}"));
            return Outcome::Done(record);
        }
    };
    let ext = reader
        .format()
        .and_then(|f| f.extensions_str().first().copied())
        .unwrap_or("img")
        .to_string();
    let (width, height) = match reader.into_dimensions() {
        Ok(d) => d,
        Err(e) => {
            record.status = RecordStatus::Rejected;
            record.error = Some(format!("undecodable image: {e}"));
            return Outcome::Done(record);
        }
    };
    record.width = Some(width);
    record.height = Some(height);
    if let Some((min_w, min_h)) = opts.min_resolution {
        if width < min_w || height < min_h {
            record.status = RecordStatus::Rejected;
            record.error =
                Some(format!("below minimum resolution {min_w}x{min_h}: {width}x{height}"));
            return Outcome::Done(record);
        }
    }
    let path = opts
        .root
        .join(job.class_id)
        .join(image_file_name(job.hit.rank, &job.hit.url, &ext));
    if let Err(e) = std::fs::write(&path, &body.bytes) {
        return Outcome::Fatal(record, e);
    }
    record.local_path = Some(path.to_string_lossy().into_owned());
    record.status = RecordStatus::Downloaded;
    Outcome::Done(record)
}
