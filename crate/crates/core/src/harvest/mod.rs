//! URL collection from search providers and concurrent image download.
//!
//! Collection paginates a [`SearchProvider`] until it runs dry or the per-query
//! cap is reached. Ranks record the order the provider returned results, which
//! is what the chronological split later relies on. Downloads run on a bounded
//! worker pool; every outcome lands in the [`Manifest`].

mod download;
pub mod fixture;
mod manifest;

use std::collections::{BTreeMap, HashSet};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::taxonomy::QuerySpec;

pub use download::{
    download_batch, DownloadOptions, DownloadSummary, FetchError, FetchedBody, Fetcher,
    HttpFetcher,
};
pub use manifest::{load_manifest, ImageRecord, Manifest, RecordStatus};

/// Default per-query URL cap.
pub const DEFAULT_CAP: usize = 10_000;
/// Default number of concurrent downloads.
pub const DEFAULT_WORKERS: usize = 4;
/// Default provider request rate, in requests per second.
pub const DEFAULT_RATE_LIMIT: f64 = 2.0;

#[derive(Debug, Error)]
pub enum HarvestError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("manifest line {line} is corrupt: {reason}")]
    CorruptManifest { line: usize, reason: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("storage failure, download aborted: {0}")]
    Storage(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageHit {
    pub url: String,
    pub query: String,
    pub provider: String,
    pub page: u32,
    /// Position in the order results were returned for the class.
    pub rank: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SearchPage {
    pub hits: Vec<ImageHit>,
    pub has_more: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{message}")]
pub struct ProviderError {
    pub message: String,
    pub retryable: bool,
}

/// A source of image search results. `has_more == false` means every later
/// page is empty.
pub trait SearchProvider: Send + Sync {
    fn name(&self) -> &str;
    fn search(&self, query: &str, page: u32) -> Result<SearchPage, ProviderError>;
}

impl<P: SearchProvider + ?Sized> SearchProvider for &P {
    fn name(&self) -> &str {
        (**self).name()
    }
    fn search(&self, query: &str, page: u32) -> Result<SearchPage, ProviderError> {
        (**self).search(query, page)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub attempts: u32,
    pub base_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy { attempts: 3, base_backoff: Duration::from_millis(500) }
    }
}

impl RetryPolicy {
    pub fn none() -> Self {
        RetryPolicy { attempts: 1, base_backoff: Duration::ZERO }
    }

    /// Runs `op` up to `attempts` times, doubling the sleep between tries.
    /// Non-retryable errors return immediately.
    pub fn run<T, E>(
        &self,
        mut op: impl FnMut() -> Result<T, E>,
        retryable: impl Fn(&E) -> bool,
    ) -> Result<T, E> {
        let mut backoff = self.base_backoff;
        let mut attempt = 1;
        loop {
            match op() {
                Ok(v) => return Ok(v),
                Err(e) if attempt >= self.attempts.max(1) || !retryable(&e) => return Err(e),
                Err(_) => {
                    if !backoff.is_zero() {
                        thread::sleep(backoff);
                    }
                    backoff *= 2;
                    attempt += 1;
                }
            }
        }
    }
}

/// Token bucket limiter; `acquire` blocks until a token is available.
#[derive(Debug)]
pub struct RateLimiter {
    rate: f64,
    burst: f64,
    state: Mutex<(f64, Instant)>,
}

impl RateLimiter {
    pub fn new(rate_per_sec: f64, burst: u32) -> Self {
        assert!(rate_per_sec > 0.0, "rate must be positive");
        let burst = burst.max(1) as f64;
        RateLimiter { rate: rate_per_sec, burst, state: Mutex::new((burst, Instant::now())) }
    }

    pub fn acquire(&self) {
        loop {
            let wait = {
                let mut st = self.state.lock().unwrap();
                let now = Instant::now();
                let refill = now.duration_since(st.1).as_secs_f64() * self.rate;
                st.0 = (st.0 + refill).min(self.burst);
                st.1 = now;
                if st.0 >= 1.0 {
                    st.0 -= 1.0;
                    return;
                }
                (1.0 - st.0) / self.rate
            };
            thread::sleep(Duration::from_secs_f64(wait));
        }
    }
}

/// Wraps a provider with a per-provider request rate limit.
pub struct RateLimited<P> {
    inner: P,
    limiter: RateLimiter,
}

impl<P: SearchProvider> RateLimited<P> {
    pub fn new(inner: P, rate_per_sec: f64) -> Self {
        RateLimited { inner, limiter: RateLimiter::new(rate_per_sec, 1) }
    }
}

impl<P: SearchProvider> SearchProvider for RateLimited<P> {
    fn name(&self) -> &str {
        self.inner.name()
    }
    fn search(&self, query: &str, page: u32) -> Result<SearchPage, ProviderError> {
        self.limiter.acquire();
        self.inner.search(query, page)
    }
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub cap: usize,
    pub retry: RetryPolicy,
    /// Hard stop on pagination for providers that never report exhaustion.
    pub max_pages: u32,
}

impl Default for CollectOptions {
    fn default() -> Self {
        CollectOptions { cap: DEFAULT_CAP, retry: RetryPolicy::default(), max_pages: 10_000 }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Collected {
    pub hits: Vec<ImageHit>,
    /// Set when pagination stopped on a provider error.
    pub partial: bool,
    pub error: Option<String>,
    pub pages: u32,
}

/// Paginates `provider` for `query` until it runs dry or `cap` unique URLs are
/// collected. Repeated URLs keep their first position; ranks are dense from 0.
pub fn collect_urls(
    provider: &dyn SearchProvider,
    query: &str,
    opts: &CollectOptions,
) -> Result<Collected, HarvestError> {
    if opts.cap == 0 {
        return Err(HarvestError::InvalidConfig("cap must be at least 1".into()));
    }
    let mut out = Collected::default();
    let mut seen = HashSet::new();
    let mut page = 0;
    while out.hits.len() < opts.cap && page < opts.max_pages {
        let result = opts.retry.run(|| provider.search(query, page), |e| e.retryable);
        let resp = match result {
            Ok(r) => r,
            Err(e) => {
                log::warn!("{}: query {query:?} page {page} failed: {e}", provider.name());
                out.partial = true;
                out.error = Some(e.message);
                break;
            }
        };
        out.pages += 1;
        for mut hit in resp.hits {
            if out.hits.len() >= opts.cap {
                break;
            }
            if seen.insert(hit.url.clone()) {
                hit.rank = out.hits.len() as u64;
                hit.page = page;
                out.hits.push(hit);
            }
        }
        if !resp.has_more {
            break;
        }
        page += 1;
    }
    Ok(out)
}

/// Collects every query of a class in spec order and merges the results into
/// one chronological list; each query keeps its own cap.
pub fn collect_class(
    provider: &dyn SearchProvider,
    spec: &QuerySpec,
    opts: &CollectOptions,
) -> Result<(Vec<ImageHit>, Vec<String>), HarvestError> {
    let mut merged = Vec::new();
    let mut seen = HashSet::new();
    let mut problems = Vec::new();
    for q in &spec.queries {
        let c = collect_urls(provider, &q.text, opts)?;
        if let Some(e) = c.error {
            problems.push(format!("{} / {:?}: {e}", spec.class_id, q.text));
        }
        for mut hit in c.hits {
            if seen.insert(hit.url.clone()) {
                hit.rank = merged.len() as u64;
                merged.push(hit);
            }
        }
    }
    Ok((merged, problems))
}

/// One line of a hits file: an [`ImageHit`] tagged with its class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassHit {
    pub class_id: String,
    #[serde(flatten)]
    pub hit: ImageHit,
}

pub fn write_hits_jsonl(hits: &BTreeMap<String, Vec<ImageHit>>) -> Result<String, HarvestError> {
    let mut out = String::new();
    for (class_id, list) in hits {
        for hit in list {
            let row = ClassHit { class_id: class_id.clone(), hit: hit.clone() };
            out.push_str(&serde_json::to_string(&row)?);
            out.push('\n');
        }
    }
    Ok(out)
}

pub fn read_hits_jsonl(text: &str) -> Result<BTreeMap<String, Vec<ImageHit>>, HarvestError> {
    let mut out: BTreeMap<String, Vec<ImageHit>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let row: ClassHit = serde_json::from_str(line).map_err(|e| {
            HarvestError::InvalidConfig(format!("hits line {}: {e}", i + 1))
        })?;
        out.entry(row.class_id).or_default().push(row.hit);
    }
    for list in out.values_mut() {
        list.sort_by_key(|h| h.rank);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::fixture::StaticProvider;
    use super::*;
    use std::sync::atomic::{AtomicU32, Ordering};

    fn pages(n_pages: usize, per_page: usize) -> Vec<Vec<String>> {
        (0..n_pages)
            .map(|p| (0..per_page).map(|i| format!("http://img/{p}/{i}.jpg")).collect())
            .collect()
    }

    #[test]
    fn three_pages_of_hundred() {
        let p = StaticProvider::new("fx").with_query("jay bird", pages(3, 100));
        let c = collect_urls(&p, "jay bird", &CollectOptions::default()).unwrap();
        assert_eq!(c.hits.len(), 300);
        assert!(c.hits.iter().enumerate().all(|(i, h)| h.rank == i as u64));
        assert!(!c.partial);
        assert_eq!(c.hits[150].page, 1);
    }

    #[test]
    fn cap_truncates() {
        let p = StaticProvider::new("fx").with_query("q", pages(120, 100));
        let c = collect_urls(&p, "q", &CollectOptions::default()).unwrap();
        assert_eq!(c.hits.len(), 10_000);
        assert_eq!(c.hits.last().unwrap().url, "http://img/99/99.jpg");
        assert_eq!(c.pages, 100);
    }

    #[test]
    fn repeated_url_keeps_first_rank() {
        let mut pg = pages(2, 3);
        pg[1][1] = pg[0][2].clone();
        let p = StaticProvider::new("fx").with_query("q", pg.clone());
        let c = collect_urls(&p, "q", &CollectOptions::default()).unwrap();
        assert_eq!(c.hits.len(), 5);
        let pos: Vec<_> = c.hits.iter().filter(|h| h.url == pg[0][2]).collect();
        assert_eq!(pos.len(), 1);
        assert_eq!(pos[0].rank, 2);
        assert_eq!(pos[0].page, 0);
    }

    #[test]
    fn zero_cap_is_rejected() {
        let p = StaticProvider::new("fx");
        let opts = CollectOptions { cap: 0, ..Default::default() };
        assert!(collect_urls(&p, "q", &opts).is_err());
    }

    struct Flaky {
        calls: AtomicU32,
        fail_from_page: u32,
    }

    impl SearchProvider for Flaky {
        fn name(&self) -> &str {
            "flaky"
        }
        fn search(&self, _q: &str, page: u32) -> Result<SearchPage, ProviderError> {
            self.calls.fetch_add(1, Ordering::SeqCst);
            if page >= self.fail_from_page {
                return Err(ProviderError { message: "connection reset".into(), retryable: true });
            }
            Ok(SearchPage {
                hits: vec![ImageHit {
                    url: format!("http://x/{page}"),
                    query: String::new(),
                    provider: "flaky".into(),
                    page,
                    rank: 0,
                }],
                has_more: true,
            })
        }
    }

    #[test]
    fn transport_errors_retry_then_flag_partial() {
        let p = Flaky { calls: AtomicU32::new(0), fail_from_page: 2 };
        let opts = CollectOptions {
            retry: RetryPolicy { attempts: 3, base_backoff: Duration::from_millis(1) },
            ..Default::default()
        };
        let c = collect_urls(&p, "q", &opts).unwrap();
        assert_eq!(c.hits.len(), 2);
        assert!(c.partial);
        assert_eq!(c.error.as_deref(), Some("connection reset"));
        assert_eq!(p.calls.load(Ordering::SeqCst), 2 + 3);
    }

    #[test]
    fn retry_backoff_doubles() {
        let policy = RetryPolicy { attempts: 3, base_backoff: Duration::from_millis(20) };
        let start = Instant::now();
        let r: Result<(), &str> = policy.run(|| Err("x"), |_| true);
        assert!(r.is_err());
        // 20 + 40 ms of sleeping
        assert!(start.elapsed() >= Duration::from_millis(60));
    }

    #[test]
    fn rate_limiter_spaces_requests() {
        let lim = RateLimiter::new(50.0, 1);
        let start = Instant::now();
        for _ in 0..6 {
            lim.acquire();
        }
        // first token is free, the next five need 20 ms each
        assert!(start.elapsed() >= Duration::from_millis(95));
    }

    #[test]
    fn class_merge_is_chronological() {
        let p = StaticProvider::new("fx")
            .with_query("Jay", vec![vec!["a".into(), "b".into()]])
            .with_query("Jay bird", vec![vec!["b".into(), "c".into()]]);
        let t = crate::taxonomy::parse_taxonomy("bird\t-\tbird\njay\tbird\tJay\n").unwrap();
        let spec = crate::taxonomy::expand_queries(&t, "jay", &BTreeMap::new()).unwrap();
        let (hits, problems) = collect_class(&p, &spec, &CollectOptions::default()).unwrap();
        assert!(problems.is_empty());
        let urls: Vec<_> = hits.iter().map(|h| (h.url.as_str(), h.rank)).collect();
        assert_eq!(urls, [("a", 0), ("b", 1), ("c", 2)]);
        assert_eq!(hits[2].query, "Jay bird");
    }

    #[test]
    fn hits_file_round_trip() {
        let p = StaticProvider::new("fx").with_query("q", pages(1, 3));
        let c = collect_urls(&p, "q", &CollectOptions::default()).unwrap();
        let mut m = BTreeMap::new();
        m.insert("jay".to_string(), c.hits);
        let text = write_hits_jsonl(&m).unwrap();
        assert_eq!(read_hits_jsonl(&text).unwrap(), m);
    }
}
