//! Offline stand-ins for live search engines: an in-memory provider, a
//! directory-backed provider, and a small static HTTP file server.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use super::{ImageHit, ProviderError, SearchPage, SearchProvider};

/// Directory name used for a query's fixture pages: lowercase, with every
/// non-alphanumeric character replaced by `_`.
pub fn query_slug(query: &str) -> String {
    let slug: String = query
        .trim()
        .chars()
        .flat_map(char::to_lowercase)
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect();
    slug.trim_matches('_').to_string()
}

fn make_page(provider: &str, query: &str, page: u32, urls: &[String], has_more: bool) -> SearchPage {
    SearchPage {
        hits: urls
            .iter()
            .enumerate()
            .map(|(i, u)| ImageHit {
                url: u.clone(),
                query: query.to_string(),
                provider: provider.to_string(),
                page,
                rank: i as u64,
            })
            .collect(),
        has_more,
    }
}

/// Provider serving pre-built pages from memory.
#[derive(Debug, Clone, Default)]
pub struct StaticProvider {
    name: String,
    pages: HashMap<String, Vec<Vec<String>>>,
}

impl StaticProvider {
    pub fn new(name: &str) -> Self {
        StaticProvider { name: name.to_string(), pages: HashMap::new() }
    }

    pub fn with_query(mut self, query: &str, pages: Vec<Vec<String>>) -> Self {
        self.pages.insert(query.to_string(), pages);
        self
    }
}

impl SearchProvider for StaticProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn search(&self, query: &str, page: u32) -> Result<SearchPage, ProviderError> {
        let pages = self.pages.get(query).map(Vec::as_slice).unwrap_or(&[]);
        let p = page as usize;
        let urls = pages.get(p).map(Vec::as_slice).unwrap_or(&[]);
        Ok(make_page(&self.name, query, page, urls, p + 1 < pages.len()))
    }
}

/// Provider reading `<root>/<query_slug>/page_<n>.txt`, one URL per line.
///
/// `{base}` inside a URL is replaced by the configured base URL, so fixture
/// trees can point at a [`StaticFileServer`] started on any port.
#[derive(Debug, Clone)]
pub struct FixtureProvider {
    name: String,
    root: PathBuf,
    base_url: Option<String>,
}

impl FixtureProvider {
    pub fn new(name: &str, root: impl Into<PathBuf>) -> Self {
        FixtureProvider { name: name.to_string(), root: root.into(), base_url: None }
    }

    pub fn with_base_url(mut self, base: &str) -> Self {
        self.base_url = Some(base.trim_end_matches('/').to_string());
        self
    }

    fn page_path(&self, query: &str, page: u32) -> PathBuf {
        self.root.join(query_slug(query)).join(format!("page_{page}.txt"))
    }

    /// Writes one fixture page. Used to build fixture trees.
    pub fn write_page(root: &Path, query: &str, page: u32, urls: &[String]) -> std::io::Result<()> {
        let dir = root.join(query_slug(query));
        std::fs::create_dir_all(&dir)?;
        let mut body = urls.join("\n");
        body.push('\n');
        std::fs::write(dir.join(format!("page_{page}.txt")), body)
    }
}

impl SearchProvider for FixtureProvider {
    fn name(&self) -> &str {
        &self.name
    }

    fn search(&self, query: &str, page: u32) -> Result<SearchPage, ProviderError> {
        let path = self.page_path(query, page);
        if !path.exists() {
            return Ok(make_page(&self.name, query, page, &[], false));
        }
        let text = std::fs::read_to_string(&path).map_err(|e| ProviderError {
            message: format!("{}: {e}", path.display()),
            retryable: false,
        })?;
        let urls: Vec<String> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| match &self.base_url {
                Some(base) => l.replace("{base}", base),
                None => l.to_string(),
            })
            .collect();
        let has_more = self.page_path(query, page + 1).exists();
        Ok(make_page(&self.name, query, page, &urls, has_more))
    }
}

/// Request counters exposed by [`StaticFileServer`].
#[derive(Debug, Default)]
pub struct ServerStats {
    in_flight: AtomicUsize,
    max_in_flight: AtomicUsize,
    requests: AtomicUsize,
}

impl ServerStats {
    pub fn max_in_flight(&self) -> usize {
        self.max_in_flight.load(Ordering::SeqCst)
    }

    pub fn requests(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

fn content_type_for(path: &Path) -> &'static str {
    match path.extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("jpg") | Some("jpeg") => "image/jpeg",
        Some("png") => "image/png",
        Some("gif") => "image/gif",
        Some("bmp") => "image/bmp",
        Some("webp") => "image/webp",
        Some("html") | Some("htm") => "text/html",
        Some("txt") => "text/plain",
        _ => "application/octet-stream",
    }
}

/// Serves files under a root directory on `127.0.0.1` with an ephemeral port.
/// Missing files get 404. The server stops when dropped.
pub struct StaticFileServer {
    server: Arc<tiny_http::Server>,
    base_url: String,
    stats: Arc<ServerStats>,
    handles: Vec<JoinHandle<()>>,
}

impl StaticFileServer {
    pub fn start(root: impl Into<PathBuf>) -> std::io::Result<Self> {
        Self::start_with_delay(root, Duration::ZERO)
    }

    /// Like [`start`](Self::start), holding every response for `delay`.
    pub fn start_with_delay(root: impl Into<PathBuf>, delay: Duration) -> std::io::Result<Self> {
        let root: PathBuf = root.into();
        let server = tiny_http::Server::http("127.0.0.1:0")
            .map_err(|e| std::io::Error::other(e.to_string()))?;
        let port = server
            .server_addr()
            .to_ip()
            .map(|a| a.port())
            .ok_or_else(|| std::io::Error::other("server is not bound to an IP address"))?;
        let server = Arc::new(server);
        let stats = Arc::new(ServerStats::default());
        let handles = (0..16)
            .map(|_| {
                let server = Arc::clone(&server);
                let stats = Arc::clone(&stats);
                let root = root.clone();
                thread::spawn(move || {
                    while let Ok(req) = server.recv() {
                        serve_one(req, &root, &stats, delay);
                    }
                })
            })
            .collect();
        Ok(StaticFileServer { server, base_url: format!("http://127.0.0.1:{port}"), stats, handles })
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    pub fn url(&self, rel: &str) -> String {
        format!("{}/{}", self.base_url, rel.trim_start_matches('/'))
    }

    pub fn stats(&self) -> &ServerStats {
        &self.stats
    }
}

impl Drop for StaticFileServer {
    fn drop(&mut self) {
        for _ in &self.handles {
            self.server.unblock();
        }
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

fn serve_one(req: tiny_http::Request, root: &Path, stats: &ServerStats, delay: Duration) {
    let now = stats.in_flight.fetch_add(1, Ordering::SeqCst) + 1;
    stats.max_in_flight.fetch_max(now, Ordering::SeqCst);
    stats.requests.fetch_add(1, Ordering::SeqCst);
    if !delay.is_zero() {
        thread::sleep(delay);
    }
    let rel = req.url().split('?').next().unwrap_or("").trim_start_matches('/').to_string();
    let path = root.join(&rel);
    let safe = !rel.split('/').any(|seg| seg == "..");
    let result = match std::fs::read(&path) {
        Ok(bytes) if safe && path.is_file() => {
            let header = tiny_http::Header::from_bytes("Content-Type", content_type_for(&path))
                .expect("static header is valid");
            req.respond(tiny_http::Response::from_data(bytes).with_header(header))
        }
        _ => req.respond(tiny_http::Response::empty(404)),
    };
    if let Err(e) = result {
        log::debug!("fixture server: {e}");
    }
    stats.in_flight.fetch_sub(1, Ordering::SeqCst);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slug() {
        assert_eq!(query_slug("Jay pájaro"), "jay_pájaro");
        assert_eq!(query_slug(" Boxer dog! "), "boxer_dog");
    }

    #[test]
    fn fixture_pages_and_base() {
        let dir = tempfile::tempdir().unwrap();
        FixtureProvider::write_page(dir.path(), "Jay bird", 0, &["{base}/a.jpg".into()]).unwrap();
        FixtureProvider::write_page(dir.path(), "Jay bird", 1, &["{base}/b.jpg".into()]).unwrap();
        let p = FixtureProvider::new("fx", dir.path()).with_base_url("http://h:1/");
        let p0 = p.search("Jay bird", 0).unwrap();
        assert!(p0.has_more);
        assert_eq!(p0.hits[0].url, "http://h:1/a.jpg");
        let p1 = p.search("Jay bird", 1).unwrap();
        assert!(!p1.has_more);
        let p2 = p.search("Jay bird", 2).unwrap();
        assert!(p2.hits.is_empty() && !p2.has_more);
        assert!(p.search("unknown", 0).unwrap().hits.is_empty());
    }

    #[test]
    fn static_provider_exhaustion() {
        let p = StaticProvider::new("s").with_query("q", vec![vec!["u".into()]]);
        let r = p.search("q", 0).unwrap();
        assert!(!r.has_more);
        assert!(p.search("q", 1).unwrap().hits.is_empty());
    }
}
