//! Collects URLs from an offline provider and downloads them from a local
//! HTTP server, logging every outcome to a manifest.
//!
//! ```text
//! cargo run -p webcorpus --example harvest_fixture
//! ```

use std::collections::BTreeMap;
use std::io::Cursor;
use std::time::Duration;

use webcorpus::harvest::fixture::{FixtureProvider, StaticFileServer};
use webcorpus::harvest::{
    collect_class, download_batch, CollectOptions, DownloadOptions, HttpFetcher, Manifest,
    RateLimited, RecordStatus,
};
use webcorpus::taxonomy::{expand_queries, parse_taxonomy};

fn png(w: u32, h: u32, shade: u8) -> Vec<u8> {
    let img = image::RgbImage::from_fn(w, h, |x, y| image::Rgb([shade, (x * 7) as u8, (y * 5) as u8]));
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, image::ImageFormat::Png).unwrap();
    out.into_inner()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let work = tempfile::tempdir()?;
    let www = work.path().join("www");
    let pages = work.path().join("pages");
    std::fs::create_dir_all(&www)?;

    // 10 images; one is too small and one is not an image at all
    let mut urls = Vec::new();
    for i in 0..10u8 {
        let name = match i {
            3 => {
                std::fs::write(www.join("page.html"), "<html></html>")?;
                "page.html".to_string()
            }
            7 => {
                std::fs::write(www.join("thumb.png"), png(8, 8, i * 20))?;
                "thumb.png".to_string()
            }
            _ => {
                let name = format!("jay_{i}.png");
                std::fs::write(www.join(&name), png(64, 48, i * 20))?;
                name
            }
        };
        urls.push(format!("{{base}}/{name}"));
    }
    FixtureProvider::write_page(&pages, "jay", 0, &urls[..6])?;
    FixtureProvider::write_page(&pages, "jay", 1, &urls[6..])?;
    FixtureProvider::write_page(&pages, "jay bird", 0, &urls[4..])?;

    let server = StaticFileServer::start_with_delay(&www, Duration::from_millis(20))?;
    let provider = RateLimited::new(
        FixtureProvider::new("fixture", &pages).with_base_url(server.base_url()),
        20.0,
    );
    let taxonomy = parse_taxonomy("bird\t-\tbird\njay\tbird\tjay\n")?;
    let spec = expand_queries(&taxonomy, "jay", &BTreeMap::new())?;
    let (hits, problems) = collect_class(&provider, &spec, &CollectOptions::default())?;
    println!("collected {} unique URLs over {} queries", hits.len(), spec.queries.len());
    assert!(problems.is_empty());

    let manifest_path = work.path().join("manifest.jsonl");
    let (mut manifest, _) = Manifest::open(&manifest_path)?;
    let mut opts = DownloadOptions::new(work.path().join("corpus"));
    opts.min_resolution = Some((16, 16));
    let batch = BTreeMap::from([("jay".to_string(), hits)]);
    let summary = download_batch(&mut manifest, &batch, &HttpFetcher::new(Duration::from_secs(5)), &opts)?;
    println!("{summary:?}");
    println!("peak concurrent requests: {} (workers = {})", server.stats().max_in_flight(), opts.workers);

    for r in manifest.class_records("jay") {
        let detail = match r.status {
            RecordStatus::Downloaded => r.local_path.clone().unwrap_or_default(),
            _ => r.error.clone().unwrap_or_default(),
        };
        println!("  #{:<2} {:<10} {}", r.rank, format!("{:?}", r.status), detail);
    }

    // a second run finds everything settled
    let again = download_batch(&mut manifest, &batch, &HttpFetcher::new(Duration::from_secs(5)), &opts)?;
    println!("rerun: {} skipped, {} attempted", again.skipped, again.attempted);
    Ok(())
}
