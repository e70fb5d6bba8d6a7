//! Average hashes, Hamming distance and keep-earliest near-duplicate removal.
//!
//! ```text
//! cargo run -p webcorpus --example dedup_hashes
//! ```

use webcorpus::dedup::{ahash_rgb8, dedup_class, hamming, HammingIndex, PHash64, DEFAULT_THRESHOLD};
use webcorpus::harvest::{ImageRecord, RecordStatus};

fn gradient(w: u32, h: u32, tilt: u32) -> Vec<u8> {
    (0..w * h)
        .flat_map(|i| {
            let (x, y) = (i % w, i / w);
            let v = ((x * 255 / w + y * tilt) % 256) as u8;
            [v, v / 2, 255 - v]
        })
        .collect()
}

/// Pixel-replicating 2x upscale of an RGB buffer.
fn upscale2(rgb: &[u8], w: u32, h: u32) -> Vec<u8> {
    (0..4 * w * h)
        .flat_map(|i| {
            let (x, y) = (i % (2 * w) / 2, i / (2 * w) / 2);
            let at = ((y * w + x) * 3) as usize;
            [rgb[at], rgb[at + 1], rgb[at + 2]]
        })
        .collect()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let a: PHash64 = "3c3e0e1a3a1e1e1e".parse()?;
    let b: PHash64 = "3c3e0e3e3e1e1e1e".parse()?;
    println!("{a} vs {b}: {} bits apart", hamming(a, b));

    let original = ahash_rgb8(64, 64, &gradient(64, 64, 1))?;
    let resized = ahash_rgb8(128, 128, &upscale2(&gradient(64, 64, 1), 64, 64))?;
    let different = ahash_rgb8(64, 64, &gradient(64, 64, 9))?;
    println!("original  {original}");
    println!("resized   {resized}  distance {}", hamming(original, resized));
    println!("different {different}  distance {}", hamming(original, different));

    // three copies of one picture plus two unrelated ones, in search-rank order
    let hashes = [original, different, resized, PHash64(original.0 ^ 0b111), PHash64(!original.0)];
    let records: Vec<ImageRecord> = hashes
        .iter()
        .enumerate()
        .map(|(rank, h)| {
            let mut r = ImageRecord::pending("jay", &format!("http://img/{rank}"), "demo", rank as u64);
            r.status = RecordStatus::Downloaded;
            r.phash = Some(*h);
            r
        })
        .collect();
    let part = dedup_class(&records, DEFAULT_THRESHOLD)?;
    println!("\nkept ranks: {:?}", part.kept);
    for rm in &part.removed {
        println!("removed rank {} (within {} bits of rank {})", rm.removed, rm.distance, rm.kept);
    }

    let index: HammingIndex<usize> = hashes.iter().copied().zip(0..).collect();
    let near: Vec<usize> = index.radius_query(original, 3).into_iter().map(|(_, &i, _)| i).collect();
    println!("\nrecords within 3 bits of the original: {near:?}");
    Ok(())
}
