//! Chronological and random splits over a manifest, with corpus statistics.
//!
//! ```text
//! cargo run -p webcorpus --example split_stats
//! ```

use webcorpus::dataset::{compute_stats, make_split, split_stats, SplitConfig};
use webcorpus::harvest::{ImageRecord, Manifest, RecordStatus};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut records = Vec::new();
    for (class, n, dup_every) in [("n01", 12u64, 4u64), ("n02", 9, 0), ("n03", 4, 0)] {
        for rank in 0..n {
            let mut r = ImageRecord::pending(class, &format!("http://img/{class}/{rank}"), "demo", rank);
            r.status = if dup_every > 0 && rank % dup_every == dup_every - 1 {
                RecordStatus::RemovedDuplicate
            } else {
                RecordStatus::Downloaded
            };
            r.local_path = Some(format!("{class}/{rank:06}.jpg"));
            records.push(r);
        }
    }
    let manifest = Manifest::from_records(records);

    let all = compute_stats(&manifest);
    print!("{}", all.to_csv("whole corpus")?);

    let chrono = make_split(&manifest, &SplitConfig::chronological(8))?;
    println!("\nchronological, 8 per class:");
    for (class, paths) in &chrono.classes {
        println!("  {class}: {} .. {}", paths[0], paths[paths.len() - 1]);
    }
    for w in &chrono.warnings {
        println!("  warning: {w}");
    }

    let random = make_split(&manifest, &SplitConfig::random(Some(5), 42))?;
    println!("\nrandom, 5 per class, seed 42:");
    print!("{}", random.to_tsv());
    print!("\n{}", split_stats(&chrono).to_csv("chronological-8")?);
    Ok(())
}
