//! One-vs-one recognition over random splits, and the S / T / ST
//! domain-adaptation protocol.
//!
//! ```text
//! cargo run -p webcorpus --example shallow_protocols
//! ```

use webcorpus::shallow_eval::{
    run_da_protocol, run_recognition_protocol, DaConfig, DaMode, FeatureTable, RecognitionConfig,
    SOURCE_LABELS_AMAZON, SOURCE_LABELS_DSLR,
};
use webcorpus::synth::{gaussian_blobs, BlobSpec};

/// Same class centers, shifted and noisier: a second "domain".
fn shifted(table: &FeatureTable, offset: f64) -> FeatureTable {
    let rows = table
        .rows()
        .enumerate()
        .map(|(i, r)| r.iter().enumerate().map(|(j, v)| v + offset * (((i + j) % 3) as f64 - 1.0)).collect())
        .collect();
    FeatureTable::from_rows(table.labels().to_vec(), rows).unwrap()
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = gaussian_blobs(&BlobSpec { n_classes: 10, per_class: 45, dim: 12, separation: 2.0, spread: 1.0, seed: 3 });
    let report = run_recognition_protocol(&data, &RecognitionConfig::default())?;
    print!("{}", report.to_csv());

    let source = gaussian_blobs(&BlobSpec { n_classes: 6, per_class: 30, dim: 12, separation: 2.0, spread: 1.0, seed: 4 });
    let target = shifted(&gaussian_blobs(&BlobSpec { n_classes: 6, per_class: 15, dim: 12, separation: 2.0, spread: 1.0, seed: 4 }), 1.5);
    for budget in [SOURCE_LABELS_AMAZON, SOURCE_LABELS_DSLR] {
        for mode in [DaMode::S, DaMode::T, DaMode::ST] {
            let r = run_da_protocol(&source, &target, &DaConfig::new(mode, budget))?;
            println!("source {budget:>2}/class  mode {mode:<2}  accuracy {:.3} +- {:.3}", r.mean, r.std);
        }
    }
    Ok(())
}
