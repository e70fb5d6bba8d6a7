//! PCA then t-SNE on synthetic features, written out as a super-class
//! scatter (CSV and SVG).
//!
//! ```text
//! cargo run --release -p webcorpus --example tsne_scatter -- out_dir
//! ```

use webcorpus::embedding::{
    emit_scatter, embed_table, silhouette_score, SuperClassMap, TsneConfig,
};
use webcorpus::synth::{gaussian_blobs, BlobSpec};

const GROUPS: &str = "\
Dogs\t0,1,2
Birds\t3,4
Vehicles\t5,6,7
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "tsne_out".into());
    let features = gaussian_blobs(&BlobSpec { n_classes: 9, per_class: 30, dim: 64, separation: 3.0, spread: 1.0, seed: 5 });
    let config = TsneConfig { iterations: 500, seed: 1, ..TsneConfig::default() };
    let y = embed_table(&features, Some(20), &config)?;
    println!("KL {:.3} -> {:.3}", y.initial_kl(), y.final_kl());
    println!("silhouette by class: {:.3}", silhouette_score(&y.coords, 2, features.labels()));

    let map = SuperClassMap::parse_tsv(GROUPS)?;
    let class_ids: Vec<String> = features.labels().iter().map(|l| l.to_string()).collect();
    let files = emit_scatter(&y, &class_ids, &map, std::path::Path::new(&out), "features")?;
    println!("wrote {} and {}", files.csv.display(), files.svg.display());
    for (group, color) in &files.legend {
        println!("  {group:<9} {color}");
    }
    Ok(())
}
