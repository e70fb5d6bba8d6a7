//! Expands a small taxonomy into search queries and packs them into lists.
//!
//! ```text
//! cargo run -p webcorpus --example query_expansion
//! ```

use std::collections::BTreeMap;

use webcorpus::taxonomy::{
    build_query_lists, expand_queries, parse_overrides, parse_taxonomy, translate_queries, Lexicon,
    TranslationScope,
};

const TAXONOMY: &str = "\
# id\tparent\tlemmas\tgloss
bird\t-\tbird
jay\tbird\tJay,jaybird\tcrested corvid
dog\t-\tdog
boxer\tdog\tBoxer
pug\tdog\tpug,pug-dog
";

const LEXICON: &str = "\
es\tbird\tpájaro
es\tdog\tperro
fr\tdog\tchien
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let taxonomy = parse_taxonomy(TAXONOMY)?;
    // a hand-picked parent term beats the hierarchy's own
    let overrides = parse_overrides("pug\ttoy dog\n")?;
    let lexicon = Lexicon::parse(LEXICON)?;
    let languages = vec!["es".to_string(), "fr".to_string()];

    let mut specs = Vec::new();
    for class in taxonomy.leaves() {
        let spec = expand_queries(&taxonomy, class, &overrides)?;
        let out = translate_queries(&spec, &lexicon, &languages, TranslationScope::ParentOnly);
        println!("{class}:");
        for q in &out.spec.queries {
            println!("  [{:<15}] {:<3} {}", q.stage.to_string(), q.language, q.text);
        }
        for w in &out.warnings {
            println!("  (skipped) {w}");
        }
        specs.push(out.spec);
    }

    println!("\nquery lists, two classes per list:");
    for (i, list) in build_query_lists(&specs, 2).iter().enumerate() {
        println!("list_{i:03}.txt");
        print!("{}", list.to_text());
    }

    let roots: BTreeMap<_, _> = taxonomy.roots().iter().map(|r| (r, taxonomy.get(r).unwrap())).collect();
    println!("\nroots only get base queries: {:?}", roots.keys().collect::<Vec<_>>());
    Ok(())
}
