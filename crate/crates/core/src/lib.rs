//! Web image corpus construction and shallow feature evaluation.
//!
//! The corpus pipeline runs in stages, each usable on its own:
//!
//! - [`taxonomy`]: parse a synset hierarchy and expand each class into search
//!   queries (parent appending, offline translation), then pack query lists.
//! - [`harvest`]: paginate search providers under a per-query cap and download
//!   images concurrently into per-class directories, logging every outcome to
//!   a JSON-lines manifest.
//! - [`dedup`]: 64-bit average hash, BK-tree radius search, keep-earliest
//!   near-duplicate removal.
//! - [`dataset`]: random and chronological splits, per-class statistics.
//!
//! The evaluation side works on precomputed feature tables:
//!
//! - [`shallow_eval`]: softmax regression trained by SGD with step decay,
//!   one-vs-one linear classifiers, top-k accuracy, and the recognition and
//!   domain-adaptation protocols.
//! - [`embedding`]: PCA and exact t-SNE, plus scatter output grouped by
//!   super-class.
//!
//! [`cli`] wires everything into the `webcorpus` binary. The `examples/`
//! directory has one runnable program per capability:
//!
//! ```bash
//! cargo run -p webcorpus --example query_expansion
//! ```

pub mod cli;
pub mod dataset;
pub mod dedup;
pub mod embedding;
pub mod harvest;
pub mod shallow_eval;
pub mod synth;
pub mod taxonomy;
