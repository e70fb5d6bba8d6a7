//! Subcommand front end for the `webcorpus` binary.
//!
//! Exit codes: 0 on success, 1 on operational failure, 2 on usage error.
//! `--json` prints one JSON document per run on stdout. Logs go to stderr and
//! obey `WEBCORPUS_LOG`.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::dataset::{self, DatasetError, SplitConfig, SplitListing};
use crate::dedup::{self, DedupError, DedupScope};
use crate::embedding::{self, EmbeddingError, SuperClassMap, TsneConfig};
use crate::harvest::{
    self, fixture::FixtureProvider, CollectOptions, DownloadOptions, HarvestError, HttpFetcher,
    ImageHit, Manifest, RateLimited, RetryPolicy,
};
use crate::shallow_eval::{
    self, BinaryLoss, DaConfig, DaMode, FeatureTable, RecognitionConfig, ShallowError, TrainConfig,
};
use crate::taxonomy::{self, Lexicon, QuerySpec, TaxonomyError, TranslationScope};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable holding the log filter, e.g. `debug` or `webcorpus=info`.
pub const LOG_ENV: &str = "WEBCORPUS_LOG";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Taxonomy(#[from] TaxonomyError),
    #[error(transparent)]
    Harvest(#[from] HarvestError),
    #[error(transparent)]
    Dedup(#[from] DedupError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Shallow(#[from] ShallowError),
    #[error(transparent)]
    Embedding(#[from] EmbeddingError),
}

type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Parser)]
#[command(name = "webcorpus", version, about = "Web image corpus construction and shallow evaluation")]
pub struct Cli {
    /// Print a JSON summary on stdout instead of text.
    #[arg(long, global = true)]
    pub json: bool,
    /// TOML file with default values for flags; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Expand taxonomy classes into queries and write query lists.
    Expand(ExpandArgs),
    /// Collect ranked image URLs for each class.
    Harvest(HarvestArgs),
    /// Download harvested URLs into per-class directories.
    Download(DownloadArgs),
    /// Hash downloaded images and mark near-duplicates.
    Dedup(DedupArgs),
    /// Build a per-class split listing from the manifest.
    Split(SplitArgs),
    /// Per-class image statistics for a manifest or split.
    Stats(StatsArgs),
    /// Train softmax regression on a feature table.
    TrainShallow(TrainArgs),
    /// One-vs-one recognition protocol over random splits.
    EvalRecognition(RecognitionArgs),
    /// Domain-adaptation protocol (S, T or ST training).
    EvalDa(DaArgs),
    /// PCA then t-SNE, with scatter output.
    Embed(EmbedArgs),
}

#[derive(Debug, Args)]
pub struct ExpandArgs {
    #[arg(long)]
    pub taxonomy: Option<PathBuf>,
    #[arg(long)]
    pub overrides: Option<PathBuf>,
    #[arg(long)]
    pub lexicon: Option<PathBuf>,
    /// Target languages for translation, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub languages: Vec<String>,
    /// Translate lemmas too, not only the parent term.
    #[arg(long)]
    pub translate_all: bool,
    #[arg(long)]
    pub list_size: Option<usize>,
    /// Class ids to expand, comma separated. Default: every node.
    #[arg(long, value_delimiter = ',', conflicts_with = "leaves_only")]
    pub classes: Vec<String>,
    #[arg(long)]
    pub leaves_only: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct HarvestArgs {
    /// specs.jsonl written by `expand`.
    #[arg(long, required_unless_present = "list", conflicts_with = "list")]
    pub specs: Option<PathBuf>,
    /// A query-list file; each line becomes a class named after its first keyword.
    #[arg(long)]
    pub list: Option<PathBuf>,
    /// Fixture tree served by the offline provider.
    #[arg(long)]
    pub fixture_dir: PathBuf,
    /// Substituted for `{base}` in fixture URLs.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long, default_value = "fixture")]
    pub provider_name: String,
    #[arg(long)]
    pub cap: Option<usize>,
    /// Requests per second against the provider.
    #[arg(long)]
    pub rate_limit: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DownloadArgs {
    #[arg(long)]
    pub hits: PathBuf,
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Directory receiving one subdirectory per class.
    #[arg(long)]
    pub root: Option<PathBuf>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub min_width: Option<u32>,
    #[arg(long)]
    pub min_height: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    /// Attempts per URL, including the first.
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
}

#[derive(Debug, Args)]
pub struct DedupArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub threshold: Option<u32>,
    /// Compare across classes instead of within each class.
    #[arg(long)]
    pub global: bool,
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long)]
    pub hash_dump: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StrategyArg {
    Chronological,
    Random,
}

#[derive(Debug, Args)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub strategy: Option<StrategyArg>,
    /// Images per class.
    #[arg(long)]
    pub target: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Copy the selected files under this directory.
    #[arg(long)]
    pub materialize: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[arg(long, conflicts_with = "split")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Name written in the first column.
    #[arg(long, default_value = "corpus")]
    pub name: String,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LossArg {
    Logistic,
    Hinge,
}

impl From<LossArg> for BinaryLoss {
    fn from(l: LossArg) -> Self {
        match l {
            LossArg::Logistic => BinaryLoss::Logistic,
            LossArg::Hinge => BinaryLoss::Hinge,
        }
    }
}

#[derive(Debug, Args)]
pub struct SgdArgs {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub alpha0: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// Held-out table for top-k accuracy; defaults to the training table.
    #[arg(long)]
    pub test: Option<PathBuf>,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long)]
    pub model_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct RecognitionArgs {
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long, default_value_t = 30)]
    pub train_per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    #[arg(long, value_enum, default_value = "logistic")]
    pub loss: LossArg,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DaArgs {
    #[arg(long)]
    pub source: PathBuf,
    #[arg(long)]
    pub target: PathBuf,
    /// S, T or ST.
    #[arg(long)]
    pub mode: DaMode,
    #[arg(long, default_value_t = shallow_eval::SOURCE_LABELS_AMAZON)]
    pub source_per_class: usize,
    #[arg(long, default_value_t = shallow_eval::TARGET_LABELS)]
    pub target_per_class: usize,
    #[arg(long, default_value_t = 5)]
    pub splits: usize,
    #[arg(long, value_enum, default_value = "logistic")]
    pub loss: LossArg,
    #[command(flatten)]
    pub sgd: SgdArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EmbedArgs {
    #[arg(long)]
    pub features: PathBuf,
    /// PCA dimension before t-SNE; 0 disables PCA.
    #[arg(long)]
    pub pca_dim: Option<usize>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// `group<TAB>class,class,...` file.
    #[arg(long)]
    pub superclasses: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

/// Defaults read from `--config`. Keys mirror the long flag names with
/// underscores; any flag given on the command line overrides its key.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub taxonomy: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub manifest: Option<PathBuf>,
    pub root: Option<PathBuf>,
    pub list_size: Option<usize>,
    pub cap: Option<usize>,
    pub workers: Option<usize>,
    pub rate_limit: Option<f64>,
    pub min_width: Option<u32>,
    pub min_height: Option<u32>,
    pub threshold: Option<u32>,
    pub strategy: Option<StrategyArg>,
    pub target: Option<usize>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub alpha0: Option<f64>,
    pub pca_dim: Option<usize>,
    pub perplexity: Option<f64>,
    pub iterations: Option<usize>,
    pub learning_rate: Option<f64>,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&read(path)?)
    }

    /// Checks that referenced input files exist and knobs are in range.
    pub fn validate(&self) -> Result<()> {
        for p in [&self.taxonomy, &self.overrides, &self.lexicon].into_iter().flatten() {
            if !p.exists() {
                return Err(CliError::Config(format!("{} does not exist", p.display())));
            }
        }
        let positive = [
            ("list_size", self.list_size),
            ("cap", self.cap),
            ("workers", self.workers),
            ("target", self.target),
            ("epochs", self.epochs),
            ("iterations", self.iterations),
        ];
        for (name, v) in positive {
            if v == Some(0) {
                return Err(CliError::Config(format!("{name} must be at least 1")));
            }
        }
        if let Some(t) = self.threshold {
            if t > 64 {
                return Err(CliError::Config("threshold must lie in 0..=64".into()));
            }
        }
        for (name, v) in [
            ("rate_limit", self.rate_limit),
            ("alpha0", self.alpha0),
            ("learning_rate", self.learning_rate),
        ] {
            if let Some(v) = v {
                if !(v.is_finite() && v > 0.0) {
                    return Err(CliError::Config(format!("{name} must be positive")));
                }
            }
        }
        if let Some(p) = self.perplexity {
            if !(p.is_finite() && p > 1.0) {
                return Err(CliError::Config("perplexity must exceed 1".into()));
            }
        }
        Ok(())
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            if !e.use_stderr() {
                return EXIT_OK;
            }
            let rendered = e.render().to_string();
            if !rendered.contains("Usage:") {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            return EXIT_USAGE;
        }
    };
    init_logging();
    match run(&cli) {
        Ok(summary) => {
            if cli.json {
                println!("{}", serde_json::to_string_pretty(&summary).expect("json value"));
            } else {
                print_text(&summary);
            }
            EXIT_OK
        }
        Err(e) => {
            if cli.json {
                println!("{}", json!({ "ok": false, "error": e.to_string() }));
            }
            eprintln!("error: {e}");
            EXIT_FAILURE
        }
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or(LOG_ENV, "warn");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

fn print_text(v: &Value) {
    if let Value::Object(map) = v {
        for (k, v) in map {
            match v {
                Value::String(s) => println!("{k}: {s}"),
                Value::Array(a) if a.iter().all(|x| x.is_string()) => {
                    for x in a {
                        println!("{k}: {}", x.as_str().unwrap_or_default());
                    }
                }
                other => println!("{k}: {other}"),
            }
        }
    }
}

/// Runs a parsed command and returns its JSON summary.
pub fn run(cli: &Cli) -> Result<Value> {
    let cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    cfg.validate()?;
    let mut out = match &cli.command {
        Command::Expand(a) => run_expand(a, &cfg)?,
        Command::Harvest(a) => run_harvest(a, &cfg)?,
        Command::Download(a) => run_download(a, &cfg)?,
        Command::Dedup(a) => run_dedup(a, &cfg)?,
        Command::Split(a) => run_split(a, &cfg)?,
        Command::Stats(a) => run_stats(a, &cfg)?,
        Command::TrainShallow(a) => run_train(a, &cfg)?,
        Command::EvalRecognition(a) => run_recognition(a, &cfg)?,
        Command::EvalDa(a) => run_da(a, &cfg)?,
        Command::Embed(a) => run_embed(a, &cfg)?,
    };
    if let Value::Object(m) = &mut out {
        m.insert("ok".into(), Value::Bool(true));
    }
    Ok(out)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::Read { path: path.to_path_buf(), source })
}

fn need(flag: Option<&PathBuf>, cfg: Option<&PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or(cfg)
        .cloned()
        .ok_or_else(|| CliError::Config(format!("--{name} is required (flag or config key)")))
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn load_table(path: &Path) -> Result<FeatureTable> {
    Ok(FeatureTable::parse_csv(&read(path)?)?)
}

fn train_config(sgd: &SgdArgs, cfg: &PipelineConfig) -> TrainConfig {
    let d = TrainConfig::default();
    TrainConfig {
        epochs: sgd.epochs.or(cfg.epochs).unwrap_or(d.epochs),
        alpha0: sgd.alpha0.or(cfg.alpha0).unwrap_or(d.alpha0),
        seed: sgd.seed.or(cfg.seed).unwrap_or(d.seed),
        ..d
    }
}

fn run_expand(a: &ExpandArgs, cfg: &PipelineConfig) -> Result<Value> {
    let tax_path = need(a.taxonomy.as_ref(), cfg.taxonomy.as_ref(), "taxonomy")?;
    let tax = taxonomy::parse_taxonomy(&read(&tax_path)?)?;
    let overrides = match a.overrides.as_ref().or(cfg.overrides.as_ref()) {
        Some(p) => taxonomy::parse_overrides(&read(p)?)?,
        None => BTreeMap::new(),
    };
    let lexicon = match a.lexicon.as_ref().or(cfg.lexicon.as_ref()) {
        Some(p) => Lexicon::parse(&read(p)?)?,
        None => Lexicon::new(),
    };
    if !a.languages.is_empty() && lexicon.is_empty() {
        return Err(CliError::Config("--languages needs a --lexicon".into()));
    }
    let list_size = a.list_size.or(cfg.list_size).unwrap_or(100);
    if list_size == 0 {
        return Err(CliError::Config("--list-size must be at least 1".into()));
    }
    let classes: Vec<String> = if !a.classes.is_empty() {
        a.classes.clone()
    } else if a.leaves_only {
        tax.leaves().into_iter().map(String::from).collect()
    } else {
        tax.nodes().map(|n| n.id.clone()).collect()
    };
    let scope = if a.translate_all { TranslationScope::AllTerms } else { TranslationScope::ParentOnly };

    let mut specs = Vec::with_capacity(classes.len());
    let mut warnings = Vec::new();
    for c in &classes {
        let spec = taxonomy::expand_queries(&tax, c, &overrides)?;
        let spec = if a.languages.is_empty() {
            spec
        } else {
            let t = taxonomy::translate_queries(&spec, &lexicon, &a.languages, scope);
            warnings.extend(t.warnings);
            t.spec
        };
        specs.push(spec);
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    std::fs::create_dir_all(&a.out)?;
    let lists = taxonomy::build_query_lists(&specs, list_size);
    let mut files = Vec::new();
    for (i, list) in lists.iter().enumerate() {
        let p = a.out.join(format!("list_{i:03}.txt"));
        write_file(&p, &list.to_text())?;
        files.push(p.display().to_string());
    }
    let mut jsonl = String::new();
    for s in &specs {
        jsonl.push_str(&serde_json::to_string(s)?);
        jsonl.push('\n');
    }
    let specs_path = a.out.join("specs.jsonl");
    write_file(&specs_path, &jsonl)?;
    Ok(json!({
        "classes": specs.len(),
        "queries": specs.iter().map(|s| s.queries.len()).sum::<usize>(),
        "lists": files,
        "specs": specs_path.display().to_string(),
        "warnings": warnings,
    }))
}

fn read_specs(path: &Path) -> Result<Vec<QuerySpec>> {
    let mut out = Vec::new();
    for line in read(path)?.lines().filter(|l| !l.trim().is_empty()) {
        out.push(serde_json::from_str(line)?);
    }
    Ok(out)
}

fn specs_from_list(path: &Path) -> Result<Vec<QuerySpec>> {
    let mut out = Vec::new();
    for line in read(path)?.lines() {
        let keywords = taxonomy::parse_query_line(line);
        let Some(first) = keywords.first() else { continue };
        let class_id = harvest::fixture::query_slug(first);
        let queries = keywords
            .iter()
            .map(|k| taxonomy::Query {
                text: k.clone(),
                stage: taxonomy::QueryStage::Base,
                language: taxonomy::BASE_LANGUAGE.to_string(),
                lemma: k.clone(),
                parent_term: None,
            })
            .collect();
        out.push(QuerySpec { class_id, queries });
    }
    Ok(out)
}

fn run_harvest(a: &HarvestArgs, cfg: &PipelineConfig) -> Result<Value> {
    let specs = match (&a.specs, &a.list) {
        (Some(p), _) => read_specs(p)?,
        (None, Some(p)) => specs_from_list(p)?,
        (None, None) => unreachable!("clap requires one of --specs/--list"),
    };
    if !a.fixture_dir.is_dir() {
        return Err(CliError::Config(format!("{} is not a directory", a.fixture_dir.display())));
    }
    let mut provider = FixtureProvider::new(&a.provider_name, &a.fixture_dir);
    if let Some(b) = &a.base_url {
        provider = provider.with_base_url(b);
    }
    let rate = a.rate_limit.or(cfg.rate_limit).unwrap_or(harvest::DEFAULT_RATE_LIMIT);
    if !(rate.is_finite() && rate > 0.0) {
        return Err(CliError::Config("--rate-limit must be positive".into()));
    }
    let provider = RateLimited::new(provider, rate);
    let opts = CollectOptions {
        cap: a.cap.or(cfg.cap).unwrap_or(harvest::DEFAULT_CAP),
        ..CollectOptions::default()
    };
    let mut hits: BTreeMap<String, Vec<ImageHit>> = BTreeMap::new();
    let mut problems = Vec::new();
    for spec in &specs {
        let (h, p) = harvest::collect_class(&provider, spec, &opts)?;
        hits.entry(spec.class_id.clone()).or_default().extend(h);
        problems.extend(p);
    }
    write_file(&a.out, &harvest::write_hits_jsonl(&hits)?)?;
    let per_class: BTreeMap<&String, usize> = hits.iter().map(|(c, h)| (c, h.len())).collect();
    Ok(json!({
        "classes": hits.len(),
        "urls": hits.values().map(Vec::len).sum::<usize>(),
        "per_class": per_class,
        "out": a.out.display().to_string(),
        "problems": problems,
    }))
}

fn run_download(a: &DownloadArgs, cfg: &PipelineConfig) -> Result<Value> {
    let hits = harvest::read_hits_jsonl(&read(&a.hits)?)?;
    let manifest_path = need(a.manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?;
    let root = need(a.root.as_ref(), cfg.root.as_ref(), "root")?;
    let (mut manifest, warnings) = Manifest::open(&manifest_path)?;
    let mut opts = DownloadOptions::new(root);
    opts.workers = a.workers.or(cfg.workers).unwrap_or(harvest::DEFAULT_WORKERS);
    if opts.workers == 0 {
        return Err(CliError::Config("--workers must be at least 1".into()));
    }
    if a.retries == 0 {
        return Err(CliError::Config("--retries must be at least 1".into()));
    }
    opts.retry = RetryPolicy { attempts: a.retries, ..RetryPolicy::default() };
    let (w, h) = (a.min_width.or(cfg.min_width), a.min_height.or(cfg.min_height));
    if w.is_some() || h.is_some() {
        opts.min_resolution = Some((w.unwrap_or(0), h.unwrap_or(0)));
    }
    if !(a.timeout.is_finite() && a.timeout > 0.0) {
        return Err(CliError::Config("--timeout must be positive".into()));
    }
    let fetcher = HttpFetcher::new(Duration::from_secs_f64(a.timeout));
    let summary = harvest::download_batch(&mut manifest, &hits, &fetcher, &opts)?;
    Ok(json!({
        "summary": summary,
        "manifest": manifest_path.display().to_string(),
        "warnings": warnings,
    }))
}

fn run_dedup(a: &DedupArgs, cfg: &PipelineConfig) -> Result<Value> {
    let manifest_path = need(a.manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?;
    if !manifest_path.exists() {
        return Err(CliError::Config(format!("{} does not exist", manifest_path.display())));
    }
    let threshold = a.threshold.or(cfg.threshold).unwrap_or(dedup::DEFAULT_THRESHOLD);
    let scope = if a.global { DedupScope::Global } else { DedupScope::PerClass };
    let (mut manifest, warnings) = Manifest::open(&manifest_path)?;
    let hashed = dedup::hash_manifest(&mut manifest)?;
    let report = dedup::dedup_manifest(&mut manifest, threshold, scope)?;
    if let Some(p) = &a.report {
        write_file(p, &report.to_csv()?)?;
    }
    if let Some(p) = &a.hash_dump {
        write_file(p, &dedup::hash_dump_csv(&manifest)?)?;
    }
    Ok(json!({
        "threshold": threshold,
        "hashing": hashed,
        "examined": report.examined,
        "kept": report.kept,
        "removed": report.rows.len(),
        "warnings": warnings,
    }))
}

fn run_split(a: &SplitArgs, cfg: &PipelineConfig) -> Result<Value> {
    let manifest_path = need(a.manifest.as_ref(), cfg.manifest.as_ref(), "manifest")?;
    let (manifest, _) = harvest::load_manifest(&manifest_path)?;
    let strategy = a.strategy.or(cfg.strategy).unwrap_or(StrategyArg::Chronological);
    let target = a.target.or(cfg.target);
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let split_cfg = match strategy {
        StrategyArg::Chronological => SplitConfig::chronological(
            target.ok_or_else(|| CliError::Config("chronological split needs --target".into()))?,
        ),
        StrategyArg::Random => SplitConfig::random(target, seed),
    };
    let listing = dataset::make_split(&manifest, &split_cfg)?;
    write_file(&a.out, &listing.to_tsv())?;
    let copied = match &a.materialize {
        Some(dest) => Some(listing.materialize(dest)?),
        None => None,
    };
    Ok(json!({
        "counts": listing.counts(),
        "warnings": listing.warnings,
        "shortfall": listing.shortfall,
        "materialized": copied,
        "out": a.out.display().to_string(),
    }))
}

fn run_stats(a: &StatsArgs, cfg: &PipelineConfig) -> Result<Value> {
    let stats = match (&a.split, a.manifest.as_ref().or(cfg.manifest.as_ref())) {
        (Some(p), _) => dataset::split_stats(&SplitListing::parse_tsv(&read(p)?)?),
        (None, Some(m)) => dataset::compute_stats(&harvest::load_manifest(m)?.0),
        (None, None) => return Err(CliError::Config("stats needs --manifest or --split".into())),
    };
    let csv = stats.to_csv(&a.name)?;
    if let Some(p) = &a.out {
        write_file(p, &csv)?;
    }
    Ok(serde_json::to_value(&stats)?)
}

fn run_train(a: &TrainArgs, cfg: &PipelineConfig) -> Result<Value> {
    let train = load_table(&a.features)?;
    let test = match &a.test {
        Some(p) => load_table(p)?,
        None => train.clone(),
    };
    let config = train_config(&a.sgd, cfg);
    let fit = shallow_eval::train_softmax(&train, &config)?;
    if test.dim() != fit.model.dim {
        return Err(ShallowError::DimensionMismatch { expected: fit.model.dim, found: test.dim() }.into());
    }
    let scores: Vec<Vec<f64>> = test.rows().map(|x| fit.model.scores(x)).collect();
    let top1 = shallow_eval::topk_accuracy(&scores, test.labels(), 1)?;
    let top5 = shallow_eval::topk_accuracy(&scores, test.labels(), 5.min(fit.model.n_classes))?;
    if let Some(p) = &a.model_out {
        write_file(p, &serde_json::to_string_pretty(&fit.model)?)?;
    }
    Ok(json!({
        "top1": top1,
        "top5": top5,
        "epoch_losses": fit.epoch_losses,
        "config": config,
    }))
}

fn run_recognition(a: &RecognitionArgs, cfg: &PipelineConfig) -> Result<Value> {
    let data = load_table(&a.features)?;
    let rc = RecognitionConfig {
        n_train_per_class: a.train_per_class,
        n_splits: a.splits,
        seed: a.sgd.seed.or(cfg.seed).unwrap_or(0),
        train: train_config(&a.sgd, cfg),
        loss: a.loss.into(),
    };
    let report = shallow_eval::run_recognition_protocol(&data, &rc)?;
    if let Some(p) = &a.out {
        write_file(p, &report.to_csv())?;
    }
    Ok(serde_json::to_value(&report)?)
}

fn run_da(a: &DaArgs, cfg: &PipelineConfig) -> Result<Value> {
    let source = load_table(&a.source)?;
    let target = load_table(&a.target)?;
    let mut dc = DaConfig::new(a.mode, a.source_per_class);
    dc.target_per_class = a.target_per_class;
    dc.n_splits = a.splits;
    dc.seed = a.sgd.seed.or(cfg.seed).unwrap_or(0);
    dc.train = train_config(&a.sgd, cfg);
    dc.loss = a.loss.into();
    let report = shallow_eval::run_da_protocol(&source, &target, &dc)?;
    if let Some(p) = &a.out {
        write_file(p, &report.to_csv())?;
    }
    Ok(serde_json::to_value(&report)?)
}

fn run_embed(a: &EmbedArgs, cfg: &PipelineConfig) -> Result<Value> {
    let table = load_table(&a.features)?;
    let d = TsneConfig::default();
    let tsne = TsneConfig {
        perplexity: a.perplexity.or(cfg.perplexity).unwrap_or(d.perplexity),
        iterations: a.iterations.or(cfg.iterations).unwrap_or(d.iterations),
        learning_rate: a.learning_rate.or(cfg.learning_rate).unwrap_or(d.learning_rate),
        seed: a.seed.or(cfg.seed).unwrap_or(d.seed),
        ..d
    };
    let pca_dim = match a.pca_dim.or(cfg.pca_dim).unwrap_or(embedding::DEFAULT_PCA_DIM) {
        0 => None,
        k => Some(k),
    };
    let map = match &a.superclasses {
        Some(p) => SuperClassMap::parse_tsv(&read(p)?)?,
        None => SuperClassMap::new(),
    };
    let result = embedding::embed_table(&table, pca_dim, &tsne)?;
    let class_ids: Vec<String> = table.labels().iter().map(|l| l.to_string()).collect();
    let files = embedding::emit_scatter(&result, &class_ids, &map, &a.out, "tsne")?;
    Ok(json!({
        "points": result.len(),
        "initial_kl": result.initial_kl(),
        "final_kl": result.final_kl(),
        "csv": files.csv.display().to_string(),
        "svg": files.svg.display().to_string(),
        "legend": files.legend.iter().map(|(g, _)| g.clone()).collect::<Vec<_>>(),
        "warnings": files.warnings,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(dispatch(["webcorpus", "frobnicate"]), EXIT_USAGE);
        assert_eq!(dispatch(["webcorpus", "dedup", "--bogus"]), EXIT_USAGE);
        assert_eq!(dispatch(["webcorpus", "--help"]), EXIT_OK);
    }

    #[test]
    fn missing_input_exits_one() {
        let code = dispatch(["webcorpus", "dedup", "--manifest", "/nonexistent/m.jsonl"]);
        assert_eq!(code, EXIT_FAILURE);
    }

    #[test]
    fn config_parses_and_validates() {
        let c = PipelineConfig::parse("threshold = 7\nworkers = 2\nstrategy = \"random\"\n").unwrap();
        assert_eq!(c.threshold, Some(7));
        assert_eq!(c.strategy, Some(StrategyArg::Random));
        c.validate().unwrap();
        assert!(PipelineConfig::parse("nonsense = 1").is_err());
        let bad = PipelineConfig { taxonomy: Some("/nonexistent/t.tsv".into()), ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = PipelineConfig { workers: Some(0), ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
