//! Acceptance suite: ten end-to-end criteria, one test each.
//!
//! Every test prints a single `[criterion N] PASS|FAIL ...` line (run with
//! `--nocapture` to see them) and then asserts. Tolerances and time budgets
//! are pinned below.

mod common;

use std::collections::{BTreeMap, HashSet};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use webcorpus::dataset;
use webcorpus::dedup::{ahash, ahash_rgb8, dedup_class, hamming, HammingIndex, PHash64};
use webcorpus::embedding::{
    compute_affinities, pca_fit_transform, silhouette_score, tsne_embed, TsneConfig,
};
use webcorpus::harvest::{
    self, fixture::StaticFileServer, fixture::StaticProvider, CollectOptions, DownloadOptions,
    HttpFetcher, ImageHit, ImageRecord, Manifest, RecordStatus,
};
use webcorpus::shallow_eval::{
    self, lr_schedule, perceptron_predict, softmax, softmax_gradient, softmax_loss,
    train_one_vs_one, BinaryLoss, DaConfig, DaMode, FeatureTable, LinearModel, RecognitionConfig,
    TrainConfig,
};
use webcorpus::synth::{gaussian_blobs, random_hashes, BlobSpec};
use webcorpus::taxonomy::{self, Lexicon, QuerySpec, TranslationScope};

const HASH_EXAMPLE_BUDGET: Duration = Duration::from_millis(1);
const BKTREE_BUDGET: Duration = Duration::from_secs(5);
const DEDUP_BUDGET: Duration = Duration::from_secs(10);
const EMBEDDING_BUDGET: Duration = Duration::from_secs(60);
const PIPELINE_BUDGET: Duration = Duration::from_secs(30);

const SOFTMAX_TOL: f64 = 1e-12;
const GRADIENT_REL_TOL: f64 = 1e-5;
const PCA_TOL: f64 = 1e-8;
const ENTROPY_TOL_BITS: f64 = 1e-5;
const RECOGNITION_MIN_ACC: f64 = 0.95;
const SILHOUETTE_MIN: f64 = 0.5;

fn verdict(id: u32, name: &str, checks: &[(&str, bool)]) {
    let failed: Vec<&str> = checks.iter().filter(|c| !c.1).map(|c| c.0).collect();
    if failed.is_empty() {
        println!("[criterion {id:>2}] PASS {name}");
    } else {
        println!("[criterion {id:>2}] FAIL {name}: {}", failed.join("; "));
    }
    assert!(failed.is_empty(), "criterion {id} failed: {failed:?}");
}

#[test]
fn criterion_01_hash_worked_example() {
    let a: PHash64 = "3c3e0e1a3a1e1e1e".parse().unwrap();
    let b: PHash64 = "3c3e0e3e3e1e1e1e".parse().unwrap();
    let start = Instant::now();
    let d = hamming(a, b);
    let elapsed = start.elapsed();
    verdict(1, "hamming distance of the worked hash pair", &[
        ("distance == 3", d == 3),
        ("runtime < 1 ms", elapsed < HASH_EXAMPLE_BUDGET),
    ]);
}

#[test]
fn criterion_02_ahash_forced_cases() {
    let constant = ahash_rgb8(32, 32, &vec![137; 32 * 32 * 3]).unwrap();
    let checker: Vec<u8> = (0..64)
        .flat_map(|i| {
            let (x, y) = (i % 8, i / 8);
            let v = if (x + y) % 2 == 0 { 0 } else { 255 };
            [v, v, v]
        })
        .collect();
    let checker_hash = ahash_rgb8(8, 8, &checker).unwrap();
    let img = common::block_image(7);
    let doubled = image::imageops::resize(&img, 128, 128, image::imageops::FilterType::Nearest);
    let same = ahash(&img.into()).unwrap() == ahash(&doubled.into()).unwrap();
    verdict(2, "average-hash forced cases", &[
        ("constant image -> 0", constant == PHash64(0)),
        ("checkerboard -> 0x55aa55aa55aa55aa", checker_hash == PHash64(0x55aa55aa55aa55aa)),
        ("block-doubled image hashes identically", same),
    ]);
}

#[test]
fn criterion_03_bktree_matches_linear_scan() {
    let start = Instant::now();
    let hashes = random_hashes(10_000, 3);
    let index: HammingIndex<usize> =
        hashes.iter().enumerate().map(|(i, &h)| (PHash64(h), i)).collect();
    let probes = random_hashes(100, 4);
    let mut mismatches = 0;
    for &p in &probes {
        for radius in [0u32, 3, 6, 10] {
            let mut got: Vec<usize> =
                index.radius_query(PHash64(p), radius).into_iter().map(|(_, &i, _)| i).collect();
            got.sort_unstable();
            let want: Vec<usize> = (0..hashes.len())
                .filter(|&i| (hashes[i] ^ p).count_ones() <= radius)
                .collect();
            if got != want {
                mismatches += 1;
            }
        }
    }
    // probes drawn near stored hashes so non-empty results are exercised
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..100 {
        let base = hashes[rng.gen_range(0..hashes.len())];
        let p = base ^ (1u64 << rng.gen_range(0..64)) ^ (1u64 << rng.gen_range(0..64));
        for radius in [0u32, 3, 6, 10] {
            let mut got: Vec<usize> =
                index.radius_query(PHash64(p), radius).into_iter().map(|(_, &i, _)| i).collect();
            got.sort_unstable();
            let want: Vec<usize> = (0..hashes.len())
                .filter(|&i| (hashes[i] ^ p).count_ones() <= radius)
                .collect();
            if got != want {
                mismatches += 1;
            }
        }
    }
    let elapsed = start.elapsed();
    verdict(3, "BK-tree radius queries equal brute force", &[
        ("no mismatching result sets", mismatches == 0),
        ("runtime < 5 s", elapsed < BKTREE_BUDGET),
    ]);
}

#[test]
fn criterion_04_harvest_contracts() {
    // cap: 120 pages of 100 unique URLs, collection must stop at 10,000
    let pages: Vec<Vec<String>> = (0..120)
        .map(|p| (0..100).map(|i| format!("http://img.test/{p}/{i}.jpg")).collect())
        .collect();
    let provider = StaticProvider::new("static").with_query("q", pages);
    let got = harvest::collect_urls(&provider, "q", &CollectOptions::default()).unwrap();
    let ranks_dense = got.hits.iter().enumerate().all(|(i, h)| h.rank == i as u64);

    // concurrency: delayed server, default worker count
    let dir = tempfile::tempdir().unwrap();
    let www = dir.path().join("www");
    std::fs::create_dir_all(&www).unwrap();
    let mut hits: BTreeMap<String, Vec<ImageHit>> = BTreeMap::new();
    let server = StaticFileServer::start_with_delay(&www, Duration::from_millis(40)).unwrap();
    for (ci, class) in ["n01", "n02"].iter().enumerate() {
        for i in 0..12 {
            let name = format!("{class}_{i}.png");
            let img = common::block_image(100 * ci as u64 + i);
            std::fs::write(www.join(&name), common::png_bytes(&img)).unwrap();
            hits.entry(class.to_string()).or_default().push(ImageHit {
                url: server.url(&name),
                query: class.to_string(),
                provider: "fixture".into(),
                page: 0,
                rank: i,
            });
        }
    }
    let root = dir.path().join("corpus");
    let manifest_path = dir.path().join("manifest.jsonl");
    let opts = DownloadOptions::new(&root);
    let fetcher = HttpFetcher::new(Duration::from_secs(10));
    let (mut manifest, _) = Manifest::open(&manifest_path).unwrap();
    let summary = harvest::download_batch(&mut manifest, &hits, &fetcher, &opts).unwrap();
    let max_in_flight = server.stats().max_in_flight();
    let dirs_ok = ["n01", "n02"]
        .iter()
        .all(|c| root.join(c).is_dir() && std::fs::read_dir(root.join(c)).unwrap().count() == 12);
    drop(manifest);

    // replay: reopening yields the same state twice, and a rerun changes nothing
    let (a, _) = harvest::load_manifest(&manifest_path).unwrap();
    let (b, _) = harvest::load_manifest(&manifest_path).unwrap();
    let (mut again, _) = Manifest::open(&manifest_path).unwrap();
    let rerun = harvest::download_batch(&mut again, &hits, &fetcher, &opts).unwrap();
    drop(again);
    let (c, _) = harvest::load_manifest(&manifest_path).unwrap();

    verdict(4, "harvest cap, worker bound, class directories, manifest replay", &[
        ("exactly 10,000 URLs collected", got.hits.len() == harvest::DEFAULT_CAP),
        ("ranks dense from 0", ranks_dense),
        ("all 24 downloads succeeded", summary.downloaded == 24),
        ("in-flight downloads never exceed 4 workers", max_in_flight <= harvest::DEFAULT_WORKERS),
        ("downloads actually overlapped", max_in_flight >= 2),
        ("class directories named by class id", dirs_ok),
        ("replay deterministic", a == b && b == c),
        ("rerun skips every settled record", rerun.skipped == 24 && rerun.attempted == 0),
    ]);
}

#[test]
fn criterion_05_query_expansion() {
    let tax = taxonomy::parse_taxonomy(
        "bird\t-\tbird\njay\tbird\tJay\ndog\t-\tdog\nboxer\tdog\tBoxer\n",
    )
    .unwrap();
    let none = BTreeMap::new();
    let jay = taxonomy::expand_queries(&tax, "jay", &none).unwrap();
    let boxer = taxonomy::expand_queries(&tax, "boxer", &none).unwrap();
    let lex = Lexicon::parse("es\tbird\tpájaro\n").unwrap();
    let es = taxonomy::translate_queries(&jay, &lex, &["es".to_string()], TranslationScope::ParentOnly);

    let specs: Vec<QuerySpec> = (0..1000)
        .map(|i| QuerySpec { class_id: format!("c{i:04}"), queries: jay.queries.clone() })
        .collect();
    let lists = taxonomy::build_query_lists(&specs, 100);
    let covered: Vec<&String> = lists.iter().flat_map(|l| &l.class_ids).collect();

    verdict(5, "query expansion, translation, list partition", &[
        ("Jay -> \"Jay bird\"", jay.texts().any(|t| t == "Jay bird")),
        ("Boxer -> \"Boxer dog\"", boxer.texts().any(|t| t == "Boxer dog")),
        ("Spanish lexicon -> \"Jay pájaro\"", es.spec.texts().any(|t| t == "Jay pájaro")),
        ("originals retained", es.spec.texts().any(|t| t == "Jay bird")),
        ("1000 classes -> 10 lists", lists.len() == 10),
        ("every list holds 100 classes", lists.iter().all(|l| l.lines.len() == 100)),
        ("order preserved", covered.iter().zip(&specs).all(|(c, s)| **c == s.class_id)),
    ]);
}

#[test]
fn criterion_06_dedup_partition_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut violations = Vec::new();
    for fixture in 0..1000 {
        let n = rng.gen_range(1..60);
        let threshold = rng.gen_range(0..=10);
        let bases: Vec<u64> = (0..rng.gen_range(1..6)).map(|_| rng.gen()).collect();
        let mut ranks: Vec<u64> = (0..n as u64).collect();
        for i in (1..ranks.len()).rev() {
            ranks.swap(i, rng.gen_range(0..=i));
        }
        let records: Vec<ImageRecord> = (0..n)
            .map(|i| {
                let mut h = bases[rng.gen_range(0..bases.len())];
                for _ in 0..rng.gen_range(0..8) {
                    h ^= 1 << rng.gen_range(0..64);
                }
                let mut r = ImageRecord::pending("c", &format!("u{i}"), "p", ranks[i]);
                r.status = RecordStatus::Downloaded;
                r.phash = Some(PHash64(h));
                r
            })
            .collect();
        let part = dedup_class(&records, threshold).unwrap();
        let hash = |i: usize| records[i].phash.unwrap();
        let rank = |i: usize| records[i].rank;

        let mut seen: Vec<usize> =
            part.kept.iter().copied().chain(part.removed.iter().map(|r| r.removed)).collect();
        seen.sort_unstable();
        if seen != (0..n).collect::<Vec<_>>() {
            violations.push(format!("fixture {fixture}: not a partition"));
        }
        let earliest = (0..n).min_by_key(|&i| rank(i)).unwrap();
        if !part.kept.contains(&earliest) {
            violations.push(format!("fixture {fixture}: earliest record not kept"));
        }
        for (a, &i) in part.kept.iter().enumerate() {
            for &j in &part.kept[a + 1..] {
                if hamming(hash(i), hash(j)) <= threshold {
                    violations.push(format!("fixture {fixture}: two kept records collide"));
                }
            }
        }
        for rm in &part.removed {
            let d = hamming(hash(rm.removed), hash(rm.kept));
            if d != rm.distance || d > threshold {
                violations.push(format!("fixture {fixture}: removal outside threshold"));
            }
            if rank(rm.kept) >= rank(rm.removed) {
                violations.push(format!("fixture {fixture}: kept record is not earlier"));
            }
        }
        // brute-force greedy sweep as oracle
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&i| rank(i));
        let mut kept_oracle: Vec<usize> = Vec::new();
        for &i in &order {
            if kept_oracle.iter().all(|&k| hamming(hash(i), hash(k)) > threshold) {
                kept_oracle.push(i);
            }
        }
        if kept_oracle != part.kept {
            violations.push(format!("fixture {fixture}: kept set differs from linear sweep"));
        }
    }
    let elapsed = start.elapsed();
    if let Some(v) = violations.first() {
        println!("first violation: {v}");
    }
    verdict(6, "dedup partition properties on 1,000 random fixtures", &[
        ("no property violations", violations.is_empty()),
        ("runtime < 10 s", elapsed < DEDUP_BUDGET),
    ]);
}

#[test]
fn criterion_07_equation_numerics() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let z: Vec<f64> = (0..10).map(|_| rng.gen_range(-5.0..5.0)).collect();
    let p = softmax(&z);
    let sums_to_one = (p.iter().sum::<f64>() - 1.0).abs() < SOFTMAX_TOL;
    let shifted: Vec<f64> = z.iter().map(|v| v + 123.456).collect();
    let shift_inv = softmax(&shifted).iter().zip(&p).all(|(a, b)| (a - b).abs() < SOFTMAX_TOL);
    let worked = softmax(&[2f64.ln(), 0.0, 0.0]);
    let worked_ok = worked.iter().zip([0.5, 0.25, 0.25]).all(|(a, b)| (a - b).abs() < SOFTMAX_TOL);
    let boundary = perceptron_predict(&[1.0, -1.0], 0.0, &[2.0, 2.0]).unwrap() == 0;

    let data = gaussian_blobs(&BlobSpec {
        n_classes: 3,
        per_class: 8,
        dim: 4,
        separation: 2.0,
        spread: 1.0,
        seed: 70,
    });
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut model = LinearModel::zeros(3, 4);
        let params: Vec<f64> = (0..model.params().len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        model.set_params(&params);
        let analytic = softmax_gradient(&model, &data, 0.0).params();
        let h = 1e-5;
        for (k, g) in analytic.iter().enumerate() {
            let mut plus = params.clone();
            plus[k] += h;
            let mut minus = params.clone();
            minus[k] -= h;
            let mut mp = model.clone();
            mp.set_params(&plus);
            let mut mm = model.clone();
            mm.set_params(&minus);
            let numeric = (softmax_loss(&mp, &data, 0.0) - softmax_loss(&mm, &data, 0.0)) / (2.0 * h);
            let rel = (g - numeric).abs() / g.abs().max(numeric.abs()).max(1e-8);
            worst = worst.max(rel);
        }
    }
    let cfg = TrainConfig { alpha0: 0.01, ..TrainConfig::default() };
    let lr_ok = (0..10).all(|e| lr_schedule(&cfg, e) == 0.01);

    verdict(7, "softmax, perceptron, gradient, step schedule", &[
        ("softmax sums to 1", sums_to_one),
        ("softmax shift invariant", shift_inv),
        ("softmax([ln 2, 0, 0]) = [0.5, 0.25, 0.25]", worked_ok),
        ("perceptron returns 0 on the boundary", boundary),
        ("gradient matches central differences", worst < GRADIENT_REL_TOL),
        ("lr = 0.01 for epochs 0..=9", lr_ok),
    ]);
}

fn two_per_class(n: usize) -> FeatureTable {
    let labels: Vec<usize> = (0..n).flat_map(|c| [c, c]).collect();
    let rows = labels.iter().enumerate().map(|(i, &c)| vec![c as f64, (i % 2) as f64]).collect();
    FeatureTable::from_rows(labels, rows).unwrap()
}

#[test]
fn criterion_08_protocol_invariants() {
    let quick = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let pair_counts_ok = (2..=50).all(|n| {
        let m = train_one_vs_one(&two_per_class(n), &quick, BinaryLoss::Logistic).unwrap();
        m.models.len() == n * (n - 1) / 2
    });

    let blobs = gaussian_blobs(&BlobSpec {
        n_classes: 5,
        per_class: 60,
        dim: 8,
        separation: 6.0,
        spread: 0.5,
        seed: 80,
    });
    let rc = RecognitionConfig { seed: 8, ..RecognitionConfig::default() };
    let r1 = shallow_eval::run_recognition_protocol(&blobs, &rc).unwrap();
    let r2 = shallow_eval::run_recognition_protocol(&blobs, &rc).unwrap();
    let bitwise = r1.per_split.iter().zip(&r2.per_split).all(|(a, b)| a.to_bits() == b.to_bits());

    // domain tables with distinct ids so the ST union is visible
    let domain = |prefix: &str, per_class: usize, seed: u64| {
        let t = gaussian_blobs(&BlobSpec {
            n_classes: 4,
            per_class,
            dim: 6,
            separation: 4.0,
            spread: 1.0,
            seed,
        });
        let ids = (0..t.len()).map(|i| format!("{prefix}{i}")).collect();
        FeatureTable::new(ids, t.labels().to_vec(), t.rows().map(<[f64]>::to_vec).collect(), None).unwrap()
    };
    let source = domain("src", 30, 81);
    let target = domain("tgt", 12, 82);
    let per_class = |t: &FeatureTable| t.class_counts().values().copied().collect::<Vec<_>>();
    let mut budget_checks = Vec::new();
    for (budget, label) in
        [(shallow_eval::SOURCE_LABELS_AMAZON, "20"), (shallow_eval::SOURCE_LABELS_DSLR, "8")]
    {
        let s = shallow_eval::sample_da_split(&source, &target, &DaConfig::new(DaMode::S, budget), 0).unwrap();
        let t = shallow_eval::sample_da_split(&source, &target, &DaConfig::new(DaMode::T, budget), 0).unwrap();
        let st = shallow_eval::sample_da_split(&source, &target, &DaConfig::new(DaMode::ST, budget), 0).unwrap();
        let s_ok = per_class(&s.train) == vec![budget; 4] && s.train.ids().iter().all(|i| i.starts_with("src"));
        let t_ok = per_class(&t.train) == vec![shallow_eval::TARGET_LABELS; 4]
            && t.train.ids().iter().all(|i| i.starts_with("tgt"));
        let union: HashSet<&String> = s.train.ids().iter().chain(t.train.ids()).collect();
        let st_ids: HashSet<&String> = st.train.ids().iter().collect();
        let st_ok = st_ids == union && st.train.len() == s.train.len() + t.train.len();
        let test_ok = s.test == t.test
            && t.test == st.test
            && t.test.ids().iter().all(|i| !t.train.ids().contains(i));
        budget_checks.push((label, s_ok && t_ok && st_ok && test_ok));
    }

    verdict(8, "one-vs-one counts, recognition protocol, DA budgets", &[
        ("N(N-1)/2 pair models for N = 2..=50", pair_counts_ok),
        ("recognition mean accuracy >= 0.95", r1.mean >= RECOGNITION_MIN_ACC),
        ("recognition uses 5 splits", r1.per_split.len() == 5),
        ("recognition bit-reproducible", bitwise),
        ("source budget 20 and target 3, ST is the union", budget_checks[0].1),
        ("source budget 8 and target 3, ST is the union", budget_checks[1].1),
    ]);
}

#[test]
fn criterion_09_embedding() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let rows: Vec<Vec<f64>> =
        (0..50).map(|_| (0..10).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect();
    let x = nalgebra::DMatrix::from_fn(50, 10, |i, j| rows[i][j]);
    let (model, proj) = pca_fit_transform(&x, 10).unwrap();
    let (mean, cov) = common::covariance(&rows);
    let oracle = common::jacobi_eigen(cov);
    let mut worst: f64 = 0.0;
    for (c, (_, v)) in oracle.iter().enumerate() {
        let oracle_proj: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().zip(&mean).zip(v).map(|((a, m), e)| (a - m) * e).sum())
            .collect();
        let sign = if model.components[c].iter().zip(v).map(|(a, b)| a * b).sum::<f64>() < 0.0 {
            -1.0
        } else {
            1.0
        };
        for (i, o) in oracle_proj.iter().enumerate() {
            worst = worst.max((proj[(i, c)] - sign * o).abs());
        }
    }

    let blobs = gaussian_blobs(&BlobSpec {
        n_classes: 3,
        per_class: 50,
        dim: 10,
        separation: 10.0,
        spread: 1.0,
        seed: 90,
    });
    let cfg = TsneConfig { seed: 9, ..TsneConfig::default() };
    let aff = compute_affinities(blobs.data(), blobs.len(), blobs.dim(), cfg.perplexity).unwrap();
    let target_bits = cfg.perplexity.log2();
    let entropy_ok = aff.entropies_bits.iter().all(|h| (h - target_bits).abs() < ENTROPY_TOL_BITS);
    let emb = tsne_embed(blobs.data(), blobs.len(), blobs.dim(), &cfg).unwrap();
    let sil = silhouette_score(&emb.coords, 2, blobs.labels());
    let elapsed = start.elapsed();
    println!(
        "  pca max deviation {worst:.2e}; kl {:.4} -> {:.4}; silhouette {sil:.3}",
        emb.initial_kl(),
        emb.final_kl()
    );
    verdict(9, "PCA oracle, t-SNE entropy, KL descent, blob separation", &[
        ("PCA projection within 1e-8 of the eigen oracle", worst < PCA_TOL),
        ("per-point entropy = log2(perplexity)", entropy_ok),
        ("final KL < initial KL", emb.final_kl() < emb.initial_kl()),
        ("silhouette > 0.5", sil > SILHOUETTE_MIN),
        ("runtime < 60 s", elapsed < EMBEDDING_BUDGET),
    ]);
}

fn run_cli(args: &[&str]) -> i32 {
    let argv: Vec<String> = std::iter::once("webcorpus").chain(args.iter().copied()).map(String::from).collect();
    webcorpus::cli::dispatch(argv)
}

#[test]
fn criterion_10_end_to_end_pipeline() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let fx = common::build_fixture(dir.path());
    let server = StaticFileServer::start(&fx.www).unwrap();
    let p = |name: &str| dir.path().join(name).display().to_string();
    let s = |path: &std::path::Path| path.display().to_string();

    let codes = [
        run_cli(&[
            "expand", "--taxonomy", &s(&fx.taxonomy), "--overrides", &s(&fx.overrides),
            "--leaves-only", "--out", &p("queries"),
        ]),
        run_cli(&[
            "harvest", "--specs", &p("queries/specs.jsonl"), "--fixture-dir", &s(&fx.pages),
            "--base-url", server.base_url(), "--rate-limit", "1000", "--out", &p("hits.jsonl"),
        ]),
        run_cli(&[
            "download", "--hits", &p("hits.jsonl"), "--manifest", &p("manifest.jsonl"),
            "--root", &p("corpus"),
        ]),
        run_cli(&[
            "dedup", "--manifest", &p("manifest.jsonl"), "--threshold", "5",
            "--report", &p("dedup.csv"),
        ]),
        run_cli(&[
            "split", "--manifest", &p("manifest.jsonl"), "--strategy", "chronological",
            "--target", "19", "--out", &p("split.tsv"),
        ]),
        run_cli(&["stats", "--split", &p("split.tsv"), "--name", "fixture", "--out", &p("stats.csv")]),
    ];

    let hits = harvest::read_hits_jsonl(&std::fs::read_to_string(p("hits.jsonl")).unwrap()).unwrap();
    let harvested: usize = hits.values().map(Vec::len).sum();
    let (manifest, _) = harvest::load_manifest(p("manifest.jsonl")).unwrap();
    let count = |st: RecordStatus| manifest.records().iter().filter(|r| r.status == st).count();
    let listing =
        dataset::SplitListing::parse_tsv(&std::fs::read_to_string(p("split.tsv")).unwrap()).unwrap();
    let stats = dataset::split_stats(&listing);
    let stats_csv = std::fs::read_to_string(p("stats.csv")).unwrap();
    let elapsed = start.elapsed();

    // hand counts: 20 images per class; jay repeats 2, boxer repeats 1
    let expected: BTreeMap<String, usize> =
        [("boxer", 19), ("jay", 18), ("tabby", 19)].map(|(c, n)| (c.to_string(), n)).into();
    verdict(10, "fixture pipeline expand -> harvest -> download -> dedup -> split -> stats", &[
        ("every stage exits 0", codes.iter().all(|&c| c == 0)),
        ("60 URLs harvested", harvested == 60),
        ("60 images downloaded", count(RecordStatus::Downloaded) + count(RecordStatus::RemovedDuplicate) == 60),
        ("3 near-duplicates removed", count(RecordStatus::RemovedDuplicate) == 3),
        ("per-class split counts", listing.counts() == expected),
        ("minimum 18", stats.minimum == 18),
        ("maximum 19", stats.maximum == 19),
        ("total 56", stats.total == 56),
        ("average 56/3", stats.average == 56.0 / 3.0),
        ("stats file summary row", stats_csv.lines().nth(1) == Some("fixture,18.67,18,19,56")),
        ("runtime < 30 s", elapsed < PIPELINE_BUDGET),
    ]);
}
