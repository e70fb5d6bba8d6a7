#![allow(dead_code)]

use std::io::Cursor;
use std::path::{Path, PathBuf};

use image::{ImageFormat, RgbImage};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use webcorpus::harvest::fixture::FixtureProvider;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Returns
/// eigenvalues in descending order with unit eigenvectors.
pub fn jacobi_eigen(mut a: Vec<Vec<f64>>) -> Vec<(f64, Vec<f64>)> {
    let n = a.len();
    let mut v: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(i == j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let (vkp, vkq) = (row[p], row[q]);
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> =
        (0..n).map(|j| (a[j][j], (0..n).map(|i| v[i][j]).collect())).collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs
}

/// Sample covariance (denominator n - 1) of row vectors.
pub fn covariance(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n as f64).collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in rows {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (r[i] - mean[i]) * (r[j] - mean[j]);
            }
        }
    }
    for row in cov.iter_mut() {
        row.iter_mut().for_each(|v| *v /= (n - 1) as f64);
    }
    (mean, cov)
}

/// A 64×64 image made of 8×8 random color blocks.
pub fn block_image(seed: u64) -> RgbImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let blocks: Vec<[u8; 3]> = (0..64).map(|_| rng.gen()).collect();
    RgbImage::from_fn(64, 64, |x, y| image::Rgb(blocks[(y / 8 * 8 + x / 8) as usize]))
}

pub fn png_bytes(img: &RgbImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("png encode");
    out.into_inner()
}

/// `block_image(seed)` with one pixel nudged: visually the same picture,
/// different bytes.
pub fn near_copy(seed: u64) -> RgbImage {
    let mut img = block_image(seed);
    let p = img.get_pixel_mut(3, 3);
    p.0[0] = p.0[0].saturating_add(1);
    img
}

/// One class of the end-to-end fixture.
pub struct FixtureClass {
    pub id: &'static str,
    pub lemma: &'static str,
    pub parent: &'static str,
    pub images: usize,
    /// Positions (within the class, by rank) that repeat an earlier image.
    pub duplicates: &'static [(usize, usize)],
}

pub const FIXTURE_CLASSES: [FixtureClass; 3] = [
    FixtureClass { id: "jay", lemma: "jay", parent: "bird", images: 20, duplicates: &[(7, 2), (15, 0)] },
    FixtureClass { id: "boxer", lemma: "boxer", parent: "dog", images: 20, duplicates: &[(11, 4)] },
    FixtureClass { id: "tabby", lemma: "tabby", parent: "cat", images: 20, duplicates: &[] },
];

pub struct Fixture {
    pub taxonomy: PathBuf,
    pub overrides: PathBuf,
    pub pages: PathBuf,
    pub www: PathBuf,
}

/// Writes taxonomy, fixture search pages and image files under `root`.
///
/// Each class's 20 images are spread over its two queries: the base query
/// returns images 0..12 over two pages, the expanded query returns 10..20,
/// so two URLs repeat across queries. Search URLs use `{base}`.
pub fn build_fixture(root: &Path) -> Fixture {
    let www = root.join("www");
    let pages = root.join("pages");
    std::fs::create_dir_all(&www).unwrap();
    let mut tax = String::from("# id\tparent\tlemmas\n");
    for c in &FIXTURE_CLASSES {
        tax.push_str(&format!("{p}\t-\t{p}\n", p = c.parent));
        tax.push_str(&format!("{}\t{}\t{}\n", c.id, c.parent, c.lemma));
    }
    let taxonomy = root.join("taxonomy.tsv");
    std::fs::write(&taxonomy, tax).unwrap();
    let overrides = root.join("overrides.tsv");
    std::fs::write(&overrides, "").unwrap();

    for (ci, c) in FIXTURE_CLASSES.iter().enumerate() {
        let mut urls = Vec::new();
        for i in 0..c.images {
            let source = c.duplicates.iter().find(|d| d.0 == i).map(|d| d.1);
            let img = match source {
                Some(orig) => near_copy(seed_for(ci, orig)),
                None => block_image(seed_for(ci, i)),
            };
            let name = format!("{}_{i:02}.png", c.id);
            std::fs::write(www.join(&name), png_bytes(&img)).unwrap();
            urls.push(format!("{{base}}/{name}"));
        }
        let base_q = c.lemma.to_string();
        let expanded_q = format!("{} {}", c.lemma, c.parent);
        FixtureProvider::write_page(&pages, &base_q, 0, &urls[0..8]).unwrap();
        FixtureProvider::write_page(&pages, &base_q, 1, &urls[8..12]).unwrap();
        FixtureProvider::write_page(&pages, &expanded_q, 0, &urls[10..20]).unwrap();
    }
    Fixture { taxonomy, overrides, pages, www }
}

fn seed_for(class: usize, i: usize) -> u64 {
    1000 * class as u64 + i as u64
}
