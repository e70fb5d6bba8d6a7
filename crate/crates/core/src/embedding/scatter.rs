use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;

use super::{EmbeddingError, EmbeddingResult};

/// Group name for classes that belong to no super-class.
pub const OTHER_GROUP: &str = "other";

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#393b79",
];
const OTHER_COLOR: &str = "#9a9a9a";

/// Named, disjoint groups of class ids, kept in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SuperClassMap {
    groups: IndexMap<String, Vec<String>>,
    owner: HashMap<String, String>,
}

impl SuperClassMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert_group(&mut self, name: &str, class_ids: &[String]) -> Result<(), EmbeddingError> {
        if name == OTHER_GROUP {
            return Err(EmbeddingError::SuperClass(format!("`{OTHER_GROUP}` is reserved")));
        }
        if self.groups.contains_key(name) {
            return Err(EmbeddingError::SuperClass(format!("group `{name}` defined twice")));
        }
        for id in class_ids {
            if let Some(prev) = self.owner.get(id) {
                return Err(EmbeddingError::SuperClass(format!(
                    "class `{id}` is in both `{prev}` and `{name}`"
                )));
            }
        }
        for id in class_ids {
            self.owner.insert(id.clone(), name.to_string());
        }
        self.groups.insert(name.to_string(), class_ids.to_vec());
        Ok(())
    }

    /// Parses `group<TAB>id,id,...` lines. Blank lines and `#` comments are skipped.
    pub fn parse_tsv(text: &str) -> Result<Self, EmbeddingError> {
        let mut map = Self::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, ids) = line.split_once('\t').ok_or_else(|| {
                EmbeddingError::SuperClass(format!("line {}: expected group<TAB>ids", n + 1))
            })?;
            let ids: Vec<String> = ids
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
            map.insert_group(name.trim(), &ids)?;
        }
        Ok(map)
    }

    pub fn to_tsv(&self) -> String {
        self.groups.iter().map(|(g, ids)| format!("{g}\t{}\n", ids.join(","))).collect()
    }

    pub fn group_of(&self, class_id: &str) -> Option<&str> {
        self.owner.get(class_id).map(String::as_str)
    }

    pub fn groups(&self) -> impl Iterator<Item = (&str, &[String])> {
        self.groups.iter().map(|(g, ids)| (g.as_str(), ids.as_slice()))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScatterFiles {
    pub csv: PathBuf,
    pub svg: PathBuf,
    /// Group name → color actually used, in legend order.
    pub legend: Vec<(String, String)>,
    pub warnings: Vec<String>,
}

/// Writes `<stem>.csv` and `<stem>.svg` under `out_dir`.
pub fn emit_scatter(
    y: &EmbeddingResult,
    class_ids: &[String],
    map: &SuperClassMap,
    out_dir: &Path,
    stem: &str,
) -> Result<ScatterFiles, EmbeddingError> {
    if y.dim != 2 {
        return Err(EmbeddingError::Shape(format!("scatter needs 2-D coordinates, got {}", y.dim)));
    }
    if class_ids.len() != y.len() {
        return Err(EmbeddingError::Shape(format!(
            "{} labels for {} points",
            class_ids.len(),
            y.len()
        )));
    }
    std::fs::create_dir_all(out_dir)?;

    let mut warnings = Vec::new();
    let mut unmapped: BTreeMap<&str, usize> = BTreeMap::new();
    let groups: Vec<&str> = class_ids
        .iter()
        .map(|c| {
            map.group_of(c).unwrap_or_else(|| {
                *unmapped.entry(c.as_str()).or_default() += 1;
                OTHER_GROUP
            })
        })
        .collect();
    if !map.is_empty() {
        for (c, k) in &unmapped {
            let msg = format!("class `{c}` ({k} points) has no super-class; drawn as `{OTHER_GROUP}`");
            log::warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut legend: Vec<(String, String)> = Vec::new();
    for (i, (g, _)) in map.groups().enumerate() {
        if groups.contains(&g) {
            legend.push((g.to_string(), PALETTE[i % PALETTE.len()].to_string()));
        }
    }
    if groups.contains(&OTHER_GROUP) {
        legend.push((OTHER_GROUP.to_string(), OTHER_COLOR.to_string()));
    }
    let color_of: HashMap<&str, &str> =
        legend.iter().map(|(g, c)| (g.as_str(), c.as_str())).collect();

    let csv_path = out_dir.join(format!("{stem}.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["x", "y", "class_id", "superclass"])?;
    for (i, (c, g)) in class_ids.iter().zip(&groups).enumerate() {
        let p = y.point(i);
        w.write_record([p[0].to_string(), p[1].to_string(), c.clone(), g.to_string()])?;
    }
    w.flush()?;

    let svg_path = out_dir.join(format!("{stem}.svg"));
    std::fs::write(&svg_path, render_svg(y, &groups, &color_of, &legend))?;
    Ok(ScatterFiles { csv: csv_path, svg: svg_path, legend, warnings })
}

fn render_svg(
    y: &EmbeddingResult,
    groups: &[&str],
    color_of: &HashMap<&str, &str>,
    legend: &[(String, String)],
) -> String {
    let (size, pad, legend_w) = (800.0, 20.0, 180.0);
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for i in 0..y.len() {
        let p = y.point(i);
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span = (x1 - x0).max(y1 - y0).max(1e-12);
    let scale = (size - 2.0 * pad) / span;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{size}" viewBox="0 0 {} {size}">"#,
        size + legend_w,
        size + legend_w
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (i, g) in groups.iter().enumerate() {
        let p = y.point(i);
        let cx = pad + (p[0] - x0) * scale;
        let cy = size - pad - (p[1] - y0) * scale;
        let _ = writeln!(
            s,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="3" fill="{}" fill-opacity="0.8" class="pt"/>"#,
            color_of[g]
        );
    }
    for (k, (g, color)) in legend.iter().enumerate() {
        let ly = pad + 20.0 * k as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{}" y="{ly}" width="12" height="12" fill="{color}" class="legend"/>"#,
            size + 10.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-family="sans-serif" font-size="13">{}</text>"#,
            size + 28.0,
            ly + 11.0,
            escape(g)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
