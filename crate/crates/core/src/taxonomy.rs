//! Lexical hierarchy parsing and query expansion.
//!
//! A taxonomy file is line-oriented TSV:
//!
//! ```text
//! # id    parent   lemmas            [gloss]
//! bird    -        bird
//! jay     bird     jay
//! ```
//!
//! Every class compiles into a [`QuerySpec`]: one base query per lemma, plus a
//! parent-expanded query (`"<lemma> <parent-term>"`) for non-root classes.
//! Translated variants are added by [`translate_queries`] from an offline
//! [`Lexicon`].

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Language tag attached to untranslated queries.
pub const BASE_LANGUAGE: &str = "en";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TaxonomyError {
    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("node `{node}` references unknown parent `{parent}`")]
    UnresolvedParent { node: String, parent: String },
    #[error("parent links form a cycle through `{0}`")]
    Cycle(String),
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("invalid node `{node}`: {reason}")]
    InvalidNode { node: String, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SynsetNode {
    pub id: String,
    pub parent_id: Option<String>,
    pub lemmas: Vec<String>,
    pub gloss: Option<String>,
}

impl SynsetNode {
    fn validate(&self) -> Result<(), TaxonomyError> {
        let invalid = |reason: &str| TaxonomyError::InvalidNode {
            node: self.id.clone(),
            reason: reason.to_string(),
        };
        if self.id.is_empty() || self.id.contains(['\t', '\n', '\r']) {
            return Err(invalid("id must be non-empty and free of tabs/newlines"));
        }
        if self.id == "-" {
            return Err(invalid("`-` is reserved for \"no parent\""));
        }
        if self.lemmas.is_empty() {
            return Err(invalid("at least one lemma is required"));
        }
        for lemma in &self.lemmas {
            if lemma.trim().is_empty() {
                return Err(invalid("empty lemma"));
            }
            if lemma.contains(['\t', '\n', '\r', ',']) {
                return Err(invalid("lemmas may not contain tabs, newlines or commas"));
            }
        }
        if let Some(gloss) = &self.gloss {
            if gloss.contains(['\t', '\n', '\r']) {
                return Err(invalid("gloss may not contain tabs or newlines"));
            }
        }
        Ok(())
    }
}

/// A validated forest of synsets. Iteration follows file order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Taxonomy {
    nodes: IndexMap<String, SynsetNode>,
    roots: Vec<String>,
}

impl Taxonomy {
    /// Builds a taxonomy from nodes, checking parent resolution and acyclicity.
    pub fn from_nodes(nodes: Vec<SynsetNode>) -> Result<Self, TaxonomyError> {
        let mut map = IndexMap::with_capacity(nodes.len());
        for node in nodes {
            node.validate()?;
            if map.contains_key(&node.id) {
                return Err(TaxonomyError::InvalidNode {
                    node: node.id.clone(),
                    reason: "duplicate id".into(),
                });
            }
            map.insert(node.id.clone(), node);
        }
        for node in map.values() {
            if let Some(parent) = &node.parent_id {
                if !map.contains_key(parent) {
                    return Err(TaxonomyError::UnresolvedParent {
                        node: node.id.clone(),
                        parent: parent.clone(),
                    });
                }
            }
        }
        check_acyclic(&map)?;
        let roots = map
            .values()
            .filter(|n| n.parent_id.is_none())
            .map(|n| n.id.clone())
            .collect();
        Ok(Taxonomy { nodes: map, roots })
    }

    pub fn get(&self, id: &str) -> Option<&SynsetNode> {
        self.nodes.get(id)
    }

    pub fn parent(&self, id: &str) -> Option<&SynsetNode> {
        self.nodes
            .get(id)
            .and_then(|n| n.parent_id.as_deref())
            .and_then(|p| self.nodes.get(p))
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SynsetNode> {
        self.nodes.values()
    }

    pub fn roots(&self) -> &[String] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Ids of nodes that no other node names as parent.
    pub fn leaves(&self) -> Vec<&str> {
        let parents: HashSet<&str> = self
            .nodes
            .values()
            .filter_map(|n| n.parent_id.as_deref())
            .collect();
        self.nodes
            .keys()
            .map(String::as_str)
            .filter(|id| !parents.contains(id))
            .collect()
    }

    /// Serializes back to the TSV format read by [`parse_taxonomy`].
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for node in self.nodes.values() {
            out.push_str(&node.id);
            out.push('\t');
            out.push_str(node.parent_id.as_deref().unwrap_or("-"));
            out.push('\t');
            out.push_str(&node.lemmas.join(","));
            if let Some(gloss) = &node.gloss {
                out.push('\t');
                out.push_str(gloss);
            }
            out.push('\n');
        }
        out
    }
}

fn check_acyclic(nodes: &IndexMap<String, SynsetNode>) -> Result<(), TaxonomyError> {
    // 0 = unvisited, 1 = on current chain, 2 = known to reach a root
    let mut state: HashMap<&str, u8> = HashMap::with_capacity(nodes.len());
    for start in nodes.keys() {
        let mut chain = Vec::new();
        let mut cur = Some(start.as_str());
        while let Some(id) = cur {
            match state.get(id).copied().unwrap_or(0) {
                2 => break,
                1 => return Err(TaxonomyError::Cycle(id.to_string())),
                _ => {}
            }
            state.insert(id, 1);
            chain.push(id);
            cur = nodes[id].parent_id.as_deref();
        }
        for id in chain {
            state.insert(id, 2);
        }
    }
    Ok(())
}

/// Parses the taxonomy TSV: `id<TAB>parent-or-"-"<TAB>lemma1,lemma2,...[<TAB>gloss]`.
pub fn parse_taxonomy(text: &str) -> Result<Taxonomy, TaxonomyError> {
    let mut nodes = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=4).contains(&fields.len()) {
            return Err(TaxonomyError::Parse {
                line: line_no,
                reason: format!("expected 3 or 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[0].trim();
        if id.is_empty() {
            return Err(TaxonomyError::Parse { line: line_no, reason: "empty id".into() });
        }
        let parent = fields[1].trim();
        let parent_id = match parent {
            "-" => None,
            "" => {
                return Err(TaxonomyError::Parse {
                    line: line_no,
                    reason: "empty parent field (use `-` for roots)".into(),
                })
            }
            p => Some(p.to_string()),
        };
        let lemmas: Vec<String> = fields[2].split(',').map(|l| l.trim().to_string()).collect();
        if lemmas.iter().any(String::is_empty) {
            return Err(TaxonomyError::Parse { line: line_no, reason: "empty lemma".into() });
        }
        let gloss = fields.get(3).map(|g| g.trim().to_string()).filter(|g| !g.is_empty());
        nodes.push(SynsetNode { id: id.to_string(), parent_id, lemmas, gloss });
    }
    Taxonomy::from_nodes(nodes)
}

/// Parses the overrides TSV: `id<TAB>parent-term`.
pub fn parse_overrides(text: &str) -> Result<BTreeMap<String, String>, TaxonomyError> {
    let mut out = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let (id, term) = line.split_once('\t').ok_or_else(|| TaxonomyError::Parse {
            line: idx + 1,
            reason: "expected `id<TAB>parent-term`".into(),
        })?;
        let (id, term) = (id.trim(), term.trim());
        if id.is_empty() || term.is_empty() || term.contains('\t') {
            return Err(TaxonomyError::Parse {
                line: idx + 1,
                reason: "expected `id<TAB>parent-term`".into(),
            });
        }
        out.insert(id.to_string(), term.to_string());
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryStage {
    Base,
    ParentExpanded,
    Translated,
}

impl fmt::Display for QueryStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            QueryStage::Base => "base",
            QueryStage::ParentExpanded => "parent_expanded",
            QueryStage::Translated => "translated",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Query {
    pub text: String,
    pub stage: QueryStage,
    pub language: String,
    /// The lemma the query was built from.
    pub lemma: String,
    /// The appended parent term, for expanded and translated queries.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_term: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuerySpec {
    pub class_id: String,
    pub queries: Vec<Query>,
}

impl QuerySpec {
    fn push_unique(&mut self, query: Query) -> bool {
        if self.queries.iter().any(|q| q.text == query.text) {
            return false;
        }
        self.queries.push(query);
        true
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.queries.iter().map(|q| q.text.as_str())
    }

    pub fn count_stage(&self, stage: QueryStage) -> usize {
        self.queries.iter().filter(|q| q.stage == stage).count()
    }
}

/// Compiles one class into base and parent-expanded queries.
///
/// The parent term is `overrides[class_id]` when present, otherwise the first
/// lemma of the parent node. Roots without an override get base queries only.
pub fn expand_queries(
    taxonomy: &Taxonomy,
    class_id: &str,
    overrides: &BTreeMap<String, String>,
) -> Result<QuerySpec, TaxonomyError> {
    let node = taxonomy
        .get(class_id)
        .ok_or_else(|| TaxonomyError::UnknownClass(class_id.to_string()))?;
    let parent_term = overrides
        .get(class_id)
        .cloned()
        .or_else(|| taxonomy.parent(class_id).map(|p| p.lemmas[0].clone()));

    let mut spec = QuerySpec { class_id: class_id.to_string(), queries: Vec::new() };
    for lemma in &node.lemmas {
        spec.push_unique(Query {
            text: lemma.clone(),
            stage: QueryStage::Base,
            language: BASE_LANGUAGE.to_string(),
            lemma: lemma.clone(),
            parent_term: None,
        });
        if let Some(parent) = &parent_term {
            spec.push_unique(Query {
                text: format!("{lemma} {parent}"),
                stage: QueryStage::ParentExpanded,
                language: BASE_LANGUAGE.to_string(),
                lemma: lemma.clone(),
                parent_term: Some(parent.clone()),
            });
        }
    }
    Ok(spec)
}

/// Offline translation table keyed by `(language, term)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    entries: BTreeMap<(String, String), String>,
}

impl Lexicon {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, language: &str, term: &str, translation: &str) {
        self.entries
            .insert((language.to_string(), term.to_string()), translation.to_string());
    }

    /// Exact lookup first, then a case-insensitive fallback.
    pub fn lookup(&self, language: &str, term: &str) -> Option<&str> {
        if let Some(t) = self.entries.get(&(language.to_string(), term.to_string())) {
            return Some(t);
        }
        let lowered = term.to_lowercase();
        self.entries
            .iter()
            .find(|((lang, t), _)| lang == language && t.to_lowercase() == lowered)
            .map(|(_, v)| v.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Parses the lexicon TSV: `language<TAB>term<TAB>translation`.
    pub fn parse(text: &str) -> Result<Self, TaxonomyError> {
        let mut lex = Lexicon::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').map(str::trim).collect();
            if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
                return Err(TaxonomyError::Parse {
                    line: idx + 1,
                    reason: "expected `language<TAB>term<TAB>translation`".into(),
                });
            }
            lex.insert(fields[0], fields[1], fields[2]);
        }
        Ok(lex)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TranslationScope {
    /// Translate only the appended parent term; the lemma is kept verbatim.
    #[default]
    ParentOnly,
    /// Also substitute the lemma when the lexicon covers it.
    AllTerms,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranslationOutcome {
    pub spec: QuerySpec,
    pub warnings: Vec<String>,
}

/// Appends translated variants of every parent-expanded query.
///
/// Queries whose parent term has no lexicon entry for a language are skipped
/// and reported in `warnings`. Original queries are always retained.
pub fn translate_queries(
    spec: &QuerySpec,
    lexicon: &Lexicon,
    languages: &[String],
    scope: TranslationScope,
) -> TranslationOutcome {
    let mut out = spec.clone();
    let mut warnings = Vec::new();
    let expanded: Vec<&Query> = spec
        .queries
        .iter()
        .filter(|q| q.stage == QueryStage::ParentExpanded)
        .collect();
    if expanded.is_empty() {
        warnings.push(format!(
            "class `{}` has no parent-expanded queries; nothing to translate",
            spec.class_id
        ));
        return TranslationOutcome { spec: out, warnings };
    }
    for language in languages {
        for query in &expanded {
            let parent = query.parent_term.as_deref().unwrap_or_default();
            let Some(parent_tr) = lexicon.lookup(language, parent) else {
                warnings.push(format!(
                    "no `{language}` translation for `{parent}`; skipped \"{}\"",
                    query.text
                ));
                continue;
            };
            let lemma_tr = match scope {
                TranslationScope::ParentOnly => query.lemma.as_str(),
                TranslationScope::AllTerms => {
                    lexicon.lookup(language, &query.lemma).unwrap_or(&query.lemma)
                }
            };
            let added = out.push_unique(Query {
                text: format!("{lemma_tr} {parent_tr}"),
                stage: QueryStage::Translated,
                language: language.clone(),
                lemma: query.lemma.clone(),
                parent_term: Some(parent_tr.to_string()),
            });
            if !added {
                log::debug!("translated query duplicates an existing one in `{}`", spec.class_id);
            }
        }
    }
    TranslationOutcome { spec: out, warnings }
}

/// One query-list file: one line per class, keywords separated by `", "`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QueryList {
    pub class_ids: Vec<String>,
    pub lines: Vec<String>,
}

impl QueryList {
    pub fn to_text(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}

/// Partitions classes into `ceil(N / list_size)` lists, preserving order.
pub fn build_query_lists(specs: &[QuerySpec], list_size: usize) -> Vec<QueryList> {
    assert!(list_size >= 1, "list_size must be at least 1");
    specs
        .chunks(list_size)
        .map(|chunk| QueryList {
            class_ids: chunk.iter().map(|s| s.class_id.clone()).collect(),
            lines: chunk.iter().map(|s| s.texts().collect::<Vec<_>>().join(", ")).collect(),
        })
        .collect()
}

/// Splits a query-list line back into its keywords.
pub fn parse_query_line(line: &str) -> Vec<String> {
    line.split(',')
        .map(str::trim)
        .filter(|k| !k.is_empty())
        .map(String::from)
        .collect()
}
