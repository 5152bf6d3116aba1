//! Turns free-form descriptor terms into a bounded label space.
//!
//! The pipeline runs in fixed order: [`decompose_terms`] splits every
//! descriptor term into concept stems, [`filter_rare`] drops infrequent
//! stems, [`build_hierarchy`] links stems by document-set containment,
//! [`group_others`] moves infrequent roots under a catch-all node,
//! [`cluster_supercats`] clusters the remaining roots into super-categories,
//! and [`emit_dataset`] maps each document onto those labels.

mod dataset;

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Corpus;
use crate::numkit::{kmeans_best_of, reduce_rows, DenseMatrix, NumError, DEFAULT_MAX_ITERS};
use crate::textprep::Preprocessor;

pub use dataset::{emit_dataset, LabeledDataset, LabeledEntry};

pub const OTHERS: &str = "Others";

#[derive(Debug, thiserror::Error)]
pub enum TaxonomyError {
    #[error("no top terms to cluster")]
    NoTopTerms,
    #[error("{have} top terms, need at least k_super = {need}")]
    TooFewTopTerms { have: usize, need: usize },
    #[error("invalid taxonomy config: {0}")]
    InvalidConfig(String),
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error(transparent)]
    Num(#[from] NumError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Dataset variant: 1 keeps the Others label, 2 drops it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Variant {
    KeepOthers,
    DropOthers,
}

impl Variant {
    pub fn number(self) -> u8 {
        match self {
            Variant::KeepOthers => 1,
            Variant::DropOthers => 2,
        }
    }

    /// Occurrence quantile used to split Others from the clustered terms.
    pub fn default_grouping_rate(self) -> f64 {
        match self {
            Variant::KeepOthers => 0.5,
            Variant::DropOthers => 0.7,
        }
    }
}

impl TryFrom<u8> for Variant {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            1 => Ok(Variant::KeepOthers),
            2 => Ok(Variant::DropOthers),
            other => Err(format!("dataset variant must be 1 or 2, got {other}")),
        }
    }
}

impl From<Variant> for u8 {
    fn from(v: Variant) -> u8 {
        v.number()
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.number())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyConfig {
    pub min_occurrence: usize,
    pub paternity_threshold: f64,
    pub grouping_rate: f64,
    pub k_super: usize,
    pub svd_dim: usize,
    /// K-means restarts; the lowest-inertia run is kept
    pub n_init: usize,
    pub seed: u64,
    pub variant: Variant,
}

impl TaxonomyConfig {
    pub fn for_variant(variant: Variant) -> Self {
        Self {
            min_occurrence: 5,
            paternity_threshold: 0.8,
            grouping_rate: variant.default_grouping_rate(),
            k_super: 25,
            svd_dim: 50,
            n_init: 10,
            seed: 0,
            variant,
        }
    }

    pub fn validate(&self) -> Result<(), TaxonomyError> {
        let bad = |m: &str| Err(TaxonomyError::InvalidConfig(m.to_string()));
        if !(self.paternity_threshold > 0.0 && self.paternity_threshold <= 1.0) {
            return bad("paternity_threshold must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.grouping_rate) {
            return bad("grouping_rate must be in [0, 1)");
        }
        if self.k_super == 0 {
            return bad("k_super must be positive");
        }
        if self.svd_dim == 0 {
            return bad("svd_dim must be positive");
        }
        Ok(())
    }
}

impl Default for TaxonomyConfig {
    fn default() -> Self {
        Self::for_variant(Variant::KeepOthers)
    }
}

/// A concept stem and the documents whose header mentions it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConceptTerm {
    pub stem: String,
    pub occurrence_count: usize,
    pub document_ids: BTreeSet<String>,
}

/// Splits every descriptor term into concept stems and records, per stem,
/// the documents mentioning it. Terms with no content words are skipped.
/// The result is ordered by stem.
pub fn decompose_terms(corpus: &Corpus, prep: &Preprocessor) -> Vec<ConceptTerm> {
    let mut docs: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for doc in corpus.documents() {
        for term in &doc.header_terms {
            match prep.preprocess_term(term) {
                Ok(stems) => {
                    for stem in stems {
                        docs.entry(stem).or_default().insert(doc.id.clone());
                    }
                }
                Err(e) => log::warn!("document {}: {e}", doc.id),
            }
        }
    }
    docs.into_iter()
        .map(|(stem, document_ids)| ConceptTerm {
            stem,
            occurrence_count: document_ids.len(),
            document_ids,
        })
        .collect()
}

/// Keeps concepts occurring in at least `min_occurrence` documents.
pub fn filter_rare(terms: &[ConceptTerm], min_occurrence: usize) -> Vec<ConceptTerm> {
    terms
        .iter()
        .filter(|t| t.occurrence_count >= min_occurrence)
        .cloned()
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Concept,
    SuperCategory,
    Others,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub name: String,
    pub kind: NodeKind,
    pub occurrence_count: usize,
    pub document_ids: BTreeSet<String>,
    pub parent: Option<String>,
    /// root concept kept for clustering
    #[serde(default)]
    pub top: bool,
}

/// A forest of concepts under super-categories and the Others node.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CategoryHierarchy {
    nodes: BTreeMap<String, HierarchyNode>,
    label_space: Vec<String>,
    config: Option<TaxonomyConfig>,
}

#[derive(Serialize, Deserialize)]
struct HierarchyFile {
    config: Option<TaxonomyConfig>,
    label_space: Vec<String>,
    nodes: Vec<HierarchyNode>,
    edges: Vec<(String, String)>,
}

impl CategoryHierarchy {
    pub fn node(&self, name: &str) -> Option<&HierarchyNode> {
        self.nodes.get(name)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &HierarchyNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn label_space(&self) -> &[String] {
        &self.label_space
    }

    pub fn config(&self) -> Option<&TaxonomyConfig> {
        self.config.as_ref()
    }

    pub fn parent(&self, name: &str) -> Option<&str> {
        self.nodes.get(name)?.parent.as_deref()
    }

    /// `(parent, child)` pairs ordered by child.
    pub fn edges(&self) -> Vec<(String, String)> {
        self.nodes
            .values()
            .filter_map(|n| n.parent.as_ref().map(|p| (p.clone(), n.name.clone())))
            .collect()
    }

    pub fn children(&self, name: &str) -> Vec<&str> {
        self.nodes
            .values()
            .filter(|n| n.parent.as_deref() == Some(name))
            .map(|n| n.name.as_str())
            .collect()
    }

    pub fn roots(&self) -> Vec<&HierarchyNode> {
        self.nodes.values().filter(|n| n.parent.is_none()).collect()
    }

    /// Root ancestor of `name`, or `None` for an unknown node.
    pub fn root_of(&self, name: &str) -> Option<&str> {
        let mut current = self.nodes.get(name)?;
        let mut steps = 0;
        while let Some(p) = &current.parent {
            current = &self.nodes[p];
            steps += 1;
            assert!(steps <= self.nodes.len(), "cycle in hierarchy");
        }
        Some(&current.name)
    }

    pub fn top_terms(&self) -> Vec<&HierarchyNode> {
        self.nodes.values().filter(|n| n.top).collect()
    }

    pub fn supercategories(&self) -> Vec<&HierarchyNode> {
        let mut v: Vec<&HierarchyNode> = self
            .nodes
            .values()
            .filter(|n| n.kind == NodeKind::SuperCategory)
            .collect();
        v.sort_by(|a, b| a.name.cmp(&b.name));
        v
    }

    pub fn has_others(&self) -> bool {
        self.nodes.contains_key(OTHERS)
    }

    /// Super-category or Others label reached from a concept stem.
    pub fn label_of(&self, stem: &str) -> Option<&str> {
        let root = self.root_of(stem)?;
        match self.nodes[root].kind {
            NodeKind::Concept => None,
            _ => Some(root),
        }
    }

    /// True when following parents from every node terminates and each
    /// parent exists.
    pub fn is_forest(&self) -> bool {
        self.nodes.values().all(|n| {
            let mut seen = BTreeSet::new();
            let mut cur = n;
            loop {
                if !seen.insert(cur.name.as_str()) {
                    return false;
                }
                match &cur.parent {
                    None => return true,
                    Some(p) => match self.nodes.get(p) {
                        Some(next) => cur = next,
                        None => return false,
                    },
                }
            }
        })
    }

    pub fn to_json(&self) -> Result<String, TaxonomyError> {
        let file = HierarchyFile {
            config: self.config.clone(),
            label_space: self.label_space.clone(),
            nodes: self.nodes.values().cloned().collect(),
            edges: self.edges(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self, TaxonomyError> {
        let file: HierarchyFile = serde_json::from_str(text)?;
        let h = Self {
            nodes: file.nodes.into_iter().map(|n| (n.name.clone(), n)).collect(),
            label_space: file.label_space,
            config: file.config,
        };
        if !h.is_forest() {
            return Err(TaxonomyError::Malformed("hierarchy has a cycle or dangling parent".into()));
        }
        Ok(h)
    }

    pub fn save(&self, path: &Path) -> Result<(), TaxonomyError> {
        Ok(std::fs::write(path, self.to_json()? + "\n")?)
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Number of shared elements of two ascending lists.
fn intersection_size(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

/// Links each concept `c` to the concept `p` that best contains it:
/// `|docs(c) ∩ docs(p)| / |docs(c)| ≥ threshold` and `count(p) > count(c)`.
/// Among candidates the highest containment wins, then the higher count,
/// then the lexicographically smaller stem.
pub fn build_hierarchy(terms: &[ConceptTerm], paternity_threshold: f64) -> CategoryHierarchy {
    let all_ids: BTreeSet<&String> = terms.iter().flat_map(|t| t.document_ids.iter()).collect();
    let index: BTreeMap<&String, u32> = all_ids.into_iter().enumerate().map(|(i, id)| (id, i as u32)).collect();
    let sets: Vec<Vec<u32>> = terms
        .iter()
        .map(|t| t.document_ids.iter().map(|id| index[id]).collect())
        .collect();

    let mut nodes = BTreeMap::new();
    for (ci, c) in terms.iter().enumerate() {
        let n_c = sets[ci].len();
        let mut best: Option<(usize, usize)> = None; // (intersection, parent index)
        for (pi, p) in terms.iter().enumerate() {
            if pi == ci || sets[pi].len() <= n_c {
                continue;
            }
            let inter = intersection_size(&sets[ci], &sets[pi]);
            if inter == 0 || (inter as f64 / n_c as f64) < paternity_threshold {
                continue;
            }
            let better = match best {
                None => true,
                Some((bi, bp)) => {
                    let q = &terms[bp];
                    inter > bi
                        || (inter == bi
                            && (sets[pi].len() > sets[bp].len()
                                || (sets[pi].len() == sets[bp].len() && p.stem < q.stem)))
                }
            };
            if better {
                best = Some((inter, pi));
            }
        }
        nodes.insert(
            c.stem.clone(),
            HierarchyNode {
                name: c.stem.clone(),
                kind: NodeKind::Concept,
                occurrence_count: c.occurrence_count,
                document_ids: c.document_ids.clone(),
                parent: best.map(|(_, p)| terms[p].stem.clone()),
                top: false,
            },
        );
    }
    CategoryHierarchy {
        nodes,
        label_space: Vec::new(),
        config: None,
    }
}

/// Sample quantile with linear interpolation between order statistics
/// (the usual "type 7" definition). `sorted` must be ascending and non-empty.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Moves root concepts whose count lies strictly below the `grouping_rate`
/// quantile of root counts under an Others node; the remaining roots are
/// marked top.
pub fn group_others(mut hierarchy: CategoryHierarchy, grouping_rate: f64) -> Result<CategoryHierarchy, TaxonomyError> {
    let mut counts: Vec<f64> = hierarchy
        .nodes
        .values()
        .filter(|n| n.parent.is_none() && n.kind == NodeKind::Concept)
        .map(|n| n.occurrence_count as f64)
        .collect();
    if counts.is_empty() {
        return Err(TaxonomyError::NoTopTerms);
    }
    counts.sort_by(f64::total_cmp);
    let cutoff = quantile(&counts, grouping_rate);

    let mut others_docs = BTreeSet::new();
    let mut grouped = 0;
    let mut top = 0;
    for node in hierarchy.nodes.values_mut() {
        if node.parent.is_some() || node.kind != NodeKind::Concept {
            continue;
        }
        if (node.occurrence_count as f64) < cutoff {
            node.parent = Some(OTHERS.to_string());
            node.top = false;
            others_docs.extend(node.document_ids.iter().cloned());
            grouped += 1;
        } else {
            node.top = true;
            top += 1;
        }
    }
    if top == 0 {
        return Err(TaxonomyError::NoTopTerms);
    }
    if grouped > 0 {
        hierarchy.nodes.insert(
            OTHERS.to_string(),
            HierarchyNode {
                name: OTHERS.to_string(),
                kind: NodeKind::Others,
                occurrence_count: others_docs.len(),
                document_ids: others_docs,
                parent: None,
                top: false,
            },
        );
    }
    log::info!("grouping cutoff {cutoff}: {top} top terms, {grouped} under {OTHERS}");
    Ok(hierarchy)
}

/// Row-normalized reduced incidence rows of the top terms, in name order.
pub fn top_term_points(
    hierarchy: &CategoryHierarchy,
    corpus: &Corpus,
    svd_dim: usize,
    seed: u64,
) -> Result<(Vec<String>, DenseMatrix), TaxonomyError> {
    let top: Vec<&HierarchyNode> = hierarchy.top_terms();
    if top.is_empty() {
        return Err(TaxonomyError::NoTopTerms);
    }
    let docs = corpus.documents();
    let mut incidence = DenseMatrix::zeros(top.len(), docs.len());
    for (r, node) in top.iter().enumerate() {
        for (c, doc) in docs.iter().enumerate() {
            if node.document_ids.contains(&doc.id) {
                incidence.set(r, c, 1.0);
            }
        }
    }
    let dim = svd_dim.min(top.len()).min(docs.len().max(1));
    let reduced = reduce_rows(&incidence, dim, seed)?;
    Ok((top.iter().map(|n| n.name.clone()).collect(), reduced.normalize_rows()))
}

/// Clusters the top terms into `k_super` super-categories using their
/// document incidence and sets the label space.
pub fn cluster_supercats(
    mut hierarchy: CategoryHierarchy,
    corpus: &Corpus,
    cfg: &TaxonomyConfig,
) -> Result<CategoryHierarchy, TaxonomyError> {
    cfg.validate()?;
    let have = hierarchy.top_terms().len();
    if have == 0 {
        return Err(TaxonomyError::NoTopTerms);
    }
    if have < cfg.k_super {
        return Err(TaxonomyError::TooFewTopTerms { have, need: cfg.k_super });
    }
    let (names, points) = top_term_points(&hierarchy, corpus, cfg.svd_dim, cfg.seed)?;
    let clustering = kmeans_best_of(&points, cfg.k_super, cfg.seed, DEFAULT_MAX_ITERS, cfg.n_init)?;

    // clusters ordered by their first member in name order
    let mut members = clustering.members();
    members.retain(|m| !m.is_empty());
    members.sort_by_key(|m| m[0]);

    let mut label_space = Vec::with_capacity(members.len() + 1);
    for (i, group) in members.iter().enumerate() {
        let lead = group
            .iter()
            .map(|&m| &hierarchy.nodes[&names[m]])
            .max_by(|a, b| a.occurrence_count.cmp(&b.occurrence_count).then(b.name.cmp(&a.name)))
            .expect("non-empty cluster");
        let name = format!("sc{:02}_{}", i + 1, lead.name);
        let mut docs = BTreeSet::new();
        for &m in group {
            let node = hierarchy.nodes.get_mut(&names[m]).expect("top term");
            node.parent = Some(name.clone());
            docs.extend(node.document_ids.iter().cloned());
        }
        hierarchy.nodes.insert(
            name.clone(),
            HierarchyNode {
                name: name.clone(),
                kind: NodeKind::SuperCategory,
                occurrence_count: docs.len(),
                document_ids: docs,
                parent: None,
                top: false,
            },
        );
        label_space.push(name);
    }
    if cfg.variant == Variant::KeepOthers && hierarchy.has_others() {
        label_space.push(OTHERS.to_string());
    }
    hierarchy.label_space = label_space;
    hierarchy.config = Some(cfg.clone());
    Ok(hierarchy)
}

/// Runs the whole refinement and returns the hierarchy and its dataset.
pub fn adjust(
    corpus: &Corpus,
    prep: &Preprocessor,
    cfg: &TaxonomyConfig,
) -> Result<(CategoryHierarchy, LabeledDataset), TaxonomyError> {
    cfg.validate()?;
    let terms = filter_rare(&decompose_terms(corpus, prep), cfg.min_occurrence);
    let hierarchy = build_hierarchy(&terms, cfg.paternity_threshold);
    let hierarchy = group_others(hierarchy, cfg.grouping_rate)?;
    let hierarchy = cluster_supercats(hierarchy, corpus, cfg)?;
    let dataset = emit_dataset(corpus, &hierarchy, cfg.variant, prep)?;
    Ok((hierarchy, dataset))
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let n = a.len();
    let choose2 = |x: usize| (x * x.saturating_sub(1)) as f64 / 2.0;
    let mut table: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    let mut rows: BTreeMap<usize, usize> = BTreeMap::new();
    let mut cols: BTreeMap<usize, usize> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_insert(0) += 1;
        *rows.entry(x).or_insert(0) += 1;
        *cols.entry(y).or_insert(0) += 1;
    }
    let index: f64 = table.values().map(|&v| choose2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| choose2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| choose2(v)).sum();
    let total = choose2(n);
    if total == 0.0 {
        return 1.0;
    }
    let expected = sum_a * sum_b / total;
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
