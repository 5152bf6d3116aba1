//! Labeled datasets emitted from a finished hierarchy.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CategoryHierarchy, NodeKind, TaxonomyError, Variant, OTHERS};
use crate::corpus::Corpus;
use crate::metrics::LabelMatrix;
use crate::textprep::Preprocessor;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEntry {
    pub id: String,
    pub text: String,
    /// ascending label ids into the label space
    pub labels: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledDataset {
    pub entries: Vec<LabeledEntry>,
    pub label_space: Vec<String>,
    pub variant: Variant,
}

#[derive(Serialize, Deserialize)]
struct LabelMap {
    variant: Variant,
    labels: Vec<String>,
}

impl LabeledDataset {
    pub fn new(entries: Vec<LabeledEntry>, label_space: Vec<String>, variant: Variant) -> Result<Self, TaxonomyError> {
        let unique: BTreeSet<&String> = label_space.iter().collect();
        if unique.len() != label_space.len() {
            return Err(TaxonomyError::Malformed("duplicate label names".into()));
        }
        for e in &entries {
            if e.labels.is_empty() {
                return Err(TaxonomyError::Malformed(format!("entry {} has no labels", e.id)));
            }
            if e.labels.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TaxonomyError::Malformed(format!("entry {} labels not strictly ascending", e.id)));
            }
            if let Some(&l) = e.labels.iter().find(|&&l| l >= label_space.len()) {
                return Err(TaxonomyError::Malformed(format!("entry {} has label {l} out of range", e.id)));
            }
        }
        Ok(Self {
            entries,
            label_space,
            variant,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        self.label_space.len()
    }

    /// Same label space and variant, entries picked by index.
    pub fn subset(&self, indices: &[usize]) -> LabeledDataset {
        LabeledDataset {
            entries: indices.iter().map(|&i| self.entries[i].clone()).collect(),
            label_space: self.label_space.clone(),
            variant: self.variant,
        }
    }

    pub fn label_matrix(&self) -> LabelMatrix {
        LabelMatrix::from_label_sets(self.n_labels(), &self.entries.iter().map(|e| e.labels.clone()).collect::<Vec<_>>())
            .expect("labels validated on construction")
    }

    /// Sidecar label-map path next to a dataset file.
    pub fn label_map_path(dataset_path: &Path) -> PathBuf {
        let mut name = dataset_path.file_stem().unwrap_or_default().to_os_string();
        name.push(".labels.json");
        dataset_path.with_file_name(name)
    }

    /// Writes the JSON Lines entries to `path` and the label map beside it.
    pub fn save(&self, path: &Path) -> Result<(), TaxonomyError> {
        let mut out = BufWriter::new(File::create(path)?);
        for e in &self.entries {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        out.flush()?;
        let map = LabelMap {
            variant: self.variant,
            labels: self.label_space.clone(),
        };
        std::fs::write(Self::label_map_path(path), serde_json::to_string_pretty(&map)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, TaxonomyError> {
        let map: LabelMap = serde_json::from_str(&std::fs::read_to_string(Self::label_map_path(path))?)?;
        let mut entries = Vec::new();
        for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let e: LabeledEntry = serde_json::from_str(&line)
                .map_err(|err| TaxonomyError::Malformed(format!("line {}: {err}", i + 1)))?;
            entries.push(e);
        }
        Self::new(entries, map.labels, map.variant)
    }
}

/// Maps every document onto the label space through its concept stems.
/// Variant 1 labels include Others when the hierarchy has that node;
/// variant 2 omits it and drops documents left without labels.
pub fn emit_dataset(
    corpus: &Corpus,
    hierarchy: &CategoryHierarchy,
    variant: Variant,
    prep: &Preprocessor,
) -> Result<LabeledDataset, TaxonomyError> {
    let mut label_space: Vec<String> = hierarchy.supercategories().iter().map(|n| n.name.clone()).collect();
    if variant == Variant::KeepOthers && hierarchy.has_others() {
        label_space.push(OTHERS.to_string());
    }
    let mut entries = Vec::new();
    let mut dropped = 0usize;
    for doc in corpus.documents() {
        let mut labels = BTreeSet::new();
        for term in &doc.header_terms {
            let Ok(stems) = prep.preprocess_term(term) else {
                continue;
            };
            for stem in stems {
                if let Some(label) = hierarchy.label_of(&stem) {
                    let is_others = hierarchy.node(label).map(|n| n.kind) == Some(NodeKind::Others);
                    if is_others && variant == Variant::DropOthers {
                        continue;
                    }
                    if let Some(i) = label_space.iter().position(|l| l == label) {
                        labels.insert(i);
                    }
                }
            }
        }
        if labels.is_empty() {
            dropped += 1;
            if variant == Variant::KeepOthers {
                log::warn!("document {} has no mappable descriptor term; excluded", doc.id);
            }
            continue;
        }
        entries.push(LabeledEntry {
            id: doc.id.clone(),
            text: doc.summary.clone(),
            labels: labels.into_iter().collect(),
        });
    }
    log::info!(
        "variant {variant}: {} documents labeled over {} labels, {dropped} excluded",
        entries.len(),
        label_space.len()
    );
    LabeledDataset::new(entries, label_space, variant)
}
