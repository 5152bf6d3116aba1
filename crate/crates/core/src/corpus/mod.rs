//! Corpus ingestion, profiling and synthetic generation.
//!
//! A corpus file is JSON Lines, one object per document with the fields
//! `id`, `summary` and `header_terms`.

mod clean;
mod stats;
mod synth;

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use clean::{clean_summary, SEGMENT_SEPARATOR};
pub use stats::{corpus_stats, order_correlation, OrderMatrix, OrderEntry, StatsReport};
pub use synth::{gen_synthetic, PlantedTruth, SynthConfig, SyntheticCorpus};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("line {line}: duplicate document id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("corpus is empty")]
    Empty,
    #[error("invalid synthetic corpus config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// One case-law entry: its summary and the ordered descriptor terms of its header.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub summary: String,
    pub header_terms: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Ingested,
    Synthetic { seed: u64 },
}

/// An immutable set of documents with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    documents: Vec<Document>,
    provenance: Provenance,
}

impl Corpus {
    /// Builds a corpus, rejecting duplicate ids.
    pub fn new(documents: Vec<Document>, provenance: Provenance) -> Result<Self, CorpusError> {
        let mut seen = HashSet::new();
        for (i, doc) in documents.iter().enumerate() {
            if !seen.insert(doc.id.as_str()) {
                return Err(CorpusError::DuplicateId {
                    line: i + 1,
                    id: doc.id.clone(),
                });
            }
        }
        Ok(Self {
            documents,
            provenance,
        })
    }

    pub fn documents(&self) -> &[Document] {
        &self.documents
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Document> {
        self.documents.iter().find(|d| d.id == id)
    }

    /// Serializes to JSON Lines in document order.
    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for doc in &self.documents {
            serde_json::to_writer(&mut out, doc)?;
            out.write_all(b"\n")?;
        }
        out.flush()
    }

    pub fn save(&self, path: &Path) -> Result<(), CorpusError> {
        self.write_jsonl(BufWriter::new(File::create(path)?))?;
        Ok(())
    }
}

/// Phrase substitutions applied to summaries and descriptor terms after
/// cleaning, used to unify spellings of legal entities. Empty by default.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Substitutions {
    pairs: Vec<(String, String)>,
}

impl Substitutions {
    pub fn new(pairs: Vec<(String, String)>) -> Self {
        Self { pairs }
    }

    /// Tab-separated `from<TAB>to` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, CorpusError> {
        let mut pairs = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let (from, to) = line.split_once('\t').ok_or_else(|| CorpusError::Malformed {
                line: i + 1,
                reason: "substitution needs two tab-separated columns".into(),
            })?;
            if from.trim().is_empty() {
                return Err(CorpusError::Malformed {
                    line: i + 1,
                    reason: "empty substitution source".into(),
                });
            }
            pairs.push((from.trim().to_string(), to.trim().to_string()));
        }
        Ok(Self { pairs })
    }

    pub fn load(path: &Path) -> Result<Self, CorpusError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Replaces whole-word occurrences of each source phrase, in file order.
    pub fn apply(&self, text: &str) -> String {
        let mut current = text.to_string();
        for (from, to) in &self.pairs {
            current = replace_whole_words(&current, from, to);
        }
        current
    }
}

fn replace_whole_words(text: &str, from: &str, to: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut idx = 0;
    while let Some(rel) = text[idx..].find(from) {
        let start = idx + rel;
        let end = start + from.len();
        let before_ok = text[..start]
            .chars()
            .next_back()
            .is_none_or(|c| !c.is_alphanumeric());
        let after_ok = text[end..].chars().next().is_none_or(|c| !c.is_alphanumeric());
        out.push_str(&text[idx..start]);
        if before_ok && after_ok {
            out.push_str(to);
        } else {
            out.push_str(from);
        }
        idx = end;
    }
    out.push_str(&text[idx..]);
    out
}

#[derive(Deserialize)]
struct RawRecord {
    id: String,
    summary: String,
    header_terms: Vec<String>,
}

/// Cleans one raw record. Header terms are cleaned, emptied terms dropped and
/// duplicates removed keeping the first occurrence.
fn clean_record(raw: RawRecord, subs: &Substitutions, line: usize) -> Result<Document, CorpusError> {
    let id = raw.id.trim().to_string();
    if id.is_empty() {
        return Err(CorpusError::Malformed {
            line,
            reason: "empty id".into(),
        });
    }
    let summary = subs.apply(&clean_summary(&raw.summary));
    if summary.is_empty() {
        return Err(CorpusError::Malformed {
            line,
            reason: "summary is empty after cleaning".into(),
        });
    }
    let mut seen = HashSet::new();
    let mut header_terms = Vec::new();
    for term in raw.header_terms {
        let cleaned = subs.apply(&clean_summary(&term));
        let cleaned = cleaned.trim_matches(|c: char| c == SEGMENT_SEPARATOR || c.is_whitespace());
        if !cleaned.is_empty() && seen.insert(cleaned.to_string()) {
            header_terms.push(cleaned.to_string());
        }
    }
    if header_terms.is_empty() {
        return Err(CorpusError::Malformed {
            line,
            reason: "header_terms is empty after cleaning".into(),
        });
    }
    Ok(Document {
        id,
        summary,
        header_terms,
    })
}

/// Reads and cleans a JSON Lines corpus. Blank lines are skipped.
pub fn read_corpus<R: BufRead>(reader: R, subs: &Substitutions) -> Result<Corpus, CorpusError> {
    let mut documents = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(&line).map_err(|e| CorpusError::Malformed {
            line: line_no,
            reason: e.to_string(),
        })?;
        let doc = clean_record(raw, subs, line_no)?;
        if !seen.insert(doc.id.clone()) {
            return Err(CorpusError::DuplicateId {
                line: line_no,
                id: doc.id,
            });
        }
        documents.push(doc);
    }
    Ok(Corpus {
        documents,
        provenance: Provenance::Ingested,
    })
}

pub fn load_corpus(path: &Path) -> Result<Corpus, CorpusError> {
    load_corpus_with(path, &Substitutions::default())
}

pub fn load_corpus_with(path: &Path, subs: &Substitutions) -> Result<Corpus, CorpusError> {
    read_corpus(BufReader::new(File::open(path)?), subs)
}
