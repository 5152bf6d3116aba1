//! Exploratory statistics over a corpus.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError};
use crate::textprep::{tokenize, Preprocessor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub n_documents: usize,
    /// summary length in tokens -> number of documents
    pub summary_length_histogram: BTreeMap<usize, usize>,
    /// descriptor terms per header -> number of documents
    pub terms_per_header_histogram: BTreeMap<usize, usize>,
    /// Per document, in corpus order: share of its descriptor terms whose
    /// stemmed content words all occur among the stemmed summary words.
    pub term_presence_fraction: Vec<f64>,
    /// descriptor term -> number of documents carrying it
    pub category_occurrence_counts: BTreeMap<String, usize>,
    pub total_distinct_terms: usize,
}

impl StatsReport {
    pub fn mean_terms_per_header(&self) -> f64 {
        let total: usize = self
            .terms_per_header_histogram
            .iter()
            .map(|(k, v)| k * v)
            .sum();
        total as f64 / self.n_documents as f64
    }

    pub fn mean_presence(&self) -> f64 {
        self.term_presence_fraction.iter().sum::<f64>() / self.n_documents as f64
    }

    /// Writes one CSV per distribution into `dir`.
    pub fn write_csv(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        let hist = |name: &str, key: &str, h: &BTreeMap<usize, usize>| -> std::io::Result<()> {
            let mut s = format!("{key},documents\n");
            for (k, v) in h {
                let _ = writeln!(s, "{k},{v}");
            }
            std::fs::write(dir.join(name), s)
        };
        hist("summary_length.csv", "tokens", &self.summary_length_histogram)?;
        hist("terms_per_header.csv", "terms", &self.terms_per_header_histogram)?;

        let mut bins = [0usize; 11];
        for f in &self.term_presence_fraction {
            bins[(f * 10.0).floor().clamp(0.0, 10.0) as usize] += 1;
        }
        let mut s = String::from("presence_bin,documents\n");
        for (i, n) in bins.iter().enumerate() {
            let _ = writeln!(s, "{:.1},{n}", i as f64 / 10.0);
        }
        std::fs::write(dir.join("term_presence.csv"), s)?;

        let mut s = String::from("term,documents\n");
        for (term, n) in &self.category_occurrence_counts {
            let _ = writeln!(s, "\"{}\",{n}", term.replace('"', "\"\""));
        }
        std::fs::write(dir.join("category_occurrence.csv"), s)
    }
}

/// Profiles a corpus. Presence is computed on stemmed content words of both
/// the term and the summary. A term with no content words counts as absent.
pub fn corpus_stats(corpus: &Corpus, prep: &Preprocessor) -> Result<StatsReport, CorpusError> {
    if corpus.is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut summary_length_histogram = BTreeMap::new();
    let mut terms_per_header_histogram = BTreeMap::new();
    let mut category_occurrence_counts: BTreeMap<String, usize> = BTreeMap::new();
    let mut term_presence_fraction = Vec::with_capacity(corpus.len());

    for doc in corpus.documents() {
        *summary_length_histogram
            .entry(tokenize(&doc.summary).len())
            .or_insert(0) += 1;
        *terms_per_header_histogram
            .entry(doc.header_terms.len())
            .or_insert(0) += 1;

        let summary_stems: BTreeSet<String> = prep.content_stems(&doc.summary).into_iter().collect();
        let mut present = 0usize;
        let mut counted = BTreeSet::new();
        for term in &doc.header_terms {
            if counted.insert(term.as_str()) {
                *category_occurrence_counts.entry(term.clone()).or_insert(0) += 1;
            }
            if let Ok(stems) = prep.preprocess_term(term) {
                if stems.iter().all(|s| summary_stems.contains(s)) {
                    present += 1;
                }
            }
        }
        let n_terms = doc.header_terms.len();
        term_presence_fraction.push(if n_terms == 0 {
            0.0
        } else {
            present as f64 / n_terms as f64
        });
    }

    Ok(StatsReport {
        n_documents: corpus.len(),
        summary_length_histogram,
        terms_per_header_histogram,
        term_presence_fraction,
        total_distinct_terms: category_occurrence_counts.len(),
        category_occurrence_counts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct PairCount {
    first_before: usize,
    together: usize,
}

/// Pairwise order statistics over headers. Pairs that never share a header
/// have no entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OrderMatrix {
    counts: BTreeMap<(String, String), PairCount>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderEntry {
    pub first: String,
    pub second: String,
    /// fraction of shared headers in which `first` precedes `second`
    pub fraction: f64,
    pub shared_headers: usize,
}

impl OrderMatrix {
    /// Fraction of co-occurring headers where `t1` precedes `t2`; `None` if
    /// they never co-occur.
    pub fn get(&self, t1: &str, t2: &str) -> Option<f64> {
        self.counts
            .get(&(t1.to_string(), t2.to_string()))
            .map(|c| c.first_before as f64 / c.together as f64)
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn entries(&self) -> Vec<OrderEntry> {
        self.counts
            .iter()
            .map(|((a, b), c)| OrderEntry {
                first: a.clone(),
                second: b.clone(),
                fraction: c.first_before as f64 / c.together as f64,
                shared_headers: c.together,
            })
            .collect()
    }
}

pub fn order_correlation(corpus: &Corpus) -> OrderMatrix {
    let mut counts: HashMap<(String, String), PairCount> = HashMap::new();
    for doc in corpus.documents() {
        let terms = &doc.header_terms;
        for i in 0..terms.len() {
            for j in (i + 1)..terms.len() {
                if terms[i] == terms[j] {
                    continue;
                }
                let fwd = counts
                    .entry((terms[i].clone(), terms[j].clone()))
                    .or_default();
                fwd.first_before += 1;
                fwd.together += 1;
                counts
                    .entry((terms[j].clone(), terms[i].clone()))
                    .or_default()
                    .together += 1;
            }
        }
    }
    OrderMatrix {
        counts: counts.into_iter().collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Document, Provenance};

    fn doc(id: &str, summary: &str, terms: &[&str]) -> Document {
        Document {
            id: id.into(),
            summary: summary.into(),
            header_terms: terms.iter().map(|t| t.to_string()).collect(),
        }
    }

    fn corpus(docs: Vec<Document>) -> Corpus {
        Corpus::new(docs, Provenance::Ingested).unwrap()
    }

    #[test]
    fn empty_corpus_is_an_error() {
        let c = corpus(vec![]);
        assert!(matches!(
            corpus_stats(&c, &Preprocessor::portuguese()),
            Err(CorpusError::Empty)
        ));
    }

    #[test]
    fn all_terms_present() {
        let c = corpus(vec![doc(
            "1",
            "A penhora do imóvel rural foi anulada por ineficácia.",
            &["penhora", "imóvel rural", "ineficácia"],
        )]);
        let s = corpus_stats(&c, &Preprocessor::portuguese()).unwrap();
        assert_eq!(s.term_presence_fraction, vec![1.0]);
        assert_eq!(s.total_distinct_terms, 3);
        assert_eq!(s.terms_per_header_histogram.get(&3), Some(&1));
        assert_eq!(s.summary_length_histogram.get(&9), Some(&1));
    }

    #[test]
    fn presence_matches_inflected_forms() {
        // plural summary word still matches the singular term after stemming
        let c = corpus(vec![doc("1", "Os embargos de terceiro", &["embargo", "hipoteca"])]);
        let s = corpus_stats(&c, &Preprocessor::portuguese()).unwrap();
        assert_eq!(s.term_presence_fraction, vec![0.5]);
    }

    #[test]
    fn order_examples() {
        let c = corpus(vec![
            doc("1", "s", &["a", "b"]),
            doc("2", "s", &["a", "x", "b"]),
            doc("3", "s", &["a", "b"]),
            doc("4", "s", &["c", "a", "b"]),
            doc("5", "s", &["q"]),
        ]);
        let m = order_correlation(&c);
        assert_eq!(m.get("a", "b"), Some(1.0));
        assert_eq!(m.get("b", "a"), Some(0.0));
        assert_eq!(m.get("a", "q"), None);
        assert_eq!(m.get("q", "a"), None);

        let mixed = corpus(vec![
            doc("1", "s", &["t1", "t2"]),
            doc("2", "s", &["t2", "t1"]),
            doc("3", "s", &["t1", "z", "t2"]),
        ]);
        let m = order_correlation(&mixed);
        assert!((m.get("t1", "t2").unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.get("t2", "t1").unwrap() - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn csv_files_written() {
        let c = corpus(vec![doc("1", "penhora", &["penhora"]), doc("2", "x", &["a \"b\""])]);
        let s = corpus_stats(&c, &Preprocessor::portuguese()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        s.write_csv(dir.path()).unwrap();
        let occ = std::fs::read_to_string(dir.path().join("category_occurrence.csv")).unwrap();
        assert!(occ.contains("\"a \"\"b\"\"\",1"));
        let pres = std::fs::read_to_string(dir.path().join("term_presence.csv")).unwrap();
        assert!(pres.contains("1.0,1") && pres.contains("0.0,1"));
    }
}
