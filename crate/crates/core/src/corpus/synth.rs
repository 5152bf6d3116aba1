//! Seeded synthetic corpora with planted topic structure.
//!
//! Each topic owns a handful of frequent "head" concepts, compound descriptor
//! terms that attach a sub-concept to a head (`"<head> da <modifier>"`), and a
//! tail of rare stand-alone terms. Noise replaces header slots with generic
//! terms shared by every topic or with redundant spelling variants of terms
//! already in the header.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, weighted::WeightedIndex};
use serde::{Deserialize, Serialize};

use super::{Corpus, CorpusError, Document, Provenance};
use crate::textprep::Preprocessor;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_docs: usize,
    pub n_topics: usize,
    pub terms_per_topic: usize,
    pub mean_terms_per_header: f64,
    /// summary vocabulary size (topic words plus shared background words)
    pub vocab_size: usize,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_docs: 2000,
            n_topics: 25,
            terms_per_topic: 24,
            mean_terms_per_header: 5.0,
            vocab_size: 3000,
            noise_rate: 0.1,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let bad = |m: &str| Err(CorpusError::InvalidConfig(m.to_string()));
        if self.n_docs == 0 || self.n_topics == 0 || self.terms_per_topic == 0 || self.vocab_size == 0 {
            return bad("all counts must be positive");
        }
        if !(self.noise_rate >= 0.0 && self.noise_rate <= 1.0) {
            return bad("noise_rate must lie in [0, 1]");
        }
        if !(self.mean_terms_per_header >= 1.0 && self.mean_terms_per_header.is_finite()) {
            return bad("mean_terms_per_header must be at least 1");
        }
        Ok(())
    }
}

/// Hidden ground truth recorded while generating.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedTruth {
    /// descriptor term -> planted topic (`None` for generic noise terms)
    pub term_topics: BTreeMap<String, Option<usize>>,
    /// concept stem -> planted topic
    pub concept_topics: BTreeMap<String, usize>,
    /// per document, in corpus order
    pub doc_topics: Vec<Vec<usize>>,
}

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub corpus: Corpus,
    pub truth: PlantedTruth,
}

const PREPOSITIONS: &[&str] = &["de", "da", "do", "em", "por"];
const FILLER: &[&str] = &[
    "de", "da", "do", "a", "o", "que", "e", "em", "para", "por", "com", "não", "na", "no", "os", "as",
    "ao", "se", "dos", "das",
];
const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "br", "cr", "pr", "tr", "gr", "pl", "ch",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const CODAS: &[&str] = &["", "", "", "r", "l", "n", "s"];
const ENDINGS: &[&str] = &["o", "a", "e", "ia", "ico", "ura", "ento", "ção", "agem", "al", "or", "ez"];

#[derive(Debug, Clone)]
struct PlantedTerm {
    text: String,
    weight: f64,
    /// (head, modifier) words of a compound term
    compound: Option<(String, String)>,
}

/// Generates unique pseudo-Portuguese words whose stems are also unique.
struct WordFactory<'a> {
    prep: &'a Preprocessor,
    words: HashSet<String>,
    stems: HashSet<String>,
}

impl<'a> WordFactory<'a> {
    fn new(prep: &'a Preprocessor) -> Self {
        Self {
            prep,
            words: HashSet::new(),
            stems: HashSet::new(),
        }
    }

    fn fresh(&mut self, rng: &mut ChaCha8Rng) -> (String, String) {
        loop {
            let syllables = rng.random_range(2..=3);
            let mut w = String::new();
            for _ in 0..syllables {
                w.push_str(ONSETS.choose(rng).unwrap());
                w.push_str(VOWELS.choose(rng).unwrap());
            }
            w.push_str(CODAS.choose(rng).unwrap());
            w.push_str(ENDINGS.choose(rng).unwrap());
            if self.words.contains(&w) || self.prep.stoplist.contains(&w) {
                continue;
            }
            let stems = match self.prep.preprocess_term(&w) {
                Ok(s) if s.len() == 1 => s,
                _ => continue,
            };
            let stem = stems.into_iter().next().unwrap();
            if stem.chars().count() < 3 || self.stems.contains(&stem) {
                continue;
            }
            self.words.insert(w.clone());
            self.stems.insert(stem.clone());
            return (w, stem);
        }
    }
}

struct Topic {
    terms: Vec<PlantedTerm>,
    weights: WeightedIndex<f64>,
    summary_words: Vec<String>,
    /// concept words of each term, by term index
    term_words: Vec<Vec<String>>,
}

/// Generates a deterministic synthetic corpus for `cfg`.
pub fn gen_synthetic(cfg: &SynthConfig) -> Result<SyntheticCorpus, CorpusError> {
    cfg.validate()?;
    let prep = Preprocessor::portuguese();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut factory = WordFactory::new(&prep);

    let mut term_topics = BTreeMap::new();
    let mut concept_topics = BTreeMap::new();

    let n_heads = (cfg.terms_per_topic / 8).max(1);
    let n_compound = (3 * n_heads).min(cfg.terms_per_topic - n_heads);
    let n_rare = cfg.terms_per_topic - n_heads - n_compound;
    let background_size = (cfg.vocab_size / 5).max(1);
    let topic_vocab = ((cfg.vocab_size - background_size.min(cfg.vocab_size)) / cfg.n_topics).max(5);

    let mut topics = Vec::with_capacity(cfg.n_topics);
    for t in 0..cfg.n_topics {
        let mut terms = Vec::new();
        let mut term_words = Vec::new();
        let heads: Vec<String> = (0..n_heads)
            .map(|_| {
                let (w, s) = factory.fresh(&mut rng);
                concept_topics.insert(s, t);
                w
            })
            .collect();
        for head in &heads {
            terms.push(PlantedTerm {
                text: head.clone(),
                weight: 1.0,
                compound: None,
            });
            term_words.push(vec![head.clone()]);
        }
        for i in 0..n_compound {
            let head = &heads[i % n_heads];
            let (modifier, s) = factory.fresh(&mut rng);
            concept_topics.insert(s, t);
            let prep_word = PREPOSITIONS.choose(&mut rng).unwrap().to_string();
            terms.push(PlantedTerm {
                text: format!("{head} {prep_word} {modifier}"),
                weight: 1.0,
                compound: Some((head.clone(), modifier.clone())),
            });
            term_words.push(vec![head.clone(), modifier]);
        }
        for _ in 0..n_rare {
            let (w, s) = factory.fresh(&mut rng);
            concept_topics.insert(s, t);
            terms.push(PlantedTerm {
                text: w.clone(),
                weight: 0.15,
                compound: None,
            });
            term_words.push(vec![w]);
        }
        for term in &terms {
            term_topics.insert(term.text.clone(), Some(t));
        }
        let weights = WeightedIndex::new(terms.iter().map(|t| t.weight)).expect("positive weights");
        let summary_words = (0..topic_vocab).map(|_| factory.fresh(&mut rng).0).collect();
        topics.push(Topic {
            terms,
            weights,
            summary_words,
            term_words,
        });
    }

    let background: Vec<String> = (0..background_size).map(|_| factory.fresh(&mut rng).0).collect();
    let generic_words: Vec<String> = (0..10).map(|_| factory.fresh(&mut rng).0).collect();
    let mut generic_terms = Vec::new();
    while generic_terms.len() < 12 {
        let a = generic_words.choose(&mut rng).unwrap();
        let b = generic_words.choose(&mut rng).unwrap();
        let term = if a == b { a.clone() } else { format!("{a} {b}") };
        if !generic_terms.contains(&term) {
            generic_terms.push(term);
        }
    }
    for g in &generic_terms {
        term_topics.insert(g.clone(), None);
    }

    let popularity =
        WeightedIndex::new((0..cfg.n_topics).map(|r| 1.0 / ((r + 1) as f64).sqrt())).expect("weights");
    let header_extra = Poisson::new(cfg.mean_terms_per_header - 1.0).ok();
    let max_header = cfg.n_topics.min(3) * cfg.terms_per_topic + generic_terms.len();

    let mut documents = Vec::with_capacity(cfg.n_docs);
    let mut doc_topics = Vec::with_capacity(cfg.n_docs);
    for i in 0..cfg.n_docs {
        let want_topics = match rng.random::<f64>() {
            x if x < 0.5 => 1,
            x if x < 0.85 => 2,
            _ => 3,
        }
        .min(cfg.n_topics);
        let mut chosen: Vec<usize> = Vec::new();
        while chosen.len() < want_topics {
            let t = popularity.sample(&mut rng);
            if !chosen.contains(&t) {
                chosen.push(t);
            }
        }

        let extra = header_extra.map_or(0.0, |p| p.sample(&mut rng));
        let n_terms = (1 + extra as usize).min(max_header);
        let mut header: Vec<String> = Vec::new();
        let mut used_terms: Vec<(usize, usize)> = Vec::new();
        let mut attempts = 0;
        while header.len() < n_terms && attempts < 200 {
            attempts += 1;
            let (candidate, topic) = if rng.random::<f64>() < cfg.noise_rate {
                redundant_or_generic(&mut rng, &topics, &used_terms, &generic_terms)
            } else {
                let t = *chosen.choose(&mut rng).unwrap();
                let k = topics[t].weights.sample(&mut rng);
                if !used_terms.contains(&(t, k)) {
                    used_terms.push((t, k));
                }
                (topics[t].terms[k].text.clone(), Some(t))
            };
            if !header.contains(&candidate) {
                term_topics.entry(candidate.clone()).or_insert(topic);
                header.push(candidate);
            }
        }

        let summary = build_summary(&mut rng, &topics, &chosen, &used_terms, &background);
        documents.push(Document {
            id: format!("syn{:05}", i),
            summary,
            header_terms: header,
        });
        doc_topics.push(chosen);
    }

    // keep only terms that were actually emitted
    let emitted: BTreeSet<&String> = documents.iter().flat_map(|d| d.header_terms.iter()).collect();
    term_topics.retain(|term, _| emitted.contains(term));

    let corpus = Corpus::new(documents, Provenance::Synthetic { seed: cfg.seed })?;
    Ok(SyntheticCorpus {
        corpus,
        truth: PlantedTruth {
            term_topics,
            concept_topics,
            doc_topics,
        },
    })
}

/// A spelling variant of a compound term already in the header (keeping its
/// topic), or a generic term with no topic.
fn redundant_or_generic(
    rng: &mut ChaCha8Rng,
    topics: &[Topic],
    used: &[(usize, usize)],
    generic: &[String],
) -> (String, Option<usize>) {
    let compounds: Vec<(usize, &PlantedTerm)> = used
        .iter()
        .map(|&(t, k)| (t, &topics[t].terms[k]))
        .filter(|(_, term)| term.compound.is_some())
        .collect();
    if rng.random::<bool>() {
        if let Some((t, term)) = compounds.choose(rng) {
            let (head, modifier) = term.compound.as_ref().unwrap();
            let current = term.text.split(' ').nth(1).unwrap_or("de");
            let others: Vec<&&str> = PREPOSITIONS.iter().filter(|p| **p != current).collect();
            let p = others.choose(rng).unwrap();
            return (format!("{head} {p} {modifier}"), Some(*t));
        }
    }
    (generic.choose(rng).unwrap().clone(), None)
}

fn build_summary(
    rng: &mut ChaCha8Rng,
    topics: &[Topic],
    chosen: &[usize],
    used: &[(usize, usize)],
    background: &[String],
) -> String {
    let len = rng.random_range(40..=160);
    let mut words: Vec<String> = Vec::with_capacity(len);
    for _ in 0..len {
        let r: f64 = rng.random();
        let w = if r < 0.30 {
            FILLER.choose(rng).unwrap().to_string()
        } else if r < 0.45 {
            background.choose(rng).unwrap().clone()
        } else {
            let t = *chosen.choose(rng).unwrap();
            let concepts: Vec<&String> = used
                .iter()
                .filter(|&&(tt, _)| tt == t)
                .flat_map(|&(tt, k)| topics[tt].term_words[k].iter())
                .collect();
            if !concepts.is_empty() && rng.random::<f64>() < 0.15 {
                (*concepts.choose(rng).unwrap()).clone()
            } else {
                topics[t].summary_words.choose(rng).unwrap().clone()
            }
        };
        words.push(w);
    }
    let mut out = String::new();
    for (i, w) in words.iter().enumerate() {
        if i > 0 {
            out.push_str(if i % 17 == 0 { ". " } else { " " });
        }
        if i == 0 || i % 17 == 0 {
            let mut cs = w.chars();
            if let Some(first) = cs.next() {
                out.extend(first.to_uppercase());
                out.push_str(cs.as_str());
            }
        } else {
            out.push_str(w);
        }
    }
    out.push('.');
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(seed: u64, noise: f64) -> SynthConfig {
        SynthConfig {
            n_docs: 100,
            n_topics: 5,
            terms_per_topic: 16,
            mean_terms_per_header: 5.0,
            vocab_size: 400,
            noise_rate: noise,
            seed,
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = gen_synthetic(&small(3, 0.1)).unwrap();
        let b = gen_synthetic(&small(3, 0.1)).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.corpus.write_jsonl(&mut ba).unwrap();
        b.corpus.write_jsonl(&mut bb).unwrap();
        assert_eq!(ba, bb);
        assert_eq!(a.truth, b.truth);
        let c = gen_synthetic(&small(4, 0.1)).unwrap();
        assert_ne!(a.corpus, c.corpus);
    }

    #[test]
    fn exact_document_count() {
        let s = gen_synthetic(&small(1, 0.1)).unwrap();
        assert_eq!(s.corpus.len(), 100);
        assert_eq!(s.truth.doc_topics.len(), 100);
        assert_eq!(s.corpus.provenance(), Provenance::Synthetic { seed: 1 });
    }

    #[test]
    fn zero_noise_terms_have_one_topic() {
        let s = gen_synthetic(&small(2, 0.0)).unwrap();
        for doc in s.corpus.documents() {
            assert!(!doc.header_terms.is_empty());
            for term in &doc.header_terms {
                let topic = s.truth.term_topics.get(term).copied().flatten();
                assert!(topic.is_some(), "{term} has no planted topic");
            }
        }
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut cfg = small(1, 0.1);
        cfg.noise_rate = 1.5;
        assert!(gen_synthetic(&cfg).is_err());
        let mut cfg = small(1, 0.1);
        cfg.n_topics = 0;
        assert!(gen_synthetic(&cfg).is_err());
    }

    #[test]
    fn concept_stems_are_unique_per_topic() {
        let s = gen_synthetic(&small(5, 0.0)).unwrap();
        let prep = Preprocessor::portuguese();
        for (term, topic) in &s.truth.term_topics {
            let topic = topic.unwrap();
            for stem in prep.preprocess_term(term).unwrap() {
                assert_eq!(s.truth.concept_topics.get(&stem), Some(&topic), "{term}");
            }
        }
    }
}
