//! Tokenization, stop-word filtering and stemming for Portuguese text.
//!
//! Both the taxonomy pipeline (which decomposes descriptor terms into concept
//! stems) and the encoder vocabulary go through this module.

mod rslp;

use std::collections::{BTreeSet, HashSet};
use std::path::Path;

pub use rslp::{StemRule, StemRuleSet, Stage};

/// Portuguese stop-word list shipped with the crate.
pub const PORTUGUESE_STOPWORDS: &str = include_str!("../../data/stopwords_pt.txt");

#[derive(Debug, thiserror::Error)]
pub enum TextPrepError {
    #[error("term {0:?} has no content words")]
    EmptyTerm(String),
    #[error("rule file line {line}: {reason}")]
    BadRule { line: usize, reason: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Ordered lowercase word tokens.
///
/// Tokens are never empty and never contain whitespace or punctuation.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenList {
    tokens: Vec<String>,
}

impl TokenList {
    pub fn as_slice(&self) -> &[String] {
        &self.tokens
    }

    pub fn into_vec(self) -> Vec<String> {
        self.tokens
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.tokens.iter()
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

impl<'a> IntoIterator for &'a TokenList {
    type Item = &'a String;
    type IntoIter = std::slice::Iter<'a, String>;

    fn into_iter(self) -> Self::IntoIter {
        self.tokens.iter()
    }
}

impl FromIterator<String> for TokenList {
    fn from_iter<I: IntoIterator<Item = String>>(iter: I) -> Self {
        Self {
            tokens: iter.into_iter().filter(|t| !t.is_empty()).collect(),
        }
    }
}

/// Lowercases and splits on anything that is not a letter or digit.
///
/// Hyphens split words, so `"EMBARGOS - EXECUÇÃO"` yields two tokens.
/// Accents are preserved.
pub fn tokenize(text: &str) -> TokenList {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|piece| !piece.is_empty())
        .map(|piece| piece.to_lowercase())
        .collect()
}

/// A set of lowercase stop words.
#[derive(Debug, Clone, Default)]
pub struct Stoplist {
    words: HashSet<String>,
}

impl Stoplist {
    pub fn portuguese() -> Self {
        Self::parse(PORTUGUESE_STOPWORDS)
    }

    /// One word per line; blank lines and `#` comments are ignored.
    pub fn parse(text: &str) -> Self {
        let words = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(str::to_lowercase)
            .collect();
        Self { words }
    }

    pub fn load(path: &Path) -> Result<Self, TextPrepError> {
        Ok(Self::parse(&std::fs::read_to_string(path)?))
    }

    pub fn contains(&self, word: &str) -> bool {
        self.words.contains(word)
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }
}

impl<S: Into<String>> FromIterator<S> for Stoplist {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Self {
            words: iter.into_iter().map(|w| w.into().to_lowercase()).collect(),
        }
    }
}

/// Order-preserving filter that drops every token on the stoplist.
pub fn remove_stopwords(tokens: &TokenList, stoplist: &Stoplist) -> TokenList {
    tokens
        .iter()
        .filter(|t| !stoplist.contains(t))
        .cloned()
        .collect()
}

/// Stems a lowercase word with the given rule set.
pub fn stem(word: &str, rules: &StemRuleSet) -> String {
    rules.stem(word)
}

/// Stop list plus stem rules: everything needed to reduce text to stems.
#[derive(Debug, Clone)]
pub struct Preprocessor {
    pub stoplist: Stoplist,
    pub rules: StemRuleSet,
}

impl Default for Preprocessor {
    fn default() -> Self {
        Self::portuguese()
    }
}

impl Preprocessor {
    pub fn portuguese() -> Self {
        Self {
            stoplist: Stoplist::portuguese(),
            rules: StemRuleSet::rslp(),
        }
    }

    /// Stems of the content words of `text`, in order, duplicates kept.
    pub fn content_stems(&self, text: &str) -> Vec<String> {
        remove_stopwords(&tokenize(text), &self.stoplist)
            .iter()
            .map(|t| self.rules.stem(t))
            .filter(|s| !s.is_empty())
            .collect()
    }

    /// Reduces a descriptor term to its set of concept stems.
    pub fn preprocess_term(&self, term: &str) -> Result<BTreeSet<String>, TextPrepError> {
        preprocess_term(term, &self.stoplist, &self.rules)
    }
}

/// tokenize, drop stop words, stem, deduplicate.
///
/// A term made only of stop words is reported as [`TextPrepError::EmptyTerm`].
pub fn preprocess_term(
    term: &str,
    stoplist: &Stoplist,
    rules: &StemRuleSet,
) -> Result<BTreeSet<String>, TextPrepError> {
    let stems: BTreeSet<String> = remove_stopwords(&tokenize(term), stoplist)
        .iter()
        .map(|t| rules.stem(t))
        .filter(|s| !s.is_empty())
        .collect();
    if stems.is_empty() {
        Err(TextPrepError::EmptyTerm(term.to_string()))
    } else {
        Ok(stems)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(ws: &[&str]) -> TokenList {
        ws.iter().map(|w| w.to_string()).collect()
    }

    #[test]
    fn tokenize_examples() {
        assert_eq!(
            tokenize("ineficácia da adjudicação"),
            words(&["ineficácia", "da", "adjudicação"])
        );
        assert!(tokenize("").is_empty());
        assert_eq!(
            tokenize("EMBARGOS - EXECUÇÃO"),
            words(&["embargos", "execução"])
        );
        assert_eq!(
            tokenize("compra-e-venda, art. 1.245!"),
            words(&["compra", "e", "venda", "art", "1", "245"])
        );
        assert!(tokenize(" -- ; ...").is_empty());
    }

    #[test]
    fn stopword_examples() {
        let stop = Stoplist::portuguese();
        assert_eq!(
            remove_stopwords(&words(&["ineficácia", "da", "adjudicação"]), &stop),
            words(&["ineficácia", "adjudicação"])
        );
        assert!(remove_stopwords(&TokenList::default(), &stop).is_empty());
        let clean = words(&["usucapião", "imóvel", "rural"]);
        assert_eq!(remove_stopwords(&clean, &stop), clean);
    }

    #[test]
    fn shipped_stoplist_is_lowercase_and_nonempty() {
        let stop = Stoplist::portuguese();
        assert!(stop.len() > 200);
        for w in PORTUGUESE_STOPWORDS.lines().filter(|l| !l.is_empty()) {
            assert_eq!(w, w.to_lowercase());
        }
    }

    #[test]
    fn preprocess_term_examples() {
        let prep = Preprocessor::portuguese();
        let stems = prep.preprocess_term("ineficácia da adjudicação").unwrap();
        let expected: BTreeSet<String> = [
            prep.rules.stem("ineficácia"),
            prep.rules.stem("adjudicação"),
        ]
        .into_iter()
        .collect();
        assert_eq!(stems, expected);
        assert_eq!(stems.len(), 2);

        assert!(matches!(
            prep.preprocess_term("da de do"),
            Err(TextPrepError::EmptyTerm(_))
        ));
        let single = prep.preprocess_term("usucapião").unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn shared_concept_stem() {
        let prep = Preprocessor::portuguese();
        let a = prep.preprocess_term("ineficácia da adjudicação").unwrap();
        let b = prep.preprocess_term("ineficácia da alienação").unwrap();
        let shared: Vec<_> = a.intersection(&b).collect();
        assert_eq!(shared, vec![&prep.rules.stem("ineficácia")]);
    }
}
