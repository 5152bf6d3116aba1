//! Rule-based suffix stripping in the RSLP style.
//!
//! Words pass through a fixed sequence of stages: plural, feminine,
//! augmentative/diminutive, adverb, noun suffix, verb suffix, final vowel and
//! accent removal. The verb stage only runs if the noun stage did not change
//! the word, and the vowel stage only if neither did.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use super::TextPrepError;

/// Base rule tables, loaded by [`StemRuleSet::rslp`].
pub const RSLP_RULES: &str = include_str!("../../data/rslp_rules.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Stage {
    Plural,
    Feminine,
    Augmentative,
    Adverb,
    Noun,
    Verb,
    Vowel,
}

impl Stage {
    pub const ALL: [Stage; 7] = [
        Stage::Plural,
        Stage::Feminine,
        Stage::Augmentative,
        Stage::Adverb,
        Stage::Noun,
        Stage::Verb,
        Stage::Vowel,
    ];

    fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Stage::Plural => "plural",
            Stage::Feminine => "feminine",
            Stage::Augmentative => "augmentative",
            Stage::Adverb => "adverb",
            Stage::Noun => "noun",
            Stage::Verb => "verb",
            Stage::Vowel => "vowel",
        }
    }

    /// Stage entry condition on the whole word.
    fn accepts(self, word: &[char]) -> bool {
        match self {
            Stage::Plural => word.len() >= 3 && word.last() == Some(&'s'),
            Stage::Feminine => word.len() >= 3 && word.last() == Some(&'a'),
            _ => true,
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s.trim().to_lowercase())
            .ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

/// One suffix rule. `min_stem` counts characters left after removing the suffix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemRule {
    suffix: Vec<char>,
    pub min_stem: usize,
    pub replacement: String,
    pub exceptions: Vec<String>,
}

impl StemRule {
    pub fn new(suffix: &str, min_stem: usize, replacement: &str, exceptions: &[&str]) -> Self {
        assert!(min_stem >= 1, "minimum stem length must be at least 1");
        Self {
            suffix: suffix.chars().collect(),
            min_stem,
            replacement: replacement.to_string(),
            exceptions: exceptions.iter().map(|e| e.to_string()).collect(),
        }
    }

    pub fn suffix(&self) -> String {
        self.suffix.iter().collect()
    }

    fn apply(&self, word: &[char], as_string: &str) -> Option<Vec<char>> {
        if word.len() < self.suffix.len() + self.min_stem || !word.ends_with(&self.suffix) {
            return None;
        }
        if self.exceptions.iter().any(|e| e == as_string) {
            return None;
        }
        let mut out = word[..word.len() - self.suffix.len()].to_vec();
        out.extend(self.replacement.chars());
        Some(out)
    }
}

/// Rule tables for every stage, in priority order within each stage.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StemRuleSet {
    stages: [Vec<StemRule>; 7],
}

impl Default for StemRuleSet {
    fn default() -> Self {
        Self::rslp()
    }
}

impl StemRuleSet {
    pub fn empty() -> Self {
        Self {
            stages: Default::default(),
        }
    }

    /// The published base tables.
    pub fn rslp() -> Self {
        Self::parse(RSLP_RULES).expect("shipped rule table parses")
    }

    /// Parses the tab-separated rule format:
    /// `stage  suffix  min-stem-length  replacement  exceptions`.
    pub fn parse(text: &str) -> Result<Self, TextPrepError> {
        let mut set = Self::empty();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            if raw.trim().is_empty() || raw.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() < 3 {
                return Err(TextPrepError::BadRule {
                    line,
                    reason: format!("expected at least 3 columns, got {}", cols.len()),
                });
            }
            let stage: Stage = cols[0]
                .parse()
                .map_err(|reason| TextPrepError::BadRule { line, reason })?;
            let suffix = cols[1].trim();
            if suffix.is_empty() {
                return Err(TextPrepError::BadRule {
                    line,
                    reason: "empty suffix".into(),
                });
            }
            let min_stem: usize = cols[2].trim().parse().map_err(|_| TextPrepError::BadRule {
                line,
                reason: format!("bad minimum stem length {:?}", cols[2]),
            })?;
            if min_stem == 0 {
                return Err(TextPrepError::BadRule {
                    line,
                    reason: "minimum stem length must be at least 1".into(),
                });
            }
            let replacement = cols.get(3).map(|s| s.trim()).unwrap_or("");
            let exceptions: Vec<&str> = cols
                .get(4)
                .map(|s| s.split(',').map(str::trim).filter(|e| !e.is_empty()).collect())
                .unwrap_or_default();
            set.stages[stage.index()].push(StemRule::new(suffix, min_stem, replacement, &exceptions));
        }
        Ok(set)
    }

    pub fn load(path: &Path) -> Result<Self, TextPrepError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Adds enrichment rules ahead of the existing rules of each stage.
    pub fn with_enrichment(mut self, extra: &StemRuleSet) -> Self {
        for stage in Stage::ALL {
            let i = stage.index();
            let mut merged = extra.stages[i].clone();
            merged.append(&mut self.stages[i]);
            self.stages[i] = merged;
        }
        self
    }

    pub fn rules(&self, stage: Stage) -> &[StemRule] {
        &self.stages[stage.index()]
    }

    fn apply_stage(&self, stage: Stage, word: Vec<char>) -> (Vec<char>, bool) {
        if !stage.accepts(&word) {
            return (word, false);
        }
        let as_string: String = word.iter().collect();
        for rule in self.rules(stage) {
            if let Some(out) = rule.apply(&word, &as_string) {
                return (out, true);
            }
        }
        (word, false)
    }

    pub fn stem(&self, word: &str) -> String {
        let mut w: Vec<char> = word.chars().collect();
        if w.is_empty() {
            return String::new();
        }
        for stage in [Stage::Plural, Stage::Feminine, Stage::Augmentative, Stage::Adverb] {
            w = self.apply_stage(stage, w).0;
        }
        let (after_noun, noun_changed) = self.apply_stage(Stage::Noun, w);
        w = after_noun;
        if !noun_changed {
            let (after_verb, verb_changed) = self.apply_stage(Stage::Verb, w);
            w = after_verb;
            if !verb_changed {
                w = self.apply_stage(Stage::Vowel, w).0;
            }
        }
        w.into_iter().map(remove_accent).collect()
    }
}

fn remove_accent(c: char) -> char {
    match c {
        'á' | 'à' | 'â' | 'ã' | 'ä' => 'a',
        'é' | 'è' | 'ê' | 'ë' => 'e',
        'í' | 'ì' | 'î' | 'ï' => 'i',
        'ó' | 'ò' | 'ô' | 'õ' | 'ö' => 'o',
        'ú' | 'ù' | 'û' | 'ü' => 'u',
        'ç' => 'c',
        'ñ' => 'n',
        other => other,
    }
}
