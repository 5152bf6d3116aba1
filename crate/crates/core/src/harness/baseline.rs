//! Statistical baseline: assign the n most frequent training labels to
//! every document.

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::metrics::{evaluate_all, LabelMatrix, MetricsReport};
use crate::taxonomy::LabeledDataset;

pub const DEFAULT_BASELINE_N: usize = 5;
const SEARCH_MAX_N: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineModel {
    /// label ids by descending training frequency, ties by lower id
    pub labels: Vec<usize>,
    pub n: usize,
    pub n_labels: usize,
}

/// Baseline metrics for one dataset, as stored by the command line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub dataset: String,
    pub model: BaselineModel,
    pub label_names: Vec<String>,
    pub test: MetricsReport,
}

impl BaselineModel {
    pub fn predictions(&self, n_docs: usize) -> LabelMatrix {
        let sets = vec![self.labels.clone(); n_docs];
        LabelMatrix::from_label_sets(self.n_labels, &sets).expect("baseline labels in range")
    }
}

fn ranked_labels(train: &LabeledDataset) -> Vec<usize> {
    let mut counts = vec![0usize; train.n_labels()];
    for e in &train.entries {
        for &l in &e.labels {
            counts[l] += 1;
        }
    }
    let mut ids: Vec<usize> = (0..counts.len()).collect();
    ids.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    ids
}

/// With `n` given, keeps the `n` most frequent labels. Otherwise searches
/// `n` in 1..=20 for the best micro-F1 on the training split itself,
/// preferring the smaller `n` on ties.
pub fn baseline_fit(train: &LabeledDataset, n: Option<usize>) -> Result<BaselineModel, HarnessError> {
    if train.is_empty() {
        return Err(HarnessError::InvalidConfig("baseline needs a non-empty training split".into()));
    }
    let ranked = ranked_labels(train);
    let make = |n: usize| {
        let n = n.min(ranked.len());
        BaselineModel {
            labels: ranked[..n].to_vec(),
            n,
            n_labels: train.n_labels(),
        }
    };
    if let Some(n) = n {
        return Ok(make(n));
    }
    let gold = train.label_matrix();
    let mut best: Option<(f64, BaselineModel)> = None;
    for n in 1..=SEARCH_MAX_N.min(ranked.len()) {
        let model = make(n);
        let f1 = evaluate_all(&gold, &model.predictions(train.len()))?.micro_f1;
        if best.as_ref().is_none_or(|(b, _)| f1 > *b) {
            best = Some((f1, model));
        }
    }
    Ok(best.map(|(_, m)| m).unwrap_or_else(|| make(0)))
}

pub fn baseline_eval(model: &BaselineModel, split: &LabeledDataset) -> Result<MetricsReport, HarnessError> {
    if split.n_labels() != model.n_labels {
        return Err(HarnessError::LabelSpaceMismatch);
    }
    Ok(evaluate_all(&split.label_matrix(), &model.predictions(split.len()))?)
}
