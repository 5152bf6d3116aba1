//! Multi-label evaluation: precision, recall and F1 under micro, macro and
//! per-instance averaging, plus Hamming and subset accuracy.
//!
//! Every `0/0` ratio is taken to be 0.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("shape mismatch: gold is {gold:?}, pred is {pred:?}")]
    Shape {
        gold: (usize, usize),
        pred: (usize, usize),
    },
    #[error("entry ({row}, {col}) is {value}, expected 0 or 1")]
    NonBinary { row: usize, col: usize, value: u8 },
    #[error("label {label} out of range for {n_labels} labels")]
    LabelOutOfRange { label: usize, n_labels: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Binary document × label matrix.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelMatrix {
    n_docs: usize,
    n_labels: usize,
    cells: Vec<bool>,
}

impl LabelMatrix {
    pub fn zeros(n_docs: usize, n_labels: usize) -> Self {
        Self {
            n_docs,
            n_labels,
            cells: vec![false; n_docs * n_labels],
        }
    }

    pub fn from_bools(n_docs: usize, n_labels: usize, cells: Vec<bool>) -> Result<Self, MetricsError> {
        if cells.len() != n_docs * n_labels {
            return Err(MetricsError::Invalid(format!(
                "{n_docs}x{n_labels} needs {} cells, got {}",
                n_docs * n_labels,
                cells.len()
            )));
        }
        Ok(Self {
            n_docs,
            n_labels,
            cells,
        })
    }

    /// Rows of 0/1 values; any other value is rejected.
    pub fn from_rows(rows: &[Vec<u8>]) -> Result<Self, MetricsError> {
        let n_labels = rows.first().map_or(0, Vec::len);
        let mut cells = Vec::with_capacity(rows.len() * n_labels);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n_labels {
                return Err(MetricsError::Invalid(format!("row {r} has {} labels, expected {n_labels}", row.len())));
            }
            for (c, &v) in row.iter().enumerate() {
                match v {
                    0 => cells.push(false),
                    1 => cells.push(true),
                    value => return Err(MetricsError::NonBinary { row: r, col: c, value }),
                }
            }
        }
        Ok(Self {
            n_docs: rows.len(),
            n_labels,
            cells,
        })
    }

    /// One label-id set per document.
    pub fn from_label_sets<S: AsRef<[usize]>>(n_labels: usize, sets: &[S]) -> Result<Self, MetricsError> {
        let mut m = Self::zeros(sets.len(), n_labels);
        for (r, set) in sets.iter().enumerate() {
            for &label in set.as_ref() {
                if label >= n_labels {
                    return Err(MetricsError::LabelOutOfRange { label, n_labels });
                }
                m.set(r, label, true);
            }
        }
        Ok(m)
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn n_labels(&self) -> usize {
        self.n_labels
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_docs, self.n_labels)
    }

    pub fn get(&self, doc: usize, label: usize) -> bool {
        self.cells[doc * self.n_labels + label]
    }

    pub fn set(&mut self, doc: usize, label: usize, value: bool) {
        self.cells[doc * self.n_labels + label] = value;
    }

    pub fn row(&self, doc: usize) -> &[bool] {
        &self.cells[doc * self.n_labels..(doc + 1) * self.n_labels]
    }

    /// Label ids set in a row, ascending.
    pub fn labels_of(&self, doc: usize) -> Vec<usize> {
        self.row(doc)
            .iter()
            .enumerate()
            .filter_map(|(i, &v)| v.then_some(i))
            .collect()
    }

    pub fn push_row(&mut self, row: &[bool]) -> Result<(), MetricsError> {
        if row.len() != self.n_labels {
            return Err(MetricsError::Invalid(format!(
                "row has {} labels, expected {}",
                row.len(),
                self.n_labels
            )));
        }
        self.cells.extend_from_slice(row);
        self.n_docs += 1;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    fn add(&mut self, gold: bool, pred: bool) {
        match (gold, pred) {
            (true, true) => self.tp += 1,
            (false, true) => self.fp += 1,
            (true, false) => self.fn_ += 1,
            (false, false) => self.tn += 1,
        }
    }

    fn merge(self, o: Confusion) -> Confusion {
        Confusion {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }

    pub fn scores(&self) -> Prf {
        let p = ratio(self.tp, self.tp + self.fp);
        let r = ratio(self.tp, self.tp + self.fn_);
        Prf {
            precision: p,
            recall: r,
            f1: f1(p, r),
        }
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Averaging {
    Micro,
    Macro,
    Instance,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check(gold: &LabelMatrix, pred: &LabelMatrix) -> Result<(), MetricsError> {
    if gold.shape() != pred.shape() {
        return Err(MetricsError::Shape {
            gold: gold.shape(),
            pred: pred.shape(),
        });
    }
    Ok(())
}

/// Per-label confusion cells.
pub fn confusion_counts(gold: &LabelMatrix, pred: &LabelMatrix) -> Result<Vec<Confusion>, MetricsError> {
    check(gold, pred)?;
    let mut out = vec![Confusion::default(); gold.n_labels()];
    for d in 0..gold.n_docs() {
        for (l, cell) in out.iter_mut().enumerate() {
            cell.add(gold.get(d, l), pred.get(d, l));
        }
    }
    Ok(out)
}

pub fn prf(gold: &LabelMatrix, pred: &LabelMatrix, averaging: Averaging) -> Result<Prf, MetricsError> {
    check(gold, pred)?;
    Ok(match averaging {
        Averaging::Micro => confusion_counts(gold, pred)?
            .into_iter()
            .fold(Confusion::default(), Confusion::merge)
            .scores(),
        Averaging::Macro => mean_scores(confusion_counts(gold, pred)?.iter().map(Confusion::scores), gold.n_labels()),
        Averaging::Instance => {
            let per_doc = (0..gold.n_docs()).map(|d| {
                let mut c = Confusion::default();
                for (&g, &p) in gold.row(d).iter().zip(pred.row(d)) {
                    c.add(g, p);
                }
                c.scores()
            });
            mean_scores(per_doc, gold.n_docs())
        }
    })
}

fn mean_scores(scores: impl Iterator<Item = Prf>, n: usize) -> Prf {
    let sum = scores.fold(Prf::default(), |acc, s| Prf {
        precision: acc.precision + s.precision,
        recall: acc.recall + s.recall,
        f1: acc.f1 + s.f1,
    });
    if n == 0 {
        return Prf::default();
    }
    let n = n as f64;
    Prf {
        precision: sum.precision / n,
        recall: sum.recall / n,
        f1: sum.f1 / n,
    }
}

/// Fraction of cells where gold and prediction agree.
pub fn hamming_accuracy(gold: &LabelMatrix, pred: &LabelMatrix) -> Result<f64, MetricsError> {
    check(gold, pred)?;
    let agree = gold.cells.iter().zip(&pred.cells).filter(|(g, p)| g == p).count();
    Ok(ratio(agree, gold.cells.len()))
}

/// Fraction of documents whose whole label row is predicted exactly.
pub fn subset_accuracy(gold: &LabelMatrix, pred: &LabelMatrix) -> Result<f64, MetricsError> {
    check(gold, pred)?;
    let exact = (0..gold.n_docs()).filter(|&d| gold.row(d) == pred.row(d)).count();
    Ok(ratio(exact, gold.n_docs()))
}

/// The eleven reported values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub micro_f1: f64,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub instance_precision: f64,
    pub instance_recall: f64,
    pub instance_f1: f64,
    pub hamming_accuracy: f64,
    pub subset_accuracy: f64,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str = "micro_p,micro_r,micro_f1,macro_p,macro_r,macro_f1,inst_p,inst_r,inst_f1,hamming_acc,subset_acc";

    pub fn values(&self) -> [f64; 11] {
        [
            self.micro_precision,
            self.micro_recall,
            self.micro_f1,
            self.macro_precision,
            self.macro_recall,
            self.macro_f1,
            self.instance_precision,
            self.instance_recall,
            self.instance_f1,
            self.hamming_accuracy,
            self.subset_accuracy,
        ]
    }

    /// Values in header order with four decimals.
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.values().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            let _ = write!(s, "{v:.4}");
        }
        s
    }
}

pub fn evaluate_all(gold: &LabelMatrix, pred: &LabelMatrix) -> Result<MetricsReport, MetricsError> {
    let micro = prf(gold, pred, Averaging::Micro)?;
    let macro_ = prf(gold, pred, Averaging::Macro)?;
    let inst = prf(gold, pred, Averaging::Instance)?;
    Ok(MetricsReport {
        micro_precision: micro.precision,
        micro_recall: micro.recall,
        micro_f1: micro.f1,
        macro_precision: macro_.precision,
        macro_recall: macro_.recall,
        macro_f1: macro_.f1,
        instance_precision: inst.precision,
        instance_recall: inst.recall,
        instance_f1: inst.f1,
        hamming_accuracy: hamming_accuracy(gold, pred)?,
        subset_accuracy: subset_accuracy(gold, pred)?,
    })
}
