//! Best-configuration and model-versus-baseline tables, as CSV and as
//! aligned plain text.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{BaselineReport, HarnessError, ResultRow};
use crate::metrics::MetricsReport;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub table1_csv: PathBuf,
    pub table1_txt: PathBuf,
    pub table2_csv: PathBuf,
    pub table2_txt: PathBuf,
}

const TABLE1_HEADER: [&str; 10] = [
    "dataset",
    "encoder",
    "config_hash",
    "peak_lr",
    "max_seq_len",
    "threshold",
    "validation_micro_f1",
    "test_micro_p",
    "test_micro_r",
    "test_micro_f1",
];

fn metric_names() -> Vec<&'static str> {
    MetricsReport::CSV_HEADER.split(',').collect()
}

/// Highest test micro-F1 per key; the earlier row wins ties.
fn best_by<K: Ord>(rows: &[ResultRow], key: impl Fn(&ResultRow) -> K) -> BTreeMap<K, &ResultRow> {
    let mut best: BTreeMap<K, &ResultRow> = BTreeMap::new();
    for row in rows {
        let Some(f1) = row.test_micro_f1() else {
            continue;
        };
        let slot = best.entry(key(row)).or_insert(row);
        if f1 > slot.test_micro_f1().unwrap_or(f64::NEG_INFINITY) {
            *slot = row;
        }
    }
    best
}

fn table1(rows: &[ResultRow]) -> Vec<Vec<String>> {
    best_by(rows, |r| (r.config.dataset.clone(), r.config.encoder_name()))
        .into_iter()
        .map(|((dataset, encoder), r)| {
            let test = r.test.expect("completed row");
            let hp = &r.config.hyperparams;
            vec![
                dataset,
                encoder,
                r.config_hash.clone(),
                format!("{:e}", hp.peak_lr),
                hp.max_seq_len.to_string(),
                format!("{:.2}", hp.threshold),
                format!("{:.4}", r.validation.map_or(0.0, |v| v.micro_f1)),
                format!("{:.4}", test.micro_precision),
                format!("{:.4}", test.micro_recall),
                format!("{:.4}", test.micro_f1),
            ]
        })
        .collect()
}

fn metric_cells(m: &MetricsReport) -> impl Iterator<Item = String> {
    m.values().into_iter().map(|v| format!("{v:.4}"))
}

fn table2(rows: &[ResultRow], baselines: &[BaselineReport]) -> Vec<Vec<String>> {
    let best = best_by(rows, |r| r.config.dataset.clone());
    let mut out = Vec::new();
    for (dataset, r) in &best {
        if let Some(b) = baselines.iter().find(|b| &b.dataset == dataset) {
            let mut row = vec![dataset.clone(), format!("baseline n={}", b.model.n)];
            row.extend(metric_cells(&b.test));
            out.push(row);
        }
        let mut row = vec![dataset.clone(), format!("{} ({})", r.config.encoder_name(), r.config_hash)];
        row.extend(metric_cells(&r.test.expect("completed row")));
        out.push(row);
    }
    out
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

fn text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for r in rows {
        for (w, c) in widths.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let cells: Vec<String> = cells.zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(s, "{}", cells.join("  ").trim_end());
    };
    line(&mut s, &mut header.iter().copied());
    let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
    let _ = writeln!(s, "{}", rule.join("  "));
    for r in rows {
        line(&mut s, &mut r.iter().map(String::as_str));
    }
    s
}

/// Writes `table1` (best row per dataset and encoder shape) and `table2`
/// (best model per dataset against its baseline) into `out_dir`.
/// Failed rows are ignored.
pub fn report(rows: &[ResultRow], baselines: &[BaselineReport], out_dir: &Path) -> Result<ReportFiles, HarnessError> {
    if rows.iter().all(|r| r.test.is_none()) {
        return Err(HarnessError::NoRows);
    }
    std::fs::create_dir_all(out_dir)?;
    let files = ReportFiles {
        table1_csv: out_dir.join("table1.csv"),
        table1_txt: out_dir.join("table1.txt"),
        table2_csv: out_dir.join("table2.csv"),
        table2_txt: out_dir.join("table2.txt"),
    };
    let t1 = table1(rows);
    std::fs::write(&files.table1_csv, csv(&TABLE1_HEADER, &t1))?;
    std::fs::write(&files.table1_txt, text(&TABLE1_HEADER, &t1))?;

    let mut header2 = vec!["dataset", "model"];
    header2.extend(metric_names());
    let t2 = table2(rows, baselines);
    std::fs::write(&files.table2_csv, csv(&header2, &t2))?;
    std::fs::write(&files.table2_txt, text(&header2, &t2))?;
    Ok(files)
}
