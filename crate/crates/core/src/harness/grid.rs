//! Cartesian hyperparameter grid with resumable, incrementally persisted
//! results.

use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{mpsc, Mutex};

use serde::{Deserialize, Serialize};

use super::{train_with_checkpoint, ExperimentConfig, HarnessError, ResultRow, Splits};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub learning_rates: Vec<f64>,
    pub max_seq_lens: Vec<usize>,
    pub thresholds: Vec<f64>,
}

impl Default for Grid {
    fn default() -> Self {
        Self {
            learning_rates: vec![2e-5, 4e-5, 5e-5, 1e-4, 1e-3, 5e-4, 5e-3, 1e-2],
            max_seq_lens: vec![52, 68, 131, 200],
            thresholds: vec![0.25, 0.50, 0.75],
        }
    }
}

impl Grid {
    pub fn size(&self) -> usize {
        self.learning_rates.len() * self.max_seq_lens.len() * self.thresholds.len()
    }
}

/// A named dataset split to run the grid over.
pub struct GridJob<'a> {
    pub name: String,
    pub splits: &'a Splits,
}

/// Rows already stored in a results file. A truncated final line, left by
/// an interrupted write, is ignored.
pub fn read_results(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let lines: Vec<String> = BufReader::new(File::open(path)?).lines().collect::<Result<_, _>>()?;
    let mut rows = Vec::new();
    let last = lines.len().saturating_sub(1);
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<ResultRow>(line) {
            Ok(row) => rows.push(row),
            Err(e) if i == last => log::warn!("ignoring incomplete last line of {}: {e}", path.display()),
            Err(e) => return Err(e.into()),
        }
    }
    Ok(rows)
}

/// Cuts an unterminated trailing line so that appended rows start on a
/// fresh line.
fn drop_partial_line(path: &Path) -> Result<(), HarnessError> {
    if !path.exists() {
        return Ok(());
    }
    let bytes = std::fs::read(path)?;
    let keep = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    if keep < bytes.len() {
        OpenOptions::new().write(true).open(path)?.set_len(keep as u64)?;
    }
    Ok(())
}

fn expand(grid: &Grid, datasets: &[GridJob<'_>], base: &ExperimentConfig) -> Vec<(ExperimentConfig, usize)> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (di, job) in datasets.iter().enumerate() {
        for &lr in &grid.learning_rates {
            for &len in &grid.max_seq_lens {
                for &thr in &grid.thresholds {
                    let mut cfg = base.clone();
                    cfg.dataset = job.name.clone();
                    cfg.variant = job.splits.train.variant;
                    cfg.hyperparams.peak_lr = lr;
                    cfg.hyperparams.max_seq_len = len;
                    cfg.hyperparams.threshold = thr;
                    if seen.insert(cfg.config_hash()) {
                        out.push((cfg, di));
                    }
                }
            }
        }
    }
    out
}

/// Runs every grid combination for every dataset. Combinations whose
/// config hash already appears in `results_path` are not rerun. New rows
/// are appended as they finish; failures are recorded as failed rows.
/// Up to `jobs` experiments run at once.
pub fn run_grid(
    grid: &Grid,
    datasets: &[GridJob<'_>],
    base: &ExperimentConfig,
    results_path: &Path,
    jobs: usize,
    checkpoint_dir: Option<&Path>,
) -> Result<Vec<ResultRow>, HarnessError> {
    if grid.size() == 0 || datasets.is_empty() {
        return Err(HarnessError::InvalidConfig("grid is empty".into()));
    }
    let planned = expand(grid, datasets, base);
    let mut done: HashMap<String, ResultRow> = read_results(results_path)?
        .into_iter()
        .map(|r| (r.config_hash.clone(), r))
        .collect();
    let queue: VecDeque<(usize, ExperimentConfig, usize)> = planned
        .iter()
        .enumerate()
        .filter(|(_, (cfg, _))| !done.contains_key(&cfg.config_hash()))
        .map(|(i, (cfg, di))| (i, cfg.clone(), *di))
        .collect();
    log::info!(
        "grid: {} combinations, {} already done, {} to run",
        planned.len(),
        planned.len() - queue.len(),
        queue.len()
    );
    if let Some(dir) = checkpoint_dir {
        std::fs::create_dir_all(dir)?;
    }
    drop_partial_line(results_path)?;
    let mut out = OpenOptions::new().create(true).append(true).open(results_path)?;
    let queue = Mutex::new(queue);
    let (tx, rx) = mpsc::channel::<ResultRow>();

    std::thread::scope(|scope| -> Result<(), HarnessError> {
        for _ in 0..jobs.max(1) {
            let tx = tx.clone();
            let queue = &queue;
            scope.spawn(move || loop {
                let next = queue.lock().expect("queue lock").pop_front();
                let Some((_, cfg, di)) = next else {
                    break;
                };
                let ck: Option<PathBuf> = checkpoint_dir.map(|d| d.join(format!("{}.json", cfg.config_hash())));
                let row = match train_with_checkpoint(datasets[di].splits, &cfg, ck.as_deref()) {
                    Ok(row) => row,
                    Err(e) => {
                        log::error!("experiment {} failed: {e}", cfg.config_hash());
                        ResultRow::failed(cfg, e.to_string())
                    }
                };
                if tx.send(row).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for row in rx {
            serde_json::to_writer(&mut out, &row)?;
            out.write_all(b"\n")?;
            out.flush()?;
            done.insert(row.config_hash.clone(), row);
        }
        Ok(())
    })?;

    Ok(planned
        .iter()
        .filter_map(|(cfg, _)| done.get(&cfg.config_hash()).cloned())
        .collect())
}
