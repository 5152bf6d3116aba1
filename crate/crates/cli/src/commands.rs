//! Subcommand settings and their implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use ementa::corpus::{self, corpus_stats, gen_synthetic, order_correlation, Substitutions};
use ementa::harness::{
    self, baseline_eval, baseline_fit, read_results, run_grid, BaselineReport, ExperimentConfig, Grid, GridJob,
    SplitSpec, Splits, DEFAULT_BASELINE_N,
};
use ementa::taxonomy::{self, LabeledDataset, TaxonomyConfig, Variant};
use ementa::{Preprocessor, SynthConfig};

use crate::config::required;

fn load_corpus(path: &Path) -> Result<ementa::Corpus> {
    corpus::load_corpus(path).with_context(|| format!("loading {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut out = BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    serde_json::to_writer_pretty(&mut out, value)?;
    out.write_all(b"\n")?;
    out.flush()?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

#[derive(Args, Serialize, Deserialize)]
pub struct SynthArgs {
    #[arg(long)]
    pub n_docs: Option<usize>,
    #[arg(long)]
    pub n_topics: Option<usize>,
    #[arg(long)]
    pub terms_per_topic: Option<usize>,
    /// mean number of descriptor terms per header
    #[arg(long)]
    pub mean_terms: Option<f64>,
    #[arg(long)]
    pub vocab_size: Option<usize>,
    #[arg(long)]
    pub noise_rate: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// corpus file to write (JSON Lines)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// optional file for the planted ground truth (JSON)
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

pub fn synth(a: SynthArgs) -> Result<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        n_docs: a.n_docs.unwrap_or(d.n_docs),
        n_topics: a.n_topics.unwrap_or(d.n_topics),
        terms_per_topic: a.terms_per_topic.unwrap_or(d.terms_per_topic),
        mean_terms_per_header: a.mean_terms.unwrap_or(d.mean_terms_per_header),
        vocab_size: a.vocab_size.unwrap_or(d.vocab_size),
        noise_rate: a.noise_rate.unwrap_or(d.noise_rate),
        seed: a.seed.unwrap_or(d.seed),
    };
    let out = required(a.out, "out")?;
    let s = gen_synthetic(&cfg)?;
    s.corpus.save(&out)?;
    if let Some(path) = a.truth {
        write_json(&path, &s.truth)?;
    }
    log::info!("wrote {} documents to {}", s.corpus.len(), out.display());
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct IngestArgs {
    /// raw corpus (JSON Lines with id, summary, header_terms)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// tab-separated phrase substitutions applied after cleaning
    #[arg(long)]
    pub substitutions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn ingest(a: IngestArgs) -> Result<()> {
    let input = required(a.input, "input")?;
    let out = required(a.out, "out")?;
    let subs = match &a.substitutions {
        Some(p) => Substitutions::load(p)?,
        None => Substitutions::default(),
    };
    let c = corpus::load_corpus_with(&input, &subs).with_context(|| format!("ingesting {}", input.display()))?;
    c.save(&out)?;
    log::info!("ingested {} documents into {}", c.len(), out.display());
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct StatsArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// statistics report (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// directory for CSV histograms
    #[arg(long)]
    pub csv_dir: Option<PathBuf>,
    /// pairwise term order statistics (JSON)
    #[arg(long)]
    pub order: Option<PathBuf>,
}

pub fn stats(a: StatsArgs) -> Result<()> {
    let c = load_corpus(&required(a.corpus, "corpus")?)?;
    let out = required(a.out, "out")?;
    let report = corpus_stats(&c, &Preprocessor::portuguese())?;
    write_json(&out, &report)?;
    if let Some(dir) = a.csv_dir {
        report.write_csv(&dir)?;
    }
    if let Some(path) = a.order {
        write_json(&path, &order_correlation(&c).entries())?;
    }
    log::info!(
        "{} documents, {} distinct terms, {:.2} terms per header, presence {:.3}",
        report.n_documents,
        report.total_distinct_terms,
        report.mean_terms_per_header(),
        report.mean_presence()
    );
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct AdjustArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// 1 keeps the Others label, 2 drops it
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub variant: Option<u8>,
    #[arg(long)]
    pub k_super: Option<usize>,
    #[arg(long)]
    pub svd_dim: Option<usize>,
    #[arg(long)]
    pub min_occ: Option<usize>,
    #[arg(long)]
    pub paternity: Option<f64>,
    /// quantile of root counts below which roots go under Others
    #[arg(long)]
    pub grouping_rate: Option<f64>,
    #[arg(long)]
    pub n_init: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// hierarchy file to write (JSON)
    #[arg(long)]
    pub hierarchy: Option<PathBuf>,
    /// labeled dataset to write (JSON Lines plus a `.labels.json` sidecar)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn variant(n: u8) -> Variant {
    if n == 1 {
        Variant::KeepOthers
    } else {
        Variant::DropOthers
    }
}

pub fn adjust(a: AdjustArgs) -> Result<()> {
    let c = load_corpus(&required(a.corpus, "corpus")?)?;
    let out = required(a.out, "out")?;
    let d = TaxonomyConfig::for_variant(variant(a.variant.unwrap_or(1)));
    let cfg = TaxonomyConfig {
        min_occurrence: a.min_occ.unwrap_or(d.min_occurrence),
        paternity_threshold: a.paternity.unwrap_or(d.paternity_threshold),
        grouping_rate: a.grouping_rate.unwrap_or(d.grouping_rate),
        k_super: a.k_super.unwrap_or(d.k_super),
        svd_dim: a.svd_dim.unwrap_or(d.svd_dim),
        n_init: a.n_init.unwrap_or(d.n_init),
        seed: a.seed.unwrap_or(d.seed),
        ..d
    };
    let (h, ds) = taxonomy::adjust(&c, &Preprocessor::portuguese(), &cfg)?;
    if let Some(path) = a.hierarchy {
        h.save(&path)?;
    }
    ds.save(&out)?;
    log::info!("{} entries over {} labels written to {}", ds.len(), ds.n_labels(), out.display());
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// directory receiving train.jsonl, validation.jsonl and test.jsonl
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    #[arg(long)]
    pub train: Option<f64>,
    #[arg(long)]
    pub validation: Option<f64>,
    #[arg(long)]
    pub test: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

const SPLIT_FILES: [&str; 3] = ["train.jsonl", "validation.jsonl", "test.jsonl"];

fn load_splits(dir: &Path) -> Result<Splits> {
    let load = |f: &str| {
        let p = dir.join(f);
        LabeledDataset::load(&p).with_context(|| format!("loading {}", p.display()))
    };
    Ok(Splits {
        train: load(SPLIT_FILES[0])?,
        validation: load(SPLIT_FILES[1])?,
        test: load(SPLIT_FILES[2])?,
    })
}

pub fn split(a: SplitArgs) -> Result<()> {
    let ds = {
        let p = required(a.dataset, "dataset")?;
        LabeledDataset::load(&p).with_context(|| format!("loading {}", p.display()))?
    };
    let dir = required(a.out_dir, "out-dir")?;
    let d = SplitSpec::default();
    let spec = SplitSpec {
        train: a.train.unwrap_or(d.train),
        validation: a.validation.unwrap_or(d.validation),
        test: a.test.unwrap_or(d.test),
        seed: a.seed.unwrap_or(d.seed),
    };
    let s = harness::split(&ds, &spec)?;
    std::fs::create_dir_all(&dir)?;
    for (part, file) in [&s.train, &s.validation, &s.test].into_iter().zip(SPLIT_FILES) {
        part.save(&dir.join(file))?;
    }
    log::info!(
        "{} / {} / {} entries written to {}",
        s.train.len(),
        s.validation.len(),
        s.test.len(),
        dir.display()
    );
    Ok(())
}

/// Model shape and optimization settings shared by `train` and `grid`.
#[derive(Args, Serialize, Deserialize)]
pub struct ModelArgs {
    #[arg(long)]
    pub model_dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub heads: Option<usize>,
    #[arg(long)]
    pub ff_dim: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub threshold: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub warmup: Option<usize>,
    #[arg(long)]
    pub weight_decay: Option<f64>,
    /// validations per epoch
    #[arg(long)]
    pub eval_interval: Option<usize>,
    #[arg(long)]
    pub vocab_min_count: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ModelArgs {
    fn config(&self, dataset: &str, variant: Variant) -> ExperimentConfig {
        let d = ExperimentConfig::default();
        let mut hp = d.hyperparams.clone();
        hp.peak_lr = self.lr.unwrap_or(hp.peak_lr);
        hp.max_seq_len = self.seq_len.unwrap_or(hp.max_seq_len);
        hp.threshold = self.threshold.unwrap_or(hp.threshold);
        hp.batch_size = self.batch_size.unwrap_or(hp.batch_size);
        hp.epochs = self.epochs.unwrap_or(hp.epochs);
        hp.warmup_steps = self.warmup.unwrap_or(hp.warmup_steps);
        hp.weight_decay = self.weight_decay.unwrap_or(hp.weight_decay);
        ExperimentConfig {
            dataset: dataset.to_string(),
            variant,
            model_dim: self.model_dim.unwrap_or(d.model_dim),
            n_layers: self.layers.unwrap_or(d.n_layers),
            n_heads: self.heads.unwrap_or(d.n_heads),
            ff_dim: self.ff_dim.unwrap_or(d.ff_dim),
            hyperparams: hp,
            eval_interval: self.eval_interval.unwrap_or(d.eval_interval),
            vocab_min_count: self.vocab_min_count.unwrap_or(d.vocab_min_count),
            seed: self.seed.unwrap_or(d.seed),
            ..d
        }
    }
}

fn dir_name(dir: &Path) -> String {
    dir.file_name().map_or_else(|| "dataset".into(), |n| n.to_string_lossy().into_owned())
}

#[derive(Args, Serialize, Deserialize)]
pub struct TrainArgs {
    /// directory written by `split`
    #[arg(long)]
    pub splits: Option<PathBuf>,
    /// dataset name used in reports; defaults to the directory name
    #[arg(long)]
    pub name: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// result row to write (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// best-validation parameters to write (JSON)
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let dir = required(a.splits, "splits")?;
    let out = required(a.out, "out")?;
    let splits = load_splits(&dir)?;
    let name = a.name.unwrap_or_else(|| dir_name(&dir));
    let cfg = a.model.config(&name, splits.train.variant);
    let row = harness::train_with_checkpoint(&splits, &cfg, a.checkpoint.as_deref())?;
    write_json(&out, &row)?;
    let (v, t) = (row.validation.unwrap_or_default(), row.test.unwrap_or_default());
    log::info!("validation micro-F1 {:.4}, test micro-F1 {:.4}", v.micro_f1, t.micro_f1);
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct GridArgs {
    /// `NAME=DIR` pairs of split directories; repeatable
    #[arg(long = "dataset", value_name = "NAME=DIR")]
    pub datasets: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub lrs: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub seq_lens: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    pub thresholds: Option<Vec<f64>>,
    #[command(flatten)]
    #[serde(flatten)]
    pub model: ModelArgs,
    /// results file (JSON Lines), appended to and used for resuming
    #[arg(long)]
    pub results: Option<PathBuf>,
    /// experiments run at once
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub checkpoint_dir: Option<PathBuf>,
}

pub fn grid(a: GridArgs) -> Result<()> {
    let results = required(a.results, "results")?;
    let mut loaded = Vec::new();
    for spec in required(a.datasets, "dataset")? {
        let Some((name, dir)) = spec.split_once('=') else {
            bail!("--dataset expects NAME=DIR, got `{spec}`");
        };
        loaded.push((name.to_string(), load_splits(Path::new(dir))?));
    }
    let d = Grid::default();
    let grid = Grid {
        learning_rates: a.lrs.unwrap_or(d.learning_rates),
        max_seq_lens: a.seq_lens.unwrap_or(d.max_seq_lens),
        thresholds: a.thresholds.unwrap_or(d.thresholds),
    };
    let jobs: Vec<GridJob<'_>> = loaded
        .iter()
        .map(|(name, splits)| GridJob {
            name: name.clone(),
            splits,
        })
        .collect();
    let base = a.model.config("", Variant::DropOthers);
    let rows = run_grid(&grid, &jobs, &base, &results, a.jobs.unwrap_or(1), a.checkpoint_dir.as_deref())?;
    let failed = rows.iter().filter(|r| r.test.is_none()).count();
    log::info!("{} rows in {} ({failed} failed)", rows.len(), results.display());
    Ok(())
}

#[derive(Args, Serialize, Deserialize)]
pub struct BaselineArgs {
    #[arg(long)]
    pub splits: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// number of labels to predict, or `auto` to pick it on the training split
    #[arg(long)]
    pub n: Option<String>,
    /// baseline report to write (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn baseline(a: BaselineArgs) -> Result<()> {
    let dir = required(a.splits, "splits")?;
    let out = required(a.out, "out")?;
    let splits = load_splits(&dir)?;
    let n = match a.n.as_deref() {
        None => Some(DEFAULT_BASELINE_N),
        Some("auto") => None,
        Some(v) => Some(v.parse().with_context(|| format!("--n expects a count or `auto`, got `{v}`"))?),
    };
    let model = baseline_fit(&splits.train, n)?;
    let test = baseline_eval(&model, &splits.test)?;
    log::info!("baseline n={}: test micro-F1 {:.4}", model.n, test.micro_f1);
    let report = BaselineReport {
        dataset: a.name.unwrap_or_else(|| dir_name(&dir)),
        label_names: model.labels.iter().map(|&l| splits.train.label_space[l].clone()).collect(),
        model,
        test,
    };
    write_json(&out, &report)
}

#[derive(Args, Serialize, Deserialize)]
pub struct ReportArgs {
    /// results file written by `grid`, or one written by `train`
    #[arg(long)]
    pub results: Option<Vec<PathBuf>>,
    /// baseline reports; repeatable
    #[arg(long = "baseline")]
    pub baselines: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

pub fn report(a: ReportArgs) -> Result<()> {
    let mut rows = Vec::new();
    for path in required(a.results, "results")? {
        if path.extension().is_some_and(|e| e == "json") {
            rows.push(read_json(&path)?);
        } else {
            rows.extend(read_results(&path)?);
        }
    }
    let baselines: Vec<BaselineReport> =
        a.baselines.unwrap_or_default().iter().map(|p| read_json(p)).collect::<Result<_>>()?;
    let dir = required(a.out_dir, "out-dir")?;
    let files = harness::report(&rows, &baselines, &dir)?;
    log::info!("tables written to {}", files.table1_csv.parent().unwrap_or(&dir).display());
    Ok(())
}
