//! Multi-label categorization of case-law summaries.
//!
//! The crate covers the whole pipeline: corpus ingestion and synthetic
//! generation ([`corpus`]), Portuguese tokenization and RSLP stemming
//! ([`textprep`]), the dense linear-algebra and clustering kit ([`numkit`]),
//! the refinement of free-form descriptor terms into a bounded label space
//! ([`taxonomy`]), a small transformer encoder with a sigmoid multi-label
//! head ([`model`]), the multi-label evaluation suite ([`metrics`]) and the
//! train/validate/test protocol with its grid runner ([`harness`]).

pub mod corpus;
pub mod harness;
pub mod metrics;
pub mod model;
pub mod numkit;
pub mod taxonomy;
pub mod textprep;

pub use corpus::{Corpus, Document, StatsReport, SynthConfig};
pub use harness::{BaselineModel, ExperimentConfig, ResultRow, SplitSpec};
pub use metrics::{LabelMatrix, MetricsReport};
pub use model::{EncoderConfig, Hyperparams, ModelParams};
pub use numkit::{Clustering, DenseMatrix, SvdResult};
pub use taxonomy::{CategoryHierarchy, LabeledDataset, TaxonomyConfig};
pub use textprep::{Preprocessor, StemRuleSet, TokenList};
