//! Gender-stereotype auditing for word embeddings, plus an executable
//! demonstration of how a logistic unit trained on biased labels learns a
//! positive gender weight.
//!
//! * [`embedding`]: word2vec-text tables and phrase lookup.
//! * [`weat`]: association, test statistic, effect size, permutation test.
//! * [`lexicon`]: stereotype lexicons and coverage checks.
//! * [`sim`]: planted-bias populations, gradient-descent training, and the
//!   Bayesian-employer comparator.
//! * [`audit`] and [`report`]: batch audits and their JSON/CSV rendering.
//! * [`synthetic`]: tables with a planted association, for smoke tests.

pub mod audit;
pub mod embedding;
pub mod lexicon;
pub mod report;
pub mod sim;
pub mod synthetic;
pub mod weat;

pub use audit::{
    audit, audit_paths, AuditError, AuditOptions, AuditReport, AuditRun, SkipReason, SkippedRun,
};
pub use embedding::{
    load_table, EmbeddingTable, LookupError, LookupPolicy, ParseError, TableFormat,
};
pub use lexicon::{
    coverage_check, load_lexicon, Category, CoverageReport, Group, Lexicon, LexiconError,
    LoadOptions,
};
pub use report::{render, ReportFormat};
pub use sim::{LogisticParams, Sample, SimConfig, TrainConfig};
pub use weat::{
    cosine, Associations, PermutationMode, Permutations, WeatError, WeatQuery, WeatResult, WordSet,
};
