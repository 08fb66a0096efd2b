//! Batch WEAT audits over embedding tables × lexicon categories.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::{load_table, EmbeddingTable, LookupPolicy, ParseError, TableFormat};
use crate::lexicon::{coverage_check, load_lexicon, Group, Lexicon, LexiconError, LoadOptions};
use crate::weat::{
    self, partition_count, Permutations, WeatQuery, WeatResult, EXACT_PARTITION_LIMIT,
};

#[derive(Debug, Error)]
pub enum AuditError {
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: ParseError },
    #[error("{path}: {source}")]
    Lexicon { path: PathBuf, source: LexiconError },
    #[error("{0}")]
    LexiconInvalid(#[from] LexiconError),
    #[error("configuration error: {0}")]
    Config(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditOptions {
    /// Monte Carlo sample count when enumeration is infeasible.
    pub permutations: u64,
    pub seed: u64,
    /// Require exact enumeration for every category.
    pub exact: bool,
    pub lowercase: bool,
    pub policy: LookupPolicy,
    pub allow_partial: bool,
    /// Worker threads; `None` uses the global pool. Not part of the report.
    #[serde(skip)]
    pub workers: Option<usize>,
}

impl Default for AuditOptions {
    fn default() -> Self {
        Self {
            permutations: weat::DEFAULT_PERMUTATIONS,
            seed: 0,
            exact: false,
            lowercase: false,
            policy: LookupPolicy::default(),
            allow_partial: false,
            workers: None,
        }
    }
}

impl AuditOptions {
    fn permutation_mode(&self) -> Permutations {
        if self.exact {
            Permutations::Exact
        } else {
            Permutations::Auto {
                count: self.permutations,
                seed: self.seed,
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRun {
    pub table: String,
    pub language: String,
    pub category: String,
    pub group: Group,
    /// Share of the lexicon's phrases this table cannot resolve.
    pub table_oov_rate: f64,
    pub result: WeatResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SkipReason {
    /// Phrases the table could not resolve.
    Oov { missing: Vec<String> },
    /// The WEAT computation itself failed, e.g. zero dispersion.
    Weat { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedRun {
    pub table: String,
    pub language: String,
    pub category: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LexiconVersion {
    pub language: String,
    pub version: String,
    pub sha256: String,
}

/// Everything needed to reproduce a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub tables: Vec<String>,
    pub lexicon: String,
    pub options: AuditOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub runs: Vec<AuditRun>,
    pub skipped: Vec<SkippedRun>,
    pub lexicon_version: LexiconVersion,
    pub tool_version: String,
    pub config_echo: ConfigEcho,
}

impl AuditReport {
    pub fn empty(lexicon_version: LexiconVersion, config_echo: ConfigEcho) -> Self {
        Self {
            runs: Vec::new(),
            skipped: Vec::new(),
            lexicon_version,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_echo,
        }
    }
}

enum Outcome {
    Run(AuditRun),
    Skip(SkippedRun),
}

/// Audit already-loaded tables. Runs are ordered by table (input order)
/// then category (lexicon order), independent of thread count.
pub fn audit(
    tables: &[EmbeddingTable],
    lexicon: &Lexicon,
    lexicon_label: &str,
    options: &AuditOptions,
) -> Result<AuditReport, AuditError> {
    let load_options = LoadOptions {
        allow_partial: options.allow_partial,
    };
    lexicon.validate(load_options)?;
    let lexicon_version = LexiconVersion {
        language: lexicon.language.clone(),
        version: lexicon.version.clone(),
        sha256: lexicon.content_hash(),
    };
    let working = if options.lowercase {
        lexicon.lowercased(load_options)?
    } else {
        lexicon.clone()
    };

    if options.exact {
        if let Some(c) = working
            .categories
            .iter()
            .find(|c| partition_count(c.male_stereotyped.len()) > EXACT_PARTITION_LIMIT)
        {
            let n = c.male_stereotyped.len();
            return Err(AuditError::Config(format!(
                "category {} needs C({}, {n}) = {} partitions for an exact test, limit is {EXACT_PARTITION_LIMIT}",
                c.id,
                2 * n,
                partition_count(n)
            )));
        }
    }
    if !options.exact && options.permutations == 0 {
        return Err(AuditError::Config(
            "permutation count must be at least 1".into(),
        ));
    }

    let echo = ConfigEcho {
        tables: tables
            .iter()
            .map(|t| t.source_label().to_string())
            .collect(),
        lexicon: lexicon_label.to_string(),
        options: options.clone(),
    };

    let work = || -> Vec<Outcome> {
        let a = working.attributes_male();
        let b = working.attributes_female();
        let jobs: Vec<(usize, usize)> = (0..tables.len())
            .flat_map(|t| (0..working.categories.len()).map(move |c| (t, c)))
            .collect();
        let coverage: Vec<_> = tables
            .par_iter()
            .map(|t| coverage_check(&working, t, options.policy))
            .collect();
        jobs.par_iter()
            .map(|&(ti, ci)| {
                let table = &tables[ti];
                let category = &working.categories[ci];
                let cov = &coverage[ti].categories[ci];
                let skip = |reason| {
                    Outcome::Skip(SkippedRun {
                        table: table.source_label().to_string(),
                        language: working.language.clone(),
                        category: category.id.clone(),
                        reason,
                    })
                };
                if !cov.runnable {
                    return skip(SkipReason::Oov {
                        missing: cov.unresolvable.clone(),
                    });
                }
                let (x, y) = (category.x(), category.y());
                let query = WeatQuery::new(&x, &y, &a, &b, table)
                    .with_policy(options.policy)
                    .with_permutations(options.permutation_mode());
                match weat::run(&query) {
                    Ok(result) => Outcome::Run(AuditRun {
                        table: table.source_label().to_string(),
                        language: working.language.clone(),
                        category: category.id.clone(),
                        group: category.group,
                        table_oov_rate: coverage[ti].oov_rate,
                        result,
                    }),
                    Err(e) => skip(SkipReason::Weat {
                        message: e.to_string(),
                    }),
                }
            })
            .collect()
    };

    let outcomes = match options.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| AuditError::Config(format!("cannot start worker pool: {e}")))?
            .install(work),
        None => work(),
    };

    let mut report = AuditReport::empty(lexicon_version, echo);
    for o in outcomes {
        match o {
            Outcome::Run(r) => report.runs.push(r),
            Outcome::Skip(s) => report.skipped.push(s),
        }
    }
    Ok(report)
}

/// Load tables and the lexicon from disk, then [`audit`].
pub fn audit_paths(
    table_paths: &[impl AsRef<Path>],
    lexicon_path: impl AsRef<Path>,
    options: &AuditOptions,
) -> Result<AuditReport, AuditError> {
    let lexicon_path = lexicon_path.as_ref();
    let lexicon = load_lexicon(
        lexicon_path,
        LoadOptions {
            allow_partial: options.allow_partial,
        },
    )
    .map_err(|source| AuditError::Lexicon {
        path: lexicon_path.to_path_buf(),
        source,
    })?;
    let tables = table_paths
        .iter()
        .map(|p| {
            load_table(p, TableFormat::Word2VecText).map_err(|source| AuditError::Table {
                path: p.as_ref().to_path_buf(),
                source,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let label = lexicon_path
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    audit(&tables, &lexicon, &label, options)
}
