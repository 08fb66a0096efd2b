//! `weatlab` command-line interface.
//!
//! Exit codes: 0 success, 1 input error, 2 validation error, 3 internal error.

mod config;
mod error;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use weatlab::report::{parse_report, to_canonical_json};
use weatlab::sim::{self, Batch, FeatureDistribution, LogisticParams, SweepRow};
use weatlab::{
    coverage_check, load_lexicon, load_table, AuditOptions, CoverageReport, Lexicon, LoadOptions,
    LookupPolicy, ReportFormat, SimConfig, TableFormat, TrainConfig,
};

use config::{pick, switch, FileConfig};
use error::CliError;

const BUILTIN_PREFIX: &str = "builtin:";

#[derive(Debug, Parser)]
#[command(
    name = "weatlab",
    version,
    about = "Gender-association audits for word embeddings"
)]
struct Cli {
    /// JSON file of default flag values, keyed by long flag name.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// WEAT audits over embedding tables.
    #[command(subcommand)]
    Weat(WeatCommand),
    /// Lexicon validation and coverage.
    #[command(subcommand)]
    Lexicon(LexiconCommand),
    /// Planted-bias training simulations.
    #[command(subcommand)]
    Sim(SimCommand),
    /// Compare the trained model with the Bayesian employer rule.
    #[command(subcommand)]
    Employer(EmployerCommand),
    /// Re-render saved reports.
    #[command(subcommand)]
    Report(ReportCommand),
}

#[derive(Debug, Subcommand)]
enum WeatCommand {
    /// Audit every table × category, exact where feasible, Monte Carlo otherwise.
    Run(AuditArgs),
    /// Audit with exact enumeration only; fails if any category is too large.
    Exact(AuditArgs),
}

#[derive(Debug, Subcommand)]
enum LexiconCommand {
    /// Validate a lexicon and report per-category coverage for each table.
    Check(LexiconArgs),
}

#[derive(Debug, Subcommand)]
enum SimCommand {
    /// Generate one population and train on it.
    Train(TrainArgs),
    /// Train once per seed and emit one CSV row per run.
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand)]
enum EmployerCommand {
    Compare(CompareArgs),
}

#[derive(Debug, Subcommand)]
enum ReportCommand {
    Render(RenderArgs),
}

#[derive(Debug, Args)]
struct LexiconSource {
    /// Lexicon JSON path, or `builtin:en` / `builtin:zh`.
    #[arg(long)]
    lexicon: Option<String>,
    /// Lowercase every lexicon phrase before lookup.
    #[arg(long)]
    lowercase: bool,
    /// Accept lexicons with fewer than 14 categories.
    #[arg(long)]
    allow_partial: bool,
    /// `underscore-then-average` or `strict`.
    #[arg(long)]
    policy: Option<LookupPolicy>,
}

#[derive(Debug, Args)]
struct AuditArgs {
    /// Embedding table in word2vec text format. Repeatable.
    #[arg(long = "table", value_name = "PATH")]
    tables: Vec<PathBuf>,
    #[command(flatten)]
    lexicon: LexiconSource,
    /// Monte Carlo sample count.
    #[arg(long)]
    permutations: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    /// `json` or `csv`.
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct LexiconArgs {
    #[arg(long = "table", value_name = "PATH")]
    tables: Vec<PathBuf>,
    #[command(flatten)]
    lexicon: LexiconSource,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PopulationArgs {
    #[arg(long)]
    n_features: Option<usize>,
    /// P(y = 1 | male).
    #[arg(long)]
    p_male: Option<f64>,
    /// P(y = 1 | female).
    #[arg(long)]
    p_female: Option<f64>,
    #[arg(long)]
    male_fraction: Option<f64>,
    #[arg(long)]
    samples: Option<usize>,
    /// Shift features by this amount for positive labels.
    #[arg(long, value_name = "SHIFT")]
    informative_features: Option<f64>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Mini-batch size; full batch when absent.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Shuffling seed for mini-batches.
    #[arg(long)]
    train_seed: Option<u64>,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    population: PopulationArgs,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    population: PopulationArgs,
    /// First seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of consecutive seeds.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    #[command(flatten)]
    population: PopulationArgs,
    /// Seed of the training history.
    #[arg(long)]
    seed: Option<u64>,
    /// Hiring threshold shared by the model and the employer.
    #[arg(long)]
    threshold: Option<f64>,
    /// Beta prior pseudo-count of the employer's estimate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Number of held-out candidates.
    #[arg(long)]
    candidates: Option<usize>,
    /// Seed of the held-out candidates; defaults to the history seed + 1.
    #[arg(long)]
    candidate_seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RenderArgs {
    /// A JSON report written by `weat run`.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = std::panic::catch_unwind(|| run(cli));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
        Err(_) => CliError::Internal("unexpected panic".into()).exit_code(),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Weat(WeatCommand::Run(args)) => weat(args, false, &file),
        Command::Weat(WeatCommand::Exact(args)) => weat(args, true, &file),
        Command::Lexicon(LexiconCommand::Check(args)) => lexicon_check(args, &file),
        Command::Sim(SimCommand::Train(args)) => sim_train(args, &file),
        Command::Sim(SimCommand::Sweep(args)) => sim_sweep(args, &file),
        Command::Employer(EmployerCommand::Compare(args)) => employer_compare(args, &file),
        Command::Report(ReportCommand::Render(args)) => report_render(args, &file),
    }
}

fn emit(output: Option<&Path>, bytes: &[u8]) -> Result<(), CliError> {
    match output {
        Some(path) => std::fs::write(path, bytes)
            .map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
        None => std::io::stdout()
            .write_all(bytes)
            .map_err(|e| CliError::Input(format!("stdout: {e}"))),
    }
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    Ok(to_canonical_json(value)?.into_bytes())
}

fn report_format(flag: Option<String>, file: &FileConfig) -> Result<ReportFormat, CliError> {
    pick(flag, file.format.clone(), "json".into())
        .parse()
        .map_err(CliError::Validation)
}

fn tables(flag: Vec<PathBuf>, file: &FileConfig) -> Vec<PathBuf> {
    if flag.is_empty() {
        file.table.clone().unwrap_or_default()
    } else {
        flag
    }
}

struct ResolvedLexicon {
    lexicon: Lexicon,
    label: String,
    options: LoadOptions,
    lowercase: bool,
    policy: LookupPolicy,
}

fn resolve_lexicon(src: LexiconSource, file: &FileConfig) -> Result<ResolvedLexicon, CliError> {
    let source = src
        .lexicon
        .or_else(|| file.lexicon.clone())
        .ok_or_else(|| CliError::Validation("--lexicon is required".into()))?;
    let options = LoadOptions {
        allow_partial: switch(src.allow_partial, file.allow_partial),
    };
    let (lexicon, label) = match source.strip_prefix(BUILTIN_PREFIX) {
        Some("en") => (Lexicon::builtin_en(), "en.json".to_string()),
        Some("zh") => (Lexicon::builtin_zh(), "zh.json".to_string()),
        Some(other) => {
            return Err(CliError::Validation(format!(
                "no built-in lexicon {other:?}; use en or zh"
            )))
        }
        None => {
            let lexicon =
                load_lexicon(&source, options).map_err(|e| CliError::lexicon(&source, e))?;
            let label = Path::new(&source)
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or(source);
            (lexicon, label)
        }
    };
    Ok(ResolvedLexicon {
        lexicon,
        label,
        options,
        lowercase: switch(src.lowercase, file.lowercase),
        policy: pick(src.policy, file.policy, LookupPolicy::default()),
    })
}

fn load_tables(paths: &[PathBuf]) -> Result<Vec<weatlab::EmbeddingTable>, CliError> {
    if paths.is_empty() {
        return Err(CliError::Validation(
            "at least one --table is required".into(),
        ));
    }
    paths
        .iter()
        .map(|p| {
            load_table(p, TableFormat::Word2VecText)
                .map_err(|e| CliError::table(&p.display().to_string(), e))
        })
        .collect()
}

fn weat(args: AuditArgs, exact: bool, file: &FileConfig) -> Result<(), CliError> {
    let format = report_format(args.format, file)?;
    let paths = tables(args.tables, file);
    let lex = resolve_lexicon(args.lexicon, file)?;
    let options = AuditOptions {
        permutations: pick(
            args.permutations,
            file.permutations,
            weatlab::weat::DEFAULT_PERMUTATIONS,
        ),
        seed: config::seed(args.seed, file.seed)?,
        exact,
        lowercase: lex.lowercase,
        policy: lex.policy,
        allow_partial: lex.options.allow_partial,
        workers: args.workers.or(file.workers),
    };
    if options.workers == Some(0) {
        return Err(CliError::Validation("--workers must be at least 1".into()));
    }
    let tables = load_tables(&paths)?;
    let report = weatlab::audit(&tables, &lex.lexicon, &lex.label, &options)?;
    let bytes = weatlab::render(&report, format)?;
    emit(
        args.output.or_else(|| file.output.clone()).as_deref(),
        &bytes,
    )
}

#[derive(Serialize)]
struct LexiconSummary {
    language: String,
    version: String,
    sha256: String,
    categories: usize,
}

#[derive(Serialize)]
struct LexiconCheck {
    lexicon: LexiconSummary,
    coverage: Vec<CoverageReport>,
}

fn lexicon_check(args: LexiconArgs, file: &FileConfig) -> Result<(), CliError> {
    let lex = resolve_lexicon(args.lexicon, file)?;
    lex.lexicon
        .validate(lex.options)
        .map_err(|e| CliError::lexicon(&lex.label, e))?;
    let working = if lex.lowercase {
        lex.lexicon
            .lowercased(lex.options)
            .map_err(|e| CliError::lexicon(&lex.label, e))?
    } else {
        lex.lexicon.clone()
    };
    let paths = tables(args.tables, file);
    let coverage = if paths.is_empty() {
        Vec::new()
    } else {
        load_tables(&paths)?
            .iter()
            .map(|t| coverage_check(&working, t, lex.policy))
            .collect()
    };
    let check = LexiconCheck {
        lexicon: LexiconSummary {
            language: lex.lexicon.language.clone(),
            version: lex.lexicon.version.clone(),
            sha256: lex.lexicon.content_hash(),
            categories: lex.lexicon.categories.len(),
        },
        coverage,
    };
    emit(
        args.output.or_else(|| file.output.clone()).as_deref(),
        &json(&check)?,
    )
}

fn population(
    args: &PopulationArgs,
    seed: u64,
    file: &FileConfig,
) -> Result<(SimConfig, TrainConfig), CliError> {
    let defaults = SimConfig::default();
    let sim = SimConfig {
        n_features: pick(args.n_features, file.n_features, defaults.n_features),
        p_pos_given_male: pick(args.p_male, file.p_male, defaults.p_pos_given_male),
        p_pos_given_female: pick(args.p_female, file.p_female, defaults.p_pos_given_female),
        male_fraction: pick(
            args.male_fraction,
            file.male_fraction,
            defaults.male_fraction,
        ),
        n_samples: pick(args.samples, file.samples, defaults.n_samples),
        feature_distribution: FeatureDistribution::StandardNormal,
        seed,
        informative_shift: args.informative_features.or(file.informative_features),
    };
    sim.validate()?;
    let train_defaults = TrainConfig::default();
    let batch = match args.batch_size.or(file.batch_size) {
        Some(0) => {
            return Err(CliError::Validation(
                "--batch-size must be at least 1".into(),
            ))
        }
        Some(n) => Batch::Size(n),
        None => Batch::Full,
    };
    let train = TrainConfig {
        learning_rate: pick(
            args.learning_rate,
            file.learning_rate,
            train_defaults.learning_rate,
        ),
        epochs: pick(args.epochs, file.epochs, train_defaults.epochs),
        batch,
        seed: pick(args.train_seed, file.train_seed, train_defaults.seed),
    };
    Ok((sim, train))
}

#[derive(Serialize)]
struct Optimum {
    gamma: f64,
    bias: f64,
}

#[derive(Serialize)]
struct Rates {
    male: f64,
    female: f64,
}

#[derive(Serialize)]
struct TrainReport {
    population: SimConfig,
    training: TrainConfig,
    params: LogisticParams,
    final_loss: f64,
    epochs: usize,
    empirical_rates: Rates,
    /// Only meaningful when features are uninformative.
    closed_form: Option<Optimum>,
}

fn sim_train(args: TrainArgs, file: &FileConfig) -> Result<(), CliError> {
    let seed = config::seed(args.seed, file.seed)?;
    let (population, training) = population(&args.population, seed, file)?;
    let data = sim::generate(&population)?;
    let (male, female) = sim::conditional_rates(&data);
    let outcome = sim::train(&data, &training)?;
    let closed_form = population.informative_shift.is_none().then(|| {
        let (gamma, bias) = population.optimum();
        Optimum { gamma, bias }
    });
    let report = TrainReport {
        population,
        training,
        params: outcome.params,
        final_loss: outcome.final_loss,
        epochs: outcome.epochs,
        empirical_rates: Rates { male, female },
        closed_form,
    };
    emit(
        args.output.or_else(|| file.output.clone()).as_deref(),
        &json(&report)?,
    )
}

fn sim_sweep(args: SweepArgs, file: &FileConfig) -> Result<(), CliError> {
    let start = config::seed(args.seed, file.seed)?;
    let count = pick(args.seeds, file.seeds, 20);
    if count == 0 {
        return Err(CliError::Validation("--seeds must be at least 1".into()));
    }
    let end = start
        .checked_add(count)
        .ok_or_else(|| CliError::Validation("seed range overflows".into()))?;
    let (base, training) = population(&args.population, start, file)?;
    let seeds: Vec<u64> = (start..end).collect();
    let rows: Vec<SweepRow> = sim::sweep(&base, &seeds, &training)?;
    let csv = sim::sweep_csv(&rows).map_err(|e| CliError::Internal(e.to_string()))?;
    emit(
        args.output.or_else(|| file.output.clone()).as_deref(),
        csv.as_bytes(),
    )
}

#[derive(Serialize)]
struct CompareReport {
    threshold: f64,
    alpha: f64,
    history: SimConfig,
    candidate_seed: u64,
    params: LogisticParams,
    comparison: sim::Comparison,
}

fn employer_compare(args: CompareArgs, file: &FileConfig) -> Result<(), CliError> {
    let threshold = args
        .threshold
        .or(file.threshold)
        .ok_or_else(|| CliError::Validation("--threshold is required".into()))?;
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CliError::Validation(format!(
            "--threshold {threshold} is outside [0, 1]"
        )));
    }
    let alpha = pick(args.alpha, file.alpha, 1.0);
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(CliError::Validation(format!(
            "--alpha {alpha} must be non-negative"
        )));
    }
    let seed = config::seed(args.seed, file.seed)?;
    let (history_config, training) = population(&args.population, seed, file)?;
    let candidate_seed = pick(
        args.candidate_seed,
        file.candidate_seed,
        seed.wrapping_add(1),
    );
    let candidate_config = SimConfig {
        n_samples: pick(args.candidates, file.candidates, 10_000),
        seed: candidate_seed,
        ..history_config.clone()
    };
    candidate_config.validate()?;

    let history = sim::generate(&history_config)?;
    let params = sim::train(&history, &training)?.params;
    let candidates = sim::generate(&candidate_config)?;
    let comparison = sim::compare_decisions(&history, &params, &candidates, threshold, alpha);
    let report = CompareReport {
        threshold,
        alpha,
        history: history_config,
        candidate_seed,
        params,
        comparison,
    };
    emit(
        args.output.or_else(|| file.output.clone()).as_deref(),
        &json(&report)?,
    )
}

fn report_render(args: RenderArgs, file: &FileConfig) -> Result<(), CliError> {
    let format = report_format(args.format, file)?;
    let input = args
        .input
        .or_else(|| file.input.clone())
        .ok_or_else(|| CliError::Validation("--input is required".into()))?;
    let bytes =
        std::fs::read(&input).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let report =
        parse_report(&bytes).map_err(|e| CliError::Input(format!("{}: {e}", input.display())))?;
    let out = weatlab::render(&report, format)?;
    emit(args.output.or_else(|| file.output.clone()).as_deref(), &out)
}
