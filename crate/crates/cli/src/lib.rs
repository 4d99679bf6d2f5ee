//! Command-line front end: compile grammars to tables, parse sentences,
//! train action statistics from a treebank, evaluate corpora, and
//! synthesize noisy corpora. Set `GLRSTAR_LOG=debug` for progress chatter.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use glrstar_core::grammar::{load_grammar, load_substitutions, Grammar, LoadError};
use glrstar_core::parser::{parse_with, ParseConfig, ParseOutcome};
use glrstar_core::robust::BeamConfig;
use glrstar_core::scoring::{best_candidates, count_trees, ParseCandidate, RankingMode};
use glrstar_core::stats::{derive_action_sequence, train, ActionCounts};
use glrstar_core::table::{build_table, ParseTable};
use glrstar_core::tree::fragments_to_sexpr;
use glrstar_core::{classify, QualityLabel, QualityThresholds};

pub mod corpus;
pub mod corrupt;
pub mod harness;
pub mod report;

use corpus::{corpus_to_text, read_corpus, read_corpus_lenient};
use corrupt::{corrupt_corpus, CorruptRates};
use harness::{evaluate, EvalOptions, WeightsFile};
use report::{render_text, Mode};

#[derive(Parser)]
#[command(name = "glrstar", version, about = "Robust GLR parsing toolkit")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compile a grammar file into a parse table
    Compile {
        grammar: PathBuf,
        /// Output table path
        #[arg(short, long)]
        out: PathBuf,
        /// Substitution list to embed (`heard => replacement` lines)
        #[arg(long)]
        subs: Option<PathBuf>,
        /// Print table statistics as JSON
        #[arg(long)]
        json: bool,
    },
    /// Parse one sentence and print the candidate analyses as JSON
    Parse {
        table: PathBuf,
        /// Sentence words
        #[arg(required = true)]
        words: Vec<String>,
        /// Disable word skipping (plain GLR)
        #[arg(long)]
        no_skip: bool,
        /// How many candidates to return
        #[arg(long, default_value_t = 5)]
        n_best: usize,
        /// Candidate ranking: full penalties or skip count first
        #[arg(long, value_enum, default_value_t = RankArg::Full)]
        mode: RankArg,
        /// Weights file (JSON; missing fields keep their defaults)
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Write the graph-structured stack as Graphviz dot
        #[arg(long)]
        dot: Option<PathBuf>,
        #[command(flatten)]
        robust: RobustFlags,
    },
    /// Train action statistics from a treebank and write the new table
    Train {
        table: PathBuf,
        /// Records of `sentence TAB - TAB tree` (label field unused)
        treebank: PathBuf,
        #[arg(short, long)]
        out: PathBuf,
        /// Additive smoothing over each state's actions
        #[arg(long, default_value_t = 0.5)]
        alpha: f64,
    },
    /// Evaluate a corpus under one or more parsing modes
    Eval {
        table: PathBuf,
        corpus: PathBuf,
        /// Weights file (JSON; missing fields keep their defaults)
        #[arg(long)]
        weights: Option<PathBuf>,
        /// Comma-separated modes to run
        #[arg(long, value_enum, value_delimiter = ',',
              default_values_t = [Mode::Glr, Mode::GlrstarSimple, Mode::GlrstarFull])]
        modes: Vec<Mode>,
        /// Print the full report as JSON instead of text
        #[arg(long)]
        json: bool,
        #[command(flatten)]
        robust: RobustFlags,
    },
    /// Apply synthetic noise to a corpus
    Corrupt {
        corpus: PathBuf,
        /// Per-word deletion probability
        #[arg(long, default_value_t = 0.0)]
        delete: f64,
        /// Per-word filler insertion probability
        #[arg(long, default_value_t = 0.0)]
        insert: f64,
        /// Per-word substitution probability (word becomes word~)
        #[arg(long, default_value_t = 0.0)]
        substitute: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output path; standard output when absent
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, clap::ValueEnum)]
enum RankArg {
    Full,
    SkipOnly,
}

impl From<RankArg> for RankingMode {
    fn from(a: RankArg) -> RankingMode {
        match a {
            RankArg::Full => RankingMode::Full,
            RankArg::SkipOnly => RankingMode::SkipOnly,
        }
    }
}

#[derive(Args, Clone, Copy, Debug)]
struct RobustFlags {
    /// Disable substitution branching
    #[arg(long)]
    no_substitutions: bool,
    /// Search exhaustively instead of beaming skip origins
    #[arg(long)]
    no_beam: bool,
    /// Beam: max extra skips for an origin over the current best
    #[arg(long)]
    beam_delta: Option<u32>,
    /// Beam: max skip origins per shift step
    #[arg(long)]
    beam_cap: Option<usize>,
}

impl RobustFlags {
    fn beam(&self) -> BeamConfig {
        if self.no_beam {
            return BeamConfig::disabled();
        }
        let mut beam = BeamConfig::default();
        if let Some(delta) = self.beam_delta {
            beam.delta = delta;
        }
        if let Some(cap) = self.beam_cap {
            beam.frontier_cap = cap;
        }
        beam
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {}", join_load_errors(.errors))]
    Grammar { path: PathBuf, errors: Vec<LoadError> },
    #[error("{path}: {source}")]
    Corpus { path: PathBuf, source: corpus::CorpusError },
    #[error("{path}: {source}")]
    Table { path: PathBuf, source: glrstar_core::table::TableFileError },
    #[error("{0}")]
    Msg(String),
}

fn join_load_errors(errors: &[LoadError]) -> String {
    errors.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; ")
}

/// Print to standard output, treating a closed pipe (`glrstar ... | head`)
/// as a normal early exit rather than a panic.
fn emit(text: &str) {
    use std::io::Write as _;
    let mut out = std::io::stdout().lock();
    if let Err(e) = out.write_all(text.as_bytes()).and_then(|()| out.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: standard output: {e}");
        std::process::exit(1);
    }
}

fn emitln(text: &str) {
    emit(text);
    emit("\n");
}

fn read_file(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    fs::write(path, bytes).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn load_table(path: &Path) -> Result<ParseTable, CliError> {
    let bytes =
        fs::read(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })?;
    ParseTable::from_file_bytes(&bytes)
        .map_err(|source| CliError::Table { path: path.to_path_buf(), source })
}

fn load_corpus_file(path: &Path) -> Result<Vec<corpus::CorpusRecord>, CliError> {
    read_corpus(&read_file(path)?)
        .map_err(|source| CliError::Corpus { path: path.to_path_buf(), source })
}

fn load_weights(path: Option<&Path>) -> Result<WeightsFile, CliError> {
    match path {
        None => Ok(WeightsFile::default()),
        Some(p) => serde_json::from_str(&read_file(p)?)
            .map_err(|e| CliError::Msg(format!("{}: {e}", p.display()))),
    }
}

pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GLRSTAR_LOG"))
        .try_init()
        .ok();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        // Usage problems exit 2; --help and --version exit 0.
        Err(e) => e.exit(),
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.cmd {
        Cmd::Compile { grammar, out, subs, json } => cmd_compile(&grammar, &out, subs.as_deref(), json),
        Cmd::Parse { table, words, no_skip, n_best, mode, weights, dot, robust } => {
            cmd_parse(&table, &words, no_skip, n_best, mode.into(), weights.as_deref(), dot.as_deref(), robust)
        }
        Cmd::Train { table, treebank, out, alpha } => cmd_train(&table, &treebank, &out, alpha),
        Cmd::Eval { table, corpus, weights, modes, json, robust } => {
            cmd_eval(&table, &corpus, weights.as_deref(), &modes, json, robust)
        }
        Cmd::Corrupt { corpus, delete, insert, substitute, seed, out } => {
            cmd_corrupt(&corpus, CorruptRates { delete, insert, substitute }, seed, out.as_deref())
        }
    }
}

fn load_grammar_file(path: &Path, subs: Option<&Path>) -> Result<Grammar, CliError> {
    let loaded = load_grammar(&read_file(path)?)
        .map_err(|errors| CliError::Grammar { path: path.to_path_buf(), errors })?;
    for warning in &loaded.warnings {
        log::warn!("{}: {warning}", path.display());
    }
    let mut grammar = loaded.grammar;
    if let Some(subs_path) = subs {
        let parsed = load_substitutions(&read_file(subs_path)?)
            .map_err(|errors| CliError::Grammar { path: subs_path.to_path_buf(), errors })?;
        grammar.set_substitutions(parsed);
    }
    Ok(grammar.augment())
}

fn cmd_compile(grammar: &Path, out: &Path, subs: Option<&Path>, json: bool) -> Result<(), CliError> {
    let g = load_grammar_file(grammar, subs)?;
    let table = build_table::<f64>(&g).map_err(|e| CliError::Msg(e.to_string()))?;
    write_file(out, &table.to_file_bytes())?;
    let stats = table.stats();
    if json {
        emitln(&serde_json::to_string(&stats).expect("stats serialize"));
    } else {
        emitln(&format!(
            "{} states, {} action cells, {} with conflicts -> {}",
            stats.state_count,
            stats.cell_count,
            stats.conflict_cell_count,
            out.display()
        ));
    }
    Ok(())
}

#[derive(Serialize)]
struct PenaltiesJson {
    skip: f64,
    sub: f64,
    frag: f64,
    stat: f64,
    combined: f64,
}

#[derive(Serialize)]
struct CandidateJson {
    tree: String,
    skipped: Vec<(u32, String)>,
    substitutions: Vec<SubstitutionJson>,
    fragments: u32,
    log10_pscore: f64,
    penalties: PenaltiesJson,
    quality: QualityLabel,
}

#[derive(Serialize)]
struct SubstitutionJson {
    position: u32,
    heard: String,
    used: String,
}

#[derive(Serialize)]
struct DiagnosticsJson {
    tokens: usize,
    min_skips: Option<u32>,
    forest_trees: u64,
}

#[derive(Serialize)]
struct ParseJson {
    status: String,
    input: Vec<String>,
    candidates: Vec<CandidateJson>,
    diagnostics: DiagnosticsJson,
}

fn candidate_json(
    cand: &ParseCandidate,
    words: &[String],
    thresholds: &QualityThresholds,
) -> CandidateJson {
    let b = &cand.breakdown;
    let skipped = b
        .skipped_positions
        .iter()
        .map(|&i| (i, words[i as usize].clone()))
        .collect();
    // Substituted positions are exactly the kept positions whose leaf
    // surface differs from the heard word.
    let kept = (0..words.len() as u32).filter(|i| !b.skipped_positions.contains(i));
    let leaves: Vec<String> = cand
        .fragments
        .iter()
        .flat_map(|f| f.leaves())
        .map(|(_, surface)| surface.to_string())
        .collect();
    let substitutions = kept
        .zip(leaves)
        .filter(|(i, used)| words[*i as usize] != *used)
        .map(|(i, used)| SubstitutionJson { position: i, heard: words[i as usize].clone(), used })
        .collect();
    CandidateJson {
        tree: fragments_to_sexpr(&cand.fragments),
        skipped,
        substitutions,
        fragments: b.fragment_count,
        log10_pscore: b.log10_pscore,
        penalties: PenaltiesJson {
            skip: b.skip_penalty,
            sub: b.sub_penalty,
            frag: b.frag_penalty,
            stat: b.stat_penalty,
            combined: b.combined,
        },
        quality: classify(b, words.len(), thresholds),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_parse(
    table_path: &Path,
    words: &[String],
    no_skip: bool,
    n_best: usize,
    ranking: RankingMode,
    weights: Option<&Path>,
    dot: Option<&Path>,
    robust: RobustFlags,
) -> Result<(), CliError> {
    let table = load_table(table_path)?;
    let (feature_weights, thresholds) = load_weights(weights)?.split();
    let config = ParseConfig {
        skipping: !no_skip,
        substitutions: !robust.no_substitutions,
        beam: robust.beam(),
        n_best,
        record_dot: dot.is_some(),
    };
    let tokens = table.grammar().tokenize(words);
    let outcome: ParseOutcome = parse_with(&table, &tokens, &config);
    if let (Some(dot_path), Some(rendered)) = (dot, &outcome.dot) {
        write_file(dot_path, rendered.as_bytes())?;
    }
    let candidates =
        best_candidates(&outcome, table.grammar(), &feature_weights, n_best.max(1), ranking);
    let result = ParseJson {
        status: if candidates.is_empty() { "rejected" } else { "accepted" }.to_string(),
        input: words.to_vec(),
        candidates: candidates
            .iter()
            .map(|c| candidate_json(c, words, &thresholds))
            .collect(),
        diagnostics: DiagnosticsJson {
            tokens: tokens.len(),
            min_skips: outcome.min_skips(),
            forest_trees: count_trees(&outcome),
        },
    };
    emitln(&serde_json::to_string_pretty(&result).expect("parse result serializes"));
    Ok(())
}

fn cmd_train(table_path: &Path, treebank: &Path, out: &Path, alpha: f64) -> Result<(), CliError> {
    if alpha < 0.0 {
        return Err(CliError::Msg(format!("alpha {alpha} must be nonnegative")));
    }
    let table = load_table(table_path)?;
    let rows = read_corpus_lenient(&read_file(treebank)?);
    let total = rows.len();
    let mut counts = ActionCounts::new();
    let mut used = 0usize;
    for (line, row) in rows {
        let trace = row.map_err(|e| e.to_string()).and_then(|rec| {
            let gold = rec.gold_tree.ok_or_else(|| "no gold tree".to_string())?;
            derive_action_sequence(&table, &rec.sentence, &gold).map_err(|e| e.to_string())
        });
        match trace {
            Ok(trace) => {
                counts.observe(&trace);
                used += 1;
            }
            Err(e) => eprintln!("warning: {}:{line}: {e}", treebank.display()),
        }
    }
    if used == 0 {
        return Err(CliError::Msg(format!(
            "{}: no usable records out of {total}",
            treebank.display()
        )));
    }
    let trained = train(&table, &counts, alpha);
    write_file(out, &trained.to_file_bytes())?;
    emitln(&format!("{used}/{total} used"));
    Ok(())
}

fn cmd_eval(
    table_path: &Path,
    corpus_path: &Path,
    weights: Option<&Path>,
    modes: &[Mode],
    json: bool,
    robust: RobustFlags,
) -> Result<(), CliError> {
    let table = load_table(table_path)?;
    let records = load_corpus_file(corpus_path)?;
    let (feature_weights, thresholds) = load_weights(weights)?.split();
    let opts = EvalOptions {
        weights: feature_weights,
        thresholds,
        beam: robust.beam(),
        substitutions: !robust.no_substitutions,
    };
    let report = evaluate(&table, &records, modes, &opts);
    if json {
        emitln(&serde_json::to_string_pretty(&report).expect("report serializes"));
    } else {
        emit(&render_text(&report));
    }
    Ok(())
}

fn cmd_corrupt(
    corpus_path: &Path,
    rates: CorruptRates,
    seed: u64,
    out: Option<&Path>,
) -> Result<(), CliError> {
    rates.validate().map_err(CliError::Msg)?;
    let records = load_corpus_file(corpus_path)?;
    let text = corpus_to_text(&corrupt_corpus(&records, &rates, seed));
    match out {
        Some(path) => write_file(path, text.as_bytes())?,
        None => emit(&text),
    }
    Ok(())
}
