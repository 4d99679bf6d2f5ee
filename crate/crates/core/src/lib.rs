//! Robust generalized-LR parsing.
//!
//! The pipeline: load a grammar (`grammar`), wrap it in the fragment
//! layer (`Grammar::augment`), compile an LR(0) table (`table`), then
//! parse with the graph-structured-stack engine (`parser`). The robust
//! entry point additionally considers parses that skip input words or
//! apply substitution readings, and `scoring` ranks the resulting forest
//! by penalty. `quality` turns the winning score into a keep/discard
//! judgment for corpus filtering.

mod bytes;
pub mod grammar;
pub mod gss;
pub mod num;
pub mod parser;
pub mod quality;
pub mod robust;
pub mod scoring;
pub mod stats;
pub mod table;
pub mod tree;

pub use grammar::{Grammar, LoadError, Loaded, NtId, RuleId, Sym, TermId, Token};
pub use gss::{Forest, NodeId, PackOutcome};
pub use num::Score;
pub use parser::{accepts, parse, parse_with, ParseConfig, ParseOutcome, ParseStatus};
pub use quality::{classify, QualityLabel, QualityThresholds, Verdict};
pub use robust::{parse_robust, BeamConfig};
pub use scoring::{
    best_candidates, combine, count_trees, unpack_all, FeatureWeights, ParseCandidate,
    PenaltyBreakdown, RankingMode, UnpackedParse,
};
pub use stats::{derive_action_sequence, train, ActionCounts, TraceError};
pub use table::{build_table, ParseTable, StateId, TableStats};
pub use tree::Tree;
