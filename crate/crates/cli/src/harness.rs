//! Corpus evaluation: run each requested mode over every sentence, judge
//! the selected parse against the gold analysis, and aggregate the
//! four-way outcome counts plus quality filter agreement.

use std::collections::BTreeMap;

use glrstar_core::parser::{parse_with, ParseConfig};
use glrstar_core::robust::BeamConfig;
use glrstar_core::scoring::{best_candidates, FeatureWeights, ParseCandidate, RankingMode};
use glrstar_core::table::ParseTable;
use glrstar_core::tree::fragments_to_sexpr;
use glrstar_core::{classify, QualityThresholds};
use serde::Deserialize;

use crate::corpus::{CorpusRecord, GoldLabel};
use crate::report::{AgreementRow, EvalReport, Mode, ModeRow, SentenceDetail, SentenceOutcome};

/// Flat weights-file schema: ranking weights and quality thresholds in
/// one JSON object, every field optional.
#[derive(Clone, Copy, Debug, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsFile {
    pub w_sub: f64,
    pub w_frag: f64,
    pub w_stat: f64,
    pub skip_lo: f64,
    pub skip_hi: f64,
    pub t_abs: f64,
    pub t_rel: f64,
}

impl Default for WeightsFile {
    fn default() -> Self {
        let w = FeatureWeights::<f64>::default();
        let t = QualityThresholds::<f64>::default();
        WeightsFile {
            w_sub: w.w_sub,
            w_frag: w.w_frag,
            w_stat: w.w_stat,
            skip_lo: w.skip_lo,
            skip_hi: w.skip_hi,
            t_abs: t.t_abs,
            t_rel: t.t_rel,
        }
    }
}

impl WeightsFile {
    pub fn split(&self) -> (FeatureWeights, QualityThresholds) {
        (
            FeatureWeights {
                w_sub: self.w_sub,
                w_frag: self.w_frag,
                w_stat: self.w_stat,
                skip_lo: self.skip_lo,
                skip_hi: self.skip_hi,
            },
            QualityThresholds { t_abs: self.t_abs, t_rel: self.t_rel },
        )
    }
}

#[derive(Clone, Debug)]
pub struct EvalOptions {
    pub weights: FeatureWeights,
    pub thresholds: QualityThresholds,
    pub beam: BeamConfig,
    pub substitutions: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            weights: FeatureWeights::default(),
            thresholds: QualityThresholds::default(),
            beam: BeamConfig::default(),
            substitutions: true,
        }
    }
}

fn mode_config(mode: Mode, opts: &EvalOptions) -> (ParseConfig, RankingMode) {
    match mode {
        Mode::Glr => (ParseConfig::baseline(), RankingMode::Full),
        Mode::GlrstarSimple => (robust_config(opts), RankingMode::SkipOnly),
        Mode::GlrstarFull => (robust_config(opts), RankingMode::Full),
    }
}

fn robust_config(opts: &EvalOptions) -> ParseConfig {
    ParseConfig {
        skipping: true,
        substitutions: opts.substitutions,
        beam: opts.beam,
        n_best: 1,
        record_dot: false,
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Judgment {
    GoodClose,
    Bad,
}

/// Judge a returned parse. Exact agreement with the gold tree is good;
/// otherwise the human gold label decides; a gold tree with no label
/// means any other analysis is bad. Records carrying no gold information
/// stay unjudged. "Close" is a human call and is never computed here.
fn judge(best: &ParseCandidate, rec: &CorpusRecord) -> Option<(Judgment, String)> {
    if let Some(gold) = &rec.gold_tree {
        if fragments_to_sexpr(&best.fragments) == fragments_to_sexpr(gold) {
            return Some((Judgment::GoodClose, "good".to_string()));
        }
    }
    match (rec.gold_label, &rec.gold_tree) {
        (Some(GoldLabel::Good), _) => Some((Judgment::GoodClose, "good".to_string())),
        (Some(GoldLabel::Close), _) => Some((Judgment::GoodClose, "close".to_string())),
        (Some(GoldLabel::Bad), _) => Some((Judgment::Bad, "bad".to_string())),
        (Some(GoldLabel::Unparsable), _) => Some((Judgment::Bad, "bad".to_string())),
        (None, Some(_)) => Some((Judgment::Bad, "bad".to_string())),
        (None, None) => None,
    }
}

pub fn evaluate(
    table: &ParseTable,
    records: &[CorpusRecord],
    modes: &[Mode],
    opts: &EvalOptions,
) -> EvalReport {
    let grammar = table.grammar();
    let mut rows = Vec::new();
    let mut agreement = Vec::new();
    let mut details: Vec<SentenceDetail> = records
        .iter()
        .enumerate()
        .map(|(index, rec)| SentenceDetail {
            index,
            sentence: rec.sentence.join(" "),
            modes: BTreeMap::new(),
        })
        .collect();

    for &mode in modes {
        let (config, ranking) = mode_config(mode, opts);
        let mut row =
            ModeRow { mode, unparsable: 0, parsable: 0, good_close: 0, bad: 0 };
        let mut agree =
            AgreementRow { mode, flagged_bad: 0, judged_bad: 0, kept_good: 0, judged_good: 0 };

        for (index, rec) in records.iter().enumerate() {
            let tokens = grammar.tokenize(&rec.sentence);
            let outcome = parse_with(table, &tokens, &config);
            let best =
                best_candidates(&outcome, grammar, &opts.weights, 1, ranking).into_iter().next();

            let detail = match best {
                None => {
                    row.unparsable += 1;
                    SentenceOutcome { status: "rejected".to_string(), ..Default::default() }
                }
                Some(best) => {
                    row.parsable += 1;
                    let b = &best.breakdown;
                    let quality = classify(b, rec.sentence.len(), &opts.thresholds);
                    let judged = judge(&best, rec);
                    match judged.as_ref().map(|(j, _)| *j) {
                        Some(Judgment::GoodClose) => {
                            row.good_close += 1;
                            agree.judged_good += 1;
                            if quality.is_good() {
                                agree.kept_good += 1;
                            }
                        }
                        Some(Judgment::Bad) => {
                            row.bad += 1;
                            agree.judged_bad += 1;
                            if !quality.is_good() {
                                agree.flagged_bad += 1;
                            }
                        }
                        None => {}
                    }
                    SentenceOutcome {
                        status: "accepted".to_string(),
                        skips: b.skipped_positions.len() as u32,
                        substitutions: b.sub_count,
                        fragments: b.fragment_count,
                        score: b.combined,
                        label: judged.map(|(_, s)| s),
                        quality: Some(if quality.is_good() { "good" } else { "bad" }.to_string()),
                    }
                }
            };
            details[index].modes.insert(mode.key().to_string(), detail);
        }

        log::info!(
            "{}: {} parsable / {} total, {} good/close, {} bad",
            mode.key(),
            row.parsable,
            records.len(),
            row.good_close,
            row.bad
        );
        if agree.judged_good + agree.judged_bad > 0 {
            agreement.push(agree);
        }
        rows.push(row);
    }

    EvalReport { total: records.len(), rows, agreement, details }
}
