//! Per-state action probabilities trained from disambiguated parses.
//!
//! A gold tree determines a unique bottom-up LR action sequence; counting
//! actions over a treebank and normalizing per state gives p(action|state).
//! The accept action participates in each state's normalization but never
//! in a parse's score: it is common to every accepted analysis, so it can
//! shift no ranking.

use std::collections::HashMap;

use crate::grammar::{Grammar, Sym, Token};
use crate::num::Score;
use crate::table::{ActionKind, ParseTable, StateId};
use crate::tree::Tree;

#[derive(Debug, PartialEq, Eq, thiserror::Error)]
pub enum TraceError {
    #[error("leaf count {tree} does not match sentence length {sentence}")]
    LengthMismatch { tree: usize, sentence: usize },
    #[error("leaf {position} reads `{leaf}` but the sentence has `{word}`")]
    LeafMismatch { position: usize, leaf: String, word: String },
    #[error("unknown terminal `{0}` in tree leaf")]
    UnknownTerminal(String),
    #[error("unknown nonterminal `{0}` in tree")]
    UnknownNonterminal(String),
    #[error("no rule `{0}` in the grammar")]
    UnknownRule(String),
    #[error("tree is not derivable: {0}")]
    NotDerivable(String),
}

/// Observed (state, action) counts from gold derivations.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ActionCounts {
    counts: HashMap<(StateId, ActionKind), u64>,
}

impl ActionCounts {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, trace: &[(StateId, ActionKind)]) {
        for &(state, action) in trace {
            *self.counts.entry((state, action)).or_insert(0) += 1;
        }
    }

    pub fn get(&self, state: StateId, action: ActionKind) -> u64 {
        self.counts.get(&(state, action)).copied().unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn merge(&mut self, other: &ActionCounts) {
        for (&key, &v) in &other.counts {
            *self.counts.entry(key).or_insert(0) += v;
        }
    }
}

/// Replay the unique LR action sequence that derives `fragments` from
/// `words` under the table's grammar. Shifts and reduces only; the final
/// accept is checked but not recorded.
pub fn derive_action_sequence<S: Score>(
    table: &ParseTable<S>,
    words: &[String],
    fragments: &[Tree],
) -> Result<Vec<(StateId, ActionKind)>, TraceError> {
    let grammar = table.grammar();
    let internal = grammar
        .internal_symbols()
        .expect("table grammars are always augmented");

    // Validate the leaf sequence against the sentence first.
    let mut leaves = Vec::new();
    for tree in fragments {
        collect_leaves(tree, &mut leaves);
    }
    if leaves.len() != words.len() {
        return Err(TraceError::LengthMismatch { tree: leaves.len(), sentence: words.len() });
    }
    for (i, ((_, surface), word)) in leaves.iter().zip(words).enumerate() {
        if surface != word {
            return Err(TraceError::LeafMismatch {
                position: i,
                leaf: surface.to_string(),
                word: word.clone(),
            });
        }
    }

    let mut replay = Replay { table, grammar, stack: vec![StateId(0)], trace: Vec::new() };
    for (i, tree) in fragments.iter().enumerate() {
        let root = replay.replay_tree(tree)?;
        let frag_rule = grammar
            .rules_for(internal.frag)
            .iter()
            .copied()
            .find(|&r| grammar.rule(r).rhs == [Sym::Nt(root)])
            .ok_or_else(|| {
                TraceError::NotDerivable(format!(
                    "`{}` is not a fragment root",
                    grammar.nt_name(root)
                ))
            })?;
        replay.reduce(frag_rule)?;
        let frags_rhs = if i == 0 {
            vec![Sym::Nt(internal.frag)]
        } else {
            vec![Sym::Nt(internal.frags), Sym::Nt(internal.frag)]
        };
        let frags_rule = grammar
            .rules_for(internal.frags)
            .iter()
            .copied()
            .find(|&r| grammar.rule(r).rhs == frags_rhs)
            .expect("augmented grammars carry both fragment-list rules");
        replay.reduce(frags_rule)?;
    }
    let top = *replay.stack.last().unwrap();
    if !table.accepts_at(top) {
        return Err(TraceError::NotDerivable(
            "fragment sequence does not reach the accept state".into(),
        ));
    }
    Ok(replay.trace)
}

fn collect_leaves<'t>(tree: &'t Tree, out: &mut Vec<(&'t str, &'t str)>) {
    match tree {
        Tree::Leaf { term, surface } => out.push((term, surface)),
        Tree::Node { children, .. } => {
            for c in children {
                collect_leaves(c, out);
            }
        }
    }
}

struct Replay<'a, S: Score> {
    table: &'a ParseTable<S>,
    grammar: &'a Grammar,
    stack: Vec<StateId>,
    trace: Vec<(StateId, ActionKind)>,
}

impl<S: Score> Replay<'_, S> {
    fn replay_tree(&mut self, tree: &Tree) -> Result<crate::grammar::NtId, TraceError> {
        match tree {
            // Only reachable for a bare-leaf fragment; leaf children are
            // shifted inline by the Node arm below.
            Tree::Leaf { term, .. } => Err(TraceError::NotDerivable(format!(
                "fragment root `{term}` is a terminal"
            ))),
            Tree::Node { label, children } => {
                let lhs = self
                    .grammar
                    .nt_id(label)
                    .ok_or_else(|| TraceError::UnknownNonterminal(label.clone()))?;
                let mut rhs = Vec::with_capacity(children.len());
                for child in children {
                    match child {
                        Tree::Leaf { term, surface } => {
                            let tid = self
                                .grammar
                                .term_id(term)
                                .ok_or_else(|| TraceError::UnknownTerminal(term.clone()))?;
                            let top = *self.stack.last().unwrap();
                            let (target, _) =
                                self.table.shift_on(top, tid).ok_or_else(|| {
                                    TraceError::NotDerivable(format!(
                                        "no shift on `{term}` (\"{surface}\") from state {}",
                                        top.0
                                    ))
                                })?;
                            self.trace.push((top, ActionKind::Shift(target)));
                            self.stack.push(target);
                            rhs.push(Sym::Term(tid));
                        }
                        Tree::Node { .. } => {
                            let nt = self.replay_tree(child)?;
                            rhs.push(Sym::Nt(nt));
                        }
                    }
                }
                let rule = self
                    .grammar
                    .rules_for(lhs)
                    .iter()
                    .copied()
                    .find(|&r| self.grammar.rule(r).rhs == rhs)
                    .ok_or_else(|| {
                        TraceError::UnknownRule(format!(
                            "{} -> {}",
                            label,
                            rhs.iter()
                                .map(|&s| self.grammar.sym_name(s))
                                .collect::<Vec<_>>()
                                .join(" ")
                        ))
                    })?;
                self.reduce(rule)?;
                Ok(lhs)
            }
        }
    }

    fn reduce(&mut self, rule: crate::grammar::RuleId) -> Result<(), TraceError> {
        let r = self.grammar.rule(rule);
        let top = *self.stack.last().unwrap();
        self.trace.push((top, ActionKind::Reduce(rule)));
        for _ in 0..r.rhs.len() {
            self.stack.pop();
        }
        let base = *self.stack.last().unwrap();
        let target = self.table.goto(base, r.lhs).ok_or_else(|| {
            TraceError::NotDerivable(format!(
                "no goto on {} from state {}",
                self.grammar.nt_name(r.lhs),
                base.0
            ))
        })?;
        self.stack.push(target);
        Ok(())
    }
}

/// Annotate every action with log10 of its smoothed per-state probability:
/// p(a|s) = (count + alpha) / (total + alpha * |actions(s)|). A state with
/// no observations gets the uniform distribution.
pub fn train<S: Score>(table: &ParseTable<S>, counts: &ActionCounts, alpha: f64) -> ParseTable<S> {
    assert!(alpha >= 0.0, "smoothing must be nonnegative");
    let mut out = table.clone();
    for state in 0..table.state_count() {
        let sid = StateId(state as u32);
        let actions = table.state_actions(sid);
        if actions.is_empty() {
            continue;
        }
        let d = actions.len() as f64;
        let total: u64 = actions.iter().map(|a| counts.get(sid, a.kind)).sum();
        for action in actions {
            let c = counts.get(sid, action.kind) as f64;
            let p = if total == 0 && alpha == 0.0 {
                1.0 / d
            } else {
                (c + alpha) / (total as f64 + alpha * d)
            };
            out.set_action_prob(sid, action.kind, S::from_f64_lossy(p.log10()));
        }
    }
    out.mark_trained();
    out
}

/// Sum of log10 probabilities over a trace's actions (accept never appears
/// in traces). Untrained actions count as probability 1.
pub fn trace_log10_pscore<S: Score>(table: &ParseTable<S>, trace: &[(StateId, ActionKind)]) -> S {
    let mut sum = S::zero();
    for &(state, action) in trace {
        let p = match action {
            ActionKind::Shift(target) => table
                .shift_term(state, target)
                .and_then(|t| table.shift_on(state, t))
                .and_then(|(_, p)| p),
            ActionKind::Reduce(rule) => table
                .reduces(state)
                .iter()
                .find(|&&(r, _)| r == rule)
                .and_then(|&(_, p)| p),
            ActionKind::Accept => None,
        };
        if let Some(p) = p {
            sum = sum + p;
        }
    }
    sum
}

/// Convenience for tests and the CLI: tokenize-free pscore of a gold tree.
pub fn tree_log10_pscore<S: Score>(
    table: &ParseTable<S>,
    words: &[String],
    fragments: &[Tree],
) -> Result<S, TraceError> {
    let trace = derive_action_sequence(table, words, fragments)?;
    Ok(trace_log10_pscore(table, &trace))
}

/// Tokens for a plain word sequence (no substitutions), as training uses.
pub fn words_to_tokens(grammar: &Grammar, words: &[String]) -> Vec<Token> {
    grammar.tokenize(words)
}
