//! The generalized-LR parse loop: reduce/shift frontiers over the GSS.
//!
//! One engine serves both the baseline parser and the robust variant; the
//! config decides whether shifts may originate from inactive state nodes
//! (skipping) and whether substitution readings branch. Reduces run before
//! shifts on every frontier, and because the table is LR(0) a reduce fired
//! earlier stays valid no matter which words a later shift skips.
//!
//! Within a frontier, reduces are driven by a worklist deduplicated on
//! (node, rule, required-link). When a link lands on a node that was
//! already processed, items restricted to paths through that link are
//! re-enqueued for every node on the frontier; a reduce path is fully
//! explored no later than the item for its last-added link.

use std::collections::{HashSet, VecDeque};

use crate::grammar::{Grammar, Token};
use crate::gss::{Forest, Gss, Link, NodeId, PackedAlternative, StateNodeId, to_dot};
use crate::num::Score;
use crate::robust::{expand_substitutions, select_skip_origins, BeamConfig, Reading};
use crate::table::{ParseTable, StateId};

#[derive(Clone, Debug, PartialEq)]
pub struct ParseConfig {
    pub skipping: bool,
    pub substitutions: bool,
    pub beam: BeamConfig,
    pub n_best: usize,
    pub record_dot: bool,
}

impl ParseConfig {
    /// Plain GLR: no skipping, no substitutions.
    pub fn baseline() -> Self {
        ParseConfig {
            skipping: false,
            substitutions: false,
            beam: BeamConfig::disabled(),
            n_best: 1,
            record_dot: false,
        }
    }

    /// Word skipping and substitution branching with the default beam.
    pub fn robust() -> Self {
        ParseConfig {
            skipping: true,
            substitutions: true,
            beam: BeamConfig::default(),
            n_best: 1,
            record_dot: false,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum ParseStatus {
    Accepted,
    Rejected,
}

/// A completed analysis: the fragment-sequence forest node plus the range
/// of trailing positions the parse never consumed.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct AcceptRoot {
    pub node: NodeId,
    pub frontier: u32,
    /// Half-open range [frontier, input_len) skipped after the last shift.
    pub trailing_skipped: (u32, u32),
}

impl AcceptRoot {
    pub fn trailing_len(&self) -> u32 {
        self.trailing_skipped.1 - self.trailing_skipped.0
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct FrontierDiag {
    pub frontier: u32,
    pub state_nodes: usize,
    pub symbol_nodes: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Diagnostics {
    pub frontiers: Vec<FrontierDiag>,
}

#[derive(Debug)]
pub struct ParseOutcome<S: Score = f64> {
    pub status: ParseStatus,
    pub roots: Vec<AcceptRoot>,
    pub forest: Forest<S>,
    pub input_len: u32,
    pub diagnostics: Diagnostics,
    pub dot: Option<String>,
}

impl<S: Score> ParseOutcome<S> {
    pub fn accepted(&self) -> bool {
        self.status == ParseStatus::Accepted
    }

    /// Fewest skipped positions over all accept roots, trailing included.
    pub fn min_skips(&self) -> Option<u32> {
        self.roots
            .iter()
            .map(|r| self.forest.node(r.node).min_skips + r.trailing_len())
            .min()
    }
}

/// Plain GLR parse: a sentence outside the grammar's language is rejected.
pub fn parse<S: Score>(table: &ParseTable<S>, tokens: &[Token]) -> ParseOutcome<S> {
    parse_with(table, tokens, &ParseConfig::baseline())
}

pub fn accepts<S: Score>(table: &ParseTable<S>, tokens: &[Token]) -> bool {
    parse(table, tokens).accepted()
}

pub fn parse_with<S: Score>(
    table: &ParseTable<S>,
    tokens: &[Token],
    config: &ParseConfig,
) -> ParseOutcome<S> {
    Session::new(table, tokens, config).run()
}

type ReduceItem = (StateNodeId, crate::grammar::RuleId, Option<(StateNodeId, Link)>);

struct Session<'a, S: Score> {
    table: &'a ParseTable<S>,
    grammar: &'a Grammar,
    tokens: &'a [Token],
    config: &'a ParseConfig,
    gss: Gss,
    forest: Forest<S>,
    created: Vec<NodeId>,
    queue: VecDeque<ReduceItem>,
    seen: HashSet<ReduceItem>,
    diagnostics: Diagnostics,
}

impl<'a, S: Score> Session<'a, S> {
    fn new(table: &'a ParseTable<S>, tokens: &'a [Token], config: &'a ParseConfig) -> Self {
        Session {
            table,
            grammar: table.grammar(),
            tokens,
            config,
            gss: Gss::new(),
            forest: Forest::new(),
            created: Vec::new(),
            queue: VecDeque::new(),
            seen: HashSet::new(),
            diagnostics: Diagnostics::default(),
        }
    }

    fn run(mut self) -> ParseOutcome<S> {
        let n = self.tokens.len() as u32;
        self.gss.state_node(StateId(0), 0);
        let mut prev_forest_len = 0;
        for k in 0..=n {
            self.reduce_phase(k);
            let created = std::mem::take(&mut self.created);
            self.forest.finalize_frontier(&created);
            self.gss.finalize_frontier_paths(k, &self.forest);
            self.diagnostics.frontiers.push(FrontierDiag {
                frontier: k,
                state_nodes: self.gss.frontier_nodes(k).len(),
                symbol_nodes: self.forest.len() - prev_forest_len,
            });
            prev_forest_len = self.forest.len();
            if k < n {
                self.shift_phase(k);
            }
        }
        let roots = self.collect_accepts(n);
        let dot = self
            .config
            .record_dot
            .then(|| to_dot(&self.gss, &self.forest, self.grammar));
        ParseOutcome {
            status: if roots.is_empty() { ParseStatus::Rejected } else { ParseStatus::Accepted },
            roots,
            forest: self.forest,
            input_len: n,
            diagnostics: self.diagnostics,
            dot,
        }
    }

    fn enqueue_node_reduces(&mut self, v: StateNodeId) {
        let state = self.gss.node(v).state;
        for &(rule, _) in self.table.reduces(state) {
            let item = (v, rule, None);
            if self.seen.insert(item) {
                self.queue.push_back(item);
            }
        }
    }

    fn reduce_phase(&mut self, k: u32) {
        self.queue.clear();
        self.seen.clear();
        for v in self.gss.frontier_nodes(k).to_vec() {
            self.enqueue_node_reduces(v);
        }
        while let Some((v, rule, required)) = self.queue.pop_front() {
            self.process_reduce(k, v, rule, required);
        }
    }

    fn process_reduce(
        &mut self,
        k: u32,
        v: StateNodeId,
        rule: crate::grammar::RuleId,
        required: Option<(StateNodeId, Link)>,
    ) {
        let rhs_len = self.grammar.rule(rule).rhs.len();
        let lhs = self.grammar.rule(rule).lhs;
        let reduce_state = self.gss.node(v).state;
        let local_log_prob = self
            .table
            .reduces(reduce_state)
            .iter()
            .find(|&&(r, _)| r == rule)
            .and_then(|&(_, p)| p);

        let paths = self.enumerate_paths(v, rhs_len, required);
        for (children, v0) in paths {
            let left_state = self.gss.node(v0).state;
            let span = (self.gss.node(v0).frontier, k);
            let mut skipped_count: u32 = 0;
            for &c in &children {
                skipped_count = skipped_count.saturating_add(self.forest.node(c).min_skips);
            }
            let (node, node_created) = self.forest.nonterminal(lhs, span, left_state);
            if node_created {
                self.created.push(node);
            }
            self.forest.merge_alternative(
                node,
                PackedAlternative { rule, children, local_log_prob, skipped_count },
            );
            let Some(goto) = self.table.goto(left_state, lhs) else {
                continue;
            };
            let (w, w_created) = self.gss.state_node(goto, k);
            if w_created {
                self.enqueue_node_reduces(w);
            }
            let link = Link { sym: node, target: v0 };
            if self.gss.add_link(w, link) {
                // A reduce path through this link can start at any node on
                // the frontier (same-span links chain before it).
                for x in self.gss.frontier_nodes(k).to_vec() {
                    let state = self.gss.node(x).state;
                    for &(r, _) in self.table.reduces(state) {
                        let item = (x, r, Some((w, link)));
                        if self.seen.insert(item) {
                            self.queue.push_back(item);
                        }
                    }
                }
            }
        }
    }

    /// All reverse paths of the given length from `v`, as (children in
    /// left-to-right order, path-end node). With a required link, only
    /// paths traversing it from its owner count.
    fn enumerate_paths(
        &self,
        v: StateNodeId,
        len: usize,
        required: Option<(StateNodeId, Link)>,
    ) -> Vec<(Vec<NodeId>, StateNodeId)> {
        let mut out = Vec::new();
        let mut labels = Vec::with_capacity(len);
        self.path_dfs(v, len, required, required.is_none(), &mut labels, &mut out);
        out
    }

    fn path_dfs(
        &self,
        cur: StateNodeId,
        remaining: usize,
        required: Option<(StateNodeId, Link)>,
        satisfied: bool,
        labels: &mut Vec<NodeId>,
        out: &mut Vec<(Vec<NodeId>, StateNodeId)>,
    ) {
        if remaining == 0 {
            if satisfied {
                out.push((labels.iter().rev().copied().collect(), cur));
            }
            return;
        }
        for link in &self.gss.node(cur).links {
            let sat = satisfied || required == Some((cur, *link));
            labels.push(link.sym);
            self.path_dfs(link.target, remaining - 1, required, sat, labels, out);
            labels.pop();
        }
    }

    fn shift_phase(&mut self, k: u32) {
        let token = &self.tokens[k as usize];
        let readings: Vec<Reading> = if self.config.substitutions {
            expand_substitutions(token)
        } else {
            token
                .terms
                .iter()
                .map(|&t| Reading { term: t, surface: token.surface.clone(), substituted: false })
                .collect()
        };
        if readings.is_empty() && !self.config.skipping {
            return;
        }

        let active = self.gss.frontier_nodes(k).to_vec();
        let mut origins = active.clone();
        if self.config.skipping {
            let inactive = self.gss.nodes_before(k);
            let current_best = active
                .iter()
                .map(|&v| self.gss.node(v).min_path_skips)
                .min()
                .or_else(|| inactive.iter().map(|&v| self.gss.node(v).min_path_skips).min())
                .unwrap_or(0);
            origins.extend(select_skip_origins(
                &self.gss,
                &inactive,
                current_best,
                &self.config.beam,
            ));
        }

        for &origin in &origins {
            let origin_state = self.gss.node(origin).state;
            let origin_frontier = self.gss.node(origin).frontier;
            for reading in &readings {
                if let Some((target, prob)) = self.table.shift_on(origin_state, reading.term) {
                    let tnode = self.forest.terminal(
                        reading.term,
                        (origin_frontier, k + 1),
                        origin_state,
                        &reading.surface,
                        reading.substituted,
                        prob,
                    );
                    let (w, _) = self.gss.state_node(target, k + 1);
                    self.gss.add_link(w, Link { sym: tnode, target: origin });
                }
            }
        }
    }

    /// Accept roots; with skipping on, earlier frontiers accept too and the
    /// positions after them count as trailing skips.
    fn collect_accepts(&self, n: u32) -> Vec<AcceptRoot> {
        let mut roots = Vec::new();
        let frontiers: Vec<u32> =
            if self.config.skipping { (0..=n).collect() } else { vec![n] };
        for f in frontiers {
            for &w in self.gss.frontier_nodes(f) {
                if !self.table.accepts_at(self.gss.node(w).state) {
                    continue;
                }
                for link in &self.gss.node(w).links {
                    let root = AcceptRoot {
                        node: link.sym,
                        frontier: f,
                        trailing_skipped: (f, n),
                    };
                    if !roots.contains(&root) {
                        roots.push(root);
                    }
                }
            }
        }
        roots
    }
}
