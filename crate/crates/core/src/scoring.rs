//! Penalty scoring and best-parse extraction from the packed forest.
//!
//! Each candidate analysis is charged four penalties: per-word skip costs
//! (later skips cost more), substitution costs, fragmentation costs, and a
//! statistical cost converted from the derivation's action probabilities.
//! The combination is linear, so every penalty decomposes over the forest
//! and the best candidates fall out of dynamic programming without
//! unpacking the whole forest.
//!
//! Ranking never compares floats. Every penalty contribution is quantized
//! to integer atoms (1e-9 resolution, per-atom cap 1e6) and summed in
//! `i64`, which keeps comparisons exact and associative no matter how the
//! DP associates partial sums. Ties proceed through a fixed chain: fewer
//! skipped words, fewer fragments, higher derivation probability, then a
//! structural derivation code that fixes a stable order. Reported float
//! breakdowns are computed once per winning candidate in one canonical
//! order (skip positions ascending; children left to right, then the
//! local action; skip + sub + frag + stat), so equal derivations print
//! equal scores.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::grammar::Grammar;
use crate::gss::{Forest, NodeId, NodeKind};
use crate::num::Score;
use crate::parser::ParseOutcome;
use crate::tree::Tree;

/// Linear-combination weights for the four penalty features.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, bound = "")]
pub struct FeatureWeights<S: Score = f64> {
    /// Penalty per substituted word.
    pub w_sub: S,
    /// Penalty per fragment in the analysis.
    pub w_frag: S,
    /// Multiplier on -log10(pscore).
    pub w_stat: S,
    /// Skip penalty for the first word of the sentence.
    pub skip_lo: S,
    /// Skip penalty for the last word of the sentence.
    pub skip_hi: S,
}

impl<S: Score> Default for FeatureWeights<S> {
    fn default() -> Self {
        Self {
            w_sub: S::from_f64_lossy(0.9),
            w_frag: S::from_f64_lossy(1.1),
            w_stat: S::from_f64_lossy(0.1),
            skip_lo: S::from_f64_lossy(0.95),
            skip_hi: S::from_f64_lossy(1.05),
        }
    }
}

/// What the extraction optimizes first.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RankingMode {
    /// Combined penalty, then the tie chain.
    Full,
    /// Skipped-word count, then combined penalty, then the tie chain.
    SkipOnly,
}

/// Per-feature penalties of one candidate, plus the raw counts behind them.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(bound = "")]
pub struct PenaltyBreakdown<S: Score = f64> {
    pub skip_penalty: S,
    pub sub_penalty: S,
    pub frag_penalty: S,
    pub stat_penalty: S,
    pub combined: S,
    pub skipped_positions: BTreeSet<u32>,
    pub sub_count: u32,
    pub fragment_count: u32,
    pub log10_pscore: S,
}

/// One extracted analysis: its fragment trees and its scores.
#[derive(Clone, Debug, PartialEq)]
pub struct ParseCandidate<S: Score = f64> {
    /// One tree per fragment, left to right. Grammatical inputs get one.
    pub fragments: Vec<Tree>,
    pub breakdown: PenaltyBreakdown<S>,
}

impl<S: Score> ParseCandidate<S> {
    /// The single tree of an unfragmented analysis.
    pub fn tree(&self) -> Option<&Tree> {
        match self.fragments.as_slice() {
            [t] => Some(t),
            _ => None,
        }
    }
}

/// Per-position skip penalty: linear from `skip_lo` at the first word to
/// `skip_hi` at the last. Evaluated as lo*(1-t) + hi*t so both endpoints
/// reproduce the configured bounds bit for bit.
pub fn position_penalty<S: Score>(i: u32, n: u32, w: &FeatureWeights<S>) -> S {
    if n <= 1 {
        return w.skip_lo;
    }
    let t = S::from_f64_lossy(i as f64) / S::from_f64_lossy((n - 1) as f64);
    w.skip_lo * (S::one() - t) + w.skip_hi * t
}

/// Total skip penalty over a set of skipped positions, summed in ascending
/// position order.
pub fn skip_penalty<S: Score>(positions: &BTreeSet<u32>, n: u32, w: &FeatureWeights<S>) -> S {
    let mut sum = S::zero();
    for &i in positions {
        sum = sum + position_penalty(i, n, w);
    }
    sum
}

/// Statistical penalty: w_stat * (-log10 pscore).
pub fn stat_penalty<S: Score>(log10_pscore: S, w: &FeatureWeights<S>) -> S {
    w.w_stat * (S::zero() - log10_pscore)
}

/// Assemble the full breakdown for one candidate's raw counts.
pub fn combine<S: Score>(
    skipped: &BTreeSet<u32>,
    sub_count: u32,
    fragment_count: u32,
    log10_pscore: S,
    n: u32,
    w: &FeatureWeights<S>,
) -> PenaltyBreakdown<S> {
    let skip = skip_penalty(skipped, n, w);
    let sub = w.w_sub * S::from_f64_lossy(sub_count as f64);
    let frag = w.w_frag * S::from_f64_lossy(fragment_count as f64);
    let stat = stat_penalty(log10_pscore, w);
    PenaltyBreakdown {
        skip_penalty: skip,
        sub_penalty: sub,
        frag_penalty: frag,
        stat_penalty: stat,
        combined: ((skip + sub) + frag) + stat,
        skipped_positions: skipped.clone(),
        sub_count,
        fragment_count,
        log10_pscore,
    }
}

// Penalty contributions become integers at this resolution; each single
// atom is capped so that even -log10(0) = inf cannot overflow a sum.
const ATOM_SCALE: f64 = 1e9;
const ATOM_CAP: f64 = 1e6;

fn atom(x: f64) -> i64 {
    (x.max(0.0).min(ATOM_CAP) * ATOM_SCALE).round() as i64
}

/// Additive exact cost of a partial derivation. `punits` repeats the
/// statistics-free part of `units` so the skip-first mode can stay blind
/// to trained probabilities.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Cost {
    units: i64,
    punits: i64,
    skips: u32,
    frags: u32,
    llpunits: i64,
}

impl Cost {
    fn add(&self, other: &Cost) -> Cost {
        Cost {
            units: self.units.saturating_add(other.units),
            punits: self.punits.saturating_add(other.punits),
            skips: self.skips.saturating_add(other.skips),
            frags: self.frags.saturating_add(other.frags),
            llpunits: self.llpunits.saturating_add(other.llpunits),
        }
    }
}

/// Total ranking order: mode-rotated cost components, then the structural
/// derivation code.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct RankKey {
    major: [i64; 4],
    sig: Vec<u32>,
}

fn make_key(mode: RankingMode, cost: &Cost, sig: Vec<u32>) -> RankKey {
    let major = match mode {
        RankingMode::Full => [cost.units, cost.skips as i64, cost.frags as i64, cost.llpunits],
        // The simple heuristic never consults statistics: skip count,
        // then the probability-free penalties, then derivation order.
        RankingMode::SkipOnly => [cost.skips as i64, cost.punits, cost.frags as i64, 0],
    };
    RankKey { major, sig }
}

/// One ranked derivation of a forest node: its key, exact cost, and the
/// backpointer (alternative index plus per-child ranks) to rebuild it.
///
/// Order and equality go by key alone; within one node, distinct
/// derivations always carry distinct derivation codes, so this is total.
#[derive(Clone, Debug)]
struct Entry {
    key: RankKey,
    cost: Cost,
    alt: u32,
    ranks: Vec<u32>,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.key.cmp(&other.key)
    }
}

#[derive(Debug, Default)]
struct NodeList {
    entries: Vec<Entry>,
    heap: BinaryHeap<Reverse<Entry>>,
    seen: HashSet<(u32, Vec<u32>)>,
    initialized: bool,
    exhausted: bool,
    tainted: bool,
}

struct Extractor<'a, S: Score> {
    forest: &'a Forest<S>,
    grammar: &'a Grammar,
    weights: &'a FeatureWeights<S>,
    n: u32,
    mode: RankingMode,
    memo: HashMap<NodeId, NodeList>,
    in_progress: HashSet<NodeId>,
}

impl<'a, S: Score> Extractor<'a, S> {
    fn new(
        forest: &'a Forest<S>,
        grammar: &'a Grammar,
        weights: &'a FeatureWeights<S>,
        n: u32,
        mode: RankingMode,
    ) -> Self {
        Self {
            forest,
            grammar,
            weights,
            n,
            mode,
            memo: HashMap::new(),
            in_progress: HashSet::new(),
        }
    }

    fn skip_atoms(&self, lo: u32, hi: u32) -> i64 {
        let mut sum = 0i64;
        for i in lo..hi {
            sum = sum
                .saturating_add(atom(position_penalty(i, self.n, self.weights).to_f64_lossy()));
        }
        sum
    }

    fn action_atoms(&self, log_prob: Option<S>) -> (i64, i64) {
        match log_prob {
            None => (0, 0),
            Some(lp) => {
                let neg = 0.0 - lp.to_f64_lossy();
                (atom(self.weights.w_stat.to_f64_lossy() * neg), atom(neg))
            }
        }
    }

    /// Fixed cost a packed alternative adds on top of its children.
    fn alt_base(&self, node: NodeId, alt_idx: usize) -> Cost {
        let alt = &self.forest.alternatives(node)[alt_idx];
        let internal = self
            .grammar
            .internal_symbols()
            .expect("extraction runs on augmented grammars");
        let is_frag = self.grammar.rule(alt.rule).lhs == internal.frag;
        let (stat, llp) = self.action_atoms(alt.local_log_prob);
        let frag_units = if is_frag { atom(self.weights.w_frag.to_f64_lossy()) } else { 0 };
        Cost {
            units: stat.saturating_add(frag_units),
            punits: frag_units,
            skips: 0,
            frags: is_frag as u32,
            llpunits: llp,
        }
    }

    fn terminal_entry(&self, node: NodeId) -> Entry {
        let sn = self.forest.node(node);
        let NodeKind::Terminal { substituted, log_prob, .. } = &sn.kind else {
            unreachable!("terminal_entry on a nonterminal node")
        };
        let (substituted, log_prob) = (*substituted, *log_prob);
        let (stat, llp) = self.action_atoms(log_prob);
        let mut punits = self.skip_atoms(sn.span.0, sn.span.1.saturating_sub(1));
        if substituted {
            punits = punits.saturating_add(atom(self.weights.w_sub.to_f64_lossy()));
        }
        let cost = Cost {
            units: punits.saturating_add(stat),
            punits,
            skips: sn.span.1.saturating_sub(1).saturating_sub(sn.span.0),
            frags: 0,
            llpunits: llp,
        };
        Entry { key: make_key(self.mode, &cost, Vec::new()), cost, alt: 0, ranks: Vec::new() }
    }

    /// Build the config for (alternative, child ranks); None when some
    /// child has no derivation at its rank. The taint flag reports that a
    /// cyclic revisit limited what this config could see.
    fn build_config(&mut self, node: NodeId, alt_idx: u32, ranks: &[u32]) -> (Option<Entry>, bool) {
        let children = self.forest.alternatives(node)[alt_idx as usize].children.clone();
        let mut cost = self.alt_base(node, alt_idx as usize);
        let mut sig = vec![alt_idx];
        let mut tainted = false;
        for (i, &child) in children.iter().enumerate() {
            let (entry, t) = self.entry_at(child, ranks[i] as usize);
            tainted |= t;
            let Some(e) = entry else { return (None, tainted) };
            cost = cost.add(&e.cost);
            sig.extend_from_slice(&e.key.sig);
        }
        let key = make_key(self.mode, &cost, sig);
        (Some(Entry { key, cost, alt: alt_idx, ranks: ranks.to_vec() }), tainted)
    }

    /// The rank-th cheapest derivation of a node (ascending, lazily
    /// extended). Cycles cannot contribute finite derivations along the
    /// path that closes them, so a revisit of an in-progress node yields
    /// nothing; results computed under such a revisit are not memoized.
    fn entry_at(&mut self, node: NodeId, rank: usize) -> (Option<Entry>, bool) {
        if self.in_progress.contains(&node) {
            return (None, true);
        }
        if let Some(list) = self.memo.get(&node) {
            if rank < list.entries.len() {
                return (Some(list.entries[rank].clone()), false);
            }
            if list.exhausted {
                return (None, false);
            }
        }
        self.in_progress.insert(node);
        let mut list = self.memo.remove(&node).unwrap_or_default();
        if !list.initialized {
            list.initialized = true;
            match &self.forest.node(node).kind {
                NodeKind::Terminal { .. } => {
                    list.entries.push(self.terminal_entry(node));
                    list.exhausted = true;
                }
                NodeKind::Nonterminal { alternatives } => {
                    for alt_idx in 0..alternatives.len() as u32 {
                        let arity =
                            self.forest.alternatives(node)[alt_idx as usize].children.len();
                        let ranks = vec![0u32; arity];
                        let (cfg, t) = self.build_config(node, alt_idx, &ranks);
                        list.tainted |= t;
                        if let Some(cfg) = cfg {
                            list.seen.insert((alt_idx, ranks));
                            list.heap.push(Reverse(cfg));
                        }
                    }
                }
            }
        }
        while list.entries.len() <= rank {
            let Some(Reverse(best)) = list.heap.pop() else {
                list.exhausted = true;
                break;
            };
            for i in 0..best.ranks.len() {
                let mut next = best.ranks.clone();
                next[i] += 1;
                if list.seen.contains(&(best.alt, next.clone())) {
                    continue;
                }
                let (cfg, t) = self.build_config(node, best.alt, &next);
                list.tainted |= t;
                if let Some(cfg) = cfg {
                    list.seen.insert((best.alt, next));
                    list.heap.push(Reverse(cfg));
                }
            }
            list.entries.push(best);
        }
        self.in_progress.remove(&node);
        let out = if rank < list.entries.len() {
            Some(list.entries[rank].clone())
        } else {
            None
        };
        let tainted = list.tainted;
        if !tainted {
            self.memo.insert(node, list);
        }
        (out, tainted)
    }

    /// Rebuild the derivation behind an entry: fragment trees plus the raw
    /// counts the float breakdown is computed from.
    fn materialize(&mut self, node: NodeId, rank: usize, acc: &mut Materialized<S>) {
        let entry = self
            .entry_at(node, rank)
            .0
            .expect("materializing a rank that ranked");
        let sn = self.forest.node(node);
        if let NodeKind::Terminal { term, surface, substituted, log_prob } = &sn.kind {
            for i in sn.span.0..sn.span.1.saturating_sub(1) {
                acc.skipped.insert(i);
            }
            acc.sub_count += *substituted as u32;
            if let Some(lp) = log_prob {
                acc.llp = acc.llp + *lp;
            }
            acc.trees.push(Tree::Leaf {
                term: self.grammar.term_name(*term).to_string(),
                surface: surface.clone(),
            });
            return;
        }
        let alt = self.forest.alternatives(node)[entry.alt as usize].clone();
        let mut children_trees = Vec::new();
        for (i, &child) in alt.children.iter().enumerate() {
            let before = acc.trees.len();
            self.materialize(child, entry.ranks[i] as usize, acc);
            children_trees.extend(acc.trees.drain(before..));
        }
        if let Some(lp) = alt.local_log_prob {
            acc.llp = acc.llp + lp;
        }
        let internal = self.grammar.internal_symbols().unwrap();
        let lhs = self.grammar.rule(alt.rule).lhs;
        if lhs == internal.frags {
            // Spine node: children are fragments already.
            acc.trees.extend(children_trees);
        } else if lhs == internal.frag {
            acc.fragment_count += 1;
            acc.trees.extend(children_trees);
        } else {
            acc.trees.push(Tree::Node {
                label: self.grammar.nt_name(lhs).to_string(),
                children: children_trees,
            });
        }
    }
}

#[derive(Debug)]
struct Materialized<S: Score> {
    trees: Vec<Tree>,
    skipped: BTreeSet<u32>,
    sub_count: u32,
    fragment_count: u32,
    llp: S,
}

impl<S: Score> Materialized<S> {
    fn new() -> Self {
        Self {
            trees: Vec::new(),
            skipped: BTreeSet::new(),
            sub_count: 0,
            fragment_count: 0,
            llp: S::zero(),
        }
    }
}

/// Extract the `n_best` cheapest candidates across all accept roots,
/// ascending. Later-rank candidates of `n_best=k+1` extend the `k` list
/// without reordering it.
pub fn best_candidates<S: Score>(
    outcome: &ParseOutcome<S>,
    grammar: &Grammar,
    weights: &FeatureWeights<S>,
    n_best: usize,
    mode: RankingMode,
) -> Vec<ParseCandidate<S>> {
    assert!(n_best >= 1, "n_best is 1-based");
    let n = outcome.input_len as u32;
    let mut ex = Extractor::new(&outcome.forest, grammar, weights, n, mode);

    // Rank across roots: each root's stream is ascending, so the global
    // n-best live in the union of per-root prefixes. Trailing skipped
    // words are charged at the root.
    let mut ranked: Vec<(RankKey, usize, usize)> = Vec::new();
    for (root_idx, root) in outcome.roots.iter().enumerate() {
        let trail_units = ex.skip_atoms(root.trailing_skipped.0, root.trailing_skipped.1);
        let trailing = Cost {
            units: trail_units,
            punits: trail_units,
            skips: root.trailing_skipped.1 - root.trailing_skipped.0,
            frags: 0,
            llpunits: 0,
        };
        for rank in 0..n_best {
            let (entry, _) = ex.entry_at(root.node, rank);
            let Some(entry) = entry else { break };
            let key = make_key(mode, &entry.cost.add(&trailing), entry.key.sig.clone());
            ranked.push((key, root_idx, rank));
        }
    }
    ranked.sort_by(|a, b| (&a.0, a.1).cmp(&(&b.0, b.1)));
    ranked.truncate(n_best);

    ranked
        .into_iter()
        .map(|(_, root_idx, rank)| {
            let root = &outcome.roots[root_idx];
            let mut acc = Materialized::new();
            ex.materialize(root.node, rank, &mut acc);
            for i in root.trailing_skipped.0..root.trailing_skipped.1 {
                acc.skipped.insert(i);
            }
            let breakdown =
                combine(&acc.skipped, acc.sub_count, acc.fragment_count, acc.llp, n, weights);
            ParseCandidate { fragments: acc.trees, breakdown }
        })
        .collect()
}

/// One exhaustively unpacked analysis, with enough detail to re-rank it
/// independently of the dynamic program.
#[derive(Clone, Debug)]
pub struct UnpackedParse<S: Score = f64> {
    pub fragments: Vec<Tree>,
    pub breakdown: PenaltyBreakdown<S>,
    pub root_index: usize,
    key: RankKey,
    cost: Cost,
}

impl<S: Score> UnpackedParse<S> {
    /// The documented ranking order, recomputed from this analysis alone.
    pub fn rank_key(&self, mode: RankingMode) -> RankKey {
        make_key(mode, &self.cost, self.key.sig.clone())
    }
}

/// Unpack every analysis of every accept root, up to `limit` per root.
/// Enumeration is structural (alternative order, then child order), not
/// score order. Use [`count_trees`] first to see whether `limit` truncates.
pub fn unpack_all<S: Score>(
    outcome: &ParseOutcome<S>,
    grammar: &Grammar,
    weights: &FeatureWeights<S>,
    limit: usize,
) -> Vec<UnpackedParse<S>> {
    let n = outcome.input_len as u32;
    let ex = Extractor::new(&outcome.forest, grammar, weights, n, RankingMode::Full);
    let mut out = Vec::new();
    for (root_idx, root) in outcome.roots.iter().enumerate() {
        let mut guard = HashSet::new();
        let derivs = unpack_node(&ex, root.node, limit, &mut guard);
        let trail_units = ex.skip_atoms(root.trailing_skipped.0, root.trailing_skipped.1);
        let trailing = Cost {
            units: trail_units,
            punits: trail_units,
            skips: root.trailing_skipped.1 - root.trailing_skipped.0,
            frags: 0,
            llpunits: 0,
        };
        for d in derivs {
            let mut skipped = d.skipped;
            for i in root.trailing_skipped.0..root.trailing_skipped.1 {
                skipped.insert(i);
            }
            let cost = d.cost.add(&trailing);
            let breakdown = combine(&skipped, d.sub_count, d.fragment_count, d.llp, n, weights);
            out.push(UnpackedParse {
                fragments: d.trees,
                breakdown,
                root_index: root_idx,
                key: make_key(RankingMode::Full, &cost, d.sig.clone()),
                cost,
            });
        }
    }
    out
}

struct Deriv<S: Score> {
    trees: Vec<Tree>,
    skipped: BTreeSet<u32>,
    sub_count: u32,
    fragment_count: u32,
    llp: S,
    cost: Cost,
    sig: Vec<u32>,
}

fn unpack_node<S: Score>(
    ex: &Extractor<'_, S>,
    node: NodeId,
    limit: usize,
    guard: &mut HashSet<NodeId>,
) -> Vec<Deriv<S>> {
    if !guard.insert(node) {
        return Vec::new();
    }
    let sn = ex.forest.node(node);
    let mut out: Vec<Deriv<S>> = Vec::new();
    match &sn.kind {
        NodeKind::Terminal { term, surface, substituted, log_prob } => {
            let entry = ex.terminal_entry(node);
            out.push(Deriv {
                trees: vec![Tree::Leaf {
                    term: ex.grammar.term_name(*term).to_string(),
                    surface: surface.clone(),
                }],
                skipped: (sn.span.0..sn.span.1.saturating_sub(1)).collect(),
                sub_count: *substituted as u32,
                fragment_count: 0,
                llp: log_prob.unwrap_or_else(S::zero),
                cost: entry.cost,
                sig: Vec::new(),
            });
        }
        NodeKind::Nonterminal { alternatives } => {
            let internal = ex.grammar.internal_symbols().unwrap();
            for (alt_idx, alt) in alternatives.iter().enumerate() {
                let base = ex.alt_base(node, alt_idx);
                let lhs = ex.grammar.rule(alt.rule).lhs;
                // Cross product over child derivations.
                let mut partial: Vec<Deriv<S>> = vec![Deriv {
                    trees: Vec::new(),
                    skipped: BTreeSet::new(),
                    sub_count: 0,
                    fragment_count: base.frags,
                    llp: S::zero(),
                    cost: base,
                    sig: vec![alt_idx as u32],
                }];
                for &child in &alt.children {
                    let child_derivs = unpack_node(ex, child, limit, guard);
                    let mut next = Vec::new();
                    'outer: for p in &partial {
                        for c in &child_derivs {
                            let mut trees = p.trees.clone();
                            trees.extend(c.trees.iter().cloned());
                            let mut skipped = p.skipped.clone();
                            skipped.extend(c.skipped.iter().copied());
                            let mut sig = p.sig.clone();
                            sig.extend_from_slice(&c.sig);
                            next.push(Deriv {
                                trees,
                                skipped,
                                sub_count: p.sub_count + c.sub_count,
                                fragment_count: p.fragment_count + c.fragment_count,
                                llp: p.llp + c.llp,
                                cost: p.cost.add(&c.cost),
                                sig,
                            });
                            if next.len() >= limit {
                                break 'outer;
                            }
                        }
                    }
                    partial = next;
                }
                // The local action applies after the children, matching
                // the canonical summation order.
                for mut d in partial {
                    if let Some(lp) = alt.local_log_prob {
                        d.llp = d.llp + lp;
                    }
                    if lhs == internal.frag || lhs == internal.frags {
                        // Spine nodes pass fragments through unchanged.
                    } else {
                        d.trees = vec![Tree::Node {
                            label: ex.grammar.nt_name(lhs).to_string(),
                            children: d.trees,
                        }];
                    }
                    out.push(d);
                    if out.len() >= limit {
                        break;
                    }
                }
                if out.len() >= limit {
                    break;
                }
            }
        }
    }
    guard.remove(&node);
    out.truncate(limit);
    out
}

/// Count the distinct analyses under every accept root. Saturates at
/// `u64::MAX`; derivations that would revisit a node inside itself are
/// not counted.
pub fn count_trees<S: Score>(outcome: &ParseOutcome<S>) -> u64 {
    let mut memo: HashMap<NodeId, u64> = HashMap::new();
    let mut guard: HashSet<NodeId> = HashSet::new();
    let mut total = 0u64;
    for root in &outcome.roots {
        total = total.saturating_add(count_node(&outcome.forest, root.node, &mut memo, &mut guard));
    }
    total
}

fn count_node<S: Score>(
    forest: &Forest<S>,
    node: NodeId,
    memo: &mut HashMap<NodeId, u64>,
    guard: &mut HashSet<NodeId>,
) -> u64 {
    if let Some(&c) = memo.get(&node) {
        return c;
    }
    if !guard.insert(node) {
        return 0;
    }
    let count = match &forest.node(node).kind {
        NodeKind::Terminal { .. } => 1,
        NodeKind::Nonterminal { alternatives } => {
            let mut sum = 0u64;
            for alt in alternatives {
                let mut prod = 1u64;
                for &child in &alt.children {
                    prod = prod.saturating_mul(count_node(forest, child, memo, guard));
                }
                sum = sum.saturating_add(prod);
            }
            sum
        }
    };
    guard.remove(&node);
    memo.insert(node, count);
    count
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{load_grammar, Grammar, G1_TEXT, G2_TEXT};
    use crate::parser::{parse_with, ParseConfig};
    use crate::robust::parse_robust;
    use crate::stats::{derive_action_sequence, train, ActionCounts};
    use crate::table::{build_table, ParseTable};
    use crate::tree::{fragments_to_sexpr, parse_forest};

    fn w() -> FeatureWeights {
        FeatureWeights::default()
    }

    fn setup(text: &str) -> (Grammar, ParseTable) {
        let g = load_grammar(text).unwrap().grammar.augment();
        let t = build_table(&g).unwrap();
        (g, t)
    }

    fn toks(g: &Grammar, s: &str) -> Vec<crate::grammar::Token> {
        let words: Vec<String> = s.split_whitespace().map(str::to_string).collect();
        g.tokenize(&words)
    }

    fn set(xs: &[u32]) -> BTreeSet<u32> {
        xs.iter().copied().collect()
    }

    #[test]
    fn skip_penalty_hits_the_configured_endpoints_exactly() {
        assert_eq!(skip_penalty(&set(&[0]), 5, &w()), 0.95);
        assert_eq!(skip_penalty(&set(&[4]), 5, &w()), 1.05);
        assert_eq!(skip_penalty(&set(&[2]), 5, &w()), 1.00);
        assert_eq!(skip_penalty(&set(&[0, 4]), 5, &w()), 2.00);
        assert_eq!(skip_penalty(&set(&[0]), 1, &w()), 0.95);
    }

    #[test]
    fn later_skips_cost_more() {
        let n = 9;
        let pens: Vec<f64> = (0..n).map(|i| position_penalty(i, n, &w())).collect();
        assert!(pens.windows(2).all(|p| p[0] < p[1]), "{pens:?}");
    }

    #[test]
    fn stat_penalty_matches_the_published_formula_bit_for_bit() {
        for k in 0..=3u32 {
            let pscore = 10f64.powi(-(k as i32));
            let got = stat_penalty(pscore.log10(), &w());
            assert_eq!(got, 0.1 * k as f64, "k = {k}");
        }
        assert_eq!(stat_penalty(0.0, &w()), 0.0);
        assert!(stat_penalty(f64::NEG_INFINITY, &w()).is_infinite());
    }

    #[test]
    fn combine_reproduces_the_reference_sums() {
        let b = combine(&set(&[]), 0, 1, 0.0, 5, &w());
        assert_eq!(b.combined, 1.1);

        let b = combine(&set(&[2]), 1, 1, 0.0, 5, &w());
        assert_eq!(b.combined, 3.00);
        assert_eq!(b.combined, ((b.skip_penalty + b.sub_penalty) + b.frag_penalty) + b.stat_penalty);

        // One skip at unit cost plus one fragment vs zero skips and two
        // fragments: the skip wins.
        let a = combine(&set(&[2]), 0, 1, 0.0, 5, &w());
        let b = combine(&set(&[]), 0, 2, 0.0, 5, &w());
        assert_eq!(a.combined, 2.1);
        assert_eq!(b.combined, 2.2);
        assert!(a.combined < b.combined);
    }

    #[test]
    fn grammatical_sentence_yields_one_candidate_at_frag_weight() {
        let (g, t) = setup(G1_TEXT);
        let out = parse_robust(&t, &toks(&g, "the dog saw the cat"), Default::default());
        let cands = best_candidates(&out, &g, &w(), 1, RankingMode::Full);
        assert_eq!(cands.len(), 1);
        let c = &cands[0];
        assert_eq!(c.breakdown.combined, 1.1);
        assert_eq!(c.breakdown.fragment_count, 1);
        assert!(c.breakdown.skipped_positions.is_empty());
        assert_eq!(
            fragments_to_sexpr(&c.fragments),
            "(S (NP (det the) (n dog)) (VP (v saw) (NP (det the) (n cat))))"
        );
    }

    const SKIP_VS_FRAG: &str = "\
%start S
%fragment S
S -> a b ;
S -> b ;
a : a
b : b
";

    #[test]
    fn skipping_one_word_beats_an_extra_fragment() {
        let (g, t) = setup(SKIP_VS_FRAG);
        let out = parse_robust(&t, &toks(&g, "a b b"), Default::default());
        let cands = best_candidates(&out, &g, &w(), 4, RankingMode::Full);
        let best = &cands[0];
        // Skip the trailing b: p(2) of n=3 is skip_hi.
        assert_eq!(best.breakdown.skipped_positions, set(&[2]));
        assert_eq!(best.breakdown.fragment_count, 1);
        assert_eq!(best.breakdown.combined, 1.05 + 1.1);
        // The two-fragment reading is still ranked, just later.
        let two_frag = cands
            .iter()
            .find(|c| c.breakdown.fragment_count == 2)
            .expect("two-fragment candidate present");
        assert_eq!(two_frag.breakdown.combined, 2.2);
        assert!(best.breakdown.combined < two_frag.breakdown.combined);
    }

    const SUB_VS_SKIP: &str = "\
%start S
%fragment S
S -> a two ;
S -> a ;
a : a
two : two
";

    #[test]
    fn substituting_beats_skipping() {
        let (mut g, t) = setup(SUB_VS_SKIP);
        g.set_substitutions(
            [("too".to_string(), vec!["two".to_string()])].into_iter().collect(),
        );
        let out = parse_robust(&t, &toks(&g, "a too"), Default::default());
        let cands = best_candidates(&out, &g, &w(), 3, RankingMode::Full);
        let best = &cands[0];
        assert_eq!(best.breakdown.sub_count, 1);
        assert!(best.breakdown.skipped_positions.is_empty());
        assert_eq!(best.breakdown.combined, (0.9 + 1.1) + 0.0);
        let skipper = cands
            .iter()
            .find(|c| c.breakdown.sub_count == 0)
            .expect("skip candidate present");
        assert_eq!(skipper.breakdown.skipped_positions, set(&[1]));
        assert!(best.breakdown.combined < skipper.breakdown.combined);
    }

    #[test]
    fn n_best_lists_are_prefixes_of_longer_lists() {
        let (g, t) = setup(G2_TEXT);
        let out = parse_robust(&t, &toks(&g, "a plus a plus a plus a"), Default::default());
        let five = best_candidates(&out, &g, &w(), 5, RankingMode::Full);
        for k in 1..=5 {
            let shorter = best_candidates(&out, &g, &w(), k, RankingMode::Full);
            assert_eq!(shorter.as_slice(), &five[..shorter.len().min(k)]);
        }
    }

    #[test]
    fn exhaustive_unpacking_agrees_with_the_dynamic_program() {
        let (g, t) = setup(G2_TEXT);
        let out = parse_robust(&t, &toks(&g, "a plus a plus a plus a"), Default::default());
        let total = count_trees(&out);
        let all = unpack_all(&out, &g, &w(), 10_000);
        assert_eq!(all.len() as u64, total);
        for mode in [RankingMode::Full, RankingMode::SkipOnly] {
            let brute = all
                .iter()
                .min_by(|a, b| {
                    (a.rank_key(mode), a.root_index).cmp(&(b.rank_key(mode), b.root_index))
                })
                .unwrap();
            let best = &best_candidates(&out, &g, &w(), 1, mode)[0];
            assert_eq!(
                fragments_to_sexpr(&best.fragments),
                fragments_to_sexpr(&brute.fragments)
            );
            assert_eq!(best.breakdown, brute.breakdown);
        }
    }

    #[test]
    fn baseline_forest_counts_match_catalan_numbers() {
        let (g, t) = setup(G2_TEXT);
        // Binary bracketings of k operands follow the Catalan numbers.
        for (input, expect) in [
            ("a plus a", 1),
            ("a plus a plus a", 2),
            ("a plus a plus a plus a", 5),
            ("a plus a plus a plus a plus a", 14),
        ] {
            let out = parse_with(&t, &toks(&g, input), &ParseConfig::baseline());
            assert_eq!(count_trees(&out), expect, "{input}");
        }
    }

    #[test]
    fn skip_only_mode_minimizes_skips_first() {
        let (g, t) = setup(SKIP_VS_FRAG);
        // Full mode prefers one skip (2.15) to two fragments (2.2);
        // skip-only must pick the zero-skip two-fragment reading.
        let out = parse_robust(&t, &toks(&g, "a b b"), Default::default());
        let skip_only = &best_candidates(&out, &g, &w(), 1, RankingMode::SkipOnly)[0];
        assert!(skip_only.breakdown.skipped_positions.is_empty());
        assert_eq!(skip_only.breakdown.fragment_count, 2);
        assert_eq!(skip_only.breakdown.skipped_positions.len() as u32, 0);
        assert_eq!(out.min_skips(), Some(0));
    }

    #[test]
    fn trained_statistics_pick_the_more_frequent_bracketing() {
        let (g, t) = setup(G2_TEXT);
        let left =
            parse_forest("(E (E (E (a a)) (plus plus) (E (a a))) (plus plus) (E (a a)))").unwrap();
        let right =
            parse_forest("(E (E (a a)) (plus plus) (E (E (a a)) (plus plus) (E (a a))))").unwrap();
        let words: Vec<String> = "a plus a plus a".split(' ').map(str::to_string).collect();
        let mut counts = ActionCounts::new();
        for _ in 0..9 {
            counts.observe(&derive_action_sequence(&t, &words, &left).unwrap());
        }
        counts.observe(&derive_action_sequence(&t, &words, &right).unwrap());
        let trained = train(&t, &counts, 0.5);

        let out = parse_robust(&trained, &toks(&g, "a plus a plus a"), Default::default());
        let best = &best_candidates(&out, &g, &w(), 2, RankingMode::Full)[0];
        assert_eq!(
            fragments_to_sexpr(&best.fragments),
            "(E (E (E (a a)) (plus plus) (E (a a))) (plus plus) (E (a a)))"
        );
        assert!(best.breakdown.stat_penalty > 0.0);
        assert!(best.breakdown.log10_pscore < 0.0);
    }

    #[test]
    fn skip_only_ranking_ignores_trained_statistics() {
        let (g, t) = setup(G2_TEXT);
        let left =
            parse_forest("(E (E (E (a a)) (plus plus) (E (a a))) (plus plus) (E (a a)))").unwrap();
        let right =
            parse_forest("(E (E (a a)) (plus plus) (E (E (a a)) (plus plus) (E (a a))))").unwrap();
        let words: Vec<String> = "a plus a plus a".split(' ').map(str::to_string).collect();
        let toward = |tree: &Vec<Tree>, other: &Vec<Tree>| {
            let mut counts = ActionCounts::new();
            for _ in 0..9 {
                counts.observe(&derive_action_sequence(&t, &words, tree).unwrap());
            }
            counts.observe(&derive_action_sequence(&t, &words, other).unwrap());
            train(&t, &counts, 0.5)
        };

        let pick = |table: &ParseTable| {
            let out = parse_robust(table, &toks(&g, "a plus a plus a"), Default::default());
            fragments_to_sexpr(
                &best_candidates(&out, &g, &w(), 1, RankingMode::SkipOnly)[0].fragments,
            )
        };
        let untrained = pick(&t);
        assert_eq!(pick(&toward(&left, &right)), untrained);
        assert_eq!(pick(&toward(&right, &left)), untrained);
    }

    #[test]
    fn pscore_breaks_ties_even_with_a_zero_stat_weight() {
        let (g, t) = setup(G2_TEXT);
        let left =
            parse_forest("(E (E (E (a a)) (plus plus) (E (a a))) (plus plus) (E (a a)))").unwrap();
        let words: Vec<String> = "a plus a plus a".split(' ').map(str::to_string).collect();
        let mut counts = ActionCounts::new();
        counts.observe(&derive_action_sequence(&t, &words, &left).unwrap());
        let trained = train(&t, &counts, 0.5);

        let zero_stat = FeatureWeights { w_stat: 0.0, ..w() };
        let out = parse_robust(&trained, &toks(&g, "a plus a plus a"), Default::default());
        let best = &best_candidates(&out, &g, &zero_stat, 1, RankingMode::Full)[0];
        assert_eq!(best.breakdown.stat_penalty, 0.0);
        assert_eq!(
            fragments_to_sexpr(&best.fragments),
            "(E (E (E (a a)) (plus plus) (E (a a))) (plus plus) (E (a a)))"
        );
    }

    #[test]
    fn rescaling_all_weights_preserves_the_argmin() {
        let (g, t) = setup(SKIP_VS_FRAG);
        let out = parse_robust(&t, &toks(&g, "a b b"), Default::default());
        let scaled = FeatureWeights {
            w_sub: 0.9 * 3.0,
            w_frag: 1.1 * 3.0,
            w_stat: 0.1 * 3.0,
            skip_lo: 0.95 * 3.0,
            skip_hi: 1.05 * 3.0,
        };
        let a = &best_candidates(&out, &g, &w(), 1, RankingMode::Full)[0];
        let b = &best_candidates(&out, &g, &scaled, 1, RankingMode::Full)[0];
        assert_eq!(a.fragments, b.fragments);
    }

    #[test]
    fn rejected_outcomes_produce_no_candidates() {
        let (g, t) = setup(G1_TEXT);
        let out = parse_with(&t, &toks(&g, "dog the saw"), &ParseConfig::baseline());
        assert!(best_candidates(&out, &g, &w(), 3, RankingMode::Full).is_empty());
        assert_eq!(count_trees(&out), 0);
    }

    #[test]
    fn breakdown_serializes_with_positions() {
        let b = combine(&set(&[1, 3]), 1, 2, -0.5f64, 6, &w());
        let json = serde_json::to_value(&b).unwrap();
        assert_eq!(json["skipped_positions"], serde_json::json!([1, 3]));
        assert_eq!(json["fragment_count"], 2);
        assert!(json["combined"].as_f64().unwrap() > 0.0);
    }
}
