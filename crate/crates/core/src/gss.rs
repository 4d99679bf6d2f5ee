//! Graph-structured stack and shared packed parse forest.
//!
//! Symbol nodes are keyed by (symbol, span, left state). The left state is
//! the LR state of the GSS node the subtree hangs off, which makes every
//! action probability stored in the forest a function of the node identity:
//! any tree unpacked from the forest sums its stored shift/reduce log
//! probabilities to exactly the value a replay of that tree through the
//! automaton would produce. Plain (symbol, span) keying would let a subtree
//! built in one left context be spliced under a parent from another, and the
//! stored probabilities would silently belong to the wrong derivation.
//!
//! Skip bookkeeping: a terminal node's span covers the positions skipped to
//! reach its token plus the token itself, so a subtree's skip count is pure
//! span arithmetic. Packing keeps only minimum-skip alternatives per node.
//! During a frontier the engine merges all alternatives first and prunes at
//! frontier close (`finalize_frontier`); pruning alternative-by-alternative
//! as they arrive compares against skip counts that may still improve within
//! the frontier and can discard a parse that would have become minimal.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;

use crate::grammar::{Grammar, NtId, RuleId, Sym, TermId};
use crate::num::Score;
use crate::table::StateId;

/// Index of a symbol node in the forest arena.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct NodeId(pub u32);

/// Index of a state node in the GSS arena.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct StateNodeId(pub u32);

/// Half-open span over input positions.
pub type Span = (u32, u32);

// ---------------------------------------------------------------------------
// Forest
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct SymbolNode<S: Score> {
    pub sym: Sym,
    pub span: Span,
    pub left_state: StateId,
    pub kind: NodeKind<S>,
    /// Fewest skipped positions over any subtree rooted here.
    pub min_skips: u32,
    /// Skip positions of the chosen (first minimal) alternative.
    pub skipped: BTreeSet<u32>,
    /// Substitution count of the chosen alternative.
    pub sub_count: u32,
}

#[derive(Clone, Debug)]
pub enum NodeKind<S: Score> {
    Terminal { term: TermId, surface: String, substituted: bool, log_prob: Option<S> },
    Nonterminal { alternatives: Vec<PackedAlternative<S>> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct PackedAlternative<S: Score> {
    pub rule: RuleId,
    pub children: Vec<NodeId>,
    /// The reduce action's log10 probability; None on untrained tables.
    pub local_log_prob: Option<S>,
    pub skipped_count: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PackOutcome {
    Merged,
    ReplacedExisting,
    DiscardedNew,
}

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
enum NodeKey {
    Term { term: TermId, span: Span, left_state: StateId, surface: String, substituted: bool },
    Nt { nt: NtId, span: Span, left_state: StateId },
}

#[derive(Clone, Debug, Default)]
pub struct Forest<S: Score> {
    nodes: Vec<SymbolNode<S>>,
    index: HashMap<NodeKey, NodeId>,
}

impl<S: Score> Forest<S> {
    pub fn new() -> Self {
        Forest { nodes: Vec::new(), index: HashMap::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: NodeId) -> &SymbolNode<S> {
        &self.nodes[id.0 as usize]
    }

    pub fn alternatives(&self, id: NodeId) -> &[PackedAlternative<S>] {
        match &self.node(id).kind {
            NodeKind::Nonterminal { alternatives } => alternatives,
            NodeKind::Terminal { .. } => &[],
        }
    }

    /// Create or reuse the terminal node for one (skip-)shift. The span's
    /// leading positions before the last are the skipped ones.
    pub fn terminal(
        &mut self,
        term: TermId,
        span: Span,
        left_state: StateId,
        surface: &str,
        substituted: bool,
        log_prob: Option<S>,
    ) -> NodeId {
        debug_assert!(span.1 > span.0);
        let key = NodeKey::Term {
            term,
            span,
            left_state,
            surface: surface.to_string(),
            substituted,
        };
        if let Some(&id) = self.index.get(&key) {
            return id;
        }
        let skipped: BTreeSet<u32> = (span.0..span.1 - 1).collect();
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(SymbolNode {
            sym: Sym::Term(term),
            span,
            left_state,
            kind: NodeKind::Terminal {
                term,
                surface: surface.to_string(),
                substituted,
                log_prob,
            },
            min_skips: span.1 - 1 - span.0,
            skipped,
            sub_count: substituted as u32,
        });
        self.index.insert(key, id);
        id
    }

    /// Create or reuse the nonterminal node for (nt, span, left state).
    pub fn nonterminal(&mut self, nt: NtId, span: Span, left_state: StateId) -> (NodeId, bool) {
        let key = NodeKey::Nt { nt, span, left_state };
        if let Some(&id) = self.index.get(&key) {
            return (id, false);
        }
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(SymbolNode {
            sym: Sym::Nt(nt),
            span,
            left_state,
            kind: NodeKind::Nonterminal { alternatives: Vec::new() },
            min_skips: u32::MAX,
            skipped: BTreeSet::new(),
            sub_count: 0,
        });
        self.index.insert(key, id);
        (id, true)
    }

    /// Add an alternative without pruning; duplicates by (rule, children)
    /// collapse. Used by the engine during a frontier, where skip counts are
    /// not yet final; `finalize_frontier` prunes once they are.
    pub fn merge_alternative(&mut self, id: NodeId, alt: PackedAlternative<S>) -> bool {
        let NodeKind::Nonterminal { alternatives } = &mut self.nodes[id.0 as usize].kind else {
            panic!("merge_alternative on a terminal node");
        };
        if alternatives.iter().any(|a| a.rule == alt.rule && a.children == alt.children) {
            return false;
        }
        alternatives.push(alt);
        true
    }

    /// Immediate skip-count packing: the alternative with more skips inside
    /// the same (symbol, span) loses.
    pub fn pack(&mut self, id: NodeId, alt: PackedAlternative<S>) -> PackOutcome {
        let new_skips = alt.skipped_count;
        let NodeKind::Nonterminal { alternatives } = &mut self.nodes[id.0 as usize].kind else {
            panic!("pack on a terminal node");
        };
        let existing_min = alternatives.iter().map(|a| a.skipped_count).min();
        let outcome = match existing_min {
            Some(min) if new_skips > min => return PackOutcome::DiscardedNew,
            Some(min) if new_skips < min => {
                alternatives.retain(|a| a.skipped_count <= new_skips);
                alternatives.push(alt);
                PackOutcome::ReplacedExisting
            }
            _ => {
                if !alternatives.iter().any(|a| a.rule == alt.rule && a.children == alt.children)
                {
                    alternatives.push(alt);
                }
                PackOutcome::Merged
            }
        };
        self.nodes[id.0 as usize].min_skips = new_skips;
        outcome
    }

    /// Close a frontier: relax minimum skip counts over the nodes created on
    /// it (same-span rule chains need a fixpoint), drop dominated
    /// alternatives, then fill in each node's representative skip set and
    /// substitution count from its first minimal grounded alternative.
    pub fn finalize_frontier(&mut self, created: &[NodeId]) {
        // Relax min_skips to the least fixpoint.
        loop {
            let mut changed = false;
            for &id in created {
                let NodeKind::Nonterminal { alternatives } = &self.nodes[id.0 as usize].kind
                else {
                    continue;
                };
                let mut best = u32::MAX;
                for alt in alternatives {
                    let mut total: u32 = 0;
                    for &c in &alt.children {
                        total = total.saturating_add(self.nodes[c.0 as usize].min_skips);
                    }
                    best = best.min(total);
                }
                if best < self.nodes[id.0 as usize].min_skips {
                    self.nodes[id.0 as usize].min_skips = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }

        // Prune alternatives above the node minimum and refresh cached counts.
        for &id in created {
            let min = self.nodes[id.0 as usize].min_skips;
            let child_skips: Vec<(Vec<NodeId>, u32)> = {
                let NodeKind::Nonterminal { alternatives } = &self.nodes[id.0 as usize].kind
                else {
                    continue;
                };
                alternatives
                    .iter()
                    .map(|alt| {
                        let mut total: u32 = 0;
                        for &c in &alt.children {
                            total = total.saturating_add(self.nodes[c.0 as usize].min_skips);
                        }
                        (alt.children.clone(), total)
                    })
                    .collect()
            };
            let NodeKind::Nonterminal { alternatives } = &mut self.nodes[id.0 as usize].kind
            else {
                continue;
            };
            let mut keep = Vec::with_capacity(alternatives.len());
            for (alt, (_, total)) in alternatives.drain(..).zip(child_skips) {
                if total == min {
                    keep.push(PackedAlternative { skipped_count: total, ..alt });
                }
            }
            *alternatives = keep;
        }

        // Representative skip sets, in grounding order (a minimal alternative
        // may reference a same-frontier node not yet resolved; iterate until
        // every node has found a fully resolved minimal alternative).
        let mut resolved: HashSet<NodeId> = HashSet::new();
        loop {
            let mut progressed = false;
            for &id in created {
                if resolved.contains(&id) {
                    continue;
                }
                let pick = {
                    let NodeKind::Nonterminal { alternatives } = &self.nodes[id.0 as usize].kind
                    else {
                        resolved.insert(id);
                        continue;
                    };
                    alternatives
                        .iter()
                        .find(|alt| {
                            alt.children.iter().all(|c| {
                                resolved.contains(c)
                                    || !created.contains(c)
                                    || matches!(
                                        self.nodes[c.0 as usize].kind,
                                        NodeKind::Terminal { .. }
                                    )
                            })
                        })
                        .map(|alt| alt.children.clone())
                };
                if let Some(children) = pick {
                    let mut skipped = BTreeSet::new();
                    let mut subs = 0;
                    for c in children {
                        skipped.extend(self.nodes[c.0 as usize].skipped.iter().copied());
                        subs += self.nodes[c.0 as usize].sub_count;
                    }
                    let node = &mut self.nodes[id.0 as usize];
                    node.skipped = skipped;
                    node.sub_count = subs;
                    resolved.insert(id);
                    progressed = true;
                }
            }
            if !progressed {
                break;
            }
        }
        debug_assert!(
            created.iter().all(|id| resolved.contains(id)
                || matches!(self.nodes[id.0 as usize].kind, NodeKind::Terminal { .. })),
            "every minimal alternative must ground in a finite derivation"
        );
    }
}

// ---------------------------------------------------------------------------
// GSS
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct StateNode {
    pub state: StateId,
    pub frontier: u32,
    /// Edges toward the stack bottom, labeled with forest nodes.
    pub links: Vec<Link>,
    /// Fewest skips along any path to the stack bottom.
    pub min_path_skips: u32,
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub struct Link {
    pub sym: NodeId,
    pub target: StateNodeId,
}

#[derive(Clone, Debug, Default)]
pub struct Gss {
    nodes: Vec<StateNode>,
    index: HashMap<(StateId, u32), StateNodeId>,
    frontiers: Vec<Vec<StateNodeId>>,
}

impl Gss {
    pub fn new() -> Self {
        Gss::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node(&self, id: StateNodeId) -> &StateNode {
        &self.nodes[id.0 as usize]
    }

    /// Create or reuse the node for (state, frontier) — one per pair.
    pub fn state_node(&mut self, state: StateId, frontier: u32) -> (StateNodeId, bool) {
        if let Some(&id) = self.index.get(&(state, frontier)) {
            return (id, false);
        }
        let id = StateNodeId(self.nodes.len() as u32);
        self.nodes.push(StateNode {
            state,
            frontier,
            links: Vec::new(),
            min_path_skips: if frontier == 0 && self.nodes.is_empty() { 0 } else { u32::MAX },
        });
        self.index.insert((state, frontier), id);
        while self.frontiers.len() <= frontier as usize {
            self.frontiers.push(Vec::new());
        }
        self.frontiers[frontier as usize].push(id);
        (id, true)
    }

    pub fn add_link(&mut self, from: StateNodeId, link: Link) -> bool {
        let links = &mut self.nodes[from.0 as usize].links;
        if links.contains(&link) {
            return false;
        }
        links.push(link);
        true
    }

    pub fn frontier_nodes(&self, frontier: u32) -> &[StateNodeId] {
        self.frontiers
            .get(frontier as usize)
            .map(|v| v.as_slice())
            .unwrap_or(&[])
    }

    pub fn frontier_count(&self) -> usize {
        self.frontiers.len()
    }

    /// Nodes on frontiers strictly before `frontier`, oldest first.
    pub fn nodes_before(&self, frontier: u32) -> Vec<StateNodeId> {
        let mut out = Vec::new();
        for f in 0..frontier.min(self.frontiers.len() as u32) {
            out.extend_from_slice(&self.frontiers[f as usize]);
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn seed_path_skips(&mut self, id: StateNodeId, skips: u32) {
        self.nodes[id.0 as usize].min_path_skips = skips;
    }

    /// Recompute best-path skip counts for one frontier once its forest
    /// nodes are final. Same-frontier links (epsilon spans) need a fixpoint.
    pub fn finalize_frontier_paths<S: Score>(&mut self, frontier: u32, forest: &Forest<S>) {
        let ids: Vec<StateNodeId> = self.frontier_nodes(frontier).to_vec();
        loop {
            let mut changed = false;
            for &id in &ids {
                let mut best = if self.nodes[id.0 as usize].frontier == 0
                    && self.nodes[id.0 as usize].links.is_empty()
                {
                    0
                } else {
                    u32::MAX
                };
                for link in &self.nodes[id.0 as usize].links {
                    let through = forest
                        .node(link.sym)
                        .min_skips
                        .saturating_add(self.nodes[link.target.0 as usize].min_path_skips);
                    best = best.min(through);
                }
                if best < self.nodes[id.0 as usize].min_path_skips {
                    self.nodes[id.0 as usize].min_path_skips = best;
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// DOT export
// ---------------------------------------------------------------------------

/// Render the GSS and forest as a DOT graph for debugging.
pub fn to_dot<S: Score>(gss: &Gss, forest: &Forest<S>, grammar: &Grammar) -> String {
    let mut out = String::from("digraph gss {\n  rankdir=RL;\n");
    for (i, node) in gss.nodes.iter().enumerate() {
        let _ = writeln!(
            out,
            "  s{i} [shape=box label=\"s{} @{}\\nskips {}\"];",
            node.state.0,
            node.frontier,
            if node.min_path_skips == u32::MAX {
                "?".to_string()
            } else {
                node.min_path_skips.to_string()
            }
        );
        for link in &node.links {
            let _ = writeln!(out, "  s{i} -> n{} [style=bold];", link.sym.0);
            let _ = writeln!(out, "  n{} -> s{};", link.sym.0, link.target.0);
        }
    }
    for (i, node) in forest.nodes.iter().enumerate() {
        let label = grammar.sym_name(node.sym);
        let _ = writeln!(
            out,
            "  n{i} [label=\"{} [{},{})\\nskips {}\"];",
            label, node.span.0, node.span.1, node.min_skips
        );
        if let NodeKind::Nonterminal { alternatives } = &node.kind {
            for (j, alt) in alternatives.iter().enumerate() {
                if alternatives.len() > 1 {
                    let _ = writeln!(out, "  n{i}a{j} [shape=point];");
                    let _ = writeln!(out, "  n{i} -> n{i}a{j};");
                    for child in &alt.children {
                        let _ = writeln!(out, "  n{i}a{j} -> n{};", child.0);
                    }
                } else {
                    for child in &alt.children {
                        let _ = writeln!(out, "  n{i} -> n{};", child.0);
                    }
                }
            }
        }
    }
    out.push_str("}\n");
    out
}
