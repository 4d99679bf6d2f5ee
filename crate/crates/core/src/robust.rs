//! Word skipping and substitution branching on top of the GLR loop.
//!
//! Shifting the current token from a state node left over on an earlier
//! frontier skips every position in between; at end of input, accepting
//! from an earlier frontier skips the trailing positions. The beam keeps
//! the set of skip origins small by dropping nodes whose best path already
//! skips far more than the best known analysis. Active frontier nodes are
//! never filtered, so anything the baseline parser accepts survives any
//! beam setting.

use crate::grammar::{TermId, Token};
use crate::gss::{Gss, StateNodeId};
use crate::num::Score;
use crate::parser::{parse_with, ParseConfig, ParseOutcome};
use crate::table::ParseTable;

/// Limits on which inactive nodes may source skip-shifts.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct BeamConfig {
    /// Max best-path skips above the current best for an origin to qualify.
    pub delta: u32,
    /// Max origins considered per shift step.
    pub frontier_cap: usize,
    /// Disabled means unbounded skipping (exhaustive search).
    pub enabled: bool,
}

impl Default for BeamConfig {
    fn default() -> Self {
        BeamConfig { delta: 2, frontier_cap: 30, enabled: true }
    }
}

impl BeamConfig {
    pub fn disabled() -> Self {
        BeamConfig { enabled: false, ..BeamConfig::default() }
    }
}

/// One way to shift a token: its own reading or a substitution's.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Reading {
    pub term: TermId,
    pub surface: String,
    pub substituted: bool,
}

/// Parse with skipping and substitutions enabled.
pub fn parse_robust<S: Score>(
    table: &ParseTable<S>,
    tokens: &[Token],
    beam: BeamConfig,
) -> ParseOutcome<S> {
    let config = ParseConfig { beam, ..ParseConfig::robust() };
    parse_with(table, tokens, &config)
}

/// Pick the inactive nodes allowed to source skip-shifts: those whose best
/// path skips at most `current_best_skips + delta`, capped at `frontier_cap`
/// preferring fewer skips, then more recent frontiers, then lower state ids.
pub fn select_skip_origins(
    gss: &Gss,
    inactive: &[StateNodeId],
    current_best_skips: u32,
    beam: &BeamConfig,
) -> Vec<StateNodeId> {
    if !beam.enabled {
        return inactive.to_vec();
    }
    let limit = current_best_skips.saturating_add(beam.delta);
    let mut eligible: Vec<StateNodeId> = inactive
        .iter()
        .copied()
        .filter(|&v| gss.node(v).min_path_skips <= limit)
        .collect();
    eligible.sort_by_key(|&v| {
        let node = gss.node(v);
        (node.min_path_skips, std::cmp::Reverse(node.frontier), node.state.0)
    });
    eligible.truncate(beam.frontier_cap);
    eligible
}

/// A token's shiftable readings: its own terminals, then each substitution
/// alternative's terminals flagged as substituted.
pub fn expand_substitutions(token: &Token) -> Vec<Reading> {
    let mut out: Vec<Reading> = token
        .terms
        .iter()
        .map(|&t| Reading { term: t, surface: token.surface.clone(), substituted: false })
        .collect();
    for alt in &token.alternatives {
        for &t in &alt.terms {
            let reading = Reading { term: t, surface: alt.surface.clone(), substituted: true };
            if !out.contains(&reading) {
                out.push(reading);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grammar::{load_grammar, Grammar, G1_TEXT};
    use crate::parser::parse;
    use crate::table::{build_table, StateId};

    fn setup(text: &str) -> (Grammar, ParseTable) {
        let g = load_grammar(text).unwrap().grammar.augment();
        let t = build_table(&g).unwrap();
        (g, t)
    }

    fn toks(g: &Grammar, s: &str) -> Vec<Token> {
        g.tokenize(&s.split_whitespace().collect::<Vec<_>>())
    }

    #[test]
    fn skips_an_unknown_word_in_the_middle() {
        let (g, t) = setup(G1_TEXT);
        let out = parse_robust(&t, &toks(&g, "the dog uh saw the cat"), BeamConfig::default());
        assert!(out.accepted());
        assert_eq!(out.min_skips(), Some(1));
        let best = out
            .roots
            .iter()
            .min_by_key(|r| out.forest.node(r.node).min_skips + r.trailing_len())
            .unwrap();
        assert_eq!(out.forest.node(best.node).skipped.iter().copied().collect::<Vec<_>>(), [2]);
        assert_eq!(best.trailing_len(), 0);
    }

    #[test]
    fn grammatical_input_needs_no_skips() {
        let (g, t) = setup(G1_TEXT);
        let tokens = toks(&g, "the dog saw the cat");
        let robust = parse_robust(&t, &tokens, BeamConfig::default());
        let baseline = parse(&t, &tokens);
        assert!(robust.accepted() && baseline.accepted());
        assert_eq!(robust.min_skips(), Some(0));
        // The full-coverage root matches the baseline's.
        let full = robust.roots.iter().find(|r| r.frontier == 5).unwrap();
        let base = &baseline.roots[0];
        assert_eq!(robust.forest.node(full.node).span, baseline.forest.node(base.node).span);
        assert_eq!(robust.forest.node(full.node).min_skips, 0);
    }

    #[test]
    fn skips_a_false_start_prefix_with_beam_off() {
        let (g, t) = setup(G1_TEXT);
        let out = parse_robust(
            &t,
            &toks(&g, "saw the cat the dog saw the cat"),
            BeamConfig::disabled(),
        );
        assert!(out.accepted());
        assert_eq!(out.min_skips(), Some(3));
    }

    #[test]
    fn trailing_garbage_is_skipped_as_a_suffix() {
        let (g, t) = setup(G1_TEXT);
        let out = parse_robust(&t, &toks(&g, "the dog saw the cat zzz"), BeamConfig::default());
        assert!(out.accepted());
        assert_eq!(out.min_skips(), Some(1));
        let best = out
            .roots
            .iter()
            .min_by_key(|r| out.forest.node(r.node).min_skips + r.trailing_len())
            .unwrap();
        assert_eq!(best.trailing_skipped, (5, 6));
    }

    #[test]
    fn rejects_only_when_nothing_parses() {
        let (g, t) = setup(G1_TEXT);
        // No token starts any fragment and no root derives epsilon.
        let out = parse_robust(&t, &toks(&g, "zzz qqq"), BeamConfig::default());
        assert!(!out.accepted());
    }

    #[test]
    fn beam_off_returns_all_inactive_nodes() {
        let mut gss = Gss::new();
        let (a, _) = gss.state_node(StateId(0), 0);
        let (b, _) = gss.state_node(StateId(1), 1);
        let inactive = vec![a, b];
        let beam = BeamConfig::disabled();
        assert_eq!(select_skip_origins(&gss, &inactive, 0, &beam), inactive);
    }

    #[test]
    fn beam_excludes_nodes_beyond_the_skip_threshold() {
        let mut gss = Gss::new();
        let forest: crate::gss::Forest<f64> = crate::gss::Forest::new();
        let (a, _) = gss.state_node(StateId(0), 0);
        let (b, _) = gss.state_node(StateId(1), 1);
        let (c, _) = gss.state_node(StateId(2), 2);
        // Fabricate path skip counts via the public finalize path: node a is
        // the root (0); b and c have no links so stay at max unless seeded.
        gss.finalize_frontier_paths(0, &forest);
        let set = |gss: &mut Gss, id: StateNodeId, v: u32| {
            // Reach through links: simplest is to rebuild with terminals, but
            // the beam only reads min_path_skips, so seed it directly.
            gss.seed_path_skips(id, v);
        };
        set(&mut gss, a, 0);
        set(&mut gss, b, 1);
        set(&mut gss, c, 4);
        let beam = BeamConfig { delta: 2, frontier_cap: 30, enabled: true };
        let picked = select_skip_origins(&gss, &[a, b, c], 0, &beam);
        assert_eq!(picked, vec![a, b]);
    }

    #[test]
    fn beam_caps_and_orders_eligible_origins() {
        let mut gss = Gss::new();
        let mut all = Vec::new();
        for i in 0..50u32 {
            let (id, _) = gss.state_node(StateId(i), i % 5);
            gss.seed_path_skips(id, 0);
            all.push(id);
        }
        let beam = BeamConfig { delta: 2, frontier_cap: 30, enabled: true };
        let picked = select_skip_origins(&gss, &all, 0, &beam);
        assert_eq!(picked.len(), 30);
        // Equal skips: more recent frontier first, then lower state id.
        let first = gss.node(picked[0]);
        assert_eq!(first.frontier, 4);
        assert!(picked.windows(2).all(|w| {
            let (a, b) = (gss.node(w[0]), gss.node(w[1]));
            (std::cmp::Reverse(a.frontier), a.state.0)
                <= (std::cmp::Reverse(b.frontier), b.state.0)
        }));
    }

    #[test]
    fn substitution_expansion_orders_own_readings_first() {
        let (g, _) = setup(G1_TEXT);
        let mut g = g;
        g.set_substitutions(
            [("too".to_string(), vec!["the".to_string()])].into_iter().collect(),
        );
        // "too" is out of lexicon; its substitute "the" reads as det.
        let tokens = toks(&g, "too");
        let readings = expand_substitutions(&tokens[0]);
        assert_eq!(readings.len(), 1);
        assert!(readings[0].substituted);
        assert_eq!(readings[0].surface, "the");

        // A known word with no substitutions expands to itself.
        let tokens = toks(&g, "dog");
        let readings = expand_substitutions(&tokens[0]);
        assert_eq!(readings.len(), 1);
        assert!(!readings[0].substituted);

        // Both original and substitute readings are offered in parallel.
        g.set_substitutions(
            [("dog".to_string(), vec!["cat".to_string()])].into_iter().collect(),
        );
        let tokens = toks(&g, "dog");
        let readings = expand_substitutions(&tokens[0]);
        assert_eq!(readings.len(), 2);
        assert!(!readings[0].substituted);
        assert!(readings[1].substituted);
    }

    #[test]
    fn substituted_parse_recovers_a_misheard_word() {
        let (g, _) = setup(G1_TEXT);
        let mut g = g;
        g.set_substitutions(
            [("ze".to_string(), vec!["the".to_string()])].into_iter().collect(),
        );
        let t: ParseTable = build_table(&g).unwrap();
        let out = parse_robust(&t, &toks(&g, "ze dog saw the cat"), BeamConfig::default());
        assert!(out.accepted());
        // Substituting "the" for "ze" parses everything: zero skips.
        assert_eq!(out.min_skips(), Some(0));
        let full = out.roots.iter().find(|r| r.frontier == 5).unwrap();
        assert_eq!(out.forest.node(full.node).sub_count, 1);
    }

    #[test]
    fn appending_garbage_costs_exactly_one_skip() {
        let (g, t) = setup(G1_TEXT);
        for noisy in ["the dog saw the cat zzz", "zzz the dog saw the cat"] {
            let out = parse_robust(&t, &toks(&g, noisy), BeamConfig::default());
            assert_eq!(out.min_skips(), Some(1), "input: {noisy}");
        }
    }
}
