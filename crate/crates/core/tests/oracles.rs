//! Engine behavior cross-checked against the independent brute-force
//! oracles in glrstar-testkit. Small scale here; the full-scale sweeps
//! live in the CLI acceptance suite.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use glrstar_core::grammar::{load_grammar, Grammar};
use glrstar_core::parser::{parse_with, ParseConfig};
use glrstar_core::robust::BeamConfig;
use glrstar_core::scoring::{count_trees, unpack_all, FeatureWeights};
use glrstar_core::stats::{derive_action_sequence, trace_log10_pscore, train, ActionCounts};
use glrstar_core::table::{build_table, ParseTable};
use glrstar_core::tree::fragments_to_sexpr;
use glrstar_core::{parse_robust, Tree};
use glrstar_testkit::{
    all_sentences, count_parse_trees, longest_parsable_subsequence, random_grammar_text,
    sample_derivation, terminal_words, GenConfig, Recognizer,
};

fn build(text: &str) -> (Grammar, ParseTable) {
    let g = load_grammar(text).unwrap_or_else(|e| panic!("{e:?}\n{text}")).grammar.augment();
    let t = build_table(&g).unwrap();
    (g, t)
}

fn robust_no_subs(beam: BeamConfig) -> ParseConfig {
    ParseConfig { substitutions: false, beam, ..ParseConfig::robust() }
}

#[test]
fn baseline_accepts_agree_with_the_chart_recognizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut accepted = 0usize;
    let mut total = 0usize;
    for _ in 0..20 {
        let text = random_grammar_text(&mut rng, &GenConfig::default());
        let (g, t) = build(&text);
        let rec = Recognizer::new(&g);
        for sentence in all_sentences(&terminal_words(&g), 4) {
            let tokens = g.tokenize(&sentence);
            let ours = parse_with(&t, &tokens, &ParseConfig::baseline()).accepted();
            let oracle = rec.accepts(&tokens);
            assert_eq!(ours, oracle, "{text}\nsentence: {sentence:?}");
            total += 1;
            accepted += ours as usize;
        }
    }
    // The sweep must exercise both outcomes to mean anything.
    assert!(accepted > 0 && accepted < total, "{accepted}/{total}");
}

#[test]
fn robust_skip_counts_match_the_subsequence_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut parsable = 0usize;
    for _ in 0..10 {
        let text = random_grammar_text(&mut rng, &GenConfig::default());
        let (g, t) = build(&text);
        let rec = Recognizer::new(&g);
        let mut words = terminal_words(&g);
        words.push("noise".to_string());
        for _ in 0..12 {
            let len = rng.gen_range(1..=6);
            let sentence: Vec<String> =
                (0..len).map(|_| words.choose(&mut rng).unwrap().clone()).collect();
            let tokens = g.tokenize(&sentence);
            let out = parse_with(&t, &tokens, &robust_no_subs(BeamConfig::disabled()));
            match longest_parsable_subsequence(&rec, &tokens) {
                None => assert!(!out.accepted(), "{text}\n{sentence:?}"),
                Some(best_len) => {
                    parsable += 1;
                    assert_eq!(
                        out.min_skips(),
                        Some((len - best_len) as u32),
                        "{text}\n{sentence:?}"
                    );
                }
            }
        }
    }
    assert!(parsable > 20, "noise drowned the suite: {parsable}");
}

#[test]
fn beamed_candidates_are_real_parses_and_never_beat_the_unbeamed_optimum() {
    // Literal forest containment is too strong a check: the unbeamed
    // forest sees more alternatives, so its packing may prune an analysis
    // the beamed forest kept, in favor of a cheaper sibling on the same
    // node. What the beam must guarantee is that it invents nothing: every
    // candidate it returns is a genuine derivation of exactly the
    // unskipped words, and its skip count is bounded below by the
    // unbeamed optimum.
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let w = FeatureWeights::default();
    for _ in 0..10 {
        let text = random_grammar_text(&mut rng, &GenConfig::default());
        let (g, t) = build(&text);
        let mut words = terminal_words(&g);
        words.push("noise".to_string());
        for _ in 0..6 {
            let len = rng.gen_range(2..=6);
            let sentence: Vec<String> =
                (0..len).map(|_| words.choose(&mut rng).unwrap().clone()).collect();
            let tokens = g.tokenize(&sentence);
            let beamed = parse_with(&t, &tokens, &robust_no_subs(BeamConfig::default()));
            let full = parse_with(&t, &tokens, &robust_no_subs(BeamConfig::disabled()));
            assert!(
                !beamed.accepted() || full.accepted(),
                "beam accepted what the full parser rejects: {text}\n{sentence:?}"
            );
            if beamed.accepted() {
                assert!(beamed.min_skips().unwrap() >= full.min_skips().unwrap());
            }
            for c in glrstar_core::best_candidates(&beamed, &g, &w, 5, glrstar_core::RankingMode::Full)
            {
                let leaves: Vec<String> = c
                    .fragments
                    .iter()
                    .flat_map(|f| f.leaves())
                    .map(|(_, s)| s.to_string())
                    .collect();
                let kept: Vec<String> = sentence
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| !c.breakdown.skipped_positions.contains(&(*i as u32)))
                    .map(|(_, w)| w.clone())
                    .collect();
                assert_eq!(leaves, kept, "{text}\n{sentence:?}");
                derive_action_sequence(&t, &leaves, &c.fragments)
                    .unwrap_or_else(|e| panic!("{e}\n{text}\n{sentence:?}"));
            }
        }
    }
}

#[test]
fn packed_forests_count_exactly_as_many_trees_as_the_grammar_allows() {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut nonzero = 0usize;
    for _ in 0..15 {
        let text = random_grammar_text(&mut rng, &GenConfig::default());
        let (g, t) = build(&text);
        for sentence in all_sentences(&terminal_words(&g), 4) {
            let tokens = g.tokenize(&sentence);
            let out = parse_with(&t, &tokens, &ParseConfig::baseline());
            let expect = count_parse_trees(&g, &tokens);
            assert_eq!(count_trees(&out), expect, "{text}\nsentence: {sentence:?}");
            nonzero += (expect > 0) as usize;
        }
    }
    assert!(nonzero > 0);
}

const AMBIG_SKIP: &str = "\
%start X
%fragment X
X -> a b ;
X -> a q b ;
a : a
b : b
zzz : q
";

fn candidate_signature(fragments: &[Tree], skipped: &std::collections::BTreeSet<u32>) -> String {
    format!("{} | skipped {:?}", fragments_to_sexpr(fragments), skipped)
}

#[test]
fn packing_discards_the_skippier_duplicate_analysis() {
    // "a zzz b" derives X both by reading zzz (no skips) and by skipping
    // it (one skip). Both land on the same packed node, which must keep
    // only the cheaper reading.
    let (g, t) = build(AMBIG_SKIP);
    let tokens = g.tokenize(&["a".into(), "zzz".into(), "b".into()] as &[String]);
    let out = parse_with(&t, &tokens, &robust_no_subs(BeamConfig::disabled()));
    assert!(out.accepted());
    assert_eq!(out.min_skips(), Some(0));
    let all = unpack_all(&out, &g, &FeatureWeights::default(), 1000);
    let full_span: Vec<_> =
        all.iter().filter(|u| u.fragments.len() == 1 && u.breakdown.fragment_count == 1).collect();
    assert!(
        full_span
            .iter()
            .all(|u| u.breakdown.skipped_positions.is_empty()),
        "a skipping analysis survived packing: {:?}",
        full_span
            .iter()
            .map(|u| candidate_signature(&u.fragments, &u.breakdown.skipped_positions))
            .collect::<Vec<_>>()
    );
    assert!(full_span.iter().any(|u| fragments_to_sexpr(&u.fragments).contains("(q zzz)")));
}

#[test]
fn forest_probabilities_add_up_like_a_replayed_action_trace() {
    // Train G2-style arithmetic on sampled derivations, robust-parse a
    // noisy input, and check each extracted candidate's pscore against an
    // independent replay of its own action sequence.
    let text = "\
%start E
%fragment E
E -> E plus E ;
E -> a ;
a : a
plus : plus
";
    let (g, t) = build(text);
    let mut rng = ChaCha8Rng::seed_from_u64(505);
    let start = g.nt_id("E").unwrap();
    let mut counts = ActionCounts::new();
    let mut observed = 0;
    while observed < 25 {
        let Some((words, tree)) = sample_derivation(&g, start, &mut rng, 5) else { continue };
        let trace = derive_action_sequence(&t, &words, std::slice::from_ref(&tree))
            .unwrap_or_else(|e| panic!("{e}\n{words:?}"));
        counts.observe(&trace);
        observed += 1;
    }
    let trained = train(&t, &counts, 0.5);

    let sentence: Vec<String> =
        "a plus zzz a plus a".split(' ').map(str::to_string).collect();
    let tokens = g.tokenize(&sentence);
    let out = parse_with(&trained, &tokens, &robust_no_subs(BeamConfig::disabled()));
    assert!(out.accepted());
    let cands = glrstar_core::best_candidates(
        &out,
        &g,
        &FeatureWeights::default(),
        10,
        glrstar_core::RankingMode::Full,
    );
    assert!(cands.len() >= 2);
    for c in &cands {
        let leaves: Vec<String> =
            c.fragments.iter().flat_map(|f| f.leaves()).map(|(_, s)| s.to_string()).collect();
        let trace = derive_action_sequence(&trained, &leaves, &c.fragments).unwrap();
        let replayed = trace_log10_pscore(&trained, &trace);
        assert!(
            (c.breakdown.log10_pscore - replayed).abs() < 1e-9,
            "stored {} vs replayed {}",
            c.breakdown.log10_pscore,
            replayed
        );
    }
}

#[test]
fn substitution_candidates_replay_through_the_substituted_surface() {
    // A substituted token parses as its replacement word; the stored
    // pscore must match a replay of the tree with that replacement.
    let text = "\
%start S
%fragment S
S -> num num ;
two : num
";
    let (mut g, _) = {
        let g = load_grammar(text).unwrap().grammar.augment();
        let t = build_table::<f64>(&g).unwrap();
        (g, t)
    };
    g.set_substitutions([("too".to_string(), vec!["two".to_string()])].into_iter().collect());
    let t: ParseTable = build_table(&g).unwrap();
    let tokens = g.tokenize(&["two".to_string(), "too".to_string()]);
    let out = parse_robust(&t, &tokens, BeamConfig::default());
    assert!(out.accepted());
    let best = &glrstar_core::best_candidates(
        &out,
        &g,
        &FeatureWeights::default(),
        1,
        glrstar_core::RankingMode::Full,
    )[0];
    assert_eq!(best.breakdown.sub_count, 1);
    let leaves: Vec<String> =
        best.fragments.iter().flat_map(|f| f.leaves()).map(|(_, s)| s.to_string()).collect();
    assert_eq!(leaves, vec!["two", "two"]);
    derive_action_sequence(&t, &leaves, &best.fragments).unwrap();
}
