//! Brute-force reference implementations used to cross-check the parser.
//!
//! Nothing here shares code with the engine under test: recognition is a
//! chart-style dynamic program straight off the grammar rules, skipping
//! is an exhaustive sweep over input subsequences, and tree counting is a
//! span DP. Slow on purpose; trust comes from independence.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::Rng;

use glrstar_core::grammar::{Grammar, NtId, Sym, TermId, Token};
use glrstar_core::tree::Tree;

/// Shape knobs for [`random_grammar_text`].
#[derive(Clone, Debug)]
pub struct GenConfig {
    pub max_rules: usize,
    pub max_terminals: usize,
    pub max_nonterminals: usize,
    pub max_rhs_len: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        Self { max_rules: 12, max_terminals: 4, max_nonterminals: 4, max_rhs_len: 3 }
    }
}

/// Generate a random epsilon-free grammar in source form.
///
/// Shape guarantees: every nonterminal has at least one all-terminal rule
/// (so every symbol derives something), unary nonterminal rules only point
/// at higher-numbered nonterminals (so no unary cycles), and each terminal
/// doubles as its own lexicon word. The start symbol is N0; all
/// nonterminals are fragment roots so fragmented analyses stay in play.
pub fn random_grammar_text<R: Rng>(rng: &mut R, cfg: &GenConfig) -> String {
    let n_terms = rng.gen_range(2..=cfg.max_terminals.max(2));
    let n_nts = rng.gen_range(1..=cfg.max_nonterminals.max(1));
    let terms: Vec<String> = (0..n_terms).map(|i| format!("t{i}")).collect();
    let nts: Vec<String> = (0..n_nts).map(|i| format!("N{i}")).collect();

    let mut rules: Vec<(usize, Vec<String>)> = Vec::new();
    for nt in 0..n_nts {
        let len = rng.gen_range(1..=cfg.max_rhs_len);
        let rhs = (0..len).map(|_| terms.choose(rng).unwrap().clone()).collect();
        rules.push((nt, rhs));
    }
    while rules.len() < cfg.max_rules && rng.gen_bool(0.8) {
        let lhs = rng.gen_range(0..n_nts);
        let len = rng.gen_range(1..=cfg.max_rhs_len);
        let rhs: Vec<String> = (0..len)
            .map(|_| {
                // Unary nonterminal rules must point down the order.
                let nt_ok = len > 1 || lhs + 1 < n_nts;
                if nt_ok && rng.gen_bool(0.4) {
                    let lo = if len == 1 { lhs + 1 } else { 0 };
                    nts[rng.gen_range(lo..n_nts)].clone()
                } else {
                    terms.choose(rng).unwrap().clone()
                }
            })
            .collect();
        if !rules.iter().any(|(l, r)| *l == lhs && *r == rhs) {
            rules.push((lhs, rhs));
        }
    }

    let mut out = String::new();
    out.push_str("%start N0\n");
    out.push_str(&format!("%fragment {}\n", nts.join(" ")));
    for (lhs, rhs) in &rules {
        out.push_str(&format!("{} -> {} ;\n", nts[*lhs], rhs.join(" ")));
    }
    for t in &terms {
        out.push_str(&format!("{t} : {t}\n"));
    }
    out
}

/// Terminal vocabulary of a generated grammar, in declaration order.
pub fn terminal_words(g: &Grammar) -> Vec<String> {
    g.lexicon().keys().cloned().collect()
}

/// All word sequences over `words` with length in `1..=max_len`, shortest
/// first, lexicographic within a length.
pub fn all_sentences(words: &[String], max_len: usize) -> Vec<Vec<String>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<String>> = vec![Vec::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for prefix in &layer {
            for w in words {
                let mut s = prefix.clone();
                s.push(w.clone());
                next.push(s);
            }
        }
        out.extend(next.iter().cloned());
        layer = next;
    }
    out
}

/// Chart recognizer for the fragment-sequence language of an augmented
/// grammar: the input is accepted when it splits into consecutive spans,
/// each derivable from some fragment root.
pub struct Recognizer<'g> {
    grammar: &'g Grammar,
    fragment_roots: Vec<NtId>,
}

impl<'g> Recognizer<'g> {
    pub fn new(grammar: &'g Grammar) -> Self {
        let fragment_roots = grammar.fragment_roots().to_vec();
        Self { grammar, fragment_roots }
    }

    pub fn accepts(&self, tokens: &[Token]) -> bool {
        if tokens.is_empty() {
            return false;
        }
        let derives = self.derives_table(tokens);
        // prefix[i]: tokens[..i] splits into complete fragments.
        let n = tokens.len();
        let mut prefix = vec![false; n + 1];
        prefix[0] = true;
        for j in 1..=n {
            'split: for i in 0..j {
                if !prefix[i] {
                    continue;
                }
                for &root in &self.fragment_roots {
                    if derives[&(root, i, j)] {
                        prefix[j] = true;
                        break 'split;
                    }
                }
            }
        }
        prefix[n]
    }

    /// derives[(nt, i, j)]: nt derives tokens[i..j). Dense bottom-up fill
    /// by span length; unary rules are iterated to fixpoint within a span.
    fn derives_table(&self, tokens: &[Token]) -> BTreeMap<(NtId, usize, usize), bool> {
        let n = tokens.len();
        let nts: Vec<NtId> = (0..self.grammar.nonterminals().len()).map(|i| NtId(i as u32)).collect();
        let mut table = BTreeMap::new();
        for len in 1..=n {
            for i in 0..=n - len {
                let j = i + len;
                for &nt in &nts {
                    table.insert((nt, i, j), false);
                }
                // Fixpoint: a unary rule N -> M can only fire after M is
                // known for this same span.
                loop {
                    let mut changed = false;
                    for &nt in &nts {
                        if table[&(nt, i, j)] {
                            continue;
                        }
                        let derivable = self.grammar.rules_for(nt).iter().any(|&r| {
                            self.rhs_matches(&self.grammar.rule(r).rhs, tokens, i, j, &table)
                        });
                        if derivable {
                            table.insert((nt, i, j), true);
                            changed = true;
                        }
                    }
                    if !changed {
                        break;
                    }
                }
            }
        }
        table
    }

    fn rhs_matches(
        &self,
        rhs: &[Sym],
        tokens: &[Token],
        i: usize,
        j: usize,
        table: &BTreeMap<(NtId, usize, usize), bool>,
    ) -> bool {
        match rhs {
            [] => i == j,
            [Sym::Term(t), rest @ ..] => {
                i < j && tokens[i].terms.contains(t) && self.rhs_matches(rest, tokens, i + 1, j, table)
            }
            [Sym::Nt(nt), rest @ ..] => (i + 1..=j).any(|k| {
                *table.get(&(*nt, i, k)).unwrap_or(&false)
                    && self.rhs_matches(rest, tokens, k, j, table)
            }),
        }
    }
}

/// Length of the longest nonempty parsable subsequence, by trying all
/// 2^n - 1 of them. None when nothing parses.
pub fn longest_parsable_subsequence(rec: &Recognizer<'_>, tokens: &[Token]) -> Option<usize> {
    let n = tokens.len();
    assert!(n <= 20, "exhaustive subsequence sweep wants short inputs");
    let mut best: Option<usize> = None;
    for mask in 1u32..(1 << n) {
        let picked: Vec<Token> = (0..n)
            .filter(|b| mask & (1 << b) != 0)
            .map(|b| tokens[b].clone())
            .collect();
        if best.map_or(true, |b| picked.len() > b) && rec.accepts(&picked) {
            best = Some(picked.len());
        }
    }
    best
}

/// Count the distinct fragment-sequence parse trees of the full input
/// (no skipping), straight off the grammar. Saturating.
pub fn count_parse_trees(g: &Grammar, tokens: &[Token]) -> u64 {
    let n = tokens.len();
    if n == 0 {
        return 0;
    }
    let mut counts: BTreeMap<(NtId, usize, usize), u64> = BTreeMap::new();
    let nts: Vec<NtId> = (0..g.nonterminals().len()).map(|i| NtId(i as u32)).collect();
    for len in 1..=n {
        for i in 0..=n - len {
            let j = i + len;
            // Nonterminal order respects unary rules: lower-indexed
            // nonterminals may reference higher-indexed ones over the same
            // span, so fill in reverse index order and iterate to fixpoint
            // for safety on hand-written grammars. The sweep cap keeps a
            // unary-cyclic grammar from looping; counts under one are a
            // best effort there.
            for _ in 0..nts.len() + 2 {
                let mut changed = false;
                for &nt in nts.iter().rev() {
                    let total: u64 = g
                        .rules_for(nt)
                        .iter()
                        .map(|&r| ways(g, &g.rule(r).rhs, tokens, i, j, &counts))
                        .fold(0, u64::saturating_add);
                    if counts.get(&(nt, i, j)).copied().unwrap_or(0) != total {
                        counts.insert((nt, i, j), total);
                        changed = true;
                    }
                }
                if !changed {
                    break;
                }
            }
        }
    }
    // Fragment-split DP mirroring the spine: ways[j] = Σ over last
    // fragment [i, j) of ways[i] * Σ_root counts(root, i, j).
    let roots = g.fragment_roots();
    let mut split = vec![0u64; n + 1];
    split[0] = 1;
    for j in 1..=n {
        for i in 0..j {
            if split[i] == 0 {
                continue;
            }
            let span: u64 = roots
                .iter()
                .map(|&r| counts.get(&(r, i, j)).copied().unwrap_or(0))
                .fold(0, u64::saturating_add);
            split[j] = split[j].saturating_add(split[i].saturating_mul(span));
        }
    }
    split[n]
}

fn ways(
    g: &Grammar,
    rhs: &[Sym],
    tokens: &[Token],
    i: usize,
    j: usize,
    counts: &BTreeMap<(NtId, usize, usize), u64>,
) -> u64 {
    match rhs {
        [] => (i == j) as u64,
        [Sym::Term(t), rest @ ..] => {
            if i < j && tokens[i].terms.contains(t) {
                ways(g, rest, tokens, i + 1, j, counts)
            } else {
                0
            }
        }
        [Sym::Nt(nt), rest @ ..] => (i + 1..=j)
            .map(|k| {
                counts
                    .get(&(*nt, i, k))
                    .copied()
                    .unwrap_or(0)
                    .saturating_mul(ways(g, rest, tokens, k, j, counts))
            })
            .fold(0, u64::saturating_add),
    }
}

/// Sample one derivation from `nt`, biased toward short yields as the
/// depth budget runs out. Returns the sentence words and the tree.
/// None when the budget is exhausted below a nonterminal that has no
/// all-terminal rule.
pub fn sample_derivation<R: Rng>(
    g: &Grammar,
    nt: NtId,
    rng: &mut R,
    depth_budget: usize,
) -> Option<(Vec<String>, Tree)> {
    let words_by_term = invert_lexicon(g);
    sample_nt(g, nt, rng, depth_budget, &words_by_term)
}

fn invert_lexicon(g: &Grammar) -> BTreeMap<TermId, Vec<String>> {
    let mut map: BTreeMap<TermId, Vec<String>> = BTreeMap::new();
    for (word, terms) in g.lexicon() {
        for &t in terms {
            map.entry(t).or_default().push(word.clone());
        }
    }
    map
}

fn sample_nt<R: Rng>(
    g: &Grammar,
    nt: NtId,
    rng: &mut R,
    budget: usize,
    words_by_term: &BTreeMap<TermId, Vec<String>>,
) -> Option<(Vec<String>, Tree)> {
    let rules = g.rules_for(nt);
    let candidates: Vec<_> = if budget == 0 {
        rules
            .iter()
            .copied()
            .filter(|&r| g.rule(r).rhs.iter().all(|s| matches!(s, Sym::Term(_))))
            .collect()
    } else {
        rules.to_vec()
    };
    let &rule = candidates.choose(rng)?;
    let mut words = Vec::new();
    let mut children = Vec::new();
    for sym in &g.rule(rule).rhs {
        match sym {
            Sym::Term(t) => {
                let word = words_by_term.get(t)?.choose(rng)?.clone();
                children.push(Tree::Leaf { term: g.term_name(*t).to_string(), surface: word.clone() });
                words.push(word);
            }
            Sym::Nt(child) => {
                let (w, t) =
                    sample_nt(g, *child, rng, budget.saturating_sub(1), words_by_term)?;
                words.extend(w);
                children.push(t);
            }
        }
    }
    Some((words, Tree::Node { label: g.nt_name(nt).to_string(), children }))
}
