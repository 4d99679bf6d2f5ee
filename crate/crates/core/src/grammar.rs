//! Context-free grammars with lexicon and substitution lists.
//!
//! The text format is line based:
//!
//! ```text
//! %start S
//! %fragment S
//! S -> NP VP ;
//! NP -> det n ;
//! NP -> ;            # epsilon
//! the : det
//! # comment
//! ```
//!
//! Symbol kind is inferred from the first character: uppercase names are
//! nonterminals, lowercase names are terminals. Lexicon lines map surface
//! words to one or more terminals. Substitution lists (`heard => replacement`)
//! live in a separate file and are attached to a loaded grammar.
//!
//! [`Grammar::augment`] wraps the user grammar with the internal fragment
//! layer (`START' -> FRAGS`, `FRAGS -> FRAGS FRAG | FRAG`, `FRAG -> R` for
//! every fragment root `R`), which is what lets the parser return analyses
//! made of several top-level fragments.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::bytes::{ByteReader, ByteWriter, CodecError};

/// Index of a terminal in [`Grammar::terminals`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct TermId(pub u32);

/// Index of a nonterminal in [`Grammar::nonterminals`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct NtId(pub u32);

/// Index of a rule in [`Grammar::rules`].
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub struct RuleId(pub u32);

/// A grammar symbol: terminal or nonterminal.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize, Deserialize)]
pub enum Sym {
    Term(TermId),
    Nt(NtId),
}

/// One production. The rule's id is its index in the grammar's rule list.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Rule {
    pub lhs: NtId,
    pub rhs: Vec<Sym>,
}

/// Bookkeeping for the internal symbols added by [`Grammar::augment`].
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct InternalSymbols {
    /// Fresh start symbol (`START'`); the only symbol the accept action sees.
    pub start2: NtId,
    /// Fragment-sequence spine (`FRAGS`).
    pub frags: NtId,
    /// Single-fragment wrapper (`FRAG`); one reduce per fragment.
    pub frag: NtId,
    /// Rules at or past this id are internal.
    pub first_internal_rule: RuleId,
}

/// A grammar plus lexicon and optional substitution list.
#[derive(Clone, PartialEq, Debug)]
pub struct Grammar {
    terms: Vec<String>,
    nts: Vec<String>,
    rules: Vec<Rule>,
    rules_by_lhs: Vec<Vec<RuleId>>,
    start: NtId,
    fragment_roots: Vec<NtId>,
    lexicon: BTreeMap<String, Vec<TermId>>,
    substitutions: BTreeMap<String, Vec<String>>,
    internal: Option<InternalSymbols>,
}

/// Result of a successful [`load_grammar`] call.
#[derive(Clone, Debug)]
pub struct Loaded {
    pub grammar: Grammar,
    /// Non-fatal findings: unproducible terminals, collapsed duplicate rules.
    pub warnings: Vec<String>,
}

/// A load-time problem with its 1-based source line.
#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct LoadError {
    pub line: usize,
    pub message: String,
}

/// One input word with its lexical readings.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Token {
    pub position: usize,
    pub surface: String,
    /// Terminals the surface word itself can be. Empty for unknown words.
    pub terms: Vec<TermId>,
    /// Readings reachable through the substitution list.
    pub alternatives: Vec<SubstReading>,
}

/// One substitution-list reading of a token.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct SubstReading {
    /// Replacement surface form the lexicon entries belong to.
    pub surface: String,
    pub terms: Vec<TermId>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum SymKind {
    Term,
    Nt,
}

fn classify(name: &str) -> Option<SymKind> {
    let mut chars = name.chars();
    let first = chars.next()?;
    if !first.is_ascii_alphabetic() {
        return None;
    }
    if !chars.all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '\'' | '-')) {
        return None;
    }
    Some(if first.is_ascii_uppercase() {
        SymKind::Nt
    } else {
        SymKind::Term
    })
}

fn valid_word(word: &str) -> bool {
    !word.is_empty() && word.chars().all(|c| !c.is_whitespace() && c != '#' && c != ':')
}

/// Strip a `#` comment; the whole remainder of the line is comment text.
fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

struct LoadState {
    terms: Vec<String>,
    nts: Vec<String>,
    term_ids: HashMap<String, TermId>,
    nt_ids: HashMap<String, NtId>,
    rules: Vec<Rule>,
    rule_lines: Vec<usize>,
    start: Option<(NtId, usize)>,
    fragment_roots: Vec<NtId>,
    lexicon: BTreeMap<String, Vec<TermId>>,
    errors: Vec<LoadError>,
    warnings: Vec<String>,
}

impl LoadState {
    fn new() -> Self {
        LoadState {
            terms: Vec::new(),
            nts: Vec::new(),
            term_ids: HashMap::new(),
            nt_ids: HashMap::new(),
            rules: Vec::new(),
            rule_lines: Vec::new(),
            start: None,
            fragment_roots: Vec::new(),
            lexicon: BTreeMap::new(),
            errors: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn err(&mut self, line: usize, message: impl Into<String>) {
        self.errors.push(LoadError {
            line,
            message: message.into(),
        });
    }

    fn intern_term(&mut self, name: &str) -> TermId {
        if let Some(&id) = self.term_ids.get(name) {
            return id;
        }
        let id = TermId(self.terms.len() as u32);
        self.terms.push(name.to_string());
        self.term_ids.insert(name.to_string(), id);
        id
    }

    fn intern_nt(&mut self, name: &str) -> NtId {
        if let Some(&id) = self.nt_ids.get(name) {
            return id;
        }
        let id = NtId(self.nts.len() as u32);
        self.nts.push(name.to_string());
        self.nt_ids.insert(name.to_string(), id);
        id
    }

    /// Classify and intern a symbol occurring in a rule, or record an error.
    fn intern_sym(&mut self, name: &str, line: usize) -> Option<Sym> {
        match classify(name) {
            Some(SymKind::Nt) => Some(Sym::Nt(self.intern_nt(name))),
            Some(SymKind::Term) => Some(Sym::Term(self.intern_term(name))),
            None => {
                self.err(line, format!("invalid symbol `{name}`"));
                None
            }
        }
    }
}

/// Parse grammar text. All problems are collected; the grammar is returned
/// only when there are none.
pub fn load_grammar(text: &str) -> Result<Loaded, Vec<LoadError>> {
    let mut st = LoadState::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('%') {
            parse_directive(&mut st, rest, line_no);
        } else if line.contains("->") {
            parse_rule(&mut st, line, line_no);
        } else if line.contains(':') {
            parse_lexicon(&mut st, line, line_no);
        } else {
            st.err(line_no, format!("unrecognized line `{line}`"));
        }
    }

    // Syntax errors make the semantic pass report nonsense (a rule that
    // failed to parse looks like a missing declaration), so stop here.
    if !st.errors.is_empty() {
        return Err(st.errors);
    }
    finish_load(st)
}

fn parse_directive(st: &mut LoadState, rest: &str, line_no: usize) {
    let mut toks = rest.split_whitespace();
    match toks.next() {
        Some("start") => {
            let names: Vec<&str> = toks.collect();
            if names.len() != 1 {
                st.err(line_no, "%start expects exactly one nonterminal");
                return;
            }
            match classify(names[0]) {
                Some(SymKind::Nt) => {
                    let id = st.intern_nt(names[0]);
                    if st.start.is_some() {
                        st.err(line_no, "duplicate %start directive");
                    } else {
                        st.start = Some((id, line_no));
                    }
                }
                _ => st.err(line_no, "start symbol must be a nonterminal"),
            }
        }
        Some("fragment") => {
            let names: Vec<&str> = toks.collect();
            if names.is_empty() {
                st.err(line_no, "%fragment expects at least one nonterminal");
            }
            for name in names {
                match classify(name) {
                    Some(SymKind::Nt) => {
                        let id = st.intern_nt(name);
                        if !st.fragment_roots.contains(&id) {
                            st.fragment_roots.push(id);
                        }
                    }
                    _ => st.err(line_no, format!("fragment root `{name}` must be a nonterminal")),
                }
            }
        }
        Some(other) => st.err(line_no, format!("unknown directive `%{other}`")),
        None => st.err(line_no, "empty directive"),
    }
}

fn parse_rule(st: &mut LoadState, line: &str, line_no: usize) {
    let (lhs_part, rhs_part) = line.split_once("->").expect("caller checked");
    let lhs_toks: Vec<&str> = lhs_part.split_whitespace().collect();
    if lhs_toks.len() != 1 {
        st.err(line_no, "rule needs exactly one left-hand-side symbol");
        return;
    }
    let lhs = match classify(lhs_toks[0]) {
        Some(SymKind::Nt) => st.intern_nt(lhs_toks[0]),
        Some(SymKind::Term) => {
            st.err(line_no, format!("rule left-hand side `{}` must be a nonterminal", lhs_toks[0]));
            return;
        }
        None => {
            st.err(line_no, format!("invalid symbol `{}`", lhs_toks[0]));
            return;
        }
    };

    let toks: Vec<&str> = rhs_part.split_whitespace().collect();
    let semi = match toks.iter().position(|t| *t == ";") {
        Some(i) => i,
        None => {
            st.err(line_no, "rule is missing terminating `;`");
            return;
        }
    };
    if semi + 1 != toks.len() {
        st.err(line_no, "trailing garbage after `;`");
        return;
    }

    let mut rhs = Vec::with_capacity(semi);
    let mut ok = true;
    for tok in &toks[..semi] {
        match st.intern_sym(tok, line_no) {
            Some(sym) => rhs.push(sym),
            None => ok = false,
        }
    }
    if ok {
        st.rules.push(Rule { lhs, rhs });
        st.rule_lines.push(line_no);
    }
}

fn parse_lexicon(st: &mut LoadState, line: &str, line_no: usize) {
    let (word_part, terms_part) = line.split_once(':').expect("caller checked");
    let word = word_part.trim();
    if !valid_word(word) || word.split_whitespace().count() != 1 {
        st.err(line_no, format!("invalid lexicon word `{word}`"));
        return;
    }
    let names: Vec<&str> = terms_part.split_whitespace().collect();
    if names.is_empty() {
        st.err(line_no, "lexicon entry needs at least one terminal");
        return;
    }
    let mut ids = Vec::new();
    for name in names {
        match classify(name) {
            Some(SymKind::Term) => ids.push(st.intern_term(name)),
            Some(SymKind::Nt) => {
                st.err(line_no, format!("lexicon entry maps to nonterminal `{name}`"));
            }
            None => st.err(line_no, format!("invalid symbol `{name}`")),
        }
    }
    let slot = st.lexicon.entry(word.to_string()).or_default();
    slot.extend(ids);
    slot.sort_unstable();
    slot.dedup();
}

fn finish_load(mut st: LoadState) -> Result<Loaded, Vec<LoadError>> {
    // Collapse duplicate rules, keeping first occurrence order.
    let mut seen: HashMap<(NtId, Vec<Sym>), usize> = HashMap::new();
    let mut rules = Vec::new();
    for (rule, line) in st.rules.iter().zip(&st.rule_lines) {
        let key = (rule.lhs, rule.rhs.clone());
        if seen.contains_key(&key) {
            st.warnings.push(format!(
                "line {line}: duplicate rule `{}` collapsed",
                rule_display(&st.nts, &st.terms, rule)
            ));
        } else {
            seen.insert(key, rules.len());
            rules.push(rule.clone());
        }
    }
    st.rules = rules;

    let start = match st.start {
        Some((id, _)) => id,
        None => {
            st.err(0, "missing %start declaration");
            NtId(0)
        }
    };
    if st.rules.is_empty() {
        st.err(0, "grammar has no rules");
    }

    // Every nonterminal mentioned anywhere must be defined by some rule.
    let defined: HashSet<NtId> = st.rules.iter().map(|r| r.lhs).collect();
    for (i, name) in st.nts.iter().enumerate() {
        if !defined.contains(&NtId(i as u32)) {
            st.errors.push(LoadError {
                line: 0,
                message: format!("undeclared symbol `{name}` (no rule defines it)"),
            });
        }
    }

    // Terminals used in rules should be producible by the lexicon.
    let producible: HashSet<TermId> = st.lexicon.values().flatten().copied().collect();
    for rule in &st.rules {
        for sym in &rule.rhs {
            if let Sym::Term(t) = sym {
                if !producible.contains(t) {
                    let name = &st.terms[t.0 as usize];
                    let w = format!("terminal `{name}` is not producible by any lexicon entry");
                    if !st.warnings.contains(&w) {
                        st.warnings.push(w);
                    }
                }
            }
        }
    }

    if !st.errors.is_empty() {
        return Err(st.errors);
    }

    let mut fragment_roots = st.fragment_roots;
    if !fragment_roots.contains(&start) {
        fragment_roots.push(start);
    }
    fragment_roots.sort_unstable();

    let mut rules_by_lhs = vec![Vec::new(); st.nts.len()];
    for (i, rule) in st.rules.iter().enumerate() {
        rules_by_lhs[rule.lhs.0 as usize].push(RuleId(i as u32));
    }

    Ok(Loaded {
        grammar: Grammar {
            terms: st.terms,
            nts: st.nts,
            rules: st.rules,
            rules_by_lhs,
            start,
            fragment_roots,
            lexicon: st.lexicon,
            substitutions: BTreeMap::new(),
            internal: None,
        },
        warnings: st.warnings,
    })
}

fn rule_display(nts: &[String], terms: &[String], rule: &Rule) -> String {
    let mut s = format!("{} ->", nts[rule.lhs.0 as usize]);
    for sym in &rule.rhs {
        s.push(' ');
        match sym {
            Sym::Term(t) => s.push_str(&terms[t.0 as usize]),
            Sym::Nt(n) => s.push_str(&nts[n.0 as usize]),
        }
    }
    s
}

/// Parse a substitution list (`heard => replacement`, one pair per line).
pub fn load_substitutions(text: &str) -> Result<BTreeMap<String, Vec<String>>, Vec<LoadError>> {
    let mut map: BTreeMap<String, Vec<String>> = BTreeMap::new();
    let mut errors = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        let Some((heard, replacement)) = line.split_once("=>") else {
            errors.push(LoadError {
                line: line_no,
                message: format!("expected `heard => replacement`, got `{line}`"),
            });
            continue;
        };
        let heard = heard.trim();
        let replacement = replacement.trim();
        if !valid_word(heard)
            || !valid_word(replacement)
            || heard.split_whitespace().count() != 1
            || replacement.split_whitespace().count() != 1
        {
            errors.push(LoadError {
                line: line_no,
                message: format!("invalid substitution pair `{line}`"),
            });
            continue;
        }
        let slot = map.entry(heard.to_string()).or_default();
        if !slot.contains(&replacement.to_string()) {
            slot.push(replacement.to_string());
        }
    }
    if errors.is_empty() {
        Ok(map)
    } else {
        Err(errors)
    }
}

impl Grammar {
    pub fn terminals(&self) -> &[String] {
        &self.terms
    }

    pub fn nonterminals(&self) -> &[String] {
        &self.nts
    }

    pub fn rules(&self) -> &[Rule] {
        &self.rules
    }

    pub fn rule(&self, id: RuleId) -> &Rule {
        &self.rules[id.0 as usize]
    }

    pub fn rules_for(&self, nt: NtId) -> &[RuleId] {
        &self.rules_by_lhs[nt.0 as usize]
    }

    pub fn start(&self) -> NtId {
        self.start
    }

    pub fn fragment_roots(&self) -> &[NtId] {
        &self.fragment_roots
    }

    pub fn lexicon(&self) -> &BTreeMap<String, Vec<TermId>> {
        &self.lexicon
    }

    pub fn substitutions(&self) -> &BTreeMap<String, Vec<String>> {
        &self.substitutions
    }

    pub fn set_substitutions(&mut self, subs: BTreeMap<String, Vec<String>>) {
        self.substitutions = subs;
    }

    pub fn term_name(&self, id: TermId) -> &str {
        &self.terms[id.0 as usize]
    }

    pub fn nt_name(&self, id: NtId) -> &str {
        &self.nts[id.0 as usize]
    }

    pub fn sym_name(&self, sym: Sym) -> &str {
        match sym {
            Sym::Term(t) => self.term_name(t),
            Sym::Nt(n) => self.nt_name(n),
        }
    }

    pub fn term_id(&self, name: &str) -> Option<TermId> {
        self.terms.iter().position(|t| t == name).map(|i| TermId(i as u32))
    }

    pub fn nt_id(&self, name: &str) -> Option<NtId> {
        self.nts.iter().position(|t| t == name).map(|i| NtId(i as u32))
    }

    pub fn is_augmented(&self) -> bool {
        self.internal.is_some()
    }

    pub fn internal_symbols(&self) -> Option<&InternalSymbols> {
        self.internal.as_ref()
    }

    pub fn is_internal_nt(&self, nt: NtId) -> bool {
        match &self.internal {
            Some(i) => nt == i.start2 || nt == i.frags || nt == i.frag,
            None => false,
        }
    }

    pub fn is_internal_rule(&self, rule: RuleId) -> bool {
        match &self.internal {
            Some(i) => rule >= i.first_internal_rule,
            None => false,
        }
    }

    /// True for the internal `FRAG -> R` rules; each use marks one fragment.
    pub fn is_fragment_rule(&self, rule: RuleId) -> bool {
        match &self.internal {
            Some(i) => self.is_internal_rule(rule) && self.rules[rule.0 as usize].lhs == i.frag,
            None => false,
        }
    }

    pub fn user_rule_count(&self) -> usize {
        match &self.internal {
            Some(i) => i.first_internal_rule.0 as usize,
            None => self.rules.len(),
        }
    }

    /// Wrap the grammar in the internal fragment layer. Idempotent: an
    /// already-augmented grammar is returned unchanged.
    pub fn augment(&self) -> Grammar {
        if self.internal.is_some() {
            return self.clone();
        }
        let mut g = self.clone();
        let start2 = g.fresh_nt("START'");
        let frags = g.fresh_nt("FRAGS");
        let frag = g.fresh_nt("FRAG");
        let first_internal_rule = RuleId(g.rules.len() as u32);

        g.rules.push(Rule { lhs: start2, rhs: vec![Sym::Nt(frags)] });
        g.rules.push(Rule { lhs: frags, rhs: vec![Sym::Nt(frags), Sym::Nt(frag)] });
        g.rules.push(Rule { lhs: frags, rhs: vec![Sym::Nt(frag)] });
        for &root in &self.fragment_roots {
            g.rules.push(Rule { lhs: frag, rhs: vec![Sym::Nt(root)] });
        }

        g.rules_by_lhs = vec![Vec::new(); g.nts.len()];
        for (i, rule) in g.rules.iter().enumerate() {
            g.rules_by_lhs[rule.lhs.0 as usize].push(RuleId(i as u32));
        }
        g.internal = Some(InternalSymbols { start2, frags, frag, first_internal_rule });
        g
    }

    fn fresh_nt(&mut self, base: &str) -> NtId {
        let taken = |name: &str, g: &Grammar| {
            g.nts.iter().any(|n| n == name) || g.terms.iter().any(|t| t == name)
        };
        let mut name = base.to_string();
        let mut n = 1usize;
        while taken(&name, self) {
            n += 1;
            name = format!("{base}{n}");
        }
        let id = NtId(self.nts.len() as u32);
        self.nts.push(name);
        id
    }

    /// Look up every word; unknown words get an empty reading set but keep
    /// their position so they can be skipped and reported.
    pub fn tokenize<S: AsRef<str>>(&self, words: &[S]) -> Vec<Token> {
        words
            .iter()
            .enumerate()
            .map(|(position, w)| {
                let surface = w.as_ref().to_string();
                let terms = self.lexicon.get(&surface).cloned().unwrap_or_default();
                let alternatives = self
                    .substitutions
                    .get(&surface)
                    .map(|repls| {
                        repls
                            .iter()
                            .map(|r| SubstReading {
                                surface: r.clone(),
                                terms: self.lexicon.get(r).cloned().unwrap_or_default(),
                            })
                            .collect()
                    })
                    .unwrap_or_default();
                Token { position, surface, terms, alternatives }
            })
            .collect()
    }

    /// Render the user-visible part of the grammar back to file text.
    /// Internal augmentation symbols are never written.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("%start {}\n", self.nt_name(self.start)));
        for &root in &self.fragment_roots {
            out.push_str(&format!("%fragment {}\n", self.nt_name(root)));
        }
        for rule in &self.rules[..self.user_rule_count()] {
            out.push_str(&rule_display(&self.nts, &self.terms, rule));
            out.push_str(" ;\n");
        }
        for (word, terms) in &self.lexicon {
            let names: Vec<&str> = terms.iter().map(|&t| self.term_name(t)).collect();
            out.push_str(&format!("{word} : {}\n", names.join(" ")));
        }
        out
    }

    /// Render the substitution list back to file text.
    pub fn substitutions_to_text(&self) -> String {
        let mut out = String::new();
        for (heard, repls) in &self.substitutions {
            for repl in repls {
                out.push_str(&format!("{heard} => {repl}\n"));
            }
        }
        out
    }

    /// Canonical binary form; also the input of [`Grammar::content_hash`].
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = ByteWriter::new();
        w.u32(self.terms.len() as u32);
        for t in &self.terms {
            w.str(t);
        }
        w.u32(self.nts.len() as u32);
        for n in &self.nts {
            w.str(n);
        }
        w.u32(self.rules.len() as u32);
        for rule in &self.rules {
            w.u32(rule.lhs.0);
            w.u32(rule.rhs.len() as u32);
            for sym in &rule.rhs {
                match sym {
                    Sym::Term(t) => {
                        w.u8(0);
                        w.u32(t.0);
                    }
                    Sym::Nt(n) => {
                        w.u8(1);
                        w.u32(n.0);
                    }
                }
            }
        }
        w.u32(self.start.0);
        w.u32(self.fragment_roots.len() as u32);
        for root in &self.fragment_roots {
            w.u32(root.0);
        }
        w.u32(self.lexicon.len() as u32);
        for (word, terms) in &self.lexicon {
            w.str(word);
            w.u32(terms.len() as u32);
            for t in terms {
                w.u32(t.0);
            }
        }
        w.u32(self.substitutions.len() as u32);
        for (heard, repls) in &self.substitutions {
            w.str(heard);
            w.u32(repls.len() as u32);
            for r in repls {
                w.str(r);
            }
        }
        match &self.internal {
            None => w.u8(0),
            Some(i) => {
                w.u8(1);
                w.u32(i.start2.0);
                w.u32(i.frags.0);
                w.u32(i.frag.0);
                w.u32(i.first_internal_rule.0);
            }
        }
        w.into_bytes()
    }

    pub fn from_bytes(r: &mut ByteReader<'_>) -> Result<Grammar, CodecError> {
        let n_terms = r.u32()? as usize;
        let mut terms = Vec::with_capacity(n_terms);
        for _ in 0..n_terms {
            terms.push(r.str()?);
        }
        let n_nts = r.u32()? as usize;
        let mut nts = Vec::with_capacity(n_nts);
        for _ in 0..n_nts {
            nts.push(r.str()?);
        }
        let n_rules = r.u32()? as usize;
        let mut rules = Vec::with_capacity(n_rules);
        for _ in 0..n_rules {
            let lhs = NtId(r.u32()?);
            let len = r.u32()? as usize;
            let mut rhs = Vec::with_capacity(len);
            for _ in 0..len {
                let kind = r.u8()?;
                let id = r.u32()?;
                rhs.push(match kind {
                    0 => Sym::Term(TermId(id)),
                    1 => Sym::Nt(NtId(id)),
                    _ => return Err(CodecError::corrupt("bad symbol tag")),
                });
            }
            rules.push(Rule { lhs, rhs });
        }
        let start = NtId(r.u32()?);
        let n_roots = r.u32()? as usize;
        let mut fragment_roots = Vec::with_capacity(n_roots);
        for _ in 0..n_roots {
            fragment_roots.push(NtId(r.u32()?));
        }
        let n_lex = r.u32()? as usize;
        let mut lexicon = BTreeMap::new();
        for _ in 0..n_lex {
            let word = r.str()?;
            let n = r.u32()? as usize;
            let mut ids = Vec::with_capacity(n);
            for _ in 0..n {
                ids.push(TermId(r.u32()?));
            }
            lexicon.insert(word, ids);
        }
        let n_subs = r.u32()? as usize;
        let mut substitutions = BTreeMap::new();
        for _ in 0..n_subs {
            let heard = r.str()?;
            let n = r.u32()? as usize;
            let mut repls = Vec::with_capacity(n);
            for _ in 0..n {
                repls.push(r.str()?);
            }
            substitutions.insert(heard, repls);
        }
        let internal = match r.u8()? {
            0 => None,
            1 => Some(InternalSymbols {
                start2: NtId(r.u32()?),
                frags: NtId(r.u32()?),
                frag: NtId(r.u32()?),
                first_internal_rule: RuleId(r.u32()?),
            }),
            _ => return Err(CodecError::corrupt("bad internal-symbols tag")),
        };

        let mut rules_by_lhs = vec![Vec::new(); nts.len()];
        for (i, rule) in rules.iter().enumerate() {
            if rule.lhs.0 as usize >= nts.len() {
                return Err(CodecError::corrupt("rule lhs out of range"));
            }
            rules_by_lhs[rule.lhs.0 as usize].push(RuleId(i as u32));
        }
        Ok(Grammar {
            terms,
            nts,
            rules,
            rules_by_lhs,
            start,
            fragment_roots,
            lexicon,
            substitutions,
            internal,
        })
    }

    /// SHA-256 of the canonical binary form, hex encoded.
    pub fn content_hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let digest = Sha256::digest(self.to_bytes());
        let mut s = String::with_capacity(64);
        for b in digest {
            s.push_str(&format!("{b:02x}"));
        }
        s
    }
}

impl fmt::Display for Grammar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

#[cfg(test)]
pub(crate) const G1_TEXT: &str = "\
%start S
%fragment S
S -> NP VP ;
NP -> det n ;
NP -> n ;
VP -> v NP ;
the : det
dog : n
cat : n
saw : v
";

#[cfg(test)]
pub(crate) const G2_TEXT: &str = "\
%start E
E -> E plus E ;
E -> a ;
a : a
plus : plus
";
