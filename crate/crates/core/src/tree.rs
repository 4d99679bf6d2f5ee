//! Parse trees as S-expressions.
//!
//! Interior nodes are `(Label child ...)`; leaves are `(term surface)`.
//! A parse made of several fragments is written as a space-separated
//! sequence of top-level trees, which is also the treebank format:
//!
//! ```text
//! (S (NP (det the) (n dog)) (VP (v saw) (NP (det the) (n cat))))
//! ```

use std::fmt;

/// A user-facing parse tree. Internal fragment-layer symbols never appear;
/// fragments are separate [`Tree`] values instead.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub enum Tree {
    Node { label: String, children: Vec<Tree> },
    Leaf { term: String, surface: String },
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("tree syntax error at byte {offset}: {message}")]
pub struct TreeParseError {
    pub offset: usize,
    pub message: String,
}

impl Tree {
    pub fn label(&self) -> &str {
        match self {
            Tree::Node { label, .. } => label,
            Tree::Leaf { term, .. } => term,
        }
    }

    /// In-order terminal leaves as `(term, surface)` pairs.
    pub fn leaves(&self) -> Vec<(&str, &str)> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<(&'a str, &'a str)>) {
        match self {
            Tree::Leaf { term, surface } => out.push((term, surface)),
            Tree::Node { children, .. } => {
                for c in children {
                    c.collect_leaves(out);
                }
            }
        }
    }

    pub fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.write_sexpr(&mut s);
        s
    }

    fn write_sexpr(&self, out: &mut String) {
        match self {
            Tree::Leaf { term, surface } => {
                out.push('(');
                out.push_str(term);
                out.push(' ');
                out.push_str(surface);
                out.push(')');
            }
            Tree::Node { label, children } => {
                out.push('(');
                out.push_str(label);
                for c in children {
                    out.push(' ');
                    c.write_sexpr(out);
                }
                out.push(')');
            }
        }
    }
}

/// Render a fragment sequence as space-separated S-expressions.
pub fn fragments_to_sexpr(fragments: &[Tree]) -> String {
    fragments
        .iter()
        .map(Tree::to_sexpr)
        .collect::<Vec<_>>()
        .join(" ")
}

#[derive(Debug)]
enum SexprToken {
    Open(usize),
    Close(usize),
    Atom(usize, String),
}

fn lex(text: &str) -> Result<Vec<SexprToken>, TreeParseError> {
    let mut toks = Vec::new();
    let mut atom_start = None;
    for (i, c) in text.char_indices() {
        if c == '(' || c == ')' || c.is_whitespace() {
            if let Some(start) = atom_start.take() {
                toks.push(SexprToken::Atom(start, text[start..i].to_string()));
            }
            match c {
                '(' => toks.push(SexprToken::Open(i)),
                ')' => toks.push(SexprToken::Close(i)),
                _ => {}
            }
        } else if atom_start.is_none() {
            atom_start = Some(i);
        }
    }
    if let Some(start) = atom_start {
        toks.push(SexprToken::Atom(start, text[start..].to_string()));
    }
    Ok(toks)
}

/// Parse a space-separated sequence of trees (one or more fragments).
pub fn parse_forest(text: &str) -> Result<Vec<Tree>, TreeParseError> {
    let toks = lex(text)?;
    let mut pos = 0usize;
    let mut trees = Vec::new();
    while pos < toks.len() {
        let (tree, next) = parse_one(&toks, pos, text.len())?;
        trees.push(tree);
        pos = next;
    }
    if trees.is_empty() {
        return Err(TreeParseError { offset: 0, message: "empty tree text".into() });
    }
    Ok(trees)
}

/// Parse exactly one tree; trailing text is an error.
pub fn parse_tree(text: &str) -> Result<Tree, TreeParseError> {
    let trees = parse_forest(text)?;
    if trees.len() != 1 {
        return Err(TreeParseError {
            offset: 0,
            message: format!("expected one tree, found {}", trees.len()),
        });
    }
    Ok(trees.into_iter().next().unwrap())
}

fn parse_one(toks: &[SexprToken], pos: usize, end: usize) -> Result<(Tree, usize), TreeParseError> {
    match toks.get(pos) {
        Some(SexprToken::Open(_)) => {}
        Some(SexprToken::Close(off)) => {
            return Err(TreeParseError { offset: *off, message: "unmatched `)`".into() })
        }
        Some(SexprToken::Atom(off, a)) => {
            return Err(TreeParseError {
                offset: *off,
                message: format!("expected `(`, found `{a}`"),
            })
        }
        None => return Err(TreeParseError { offset: end, message: "unexpected end of text".into() }),
    }
    let open_off = match toks[pos] {
        SexprToken::Open(o) => o,
        _ => unreachable!(),
    };
    let mut pos = pos + 1;
    let label = match toks.get(pos) {
        Some(SexprToken::Atom(_, a)) => a.clone(),
        _ => {
            return Err(TreeParseError {
                offset: open_off,
                message: "node needs a label atom after `(`".into(),
            })
        }
    };
    pos += 1;

    // `(term surface)` is a leaf; anything else is an interior node whose
    // children are parenthesized trees.
    if let (Some(SexprToken::Atom(_, surface)), Some(SexprToken::Close(_))) =
        (toks.get(pos), toks.get(pos + 1))
    {
        return Ok((Tree::Leaf { term: label, surface: surface.clone() }, pos + 2));
    }

    let mut children = Vec::new();
    loop {
        match toks.get(pos) {
            Some(SexprToken::Close(_)) => return Ok((Tree::Node { label, children }, pos + 1)),
            Some(SexprToken::Open(_)) => {
                let (child, next) = parse_one(toks, pos, end)?;
                children.push(child);
                pos = next;
            }
            Some(SexprToken::Atom(off, a)) => {
                return Err(TreeParseError {
                    offset: *off,
                    message: format!("unexpected bare atom `{a}` inside node"),
                })
            }
            None => {
                return Err(TreeParseError {
                    offset: end,
                    message: "unclosed `(`".into(),
                })
            }
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_sexpr())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_nested_tree() {
        let text = "(S (NP (det the) (n dog)) (VP (v saw) (NP (n cat))))";
        let tree = parse_tree(text).unwrap();
        assert_eq!(tree.to_sexpr(), text);
        assert_eq!(
            tree.leaves(),
            vec![("det", "the"), ("n", "dog"), ("v", "saw"), ("n", "cat")]
        );
    }

    #[test]
    fn parses_fragment_sequence() {
        let trees = parse_forest("(S (n dog)) (NP (n cat))").unwrap();
        assert_eq!(trees.len(), 2);
        assert_eq!(fragments_to_sexpr(&trees), "(S (n dog)) (NP (n cat))");
    }

    #[test]
    fn epsilon_node_renders_without_children() {
        let tree = parse_tree("(S (X) (n dog))").unwrap();
        assert_eq!(tree.to_sexpr(), "(S (X) (n dog))");
    }

    #[test]
    fn reports_offset_on_unclosed_paren() {
        let err = parse_tree("(S (NP (n dog)").unwrap_err();
        assert!(err.message.contains("unclosed"));
    }

    #[test]
    fn rejects_bare_atoms_between_children() {
        let err = parse_tree("(S x (n dog))").unwrap_err();
        assert!(err.message.contains("bare atom"));
    }
}
