//! Corpus and treebank files: one record per line,
//! `sentence [TAB gold-label [TAB gold-tree]]`, with `-` for an absent
//! field. Trees are written in the same parenthesized form the parser
//! prints, so corpora and parser output round-trip through one format.

use std::fmt;
use std::str::FromStr;

use glrstar_core::tree::{fragments_to_sexpr, parse_forest, Tree};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Good,
    Close,
    Bad,
    Unparsable,
}

impl FromStr for GoldLabel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "good" => Ok(GoldLabel::Good),
            "close" => Ok(GoldLabel::Close),
            "bad" => Ok(GoldLabel::Bad),
            "unparsable" => Ok(GoldLabel::Unparsable),
            other => Err(format!(
                "unknown gold label `{other}` (expected good, close, bad, or unparsable)"
            )),
        }
    }
}

impl fmt::Display for GoldLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            GoldLabel::Good => "good",
            GoldLabel::Close => "close",
            GoldLabel::Bad => "bad",
            GoldLabel::Unparsable => "unparsable",
        };
        f.write_str(s)
    }
}

#[derive(Clone, PartialEq, Debug)]
pub struct CorpusRecord {
    pub sentence: Vec<String>,
    pub gold_label: Option<GoldLabel>,
    /// Reference analysis as a fragment sequence, usually a single tree.
    pub gold_tree: Option<Vec<Tree>>,
}

#[derive(Clone, PartialEq, Eq, Debug, thiserror::Error)]
#[error("line {line}: {message}")]
pub struct CorpusError {
    pub line: usize,
    pub message: String,
}

pub fn parse_record(line: &str) -> Result<CorpusRecord, String> {
    let mut fields = line.split('\t');
    let sentence_field = fields.next().unwrap_or("");
    let sentence: Vec<String> = sentence_field.split_whitespace().map(str::to_string).collect();
    if sentence.is_empty() {
        return Err("empty sentence field".to_string());
    }
    let label_field = fields.next().map(str::trim).filter(|f| !f.is_empty() && *f != "-");
    let tree_field = fields.next().map(str::trim).filter(|f| !f.is_empty() && *f != "-");
    if let Some(extra) = fields.next() {
        return Err(format!("unexpected fourth field `{extra}`"));
    }
    let gold_label = label_field.map(GoldLabel::from_str).transpose()?;
    let gold_tree = tree_field
        .map(|f| parse_forest(f).map_err(|e| format!("gold tree: {e}")))
        .transpose()?;
    Ok(CorpusRecord { sentence, gold_label, gold_tree })
}

/// Strict reader: any malformed line fails the whole file. Blank lines
/// are allowed and skipped.
pub fn read_corpus(text: &str) -> Result<Vec<CorpusRecord>, CorpusError> {
    let mut out = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        match parse_record(line) {
            Ok(rec) => out.push(rec),
            Err(message) => return Err(CorpusError { line: idx + 1, message }),
        }
    }
    Ok(out)
}

/// Tolerant reader for training input: each non-blank line becomes either
/// a record or a per-line error, tagged with its 1-based line number.
pub fn read_corpus_lenient(text: &str) -> Vec<(usize, Result<CorpusRecord, String>)> {
    text.lines()
        .enumerate()
        .filter(|(_, line)| !line.trim().is_empty())
        .map(|(idx, line)| (idx + 1, parse_record(line)))
        .collect()
}

pub fn record_to_line(rec: &CorpusRecord) -> String {
    let sentence = rec.sentence.join(" ");
    let label = rec.gold_label.map_or_else(|| "-".to_string(), |l| l.to_string());
    let tree = rec.gold_tree.as_deref().map_or_else(|| "-".to_string(), fragments_to_sexpr);
    match (&rec.gold_label, &rec.gold_tree) {
        (None, None) => sentence,
        (_, None) => format!("{sentence}\t{label}"),
        (_, Some(_)) => format!("{sentence}\t{label}\t{tree}"),
    }
}

pub fn corpus_to_text(records: &[CorpusRecord]) -> String {
    let mut out = String::new();
    for rec in records {
        out.push_str(&record_to_line(rec));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_round_trip_through_lines() {
        let text = "the dog barked\tgood\t(S (n dog))\n\
                    the cat\t-\t(NP (det the) (n cat))\n\
                    um the\tbad\n\
                    just words\n";
        let recs = read_corpus(text).unwrap();
        assert_eq!(recs.len(), 4);
        assert_eq!(recs[0].gold_label, Some(GoldLabel::Good));
        assert!(recs[1].gold_label.is_none());
        assert!(recs[1].gold_tree.is_some());
        assert_eq!(recs[2].gold_label, Some(GoldLabel::Bad));
        assert!(recs[3].gold_label.is_none() && recs[3].gold_tree.is_none());
        assert_eq!(corpus_to_text(&recs), text);
        let again = read_corpus(&corpus_to_text(&recs)).unwrap();
        assert_eq!(again, recs);
    }

    #[test]
    fn bad_lines_carry_their_line_number() {
        let err = read_corpus("fine\n\nnot fine\twat\n").unwrap_err();
        assert_eq!(err.line, 3);
        assert!(err.message.contains("wat"));
    }

    #[test]
    fn lenient_reading_keeps_the_good_records() {
        let rows = read_corpus_lenient("a b\tgood\n\noops\tnope\nc d\n");
        assert_eq!(rows.len(), 3);
        assert!(rows[0].1.is_ok());
        assert_eq!(rows[1].0, 3);
        assert!(rows[1].1.is_err());
        assert!(rows[2].1.is_ok());
    }

    #[test]
    fn tree_field_must_parse() {
        let err = read_corpus("a b\tgood\t(S (broken\n").unwrap_err();
        assert!(err.message.contains("gold tree"));
    }
}
