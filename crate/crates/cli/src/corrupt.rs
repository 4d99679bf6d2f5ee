//! Synthetic noise for clean corpora: per-word deletions, out-of-lexicon
//! filler insertions, and recoverable substitutions (`word` becomes
//! `word~`, so a substitution list mapping `word~ => word` can undo it).
//! Gold labels and trees ride along untouched; they describe the clean
//! sentence the noise was applied to.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusRecord;

pub const FILLERS: [&str; 4] = ["uh", "um", "ah", "er"];

#[derive(Clone, Copy, PartialEq, Debug)]
pub struct CorruptRates {
    pub delete: f64,
    pub insert: f64,
    pub substitute: f64,
}

impl CorruptRates {
    pub fn validate(&self) -> Result<(), String> {
        for (name, rate) in
            [("delete", self.delete), ("insert", self.insert), ("substitute", self.substitute)]
        {
            if !(0.0..=1.0).contains(&rate) {
                return Err(format!("{name} rate {rate} is outside [0, 1]"));
            }
        }
        Ok(())
    }
}

pub fn substituted_form(word: &str) -> String {
    format!("{word}~")
}

fn corrupt_sentence<R: Rng>(words: &[String], rates: &CorruptRates, rng: &mut R) -> Vec<String> {
    let mut out = Vec::with_capacity(words.len());
    for word in words {
        if rng.gen_bool(rates.insert) {
            out.push(FILLERS[rng.gen_range(0..FILLERS.len())].to_string());
        }
        if rng.gen_bool(rates.delete) {
            continue;
        }
        if rng.gen_bool(rates.substitute) {
            out.push(substituted_form(word));
        } else {
            out.push(word.clone());
        }
    }
    out
}

/// One RNG for the whole corpus keeps the output a pure function of
/// (input, rates, seed).
pub fn corrupt_corpus(records: &[CorpusRecord], rates: &CorruptRates, seed: u64) -> Vec<CorpusRecord> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    records
        .iter()
        .map(|rec| CorpusRecord {
            sentence: corrupt_sentence(&rec.sentence, rates, &mut rng),
            gold_label: rec.gold_label,
            gold_tree: rec.gold_tree.clone(),
        })
        .collect()
}
