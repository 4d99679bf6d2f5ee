//! Fixture generators, ignored by default. Run with
//! `cargo test -p glrstar-cli --test regen -- --ignored` after changing
//! the evaluation grammar, then commit the rewritten corpora.

use std::fmt::Write as _;
use std::path::Path;

use glrstar_core::grammar::load_grammar;
use glrstar_testkit::sample_derivation;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixture(name: &str) -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn sampled_corpus(seed: u64, count: usize) -> String {
    let text = std::fs::read_to_string(fixture("eval_grammar.glr")).unwrap();
    let g = load_grammar(&text).unwrap().grammar.augment();
    let start = g.nt_id("S").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    let mut produced = 0;
    while produced < count {
        let Some((words, tree)) = sample_derivation(&g, start, &mut rng, 4) else {
            continue;
        };
        writeln!(out, "{}\t-\t{}", words.join(" "), tree.to_sexpr()).unwrap();
        produced += 1;
    }
    out
}

#[test]
#[ignore = "writes fixtures/clean_corpus.tsv"]
fn regenerate_clean_corpus() {
    std::fs::write(fixture("clean_corpus.tsv"), sampled_corpus(11, 200)).unwrap();
}

#[test]
#[ignore = "writes fixtures/train.tsv"]
fn regenerate_train_treebank() {
    std::fs::write(fixture("train.tsv"), sampled_corpus(12, 150)).unwrap();
}
