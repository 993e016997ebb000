//! Synthetic corpora shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use xltag_core::corpus::{Sentence, TagSet, TaggedSentence};

/// A word class: its tag label and how many words it has.
pub type Class = (&'static str, usize);

/// Template grammar. Every language realises the same abstract sentence
/// word for word; only the surface prefix differs.
#[derive(Debug, Clone)]
pub struct Grammar {
    pub classes: Vec<Class>,
    /// Each template is a sequence of indices into `classes`.
    pub templates: Vec<Vec<usize>>,
}

/// An abstract sentence: (class index, word index) per token.
pub type Abstract = Vec<(usize, usize)>;

impl Grammar {
    /// Small declarative grammar over universal tags.
    pub fn toy() -> Self {
        let classes = vec![
            ("DET", 3),
            ("NOUN", 12),
            ("VERB", 10),
            ("ADJ", 6),
            ("ADV", 4),
            ("ADP", 3),
            ("PRON", 3),
        ];
        // DET=0 NOUN=1 VERB=2 ADJ=3 ADV=4 ADP=5 PRON=6
        let templates = vec![
            vec![0, 1, 2],
            vec![0, 3, 1, 2, 4],
            vec![6, 2, 0, 1],
            vec![0, 1, 2, 5, 0, 1],
            vec![6, 2, 4],
            vec![0, 3, 1, 2, 0, 3, 1],
        ];
        Grammar { classes, templates }
    }

    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Abstract {
        let t = &self.templates[rng.gen_range(0..self.templates.len())];
        t.iter().map(|&c| (c, rng.gen_range(0..self.classes[c].1))).collect()
    }

    pub fn label(&self, class: usize) -> &'static str {
        self.classes[class].0
    }
}

pub fn word(lang: &str, label: &str, k: usize) -> String {
    format!("{lang}{}{k}", label.to_lowercase())
}

pub fn render(g: &Grammar, lang: &str, s: &Abstract) -> Sentence {
    s.iter().map(|&(c, k)| word(lang, g.label(c), k)).collect()
}

pub fn tag(g: &Grammar, tags: &TagSet, lang: &str, s: &Abstract) -> TaggedSentence {
    let ids = s.iter().map(|&(c, _)| tags.index_of(g.label(c)).expect("label in tagset")).collect();
    TaggedSentence::new(render(g, lang, s), ids).unwrap()
}

pub fn sample_many(g: &Grammar, n: usize, seed: u64) -> Vec<Abstract> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| g.sample(&mut rng)).collect()
}

pub fn lines(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        let _ = writeln!(out, "{}", s.join(" "));
    }
    out
}

pub fn tagged_text(corpus: &[TaggedSentence], tags: &TagSet) -> String {
    let mut out = String::new();
    for s in corpus {
        for (w, &t) in s.tokens.iter().zip(&s.tags) {
            let _ = writeln!(out, "{w}\t{}", tags.label(t));
        }
        out.push('\n');
    }
    out
}

pub fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Files for a small end-to-end run: a 2-language mirror corpus, source
/// annotations, and a gold-tagged target test set drawn from the corpus.
pub struct ToyFiles {
    pub source: PathBuf,
    pub target: PathBuf,
    pub tagged: PathBuf,
    pub gold: PathBuf,
    pub test_text: PathBuf,
}

pub fn toy_files(dir: &Path, pairs: usize, seed: u64) -> ToyFiles {
    let g = Grammar::toy();
    let tags = TagSet::universal();
    let all = sample_many(&g, pairs, seed);
    let src: Vec<Sentence> = all.iter().map(|s| render(&g, "s", s)).collect();
    let tgt: Vec<Sentence> = all.iter().map(|s| render(&g, "t", s)).collect();
    let tagged: Vec<TaggedSentence> = all.iter().map(|s| tag(&g, &tags, "s", s)).collect();
    let test = &all[pairs - pairs / 5..];
    let gold: Vec<TaggedSentence> = test.iter().map(|s| tag(&g, &tags, "t", s)).collect();
    let test_sentences: Vec<Sentence> = gold.iter().map(|s| s.tokens.clone()).collect();
    ToyFiles {
        source: write(dir, "corpus.src", &lines(&src)),
        target: write(dir, "corpus.tgt", &lines(&tgt)),
        tagged: write(dir, "train.src.tagged", &tagged_text(&tagged, &tags)),
        gold: write(dir, "test.tgt.gold", &tagged_text(&gold, &tags)),
        test_text: write(dir, "test.tgt.txt", &lines(&test_sentences)),
    }
}
