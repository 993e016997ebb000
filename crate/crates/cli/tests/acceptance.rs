//! Acceptance checks, one PASS/FAIL line per criterion.

mod common;

use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::Grammar;
use xltag::binary;
use xltag_core::align::{align_corpus, project_tags, train_ibm1, TranslationTable, NULL_DROP_THRESHOLD};
use xltag_core::cbow::{train_cbow, CbowConfig};
use xltag_core::combine::{combined_tag, evaluate_fixed_mu, tune_mu, SystemOutputs, TagDistribution};
use xltag_core::corpus::{ParallelCorpus, Sentence, Side, TagSet, TaggedSentence};
use xltag_core::hmm::{train_hmm, train_hmm_partial, HmmConfig, Lattice};
use xltag_core::matrix::Matrix;
use xltag_core::repr::{build_representation, CommonWordVector, ReprTable};
use xltag_core::rnn::{
    gradient_check, tag_sentence, train, Example, OovResolver, PosInjection, RnnConfig, RnnModel, Weights,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

// ---------------------------------------------------------------------------
// Synthetic parallel data

/// Language-neutral sentences; language `l` writes base word `w` as `lw`.
#[derive(Default)]
struct Synth {
    base: Vec<Vec<String>>,
    labels: Vec<Vec<String>>,
    pos: Vec<Vec<usize>>,
}

impl Synth {
    fn from_grammar(g: &Grammar, n: usize, seed: u64) -> Self {
        let mut s = Synth::default();
        for a in common::sample_many(g, n, seed) {
            s.base.push(common::render(g, "", &a));
            s.labels.push(a.iter().map(|&(c, _)| g.label(c).to_string()).collect());
        }
        s
    }

    fn sentences(&self, lang: &str, range: std::ops::Range<usize>) -> Vec<Sentence> {
        self.base[range]
            .iter()
            .map(|b| b.iter().map(|w| format!("{lang}{w}")).collect())
            .collect()
    }

    fn tagged(&self, lang: &str, tags: &TagSet, range: std::ops::Range<usize>) -> Vec<TaggedSentence> {
        self.sentences(lang, range.clone())
            .into_iter()
            .zip(&self.labels[range])
            .map(|(tokens, labels)| {
                let ids = labels.iter().map(|l| tags.index_of(l).expect("label")).collect();
                TaggedSentence::new(tokens, ids).unwrap()
            })
            .collect()
    }

    fn corpus(&self, langs: &[&str]) -> ParallelCorpus {
        ParallelCorpus::multi(langs.iter().map(|l| self.sentences(l, 0..self.base.len())).collect()).unwrap()
    }
}

fn small_config(bidirectional: bool, pos_injection: PosInjection, pos_tags: usize) -> RnnConfig {
    RnnConfig {
        forward_size: 32,
        compression_size: 32,
        bidirectional,
        pos_injection,
        pos_tagset_size: pos_tags,
        max_epochs: 20,
        seed: 1,
        ..RnnConfig::default()
    }
}

fn examples<'a>(repr: &'a ReprTable, side: Side, corpus: &[TaggedSentence], pos: Option<&[Vec<usize>]>) -> Vec<Example<'a>> {
    corpus
        .iter()
        .enumerate()
        .map(|(i, s)| Example {
            inputs: s.tokens.iter().map(|w| repr.vector(side, w)).collect(),
            tags: s.tags.clone(),
            pos: pos.map(|p| p[i].clone()),
        })
        .collect()
}

struct Fit<'a> {
    repr: &'a ReprTable,
    tags: &'a TagSet,
    pos_tags: Option<&'a TagSet>,
    train: &'a [TaggedSentence],
    valid: &'a [TaggedSentence],
    train_pos: Option<&'a [Vec<usize>]>,
    valid_pos: Option<&'a [Vec<usize>]>,
}

impl Fit<'_> {
    fn run(&self, config: RnnConfig) -> RnnModel {
        let model = RnnModel::new(config, self.repr.dim(), self.tags.clone(), self.pos_tags.cloned()).unwrap();
        let tr = examples(self.repr, Side::SOURCE, self.train, self.train_pos);
        let va = examples(self.repr, Side::SOURCE, self.valid, self.valid_pos);
        train(model, &tr, &va).unwrap().0
    }
}

/// Correct and total counts over the tokens `keep` selects.
fn score(
    model: &RnnModel,
    repr: &ReprTable,
    side: Side,
    test: &[TaggedSentence],
    pos: Option<&[Vec<usize>]>,
    oov: Option<OovResolver<'_>>,
    keep: impl Fn(&TaggedSentence, usize) -> bool,
) -> (usize, usize) {
    let (mut correct, mut total) = (0, 0);
    for (i, s) in test.iter().enumerate() {
        let out = tag_sentence(model, repr, &s.tokens, side, pos.map(|p| p[i].as_slice()), oov).unwrap();
        for (j, (&p, &g)) in out.tags.iter().zip(&s.tags).enumerate() {
            if keep(s, j) {
                correct += (p == g) as usize;
                total += 1;
            }
        }
    }
    (correct, total)
}

fn ratio((c, t): (usize, usize)) -> f64 {
    c as f64 / t.max(1) as f64
}

fn all(_: &TaggedSentence, _: usize) -> bool {
    true
}

// ---------------------------------------------------------------------------
// 1. Gradient check

fn gradients() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let sites = [PosInjection::None, PosInjection::Input, PosInjection::Recurrent, PosInjection::Compression];
    let mut worst: f64 = 0.0;
    let mut configs = 0;
    let mut failures = Vec::new();
    for round in 0..3 {
        for bidirectional in [false, true] {
            for site in sites {
                let config = RnnConfig {
                    forward_size: rng.gen_range(2..=6),
                    compression_size: rng.gen_range(2..=6),
                    bidirectional,
                    pos_injection: site,
                    pos_tagset_size: if site == PosInjection::None { 0 } else { rng.gen_range(2..=4) },
                    seed: 1000 + round,
                    ..RnnConfig::default()
                };
                let input_dim = rng.gen_range(3..=12);
                let n_tags = rng.gen_range(2..=5);
                let check = gradient_check(&config, input_dim, n_tags, 1e-5).unwrap();
                worst = worst.max(check.max_relative_error);
                if check.max_relative_error >= 1e-4 {
                    failures.push(format!("{site:?}/bi={bidirectional}"));
                }
                configs += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        failures.is_empty() && configs >= 20 && secs < 30.0,
        format!("{configs} configs, max relative error {worst:.2e}, {secs:.1} s {failures:?}"),
    )
}

// ---------------------------------------------------------------------------
// 2. Forward pass against scalar arithmetic

const TOKENS: [&[u32]; 3] = [&[1], &[0, 2], &[2]];
const IF: [[f64; 2]; 3] = [[0.25, -0.5], [0.75, 0.125], [-0.3, 0.45]];
const RF: [[f64; 2]; 2] = [[-0.2, 0.6], [0.35, -0.15]];
const HF: [[f64; 2]; 2] = [[0.9, -0.4], [-0.25, 0.55]];
const O: [[f64; 2]; 2] = [[0.65, -1.2], [-0.7, 0.3]];
const IB: [[f64; 2]; 3] = [[0.15, 0.2], [-0.6, 0.4], [0.5, -0.35]];
const RB: [[f64; 2]; 2] = [[0.1, -0.45], [0.7, 0.05]];
const HB: [[f64; 2]; 2] = [[-0.55, 0.3], [0.4, 0.85]];

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn scalar_forward(bidirectional: bool) -> Vec<[f64; 2]> {
    let x = |m: &[[f64; 2]; 3], t: usize, j: usize| -> f64 { TOKENS[t].iter().map(|&i| m[i as usize][j]).sum() };
    let mut f = [[0.0f64; 2]; 3];
    let mut b = [[0.0f64; 2]; 3];
    for t in 0..3 {
        for j in 0..2 {
            let r = if t == 0 { 0.0 } else { f[t - 1][0] * RF[0][j] + f[t - 1][1] * RF[1][j] };
            f[t][j] = logistic(x(&IF, t, j) + r);
        }
    }
    for t in (0..3).rev() {
        for j in 0..2 {
            let r = if t == 2 { 0.0 } else { b[t + 1][0] * RB[0][j] + b[t + 1][1] * RB[1][j] };
            b[t][j] = logistic(x(&IB, t, j) + r);
        }
    }
    (0..3)
        .map(|t| {
            let c: Vec<f64> = (0..2)
                .map(|k| {
                    let back = if bidirectional { b[t][0] * HB[0][k] + b[t][1] * HB[1][k] } else { 0.0 };
                    logistic(f[t][0] * HF[0][k] + f[t][1] * HF[1][k] + back)
                })
                .collect();
            let z0 = (c[0] * O[0][0] + c[1] * O[1][0]).exp();
            let z1 = (c[0] * O[0][1] + c[1] * O[1][1]).exp();
            [z0 / (z0 + z1), z1 / (z0 + z1)]
        })
        .collect()
}

fn forward_oracle() -> Outcome {
    let flat = |m: &[[f64; 2]]| m.iter().flatten().copied().collect::<Vec<_>>();
    let mat = |r: usize, m: &[[f64; 2]]| Matrix::from_vec(r, 2, flat(m)).unwrap();
    let vectors: Vec<CommonWordVector> = TOKENS.iter().map(|i| CommonWordVector::new(i.to_vec(), 3).unwrap()).collect();
    let inputs: Vec<&CommonWordVector> = vectors.iter().collect();
    let tags = TagSet::new("t", vec!["A".into(), "B".into()]).unwrap();
    let mut worst: f64 = 0.0;
    for bidirectional in [false, true] {
        let config = RnnConfig {
            forward_size: 2,
            compression_size: 2,
            bidirectional,
            ..RnnConfig::default()
        };
        let mut mats = vec![mat(3, &IF), mat(2, &RF), mat(2, &HF), mat(2, &O)];
        if bidirectional {
            mats.extend([mat(3, &IB), mat(2, &RB), mat(2, &HB)]);
        }
        let weights = Weights::from_matrices(&config, mats).unwrap();
        let model = RnnModel::from_parts(config, 3, tags.clone(), None, weights).unwrap();
        for (a, y) in model.forward_pass(&inputs, None).unwrap().iter().zip(scalar_forward(bidirectional)) {
            for (p, q) in a.output.iter().zip(y) {
                worst = worst.max((p - q).abs());
            }
        }
    }
    outcome(worst <= 1e-12, format!("SRNN and BRNN, max deviation {worst:.1e}"))
}

// ---------------------------------------------------------------------------
// 3. Transfer to a mirror language (and the data reused by 9)

struct Transfer {
    synth: Synth,
    corpus: ParallelCorpus,
    repr: ReprTable,
    tags: TagSet,
    model: RnnModel,
    test: Vec<TaggedSentence>,
}

const TRAIN: std::ops::Range<usize> = 0..350;
const VALID: std::ops::Range<usize> = 350..400;
const TEST: std::ops::Range<usize> = 400..500;

fn mirror_transfer() -> (Outcome, Transfer) {
    let start = Instant::now();
    let synth = Synth::from_grammar(&Grammar::toy(), 500, 11);
    let corpus = synth.corpus(&["s", "t"]);
    let repr = build_representation(&corpus);
    let tags = TagSet::universal();
    let train_set = synth.tagged("s", &tags, TRAIN);
    let valid_set = synth.tagged("s", &tags, VALID);
    let fit = Fit {
        repr: &repr,
        tags: &tags,
        pos_tags: None,
        train: &train_set,
        valid: &valid_set,
        train_pos: None,
        valid_pos: None,
    };
    let model = fit.run(small_config(false, PosInjection::None, 0));
    let test = synth.tagged("t", &tags, TEST);
    let acc = ratio(score(&model, &repr, Side::TARGET, &test, None, None, all));
    let secs = start.elapsed().as_secs_f64();
    (
        outcome(
            acc >= 0.95 && secs < 60.0,
            format!("SRNN on held-out target side {:.2}%, {secs:.1} s", 100.0 * acc),
        ),
        Transfer {
            synth,
            corpus,
            repr,
            tags,
            model,
            test,
        },
    )
}

// ---------------------------------------------------------------------------
// 4. Right context

const AMBIGUOUS: &str = "that";

fn next_token_task(n: usize, seed: u64) -> Synth {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let classes = [("NOUN", 8), ("VERB", 8), ("ADJ", 5), ("ADV", 4)];
    let mut s = Synth::default();
    for _ in 0..n {
        let len = rng.gen_range(4..=8);
        let (mut base, mut labels) = (Vec::new(), Vec::new());
        let push = |base: &mut Vec<String>, labels: &mut Vec<String>, c: usize, rng: &mut ChaCha8Rng| {
            let (label, size) = classes[c];
            base.push(common::word("", label, rng.gen_range(0..size)));
            labels.push(label.to_string());
        };
        while base.len() < len {
            if base.len() + 1 < len && rng.gen_bool(0.3) {
                let noun = rng.gen_bool(0.5);
                base.push(AMBIGUOUS.to_string());
                labels.push(if noun { "DET" } else { "PRON" }.to_string());
                push(&mut base, &mut labels, if noun { 0 } else { 1 }, &mut rng);
            } else {
                let c = rng.gen_range(0..classes.len());
                push(&mut base, &mut labels, c, &mut rng);
            }
        }
        s.base.push(base);
        s.labels.push(labels);
    }
    s
}

fn right_context() -> Outcome {
    // A large corpus: on small ones the stopping rule often ends training
    // while validation accuracy is flat and the backward layer has not yet
    // picked up the cue.
    let n = 2000;
    let synth = next_token_task(n, 13);
    let corpus = synth.corpus(&["s", "t"]);
    let repr = build_representation(&corpus);
    let tags = TagSet::universal();
    let train_set = synth.tagged("s", &tags, 0..n - 150);
    let valid_set = synth.tagged("s", &tags, n - 150..n - 100);
    let test = synth.tagged("t", &tags, n - 100..n);
    let fit = Fit {
        repr: &repr,
        tags: &tags,
        pos_tags: None,
        train: &train_set,
        valid: &valid_set,
        train_pos: None,
        valid_pos: None,
    };
    let ambiguous_word = format!("t{AMBIGUOUS}");
    let ambiguous = |s: &TaggedSentence, j: usize| s.tokens[j] == ambiguous_word;
    let run = |bidirectional: bool, seed: u64| {
        let model = fit.run(RnnConfig {
            seed,
            ..small_config(bidirectional, PosInjection::None, 0)
        });
        let overall = ratio(score(&model, &repr, Side::TARGET, &test, None, None, all));
        (overall, score(&model, &repr, Side::TARGET, &test, None, None, ambiguous))
    };
    let (b_all, b_amb) = run(true, 1);
    let (s_all, s_amb) = run(false, 1);
    // Seed sensitivity, reported but not part of the verdict.
    let other_seeds = (2..=5).filter(|&seed| {
        let (a, amb) = run(true, seed);
        a >= 0.95 && ratio(amb) >= 0.95
    });
    let brnn_ok = b_all >= 0.95 && ratio(b_amb) >= 0.95;
    let seeds_ok = brnn_ok as usize + other_seeds.count();
    outcome(
        brnn_ok && ratio(s_amb) <= 0.60,
        format!(
            "BRNN {:.2}% all, {:.2}% on {} ambiguous; SRNN {:.2}% all, {:.2}% on ambiguous; BRNN meets the bar for {seeds_ok}/5 seeds",
            100.0 * b_all,
            100.0 * ratio(b_amb),
            b_amb.1,
            100.0 * s_all,
            100.0 * ratio(s_amb)
        ),
    )
}

// ---------------------------------------------------------------------------
// 5. Unknown words resolved through CBOW

fn oov_resolution() -> Outcome {
    // DET NOUN VERB ADV and DET ADJ NOUN VERB: the second token's tag is not
    // predictable from its left context.
    let grammar = Grammar {
        classes: vec![("DET", 3), ("NOUN", 12), ("VERB", 10), ("ADJ", 6), ("ADV", 4)],
        templates: vec![vec![0, 1, 2, 4], vec![0, 3, 1, 2]],
    };
    let synth = Synth::from_grammar(&grammar, 500, 17);
    let corpus = synth.corpus(&["s", "t"]);
    let repr = build_representation(&corpus);
    let tags = TagSet::universal();
    let train_set = synth.tagged("s", &tags, TRAIN);
    let valid_set = synth.tagged("s", &tags, VALID);
    let fit = Fit {
        repr: &repr,
        tags: &tags,
        pos_tags: None,
        train: &train_set,
        valid: &valid_set,
        train_pos: None,
        valid_pos: None,
    };
    let model = fit.run(small_config(false, PosInjection::None, 0));
    let cbow_config = CbowConfig {
        window: 2,
        dim: 16,
        epochs: 20,
        seed: 3,
        ..CbowConfig::default()
    };
    let cbow = train_cbow(corpus.target(), &cbow_config).unwrap();

    // Fresh sentences; in four out of five the second word is new.
    let mut test_synth = Synth::from_grammar(&grammar, 200, 19);
    for (i, b) in test_synth.base.iter_mut().enumerate() {
        if i % 5 != 0 {
            b[1] = format!("novel{i}");
        }
    }
    let test = test_synth.tagged("t", &tags, 0..200);
    let is_oov = |s: &TaggedSentence, j: usize| !repr.is_known(Side::TARGET, &s.tokens[j]);
    let n_tokens: usize = test.iter().map(TaggedSentence::len).sum();
    let zero = score(&model, &repr, Side::TARGET, &test, None, None, is_oov);
    let resolved = score(&model, &repr, Side::TARGET, &test, None, Some(OovResolver { cbow: &cbow }), is_oov);
    let gain = ratio(resolved) - ratio(zero);
    outcome(
        gain >= 0.10,
        format!(
            "{:.1}% OOV tokens; zero vector {:.2}%, resolved {:.2}%",
            100.0 * zero.1 as f64 / n_tokens as f64,
            100.0 * ratio(zero),
            100.0 * ratio(resolved)
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. One model, two target languages

fn multilingual() -> Outcome {
    let synth = Synth::from_grammar(&Grammar::toy(), 500, 23);
    let corpus = synth.corpus(&["s", "t", "u"]);
    let repr = build_representation(&corpus);
    let tags = TagSet::universal();
    let train_set = synth.tagged("s", &tags, TRAIN);
    let valid_set = synth.tagged("s", &tags, VALID);
    let fit = Fit {
        repr: &repr,
        tags: &tags,
        pos_tags: None,
        train: &train_set,
        valid: &valid_set,
        train_pos: None,
        valid_pos: None,
    };
    let model = fit.run(small_config(false, PosInjection::None, 0));
    let first = ratio(score(&model, &repr, Side(1), &synth.tagged("t", &tags, TEST), None, None, all));
    let second = ratio(score(&model, &repr, Side(2), &synth.tagged("u", &tags, TEST), None, None, all));
    outcome(
        first >= 0.90 && second >= 0.90,
        format!("target 1 {:.2}%, target 2 {:.2}%", 100.0 * first, 100.0 * second),
    )
}

// ---------------------------------------------------------------------------
// 7. HMM decoding against enumeration

struct Enumerated {
    best: Vec<usize>,
    best_score: f64,
    log_z: f64,
    marginals: Vec<Vec<f64>>,
}

fn enumerate(t: usize, trans: &[f64], emit: &[Vec<f64>]) -> Enumerated {
    let n = emit.len();
    let s = t + 1;
    let lt = |a: usize, b: usize, c: usize| trans[(a * s + b) * s + c];
    let mut all = Vec::new();
    let mut seq = vec![0usize; n];
    loop {
        let (mut p2, mut p1, mut score) = (t, t, 0.0);
        for (i, &c) in seq.iter().enumerate() {
            score += lt(p2, p1, c) + emit[i][c];
            p2 = p1;
            p1 = c;
        }
        all.push((seq.clone(), score + lt(p2, p1, t)));
        // Odometer increment, last position fastest: lexicographic order.
        let mut i = n;
        loop {
            if i == 0 {
                break;
            }
            i -= 1;
            seq[i] += 1;
            if seq[i] < t {
                break;
            }
            seq[i] = 0;
            if i == 0 {
                i = usize::MAX;
                break;
            }
        }
        if i == usize::MAX || n == 0 {
            break;
        }
    }
    let best_score = all.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
    let best = all.iter().find(|x| x.1 == best_score).unwrap().0.clone();
    let z: f64 = all.iter().map(|x| x.1.exp()).sum();
    let mut marginals = vec![vec![0.0; t]; n];
    for (seq, score) in &all {
        for (i, &c) in seq.iter().enumerate() {
            marginals[i][c] += score.exp() / z;
        }
    }
    Enumerated {
        best,
        best_score,
        log_z: z.ln(),
        marginals,
    }
}

fn path_score(lattice: &Lattice<'_>, tags: &[usize]) -> f64 {
    let t = lattice.n_tags;
    let s = t + 1;
    let lt = |a: usize, b: usize, c: usize| lattice.log_trans[(a * s + b) * s + c];
    let (mut p2, mut p1, mut score) = (t, t, 0.0);
    for (i, &c) in tags.iter().enumerate() {
        score += lt(p2, p1, c) + lattice.log_emit[i][c];
        p2 = p1;
        p1 = c;
    }
    score + lt(p2, p1, t)
}

enum Agreement {
    Exact(f64),
    /// A different path whose score equals the optimum within 1e-9: a tie
    /// that rounding decided differently.
    NearTie(f64),
    Mismatch,
}

fn compare(lattice: &Lattice<'_>, e: &Enumerated) -> Agreement {
    let (tags, score) = lattice.viterbi();
    let marginals = lattice.marginals();
    if e.best_score == f64::NEG_INFINITY {
        let uniform = 1.0 / lattice.n_tags as f64;
        let dev = marginals.iter().flatten().map(|p| (p - uniform).abs()).fold(0.0, f64::max);
        return if score == f64::NEG_INFINITY { Agreement::Exact(dev) } else { Agreement::Mismatch };
    }
    let mut dev = (score - e.best_score).abs().max((lattice.log_likelihood() - e.log_z).abs());
    for (m, b) in marginals.iter().zip(&e.marginals) {
        for (x, y) in m.iter().zip(b) {
            dev = dev.max((x - y).abs());
        }
    }
    if tags == e.best {
        Agreement::Exact(dev)
    } else if (path_score(lattice, &tags) - e.best_score).abs() <= 1e-9 {
        Agreement::NearTie(dev)
    } else {
        Agreement::Mismatch
    }
}

fn tally(a: Agreement, worst: &mut f64, near_ties: &mut usize, mismatches: &mut usize) {
    match a {
        Agreement::Exact(d) => *worst = worst.max(d),
        Agreement::NearTie(d) => {
            *worst = worst.max(d);
            *near_ties += 1;
        }
        Agreement::Mismatch => *mismatches += 1,
    }
}

fn hmm_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut worst: f64 = 0.0;
    let (mut mismatches, mut near_ties, mut checked) = (0, 0, 0);
    // Random log-score models, half of them with integer scores to force ties.
    for model in 0..100 {
        let t = rng.gen_range(1..=4);
        let s = t + 1;
        let integral = model % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            if rng.gen_bool(0.1) {
                f64::NEG_INFINITY
            } else if integral {
                -(rng.gen_range(0..3) as f64)
            } else {
                rng.gen_range(-4.0..0.0)
            }
        };
        let trans: Vec<f64> = (0..s * s * s).map(|_| draw(&mut rng)).collect();
        let emit_table: Vec<Vec<f64>> = (0..4).map(|_| (0..t).map(|_| draw(&mut rng)).collect()).collect();
        for len in 1..=4 {
            let emit = emit_table[..len].to_vec();
            let lattice = Lattice {
                n_tags: t,
                log_trans: &trans,
                log_emit: emit.clone(),
            };
            tally(compare(&lattice, &enumerate(t, &trans, &emit)), &mut worst, &mut near_ties, &mut mismatches);
            checked += 1;
        }
    }
    // Trained models: every word sequence up to length 4 over three known
    // words and one unknown.
    let words = ["x", "y", "z", "unseen"];
    for _ in 0..100 {
        let t = rng.gen_range(1..=4);
        let labels = (0..t).map(|i| format!("T{i}")).collect();
        let tags = TagSet::new("t", labels).unwrap();
        let corpus: Vec<TaggedSentence> = (0..rng.gen_range(3..12))
            .map(|_| {
                let n = rng.gen_range(1..6);
                let tokens = (0..n).map(|_| words[rng.gen_range(0..3)].to_string()).collect();
                TaggedSentence::new(tokens, (0..n).map(|_| rng.gen_range(0..t)).collect()).unwrap()
            })
            .collect();
        let model = train_hmm(&corpus, &tags, HmmConfig::default()).unwrap();
        for len in 1..=4u32 {
            for code in 0..4usize.pow(len) {
                let tokens: Vec<String> = (0..len).map(|i| words[(code >> (2 * i)) & 3].to_string()).collect();
                let lattice = model.lattice(&tokens);
                let e = enumerate(t, model.log_transitions(), &lattice.log_emit);
                tally(compare(&lattice, &e), &mut worst, &mut near_ties, &mut mismatches);
                checked += 1;
            }
        }
    }
    outcome(
        mismatches == 0 && worst <= 1e-9,
        format!(
            "{checked} sentences over 200 models, {mismatches} path mismatches, {near_ties} rounding ties, max deviation {worst:.1e}"
        ),
    )
}

// ---------------------------------------------------------------------------
// 8. IBM Model 1

fn ibm1_oracle() -> Outcome {
    let words = |t: &str| -> Sentence { t.split(' ').map(String::from).collect() };
    let corpus = ParallelCorpus::new(vec![words("a b"), words("a")], vec![words("x y"), words("x")]).unwrap();
    // Rows NULL, a, b; columns x, y. Dense EM written out by hand.
    let mut t = [[0.5f64; 2]; 3];
    let mut table = TranslationTable::uniform(&corpus);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let mut count = [[0.0f64; 2]; 3];
        for (src, tgt) in [(&[0usize, 1, 2][..], &[0usize, 1][..]), (&[0, 1][..], &[0][..])] {
            for &e in tgt {
                let z: f64 = src.iter().map(|&f| t[f][e]).sum();
                for &f in src {
                    count[f][e] += t[f][e] / z;
                }
            }
        }
        for (row, c) in t.iter_mut().zip(&count) {
            let total = c[0] + c[1];
            *row = [c[0] / total, c[1] / total];
        }
        table.em_step(&corpus);
        for (f, src) in [None, Some("a"), Some("b")].into_iter().enumerate() {
            for (e, tgt) in ["x", "y"].into_iter().enumerate() {
                worst = worst.max((table.prob(tgt, src) - t[f][e]).abs());
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let mut drops = 0;
    for _ in 0..50 {
        let n = rng.gen_range(2..10);
        let sent = |rng: &mut ChaCha8Rng, p: &str| -> Sentence {
            (0..rng.gen_range(1..6)).map(|_| format!("{p}{}", rng.gen_range(0..6))).collect()
        };
        let (src, tgt): (Vec<_>, Vec<_>) = (0..n).map(|_| (sent(&mut rng, "s"), sent(&mut rng, "t"))).unzip();
        let c = ParallelCorpus::new(src, tgt).unwrap();
        let mut table = TranslationTable::uniform(&c);
        let mut last = table.log_likelihood(&c);
        for _ in 0..10 {
            table.em_step(&c);
            let ll = table.log_likelihood(&c);
            if ll < last - 1e-12 * last.abs() {
                drops += 1;
            }
            last = ll;
        }
    }
    outcome(
        worst <= 1e-9 && drops == 0,
        format!("toy table max deviation {worst:.1e} over 10 iterations; {drops} likelihood decreases in 50 corpora"),
    )
}

// ---------------------------------------------------------------------------
// 9. Combiner

/// Whether μ = 1 and μ = 0 reproduce the two systems' argmax decisions,
/// and on how many tokens the systems disagree.
fn identities(outputs: &[SystemOutputs]) -> (bool, usize) {
    let argmax = |d: &[TagDistribution]| d.iter().map(TagDistribution::argmax).collect::<Vec<_>>();
    let mut holds = true;
    let mut disagreements = 0;
    for o in outputs {
        let (h, r) = (argmax(&o.hmm), argmax(&o.rnn));
        holds &= combined_tag(&o.hmm, &o.rnn, 1.0).unwrap() == h;
        holds &= combined_tag(&o.hmm, &o.rnn, 0.0).unwrap() == r;
        disagreements += h.iter().zip(&r).filter(|(a, b)| a != b).count();
    }
    (holds, disagreements)
}

fn combiner(tr: &Transfer) -> Outcome {
    // Baseline HMM from a few projected sentences, so that it errs; RNN
    // from the transfer experiment.
    let table = train_ibm1(&tr.corpus, 5).unwrap();
    let links = align_corpus(&table, &tr.corpus);
    let source_tagged = tr.synth.tagged("s", &tr.tags, 0..500);
    let projected = project_tags(&source_tagged, tr.corpus.target(), &links, NULL_DROP_THRESHOLD).unwrap();
    let hmm = train_hmm_partial(&projected[..20], &tr.tags, HmmConfig::default()).unwrap();
    let n = tr.tags.len();
    let outputs: Vec<SystemOutputs> = tr
        .test
        .iter()
        .map(|s| SystemOutputs {
            hmm: hmm.posterior(&s.tokens),
            rnn: tag_sentence(&tr.model, &tr.repr, &s.tokens, Side::TARGET, None, None)
                .unwrap()
                .distributions,
        })
        .collect();
    let (real_holds, real_disagree) = identities(&outputs);
    let no_oov: Vec<Vec<bool>> = tr.test.iter().map(|s| vec![false; s.len()]).collect();
    let hmm_acc = evaluate_fixed_mu(&tr.test, &outputs, &no_oov, n, 1.0).unwrap().accuracy().unwrap();
    let rnn_acc = evaluate_fixed_mu(&tr.test, &outputs, &no_oov, n, 0.0).unwrap().accuracy().unwrap();

    // Engineered complementary systems: each is sure and right on half of
    // the tokens and mildly wrong on the other half.
    let mut rng = ChaCha8Rng::seed_from_u64(37);
    let k = 4;
    let leaning = |gold: usize, right: bool| {
        let mut p = vec![0.0; k];
        if right {
            p[gold] = 0.85;
            p[(gold + 1) % k] = 0.05;
            p[(gold + 2) % k] = 0.05;
            p[(gold + 3) % k] = 0.05;
        } else {
            p[gold] = 0.3;
            p[(gold + 1) % k] = 0.4;
            p[(gold + 2) % k] = 0.15;
            p[(gold + 3) % k] = 0.15;
        }
        TagDistribution::new(p).unwrap()
    };
    let mut gold = Vec::new();
    let mut engineered = Vec::new();
    for i in 0..100 {
        let len = rng.gen_range(3..8);
        let tags: Vec<usize> = (0..len).map(|_| rng.gen_range(0..k)).collect();
        let hmm_sure = |j: usize| (i + j).is_multiple_of(2);
        engineered.push(SystemOutputs {
            hmm: tags.iter().enumerate().map(|(j, &g)| leaning(g, hmm_sure(j))).collect(),
            rnn: tags.iter().enumerate().map(|(j, &g)| leaning(g, !hmm_sure(j))).collect(),
        });
        gold.push(TaggedSentence::new((0..len).map(|j| format!("w{j}")).collect(), tags).unwrap());
    }
    let flags: Vec<Vec<bool>> = gold.iter().map(|s| vec![false; s.len()]).collect();
    let (engineered_holds, engineered_disagree) = identities(&engineered);
    let a = evaluate_fixed_mu(&gold, &engineered, &flags, k, 1.0).unwrap().accuracy().unwrap();
    let b = evaluate_fixed_mu(&gold, &engineered, &flags, k, 0.0).unwrap().accuracy().unwrap();
    let tuned = tune_mu(&gold, &engineered, &flags, k, 0.05).unwrap();
    let pooled = tuned.report.accuracy().unwrap();
    let identical = real_holds && engineered_holds;
    outcome(
        identical && pooled >= a.max(b),
        format!(
            "identities {} ({} and {} disagreeing tokens); projection HMM {:.2}%, RNN {:.2}%; engineered systems {:.2}% / {:.2}%, tuned {:.2}% (mu {} and {})",
            if identical { "hold" } else { "broken" },
            real_disagree,
            engineered_disagree,
            100.0 * hmm_acc,
            100.0 * rnn_acc,
            100.0 * a,
            100.0 * b,
            100.0 * pooled,
            tuned.mu_first_half,
            tuned.mu_second_half
        ),
    )
}

// ---------------------------------------------------------------------------
// 10. POS injection

fn supersense_task(n: usize, seed: u64) -> (Synth, TagSet, TagSet) {
    let classes = ["a", "b", "c"];
    let pos_labels = ["NOUN", "VERB"];
    let pos_tags = TagSet::new("pos", pos_labels.iter().map(|s| s.to_string()).collect()).unwrap();
    let sst: Vec<String> = classes
        .iter()
        .flat_map(|c| pos_labels.iter().map(move |p| format!("{c}.{}", p.to_lowercase())))
        .collect();
    let sst_tags = TagSet::new("sst", sst).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut s = Synth::default();
    for _ in 0..n {
        let len = rng.gen_range(3..=7);
        let (mut base, mut labels, mut pos) = (Vec::new(), Vec::new(), Vec::new());
        for _ in 0..len {
            let c = rng.gen_range(0..classes.len());
            let p = rng.gen_range(0..pos_labels.len());
            base.push(format!("{}{}", classes[c], rng.gen_range(0..5)));
            labels.push(format!("{}.{}", classes[c], pos_labels[p].to_lowercase()));
            pos.push(p);
        }
        s.base.push(base);
        s.labels.push(labels);
        s.pos.push(pos);
    }
    (s, sst_tags, pos_tags)
}

fn pos_injection() -> Outcome {
    let (synth, tags, pos_tags) = supersense_task(500, 41);
    let corpus = synth.corpus(&["s", "t"]);
    let repr = build_representation(&corpus);
    let train_set = synth.tagged("s", &tags, TRAIN);
    let valid_set = synth.tagged("s", &tags, VALID);
    let test = synth.tagged("t", &tags, TEST);
    let (train_pos, valid_pos, test_pos) = (&synth.pos[TRAIN], &synth.pos[VALID], &synth.pos[TEST]);
    let mut results = Vec::new();
    for site in [PosInjection::Input, PosInjection::Recurrent, PosInjection::Compression, PosInjection::None] {
        let uses = site != PosInjection::None;
        let fit = Fit {
            repr: &repr,
            tags: &tags,
            pos_tags: uses.then_some(&pos_tags),
            train: &train_set,
            valid: &valid_set,
            train_pos: uses.then_some(train_pos),
            valid_pos: uses.then_some(valid_pos),
        };
        let model = fit.run(small_config(true, site, if uses { pos_tags.len() } else { 0 }));
        let acc = ratio(score(&model, &repr, Side::TARGET, &test, uses.then_some(test_pos), None, all));
        results.push((site, acc));
    }
    let free = results[3].1;
    let pass = results[..3].iter().all(|&(_, a)| a >= 0.95 && a - free >= 0.10);
    let line = results
        .iter()
        .map(|(s, a)| format!("{s:?} {:.2}%", 100.0 * a))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(pass, format!("BRNN {line}"))
}

// ---------------------------------------------------------------------------
// 11. Determinism

fn run_cli(dir: &Path, files: &common::ToyFiles) -> Result<(), String> {
    let d = |n: &str| dir.join(n).to_str().unwrap().to_string();
    let f = |p: &Path| p.to_str().unwrap().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["build-repr".into(), "--source".into(), f(&files.source), "--target".into(), f(&files.target), "--repr".into(), d("repr.bin")],
        vec![
            "train-cbow".into(), "--source".into(), f(&files.source), "--target".into(), f(&files.target),
            "--cbow".into(), d("cbow.bin"), "--cbow-dim".into(), "8".into(), "--cbow-window".into(), "2".into(),
        ],
        vec![
            "train-rnn".into(), "--repr".into(), d("repr.bin"), "--tagged".into(), f(&files.tagged),
            "--model".into(), d("model.bin"), "--log".into(), d("train.log"), "--bidirectional".into(),
            "--forward-size".into(), "12".into(), "--compression-size".into(), "12".into(), "--max-epochs".into(), "6".into(),
        ],
        vec![
            "tag".into(), "--model".into(), d("model.bin"), "--repr".into(), d("repr.bin"), "--input".into(),
            f(&files.test_text), "--output".into(), d("test.rnn"), "--oov-resolve".into(), "--cbow".into(), d("cbow.bin"),
        ],
        vec!["align".into(), "--source".into(), f(&files.source), "--target".into(), f(&files.target), "--links".into(), d("links")],
        vec![
            "project".into(), "--source".into(), f(&files.source), "--target".into(), f(&files.target),
            "--tagged".into(), f(&files.tagged), "--links".into(), d("links"), "--projected".into(), d("projected"),
        ],
        vec!["train-hmm".into(), "--tagged".into(), d("projected"), "--hmm".into(), d("hmm.bin")],
        vec![
            "baseline".into(), "--source".into(), f(&files.source), "--target".into(), f(&files.target),
            "--tagged".into(), f(&files.tagged), "--projected".into(), d("projected2"), "--hmm".into(), d("hmm2.bin"),
        ],
        vec![
            "combine".into(), "--hmm".into(), d("hmm.bin"), "--model".into(), d("model.bin"), "--repr".into(), d("repr.bin"),
            "--gold".into(), f(&files.gold), "--report".into(), d("combined.txt"),
        ],
        vec![
            "evaluate".into(), "--gold".into(), f(&files.gold), "--predicted".into(), d("test.rnn"),
            "--repr".into(), d("repr.bin"), "--report".into(), d("rnn.txt"),
        ],
    ];
    for step in steps {
        let code = xltag::cli::run(std::iter::once("xltag".to_string()).chain(step.iter().cloned()));
        if code != 0 {
            return Err(format!("{} exited with {code}", step[0]));
        }
    }
    Ok(())
}

const ARTIFACTS: &[&str] = &[
    "repr.bin",
    "cbow.bin",
    "model.bin",
    "train.log",
    "test.rnn",
    "links",
    "projected",
    "hmm.bin",
    "projected2",
    "hmm2.bin",
    "combined.txt",
    "combined.txt.kv",
    "rnn.txt",
    "rnn.txt.kv",
];

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let fa = common::toy_files(a.path(), 150, 43);
    let fb = common::toy_files(b.path(), 150, 43);
    if let Err(e) = run_cli(a.path(), &fa).and_then(|_| run_cli(b.path(), &fb)) {
        return outcome(false, e);
    }
    let differing: Vec<&str> = ARTIFACTS
        .iter()
        .copied()
        .filter(|n| std::fs::read(a.path().join(n)).unwrap() != std::fs::read(b.path().join(n)).unwrap())
        .collect();

    // A POS-injected BRNN trained twice in process.
    let (synth, tags, pos_tags) = supersense_task(60, 47);
    let repr = build_representation(&synth.corpus(&["s", "t"]));
    let train_set = synth.tagged("s", &tags, 0..50);
    let valid_set = synth.tagged("s", &tags, 50..60);
    let fit = Fit {
        repr: &repr,
        tags: &tags,
        pos_tags: Some(&pos_tags),
        train: &train_set,
        valid: &valid_set,
        train_pos: Some(&synth.pos[0..50]),
        valid_pos: Some(&synth.pos[50..60]),
    };
    let config = RnnConfig {
        max_epochs: 4,
        ..small_config(true, PosInjection::Compression, 2)
    };
    let same_model = binary::encode_rnn(&fit.run(config.clone())) == binary::encode_rnn(&fit.run(config));
    outcome(
        differing.is_empty() && same_model,
        format!(
            "{} CLI artifacts compared, differing {differing:?}; in-process model bytes {}",
            ARTIFACTS.len(),
            if same_model { "identical" } else { "differ" }
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() {
    let start = Instant::now();
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut report = |n: u32, name: &'static str, o: Outcome| {
        println!("[{}] {n:>2} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        results.push((n, name, o));
    };
    report(1, "gradient check", gradients());
    report(2, "forward-pass oracle", forward_oracle());
    let (transfer_outcome, transfer) = mirror_transfer();
    report(3, "mirror-language transfer", transfer_outcome);
    report(4, "right context", right_context());
    report(5, "OOV resolution", oov_resolution());
    report(6, "two target languages", multilingual());
    report(7, "HMM against enumeration", hmm_oracle());
    report(8, "IBM Model 1", ibm1_oracle());
    report(9, "combiner", combiner(&transfer));
    report(10, "POS injection", pos_injection());
    report(11, "determinism", determinism());
    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed ({:.1} s)",
        results.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
