//! Subcommand implementations. Each one resolves and checks every setting
//! and input path first, then loads and computes, and writes its outputs
//! last, so a failing run leaves no partial artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use xltag_core::align::{align_corpus, project_tags, train_ibm1, AlignmentLinks, NULL_DROP_THRESHOLD};
use xltag_core::cbow::{train_cbow, CbowConfig, CbowModel};
use xltag_core::combine::{evaluate, evaluate_fixed_mu, tune_mu, EvalReport, SystemOutputs, TagDistribution};
use xltag_core::corpus::{ParallelCorpus, PartialTaggedSentence, Sentence, Side, TagSet, TaggedSentence};
use xltag_core::hmm::{train_hmm_partial, HmmConfig, HmmModel};
use xltag_core::repr::{build_representation, ReprTable};
use xltag_core::rnn::{tag_sentence, train, EpochRecord, Example, OovResolver, PosInjection, RnnConfig, RnnModel};

use crate::binary;
use crate::config::Config;
use crate::error::{Error, Result};
use crate::report::{self, MuChoice};
use crate::text;

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn targets(cfg: &Config) -> Result<Vec<PathBuf>> {
    let paths = cfg.paths("target");
    if paths.is_empty() {
        return Err(Error::Config("missing required setting `target`".into()));
    }
    for p in &paths {
        if !p.is_file() {
            return Err(Error::Config(format!("`target`: no such file {}", p.display())));
        }
    }
    Ok(paths)
}

fn tagset(cfg: &Config, key: &str) -> Result<TagSet> {
    match cfg.optional_input(key)? {
        Some(p) => text::read_tagset(&p),
        None => Ok(text::universal_tagset()),
    }
}

fn report_kv_path(cfg: &Config, report: &Path) -> Result<PathBuf> {
    match cfg.optional_output("report-kv")? {
        Some(p) => Ok(p),
        None => {
            let mut s = report.as_os_str().to_owned();
            s.push(".kv");
            Ok(PathBuf::from(s))
        }
    }
}

fn check_side(path: &Path, side: Side, repr: &ReprTable) -> Result<()> {
    if repr.words(side).next().is_none() {
        return Err(Error::data(path, format!("representation has no words on side {side}")));
    }
    Ok(())
}

/// Checks that a second tagged file covers the same tokens as the first.
fn check_parallel_tokens(path: &Path, a: &[Vec<String>], b: &[Vec<String>]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::data(
            path,
            format!("{} sentences, expected {}", b.len(), a.len()),
        ));
    }
    for (i, (x, y)) in a.iter().zip(b).enumerate() {
        if x != y {
            return Err(Error::data(path, format!("sentence {} does not match the corpus tokens", i + 1)));
        }
    }
    Ok(())
}

pub fn build_repr(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let source = cfg.input("source")?;
    let targets = targets(cfg)?;
    let out = cfg.output("repr")?;
    let corpus = text::read_parallel_corpus(&source, &targets, lowercase)?;
    write_file(&out, binary::encode_repr(&build_representation(&corpus)))
}

pub fn train_cbow_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let side = cfg.side()?;
    let path = if side == Side::SOURCE {
        cfg.input("source")?
    } else {
        targets(cfg)?
            .get(side.0 as usize - 1)
            .cloned()
            .ok_or_else(|| Error::Config(format!("no `target` file for side {side}")))?
    };
    let extra = cfg.optional_input("extra-text")?;
    let defaults = CbowConfig::default();
    let config = CbowConfig {
        window: cfg.value("cbow-window", defaults.window)?,
        dim: cfg.value("cbow-dim", defaults.dim)?,
        negatives: cfg.value("cbow-negatives", defaults.negatives)?,
        epochs: cfg.value("cbow-epochs", defaults.epochs)?,
        learning_rate: cfg.value("cbow-lr", defaults.learning_rate)?,
        seed: cfg.seed()?.wrapping_add(2),
    };
    let out = cfg.output("cbow")?;
    let mut sentences = text::read_sentences(&path, lowercase)?;
    if let Some(p) = extra {
        sentences.extend(text::read_sentences(&p, lowercase)?);
    }
    let model = train_cbow(&sentences, &config)?;
    write_file(&out, binary::encode_cbow(&model))
}

fn rnn_config(cfg: &Config) -> Result<RnnConfig> {
    let defaults = RnnConfig::default();
    let pos_injection = cfg.pos_injection()?;
    let config = RnnConfig {
        forward_size: cfg.value("forward-size", defaults.forward_size)?,
        compression_size: cfg.value("compression-size", defaults.compression_size)?,
        bidirectional: cfg.flag("bidirectional", false)?,
        pos_injection,
        pos_tagset_size: 0,
        learning_rate: cfg.value("learning-rate", defaults.learning_rate)?,
        max_epochs: cfg.value("max-epochs", defaults.max_epochs)?,
        bptt: cfg.bptt()?,
        seed: cfg.seed()?,
    };
    if config.max_epochs == 0 {
        return Err(Error::Config("max-epochs must be at least 1".into()));
    }
    Ok(config)
}

fn format_log(log: &[EpochRecord]) -> String {
    let mut out = String::from("epoch\tlearning_rate\ttrain_loss\tvalid_accuracy\timproved\n");
    for r in log {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}",
            r.epoch, r.learning_rate, r.train_loss, r.valid_accuracy, r.improved
        );
    }
    out
}

/// Loads a POS-tagged companion file and checks it covers `tokens`.
fn pos_stream(path: &Path, pos_tags: &TagSet, lowercase: bool, tokens: &[Vec<String>]) -> Result<Vec<Vec<usize>>> {
    let pos = text::read_tagged(path, pos_tags, lowercase)?;
    let pos_tokens: Vec<Vec<String>> = pos.iter().map(|s| s.tokens.clone()).collect();
    check_parallel_tokens(path, tokens, &pos_tokens)?;
    Ok(pos.into_iter().map(|s| s.tags).collect())
}

fn examples<'a>(repr: &'a ReprTable, corpus: &[TaggedSentence], pos: Option<Vec<Vec<usize>>>) -> Vec<Example<'a>> {
    let mut pos = pos.map(Vec::into_iter);
    corpus
        .iter()
        .map(|s| Example {
            inputs: s.tokens.iter().map(|w| repr.vector(Side::SOURCE, w)).collect(),
            tags: s.tags.clone(),
            pos: pos.as_mut().map(|p| p.next().expect("length checked")),
        })
        .collect()
}

pub fn train_rnn_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let mut config = rnn_config(cfg)?;
    let uses_pos = config.pos_injection != PosInjection::None;
    let repr_path = cfg.input("repr")?;
    let tagged_path = cfg.input("tagged")?;
    let valid_path = cfg.optional_input("valid")?;
    let tags = tagset(cfg, "tagset")?;
    let pos_tags = if uses_pos { Some(tagset(cfg, "pos-tagset")?) } else { None };
    let pos_train_path = if uses_pos { Some(cfg.input("pos-train")?) } else { None };
    let pos_valid_path = match (uses_pos, &valid_path) {
        (true, Some(_)) => Some(cfg.input("pos-valid")?),
        _ => None,
    };
    let out = cfg.output("model")?;
    let log_out = cfg.optional_output("log")?;
    config.pos_tagset_size = pos_tags.as_ref().map_or(0, TagSet::len);
    config.validate().map_err(|e| Error::Config(e.to_string()))?;

    let repr = binary::read_repr(&repr_path)?;
    check_side(&repr_path, Side::SOURCE, &repr)?;
    let train_corpus = text::read_tagged(&tagged_path, &tags, lowercase)?;
    if train_corpus.is_empty() {
        return Err(Error::data(&tagged_path, "no sentences"));
    }
    let valid_corpus = match &valid_path {
        Some(p) => text::read_tagged(p, &tags, lowercase)?,
        None => train_corpus.clone(),
    };
    let token_lists = |c: &[TaggedSentence]| c.iter().map(|s| s.tokens.clone()).collect::<Vec<_>>();
    let (pos_train, pos_valid) = match (&pos_tags, &pos_train_path) {
        (Some(pt), Some(p)) => {
            let train_pos = pos_stream(p, pt, lowercase, &token_lists(&train_corpus))?;
            let valid_pos = match &pos_valid_path {
                Some(vp) => pos_stream(vp, pt, lowercase, &token_lists(&valid_corpus))?,
                None => train_pos.clone(),
            };
            (Some(train_pos), Some(valid_pos))
        }
        _ => (None, None),
    };
    let train_set = examples(&repr, &train_corpus, pos_train);
    let valid_set = examples(&repr, &valid_corpus, pos_valid);
    let model = RnnModel::new(config, repr.dim(), tags, pos_tags)?;
    let (model, log) = train(model, &train_set, &valid_set)?;

    write_file(&out, binary::encode_rnn(&model))?;
    let log_text = format_log(&log);
    match log_out {
        Some(p) => write_file(&p, log_text),
        None => {
            print!("{log_text}");
            Ok(())
        }
    }
}

/// Where the tagger's POS stream comes from.
enum PosSource {
    None,
    File(Vec<Vec<usize>>),
    Hmm(Box<HmmModel>),
}

impl PosSource {
    fn resolve(cfg: &Config, model: &RnnModel, lowercase: bool, tokens: &[Vec<String>]) -> Result<Self> {
        let Some(pos_tags) = model.pos_tagset() else {
            return Ok(PosSource::None);
        };
        if let Some(p) = cfg.optional_input("pos-input")? {
            return Ok(PosSource::File(pos_stream(&p, pos_tags, lowercase, tokens)?));
        }
        if let Some(p) = cfg.optional_input("pos-hmm")? {
            let hmm = binary::read_hmm(&p)?;
            if !hmm.tagset().same_labels(pos_tags) {
                return Err(Error::data(&p, "HMM tagset differs from the model's POS tagset"));
            }
            return Ok(PosSource::Hmm(Box::new(hmm)));
        }
        Err(Error::Config(
            "model uses POS injection: set `pos-input` or `pos-hmm`".into(),
        ))
    }

    fn get(&self, i: usize, tokens: &[String]) -> Option<Vec<usize>> {
        match self {
            PosSource::None => None,
            PosSource::File(p) => Some(p[i].clone()),
            PosSource::Hmm(h) => Some(h.viterbi(tokens)),
        }
    }
}

struct RnnTagger {
    model: RnnModel,
    repr: ReprTable,
    cbow: Option<CbowModel>,
    side: Side,
}

impl RnnTagger {
    fn load(cfg: &Config) -> Result<(Self, PathBuf)> {
        let side = cfg.side()?;
        let model_path = cfg.input("model")?;
        let repr_path = cfg.input("repr")?;
        let cbow_path = if cfg.flag("oov-resolve", false)? {
            Some(cfg.input("cbow")?)
        } else {
            None
        };
        Ok((
            RnnTagger {
                model: binary::read_rnn(&model_path)?,
                repr: {
                    let r = binary::read_repr(&repr_path)?;
                    check_side(&repr_path, side, &r)?;
                    r
                },
                cbow: cbow_path.as_deref().map(binary::read_cbow).transpose()?,
                side,
            },
            repr_path,
        ))
    }

    fn check_dim(&self, repr_path: &Path) -> Result<()> {
        if self.model.input_dim() != self.repr.dim() {
            return Err(Error::data(
                repr_path,
                format!(
                    "representation has dimension {} but the model expects {}",
                    self.repr.dim(),
                    self.model.input_dim()
                ),
            ));
        }
        Ok(())
    }

    /// Tags every sentence, in parallel, keeping input order.
    fn run(&self, sentences: &[Sentence], pos: &PosSource) -> Result<Vec<Vec<TagDistribution>>> {
        let oov = self.cbow.as_ref().map(|cbow| OovResolver { cbow });
        sentences
            .par_iter()
            .enumerate()
            .map(|(i, tokens)| {
                let p = pos.get(i, tokens);
                tag_sentence(&self.model, &self.repr, tokens, self.side, p.as_deref(), oov)
                    .map(|o| o.distributions)
                    .map_err(Error::from)
            })
            .collect()
    }
}

pub fn tag_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let (tagger, repr_path) = RnnTagger::load(cfg)?;
    let input = cfg.input("input")?;
    let out = cfg.output("output")?;
    tagger.check_dim(&repr_path)?;
    let sentences = text::read_sentences(&input, lowercase)?;
    let pos = PosSource::resolve(cfg, &tagger.model, lowercase, &sentences)?;
    let dists = tagger.run(&sentences, &pos)?;
    let tagged: Vec<TaggedSentence> = sentences
        .into_iter()
        .zip(dists)
        .map(|(tokens, d)| TaggedSentence {
            tokens,
            tags: d.iter().map(TagDistribution::argmax).collect(),
        })
        .collect();
    write_file(&out, text::format_tagged(&tagged, tagger.model.tagset()))
}

fn single_target(cfg: &Config) -> Result<PathBuf> {
    let t = targets(cfg)?;
    if t.len() != 1 {
        return Err(Error::Config("alignment needs exactly one `target` file".into()));
    }
    Ok(t.into_iter().next().expect("one target"))
}

fn null_threshold(cfg: &Config) -> Result<f64> {
    let t: f64 = cfg.value("null-threshold", NULL_DROP_THRESHOLD)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Config("null-threshold must lie in [0, 1]".into()));
    }
    Ok(t)
}

fn ibm_iterations(cfg: &Config) -> Result<usize> {
    let n: usize = cfg.value("ibm-iterations", 5)?;
    if n == 0 {
        return Err(Error::Config("ibm-iterations must be at least 1".into()));
    }
    Ok(n)
}

fn hmm_config(cfg: &Config) -> Result<HmmConfig> {
    let d = HmmConfig::default();
    Ok(HmmConfig {
        rare_threshold: cfg.value("rare-threshold", d.rare_threshold)?,
        max_suffix: cfg.value("max-suffix", d.max_suffix)?,
    })
}

fn align_links(corpus: &ParallelCorpus, iterations: usize) -> Result<Vec<AlignmentLinks>> {
    let table = train_ibm1(corpus, iterations)?;
    Ok(align_corpus(&table, corpus))
}

pub fn align_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let source = cfg.input("source")?;
    let target = single_target(cfg)?;
    let iterations = ibm_iterations(cfg)?;
    let out = cfg.output("links")?;
    let corpus = text::read_parallel_corpus(&source, &[target], lowercase)?;
    write_file(&out, text::format_links(&align_links(&corpus, iterations)?))
}

fn load_annotated_source(path: &Path, tags: &TagSet, lowercase: bool, corpus: &ParallelCorpus) -> Result<Vec<TaggedSentence>> {
    let tagged = text::read_tagged(path, tags, lowercase)?;
    let tokens: Vec<Vec<String>> = tagged.iter().map(|s| s.tokens.clone()).collect();
    check_parallel_tokens(path, corpus.source(), &tokens)?;
    Ok(tagged)
}

pub fn project_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let source = cfg.input("source")?;
    let target = single_target(cfg)?;
    let tagged_path = cfg.input("tagged")?;
    let links_path = cfg.input("links")?;
    let threshold = null_threshold(cfg)?;
    let tags = tagset(cfg, "tagset")?;
    let out = cfg.output("projected")?;
    let corpus = text::read_parallel_corpus(&source, &[target], lowercase)?;
    let tagged = load_annotated_source(&tagged_path, &tags, lowercase, &corpus)?;
    let links = text::read_links(&links_path)?;
    let projected =
        project_tags(&tagged, corpus.target(), &links, threshold).map_err(|e| Error::core(&links_path, e))?;
    write_file(&out, text::format_partial_tagged(&projected, &tags))
}

fn fit_hmm(path: &Path, corpus: &[PartialTaggedSentence], tags: &TagSet, config: HmmConfig) -> Result<HmmModel> {
    train_hmm_partial(corpus, tags, config).map_err(|e| Error::core(path, e))
}

pub fn train_hmm_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let tagged_path = cfg.input("tagged")?;
    let tags = tagset(cfg, "tagset")?;
    let config = hmm_config(cfg)?;
    let out = cfg.output("hmm")?;
    let corpus = text::read_partial_tagged(&tagged_path, &tags, lowercase)?;
    let model = fit_hmm(&tagged_path, &corpus, &tags, config)?;
    write_file(&out, binary::encode_hmm(&model))
}

/// Alignment, projection and HMM training in one run.
pub fn baseline_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let source = cfg.input("source")?;
    let target = single_target(cfg)?;
    let tagged_path = cfg.input("tagged")?;
    let tags = tagset(cfg, "tagset")?;
    let iterations = ibm_iterations(cfg)?;
    let threshold = null_threshold(cfg)?;
    let config = hmm_config(cfg)?;
    let projected_out = cfg.output("projected")?;
    let hmm_out = cfg.output("hmm")?;
    let links_out = cfg.optional_output("links")?;

    let corpus = text::read_parallel_corpus(&source, &[target], lowercase)?;
    let tagged = load_annotated_source(&tagged_path, &tags, lowercase, &corpus)?;
    let links = align_links(&corpus, iterations)?;
    let projected = project_tags(&tagged, corpus.target(), &links, threshold)?;
    let model = fit_hmm(&projected_out, &projected, &tags, config)?;

    if let Some(p) = links_out {
        write_file(&p, text::format_links(&links))?;
    }
    write_file(&projected_out, text::format_partial_tagged(&projected, &tags))?;
    write_file(&hmm_out, binary::encode_hmm(&model))
}

fn oov_flags(repr: &ReprTable, side: Side, corpus: &[TaggedSentence]) -> Vec<Vec<bool>> {
    corpus
        .iter()
        .map(|s| s.tokens.iter().map(|w| !repr.is_known(side, w)).collect())
        .collect()
}

fn write_report(cfg: &Config, title: &str, report: &EvalReport, tags: &TagSet, mu: MuChoice) -> Result<()> {
    let out = cfg.output("report")?;
    let kv = report_kv_path(cfg, &out)?;
    write_file(&out, report::to_text(title, report, tags, mu))?;
    write_file(&kv, report::to_key_values(report, mu))
}

pub fn combine_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let hmm_path = cfg.input("hmm")?;
    let (tagger, repr_path) = RnnTagger::load(cfg)?;
    let gold_path = cfg.input("gold")?;
    let mu: Option<f64> = cfg.optional_value("mu")?;
    if mu.is_some_and(|m| !(0.0..=1.0).contains(&m)) {
        return Err(Error::Config("mu must lie in [0, 1]".into()));
    }
    let grid_step: f64 = cfg.value("grid-step", 0.05)?;
    if !(grid_step > 0.0 && grid_step <= 1.0) {
        return Err(Error::Config("grid-step must lie in (0, 1]".into()));
    }
    let report_out = cfg.output("report")?;
    report_kv_path(cfg, &report_out)?;
    tagger.check_dim(&repr_path)?;

    let hmm = binary::read_hmm(&hmm_path)?;
    let tags = tagger.model.tagset().clone();
    if !hmm.tagset().same_labels(&tags) {
        return Err(Error::data(&hmm_path, "HMM and RNN tagsets differ"));
    }
    let gold = text::read_tagged(&gold_path, &tags, lowercase)?;
    let tokens: Vec<Sentence> = gold.iter().map(|s| s.tokens.clone()).collect();
    let pos = PosSource::resolve(cfg, &tagger.model, lowercase, &tokens)?;
    let rnn = tagger.run(&tokens, &pos)?;
    let outputs: Vec<SystemOutputs> = tokens
        .iter()
        .zip(rnn)
        .map(|(t, rnn)| SystemOutputs {
            hmm: hmm.posterior(t),
            rnn,
        })
        .collect();
    let oov = oov_flags(&tagger.repr, tagger.side, &gold);
    let n = tags.len();
    let (report, choice) = match mu {
        Some(m) => (evaluate_fixed_mu(&gold, &outputs, &oov, n, m)?, MuChoice::Fixed(m)),
        None => {
            let tuned = tune_mu(&gold, &outputs, &oov, n, grid_step).map_err(|e| Error::core(&gold_path, e))?;
            (tuned.report, MuChoice::Folds(tuned.mu_first_half, tuned.mu_second_half))
        }
    };
    write_report(cfg, "Combined HMM + RNN tagging", &report, &tags, choice)
}

pub fn evaluate_cmd(cfg: &Config) -> Result<()> {
    let lowercase = cfg.lowercase()?;
    let gold_path = cfg.input("gold")?;
    let predicted_path = cfg.input("predicted")?;
    let repr_path = cfg.optional_input("repr")?;
    let side = cfg.side()?;
    let tags = tagset(cfg, "tagset")?;
    let report_out = cfg.output("report")?;
    report_kv_path(cfg, &report_out)?;

    let gold = text::read_tagged(&gold_path, &tags, lowercase)?;
    let predicted = text::read_tagged(&predicted_path, &tags, lowercase)?;
    let gold_tokens: Vec<Sentence> = gold.iter().map(|s| s.tokens.clone()).collect();
    let pred_tokens: Vec<Sentence> = predicted.iter().map(|s| s.tokens.clone()).collect();
    check_parallel_tokens(&predicted_path, &gold_tokens, &pred_tokens)?;
    let oov = match &repr_path {
        Some(p) => oov_flags(&binary::read_repr(p)?, side, &gold),
        None => gold.iter().map(|s| vec![false; s.len()]).collect(),
    };
    let pred: Vec<Vec<usize>> = predicted.into_iter().map(|s| s.tags).collect();
    let report = evaluate(&gold, &pred, &oov, tags.len())?;
    write_report(cfg, "Tagging accuracy", &report, &tags, MuChoice::None)
}
