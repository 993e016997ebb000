//! Plain-text corpus, tagset and alignment formats.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use xltag_core::align::AlignmentLinks;
use xltag_core::corpus::{ParallelCorpus, PartialTaggedSentence, Sentence, TagSet, TaggedSentence};

use crate::error::{Error, Result};

/// Tag written for tokens a projection left untagged.
pub const UNKNOWN_TAG: &str = "__UNK_TAG__";

/// The universal tagset file shipped with the crate.
pub const UNIVERSAL_TAGSET: &str = include_str!("../data/universal.tags");

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn tokenize(line: &str, lowercase: bool) -> Sentence {
    line.split_whitespace()
        .map(|t| if lowercase { t.to_lowercase() } else { t.to_string() })
        .collect()
}

/// One sentence per line. Blank lines are an error reported as a
/// malformed corpus on side `side`.
pub fn parse_sentences(text: &str, lowercase: bool, side: u8) -> xltag_core::Result<Vec<Sentence>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let s = tokenize(line, lowercase);
            if s.is_empty() {
                Err(xltag_core::Error::MalformedCorpus { side, line: i + 1 })
            } else {
                Ok(s)
            }
        })
        .collect()
}

pub fn read_sentences(path: &Path, lowercase: bool) -> Result<Vec<Sentence>> {
    parse_sentences(&read_to_string(path)?, lowercase, 0).map_err(|e| Error::core(path, e))
}

/// Loads a sentence-aligned corpus: the source file plus one file per
/// target language, line `i` of every file forming bi-sentence `i`.
pub fn read_parallel_corpus(source: &Path, targets: &[PathBuf], lowercase: bool) -> Result<ParallelCorpus> {
    let paths: Vec<&Path> = std::iter::once(source).chain(targets.iter().map(PathBuf::as_path)).collect();
    let mut sides = Vec::with_capacity(paths.len());
    for (k, path) in paths.iter().enumerate() {
        let text = read_to_string(path)?;
        sides.push(parse_sentences(&text, lowercase, k as u8).map_err(|e| Error::core(*path, e))?);
    }
    let n = sides[0].len();
    if let Some(k) = sides.iter().position(|s| s.len() != n) {
        return Err(Error::core(
            paths[k],
            xltag_core::Error::Alignment {
                source_lines: n,
                target_lines: sides[k].len(),
            },
        ));
    }
    ParallelCorpus::multi(sides).map_err(|e| Error::core(source, e))
}

pub fn parse_tagset(name: &str, text: &str) -> xltag_core::Result<TagSet> {
    let labels = text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect();
    TagSet::new(name, labels)
}

pub fn read_tagset(path: &Path) -> Result<TagSet> {
    let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("tagset");
    parse_tagset(name, &read_to_string(path)?).map_err(|e| Error::core(path, e))
}

pub fn universal_tagset() -> TagSet {
    parse_tagset("universal", UNIVERSAL_TAGSET).expect("shipped tagset is valid")
}

/// `token<TAB>tag` lines, a blank line after each sentence. The unknown
/// marker yields `None`.
pub fn parse_partial_tagged(text: &str, tagset: &TagSet, lowercase: bool) -> xltag_core::Result<Vec<PartialTaggedSentence>> {
    use xltag_core::Error as E;
    let mut out = Vec::new();
    let mut current = PartialTaggedSentence {
        tokens: Vec::new(),
        tags: Vec::new(),
    };
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            if !current.tokens.is_empty() {
                out.push(std::mem::replace(
                    &mut current,
                    PartialTaggedSentence {
                        tokens: Vec::new(),
                        tags: Vec::new(),
                    },
                ));
            }
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [token, label] = fields[..] else {
            return Err(E::Format {
                line: line_no,
                message: format!("expected token<TAB>tag, found {} field(s)", fields.len()),
            });
        };
        let token = token.trim();
        let label = label.trim();
        if token.is_empty() || token.contains(char::is_whitespace) {
            return Err(E::Format {
                line: line_no,
                message: "token must be a single non-empty word".to_string(),
            });
        }
        let tag = if label == UNKNOWN_TAG {
            None
        } else {
            Some(tagset.index_of(label).ok_or_else(|| E::UnknownTag {
                label: label.to_string(),
                line: line_no,
            })?)
        };
        current
            .tokens
            .push(if lowercase { token.to_lowercase() } else { token.to_string() });
        current.tags.push(tag);
    }
    if !current.tokens.is_empty() {
        out.push(current);
    }
    Ok(out)
}

/// Like [`parse_partial_tagged`] but every token must carry a tag.
pub fn parse_tagged(text: &str, tagset: &TagSet, lowercase: bool) -> xltag_core::Result<Vec<TaggedSentence>> {
    if let Some((i, _)) = text
        .lines()
        .enumerate()
        .find(|(_, l)| l.split('\t').nth(1).map(str::trim) == Some(UNKNOWN_TAG))
    {
        return Err(xltag_core::Error::UnknownTag {
            label: UNKNOWN_TAG.to_string(),
            line: i + 1,
        });
    }
    Ok(parse_partial_tagged(text, tagset, lowercase)?
        .into_iter()
        .map(|s| TaggedSentence {
            tokens: s.tokens,
            tags: s.tags.into_iter().map(|t| t.expect("checked above")).collect(),
        })
        .collect())
}

pub fn read_tagged(path: &Path, tagset: &TagSet, lowercase: bool) -> Result<Vec<TaggedSentence>> {
    parse_tagged(&read_to_string(path)?, tagset, lowercase).map_err(|e| Error::core(path, e))
}

pub fn read_partial_tagged(path: &Path, tagset: &TagSet, lowercase: bool) -> Result<Vec<PartialTaggedSentence>> {
    parse_partial_tagged(&read_to_string(path)?, tagset, lowercase).map_err(|e| Error::core(path, e))
}

pub fn format_partial_tagged(corpus: &[PartialTaggedSentence], tagset: &TagSet) -> String {
    let mut out = String::new();
    for s in corpus {
        for (token, tag) in s.tokens.iter().zip(&s.tags) {
            let label = tag.map_or(UNKNOWN_TAG, |t| tagset.label(t));
            let _ = writeln!(out, "{token}\t{label}");
        }
        out.push('\n');
    }
    out
}

pub fn format_tagged(corpus: &[TaggedSentence], tagset: &TagSet) -> String {
    let partial: Vec<PartialTaggedSentence> = corpus.iter().map(PartialTaggedSentence::from).collect();
    format_partial_tagged(&partial, tagset)
}

/// One line per bi-sentence; for each target token the linked source
/// position, or `-` for NULL.
pub fn format_links(links: &[AlignmentLinks]) -> String {
    let mut out = String::new();
    for l in links {
        let fields: Vec<String> = l
            .0
            .iter()
            .map(|x| x.map_or_else(|| "-".to_string(), |i| i.to_string()))
            .collect();
        out.push_str(&fields.join(" "));
        out.push('\n');
    }
    out
}

pub fn parse_links(text: &str) -> xltag_core::Result<Vec<AlignmentLinks>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            let links = line
                .split_whitespace()
                .map(|f| match f {
                    "-" => Ok(None),
                    n => n.parse().map(Some).map_err(|_| xltag_core::Error::Format {
                        line: i + 1,
                        message: format!("bad link `{n}`"),
                    }),
                })
                .collect::<xltag_core::Result<Vec<_>>>()?;
            if links.is_empty() {
                return Err(xltag_core::Error::Format {
                    line: i + 1,
                    message: "empty link line".to_string(),
                });
            }
            Ok(AlignmentLinks(links))
        })
        .collect()
}

pub fn read_links(path: &Path) -> Result<Vec<AlignmentLinks>> {
    parse_links(&read_to_string(path)?).map_err(|e| Error::core(path, e))
}
