use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("source side has {source_lines} sentences but target side has {target_lines}")]
    Alignment {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("malformed corpus: empty sentence at line {line} of side {side}")]
    MalformedCorpus { side: u8, line: usize },
    #[error("unknown tag `{label}` at line {line}")]
    UnknownTag { label: String, line: usize },
    #[error("format error at line {line}: {message}")]
    Format { line: usize, message: String },
    #[error("invalid tagset: {0}")]
    TagSet(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("inconsistent input: {0}")]
    Consistency(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training failed: {0}")]
    Training(String),
    #[error("non-finite loss at epoch {epoch}, sentence {sentence}")]
    Divergence { epoch: usize, sentence: usize },
}
