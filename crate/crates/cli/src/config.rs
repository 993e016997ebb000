//! Flat `key = value` run configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use xltag_core::corpus::Side;
use xltag_core::rnn::{BpttHorizon, PosInjection};

use crate::error::{Error, Result};

/// Every recognised key with its help text. Each one is also a command-line
/// flag of the same name.
pub const KEYS: &[(&str, &str)] = &[
    ("source", "source-language side of the parallel corpus (one sentence per line)"),
    ("target", "target-language side(s); comma-separated for several languages"),
    ("tagged", "tagged corpus (token<TAB>tag, blank line between sentences)"),
    ("valid", "tagged validation corpus"),
    ("pos-train", "POS-tagged version of the training corpus"),
    ("pos-valid", "POS-tagged version of the validation corpus"),
    ("tagset", "tagset file, one label per line (default: universal tagset)"),
    ("pos-tagset", "POS tagset file for POS injection (default: universal tagset)"),
    ("repr", "common word representation file (XLREP1)"),
    ("cbow", "CBOW model file (XLCBW1)"),
    ("model", "RNN tagger model file (XLRNN1)"),
    ("hmm", "HMM tagger model file (XLHMM1)"),
    ("pos-hmm", "HMM POS tagger supplying the POS stream at tagging time"),
    ("input", "text to tag, one sentence per line"),
    ("pos-input", "POS-tagged version of the input"),
    ("output", "output file"),
    ("log", "training log file"),
    ("links", "word alignment file"),
    ("projected", "projected tagged corpus"),
    ("gold", "gold tagged test corpus"),
    ("predicted", "predicted tagged corpus"),
    ("report", "evaluation report (text)"),
    ("report-kv", "evaluation report (key=value; default: <report>.kv)"),
    ("extra-text", "additional unannotated text for CBOW training"),
    ("seed", "global random seed"),
    ("lowercase", "lowercase every token (default true)"),
    ("side", "language side of the input: source, target, or targetN"),
    ("forward-size", "recurrent layer size"),
    ("compression-size", "compression layer size"),
    ("bidirectional", "add a backward recurrent layer"),
    ("pos-injection", "none, input, recurrent, or compression"),
    ("learning-rate", "initial SGD learning rate"),
    ("max-epochs", "maximum training epochs"),
    ("bptt", "full, or a truncation horizon in time steps"),
    ("cbow-window", "CBOW context window"),
    ("cbow-dim", "CBOW embedding size"),
    ("cbow-negatives", "CBOW negative samples"),
    ("cbow-epochs", "CBOW epochs"),
    ("cbow-lr", "CBOW initial learning rate"),
    ("ibm-iterations", "IBM Model 1 EM iterations"),
    ("null-threshold", "drop projected sentences with a larger share of NULL links"),
    ("rare-threshold", "HMM suffix model uses words at most this frequent"),
    ("max-suffix", "longest suffix for HMM unknown words"),
    ("mu", "fixed combination weight of the HMM; tuned by 2-fold CV when unset"),
    ("grid-step", "step of the mu grid"),
    ("oov-resolve", "replace unknown words using CBOW"),
];

pub fn is_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

/// Merged configuration values, all as strings until a command asks for a
/// typed value.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
    /// Directory relative paths from the config file are resolved against.
    base: BTreeMap<String, PathBuf>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::Config(format!("config line {}: expected key = value", i + 1)));
            };
            let k = k.trim().replace('_', "-");
            if !is_key(&k) {
                return Err(Error::Config(format!("config line {}: unknown key `{}`", i + 1, k)));
            }
            if values.insert(k.clone(), v.trim().to_string()).is_some() {
                return Err(Error::Config(format!("config line {}: duplicate key `{}`", i + 1, k)));
            }
        }
        Ok(Config {
            values,
            base: BTreeMap::new(),
        })
    }

    /// Reads a config file; relative paths inside it are taken relative to
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {}", path.display(), e)))?;
        let mut config = Self::parse(&text)?;
        let dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        config.base = config.values.keys().map(|k| (k.clone(), dir.clone())).collect();
        Ok(config)
    }

    /// Sets `key`, replacing any value from a file.
    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<()> {
        if !is_key(key) {
            return Err(Error::Config(format!("unknown key `{key}`")));
        }
        self.values.insert(key.to_string(), value.into());
        self.base.remove(key);
        Ok(())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        debug_assert!(is_key(key), "unregistered key {key}");
        self.values.get(key).map(String::as_str).filter(|v| !v.is_empty())
    }

    fn resolve(&self, key: &str, raw: &str) -> PathBuf {
        let p = PathBuf::from(raw);
        match self.base.get(key) {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p,
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.resolve(key, v))
    }

    pub fn paths(&self, key: &str) -> Vec<PathBuf> {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| self.resolve(key, s))
                    .collect()
            })
            .unwrap_or_default()
    }

    /// A path that must name an existing file.
    pub fn input(&self, key: &str) -> Result<PathBuf> {
        let p = self
            .path(key)
            .ok_or_else(|| Error::Config(format!("missing required setting `{key}`")))?;
        check_input(key, &p)?;
        Ok(p)
    }

    pub fn optional_input(&self, key: &str) -> Result<Option<PathBuf>> {
        self.path(key).map(|p| check_input(key, &p).map(|_| p)).transpose()
    }

    /// A path to be written; its directory must exist.
    pub fn output(&self, key: &str) -> Result<PathBuf> {
        let p = self
            .path(key)
            .ok_or_else(|| Error::Config(format!("missing required setting `{key}`")))?;
        check_output(key, &p)?;
        Ok(p)
    }

    pub fn optional_output(&self, key: &str) -> Result<Option<PathBuf>> {
        self.path(key).map(|p| check_output(key, &p).map(|_| p)).transpose()
    }

    pub fn value<T: FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v
                .parse()
                .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`"))),
        }
    }

    pub fn optional_value<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("invalid value `{v}` for `{key}`")))
            })
            .transpose()
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.get(key).map(str::to_ascii_lowercase).as_deref() {
            None => Ok(default),
            Some("true" | "1" | "yes" | "on") => Ok(true),
            Some("false" | "0" | "no" | "off") => Ok(false),
            Some(v) => Err(Error::Config(format!("invalid boolean `{v}` for `{key}`"))),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.value("seed", 1)
    }

    pub fn lowercase(&self) -> Result<bool> {
        self.flag("lowercase", true)
    }

    pub fn side(&self) -> Result<Side> {
        match self.get("side") {
            None => Ok(Side::TARGET),
            Some(v) => parse_side(v).ok_or_else(|| Error::Config(format!("invalid side `{v}`"))),
        }
    }

    pub fn pos_injection(&self) -> Result<PosInjection> {
        match self.get("pos-injection").unwrap_or("none") {
            "none" => Ok(PosInjection::None),
            "input" | "in" => Ok(PosInjection::Input),
            "recurrent" | "h1" => Ok(PosInjection::Recurrent),
            "compression" | "h2" => Ok(PosInjection::Compression),
            v => Err(Error::Config(format!("invalid pos-injection `{v}`"))),
        }
    }

    pub fn bptt(&self) -> Result<BpttHorizon> {
        match self.get("bptt") {
            None | Some("full") => Ok(BpttHorizon::Full),
            Some(v) => v
                .parse()
                .map(BpttHorizon::Truncated)
                .map_err(|_| Error::Config(format!("invalid bptt `{v}`"))),
        }
    }
}

pub fn parse_side(v: &str) -> Option<Side> {
    match v {
        "source" => Some(Side::SOURCE),
        "target" => Some(Side::TARGET),
        _ => {
            let n: u8 = v.strip_prefix("target")?.parse().ok()?;
            (n >= 1).then_some(Side(n))
        }
    }
}

fn check_input(key: &str, p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Config(format!("`{key}`: no such file {}", p.display())))
    }
}

fn check_output(key: &str, p: &Path) -> Result<()> {
    let dir = p.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    if !dir.is_dir() {
        return Err(Error::Config(format!(
            "`{key}`: directory {} does not exist",
            dir.display()
        )));
    }
    if p.is_dir() {
        return Err(Error::Config(format!("`{key}`: {} is a directory", p.display())));
    }
    Ok(())
}
