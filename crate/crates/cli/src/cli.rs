//! Command-line front end.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Arg, ArgAction, ArgMatches, Command};

use crate::commands;
use crate::config::{Config, KEYS};
use crate::error::{Error, Result};

const BOOLEAN_KEYS: &[&str] = &["lowercase", "bidirectional", "oov-resolve"];

const SUBCOMMANDS: &[(&str, &str)] = &[
    ("build-repr", "Build common word vectors from a parallel corpus"),
    ("train-cbow", "Train CBOW embeddings for unknown-word replacement"),
    ("train-rnn", "Train a recurrent tagger on source-side annotations"),
    ("tag", "Tag a text file with a trained recurrent tagger"),
    ("align", "Word-align a parallel corpus with IBM Model 1"),
    ("project", "Project source tags onto the target side through alignments"),
    ("train-hmm", "Train a trigram HMM tagger"),
    ("baseline", "Align, project and train the HMM tagger in one run"),
    ("combine", "Combine HMM and RNN taggers and evaluate on a gold corpus"),
    ("evaluate", "Score a tagged file against a gold corpus"),
];

fn key_arg(key: &'static str, help: &'static str) -> Arg {
    let arg = Arg::new(key).long(key).help(help).action(ArgAction::Set);
    if BOOLEAN_KEYS.contains(&key) {
        arg.num_args(0..=1).default_missing_value("true").value_name("BOOL")
    } else {
        arg.value_name("VALUE")
    }
}

pub fn command() -> Command {
    let sub = |(name, about): &(&'static str, &'static str)| {
        Command::new(*name)
            .about(*about)
            .arg(
                Arg::new("config")
                    .long("config")
                    .value_name("FILE")
                    .help("key = value configuration file; flags override it")
                    .value_parser(clap::value_parser!(PathBuf)),
            )
            .args(KEYS.iter().map(|(k, h)| key_arg(k, h)))
    };
    Command::new("xltag")
        .about("Cross-lingual part-of-speech and super-sense tagging")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommands(SUBCOMMANDS.iter().map(sub))
}

fn config_from(m: &ArgMatches) -> Result<Config> {
    let mut config = match m.get_one::<PathBuf>("config") {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            config.set(key, v.clone())?;
        }
    }
    Ok(config)
}

pub fn dispatch(name: &str, config: &Config) -> Result<()> {
    match name {
        "build-repr" => commands::build_repr(config),
        "train-cbow" => commands::train_cbow_cmd(config),
        "train-rnn" => commands::train_rnn_cmd(config),
        "tag" => commands::tag_cmd(config),
        "align" => commands::align_cmd(config),
        "project" => commands::project_cmd(config),
        "train-hmm" => commands::train_hmm_cmd(config),
        "baseline" => commands::baseline_cmd(config),
        "combine" => commands::combine_cmd(config),
        "evaluate" => commands::evaluate_cmd(config),
        other => Err(Error::Config(format!("unknown command `{other}`"))),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let (name, sub) = matches.subcommand().expect("subcommand required");
    let result = config_from(sub).and_then(|c| dispatch(name, &c));
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("xltag {name}: error: {e}");
            e.exit_code()
        }
    }
}
