//! Flag interpretation shared by the commands.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use gcd::fixture::{default_lexicon, toy_lexicon, toy_model};
use gcd::{
    BiasPolicy, FocusRole, InitPolicy, InteractionSet, LanguageModel, Lexicon, ModeVariant,
    PhraseFocus,
};

use crate::{Common, InitArg, PolicyArg};

pub const TOY_MODEL: &str = "toy";

#[derive(Debug)]
pub enum CliError {
    /// Bad flags or flag combinations (exit 1).
    Config(String),
    /// Model, lexicon or corpus problems (exit 2).
    Data(gcd::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "{msg}"),
            CliError::Data(e) => write!(f, "{e}"),
        }
    }
}

impl From<gcd::Error> for CliError {
    fn from(e: gcd::Error) -> Self {
        match e {
            gcd::Error::Interactions(msg) => CliError::Config(msg),
            other => CliError::Data(other),
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn config_err<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Config(msg.into()))
}

pub fn load(model: &str) -> CliResult<LanguageModel> {
    if model == TOY_MODEL {
        return Ok(toy_model());
    }
    Ok(gcd::load_model(Path::new(model))?)
}

/// The explicit lexicon, else the one bundled for the model.
pub fn lexicon(model: &str, path: Option<&Path>) -> CliResult<Lexicon> {
    Ok(match path {
        Some(p) => Lexicon::load(p)?,
        None if model == TOY_MODEL => toy_lexicon(),
        None => default_lexicon(),
    })
}

pub fn policy(arg: PolicyArg) -> BiasPolicy {
    match arg {
        PolicyArg::Full => BiasPolicy::FullPermutations,
        PolicyArg::Fixed => BiasPolicy::BiasFixedFirst,
    }
}

pub fn init_policy(arg: InitArg) -> InitPolicy {
    match arg {
        InitArg::Warmup => InitPolicy::Warmup,
        InitArg::Zero => InitPolicy::Zero,
    }
}

pub fn interactions(common: &Common) -> CliResult<InteractionSet> {
    let mut set = InteractionSet::preset(&common.interactions)
        .map_err(|e| CliError::Config(format!("--interactions: {e}")))?;
    if let Some(pairs) = &common.pairs {
        set.pairs = InteractionSet::parse_pairs(pairs)
            .map_err(|e| CliError::Config(format!("--pairs: {e}")))?;
    }
    Ok(set)
}

pub fn setup_workers(workers: Option<usize>) -> CliResult<()> {
    if let Some(n) = workers {
        if n == 0 {
            return config_err("--workers must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("--workers: {e}")))?;
    }
    Ok(())
}

/// Parses `start:end` spans (end exclusive) for a sentence of `len` tokens.
pub fn focus(specs: &[String], len: usize) -> CliResult<PhraseFocus> {
    let mut spans = Vec::new();
    for spec in specs {
        let bad = || CliError::Config(format!("--focus \"{spec}\": expected start:end with start < end"));
        let (a, b) = spec.split_once(':').ok_or_else(bad)?;
        let start: usize = a.trim().parse().map_err(|_| bad())?;
        let end: usize = b.trim().parse().map_err(|_| bad())?;
        if start >= end {
            return Err(bad());
        }
        spans.push(start..end);
    }
    let focus = PhraseFocus::new(spans);
    focus
        .validate(len)
        .map_err(|e| CliError::Config(format!("--focus: {e}")))?;
    Ok(focus)
}

/// A scoring mode: `full`, or `preset[:role]` with roles subject, object,
/// intercepts and sentence. The preset `custom` stands for the set given by
/// `--interactions` and `--pairs`. Without a role, `intercept*` implies the
/// intercepts role and every other preset `default_role`.
pub fn mode(spec: &str, default_role: FocusRole, custom: &InteractionSet) -> CliResult<ModeVariant> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("full") {
        return Ok(ModeVariant::Full);
    }
    let (preset, role) = match spec.rsplit_once(':') {
        Some((p, r)) => (p, Some(r)),
        None => (spec, None),
    };
    let set = if preset.eq_ignore_ascii_case("custom") {
        custom.clone()
    } else {
        InteractionSet::preset(preset)
            .map_err(|e| CliError::Config(format!("--modes \"{spec}\": {e}")))?
    };
    let role = match role.map(|r| r.to_ascii_lowercase()) {
        None if set == InteractionSet::intercept_star() => FocusRole::Intercepts,
        None => default_role,
        Some(r) => match r.as_str() {
            "subject" => FocusRole::Subject,
            "object" => FocusRole::Object,
            "intercepts" => FocusRole::Intercepts,
            "sentence" => FocusRole::Sentence,
            _ => return config_err(format!("--modes \"{spec}\": unknown role \"{r}\"")),
        },
    };
    ModeVariant::gcd(set, role).map_err(|e| CliError::Config(format!("--modes \"{spec}\": {e}")))
}

pub fn modes(list: &str, default_role: FocusRole, custom: &InteractionSet) -> CliResult<Vec<ModeVariant>> {
    let modes: Vec<ModeVariant> = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| mode(s, default_role, custom))
        .collect::<CliResult<_>>()?;
    if modes.is_empty() {
        return config_err("--modes is empty");
    }
    Ok(modes)
}

/// Comma-separated values, or every option for "all".
pub fn select<T: Copy>(
    flag: &str,
    list: &str,
    all: &[T],
    parse: impl Fn(&str) -> gcd::Result<T>,
) -> CliResult<Vec<T>> {
    if list.trim().eq_ignore_ascii_case("all") {
        return Ok(all.to_vec());
    }
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse(s.trim()).map_err(|e| CliError::Config(format!("{flag}: {e}"))))
        .collect()
}

pub fn output(path: Option<&PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| CliError::Data(gcd::Error::Io {
                path: p.clone(),
                source: e,
            }))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

pub fn io_err(path: &str, e: io::Error) -> CliError {
    CliError::Data(gcd::Error::Io {
        path: PathBuf::from(path),
        source: e,
    })
}
