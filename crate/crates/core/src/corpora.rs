//! Deterministic template corpora for number agreement and pronoun gender.
//!
//! Sampling uses ChaCha8 seeded from a `u64`. All admissible lexicon
//! combinations are enumerated in a fixed order and `count` of them are drawn
//! without replacement; when fewer combinations exist, draws fall back to
//! sampling with replacement and a warning is logged.

use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use log::warn;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::decompose::PhraseFocus;
use crate::error::{Error, Result};
use crate::lexicon::{lookup, non_empty, Lexicon};
use crate::vocab::{TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NaTask {
    Simple,
    NounPP,
    NamePP,
}

impl NaTask {
    pub const ALL: [NaTask; 3] = [NaTask::Simple, NaTask::NounPP, NaTask::NamePP];

    pub fn conditions(self) -> &'static [NaCondition] {
        use NaCondition::*;
        match self {
            NaTask::Simple => &[S, P],
            NaTask::NounPP => &[SS, SP, PS, PP],
            NaTask::NamePP => &[SS, PS],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NaTask::Simple => "simple",
            NaTask::NounPP => "nounpp",
            NaTask::NamePP => "namepp",
        }
    }
}

impl FromStr for NaTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(NaTask::Simple),
            "nounpp" => Ok(NaTask::NounPP),
            "namepp" => Ok(NaTask::NamePP),
            other => Err(Error::Corpus(format!("unknown task \"{other}\""))),
        }
    }
}

impl fmt::Display for NaTask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NaCondition {
    S,
    P,
    SS,
    SP,
    PS,
    PP,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Number {
    Singular,
    Plural,
}

fn number(c: char) -> Number {
    if c == 'P' {
        Number::Plural
    } else {
        Number::Singular
    }
}

impl NaCondition {
    /// Subject and attractor numbers for `task`. For name subjects (always
    /// singular) the letter before the attractor marks the attractor.
    pub fn numbers(self, task: NaTask) -> (Number, Option<Number>) {
        let name = format!("{self:?}");
        let letters: Vec<char> = name.chars().collect();
        match (task, letters.as_slice()) {
            (NaTask::NamePP, [attractor, _]) => (Number::Singular, Some(number(*attractor))),
            (_, [subject]) => (number(*subject), None),
            (_, [subject, attractor]) => (number(*subject), Some(number(*attractor))),
            _ => unreachable!(),
        }
    }
}

impl FromStr for NaCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        use NaCondition::*;
        match s.to_ascii_uppercase().as_str() {
            "S" => Ok(S),
            "P" => Ok(P),
            "SS" => Ok(SS),
            "SP" => Ok(SP),
            "PS" => Ok(PS),
            "PP" => Ok(PP),
            other => Err(Error::Corpus(format!("unknown condition \"{other}\""))),
        }
    }
}

impl fmt::Display for NaCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Token span `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span(pub usize, pub usize);

impl Span {
    pub fn focus(self) -> PhraseFocus {
        PhraseFocus::span(self.0, self.1)
    }
}

/// One agreement item. `tokens` stops right before the verb slot; the verb
/// logits are read at `prediction_step` (the last token).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NaInstance {
    pub task: NaTask,
    pub condition: NaCondition,
    pub tokens: Vec<TokenId>,
    pub words: Vec<String>,
    pub subject_span: Span,
    pub attractor_span: Option<Span>,
    pub correct_verb: TokenId,
    pub wrong_verb: TokenId,
    pub correct_verb_word: String,
    pub wrong_verb_word: String,
    pub prediction_step: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenderKind {
    Unambiguous,
    Stereotypical,
}

impl GenderKind {
    pub const ALL: [GenderKind; 2] = [GenderKind::Unambiguous, GenderKind::Stereotypical];

    pub fn name(self) -> &'static str {
        match self {
            GenderKind::Unambiguous => "unambiguous",
            GenderKind::Stereotypical => "stereotypical",
        }
    }
}

impl FromStr for GenderKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "unambiguous" => Ok(GenderKind::Unambiguous),
            "stereotypical" => Ok(GenderKind::Stereotypical),
            other => Err(Error::Corpus(format!("unknown corpus kind \"{other}\""))),
        }
    }
}

impl fmt::Display for GenderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GenderCondition {
    FF,
    FM,
    MF,
    MM,
}

impl GenderCondition {
    pub const ALL: [GenderCondition; 4] = [
        GenderCondition::MM,
        GenderCondition::MF,
        GenderCondition::FM,
        GenderCondition::FF,
    ];

    /// `(subject is male, object is male)`.
    pub fn genders(self) -> (bool, bool) {
        match self {
            GenderCondition::FF => (false, false),
            GenderCondition::FM => (false, true),
            GenderCondition::MF => (true, false),
            GenderCondition::MM => (true, true),
        }
    }
}

impl FromStr for GenderCondition {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "FF" => Ok(GenderCondition::FF),
            "FM" => Ok(GenderCondition::FM),
            "MF" => Ok(GenderCondition::MF),
            "MM" => Ok(GenderCondition::MM),
            other => Err(Error::Corpus(format!("unknown gender condition \"{other}\""))),
        }
    }
}

impl fmt::Display for GenderCondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// One pronoun item: "The <subject> <verb> the <object> , because" with the
/// pronoun slot right after the last token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderInstance {
    pub kind: GenderKind,
    pub condition: GenderCondition,
    pub tokens: Vec<TokenId>,
    pub words: Vec<String>,
    pub subject_span: Span,
    pub object_span: Span,
    pub he_id: TokenId,
    pub she_id: TokenId,
    pub prediction_step: usize,
}

/// Picks `count` combination indices out of `total`.
fn draw(total: usize, count: usize, seed: u64, what: &str) -> Result<Vec<usize>> {
    if total == 0 {
        return Err(Error::Corpus(format!("lexicon yields no {what} combinations")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if count <= total {
        Ok(index::sample(&mut rng, total, count).into_vec())
    } else {
        warn!("{what}: only {total} distinct combinations for {count} instances; sampling with replacement");
        Ok((0..count).map(|_| rng.random_range(0..total)).collect())
    }
}

fn pick(pair: &(TokenId, TokenId), n: Number) -> TokenId {
    match n {
        Number::Singular => pair.0,
        Number::Plural => pair.1,
    }
}

/// Generates `count` agreement instances of `task` under `condition`.
pub fn generate_na_corpus(
    task: NaTask,
    condition: NaCondition,
    lexicon: &Lexicon,
    vocab: &Vocabulary,
    count: usize,
    seed: u64,
) -> Result<Vec<NaInstance>> {
    if !task.conditions().contains(&condition) {
        return Err(Error::Corpus(format!(
            "condition {condition} is not defined for task {task}"
        )));
    }
    let pairs = |field: &str, list: &[(String, String)]| -> Result<Vec<(TokenId, TokenId)>> {
        non_empty(field, list)?;
        list.iter()
            .map(|(s, p)| Ok((lookup(vocab, field, s)?, lookup(vocab, field, p)?)))
            .collect()
    };
    let words = |field: &str, list: &[String]| -> Result<Vec<TokenId>> {
        non_empty(field, list)?;
        list.iter().map(|w| lookup(vocab, field, w)).collect()
    };

    let verbs = pairs("verb_pairs", &lexicon.verb_pairs)?;
    let det = lookup(vocab, "determiner", &lexicon.determiner)?;
    let det0 = lookup(vocab, "initial_determiner", lexicon.initial_determiner())?;
    let (subject_number, attractor_number) = condition.numbers(task);

    // Each combination: (subject token, optional (preposition, attractor)), verb pair index.
    let mut combos: Vec<(Vec<TokenId>, Span, Option<Span>, usize)> = Vec::new();
    match task {
        NaTask::Simple => {
            let nouns = pairs("noun_pairs", &lexicon.noun_pairs)?;
            for n in &nouns {
                for v in 0..verbs.len() {
                    combos.push((vec![det0, pick(n, subject_number)], Span(0, 2), None, v));
                }
            }
        }
        NaTask::NounPP | NaTask::NamePP => {
            let nouns = pairs("noun_pairs", &lexicon.noun_pairs)?;
            let preps = words("prepositions", &lexicon.prepositions)?;
            let attractor_number = attractor_number.expect("two-letter condition");
            let subjects: Vec<(Vec<TokenId>, Option<usize>)> = if task == NaTask::NounPP {
                nouns
                    .iter()
                    .enumerate()
                    .map(|(i, n)| (vec![det0, pick(n, subject_number)], Some(i)))
                    .collect()
            } else {
                words("name_subjects", &lexicon.name_subjects)?
                    .into_iter()
                    .map(|n| (vec![n], None))
                    .collect()
            };
            for (subject, subject_index) in &subjects {
                for &prep in &preps {
                    for (a, attractor) in nouns.iter().enumerate() {
                        if Some(a) == *subject_index {
                            continue;
                        }
                        for v in 0..verbs.len() {
                            let mut toks = subject.clone();
                            let s = Span(0, toks.len());
                            toks.push(prep);
                            let start = toks.len();
                            toks.push(det);
                            toks.push(pick(attractor, attractor_number));
                            combos.push((toks, s, Some(Span(start, start + 2)), v));
                        }
                    }
                }
            }
        }
    }

    let picks = draw(combos.len(), count, seed, &format!("{task}-{condition}"))?;
    Ok(picks
        .into_iter()
        .map(|k| {
            let (tokens, subject_span, attractor_span, v) = combos[k].clone();
            let correct = pick(&verbs[v], subject_number);
            let wrong = pick(
                &verbs[v],
                match subject_number {
                    Number::Singular => Number::Plural,
                    Number::Plural => Number::Singular,
                },
            );
            NaInstance {
                task,
                condition,
                words: vocab.decode(&tokens),
                prediction_step: tokens.len() - 1,
                tokens,
                subject_span,
                attractor_span,
                correct_verb: correct,
                wrong_verb: wrong,
                correct_verb_word: vocab.token(correct).unwrap_or_default().to_string(),
                wrong_verb_word: vocab.token(wrong).unwrap_or_default().to_string(),
            }
        })
        .collect())
}

/// Generates `count` pronoun instances of `kind` under `condition`.
pub fn generate_gender_corpus(
    kind: GenderKind,
    condition: GenderCondition,
    lexicon: &Lexicon,
    vocab: &Vocabulary,
    count: usize,
    seed: u64,
) -> Result<Vec<GenderInstance>> {
    let g = lexicon.gender()?;
    let words = |field: &str, list: &[String]| -> Result<Vec<TokenId>> {
        non_empty(field, list)?;
        list.iter().map(|w| lookup(vocab, field, w)).collect()
    };
    let (male, female) = match kind {
        GenderKind::Unambiguous => (
            words("male_unambiguous", &g.male_unambiguous)?,
            words("female_unambiguous", &g.female_unambiguous)?,
        ),
        GenderKind::Stereotypical => (
            words("male_stereotypical", &g.male_stereotypical)?,
            words("female_stereotypical", &g.female_stereotypical)?,
        ),
    };
    let verbs = words("linking_verbs", &g.linking_verbs)?;
    let suffix = words("clause_suffix", &g.clause_suffix)?;
    let he = lookup(vocab, "pronouns", &g.pronouns.0)?;
    let she = lookup(vocab, "pronouns", &g.pronouns.1)?;
    let det = lookup(vocab, "determiner", &lexicon.determiner)?;
    let det0 = lookup(vocab, "initial_determiner", lexicon.initial_determiner())?;

    let (subject_male, object_male) = condition.genders();
    let subjects = if subject_male { &male } else { &female };
    let objects = if object_male { &male } else { &female };

    let mut combos: Vec<(TokenId, TokenId, TokenId)> = Vec::new();
    for &s in subjects {
        for &v in &verbs {
            for &o in objects {
                if s != o {
                    combos.push((s, v, o));
                }
            }
        }
    }
    let picks = draw(combos.len(), count, seed, &format!("{kind}-{condition}"))?;
    Ok(picks
        .into_iter()
        .map(|k| {
            let (s, v, o) = combos[k];
            let mut tokens = vec![det0, s, v, det, o];
            tokens.extend(&suffix);
            GenderInstance {
                kind,
                condition,
                words: vocab.decode(&tokens),
                prediction_step: tokens.len() - 1,
                tokens,
                subject_span: Span(0, 2),
                object_span: Span(3, 5),
                he_id: he,
                she_id: she,
            }
        })
        .collect())
}

/// Writes one JSON object per line.
pub fn write_jsonl<W: Write, I: Serialize>(mut out: W, items: &[I]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut out, item)?;
        out.write_all(b"\n").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn read_jsonl<R: BufRead, I: for<'de> Deserialize<'de>>(input: R) -> Result<Vec<I>> {
    let mut items = Vec::new();
    for (n, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<input>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        items.push(
            serde_json::from_str(&line)
                .map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?,
        );
    }
    Ok(items)
}
