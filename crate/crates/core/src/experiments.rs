//! Pruning and contribution experiments over template corpora.
//!
//! Scores compare two candidate words at the prediction step of each instance,
//! either with the full model logits or with decomposed scores of a phrase in
//! focus. A win requires a strictly greater score; ties count as losses.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpora::{GenderInstance, NaInstance, Span};
use crate::decompose::{decompose, ratio, PhraseFocus};
use crate::error::{Error, Result};
use crate::interactions::{InitStatesClass, InputTokenClass, InteractionSet};
use crate::model::{LanguageModel, StepState};
use crate::scalar::Scalar;
use crate::shapley::BiasPolicy;
use crate::vocab::TokenId;

/// Which phrase of an instance is put in focus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FocusRole {
    Subject,
    Object,
    /// Empty focus: only intercepts (and, with `intercept*`, the initial states)
    /// reach the inside part.
    Intercepts,
    /// Every token of the instance.
    Sentence,
}

impl FocusRole {
    pub fn name(self) -> &'static str {
        match self {
            FocusRole::Subject => "subject",
            FocusRole::Object => "object",
            FocusRole::Intercepts => "intercepts",
            FocusRole::Sentence => "sentence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeVariant {
    Full,
    Gcd {
        interactions: InteractionSet,
        focus_role: FocusRole,
    },
}

impl ModeVariant {
    pub fn gcd(interactions: InteractionSet, focus_role: FocusRole) -> Result<Self> {
        if focus_role == FocusRole::Intercepts
            && interactions.input_token_class != InputTokenClass::AlwaysGamma
        {
            return Err(Error::Interactions(
                "the intercepts focus role needs a set that keeps inputs outside (intercept*)".into(),
            ));
        }
        Ok(ModeVariant::Gcd {
            interactions,
            focus_role,
        })
    }

    pub fn label(&self) -> String {
        match self {
            ModeVariant::Full => "full".into(),
            ModeVariant::Gcd {
                interactions,
                focus_role,
            } => format!("{}:{}", interactions.label(), focus_role.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScoringMode {
    pub variant: ModeVariant,
    pub include_decoder_intercept: bool,
}

impl fmt::Display for ScoringMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.variant.label())?;
        if !self.include_decoder_intercept {
            write!(f, " (no decoder bias)")?;
        }
        Ok(())
    }
}

/// Per-instance record; aggregates are recomputable from these alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceOutcome {
    pub index: usize,
    /// Score of the target word (correct verb, or `he`).
    pub score_target: f64,
    /// Score of the competitor (wrong verb, or `she`).
    pub score_other: f64,
    pub win: bool,
    pub tie: bool,
    pub degenerate: bool,
}

/// Aggregate of one (corpus, mode, policy) evaluation. For agreement tasks the
/// accuracy is the share of instances preferring the correct verb; for gender
/// corpora it is the share preferring `he` over `she`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub task: String,
    pub condition: String,
    pub mode: String,
    pub policy: String,
    pub include_decoder_intercept: bool,
    /// Percentage in `[0, 100]`.
    pub accuracy: f64,
    pub n: usize,
    pub ties: usize,
    pub degenerate: usize,
    #[serde(skip)]
    pub instances: Vec<InstanceOutcome>,
}

pub type NaResult = EvalResult;
pub type GenderResult = EvalResult;

impl EvalResult {
    pub const CSV_HEADER: [&'static str; 9] = [
        "task",
        "condition",
        "mode",
        "policy",
        "include_decoder_intercept",
        "accuracy",
        "n",
        "ties",
        "degenerate",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.task.clone(),
            self.condition.clone(),
            self.mode.clone(),
            self.policy.clone(),
            self.include_decoder_intercept.to_string(),
            format!("{:.1}", self.accuracy),
            self.n.to_string(),
            self.ties.to_string(),
            self.degenerate.to_string(),
        ]
    }

    /// Recomputes the aggregate fields from per-instance outcomes.
    pub fn aggregate(mut self, instances: Vec<InstanceOutcome>) -> Self {
        let scored: Vec<&InstanceOutcome> = instances.iter().filter(|o| !o.degenerate).collect();
        self.n = scored.len();
        self.degenerate = instances.len() - scored.len();
        self.ties = scored.iter().filter(|o| o.tie).count();
        let wins = scored.iter().filter(|o| o.win).count();
        self.accuracy = if self.n == 0 {
            0.0
        } else {
            100.0 * wins as f64 / self.n as f64
        };
        self.instances = instances;
        self
    }
}

/// Writes results as CSV under [`EvalResult::CSV_HEADER`].
pub fn write_results_csv<W: Write>(results: &[EvalResult], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(EvalResult::CSV_HEADER).map_err(err)?;
    for r in results {
        w.write_record(r.csv_record()).map_err(err)?;
    }
    w.flush().map_err(|e| Error::io("<output>", e))
}

/// Writes per-instance outcomes, one JSON object per line.
pub fn write_instances_jsonl<W: Write>(result: &EvalResult, out: W) -> Result<()> {
    crate::corpora::write_jsonl(out, &result.instances)
}

/// Raw ingredients for both decoder-intercept settings of one instance.
#[derive(Debug, Clone, Copy)]
struct RawScores<T> {
    target: T,
    other: T,
    target_intercept: T,
    other_intercept: T,
}

impl<T: Scalar> RawScores<T> {
    fn outcome(&self, index: usize, include_decoder_intercept: bool) -> InstanceOutcome {
        let (a, b) = if include_decoder_intercept {
            (self.target + self.target_intercept, self.other + self.other_intercept)
        } else {
            (self.target, self.other)
        };
        let degenerate = !(a.is_finite() && b.is_finite());
        InstanceOutcome {
            index,
            score_target: a.as_f64(),
            score_other: b.as_f64(),
            win: !degenerate && a > b,
            tie: !degenerate && a == b,
            degenerate,
        }
    }
}

/// Common view of an instance for scoring.
struct Item<'a> {
    tokens: &'a [TokenId],
    step: usize,
    target: TokenId,
    other: TokenId,
    subject: Span,
    object: Option<Span>,
}

fn focus_for(item: &Item<'_>, role: FocusRole) -> Result<PhraseFocus> {
    Ok(match role {
        FocusRole::Subject => item.subject.focus(),
        FocusRole::Object => item
            .object
            .ok_or_else(|| Error::Corpus("instance has no object span".into()))?
            .focus(),
        FocusRole::Intercepts => PhraseFocus::empty(),
        FocusRole::Sentence => PhraseFocus::span(0, item.tokens.len()),
    })
}

fn raw_scores<T: Scalar>(
    model: &LanguageModel<T>,
    item: &Item<'_>,
    variant: &ModeVariant,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<RawScores<T>> {
    let bd = model.decoder_intercept();
    let (target, other) = match variant {
        ModeVariant::Full => {
            let (states, _) = model.run_states(&item.tokens[..=item.step], init)?;
            let h = states[item.step].top_hidden();
            (
                model.logit(h, item.target) - bd[item.target],
                model.logit(h, item.other) - bd[item.other],
            )
        }
        ModeVariant::Gcd {
            interactions,
            focus_role,
        } => {
            let focus = focus_for(item, *focus_role)?;
            let dec = decompose(model, item.tokens, &focus, interactions, policy, init)?;
            (
                dec.beta_logit(item.step, item.target),
                dec.beta_logit(item.step, item.other),
            )
        }
    };
    Ok(RawScores {
        target,
        other,
        target_intercept: bd[item.target],
        other_intercept: bd[item.other],
    })
}

fn common_label<'a>(mut labels: impl Iterator<Item = String>) -> String {
    let first = labels.next().unwrap_or_default();
    if labels.all(|l| l == first) {
        first
    } else {
        "mixed".into()
    }
}

fn evaluate<T: Scalar>(
    model: &LanguageModel<T>,
    items: &[Item<'_>],
    variant: &ModeVariant,
    policy: BiasPolicy,
    init: &StepState<T>,
    task: String,
    condition: String,
) -> Result<[EvalResult; 2]> {
    if items.is_empty() {
        return Err(Error::Corpus("corpus is empty".into()));
    }
    for item in items {
        model.check_tokens(&[item.target, item.other])?;
        if item.step >= item.tokens.len() {
            return Err(Error::StepOutOfRange {
                step: item.step,
                len: item.tokens.len(),
            });
        }
    }
    let raw: Vec<RawScores<T>> = items
        .par_iter()
        .map(|item| raw_scores(model, item, variant, policy, init))
        .collect::<Result<_>>()?;
    let build = |include: bool| {
        EvalResult {
            task: task.clone(),
            condition: condition.clone(),
            mode: variant.label(),
            policy: policy.name().into(),
            include_decoder_intercept: include,
            accuracy: 0.0,
            n: 0,
            ties: 0,
            degenerate: 0,
            instances: Vec::new(),
        }
        .aggregate(raw.iter().enumerate().map(|(i, r)| r.outcome(i, include)).collect())
    };
    Ok([build(true), build(false)])
}

fn na_items(corpus: &[NaInstance]) -> Vec<Item<'_>> {
    corpus
        .iter()
        .map(|inst| Item {
            tokens: &inst.tokens,
            step: inst.prediction_step,
            target: inst.correct_verb,
            other: inst.wrong_verb,
            subject: inst.subject_span,
            object: None,
        })
        .collect()
}

fn gender_items(corpus: &[GenderInstance]) -> Vec<Item<'_>> {
    corpus
        .iter()
        .map(|inst| Item {
            tokens: &inst.tokens,
            step: inst.prediction_step,
            target: inst.he_id,
            other: inst.she_id,
            subject: inst.subject_span,
            object: Some(inst.object_span),
        })
        .collect()
}

/// Agreement accuracy under `mode`: correct verb scored strictly above the
/// wrong verb at the verb-prediction step.
pub fn na_eval<T: Scalar>(
    model: &LanguageModel<T>,
    corpus: &[NaInstance],
    mode: &ScoringMode,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<NaResult> {
    let [with, without] = na_eval_both(model, corpus, &mode.variant, policy, init)?;
    Ok(if mode.include_decoder_intercept { with } else { without })
}

/// Both decoder-intercept settings from a single pass: `[with, without]`.
pub fn na_eval_both<T: Scalar>(
    model: &LanguageModel<T>,
    corpus: &[NaInstance],
    variant: &ModeVariant,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<[NaResult; 2]> {
    evaluate(
        model,
        &na_items(corpus),
        variant,
        policy,
        init,
        common_label(corpus.iter().map(|i| i.task.to_string())),
        common_label(corpus.iter().map(|i| i.condition.to_string())),
    )
}

/// Percentage of instances where `he` scores strictly above `she`.
pub fn gender_eval<T: Scalar>(
    model: &LanguageModel<T>,
    corpus: &[GenderInstance],
    mode: &ScoringMode,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<GenderResult> {
    let [with, without] = gender_eval_both(model, corpus, &mode.variant, policy, init)?;
    Ok(if mode.include_decoder_intercept { with } else { without })
}

pub fn gender_eval_both<T: Scalar>(
    model: &LanguageModel<T>,
    corpus: &[GenderInstance],
    variant: &ModeVariant,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<[GenderResult; 2]> {
    evaluate(
        model,
        &gender_items(corpus),
        variant,
        policy,
        init,
        common_label(corpus.iter().map(|i| i.kind.to_string())),
        common_label(corpus.iter().map(|i| i.condition.to_string())),
    )
}

/// Mean of `β^z_he/z_he − β^z_she/z_she` for one structural slot of one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceCell {
    pub condition: String,
    pub slot: String,
    pub mean: f64,
    pub n: usize,
    pub degenerate: usize,
}

pub const PREFERENCE_SLOTS: [&str; 5] = ["INIT", "subject", "[...]", "object", "[...]final"];

/// Slot spans for the pronoun template: subject, the material up to the
/// object, the object, and the trailing tokens. `None` is the INIT slot.
fn preference_slots(inst: &GenderInstance) -> [Option<Span>; 5] {
    let n = inst.tokens.len();
    [
        None,
        Some(inst.subject_span),
        Some(Span(inst.subject_span.1, inst.object_span.0)),
        Some(inst.object_span),
        Some(Span(inst.object_span.1, n)),
    ]
}

/// Per condition and slot, the mean relative-contribution difference between
/// `he` and `she`. Each slot is decomposed as one phrase; the INIT slot uses an
/// empty focus with the initial states inside. Degenerate logits are skipped
/// and counted.
pub fn gender_preference_cells<T: Scalar>(
    model: &LanguageModel<T>,
    corpus: &[GenderInstance],
    interactions: &InteractionSet,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<Vec<PreferenceCell>> {
    let Some(first) = corpus.first() else {
        return Err(Error::Corpus("corpus is empty".into()));
    };
    if corpus.iter().any(|i| {
        i.tokens.len() != first.tokens.len()
            || i.subject_span != first.subject_span
            || i.object_span != first.object_span
    }) {
        return Err(Error::Corpus(
            "preference cells need instances sharing one template shape".into(),
        ));
    }
    let mut init_set = interactions.clone();
    init_set.init_states_class = InitStatesClass::Beta;

    let per_instance: Vec<[Option<f64>; 5]> = corpus
        .par_iter()
        .map(|inst| -> Result<[Option<f64>; 5]> {
            let mut out = [None; 5];
            for (k, slot) in preference_slots(inst).iter().enumerate() {
                let (focus, set) = match slot {
                    None => (PhraseFocus::empty(), &init_set),
                    Some(span) => (span.focus(), interactions),
                };
                let dec = decompose(model, &inst.tokens, &focus, set, policy, init)?;
                let t = inst.prediction_step;
                let rel = |w| ratio(model, dec.beta_logit(t, w), dec.logit(t, w), t, w);
                out[k] = match (rel(inst.he_id), rel(inst.she_id)) {
                    (Ok(he), Ok(she)) => Some((he - she).as_f64()),
                    _ => None,
                };
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;

    let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, inst) in corpus.iter().enumerate() {
        groups.entry(inst.condition.to_string()).or_default().push(i);
    }
    let mut cells = Vec::new();
    for (condition, members) in groups {
        for (k, slot) in PREFERENCE_SLOTS.iter().enumerate() {
            let vals: Vec<f64> = members.iter().filter_map(|&i| per_instance[i][k]).collect();
            cells.push(PreferenceCell {
                condition: condition.clone(),
                slot: slot.to_string(),
                mean: if vals.is_empty() {
                    0.0
                } else {
                    vals.iter().sum::<f64>() / vals.len() as f64
                },
                n: vals.len(),
                degenerate: members.len() - vals.len(),
            });
        }
    }
    Ok(cells)
}
