//! Generalised contextual decomposition of a multi-layer LSTM.
//!
//! Every cell and hidden state is split into an inside part `β` (attributable
//! to the phrase in focus) and an outside part `γ`, with `β + γ` equal to the
//! state of the ordinary forward pass. Gate activations are factorised over
//! their `{β, γ, intercept}` summands with exact Shapley contributions, and each
//! product of a gate contribution with a source part is routed to `β` or `γ`
//! according to an [`InteractionSet`].

use std::ops::Range;

use crate::error::{Error, Result};
use crate::interactions::{InitStatesClass, InputTokenClass, InteractionSet, PartClass};
use crate::model::{Gate, LanguageModel, StepState};
use crate::scalar::Scalar;
use crate::shapley::{contributions, Activation, BiasPolicy};
use crate::tensor::dot;
use crate::vocab::TokenId;

/// Token intervals `[start, end)` whose inputs count as inside.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PhraseFocus {
    spans: Vec<Range<usize>>,
}

impl PhraseFocus {
    pub fn empty() -> Self {
        PhraseFocus { spans: Vec::new() }
    }

    pub fn span(start: usize, end: usize) -> Self {
        PhraseFocus {
            spans: vec![start..end],
        }
    }

    pub fn new(spans: Vec<Range<usize>>) -> Self {
        PhraseFocus { spans }
    }

    pub fn spans(&self) -> &[Range<usize>] {
        &self.spans
    }

    pub fn is_empty(&self) -> bool {
        self.spans.iter().all(|s| s.is_empty())
    }

    pub fn contains(&self, t: usize) -> bool {
        self.spans.iter().any(|s| s.contains(&t))
    }

    /// Checks bounds and that the spans do not overlap.
    pub fn validate(&self, len: usize) -> Result<()> {
        for s in &self.spans {
            if s.start > s.end || s.end > len {
                return Err(Error::Focus {
                    start: s.start,
                    end: s.end,
                    len,
                });
            }
        }
        let mut sorted: Vec<&Range<usize>> = self.spans.iter().filter(|s| !s.is_empty()).collect();
        sorted.sort_by_key(|s| s.start);
        for w in sorted.windows(2) {
            if w[1].start < w[0].end {
                return Err(Error::Focus {
                    start: w[1].start,
                    end: w[1].end,
                    len,
                });
            }
        }
        Ok(())
    }
}

/// Inside and outside parts of one layer's cell and hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct StateParts<T> {
    pub beta_c: Vec<T>,
    pub gamma_c: Vec<T>,
    pub beta_h: Vec<T>,
    pub gamma_h: Vec<T>,
}

impl<T: Scalar> StateParts<T> {
    fn zeros(n: usize) -> Self {
        StateParts {
            beta_c: vec![T::zero(); n],
            gamma_c: vec![T::zero(); n],
            beta_h: vec![T::zero(); n],
            gamma_h: vec![T::zero(); n],
        }
    }
}

/// Per-layer, per-step inside/outside trajectories plus the reference forward
/// pass. Decoder projections are computed on demand.
#[derive(Debug, Clone)]
pub struct Decomposition<'m, T> {
    model: &'m LanguageModel<T>,
    initial: Vec<StateParts<T>>,
    steps: Vec<Vec<StateParts<T>>>,
    init_state: StepState<T>,
    forward: Vec<StepState<T>>,
}

impl<'m, T: Scalar> Decomposition<'m, T> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn model(&self) -> &'m LanguageModel<T> {
        self.model
    }

    /// Parts of layer `layer` after step `t`.
    pub fn parts(&self, t: usize, layer: usize) -> &StateParts<T> {
        &self.steps[t][layer]
    }

    /// Parts of the initial state, before any token is read.
    pub fn initial_parts(&self, layer: usize) -> &StateParts<T> {
        &self.initial[layer]
    }

    /// Reference forward-pass state after step `t`.
    pub fn state(&self, t: usize) -> &StepState<T> {
        &self.forward[t]
    }

    pub fn initial_state(&self) -> &StepState<T> {
        &self.init_state
    }

    fn top(&self, t: usize) -> &StateParts<T> {
        self.steps[t].last().expect("at least one layer")
    }

    fn check_step(&self, t: usize) -> Result<()> {
        if t < self.len() {
            Ok(())
        } else {
            Err(Error::StepOutOfRange {
                step: t,
                len: self.len(),
            })
        }
    }

    fn check_word(&self, word: TokenId) -> Result<()> {
        self.model.check_tokens(&[word])
    }

    /// `β^z_t = D β^h_t` over the whole vocabulary.
    pub fn beta_z(&self, t: usize) -> Vec<T> {
        self.model.decoder().matvec(&self.top(t).beta_h)
    }

    /// `γ^z_t = D γ^h_t` over the whole vocabulary.
    pub fn gamma_z(&self, t: usize) -> Vec<T> {
        self.model.decoder().matvec(&self.top(t).gamma_h)
    }

    pub fn beta_logit(&self, t: usize, word: TokenId) -> T {
        dot(self.model.decoder().row(word), &self.top(t).beta_h)
    }

    pub fn gamma_logit(&self, t: usize, word: TokenId) -> T {
        dot(self.model.decoder().row(word), &self.top(t).gamma_h)
    }

    /// Full-model logit `z_t[word]` from the reference forward pass.
    pub fn logit(&self, t: usize, word: TokenId) -> T {
        self.model.logit(self.forward[t].top_hidden(), word)
    }

    pub fn logits(&self, t: usize) -> Vec<T> {
        self.model.logits(self.forward[t].top_hidden())
    }

    pub fn initial_beta_logit(&self, word: TokenId) -> T {
        let top = self.initial.last().expect("at least one layer");
        dot(self.model.decoder().row(word), &top.beta_h)
    }

    pub fn initial_logit(&self, word: TokenId) -> T {
        self.model.logit(self.init_state.top_hidden(), word)
    }
}

/// Decomposes the forward pass over `tokens` with respect to `focus`.
pub fn decompose<'m, T: Scalar>(
    model: &'m LanguageModel<T>,
    tokens: &[TokenId],
    focus: &PhraseFocus,
    interactions: &InteractionSet,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<Decomposition<'m, T>> {
    model.check_tokens(tokens)?;
    focus.validate(tokens.len())?;
    let (forward, _) = model.run_states(tokens, init)?;

    let initial: Vec<StateParts<T>> = init
        .layers
        .iter()
        .map(|layer| {
            let mut parts = StateParts::zeros(layer.h.len());
            let (c, h) = match interactions.init_states_class {
                InitStatesClass::Beta => (&mut parts.beta_c, &mut parts.beta_h),
                InitStatesClass::Gamma => (&mut parts.gamma_c, &mut parts.gamma_h),
            };
            c.clone_from(&layer.c);
            h.clone_from(&layer.h);
            parts
        })
        .collect();

    let mut steps: Vec<Vec<StateParts<T>>> = Vec::with_capacity(tokens.len());
    for (t, &token) in tokens.iter().enumerate() {
        let in_focus = focus.contains(t);
        let prev_step = if t == 0 { &initial } else { &steps[t - 1] };
        let mut current: Vec<StateParts<T>> = Vec::with_capacity(model.layers().len());
        for (l, params) in model.layers().iter().enumerate() {
            let prev = &prev_step[l];
            let x = model.embedding(token);
            let (beta_in, gamma_in): (Option<&[T]>, Option<&[T]>) = if l == 0 {
                let inside = in_focus
                    && interactions.input_token_class == InputTokenClass::ByPhraseMembership;
                if inside {
                    (Some(x), None)
                } else {
                    (None, Some(x))
                }
            } else {
                let below = &current[l - 1];
                (Some(&below.beta_h), Some(&below.gamma_h))
            };
            current.push(cell_step(
                params,
                prev,
                beta_in,
                gamma_in,
                interactions,
                policy,
                in_focus,
            ));
        }
        steps.push(current);
    }

    Ok(Decomposition {
        model,
        initial,
        steps,
        init_state: init.clone(),
        forward,
    })
}

/// Per-gate `{β, γ, b}` contributions, indexed by [`class_index`].
type GateContribs<T> = [Vec<T>; 3];

fn class_index(class: PartClass) -> usize {
    match class {
        PartClass::Beta => 0,
        PartClass::Gamma => 1,
        PartClass::Bias => 2,
    }
}

fn cell_step<T: Scalar>(
    params: &crate::model::LstmLayerParams<T>,
    prev: &StateParts<T>,
    beta_in: Option<&[T]>,
    gamma_in: Option<&[T]>,
    interactions: &InteractionSet,
    policy: BiasPolicy,
    in_focus: bool,
) -> StateParts<T> {
    let hidden = params.hidden_size();

    let gate = |gate: Gate, activation: Activation| -> GateContribs<T> {
        let summand = |h_part: &[T], input: Option<&[T]>| {
            let mut s = params.recurrent_weights.get(gate).matvec(h_part);
            if let Some(x) = input {
                params.input_weights.get(gate).matvec_add(x, &mut s);
            }
            s
        };
        let beta = summand(&prev.beta_h, beta_in);
        let gamma = summand(&prev.gamma_h, gamma_in);
        let bias = params.intercepts.get(gate);
        let terms: [&[T]; 3] = [&beta, &gamma, bias];
        let mut out = contributions(activation, &terms, Some(2), policy).into_iter();
        [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()]
    };

    let forget = gate(Gate::Forget, Activation::Sigmoid);
    let input = gate(Gate::Input, Activation::Sigmoid);
    let candidate = gate(Gate::Candidate, Activation::Tanh);
    let output = gate(Gate::Output, Activation::Sigmoid);

    let mut parts = StateParts::zeros(hidden);

    // Forget path: previous cell parts gated by the forget contributions.
    for (source, prev_c) in [(PartClass::Beta, &prev.beta_c), (PartClass::Gamma, &prev.gamma_c)] {
        for g in PartClass::ALL {
            let target = if interactions.routes_inside(source, g, in_focus) {
                &mut parts.beta_c
            } else {
                &mut parts.gamma_c
            };
            accumulate_product(target, &forget[class_index(g)], prev_c);
        }
    }
    // Input path: candidate contributions gated by the input-gate contributions.
    for source in PartClass::ALL {
        for g in PartClass::ALL {
            let target = if interactions.routes_inside(source, g, in_focus) {
                &mut parts.beta_c
            } else {
                &mut parts.gamma_c
            };
            accumulate_product(target, &input[class_index(g)], &candidate[class_index(source)]);
        }
    }

    // tanh(c_t) over its two parts; no intercept, so always the full policy.
    let tanh_parts = contributions(
        Activation::Tanh,
        &[&parts.beta_c, &parts.gamma_c],
        None,
        BiasPolicy::FullPermutations,
    );
    for (source, tanh_part) in [PartClass::Beta, PartClass::Gamma].into_iter().zip(&tanh_parts) {
        for g in PartClass::ALL {
            let target = if interactions.routes_inside(source, g, in_focus) {
                &mut parts.beta_h
            } else {
                &mut parts.gamma_h
            };
            accumulate_product(target, &output[class_index(g)], tanh_part);
        }
    }
    parts
}

fn accumulate_product<T: Scalar>(acc: &mut [T], gate: &[T], source: &[T]) {
    for ((a, &g), &s) in acc.iter_mut().zip(gate).zip(source) {
        *a += g * s;
    }
}

/// Decomposed score `β^z_t[word]`, plus `b_d[word]` when requested.
pub fn decomposed_logit_score<T: Scalar>(
    dec: &Decomposition<'_, T>,
    t: usize,
    word: TokenId,
    include_decoder_intercept: bool,
) -> Result<T> {
    dec.check_step(t)?;
    dec.check_word(word)?;
    let beta = dec.beta_logit(t, word);
    Ok(if include_decoder_intercept {
        beta + dec.model.decoder_intercept()[word]
    } else {
        beta
    })
}

/// Logits with `|z| <= 1e-6 (1 + |b_d[word]|)` are considered degenerate.
pub fn degenerate_epsilon<T: Scalar>(model: &LanguageModel<T>, word: TokenId) -> T {
    T::lit(1e-6) * (T::one() + model.decoder_intercept()[word].abs())
}

/// `β^z_t[word] / z_t[word]`, with `z` from the full forward pass.
pub fn relative_contribution<T: Scalar>(
    dec: &Decomposition<'_, T>,
    t: usize,
    word: TokenId,
) -> Result<T> {
    dec.check_step(t)?;
    dec.check_word(word)?;
    let z = dec.logit(t, word);
    ratio(dec.model, dec.beta_logit(t, word), z, t, word)
}

pub(crate) fn ratio<T: Scalar>(
    model: &LanguageModel<T>,
    beta: T,
    z: T,
    step: usize,
    word: TokenId,
) -> Result<T> {
    let eps = degenerate_epsilon(model, word);
    if !(z.abs() > eps) {
        return Err(Error::DegenerateLogit {
            step,
            word,
            value: z.as_f64(),
            epsilon: eps.as_f64(),
        });
    }
    Ok(beta / z)
}
