//! Multi-layer LSTM language model and its exact forward pass.

use log::warn;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{dot, Matrix};
use crate::vocab::{TokenId, Vocabulary};

/// The four gate blocks of an LSTM layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Gate {
    Forget,
    Input,
    Candidate,
    Output,
}

impl Gate {
    pub const ALL: [Gate; 4] = [Gate::Forget, Gate::Input, Gate::Candidate, Gate::Output];

    /// Suffix used in checkpoint tensor names (`W_f`, `b_c`, ...).
    pub fn suffix(self) -> &'static str {
        match self {
            Gate::Forget => "f",
            Gate::Input => "i",
            Gate::Candidate => "c",
            Gate::Output => "o",
        }
    }
}

/// One value per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct PerGate<X> {
    pub forget: X,
    pub input: X,
    pub candidate: X,
    pub output: X,
}

impl<X> PerGate<X> {
    pub fn from_fn(mut f: impl FnMut(Gate) -> X) -> Self {
        PerGate {
            forget: f(Gate::Forget),
            input: f(Gate::Input),
            candidate: f(Gate::Candidate),
            output: f(Gate::Output),
        }
    }

    pub fn get(&self, gate: Gate) -> &X {
        match gate {
            Gate::Forget => &self.forget,
            Gate::Input => &self.input,
            Gate::Candidate => &self.candidate,
            Gate::Output => &self.output,
        }
    }

    pub fn try_map<Y, E>(self, mut f: impl FnMut(Gate, X) -> Result<Y, E>) -> Result<PerGate<Y>, E> {
        Ok(PerGate {
            forget: f(Gate::Forget, self.forget)?,
            input: f(Gate::Input, self.input)?,
            candidate: f(Gate::Candidate, self.candidate)?,
            output: f(Gate::Output, self.output)?,
        })
    }
}

/// Input weights `W`, recurrent weights `V` and intercepts `b` of one layer,
/// stored per gate.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmLayerParams<T> {
    pub input_weights: PerGate<Matrix<T>>,
    pub recurrent_weights: PerGate<Matrix<T>>,
    pub intercepts: PerGate<Vec<T>>,
}

impl<T: Scalar> LstmLayerParams<T> {
    pub fn new(
        input_weights: PerGate<Matrix<T>>,
        recurrent_weights: PerGate<Matrix<T>>,
        intercepts: PerGate<Vec<T>>,
    ) -> Result<Self> {
        let hidden = input_weights.forget.rows();
        let input = input_weights.forget.cols();
        for gate in Gate::ALL {
            let w = input_weights.get(gate);
            let v = recurrent_weights.get(gate);
            let b = intercepts.get(gate);
            if w.shape() != [hidden, input] {
                return Err(Error::Dimension {
                    context: "input weight shape",
                    expected: hidden * input,
                    found: w.rows() * w.cols(),
                });
            }
            if v.shape() != [hidden, hidden] {
                return Err(Error::Dimension {
                    context: "recurrent weight shape",
                    expected: hidden * hidden,
                    found: v.rows() * v.cols(),
                });
            }
            if b.len() != hidden {
                return Err(Error::Dimension {
                    context: "intercept length",
                    expected: hidden,
                    found: b.len(),
                });
            }
        }
        Ok(LstmLayerParams {
            input_weights,
            recurrent_weights,
            intercepts,
        })
    }

    pub fn hidden_size(&self) -> usize {
        self.intercepts.forget.len()
    }

    pub fn input_size(&self) -> usize {
        self.input_weights.forget.cols()
    }

    /// `W x + V h + b` for one gate.
    pub fn preactivation(&self, gate: Gate, x: &[T], h_prev: &[T]) -> Vec<T> {
        let mut out = self.input_weights.get(gate).matvec(x);
        self.recurrent_weights.get(gate).matvec_add(h_prev, &mut out);
        for (o, &b) in out.iter_mut().zip(self.intercepts.get(gate)) {
            *o += b;
        }
        out
    }
}

/// Gate activations of one layer at one timestep.
#[derive(Debug, Clone, PartialEq)]
pub struct Gates<T> {
    pub forget: Vec<T>,
    pub input: Vec<T>,
    pub candidate: Vec<T>,
    pub output: Vec<T>,
}

/// Hidden and cell state of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerState<T> {
    pub h: Vec<T>,
    pub c: Vec<T>,
}

/// Hidden and cell states of every layer after one step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepState<T> {
    pub layers: Vec<LayerState<T>>,
}

impl<T: Scalar> StepState<T> {
    pub fn zeros(hidden_sizes: &[usize]) -> Self {
        StepState {
            layers: hidden_sizes
                .iter()
                .map(|&n| LayerState {
                    h: vec![T::zero(); n],
                    c: vec![T::zero(); n],
                })
                .collect(),
        }
    }

    pub fn top_hidden(&self) -> &[T] {
        &self.layers.last().expect("at least one layer").h
    }
}

/// Gate activations indexed `[layer][timestep]`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GateRecord<T> {
    pub layers: Vec<Vec<Gates<T>>>,
}

/// One LSTM cell update. Returns the new hidden state, cell state and the gate
/// activations that produced them.
pub fn lstm_cell_forward<T: Scalar>(
    x: &[T],
    h_prev: &[T],
    c_prev: &[T],
    params: &LstmLayerParams<T>,
) -> Result<(Vec<T>, Vec<T>, Gates<T>)> {
    let hidden = params.hidden_size();
    check_len("cell input", params.input_size(), x.len())?;
    check_len("previous hidden state", hidden, h_prev.len())?;
    check_len("previous cell state", hidden, c_prev.len())?;

    let sig = |gate| {
        params
            .preactivation(gate, x, h_prev)
            .into_iter()
            .map(T::sigmoid)
            .collect::<Vec<_>>()
    };
    let forget = sig(Gate::Forget);
    let input = sig(Gate::Input);
    let output = sig(Gate::Output);
    let candidate: Vec<T> = params
        .preactivation(Gate::Candidate, x, h_prev)
        .into_iter()
        .map(T::tanh)
        .collect();

    let c: Vec<T> = (0..hidden)
        .map(|k| forget[k] * c_prev[k] + input[k] * candidate[k])
        .collect();
    let h: Vec<T> = (0..hidden).map(|k| output[k] * c[k].tanh()).collect();
    Ok((
        h,
        c,
        Gates {
            forget,
            input,
            candidate,
            output,
        },
    ))
}

fn check_len(context: &'static str, expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            found,
        })
    }
}

/// Word-level multi-layer LSTM language model.
#[derive(Debug, Clone, PartialEq)]
pub struct LanguageModel<T> {
    embeddings: Matrix<T>,
    layers: Vec<LstmLayerParams<T>>,
    decoder: Matrix<T>,
    decoder_intercept: Vec<T>,
    vocabulary: Vocabulary,
}

impl<T: Scalar> LanguageModel<T> {
    pub fn new(
        embeddings: Matrix<T>,
        layers: Vec<LstmLayerParams<T>>,
        decoder: Matrix<T>,
        decoder_intercept: Vec<T>,
        vocabulary: Vocabulary,
    ) -> Result<Self> {
        let vocab = vocabulary.len();
        if layers.is_empty() {
            return Err(Error::Dimension {
                context: "layer count",
                expected: 1,
                found: 0,
            });
        }
        check_len("embedding rows", vocab, embeddings.rows())?;
        let mut input = embeddings.cols();
        for layer in &layers {
            check_len("layer input size", input, layer.input_size())?;
            input = layer.hidden_size();
        }
        check_len("decoder rows", vocab, decoder.rows())?;
        check_len("decoder columns", input, decoder.cols())?;
        check_len("decoder intercept", vocab, decoder_intercept.len())?;
        Ok(LanguageModel {
            embeddings,
            layers,
            decoder,
            decoder_intercept,
            vocabulary,
        })
    }

    pub fn embeddings(&self) -> &Matrix<T> {
        &self.embeddings
    }

    pub fn embedding(&self, token: TokenId) -> &[T] {
        self.embeddings.row(token)
    }

    pub fn layers(&self) -> &[LstmLayerParams<T>] {
        &self.layers
    }

    pub fn decoder(&self) -> &Matrix<T> {
        &self.decoder
    }

    pub fn decoder_intercept(&self) -> &[T] {
        &self.decoder_intercept
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn vocab_size(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn embedding_size(&self) -> usize {
        self.embeddings.cols()
    }

    pub fn hidden_sizes(&self) -> Vec<usize> {
        self.layers.iter().map(|l| l.hidden_size()).collect()
    }

    pub fn zero_state(&self) -> StepState<T> {
        StepState::zeros(&self.hidden_sizes())
    }

    pub fn check_tokens(&self, tokens: &[TokenId]) -> Result<()> {
        match tokens.iter().find(|&&id| id >= self.vocab_size()) {
            Some(&id) => Err(Error::TokenOutOfRange {
                id,
                size: self.vocab_size(),
            }),
            None => Ok(()),
        }
    }

    /// Decoder output for a single word: `D[word] · h + b_d[word]`.
    pub fn logit(&self, h_top: &[T], word: TokenId) -> T {
        dot(self.decoder.row(word), h_top) + self.decoder_intercept[word]
    }

    /// Full logit vector `D h + b_d`.
    pub fn logits(&self, h_top: &[T]) -> Vec<T> {
        let mut z = self.decoder.matvec(h_top);
        for (zi, &b) in z.iter_mut().zip(&self.decoder_intercept) {
            *zi += b;
        }
        z
    }

    /// Advances every layer by one token.
    pub fn step(&self, token: TokenId, state: &StepState<T>) -> Result<(StepState<T>, Vec<Gates<T>>)> {
        self.check_tokens(&[token])?;
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut gates = Vec::with_capacity(self.layers.len());
        let mut input: &[T] = self.embedding(token);
        for (params, prev) in self.layers.iter().zip(&state.layers) {
            let (h, c, g) = lstm_cell_forward(input, &prev.h, &prev.c, params)?;
            layers.push(LayerState { h, c });
            gates.push(g);
            input = &layers.last().unwrap().h;
        }
        Ok((StepState { layers }, gates))
    }

    /// Runs the recurrence only, without applying the decoder.
    pub fn run_states(
        &self,
        tokens: &[TokenId],
        init: &StepState<T>,
    ) -> Result<(Vec<StepState<T>>, GateRecord<T>)> {
        self.check_tokens(tokens)?;
        check_len("initial state layers", self.layers.len(), init.layers.len())?;
        let mut states = Vec::with_capacity(tokens.len());
        let mut record = GateRecord {
            layers: vec![Vec::with_capacity(tokens.len()); self.layers.len()],
        };
        let mut prev = init.clone();
        for &tok in tokens {
            let (next, gates) = self.step(tok, &prev)?;
            for (slot, g) in record.layers.iter_mut().zip(gates) {
                slot.push(g);
            }
            states.push(next.clone());
            prev = next;
        }
        Ok((states, record))
    }
}

/// Output of [`lm_forward`].
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass<T> {
    pub logits: Vec<Vec<T>>,
    pub states: Vec<StepState<T>>,
    pub gates: GateRecord<T>,
    pub final_state: StepState<T>,
}

/// Full forward pass: per-step logits `z_t = D h_t + b_d`, states and gates.
pub fn lm_forward<T: Scalar>(
    tokens: &[TokenId],
    model: &LanguageModel<T>,
    init: &StepState<T>,
) -> Result<ForwardPass<T>> {
    let (states, gates) = model.run_states(tokens, init)?;
    let logits = states.iter().map(|s| model.logits(s.top_hidden())).collect();
    let final_state = states.last().cloned().unwrap_or_else(|| init.clone());
    Ok(ForwardPass {
        logits,
        states,
        gates,
        final_state,
    })
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax<T: Scalar>(z: &[T]) -> Result<Vec<T>> {
    if z.iter().any(|v| v.is_nan()) {
        return Err(Error::NaN);
    }
    let max = z.iter().copied().fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = z.iter().map(|&v| (v - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// How the recurrent state is initialised before a sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitPolicy {
    /// State after reading ". <eos>" from zeros.
    #[default]
    Warmup,
    Zero,
}

pub const WARMUP_PHRASE: [&str; 2] = [".", "<eos>"];

/// The state after feeding ". <eos>" from zero states. Falls back to zero
/// states, with a warning, when either token is missing from the vocabulary.
pub fn default_init_state<T: Scalar>(model: &LanguageModel<T>) -> StepState<T> {
    let zero = model.zero_state();
    let vocab = model.vocabulary();
    let ids: Option<Vec<TokenId>> = WARMUP_PHRASE.iter().map(|t| vocab.id(t)).collect();
    match ids {
        Some(ids) => model
            .run_states(&ids, &zero)
            .map(|(states, _)| states.last().cloned().unwrap_or(zero.clone()))
            .unwrap_or(zero),
        None => {
            warn!("vocabulary lacks \". <eos>\"; using zero initial states");
            zero
        }
    }
}

pub fn init_state<T: Scalar>(model: &LanguageModel<T>, policy: InitPolicy) -> StepState<T> {
    match policy {
        InitPolicy::Warmup => default_init_state(model),
        InitPolicy::Zero => model.zero_state(),
    }
}
