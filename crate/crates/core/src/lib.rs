//! Generalised contextual decomposition (GCD) for multi-layer LSTM language
//! models.
//!
//! The crate splits every cell and hidden state of an LSTM into a part that
//! stems from a phrase in focus (`β`) and a remainder (`γ`), with configurable
//! rules for which gate/source interactions count as inside. On top of the
//! decomposition it provides decomposition matrices, template corpora for
//! number agreement and pronoun gender, and the pruning and contribution
//! experiments built from them.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix it to `f64`, which is what the tolerances throughout assume.

pub mod checkpoint;
pub mod corpora;
pub mod decompose;
pub mod error;
pub mod experiments;
pub mod fixture;
pub mod interactions;
pub mod lexicon;
pub mod matrix;
pub mod model;
pub mod scalar;
pub mod shapley;
pub mod tensor;
pub mod vocab;

pub use checkpoint::{load_model, save_model, DType, Manifest};
pub use corpora::{
    generate_gender_corpus, generate_na_corpus, GenderCondition, GenderInstance, GenderKind,
    NaCondition, NaInstance, NaTask, Span,
};
pub use decompose::{
    decompose, decomposed_logit_score, relative_contribution, PhraseFocus, StateParts,
};
pub use error::{Error, Result};
pub use experiments::{
    gender_eval, gender_eval_both, gender_preference_cells, na_eval, na_eval_both,
    write_results_csv, EvalResult, FocusRole, GenderResult, ModeVariant, NaResult,
    PreferenceCell, ScoringMode,
};
pub use interactions::{InitStatesClass, InputTokenClass, InteractionSet, PartClass};
pub use lexicon::Lexicon;
pub use matrix::{decomposition_matrix, DecompositionMatrix};
pub use model::{
    default_init_state, init_state, lm_forward, lstm_cell_forward, softmax, InitPolicy,
};
pub use scalar::Scalar;
pub use shapley::{shapley_contributions, Activation, BiasPolicy, Summand, SummandList, TermLabel};
pub use tensor::Matrix;
pub use vocab::{TokenId, Vocabulary};

pub type LanguageModel = model::LanguageModel<f64>;
pub type LstmLayerParams = model::LstmLayerParams<f64>;
pub type StepState = model::StepState<f64>;
pub type GateRecord = model::GateRecord<f64>;
pub type ForwardPass = model::ForwardPass<f64>;
pub type Decomposition<'m> = decompose::Decomposition<'m, f64>;
