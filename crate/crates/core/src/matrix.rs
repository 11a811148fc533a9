//! Decomposition matrices: the relative contribution of every input token to
//! every prediction in a sentence.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::decompose::{decompose, ratio, PhraseFocus};
use crate::error::{Error, Result};
use crate::interactions::{InitStatesClass, InteractionSet};
use crate::model::{LanguageModel, StepState};
use crate::scalar::Scalar;
use crate::shapley::BiasPolicy;
use crate::vocab::TokenId;

pub const INIT_LABEL: &str = "INIT";

/// Entry `(i, j)` is the relative contribution of input token `i` to the logit
/// of output `j`; `None` marks a degenerate logit. The `init` row holds the
/// contribution of the initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionMatrix {
    pub rows: Vec<String>,
    pub columns: Vec<String>,
    pub init: Vec<Option<f64>>,
    pub values: Vec<Vec<Option<f64>>>,
}

/// Builds the matrix for `tokens`. Column `j` is token `j` as predicted after
/// reading tokens `0..j` (column 0 is predicted from the initial state). Each
/// `extra_targets` entry adds a column for an alternative to the final token,
/// scored at the same step. Row `i` decomposes with focus `[i, i+1)`; the INIT
/// row uses an empty focus with the initial states inside.
pub fn decomposition_matrix<T: Scalar>(
    model: &LanguageModel<T>,
    tokens: &[TokenId],
    extra_targets: &[TokenId],
    interactions: &InteractionSet,
    policy: BiasPolicy,
    init: &StepState<T>,
) -> Result<DecompositionMatrix> {
    if tokens.is_empty() {
        return Err(Error::Corpus("decomposition matrix needs at least one token".into()));
    }
    model.check_tokens(tokens)?;
    model.check_tokens(extra_targets)?;
    let n = tokens.len();
    let vocab = model.vocabulary();
    let labels = vocab.decode(tokens);

    // (target word, prediction step; None = initial state)
    let targets: Vec<(TokenId, Option<usize>)> = (0..n)
        .map(|j| (tokens[j], j.checked_sub(1)))
        .chain(extra_targets.iter().map(|&w| (w, n.checked_sub(2))))
        .collect();

    let row = |focus: PhraseFocus, set: &InteractionSet| -> Result<Vec<Option<f64>>> {
        let dec = decompose(model, tokens, &focus, set, policy, init)?;
        Ok(targets
            .iter()
            .map(|&(word, step)| {
                let (beta, z, s) = match step {
                    Some(t) => (dec.beta_logit(t, word), dec.logit(t, word), t),
                    None => (dec.initial_beta_logit(word), dec.initial_logit(word), 0),
                };
                ratio(model, beta, z, s, word).ok().map(Scalar::as_f64)
            })
            .collect())
    };

    let mut init_set = interactions.clone();
    init_set.init_states_class = InitStatesClass::Beta;
    let init_row = row(PhraseFocus::empty(), &init_set)?;
    let values = (0..n)
        .map(|i| row(PhraseFocus::span(i, i + 1), interactions))
        .collect::<Result<Vec<_>>>()?;

    let mut columns = labels.clone();
    columns.extend(vocab.decode(extra_targets));
    Ok(DecompositionMatrix {
        rows: labels,
        columns,
        init: init_row,
        values,
    })
}

impl DecompositionMatrix {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.columns.len())
    }

    /// Elementwise mean over matrices of identical shape, skipping missing
    /// entries. Labels are taken from `rows` / `columns`.
    pub fn average(
        matrices: &[DecompositionMatrix],
        rows: Vec<String>,
        columns: Vec<String>,
    ) -> Result<DecompositionMatrix> {
        let shape = (rows.len(), columns.len());
        if let Some(bad) = matrices.iter().find(|m| m.shape() != shape) {
            return Err(Error::Corpus(format!(
                "cannot average matrices of shape {:?} and {:?}",
                shape,
                bad.shape()
            )));
        }
        let mean = |get: &dyn Fn(&DecompositionMatrix) -> Option<f64>| {
            let vals: Vec<f64> = matrices.iter().filter_map(get).collect();
            (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
        };
        let init = (0..shape.1).map(|j| mean(&|m| m.init[j])).collect();
        let values = (0..shape.0)
            .map(|i| (0..shape.1).map(|j| mean(&|m| m.values[i][j])).collect())
            .collect();
        Ok(DecompositionMatrix {
            rows,
            columns,
            init,
            values,
        })
    }

    /// CSV with the column labels as header, the INIT row first and one row per
    /// input token. Missing values are empty cells.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let csv_err = |e: csv::Error| Error::Parse(e.to_string());
        let mut header = vec![String::new()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        let fmt_row = |label: &str, vals: &[Option<f64>]| {
            let mut rec = vec![label.to_string()];
            rec.extend(vals.iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            rec
        };
        w.write_record(fmt_row(INIT_LABEL, &self.init)).map_err(csv_err)?;
        for (label, vals) in self.rows.iter().zip(&self.values) {
            w.write_record(fmt_row(label, vals)).map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new()
            .has_headers(false)
            .from_reader(input);
        let mut records = r.records();
        let parse_err = |e: csv::Error| Error::Parse(e.to_string());
        let header = records
            .next()
            .ok_or_else(|| Error::Parse("empty matrix csv".into()))?
            .map_err(parse_err)?;
        let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let parse_row = |rec: &csv::StringRecord| -> Result<(String, Vec<Option<f64>>)> {
            let vals = rec
                .iter()
                .skip(1)
                .map(|cell| {
                    if cell.is_empty() {
                        Ok(None)
                    } else {
                        cell.parse::<f64>()
                            .map(Some)
                            .map_err(|e| Error::Parse(format!("bad value \"{cell}\": {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if vals.len() != columns.len() {
                return Err(Error::Parse("ragged matrix row".into()));
            }
            Ok((rec.get(0).unwrap_or_default().to_string(), vals))
        };
        let first = records
            .next()
            .ok_or_else(|| Error::Parse("matrix csv lacks INIT row".into()))?
            .map_err(parse_err)?;
        let (label, init) = parse_row(&first)?;
        if label != INIT_LABEL {
            return Err(Error::Parse(format!("expected INIT row, found \"{label}\"")));
        }
        let mut rows = Vec::new();
        let mut values = Vec::new();
        for rec in records {
            let (label, vals) = parse_row(&rec.map_err(parse_err)?)?;
            rows.push(label);
            values.push(vals);
        }
        Ok(DecompositionMatrix {
            rows,
            columns,
            init,
            values,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
