use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::Path;

use gcd::corpora::{read_jsonl, write_jsonl};
use gcd::{
    decompose as run_decompose, decomposition_matrix, gender_eval_both, gender_preference_cells,
    generate_gender_corpus, generate_na_corpus, init_state, na_eval_both, write_results_csv,
    DecompositionMatrix, EvalResult, FocusRole, GenderCondition, GenderInstance, GenderKind,
    LanguageModel, NaCondition, NaInstance, NaTask, TokenId,
};
use serde_json::json;

use crate::config::{self, config_err, io_err, CliError, CliResult};
use crate::{
    Common, CorpusSource, DecomposeArgs, FormatArg, GenCorpusArgs, GenderEvalArgs, InspectArgs,
    MatrixArgs, NaEvalArgs,
};

const NA_CONDITIONS: [NaCondition; 6] = [
    NaCondition::S,
    NaCondition::P,
    NaCondition::SS,
    NaCondition::SP,
    NaCondition::PS,
    NaCondition::PP,
];

fn json_out(out: &mut dyn Write, value: &serde_json::Value) -> CliResult<()> {
    serde_json::to_writer_pretty(&mut *out, value).map_err(|e| CliError::Data(e.into()))?;
    writeln!(out).map_err(|e| io_err("<output>", e))
}

fn finish(mut out: Box<dyn Write>) -> CliResult<()> {
    out.flush().map_err(|e| io_err("<output>", e))
}

fn words(model: &LanguageModel, list: Option<&str>) -> CliResult<Vec<TokenId>> {
    let Some(list) = list else {
        return Ok(Vec::new());
    };
    list.split(',')
        .map(str::trim)
        .filter(|w| !w.is_empty())
        .map(|w| {
            model
                .vocabulary()
                .id(w)
                .ok_or_else(|| CliError::Data(gcd::Error::OutOfVocabulary(w.to_string())))
        })
        .collect()
}

pub fn decompose(a: DecomposeArgs) -> CliResult<()> {
    let c = &a.common;
    config::setup_workers(c.workers)?;
    let set = config::interactions(c)?;
    let model = config::load(&c.model)?;
    let vocab = model.vocabulary();
    let tokens = vocab.encode(&a.sentence, c.map_unknown)?;
    if tokens.is_empty() {
        return config_err("sentence is empty");
    }
    let focus = config::focus(&a.focus, tokens.len())?;
    let step = a.step.unwrap_or(tokens.len() - 1);
    if step >= tokens.len() {
        return config_err(format!("--step {step}: sentence has {} tokens", tokens.len()));
    }
    let extra = words(&model, a.words.as_deref())?;
    let init = init_state(&model, config::init_policy(c.init));
    let policy = config::policy(c.policy);
    let dec = run_decompose(&model, &tokens, &focus, &set, policy, &init)?;

    let logits = dec.logits(step);
    let mut order: Vec<TokenId> = (0..logits.len()).collect();
    order.sort_by(|&x, &y| logits[y].total_cmp(&logits[x]).then(x.cmp(&y)));
    let mut chosen: Vec<TokenId> = order.into_iter().take(a.top_k).collect();
    for w in extra {
        if !chosen.contains(&w) {
            chosen.push(w);
        }
    }

    let include = !c.no_decoder_bias;
    let rows: Vec<serde_json::Value> = chosen
        .iter()
        .map(|&w| {
            let beta = dec.beta_logit(step, w);
            let bias = model.decoder_intercept()[w];
            json!({
                "word": vocab.token(w).unwrap_or_default(),
                "logit": logits[w],
                "beta": beta,
                "gamma": dec.gamma_logit(step, w),
                "decoder_intercept": bias,
                "score": if include { beta + bias } else { beta },
                "relative": gcd::relative_contribution(&dec, step, w).ok(),
            })
        })
        .collect();
    let focus_words: Vec<String> = focus
        .spans()
        .iter()
        .map(|r| vocab.decode(&tokens[r.clone()]).join(" "))
        .collect();

    let mut out = config::output(c.out.as_ref())?;
    let io = |e| io_err("<output>", e);
    match c.format {
        Some(FormatArg::Json) => json_out(
            &mut out,
            &json!({
                "sentence": vocab.decode(&tokens),
                "focus": focus.spans().iter().map(|r| [r.start, r.end]).collect::<Vec<_>>(),
                "interactions": set.label(),
                "policy": policy.name(),
                "step": step,
                "include_decoder_intercept": include,
                "words": rows,
            }),
        )?,
        Some(FormatArg::Csv) => {
            let mut w = csv::Writer::from_writer(&mut out);
            let err = |e: csv::Error| CliError::Data(gcd::Error::Parse(e.to_string()));
            w.write_record(["word", "logit", "beta", "gamma", "decoder_intercept", "score", "relative"])
                .map_err(err)?;
            for r in &rows {
                let field = |k: &str| match &r[k] {
                    serde_json::Value::Null => String::new(),
                    serde_json::Value::String(s) => s.clone(),
                    v => v.to_string(),
                };
                w.write_record(
                    ["word", "logit", "beta", "gamma", "decoder_intercept", "score", "relative"]
                        .map(field),
                )
                .map_err(err)?;
            }
            w.flush().map_err(io)?;
        }
        None => {
            writeln!(out, "sentence: {}", vocab.decode(&tokens).join(" ")).map_err(io)?;
            if focus.is_empty() {
                writeln!(out, "focus: (empty)").map_err(io)?;
            } else {
                for (r, text) in focus.spans().iter().zip(&focus_words) {
                    writeln!(out, "focus: [{}, {}) {}", r.start, r.end, text).map_err(io)?;
                }
            }
            writeln!(
                out,
                "interactions: {}  policy: {}  step: {} ({})",
                set.label(),
                policy.name(),
                step,
                vocab.token(tokens[step]).unwrap_or_default()
            )
            .map_err(io)?;
            writeln!(
                out,
                "{:<14} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                "word", "logit", "beta", "gamma", "b_d", "score", "beta/logit"
            )
            .map_err(io)?;
            for r in &rows {
                let num = |k: &str| r[k].as_f64().map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
                writeln!(
                    out,
                    "{:<14} {:>10} {:>10} {:>10} {:>10} {:>10} {:>10}",
                    r["word"].as_str().unwrap_or_default(),
                    num("logit"),
                    num("beta"),
                    num("gamma"),
                    num("decoder_intercept"),
                    num("score"),
                    num("relative"),
                )
                .map_err(io)?;
            }
        }
    }
    finish(out)
}

/// Instances of either corpus type, reduced to what matrices and evaluations need.
enum Corpus {
    Agreement(Vec<NaInstance>),
    Pronoun(Vec<GenderInstance>),
}

fn read_corpus(path: &Path) -> CliResult<Corpus> {
    let open = || {
        File::open(path)
            .map(BufReader::new)
            .map_err(|e| CliError::Data(gcd::Error::Io {
                path: path.to_path_buf(),
                source: e,
            }))
    };
    if let Ok(items) = read_jsonl::<_, NaInstance>(open()?) {
        return Ok(Corpus::Agreement(items));
    }
    Ok(Corpus::Pronoun(read_jsonl::<_, GenderInstance>(open()?)?))
}

fn write_matrix(m: &DecompositionMatrix, format: Option<FormatArg>, out: &mut dyn Write) -> CliResult<()> {
    match format {
        Some(FormatArg::Json) => {
            out.write_all(m.to_json()?.as_bytes()).map_err(|e| io_err("<output>", e))?;
            writeln!(out).map_err(|e| io_err("<output>", e))
        }
        _ => Ok(m.write_csv(out)?),
    }
}

/// Token sequence with the target word appended, the competitor as extra
/// column, and slot labels for corpus averaging.
struct MatrixItem {
    tokens: Vec<TokenId>,
    extra: Vec<TokenId>,
    roles: Vec<Option<&'static str>>,
}

fn matrix_items(corpus: &Corpus) -> Vec<MatrixItem> {
    let roles = |len: usize, spans: &[(gcd::Span, &'static str)], target: &'static str| {
        let mut r = vec![None; len + 1];
        for (s, name) in spans {
            r[s.1 - 1] = Some(*name);
        }
        r[len] = Some(target);
        r
    };
    match corpus {
        Corpus::Agreement(items) => items
            .iter()
            .map(|i| {
                let mut spans = vec![(i.subject_span, "<subject>")];
                if let Some(a) = i.attractor_span {
                    spans.push((gcd::Span(a.0 - 1, a.0), "<prep>"));
                    spans.push((a, "<attractor>"));
                }
                let mut tokens = i.tokens.clone();
                tokens.push(i.correct_verb);
                MatrixItem {
                    roles: roles(i.tokens.len(), &spans, "<verb>"),
                    tokens,
                    extra: vec![i.wrong_verb],
                }
            })
            .collect(),
        Corpus::Pronoun(items) => items
            .iter()
            .map(|i| {
                let mut tokens = i.tokens.clone();
                tokens.push(i.he_id);
                MatrixItem {
                    roles: roles(
                        i.tokens.len(),
                        &[(i.subject_span, "<subject>"), (i.object_span, "<object>")],
                        "<he>",
                    ),
                    tokens,
                    extra: vec![i.she_id],
                }
            })
            .collect(),
    }
}

/// Row and column labels shared by all matrices: the common word where every
/// item agrees, else the slot role, else the position.
fn slot_labels(matrices: &[DecompositionMatrix], items: &[MatrixItem]) -> (Vec<String>, Vec<String>) {
    let first = &matrices[0];
    let label = |j: usize, get: &dyn Fn(&DecompositionMatrix) -> &String| {
        let word = get(first);
        if matrices.iter().all(|m| get(m) == word) {
            word.clone()
        } else {
            items[0]
                .roles
                .get(j)
                .copied()
                .flatten()
                .map(str::to_string)
                .unwrap_or_else(|| format!("<{j}>"))
        }
    };
    let rows = (0..first.rows.len()).map(|i| label(i, &|m| &m.rows[i])).collect();
    let n = first.rows.len();
    let columns = (0..first.columns.len())
        .map(|j| {
            if j >= n && matrices.iter().any(|m| m.columns[j] != first.columns[j]) {
                "<competitor>".to_string()
            } else {
                label(j, &|m| &m.columns[j])
            }
        })
        .collect();
    (rows, columns)
}

fn generate(model: &LanguageModel, model_name: &str, src: &CorpusSource, task: Option<&str>, seed: u64) -> CliResult<Corpus> {
    let lexicon = config::lexicon(model_name, src.lexicon.as_deref())?;
    let Some(task) = task else {
        return config_err("matrix needs --sentence, --corpus or --task");
    };
    let task: NaTask = task.parse().map_err(|e| CliError::Config(format!("--task: {e}")))?;
    let condition: NaCondition = src
        .condition
        .parse()
        .map_err(|e| CliError::Config(format!("--condition (one condition for matrices): {e}")))?;
    Ok(Corpus::Agreement(generate_na_corpus(
        task,
        condition,
        &lexicon,
        model.vocabulary(),
        src.count,
        seed,
    )?))
}

pub fn matrix(a: MatrixArgs) -> CliResult<()> {
    let c = &a.common;
    config::setup_workers(c.workers)?;
    let set = config::interactions(c)?;
    let model = config::load(&c.model)?;
    let init = init_state(&model, config::init_policy(c.init));
    let policy = config::policy(c.policy);

    if let Some(sentence) = &a.sentence {
        let tokens = model.vocabulary().encode(sentence, c.map_unknown)?;
        if tokens.is_empty() {
            return config_err("--sentence is empty");
        }
        let extra = words(&model, a.extra.as_deref())?;
        let m = decomposition_matrix(&model, &tokens, &extra, &set, policy, &init)?;
        let mut out = config::output(c.out.as_ref())?;
        write_matrix(&m, c.format, &mut out)?;
        return finish(out);
    }
    if a.extra.is_some() {
        return config_err("--extra applies to --sentence only");
    }
    let corpus = match &a.source.corpus {
        Some(path) => read_corpus(path)?,
        None => generate(&model, &c.model, &a.source, a.task.as_deref(), c.seed)?,
    };
    let items = matrix_items(&corpus);
    if items.is_empty() {
        return Err(CliError::Data(gcd::Error::Corpus("corpus is empty".into())));
    }
    if items.iter().any(|i| i.tokens.len() != items[0].tokens.len()) {
        return Err(CliError::Data(gcd::Error::Corpus(
            "averaging needs instances of one template length".into(),
        )));
    }
    use rayon::prelude::*;
    let matrices: Vec<DecompositionMatrix> = items
        .par_iter()
        .map(|i| decomposition_matrix(&model, &i.tokens, &i.extra, &set, policy, &init))
        .collect::<gcd::Result<_>>()?;
    if let Some(dir) = &a.per_sentence {
        std::fs::create_dir_all(dir).map_err(|e| io_err(&dir.display().to_string(), e))?;
        let ext = if c.format == Some(FormatArg::Json) { "json" } else { "csv" };
        for (k, m) in matrices.iter().enumerate() {
            let path = dir.join(format!("matrix_{k:04}.{ext}"));
            let mut out = config::output(Some(&path))?;
            write_matrix(m, c.format, &mut out)?;
            finish(out)?;
        }
    }
    let (rows, columns) = slot_labels(&matrices, &items);
    let avg = DecompositionMatrix::average(&matrices, rows, columns)?;
    let mut out = config::output(c.out.as_ref())?;
    write_matrix(&avg, c.format, &mut out)?;
    finish(out)
}

fn write_results(
    results: &[EvalResult],
    common: &Common,
    instances: Option<&std::path::PathBuf>,
) -> CliResult<()> {
    if let Some(path) = instances {
        let mut out = config::output(Some(path))?;
        for r in results {
            for o in &r.instances {
                let line = json!({
                    "task": r.task,
                    "condition": r.condition,
                    "mode": r.mode,
                    "policy": r.policy,
                    "include_decoder_intercept": r.include_decoder_intercept,
                    "outcome": o,
                });
                serde_json::to_writer(&mut out, &line).map_err(|e| CliError::Data(e.into()))?;
                writeln!(out).map_err(|e| io_err("<output>", e))?;
            }
        }
        finish(out)?;
    }
    let mut out = config::output(common.out.as_ref())?;
    match common.format {
        Some(FormatArg::Json) => json_out(&mut out, &serde_json::to_value(results).map_err(|e| CliError::Data(e.into()))?)?,
        _ => write_results_csv(results, &mut out)?,
    }
    finish(out)
}

/// Splits a corpus file into consecutive groups of equal key, in first-seen order.
fn group_by<I, K: Ord + Clone>(items: Vec<I>, key: impl Fn(&I) -> K) -> Vec<Vec<I>> {
    let mut order: Vec<K> = Vec::new();
    let mut groups: BTreeMap<K, Vec<I>> = BTreeMap::new();
    for item in items {
        let k = key(&item);
        if !groups.contains_key(&k) {
            order.push(k.clone());
        }
        groups.entry(k).or_default().push(item);
    }
    order.into_iter().filter_map(|k| groups.remove(&k)).collect()
}

fn pick_setting(pair: [EvalResult; 2], include: bool) -> EvalResult {
    let [with, without] = pair;
    if include {
        with
    } else {
        without
    }
}

pub fn na_eval(a: NaEvalArgs) -> CliResult<()> {
    let c = &a.common;
    config::setup_workers(c.workers)?;
    let set = config::interactions(c)?;
    let modes = config::modes(&a.modes, FocusRole::Subject, &set)?;
    let model = config::load(&c.model)?;
    let init = init_state(&model, config::init_policy(c.init));
    let policy = config::policy(c.policy);

    let corpora: Vec<Vec<NaInstance>> = match &a.source.corpus {
        Some(path) => match read_corpus(path)? {
            Corpus::Agreement(items) => group_by(items, |i| (i.task.name(), i.condition.to_string())),
            Corpus::Pronoun(_) => return config_err("--corpus holds pronoun instances; use gender-eval"),
        },
        None => {
            let lexicon = config::lexicon(&c.model, a.source.lexicon.as_deref())?;
            let tasks = config::select("--task", &a.task, &NaTask::ALL, str::parse)?;
            let conditions = config::select("--condition", &a.source.condition, &NA_CONDITIONS, str::parse)?;
            let mut out = Vec::new();
            for &task in &tasks {
                for &cond in task.conditions().iter().filter(|c| conditions.contains(c)) {
                    out.push(generate_na_corpus(task, cond, &lexicon, model.vocabulary(), a.source.count, c.seed)?);
                }
            }
            if out.is_empty() {
                return config_err("no selected condition applies to the selected tasks");
            }
            out
        }
    };
    let mut results = Vec::new();
    for corpus in &corpora {
        for mode in &modes {
            let pair = na_eval_both(&model, corpus, mode, policy, &init)?;
            results.push(pick_setting(pair, !c.no_decoder_bias));
        }
    }
    write_results(&results, c, a.instances.as_ref())
}

pub fn gender_eval(a: GenderEvalArgs) -> CliResult<()> {
    let c = &a.common;
    config::setup_workers(c.workers)?;
    let set = config::interactions(c)?;
    let modes = if a.preference { Vec::new() } else { config::modes(&a.modes, FocusRole::Subject, &set)? };
    let model = config::load(&c.model)?;
    let init = init_state(&model, config::init_policy(c.init));
    let policy = config::policy(c.policy);

    let kinds: Vec<Vec<GenderInstance>> = match &a.source.corpus {
        Some(path) => match read_corpus(path)? {
            Corpus::Pronoun(items) => group_by(items, |i| i.kind.name()),
            Corpus::Agreement(_) => return config_err("--corpus holds agreement instances; use na-eval"),
        },
        None => {
            let lexicon = config::lexicon(&c.model, a.source.lexicon.as_deref())?;
            let kinds = config::select("--kind", &a.kind, &GenderKind::ALL, str::parse)?;
            let conditions = config::select("--condition", &a.source.condition, &GenderCondition::ALL, str::parse)?;
            let mut out = Vec::new();
            for &kind in &kinds {
                let mut items = Vec::new();
                for &cond in &conditions {
                    items.extend(generate_gender_corpus(kind, cond, &lexicon, model.vocabulary(), a.source.count, c.seed)?);
                }
                out.push(items);
            }
            out
        }
    };

    if a.preference {
        let mut out = config::output(c.out.as_ref())?;
        let mut cells = Vec::new();
        for items in &kinds {
            let kind = items.first().map(|i| i.kind.name()).unwrap_or_default();
            for cell in gender_preference_cells(&model, items, &set, policy, &init)? {
                cells.push((kind, cell));
            }
        }
        match c.format {
            Some(FormatArg::Json) => {
                let value: Vec<serde_json::Value> = cells
                    .iter()
                    .map(|(kind, cell)| json!({"kind": kind, "cell": cell}))
                    .collect();
                json_out(&mut out, &serde_json::Value::Array(value))?;
            }
            _ => {
                let mut w = csv::Writer::from_writer(&mut out);
                let err = |e: csv::Error| CliError::Data(gcd::Error::Parse(e.to_string()));
                w.write_record(["kind", "condition", "slot", "mean", "n", "degenerate"]).map_err(err)?;
                for (kind, cell) in &cells {
                    w.write_record([
                        kind.to_string(),
                        cell.condition.clone(),
                        cell.slot.clone(),
                        cell.mean.to_string(),
                        cell.n.to_string(),
                        cell.degenerate.to_string(),
                    ])
                    .map_err(err)?;
                }
                w.flush().map_err(|e| io_err("<output>", e))?;
            }
        }
        return finish(out);
    }

    let mut results = Vec::new();
    for items in &kinds {
        for corpus in group_by(items.clone(), |i| i.condition.to_string()) {
            for mode in &modes {
                let pair = gender_eval_both(&model, &corpus, mode, policy, &init)?;
                results.push(pick_setting(pair, !c.no_decoder_bias));
            }
        }
    }
    write_results(&results, c, a.instances.as_ref())
}

pub fn gen_corpus(a: GenCorpusArgs) -> CliResult<()> {
    let model = config::load(&a.model)?;
    let lexicon = config::lexicon(&a.model, a.lexicon.as_deref())?;
    let mut out = config::output(a.out.as_ref())?;
    match (&a.task, &a.kind) {
        (Some(task), None) => {
            let task: NaTask = task.parse().map_err(|e| CliError::Config(format!("--task: {e}")))?;
            let cond: NaCondition = a.condition.parse().map_err(|e| CliError::Config(format!("--condition: {e}")))?;
            if !task.conditions().contains(&cond) {
                return config_err(format!("--condition {cond} is not defined for task {task}"));
            }
            let items = generate_na_corpus(task, cond, &lexicon, model.vocabulary(), a.count, a.seed)?;
            write_jsonl(&mut out, &items)?;
        }
        (None, Some(kind)) => {
            let kind: GenderKind = kind.parse().map_err(|e| CliError::Config(format!("--kind: {e}")))?;
            let cond: GenderCondition = a.condition.parse().map_err(|e| CliError::Config(format!("--condition: {e}")))?;
            let items = generate_gender_corpus(kind, cond, &lexicon, model.vocabulary(), a.count, a.seed)?;
            write_jsonl(&mut out, &items)?;
        }
        _ => return config_err("gen-corpus needs exactly one of --task or --kind"),
    }
    finish(out)
}

pub fn inspect_model(a: InspectArgs) -> CliResult<()> {
    let model = config::load(&a.model)?;
    let vocab = model.vocabulary();
    let intercepts: Vec<(String, Option<f64>)> = a
        .tokens
        .iter()
        .map(|t| (t.clone(), vocab.id(t).map(|id| model.decoder_intercept()[id])))
        .collect();
    let mut out = config::output(None)?;
    let io = |e| io_err("<output>", e);
    match a.format {
        Some(FormatArg::Json) => json_out(
            &mut out,
            &json!({
                "layers": model.layers().len(),
                "hidden_sizes": model.hidden_sizes(),
                "embedding_size": model.embedding_size(),
                "vocab_size": model.vocab_size(),
                "decoder_intercepts": intercepts
                    .iter()
                    .map(|(t, v)| json!({"token": t, "intercept": v}))
                    .collect::<Vec<_>>(),
            }),
        )?,
        _ => {
            writeln!(out, "layers: {}", model.layers().len()).map_err(io)?;
            writeln!(out, "hidden sizes: {:?}", model.hidden_sizes()).map_err(io)?;
            writeln!(out, "embedding size: {}", model.embedding_size()).map_err(io)?;
            writeln!(out, "vocabulary size: {}", model.vocab_size()).map_err(io)?;
            for (t, v) in &intercepts {
                match v {
                    Some(v) => writeln!(out, "decoder intercept {t}: {v:.4}").map_err(io)?,
                    None => writeln!(out, "decoder intercept {t}: absent from vocabulary").map_err(io)?,
                }
            }
        }
    }
    finish(out)
}
