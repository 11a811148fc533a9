//! Shared helpers for integration tests: random models and independent
//! reference implementations.
#![allow(dead_code)]

use gcd::model::{Gate, LanguageModel, LstmLayerParams, PerGate};
use gcd::{Matrix, Vocabulary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-scale..scale))
}

/// Random model with a vocabulary of `vocab` words (the first two are "." and
/// "<eos>") and the given hidden sizes.
pub fn random_model(
    rng: &mut ChaCha8Rng,
    vocab: usize,
    embedding: usize,
    hidden: &[usize],
) -> LanguageModel<f64> {
    let mut tokens = vec![".".to_string(), "<eos>".to_string()];
    tokens.extend((2..vocab).map(|i| format!("w{i}")));
    let vocabulary = Vocabulary::new(tokens).unwrap();
    let embeddings = uniform_matrix(rng, vocab, embedding, 1.0);
    let mut layers = Vec::new();
    let mut input = embedding;
    for &h in hidden {
        let scale = 1.5 / (input as f64).sqrt();
        let rscale = 1.5 / (h as f64).sqrt();
        layers.push(
            LstmLayerParams::new(
                PerGate::from_fn(|_| uniform_matrix(rng, h, input, scale)),
                PerGate::from_fn(|_| uniform_matrix(rng, h, h, rscale)),
                PerGate::from_fn(|_| uniform_vec(rng, h, 1.0)),
            )
            .unwrap(),
        );
        input = h;
    }
    let decoder = uniform_matrix(rng, vocab, input, 1.0);
    let bias = uniform_vec(rng, vocab, 1.0);
    LanguageModel::new(embeddings, layers, decoder, bias, vocabulary).unwrap()
}

pub fn random_tokens(rng: &mut ChaCha8Rng, vocab: usize, max_len: usize) -> Vec<usize> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| rng.random_range(0..vocab)).collect()
}

fn sigmoid(v: f64) -> f64 {
    1.0 / (1.0 + (-v).exp())
}

/// Scalar-by-scalar LSTM cell. Returns (h, c, [f, i, c~, o]).
pub fn naive_cell(
    p: &LstmLayerParams<f64>,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
) -> (Vec<f64>, Vec<f64>, [Vec<f64>; 4]) {
    let n = p.hidden_size();
    let pre = |w: &Matrix<f64>, v: &Matrix<f64>, b: &[f64], j: usize| {
        let mut s = b[j];
        for k in 0..x.len() {
            s += w.get(j, k) * x[k];
        }
        for k in 0..n {
            s += v.get(j, k) * h_prev[k];
        }
        s
    };
    let (w, v, b) = (&p.input_weights, &p.recurrent_weights, &p.intercepts);
    let mut gates: [Vec<f64>; 4] = Default::default();
    let mut h = vec![0.0; n];
    let mut c = vec![0.0; n];
    for j in 0..n {
        let f = sigmoid(pre(&w.forget, &v.forget, &b.forget, j));
        let i = sigmoid(pre(&w.input, &v.input, &b.input, j));
        let g = pre(&w.candidate, &v.candidate, &b.candidate, j).tanh();
        let o = sigmoid(pre(&w.output, &v.output, &b.output, j));
        c[j] = f * c_prev[j] + i * g;
        h[j] = o * c[j].tanh();
        gates[0].push(f);
        gates[1].push(i);
        gates[2].push(g);
        gates[3].push(o);
    }
    (h, c, gates)
}

/// Naive forward pass from zero states: per-step logits and per-layer (h, c).
pub fn naive_forward(
    m: &LanguageModel<f64>,
    tokens: &[usize],
) -> (Vec<Vec<f64>>, Vec<Vec<(Vec<f64>, Vec<f64>)>>) {
    let mut state: Vec<(Vec<f64>, Vec<f64>)> = m
        .hidden_sizes()
        .iter()
        .map(|&n| (vec![0.0; n], vec![0.0; n]))
        .collect();
    let mut logits = Vec::new();
    let mut states = Vec::new();
    for &tok in tokens {
        let mut x: Vec<f64> = m.embedding(tok).to_vec();
        for (l, p) in m.layers().iter().enumerate() {
            let (h, c, _) = naive_cell(p, &x, &state[l].0, &state[l].1);
            state[l] = (h.clone(), c);
            x = h;
        }
        let mut z = Vec::new();
        for w in 0..m.vocab_size() {
            let mut s = m.decoder_intercept()[w];
            for k in 0..x.len() {
                s += m.decoder().get(w, k) * x[k];
            }
            z.push(s);
        }
        logits.push(z);
        states.push(state.clone());
    }
    (logits, states)
}

/// All orderings of `items`, recursively.
fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for (k, &first) in items.iter().enumerate() {
        let mut rest = items.to_vec();
        rest.remove(k);
        for mut tail in permutations(&rest) {
            tail.insert(0, first);
            out.push(tail);
        }
    }
    out
}

/// Brute-force Shapley contributions by literal permutation enumeration with
/// running sums in permutation order. `bias` is the index of the intercept;
/// `fixed` pins it to the front of every ordering.
pub fn shapley_oracle(
    terms: &[Vec<f64>],
    act: fn(f64) -> f64,
    bias: Option<usize>,
    fixed: bool,
) -> Vec<Vec<f64>> {
    let n = terms.len();
    let dim = terms[0].len();
    let mut out = vec![vec![0.0; dim]; n];
    let others: Vec<usize> = (0..n).filter(|&i| !(fixed && Some(i) == bias)).collect();
    let perms = permutations(&others);
    for perm in &perms {
        for k in 0..dim {
            let mut running = if fixed { terms[bias.unwrap()][k] } else { 0.0 };
            let mut prev = act(running);
            for &i in perm {
                running += terms[i][k];
                let now = act(running);
                out[i][k] += (now - prev) / perms.len() as f64;
                prev = now;
            }
        }
    }
    let rest = act(0.0);
    match (fixed, bias) {
        (true, Some(b)) => out[b] = terms[b].iter().map(|&v| act(v)).collect(),
        (false, Some(b)) => out[b].iter_mut().for_each(|v| *v += rest),
        _ => out
            .iter_mut()
            .for_each(|o| o.iter_mut().for_each(|v| *v += rest / n as f64)),
    }
    out
}

pub fn sig(v: f64) -> f64 {
    sigmoid(v)
}

pub fn tanh(v: f64) -> f64 {
    v.tanh()
}

/// Inside cell and hidden parts for a one-layer model under the default set,
/// built directly from the five inside products of the cell update.
pub fn five_term_oracle(
    m: &LanguageModel<f64>,
    tokens: &[usize],
    focus: &gcd::PhraseFocus,
    fixed: bool,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    let p = &m.layers()[0];
    let n = p.hidden_size();
    let init = gcd::default_init_state(m);
    let pass = gcd::lm_forward(tokens, m, &init).unwrap();
    let mut beta_c = vec![0.0; n];
    let mut beta_h = vec![0.0; n];
    let mut gamma_h = init.layers[0].h.clone();
    let mut out = Vec::new();
    for (t, &tok) in tokens.iter().enumerate() {
        let x = m.embedding(tok);
        let inside = focus.contains(t);
        let pre = |w: &Matrix<f64>, v: &Matrix<f64>, h: &[f64], with_x: bool| -> Vec<f64> {
            (0..n)
                .map(|j| {
                    let mut s: f64 = (0..n).map(|k| v.get(j, k) * h[k]).sum();
                    if with_x {
                        s += (0..x.len()).map(|k| w.get(j, k) * x[k]).sum::<f64>();
                    }
                    s
                })
                .collect()
        };
        let split = |g: usize, act: fn(f64) -> f64| {
            let gate = [
                Gate::Forget,
                Gate::Input,
                Gate::Candidate,
                Gate::Output,
            ][g];
            let w = p.input_weights.get(gate);
            let v = p.recurrent_weights.get(gate);
            let terms = vec![
                pre(w, v, &beta_h, inside),
                pre(w, v, &gamma_h, !inside),
                p.intercepts.get(gate).clone(),
            ];
            shapley_oracle(&terms, act, Some(2), fixed)
        };
        let f = split(0, sig);
        let i = split(1, sig);
        let cc = split(2, tanh);
        let o = split(3, sig);
        // f_β⊙β^c + f_b⊙β^c + i_β⊙c̃_β + i_b⊙c̃_β + i_β⊙c̃_b
        let new_c: Vec<f64> = (0..n)
            .map(|j| {
                f[0][j] * beta_c[j]
                    + f[2][j] * beta_c[j]
                    + i[0][j] * cc[0][j]
                    + i[2][j] * cc[0][j]
                    + i[0][j] * cc[2][j]
            })
            .collect();
        let c = &pass.states[t].layers[0].c;
        let gamma_c: Vec<f64> = c.iter().zip(&new_c).map(|(a, b)| a - b).collect();
        let tc = shapley_oracle(&[new_c.clone(), gamma_c], tanh, None, false);
        let new_h: Vec<f64> = (0..n).map(|j| (o[0][j] + o[2][j]) * tc[0][j]).collect();
        let h = &pass.states[t].layers[0].h;
        gamma_h = h.iter().zip(&new_h).map(|(a, b)| a - b).collect();
        beta_c = new_c;
        beta_h = new_h;
        out.push((beta_c.clone(), beta_h.clone()));
    }
    out
}
