mod common;

use common::{naive_cell, naive_forward, random_model, random_tokens, rng, uniform_vec};
use gcd::fixture::toy_model;
use gcd::model::{LstmLayerParams, PerGate};
use gcd::{default_init_state, lm_forward, lstm_cell_forward, softmax, Matrix};
use proptest::prelude::*;

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn random_four_unit_cell_matches_scalar_oracle() {
    let mut r = rng(4);
    let m = random_model(&mut r, 6, 3, &[4]);
    let p = &m.layers()[0];
    let x = uniform_vec(&mut r, 3, 2.0);
    let h = uniform_vec(&mut r, 4, 1.0);
    let c = uniform_vec(&mut r, 4, 2.0);
    let (h1, c1, gates) = lstm_cell_forward(&x, &h, &c, p).unwrap();
    let (h2, c2, g2) = naive_cell(p, &x, &h, &c);
    assert!(max_diff(&h1, &h2) <= 1e-12);
    assert!(max_diff(&c1, &c2) <= 1e-12);
    assert!(max_diff(&gates.forget, &g2[0]) <= 1e-12);
    assert!(max_diff(&gates.input, &g2[1]) <= 1e-12);
    assert!(max_diff(&gates.candidate, &g2[2]) <= 1e-12);
    assert!(max_diff(&gates.output, &g2[3]) <= 1e-12);
}

#[test]
fn cell_rejects_mismatched_input() {
    let mut r = rng(4);
    let m = random_model(&mut r, 6, 3, &[4]);
    let err = lstm_cell_forward(&[0.0; 2], &[0.0; 4], &[0.0; 4], &m.layers()[0]);
    assert!(err.is_err());
}

#[test]
fn forward_matches_naive_for_small_models() {
    let mut r = rng(21);
    for trial in 0..20 {
        let h1 = 1 + trial % 8;
        let h2 = 1 + (trial * 3) % 8;
        let m = random_model(&mut r, 7, 5, &[h1, h2]);
        let tokens = random_tokens(&mut r, 7, 10);
        let pass = lm_forward(&tokens, &m, &m.zero_state()).unwrap();
        let (logits, states) = naive_forward(&m, &tokens);
        for t in 0..tokens.len() {
            assert!(max_diff(&pass.logits[t], &logits[t]) <= 1e-12);
            for l in 0..2 {
                assert!(max_diff(&pass.states[t].layers[l].h, &states[t][l].0) <= 1e-12);
                assert!(max_diff(&pass.states[t].layers[l].c, &states[t][l].1) <= 1e-12);
            }
        }
    }
}

#[test]
fn single_toy_token_logits_are_decoder_of_one_update() {
    let m = toy_model();
    let tok = m.vocabulary().id("the").unwrap();
    let pass = lm_forward(&[tok], &m, &m.zero_state()).unwrap();
    let (logits, _) = naive_forward(&m, &[tok]);
    assert!(max_diff(&pass.logits[0], &logits[0]) <= 1e-12);
}

#[test]
fn toy_prefers_singular_verb_after_singular_subject() {
    let m = toy_model();
    let v = m.vocabulary();
    let tokens = v.encode("the boy", false).unwrap();
    let pass = lm_forward(&tokens, &m, &default_init_state(&m)).unwrap();
    let z = &pass.logits[1];
    let greets = v.id("greets").unwrap();
    let greet = v.id("greet").unwrap();
    assert!(z[greets] > z[greet]);
}

#[test]
fn forward_is_deterministic() {
    let m = toy_model();
    let tokens = m.vocabulary().encode("the woman near the boys", false).unwrap();
    let a = lm_forward(&tokens, &m, &default_init_state(&m)).unwrap();
    let b = lm_forward(&tokens, &m, &default_init_state(&m)).unwrap();
    assert_eq!(a, b);
    assert_eq!(default_init_state(&m), default_init_state(&m));
}

#[test]
fn softmax_matches_direct_formula() {
    let mut r = rng(10);
    let z = uniform_vec(&mut r, 10, 3.0);
    let p = softmax(&z).unwrap();
    let total: f64 = z.iter().map(|v| v.exp()).sum();
    for (pi, zi) in p.iter().zip(&z) {
        assert!((pi - zi.exp() / total).abs() <= 1e-12);
    }
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
}

fn layer_with(values: Vec<f64>, hidden: usize, input: usize) -> LstmLayerParams<f64> {
    let mut it = values.into_iter().cycle();
    let mut mat = |r, c| Matrix::from_fn(r, c, |_, _| it.next().unwrap());
    let w = PerGate::from_fn(|_| mat(hidden, input));
    let v = PerGate::from_fn(|_| mat(hidden, hidden));
    let b = PerGate::from_fn(|_| mat(1, hidden).as_slice().to_vec());
    LstmLayerParams::new(w, v, b).unwrap()
}

proptest! {
    #[test]
    fn gates_stay_in_range(
        weights in prop::collection::vec(-10.0f64..10.0, 1..64),
        x in prop::collection::vec(-10.0f64..10.0, 3),
        h in prop::collection::vec(-1.0f64..1.0, 4),
        c in prop::collection::vec(-10.0f64..10.0, 4),
    ) {
        let p = layer_with(weights, 4, 3);
        let (_, _, g) = lstm_cell_forward(&x, &h, &c, &p).unwrap();
        for gate in [&g.forget, &g.input, &g.output] {
            prop_assert!(gate.iter().all(|&v| v >= 0.0 && v <= 1.0));
        }
        prop_assert!(g.candidate.iter().all(|&v| v.abs() <= 1.0));
    }
}
