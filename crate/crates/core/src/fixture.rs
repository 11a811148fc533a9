//! A small handcrafted two-layer word-level LSTM language model.
//!
//! The weights are constructed rather than trained: a handful of units carry
//! the agreement and gender signals and the rest are seeded noise. Layer 0
//! latches the number of the first noun (later nouns are blocked by a
//! "subject seen" unit) and accumulates male and female evidence; layer 1
//! copies those units upward; the decoder reads verb number and pronoun gender
//! off them. Singular verbs and `he` carry larger decoder intercepts, so they
//! win when the evidence is balanced. ". <eos>" resets all designed units.
//!
//! All values are rounded to `f32` so the model survives a 32-bit checkpoint
//! round trip unchanged.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::lexicon::Lexicon;
use crate::model::{LanguageModel, LstmLayerParams, PerGate};
use crate::tensor::Matrix;
use crate::vocab::Vocabulary;

pub const TOY_HIDDEN: usize = 16;
pub const TOY_EMBEDDING: usize = 16;
pub const TOY_SEED: u64 = 2020;

pub const TOY_LEXICON_JSON: &str = include_str!("../lexicons/toy.json");
pub const DEFAULT_LEXICON_JSON: &str = include_str!("../lexicons/default.json");

const SPECIALS: [&str; 6] = ["<eos>", ".", ",", "the", "because", "<unk>"];
const NOUNS: [(&str, &str); 6] = [
    ("boy", "boys"),
    ("car", "cars"),
    ("dog", "dogs"),
    ("key", "keys"),
    ("table", "tables"),
    ("farmer", "farmers"),
];
const NAMES: [&str; 3] = ["alan", "susan", "kim"];
const PREPOSITIONS: [&str; 4] = ["near", "behind", "on", "beside"];
const VERBS: [(&str, &str); 5] = [
    ("greets", "greet"),
    ("likes", "like"),
    ("sees", "see"),
    ("knows", "know"),
    ("visits", "visit"),
];
const PRONOUNS: [&str; 2] = ["he", "she"];
const MALE: [&str; 5] = ["king", "father", "man", "monk", "brother"];
const FEMALE: [&str; 5] = ["queen", "mother", "woman", "nun", "sister"];
const MALE_STEREO: [&str; 4] = ["doctor", "ceo", "carpenter", "guard"];
const FEMALE_STEREO: [&str; 4] = ["nurse", "housekeeper", "secretary", "cashier"];
const FILLER: [&str; 9] = ["was", "always", "nice", "to", "him", "her", "and", "a", "very"];

// Embedding feature columns.
const F_SG: usize = 0;
const F_PL: usize = 1;
const F_MALE: usize = 2;
const F_FEMALE: usize = 3;
const F_RESET: usize = 4;
const F_DET: usize = 5;
const F_PREP: usize = 6;
const F_VERB: usize = 7;
const FEATURES: usize = 8;

// Designed hidden units.
const U_SEEN: usize = 0;
const U_NUMBER: usize = 1;
const U_MALE: usize = 2;
const U_FEMALE: usize = 3;
const DESIGNED: usize = 4;

pub fn toy_vocabulary() -> Vocabulary {
    let mut tokens: Vec<String> = SPECIALS.iter().map(|s| s.to_string()).collect();
    for (s, p) in NOUNS {
        tokens.push(s.into());
        tokens.push(p.into());
    }
    tokens.extend(NAMES.iter().map(|s| s.to_string()));
    tokens.extend(PREPOSITIONS.iter().map(|s| s.to_string()));
    for (s, p) in VERBS {
        tokens.push(s.into());
        tokens.push(p.into());
    }
    for list in [&PRONOUNS[..], &MALE, &FEMALE, &MALE_STEREO, &FEMALE_STEREO, &FILLER] {
        tokens.extend(list.iter().map(|s| s.to_string()));
    }
    Vocabulary::new(tokens)
        .and_then(|v| v.with_unk("<unk>"))
        .expect("static toy vocabulary")
}

pub fn toy_lexicon() -> Lexicon {
    Lexicon::from_json(TOY_LEXICON_JSON).expect("bundled toy lexicon")
}

pub fn default_lexicon() -> Lexicon {
    Lexicon::from_json(DEFAULT_LEXICON_JSON).expect("bundled default lexicon")
}

fn features(token: &str) -> [f64; FEATURES] {
    let mut f = [0.0; FEATURES];
    let is = |list: &[&str]| list.contains(&token);
    if NOUNS.iter().any(|(s, _)| *s == token) || is(&NAMES) {
        f[F_SG] = 1.0;
    }
    if NOUNS.iter().any(|(_, p)| *p == token) {
        f[F_PL] = 1.0;
    }
    if is(&MALE) || is(&FEMALE) || is(&MALE_STEREO) || is(&FEMALE_STEREO) {
        f[F_SG] = 1.0;
    }
    if is(&MALE) {
        f[F_MALE] = 1.0;
    }
    if is(&FEMALE) {
        f[F_FEMALE] = 1.0;
    }
    if is(&MALE_STEREO) {
        f[F_MALE] = 0.6;
    }
    if is(&FEMALE_STEREO) {
        f[F_FEMALE] = 0.6;
    }
    if token == "." || token == "<eos>" {
        f[F_RESET] = 1.0;
    }
    if token == "the" || token == "a" {
        f[F_DET] = 1.0;
    }
    if is(&PREPOSITIONS) {
        f[F_PREP] = 1.0;
    }
    if VERBS.iter().any(|(s, p)| *s == token || *p == token) {
        f[F_VERB] = 1.0;
    }
    f
}

fn round32(v: f64) -> f64 {
    v as f32 as f64
}

struct Noise {
    rng: ChaCha8Rng,
}

impl Noise {
    fn normal(&mut self, sd: f64) -> f64 {
        Normal::new(0.0, sd).expect("valid sd").sample(&mut self.rng)
    }

    fn matrix(&mut self, rows: usize, cols: usize, sd: f64) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| self.normal(sd)).collect())
            .collect()
    }
}

fn finish(m: Vec<Vec<f64>>) -> Matrix<f64> {
    let rows = m.len();
    let cols = m[0].len();
    Matrix::from_vec(rows, cols, m.into_iter().flatten().map(round32).collect())
        .expect("rectangular")
}

fn finish_vec(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(round32).collect()
}

/// Designed units get weak noise, the remaining units stronger noise.
fn noisy(noise: &mut Noise, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut m = noise.matrix(rows, cols, 0.3);
    for row in m.iter_mut().take(DESIGNED) {
        for v in row.iter_mut() {
            *v *= 0.05;
        }
    }
    m
}

fn layer0(noise: &mut Noise) -> LstmLayerParams<f64> {
    let (h, e) = (TOY_HIDDEN, TOY_EMBEDDING);
    let mut w = PerGate::from_fn(|_| noisy(noise, h, e));
    let mut v = PerGate::from_fn(|_| noisy(noise, h, h));
    let mut b = PerGate::from_fn(|_| {
        let mut b: Vec<f64> = (0..h).map(|_| noise.normal(0.3)).collect();
        b.iter_mut().take(DESIGNED).for_each(|x| *x *= 0.05);
        b
    });

    for u in 0..DESIGNED {
        w.forget[u][F_RESET] += -14.0;
        b.forget[u] += 6.0;
        b.output[u] += 6.0;
        b.input[u] += -5.0;
    }
    // Subject seen: opens on any noun.
    w.input[U_SEEN][F_SG] += 10.0;
    w.input[U_SEEN][F_PL] += 10.0;
    w.candidate[U_SEEN][F_SG] += 3.0;
    w.candidate[U_SEEN][F_PL] += 3.0;
    // Number latch: first noun only.
    w.input[U_NUMBER][F_SG] += 10.0;
    w.input[U_NUMBER][F_PL] += 10.0;
    v.input[U_NUMBER][U_SEEN] += -20.0;
    w.candidate[U_NUMBER][F_SG] += -3.0;
    w.candidate[U_NUMBER][F_PL] += 3.0;
    // Gender evidence.
    w.input[U_MALE][F_MALE] += 10.0;
    w.candidate[U_MALE][F_MALE] += 3.0;
    w.input[U_FEMALE][F_FEMALE] += 10.0;
    w.candidate[U_FEMALE][F_FEMALE] += 3.0;

    LstmLayerParams::new(
        PerGate {
            forget: finish(w.forget),
            input: finish(w.input),
            candidate: finish(w.candidate),
            output: finish(w.output),
        },
        PerGate {
            forget: finish(v.forget),
            input: finish(v.input),
            candidate: finish(v.candidate),
            output: finish(v.output),
        },
        PerGate {
            forget: finish_vec(b.forget),
            input: finish_vec(b.input),
            candidate: finish_vec(b.candidate),
            output: finish_vec(b.output),
        },
    )
    .expect("consistent toy layer")
}

fn layer1(noise: &mut Noise) -> LstmLayerParams<f64> {
    let h = TOY_HIDDEN;
    let mut w = PerGate::from_fn(|_| noisy(noise, h, h));
    let v = PerGate::from_fn(|_| noisy(noise, h, h));
    let mut b = PerGate::from_fn(|_| {
        let mut b: Vec<f64> = (0..h).map(|_| noise.normal(0.3)).collect();
        b.iter_mut().take(DESIGNED).for_each(|x| *x *= 0.05);
        b
    });
    for u in 0..DESIGNED {
        w.candidate[u][u] += 3.0;
        b.input[u] += 6.0;
        b.forget[u] += -6.0;
        b.output[u] += 6.0;
    }
    LstmLayerParams::new(
        PerGate {
            forget: finish(w.forget),
            input: finish(w.input),
            candidate: finish(w.candidate),
            output: finish(w.output),
        },
        PerGate {
            forget: finish(v.forget),
            input: finish(v.input),
            candidate: finish(v.candidate),
            output: finish(v.output),
        },
        PerGate {
            forget: finish_vec(b.forget),
            input: finish_vec(b.input),
            candidate: finish_vec(b.candidate),
            output: finish_vec(b.output),
        },
    )
    .expect("consistent toy layer")
}

/// Builds the toy model: 2 layers of 16 units, 16-dimensional embeddings and a
/// 64-word vocabulary.
pub fn toy_model() -> LanguageModel<f64> {
    let vocab = toy_vocabulary();
    let mut noise = Noise {
        rng: ChaCha8Rng::seed_from_u64(TOY_SEED),
    };

    let embeddings: Vec<Vec<f64>> = vocab
        .tokens()
        .iter()
        .map(|tok| {
            let mut row = features(tok).to_vec();
            row.extend((FEATURES..TOY_EMBEDDING).map(|_| noise.normal(0.5)));
            row
        })
        .collect();

    let l0 = layer0(&mut noise);
    let l1 = layer1(&mut noise);

    let mut decoder = noise.matrix(vocab.len(), TOY_HIDDEN, 0.2);
    let mut intercept: Vec<f64> = (0..vocab.len()).map(|_| noise.normal(0.2)).collect();
    for (s, p) in VERBS {
        let (s, p) = (vocab.id(s).unwrap(), vocab.id(p).unwrap());
        for (row, sign) in [(s, -1.0), (p, 1.0)] {
            decoder[row][U_SEEN] = 2.0;
            decoder[row][U_NUMBER] = 4.0 * sign;
            decoder[row][U_MALE] = 0.0;
            decoder[row][U_FEMALE] = 0.0;
        }
        intercept[s] = 0.5;
        intercept[p] = 0.0;
    }
    let he = vocab.id("he").unwrap();
    let she = vocab.id("she").unwrap();
    for (row, sign) in [(he, 1.0), (she, -1.0)] {
        decoder[row][U_SEEN] = 0.0;
        decoder[row][U_NUMBER] = 0.0;
        decoder[row][U_MALE] = 4.0 * sign;
        decoder[row][U_FEMALE] = -4.0 * sign;
    }
    intercept[he] = 2.0;
    intercept[she] = 0.5;

    LanguageModel::new(
        finish(embeddings),
        vec![l0, l1],
        finish(decoder),
        finish_vec(intercept),
        vocab,
    )
    .expect("consistent toy model")
}
