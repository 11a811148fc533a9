use gcd::experiments::{gender_eval_both, na_eval_both, PREFERENCE_SLOTS};
use gcd::fixture::{toy_lexicon, toy_model};
use gcd::model::LanguageModel;
use gcd::{
    default_init_state, gender_eval, gender_preference_cells, generate_gender_corpus,
    generate_na_corpus, lm_forward, na_eval, BiasPolicy, FocusRole, GenderCondition, GenderKind,
    InteractionSet, Matrix, ModeVariant, NaCondition, NaTask, ScoringMode,
};

fn full(include: bool) -> ScoringMode {
    ScoringMode {
        variant: ModeVariant::Full,
        include_decoder_intercept: include,
    }
}

#[test]
fn full_mode_is_behavioural_accuracy() {
    let m = toy_model();
    let init = default_init_state(&m);
    let corpus = generate_na_corpus(NaTask::Simple, NaCondition::S, &toy_lexicon(), m.vocabulary(), 30, 5).unwrap();
    let wins = corpus
        .iter()
        .filter(|inst| {
            let pass = lm_forward(&inst.tokens, &m, &init).unwrap();
            let z = &pass.logits[inst.prediction_step];
            z[inst.correct_verb] > z[inst.wrong_verb]
        })
        .count();
    let res = na_eval(&m, &corpus, &full(true), BiasPolicy::FullPermutations, &init).unwrap();
    assert_eq!(res.accuracy, 100.0 * wins as f64 / corpus.len() as f64);
    assert_eq!(res.n, 30);
    assert_eq!(res.policy, "full");
    assert_eq!(res.mode, "full");
}

#[test]
fn empty_focus_without_intercepts_is_all_ties() {
    let m = toy_model();
    let init = default_init_state(&m);
    let corpus = generate_na_corpus(NaTask::NounPP, NaCondition::SS, &toy_lexicon(), m.vocabulary(), 20, 5).unwrap();
    let mode = ScoringMode {
        variant: ModeVariant::Gcd {
            interactions: InteractionSet::no_intercept(),
            focus_role: FocusRole::Intercepts,
        },
        include_decoder_intercept: false,
    };
    let res = na_eval(&m, &corpus, &mode, BiasPolicy::FullPermutations, &init).unwrap();
    assert_eq!(res.accuracy, 0.0);
    assert_eq!(res.ties, 20);
    assert!(res.instances.iter().all(|o| o.score_target == 0.0 && o.score_other == 0.0));
}

#[test]
fn intercepts_role_needs_outside_inputs() {
    assert!(ModeVariant::gcd(InteractionSet::inside(), FocusRole::Intercepts).is_err());
    assert!(ModeVariant::gcd(InteractionSet::intercept_star(), FocusRole::Intercepts).is_ok());
}

fn symmetric_pronouns(m: &LanguageModel<f64>) -> LanguageModel<f64> {
    let v = m.vocabulary();
    let (he, she) = (v.id("he").unwrap(), v.id("she").unwrap());
    let dec = m.decoder();
    let decoder = Matrix::from_fn(dec.rows(), dec.cols(), |r, c| {
        dec.get(if r == she { he } else { r }, c)
    });
    let mut bias = m.decoder_intercept().to_vec();
    bias[she] = bias[he];
    LanguageModel::new(
        m.embeddings().clone(),
        m.layers().to_vec(),
        decoder,
        bias,
        v.clone(),
    )
    .unwrap()
}

#[test]
fn symmetric_pronoun_weights_score_zero() {
    let m = symmetric_pronouns(&toy_model());
    let init = default_init_state(&m);
    let corpus = generate_gender_corpus(GenderKind::Unambiguous, GenderCondition::MM, &toy_lexicon(), m.vocabulary(), 25, 2).unwrap();
    let res = gender_eval(&m, &corpus, &full(true), BiasPolicy::FullPermutations, &init).unwrap();
    assert_eq!(res.accuracy, 0.0);
    assert_eq!(res.ties, 25);
}

#[test]
fn aggregates_recompute_from_instances() {
    let m = toy_model();
    let init = default_init_state(&m);
    let corpus = generate_na_corpus(NaTask::NounPP, NaCondition::PS, &toy_lexicon(), m.vocabulary(), 40, 8).unwrap();
    let variant = ModeVariant::gcd(InteractionSet::inside(), FocusRole::Subject).unwrap();
    for res in na_eval_both(&m, &corpus, &variant, BiasPolicy::BiasFixedFirst, &init).unwrap() {
        let again = res.clone().aggregate(res.instances.clone());
        assert_eq!(again, res);
        let wins = res.instances.iter().filter(|o| o.score_target > o.score_other).count();
        assert_eq!(res.accuracy, 100.0 * wins as f64 / 40.0);
        assert_eq!(res.policy, "fixed");
    }
}

#[test]
fn decoder_intercept_shifts_scores_exactly() {
    let m = toy_model();
    let init = default_init_state(&m);
    let corpus = generate_gender_corpus(GenderKind::Stereotypical, GenderCondition::FM, &toy_lexicon(), m.vocabulary(), 10, 3).unwrap();
    let (he, she) = (corpus[0].he_id, corpus[0].she_id);
    let bd = m.decoder_intercept();
    for variant in [
        ModeVariant::Full,
        ModeVariant::gcd(InteractionSet::inside(), FocusRole::Object).unwrap(),
    ] {
        let [with, without] = gender_eval_both(&m, &corpus, &variant, BiasPolicy::FullPermutations, &init).unwrap();
        for (a, b) in with.instances.iter().zip(&without.instances) {
            assert_eq!(a.score_target, b.score_target + bd[he]);
            assert_eq!(a.score_other, b.score_other + bd[she]);
        }
    }
}

#[test]
fn whole_sentence_inside_reproduces_full_decisions() {
    let m = toy_model();
    let init = default_init_state(&m);
    let corpus = generate_na_corpus(NaTask::NounPP, NaCondition::SP, &toy_lexicon(), m.vocabulary(), 50, 6).unwrap();
    let full_res = na_eval(&m, &corpus, &full(true), BiasPolicy::FullPermutations, &init).unwrap();
    let mode = ScoringMode {
        variant: ModeVariant::gcd(InteractionSet::everything(), FocusRole::Sentence).unwrap(),
        include_decoder_intercept: true,
    };
    let gcd_res = na_eval(&m, &corpus, &mode, BiasPolicy::FullPermutations, &init).unwrap();
    let decisions = |r: &gcd::EvalResult| r.instances.iter().map(|o| o.win).collect::<Vec<_>>();
    assert_eq!(decisions(&full_res), decisions(&gcd_res));
}

#[test]
fn preference_cells_cover_slots() {
    let m = toy_model();
    let init = default_init_state(&m);
    let lex = toy_lexicon();
    let mut corpus = Vec::new();
    for cond in GenderCondition::ALL {
        corpus.extend(generate_gender_corpus(GenderKind::Unambiguous, cond, &lex, m.vocabulary(), 10, 1).unwrap());
    }
    let cells = gender_preference_cells(&m, &corpus, &InteractionSet::inside(), BiasPolicy::FullPermutations, &init).unwrap();
    assert_eq!(cells.len(), 4 * PREFERENCE_SLOTS.len());
    let cell = |cond: &str, slot: &str| cells.iter().find(|c| c.condition == cond && c.slot == slot).unwrap().mean;
    assert!(cell("MF", "subject") > 0.0);
    assert!(cell("MF", "object") < 0.0);
    assert!(cell("FM", "subject") < 0.0);
    assert!(cell("FM", "object") > 0.0);
}

#[test]
fn slot_without_inside_part_is_zero() {
    let m = toy_model();
    let init = default_init_state(&m);
    let corpus = generate_gender_corpus(GenderKind::Unambiguous, GenderCondition::MF, &toy_lexicon(), m.vocabulary(), 5, 1).unwrap();
    // Without any pair an inside product never forms.
    let mut empty = InteractionSet::default_set();
    empty.pairs.clear();
    let cells = gender_preference_cells(&m, &corpus, &empty, BiasPolicy::FullPermutations, &init).unwrap();
    for c in cells.iter().filter(|c| c.slot != "INIT") {
        assert_eq!(c.mean, 0.0);
        assert_eq!(c.n, 5);
    }
}
