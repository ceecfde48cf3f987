//! Derived values checked against independent computations written here,
//! plus the reductions between models.

use approx::assert_relative_eq;
use syntax_emergence::analysis::{competition_usages, efficiency_report, informativeness, Efficiency, FormProfile};
use syntax_emergence::competition::{limit_prediction, CompetitionState, Regime};
use syntax_emergence::engine::{derive_stream, ForgettingPolicy, LearningState, MessageDistribution, ScriptedDraws};
use syntax_emergence::forms::{build_product_model, FormInventory, FormsModel};
use syntax_emergence::fundamental::{FundamentalScenario, GeneralSettings, PayoffTable};
use syntax_emergence::hearer::posterior;
use syntax_emergence::history::{run_history, LanguageModel};
use syntax_emergence::sequential::{GrSequence, Relation};
use syntax_emergence::similarity::{Lexicon, SimilarityMatrix, SimilarityModel, Verb};

fn dist(p: &[f64]) -> MessageDistribution {
    MessageDistribution::new(p.to_vec()).unwrap()
}

fn state(c: &[f64], alpha: f64) -> LearningState {
    LearningState::new(c.to_vec(), alpha).unwrap()
}

#[test]
fn hearer_posterior_matches_hand_bayes() {
    let weights = [9.0, 1.0];
    let priors = [0.6, 0.4];
    let joint: Vec<f64> = weights.iter().zip(&priors).map(|(w, p)| w * p).collect();
    let z: f64 = joint.iter().sum();
    let post = posterior(&weights, &priors).unwrap();
    assert_relative_eq!(post[0], joint[0] / z, epsilon = 1e-15);
    assert_relative_eq!(post[1], joint[1] / z, epsilon = 1e-15);
    assert_relative_eq!(post[0], 0.931_034_482_758_620_7, epsilon = 1e-12);
    assert_relative_eq!(post[1], 0.068_965_517_241_379_3, epsilon = 1e-12);
}

#[test]
fn informativeness_is_surprisal_in_bits() {
    assert_relative_eq!(informativeness(0.1).unwrap(), 10f64.ln() / 2f64.ln(), epsilon = 1e-12);
    assert_relative_eq!(informativeness(0.1).unwrap(), std::f64::consts::LOG2_10, epsilon = 1e-12);
    assert_eq!(informativeness(1.0).unwrap(), 0.0);
    assert!(informativeness(0.0).is_err());
    assert!(informativeness(1.5).is_err());
}

#[test]
fn informativeness_is_additive_over_independent_events() {
    for (a, b) in [(0.5, 0.25), (0.1, 0.3), (0.999, 1e-6)] {
        let joint = informativeness(a * b).unwrap();
        let sum = informativeness(a).unwrap() + informativeness(b).unwrap();
        assert!((joint - sum).abs() <= 1e-12, "{a} {b}");
    }
}

#[test]
fn pair_probabilities_are_products() {
    let inv = FormInventory::new(
        vec!["s.p".into(), "p.s".into()],
        vec![dist(&[0.7, 0.3]), dist(&[0.5, 0.5])],
        state(&[1.0; 4], 0.0),
    )
    .unwrap();
    let pairs = inv.pair_probabilities(&dist(&[0.6, 0.4])).unwrap();
    let expected = [0.6 * 0.7, 0.6 * 0.3, 0.4 * 0.5, 0.4 * 0.5];
    for (got, want) in pairs.probabilities().iter().zip(expected) {
        assert_relative_eq!(*got, want, epsilon = 1e-15);
    }
    assert_relative_eq!(expected[0], 0.42, epsilon = 1e-15);
}

#[test]
fn general_mixture_averages_speakers() {
    let settings = GeneralSettings {
        speaker_weights: dist(&[0.5, 0.5]),
        speaker_messages: vec![dist(&[0.9, 0.1]), dist(&[0.2, 0.8])],
        scene_weights: dist(&[1.0]),
        payoff: PayoffTable::uniform(2, 1, 2),
    };
    let mix = settings.mixture();
    assert_relative_eq!(mix[0], 0.5 * 0.9 + 0.5 * 0.2, epsilon = 1e-15);
    assert_relative_eq!(mix[1], 0.45, epsilon = 1e-15);
}

#[test]
fn forgetting_weight_after_many_steps() {
    let policy = ForgettingPolicy::with_nu(0.9999).unwrap();
    let mut s = state(&[1.0, 1.0], 0.0);
    for _ in 0..100_000 {
        s.apply_success(0, &policy, 1.0).unwrap();
    }
    let oracle = (100_000.0 * 0.9999f64.ln()).exp();
    assert_relative_eq!(s.counts()[1], oracle, max_relative = 1e-9);
    assert_relative_eq!(s.counts()[1], 4.54e-5, max_relative = 1e-3);
    // The winner's count is a geometric series.
    let series = (1.0 - 0.9999f64.powi(100_000)) / (1.0 - 0.9999) + 0.9999f64.powi(100_000);
    assert_relative_eq!(s.counts()[0], series, max_relative = 1e-9);
}

#[test]
fn limit_predictions_match_closed_forms() {
    for p in [0.1, 0.2, 0.25, 1.0 / 3.0, 0.45] {
        let lim = limit_prediction(p).unwrap();
        let x = (1.0 - 2.0 * p) / (1.0 - p);
        assert_relative_eq!(lim.speaker_unmarked_given_obj, x, epsilon = 1e-12);
        let hearer = p / (p + (1.0 - p) * x);
        assert_relative_eq!(lim.hearer_subj_given_unmarked, hearer, epsilon = 1e-12);
        assert_relative_eq!(lim.hearer_obj_given_unmarked, 1.0 - hearer, epsilon = 1e-12);
    }
    assert_relative_eq!(limit_prediction(0.25).unwrap().speaker_unmarked_given_obj, 2.0 / 3.0, epsilon = 1e-12);
    for p in [0.6, 0.9] {
        let lim = limit_prediction(p).unwrap();
        assert_eq!(lim.speaker_unmarked_given_obj, 0.0);
        assert_eq!(lim.hearer_subj_given_unmarked, 1.0);
    }
    assert!(limit_prediction(0.5).is_err());
    assert_eq!(Regime::classify(0.909).unwrap(), Regime::Categoricalization);
    assert_eq!(Regime::classify(0.25).unwrap(), Regime::StableVariation);
}

#[test]
fn competition_usage_shares_and_efficiency() {
    let p: f64 = 0.25;
    let s = CompetitionState::new(p, 1.0, 2.0, 0.0).unwrap();
    let x: f64 = 2.0 / 3.0;
    let usages = competition_usages(
        &s,
        FormProfile::new("him", 1).unwrap(),
        FormProfile::new("himself", 2).unwrap(),
    );
    let fu = p + (1.0 - p) * x;
    let fa = (1.0 - p) * (1.0 - x);
    assert_relative_eq!(usages[0].probability_in_context, fu, epsilon = 1e-12);
    assert_relative_eq!(usages[1].probability_in_context, fa, epsilon = 1e-12);
    let report = efficiency_report(&usages).unwrap();
    assert_relative_eq!(report.forms[1].informativeness, -fa.log2(), epsilon = 1e-12);
    // The longer form is rarer, so complexity tracks information.
    assert_eq!(report.verdict, Efficiency::Efficient);
    assert_eq!(report.spearman, Some(1.0));
}

#[test]
fn competition_hearer_is_bayes_on_speaker_rule() {
    let s = CompetitionState::new(0.25, 3.0, 5.0, 0.0).unwrap();
    let x = 5.0 / 8.0;
    assert_relative_eq!(s.unmarked_given_obj(), x, epsilon = 1e-15);
    assert_relative_eq!(s.hearer_subj_given_unmarked(), 0.25 / (0.25 + 0.75 * x), epsilon = 1e-15);
}

#[test]
fn forms_model_replays_product_model() {
    for seed in 0..5 {
        let inv = FormInventory::new(
            vec!["a".into(), "b".into(), "c".into()],
            vec![dist(&[0.5, 0.3, 0.2]), dist(&[0.1, 0.1, 0.8])],
            state(&[1.0, 2.0, 1.0, 1.0, 1.0, 3.0], 0.5),
        )
        .unwrap();
        let probs = dist(&[0.7, 0.3]);
        let policy = ForgettingPolicy::with_nu(0.995).unwrap();
        let mut forms = FormsModel::new(inv.clone(), probs.clone(), policy).unwrap();
        let mut product = build_product_model(&inv, &probs, policy).unwrap();
        let mut a = derive_stream(seed, 3);
        let mut b = derive_stream(seed, 3);
        for k in 1..=5_000 {
            let u = forms.step(k, &mut a);
            let v = product.step(k, &mut b);
            let pair = u.message_id * 3 + u.form.unwrap();
            assert_eq!((pair, u.outcome), (v.message_id, v.outcome), "seed {seed} k {k}");
        }
        assert_eq!(forms.counts(), product.counts());
    }
}

#[test]
fn one_speaker_one_scene_general_is_fundamental() {
    let probs = [0.6, 0.3, 0.1];
    let settings = GeneralSettings {
        speaker_weights: dist(&[1.0]),
        speaker_messages: vec![dist(&probs)],
        scene_weights: dist(&[1.0]),
        payoff: PayoffTable::uniform(3, 1, 1),
    };
    let mut general = FundamentalScenario::general(settings, state(&[1.0; 3], 2.0), ForgettingPolicy::none()).unwrap();
    let mut plain = FundamentalScenario::new(dist(&probs), state(&[1.0; 3], 2.0), ForgettingPolicy::none()).unwrap();
    let cps = [10, 100, 2_000];
    let a = run_history(&mut general, &mut derive_stream(9, 0), 2_000, &cps).unwrap();
    let b = run_history(&mut plain, &mut derive_stream(9, 0), 2_000, &cps).unwrap();
    assert_eq!(a.trajectory, b.trajectory);
    let outcomes = |h: &syntax_emergence::history::History| {
        h.utterances.iter().map(|u| (u.message_id, u.outcome)).collect::<Vec<_>>()
    };
    assert_eq!(outcomes(&a), outcomes(&b));
}

#[test]
fn one_relation_sequence_is_fundamental() {
    let probs = [0.7, 0.3];
    let mut seq = GrSequence::new(vec![Relation::new("subj", state(&[1.0, 1.0], 0.0))], dist(&probs)).unwrap();
    let mut plain = FundamentalScenario::new(dist(&probs), state(&[1.0, 1.0], 0.0), ForgettingPolicy::none()).unwrap();
    let mut a = derive_stream(4, 1);
    let mut b = derive_stream(4, 1);
    for k in 1..=3_000 {
        let u = seq.step(k, &mut a);
        let v = plain.step(k, &mut b);
        assert_eq!(u.message_id, v.message_id);
        assert_eq!(u.is_success(), v.is_success());
    }
    assert_eq!(seq.counts(), plain.counts());
}

#[test]
fn single_verb_without_similarity_is_sequential() {
    let roles = [0.7, 0.3];
    let verb = Verb {
        name: "drink".into(),
        roles: vec!["agt".into(), "pat".into()],
        role_probabilities: dist(&roles),
    };
    let lexicon = Lexicon::new(
        vec![verb],
        dist(&[1.0]),
        vec!["subj".into(), "obj".into()],
        vec![0.0, 0.0],
        1.0,
        ForgettingPolicy::none(),
    )
    .unwrap();
    let mut sim = SimilarityModel::new(lexicon, SimilarityMatrix::uniform(1, 0.0, 1.0).unwrap()).unwrap();
    let mut seq = GrSequence::new(
        vec![
            Relation::new("subj", state(&[1.0, 1.0], 0.0)),
            Relation::new("obj", state(&[1.0, 1.0], 0.0)),
        ],
        dist(&roles),
    )
    .unwrap();
    let mut a = derive_stream(11, 0);
    let mut b = derive_stream(11, 0);
    for k in 1..=3_000 {
        let u = sim.step(k, &mut a);
        let v = seq.step(k, &mut b);
        assert_eq!((u.message_id, u.outcome, u.gr), (v.message_id, v.outcome, v.gr), "k {k}");
    }
    // Similarity cells are role-major, sequential cells relation-major.
    let s = sim.probabilities();
    let q = seq.probabilities();
    for role in 0..2 {
        for gr in 0..2 {
            assert_eq!(s[role * 2 + gr], q[gr * 2 + role]);
        }
    }
}

#[test]
fn scripted_fundamental_step_uses_two_draws() {
    let mut m = FundamentalScenario::new(dist(&[0.6, 0.3, 0.1]), state(&[1.0; 3], 0.0), ForgettingPolicy::none()).unwrap();
    // 0.65 selects m2; 0.2 < 1/3 succeeds.
    let mut d = ScriptedDraws::new(vec![0.65, 0.2]);
    let u = m.step(1, &mut d);
    assert_eq!(d.consumed(), 2);
    assert_eq!(u.message_id, 1);
    assert!(u.is_success());
    assert_eq!(m.counts(), vec![1.0, 2.0, 1.0]);
}
