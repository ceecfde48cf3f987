use proptest::prelude::*;
use syntax_emergence::config::{parse_config_str, Model, Scenario};
use syntax_emergence::engine::{derive_stream, ForgettingPolicy, LearningState, MessageDistribution};
use syntax_emergence::ensemble::{run_ensemble, EnsembleConfig};
use syntax_emergence::fundamental::FundamentalScenario;
use syntax_emergence::hearer::posterior;
use syntax_emergence::history::{run_history, LanguageModel};

fn fundamental(probs: &[f64], starts: &[f64], alpha: f64) -> FundamentalScenario {
    FundamentalScenario::new(
        MessageDistribution::new(probs.to_vec()).unwrap(),
        LearningState::new(starts.to_vec(), alpha).unwrap(),
        ForgettingPolicy::none(),
    )
    .unwrap()
}

fn counts_strategy() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.01f64..1e4, 2..6)
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn hre_rule_is_scale_invariant(counts in counts_strategy(), alpha in 0.0f64..100.0, scale in 1e-3f64..1e3) {
        let a = LearningState::new(counts.clone(), alpha).unwrap();
        let b = LearningState::new(counts.iter().map(|c| c * scale).collect(), alpha * scale).unwrap();
        for i in 0..counts.len() {
            let (pa, pb) = (a.hre_probability(i).unwrap(), b.hre_probability(i).unwrap());
            prop_assert!((pa - pb).abs() <= 1e-12, "{pa} vs {pb}");
        }
    }

    #[test]
    fn posterior_is_normalized(weights in counts_strategy(), raw in prop::collection::vec(0.01f64..1.0, 6)) {
        let z: f64 = raw[..weights.len()].iter().sum();
        let priors: Vec<f64> = raw[..weights.len()].iter().map(|r| r / z).collect();
        let post = posterior(&weights, &priors).unwrap();
        let sum: f64 = post.iter().sum();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
        prop_assert!(post.iter().all(|p| (0.0..=1.0).contains(p)));
    }

    #[test]
    fn counts_are_conserved(seed in any::<u64>(), n in 1u64..2_000) {
        let mut m = fundamental(&[0.5, 0.3, 0.2], &[1.0, 2.0, 0.5], 1.0);
        let h = run_history(&mut m, &mut derive_stream(seed, 0), n, &[n]).unwrap();
        let successes = h.utterances.iter().filter(|u| u.is_success()).count() as f64;
        let total: f64 = m.counts().iter().sum();
        prop_assert!((total - (3.5 + successes)).abs() <= 1e-12);
        for i in 0..3 {
            let wins = h.utterances.iter().filter(|u| u.is_success() && u.message_id == i).count() as f64;
            prop_assert_eq!(m.counts()[i], [1.0, 2.0, 0.5][i] + wins);
        }
    }

    #[test]
    fn hearer_matches_tabulated_history(seed in any::<u64>(), n in 1u64..3_000) {
        let starts = [1.0, 1.0, 1.0];
        let mut m = fundamental(&[0.6, 0.3, 0.1], &starts, 0.0);
        let h = run_history(&mut m, &mut derive_stream(seed, 7), n, &[n]).unwrap();
        let mut tab = starts.to_vec();
        for u in h.utterances.iter().filter(|u| u.is_success()) {
            tab[u.message_id] += 1.0;
        }
        let priors = [0.1, 0.6, 0.3];
        let from_model = posterior(&m.hearer_weights().unwrap(), &priors).unwrap();
        let z: f64 = tab.iter().zip(priors).map(|(c, p)| c * p).sum();
        for i in 0..3 {
            prop_assert!((from_model[i] - tab[i] * priors[i] / z).abs() <= 1e-12);
        }
    }
}

const CONFIGS: [&str; 5] = [
    r#"{"model": "fundamental", "message_probabilities": [0.45, 0.4, 0.15], "start_counts": [1, 1, 1], "forgetting": {"nu": 0.99}}"#,
    r#"{"model": "sequential", "message_probabilities": [0.7, 0.3],
        "relations": [{"name": "subj", "start_counts": [1, 1]}, {"name": "obj", "start_counts": [1, 1]}]}"#,
    r#"{"model": "similarity",
        "verbs": [{"name": "a", "roles": ["x", "y"], "role_probabilities": [0.7, 0.3]},
                  {"name": "b", "roles": ["x", "y"], "role_probabilities": [0.4, 0.6]}],
        "verb_frequencies": [0.6, 0.4], "relations": ["subj", "obj"], "gamma": 0.1, "decay": 0.999,
        "forgetting": {"nu": 0.98}}"#,
    r#"{"model": "forms", "message_probabilities": [1.0], "forms": ["s.p", "p.s"],
        "form_probabilities": [[0.7, 0.3]], "start_counts": [1, 1]}"#,
    r#"{"model": "form_competition", "p_subj": 0.25}"#,
];

fn model(text: &str) -> Model {
    match parse_config_str(text).unwrap().scenario {
        Scenario::Model(m) => m,
        Scenario::Phased(_) => unreachable!(),
    }
}

#[test]
fn ensembles_do_not_depend_on_worker_count() {
    for text in CONFIGS {
        let m = model(text);
        let base = EnsembleConfig::new(300, 3_000, 42);
        let one = run_ensemble(&m, &base.clone().with_workers(1)).unwrap();
        let eight = run_ensemble(&m, &base.with_workers(8)).unwrap();
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&eight).unwrap(),
            "{text}"
        );
    }
}

#[test]
fn ensemble_history_matches_standalone_run() {
    let m = model(CONFIGS[0]);
    let result = run_ensemble(&m, &EnsembleConfig::new(20, 2_000, 5).with_workers(3)).unwrap();
    for id in [0usize, 13, 19] {
        let mut single = m.clone();
        let h = run_history(&mut single, &mut derive_stream(5, id as u64), 2_000, &[2_000]).unwrap();
        assert_eq!(h.trajectory.final_probabilities().unwrap(), &result.histories[id].final_probabilities[..]);
    }
}

#[test]
fn ensemble_means_match_direct_average() {
    let m = model(CONFIGS[0]);
    let result = run_ensemble(&m, &EnsembleConfig::new(50, 1_000, 8).with_checkpoints(vec![10, 100, 1_000])).unwrap();
    for (row, &k) in [10u64, 100, 1_000].iter().enumerate() {
        let mut sum = 0.0;
        for id in 0..50 {
            let mut single = m.clone();
            let h = run_history(&mut single, &mut derive_stream(8, id), 1_000, &[10, 100, 1_000]).unwrap();
            sum += h.trajectory.probabilities[row][0];
        }
        let mean = result.mean_at(k, 0).unwrap();
        assert!((mean - sum / 50.0).abs() <= 1e-12, "k {k}: {mean} vs {}", sum / 50.0);
    }
}

#[test]
fn histogram_rows_account_for_every_history() {
    let m = model(CONFIGS[0]);
    let result = run_ensemble(&m, &EnsembleConfig::new(40, 10_000, 1)).unwrap();
    let ks: Vec<u64> = result.aggregate.histograms.iter().map(|h| h.checkpoint).collect();
    assert_eq!(ks, vec![10, 100, 1_000, 10_000]);
    for h in &result.aggregate.histograms {
        for bins in &h.counts {
            assert_eq!(bins.iter().sum::<u64>(), 40);
        }
    }
    assert_eq!(result.sample_paths.len(), 10);
}
