//! JSON scenario files. The top-level `model` field selects the production
//! algorithm; an optional `run` object holds ensemble defaults that command
//! line flags override.

use std::path::Path;

use serde::Deserialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::competition::CompetitionState;
use crate::engine::{DrawSource, ForgettingPolicy, LearningState, MessageDistribution};
use crate::error::{Error, Result};
use crate::forms::{FormInventory, FormsModel};
use crate::fundamental::{FundamentalScenario, GeneralSettings, PayoffTable};
use crate::history::{LanguageModel, Utterance, Verdict};
use crate::recursion::Phase;
use crate::sequential::{GrSequence, Relation};
use crate::similarity::{Lexicon, SimilarityMatrix, SimilarityModel, Verb};

pub const MODEL_NAMES: [&str; 7] = [
    "fundamental",
    "general",
    "sequential",
    "similarity",
    "forms",
    "form_competition",
    "phased",
];

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ScenarioConfig {
    Fundamental(FundamentalConfig),
    General(GeneralConfig),
    Sequential(SequentialConfig),
    Similarity(SimilarityConfig),
    Forms(FormsConfig),
    FormCompetition(CompetitionConfig),
    Phased(PhasedConfig),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FundamentalConfig {
    pub message_probabilities: Vec<f64>,
    pub start_counts: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub forgetting: ForgettingPolicy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerConfig {
    pub weight: f64,
    pub message_probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneralConfig {
    pub speakers: Vec<SpeakerConfig>,
    #[serde(default)]
    pub scene_weights: Option<Vec<f64>>,
    /// `payoff[message][scene][speaker]`; all ones when omitted.
    #[serde(default)]
    pub payoff: Option<Vec<Vec<Vec<f64>>>>,
    pub start_counts: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub forgetting: ForgettingPolicy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RelationConfig {
    pub name: String,
    pub start_counts: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub forgetting: ForgettingPolicy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequentialConfig {
    pub message_probabilities: Vec<f64>,
    #[serde(default)]
    pub message_names: Option<Vec<String>>,
    pub relations: Vec<RelationConfig>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerbConfig {
    pub name: String,
    pub roles: Vec<String>,
    pub role_probabilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(untagged)]
pub enum GammaConfig {
    Uniform(f64),
    Matrix(Vec<Vec<f64>>),
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimilarityConfig {
    pub verbs: Vec<VerbConfig>,
    pub verb_frequencies: Vec<f64>,
    pub relations: Vec<String>,
    #[serde(default)]
    pub alphas: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub start_count: f64,
    pub gamma: GammaConfig,
    #[serde(default = "one")]
    pub decay: f64,
    /// `alignment[target][source][target_role]` = source role index.
    #[serde(default)]
    pub alignment: Option<Vec<Vec<Vec<Option<usize>>>>>,
    #[serde(default)]
    pub forgetting: ForgettingPolicy,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FormsConfig {
    pub message_probabilities: Vec<f64>,
    pub forms: Vec<String>,
    /// `form_probabilities[message][form]`.
    pub form_probabilities: Vec<Vec<f64>>,
    /// Message-major (message, form) pair counts.
    pub start_counts: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub forgetting: ForgettingPolicy,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompetitionConfig {
    pub p_subj: f64,
    /// `(c_u_subj, c_u_obj)` or `(c_u_subj, c_u_obj, c_a_obj)`; defaults to
    /// `(1, 1, 0)`.
    #[serde(default)]
    pub start_counts: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhasedConfig {
    pub words: Vec<String>,
    pub phases: Vec<Phase>,
}

/// Ensemble defaults stored next to the scenario.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSettings {
    pub histories: Option<usize>,
    pub utterances: Option<u64>,
    pub seed: Option<u64>,
    pub epsilon: Option<f64>,
    pub workers: Option<usize>,
    pub checkpoints: Option<Vec<u64>>,
    pub hearer_priors: Option<Vec<f64>>,
}

/// A runnable single-history model.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Fundamental(FundamentalScenario),
    Sequential(GrSequence),
    Similarity(SimilarityModel),
    Forms(FormsModel),
    FormCompetition(CompetitionState),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhasedScenario {
    pub words: Vec<String>,
    pub phases: Vec<Phase>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    Model(Model),
    Phased(PhasedScenario),
}

impl Scenario {
    pub fn model(&self) -> Result<&Model> {
        match self {
            Scenario::Model(m) => Ok(m),
            Scenario::Phased(_) => Err(Error::Usage(
                "phased scenarios run phase by phase; use the `run` command".into(),
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub name: String,
    pub scenario: Scenario,
    pub run: RunSettings,
    /// SHA-256 of the file bytes, hex encoded.
    pub hash: String,
}

fn distribution(field: &str, p: &[f64]) -> Result<MessageDistribution> {
    MessageDistribution::validated(field, p.to_vec())
}

fn state(field: &str, counts: &[f64], alpha: f64) -> Result<LearningState> {
    LearningState::validated(field, counts.to_vec(), alpha)
}

impl ScenarioConfig {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioConfig::Fundamental(_) => "fundamental",
            ScenarioConfig::General(_) => "general",
            ScenarioConfig::Sequential(_) => "sequential",
            ScenarioConfig::Similarity(_) => "similarity",
            ScenarioConfig::Forms(_) => "forms",
            ScenarioConfig::FormCompetition(_) => "form_competition",
            ScenarioConfig::Phased(_) => "phased",
        }
    }

    /// Checks every invariant and builds the scenario.
    pub fn build(&self) -> Result<Scenario> {
        let model = match self {
            ScenarioConfig::Fundamental(c) => {
                c.forgetting.validate("forgetting")?;
                Model::Fundamental(FundamentalScenario::new(
                    distribution("message_probabilities", &c.message_probabilities)?,
                    state("start_counts", &c.start_counts, c.alpha)?,
                    c.forgetting,
                )?)
            }
            ScenarioConfig::General(c) => {
                if c.speakers.is_empty() {
                    return Err(Error::config("speakers", "at least one speaker is required"));
                }
                let n = c.start_counts.len();
                let speaker_weights =
                    distribution("speakers.weight", &c.speakers.iter().map(|s| s.weight).collect::<Vec<_>>())?;
                let speaker_messages = c
                    .speakers
                    .iter()
                    .enumerate()
                    .map(|(r, s)| distribution(&format!("speakers[{r}].message_probabilities"), &s.message_probabilities))
                    .collect::<Result<Vec<_>>>()?;
                let scene_weights = distribution("scene_weights", c.scene_weights.as_deref().unwrap_or(&[1.0]))?;
                let payoff = match &c.payoff {
                    Some(nested) => PayoffTable::from_nested(nested)?,
                    None => PayoffTable::uniform(n, scene_weights.len(), speaker_weights.len()),
                };
                Model::Fundamental(FundamentalScenario::general(
                    GeneralSettings {
                        speaker_weights,
                        speaker_messages,
                        scene_weights,
                        payoff,
                    },
                    state("start_counts", &c.start_counts, c.alpha)?,
                    c.forgetting,
                )?)
            }
            ScenarioConfig::Sequential(c) => {
                let relations = c
                    .relations
                    .iter()
                    .enumerate()
                    .map(|(g, r)| {
                        Ok(Relation::new(r.name.clone(), state(&format!("relations[{g}].start_counts"), &r.start_counts, r.alpha)?)
                            .with_policy(r.forgetting))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let seq = GrSequence::new(relations, distribution("message_probabilities", &c.message_probabilities)?)?;
                Model::Sequential(match &c.message_names {
                    Some(names) => seq.with_message_names(names.clone())?,
                    None => seq,
                })
            }
            ScenarioConfig::Similarity(c) => {
                let verbs = c
                    .verbs
                    .iter()
                    .enumerate()
                    .map(|(v, verb)| {
                        Ok(Verb {
                            name: verb.name.clone(),
                            roles: verb.roles.clone(),
                            role_probabilities: distribution(&format!("verbs[{v}].role_probabilities"), &verb.role_probabilities)?,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                let n_verbs = verbs.len();
                let lexicon = Lexicon::new(
                    verbs,
                    distribution("verb_frequencies", &c.verb_frequencies)?,
                    c.relations.clone(),
                    c.alphas.clone().unwrap_or_else(|| vec![0.0; c.relations.len()]),
                    c.start_count,
                    c.forgetting,
                )?;
                let matrix = match &c.gamma {
                    GammaConfig::Uniform(g) => SimilarityMatrix::uniform(n_verbs, *g, c.decay)?,
                    GammaConfig::Matrix(m) => SimilarityMatrix::new(m.clone(), c.decay)?,
                };
                let matrix = match &c.alignment {
                    Some(a) => matrix.with_alignment(a.clone()),
                    None => matrix,
                };
                Model::Similarity(SimilarityModel::new(lexicon, matrix)?)
            }
            ScenarioConfig::Forms(c) => {
                let form_probabilities = c
                    .form_probabilities
                    .iter()
                    .enumerate()
                    .map(|(i, p)| distribution(&format!("form_probabilities[{i}]"), p))
                    .collect::<Result<Vec<_>>>()?;
                let inventory = FormInventory::new(c.forms.clone(), form_probabilities, state("start_counts", &c.start_counts, c.alpha)?)?;
                Model::Forms(FormsModel::new(
                    inventory,
                    distribution("message_probabilities", &c.message_probabilities)?,
                    c.forgetting,
                )?)
            }
            ScenarioConfig::FormCompetition(c) => {
                let starts = c.start_counts.clone().unwrap_or_else(|| vec![1.0, 1.0, 0.0]);
                let (s, o, a) = match starts.as_slice() {
                    [s, o] => (*s, *o, 0.0),
                    [s, o, a] => (*s, *o, *a),
                    _ => {
                        return Err(Error::config(
                            "start_counts",
                            format!("expected 2 or 3 start counts, found {}", starts.len()),
                        ))
                    }
                };
                Model::FormCompetition(CompetitionState::new(c.p_subj, s, o, a)?)
            }
            ScenarioConfig::Phased(c) => {
                crate::recursion::check_references(&c.words, &c.phases)?;
                return Ok(Scenario::Phased(PhasedScenario {
                    words: c.words.clone(),
                    phases: c.phases.clone(),
                }));
            }
        };
        Ok(Scenario::Model(model))
    }
}

/// Parses and validates a scenario from JSON text.
pub fn parse_config_str(text: &str) -> Result<LoadedConfig> {
    let mut value: Value = serde_json::from_str(text)?;
    let object = value
        .as_object_mut()
        .ok_or_else(|| Error::config("model", "configuration must be a JSON object"))?;
    let run = match object.remove("run") {
        Some(run) => serde_json::from_value(run).map_err(|e| Error::config("run", e.to_string()))?,
        None => RunSettings::default(),
    };
    match object.get("model") {
        Some(Value::String(name)) if MODEL_NAMES.contains(&name.as_str()) => {}
        Some(other) => {
            return Err(Error::config(
                "model",
                format!("unknown model {other}; expected one of {}", MODEL_NAMES.join(", ")),
            ))
        }
        None => return Err(Error::config("model", "missing model name")),
    }
    let config: ScenarioConfig = serde_json::from_value(value)?;
    let scenario = config.build()?;
    Ok(LoadedConfig {
        name: config.name().to_string(),
        scenario,
        run,
        hash: hex_sha256(text.as_bytes()),
    })
}

pub fn parse_config(path: impl AsRef<Path>) -> Result<LoadedConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(&text)
}

pub fn hex_sha256(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

macro_rules! dispatch {
    ($self:expr, $m:ident => $e:expr) => {
        match $self {
            Model::Fundamental($m) => $e,
            Model::Sequential($m) => $e,
            Model::Similarity($m) => $e,
            Model::Forms($m) => $e,
            Model::FormCompetition($m) => $e,
        }
    };
}

impl LanguageModel for Model {
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        dispatch!(self, m => m.step(k, source))
    }

    fn cell_labels(&self) -> Vec<String> {
        dispatch!(self, m => m.cell_labels())
    }

    fn probabilities(&self) -> Vec<f64> {
        dispatch!(self, m => m.probabilities())
    }

    fn counts(&self) -> Vec<f64> {
        dispatch!(self, m => m.counts())
    }

    fn verdict(&self, probabilities: &[f64], epsilon: f64) -> Verdict {
        dispatch!(self, m => m.verdict(probabilities, epsilon))
    }

    fn window_event(&self, utterance: &Utterance) -> Option<bool> {
        dispatch!(self, m => m.window_event(utterance))
    }

    fn hearer_weights(&self) -> Option<Vec<f64>> {
        dispatch!(self, m => m.hearer_weights())
    }

    fn hearer_priors(&self) -> Option<Vec<f64>> {
        dispatch!(self, m => m.hearer_priors())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> String {
        parse_config_str(text).unwrap_err().to_string()
    }

    #[test]
    fn fundamental_parses() {
        let c = parse_config_str(
            r#"{"model": "fundamental", "message_probabilities": [0.6, 0.3, 0.1], "start_counts": [1, 1, 1]}"#,
        )
        .unwrap();
        let Scenario::Model(Model::Fundamental(s)) = c.scenario else {
            panic!("wrong scenario");
        };
        assert_eq!(s.message_probabilities.probabilities(), &[0.6, 0.3, 0.1]);
        assert_eq!(s.state.alpha(), 0.0);
        assert_eq!(s.state.counts(), &[1.0, 1.0, 1.0]);
        assert_eq!(c.hash.len(), 64);
    }

    #[test]
    fn violations_name_the_field() {
        assert!(err(r#"{"model": "fundamental", "message_probabilities": [0.5, 0.5], "start_counts": [0, 1]}"#)
            .contains("start_counts[0]"));
        assert!(err(r#"{"model": "fundamental", "message_probabilities": [0.5, 0.4], "start_counts": [1, 1]}"#)
            .contains("message_probabilities"));
        assert!(err(r#"{"model": "banana"}"#).contains("model"));
        assert!(err(
            r#"{"model": "fundamental", "message_probabilities": [1], "start_counts": [1], "forgetting": {"nu": 1.5}}"#
        )
        .contains("forgetting.nu"));
        assert!(err(r#"{"model": "fundamental", "message_probabilities": [1]}"#).contains("start_counts"));
        assert!(err(
            r#"{"model": "fundamental", "message_probabilities": [1], "start_counts": [1], "colour": 1}"#
        )
        .contains("colour"));
    }

    #[test]
    fn gamma_bounds_checked() {
        let text = r#"{"model": "similarity", "verbs": [
            {"name": "a", "roles": ["x"], "role_probabilities": [1]},
            {"name": "b", "roles": ["x"], "role_probabilities": [1]}],
            "verb_frequencies": [0.5, 0.5], "relations": ["subj"], "gamma": 1.5}"#;
        assert!(err(text).contains("gamma"));
    }

    #[test]
    fn run_settings_are_separate() {
        let c = parse_config_str(
            r#"{"model": "form_competition", "p_subj": 0.25, "run": {"histories": 5, "utterances": 100}}"#,
        )
        .unwrap();
        assert_eq!(c.run.histories, Some(5));
        assert_eq!(c.name, "form_competition");
    }
}
