//! The basic production algorithm (select a message, try a phrasal sign,
//! update), its forgetting variant, and the General Model with several
//! speakers, scenes and payoffs.

use crate::engine::{
    choose, draw_categorical, DrawSource, ForgettingPolicy, LearningState, MessageDistribution,
};
use crate::error::{Error, Result};
use crate::history::{LanguageModel, Utterance};

/// Payoff π[message, scene, speaker], all entries positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffTable {
    n_messages: usize,
    n_scenes: usize,
    n_speakers: usize,
    values: Vec<f64>,
}

impl PayoffTable {
    pub fn uniform(n_messages: usize, n_scenes: usize, n_speakers: usize) -> Self {
        Self {
            n_messages,
            n_scenes,
            n_speakers,
            values: vec![1.0; n_messages * n_scenes * n_speakers],
        }
    }

    /// `nested[message][scene][speaker]`.
    pub fn from_nested(nested: &[Vec<Vec<f64>>]) -> Result<Self> {
        let n_messages = nested.len();
        let n_scenes = nested.first().map_or(0, Vec::len);
        let n_speakers = nested
            .first()
            .and_then(|s| s.first())
            .map_or(0, Vec::len);
        let mut values = Vec::with_capacity(n_messages * n_scenes * n_speakers);
        for (i, scenes) in nested.iter().enumerate() {
            if scenes.len() != n_scenes {
                return Err(Error::config(
                    format!("payoff[{i}]"),
                    format!("expected {n_scenes} scenes, found {}", scenes.len()),
                ));
            }
            for (s, speakers) in scenes.iter().enumerate() {
                if speakers.len() != n_speakers {
                    return Err(Error::config(
                        format!("payoff[{i}][{s}]"),
                        format!("expected {n_speakers} speakers, found {}", speakers.len()),
                    ));
                }
                for (r, &v) in speakers.iter().enumerate() {
                    if !(v.is_finite() && v > 0.0) {
                        return Err(Error::config(
                            format!("payoff[{i}][{s}][{r}]"),
                            format!("payoff {v} must be positive"),
                        ));
                    }
                    values.push(v);
                }
            }
        }
        Ok(Self {
            n_messages,
            n_scenes,
            n_speakers,
            values,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n_messages, self.n_scenes, self.n_speakers)
    }

    #[inline]
    pub fn get(&self, message: usize, scene: usize, speaker: usize) -> f64 {
        self.values[(message * self.n_scenes + scene) * self.n_speakers + speaker]
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v * factor).collect(),
            ..self.clone()
        }
    }
}

/// Speaker and scene diversity: a scene and a speaker are drawn before each
/// message, and a success pays π[message, scene, speaker] instead of 1.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralSettings {
    pub speaker_weights: MessageDistribution,
    /// p(m_i | speaker), one distribution per speaker.
    pub speaker_messages: Vec<MessageDistribution>,
    pub scene_weights: MessageDistribution,
    pub payoff: PayoffTable,
}

impl GeneralSettings {
    fn validate(&self, n_messages: usize) -> Result<()> {
        if self.speaker_messages.len() != self.speaker_weights.len() {
            return Err(Error::config(
                "speakers",
                format!(
                    "{} speaker weights but {} speaker message distributions",
                    self.speaker_weights.len(),
                    self.speaker_messages.len()
                ),
            ));
        }
        if let Some((r, d)) = self
            .speaker_messages
            .iter()
            .enumerate()
            .find(|(_, d)| d.len() != n_messages)
        {
            return Err(Error::config(
                format!("speakers[{r}].message_probabilities"),
                format!("expected {n_messages} messages, found {}", d.len()),
            ));
        }
        let expected = (n_messages, self.scene_weights.len(), self.speaker_weights.len());
        if self.payoff.dims() != expected {
            return Err(Error::config(
                "payoff",
                format!(
                    "table has shape {:?}, expected (messages, scenes, speakers) = {expected:?}",
                    self.payoff.dims()
                ),
            ));
        }
        Ok(())
    }

    /// Σ_r w(r) p(m | r): the message distribution averaged over speakers.
    pub fn mixture(&self) -> Vec<f64> {
        let n = self.speaker_messages.first().map_or(0, MessageDistribution::len);
        (0..n)
            .map(|i| {
                self.speaker_weights
                    .probabilities()
                    .iter()
                    .zip(&self.speaker_messages)
                    .map(|(w, d)| w * d.get(i))
                    .sum()
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FundamentalScenario {
    /// For the General Model this is the speaker-averaged distribution; it is
    /// not used for drawing.
    pub message_probabilities: MessageDistribution,
    pub state: LearningState,
    pub policy: ForgettingPolicy,
    general: Option<GeneralSettings>,
}

impl FundamentalScenario {
    pub fn new(
        message_probabilities: MessageDistribution,
        state: LearningState,
        policy: ForgettingPolicy,
    ) -> Result<Self> {
        if message_probabilities.len() != state.len() {
            return Err(Error::config(
                "start_counts",
                format!(
                    "{} start counts for {} messages",
                    state.len(),
                    message_probabilities.len()
                ),
            ));
        }
        policy.validate("forgetting")?;
        Ok(Self {
            message_probabilities,
            state,
            policy,
            general: None,
        })
    }

    pub fn general(
        settings: GeneralSettings,
        state: LearningState,
        policy: ForgettingPolicy,
    ) -> Result<Self> {
        settings.validate(state.len())?;
        policy.validate("forgetting")?;
        let mixture = settings.mixture();
        let message_probabilities = MessageDistribution::validated("speakers", mixture)?;
        Ok(Self {
            message_probabilities,
            state,
            policy,
            general: Some(settings),
        })
    }

    pub fn general_settings(&self) -> Option<&GeneralSettings> {
        self.general.as_ref()
    }

    pub fn n_messages(&self) -> usize {
        self.state.len()
    }

    /// Select a message, try the phrasal sign, update.
    pub fn step_fundamental<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        let i = draw_categorical(source, &self.message_probabilities);
        self.attempt(k, i, 1.0, source)
    }

    /// Draws scene, then speaker, then a message from that speaker's
    /// distribution; a success adds π[message, scene, speaker].
    pub fn step_general<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Result<Utterance> {
        let settings = self
            .general
            .as_ref()
            .ok_or_else(|| Error::Usage("scenario has no speakers, scenes or payoffs".into()))?;
        let scene = choose(source, &settings.scene_weights);
        let speaker = choose(source, &settings.speaker_weights);
        let i = draw_categorical(source, &settings.speaker_messages[speaker]);
        let payoff = settings.payoff.get(i, scene, speaker);
        let mut u = self.attempt(k, i, payoff, source);
        u.scene = Some(scene);
        u.speaker = Some(speaker);
        Ok(u)
    }

    #[inline]
    fn attempt<D: DrawSource>(&mut self, k: u64, i: usize, payoff: f64, source: &mut D) -> Utterance {
        let p = self.state.probability(i);
        if source.uniform() < p {
            self.state.reinforce(i, &self.policy, payoff);
            Utterance::success(k, i, payoff)
        } else {
            self.state.apply_failure(&self.policy);
            Utterance::failure(k, i)
        }
    }

    /// Σ_{s,r} w(s) w(r) p(m_i|s,r) π_i(s,r). Ranks messages by what the
    /// General Model is expected to converge to; plain scenarios have π ≡ 1
    /// and a single scene and speaker.
    pub fn expected_payoff(&self, message_id: usize) -> Result<f64> {
        if message_id >= self.n_messages() {
            return Err(Error::Usage(format!(
                "message id {message_id} out of range for {} messages",
                self.n_messages()
            )));
        }
        let Some(g) = &self.general else {
            return Ok(self.message_probabilities.get(message_id));
        };
        let mut total = 0.0;
        for (s, ws) in g.scene_weights.probabilities().iter().enumerate() {
            for (r, wr) in g.speaker_weights.probabilities().iter().enumerate() {
                total += ws * wr * g.speaker_messages[r].get(message_id) * g.payoff.get(message_id, s, r);
            }
        }
        Ok(total)
    }
}

impl LanguageModel for FundamentalScenario {
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        if self.general.is_some() {
            self.step_general(k, source).expect("general settings present")
        } else {
            self.step_fundamental(k, source)
        }
    }

    fn cell_labels(&self) -> Vec<String> {
        (1..=self.n_messages()).map(|i| format!("m{i}")).collect()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.state.probabilities()
    }

    fn counts(&self) -> Vec<f64> {
        self.state.counts().to_vec()
    }

    fn hearer_weights(&self) -> Option<Vec<f64>> {
        Some(self.state.counts().to_vec())
    }

    fn hearer_priors(&self) -> Option<Vec<f64>> {
        Some(self.message_probabilities.probabilities().to_vec())
    }
}
