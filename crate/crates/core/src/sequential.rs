//! Ordered grammatical relations: a message tries GR1 (subject) first, then
//! GR2 (object), and so on, each relation with its own learning state.

use crate::engine::{draw_categorical, DrawSource, ForgettingPolicy, LearningState, MessageDistribution};
use crate::error::{Error, Result};
use crate::history::{all_cells_verdict, LanguageModel, Utterance, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct Relation {
    pub name: String,
    pub state: LearningState,
    pub policy: ForgettingPolicy,
}

impl Relation {
    pub fn new(name: impl Into<String>, state: LearningState) -> Self {
        Self {
            name: name.into(),
            state,
            policy: ForgettingPolicy::none(),
        }
    }

    pub fn with_policy(mut self, policy: ForgettingPolicy) -> Self {
        self.policy = policy;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrSequence {
    pub relations: Vec<Relation>,
    pub message_probabilities: MessageDistribution,
    message_names: Vec<String>,
}

impl GrSequence {
    pub fn new(relations: Vec<Relation>, message_probabilities: MessageDistribution) -> Result<Self> {
        if relations.is_empty() {
            return Err(Error::config("relations", "at least one grammatical relation is required"));
        }
        for (g, r) in relations.iter().enumerate() {
            if r.state.len() != message_probabilities.len() {
                return Err(Error::config(
                    format!("relations[{g}].start_counts"),
                    format!(
                        "{} start counts for {} messages",
                        r.state.len(),
                        message_probabilities.len()
                    ),
                ));
            }
            r.policy.validate(&format!("relations[{g}].forgetting"))?;
        }
        let message_names = (1..=message_probabilities.len()).map(|i| format!("m{i}")).collect();
        Ok(Self {
            relations,
            message_probabilities,
            message_names,
        })
    }

    pub fn with_message_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.message_probabilities.len() {
            return Err(Error::config(
                "message_names",
                format!("{} names for {} messages", names.len(), self.message_probabilities.len()),
            ));
        }
        self.message_names = names;
        Ok(self)
    }

    pub fn n_messages(&self) -> usize {
        self.message_probabilities.len()
    }

    /// Draws a message, then tries each relation in order with a fresh
    /// uniform. The first success reinforces that relation only; if none
    /// fires the utterance is `Exhausted` and no state changes.
    pub fn step_sequential<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        let i = draw_categorical(source, &self.message_probabilities);
        for (g, relation) in self.relations.iter_mut().enumerate() {
            if source.uniform() < relation.state.probability(i) {
                relation.state.reinforce(i, &relation.policy, 1.0);
                let mut u = Utterance::success(k, i, 1.0);
                u.gr = Some(g);
                return u;
            }
        }
        for relation in &mut self.relations {
            relation.state.apply_failure(&relation.policy);
        }
        Utterance::exhausted(k, i)
    }

    /// Probability of expressing message `i` with relation `g`.
    pub fn cell(&self, g: usize, i: usize) -> f64 {
        self.relations[g].state.probability(i)
    }
}

impl LanguageModel for GrSequence {
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        self.step_sequential(k, source)
    }

    /// Relation-major: `GR:message`.
    fn cell_labels(&self) -> Vec<String> {
        self.relations
            .iter()
            .flat_map(|r| self.message_names.iter().map(move |m| format!("{}:{m}", r.name)))
            .collect()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.relations
            .iter()
            .flat_map(|r| r.state.probabilities())
            .collect()
    }

    fn counts(&self) -> Vec<f64> {
        self.relations
            .iter()
            .flat_map(|r| r.state.counts().iter().copied())
            .collect()
    }

    fn verdict(&self, probabilities: &[f64], epsilon: f64) -> Verdict {
        all_cells_verdict(probabilities, epsilon)
    }
}
