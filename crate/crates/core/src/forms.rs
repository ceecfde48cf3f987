//! Word-order forms for a grammatical relation: each (message, form) pair has
//! its own count, and fixed exogenous biases p(f_j | m_i) pick the form.

use crate::engine::{draw_categorical, DrawSource, ForgettingPolicy, LearningState, MessageDistribution};
use crate::error::{Error, Result};
use crate::fundamental::FundamentalScenario;
use crate::history::{LanguageModel, Utterance};

/// Forms with their fixed selection biases and the pair counts c[message, form].
#[derive(Debug, Clone, PartialEq)]
pub struct FormInventory {
    pub forms: Vec<String>,
    /// p(f_j | m_i), one distribution per message.
    pub form_probabilities: Vec<MessageDistribution>,
    /// Message-major: pair `(i, j)` lives at `i * J + j`.
    pub state: LearningState,
}

impl FormInventory {
    pub fn new(
        forms: Vec<String>,
        form_probabilities: Vec<MessageDistribution>,
        state: LearningState,
    ) -> Result<Self> {
        let j = forms.len();
        if j == 0 {
            return Err(Error::config("forms", "at least one form is required"));
        }
        if let Some((i, d)) = form_probabilities.iter().enumerate().find(|(_, d)| d.len() != j) {
            return Err(Error::config(
                format!("form_probabilities[{i}]"),
                format!("{} probabilities for {j} forms", d.len()),
            ));
        }
        if state.len() != form_probabilities.len() * j {
            return Err(Error::config(
                "start_counts",
                format!(
                    "{} start counts for {} (message, form) pairs",
                    state.len(),
                    form_probabilities.len() * j
                ),
            ));
        }
        Ok(Self {
            forms,
            form_probabilities,
            state,
        })
    }

    pub fn n_messages(&self) -> usize {
        self.form_probabilities.len()
    }

    pub fn n_forms(&self) -> usize {
        self.forms.len()
    }

    pub fn pair_index(&self, message: usize, form: usize) -> usize {
        message * self.n_forms() + form
    }

    pub fn count(&self, message: usize, form: usize) -> f64 {
        self.state.counts()[self.pair_index(message, form)]
    }

    /// P(f_j | m_i) P(m_i) in pair order.
    pub fn pair_probabilities(&self, message_probabilities: &MessageDistribution) -> Result<MessageDistribution> {
        if message_probabilities.len() != self.n_messages() {
            return Err(Error::config(
                "message_probabilities",
                format!(
                    "{} message probabilities for {} messages",
                    message_probabilities.len(),
                    self.n_messages()
                ),
            ));
        }
        let product = self
            .form_probabilities
            .iter()
            .zip(message_probabilities.probabilities())
            .flat_map(|(forms, &pm)| forms.probabilities().iter().map(move |&pf| pf * pm))
            .collect();
        MessageDistribution::validated("form_probabilities", product)
    }
}

/// A fundamental scenario over I·J pseudo-messages `n(i, j) = i·J + j` with
/// probabilities P(f_j|m_i)P(m_i), counts c_ij and the same α.
pub fn build_product_model(
    inventory: &FormInventory,
    message_probabilities: &MessageDistribution,
    policy: ForgettingPolicy,
) -> Result<FundamentalScenario> {
    FundamentalScenario::new(
        inventory.pair_probabilities(message_probabilities)?,
        inventory.state.clone(),
        policy,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct FormsModel {
    pub inventory: FormInventory,
    pub message_probabilities: MessageDistribution,
    pub policy: ForgettingPolicy,
    pairs: MessageDistribution,
}

impl FormsModel {
    pub fn new(
        inventory: FormInventory,
        message_probabilities: MessageDistribution,
        policy: ForgettingPolicy,
    ) -> Result<Self> {
        policy.validate("forgetting")?;
        let pairs = inventory.pair_probabilities(&message_probabilities)?;
        Ok(Self {
            inventory,
            message_probabilities,
            policy,
            pairs,
        })
    }

    /// One uniform picks the (message, form) pair; a second decides success
    /// with probability c_ij / (Σ c + α).
    pub fn step_forms<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        let n = draw_categorical(source, &self.pairs);
        let j = self.inventory.n_forms();
        let (message, form) = (n / j, n % j);
        let p = self.inventory.state.probability(n);
        let mut u = if source.uniform() < p {
            self.inventory.state.reinforce(n, &self.policy, 1.0);
            Utterance::success(k, message, 1.0)
        } else {
            self.inventory.state.apply_failure(&self.policy);
            Utterance::failure(k, message)
        };
        u.form = Some(form);
        u
    }

    /// p(u^{f_j} | m_i): the pair's HRE factor.
    pub fn pair_probability(&self, message: usize, form: usize) -> f64 {
        self.inventory.state.probability(self.inventory.pair_index(message, form))
    }
}

impl LanguageModel for FormsModel {
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        self.step_forms(k, source)
    }

    fn cell_labels(&self) -> Vec<String> {
        (1..=self.inventory.n_messages())
            .flat_map(|i| self.inventory.forms.iter().map(move |f| format!("m{i}:{f}")))
            .collect()
    }

    fn probabilities(&self) -> Vec<f64> {
        self.inventory.state.probabilities()
    }

    fn counts(&self) -> Vec<f64> {
        self.inventory.state.counts().to_vec()
    }

    fn hearer_weights(&self) -> Option<Vec<f64>> {
        Some(self.counts())
    }

    fn hearer_priors(&self) -> Option<Vec<f64>> {
        Some(self.pairs.probabilities().to_vec())
    }
}
