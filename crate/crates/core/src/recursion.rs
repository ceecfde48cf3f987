//! Known signs: words, plus phrases whose production rule has converged.
//! A phrase becomes available as a constituent only after the phase that
//! produced it converged.

use serde::{Deserialize, Serialize};

use crate::engine::{derive_stream, ForgettingPolicy, LearningState, MessageDistribution};
use crate::error::{Error, Result};
use crate::fundamental::FundamentalScenario;
use crate::history::{drive, single_rule_verdict, LanguageModel, Verdict};

/// Convergence gate for admitting a phrase to the registry.
pub const PHASE_EPSILON: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sign {
    pub id: String,
    /// Empty for words.
    pub constituents: Vec<String>,
    /// Interpretation of the sign, e.g. `walker(cat)`.
    pub meaning: String,
    /// Phase that produced the sign; `None` for words.
    pub converged_from: Option<String>,
    pub depth: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SignRegistry {
    signs: Vec<Sign>,
}

/// `[a b]` for constituents `a`, `b`.
pub fn phrase_id(constituents: &[String]) -> String {
    format!("[{}]", constituents.join(" "))
}

impl SignRegistry {
    pub fn with_words<S: AsRef<str>>(words: &[S]) -> Self {
        let mut registry = Self::default();
        for w in words {
            if !registry.contains(w.as_ref()) {
                registry.signs.push(Sign {
                    id: w.as_ref().to_string(),
                    constituents: Vec::new(),
                    meaning: w.as_ref().to_string(),
                    converged_from: None,
                    depth: 0,
                });
            }
        }
        registry
    }

    pub fn signs(&self) -> &[Sign] {
        &self.signs
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn get(&self, id: &str) -> Option<&Sign> {
        self.signs.iter().find(|s| s.id == id)
    }

    pub fn contains(&self, id: &str) -> bool {
        self.get(id).is_some()
    }

    /// Adds the phrase a converged phase produced. Registering the same
    /// phrase again leaves the registry unchanged.
    pub fn register_converged(&mut self, result: &PhaseResult) -> Result<()> {
        let Some(meaning) = result.converged_meaning() else {
            return Err(Error::Usage(format!(
                "phase `{}` did not converge (max p = {}); `{}` cannot become a known sign",
                result.phase_id,
                result.final_probabilities.iter().cloned().fold(0.0, f64::max),
                result.sign_id
            )));
        };
        if self.contains(&result.sign_id) {
            return Ok(());
        }
        let mut depth = 0;
        for c in &result.constituents {
            let sign = self
                .get(c)
                .ok_or_else(|| Error::Usage(format!("constituent `{c}` is not a known sign")))?;
            depth = depth.max(sign.depth);
        }
        self.signs.push(Sign {
            id: result.sign_id.clone(),
            constituents: result.constituents.clone(),
            meaning: meaning.to_string(),
            converged_from: Some(result.phase_id.clone()),
            depth: depth + 1,
        });
        Ok(())
    }
}

/// A fundamental run deciding how two known signs combine.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Phase {
    pub id: String,
    pub constituents: Vec<String>,
    /// Candidate meanings of the combination; one message each.
    pub meanings: Vec<String>,
    pub message_probabilities: Vec<f64>,
    pub start_counts: Vec<f64>,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub forgetting: ForgettingPolicy,
    pub utterances: u64,
}

impl Phase {
    pub fn sign_id(&self) -> String {
        phrase_id(&self.constituents)
    }

    fn scenario(&self, field: &str) -> Result<FundamentalScenario> {
        if self.meanings.len() != self.message_probabilities.len() {
            return Err(Error::config(
                format!("{field}.meanings"),
                format!(
                    "{} meanings for {} message probabilities",
                    self.meanings.len(),
                    self.message_probabilities.len()
                ),
            ));
        }
        if self.utterances == 0 {
            return Err(Error::config(format!("{field}.utterances"), "budget must be positive"));
        }
        FundamentalScenario::new(
            MessageDistribution::validated(
                &format!("{field}.message_probabilities"),
                self.message_probabilities.clone(),
            )?,
            LearningState::validated(&format!("{field}.start_counts"), self.start_counts.clone(), self.alpha)?,
            self.forgetting,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseResult {
    pub phase_id: String,
    pub sign_id: String,
    pub constituents: Vec<String>,
    pub meanings: Vec<String>,
    pub verdict: Verdict,
    pub final_probabilities: Vec<f64>,
    pub final_counts: Vec<f64>,
}

impl PhaseResult {
    pub fn converged_meaning(&self) -> Option<&str> {
        self.verdict.winner().map(|i| self.meanings[i].as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhasedOutcome {
    pub results: Vec<PhaseResult>,
    pub registry: SignRegistry,
    /// The phase that failed to converge, if any; later phases did not run.
    pub blocked_at: Option<String>,
}

impl PhasedOutcome {
    pub fn max_depth(&self) -> usize {
        self.registry.signs().iter().map(|s| s.depth).max().unwrap_or(0)
    }
}

/// Rejects phases that reference a sign neither in `words` nor produced by
/// an earlier phase.
pub fn check_references(words: &[String], phases: &[Phase]) -> Result<()> {
    let mut available: Vec<String> = words.to_vec();
    for (t, phase) in phases.iter().enumerate() {
        if phase.constituents.len() < 2 {
            return Err(Error::config(
                format!("phases[{t}].constituents"),
                "a phrase combines at least two signs",
            ));
        }
        for c in &phase.constituents {
            if !available.contains(c) {
                return Err(Error::config(
                    format!("phases[{t}].constituents"),
                    format!("`{c}` is not a word or a phrase from an earlier phase"),
                ));
            }
        }
        available.push(phase.sign_id());
    }
    Ok(())
}

/// Runs each phase on its own stream `derive_stream(master_seed, t)`. A phase
/// that does not converge blocks everything after it.
pub fn run_phased_scenario(words: &[String], phases: &[Phase], master_seed: u64) -> Result<PhasedOutcome> {
    check_references(words, phases)?;
    let scenarios = phases
        .iter()
        .enumerate()
        .map(|(t, p)| p.scenario(&format!("phases[{t}]")))
        .collect::<Result<Vec<_>>>()?;
    let mut registry = SignRegistry::with_words(words);
    let mut results = Vec::with_capacity(phases.len());
    for (t, (phase, mut scenario)) in phases.iter().zip(scenarios).enumerate() {
        let mut source = derive_stream(master_seed, t as u64);
        drive(&mut scenario, &mut source, phase.utterances, &[], |_, _| {}, |_, _| {});
        let final_probabilities = scenario.probabilities();
        let result = PhaseResult {
            phase_id: phase.id.clone(),
            sign_id: phase.sign_id(),
            constituents: phase.constituents.clone(),
            meanings: phase.meanings.clone(),
            verdict: single_rule_verdict(&final_probabilities, PHASE_EPSILON),
            final_probabilities,
            final_counts: scenario.counts(),
        };
        let converged = result.verdict.is_converged();
        if converged {
            registry.register_converged(&result)?;
        }
        results.push(result);
        if !converged {
            return Ok(PhasedOutcome {
                results,
                registry,
                blocked_at: Some(phase.id.clone()),
            });
        }
    }
    Ok(PhasedOutcome {
        results,
        registry,
        blocked_at: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(p: &[f64], constituents: &[&str]) -> PhaseResult {
        PhaseResult {
            phase_id: "p1".into(),
            sign_id: phrase_id(&constituents.iter().map(|s| s.to_string()).collect::<Vec<_>>()),
            constituents: constituents.iter().map(|s| s.to_string()).collect(),
            meanings: (0..p.len()).map(|i| format!("m{i}")).collect(),
            verdict: single_rule_verdict(p, PHASE_EPSILON),
            final_probabilities: p.to_vec(),
            final_counts: p.to_vec(),
        }
    }

    #[test]
    fn converged_phrase_registers_once() {
        let mut registry = SignRegistry::with_words(&["grey", "cat"]);
        let r = result(&[0.995, 0.005], &["grey", "cat"]);
        registry.register_converged(&r).unwrap();
        let sign = registry.get("[grey cat]").unwrap();
        assert_eq!(sign.meaning, "m0");
        assert_eq!(sign.depth, 1);
        let snapshot = registry.clone();
        registry.register_converged(&r).unwrap();
        assert_eq!(registry, snapshot);
    }

    #[test]
    fn unconverged_phrase_rejected() {
        let mut registry = SignRegistry::with_words(&["grey", "cat"]);
        let err = registry.register_converged(&result(&[0.6, 0.4], &["grey", "cat"])).unwrap_err();
        assert!(matches!(err, Error::Usage(_)));
        assert_eq!(registry.len(), 2);
    }

    #[test]
    fn forward_reference_rejected() {
        let words: Vec<String> = ["cat", "drink", "milk"].map(String::from).to_vec();
        let phase = |id: &str, c: &[&str]| Phase {
            id: id.into(),
            constituents: c.iter().map(|s| s.to_string()).collect(),
            meanings: vec!["a".into(), "b".into()],
            message_probabilities: vec![0.9, 0.1],
            start_counts: vec![1.0, 1.0],
            alpha: 0.0,
            forgetting: ForgettingPolicy::none(),
            utterances: 10,
        };
        let backwards = [phase("vp", &["cat", "[drink milk]"]), phase("obj", &["drink", "milk"])];
        assert!(matches!(check_references(&words, &backwards), Err(Error::Config { .. })));
        let ordered = [phase("obj", &["drink", "milk"]), phase("vp", &["cat", "[drink milk]"])];
        assert!(check_references(&words, &ordered).is_ok());
    }
}
