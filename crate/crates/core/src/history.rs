//! Utterance records, the model interface shared by every production
//! algorithm, and the single-history driver.

use serde::{Deserialize, Serialize};

use crate::engine::DrawSource;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure,
    /// Every grammatical relation was tried and none fired.
    Exhausted,
}

/// One entry of a language history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Utterance {
    /// 1-based utterance index.
    pub k: u64,
    pub message_id: usize,
    pub outcome: Outcome,
    /// Amount added to the winning count; 0 for failures.
    pub payoff: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speaker: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gr: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub form: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verb: Option<usize>,
}

impl Utterance {
    pub fn success(k: u64, message_id: usize, payoff: f64) -> Self {
        Self {
            k,
            message_id,
            outcome: Outcome::Success,
            payoff,
            speaker: None,
            scene: None,
            gr: None,
            form: None,
            verb: None,
        }
    }

    pub fn failure(k: u64, message_id: usize) -> Self {
        Self {
            outcome: Outcome::Failure,
            payoff: 0.0,
            ..Self::success(k, message_id, 0.0)
        }
    }

    pub fn exhausted(k: u64, message_id: usize) -> Self {
        Self {
            outcome: Outcome::Exhausted,
            ..Self::failure(k, message_id)
        }
    }

    pub fn is_success(&self) -> bool {
        self.outcome == Outcome::Success
    }
}

/// Final-checkpoint classification of a history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Carries the winning cell id.
    Converged(usize),
    Unresolved,
}

impl Verdict {
    pub fn is_converged(&self) -> bool {
        matches!(self, Verdict::Converged(_))
    }

    pub fn winner(&self) -> Option<usize> {
        match self {
            Verdict::Converged(i) => Some(*i),
            Verdict::Unresolved => None,
        }
    }
}

pub fn validate_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(Error::config(
            "epsilon",
            format!("convergence threshold {epsilon} is outside (0, 0.5)"),
        ))
    }
}

/// One HRE rule: converged to `i` iff `p_i ≥ 1−ε` and every other `p_j ≤ ε`.
pub fn single_rule_verdict(probabilities: &[f64], epsilon: f64) -> Verdict {
    let Some(winner) = argmax(probabilities) else {
        return Verdict::Unresolved;
    };
    let settled = probabilities
        .iter()
        .enumerate()
        .all(|(j, &p)| if j == winner { p >= 1.0 - epsilon } else { p <= epsilon });
    if settled {
        Verdict::Converged(winner)
    } else {
        Verdict::Unresolved
    }
}

/// Several HRE rules: converged iff every cell is within ε of 0 or 1. The
/// reported winner is the first cell at the maximum.
pub fn all_cells_verdict(probabilities: &[f64], epsilon: f64) -> Verdict {
    let settled = probabilities
        .iter()
        .all(|&p| p <= epsilon || p >= 1.0 - epsilon);
    match argmax(probabilities) {
        Some(winner) if settled => Verdict::Converged(winner),
        _ => Verdict::Unresolved,
    }
}

fn argmax(values: &[f64]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// A production algorithm together with its learning state.
///
/// "Cells" are the probabilities a model exposes for trajectories and
/// convergence checks: one per message for single-rule models, one per
/// (relation, message) pair for the sequential and similarity models.
pub trait LanguageModel {
    /// Produces utterance `k` and updates the state.
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance;

    fn cell_labels(&self) -> Vec<String>;

    fn probabilities(&self) -> Vec<f64>;

    /// Raw propensity counts, in a model-specific layout.
    fn counts(&self) -> Vec<f64>;

    fn verdict(&self, probabilities: &[f64], epsilon: f64) -> Verdict {
        single_rule_verdict(probabilities, epsilon)
    }

    /// Whether an utterance counts toward the final-window share statistic,
    /// and if so whether it is a hit. Models without such a statistic return
    /// `None` for everything.
    fn window_event(&self, _utterance: &Utterance) -> Option<bool> {
        None
    }

    /// Per-message evidence a hearer weighs against its priors.
    fn hearer_weights(&self) -> Option<Vec<f64>> {
        None
    }

    /// The speaker-side message distribution, used as default hearer priors.
    fn hearer_priors(&self) -> Option<Vec<f64>> {
        None
    }
}

/// Probabilities and counts captured after each checkpoint utterance.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub checkpoints: Vec<u64>,
    pub probabilities: Vec<Vec<f64>>,
    pub counts: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn final_probabilities(&self) -> Option<&[f64]> {
        self.probabilities.last().map(Vec::as_slice)
    }

    pub fn final_counts(&self) -> Option<&[f64]> {
        self.counts.last().map(Vec::as_slice)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct History {
    pub utterances: Vec<Utterance>,
    pub trajectory: Trajectory,
}

pub fn validate_checkpoints(checkpoints: &[u64], n_utterances: u64) -> Result<()> {
    if let Some(w) = checkpoints.windows(2).find(|w| w[0] >= w[1]) {
        return Err(Error::config(
            "checkpoints",
            format!("checkpoints must be strictly increasing ({} then {})", w[0], w[1]),
        ));
    }
    if let Some(&first) = checkpoints.first() {
        if first == 0 {
            return Err(Error::config("checkpoints", "checkpoint 0 precedes the first utterance"));
        }
    }
    if let Some(&last) = checkpoints.last() {
        if last > n_utterances {
            return Err(Error::config(
                "checkpoints",
                format!("checkpoint {last} exceeds the history length {n_utterances}"),
            ));
        }
    }
    Ok(())
}

/// 50 log-spaced checkpoints per decade from 10 up to `n`, always ending at `n`.
pub fn default_checkpoints(n_utterances: u64) -> Vec<u64> {
    const PER_DECADE: i32 = 50;
    let mut points = Vec::new();
    if n_utterances >= 10 {
        for j in 0.. {
            let k = 10f64.powf(1.0 + f64::from(j) / f64::from(PER_DECADE)).round() as u64;
            if k > n_utterances {
                break;
            }
            if points.last() != Some(&k) {
                points.push(k);
            }
        }
    }
    if n_utterances > 0 && points.last() != Some(&n_utterances) {
        points.push(n_utterances);
    }
    points
}

/// Runs `n_utterances` steps, invoking `on_utterance` after every step and
/// `on_checkpoint` after each checkpoint step.
pub fn drive<M, D, U, C>(
    model: &mut M,
    source: &mut D,
    n_utterances: u64,
    checkpoints: &[u64],
    mut on_utterance: U,
    mut on_checkpoint: C,
) where
    M: LanguageModel,
    D: DrawSource,
    U: FnMut(&M, &Utterance),
    C: FnMut(&M, u64),
{
    let mut next = checkpoints.iter().peekable();
    for k in 1..=n_utterances {
        let utterance = model.step(k, source);
        on_utterance(model, &utterance);
        if next.peek() == Some(&&k) {
            next.next();
            on_checkpoint(model, k);
        }
    }
}

/// Generates one language history, keeping every utterance.
pub fn run_history<M: LanguageModel, D: DrawSource>(
    model: &mut M,
    source: &mut D,
    n_utterances: u64,
    checkpoints: &[u64],
) -> Result<History> {
    validate_checkpoints(checkpoints, n_utterances)?;
    let mut utterances = Vec::with_capacity(n_utterances.min(1 << 24) as usize);
    let mut trajectory = Trajectory::default();
    drive(
        model,
        source,
        n_utterances,
        checkpoints,
        |_, u| utterances.push(*u),
        |m, k| {
            trajectory.checkpoints.push(k);
            trajectory.probabilities.push(m.probabilities());
            trajectory.counts.push(m.counts());
        },
    );
    Ok(History {
        utterances,
        trajectory,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_examples() {
        assert_eq!(single_rule_verdict(&[0.995, 0.003, 0.002], 0.01), Verdict::Converged(0));
        assert_eq!(single_rule_verdict(&[0.6, 0.4], 0.01), Verdict::Unresolved);
        assert_eq!(single_rule_verdict(&[0.001, 0.999], 0.01), Verdict::Converged(1));
        assert!(validate_epsilon(0.5).is_err());
        assert!(validate_epsilon(0.0).is_err());
        assert!(validate_epsilon(0.01).is_ok());
    }

    #[test]
    fn all_cells_verdict_requires_every_cell_settled() {
        assert_eq!(all_cells_verdict(&[1.0, 0.0, 0.0, 0.995], 0.01), Verdict::Converged(0));
        assert_eq!(all_cells_verdict(&[1.0, 0.5], 0.01), Verdict::Unresolved);
    }

    #[test]
    fn default_checkpoints_shape() {
        let cps = default_checkpoints(100_000);
        assert_eq!(cps.first(), Some(&10));
        assert_eq!(cps.last(), Some(&100_000));
        assert!(cps.windows(2).all(|w| w[0] < w[1]));
        assert!(cps.contains(&100) && cps.contains(&1000) && cps.contains(&10_000));
        // Four full decades at 50 points each, plus the endpoint; early
        // points collide after rounding.
        assert!(cps.len() > 150 && cps.len() <= 201);
        assert_eq!(default_checkpoints(5), vec![5]);
        assert_eq!(default_checkpoints(15).last(), Some(&15));
        assert!(default_checkpoints(0).is_empty());
    }

    #[test]
    fn checkpoint_validation() {
        assert!(validate_checkpoints(&[1, 2, 3], 3).is_ok());
        assert!(validate_checkpoints(&[], 3).is_ok());
        assert!(validate_checkpoints(&[2, 2], 3).is_err());
        assert!(validate_checkpoints(&[1, 4], 3).is_err());
        assert!(validate_checkpoints(&[0, 1], 3).is_err());
    }
}
