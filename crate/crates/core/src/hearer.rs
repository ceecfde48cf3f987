//! Bayesian interpretation of a phrasal sign: P(m_i | u*) ∝ c_i P(m_i).

use crate::engine::SUM_TOLERANCE;
use crate::error::{Error, Result};
use crate::history::Trajectory;

/// Normalized `weights[i] * priors[i]`.
///
/// `weights` are the speaker's counts (or any likelihood proportional to
/// them); the result does not change if they are all scaled by λ > 0.
pub fn posterior(weights: &[f64], priors: &[f64]) -> Result<Vec<f64>> {
    if weights.len() != priors.len() {
        return Err(Error::Usage(format!(
            "{} weights but {} priors",
            weights.len(),
            priors.len()
        )));
    }
    if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(w.is_finite() && **w >= 0.0)) {
        return Err(Error::Usage(format!("weight {i} is {w}, expected a non-negative number")));
    }
    validate_priors(priors)?;
    let joint: Vec<f64> = weights.iter().zip(priors).map(|(w, p)| w * p).collect();
    let mass: f64 = joint.iter().sum();
    // Weights are finite and non-negative, so the mass is either positive or zero.
    if mass <= 0.0 {
        return Err(Error::UndefinedPosterior);
    }
    Ok(joint.into_iter().map(|j| j / mass).collect())
}

pub fn validate_priors(priors: &[f64]) -> Result<()> {
    if let Some((i, p)) = priors
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && (0.0..=1.0).contains(*p)))
    {
        return Err(Error::config(format!("priors[{i}]"), format!("prior {p} is outside [0, 1]")));
    }
    let sum: f64 = priors.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::config("priors", format!("priors sum to {sum}, expected 1")));
    }
    Ok(())
}

/// The hearer's posterior at every checkpoint of a trajectory, computed from
/// the recorded counts.
pub fn interpretation_trajectory(trajectory: &Trajectory, priors: &[f64]) -> Result<Vec<Vec<f64>>> {
    trajectory
        .counts
        .iter()
        .map(|counts| posterior(counts, priors))
        .collect()
}
