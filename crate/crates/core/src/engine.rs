//! Propensity storage, the reinforcement probability rule, update policies,
//! and the randomness contract every model draws through.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance used when checking that a probability vector sums to one.
pub const SUM_TOLERANCE: f64 = 1e-12;

/// A source of uniform draws on `[0, 1)`.
///
/// Every random decision in every model consumes exactly one draw, so two
/// formulations that make the same decisions in the same order produce the
/// same trace.
pub trait DrawSource {
    fn uniform(&mut self) -> f64;
}

/// Deterministic stream of uniforms keyed by `(master_seed, stream_index)`.
///
/// Backed by ChaCha8, which exposes 2^64 independent streams per seed; the
/// stream index selects one of them, so distinct indices never collide.
#[derive(Debug, Clone)]
pub struct RandomSource {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }
}

impl DrawSource for RandomSource {
    #[inline]
    fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }
}

/// The stream used by history `history_index` of an ensemble seeded with
/// `master_seed`. Independent of how histories are scheduled onto threads.
pub fn derive_stream(master_seed: u64, history_index: u64) -> RandomSource {
    RandomSource::new(master_seed, history_index)
}

/// Replays a fixed list of uniforms. Panics when the list runs out.
#[derive(Debug, Clone)]
pub struct ScriptedDraws {
    draws: Vec<f64>,
    next: usize,
}

impl ScriptedDraws {
    pub fn new(draws: impl Into<Vec<f64>>) -> Self {
        Self {
            draws: draws.into(),
            next: 0,
        }
    }

    pub fn consumed(&self) -> usize {
        self.next
    }
}

impl DrawSource for ScriptedDraws {
    fn uniform(&mut self) -> f64 {
        let u = *self
            .draws
            .get(self.next)
            .unwrap_or_else(|| panic!("scripted draws exhausted after {} draws", self.next));
        self.next += 1;
        u
    }
}

impl<D: DrawSource + ?Sized> DrawSource for &mut D {
    #[inline]
    fn uniform(&mut self) -> f64 {
        (**self).uniform()
    }
}

/// A fixed probability vector over message (or cell) ids.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MessageDistribution {
    probabilities: Vec<f64>,
}

impl MessageDistribution {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        Self::validated("probabilities", probabilities)
    }

    /// Like [`MessageDistribution::new`] but reports failures against `field`.
    pub fn validated(field: &str, probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::config(field, "distribution is empty"));
        }
        if let Some((i, p)) = probabilities
            .iter()
            .enumerate()
            .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
        {
            return Err(Error::config(
                format!("{field}[{i}]"),
                format!("probability {p} is outside [0, 1]"),
            ));
        }
        let sum: f64 = probabilities.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(Error::config(
                field,
                format!("probabilities sum to {sum}, expected 1"),
            ));
        }
        Ok(Self { probabilities })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            probabilities: vec![1.0 / n as f64; n],
        }
    }

    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    pub fn get(&self, i: usize) -> f64 {
        self.probabilities[i]
    }
}

impl TryFrom<Vec<f64>> for MessageDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<MessageDistribution> for Vec<f64> {
    fn from(d: MessageDistribution) -> Self {
        d.probabilities
    }
}

/// Draws an index from `distribution` with a single uniform, walking the
/// cumulative distribution in ascending index order.
///
/// Returns the first `i` with `u < p_0 + ... + p_i`. Zero-probability
/// indices are never returned.
pub fn draw_categorical<D: DrawSource>(source: &mut D, distribution: &MessageDistribution) -> usize {
    let u = source.uniform();
    categorical_index(u, distribution.probabilities())
}

/// Like [`draw_categorical`], but a one-option choice is made without
/// consuming a draw. Used for speaker, scene and verb selection so that a
/// degenerate multi-speaker or multi-verb model replays the simpler model's
/// trace exactly.
pub fn choose<D: DrawSource>(source: &mut D, distribution: &MessageDistribution) -> usize {
    if distribution.len() == 1 {
        0
    } else {
        draw_categorical(source, distribution)
    }
}

pub(crate) fn categorical_index(u: f64, probabilities: &[f64]) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probabilities.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // Rounding left the cumulative sum just under 1.
    probabilities
        .iter()
        .rposition(|&p| p > 0.0)
        .expect("validated distribution has positive mass")
}

/// How counts are discounted when the state is updated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForgettingPolicy {
    pub nu: f64,
    #[serde(default = "default_true")]
    pub decay_alpha: bool,
    #[serde(default)]
    pub decay_on_failure: bool,
}

fn default_true() -> bool {
    true
}

impl Default for ForgettingPolicy {
    fn default() -> Self {
        Self::none()
    }
}

impl ForgettingPolicy {
    /// ν = 1: nothing is ever forgotten.
    pub const fn none() -> Self {
        Self {
            nu: 1.0,
            decay_alpha: true,
            decay_on_failure: false,
        }
    }

    pub fn with_nu(nu: f64) -> Result<Self> {
        let policy = Self {
            nu,
            ..Self::none()
        };
        policy.validate("forgetting")?;
        Ok(policy)
    }

    pub fn validate(&self, field: &str) -> Result<()> {
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return Err(Error::config(
                format!("{field}.nu"),
                format!("forgetting factor {} is outside (0, 1]", self.nu),
            ));
        }
        Ok(())
    }

    pub fn is_forgetting(&self) -> bool {
        self.nu < 1.0
    }
}

/// Propensity counts for one reinforcement rule, plus its α parameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningState {
    counts: Vec<f64>,
    alpha: f64,
    start_counts: Vec<f64>,
}

impl LearningState {
    pub fn new(start_counts: Vec<f64>, alpha: f64) -> Result<Self> {
        Self::validated("start_counts", start_counts, alpha)
    }

    pub fn validated(field: &str, start_counts: Vec<f64>, alpha: f64) -> Result<Self> {
        if start_counts.is_empty() {
            return Err(Error::config(field, "at least one message is required"));
        }
        if let Some((i, c)) = start_counts
            .iter()
            .enumerate()
            .find(|(_, c)| !c.is_finite() || **c <= 0.0)
        {
            return Err(Error::config(
                format!("{field}[{i}]"),
                format!("start count {c} must be strictly positive"),
            ));
        }
        if !(alpha.is_finite() && alpha >= 0.0) {
            return Err(Error::config(
                "alpha",
                format!("alpha {alpha} must be a finite non-negative number"),
            ));
        }
        Ok(Self {
            counts: start_counts.clone(),
            alpha,
            start_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn start_counts(&self) -> &[f64] {
        &self.start_counts
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn total(&self) -> f64 {
        self.counts.iter().sum()
    }

    /// `c_i / (Σ_j c_j + α)`.
    pub fn hre_probability(&self, message_id: usize) -> Result<f64> {
        if message_id >= self.counts.len() {
            return Err(Error::Usage(format!(
                "message id {message_id} out of range for {} messages",
                self.counts.len()
            )));
        }
        Ok(self.probability(message_id))
    }

    #[inline]
    pub(crate) fn probability(&self, i: usize) -> f64 {
        hre_ratio(self.counts[i], self.total() + self.alpha)
    }

    /// `p(u*|m_i)` for every message.
    pub fn probabilities(&self) -> Vec<f64> {
        let denom = self.total() + self.alpha;
        self.counts.iter().map(|&c| hre_ratio(c, denom)).collect()
    }

    /// Reinforces message `i` by `payoff` after discounting every count (and
    /// α, if the policy says so) by ν.
    pub fn apply_success(
        &mut self,
        message_id: usize,
        policy: &ForgettingPolicy,
        payoff: f64,
    ) -> Result<()> {
        if message_id >= self.counts.len() {
            return Err(Error::Usage(format!(
                "message id {message_id} out of range for {} messages",
                self.counts.len()
            )));
        }
        if !(payoff.is_finite() && payoff > 0.0) {
            return Err(Error::Usage(format!("payoff {payoff} must be positive")));
        }
        self.reinforce(message_id, policy, payoff);
        Ok(())
    }

    #[inline]
    pub(crate) fn reinforce(&mut self, i: usize, policy: &ForgettingPolicy, payoff: f64) {
        if policy.nu != 1.0 {
            self.discount(policy);
        }
        self.counts[i] += payoff;
    }

    /// Failed utterances only touch the state when `decay_on_failure` is set.
    pub fn apply_failure(&mut self, policy: &ForgettingPolicy) {
        if policy.decay_on_failure && policy.nu != 1.0 {
            self.discount(policy);
        }
    }

    fn discount(&mut self, policy: &ForgettingPolicy) {
        for c in &mut self.counts {
            *c = discounted(*c, policy.nu);
        }
        if policy.decay_alpha {
            self.alpha = discounted(self.alpha, policy.nu);
        }
    }
}

/// `value · ν`, flushed to zero once it leaves the normal range. Repeated
/// discounting otherwise parks a count at the smallest subnormal (which
/// rounds back to itself), where every later multiply is very slow.
#[inline]
pub(crate) fn discounted(value: f64, nu: f64) -> f64 {
    let v = value * nu;
    if v < f64::MIN_POSITIVE {
        0.0
    } else {
        v
    }
}

/// Counts far below `f64::MIN_POSITIVE` can underflow under strong
/// forgetting; an empty rule then produces no phrases rather than NaN.
#[inline]
pub(crate) fn hre_ratio(count: f64, denominator: f64) -> f64 {
    if denominator > 0.0 {
        count / denominator
    } else {
        0.0
    }
}
