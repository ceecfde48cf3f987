//! Competition between an unmarked form f^u (shared with the subject meaning)
//! and a marked form f^a for the object meaning.

use std::fmt;

use serde::Serialize;

use crate::engine::{draw_categorical, DrawSource, MessageDistribution};
use crate::error::{Error, Result};
use crate::hearer::posterior;
use crate::history::{LanguageModel, Utterance, Verdict};

pub const SUBJ: usize = 0;
pub const OBJ: usize = 1;
pub const UNMARKED: usize = 0;
pub const MARKED: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompetitionState {
    pub c_u_subj: f64,
    pub c_u_obj: f64,
    /// Tallied for reporting; the production rule never reads it.
    pub c_a_obj: f64,
    pub p_subj: f64,
    #[serde(skip)]
    messages: MessageDistribution,
}

impl CompetitionState {
    pub fn new(p_subj: f64, c_u_subj: f64, c_u_obj: f64, c_a_obj: f64) -> Result<Self> {
        if !(p_subj > 0.0 && p_subj < 1.0) {
            return Err(Error::config("p_subj", format!("p_subj {p_subj} is outside (0, 1)")));
        }
        for (field, c) in [("c_u_subj", c_u_subj), ("c_u_obj", c_u_obj)] {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::config(field, format!("start count {c} must be strictly positive")));
            }
        }
        if !(c_a_obj.is_finite() && c_a_obj >= 0.0) {
            return Err(Error::config("c_a_obj", format!("count {c_a_obj} must be non-negative")));
        }
        Ok(Self {
            c_u_subj,
            c_u_obj,
            c_a_obj,
            p_subj,
            messages: MessageDistribution::validated("p_subj", vec![p_subj, 1.0 - p_subj])?,
        })
    }

    /// P(f^u | m_obj) = c^u_obj / (c^u_subj + c^u_obj).
    pub fn unmarked_given_obj(&self) -> f64 {
        self.c_u_obj / (self.c_u_subj + self.c_u_obj)
    }

    /// The hearer's P(m_subj | f^u), with priors (p, 1−p) and likelihoods
    /// P(f^u | m_subj) = 1, P(f^u | m_obj) = x.
    pub fn hearer_subj_given_unmarked(&self) -> f64 {
        posterior(&[1.0, self.unmarked_given_obj()], self.messages.probabilities())
            .map(|post| post[SUBJ])
            .expect("p_subj > 0 gives positive mass")
    }

    /// Subject meanings always take f^u. Object meanings take f^u with
    /// probability c^u_obj / (c^u_subj + c^u_obj), else f^a. Every utterance
    /// succeeds; there is no α.
    pub fn step_form_competition<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        let message = draw_categorical(source, &self.messages);
        let form = if message == SUBJ {
            self.c_u_subj += 1.0;
            UNMARKED
        } else if source.uniform() < self.unmarked_given_obj() {
            self.c_u_obj += 1.0;
            UNMARKED
        } else {
            self.c_a_obj += 1.0;
            MARKED
        };
        let mut u = Utterance::success(k, message, 1.0);
        u.form = Some(form);
        u
    }
}

impl LanguageModel for CompetitionState {
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        self.step_form_competition(k, source)
    }

    fn cell_labels(&self) -> Vec<String> {
        ["fu|subj", "fu|obj", "subj|fu", "obj|fu"].map(String::from).to_vec()
    }

    fn probabilities(&self) -> Vec<f64> {
        let h = self.hearer_subj_given_unmarked();
        vec![1.0, self.unmarked_given_obj(), h, 1.0 - h]
    }

    fn counts(&self) -> Vec<f64> {
        vec![self.c_u_subj, self.c_u_obj, self.c_a_obj]
    }

    /// Settled when object meanings use one form categorically: the marked
    /// form (`Converged(1)`) or the unmarked one (`Converged(0)`).
    fn verdict(&self, probabilities: &[f64], epsilon: f64) -> Verdict {
        match probabilities.get(1) {
            Some(&x) if x <= epsilon => Verdict::Converged(MARKED),
            Some(&x) if x >= 1.0 - epsilon => Verdict::Converged(UNMARKED),
            _ => Verdict::Unresolved,
        }
    }

    /// Object-meaning utterances, hit when they use f^u.
    fn window_event(&self, utterance: &Utterance) -> Option<bool> {
        (utterance.message_id == OBJ).then(|| utterance.form == Some(UNMARKED))
    }

    fn hearer_weights(&self) -> Option<Vec<f64>> {
        Some(vec![1.0, self.unmarked_given_obj()])
    }

    fn hearer_priors(&self) -> Option<Vec<f64>> {
        Some(self.messages.probabilities().to_vec())
    }
}

/// Long-run values predicted for a given P(m_subj).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LimitPrediction {
    pub speaker_unmarked_given_obj: f64,
    pub hearer_subj_given_unmarked: f64,
    pub hearer_obj_given_unmarked: f64,
}

/// `p > 0.5`: f^u is lost for objects, (0, 1, 0). `p < 0.5`: stable
/// variation at ((1−2p)/(1−p), p/(1−p), (1−2p)/(1−p)). `p = 0.5` is covered
/// by neither result and is rejected.
pub fn limit_prediction(p_subj: f64) -> Result<LimitPrediction> {
    if !(p_subj > 0.0 && p_subj < 1.0) {
        return Err(Error::Domain(format!("p_subj {p_subj} is outside (0, 1)")));
    }
    if p_subj == 0.5 {
        return Err(Error::Domain("p_subj = 0.5 has no limit prediction".into()));
    }
    Ok(if p_subj > 0.5 {
        LimitPrediction {
            speaker_unmarked_given_obj: 0.0,
            hearer_subj_given_unmarked: 1.0,
            hearer_obj_given_unmarked: 0.0,
        }
    } else {
        let stable = (1.0 - 2.0 * p_subj) / (1.0 - p_subj);
        LimitPrediction {
            speaker_unmarked_given_obj: stable,
            hearer_subj_given_unmarked: p_subj / (1.0 - p_subj),
            hearer_obj_given_unmarked: stable,
        }
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// The marked form becomes obligatory for the rarer meaning.
    Categoricalization,
    StableVariation,
}

impl Regime {
    /// `p_unmarked` is the probability of the meaning that keeps the
    /// unmarked form.
    pub fn classify(p_unmarked: f64) -> Result<Self> {
        let prediction = limit_prediction(p_unmarked)?;
        Ok(if prediction.speaker_unmarked_given_obj == 0.0 {
            Regime::Categoricalization
        } else {
            Regime::StableVariation
        })
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Regime::Categoricalization => "categoricalization (Theorem 4)",
            Regime::StableVariation => "stable variation (Theorem 5)",
        })
    }
}
