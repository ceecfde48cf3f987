//! Several verbs whose subject/object propensities inform one another through
//! similarity coefficients γ that shrink over time.

use crate::engine::{choose, discounted, draw_categorical, hre_ratio, DrawSource, ForgettingPolicy, MessageDistribution};
use crate::error::{Error, Result};
use crate::history::{all_cells_verdict, LanguageModel, Utterance, Verdict};

#[derive(Debug, Clone, PartialEq)]
pub struct Verb {
    pub name: String,
    pub roles: Vec<String>,
    pub role_probabilities: MessageDistribution,
}

/// Verbs, their frequencies, and raw counts c[verb, role, gr].
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    verbs: Vec<Verb>,
    verb_frequencies: MessageDistribution,
    relations: Vec<String>,
    alphas: Vec<f64>,
    policy: ForgettingPolicy,
    /// `offsets[v] + role * n_relations + gr`.
    offsets: Vec<usize>,
    counts: Vec<f64>,
    start_counts: Vec<f64>,
}

impl Lexicon {
    /// Every count starts at `start_count`.
    pub fn new(
        verbs: Vec<Verb>,
        verb_frequencies: MessageDistribution,
        relations: Vec<String>,
        alphas: Vec<f64>,
        start_count: f64,
        policy: ForgettingPolicy,
    ) -> Result<Self> {
        if verbs.is_empty() {
            return Err(Error::config("verbs", "at least one verb is required"));
        }
        if verb_frequencies.len() != verbs.len() {
            return Err(Error::config(
                "verb_frequencies",
                format!("{} frequencies for {} verbs", verb_frequencies.len(), verbs.len()),
            ));
        }
        if relations.is_empty() {
            return Err(Error::config("relations", "at least one grammatical relation is required"));
        }
        if alphas.len() != relations.len() {
            return Err(Error::config(
                "alphas",
                format!("{} alphas for {} relations", alphas.len(), relations.len()),
            ));
        }
        if let Some((g, a)) = alphas.iter().enumerate().find(|(_, a)| !(a.is_finite() && **a >= 0.0)) {
            return Err(Error::config(format!("alphas[{g}]"), format!("alpha {a} must be non-negative")));
        }
        if !(start_count.is_finite() && start_count > 0.0) {
            return Err(Error::config(
                "start_count",
                format!("start count {start_count} must be strictly positive"),
            ));
        }
        policy.validate("forgetting")?;
        let mut offsets = Vec::with_capacity(verbs.len());
        let mut n = 0;
        for (v, verb) in verbs.iter().enumerate() {
            if verb.roles.len() != verb.role_probabilities.len() {
                return Err(Error::config(
                    format!("verbs[{v}].role_probabilities"),
                    format!(
                        "{} probabilities for {} roles",
                        verb.role_probabilities.len(),
                        verb.roles.len()
                    ),
                ));
            }
            offsets.push(n);
            n += verb.roles.len() * relations.len();
        }
        Ok(Self {
            verbs,
            verb_frequencies,
            relations,
            alphas,
            policy,
            offsets,
            counts: vec![start_count; n],
            start_counts: vec![start_count; n],
        })
    }

    pub fn verbs(&self) -> &[Verb] {
        &self.verbs
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    pub fn n_roles(&self, verb: usize) -> usize {
        self.verbs[verb].roles.len()
    }

    pub fn alpha(&self, gr: usize) -> f64 {
        self.alphas[gr]
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn start_counts(&self) -> &[f64] {
        &self.start_counts
    }

    #[inline]
    fn index(&self, verb: usize, role: usize, gr: usize) -> usize {
        self.offsets[verb] + role * self.relations.len() + gr
    }

    #[inline]
    pub fn count(&self, verb: usize, role: usize, gr: usize) -> f64 {
        self.counts[self.index(verb, role, gr)]
    }

    pub fn set_count(&mut self, verb: usize, role: usize, gr: usize, value: f64) {
        let i = self.index(verb, role, gr);
        self.counts[i] = value;
    }

    pub fn role_index(&self, verb: usize, role: &str) -> Option<usize> {
        self.verbs[verb].roles.iter().position(|r| r == role)
    }

    pub fn verb_index(&self, name: &str) -> Option<usize> {
        self.verbs.iter().position(|v| v.name == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r == name)
    }
}

/// γ[target, source] with the role alignment s_v(θ) and a per-utterance decay.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    n_verbs: usize,
    gamma: Vec<f64>,
    /// `alignment[target][source][target_role]` = the source verb's role most
    /// similar to `target_role`.
    alignment: Vec<Vec<Vec<Option<usize>>>>,
    pub decay: f64,
}

impl SimilarityMatrix {
    /// `gamma[target][source]`; the diagonal is ignored. Alignment defaults
    /// to matching role positions.
    pub fn new(gamma: Vec<Vec<f64>>, decay: f64) -> Result<Self> {
        let n_verbs = gamma.len();
        let mut flat = Vec::with_capacity(n_verbs * n_verbs);
        for (t, row) in gamma.iter().enumerate() {
            if row.len() != n_verbs {
                return Err(Error::config(
                    format!("gamma[{t}]"),
                    format!("expected {n_verbs} entries, found {}", row.len()),
                ));
            }
            for (s, &g) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&g) {
                    return Err(Error::config(
                        format!("gamma[{t}][{s}]"),
                        format!("similarity {g} is outside [0, 1]"),
                    ));
                }
                flat.push(if s == t { 0.0 } else { g });
            }
        }
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::config("decay", format!("decay {decay} is outside (0, 1]")));
        }
        Ok(Self {
            n_verbs,
            gamma: flat,
            alignment: Vec::new(),
            decay,
        })
    }

    /// Same γ between every pair of distinct verbs.
    pub fn uniform(n_verbs: usize, gamma: f64, decay: f64) -> Result<Self> {
        Self::new(vec![vec![gamma; n_verbs]; n_verbs], decay)
    }

    pub fn with_alignment(mut self, alignment: Vec<Vec<Vec<Option<usize>>>>) -> Self {
        self.alignment = alignment;
        self
    }

    #[inline]
    pub fn gamma(&self, target: usize, source: usize) -> f64 {
        self.gamma[target * self.n_verbs + source]
    }

    #[inline]
    fn aligned(&self, target: usize, source: usize, role: usize) -> Option<usize> {
        if self.alignment.is_empty() {
            Some(role)
        } else {
            self.alignment[target][source][role]
        }
    }

    /// Multiplies every off-diagonal γ by the decay factor.
    pub fn decay_similarity(&mut self) {
        if self.decay != 1.0 {
            for g in &mut self.gamma {
                *g = discounted(*g, self.decay);
            }
        }
    }

    fn validate_against(&self, lexicon: &Lexicon) -> Result<()> {
        let n = lexicon.verbs.len();
        if self.n_verbs != n {
            return Err(Error::config(
                "gamma",
                format!("matrix covers {} verbs, lexicon has {n}", self.n_verbs),
            ));
        }
        if !self.alignment.is_empty() && self.alignment.len() != n {
            return Err(Error::config(
                "alignment",
                format!("expected one entry per target verb ({n}), found {}", self.alignment.len()),
            ));
        }
        for t in 0..n {
            if !self.alignment.is_empty() && self.alignment[t].len() != n {
                return Err(Error::config(
                    format!("alignment[{t}]"),
                    format!("expected one entry per source verb ({n})"),
                ));
            }
            for s in 0..n {
                if s == t || self.gamma(t, s) == 0.0 {
                    continue;
                }
                if !self.alignment.is_empty() && self.alignment[t][s].len() != lexicon.n_roles(t) {
                    return Err(Error::config(
                        format!("alignment[{t}][{s}]"),
                        format!("expected one entry per role of verb {t}"),
                    ));
                }
                for role in 0..lexicon.n_roles(t) {
                    match self.aligned(t, s, role) {
                        Some(r) if r < lexicon.n_roles(s) => {}
                        _ => {
                            return Err(Error::config(
                                format!("alignment[{t}][{s}][{role}]"),
                                format!(
                                    "role `{}` of verb `{}` has no counterpart in verb `{}` although γ > 0",
                                    lexicon.verbs[t].roles[role], lexicon.verbs[t].name, lexicon.verbs[s].name
                                ),
                            ))
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityModel {
    pub lexicon: Lexicon,
    pub similarity: SimilarityMatrix,
}

impl SimilarityModel {
    pub fn new(lexicon: Lexicon, similarity: SimilarityMatrix) -> Result<Self> {
        similarity.validate_against(&lexicon)?;
        Ok(Self { lexicon, similarity })
    }

    /// C_θ = c[v, θ, g] + Σ_{v'≠v} γ[v, v'] · c[v', s_{v'}(θ), g].
    pub fn effective_count(&self, verb: usize, role: usize, gr: usize) -> f64 {
        let mut total = self.lexicon.count(verb, role, gr);
        for source in 0..self.lexicon.verbs.len() {
            let gamma = self.similarity.gamma(verb, source);
            if source == verb || gamma == 0.0 {
                continue;
            }
            let aligned = self
                .similarity
                .aligned(verb, source, role)
                .expect("alignment validated at construction");
            total += gamma * self.lexicon.count(source, aligned, gr);
        }
        total
    }

    /// C_θ / (Σ_θ' C_θ' + α_g).
    pub fn similarity_hre(&self, verb: usize, role: usize, gr: usize) -> f64 {
        let mut denominator = self.lexicon.alphas[gr];
        let mut own = 0.0;
        for r in 0..self.lexicon.n_roles(verb) {
            let c = self.effective_count(verb, r, gr);
            if r == role {
                own = c;
            }
            denominator += c;
        }
        hre_ratio(own, denominator)
    }

    /// Draws a verb, then a role, then tries each relation in order. A success
    /// adds 1 to the raw count c[verb, role, gr] after forgetting is applied
    /// to every count. γ decays once per utterance either way.
    pub fn step_similarity<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        let verb = choose(source, &self.lexicon.verb_frequencies);
        let role = draw_categorical(source, &self.lexicon.verbs[verb].role_probabilities);
        let mut utterance = Utterance::exhausted(k, role);
        for gr in 0..self.lexicon.relations.len() {
            if source.uniform() < self.similarity_hre(verb, role, gr) {
                self.forget();
                let i = self.lexicon.index(verb, role, gr);
                self.lexicon.counts[i] += 1.0;
                utterance = Utterance::success(k, role, 1.0);
                utterance.gr = Some(gr);
                break;
            }
        }
        if !utterance.is_success() && self.lexicon.policy.decay_on_failure {
            self.forget();
        }
        utterance.verb = Some(verb);
        self.similarity.decay_similarity();
        utterance
    }

    fn forget(&mut self) {
        let policy = self.lexicon.policy;
        if policy.nu == 1.0 {
            return;
        }
        for c in &mut self.lexicon.counts {
            *c = discounted(*c, policy.nu);
        }
        if policy.decay_alpha {
            for a in &mut self.lexicon.alphas {
                *a = discounted(*a, policy.nu);
            }
        }
    }

    /// Cell index of `(verb, role, gr)` in [`LanguageModel::probabilities`].
    pub fn cell_index(&self, verb: usize, role: usize, gr: usize) -> usize {
        self.lexicon.index(verb, role, gr)
    }
}

impl LanguageModel for SimilarityModel {
    fn step<D: DrawSource>(&mut self, k: u64, source: &mut D) -> Utterance {
        self.step_similarity(k, source)
    }

    fn cell_labels(&self) -> Vec<String> {
        let mut labels = Vec::with_capacity(self.lexicon.counts.len());
        for verb in &self.lexicon.verbs {
            for role in &verb.roles {
                for gr in &self.lexicon.relations {
                    labels.push(format!("{}:{role}:{gr}", verb.name));
                }
            }
        }
        labels
    }

    fn probabilities(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.lexicon.counts.len());
        for v in 0..self.lexicon.verbs.len() {
            for r in 0..self.lexicon.n_roles(v) {
                for g in 0..self.lexicon.relations.len() {
                    out.push(self.similarity_hre(v, r, g));
                }
            }
        }
        out
    }

    fn counts(&self) -> Vec<f64> {
        self.lexicon.counts.clone()
    }

    fn verdict(&self, probabilities: &[f64], epsilon: f64) -> Verdict {
        all_cells_verdict(probabilities, epsilon)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ScriptedDraws;
    use approx::assert_relative_eq;

    fn verb(name: &str, roles: &[&str], p: &[f64]) -> Verb {
        Verb {
            name: name.into(),
            roles: roles.iter().map(|r| r.to_string()).collect(),
            role_probabilities: MessageDistribution::new(p.to_vec()).unwrap(),
        }
    }

    /// run (runner, surface) borrowing from walk (walker, surface).
    fn run_walk(gamma: f64) -> SimilarityModel {
        let lexicon = Lexicon::new(
            vec![
                verb("run", &["runner", "surface"], &[0.5, 0.5]),
                verb("walk", &["walker", "surface"], &[0.5, 0.5]),
            ],
            MessageDistribution::new(vec![0.5, 0.5]).unwrap(),
            vec!["subj".into()],
            vec![0.0],
            1.0,
            ForgettingPolicy::none(),
        )
        .unwrap();
        let mut m = SimilarityModel::new(lexicon, SimilarityMatrix::uniform(2, gamma, 1.0).unwrap()).unwrap();
        m.lexicon.set_count(0, 0, 0, 0.0);
        m.lexicon.set_count(0, 1, 0, 0.0);
        m.lexicon.set_count(1, 0, 0, 9.0);
        m.lexicon.set_count(1, 1, 0, 3.0);
        m
    }

    #[test]
    fn borrowed_count_example() {
        let m = run_walk(1.0 / 3.0);
        assert_relative_eq!(m.effective_count(0, 0, 0), 3.0, epsilon = 1e-12);
        assert_relative_eq!(m.similarity_hre(0, 0, 0), 0.75, epsilon = 1e-12);
    }

    #[test]
    fn zero_similarity_is_own_count() {
        let m = run_walk(0.0);
        assert_eq!(m.effective_count(0, 0, 0), 0.0);
        assert_eq!(m.effective_count(1, 0, 0), 9.0);
    }

    #[test]
    fn full_similarity_pools_counts() {
        let m = run_walk(1.0);
        assert_eq!(m.effective_count(0, 0, 0), 9.0);
        assert_eq!(m.effective_count(1, 0, 0), 9.0);
        assert_eq!(m.effective_count(1, 1, 0), 3.0);
    }

    #[test]
    fn decay_examples() {
        let mut s = SimilarityMatrix::uniform(2, 0.03, 0.9999).unwrap();
        s.decay_similarity();
        assert_relative_eq!(s.gamma(0, 1), 0.029997, epsilon = 1e-15);
        assert_eq!(s.gamma(0, 0), 0.0);
        let mut s = SimilarityMatrix::uniform(2, 0.03, 1.0).unwrap();
        s.decay_similarity();
        assert_eq!(s.gamma(1, 0), 0.03);
    }

    #[test]
    fn success_increments_one_raw_cell() {
        let lexicon = Lexicon::new(
            vec![
                verb("steal", &["agt", "pat", "loc"], &[0.7, 0.2, 0.1]),
                verb("arrest", &["agt", "pat", "loc"], &[0.3, 0.5, 0.2]),
            ],
            MessageDistribution::new(vec![0.7, 0.3]).unwrap(),
            vec!["subj".into(), "obj".into()],
            vec![0.0, 0.0],
            1.0,
            ForgettingPolicy::none(),
        )
        .unwrap();
        let mut m = SimilarityModel::new(lexicon, SimilarityMatrix::uniform(2, 0.03, 0.9999).unwrap()).unwrap();
        let before = m.lexicon.counts().to_vec();
        // verb 0.8 → arrest; role 0.1 → agt; subj draw 0.0 succeeds.
        let u = m.step_similarity(1, &mut ScriptedDraws::new(vec![0.8, 0.1, 0.0]));
        assert_eq!((u.verb, u.message_id, u.gr), (Some(1), 0, Some(0)));
        let after = m.lexicon.counts();
        let changed: Vec<usize> = (0..before.len()).filter(|&i| before[i] != after[i]).collect();
        assert_eq!(changed, vec![m.cell_index(1, 0, 0)]);
        assert_eq!(after[m.cell_index(1, 0, 0)], 2.0);
        assert_relative_eq!(m.similarity.gamma(1, 0), 0.029997, epsilon = 1e-15);
    }

    #[test]
    fn missing_alignment_rejected() {
        let lexicon = Lexicon::new(
            vec![verb("a", &["x", "y"], &[0.5, 0.5]), verb("b", &["x"], &[1.0])],
            MessageDistribution::new(vec![0.5, 0.5]).unwrap(),
            vec!["subj".into()],
            vec![0.0],
            1.0,
            ForgettingPolicy::none(),
        )
        .unwrap();
        let err = SimilarityModel::new(lexicon.clone(), SimilarityMatrix::uniform(2, 0.1, 1.0).unwrap()).unwrap_err();
        assert!(err.to_string().contains("alignment[0][1][1]"));
        assert!(SimilarityModel::new(lexicon, SimilarityMatrix::uniform(2, 0.0, 1.0).unwrap()).is_ok());
    }

    #[test]
    fn gamma_bounds() {
        assert!(SimilarityMatrix::uniform(2, 1.5, 1.0).is_err());
        assert!(SimilarityMatrix::uniform(2, -0.1, 1.0).is_err());
        assert!(SimilarityMatrix::uniform(2, 0.1, 0.0).is_err());
    }
}
