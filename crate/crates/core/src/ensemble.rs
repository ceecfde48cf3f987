//! Many independent histories of one scenario, run in parallel and
//! aggregated in history order so the result does not depend on the number
//! of worker threads.

use rayon::prelude::*;
use serde::Serialize;

use crate::engine::derive_stream;
use crate::error::{Error, Result};
use crate::hearer::{posterior, validate_priors};
use crate::history::{
    default_checkpoints, drive, single_rule_verdict, validate_checkpoints, validate_epsilon, LanguageModel,
    Trajectory, Verdict,
};

pub const BINS: usize = 12;
pub const DEFAULT_SAMPLE_PATHS: usize = 10;
pub const DEFAULT_EPSILON: f64 = 0.01;

/// Histories handed to the thread pool at a time before their results are
/// folded into the accumulators.
const CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleConfig {
    pub n_histories: usize,
    pub n_utterances: u64,
    pub master_seed: u64,
    /// Empty means [`default_checkpoints`]. The final utterance is always a
    /// checkpoint.
    pub checkpoints: Vec<u64>,
    pub epsilon: f64,
    pub worker_count: usize,
    pub sample_paths: usize,
    /// When set, every checkpoint also records the hearer's posterior.
    pub hearer_priors: Option<Vec<f64>>,
}

impl EnsembleConfig {
    pub fn new(n_histories: usize, n_utterances: u64, master_seed: u64) -> Self {
        Self {
            n_histories,
            n_utterances,
            master_seed,
            checkpoints: Vec::new(),
            epsilon: DEFAULT_EPSILON,
            worker_count: 1,
            sample_paths: DEFAULT_SAMPLE_PATHS,
            hearer_priors: None,
        }
    }

    pub fn with_workers(mut self, worker_count: usize) -> Self {
        self.worker_count = worker_count;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_checkpoints(mut self, checkpoints: Vec<u64>) -> Self {
        self.checkpoints = checkpoints;
        self
    }

    pub fn with_hearer_priors(mut self, priors: Vec<f64>) -> Self {
        self.hearer_priors = Some(priors);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_histories == 0 {
            return Err(Error::config("histories", "must be positive"));
        }
        if self.n_utterances == 0 {
            return Err(Error::config("utterances", "must be positive"));
        }
        if self.worker_count == 0 {
            return Err(Error::config("workers", "must be positive"));
        }
        validate_epsilon(self.epsilon)?;
        validate_checkpoints(&self.checkpoints, self.n_utterances)?;
        if let Some(p) = &self.hearer_priors {
            validate_priors(p)?;
        }
        Ok(())
    }

    pub fn resolved_checkpoints(&self) -> Vec<u64> {
        let mut cps = if self.checkpoints.is_empty() {
            default_checkpoints(self.n_utterances)
        } else {
            self.checkpoints.clone()
        };
        if cps.last() != Some(&self.n_utterances) {
            cps.push(self.n_utterances);
        }
        cps
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    compensation: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.compensation += (self.sum - t) + x;
        } else {
            self.compensation += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.compensation
    }
}

/// `floor(p·12)`, with p = 1 in the last bin.
pub fn bin_index(p: f64) -> usize {
    if p.is_nan() || p <= 0.0 {
        0
    } else {
        ((p * BINS as f64) as usize).min(BINS - 1)
    }
}

/// Checkpoints at exact powers of ten, plus the final one.
pub fn histogram_checkpoints(checkpoints: &[u64]) -> Vec<u64> {
    let mut out: Vec<u64> = checkpoints
        .iter()
        .copied()
        .filter(|&k| {
            let mut d = 10;
            while d < k {
                d *= 10;
            }
            d == k
        })
        .collect();
    if let Some(&last) = checkpoints.last() {
        if out.last() != Some(&last) {
            out.push(last);
        }
    }
    out
}

/// Single-rule verdict at the final checkpoint.
pub fn detect_convergence(trajectory: &Trajectory, epsilon: f64) -> Result<Verdict> {
    validate_epsilon(epsilon)?;
    let probs = trajectory
        .final_probabilities()
        .ok_or_else(|| Error::Usage("trajectory has no checkpoints".into()))?;
    Ok(single_rule_verdict(probs, epsilon))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub checkpoint: u64,
    /// `counts[cell][bin]`.
    pub counts: Vec<[u64; BINS]>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePath {
    pub history_id: usize,
    /// `probabilities[checkpoint][cell]`.
    pub probabilities: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistorySummary {
    pub history_id: usize,
    pub verdict: Verdict,
    pub final_probabilities: Vec<f64>,
    pub final_counts: Vec<f64>,
    /// Hit rate of the model's window statistic over the last 10% of
    /// utterances, if the model defines one and any event occurred.
    pub window_share: Option<f64>,
    pub final_posterior: Option<Vec<f64>>,
}

/// Means and histograms over a set of trajectories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub checkpoints: Vec<u64>,
    /// `mean[checkpoint][cell]`.
    pub mean: Vec<Vec<f64>>,
    pub histograms: Vec<Histogram>,
    pub n: usize,
}

struct Accumulator {
    checkpoints: Vec<u64>,
    histogram_rows: Vec<usize>,
    sums: Vec<Vec<CompensatedSum>>,
    histograms: Vec<Histogram>,
    n: usize,
}

impl Accumulator {
    fn new(checkpoints: &[u64], n_cells: usize) -> Self {
        let selected = histogram_checkpoints(checkpoints);
        let histogram_rows = selected
            .iter()
            .map(|k| checkpoints.iter().position(|c| c == k).expect("selected from list"))
            .collect();
        Self {
            checkpoints: checkpoints.to_vec(),
            histogram_rows,
            sums: vec![vec![CompensatedSum::default(); n_cells]; checkpoints.len()],
            histograms: selected
                .into_iter()
                .map(|checkpoint| Histogram {
                    checkpoint,
                    counts: vec![[0; BINS]; n_cells],
                })
                .collect(),
            n: 0,
        }
    }

    fn add(&mut self, rows: &[Vec<f64>]) {
        for (sums, row) in self.sums.iter_mut().zip(rows) {
            for (s, &p) in sums.iter_mut().zip(row) {
                s.add(p);
            }
        }
        for (h, &r) in self.histograms.iter_mut().zip(&self.histogram_rows) {
            for (cell, &p) in rows[r].iter().enumerate() {
                h.counts[cell][bin_index(p)] += 1;
            }
        }
        self.n += 1;
    }

    fn finish(self) -> Aggregate {
        let n = self.n.max(1) as f64;
        Aggregate {
            checkpoints: self.checkpoints,
            mean: self
                .sums
                .iter()
                .map(|row| row.iter().map(|s| s.value() / n).collect())
                .collect(),
            histograms: self.histograms,
            n: self.n,
        }
    }
}

/// Means (accumulated in the given order) and 12-bin histograms at decade
/// checkpoints and the final one.
pub fn aggregate(trajectories: &[Trajectory]) -> Result<Aggregate> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::Usage("no trajectories to aggregate".into()))?;
    let n_cells = first.probabilities.first().map_or(0, Vec::len);
    let mut acc = Accumulator::new(&first.checkpoints, n_cells);
    for (h, t) in trajectories.iter().enumerate() {
        if t.checkpoints != first.checkpoints {
            return Err(Error::Usage(format!("trajectory {h} has different checkpoints")));
        }
        if t.probabilities.iter().any(|row| row.len() != n_cells) {
            return Err(Error::Usage(format!("trajectory {h} has a different number of cells")));
        }
        acc.add(&t.probabilities);
    }
    Ok(acc.finish())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    pub cell_labels: Vec<String>,
    pub n_utterances: u64,
    pub epsilon: f64,
    pub aggregate: Aggregate,
    pub sample_paths: Vec<SamplePath>,
    pub histories: Vec<HistorySummary>,
    /// Mean hearer posterior per checkpoint, when hearer priors were given.
    pub hearer_mean: Option<Vec<Vec<f64>>>,
}

impl EnsembleResult {
    pub fn n_histories(&self) -> usize {
        self.histories.len()
    }

    pub fn checkpoints(&self) -> &[u64] {
        &self.aggregate.checkpoints
    }

    fn fraction(&self, pred: impl Fn(&HistorySummary) -> bool) -> f64 {
        self.histories.iter().filter(|h| pred(h)).count() as f64 / self.histories.len() as f64
    }

    pub fn converged_fraction(&self) -> f64 {
        self.fraction(|h| h.verdict.is_converged())
    }

    pub fn converged_to_fraction(&self, cell: usize) -> f64 {
        self.fraction(|h| h.verdict == Verdict::Converged(cell))
    }

    pub fn unresolved_fraction(&self) -> f64 {
        self.fraction(|h| !h.verdict.is_converged())
    }

    /// Mean of `cell` at checkpoint `k`, if `k` is a checkpoint.
    pub fn mean_at(&self, k: u64, cell: usize) -> Option<f64> {
        let row = self.aggregate.checkpoints.iter().position(|&c| c == k)?;
        Some(self.aggregate.mean[row][cell])
    }

    pub fn final_histogram(&self, cell: usize) -> [u64; BINS] {
        self.aggregate
            .histograms
            .last()
            .map_or([0; BINS], |h| h.counts[cell])
    }

    /// Mean over histories that recorded a window share.
    pub fn mean_window_share(&self) -> Option<f64> {
        let mut sum = CompensatedSum::default();
        let mut n = 0usize;
        for share in self.histories.iter().filter_map(|h| h.window_share) {
            sum.add(share);
            n += 1;
        }
        (n > 0).then(|| sum.value() / n as f64)
    }
}

struct HistoryRun {
    probabilities: Vec<Vec<f64>>,
    final_counts: Vec<f64>,
    window: (u64, u64),
    posteriors: Option<Vec<Vec<f64>>>,
}

fn run_one<M: LanguageModel + Clone>(
    template: &M,
    config: &EnsembleConfig,
    checkpoints: &[u64],
    history: usize,
) -> Result<HistoryRun> {
    let mut model = template.clone();
    let mut source = derive_stream(config.master_seed, history as u64);
    let window_start = config.n_utterances - config.n_utterances / 10;
    let mut hits = 0u64;
    let mut events = 0u64;
    let mut probabilities = Vec::with_capacity(checkpoints.len());
    let mut posteriors = config.hearer_priors.as_ref().map(|_| Vec::with_capacity(checkpoints.len()));
    let mut error = None;
    drive(
        &mut model,
        &mut source,
        config.n_utterances,
        checkpoints,
        |m, u| {
            if u.k > window_start {
                if let Some(hit) = m.window_event(u) {
                    events += 1;
                    hits += u64::from(hit);
                }
            }
        },
        |m, _| {
            probabilities.push(m.probabilities());
            if let (Some(out), Some(priors)) = (posteriors.as_mut(), config.hearer_priors.as_ref()) {
                let weights = m.hearer_weights().unwrap_or_default();
                match posterior(&weights, priors) {
                    Ok(p) => out.push(p),
                    Err(e) => {
                        error.get_or_insert(e);
                    }
                }
            }
        },
    );
    if let Some(e) = error {
        return Err(e);
    }
    Ok(HistoryRun {
        probabilities,
        final_counts: model.counts(),
        window: (hits, events),
        posteriors,
    })
}

/// Runs `config.n_histories` histories of `template`; history `h` draws from
/// `derive_stream(master_seed, h)`.
pub fn run_ensemble<M>(template: &M, config: &EnsembleConfig) -> Result<EnsembleResult>
where
    M: LanguageModel + Clone + Send + Sync,
{
    config.validate()?;
    if let Some(priors) = &config.hearer_priors {
        let weights = template
            .hearer_weights()
            .ok_or_else(|| Error::Usage("this model does not support hearer interpretation".into()))?;
        if weights.len() != priors.len() {
            return Err(Error::config(
                "priors",
                format!("{} priors for {} messages", priors.len(), weights.len()),
            ));
        }
    }
    let checkpoints = config.resolved_checkpoints();
    let cell_labels = template.cell_labels();
    let n_cells = cell_labels.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start {} workers: {e}", config.worker_count)))?;

    let mut acc = Accumulator::new(&checkpoints, n_cells);
    let mut hearer_sums: Option<Vec<Vec<CompensatedSum>>> = config.hearer_priors.as_ref().map(|p| {
        vec![vec![CompensatedSum::default(); p.len()]; checkpoints.len()]
    });
    let mut sample_paths = Vec::new();
    let mut histories = Vec::with_capacity(config.n_histories);

    let mut start = 0;
    while start < config.n_histories {
        let end = (start + CHUNK).min(config.n_histories);
        let runs: Vec<Result<HistoryRun>> = pool.install(|| {
            (start..end)
                .into_par_iter()
                .map(|h| run_one(template, config, &checkpoints, h))
                .collect()
        });
        for (h, run) in (start..end).zip(runs) {
            let run = run?;
            acc.add(&run.probabilities);
            if let (Some(sums), Some(posts)) = (hearer_sums.as_mut(), run.posteriors.as_ref()) {
                for (row, post) in sums.iter_mut().zip(posts) {
                    for (s, &p) in row.iter_mut().zip(post) {
                        s.add(p);
                    }
                }
            }
            let final_probabilities = run.probabilities.last().cloned().unwrap_or_default();
            let (hits, events) = run.window;
            histories.push(HistorySummary {
                history_id: h,
                verdict: template.verdict(&final_probabilities, config.epsilon),
                final_probabilities,
                final_counts: run.final_counts,
                window_share: (events > 0).then(|| hits as f64 / events as f64),
                final_posterior: run.posteriors.and_then(|mut p| p.pop()),
            });
            if h < config.sample_paths {
                sample_paths.push(SamplePath {
                    history_id: h,
                    probabilities: run.probabilities,
                });
            }
        }
        start = end;
    }

    let n = config.n_histories as f64;
    Ok(EnsembleResult {
        cell_labels,
        n_utterances: config.n_utterances,
        epsilon: config.epsilon,
        aggregate: acc.finish(),
        sample_paths,
        histories,
        hearer_mean: hearer_sums.map(|rows| {
            rows.iter()
                .map(|row| row.iter().map(|s| s.value() / n).collect())
                .collect()
        }),
    })
}
