//! Plot-ready CSV/JSON files and the reproducibility manifest.
//!
//! Floats are written with Rust's shortest round-trip formatting, so reading
//! a value back yields the identical `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::ensemble::EnsembleResult;
use crate::error::{Error, Result};
use crate::history::{History, Outcome, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Everything needed to regenerate an output directory byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub version: String,
    pub command: String,
    pub model: String,
    pub config_hash: String,
    pub seed: u64,
    pub workers: usize,
    pub histories: usize,
    pub utterances: u64,
    pub epsilon: f64,
    pub cell_labels: Vec<String>,
    pub files: Vec<String>,
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        Ok(Self {
            root,
            written: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.root
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    /// Writes `name` through a buffered writer.
    pub fn write_with(&mut self, name: &str, f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
        let path = self.root.join(name);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(file);
        f(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(&path, e))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let text = serde_json::to_string_pretty(value)?;
        self.write_with(name, |w| writeln!(w, "{text}"))
    }

    /// Records the files written so far in `manifest.json`.
    pub fn finish(mut self, mut manifest: Manifest) -> Result<PathBuf> {
        manifest.files = self.written.clone();
        self.write_json("manifest.json", &manifest)?;
        Ok(self.root)
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Mean rows (sample columns empty) followed by one row per retained sample
/// path, for every checkpoint.
pub fn write_trajectory(w: &mut dyn Write, result: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "checkpoint_k,message_id,mean_p,sample_path_id,p")?;
    for (row, &k) in result.aggregate.checkpoints.iter().enumerate() {
        for (cell, mean) in result.aggregate.mean[row].iter().enumerate() {
            writeln!(w, "{k},{cell},{mean},,")?;
        }
        for path in &result.sample_paths {
            for (cell, p) in path.probabilities[row].iter().enumerate() {
                writeln!(w, "{k},{cell},,{},{p}", path.history_id)?;
            }
        }
    }
    Ok(())
}

pub fn write_histograms(w: &mut dyn Write, result: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "checkpoint_k,message_id,bin_index,count")?;
    for h in &result.aggregate.histograms {
        for (cell, bins) in h.counts.iter().enumerate() {
            for (bin, count) in bins.iter().enumerate() {
                writeln!(w, "{},{cell},{bin},{count}", h.checkpoint)?;
            }
        }
    }
    Ok(())
}

pub fn write_verdicts(w: &mut dyn Write, result: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "history_id,verdict,final_p_max,message_id")?;
    for h in &result.histories {
        let p_max = h.final_probabilities.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let (verdict, winner) = match h.verdict {
            Verdict::Converged(i) => ("converged", Some(i)),
            Verdict::Unresolved => ("unresolved", None),
        };
        writeln!(w, "{},{verdict},{p_max},{}", h.history_id, opt(winner))?;
    }
    Ok(())
}

/// Mean hearer posterior per checkpoint.
pub fn write_hearer_mean(w: &mut dyn Write, result: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "checkpoint_k,message_id,mean_posterior")?;
    if let Some(mean) = &result.hearer_mean {
        for (&k, row) in result.aggregate.checkpoints.iter().zip(mean) {
            for (i, p) in row.iter().enumerate() {
                writeln!(w, "{k},{i},{p}")?;
            }
        }
    }
    Ok(())
}

pub fn write_hearer_final(w: &mut dyn Write, result: &EnsembleResult) -> std::io::Result<()> {
    writeln!(w, "history_id,message_id,posterior")?;
    for h in &result.histories {
        for (i, p) in h.final_posterior.iter().flatten().enumerate() {
            writeln!(w, "{},{i},{p}", h.history_id)?;
        }
    }
    Ok(())
}

fn outcome_name(o: Outcome) -> &'static str {
    match o {
        Outcome::Success => "success",
        Outcome::Failure => "failure",
        Outcome::Exhausted => "exhausted",
    }
}

pub fn write_utterances(w: &mut dyn Write, history: &History) -> std::io::Result<()> {
    writeln!(w, "k,message_id,outcome,payoff,speaker,scene,gr,form,verb")?;
    for u in &history.utterances {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            u.k,
            u.message_id,
            outcome_name(u.outcome),
            u.payoff,
            opt(u.speaker),
            opt(u.scene),
            opt(u.gr),
            opt(u.form),
            opt(u.verb)
        )?;
    }
    Ok(())
}

/// Probabilities and raw counts of one history at each checkpoint.
pub fn write_history_trajectory(w: &mut dyn Write, history: &History) -> std::io::Result<()> {
    writeln!(w, "checkpoint_k,cell_id,p")?;
    let t = &history.trajectory;
    for (k, row) in t.checkpoints.iter().zip(&t.probabilities) {
        for (cell, p) in row.iter().enumerate() {
            writeln!(w, "{k},{cell},{p}")?;
        }
    }
    Ok(())
}

pub fn write_history_counts(w: &mut dyn Write, history: &History) -> std::io::Result<()> {
    writeln!(w, "checkpoint_k,count_id,count")?;
    let t = &history.trajectory;
    for (k, row) in t.checkpoints.iter().zip(&t.counts) {
        for (i, c) in row.iter().enumerate() {
            writeln!(w, "{k},{i},{c}")?;
        }
    }
    Ok(())
}
