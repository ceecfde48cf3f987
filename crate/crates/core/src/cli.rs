//! Command-line front end: argument parsing and command dispatch.

use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::analysis::{
    case_study_report, competition_usages, efficiency_report, ingest_case_table, ingest_prior_table, FormProfile,
};
use crate::config::{parse_config, LoadedConfig, Model, Scenario};
use crate::engine::derive_stream;
use crate::ensemble::{run_ensemble, EnsembleConfig, EnsembleResult, DEFAULT_EPSILON};
use crate::error::{Error, Result};
use crate::history::{default_checkpoints, run_history, LanguageModel};
use crate::output::{self, Format, Manifest, OutputDir};
use crate::recursion::run_phased_scenario;
use crate::VERSION;

const DEFAULT_SEED: u64 = 42;
const DEFAULT_HISTORIES: usize = 200;
const DEFAULT_UTTERANCES: u64 = 100_000;

#[derive(Debug, Parser)]
#[command(name = "syntax-emergence", version, about = "Simulate language histories under reinforcement learning")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate one history (or run a phased scenario) and write every utterance.
    Run(RunArgs),
    /// Run many histories and write trajectories, histograms and verdicts.
    Ensemble(EnsembleArgs),
    /// Run an ensemble and report the hearer's posterior interpretation.
    Hearer(HearerArgs),
    /// Efficiency report for a form-competition scenario.
    Analyze(AnalyzeArgs),
    /// Classify a diachronic case study from historical and modern counts.
    Casestudy(CaseStudyArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub utterances: Option<u64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct EnsembleArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub histories: Option<usize>,
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
}

#[derive(Debug, Args)]
pub struct HearerArgs {
    #[command(flatten)]
    pub ensemble: EnsembleArgs,
    /// Comma-separated hearer priors; defaults to the speaker's distribution.
    #[arg(long, value_delimiter = ',')]
    pub priors: Option<Vec<f64>>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 1)]
    pub unmarked_morphemes: u32,
    #[arg(long, default_value_t = 2)]
    pub marked_morphemes: u32,
}

#[derive(Debug, Args)]
pub struct CaseStudyArgs {
    /// Modern counts: `category,unmarked_count,marked_count,total`.
    #[arg(long)]
    pub priors: PathBuf,
    /// Historical counts: `period,context,unmarked_count,marked_count`.
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments and runs the command, returning the process exit code:
/// 0 on success, 1 for configuration errors, 2 for runtime errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli.command, &mut std::io::stdout()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_configuration() {
                1
            } else {
                2
            }
        }
    }
}

/// Runs a parsed command, writing the human-readable summary to `report`.
pub fn execute(command: &Command, report: &mut dyn Write) -> Result<i32> {
    match command {
        Command::Run(a) => cmd_run(a, report),
        Command::Ensemble(a) => cmd_ensemble(a, report).map(|_| 0),
        Command::Hearer(a) => cmd_hearer(a, report).map(|_| 0),
        Command::Analyze(a) => cmd_analyze(a, report).map(|_| 0),
        Command::Casestudy(a) => cmd_casestudy(a, report).map(|_| 0),
    }
}

fn say(report: &mut dyn Write, line: impl std::fmt::Display) -> Result<()> {
    writeln!(report, "{line}").map_err(|e| Error::io("<stdout>", e))
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn manifest(command: &str, config: &LoadedConfig, cfg: &EnsembleConfig, cell_labels: Vec<String>) -> Manifest {
    Manifest {
        version: VERSION.to_string(),
        command: command.to_string(),
        model: config.name.clone(),
        config_hash: config.hash.clone(),
        seed: cfg.master_seed,
        workers: cfg.worker_count,
        histories: cfg.n_histories,
        utterances: cfg.n_utterances,
        epsilon: cfg.epsilon,
        cell_labels,
        files: Vec::new(),
    }
}

fn ensemble_config(config: &LoadedConfig, args: &EnsembleArgs) -> EnsembleConfig {
    let run = &config.run;
    EnsembleConfig {
        n_histories: args.histories.or(run.histories).unwrap_or(DEFAULT_HISTORIES),
        n_utterances: args.common.utterances.or(run.utterances).unwrap_or(DEFAULT_UTTERANCES),
        master_seed: args.common.seed.or(run.seed).unwrap_or(DEFAULT_SEED),
        checkpoints: run.checkpoints.clone().unwrap_or_default(),
        epsilon: args.epsilon.or(run.epsilon).unwrap_or(DEFAULT_EPSILON),
        worker_count: args.workers.or(run.workers).unwrap_or_else(default_workers),
        sample_paths: crate::ensemble::DEFAULT_SAMPLE_PATHS,
        hearer_priors: None,
    }
}

fn write_ensemble(out: &mut OutputDir, result: &EnsembleResult, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            out.write_with("trajectory.csv", |w| output::write_trajectory(w, result))?;
            out.write_with("histograms.csv", |w| output::write_histograms(w, result))?;
            out.write_with("verdicts.csv", |w| output::write_verdicts(w, result))
        }
        Format::Json => out.write_json("ensemble.json", result),
    }
}

fn summarize(report: &mut dyn Write, result: &EnsembleResult) -> Result<()> {
    say(
        report,
        format!(
            "{} histories x {} utterances: {:.4} converged, {:.4} unresolved",
            result.n_histories(),
            result.n_utterances,
            result.converged_fraction(),
            result.unresolved_fraction()
        ),
    )?;
    for (cell, label) in result.cell_labels.iter().enumerate() {
        let converged = result.converged_to_fraction(cell);
        if converged > 0.0 {
            say(report, format!("  converged to {label}: {converged:.4}"))?;
        }
    }
    if let Some(share) = result.mean_window_share() {
        say(report, format!("  mean final-window share: {share}"))?;
    }
    Ok(())
}

pub fn cmd_run(args: &RunArgs, report: &mut dyn Write) -> Result<i32> {
    let config = parse_config(&args.common.config)?;
    let seed = args.common.seed.or(config.run.seed).unwrap_or(DEFAULT_SEED);
    match &config.scenario {
        Scenario::Phased(phased) => {
            let outcome = run_phased_scenario(&phased.words, &phased.phases, seed)?;
            let mut out = OutputDir::create(&args.common.out)?;
            out.write_json("phases.json", &outcome)?;
            let labels = outcome.registry.signs().iter().map(|s| s.id.clone()).collect();
            let mut m = manifest("run", &config, &EnsembleConfig::new(1, 0, seed), labels);
            m.utterances = phased.phases.iter().map(|p| p.utterances).sum();
            out.finish(m)?;
            for r in &outcome.results {
                say(
                    report,
                    format!(
                        "phase {}: {} -> {}",
                        r.phase_id,
                        r.sign_id,
                        r.converged_meaning().unwrap_or("unresolved")
                    ),
                )?;
            }
            say(report, format!("nesting depth {}", outcome.max_depth()))?;
            if let Some(phase) = &outcome.blocked_at {
                eprintln!("error: phase `{phase}` did not converge; later phases were not run");
                return Ok(2);
            }
            Ok(0)
        }
        Scenario::Model(model) => {
            let n = args.common.utterances.or(config.run.utterances).unwrap_or(DEFAULT_UTTERANCES);
            let checkpoints = config.run.checkpoints.clone().unwrap_or_else(|| default_checkpoints(n));
            let mut m = model.clone();
            let history = run_history(&mut m, &mut derive_stream(seed, 0), n, &checkpoints)?;
            let mut out = OutputDir::create(&args.common.out)?;
            match args.common.format {
                Format::Csv => {
                    out.write_with("utterances.csv", |w| output::write_utterances(w, &history))?;
                    out.write_with("trajectory.csv", |w| output::write_history_trajectory(w, &history))?;
                    out.write_with("counts.csv", |w| output::write_history_counts(w, &history))?;
                }
                Format::Json => out.write_json("history.json", &history)?,
            }
            let cfg = EnsembleConfig::new(1, n, seed);
            out.finish(manifest("run", &config, &cfg, model.cell_labels()))?;
            if let Some(final_p) = history.trajectory.final_probabilities() {
                say(report, format!("final probabilities: {final_p:?}"))?;
            }
            Ok(0)
        }
    }
}

pub fn cmd_ensemble(args: &EnsembleArgs, report: &mut dyn Write) -> Result<EnsembleResult> {
    let config = parse_config(&args.common.config)?;
    let model = config.scenario.model()?;
    let cfg = ensemble_config(&config, args);
    let result = run_ensemble(model, &cfg)?;
    let mut out = OutputDir::create(&args.common.out)?;
    write_ensemble(&mut out, &result, args.common.format)?;
    out.finish(manifest("ensemble", &config, &cfg, result.cell_labels.clone()))?;
    summarize(report, &result)?;
    Ok(result)
}

pub fn cmd_hearer(args: &HearerArgs, report: &mut dyn Write) -> Result<EnsembleResult> {
    let config = parse_config(&args.ensemble.common.config)?;
    let model: &Model = config.scenario.model()?;
    let priors = match args.priors.clone().or_else(|| config.run.hearer_priors.clone()) {
        Some(p) => p,
        None => model
            .hearer_priors()
            .ok_or_else(|| Error::Usage("this model does not support hearer interpretation".into()))?,
    };
    let cfg = ensemble_config(&config, &args.ensemble).with_hearer_priors(priors.clone());
    let result = run_ensemble(model, &cfg)?;
    let mut out = OutputDir::create(&args.ensemble.common.out)?;
    write_ensemble(&mut out, &result, args.ensemble.common.format)?;
    if args.ensemble.common.format == Format::Csv {
        out.write_with("hearer.csv", |w| output::write_hearer_mean(w, &result))?;
        out.write_with("hearer_final.csv", |w| output::write_hearer_final(w, &result))?;
    }
    let mut m = manifest("hearer", &config, &cfg, result.cell_labels.clone());
    m.cell_labels.extend(priors.iter().enumerate().map(|(i, p)| format!("prior[{i}]={p}")));
    out.finish(m)?;
    summarize(report, &result)?;
    for i in 0..priors.len() {
        let confident = result
            .histories
            .iter()
            .filter(|h| h.final_posterior.as_ref().is_some_and(|p| p[i] >= 0.99))
            .count();
        say(
            report,
            format!(
                "  final posterior on message {i} >= 0.99: {:.4}",
                confident as f64 / result.n_histories() as f64
            ),
        )?;
    }
    Ok(result)
}

#[derive(Serialize)]
struct AnalysisOutput {
    p_subj: f64,
    final_counts: Vec<f64>,
    report: crate::analysis::EfficiencyReport,
}

pub fn cmd_analyze(args: &AnalyzeArgs, report: &mut dyn Write) -> Result<()> {
    let config = parse_config(&args.common.config)?;
    let Model::FormCompetition(state) = config.scenario.model()? else {
        return Err(Error::Usage("analyze expects a form_competition scenario".into()));
    };
    let n = args.common.utterances.or(config.run.utterances).unwrap_or(DEFAULT_UTTERANCES);
    let seed = args.common.seed.or(config.run.seed).unwrap_or(DEFAULT_SEED);
    let mut state = state.clone();
    crate::history::drive(&mut state, &mut derive_stream(seed, 0), n, &[], |_, _| {}, |_, _| {});
    let usages = competition_usages(
        &state,
        FormProfile::new("unmarked", args.unmarked_morphemes)?,
        FormProfile::new("marked", args.marked_morphemes)?,
    );
    let efficiency = efficiency_report(&usages)?;
    for f in &efficiency.forms {
        say(
            report,
            format!(
                "{}: {} morphemes, p = {}, {} bits",
                f.form, f.morpheme_count, f.probability_in_context, f.informativeness
            ),
        )?;
    }
    say(report, format!("verdict: {:?}", efficiency.verdict).to_lowercase())?;
    let mut out = OutputDir::create(&args.common.out)?;
    out.write_json(
        "analysis.json",
        &AnalysisOutput {
            p_subj: state.p_subj,
            final_counts: state.counts(),
            report: efficiency,
        },
    )?;
    out.finish(manifest("analyze", &config, &EnsembleConfig::new(1, n, seed), state.cell_labels()))?;
    Ok(())
}

pub fn cmd_casestudy(args: &CaseStudyArgs, report: &mut dyn Write) -> Result<()> {
    let priors = ingest_prior_table(&args.priors)?;
    let table = args.table.as_ref().map(ingest_case_table).transpose()?;
    let result = case_study_report(table.as_ref(), &priors)?;
    for p in &result.periods {
        say(
            report,
            format!(
                "{} / {}: marked {}%",
                p.period,
                p.context,
                p.marked_percent.map_or("-".to_string(), |v| v.to_string())
            ),
        )?;
    }
    say(report, format!("p(unmarked meaning) = {}", result.p_unmarked))?;
    say(report, format!("regime: {}", result.regime_label))?;
    if let Some(consistent) = result.consistent {
        say(report, format!("historical trend consistent: {consistent}"))?;
    }
    if let Some(dir) = &args.out {
        let mut out = OutputDir::create(dir)?;
        out.write_json("casestudy.json", &result)?;
    }
    Ok(())
}
