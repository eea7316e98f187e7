//! Command-line front end. Every option can come from a flat `key = value`
//! config file (`--config`); flags take precedence. Each run writes a
//! `manifest.txt` in the same format, so `--config <out>/manifest.txt`
//! repeats the run exactly.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::data::{load_dataset, save_dataset, CovariatePolicy, Dataset};
use crate::error::{Error, Result};
use crate::fmt::{g17, write_file};
use crate::likelihood::PriorSpec;
use crate::mediation::{risk_ratio_curves, TimeGrid};
use crate::model_space::{Family, ModelConfiguration, ModelLabel};
use crate::prediction::{load_test_frame, predictive_power, PredictionMode, PredictionRequest};
use crate::prior::{calibrated_prior, AnnealingConfig, CalibrationResult, WeightScheme};
use crate::sampler::{load_draws, run_mcmc, save_draws, summarize_posterior, IndicatorMask, SamplerConfig};
use crate::simulation::{
    generate_dataset, run_power_study, run_replication_study, FitSettings, PowerStudyConfig, ReplicationConfig,
    Scenario, ScenarioLabel,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "medbma", version, about = "Bayesian model averaging for treatment, response and survival")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate the model prior, sample the posterior and summarize it.
    Fit(FitArgs),
    /// Log risk ratio and mediation proportion curves from posterior draws.
    Riskratio(RiskRatioArgs),
    /// Predictive power of a future or completed trial.
    Power(PowerArgs),
    /// Replication study on a synthetic scenario.
    Simulate(SimulateArgs),
    /// Prior inclusion probabilities matched to AIC-based model weights.
    CalibratePriors(CalibrateArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Flat `key = value` file supplying any option below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PriorArgs {
    /// rank, equal or reversed-values.
    #[arg(long)]
    weighting: Option<WeightScheme>,
    /// Shorthand for `--weighting equal`.
    #[arg(long)]
    equal_priors: bool,
    #[arg(long)]
    coef_sd: Option<f64>,
    #[arg(long)]
    anneal_evaluations: Option<usize>,
}

#[derive(Debug, Args)]
struct SamplerArgs {
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    proposal_sd: Option<f64>,
    #[arg(long)]
    adapt_window: Option<usize>,
    #[arg(long)]
    birth_sd: Option<f64>,
}

#[derive(Debug, Args)]
struct FitArgs {
    #[command(flatten)]
    common: Common,
    /// Subject CSV.
    #[arg(long)]
    data: Option<PathBuf>,
    /// reject or impute (group-mean imputation of missing covariates).
    #[arg(long)]
    covariate_policy: Option<String>,
    /// Fix the model, e.g. `R5/S7`, instead of averaging over models.
    #[arg(long)]
    model: Option<String>,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Debug, Args)]
struct RiskRatioArgs {
    #[command(flatten)]
    common: Common,
    /// Posterior draws CSV written by `fit`.
    #[arg(long)]
    draws: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    /// Explicit comma-separated times; overrides the regular grid.
    #[arg(long)]
    times: Option<String>,
    /// Regular grid from 1% of the landmark up to it.
    #[arg(long)]
    grid_points: Option<usize>,
    /// Grid end (default: largest observed time).
    #[arg(long)]
    landmark: Option<f64>,
    /// Use at most this many evenly spaced draws (0 = all).
    #[arg(long)]
    max_draws: Option<usize>,
}

#[derive(Debug, Args)]
struct PowerArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    draws: Option<PathBuf>,
    /// Test frame CSV: arm, covariate and optionally response.
    #[arg(long)]
    frame: Option<PathBuf>,
    /// Observed data; required for interim_completion.
    #[arg(long)]
    data: Option<PathBuf>,
    /// future_study or interim_completion.
    #[arg(long)]
    mode: Option<PredictionMode>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    landmark: Option<f64>,
    #[arg(long)]
    max_draws: Option<usize>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// I, II, III or IV.
    #[arg(long)]
    scenario: Option<String>,
    /// recovery, power or data.
    #[arg(long)]
    study: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    grid_points: Option<usize>,
    #[arg(long)]
    curve_draws: Option<usize>,
    #[arg(long)]
    population: Option<usize>,
    /// Comma-separated sizes of the independent study (power study).
    #[arg(long)]
    n2: Option<String>,
    /// Comma-separated prediction modes (power study).
    #[arg(long)]
    modes: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    power_draws: Option<usize>,
    #[command(flatten)]
    prior: PriorArgs,
    #[command(flatten)]
    sampler: SamplerArgs,
}

#[derive(Debug, Args)]
struct CalibrateArgs {
    #[command(flatten)]
    common: Common,
    /// Subject CSV; not needed with equal weighting.
    #[arg(long)]
    data: Option<PathBuf>,
    #[command(flatten)]
    prior: PriorArgs,
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.threads {
        Some(0) => Err(Error::InvalidConfiguration("--threads must be positive".into())),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::InvalidConfiguration(format!("thread pool: {e}")))
            .and_then(|pool| pool.install(|| dispatch(cli.command))),
        None => dispatch(cli.command),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Fit(a) => cmd_fit(a),
        Command::Riskratio(a) => cmd_riskratio(a),
        Command::Power(a) => cmd_power(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::CalibratePriors(a) => cmd_calibrate(a),
    }
}

/// Parses a flat `key = value` file. Blank lines and `#` comments are
/// skipped; keys are case-sensitive with `_` and `-` interchangeable.
pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            line: i as u64 + 1,
            message: format!("expected `key = value`, got '{line}'"),
        })?;
        let key = k.trim().replace('_', "-");
        if key.is_empty() {
            return Err(Error::Parse {
                line: i as u64 + 1,
                message: "empty key".into(),
            });
        }
        if map.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Parse {
                line: i as u64 + 1,
                message: format!("duplicate key '{key}'"),
            });
        }
    }
    Ok(map)
}

/// Merges flags over config-file values and records every resolved
/// setting for the manifest.
struct Resolver {
    command: &'static str,
    file: BTreeMap<String, String>,
    resolved: BTreeMap<String, String>,
}

impl Resolver {
    fn new(command: &'static str, common: &Common) -> Result<Self> {
        let mut file = match &common.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                parse_config(&text)?
            }
            None => BTreeMap::new(),
        };
        if let Some(c) = file.remove("command") {
            if c != command {
                return Err(Error::InvalidConfiguration(format!(
                    "config file is for `{c}`, not `{command}`"
                )));
            }
        }
        file.remove("version");
        let mut r = Resolver {
            command,
            file,
            resolved: BTreeMap::new(),
        };
        r.get("out", common.out.clone(), Some(PathBuf::from("out")))?;
        Ok(r)
    }

    fn get<T>(&mut self, key: &str, flag: Option<T>, default: Option<T>) -> Result<Option<T>>
    where
        T: FromStr + ToManifest,
        T::Err: Display,
    {
        let from_file = self.file.remove(key);
        let value = match (flag, from_file) {
            (Some(v), _) => Some(v),
            (None, Some(text)) => Some(text.parse::<T>().map_err(|e| {
                Error::InvalidConfiguration(format!("config key '{key}': {e}"))
            })?),
            (None, None) => default,
        };
        if let Some(v) = &value {
            self.resolved.insert(key.to_string(), v.to_manifest());
        }
        Ok(value)
    }

    fn value<T>(&mut self, key: &str, flag: Option<T>, default: T) -> Result<T>
    where
        T: FromStr + ToManifest,
        T::Err: Display,
    {
        Ok(self.get(key, flag, Some(default))?.expect("default supplied"))
    }

    fn required<T>(&mut self, key: &str, flag: Option<T>) -> Result<T>
    where
        T: FromStr + ToManifest,
        T::Err: Display,
    {
        self.get(key, flag, None)?
            .ok_or_else(|| Error::InvalidConfiguration(format!("missing required option --{key}")))
    }

    fn flag(&mut self, key: &str, set: bool) -> Result<bool> {
        let v = self.value(key, set.then_some(true), false)?;
        Ok(v)
    }

    /// Errors on leftover config keys, then creates the output directory
    /// and writes the manifest.
    fn finish(mut self) -> Result<PathBuf> {
        if let Some(k) = self.file.keys().next() {
            return Err(Error::InvalidConfiguration(format!(
                "unknown config key '{k}' for `{}`",
                self.command
            )));
        }
        let out = PathBuf::from(self.resolved.remove("out").expect("out is always resolved"));
        std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
        let resolved = std::mem::take(&mut self.resolved);
        let command = self.command;
        let out_text = out.to_manifest();
        write_file(&out, "manifest.txt", &|w| {
            writeln!(w, "# medbma run manifest; rerun with --config")?;
            writeln!(w, "command = {command}")?;
            writeln!(w, "version = {}", env!("CARGO_PKG_VERSION"))?;
            writeln!(w, "out = {out_text}")?;
            for (k, v) in &resolved {
                writeln!(w, "{k} = {v}")?;
            }
            Ok(())
        })?;
        Ok(out)
    }
}

/// Text form that parses back to the same value.
trait ToManifest {
    fn to_manifest(&self) -> String;
}

macro_rules! display_manifest {
    ($($t:ty),*) => {$(
        impl ToManifest for $t {
            fn to_manifest(&self) -> String {
                self.to_string()
            }
        }
    )*};
}
display_manifest!(usize, u64, bool, String, WeightScheme, PredictionMode);

impl ToManifest for f64 {
    fn to_manifest(&self) -> String {
        g17(*self)
    }
}

impl ToManifest for PathBuf {
    fn to_manifest(&self) -> String {
        self.display().to_string()
    }
}

struct PipelineOptions {
    seed: u64,
    fit: FitSettings,
}

fn resolve_pipeline(r: &mut Resolver, common: &Common, prior: &PriorArgs, sampler: &SamplerArgs) -> Result<PipelineOptions> {
    let seed = r.value("seed", common.seed, 1)?;
    let fit = resolve_fit_settings(r, prior, sampler, seed)?;
    Ok(PipelineOptions { seed, fit })
}

fn resolve_prior(r: &mut Resolver, a: &PriorArgs, seed: u64) -> Result<(WeightScheme, AnnealingConfig, PriorSpec)> {
    let equal = r.flag("equal-priors", a.equal_priors)?;
    let weighting = r.value("weighting", a.weighting, WeightScheme::Rank)?;
    let weighting = if equal { WeightScheme::Equal } else { weighting };
    let defaults = AnnealingConfig::default();
    let annealing = AnnealingConfig {
        evaluations: r.value("anneal-evaluations", a.anneal_evaluations, defaults.evaluations)?,
        seed,
        ..defaults
    };
    let prior = PriorSpec {
        coef_sd: r.value("coef-sd", a.coef_sd, PriorSpec::default().coef_sd)?,
        ..PriorSpec::default()
    };
    prior.validate()?;
    Ok((weighting, annealing, prior))
}

fn resolve_fit_settings(r: &mut Resolver, prior: &PriorArgs, s: &SamplerArgs, seed: u64) -> Result<FitSettings> {
    let (weighting, annealing, prior) = resolve_prior(r, prior, seed)?;
    let d = SamplerConfig::default();
    let sampler = SamplerConfig {
        chains: r.value("chains", s.chains, d.chains)?,
        iterations: r.value("iterations", s.iterations, d.iterations)?,
        burn_in: r.value("burn-in", s.burn_in, d.burn_in)?,
        thin: r.value("thin", s.thin, d.thin)?,
        proposal_sd_init: r.value("proposal-sd", s.proposal_sd, d.proposal_sd_init)?,
        adapt_window: r.value("adapt-window", s.adapt_window, d.adapt_window)?,
        birth_proposal_sd: r.value("birth-sd", s.birth_sd, d.birth_proposal_sd)?,
        seed,
        ..d
    };
    sampler.validate()?;
    Ok(FitSettings {
        sampler,
        weighting,
        annealing,
        prior,
    })
}

fn covariate_policy(text: &str) -> Result<CovariatePolicy> {
    match text {
        "reject" => Ok(CovariatePolicy::Reject),
        "impute" => Ok(CovariatePolicy::GroupMeanImpute),
        other => Err(Error::InvalidConfiguration(format!(
            "covariate policy must be reject or impute, got '{other}'"
        ))),
    }
}

/// `R5/S7` style pair.
fn parse_model_pair(text: &str) -> Result<ModelConfiguration> {
    let (r, s) = text
        .split_once(['/', ','])
        .ok_or_else(|| Error::InvalidConfiguration(format!("model must look like R5/S7, got '{text}'")))?;
    let r: ModelLabel = r.trim().parse()?;
    let s: ModelLabel = s.trim().parse()?;
    ModelConfiguration::from_labels(r, s)
}

fn write_calibration(out: &Path, results: &[&CalibrationResult]) -> Result<()> {
    write_file(out, "prior_probs.csv", &|w| {
        writeln!(w, "family,model,target_weight,prior_probability")?;
        for c in results {
            let fam = family_name(c.table.family);
            let total: f64 = c.targets.iter().sum();
            for (i, label) in c.table.labels.iter().enumerate() {
                writeln!(
                    w,
                    "{fam},{label},{},{}",
                    g17(c.targets[i] / total),
                    g17(c.table.probabilities[i])
                )?;
            }
        }
        Ok(())
    })?;
    write_file(out, "psi.csv", &|w| {
        writeln!(w, "family,term,psi,residual")?;
        for c in results {
            for (j, p) in c.psi.iter().enumerate() {
                writeln!(w, "{},{},{},{}", family_name(c.table.family), j + 1, g17(*p), g17(c.residual))?;
            }
        }
        Ok(())
    })
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Response => "response",
        Family::Survival => "survival",
    }
}

fn cmd_fit(a: FitArgs) -> Result<()> {
    let mut r = Resolver::new("fit", &a.common)?;
    let data_path = r.required("data", a.data)?;
    let policy = covariate_policy(&r.value("covariate-policy", a.covariate_policy, "reject".to_string())?)?;
    let model = r.get("model", a.model, None)?;
    let opts = resolve_pipeline(&mut r, &a.common, &a.prior, &a.sampler)?;
    let data = load_dataset(&data_path, policy)?;
    let out = r.finish()?;

    let (prior, response, survival) =
        calibrated_prior(&data, opts.fit.weighting, &opts.fit.annealing, &opts.fit.prior)?;
    write_calibration(&out, &[&response, &survival])?;
    let mut sampler = opts.fit.sampler;
    if let Some(m) = model {
        sampler.initial_config = Some(parse_model_pair(&m)?);
        sampler.frozen = IndicatorMask::all();
    }
    let draws = run_mcmc(&data, &prior, &sampler)?;
    save_draws(&draws, out.join("draws.csv"))?;
    let summary = summarize_posterior(&draws)?;
    write_file(&out, "coefficients.csv", &|w| summary.write_parameters(w))?;
    write_file(&out, "model_probs.csv", &|w| summary.write_models(w))?;
    eprintln!(
        "fit: {} draws; top models {} and {} (seed {})",
        draws.len(),
        summary.top_model(Family::Response),
        summary.top_model(Family::Survival),
        opts.seed
    );
    Ok(())
}

fn cmd_riskratio(a: RiskRatioArgs) -> Result<()> {
    let mut r = Resolver::new("riskratio", &a.common)?;
    let draws_path = r.required("draws", a.draws)?;
    let data_path = r.required("data", a.data)?;
    let times = r.get("times", a.times, None)?;
    let points = r.value("grid-points", a.grid_points, 100)?;
    let landmark = r.get("landmark", a.landmark, None)?;
    let max_draws = r.value("max-draws", a.max_draws, 0)?;
    let draws = load_draws(&draws_path)?;
    let data = load_dataset(&data_path, CovariatePolicy::Reject)?;
    let grid = match times {
        Some(t) => TimeGrid::new(parse_list::<f64>(&t, "times")?)?,
        None => {
            let end = landmark.unwrap_or_else(|| data.iter().map(|s| s.time).fold(0.0, f64::max));
            TimeGrid::up_to_landmark(end, points)?
        }
    };
    let out = r.finish()?;
    let curves = risk_ratio_curves(&data, &draws.thinned(max_draws), &grid)?;
    write_file(&out, "lrr_curves.csv", &|w| curves.write_lrr(w))?;
    write_file(&out, "medprop_curves.csv", &|w| curves.write_proportion(w))
}

fn parse_list<T: FromStr>(text: &str, key: &str) -> Result<Vec<T>>
where
    T::Err: Display,
{
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<T>()
                .map_err(|e| Error::InvalidConfiguration(format!("{key}: '{}': {e}", s.trim())))
        })
        .collect()
}

fn cmd_power(a: PowerArgs) -> Result<()> {
    let mut r = Resolver::new("power", &a.common)?;
    let seed = r.value("seed", a.common.seed, 1)?;
    let draws_path = r.required("draws", a.draws)?;
    let frame_path = r.required("frame", a.frame)?;
    let data_path = r.get("data", a.data, None)?;
    let mode = r.value("mode", a.mode, PredictionMode::FutureStudy)?;
    let alpha = r.value("alpha", a.alpha, 0.05)?;
    let landmark = r.required("landmark", a.landmark)?;
    let max_draws = r.value("max-draws", a.max_draws, 0)?;
    let draws = load_draws(&draws_path)?;
    let frame = load_test_frame(&frame_path)?;
    let observed: Option<Dataset> = data_path
        .map(|p| load_dataset(p, CovariatePolicy::Reject))
        .transpose()?;
    let request = PredictionRequest::new(mode, frame, landmark, alpha)?;
    let out = r.finish()?;
    let result = predictive_power(&draws.thinned(max_draws), &request, observed.as_ref(), seed)?;
    write_file(&out, "power.csv", &|w| result.write_summary(w))?;
    write_file(&out, "power_pvalues.csv", &|w| result.write_pvalues(w))?;
    eprintln!("power: {} over {} draws", g17(result.power), result.draws_used);
    Ok(())
}

fn cmd_simulate(a: SimulateArgs) -> Result<()> {
    let mut r = Resolver::new("simulate", &a.common)?;
    let label: ScenarioLabel = r.required::<String>("scenario", a.scenario)?.parse()?;
    let scenario = Scenario::get(label);
    let study = r.value("study", a.study, "recovery".to_string())?;
    let n = r.value("n", a.n, 1000)?;
    match study.as_str() {
        "data" => {
            let seed = r.value("seed", a.common.seed, 1)?;
            let out = r.finish()?;
            let data = generate_dataset(&scenario, n, seed)?;
            save_dataset(&data, out.join("data.csv"))
        }
        "recovery" => {
            let d = ReplicationConfig::default();
            let reps = r.value("reps", a.reps, d.reps)?;
            let grid_points = r.value("grid-points", a.grid_points, d.grid_points)?;
            let curve_draws = r.value("curve-draws", a.curve_draws, d.curve_draws)?;
            let population = r.value("population", a.population, d.population)?;
            let opts = resolve_pipeline(&mut r, &a.common, &a.prior, &a.sampler)?;
            let out = r.finish()?;
            let config = ReplicationConfig {
                n,
                reps,
                seed: opts.seed,
                fit: opts.fit,
                grid_points,
                curve_draws,
                population,
            };
            let report = run_replication_study(&scenario, &config)?;
            report.write_dir(&out)?;
            eprintln!(
                "simulate: scenario {label}, {} of {reps} replications succeeded in {:.1}s",
                reps - report.failures.len(),
                report.runtime_secs
            );
            Ok(())
        }
        "power" => {
            let d = PowerStudyConfig::default();
            let reps = r.value("reps", a.reps, d.reps)?;
            let n2_text = r.value("n2", a.n2, join(&d.n2))?;
            let modes_text = r.value("modes", a.modes, join(&d.modes))?;
            let alpha = r.value("alpha", a.alpha, d.alpha)?;
            let power_draws = r.value("power-draws", a.power_draws, d.power_draws)?;
            let opts = resolve_pipeline(&mut r, &a.common, &a.prior, &a.sampler)?;
            let config = PowerStudyConfig {
                n_train: n,
                n2: parse_list(&n2_text, "n2")?,
                reps,
                modes: parse_list(&modes_text, "modes")?,
                alpha,
                power_draws,
                seed: opts.seed,
                fit: opts.fit,
            };
            let out = r.finish()?;
            let report = run_power_study(&scenario, &config)?;
            report.write_dir(&out)?;
            eprintln!("simulate: power study for scenario {label} in {:.1}s", report.runtime_secs);
            Ok(())
        }
        other => Err(Error::InvalidConfiguration(format!(
            "study must be recovery, power or data, got '{other}'"
        ))),
    }
}

fn join<T: Display>(v: &[T]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn cmd_calibrate(a: CalibrateArgs) -> Result<()> {
    let mut r = Resolver::new("calibrate-priors", &a.common)?;
    let seed = r.value("seed", a.common.seed, 1)?;
    let data_path = r.get("data", a.data, None)?;
    let (weighting, annealing, prior) = resolve_prior(&mut r, &a.prior, seed)?;
    let data = match (&data_path, weighting) {
        (Some(p), _) => load_dataset(p, CovariatePolicy::Reject)?,
        (None, WeightScheme::Equal) => placeholder_dataset(),
        (None, _) => {
            return Err(Error::InvalidConfiguration(
                "missing required option --data (only equal weighting runs without data)".into(),
            ))
        }
    };
    let out = r.finish()?;
    let (_, response, survival) = calibrated_prior(&data, weighting, &annealing, &prior)?;
    write_calibration(&out, &[&response, &survival])
}

/// Equal weighting never looks at the data; this stands in for it.
fn placeholder_dataset() -> Dataset {
    use crate::data::SubjectRecord;
    let rec = |a| SubjectRecord::new(a, 0.0, 0, 1.0, 1).expect("valid record");
    Dataset::new(vec![rec(0), rec(1)]).expect("valid dataset")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_parsing() {
        let map = parse_config("# comment\n\nburn_in = 20\nout=dir \n weighting = equal\n").unwrap();
        assert_eq!(map["burn-in"], "20");
        assert_eq!(map["out"], "dir");
        assert_eq!(map["weighting"], "equal");
        assert!(matches!(parse_config("a = 1\na = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(matches!(parse_config("no equals"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn model_pairs() {
        let c = parse_model_pair("R5/S7").unwrap();
        assert_eq!(c, ModelConfiguration::from_labels("R5".parse().unwrap(), "S7".parse().unwrap()).unwrap());
        assert!(parse_model_pair("R5").is_err());
        assert!(parse_model_pair("R6/S1").is_err());
    }

    #[test]
    fn float_settings_round_trip_through_manifest() {
        for x in [0.1, 1e-300, 123456.789, 0.44] {
            assert_eq!(x.to_manifest().parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn usage_errors_exit_two() {
        assert_eq!(run(["medbma", "bogus"]), EXIT_USAGE);
        assert_eq!(run(["medbma", "simulate", "--scenario", "V"]), EXIT_USAGE);
        assert_eq!(run(["medbma", "fit", "--data", "/nonexistent/x.csv", "--out", "/nonexistent/o"]), EXIT_USAGE);
        assert_eq!(run(["medbma", "--help"]), EXIT_OK);
    }

    #[test]
    fn numerical_errors_exit_three() {
        let sep = Error::Separation { parameter: "beta1".into(), value: 31.0 };
        assert_eq!(exit_code(&sep), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Numerical("x".into())), EXIT_NUMERICAL);
        assert_eq!(exit_code(&Error::Empty), EXIT_USAGE);
    }
}
