//! Synthetic two-arm trials, replication studies of the full estimation
//! pipeline, and predictive power studies.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::distr::Open01;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::fmt::{g17, write_file};
use crate::likelihood::{dot4, dot6, logistic, ParameterState, PriorSpec, N_PARAMS, PARAM_NAMES};
use crate::mediation::{quantile_sorted, risk_ratio_curves, true_curves, PointSummary, TimeGrid, CURVE_NAMES};
use crate::model_space::{response_terms, survival_terms, Family, ModelConfiguration, ModelLabel};
use crate::prediction::{
    evaluate_predictions, logrank_test, predictive_power, PredictionEvaluation, PredictionMode,
    PredictionRequest, TestFrame, TestSubject,
};
use crate::prior::{calibrated_prior, AnnealingConfig, WeightScheme};
use crate::rng::{derive_seed, substream};
use crate::sampler::{run_mcmc, summarize_posterior, PosteriorSummary, SamplerConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScenarioLabel {
    I,
    II,
    III,
    IV,
}

impl fmt::Display for ScenarioLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScenarioLabel::I => "I",
            ScenarioLabel::II => "II",
            ScenarioLabel::III => "III",
            ScenarioLabel::IV => "IV",
        })
    }
}

impl FromStr for ScenarioLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "I" | "1" => Ok(ScenarioLabel::I),
            "II" | "2" => Ok(ScenarioLabel::II),
            "III" | "3" => Ok(ScenarioLabel::III),
            "IV" | "4" => Ok(ScenarioLabel::IV),
            other => Err(Error::InvalidInput(format!(
                "unknown scenario '{other}' (expected I, II, III or IV)"
            ))),
        }
    }
}

/// A data-generating truth: logistic response, Weibull PH survival with
/// landmark censoring, `X ~ Uniform(x_low, x_high)` and 1:1 allocation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scenario {
    pub label: ScenarioLabel,
    pub beta: [f64; 4],
    pub gamma: [f64; 6],
    pub shape: f64,
    pub rate: f64,
    pub landmark: f64,
    pub x_low: f64,
    pub x_high: f64,
    pub response_model: ModelLabel,
    pub survival_model: ModelLabel,
}

impl Scenario {
    pub fn get(label: ScenarioLabel) -> Self {
        let (beta, gamma, r, s) = match label {
            ScenarioLabel::I => ([1.0, 2.0, -1.0, 2.0], [0.0, -0.84, 1.0, 0.0, 0.0, 0.0], 4, 6),
            ScenarioLabel::II => ([1.0, 0.0, -1.0, 0.0], [-0.4, 0.0, 1.0, 0.0, 0.0, 0.0], 2, 5),
            ScenarioLabel::III => ([1.0, 2.0, -1.0, 2.0], [-0.65, -0.6, 1.0, 0.0, 0.0, 0.0], 4, 10),
            ScenarioLabel::IV => ([1.0, 2.0, -1.0, 2.0], [0.0, 0.0, 1.0, 0.0, 0.0, 0.0], 4, 3),
        };
        Scenario {
            label,
            beta,
            gamma,
            shape: 2.0,
            rate: 1.0,
            landmark: 1.2,
            x_low: -2.0,
            x_high: 4.0,
            response_model: Family::Response.label(r),
            survival_model: Family::Survival.label(s),
        }
    }

    pub fn all() -> [Scenario; 4] {
        [ScenarioLabel::I, ScenarioLabel::II, ScenarioLabel::III, ScenarioLabel::IV].map(Scenario::get)
    }

    pub fn true_config(&self) -> ModelConfiguration {
        ModelConfiguration::from_labels(self.response_model, self.survival_model)
            .expect("scenario models are valid")
    }

    pub fn true_state(&self) -> ParameterState {
        ParameterState::new(self.beta, self.gamma, self.shape, self.rate, self.true_config())
            .expect("scenario parameters are consistent with their models")
    }

    fn response_probability(&self, arm: f64, x: f64) -> f64 {
        logistic(dot4(&response_terms(arm, x), &self.beta))
    }

    fn hazard_multiplier(&self, arm: f64, y: f64, x: f64) -> f64 {
        dot6(&survival_terms(arm, y, x), &self.gamma).exp()
    }

    /// Integral of `f` over the covariate law by composite Simpson.
    fn covariate_mean(&self, f: impl Fn(f64) -> f64) -> f64 {
        let m = 2000;
        let h = (self.x_high - self.x_low) / m as f64;
        let mut s = f(self.x_low) + f(self.x_high);
        for i in 1..m {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(self.x_low + i as f64 * h);
        }
        s * h / 3.0 / (self.x_high - self.x_low)
    }

    /// Probability that a subject is still event-free at the landmark.
    pub fn censoring_probability(&self) -> f64 {
        let cum = self.rate * self.landmark.powf(self.shape);
        let arm_mean = |a: f64| {
            self.covariate_mean(|x| {
                let p = self.response_probability(a, x);
                p * (-cum * self.hazard_multiplier(a, 1.0, x)).exp()
                    + (1.0 - p) * (-cum * self.hazard_multiplier(a, 0.0, x)).exp()
            })
        };
        0.5 * (arm_mean(0.0) + arm_mean(1.0))
    }

    /// Marginal response rate over both arms.
    pub fn response_rate(&self, arm: u8) -> f64 {
        self.covariate_mean(|x| self.response_probability(arm as f64, x))
    }
}

/// Control-versus-treatment hazard ratio of a scenario: the geometric mean
/// over the covariate law of `h̄(A=0, X) / h̄(A=1, X)`, where `h̄` averages
/// the proportional-hazards multiplier over the response distribution given
/// arm and covariate. Computed by quadrature.
pub fn true_hazard_ratio(scenario: &Scenario) -> f64 {
    let mixed = |a: f64, x: f64| {
        let p = scenario.response_probability(a, x);
        p * scenario.hazard_multiplier(a, 1.0, x) + (1.0 - p) * scenario.hazard_multiplier(a, 0.0, x)
    };
    scenario
        .covariate_mean(|x| (mixed(0.0, x) / mixed(1.0, x)).ln())
        .exp()
}

/// `n` subjects, exactly half per arm in random order. Event times at or
/// beyond the landmark are censored there.
pub fn generate_dataset(scenario: &Scenario, n: usize, seed: u64) -> Result<Dataset> {
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "sample size must be even and at least 2 for balanced allocation, got {n}"
        )));
    }
    let mut rng = substream(seed, 0);
    let mut arms: Vec<u8> = (0..n).map(|i| (i >= n / 2) as u8).collect();
    arms.shuffle(&mut rng);
    let records = arms
        .into_iter()
        .map(|a| {
            let x = rng.random_range(scenario.x_low..scenario.x_high);
            let y = (rng.random::<f64>() < scenario.response_probability(a as f64, x)) as u8;
            let u: f64 = rng.sample(Open01);
            let eta = dot6(&survival_terms(a as f64, y as f64, x), &scenario.gamma);
            let t = (-u.ln() / (scenario.rate * eta.exp())).powf(1.0 / scenario.shape);
            let (time, event) = if t < scenario.landmark { (t, 1) } else { (scenario.landmark, 0) };
            SubjectRecord::new(a, x, y, time, event)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(records)
}

/// Subjects drawn from the covariate law with balanced arms and no
/// outcomes; the input for predicting a future study.
pub fn generate_test_frame(scenario: &Scenario, n: usize, seed: u64) -> Result<TestFrame> {
    let d = generate_dataset(scenario, n, seed)?;
    TestFrame::new(
        d.iter()
            .map(|r| TestSubject {
                arm: r.arm,
                covariate: r.covariate,
                response: None,
            })
            .collect(),
    )
}

/// Settings shared by the calibration-plus-sampling pipeline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitSettings {
    pub sampler: SamplerConfig,
    pub weighting: WeightScheme,
    pub annealing: AnnealingConfig,
    pub prior: PriorSpec,
}

impl Default for FitSettings {
    fn default() -> Self {
        FitSettings {
            sampler: SamplerConfig::default(),
            weighting: WeightScheme::Rank,
            annealing: AnnealingConfig::default(),
            prior: PriorSpec::default(),
        }
    }
}

/// Calibrates the model prior on `dataset` and samples the posterior.
pub fn fit_posterior(dataset: &Dataset, settings: &FitSettings, seed: u64) -> Result<crate::sampler::PosteriorDraws> {
    let (prior, _, _) = calibrated_prior(dataset, settings.weighting, &settings.annealing, &settings.prior)?;
    let sampler = SamplerConfig {
        seed,
        ..settings.sampler
    };
    run_mcmc(dataset, &prior, &sampler)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationConfig {
    pub n: usize,
    pub reps: usize,
    pub seed: u64,
    pub fit: FitSettings,
    pub grid_points: usize,
    /// Posterior draws per replication used for the curves (0 = all).
    pub curve_draws: usize,
    /// Size of the synthetic population behind the reference curves.
    pub population: usize,
}

impl Default for ReplicationConfig {
    fn default() -> Self {
        ReplicationConfig {
            n: 1000,
            reps: 20,
            seed: 1,
            fit: FitSettings::default(),
            grid_points: 100,
            curve_draws: 200,
            population: 100_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientRow {
    pub parameter: &'static str,
    pub truth: f64,
    pub bias: f64,
    pub mstd: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelProbabilityRow {
    pub model: ModelLabel,
    pub is_true: bool,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// One curve at one time, aggregated over replications: the mean of the
/// per-replication means, the median of the per-replication medians and the
/// mean pointwise interval bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub time: f64,
    pub curve: &'static str,
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
    pub truth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationReport {
    pub scenario: Scenario,
    pub n: usize,
    pub reps: usize,
    /// `(replication, message)` for each failed replication.
    pub failures: Vec<(usize, String)>,
    pub coefficients: Vec<CoefficientRow>,
    pub models: Vec<ModelProbabilityRow>,
    pub lrr_curves: Vec<CurveRow>,
    pub medprop_curves: Vec<CurveRow>,
    pub summaries: Vec<PosteriorSummary>,
    /// Wall-clock seconds; informational and never written to files.
    pub runtime_secs: f64,
}

struct ReplicationOutcome {
    summary: PosteriorSummary,
    curves: crate::mediation::RiskRatioCurves,
}

/// Generates, fits and summarizes `reps` datasets. Replication `r` derives
/// all of its randomness from `(config.seed, r)`.
pub fn run_replication_study(scenario: &Scenario, config: &ReplicationConfig) -> Result<ReplicationReport> {
    if config.reps < 2 {
        return Err(Error::InvalidConfiguration("replication study needs reps >= 2".into()));
    }
    config.fit.sampler.validate()?;
    let start = Instant::now();
    let grid = TimeGrid::up_to_landmark(scenario.landmark, config.grid_points)?;
    let population = generate_dataset(scenario, config.population, derive_seed(config.seed, u64::MAX))?;
    let truth = true_curves(&scenario.true_state(), &population, &grid)?;

    let outcomes: Vec<Result<ReplicationOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(config.seed, r as u64);
            let data = generate_dataset(scenario, config.n, derive_seed(rep_seed, 0))?;
            let draws = fit_posterior(&data, &config.fit, derive_seed(rep_seed, 1))?;
            let summary = summarize_posterior(&draws)?;
            let mut curves = risk_ratio_curves(&data, &draws.thinned(config.curve_draws), &grid)?;
            curves.group_means = Vec::new();
            Ok(ReplicationOutcome { summary, curves })
        })
        .collect();

    let mut failures = Vec::new();
    let mut ok = Vec::new();
    for (r, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if ok.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replications failed; first error: {}",
            config.reps, failures[0].1
        )));
    }

    let truth_values = scenario.true_state().values();
    let coefficients = (0..N_PARAMS)
        .map(|k| {
            let t = truth_values[k];
            let rows: Vec<_> = ok.iter().map(|o| &o.summary.parameters[k]).collect();
            let m = rows.len() as f64;
            CoefficientRow {
                parameter: PARAM_NAMES[k],
                truth: t,
                bias: rows.iter().map(|p| p.mean - t).sum::<f64>() / m,
                mstd: rows.iter().map(|p| p.sd).sum::<f64>() / m,
                coverage: rows.iter().filter(|p| p.hpd_lower <= t && t <= p.hpd_upper).count() as f64 / m,
            }
        })
        .collect();

    let mut models = Vec::new();
    for family in [Family::Response, Family::Survival] {
        let true_label = match family {
            Family::Response => scenario.response_model,
            Family::Survival => scenario.survival_model,
        };
        for i in 0..family.models() {
            let label = family.label(i);
            let probs: Vec<f64> = ok.iter().map(|o| o.summary.model_probability(label)).collect();
            models.push(ModelProbabilityRow {
                model: label,
                is_true: label == true_label,
                mean: probs.iter().sum::<f64>() / probs.len() as f64,
                min: probs.iter().copied().fold(f64::INFINITY, f64::min),
                max: probs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            });
        }
    }

    let aggregate = |k: usize, pick: &dyn Fn(&crate::mediation::RiskRatioCurves) -> PointSummary| {
        let pts: Vec<PointSummary> = ok.iter().map(|o| pick(&o.curves)).collect();
        let finite = |f: fn(&PointSummary) -> f64| -> Vec<f64> {
            pts.iter().map(f).filter(|v| v.is_finite()).collect()
        };
        let avg = |v: Vec<f64>| if v.is_empty() { f64::NAN } else { v.iter().sum::<f64>() / v.len() as f64 };
        let mut medians = finite(|p| p.median);
        medians.sort_by(f64::total_cmp);
        let _ = k;
        (
            avg(finite(|p| p.mean)),
            if medians.is_empty() { f64::NAN } else { quantile_sorted(&medians, 0.5) },
            avg(finite(|p| p.lower)),
            avg(finite(|p| p.upper)),
        )
    };
    let mut lrr_curves = Vec::new();
    let mut medprop_curves = Vec::new();
    for (k, &t) in grid.times().iter().enumerate() {
        for (c, name) in CURVE_NAMES.iter().enumerate() {
            let (mean, median, lower, upper) = aggregate(k, &|rc| rc.lrr()[c][k]);
            lrr_curves.push(CurveRow {
                time: t,
                curve: name,
                mean,
                median,
                lower,
                upper,
                truth: truth.lrr()[c][k].mean,
            });
        }
        let (mean, median, lower, upper) = aggregate(k, &|rc| rc.proportion[k]);
        medprop_curves.push(CurveRow {
            time: t,
            curve: "med_prop",
            mean,
            median,
            lower,
            upper,
            truth: truth.proportion[k].mean,
        });
    }

    Ok(ReplicationReport {
        scenario: *scenario,
        n: config.n,
        reps: config.reps,
        failures,
        coefficients,
        models,
        lrr_curves,
        medprop_curves,
        summaries: ok.into_iter().map(|o| o.summary).collect(),
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}

impl ReplicationReport {
    pub fn write_coefficients<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario,n,parameter,truth,bias,mstd,cp")?;
        for c in &self.coefficients {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                self.scenario.label,
                self.n,
                c.parameter,
                g17(c.truth),
                g17(c.bias),
                g17(c.mstd),
                g17(c.coverage)
            )?;
        }
        Ok(())
    }

    pub fn write_models<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario,n,family,model,true_model,mean,min,max")?;
        for m in &self.models {
            let fam = match m.model.family {
                Family::Response => "response",
                Family::Survival => "survival",
            };
            writeln!(
                w,
                "{},{},{fam},{},{},{},{},{}",
                self.scenario.label,
                self.n,
                m.model,
                m.is_true as u8,
                g17(m.mean),
                g17(m.min),
                g17(m.max)
            )?;
        }
        Ok(())
    }

    pub fn write_curves<W: Write>(rows: &[CurveRow], mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,curve,mean,median,q2.5,q97.5,truth")?;
        for r in rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                g17(r.time),
                r.curve,
                g17(r.mean),
                g17(r.median),
                g17(r.lower),
                g17(r.upper),
                g17(r.truth)
            )?;
        }
        Ok(())
    }

    pub fn write_failures<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "replication,error")?;
        for (r, e) in &self.failures {
            writeln!(w, "{r},\"{}\"", e.replace('"', "'"))?;
        }
        Ok(())
    }

    /// `coef_summary.csv`, `model_probs.csv`, `lrr_curves.csv`,
    /// `medprop_curves.csv` and `failures.csv` under `dir`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(dir, "coef_summary.csv", &|w| self.write_coefficients(w))?;
        write_file(dir, "model_probs.csv", &|w| self.write_models(w))?;
        write_file(dir, "lrr_curves.csv", &|w| Self::write_curves(&self.lrr_curves, w))?;
        write_file(dir, "medprop_curves.csv", &|w| Self::write_curves(&self.medprop_curves, w))?;
        write_file(dir, "failures.csv", &|w| self.write_failures(w))
    }
}


#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudyConfig {
    pub n_train: usize,
    pub n2: Vec<usize>,
    pub reps: usize,
    pub modes: Vec<PredictionMode>,
    pub alpha: f64,
    /// Posterior draws per replication used for prediction (0 = all).
    pub power_draws: usize,
    pub seed: u64,
    pub fit: FitSettings,
}

impl Default for PowerStudyConfig {
    fn default() -> Self {
        PowerStudyConfig {
            n_train: 500,
            n2: vec![100, 200, 300, 500],
            reps: 20,
            modes: vec![PredictionMode::FutureStudy, PredictionMode::InterimCompletion],
            alpha: 0.05,
            power_draws: 1000,
            seed: 1,
            fit: FitSettings::default(),
        }
    }
}

/// Predicted power and the realized outcome of one replication at one
/// `(n2, mode)` cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerRecord {
    pub replication: usize,
    pub n2: usize,
    pub mode: PredictionMode,
    pub power: f64,
    /// Log-rank p-value of the independently generated data: the new study
    /// alone, or pooled with the training data for interim completion.
    pub realized_p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerCell {
    pub n2: usize,
    pub mode: PredictionMode,
    pub mean_power: f64,
    pub realized_rate: f64,
    pub evaluation: PredictionEvaluation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerStudyReport {
    pub scenario: Scenario,
    pub n_train: usize,
    pub alpha: f64,
    pub records: Vec<PowerRecord>,
    pub cells: Vec<PowerCell>,
    pub failures: Vec<(usize, String)>,
    pub runtime_secs: f64,
}

impl PowerStudyReport {
    pub fn cell(&self, n2: usize, mode: PredictionMode) -> Option<&PowerCell> {
        self.cells.iter().find(|c| c.n2 == n2 && c.mode == mode)
    }

    pub fn write_power<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario,n_train,n2,mode,mean_power,realized_rate,reps")?;
        for c in &self.cells {
            let reps = self.records.iter().filter(|r| r.n2 == c.n2 && r.mode == c.mode).count();
            writeln!(
                w,
                "{},{},{},{},{},{},{reps}",
                self.scenario.label,
                self.n_train,
                c.n2,
                c.mode,
                g17(c.mean_power),
                g17(c.realized_rate)
            )?;
        }
        Ok(())
    }

    pub fn write_evaluation<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "scenario,n_train,n2,mode,spearman,auc")?;
        let opt = |v: Option<f64>| v.map_or_else(|| "NA".to_string(), g17);
        for c in &self.cells {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                self.scenario.label,
                self.n_train,
                c.n2,
                c.mode,
                opt(c.evaluation.spearman),
                opt(c.evaluation.auc)
            )?;
        }
        Ok(())
    }

    pub fn write_records<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "replication,n2,mode,power,realized_p")?;
        for r in &self.records {
            writeln!(w, "{},{},{},{},{}", r.replication, r.n2, r.mode, g17(r.power), g17(r.realized_p))?;
        }
        Ok(())
    }

    /// `power.csv`, `prediction_eval.csv` and `power_replications.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_file(dir, "power.csv", &|w| self.write_power(w))?;
        write_file(dir, "prediction_eval.csv", &|w| self.write_evaluation(w))?;
        write_file(dir, "power_replications.csv", &|w| self.write_records(w))
    }
}

/// For each replication: generate and fit training data, then for every
/// `n2` generate an independent study, predict its power in each mode and
/// record the realized log-rank p-value. The independent study's arms and
/// covariates form the prediction frame.
pub fn run_power_study(scenario: &Scenario, config: &PowerStudyConfig) -> Result<PowerStudyReport> {
    if config.reps < 2 || config.n2.is_empty() || config.modes.is_empty() {
        return Err(Error::InvalidConfiguration(
            "power study needs reps >= 2 and at least one n2 and mode".into(),
        ));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(Error::InvalidConfiguration("alpha must lie in (0,1)".into()));
    }
    config.fit.sampler.validate()?;
    let start = Instant::now();
    let results: Vec<Result<Vec<PowerRecord>>> = (0..config.reps)
        .into_par_iter()
        .map(|r| {
            let rep_seed = derive_seed(config.seed, r as u64);
            let train = generate_dataset(scenario, config.n_train, derive_seed(rep_seed, 0))?;
            let draws = fit_posterior(&train, &config.fit, derive_seed(rep_seed, 1))?;
            let states = draws.thinned(config.power_draws);
            let mut out = Vec::new();
            for (j, &n2) in config.n2.iter().enumerate() {
                let future = generate_dataset(scenario, n2, derive_seed(rep_seed, 2 + j as u64))?;
                let frame = TestFrame::new(
                    future
                        .iter()
                        .map(|s| TestSubject {
                            arm: s.arm,
                            covariate: s.covariate,
                            response: None,
                        })
                        .collect(),
                )?;
                for &mode in &config.modes {
                    let realized = match mode {
                        PredictionMode::FutureStudy => future.clone(),
                        PredictionMode::InterimCompletion => train.concat(&future),
                    };
                    let t: Vec<f64> = realized.iter().map(|s| s.time).collect();
                    let d: Vec<u8> = realized.iter().map(|s| s.event).collect();
                    let a: Vec<u8> = realized.iter().map(|s| s.arm).collect();
                    let realized_p = logrank_test(&t, &d, &a)?.p_value;
                    let request = PredictionRequest::new(mode, frame.clone(), scenario.landmark, config.alpha)?;
                    let power_seed = derive_seed(rep_seed, 1000 + (j * config.modes.len()) as u64 + mode as u64);
                    let res = predictive_power(&states, &request, Some(&train), power_seed)?;
                    out.push(PowerRecord {
                        replication: r,
                        n2,
                        mode,
                        power: res.power,
                        realized_p,
                    });
                }
            }
            Ok(out)
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (r, res) in results.into_iter().enumerate() {
        match res {
            Ok(v) => records.extend(v),
            Err(e) => failures.push((r, e.to_string())),
        }
    }
    if records.is_empty() {
        return Err(Error::Numerical(format!(
            "all {} replications failed; first error: {}",
            config.reps, failures[0].1
        )));
    }
    let mut cells = Vec::new();
    for &n2 in &config.n2 {
        for &mode in &config.modes {
            let cell: Vec<&PowerRecord> = records.iter().filter(|r| r.n2 == n2 && r.mode == mode).collect();
            let power: Vec<f64> = cell.iter().map(|r| r.power).collect();
            let realized: Vec<f64> = cell.iter().map(|r| r.realized_p).collect();
            let m = cell.len() as f64;
            let evaluation = if cell.len() >= 2 {
                evaluate_predictions(&power, &realized, config.alpha)?
            } else {
                PredictionEvaluation { spearman: None, roc: Vec::new(), auc: None }
            };
            cells.push(PowerCell {
                n2,
                mode,
                mean_power: power.iter().sum::<f64>() / m,
                realized_rate: realized.iter().filter(|&&p| p < config.alpha).count() as f64 / m,
                evaluation,
            });
        }
    }
    Ok(PowerStudyReport {
        scenario: *scenario,
        n_train: config.n_train,
        alpha: config.alpha,
        records,
        cells,
        failures,
        runtime_secs: start.elapsed().as_secs_f64(),
    })
}
