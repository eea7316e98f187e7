//! Model prior probabilities induced by hierarchy-constrained Bernoulli
//! indicators, and calibration of the Bernoulli probabilities ψ towards
//! target model weights.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::likelihood::{fit_response, fit_survival, PriorSpec};
use crate::model_space::{Family, ModelLabel, ResponseIndicators, SurvivalIndicators};

pub const PSI_MIN: f64 = 0.01;
pub const PSI_MAX: f64 = 0.99;

/// Prior probability of every valid model of one family.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelPriorTable {
    pub family: Family,
    pub labels: Vec<ModelLabel>,
    pub probabilities: Vec<f64>,
    pub psi: Vec<f64>,
}

impl ModelPriorTable {
    pub fn probability(&self, label: ModelLabel) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == label)
            .map(|i| self.probabilities[i])
    }
}

/// Exact prior over the valid models of `family` when indicator `j` is
/// Bernoulli(ψ_j) independently, conditioned on the hierarchy constraints.
pub fn model_prior_probs(psi: &[f64], family: Family) -> Result<ModelPriorTable> {
    check_psi(psi, family)?;
    let table = family.table();
    let mut probs: Vec<f64> = table.iter().map(|bits| config_mass(psi, bits)).collect();
    let total: f64 = probs.iter().sum();
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(ModelPriorTable {
        family,
        labels: (0..table.len()).map(|i| family.label(i)).collect(),
        probabilities: probs,
        psi: psi.to_vec(),
    })
}

fn check_psi(psi: &[f64], family: Family) -> Result<()> {
    if psi.len() != family.terms() {
        return Err(Error::InvalidInput(format!(
            "expected {} psi values, got {}",
            family.terms(),
            psi.len()
        )));
    }
    if psi.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(Error::InvalidInput("psi components must lie in (0,1)".into()));
    }
    Ok(())
}

fn config_mass(psi: &[f64], bits: &[bool]) -> f64 {
    psi.iter()
        .zip(bits)
        .map(|(&p, &on)| if on { p } else { 1.0 - p })
        .product()
}

/// How per-model AICs become target prior weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum WeightScheme {
    /// Reversed AIC ranks: best model gets `m`, worst gets 1.
    #[default]
    Rank,
    /// Every model weighted 1.
    Equal,
    /// Reversed AIC values: `max(AIC) - AIC_i + 1`.
    ReversedValues,
}

impl fmt::Display for WeightScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WeightScheme::Rank => "rank",
            WeightScheme::Equal => "equal",
            WeightScheme::ReversedValues => "reversed-values",
        })
    }
}

impl FromStr for WeightScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rank" => Ok(WeightScheme::Rank),
            "equal" => Ok(WeightScheme::Equal),
            "reversed-values" => Ok(WeightScheme::ReversedValues),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown weighting '{other}' (expected rank, equal or reversed-values)"
            ))),
        }
    }
}

/// Reversed ranks of `aics`: the smallest gets `m`, the largest 1, ties share
/// the average of their ranks. Infinite values (failed fits) rank last.
pub fn aic_rank_weights(aics: &[f64]) -> Vec<f64> {
    let m = aics.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| aics[a].total_cmp(&aics[b]));
    let mut weights = vec![0.0; m];
    let mut i = 0;
    while i < m {
        let mut j = i;
        while j + 1 < m && aics[order[j + 1]] == aics[order[i]] {
            j += 1;
        }
        // positions i..=j hold tied values; reversed rank of position p is m - p
        let avg = (i..=j).map(|p| (m - p) as f64).sum::<f64>() / (j - i + 1) as f64;
        for &k in &order[i..=j] {
            weights[k] = avg;
        }
        i = j + 1;
    }
    weights
}

/// Target weights for `aics` under `scheme`.
pub fn target_weights(aics: &[f64], scheme: WeightScheme) -> Vec<f64> {
    match scheme {
        WeightScheme::Rank => aic_rank_weights(aics),
        WeightScheme::Equal => vec![1.0; aics.len()],
        WeightScheme::ReversedValues => {
            let worst = aics
                .iter()
                .copied()
                .filter(|a| a.is_finite())
                .fold(f64::NEG_INFINITY, f64::max);
            aics.iter()
                .map(|&a| if a.is_finite() { worst - a + 1.0 } else { 0.5 })
                .collect()
        }
    }
}

/// AIC of every model of `family` fitted to `dataset`, in table order.
/// Fits that fail are reported as `+∞`.
pub fn family_aics(dataset: &Dataset, family: Family) -> Vec<f64> {
    family
        .table()
        .iter()
        .map(|bits| {
            let fit = match family {
                Family::Response => {
                    fit_response(dataset, &ResponseIndicators(bits[..].try_into().unwrap()))
                        .map(|f| f.aic)
                }
                Family::Survival => {
                    fit_survival(dataset, &SurvivalIndicators(bits[..].try_into().unwrap()))
                        .map(|f| f.aic)
                }
            };
            fit.unwrap_or(f64::INFINITY)
        })
        .collect()
}

/// Calibration objective: sample standard deviation of `p_i / w̃_i`, where
/// `w̃` are the targets normalized to sum to one.
pub fn prior_objective(psi: &[f64], targets: &[f64], family: Family) -> Result<f64> {
    let table = model_prior_probs(psi, family)?;
    Ok(objective_of(&table.probabilities, &normalized(targets)))
}

fn normalized(targets: &[f64]) -> Vec<f64> {
    let s: f64 = targets.iter().sum();
    targets.iter().map(|t| t / s).collect()
}

fn objective_of(probs: &[f64], targets: &[f64]) -> f64 {
    let m = probs.len();
    if m < 2 {
        return 0.0;
    }
    let ratios: Vec<f64> = probs.iter().zip(targets).map(|(p, t)| p / t).collect();
    let mean = ratios.iter().sum::<f64>() / m as f64;
    let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
    var.sqrt()
}

/// Simulated-annealing settings for [`calibrate_psi`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealingConfig {
    pub evaluations: usize,
    pub initial_temperature: f64,
    pub final_temperature: f64,
    pub seed: u64,
}

impl Default for AnnealingConfig {
    fn default() -> Self {
        AnnealingConfig {
            evaluations: 100_000,
            initial_temperature: 0.1,
            final_temperature: 1e-8,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub psi: Vec<f64>,
    pub table: ModelPriorTable,
    pub targets: Vec<f64>,
    pub residual: f64,
}

/// Searches ψ ∈ [0.01, 0.99]^d so that model prior probabilities are as
/// close to proportional to `targets` as possible: simulated annealing with
/// geometric cooling, then Nelder–Mead from the best point found.
pub fn calibrate_psi(
    targets: &[f64],
    family: Family,
    config: &AnnealingConfig,
) -> Result<CalibrationResult> {
    let m = family.models();
    if targets.len() != m {
        return Err(Error::InvalidInput(format!(
            "expected {m} target weights for the {family:?} family, got {}",
            targets.len()
        )));
    }
    if targets.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
        return Err(Error::InvalidInput("target weights must be positive".into()));
    }
    if config.evaluations == 0 || !(config.initial_temperature > config.final_temperature)
        || !(config.final_temperature > 0.0)
    {
        return Err(Error::InvalidConfiguration(
            "annealing needs evaluations > 0 and initial > final temperature > 0".into(),
        ));
    }

    let table = family.table();
    let w = normalized(targets);
    let f = |psi: &[f64]| -> f64 {
        let mut probs: Vec<f64> = table.iter().map(|bits| config_mass(psi, bits)).collect();
        let total: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= total);
        objective_of(&probs, &w)
    };

    let (annealed, _) = anneal(&f, family.terms(), config);
    let (psi, residual) = nelder_mead(&f, &annealed, 0.05, 1e-15, 20_000);
    Ok(CalibrationResult {
        table: model_prior_probs(&psi, family)?,
        psi,
        targets: targets.to_vec(),
        residual,
    })
}

/// Prior calibration for both families on `dataset`: per-model AICs become
/// target weights under `scheme`, and ψ is searched per family. `Equal`
/// skips the model fits.
pub fn calibrated_prior(
    dataset: &Dataset,
    scheme: WeightScheme,
    annealing: &AnnealingConfig,
    base: &PriorSpec,
) -> Result<(PriorSpec, CalibrationResult, CalibrationResult)> {
    let targets = |family: Family| match scheme {
        WeightScheme::Equal => vec![1.0; family.models()],
        _ => target_weights(&family_aics(dataset, family), scheme),
    };
    let response = calibrate_psi(&targets(Family::Response), Family::Response, annealing)?;
    let survival = calibrate_psi(&targets(Family::Survival), Family::Survival, annealing)?;
    let mut prior = *base;
    prior.psi_z.copy_from_slice(&response.psi);
    prior.psi_w.copy_from_slice(&survival.psi);
    Ok((prior, response, survival))
}

fn clamp_box(x: f64) -> f64 {
    // reflect once, then clamp for the rare double overshoot
    let r = if x < PSI_MIN {
        2.0 * PSI_MIN - x
    } else if x > PSI_MAX {
        2.0 * PSI_MAX - x
    } else {
        x
    };
    r.clamp(PSI_MIN, PSI_MAX)
}

fn anneal(f: &impl Fn(&[f64]) -> f64, dim: usize, config: &AnnealingConfig) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut current = vec![0.5; dim];
    let mut current_f = f(&current);
    let mut best = current.clone();
    let mut best_f = current_f;
    let steps = config.evaluations.saturating_sub(1).max(1);
    let ratio = config.final_temperature / config.initial_temperature;
    for k in 0..steps {
        let temp = config.initial_temperature * ratio.powf(k as f64 / steps as f64);
        let scale = (0.25 * (temp / config.initial_temperature).sqrt()).max(1e-4);
        let mut cand = current.clone();
        let j = rng.random_range(0..dim);
        let z: f64 = rng.sample(StandardNormal);
        cand[j] = clamp_box(cand[j] + scale * z);
        let cand_f = f(&cand);
        let accept = cand_f <= current_f || rng.random::<f64>() < ((current_f - cand_f) / temp).exp();
        if accept {
            current = cand;
            current_f = cand_f;
            if current_f < best_f {
                best_f = current_f;
                best.clone_from(&current);
            }
        }
    }
    (best, best_f)
}

/// Box-projected Nelder–Mead minimizer.
fn nelder_mead(
    f: &impl Fn(&[f64]) -> f64,
    start: &[f64],
    step: f64,
    ftol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let n = start.len();
    let project = |x: &mut Vec<f64>| x.iter_mut().for_each(|v| *v = v.clamp(PSI_MIN, PSI_MAX));
    let mut simplex: Vec<Vec<f64>> = vec![start.to_vec()];
    for i in 0..n {
        let mut v = start.to_vec();
        v[i] += if v[i] + step <= PSI_MAX { step } else { -step };
        project(&mut v);
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();

    for _ in 0..max_iter {
        let mut idx: Vec<usize> = (0..=n).collect();
        idx.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = idx.iter().map(|&i| simplex[i].clone()).collect();
        values = idx.iter().map(|&i| values[i]).collect();
        if values[n] - values[0] <= ftol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|v| v[d]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| {
            let mut v: Vec<f64> = (0..n)
                .map(|d| centroid[d] + t * (simplex[n][d] - centroid[d]))
                .collect();
            project(&mut v);
            v
        };
        let xr = along(-1.0);
        let fr = f(&xr);
        if fr < values[0] {
            let xe = along(-2.0);
            let fe = f(&xe);
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let x = along(-0.5);
                let v = f(&x);
                (x, v)
            } else {
                let x = along(0.5);
                let v = f(&x);
                (x, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> = (0..n)
                        .map(|d| simplex[0][d] + 0.5 * (simplex[i][d] - simplex[0][d]))
                        .collect();
                    values[i] = f(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .unwrap();
    (simplex[best].clone(), values[best])
}
