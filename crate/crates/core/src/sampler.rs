//! Reversible-jump MCMC over `(θ, z, w)`.
//!
//! Each iteration performs adaptive random-walk Metropolis updates of the
//! intercept, every active coefficient, `log ν` and `log λ`, then visits the
//! indicators in random order proposing a birth or death for each. Toggles
//! that would break a hierarchy constraint are rejected without evaluation.

use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::data::{column_map, parse_real, Dataset};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::likelihood::{
    bernoulli_logmass, fit_mle, normal_logpdf, softplus, ParameterState, PriorSpec,
    ResponseColumns, SurvivalColumns, N_PARAMS, PARAM_NAMES, RATE_INDEX, SHAPE_INDEX,
};
use crate::model_space::{
    response_indicators, survival_indicators, Family, ModelConfiguration, ModelLabel,
    ResponseIndicators, SurvivalIndicators, RESPONSE_TERMS, SURVIVAL_TERMS,
};
use crate::rng::substream;

/// Indicators that the sampler never toggles. A frozen indicator keeps the
/// value it has in the initial configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct IndicatorMask {
    pub response: [bool; RESPONSE_TERMS],
    pub survival: [bool; SURVIVAL_TERMS],
}

impl IndicatorMask {
    pub fn all() -> Self {
        IndicatorMask {
            response: [true; RESPONSE_TERMS],
            survival: [true; SURVIVAL_TERMS],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerConfig {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    pub proposal_sd_init: f64,
    pub adapt_window: usize,
    pub birth_proposal_sd: f64,
    pub target_acceptance: f64,
    /// Starting model; the full model when `None`.
    pub initial_config: Option<ModelConfiguration>,
    pub frozen: IndicatorMask,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            chains: 2,
            iterations: 10_000,
            burn_in: 5_000,
            thin: 1,
            seed: 1,
            proposal_sd_init: 0.1,
            adapt_window: 50,
            birth_proposal_sd: 1.0,
            target_acceptance: 0.44,
            initial_config: None,
            frozen: IndicatorMask::default(),
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfiguration(m.into()));
        if self.chains == 0 {
            return bad("chains must be at least 1");
        }
        if self.thin == 0 {
            return bad("thin must be at least 1");
        }
        if self.burn_in >= self.iterations {
            return bad("burn_in must be smaller than iterations");
        }
        if self.adapt_window == 0 {
            return bad("adapt_window must be at least 1");
        }
        if !(self.proposal_sd_init > 0.0 && self.birth_proposal_sd > 0.0) {
            return bad("proposal standard deviations must be positive");
        }
        if !(self.target_acceptance > 0.0 && self.target_acceptance < 1.0) {
            return bad("target_acceptance must lie in (0,1)");
        }
        Ok(())
    }

    /// Retained draws per chain.
    pub fn retained(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// One retained state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Draw {
    pub chain: usize,
    pub iteration: usize,
    pub state: ParameterState,
}

/// Per-chain sampler diagnostics, measured after burn-in.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainDiagnostics {
    pub proposal_sd: [f64; N_PARAMS],
    pub acceptance: [f64; N_PARAMS],
    pub toggle_acceptance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraws {
    /// Retained draws ordered by chain, then iteration.
    pub draws: Vec<Draw>,
    pub chains: usize,
    pub diagnostics: Vec<ChainDiagnostics>,
}

impl PosteriorDraws {
    pub fn from_draws(draws: Vec<Draw>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::Empty);
        }
        let chains = draws.iter().map(|d| d.chain).max().unwrap_or(0) + 1;
        Ok(PosteriorDraws {
            draws,
            chains,
            diagnostics: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.draws.len()
    }

    pub fn is_empty(&self) -> bool {
        self.draws.is_empty()
    }

    pub fn states(&self) -> impl Iterator<Item = &ParameterState> {
        self.draws.iter().map(|d| &d.state)
    }

    pub fn chain(&self, c: usize) -> impl Iterator<Item = &Draw> {
        self.draws.iter().filter(move |d| d.chain == c)
    }

    /// Every `step`-th draw, keeping chain structure. At most `max` draws are
    /// kept when `max > 0`, spread evenly across the sequence.
    pub fn thinned(&self, max: usize) -> Vec<ParameterState> {
        let n = self.draws.len();
        if max == 0 || max >= n {
            return self.states().copied().collect();
        }
        (0..max).map(|k| self.draws[k * n / max].state).collect()
    }
}

/// Runs all chains, in parallel when a thread pool is available. Output is
/// independent of scheduling: chain `c` uses substream `c` of `config.seed`.
pub fn run_mcmc(dataset: &Dataset, prior: &PriorSpec, config: &SamplerConfig) -> Result<PosteriorDraws> {
    config.validate()?;
    prior.validate()?;
    dataset.require_both_arms()?;
    let resp = ResponseColumns::new(dataset);
    let surv = SurvivalColumns::new(dataset)?;
    let start_config = config.initial_config.unwrap_or_else(ModelConfiguration::full);
    let start = initial_state(dataset, &surv, &start_config);

    let results: Vec<Result<(Vec<Draw>, ChainDiagnostics)>> = (0..config.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = substream(config.seed, c as u64);
            let chain = Chain::new(&resp, &surv, prior, config, start)?;
            chain.run(c, &mut rng)
        })
        .collect();
    let mut draws = Vec::with_capacity(config.chains * config.retained());
    let mut diagnostics = Vec::with_capacity(config.chains);
    for r in results {
        let (d, diag) = r?;
        draws.extend(d);
        diagnostics.push(diag);
    }
    Ok(PosteriorDraws {
        draws,
        chains: config.chains,
        diagnostics,
    })
}

/// Maximum-likelihood start for `config`, falling back to the null-model
/// moment start when the fit fails.
fn initial_state(dataset: &Dataset, surv: &SurvivalColumns, config: &ModelConfiguration) -> ParameterState {
    if let Ok(fit) = fit_mle(dataset, config) {
        return fit.state;
    }
    let n = dataset.len() as f64;
    let ybar = (dataset.iter().filter(|r| r.response == 1).count() as f64 / n).clamp(0.5 / n, 1.0 - 0.5 / n);
    let total: f64 = surv.log_t.iter().map(|l| l.exp()).sum();
    let rate = (surv.n_events.max(0.5) / total.max(1e-12)).max(1e-12);
    ParameterState {
        beta: [(ybar / (1.0 - ybar)).ln(), 0.0, 0.0, 0.0],
        gamma: [0.0; 6],
        shape: 1.0,
        rate,
        config: *config,
    }
}

#[derive(Clone, Copy)]
enum Indicator {
    Response(usize),
    Survival(usize),
}

struct Chain<'a> {
    resp: &'a ResponseColumns,
    surv: &'a SurvivalColumns,
    prior: &'a PriorSpec,
    config: &'a SamplerConfig,
    state: ParameterState,
    resp_eta: Vec<f64>,
    surv_eta: Vec<f64>,
    resp_ll: f64,
    /// `Σ δ_i η_i`
    event_eta: f64,
    /// `Σ exp(ν log T_i + η_i)`
    base_sum: f64,
    scratch: Vec<f64>,
    log_sd: [f64; N_PARAMS],
    window_tries: [u32; N_PARAMS],
    window_accepts: [u32; N_PARAMS],
    tries: [u64; N_PARAMS],
    accepts: [u64; N_PARAMS],
    toggle_tries: u64,
    toggle_accepts: u64,
}

impl<'a> Chain<'a> {
    fn new(
        resp: &'a ResponseColumns,
        surv: &'a SurvivalColumns,
        prior: &'a PriorSpec,
        config: &'a SamplerConfig,
        state: ParameterState,
    ) -> Result<Self> {
        let resp_eta: Vec<f64> = resp.x.iter().map(|x| dot(x, &state.beta)).collect();
        let surv_eta: Vec<f64> = surv.x.iter().map(|x| dot(x, &state.gamma)).collect();
        let resp_ll = resp_eta
            .iter()
            .zip(&resp.y)
            .map(|(&e, &y)| y * e - softplus(e))
            .sum();
        let event_eta = surv_eta.iter().zip(&surv.event).map(|(e, d)| e * d).sum();
        let base_sum = base_sum(&surv.log_t, &surv_eta, state.shape);
        let chain = Chain {
            resp,
            surv,
            prior,
            config,
            state,
            scratch: vec![0.0; resp_eta.len().max(surv_eta.len())],
            resp_eta,
            surv_eta,
            resp_ll,
            event_eta,
            base_sum,
            log_sd: [config.proposal_sd_init.ln(); N_PARAMS],
            window_tries: [0; N_PARAMS],
            window_accepts: [0; N_PARAMS],
            tries: [0; N_PARAMS],
            accepts: [0; N_PARAMS],
            toggle_tries: 0,
            toggle_accepts: 0,
        };
        let total = chain.resp_ll + chain.surv_ll(chain.state.shape, chain.state.rate, chain.event_eta, chain.base_sum);
        if !total.is_finite() {
            return Err(Error::Numerical(
                "log-posterior is not finite at the initial state".into(),
            ));
        }
        Ok(chain)
    }

    fn surv_ll(&self, shape: f64, rate: f64, event_eta: f64, base_sum: f64) -> f64 {
        let s = self.surv;
        s.n_events * (shape.ln() + rate.ln()) + (shape - 1.0) * s.sum_event_log_t + event_eta
            - rate * base_sum
    }

    fn run(mut self, chain: usize, rng: &mut ChaCha8Rng) -> Result<(Vec<Draw>, ChainDiagnostics)> {
        let cfg = self.config;
        let mut draws = Vec::with_capacity(cfg.retained());
        let mut toggles: Vec<Indicator> = (0..RESPONSE_TERMS)
            .filter(|&j| !cfg.frozen.response[j])
            .map(Indicator::Response)
            .chain(
                (0..SURVIVAL_TERMS)
                    .filter(|&j| !cfg.frozen.survival[j])
                    .map(Indicator::Survival),
            )
            .collect();
        let mut batch = 0u32;
        for it in 0..cfg.iterations {
            let burning = it < cfg.burn_in;
            for slot in 0..N_PARAMS {
                if self.slot_active(slot) {
                    let accepted = self.metropolis(slot, rng);
                    self.window_tries[slot] += 1;
                    self.window_accepts[slot] += accepted as u32;
                    if !burning {
                        self.tries[slot] += 1;
                        self.accepts[slot] += accepted as u64;
                    }
                }
            }
            toggles.shuffle(rng);
            for &ind in &toggles {
                let accepted = self.toggle(ind, rng);
                if !burning {
                    self.toggle_tries += 1;
                    self.toggle_accepts += accepted as u64;
                }
            }
            if (it + 1) % cfg.adapt_window == 0 {
                if burning {
                    batch += 1;
                    self.adapt(batch);
                }
                self.window_tries = [0; N_PARAMS];
                self.window_accepts = [0; N_PARAMS];
            }
            if !burning && (it - cfg.burn_in).is_multiple_of(cfg.thin) {
                debug_assert!(self.state.validate().is_ok());
                draws.push(Draw {
                    chain,
                    iteration: it,
                    state: self.state,
                });
            }
        }
        let diag = ChainDiagnostics {
            proposal_sd: self.log_sd.map(f64::exp),
            acceptance: std::array::from_fn(|k| {
                if self.tries[k] == 0 {
                    f64::NAN
                } else {
                    self.accepts[k] as f64 / self.tries[k] as f64
                }
            }),
            toggle_acceptance: if self.toggle_tries == 0 {
                f64::NAN
            } else {
                self.toggle_accepts as f64 / self.toggle_tries as f64
            },
        };
        Ok((draws, diag))
    }

    /// Robbins–Monro step on the log proposal scale with gain `1/√batch`.
    fn adapt(&mut self, batch: u32) {
        let gain = 1.0 / (batch as f64).sqrt();
        for k in 0..N_PARAMS {
            if self.window_tries[k] > 0 {
                let rate = self.window_accepts[k] as f64 / self.window_tries[k] as f64;
                self.log_sd[k] = (self.log_sd[k] + gain * (rate - self.config.target_acceptance))
                    .clamp(-12.0, 3.0);
            }
        }
    }

    fn slot_active(&self, slot: usize) -> bool {
        match slot {
            0 => true,
            1..=3 => self.state.config.response.0[slot - 1],
            4..=9 => self.state.config.survival.0[slot - 4],
            _ => true,
        }
    }

    fn metropolis(&mut self, slot: usize, rng: &mut ChaCha8Rng) -> bool {
        let z: f64 = rng.sample(StandardNormal);
        let step = self.log_sd[slot].exp() * z;
        let sd = self.prior.coef_sd;
        let log_u: f64 = rng.random::<f64>().ln();
        match slot {
            0..=3 => {
                let old = self.state.beta[slot];
                let new_ll = self.response_shift(slot, step);
                let log_ratio = new_ll - self.resp_ll + normal_logpdf(old + step, sd) - normal_logpdf(old, sd);
                if log_u < log_ratio {
                    self.state.beta[slot] = old + step;
                    self.resp_ll = new_ll;
                    std::mem::swap(&mut self.resp_eta, &mut self.scratch);
                    true
                } else {
                    false
                }
            }
            4..=9 => {
                let j = slot - 4;
                let old = self.state.gamma[j];
                let (ee, bs) = self.survival_shift(j, step);
                let cur = self.surv_ll(self.state.shape, self.state.rate, self.event_eta, self.base_sum);
                let new = self.surv_ll(self.state.shape, self.state.rate, ee, bs);
                let log_ratio = new - cur + normal_logpdf(old + step, sd) - normal_logpdf(old, sd);
                if log_u < log_ratio {
                    self.state.gamma[j] = old + step;
                    self.event_eta = ee;
                    self.base_sum = bs;
                    std::mem::swap(&mut self.surv_eta, &mut self.scratch);
                    true
                } else {
                    false
                }
            }
            SHAPE_INDEX => {
                let old = self.state.shape;
                let new_shape = old * step.exp();
                let bs = base_sum(&self.surv.log_t, &self.surv_eta, new_shape);
                let cur = self.surv_ll(old, self.state.rate, self.event_eta, self.base_sum);
                let new = self.surv_ll(new_shape, self.state.rate, self.event_eta, bs);
                // random walk on log ν: the Jacobian contributes log ν' − log ν = step
                let log_ratio = new - cur + self.prior.gamma_logpdf(new_shape) - self.prior.gamma_logpdf(old) + step;
                if log_u < log_ratio {
                    self.state.shape = new_shape;
                    self.base_sum = bs;
                    true
                } else {
                    false
                }
            }
            RATE_INDEX => {
                let old = self.state.rate;
                let new_rate = old * step.exp();
                let cur = self.surv_ll(self.state.shape, old, self.event_eta, self.base_sum);
                let new = self.surv_ll(self.state.shape, new_rate, self.event_eta, self.base_sum);
                let log_ratio = new - cur + self.prior.gamma_logpdf(new_rate) - self.prior.gamma_logpdf(old) + step;
                if log_u < log_ratio {
                    self.state.rate = new_rate;
                    true
                } else {
                    false
                }
            }
            _ => unreachable!("parameter slot out of range"),
        }
    }

    /// Response log-likelihood with `β_slot` shifted by `delta`; the shifted
    /// linear predictor is left in `scratch`.
    fn response_shift(&mut self, slot: usize, delta: f64) -> f64 {
        let mut ll = 0.0;
        for (i, x) in self.resp.x.iter().enumerate() {
            let e = self.resp_eta[i] + delta * x[slot];
            self.scratch[i] = e;
            ll += self.resp.y[i] * e - softplus(e);
        }
        ll
    }

    /// `(Σ δη, Σ exp(ν log T + η))` with `γ_j` shifted by `delta`; the
    /// shifted linear predictor is left in `scratch`.
    fn survival_shift(&mut self, j: usize, delta: f64) -> (f64, f64) {
        let shape = self.state.shape;
        let mut ee = 0.0;
        let mut bs = 0.0;
        for (i, x) in self.surv.x.iter().enumerate() {
            let e = self.surv_eta[i] + delta * x[j];
            self.scratch[i] = e;
            ee += self.surv.event[i] * e;
            bs += (shape * self.surv.log_t[i] + e).exp();
        }
        (ee, bs)
    }

    fn toggle(&mut self, ind: Indicator, rng: &mut ChaCha8Rng) -> bool {
        let mut response = self.state.config.response;
        let mut survival = self.state.config.survival;
        let (birth, psi) = match ind {
            Indicator::Response(j) => {
                response.0[j] = !response.0[j];
                if !Family::Response.satisfies_hierarchy(&response.0) {
                    return false;
                }
                (response.0[j], self.prior.psi_z[j])
            }
            Indicator::Survival(j) => {
                survival.0[j] = !survival.0[j];
                if !Family::Survival.satisfies_hierarchy(&survival.0) {
                    return false;
                }
                (survival.0[j], self.prior.psi_w[j])
            }
        };
        let current = match ind {
            Indicator::Response(j) => self.state.beta[j + 1],
            Indicator::Survival(j) => self.state.gamma[j],
        };
        let bsd = self.config.birth_proposal_sd;
        let sd = self.prior.coef_sd;
        let value = if birth {
            bsd * rng.sample::<f64, _>(StandardNormal)
        } else {
            current
        };
        let delta = if birth { value } else { -current };
        let log_u: f64 = rng.random::<f64>().ln();

        // prior ratio and proposal correction for a birth; a death is the reverse move
        let birth_log_ratio = normal_logpdf(value, sd) + bernoulli_logmass(true, psi)
            - bernoulli_logmass(false, psi)
            - normal_logpdf(value, bsd);
        let sign = if birth { 1.0 } else { -1.0 };

        let accepted = match ind {
            Indicator::Response(j) => {
                let new_ll = self.response_shift(j + 1, delta);
                let log_ratio = new_ll - self.resp_ll + sign * birth_log_ratio;
                if log_u < log_ratio {
                    self.state.beta[j + 1] = if birth { value } else { 0.0 };
                    self.resp_ll = new_ll;
                    std::mem::swap(&mut self.resp_eta, &mut self.scratch);
                    true
                } else {
                    false
                }
            }
            Indicator::Survival(j) => {
                let (ee, bs) = self.survival_shift(j, delta);
                let cur = self.surv_ll(self.state.shape, self.state.rate, self.event_eta, self.base_sum);
                let new = self.surv_ll(self.state.shape, self.state.rate, ee, bs);
                let log_ratio = new - cur + sign * birth_log_ratio;
                if log_u < log_ratio {
                    self.state.gamma[j] = if birth { value } else { 0.0 };
                    self.event_eta = ee;
                    self.base_sum = bs;
                    std::mem::swap(&mut self.surv_eta, &mut self.scratch);
                    true
                } else {
                    false
                }
            }
        };
        if accepted {
            self.state.config = ModelConfiguration::new(response, survival)
                .expect("hierarchy checked before the move");
            if !birth {
                // remove accumulated rounding from the cached predictors
                self.refresh();
            }
        }
        accepted
    }

    fn refresh(&mut self) {
        for (e, x) in self.resp_eta.iter_mut().zip(&self.resp.x) {
            *e = dot(x, &self.state.beta);
        }
        for (e, x) in self.surv_eta.iter_mut().zip(&self.surv.x) {
            *e = dot(x, &self.state.gamma);
        }
        self.resp_ll = self
            .resp_eta
            .iter()
            .zip(&self.resp.y)
            .map(|(&e, &y)| y * e - softplus(e))
            .sum();
        self.event_eta = self.surv_eta.iter().zip(&self.surv.event).map(|(e, d)| e * d).sum();
        self.base_sum = base_sum(&self.surv.log_t, &self.surv_eta, self.state.shape);
    }
}

fn dot(x: &[f64], b: &[f64]) -> f64 {
    x.iter().zip(b).map(|(a, b)| a * b).sum()
}

fn base_sum(log_t: &[f64], eta: &[f64], shape: f64) -> f64 {
    log_t.iter().zip(eta).map(|(lt, e)| (shape * lt + e).exp()).sum()
}

/// Shortest interval containing `⌈mass·n⌉` of the sorted samples; the
/// leftmost such window wins ties.
pub fn hpd_interval(samples: &[f64], mass: f64) -> Result<(f64, f64)> {
    if samples.len() < 20 {
        return Err(Error::InvalidInput(format!(
            "HPD interval needs at least 20 samples, got {}",
            samples.len()
        )));
    }
    if !(mass > 0.0 && mass <= 1.0) {
        return Err(Error::InvalidInput(format!("HPD mass must lie in (0,1], got {mass}")));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::InvalidInput("HPD samples contain NaN".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let k = ((mass * n as f64) - 1e-9).ceil().max(1.0) as usize;
    let mut best = 0;
    let mut width = f64::INFINITY;
    for i in 0..=n - k {
        let w = sorted[i + k - 1] - sorted[i];
        if w < width {
            width = w;
            best = i;
        }
    }
    Ok((sorted[best], sorted[best + k - 1]))
}

/// Arithmetic mean with a correction pass; exact for constant input.
pub(crate) fn mean(xs: &[f64]) -> f64 {
    let first = xs[0];
    if xs.iter().all(|&x| x == first) {
        return first;
    }
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    m + xs.iter().map(|x| x - m).sum::<f64>() / n
}

/// Split-R̂ over `chains`, each split into halves. A parameter with zero
/// within-chain variance gives 1 when all halves agree and `+∞` otherwise.
pub fn split_rhat(chains: &[&[f64]]) -> f64 {
    let half = chains.iter().map(|c| c.len() / 2).min().unwrap_or(0);
    if half < 2 {
        return f64::NAN;
    }
    let mut halves: Vec<&[f64]> = Vec::with_capacity(2 * chains.len());
    for c in chains {
        halves.push(&c[..half]);
        halves.push(&c[c.len() - half..]);
    }
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, m)| h.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / halves.len() as f64;
    let grand = means.iter().sum::<f64>() / means.len() as f64;
    let b = n * means.iter().map(|m| (m - grand).powi(2)).sum::<f64>() / (means.len() as f64 - 1.0);
    if w <= 0.0 {
        return if b <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    (var_plus / w).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterSummary {
    pub name: &'static str,
    pub mean: f64,
    pub sd: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    pub rhat: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorSummary {
    pub parameters: Vec<ParameterSummary>,
    pub response_models: Vec<(ModelLabel, f64)>,
    pub survival_models: Vec<(ModelLabel, f64)>,
    pub draws: usize,
}

impl PosteriorSummary {
    pub fn parameter(&self, name: &str) -> Option<&ParameterSummary> {
        self.parameters.iter().find(|p| p.name == name)
    }

    pub fn model_probability(&self, label: ModelLabel) -> f64 {
        let table = match label.family {
            Family::Response => &self.response_models,
            Family::Survival => &self.survival_models,
        };
        table.iter().find(|(l, _)| *l == label).map_or(0.0, |(_, p)| *p)
    }

    pub fn top_model(&self, family: Family) -> ModelLabel {
        let table = match family {
            Family::Response => &self.response_models,
            Family::Survival => &self.survival_models,
        };
        // first maximum in table order
        table
            .iter()
            .fold(None::<(ModelLabel, f64)>, |best, &(l, p)| match best {
                Some((_, bp)) if bp >= p => best,
                _ => Some((l, p)),
            })
            .map(|(l, _)| l)
            .expect("model tables are never empty")
    }

    /// Coefficient table: `parameter,mean,sd,hpd_lower,hpd_upper,rhat`.
    pub fn write_parameters<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "parameter,mean,sd,hpd_lower,hpd_upper,rhat")?;
        for p in &self.parameters {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                p.name,
                g17(p.mean),
                g17(p.sd),
                g17(p.hpd_lower),
                g17(p.hpd_upper),
                g17(p.rhat)
            )?;
        }
        Ok(())
    }

    /// Model-probability table: `family,model,probability`.
    pub fn write_models<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "family,model,probability")?;
        for (fam, table) in [("response", &self.response_models), ("survival", &self.survival_models)] {
            for (l, p) in table {
                writeln!(w, "{fam},{l},{}", g17(*p))?;
            }
        }
        Ok(())
    }
}

/// Moments, 95% HPD and split-R̂ of every parameter over all retained
/// draws (inactive draws contribute their zeros), plus model frequencies.
pub fn summarize_posterior(draws: &PosteriorDraws) -> Result<PosteriorSummary> {
    let n = draws.len();
    if n < 100 {
        return Err(Error::InvalidInput(format!(
            "posterior summary needs at least 100 draws, got {n}"
        )));
    }
    let columns: Vec<Vec<f64>> = (0..N_PARAMS)
        .map(|k| draws.states().map(|s| s.values()[k]).collect())
        .collect();
    let chain_ids: Vec<usize> = draws.draws.iter().map(|d| d.chain).collect();

    let mut parameters = Vec::with_capacity(N_PARAMS);
    for (k, col) in columns.iter().enumerate() {
        let mean = mean(col);
        let sd = (col.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0)).sqrt();
        let (lo, hi) = hpd_interval(col, 0.95)?;
        let per_chain: Vec<Vec<f64>> = (0..draws.chains)
            .map(|c| {
                col.iter()
                    .zip(&chain_ids)
                    .filter(|(_, &id)| id == c)
                    .map(|(x, _)| *x)
                    .collect()
            })
            .filter(|v: &Vec<f64>| !v.is_empty())
            .collect();
        let refs: Vec<&[f64]> = per_chain.iter().map(|v| v.as_slice()).collect();
        parameters.push(ParameterSummary {
            name: PARAM_NAMES[k],
            mean,
            sd,
            hpd_lower: lo,
            hpd_upper: hi,
            rhat: split_rhat(&refs),
        });
    }

    let freq = |family: Family| -> Vec<(ModelLabel, f64)> {
        let mut counts = vec![0usize; family.models()];
        for s in draws.states() {
            let id = match family {
                Family::Response => s.config.response_id(),
                Family::Survival => s.config.survival_id(),
            };
            counts[id.index as usize] += 1;
        }
        counts
            .iter()
            .enumerate()
            .map(|(i, &c)| (family.label(i), c as f64 / n as f64))
            .collect()
    };
    Ok(PosteriorSummary {
        parameters,
        response_models: freq(Family::Response),
        survival_models: freq(Family::Survival),
        draws: n,
    })
}

const DRAW_META: [&str; 4] = ["chain", "iteration", "response_model", "survival_model"];

/// Writes draws as CSV: `chain,iteration,response_model,survival_model`
/// followed by the twelve parameters.
pub fn write_draws<W: Write>(draws: &PosteriorDraws, writer: W) -> Result<()> {
    let mut w = std::io::BufWriter::new(writer);
    let header: Vec<&str> = DRAW_META.iter().chain(PARAM_NAMES.iter()).copied().collect();
    let fail = |e: std::io::Error| Error::Numerical(format!("write failed: {e}"));
    writeln!(w, "{}", header.join(",")).map_err(fail)?;
    for d in &draws.draws {
        let vals: Vec<String> = d.state.values().iter().map(|&v| g17(v)).collect();
        writeln!(
            w,
            "{},{},{},{},{}",
            d.chain,
            d.iteration,
            d.state.config.response_id(),
            d.state.config.survival_id(),
            vals.join(",")
        )
        .map_err(fail)?;
    }
    w.flush().map_err(fail)
}

pub fn save_draws(draws: &PosteriorDraws, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_draws(draws, file)
}

pub fn read_draws<R: Read>(reader: R) -> Result<PosteriorDraws> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let required: Vec<&str> = DRAW_META.iter().chain(PARAM_NAMES.iter()).copied().collect();
    let cols = column_map(&headers, &required, &[])?;
    let mut draws = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |name: &'static str| -> Result<&str> {
            Ok(rec.get(cols[name]).unwrap_or(""))
        };
        let int = |name: &'static str| -> Result<usize> {
            field(name)?.parse().map_err(|_| Error::InvalidField {
                line,
                field: name,
                message: "expected a non-negative integer".into(),
            })
        };
        let label = |name: &'static str| -> Result<ModelLabel> {
            field(name)?.parse().map_err(|e: Error| Error::InvalidField {
                line,
                field: name,
                message: e.to_string(),
            })
        };
        let config = ModelConfiguration::new(
            response_indicators(label("response_model")?)?,
            survival_indicators(label("survival_model")?)?,
        )?;
        let mut values = [0.0; N_PARAMS];
        for (k, name) in PARAM_NAMES.iter().enumerate() {
            values[k] = parse_real(field(name)?, line, name)?;
        }
        let state = ParameterState::from_values(&values, config).map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        draws.push(Draw {
            chain: int("chain")?,
            iteration: int("iteration")?,
            state,
        });
    }
    PosteriorDraws::from_draws(draws)
}

pub fn load_draws(path: impl AsRef<Path>) -> Result<PosteriorDraws> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_draws(file)
}

/// Draws whose indicators all satisfy the hierarchy; used as a per-draw check.
pub fn all_draws_valid(draws: &PosteriorDraws) -> bool {
    draws.states().all(|s| {
        s.validate().is_ok()
            && ResponseIndicators::is_valid(&s.config.response)
            && SurvivalIndicators::is_valid(&s.config.survival)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectRecord;
    use crate::likelihood::logistic;
    use approx::assert_relative_eq;
    use rand::SeedableRng;

    fn toy_dataset(n: usize, seed: u64, beta1: f64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let recs = (0..n)
            .map(|i| {
                let a = (i % 2) as u8;
                let x: f64 = rng.random_range(-2.0..4.0);
                let y = rng.random_bool(logistic(-0.2 + beta1 * a as f64)) as u8;
                let t = (-rng.random::<f64>().ln()).sqrt();
                let d = (t < 1.2) as u8;
                SubjectRecord::new(a, x, y, t.min(1.2), d).unwrap()
            })
            .collect();
        Dataset::new(recs).unwrap()
    }

    fn constant_draws(n: usize, beta0: f64, cfg: ModelConfiguration) -> PosteriorDraws {
        let state = ParameterState::new([beta0, 0.0, 0.0, 0.0], [0.0; 6], 2.0, 1.0, cfg).unwrap();
        PosteriorDraws::from_draws(
            (0..n)
                .map(|i| Draw {
                    chain: i % 2,
                    iteration: i / 2,
                    state,
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn hpd_uniform_grid() {
        let s: Vec<f64> = (1..=100).map(|i| i as f64).collect();
        assert_eq!(hpd_interval(&s, 0.95).unwrap(), (1.0, 95.0));
    }

    #[test]
    fn hpd_constant_samples() {
        assert_eq!(hpd_interval(&[2.5; 50], 0.95).unwrap(), (2.5, 2.5));
    }

    #[test]
    fn hpd_rejects_small_samples() {
        assert!(hpd_interval(&[1.0; 10], 0.95).is_err());
    }

    #[test]
    fn hpd_of_mixture_includes_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = vec![0.0; 3000];
        s.extend((0..7000).map(|_| 2.0 + 0.25 * rng.sample::<f64, _>(StandardNormal)));
        let (lo, hi) = hpd_interval(&s, 0.95).unwrap();
        // brute force: every window of the required size, shortest wins
        let mut sorted = s.clone();
        sorted.sort_by(f64::total_cmp);
        let k = 9500;
        let (best, _) = (0..=sorted.len() - k)
            .map(|i| (i, sorted[i + k - 1] - sorted[i]))
            .fold((0, f64::INFINITY), |acc, (i, w)| if w < acc.1 { (i, w) } else { acc });
        assert_eq!((lo, hi), (sorted[best], sorted[best + k - 1]));
        assert!(lo <= 0.0 && hi >= 0.0);
    }

    #[test]
    fn hpd_of_standard_normal() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s: Vec<f64> = (0..10_000).map(|_| rng.sample(StandardNormal)).collect();
        let (lo, hi) = hpd_interval(&s, 0.95).unwrap();
        assert!((lo + 1.96).abs() < 0.08 && (hi - 1.96).abs() < 0.08, "{lo} {hi}");
    }

    #[test]
    fn rhat_conventions() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let b: Vec<f64> = (0..5000).map(|_| rng.sample(StandardNormal)).collect();
        let r = split_rhat(&[&a, &b]);
        assert!((r - 1.0).abs() < 0.02, "{r}");
        assert_eq!(split_rhat(&[&[1.0; 10], &[2.0; 10]]), f64::INFINITY);
        assert_eq!(split_rhat(&[&[1.0; 10], &[1.0; 10]]), 1.0);
    }

    #[test]
    fn summary_of_constant_draws() {
        let cfg = ModelConfiguration::from_labels("R1".parse().unwrap(), "S1".parse().unwrap()).unwrap();
        let s = summarize_posterior(&constant_draws(200, 0.7, cfg)).unwrap();
        let b0 = s.parameter("beta0").unwrap();
        assert_eq!((b0.mean, b0.sd, b0.hpd_lower, b0.hpd_upper, b0.rhat), (0.7, 0.0, 0.7, 0.7, 1.0));
        assert_eq!(s.model_probability("R1".parse().unwrap()), 1.0);
        assert_eq!(s.model_probability("R5".parse().unwrap()), 0.0);
        assert_relative_eq!(s.response_models.iter().map(|x| x.1).sum::<f64>(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn all_r5_draws() {
        let full = ModelConfiguration::full();
        let s = summarize_posterior(&constant_draws(150, 0.0, full)).unwrap();
        assert_eq!(s.model_probability("R5".parse().unwrap()), 1.0);
        assert_eq!(s.top_model(Family::Survival).to_string(), "S18");
    }

    #[test]
    fn draws_round_trip_through_csv() {
        let d = toy_dataset(40, 1, 1.0);
        let cfg = SamplerConfig { iterations: 300, burn_in: 100, ..Default::default() };
        let draws = run_mcmc(&d, &PriorSpec::default(), &cfg).unwrap();
        let mut buf = Vec::new();
        write_draws(&draws, &mut buf).unwrap();
        let back = read_draws(buf.as_slice()).unwrap();
        assert_eq!(back.draws, draws.draws);
        let mut again = Vec::new();
        write_draws(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn sampler_is_deterministic_and_valid() {
        let d = toy_dataset(60, 2, 1.5);
        let cfg = SamplerConfig { iterations: 600, burn_in: 200, thin: 2, seed: 42, ..Default::default() };
        let a = run_mcmc(&d, &PriorSpec::default(), &cfg).unwrap();
        let b = run_mcmc(&d, &PriorSpec::default(), &cfg).unwrap();
        assert_eq!(a.draws, b.draws);
        assert_eq!(a.len(), 2 * cfg.retained());
        assert!(all_draws_valid(&a));
        // different chains explore different paths
        let c0: Vec<_> = a.chain(0).map(|d| d.state.beta[0]).collect();
        let c1: Vec<_> = a.chain(1).map(|d| d.state.beta[0]).collect();
        assert_ne!(c0, c1);
    }

    #[test]
    fn frozen_full_model_tracks_mle() {
        let d = toy_dataset(400, 4, 1.0);
        let cfg = SamplerConfig {
            chains: 1,
            iterations: 4000,
            burn_in: 1000,
            frozen: IndicatorMask::all(),
            ..Default::default()
        };
        let draws = run_mcmc(&d, &PriorSpec::default(), &cfg).unwrap();
        assert!(draws.states().all(|s| s.config == ModelConfiguration::full()));
        let summary = summarize_posterior(&draws).unwrap();
        let mle = fit_mle(&d, &ModelConfiguration::full()).unwrap().state.values();
        for (k, p) in summary.parameters.iter().enumerate() {
            assert!((p.mean - mle[k]).abs() < 2.0 * p.sd, "{} {} vs {}", p.name, p.mean, mle[k]);
        }
        let acc = &draws.diagnostics[0].acceptance;
        assert!(acc.iter().all(|&a| a > 0.25 && a < 0.65), "{acc:?}");
    }

    /// Posterior probability of R2 against R1 by 2-D quadrature of the
    /// response likelihood times the Normal priors.
    fn toy_model_probability(d: &Dataset, sd: f64, psi: f64) -> f64 {
        let rows: Vec<(f64, f64)> = d.iter().map(|r| (r.arm as f64, r.response as f64)).collect();
        let loglik = |b0: f64, b1: f64| -> f64 {
            rows.iter()
                .map(|&(a, y)| {
                    let p = 1.0 / (1.0 + (-(b0 + b1 * a)).exp());
                    if y == 1.0 { p.ln() } else { (1.0 - p).ln() }
                })
                .sum()
        };
        let logn = |x: f64| -0.5 * (x / sd).powi(2) - (sd * (2.0 * std::f64::consts::PI).sqrt()).ln();
        let m = 600;
        let (lo, hi) = (-12.0, 12.0);
        let h = (hi - lo) / m as f64;
        let grid: Vec<f64> = (0..=m).map(|i| lo + i as f64 * h).collect();
        let lse = |v: &[f64]| {
            let mx = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            mx + v.iter().map(|x| (x - mx).exp()).sum::<f64>().ln()
        };
        let one: Vec<f64> = grid.iter().map(|&b0| loglik(b0, 0.0) + logn(b0)).collect();
        let two: Vec<f64> = grid
            .iter()
            .flat_map(|&b0| grid.iter().map(move |&b1| (b0, b1)))
            .map(|(b0, b1)| loglik(b0, b1) + logn(b0) + logn(b1))
            .collect();
        let log_m1 = lse(&one) + h.ln();
        let log_m2 = lse(&two) + 2.0 * h.ln();
        let a = psi.ln() + log_m2;
        let b = (1.0 - psi).ln() + log_m1;
        1.0 / (1.0 + (b - a).exp())
    }

    #[test]
    fn two_model_toy_matches_quadrature() {
        let d = toy_dataset(20, 12, 1.2);
        let prior = PriorSpec { coef_sd: 2.5, ..Default::default() };
        let truth = toy_model_probability(&d, 2.5, 0.5);
        let cfg = SamplerConfig {
            chains: 1,
            iterations: 55_000,
            burn_in: 5_000,
            seed: 8,
            initial_config: Some(
                ModelConfiguration::from_labels("R2".parse().unwrap(), "S1".parse().unwrap()).unwrap(),
            ),
            frozen: IndicatorMask { response: [false, true, true], survival: [true; 6] },
            ..Default::default()
        };
        let draws = run_mcmc(&d, &prior, &cfg).unwrap();
        let p2 = summarize_posterior(&draws).unwrap().model_probability("R2".parse().unwrap());
        assert!((p2 - truth).abs() < 0.03, "sampler {p2} vs quadrature {truth}");
        assert!(truth > 0.1 && truth < 0.9, "toy should be informative: {truth}");
    }

    #[test]
    fn invalid_config_is_rejected() {
        let d = toy_dataset(20, 1, 0.0);
        let bad = SamplerConfig { burn_in: 10_000, ..Default::default() };
        assert!(matches!(run_mcmc(&d, &PriorSpec::default(), &bad), Err(Error::InvalidConfiguration(_))));
    }
}
