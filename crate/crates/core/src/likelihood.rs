//! Likelihoods, priors and maximum-likelihood fits for the logistic response
//! model and the Weibull proportional-hazards survival model.
//!
//! The survival model has hazard `ν λ t^(ν-1) exp(η)` and cumulative hazard
//! `λ t^ν exp(η)`, where `η` is the survival linear predictor.

use statrs::function::gamma::ln_gamma;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::linalg::damped_solve;
use crate::model_space::{
    response_terms, survival_terms, ModelConfiguration, ResponseIndicators, SurvivalIndicators,
    RESPONSE_TERMS, SURVIVAL_TERMS,
};

pub const N_PARAMS: usize = 12;
pub const PARAM_NAMES: [&str; N_PARAMS] = [
    "beta0", "beta1", "beta2", "beta3", "gamma1", "gamma2", "gamma3", "gamma4", "gamma5", "gamma6",
    "nu", "lambda",
];
pub const SHAPE_INDEX: usize = 10;
pub const RATE_INDEX: usize = 11;

const MAX_NEWTON_ITERATIONS: usize = 200;
const GRADIENT_TOLERANCE: f64 = 1e-8;
const SEPARATION_BOUND: f64 = 30.0;
const STEP_TOLERANCE: f64 = 1e-4;

/// The full parameter vector `(β, γ, ν, λ)` together with its model.
///
/// Coefficients whose indicator is off are held at exactly zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterState {
    pub beta: [f64; 4],
    pub gamma: [f64; 6],
    pub shape: f64,
    pub rate: f64,
    pub config: ModelConfiguration,
}

impl ParameterState {
    pub fn new(
        beta: [f64; 4],
        gamma: [f64; 6],
        shape: f64,
        rate: f64,
        config: ModelConfiguration,
    ) -> Result<Self> {
        let s = ParameterState {
            beta,
            gamma,
            shape,
            rate,
            config,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::InvalidInput(format!("shape must be > 0, got {}", self.shape)));
        }
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::InvalidInput(format!("rate must be > 0, got {}", self.rate)));
        }
        if self.beta.iter().chain(&self.gamma).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite coefficient".into()));
        }
        for j in 0..RESPONSE_TERMS {
            if !self.config.response.0[j] && self.beta[j + 1] != 0.0 {
                return Err(Error::InvalidInput(format!("inactive beta{} is nonzero", j + 1)));
            }
        }
        for j in 0..SURVIVAL_TERMS {
            if !self.config.survival.0[j] && self.gamma[j] != 0.0 {
                return Err(Error::InvalidInput(format!("inactive gamma{} is nonzero", j + 1)));
            }
        }
        Ok(())
    }

    /// Parameters in [`PARAM_NAMES`] order.
    pub fn values(&self) -> [f64; N_PARAMS] {
        let mut v = [0.0; N_PARAMS];
        v[..4].copy_from_slice(&self.beta);
        v[4..10].copy_from_slice(&self.gamma);
        v[SHAPE_INDEX] = self.shape;
        v[RATE_INDEX] = self.rate;
        v
    }

    pub fn from_values(values: &[f64; N_PARAMS], config: ModelConfiguration) -> Result<Self> {
        let mut beta = [0.0; 4];
        let mut gamma = [0.0; 6];
        beta.copy_from_slice(&values[..4]);
        gamma.copy_from_slice(&values[4..10]);
        Self::new(beta, gamma, values[SHAPE_INDEX], values[RATE_INDEX], config)
    }
}

/// Normal priors on coefficients, Gamma priors on the Weibull parameters and
/// Bernoulli priors on the model indicators.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriorSpec {
    pub coef_sd: f64,
    pub weibull_shape_hyper: f64,
    pub weibull_rate_hyper: f64,
    pub psi_z: [f64; RESPONSE_TERMS],
    pub psi_w: [f64; SURVIVAL_TERMS],
}

impl Default for PriorSpec {
    fn default() -> Self {
        PriorSpec {
            coef_sd: 100.0,
            weibull_shape_hyper: 0.001,
            weibull_rate_hyper: 0.001,
            psi_z: [0.5; RESPONSE_TERMS],
            psi_w: [0.5; SURVIVAL_TERMS],
        }
    }
}

impl PriorSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coef_sd", self.coef_sd),
            ("weibull_shape_hyper", self.weibull_shape_hyper),
            ("weibull_rate_hyper", self.weibull_rate_hyper),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidInput(format!("{name} must be positive, got {v}")));
            }
        }
        if self
            .psi_z
            .iter()
            .chain(&self.psi_w)
            .any(|&p| !(p > 0.0 && p < 1.0))
        {
            return Err(Error::InvalidInput("psi components must lie in (0,1)".into()));
        }
        Ok(())
    }

    pub(crate) fn normal_logpdf(&self, x: f64) -> f64 {
        normal_logpdf(x, self.coef_sd)
    }

    /// Gamma(shape, rate) log-density of a Weibull parameter.
    pub(crate) fn gamma_logpdf(&self, x: f64) -> f64 {
        let a = self.weibull_shape_hyper;
        let b = self.weibull_rate_hyper;
        a * b.ln() - ln_gamma(a) + (a - 1.0) * x.ln() - b * x
    }
}

pub(crate) fn normal_logpdf(x: f64, sd: f64) -> f64 {
    -0.5 * (x / sd).powi(2) - sd.ln() - 0.5 * (2.0 * std::f64::consts::PI).ln()
}

/// `log(1 + e^x)` without overflow.
#[inline]
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

#[inline]
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Unmasked response design rows and outcomes.
#[derive(Debug, Clone)]
pub(crate) struct ResponseColumns {
    pub x: Vec<[f64; 4]>,
    pub y: Vec<f64>,
}

impl ResponseColumns {
    pub fn new(dataset: &Dataset) -> Self {
        ResponseColumns {
            x: dataset
                .iter()
                .map(|r| response_terms(r.arm as f64, r.covariate))
                .collect(),
            y: dataset.iter().map(|r| r.response as f64).collect(),
        }
    }

    pub fn loglik(&self, beta: &[f64; 4]) -> f64 {
        self.x
            .iter()
            .zip(&self.y)
            .map(|(x, &y)| {
                let eta = dot4(x, beta);
                y * eta - softplus(eta)
            })
            .sum()
    }
}

/// Unmasked survival design rows with precomputed log-times. Subjects
/// censored at time zero contribute nothing and are dropped.
#[derive(Debug, Clone)]
pub(crate) struct SurvivalColumns {
    pub x: Vec<[f64; 6]>,
    pub event: Vec<f64>,
    pub log_t: Vec<f64>,
    pub n_events: f64,
    pub sum_event_log_t: f64,
}

impl SurvivalColumns {
    pub fn new(dataset: &Dataset) -> Result<Self> {
        let mut cols = SurvivalColumns {
            x: Vec::with_capacity(dataset.len()),
            event: Vec::with_capacity(dataset.len()),
            log_t: Vec::with_capacity(dataset.len()),
            n_events: 0.0,
            sum_event_log_t: 0.0,
        };
        for (i, r) in dataset.iter().enumerate() {
            if r.time == 0.0 {
                if r.event == 1 {
                    return Err(Error::InvalidInput(format!(
                        "subject {} has an observed event at time 0",
                        i + 1
                    )));
                }
                continue;
            }
            cols.x
                .push(survival_terms(r.arm as f64, r.response as f64, r.covariate));
            cols.event.push(r.event as f64);
            cols.log_t.push(r.time.ln());
            if r.event == 1 {
                cols.n_events += 1.0;
                cols.sum_event_log_t += r.time.ln();
            }
        }
        Ok(cols)
    }

    pub fn loglik(&self, gamma: &[f64; 6], shape: f64, rate: f64) -> f64 {
        let mut event_eta = 0.0;
        let mut cum_hazard = 0.0;
        for ((x, &d), &lt) in self.x.iter().zip(&self.event).zip(&self.log_t) {
            let eta = dot6(x, gamma);
            event_eta += d * eta;
            cum_hazard += (shape * lt + eta).exp();
        }
        self.n_events * (shape.ln() + rate.ln()) + (shape - 1.0) * self.sum_event_log_t + event_eta
            - rate * cum_hazard
    }
}

#[inline]
pub(crate) fn dot4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
pub(crate) fn dot6(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3] + a[4] * b[4] + a[5] * b[5]
}

pub(crate) fn masked_beta(beta: &[f64; 4], z: &ResponseIndicators) -> [f64; 4] {
    let mut b = *beta;
    for j in 0..RESPONSE_TERMS {
        if !z.0[j] {
            b[j + 1] = 0.0;
        }
    }
    b
}

pub(crate) fn masked_gamma(gamma: &[f64; 6], w: &SurvivalIndicators) -> [f64; 6] {
    let mut g = *gamma;
    for j in 0..SURVIVAL_TERMS {
        if !w.0[j] {
            g[j] = 0.0;
        }
    }
    g
}

fn finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerical(format!("{what} is not finite ({value})")))
    }
}

/// Bernoulli log-likelihood of the responses under the logistic model.
pub fn response_loglik(dataset: &Dataset, beta: &[f64; 4], z: &ResponseIndicators) -> Result<f64> {
    let b = masked_beta(beta, z);
    finite(ResponseColumns::new(dataset).loglik(&b), "response log-likelihood")
}

/// Gradient of [`response_loglik`] with respect to `β`; inactive entries are 0.
pub fn response_gradient(dataset: &Dataset, beta: &[f64; 4], z: &ResponseIndicators) -> [f64; 4] {
    let b = masked_beta(beta, z);
    let mut g = [0.0; 4];
    for r in dataset {
        let x = response_terms(r.arm as f64, r.covariate);
        let resid = r.response as f64 - logistic(dot4(&x, &b));
        for j in 0..4 {
            g[j] += x[j] * resid;
        }
    }
    for j in 0..RESPONSE_TERMS {
        if !z.0[j] {
            g[j + 1] = 0.0;
        }
    }
    g
}

/// Right-censored Weibull proportional-hazards log-likelihood.
pub fn survival_loglik(
    dataset: &Dataset,
    gamma: &[f64; 6],
    shape: f64,
    rate: f64,
    w: &SurvivalIndicators,
) -> Result<f64> {
    check_weibull(shape, rate)?;
    let cols = SurvivalColumns::new(dataset)?;
    finite(
        cols.loglik(&masked_gamma(gamma, w), shape, rate),
        "survival log-likelihood",
    )
}

fn check_weibull(shape: f64, rate: f64) -> Result<()> {
    if !(shape > 0.0 && rate > 0.0 && shape.is_finite() && rate.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "Weibull parameters must be positive (shape={shape}, rate={rate})"
        )));
    }
    Ok(())
}

/// Gradient of [`survival_loglik`] in its natural parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalGradient {
    pub gamma: [f64; 6],
    pub shape: f64,
    pub rate: f64,
}

pub fn survival_gradient(
    dataset: &Dataset,
    gamma: &[f64; 6],
    shape: f64,
    rate: f64,
    w: &SurvivalIndicators,
) -> Result<SurvivalGradient> {
    check_weibull(shape, rate)?;
    let cols = SurvivalColumns::new(dataset)?;
    let g = masked_gamma(gamma, w);
    let mut grad = SurvivalGradient {
        gamma: [0.0; 6],
        shape: cols.n_events / shape + cols.sum_event_log_t,
        rate: cols.n_events / rate,
    };
    for ((x, &d), &lt) in cols.x.iter().zip(&cols.event).zip(&cols.log_t) {
        let base = (shape * lt + dot6(x, &g)).exp();
        let h = rate * base;
        for j in 0..6 {
            grad.gamma[j] += x[j] * (d - h);
        }
        grad.shape -= h * lt;
        grad.rate -= base;
    }
    for j in 0..SURVIVAL_TERMS {
        if !w.0[j] {
            grad.gamma[j] = 0.0;
        }
    }
    Ok(grad)
}

/// `S(t) = exp(-λ t^ν exp(row·γ))`.
pub fn survival_probability(t: f64, design_row: &[f64; 6], gamma: &[f64; 6], shape: f64, rate: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    (-rate * t.powf(shape) * dot6(design_row, gamma).exp()).exp()
}

/// Log prior density of a state: Normal terms for the intercept and active
/// coefficients, Gamma terms for `ν` and `λ`, Bernoulli terms for all nine
/// indicators. Inactive coefficients are point masses at zero.
pub fn log_prior(state: &ParameterState, prior: &PriorSpec) -> f64 {
    let cfg = &state.config;
    let mut lp = prior.normal_logpdf(state.beta[0]);
    for j in 0..RESPONSE_TERMS {
        let on = cfg.response.0[j];
        if on {
            lp += prior.normal_logpdf(state.beta[j + 1]);
        }
        lp += bernoulli_logmass(on, prior.psi_z[j]);
    }
    for j in 0..SURVIVAL_TERMS {
        let on = cfg.survival.0[j];
        if on {
            lp += prior.normal_logpdf(state.gamma[j]);
        }
        lp += bernoulli_logmass(on, prior.psi_w[j]);
    }
    lp + prior.gamma_logpdf(state.shape) + prior.gamma_logpdf(state.rate)
}

#[inline]
pub(crate) fn bernoulli_logmass(on: bool, psi: f64) -> f64 {
    if on {
        psi.ln()
    } else {
        (1.0 - psi).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResponseFit {
    pub beta: [f64; 4],
    pub loglik: f64,
    /// `-2 loglik + 2 (active terms + intercept)`.
    pub aic: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalFit {
    pub gamma: [f64; 6],
    pub shape: f64,
    pub rate: f64,
    pub loglik: f64,
    /// `-2 loglik + 2 (active terms + 2)`.
    pub aic: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleFit {
    pub state: ParameterState,
    pub loglik: f64,
    pub aic: f64,
    pub response: ResponseFit,
    pub survival: SurvivalFit,
}

/// Joint maximum-likelihood fit. The two likelihood factors share no
/// parameters, so each is maximized separately and the results summed.
pub fn fit_mle(dataset: &Dataset, config: &ModelConfiguration) -> Result<MleFit> {
    let response = fit_response(dataset, &config.response)?;
    let survival = fit_survival(dataset, &config.survival)?;
    let state = ParameterState::new(
        response.beta,
        survival.gamma,
        survival.shape,
        survival.rate,
        *config,
    )?;
    Ok(MleFit {
        state,
        loglik: response.loglik + survival.loglik,
        aic: response.aic + survival.aic,
        response,
        survival,
    })
}

/// Logistic regression by Newton–Raphson (IRLS) with step halving.
pub fn fit_response(dataset: &Dataset, z: &ResponseIndicators) -> Result<ResponseFit> {
    let cols = ResponseColumns::new(dataset);
    let active: Vec<usize> = std::iter::once(0)
        .chain((0..RESPONSE_TERMS).filter(|&j| z.0[j]).map(|j| j + 1))
        .collect();
    let k = active.len();
    let n = cols.y.len() as f64;
    let ybar = (cols.y.iter().sum::<f64>() / n).clamp(0.5 / n, 1.0 - 0.5 / n);

    let mut beta = [0.0; 4];
    beta[0] = (ybar / (1.0 - ybar)).ln();
    let mut ll = cols.loglik(&beta);

    let mut iterations = 0;
    loop {
        let mut grad = vec![0.0; k];
        let mut info = vec![0.0; k * k];
        for (x, &y) in cols.x.iter().zip(&cols.y) {
            let p = logistic(dot4(x, &beta));
            let wgt = p * (1.0 - p);
            for (a, &ja) in active.iter().enumerate() {
                grad[a] += x[ja] * (y - p);
                for (b, &jb) in active.iter().enumerate().take(a + 1) {
                    info[a * k + b] += wgt * x[ja] * x[jb];
                }
            }
        }
        symmetrize(&mut info, k);
        let gnorm = max_abs(&grad);
        if iterations >= MAX_NEWTON_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: gnorm,
            });
        }
        iterations += 1;
        let step = damped_solve(&info, &grad).ok_or_else(|| {
            Error::Numerical("response information matrix is singular".into())
        })?;
        // A vanishing gradient alone is not enough: under separation the
        // likelihood flattens while the Newton steps stay large.
        if gnorm < GRADIENT_TOLERANCE && max_abs(&step) < STEP_TOLERANCE {
            break;
        }
        match line_search(ll, |t| {
            let mut cand = beta;
            for (a, &j) in active.iter().enumerate() {
                cand[j] += t * step[a];
            }
            (cols.loglik(&cand), cand)
        }) {
            Some((new_ll, cand)) => {
                beta = cand;
                ll = new_ll;
            }
            None => {
                if stalled_at_optimum(gnorm, n) {
                    break;
                }
                return Err(Error::NonConvergence {
                    iterations,
                    gradient_norm: gnorm,
                });
            }
        }
        for &j in &active {
            if beta[j].abs() > SEPARATION_BOUND {
                return Err(Error::Separation {
                    parameter: crate::likelihood::PARAM_NAMES[j].into(),
                    value: beta[j],
                });
            }
        }
    }
    let ll = finite(ll, "response log-likelihood")?;
    Ok(ResponseFit {
        beta,
        loglik: ll,
        aic: -2.0 * ll + 2.0 * k as f64,
        iterations,
    })
}

/// Weibull PH regression by damped Newton in `(γ_active, log ν, log λ)`.
pub fn fit_survival(dataset: &Dataset, w: &SurvivalIndicators) -> Result<SurvivalFit> {
    let cols = SurvivalColumns::new(dataset)?;
    if cols.n_events == 0.0 {
        return Err(Error::InvalidInput(
            "cannot fit survival model: no observed events".into(),
        ));
    }
    let active: Vec<usize> = (0..SURVIVAL_TERMS).filter(|&j| w.0[j]).collect();
    let k = active.len() + 2;
    let n = cols.event.len() as f64;

    let total_time: f64 = cols.log_t.iter().map(|lt| lt.exp()).sum();
    let mut gamma = [0.0; 6];
    let mut log_shape = 0.0;
    let mut log_rate = (cols.n_events / total_time).ln();
    let eval = |g: &[f64; 6], a: f64, b: f64| cols.loglik(g, a.exp(), b.exp());
    let mut ll = eval(&gamma, log_shape, log_rate);

    let mut iterations = 0;
    loop {
        let shape = f64::exp(log_shape);
        let ia = k - 2;
        let ib = k - 1;
        let mut grad = vec![0.0; k];
        let mut info = vec![0.0; k * k];
        grad[ia] = cols.n_events;
        grad[ib] = cols.n_events;
        for ((x, &d), &lt) in cols.x.iter().zip(&cols.event).zip(&cols.log_t) {
            let eta = dot6(x, &gamma);
            let h = (log_rate + shape * lt + eta).exp();
            let l = shape * lt;
            for (a, &ja) in active.iter().enumerate() {
                grad[a] += x[ja] * (d - h);
                for (b, &jb) in active.iter().enumerate().take(a + 1) {
                    info[a * k + b] += x[ja] * x[jb] * h;
                }
                info[ia * k + a] += x[ja] * h * l;
                info[ib * k + a] += x[ja] * h;
            }
            grad[ia] += d * l - h * l;
            grad[ib] -= h;
            info[ia * k + ia] += h * l * l + h * l - d * l;
            info[ib * k + ia] += h * l;
            info[ib * k + ib] += h;
        }
        symmetrize(&mut info, k);
        let gnorm = max_abs(&grad);
        if iterations >= MAX_NEWTON_ITERATIONS {
            return Err(Error::NonConvergence {
                iterations,
                gradient_norm: gnorm,
            });
        }
        iterations += 1;
        let mut step = damped_solve(&info, &grad).ok_or_else(|| {
            Error::Numerical("survival information matrix is singular".into())
        })?;
        // A vanishing gradient alone is not enough: under separation the
        // likelihood flattens while the Newton steps stay large.
        if gnorm < GRADIENT_TOLERANCE && max_abs(&step) < STEP_TOLERANCE {
            break;
        }
        // Keep early steps in log ν from overshooting into overflow.
        let max_step = max_abs(&step);
        if max_step > 5.0 {
            step.iter_mut().for_each(|s| *s *= 5.0 / max_step);
        }
        match line_search(ll, |t| {
            let mut g = gamma;
            for (a, &j) in active.iter().enumerate() {
                g[j] += t * step[a];
            }
            let a = log_shape + t * step[ia];
            let b = log_rate + t * step[ib];
            (eval(&g, a, b), (g, a, b))
        }) {
            Some((new_ll, (g, a, b))) => {
                gamma = g;
                log_shape = a;
                log_rate = b;
                ll = new_ll;
            }
            None => {
                if stalled_at_optimum(gnorm, n) {
                    break;
                }
                return Err(Error::NonConvergence {
                    iterations,
                    gradient_norm: gnorm,
                });
            }
        }
        for &j in &active {
            if gamma[j].abs() > SEPARATION_BOUND {
                return Err(Error::Separation {
                    parameter: PARAM_NAMES[4 + j].into(),
                    value: gamma[j],
                });
            }
        }
    }
    let ll = finite(ll, "survival log-likelihood")?;
    Ok(SurvivalFit {
        gamma,
        shape: log_shape.exp(),
        rate: log_rate.exp(),
        loglik: ll,
        aic: -2.0 * ll + 2.0 * k as f64,
        iterations,
    })
}

/// Step halving: the first `t = 2^-i` whose objective does not decrease
/// beyond rounding noise.
fn line_search<T>(current: f64, mut eval: impl FnMut(f64) -> (f64, T)) -> Option<(f64, T)> {
    let slack = 1e-12 * current.abs();
    let mut t = 1.0;
    for _ in 0..60 {
        let (value, state) = eval(t);
        if value.is_finite() && value >= current - slack {
            return Some((value, state));
        }
        t *= 0.5;
    }
    None
}

/// Rounding can stall the line search right at the optimum; accept when the
/// gradient is small relative to the number of summed terms.
fn stalled_at_optimum(gnorm: f64, n: f64) -> bool {
    gnorm < 1e-6 * n.max(1.0)
}

fn symmetrize(m: &mut [f64], k: usize) {
    for a in 0..k {
        for b in a + 1..k {
            m[a * k + b] = m[b * k + a];
        }
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
