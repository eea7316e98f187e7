//! C ABI over `medbma`.
//!
//! Objects are opaque handles created by `*_new`/`*_load`/`medbma_fit`
//! style functions and released with the matching `*_free`. Every fallible
//! function returns a [`MedbmaStatus`]; on failure the message is available
//! from [`medbma_last_error`] on the same thread. Panics never cross the
//! boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use medbma::data::{load_dataset, CovariatePolicy, Dataset, SubjectRecord};
use medbma::likelihood::PriorSpec;
use medbma::mediation::{risk_ratio_curves, TimeGrid};
use medbma::model_space::Family;
use medbma::prediction::{predictive_power, PredictionMode, PredictionRequest, TestFrame, TestSubject};
use medbma::prior::{calibrate_psi, AnnealingConfig, WeightScheme};
use medbma::sampler::{load_draws, save_draws, summarize_posterior, PosteriorDraws, PosteriorSummary, SamplerConfig};
use medbma::simulation::{fit_posterior, generate_dataset, FitSettings, Scenario, ScenarioLabel};
use medbma::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MedbmaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    Numerical = 5,
    Panic = 6,
}

/// Subject-level data.
pub struct MedbmaDataset(Dataset);

/// Posterior draws with their summary.
pub struct MedbmaPosterior {
    draws: PosteriorDraws,
    summary: PosteriorSummary,
}

/// Options for [`medbma_fit`]; start from [`medbma_fit_options_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MedbmaFitOptions {
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub seed: u64,
    /// 0 = AIC rank, 1 = equal, 2 = reversed AIC values.
    pub weighting: u32,
    pub coef_sd: f64,
    pub anneal_evaluations: usize,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct MedbmaParameterSummary {
    pub mean: f64,
    pub sd: f64,
    pub hpd_lower: f64,
    pub hpd_upper: f64,
    pub rhat: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MedbmaStatus {
    match e {
        Error::Io { .. } => MedbmaStatus::Io,
        Error::Parse { .. } | Error::Csv(_) | Error::InvalidField { .. } => MedbmaStatus::Parse,
        e if e.is_numerical() => MedbmaStatus::Numerical,
        _ => MedbmaStatus::InvalidArgument,
    }
}

enum Failure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MedbmaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MedbmaStatus::Ok,
        Ok(Err(Failure::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            MedbmaStatus::NullPointer
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MedbmaStatus::Panic
        }
    }
}

unsafe fn reference<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Failure> {
    unsafe { p.as_ref() }.ok_or(Failure::Null(what))
}

unsafe fn slice<'a, T>(p: *const T, n: usize, what: &'static str) -> Result<&'a [T], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, n) })
}

unsafe fn slice_mut<'a, T>(p: *mut T, n: usize, what: &'static str) -> Result<&'a mut [T], Failure> {
    if n == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Failure::Null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts_mut(p, n) })
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(Failure::Null("path"));
    }
    let s = unsafe { CStr::from_ptr(p) }
        .to_str()
        .map_err(|_| Error::InvalidInput("path is not valid UTF-8".into()))?;
    Ok(PathBuf::from(s))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(Failure::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

/// Message of the last failure on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn medbma_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn medbma_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a subject CSV (`arm,covariate,response,time,event`).
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn medbma_dataset_load(path_: *const c_char, out: *mut *mut MedbmaDataset) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { path(path_) }?;
        let d = load_dataset(p, CovariatePolicy::Reject)?;
        unsafe { put(out, MedbmaDataset(d)) }
    })
}

/// Builds a dataset from `n` parallel columns.
///
/// # Safety
/// Each array must hold `n` elements; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_dataset_from_columns(
    n: usize,
    arm: *const u8,
    covariate: *const f64,
    response: *const u8,
    time: *const f64,
    event: *const u8,
    out: *mut *mut MedbmaDataset,
) -> MedbmaStatus {
    guard(|| {
        let (a, x, y, t, d) = unsafe {
            (
                slice(arm, n, "arm")?,
                slice(covariate, n, "covariate")?,
                slice(response, n, "response")?,
                slice(time, n, "time")?,
                slice(event, n, "event")?,
            )
        };
        let records = (0..n)
            .map(|i| SubjectRecord::new(a[i], x[i], y[i], t[i], d[i]))
            .collect::<Result<Vec<_>, _>>()?;
        unsafe { put(out, MedbmaDataset(Dataset::new(records)?)) }
    })
}

/// Synthetic trial from scenario 1–4 with `n` (even) subjects.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_dataset_simulate(
    scenario: u32,
    n: usize,
    seed: u64,
    out: *mut *mut MedbmaDataset,
) -> MedbmaStatus {
    guard(|| {
        let label: ScenarioLabel = scenario.to_string().parse()?;
        let d = generate_dataset(&Scenario::get(label), n, seed)?;
        unsafe { put(out, MedbmaDataset(d)) }
    })
}

/// Number of subjects; 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medbma_dataset_len(dataset: *const MedbmaDataset) -> usize {
    unsafe { dataset.as_ref() }.map_or(0, |d| d.0.len())
}

/// # Safety
/// `dataset` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn medbma_dataset_free(dataset: *mut MedbmaDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

#[no_mangle]
pub extern "C" fn medbma_fit_options_default() -> MedbmaFitOptions {
    let s = SamplerConfig::default();
    MedbmaFitOptions {
        chains: s.chains,
        iterations: s.iterations,
        burn_in: s.burn_in,
        thin: s.thin,
        seed: s.seed,
        weighting: 0,
        coef_sd: PriorSpec::default().coef_sd,
        anneal_evaluations: AnnealingConfig::default().evaluations,
    }
}

fn settings(o: &MedbmaFitOptions) -> Result<FitSettings, Error> {
    let weighting = match o.weighting {
        0 => WeightScheme::Rank,
        1 => WeightScheme::Equal,
        2 => WeightScheme::ReversedValues,
        w => return Err(Error::InvalidConfiguration(format!("unknown weighting code {w}"))),
    };
    Ok(FitSettings {
        sampler: SamplerConfig {
            chains: o.chains,
            iterations: o.iterations,
            burn_in: o.burn_in,
            thin: o.thin,
            seed: o.seed,
            ..SamplerConfig::default()
        },
        weighting,
        annealing: AnnealingConfig {
            evaluations: o.anneal_evaluations,
            seed: o.seed,
            ..AnnealingConfig::default()
        },
        prior: PriorSpec {
            coef_sd: o.coef_sd,
            ..PriorSpec::default()
        },
    })
}

fn posterior(draws: PosteriorDraws) -> Result<MedbmaPosterior, Error> {
    let summary = summarize_posterior(&draws)?;
    Ok(MedbmaPosterior { draws, summary })
}

/// Calibrates the model prior and samples the posterior.
///
/// # Safety
/// `dataset` and `options` must be valid; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_fit(
    dataset: *const MedbmaDataset,
    options: *const MedbmaFitOptions,
    out: *mut *mut MedbmaPosterior,
) -> MedbmaStatus {
    guard(|| {
        let d = unsafe { reference(dataset, "dataset") }?;
        let o = unsafe { reference(options, "options") }?;
        let s = settings(o)?;
        s.prior.validate()?;
        let draws = fit_posterior(&d.0, &s, o.seed)?;
        unsafe { put(out, posterior(draws)?) }
    })
}

/// Reads draws written by [`medbma_posterior_save`] or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_posterior_load(path_: *const c_char, out: *mut *mut MedbmaPosterior) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { path(path_) }?;
        unsafe { put(out, posterior(load_draws(p)?)?) }
    })
}

/// # Safety
/// `post` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn medbma_posterior_save(post: *const MedbmaPosterior, path_: *const c_char) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { reference(post, "posterior") }?;
        save_draws(&p.draws, unsafe { path(path_) }?)?;
        Ok(())
    })
}

/// Number of retained draws; 0 for NULL.
///
/// # Safety
/// `post` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn medbma_posterior_len(post: *const MedbmaPosterior) -> usize {
    unsafe { post.as_ref() }.map_or(0, |p| p.draws.len())
}

/// Posterior probability of model `index` (1-based) in family `'R'` or
/// `'S'`.
///
/// # Safety
/// `post` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_posterior_model_probability(
    post: *const MedbmaPosterior,
    family: c_char,
    index: usize,
    out: *mut f64,
) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { reference(post, "posterior") }?;
        let fam = match family as u8 {
            b'R' | b'r' => Family::Response,
            b'S' | b's' => Family::Survival,
            other => return Err(Error::InvalidInput(format!("family must be 'R' or 'S', got {other}")).into()),
        };
        if index == 0 || index > fam.models() {
            return Err(Error::InvalidInput(format!("model index {index} out of range 1..={}", fam.models())).into());
        }
        let v = p.summary.model_probability(fam.label(index - 1));
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        *out = v;
        Ok(())
    })
}

/// Summary of parameter `index` in the order beta0..beta3, gamma1..gamma6,
/// nu, lambda.
///
/// # Safety
/// `post` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_posterior_parameter(
    post: *const MedbmaPosterior,
    index: usize,
    out: *mut MedbmaParameterSummary,
) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { reference(post, "posterior") }?;
        let s = p
            .summary
            .parameters
            .get(index)
            .ok_or_else(|| Error::InvalidInput(format!("parameter index {index} out of range")))?;
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        *out = MedbmaParameterSummary {
            mean: s.mean,
            sd: s.sd,
            hpd_lower: s.hpd_lower,
            hpd_upper: s.hpd_upper,
            rhat: s.rhat,
        };
        Ok(())
    })
}

/// # Safety
/// `post` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn medbma_posterior_free(post: *mut MedbmaPosterior) {
    if !post.is_null() {
        drop(unsafe { Box::from_raw(post) });
    }
}

/// Posterior mean log risk ratios (total, direct, mediated) and the median
/// mediation proportion at each of `n_times` times. Uses at most
/// `max_draws` draws (0 = all).
///
/// # Safety
/// `times` and the four outputs must each hold `n_times` elements.
#[no_mangle]
pub unsafe extern "C" fn medbma_risk_ratio(
    post: *const MedbmaPosterior,
    dataset: *const MedbmaDataset,
    times: *const f64,
    n_times: usize,
    max_draws: usize,
    total: *mut f64,
    direct: *mut f64,
    mediated: *mut f64,
    proportion: *mut f64,
) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { reference(post, "posterior") }?;
        let d = unsafe { reference(dataset, "dataset") }?;
        let grid = TimeGrid::new(unsafe { slice(times, n_times, "times") }?.to_vec())?;
        let c = risk_ratio_curves(&d.0, &p.draws.thinned(max_draws), &grid)?;
        let outs = unsafe {
            [
                slice_mut(total, n_times, "total")?,
                slice_mut(direct, n_times, "direct")?,
                slice_mut(mediated, n_times, "mediated")?,
                slice_mut(proportion, n_times, "proportion")?,
            ]
        };
        let [o_tot, o_dir, o_med, o_prop] = outs;
        for k in 0..n_times {
            o_tot[k] = c.total[k].mean;
            o_dir[k] = c.direct[k].mean;
            o_med[k] = c.mediated[k].mean;
            o_prop[k] = c.proportion[k].median;
        }
        Ok(())
    })
}

/// Predictive power for a frame of `n` subjects. `mode` 0 predicts a
/// future study alone; 1 completes `observed` (required then) with the
/// frame.
///
/// # Safety
/// `arm` and `covariate` must hold `n` elements; `observed` may be NULL
/// in mode 0; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn medbma_predictive_power(
    post: *const MedbmaPosterior,
    n: usize,
    arm: *const u8,
    covariate: *const f64,
    mode: u32,
    alpha: f64,
    landmark: f64,
    observed: *const MedbmaDataset,
    max_draws: usize,
    seed: u64,
    out: *mut f64,
) -> MedbmaStatus {
    guard(|| {
        let p = unsafe { reference(post, "posterior") }?;
        let (a, x) = unsafe { (slice(arm, n, "arm")?, slice(covariate, n, "covariate")?) };
        let frame = TestFrame::new(
            a.iter()
                .zip(x)
                .map(|(&arm, &covariate)| TestSubject { arm, covariate, response: None })
                .collect(),
        )?;
        let mode = match mode {
            0 => PredictionMode::FutureStudy,
            1 => PredictionMode::InterimCompletion,
            m => return Err(Error::InvalidInput(format!("unknown prediction mode {m}")).into()),
        };
        let request = PredictionRequest::new(mode, frame, landmark, alpha)?;
        let obs = unsafe { observed.as_ref() }.map(|d| &d.0);
        let r = predictive_power(&p.draws.thinned(max_draws), &request, obs, seed)?;
        let out = unsafe { out.as_mut() }.ok_or(Failure::Null("out"))?;
        *out = r.power;
        Ok(())
    })
}

/// Inclusion probabilities for family `'R'` (3 terms, 5 targets) or `'S'`
/// (6 terms, 18 targets) whose model prior is closest to proportional to
/// `targets`.
///
/// # Safety
/// `targets` must hold `n_targets` elements, `psi` room for the family's
/// term count, and `residual` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn medbma_calibrate_psi(
    family: c_char,
    targets: *const f64,
    n_targets: usize,
    evaluations: usize,
    seed: u64,
    psi: *mut f64,
    residual: *mut f64,
) -> MedbmaStatus {
    guard(|| {
        let fam = match family as u8 {
            b'R' | b'r' => Family::Response,
            b'S' | b's' => Family::Survival,
            other => return Err(Error::InvalidInput(format!("family must be 'R' or 'S', got {other}")).into()),
        };
        let t = unsafe { slice(targets, n_targets, "targets") }?;
        let cfg = AnnealingConfig { evaluations, seed, ..AnnealingConfig::default() };
        let r = calibrate_psi(t, fam, &cfg)?;
        unsafe { slice_mut(psi, fam.terms(), "psi") }?.copy_from_slice(&r.psi);
        if let Some(res) = unsafe { residual.as_mut() } {
            *res = r.residual;
        }
        Ok(())
    })
}
