//! Posterior-predictive simulation of new subjects, the two-sample log-rank
//! test, predictive power, and evaluation of power as a predictor of
//! realized significance.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use statrs::function::erf::erfc;

use crate::data::{column_map, parse_binary, parse_real, Dataset};
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::likelihood::{dot4, dot6, logistic, ParameterState};
use crate::model_space::{response_terms, survival_terms};
use crate::rng::substream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PredictionMode {
    /// Test the predicted study on its own.
    #[default]
    FutureStudy,
    /// Test the predicted subjects pooled with the observed interim data.
    InterimCompletion,
}

impl fmt::Display for PredictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredictionMode::FutureStudy => "future_study",
            PredictionMode::InterimCompletion => "interim_completion",
        })
    }
}

impl FromStr for PredictionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "future_study" => Ok(PredictionMode::FutureStudy),
            "interim_completion" => Ok(PredictionMode::InterimCompletion),
            other => Err(Error::InvalidConfiguration(format!(
                "unknown prediction mode '{other}' (expected future_study or interim_completion)"
            ))),
        }
    }
}

/// A subject whose outcomes are to be predicted. A known response skips the
/// response prediction step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestSubject {
    pub arm: u8,
    pub covariate: f64,
    pub response: Option<u8>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestFrame {
    subjects: Vec<TestSubject>,
}

impl TestFrame {
    pub fn new(subjects: Vec<TestSubject>) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::Empty);
        }
        for (i, s) in subjects.iter().enumerate() {
            if s.arm > 1 || s.response.is_some_and(|y| y > 1) || !s.covariate.is_finite() {
                return Err(Error::InvalidInput(format!("test subject {} is invalid", i + 1)));
            }
        }
        Ok(TestFrame { subjects })
    }

    /// `n` subjects split evenly between arms with the given covariates.
    pub fn balanced(covariates: &[f64]) -> Result<Self> {
        Self::new(
            covariates
                .iter()
                .enumerate()
                .map(|(i, &x)| TestSubject {
                    arm: (i % 2) as u8,
                    covariate: x,
                    response: None,
                })
                .collect(),
        )
    }

    pub fn subjects(&self) -> &[TestSubject] {
        &self.subjects
    }

    pub fn len(&self) -> usize {
        self.subjects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subjects.is_empty()
    }
}

/// Reads `arm,covariate[,response]`; an empty response means unknown.
pub fn read_test_frame<R: Read>(reader: R) -> Result<TestFrame> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let cols = column_map(&headers, &["arm", "covariate"], &["response"])?;
    let mut subjects = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let get = |name: &str| cols.get(name).and_then(|&i| rec.get(i)).unwrap_or("");
        let response = match get("response") {
            "" => None,
            text => Some(parse_binary(text, line, "response")?),
        };
        subjects.push(TestSubject {
            arm: parse_binary(get("arm"), line, "arm")?,
            covariate: parse_real(get("covariate"), line, "covariate")?,
            response,
        });
    }
    TestFrame::new(subjects)
}

pub fn load_test_frame(path: impl AsRef<Path>) -> Result<TestFrame> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_test_frame(file)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionRequest {
    pub mode: PredictionMode,
    pub frame: TestFrame,
    pub landmark: f64,
    pub alpha: f64,
}

impl PredictionRequest {
    pub fn new(mode: PredictionMode, frame: TestFrame, landmark: f64, alpha: f64) -> Result<Self> {
        if !(landmark > 0.0 && landmark.is_finite()) {
            return Err(Error::InvalidInput(format!("landmark must be positive, got {landmark}")));
        }
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0,1), got {alpha}")));
        }
        Ok(PredictionRequest {
            mode,
            frame,
            landmark,
            alpha,
        })
    }
}

/// Bernoulli responses for every subject under `state`; known responses are
/// kept as given and consume no randomness.
pub fn predict_response(frame: &TestFrame, state: &ParameterState, rng: &mut impl Rng) -> Vec<u8> {
    frame
        .subjects()
        .iter()
        .map(|s| match s.response {
            Some(y) => y,
            None => {
                let p = logistic(dot4(&response_terms(s.arm as f64, s.covariate), &state.beta));
                (rng.random::<f64>() < p) as u8
            }
        })
        .collect()
}

/// Inverse-CDF event time `(−log U / (λ e^η))^(1/ν)`.
pub fn event_time_from_uniform(u: f64, eta: f64, shape: f64, rate: f64) -> f64 {
    (-u.ln() / (rate * eta.exp())).powf(1.0 / shape)
}

/// Predicted `(time, event)` pairs with administrative censoring at
/// `landmark`. An event exactly at the landmark counts as observed.
pub fn predict_survival(
    frame: &TestFrame,
    responses: &[u8],
    state: &ParameterState,
    landmark: f64,
    rng: &mut impl Rng,
) -> Vec<(f64, u8)> {
    frame
        .subjects()
        .iter()
        .zip(responses)
        .map(|(s, &y)| {
            let eta = dot6(&survival_terms(s.arm as f64, y as f64, s.covariate), &state.gamma);
            // 1 − U is uniform on (0, 1], avoiding log(0)
            let u = 1.0 - rng.random::<f64>();
            let t = event_time_from_uniform(u, eta, state.shape, state.rate);
            if t <= landmark {
                (t, 1)
            } else {
                (landmark, 0)
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRankResult {
    pub statistic: f64,
    pub p_value: f64,
    /// No events at all: the statistic is 0 and p is 1 by convention.
    pub no_events: bool,
}

/// Two-sample log-rank test with hypergeometric variance. Subjects sharing
/// an event time form one risk-set step; subjects censored at that time are
/// still at risk.
pub fn logrank_test(times: &[f64], events: &[u8], arms: &[u8]) -> Result<LogRankResult> {
    let n = times.len();
    if events.len() != n || arms.len() != n {
        return Err(Error::InvalidInput("log-rank inputs differ in length".into()));
    }
    if times.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidInput("log-rank times must be finite".into()));
    }
    let n1_total = arms.iter().filter(|&&a| a == 1).count();
    if n1_total == 0 || n1_total == n {
        return Err(Error::InvalidInput("log-rank test needs both arms".into()));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));

    let mut at_risk = n as f64;
    let mut at_risk1 = n1_total as f64;
    let mut u = 0.0;
    let mut var = 0.0;
    let mut any_event = false;
    let mut i = 0;
    while i < n {
        let t = times[order[i]];
        let mut j = i;
        let (mut d, mut d1, mut leaving, mut leaving1) = (0.0, 0.0, 0.0, 0.0);
        while j < n && times[order[j]] == t {
            let k = order[j];
            let in1 = (arms[k] == 1) as u8 as f64;
            if events[k] == 1 {
                d += 1.0;
                d1 += in1;
            }
            leaving += 1.0;
            leaving1 += in1;
            j += 1;
        }
        if d > 0.0 {
            any_event = true;
            let frac = at_risk1 / at_risk;
            u += d1 - d * frac;
            if at_risk > 1.0 {
                var += d * frac * (1.0 - frac) * (at_risk - d) / (at_risk - 1.0);
            }
        }
        at_risk -= leaving;
        at_risk1 -= leaving1;
        i = j;
    }
    if !any_event || var <= 0.0 {
        return Ok(LogRankResult {
            statistic: 0.0,
            p_value: 1.0,
            no_events: !any_event,
        });
    }
    let statistic = u * u / var;
    Ok(LogRankResult {
        statistic,
        p_value: erfc((statistic / 2.0).sqrt()),
        no_events: false,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PowerResult {
    pub power: f64,
    pub pvalues: Vec<f64>,
    pub draws_used: usize,
    pub alpha: f64,
}

impl PowerResult {
    pub fn from_pvalues(pvalues: Vec<f64>, alpha: f64) -> Result<Self> {
        if pvalues.is_empty() {
            return Err(Error::Empty);
        }
        let hits = pvalues.iter().filter(|&&p| p < alpha).count();
        Ok(PowerResult {
            power: hits as f64 / pvalues.len() as f64,
            draws_used: pvalues.len(),
            pvalues,
            alpha,
        })
    }

    /// `power,draws_used,alpha` with one data row.
    pub fn write_summary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "power,draws_used,alpha")?;
        writeln!(w, "{},{},{}", g17(self.power), self.draws_used, g17(self.alpha))
    }

    /// `draw,p_value`.
    pub fn write_pvalues<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "draw,p_value")?;
        for (m, p) in self.pvalues.iter().enumerate() {
            writeln!(w, "{m},{}", g17(*p))?;
        }
        Ok(())
    }
}

/// Fraction of posterior draws whose predicted trial is significant. Draw
/// `m` uses substream `m` of `seed`, so the result does not depend on the
/// thread count.
pub fn predictive_power(
    states: &[ParameterState],
    request: &PredictionRequest,
    observed: Option<&Dataset>,
    seed: u64,
) -> Result<PowerResult> {
    if states.is_empty() {
        return Err(Error::Empty);
    }
    let observed = match request.mode {
        PredictionMode::FutureStudy => None,
        PredictionMode::InterimCompletion => Some(observed.ok_or_else(|| {
            Error::InvalidInput("interim completion needs the observed interim data".into())
        })?),
    };
    let frame = &request.frame;
    let (mut base_t, mut base_d, mut base_a) = (Vec::new(), Vec::new(), Vec::new());
    if let Some(obs) = observed {
        for r in obs {
            base_t.push(r.time);
            base_d.push(r.event);
            base_a.push(r.arm);
        }
    }
    let arms: Vec<u8> = base_a
        .iter()
        .copied()
        .chain(frame.subjects().iter().map(|s| s.arm))
        .collect();
    let pvalues: Vec<f64> = states
        .par_iter()
        .enumerate()
        .map(|(m, state)| {
            let mut rng: ChaCha8Rng = substream(seed, m as u64);
            let y = predict_response(frame, state, &mut rng);
            let outcomes = predict_survival(frame, &y, state, request.landmark, &mut rng);
            let mut times = base_t.clone();
            let mut events = base_d.clone();
            times.extend(outcomes.iter().map(|o| o.0));
            events.extend(outcomes.iter().map(|o| o.1));
            logrank_test(&times, &events, &arms).map(|r| r.p_value)
        })
        .collect::<Result<_>>()?;
    PowerResult::from_pvalues(pvalues, request.alpha)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionEvaluation {
    /// Spearman correlation of `1 − power` with realized p-values; `None`
    /// when either vector is constant.
    pub spearman: Option<f64>,
    /// `(false positive rate, true positive rate)` from the strictest
    /// threshold to the loosest.
    pub roc: Vec<(f64, f64)>,
    /// `None` when all realized outcomes fall in one class.
    pub auc: Option<f64>,
}

/// Scores predicted power against realized log-rank p-values, with realized
/// significance defined as `p < alpha`.
pub fn evaluate_predictions(power: &[f64], realized: &[f64], alpha: f64) -> Result<PredictionEvaluation> {
    if power.len() != realized.len() {
        return Err(Error::InvalidInput("power and p-value vectors differ in length".into()));
    }
    if power.len() < 2 {
        return Err(Error::InvalidInput("need at least two replications".into()));
    }
    let inverted: Vec<f64> = power.iter().map(|p| 1.0 - p).collect();
    let spearman = spearman(&inverted, realized);
    let labels: Vec<bool> = realized.iter().map(|&p| p < alpha).collect();
    let (roc, auc) = roc_curve(power, &labels);
    Ok(PredictionEvaluation { spearman, roc, auc })
}

/// Ranks from 1, ties sharing their average rank.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && x[order[j + 1]] == x[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(a: &[f64], b: &[f64]) -> Option<f64> {
    let ra = average_ranks(a);
    let rb = average_ranks(b);
    let n = ra.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return None;
    }
    Some(cov / (va * vb).sqrt())
}

/// ROC of `score` as a classifier of `labels`, one point per distinct score,
/// and its trapezoidal area.
pub fn roc_curve(score: &[f64], labels: &[bool]) -> (Vec<(f64, f64)>, Option<f64>) {
    let pos = labels.iter().filter(|&&l| l).count() as f64;
    let neg = labels.len() as f64 - pos;
    let mut order: Vec<usize> = (0..score.len()).collect();
    order.sort_by(|&a, &b| score[b].total_cmp(&score[a]));
    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0.0, 0.0);
    let mut i = 0;
    while i < order.len() {
        let s = score[order[i]];
        while i < order.len() && score[order[i]] == s {
            if labels[order[i]] {
                tp += 1.0;
            } else {
                fp += 1.0;
            }
            i += 1;
        }
        points.push((
            if neg > 0.0 { fp / neg } else { 0.0 },
            if pos > 0.0 { tp / pos } else { 0.0 },
        ));
    }
    if pos == 0.0 || neg == 0.0 {
        return (points, None);
    }
    let auc = points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[1].1 + w[0].1) / 2.0)
        .sum();
    (points, Some(auc))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model_space::ModelConfiguration;
    use approx::assert_relative_eq;
    use proptest::prelude::{prop, prop_assert, proptest, ProptestConfig};
    use rand::SeedableRng;
    use statrs::distribution::{ContinuousCDF, Normal};

    fn state(beta: [f64; 4], gamma: [f64; 6], shape: f64, rate: f64) -> ParameterState {
        ParameterState::new(beta, gamma, shape, rate, ModelConfiguration::full()).unwrap()
    }

    fn frame(n: usize, arm: u8, x: f64) -> TestFrame {
        TestFrame::new(vec![TestSubject { arm, covariate: x, response: None }; n]).unwrap()
    }

    #[test]
    fn inverse_cdf_fixtures() {
        assert_relative_eq!(event_time_from_uniform((-1.0f64).exp(), 0.0, 1.0, 1.0), 1.0, epsilon = 1e-15);
        assert_relative_eq!(event_time_from_uniform(0.5, 0.0, 2.0, 1.0), 2f64.ln().sqrt(), epsilon = 1e-15);
        assert!((2f64.ln().sqrt() - 0.8326).abs() < 1e-4);
    }

    #[test]
    fn response_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = frame(100_000, 1, 1.0);
        let y = predict_response(&f, &state([0.0; 4], [0.0; 6], 1.0, 1.0), &mut rng);
        let rate = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        assert!((rate - 0.5).abs() < 0.01);
        let y = predict_response(&f, &state([1.0, 2.0, -1.0, 2.0], [0.0; 6], 1.0, 1.0), &mut rng);
        let rate = y.iter().map(|&v| v as f64).sum::<f64>() / y.len() as f64;
        assert!((rate - logistic(4.0)).abs() < 0.003, "{rate}");
        assert!((logistic(4.0) - 0.9820).abs() < 1e-4);
        let y = predict_response(&f, &state([-60.0, 0.0, 0.0, 0.0], [0.0; 6], 1.0, 1.0), &mut rng);
        assert!(y.iter().all(|&v| v == 0));
    }

    #[test]
    fn known_responses_are_kept() {
        let f = TestFrame::new(vec![
            TestSubject { arm: 0, covariate: 0.0, response: Some(1) },
            TestSubject { arm: 1, covariate: 0.0, response: Some(0) },
        ])
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(predict_response(&f, &state([-60.0, 0.0, 0.0, 0.0], [0.0; 6], 1.0, 1.0), &mut rng), vec![1, 0]);
    }

    #[test]
    fn censoring_fraction_matches_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = frame(100_000, 0, 0.0);
        let y = vec![0u8; f.len()];
        let out = predict_survival(&f, &y, &state([0.0; 4], [0.0; 6], 2.0, 1.0), 1.2, &mut rng);
        let censored = out.iter().filter(|o| o.1 == 0).count() as f64 / out.len() as f64;
        assert!((censored - (-1.44f64).exp()).abs() < 0.005, "{censored}");
        assert!(out.iter().all(|&(t, d)| t <= 1.2 && (d == 1) == (t < 1.2 || t == 1.2 && d == 1)));
    }

    #[test]
    fn predicted_times_follow_weibull_cdf() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut prng = ChaCha8Rng::seed_from_u64(30);
        for _ in 0..5 {
            let shape = prng.random_range(0.5..3.0);
            let rate = prng.random_range(0.3..2.0);
            let g3 = prng.random_range(-1.0..1.0);
            let x = prng.random_range(-2.0..4.0);
            let s = state([0.0; 4], [0.0, 0.0, g3, 0.0, 0.0, 0.0], shape, rate);
            let f = frame(100_000, 0, x);
            let y = vec![0u8; f.len()];
            let mut t: Vec<f64> = predict_survival(&f, &y, &s, f64::INFINITY, &mut rng).iter().map(|o| o.0).collect();
            t.sort_by(f64::total_cmp);
            let n = t.len() as f64;
            let ks = t
                .iter()
                .enumerate()
                .map(|(i, &ti)| {
                    let cdf = 1.0 - (-rate * ti.powf(shape) * (g3 * x).exp()).exp();
                    (cdf - i as f64 / n).abs().max((cdf - (i + 1) as f64 / n).abs())
                })
                .fold(0.0, f64::max);
            assert!(ks < 0.01, "KS {ks}");
        }
    }

    #[test]
    fn logrank_mirrored_arms() {
        let times = [1.0, 2.0, 3.0, 1.0, 2.0, 3.0];
        let r = logrank_test(&times, &[1; 6], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn logrank_hand_table() {
        // O−E and V per distinct time, arm 1 as the reference group:
        // t=1: n=6 n1=3 E=0.5 V=0.25; t=2: n=5 n1=3 E=0.6 V=0.24;
        // t=3: n=4 n1=3 E=0.75 V=0.1875; t=4,5,6: n1=n so E=1 V=0.
        let o_minus_e: f64 = 3.0 - (0.5 + 0.6 + 0.75 + 3.0);
        let v = 0.25 + 0.24 + 0.1875;
        let stat = o_minus_e * o_minus_e / v;
        let p = 2.0 * (1.0 - Normal::standard().cdf(stat.sqrt()));
        let r = logrank_test(&[1.0, 2.0, 3.0, 4.0, 5.0, 6.0], &[1; 6], &[0, 0, 0, 1, 1, 1]).unwrap();
        assert_relative_eq!(r.statistic, stat, epsilon = 1e-10);
        assert_relative_eq!(r.p_value, p, epsilon = 1e-10);
    }

    #[test]
    fn logrank_no_events() {
        let r = logrank_test(&[1.0, 2.0], &[0, 0], &[0, 1]).unwrap();
        assert!(r.no_events && r.p_value == 1.0);
        assert!(logrank_test(&[1.0, 2.0], &[1, 1], &[0, 0]).is_err());
    }

    #[test]
    fn logrank_against_permutation_oracle() {
        let n = 10;
        let mut times = Vec::new();
        let mut events = Vec::new();
        let mut arms = Vec::new();
        for i in 0..n {
            times.push(0.1 + 0.1 * i as f64);
            events.push(1u8);
            arms.push(0u8);
        }
        for _ in 0..n {
            times.push(1.2);
            events.push(0);
            arms.push(1);
        }
        let observed = logrank_test(&times, &events, &arms).unwrap();
        assert!(observed.p_value < 0.01);
        // exact permutation p-value over every assignment of 10 subjects to arm 1
        let total = 2 * n;
        let (mut count, mut extreme) = (0u64, 0u64);
        for mask in 0u32..(1 << total) {
            if mask.count_ones() as usize != n {
                continue;
            }
            let perm: Vec<u8> = (0..total).map(|i| (mask >> i & 1) as u8).collect();
            let s = logrank_test(&times, &events, &perm).unwrap().statistic;
            count += 1;
            extreme += (s >= observed.statistic - 1e-9) as u64;
        }
        let perm_p = extreme as f64 / count as f64;
        assert!(perm_p < 0.01, "{perm_p}");
    }

    #[test]
    fn power_conventions() {
        let r = PowerResult::from_pvalues(vec![0.01; 150], 0.05).unwrap();
        assert_eq!(r.power, 1.0);
        let f = TestFrame::balanced(&[0.0; 40]).unwrap();
        let req = PredictionRequest::new(PredictionMode::InterimCompletion, f, 1.2, 0.05).unwrap();
        assert!(predictive_power(&[state([0.0; 4], [0.0; 6], 2.0, 1.0)], &req, None, 1).is_err());
    }

    #[test]
    fn power_is_invariant_to_draw_order_of_identical_draws() {
        let f = TestFrame::balanced(&(0..60).map(|i| i as f64 / 10.0 - 2.0).collect::<Vec<_>>()).unwrap();
        let req = PredictionRequest::new(PredictionMode::FutureStudy, f, 1.2, 0.05).unwrap();
        let a = state([0.0; 4], [-0.8, 0.0, 0.0, 0.0, 0.0, 0.0], 2.0, 1.0);
        let b = state([0.0; 4], [0.3, 0.0, 0.0, 0.0, 0.0, 0.0], 2.0, 1.0);
        let forward: Vec<_> = (0..200).map(|i| if i % 2 == 0 { a } else { b }).collect();
        let r1 = predictive_power(&forward, &req, None, 5).unwrap();
        let r2 = predictive_power(&forward, &req, None, 5).unwrap();
        assert_eq!(r1, r2);
        assert!((0.0..=1.0).contains(&r1.power));
    }

    #[test]
    fn evaluation_fixtures() {
        let realized = [0.01, 0.2, 0.03, 0.5];
        let power = [1.0, 0.0, 1.0, 0.0];
        let e = evaluate_predictions(&power, &realized, 0.05).unwrap();
        assert_eq!(e.auc, Some(1.0));
        assert!(e.spearman.unwrap() > 0.0);
        let e = evaluate_predictions(&[0.5, 0.5], &[0.1, 0.2], 0.05).unwrap();
        assert_eq!(e.spearman, None);
        assert_eq!(e.auc, None);
    }

    #[test]
    fn random_pairs_give_chance_auc() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let power: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let realized: Vec<f64> = (0..200).map(|_| rng.random()).collect();
        let auc = evaluate_predictions(&power, &realized, 0.5).unwrap().auc.unwrap();
        assert!((auc - 0.5).abs() < 0.1, "{auc}");
    }

    #[test]
    fn test_frame_csv() {
        let text = "arm,covariate,response\n0,1.5,\n1,-0.5,1\n";
        let f = read_test_frame(text.as_bytes()).unwrap();
        assert_eq!(f.subjects()[0].response, None);
        assert_eq!(f.subjects()[1].response, Some(1));
        assert!(read_test_frame("arm,covariate\n2,1.0\n".as_bytes()).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn logrank_symmetries(
            data in prop::collection::vec((0.01f64..2.0, 0u8..2, 0u8..2), 6..40),
        ) {
            let times: Vec<f64> = data.iter().map(|d| ((d.0 * 20.0).round() / 20.0).max(0.05)).collect();
            let events: Vec<u8> = data.iter().map(|d| d.1).collect();
            let mut arms: Vec<u8> = data.iter().map(|d| d.2).collect();
            arms[0] = 0;
            arms[1] = 1;
            let r = logrank_test(&times, &events, &arms).unwrap();
            let flipped: Vec<u8> = arms.iter().map(|a| 1 - a).collect();
            let f = logrank_test(&times, &events, &flipped).unwrap();
            prop_assert!((r.statistic - f.statistic).abs() <= 1e-9 * (1.0 + r.statistic));

            let mut t2 = times.clone();
            let mut e2 = events.clone();
            let mut a2 = arms.clone();
            t2.push(1e-9);
            e2.push(0);
            a2.push(1);
            let g = logrank_test(&t2, &e2, &a2).unwrap();
            prop_assert!((r.statistic - g.statistic).abs() <= 1e-9 * (1.0 + r.statistic));
            prop_assert!((0.0..=1.0).contains(&r.p_value));
        }
    }
}
