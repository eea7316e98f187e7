//! Log risk ratios for the total, direct and mediated treatment effects on
//! survival, and the mediation proportion, over a grid of time points.
//!
//! For a draw and time `t`, `S0` and `S1` average the model survival over
//! control and treated subjects respectively, and `S*` averages over control
//! subjects with their arm switched to treatment while keeping their
//! response and covariate.

use std::io::Write;

use rayon::prelude::*;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::fmt::g17;
use crate::likelihood::{dot6, ParameterState};
use crate::model_space::survival_terms;

/// Draws with `|S1 − S0|` below this are left out of the mediation
/// proportion summary.
pub const MEDPROP_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.is_empty() {
            return Err(Error::InvalidInput("time grid is empty".into()));
        }
        if times.iter().any(|&t| !(t > 0.0 && t.is_finite())) {
            return Err(Error::InvalidInput("grid times must be positive and finite".into()));
        }
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid times must be strictly increasing".into()));
        }
        Ok(TimeGrid { times })
    }

    /// `points` equally spaced times from `0.01·landmark` to `landmark`.
    pub fn up_to_landmark(landmark: f64, points: usize) -> Result<Self> {
        if !(landmark > 0.0 && landmark.is_finite()) || points == 0 {
            return Err(Error::InvalidInput(
                "landmark must be positive and points at least 1".into(),
            ));
        }
        if points == 1 {
            return Self::new(vec![landmark]);
        }
        let lo = 0.01 * landmark;
        let step = (landmark - lo) / (points - 1) as f64;
        let mut times: Vec<f64> = (0..points).map(|k| lo + k as f64 * step).collect();
        times[points - 1] = landmark;
        Self::new(times)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Linear predictors of the three groups for one state, as `exp(η)`.
struct GroupHazards {
    control: Vec<f64>,
    treated: Vec<f64>,
    switched: Vec<f64>,
}

impl GroupHazards {
    fn new(dataset: &Dataset, state: &ParameterState) -> Self {
        let mut g = GroupHazards {
            control: Vec::new(),
            treated: Vec::new(),
            switched: Vec::new(),
        };
        for r in dataset {
            let y = r.response as f64;
            let own = dot6(&survival_terms(r.arm as f64, y, r.covariate), &state.gamma).exp();
            if r.arm == 1 {
                g.treated.push(own);
            } else {
                g.control.push(own);
                g.switched
                    .push(dot6(&survival_terms(1.0, y, r.covariate), &state.gamma).exp());
            }
        }
        g
    }

    fn means(&self, state: &ParameterState, t: f64) -> [f64; 3] {
        let cum = state.rate * t.powf(state.shape);
        let avg = |v: &[f64]| v.iter().map(|e| (-cum * e).exp()).sum::<f64>() / v.len() as f64;
        [avg(&self.control), avg(&self.treated), avg(&self.switched)]
    }
}

/// `(S0, S1, S*)` at time `t` under `state`.
pub fn group_survival_means(dataset: &Dataset, state: &ParameterState, t: f64) -> Result<(f64, f64, f64)> {
    dataset.require_both_arms()?;
    if !(t > 0.0 && t.is_finite()) {
        return Err(Error::InvalidInput(format!("time must be positive, got {t}")));
    }
    let [s0, s1, s_star] = GroupHazards::new(dataset, state).means(state, t);
    Ok((s0, s1, s_star))
}

/// The four per-draw quantities at one time point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectValues {
    pub total: f64,
    pub direct: f64,
    pub mediated: f64,
    /// `None` when `|S1 − S0|` is below [`MEDPROP_TOLERANCE`].
    pub proportion: Option<f64>,
}

impl EffectValues {
    pub fn from_means(s0: f64, s1: f64, s_star: f64) -> Self {
        let diff = s1 - s0;
        EffectValues {
            total: s1.ln() - s0.ln(),
            direct: s_star.ln() - s0.ln(),
            mediated: s1.ln() - s_star.ln(),
            proportion: (diff.abs() >= MEDPROP_TOLERANCE).then(|| (s1 - s_star) / diff),
        }
    }
}

/// Pointwise summary of one curve at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointSummary {
    pub mean: f64,
    pub median: f64,
    pub lower: f64,
    pub upper: f64,
}

impl PointSummary {
    fn of(values: &mut [f64]) -> Self {
        if values.is_empty() {
            return PointSummary {
                mean: f64::NAN,
                median: f64::NAN,
                lower: f64::NAN,
                upper: f64::NAN,
            };
        }
        values.sort_by(f64::total_cmp);
        PointSummary {
            mean: crate::sampler::mean(values),
            median: quantile_sorted(values, 0.5),
            lower: quantile_sorted(values, 0.025),
            upper: quantile_sorted(values, 0.975),
        }
    }

    fn point(v: f64) -> Self {
        PointSummary {
            mean: v,
            median: v,
            lower: v,
            upper: v,
        }
    }
}

/// Empirical quantile with linear interpolation between order statistics.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RiskRatioCurves {
    pub times: Vec<f64>,
    pub total: Vec<PointSummary>,
    pub direct: Vec<PointSummary>,
    pub mediated: Vec<PointSummary>,
    pub proportion: Vec<PointSummary>,
    /// Draws left out of the mediation proportion at each time.
    pub excluded: Vec<usize>,
    /// Largest `|total − direct − mediated|` over draws at each time.
    pub identity_error: Vec<f64>,
    /// `[S0, S1, S*]` per draw (outer) and time (inner).
    pub group_means: Vec<Vec<[f64; 3]>>,
}

/// Curves summarizing `states` over `grid`. Draws are processed in
/// parallel and reduced in their input order.
pub fn risk_ratio_curves(dataset: &Dataset, states: &[ParameterState], grid: &TimeGrid) -> Result<RiskRatioCurves> {
    dataset.require_both_arms()?;
    if states.is_empty() {
        return Err(Error::Empty);
    }
    let group_means: Vec<Vec<[f64; 3]>> = states
        .par_iter()
        .map(|s| {
            let g = GroupHazards::new(dataset, s);
            grid.times().iter().map(|&t| g.means(s, t)).collect()
        })
        .collect();
    Ok(summarize_group_means(grid, group_means))
}

fn summarize_group_means(grid: &TimeGrid, group_means: Vec<Vec<[f64; 3]>>) -> RiskRatioCurves {
    let nt = grid.len();
    let mut curves = RiskRatioCurves {
        times: grid.times().to_vec(),
        total: Vec::with_capacity(nt),
        direct: Vec::with_capacity(nt),
        mediated: Vec::with_capacity(nt),
        proportion: Vec::with_capacity(nt),
        excluded: Vec::with_capacity(nt),
        identity_error: Vec::with_capacity(nt),
        group_means: Vec::new(),
    };
    for k in 0..nt {
        let effects: Vec<EffectValues> = group_means
            .iter()
            .map(|g| EffectValues::from_means(g[k][0], g[k][1], g[k][2]))
            .collect();
        let mut tot: Vec<f64> = effects.iter().map(|e| e.total).collect();
        let mut dir: Vec<f64> = effects.iter().map(|e| e.direct).collect();
        let mut med: Vec<f64> = effects.iter().map(|e| e.mediated).collect();
        let mut prop: Vec<f64> = effects.iter().filter_map(|e| e.proportion).collect();
        curves.identity_error.push(
            effects
                .iter()
                .map(|e| (e.total - e.direct - e.mediated).abs())
                .fold(0.0, f64::max),
        );
        curves.excluded.push(effects.len() - prop.len());
        curves.total.push(PointSummary::of(&mut tot));
        curves.direct.push(PointSummary::of(&mut dir));
        curves.mediated.push(PointSummary::of(&mut med));
        curves.proportion.push(PointSummary::of(&mut prop));
    }
    curves.group_means = group_means;
    curves
}

/// Reference curves at a single known parameter point, averaged over a
/// (typically large) synthetic population.
pub fn true_curves(state: &ParameterState, population: &Dataset, grid: &TimeGrid) -> Result<RiskRatioCurves> {
    population.require_both_arms()?;
    let g = GroupHazards::new(population, state);
    let means: Vec<[f64; 3]> = grid.times().iter().map(|&t| g.means(state, t)).collect();
    let mut curves = summarize_group_means(grid, vec![means.clone()]);
    for (k, m) in means.iter().enumerate() {
        let e = EffectValues::from_means(m[0], m[1], m[2]);
        curves.total[k] = PointSummary::point(e.total);
        curves.direct[k] = PointSummary::point(e.direct);
        curves.mediated[k] = PointSummary::point(e.mediated);
        curves.proportion[k] = PointSummary::point(e.proportion.unwrap_or(f64::NAN));
    }
    Ok(curves)
}

pub const CURVE_NAMES: [&str; 3] = ["lrr_total", "lrr_direct", "lrr_mediated"];

impl RiskRatioCurves {
    /// The three log risk ratio curves in [`CURVE_NAMES`] order.
    pub fn lrr(&self) -> [&[PointSummary]; 3] {
        [&self.total, &self.direct, &self.mediated]
    }

    /// Long format: `time,curve,mean,median,q2.5,q97.5,identity_error`.
    pub fn write_lrr<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,curve,mean,median,q2.5,q97.5,identity_error")?;
        for (k, &t) in self.times.iter().enumerate() {
            for (name, curve) in CURVE_NAMES.iter().zip(self.lrr()) {
                let p = curve[k];
                writeln!(
                    w,
                    "{},{name},{},{},{},{},{}",
                    g17(t),
                    g17(p.mean),
                    g17(p.median),
                    g17(p.lower),
                    g17(p.upper),
                    g17(self.identity_error[k])
                )?;
            }
        }
        Ok(())
    }

    /// `time,curve,mean,median,q2.5,q97.5,excluded` for the mediation proportion.
    pub fn write_proportion<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "time,curve,mean,median,q2.5,q97.5,excluded")?;
        for (k, &t) in self.times.iter().enumerate() {
            let p = self.proportion[k];
            writeln!(
                w,
                "{},med_prop,{},{},{},{},{}",
                g17(t),
                g17(p.mean),
                g17(p.median),
                g17(p.lower),
                g17(p.upper),
                self.excluded[k]
            )?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::SubjectRecord;
    use crate::model_space::{ModelConfiguration, SurvivalIndicators};
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn population(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset::new(
            (0..n)
                .map(|i| {
                    SubjectRecord::new(
                        (i % 2) as u8,
                        rng.random_range(-2.0..4.0),
                        rng.random_bool(0.5) as u8,
                        1.0,
                        1,
                    )
                    .unwrap()
                })
                .collect(),
        )
        .unwrap()
    }

    fn state(gamma: [f64; 6]) -> ParameterState {
        let w = SurvivalIndicators(gamma.map(|g| g != 0.0));
        let cfg = ModelConfiguration::new(crate::model_space::ResponseIndicators::full(), w).unwrap();
        ParameterState::new([1.0, 2.0, -1.0, 2.0], gamma, 2.0, 1.0, cfg).unwrap()
    }

    #[test]
    fn grid_construction() {
        let g = TimeGrid::up_to_landmark(1.2, 100).unwrap();
        assert_eq!(g.len(), 100);
        assert_relative_eq!(g.times()[0], 0.012, epsilon = 1e-15);
        assert_eq!(g.times()[99], 1.2);
        assert!(TimeGrid::new(vec![1.0, 1.0]).is_err());
        assert!(TimeGrid::new(vec![0.0, 1.0]).is_err());
    }

    #[test]
    fn no_treatment_terms_means_no_direct_effect() {
        let d = population(200, 1);
        let s = state([0.0, -0.8, 1.0, 0.0, 0.0, 0.3]);
        for t in [0.1, 0.6, 1.2] {
            let (s0, _, s_star) = group_survival_means(&d, &s, t).unwrap();
            assert_eq!(s0, s_star);
        }
    }

    #[test]
    fn single_control_subject_ph_identity() {
        let d = Dataset::new(vec![
            SubjectRecord::new(0, 0.0, 0, 1.0, 1).unwrap(),
            SubjectRecord::new(1, 0.0, 0, 1.0, 1).unwrap(),
        ])
        .unwrap();
        let g1 = -0.7;
        let s = state([g1, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let (s0, _, s_star) = group_survival_means(&d, &s, 0.8).unwrap();
        assert_relative_eq!(s_star, s0.powf(g1.exp()), max_relative = 1e-14);
    }

    #[test]
    fn one_arm_is_an_error() {
        let d = Dataset::new(vec![
            SubjectRecord::new(0, 0.0, 0, 1.0, 1).unwrap(),
            SubjectRecord::new(0, 1.0, 0, 1.0, 1).unwrap(),
        ])
        .unwrap();
        assert!(group_survival_means(&d, &state([0.0; 6]), 1.0).is_err());
    }

    #[test]
    fn flat_draws_exclude_proportion() {
        let d = population(50, 2);
        let s = state([0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let c = risk_ratio_curves(&d, &[s; 5], &grid).unwrap();
        assert_eq!(c.excluded, vec![5, 5]);
        assert!(c.proportion[0].mean.is_nan());
        assert_eq!(c.total[0].mean, 0.0);
    }

    #[test]
    fn quantiles_interpolate() {
        let v: Vec<f64> = (0..=100).map(|i| i as f64).collect();
        assert_eq!(quantile_sorted(&v, 0.5), 50.0);
        assert_relative_eq!(quantile_sorted(&v, 0.025), 2.5);
        assert_eq!(quantile_sorted(&[3.0], 0.9), 3.0);
    }

    #[test]
    fn csv_shapes() {
        let d = population(40, 3);
        let grid = TimeGrid::new(vec![0.5, 1.0]).unwrap();
        let c = risk_ratio_curves(&d, &[state([-0.4, 0.0, 1.0, 0.0, 0.0, 0.0]); 3], &grid).unwrap();
        let mut a = Vec::new();
        c.write_lrr(&mut a).unwrap();
        assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 3);
        let mut b = Vec::new();
        c.write_proportion(&mut b).unwrap();
        assert_eq!(String::from_utf8(b).unwrap().lines().count(), 3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn decomposition_identity_and_bounds(
            gamma in prop::array::uniform6(-1.5f64..1.5), t in 0.01f64..1.5,
            shape in 0.5f64..3.0, rate in 0.2f64..2.0,
        ) {
            let d = population(30, 4);
            let mut s = state(gamma);
            s.shape = shape;
            s.rate = rate;
            let grid = TimeGrid::new(vec![t]).unwrap();
            let c = risk_ratio_curves(&d, &[s, s], &grid).unwrap();
            prop_assert!(c.identity_error[0] < 1e-12);
            for m in &c.group_means[0][0] {
                prop_assert!(*m > 0.0 && *m <= 1.0);
            }
            for curve in c.lrr() {
                prop_assert!(curve[0].lower <= curve[0].median && curve[0].median <= curve[0].upper);
                prop_assert!(curve[0].mean.is_finite());
            }
            if !(gamma[0] != 0.0 || gamma[3] != 0.0 || gamma[4] != 0.0) {
                prop_assert_eq!(c.direct[0].mean, 0.0);
            }
        }
    }
}
