//! The constrained space of 5 response and 18 survival models.
//!
//! Response terms (after the always-present intercept): `A`, `X`, `A×X`.
//! Survival terms: `A`, `Y`, `X`, `A×Y`, `A×X`, `X×Y`. An interaction may be
//! active only when both of its main effects are.

use std::fmt;
use std::str::FromStr;

use crate::data::SubjectRecord;
use crate::error::{Error, Result};

pub const RESPONSE_TERMS: usize = 3;
pub const SURVIVAL_TERMS: usize = 6;
pub const RESPONSE_MODELS: usize = 5;
pub const SURVIVAL_MODELS: usize = 18;

pub const RESPONSE_TERM_NAMES: [&str; RESPONSE_TERMS] = ["A", "X", "AxX"];
pub const SURVIVAL_TERM_NAMES: [&str; SURVIVAL_TERMS] = ["A", "Y", "X", "AxY", "AxX", "XxY"];

const RESPONSE_TABLE: [[u8; RESPONSE_TERMS]; RESPONSE_MODELS] = [
    [0, 0, 0],
    [1, 0, 0],
    [0, 1, 0],
    [1, 1, 0],
    [1, 1, 1],
];

const SURVIVAL_TABLE: [[u8; SURVIVAL_TERMS]; SURVIVAL_MODELS] = [
    [0, 0, 0, 0, 0, 0],
    [1, 0, 0, 0, 0, 0],
    [0, 1, 0, 0, 0, 0],
    [0, 0, 1, 0, 0, 0],
    [1, 1, 0, 0, 0, 0],
    [1, 0, 1, 0, 0, 0],
    [0, 1, 1, 0, 0, 0],
    [1, 1, 0, 1, 0, 0],
    [1, 0, 1, 0, 1, 0],
    [0, 1, 1, 0, 0, 1],
    [1, 1, 1, 0, 0, 0],
    [1, 1, 1, 1, 0, 0],
    [1, 1, 1, 0, 1, 0],
    [1, 1, 1, 0, 0, 1],
    [1, 1, 1, 1, 1, 0],
    [1, 1, 1, 1, 0, 1],
    [1, 1, 1, 0, 1, 1],
    [1, 1, 1, 1, 1, 1],
];

/// Which of the two regression models an indicator vector belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Response,
    Survival,
}

impl Family {
    pub fn terms(self) -> usize {
        match self {
            Family::Response => RESPONSE_TERMS,
            Family::Survival => SURVIVAL_TERMS,
        }
    }

    pub fn models(self) -> usize {
        match self {
            Family::Response => RESPONSE_MODELS,
            Family::Survival => SURVIVAL_MODELS,
        }
    }

    /// Hierarchy constraints as `(main_a, main_b, interaction)` index triples.
    pub fn constraints(self) -> &'static [(usize, usize, usize)] {
        match self {
            Family::Response => &[(0, 1, 2)],
            Family::Survival => &[(0, 1, 3), (0, 2, 4), (1, 2, 5)],
        }
    }

    pub fn satisfies_hierarchy(self, bits: &[bool]) -> bool {
        self.constraints()
            .iter()
            .all(|&(a, b, c)| !bits[c] || (bits[a] && bits[b]))
    }

    /// Indicator vectors of every model, in table order.
    pub fn table(self) -> Vec<Vec<bool>> {
        match self {
            Family::Response => RESPONSE_TABLE
                .iter()
                .map(|r| r.iter().map(|&b| b == 1).collect())
                .collect(),
            Family::Survival => SURVIVAL_TABLE
                .iter()
                .map(|r| r.iter().map(|&b| b == 1).collect())
                .collect(),
        }
    }

    pub fn label(self, index: usize) -> ModelLabel {
        ModelLabel {
            family: self,
            index: index as u8,
        }
    }

    /// 0-based table row of a valid indicator vector.
    pub fn index_of(self, bits: &[bool]) -> Result<usize> {
        if bits.len() != self.terms() {
            return Err(Error::InvalidConfiguration(format!(
                "expected {} indicators, got {}",
                self.terms(),
                bits.len()
            )));
        }
        for &(a, b, c) in self.constraints() {
            if bits[c] && !(bits[a] && bits[b]) {
                let (prefix, names) = match self {
                    Family::Response => ("z", &RESPONSE_TERM_NAMES[..]),
                    Family::Survival => ("w", &SURVIVAL_TERM_NAMES[..]),
                };
                return Err(Error::InvalidConfiguration(format!(
                    "{p}{}·{p}{} ≥ {p}{} violated ({} active without both of {} and {})",
                    a + 1,
                    b + 1,
                    c + 1,
                    names[c],
                    names[a],
                    names[b],
                    p = prefix
                )));
            }
        }
        let found = match self {
            Family::Response => RESPONSE_TABLE
                .iter()
                .position(|row| row.iter().zip(bits).all(|(&r, &b)| (r == 1) == b)),
            Family::Survival => SURVIVAL_TABLE
                .iter()
                .position(|row| row.iter().zip(bits).all(|(&r, &b)| (r == 1) == b)),
        };
        found.ok_or_else(|| Error::InvalidConfiguration("configuration not in model table".into()))
    }
}

/// A model name such as `R4` or `S11`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModelLabel {
    pub family: Family,
    /// 0-based table row.
    pub index: u8,
}

impl PartialOrd for Family {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Family {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (*self as u8).cmp(&(*other as u8))
    }
}

impl fmt::Display for ModelLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let prefix = match self.family {
            Family::Response => 'R',
            Family::Survival => 'S',
        };
        write!(f, "{}{}", prefix, self.index + 1)
    }
}

impl FromStr for ModelLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!("unknown model label `{s}`"));
        let family = match s.chars().next() {
            Some('R') => Family::Response,
            Some('S') => Family::Survival,
            _ => return Err(bad()),
        };
        let n: usize = s[1..].parse().map_err(|_| bad())?;
        if n == 0 || n > family.models() || s[1..].starts_with('0') {
            return Err(bad());
        }
        Ok(family.label(n - 1))
    }
}

/// Response-model indicators `z = (z1, z2, z3)` for `A`, `X`, `A×X`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ResponseIndicators(pub [bool; RESPONSE_TERMS]);

/// Survival-model indicators `w = (w1..w6)` for `A`, `Y`, `X`, `A×Y`, `A×X`, `X×Y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SurvivalIndicators(pub [bool; SURVIVAL_TERMS]);

impl ResponseIndicators {
    pub fn from_bits(bits: [u8; RESPONSE_TERMS]) -> Self {
        ResponseIndicators(bits.map(|b| b != 0))
    }
    pub fn full() -> Self {
        ResponseIndicators([true; RESPONSE_TERMS])
    }
    pub fn is_valid(&self) -> bool {
        Family::Response.satisfies_hierarchy(&self.0)
    }
    pub fn classify(&self) -> Result<ModelLabel> {
        Family::Response
            .index_of(&self.0)
            .map(|i| Family::Response.label(i))
    }
}

impl SurvivalIndicators {
    pub fn from_bits(bits: [u8; SURVIVAL_TERMS]) -> Self {
        SurvivalIndicators(bits.map(|b| b != 0))
    }
    pub fn full() -> Self {
        SurvivalIndicators([true; SURVIVAL_TERMS])
    }
    pub fn is_valid(&self) -> bool {
        Family::Survival.satisfies_hierarchy(&self.0)
    }
    pub fn classify(&self) -> Result<ModelLabel> {
        Family::Survival
            .index_of(&self.0)
            .map(|i| Family::Survival.label(i))
    }
    /// True when any active survival term involves treatment.
    pub fn has_treatment_term(&self) -> bool {
        self.0[0] || self.0[3] || self.0[4]
    }
}

pub fn enumerate_response_models() -> Vec<ResponseIndicators> {
    RESPONSE_TABLE
        .iter()
        .map(|r| ResponseIndicators::from_bits(*r))
        .collect()
}

pub fn enumerate_survival_models() -> Vec<SurvivalIndicators> {
    SURVIVAL_TABLE
        .iter()
        .map(|r| SurvivalIndicators::from_bits(*r))
        .collect()
}

pub fn response_indicators(label: ModelLabel) -> Result<ResponseIndicators> {
    match label.family {
        Family::Response => Ok(ResponseIndicators::from_bits(RESPONSE_TABLE[label.index as usize])),
        Family::Survival => Err(Error::InvalidInput(format!("{label} is not a response model"))),
    }
}

pub fn survival_indicators(label: ModelLabel) -> Result<SurvivalIndicators> {
    match label.family {
        Family::Survival => Ok(SurvivalIndicators::from_bits(SURVIVAL_TABLE[label.index as usize])),
        Family::Response => Err(Error::InvalidInput(format!("{label} is not a survival model"))),
    }
}

/// A point of the joint model space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ModelConfiguration {
    pub response: ResponseIndicators,
    pub survival: SurvivalIndicators,
    response_id: ModelLabel,
    survival_id: ModelLabel,
}

impl ModelConfiguration {
    pub fn new(response: ResponseIndicators, survival: SurvivalIndicators) -> Result<Self> {
        Ok(ModelConfiguration {
            response_id: response.classify()?,
            survival_id: survival.classify()?,
            response,
            survival,
        })
    }

    pub fn from_labels(response: ModelLabel, survival: ModelLabel) -> Result<Self> {
        Self::new(response_indicators(response)?, survival_indicators(survival)?)
    }

    /// R5 with S18.
    pub fn full() -> Self {
        Self::new(ResponseIndicators::full(), SurvivalIndicators::full()).expect("full model valid")
    }

    pub fn response_id(&self) -> ModelLabel {
        self.response_id
    }

    pub fn survival_id(&self) -> ModelLabel {
        self.survival_id
    }
}

/// `(1, z1·A, z2·X, z3·A·X)`.
#[inline]
pub fn response_design_row(record: &SubjectRecord, z: &ResponseIndicators) -> [f64; 4] {
    let full = response_terms(record.arm as f64, record.covariate);
    [
        1.0,
        mask(full[1], z.0[0]),
        mask(full[2], z.0[1]),
        mask(full[3], z.0[2]),
    ]
}

/// Unmasked response design row `(1, A, X, A·X)`.
#[inline]
pub fn response_terms(arm: f64, x: f64) -> [f64; 4] {
    [1.0, arm, x, arm * x]
}

/// Componentwise product of `(A, Y, X, A·Y, A·X, X·Y)` with `w`.
#[inline]
pub fn survival_design_row(record: &SubjectRecord, w: &SurvivalIndicators) -> [f64; 6] {
    let full = survival_terms(record.arm as f64, record.response as f64, record.covariate);
    let mut row = [0.0; 6];
    for j in 0..6 {
        row[j] = mask(full[j], w.0[j]);
    }
    row
}

/// Unmasked survival design row `(A, Y, X, A·Y, A·X, X·Y)`.
#[inline]
pub fn survival_terms(arm: f64, response: f64, x: f64) -> [f64; 6] {
    [arm, response, x, arm * response, arm * x, x * response]
}

#[inline]
fn mask(v: f64, on: bool) -> f64 {
    if on {
        v
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(arm: u8, x: f64, y: u8) -> SubjectRecord {
        SubjectRecord::new(arm, x, y, 1.0, 1).unwrap()
    }

    fn brute_force(family: Family) -> Vec<Vec<bool>> {
        let d = family.terms();
        (0..1u32 << d)
            .map(|m| (0..d).map(|j| m >> j & 1 == 1).collect::<Vec<_>>())
            .filter(|bits| {
                // independent restatement of the hierarchy rule
                match family {
                    Family::Response => (bits[0] as u8 * bits[1] as u8) >= bits[2] as u8,
                    Family::Survival => {
                        (bits[0] as u8 * bits[1] as u8) >= bits[3] as u8
                            && (bits[0] as u8 * bits[2] as u8) >= bits[4] as u8
                            && (bits[1] as u8 * bits[2] as u8) >= bits[5] as u8
                    }
                }
            })
            .collect()
    }

    #[test]
    fn response_enumeration_matches_table() {
        let models = enumerate_response_models();
        assert_eq!(models.len(), 5);
        assert_eq!(models[0], ResponseIndicators::from_bits([0, 0, 0]));
        assert_eq!(models[4], ResponseIndicators::from_bits([1, 1, 1]));
        assert_eq!(brute_force(Family::Response).len(), 5);
    }

    #[test]
    fn survival_enumeration_matches_table() {
        let models = enumerate_survival_models();
        assert_eq!(models.len(), 18);
        assert_eq!(models[0], SurvivalIndicators::from_bits([0; 6]));
        assert_eq!(models[17], SurvivalIndicators::from_bits([1; 6]));
        let valid = brute_force(Family::Survival);
        assert_eq!(valid.len(), 18);
        for bits in valid {
            assert!(models.iter().any(|m| m.0.to_vec() == bits));
        }
    }

    #[test]
    fn classify_examples() {
        assert_eq!(
            ResponseIndicators::from_bits([1, 1, 0]).classify().unwrap().to_string(),
            "R4"
        );
        assert_eq!(
            SurvivalIndicators::from_bits([1, 1, 1, 0, 0, 0]).classify().unwrap().to_string(),
            "S11"
        );
        let err = SurvivalIndicators::from_bits([0, 0, 0, 1, 0, 0]).classify().unwrap_err();
        assert!(err.to_string().contains("w1·w2 ≥ w4"), "{err}");
    }

    #[test]
    fn classify_is_a_bijection_on_the_table() {
        for (i, m) in enumerate_response_models().iter().enumerate() {
            assert_eq!(m.classify().unwrap().to_string(), format!("R{}", i + 1));
        }
        for (i, m) in enumerate_survival_models().iter().enumerate() {
            assert_eq!(m.classify().unwrap().to_string(), format!("S{}", i + 1));
        }
    }

    #[test]
    fn labels_parse_and_print() {
        for s in ["R1", "R5", "S1", "S18"] {
            assert_eq!(s.parse::<ModelLabel>().unwrap().to_string(), s);
        }
        for s in ["R0", "R6", "S19", "X1", "", "S01"] {
            assert!(s.parse::<ModelLabel>().is_err(), "{s}");
        }
    }

    #[test]
    fn design_rows() {
        let z_full = ResponseIndicators::full();
        assert_eq!(response_design_row(&rec(1, 2.0, 0), &z_full), [1.0, 1.0, 2.0, 2.0]);
        assert_eq!(
            response_design_row(&rec(1, 2.0, 0), &ResponseIndicators::default()),
            [1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(response_design_row(&rec(0, 3.0, 0), &z_full), [1.0, 0.0, 3.0, 0.0]);

        let w_full = SurvivalIndicators::full();
        assert_eq!(
            survival_design_row(&rec(1, 2.0, 1), &w_full),
            [1.0, 1.0, 2.0, 1.0, 2.0, 2.0]
        );
        assert_eq!(
            survival_design_row(&rec(1, 2.0, 1), &SurvivalIndicators::default()),
            [0.0; 6]
        );
        assert_eq!(
            survival_design_row(&rec(0, -1.0, 1), &w_full),
            [0.0, 1.0, -1.0, 0.0, 0.0, -1.0]
        );
    }

    proptest! {
        #[test]
        fn classify_accepts_exactly_the_valid_configurations(mask in 0u32..64) {
            let bits: Vec<bool> = (0..6).map(|j| mask >> j & 1 == 1).collect();
            let valid = brute_force(Family::Survival).contains(&bits);
            prop_assert_eq!(Family::Survival.index_of(&bits).is_ok(), valid);
            prop_assert_eq!(Family::Survival.satisfies_hierarchy(&bits), valid);
        }

        #[test]
        fn response_classify_matches_brute_force(mask in 0u32..8) {
            let bits: Vec<bool> = (0..3).map(|j| mask >> j & 1 == 1).collect();
            let valid = brute_force(Family::Response).contains(&bits);
            prop_assert_eq!(Family::Response.index_of(&bits).is_ok(), valid);
        }
    }
}
