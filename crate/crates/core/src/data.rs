//! Subject records, the dataset container and CSV ingestion.
//!
//! Input files are UTF-8 CSV with the header columns
//! `arm,covariate,response,time,event` (any order). On write the columns
//! are emitted in that canonical order with floats at 17 significant digits.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::fmt::g17;

pub const COLUMNS: [&str; 5] = ["arm", "covariate", "response", "time", "event"];

/// One patient: treatment arm, baseline covariate, binary tumor response,
/// follow-up time and event indicator (1 = death observed, 0 = censored).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectRecord {
    pub arm: u8,
    pub covariate: f64,
    pub response: u8,
    pub time: f64,
    pub event: u8,
}

impl SubjectRecord {
    pub fn new(arm: u8, covariate: f64, response: u8, time: f64, event: u8) -> Result<Self> {
        let rec = SubjectRecord {
            arm,
            covariate,
            response,
            time,
            event,
        };
        rec.check().map_err(|(field, message)| {
            Error::InvalidInput(format!("field `{field}`: {message}"))
        })?;
        Ok(rec)
    }

    fn check(&self) -> std::result::Result<(), (&'static str, String)> {
        if self.arm > 1 {
            return Err(("arm", format!("must be 0 or 1, got {}", self.arm)));
        }
        if self.response > 1 {
            return Err(("response", format!("must be 0 or 1, got {}", self.response)));
        }
        if self.event > 1 {
            return Err(("event", format!("must be 0 or 1, got {}", self.event)));
        }
        if !self.covariate.is_finite() {
            return Err(("covariate", format!("must be finite, got {}", self.covariate)));
        }
        if !(self.time.is_finite() && self.time >= 0.0) {
            return Err(("time", format!("must be finite and >= 0, got {}", self.time)));
        }
        Ok(())
    }

    #[inline]
    pub fn treated(&self) -> bool {
        self.arm == 1
    }
}

/// An immutable, validated collection of subject records.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    records: Vec<SubjectRecord>,
}

impl Dataset {
    pub fn new(records: Vec<SubjectRecord>) -> Result<Self> {
        if records.is_empty() {
            return Err(Error::Empty);
        }
        if records.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "dataset needs at least 2 subjects, got {}",
                records.len()
            )));
        }
        for (i, r) in records.iter().enumerate() {
            r.check().map_err(|(field, message)| Error::InvalidField {
                line: i as u64 + 2,
                field,
                message,
            })?;
        }
        Ok(Dataset { records })
    }

    pub fn records(&self) -> &[SubjectRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, SubjectRecord> {
        self.records.iter()
    }

    pub fn arm_count(&self, arm: u8) -> usize {
        self.records.iter().filter(|r| r.arm == arm).count()
    }

    /// Fitting operations need both arms represented.
    pub fn require_both_arms(&self) -> Result<()> {
        for arm in 0..=1u8 {
            if self.arm_count(arm) == 0 {
                return Err(Error::InvalidInput(format!("no subjects in arm {arm}")));
            }
        }
        Ok(())
    }

    /// Concatenates two datasets, `self` first.
    pub fn concat(&self, other: &Dataset) -> Dataset {
        let mut records = self.records.clone();
        records.extend_from_slice(&other.records);
        Dataset { records }
    }
}

impl<'a> IntoIterator for &'a Dataset {
    type Item = &'a SubjectRecord;
    type IntoIter = std::slice::Iter<'a, SubjectRecord>;
    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}

/// How an empty covariate field is handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovariatePolicy {
    #[default]
    Reject,
    /// Replace with the mean covariate of subjects sharing the same
    /// (arm, response) cell.
    GroupMeanImpute,
}

pub fn load_dataset(path: impl AsRef<Path>, policy: CovariatePolicy) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_dataset(file, policy)
}

pub fn read_dataset<R: Read>(reader: R, policy: CovariatePolicy) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Empty);
    }
    let col = column_map(&headers, &COLUMNS, &[])?;

    // (record with placeholder covariate, line, covariate missing)
    let mut rows: Vec<(SubjectRecord, u64, bool)> = Vec::new();
    for result in rdr.records() {
        let row = result.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            Error::Parse {
                line,
                message: e.to_string(),
            }
        })?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let field = |name: &'static str| row.get(col[name]).unwrap_or("");
        let arm = parse_binary(field("arm"), line, "arm")?;
        let response = parse_binary(field("response"), line, "response")?;
        let event = parse_binary(field("event"), line, "event")?;
        let time = parse_real(field("time"), line, "time")?;
        let cov_text = field("covariate");
        let missing = cov_text.is_empty();
        let covariate = if missing {
            if policy == CovariatePolicy::Reject {
                return Err(Error::InvalidField {
                    line,
                    field: "covariate",
                    message: "missing value".into(),
                });
            }
            0.0
        } else {
            parse_real(cov_text, line, "covariate")?
        };
        let rec = SubjectRecord {
            arm,
            covariate,
            response,
            time,
            event,
        };
        rec.check()
            .map_err(|(field, message)| Error::InvalidField {
                line,
                field,
                message,
            })?;
        rows.push((rec, line, missing));
    }
    if rows.is_empty() {
        return Err(Error::Empty);
    }

    if rows.iter().any(|(_, _, m)| *m) {
        let mut cells: HashMap<(u8, u8), (f64, usize)> = HashMap::new();
        for (r, _, missing) in &rows {
            if !missing {
                let e = cells.entry((r.arm, r.response)).or_insert((0.0, 0));
                e.0 += r.covariate;
                e.1 += 1;
            }
        }
        for (r, _, missing) in rows.iter_mut() {
            if *missing {
                let (sum, count) = cells.get(&(r.arm, r.response)).copied().unwrap_or((0.0, 0));
                if count == 0 {
                    return Err(Error::NoImputationDonors {
                        arm: r.arm,
                        response: r.response,
                    });
                }
                r.covariate = sum / count as f64;
            }
        }
    }

    let records: Vec<SubjectRecord> = rows.into_iter().map(|(r, _, _)| r).collect();
    if records.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "dataset needs at least 2 subjects, got {}",
            records.len()
        )));
    }
    Ok(Dataset { records })
}

pub fn write_dataset<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(COLUMNS)?;
    for r in dataset {
        wtr.write_record([
            r.arm.to_string(),
            g17(r.covariate),
            r.response.to_string(),
            g17(r.time),
            r.event.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_dataset(dataset, std::io::BufWriter::new(file))
}

/// Maps required (and optional) column names to their header positions.
pub(crate) fn column_map(
    headers: &csv::StringRecord,
    required: &[&'static str],
    optional: &[&'static str],
) -> Result<HashMap<&'static str, usize>> {
    let mut map = HashMap::new();
    for (i, h) in headers.iter().enumerate() {
        let h = h.trim().trim_start_matches('\u{feff}');
        if let Some(name) = required.iter().chain(optional).find(|c| **c == h) {
            if map.insert(*name, i).is_some() {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("duplicate column `{h}`"),
                });
            }
        } else {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected column `{h}`"),
            });
        }
    }
    for name in required {
        if !map.contains_key(name) {
            return Err(Error::Parse {
                line: 1,
                message: format!("missing column `{name}`"),
            });
        }
    }
    Ok(map)
}

pub(crate) fn parse_binary(text: &str, line: u64, field: &'static str) -> Result<u8> {
    match text {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(Error::InvalidField {
            line,
            field,
            message: format!("expected 0 or 1, got `{other}`"),
        }),
    }
}

pub(crate) fn parse_real(text: &str, line: u64, field: &'static str) -> Result<f64> {
    let v: f64 = text.parse().map_err(|_| Error::InvalidField {
        line,
        field,
        message: format!("not a number: `{text}`"),
    })?;
    if !v.is_finite() {
        return Err(Error::InvalidField {
            line,
            field,
            message: format!("must be finite, got `{text}`"),
        });
    }
    Ok(v)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArmSummary {
    pub n: usize,
    pub responders: usize,
    pub response_rate: f64,
    pub events: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSummary {
    pub n: usize,
    pub arms: [ArmSummary; 2],
    pub events: usize,
    pub censoring_proportion: f64,
    pub median_time: f64,
}

pub fn summarize(dataset: &Dataset) -> DatasetSummary {
    let arm = |a: u8| {
        let rows: Vec<_> = dataset.iter().filter(|r| r.arm == a).collect();
        let n = rows.len();
        let responders = rows.iter().filter(|r| r.response == 1).count();
        ArmSummary {
            n,
            responders,
            response_rate: if n > 0 { responders as f64 / n as f64 } else { f64::NAN },
            events: rows.iter().filter(|r| r.event == 1).count(),
        }
    };
    let events = dataset.iter().filter(|r| r.event == 1).count();
    let n = dataset.len();
    let mut times: Vec<f64> = dataset.iter().map(|r| r.time).collect();
    times.sort_by(f64::total_cmp);
    let median_time = if n % 2 == 1 {
        times[n / 2]
    } else {
        0.5 * (times[n / 2 - 1] + times[n / 2])
    };
    DatasetSummary {
        n,
        arms: [arm(0), arm(1)],
        events,
        censoring_proportion: (n - events) as f64 / n as f64,
        median_time,
    }
}

impl std::fmt::Display for DatasetSummary {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "subjects: {}", self.n)?;
        for (a, s) in self.arms.iter().enumerate() {
            writeln!(
                f,
                "arm {a}: n={} responders={} ({:.1}%) events={}",
                s.n,
                s.responders,
                100.0 * s.response_rate,
                s.events
            )?;
        }
        writeln!(f, "censored: {:.2}%", 100.0 * self.censoring_proportion)?;
        write!(f, "median observed time: {}", g17(self.median_time))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn read(text: &str, policy: CovariatePolicy) -> Result<Dataset> {
        read_dataset(text.as_bytes(), policy)
    }

    #[test]
    fn parses_valid_file() {
        let ds = read(
            "arm,covariate,response,time,event\n0,1.5,0,2.0,1\n1,-0.5,1,3.5,0\n0,2,1,0.7,1\n1,0,0,1.1,1\n",
            CovariatePolicy::Reject,
        )
        .unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.records()[1].covariate, -0.5);
        assert_eq!(ds.records()[1].event, 0);
    }

    #[test]
    fn negative_time_names_row_and_field() {
        let err = read(
            "arm,covariate,response,time,event\n0,1,0,1,1\n1,1,0,-1,1\n",
            CovariatePolicy::Reject,
        )
        .unwrap_err();
        match err {
            Error::InvalidField { line, field, .. } => {
                assert_eq!(line, 3);
                assert_eq!(field, "time");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn imputes_cell_mean() {
        let ds = read(
            "arm,covariate,response,time,event\n1,2.0,1,1,1\n1,4.0,1,1,1\n1,,1,1,0\n0,9.0,1,1,1\n1,7.0,0,1,1\n",
            CovariatePolicy::GroupMeanImpute,
        )
        .unwrap();
        assert_eq!(ds.records()[2].covariate, 3.0);
        // observed values untouched
        assert_eq!(ds.records()[3].covariate, 9.0);
        assert_eq!(ds.records()[4].covariate, 7.0);
    }

    #[test]
    fn missing_covariate_rejected_by_default() {
        let err = read(
            "arm,covariate,response,time,event\n1,,1,1,1\n0,1,0,1,1\n",
            CovariatePolicy::Reject,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidField { field: "covariate", line: 2, .. }));
    }

    #[test]
    fn impute_without_donors_fails() {
        let err = read(
            "arm,covariate,response,time,event\n1,,1,1,1\n0,1,0,1,1\n",
            CovariatePolicy::GroupMeanImpute,
        )
        .unwrap_err();
        assert!(matches!(err, Error::NoImputationDonors { arm: 1, response: 1 }));
    }

    #[test]
    fn literal_nan_rejected() {
        let err = read(
            "arm,covariate,response,time,event\n1,NaN,1,1,1\n0,1,0,1,1\n",
            CovariatePolicy::GroupMeanImpute,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidField { field: "covariate", .. }));
    }

    #[test]
    fn empty_file() {
        assert!(matches!(read("", CovariatePolicy::Reject), Err(Error::Empty)));
        assert!(matches!(
            read("arm,covariate,response,time,event\n", CovariatePolicy::Reject),
            Err(Error::Empty)
        ));
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = read(
            "arm,covariate,response,time,event\n0,1,0,1,1\n0,1,0,1\n",
            CovariatePolicy::Reject,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
        let err = read(
            "arm,covariate,response,time,event\n0,1,0,1,1\n2,1,0,1,1\n",
            CovariatePolicy::Reject,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InvalidField { line: 3, field: "arm", .. }));
    }

    #[test]
    fn censoring_proportion_counts() {
        let recs: Vec<_> = (0..10)
            .map(|i| SubjectRecord::new((i % 2) as u8, 0.0, 0, 1.0 + i as f64, u8::from(i >= 3)).unwrap())
            .collect();
        let s = summarize(&Dataset::new(recs).unwrap());
        assert!((s.censoring_proportion - 0.30).abs() < 1e-15);
        assert_eq!(s.events, 7);
        assert_eq!(s.median_time, 5.5);
    }

    #[test]
    fn all_events_means_no_censoring() {
        let recs: Vec<_> = (0..4)
            .map(|i| SubjectRecord::new((i % 2) as u8, 0.0, 0, 1.0, 1).unwrap())
            .collect();
        assert_eq!(summarize(&Dataset::new(recs).unwrap()).censoring_proportion, 0.0);
    }

    #[test]
    fn write_then_load_is_byte_identical() {
        let text = "arm,covariate,response,time,event\n0,0.10000000000000001,0,2,1\n1,-3.25,1,0.33333333333333331,0\n";
        let ds = read(text, CovariatePolicy::Reject).unwrap();
        let mut out = Vec::new();
        write_dataset(&ds, &mut out).unwrap();
        assert_eq!(String::from_utf8(out.clone()).unwrap(), text);
        let again = read_dataset(out.as_slice(), CovariatePolicy::Reject).unwrap();
        assert_eq!(again, ds);
    }
}
