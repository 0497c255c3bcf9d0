//! The merged region × indicator table, its CSV form and the bundled fixture.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eurostat::RegionSeries;
use crate::numkit::{standardize, Matrix, NumError};

/// Column order of the merged table; also the CSV header after `region`.
pub const INDICATOR_COLUMNS: [&str; 4] = ["gdp_pps", "unemployment", "tertiary", "density"];

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DatasetError {
    #[error("expected {expected} indicator series, got {found}")]
    WrongSeriesCount { expected: usize, found: usize },
    #[error("indicator {0:?} appears more than once")]
    DuplicateIndicatorName(String),
    #[error("no series for indicator {0:?}")]
    MissingIndicator(String),
    #[error("no region has a value for every indicator")]
    EmptyIntersection,
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("region {0} appears more than once")]
    DuplicateRegion(String),
    #[error("unknown fixture {0:?}")]
    UnknownFixture(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("I/O error: {0}")]
    Io(String),
    #[error(transparent)]
    Numeric(#[from] NumError),
}

/// Complete-case table of regions (rows, ascending code) by indicators (columns).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionalDataset {
    pub region_codes: Vec<String>,
    pub indicator_names: Vec<String>,
    pub raw: Matrix,
    pub standardized: Option<Matrix>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Vote counts printed alongside a fixture, when the data came from one.
    pub expected_votes: Option<Vec<u32>>,
}

impl RegionalDataset {
    /// Builds a dataset from rows in any order; rows are sorted by region code.
    pub fn from_rows(
        indicator_names: Vec<String>,
        mut rows: Vec<(String, Vec<f64>)>,
    ) -> Result<Self, DatasetError> {
        rows.sort_by(|a, b| a.0.cmp(&b.0));
        if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(DatasetError::DuplicateRegion(w[0].0.clone()));
        }
        if rows.is_empty() {
            return Err(DatasetError::Invalid("no rows".into()));
        }
        let (codes, values): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
        let raw = Matrix::from_rows(&values)?;
        if raw.cols() != indicator_names.len() {
            return Err(DatasetError::Invalid(format!(
                "{} indicator names for {} columns",
                indicator_names.len(),
                raw.cols()
            )));
        }
        Ok(Self {
            region_codes: codes,
            indicator_names,
            raw,
            standardized: None,
            means: Vec::new(),
            stds: Vec::new(),
            expected_votes: None,
        })
    }

    pub fn len(&self) -> usize {
        self.region_codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.region_codes.is_empty()
    }

    pub fn row_of(&self, code: &str) -> Option<usize> {
        self.region_codes
            .binary_search_by(|c| c.as_str().cmp(code))
            .ok()
    }

    pub fn column_of(&self, name: &str) -> Option<usize> {
        self.indicator_names.iter().position(|n| n == name)
    }

    /// Copy of the dataset with column `col` passed through `f` and standardization cleared.
    pub fn map_column(&self, col: usize, f: impl Fn(f64) -> f64) -> Result<Self, DatasetError> {
        Ok(Self {
            raw: self.raw.map_column(col, f)?,
            standardized: None,
            means: Vec::new(),
            stds: Vec::new(),
            ..self.clone()
        })
    }
}

/// Inner join on region code, columns in [`INDICATOR_COLUMNS`] order.
pub fn merge_indicators(series: &[RegionSeries]) -> Result<RegionalDataset, DatasetError> {
    merge_indicators_ordered(series, &INDICATOR_COLUMNS)
}

/// Inner join on region code; output column `i` is the series named `order[i]`.
pub fn merge_indicators_ordered(
    series: &[RegionSeries],
    order: &[&str],
) -> Result<RegionalDataset, DatasetError> {
    if series.len() != order.len() {
        return Err(DatasetError::WrongSeriesCount {
            expected: order.len(),
            found: series.len(),
        });
    }
    let mut by_name: BTreeMap<&str, &RegionSeries> = BTreeMap::new();
    for s in series {
        if by_name.insert(s.indicator_name.as_str(), s).is_some() {
            return Err(DatasetError::DuplicateIndicatorName(
                s.indicator_name.clone(),
            ));
        }
    }
    let columns: Vec<&RegionSeries> = order
        .iter()
        .map(|name| {
            by_name
                .get(name)
                .copied()
                .ok_or_else(|| DatasetError::MissingIndicator((*name).to_owned()))
        })
        .collect::<Result<_, _>>()?;

    let mut common: BTreeSet<&String> = columns[0].entries.keys().collect();
    for s in &columns[1..] {
        common.retain(|code| s.entries.contains_key(*code));
    }
    if common.is_empty() {
        return Err(DatasetError::EmptyIntersection);
    }
    let rows = common
        .into_iter()
        .map(|code| {
            let values = columns.iter().map(|s| s.entries[code]).collect();
            (code.clone(), values)
        })
        .collect();
    RegionalDataset::from_rows(order.iter().map(|s| (*s).to_owned()).collect(), rows)
}

pub fn standardize_dataset(d: &RegionalDataset) -> Result<RegionalDataset, DatasetError> {
    let s = standardize(&d.raw)?;
    Ok(RegionalDataset {
        standardized: Some(s.z),
        means: s.means,
        stds: s.stds,
        ..d.clone()
    })
}

pub const FIXTURE_NAMES: [&str; 1] = ["appendix_a1"];

/// Indicator values of the eleven structural-anomaly regions, as published,
/// with the number of flagging methods in the last column.
///
/// HU11 carries a capital-region profile (GDP 163, density 3277.9) under the
/// label "Northern Hungary"; the numbers are kept exactly as printed.
pub const APPENDIX_A1_CSV: &str = "\
region,gdp_pps,unemployment,tertiary,density,flags
AT13,140.0,20.7,45.6,4941.5,4
BE10,194.0,23.8,53.5,7660.0,5
CZ01,199.0,2.1,51.5,2714.2,4
DE30,123.0,15.1,48.2,4320.5,4
DE60,202.0,9.2,38.1,2596.2,3
ES63,65.0,38.0,21.1,4152.7,4
ES64,60.0,37.5,34.0,6086.6,5
HU11,163.0,10.3,55.8,3277.9,3
SK03,61.0,41.6,26.6,80.8,3
SK04,53.0,63.2,28.2,101.4,5
TR10,111.0,9.4,28.2,3059.2,3
";

pub fn load_fixture(name: &str) -> Result<RegionalDataset, DatasetError> {
    match name {
        "appendix_a1" => {
            let mut votes = BTreeMap::new();
            let mut dataset = parse_csv(APPENDIX_A1_CSV.as_bytes(), Some(&mut votes))?;
            dataset.expected_votes = Some(dataset.region_codes.iter().map(|c| votes[c]).collect());
            Ok(dataset)
        }
        other => Err(DatasetError::UnknownFixture(other.to_owned())),
    }
}

pub fn read_csv(path: &Path) -> Result<RegionalDataset, DatasetError> {
    let file = std::fs::File::open(path)
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    parse_csv(file, None)
}

pub fn write_csv(d: &RegionalDataset, path: &Path) -> Result<(), DatasetError> {
    let mut file = std::fs::File::create(path)
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))?;
    file.write_all(to_csv_string(d).as_bytes())
        .map_err(|e| DatasetError::Io(format!("{}: {e}", path.display())))
}

/// CSV text of the raw matrix. Values use the shortest representation that
/// parses back to the same `f64`.
pub fn to_csv_string(d: &RegionalDataset) -> String {
    let mut out = String::from("region");
    for name in &d.indicator_names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (code, row) in d.region_codes.iter().zip(d.raw.row_iter()) {
        out.push_str(code);
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses merged-table CSV text (`region` plus the indicator columns).
pub fn parse_csv_str(text: &str) -> Result<RegionalDataset, DatasetError> {
    parse_csv(text.as_bytes(), None)
}

/// Parses the merged-table CSV. When `votes` is given, a trailing `flags`
/// column is accepted and collected into it.
fn parse_csv<R: Read>(
    input: R,
    mut votes: Option<&mut BTreeMap<String, u32>>,
) -> Result<RegionalDataset, DatasetError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input);
    let mut records = reader.records();
    let header = records
        .next()
        .ok_or_else(|| DatasetError::MalformedRow {
            line: 1,
            reason: "missing header".into(),
        })?
        .map_err(csv_error)?;
    let mut expected: Vec<&str> = vec!["region"];
    expected.extend(INDICATOR_COLUMNS);
    if votes.is_some() {
        expected.push("flags");
    }
    if header.iter().collect::<Vec<_>>() != expected {
        return Err(DatasetError::MalformedRow {
            line: 1,
            reason: format!("header must be {}", expected.join(",")),
        });
    }

    let mut rows = Vec::new();
    let mut seen = BTreeSet::new();
    for record in records {
        let record = record.map_err(csv_error)?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].trim().is_empty() {
            continue;
        }
        if record.len() != expected.len() {
            return Err(DatasetError::MalformedRow {
                line,
                reason: format!("expected {} fields, found {}", expected.len(), record.len()),
            });
        }
        let code = record[0].trim().to_owned();
        if code.is_empty() {
            return Err(DatasetError::MalformedRow {
                line,
                reason: "empty region code".into(),
            });
        }
        if !seen.insert(code.clone()) {
            return Err(DatasetError::DuplicateRegion(code));
        }
        let values = (1..=INDICATOR_COLUMNS.len())
            .map(|i| {
                record[i]
                    .trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| DatasetError::MalformedRow {
                        line,
                        reason: format!("{:?} is not a finite number", &record[i]),
                    })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if let Some(votes) = votes.as_deref_mut() {
            let v = record[expected.len() - 1].trim().parse().map_err(|_| {
                DatasetError::MalformedRow {
                    line,
                    reason: "flags must be a count".into(),
                }
            })?;
            votes.insert(code.clone(), v);
        }
        rows.push((code, values));
    }
    RegionalDataset::from_rows(
        INDICATOR_COLUMNS.iter().map(|s| (*s).to_owned()).collect(),
        rows,
    )
}

fn csv_error(e: csv::Error) -> DatasetError {
    let line = e.position().map_or(0, |p| p.line());
    DatasetError::MalformedRow {
        line,
        reason: e.to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(name: &str, codes: &[&str]) -> RegionSeries {
        RegionSeries {
            indicator_name: name.into(),
            entries: codes
                .iter()
                .enumerate()
                .map(|(i, c)| ((*c).to_owned(), i as f64 + 1.0))
                .collect(),
        }
    }

    #[test]
    fn inner_join_drops_incomplete_regions() {
        let all = ["AA11", "BB22", "CC33"];
        let s = vec![
            series("gdp_pps", &all),
            series("unemployment", &all),
            series("tertiary", &["AA11", "BB22"]),
            series("density", &all),
        ];
        let d = merge_indicators(&s).unwrap();
        assert_eq!(d.region_codes, vec!["AA11", "BB22"]);
        assert_eq!(d.indicator_names, INDICATOR_COLUMNS);
    }

    #[test]
    fn disjoint_sets() {
        let s = vec![
            series("gdp_pps", &["AA11"]),
            series("unemployment", &["BB22"]),
            series("tertiary", &["AA11"]),
            series("density", &["AA11"]),
        ];
        assert_eq!(merge_indicators(&s), Err(DatasetError::EmptyIntersection));
    }

    #[test]
    fn duplicate_indicator() {
        let s = vec![
            series("gdp_pps", &["AA11"]),
            series("gdp_pps", &["AA11"]),
            series("tertiary", &["AA11"]),
            series("density", &["AA11"]),
        ];
        assert_eq!(
            merge_indicators(&s),
            Err(DatasetError::DuplicateIndicatorName("gdp_pps".into()))
        );
    }

    #[test]
    fn fixture_rows() {
        let d = load_fixture("appendix_a1").unwrap();
        assert_eq!(d.len(), 11);
        let be10 = d.row_of("BE10").unwrap();
        assert_eq!(d.raw.row(be10), &[194.0, 23.8, 53.5, 7660.0]);
        let sk04 = d.row_of("SK04").unwrap();
        assert_eq!(d.raw.row(sk04), &[53.0, 63.2, 28.2, 101.4]);
        let votes = d.expected_votes.as_ref().unwrap();
        assert_eq!(votes[sk04], 5);
        assert_eq!(votes[d.row_of("TR10").unwrap()], 3);
    }

    #[test]
    fn unknown_fixture() {
        assert_eq!(
            load_fixture("nope"),
            Err(DatasetError::UnknownFixture("nope".into()))
        );
    }

    #[test]
    fn fixture_density_maximum_is_brussels() {
        let d = standardize_dataset(&load_fixture("appendix_a1").unwrap()).unwrap();
        let z = d.standardized.unwrap();
        let col = z.column(3);
        let max_row = (0..col.len())
            .max_by(|&a, &b| col[a].total_cmp(&col[b]))
            .unwrap();
        assert_eq!(d.region_codes[max_row], "BE10");
    }

    #[test]
    fn single_region_cannot_be_standardized() {
        let d = RegionalDataset::from_rows(
            INDICATOR_COLUMNS.iter().map(|s| s.to_string()).collect(),
            vec![("AA11".into(), vec![1.0, 2.0, 3.0, 4.0])],
        )
        .unwrap();
        assert!(matches!(
            standardize_dataset(&d),
            Err(DatasetError::Numeric(NumError::TooFewRows { .. }))
        ));
    }

    #[test]
    fn short_row_is_malformed() {
        let text = "region,gdp_pps,unemployment,tertiary,density\nAT13,1,2,3\n";
        assert!(matches!(
            parse_csv(text.as_bytes(), None),
            Err(DatasetError::MalformedRow { line: 2, .. })
        ));
    }

    #[test]
    fn duplicate_region_rows() {
        let text = "region,gdp_pps,unemployment,tertiary,density\nBE10,1,2,3,4\nBE10,1,2,3,4\n";
        assert_eq!(
            parse_csv(text.as_bytes(), None),
            Err(DatasetError::DuplicateRegion("BE10".into()))
        );
    }

    #[test]
    fn csv_round_trip() {
        let d = load_fixture("appendix_a1").unwrap();
        let back = parse_csv(to_csv_string(&d).as_bytes(), None).unwrap();
        assert_eq!(back.raw, d.raw);
        assert_eq!(back.region_codes, d.region_codes);
    }
}
