//! Majority voting across detectors and the run report.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegionalDataset;
use crate::detectors::{DetectorOutcome, Method};
use crate::numkit::Pca;

pub const DEFAULT_VOTE_THRESHOLD: u32 = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnsembleError {
    #[error("region mismatch: {0}")]
    RegionMismatch(String),
    #[error("expected one outcome per method, got {0}")]
    MethodMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagTable {
    pub region_codes: Vec<String>,
    /// Always [`Method::ALL`].
    pub methods: Vec<Method>,
    /// `flags[m][r]`: method `m` flagged region `r`.
    pub flags: Vec<Vec<bool>>,
    pub votes: Vec<u32>,
    pub structural: Vec<bool>,
    pub threshold: u32,
}

impl FlagTable {
    pub fn structural_codes(&self) -> Vec<&str> {
        self.region_codes
            .iter()
            .zip(&self.structural)
            .filter(|(_, &s)| s)
            .map(|(c, _)| c.as_str())
            .collect()
    }

    pub fn flag_count(&self, method: Method) -> usize {
        self.methods
            .iter()
            .position(|&m| m == method)
            .map_or(0, |i| self.flags[i].iter().filter(|&&f| f).count())
    }

    /// Structural regions sorted by votes (descending) then code.
    pub fn ranked_structural(&self) -> Vec<(&str, u32)> {
        let mut rows: Vec<(&str, u32)> = self
            .region_codes
            .iter()
            .enumerate()
            .filter(|&(r, _)| self.structural[r])
            .map(|(r, c)| (c.as_str(), self.votes[r]))
            .collect();
        rows.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        rows
    }
}

/// Counts flags per region; structural when votes reach `threshold`.
/// Outcomes may come in any order but must cover each method exactly once.
pub fn vote(
    region_codes: &[String],
    outcomes: &[DetectorOutcome],
    threshold: u32,
) -> Result<FlagTable, EnsembleError> {
    let ordered = order_outcomes(outcomes)?;
    let n = region_codes.len();
    if let Some(o) = ordered.iter().find(|o| o.flags.len() != n) {
        return Err(EnsembleError::RegionMismatch(format!(
            "{} has {} flags for {n} regions",
            o.method.key(),
            o.flags.len()
        )));
    }
    let votes: Vec<u32> = (0..n)
        .map(|r| ordered.iter().filter(|o| o.flags[r]).count() as u32)
        .collect();
    Ok(FlagTable {
        region_codes: region_codes.to_vec(),
        methods: Method::ALL.to_vec(),
        flags: ordered.iter().map(|o| o.flags.clone()).collect(),
        structural: votes.iter().map(|&v| v >= threshold).collect(),
        votes,
        threshold,
    })
}

fn order_outcomes(outcomes: &[DetectorOutcome]) -> Result<Vec<&DetectorOutcome>, EnsembleError> {
    Method::ALL
        .iter()
        .map(|&m| {
            let mut matching = outcomes.iter().filter(|o| o.method == m);
            match (matching.next(), matching.next()) {
                (Some(o), None) => Ok(o),
                (None, _) => Err(EnsembleError::MethodMismatch(format!(
                    "no outcome for {}",
                    m.key()
                ))),
                (Some(_), Some(_)) => Err(EnsembleError::MethodMismatch(format!(
                    "duplicate outcome for {}",
                    m.key()
                ))),
            }
        })
        .collect::<Result<Vec<_>, _>>()
        .and_then(|v| {
            if outcomes.len() == Method::ALL.len() {
                Ok(v)
            } else {
                Err(EnsembleError::MethodMismatch(format!(
                    "{} outcomes",
                    outcomes.len()
                )))
            }
        })
}

/// Share of `reference`'s flagged regions that `candidate` also flags; 0 when the reference flags none.
pub fn overlap_with(candidate: &[bool], reference: &[bool]) -> Result<f64, EnsembleError> {
    if candidate.len() != reference.len() {
        return Err(EnsembleError::RegionMismatch(format!(
            "{} vs {} regions",
            candidate.len(),
            reference.len()
        )));
    }
    let denom = reference.iter().filter(|&&f| f).count();
    if denom == 0 {
        return Ok(0.0);
    }
    let both = candidate
        .iter()
        .zip(reference)
        .filter(|(&a, &b)| a && b)
        .count();
    Ok(both as f64 / denom as f64)
}

/// Jaccard distance between two flag sets; 0 when both are empty.
pub fn jaccard_distance(a: &[bool], b: &[bool]) -> f64 {
    let union = a.iter().zip(b).filter(|(&x, &y)| x || y).count();
    if union == 0 {
        return 0.0;
    }
    let inter = a.iter().zip(b).filter(|(&x, &y)| x && y).count();
    1.0 - inter as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub regions: usize,
    pub indicators: usize,
    pub indicator_names: Vec<String>,
    pub year: Option<u16>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
    /// Standardized row per region, in `region_codes` order.
    pub standardized: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub name: String,
    pub flagged: usize,
    /// Overlap with the Mahalanobis flag set, as in `overlap_with(method, mahalanobis)`.
    pub overlap_with_mahalanobis: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaSection {
    /// First two component scores per region.
    pub scores: Vec<[f64; 2]>,
    pub explained_variance: Vec<f64>,
    /// Loadings, one row per indicator.
    pub loadings: Vec<Vec<f64>>,
}

impl PcaSection {
    pub fn from_pca(pca: &Pca) -> Self {
        let c = pca.scores.cols();
        Self {
            scores: pca
                .scores
                .row_iter()
                .map(|r| [r[0], if c > 1 { r[1] } else { 0.0 }])
                .collect(),
            explained_variance: pca.explained_variance.clone(),
            loadings: pca.components.row_iter().map(<[f64]>::to_vec).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Fixture { name: String },
    Eurostat { urls: Vec<String> },
    Csv { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: DataSource,
    pub seed: u64,
    /// RFC 3339; excluded from determinism comparisons.
    pub created_at: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub dataset: DatasetSummary,
    pub methods: Vec<MethodSummary>,
    pub outcomes: Vec<DetectorOutcome>,
    pub flag_table: FlagTable,
    /// Absent when the diagnostics could not be computed.
    pub pca: Option<PcaSection>,
    pub provenance: Provenance,
    /// Expected vote counts shipped with a fixture, when applicable.
    pub expected_votes: Option<Vec<u32>>,
}

pub fn build_report(
    dataset: &RegionalDataset,
    year: Option<u16>,
    outcomes: Vec<DetectorOutcome>,
    flag_table: FlagTable,
    pca: Option<&Pca>,
    provenance: Provenance,
) -> Result<RunReport, EnsembleError> {
    if flag_table.region_codes != dataset.region_codes {
        return Err(EnsembleError::RegionMismatch(
            "flag table and dataset list different regions".into(),
        ));
    }
    let ordered: Vec<DetectorOutcome> = order_outcomes(&outcomes)?.into_iter().cloned().collect();
    let mahalanobis = &ordered[1].flags;
    let methods = ordered
        .iter()
        .map(|o| {
            Ok(MethodSummary {
                method: o.method,
                name: o.method.display_name().to_owned(),
                flagged: o.flag_count(),
                overlap_with_mahalanobis: if o.method == Method::Mahalanobis {
                    None
                } else {
                    Some(overlap_with(&o.flags, mahalanobis)?)
                },
            })
        })
        .collect::<Result<Vec<_>, EnsembleError>>()?;
    let standardized = dataset
        .standardized
        .as_ref()
        .map(|z| z.row_iter().map(<[f64]>::to_vec).collect())
        .unwrap_or_default();
    Ok(RunReport {
        dataset: DatasetSummary {
            regions: dataset.len(),
            indicators: dataset.indicator_names.len(),
            indicator_names: dataset.indicator_names.clone(),
            year,
            means: dataset.means.clone(),
            stds: dataset.stds.clone(),
            standardized,
        },
        methods,
        outcomes: ordered,
        flag_table,
        pca: pca.map(PcaSection::from_pca),
        provenance,
        expected_votes: dataset.expected_votes.clone(),
    })
}

impl RunReport {
    /// Pretty JSON with lexicographically sorted object keys.
    pub fn to_json(&self) -> String {
        let value = serde_json::to_value(self).expect("report is serializable");
        let mut s = serde_json::to_string_pretty(&value).expect("value is serializable");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    /// `region,zscore,mahalanobis,iforest,lof,ocsvm,votes,structural` with 0/1 flags.
    pub fn flags_csv(&self) -> String {
        let t = &self.flag_table;
        let mut out = String::from("region");
        for m in &t.methods {
            out.push(',');
            out.push_str(m.key());
        }
        out.push_str(",votes,structural\n");
        for (r, code) in t.region_codes.iter().enumerate() {
            out.push_str(code);
            for col in &t.flags {
                out.push_str(if col[r] { ",1" } else { ",0" });
            }
            out.push_str(&format!(",{},{}\n", t.votes[r], u8::from(t.structural[r])));
        }
        out
    }

    /// `region,zscore,mahalanobis,iforest,lof,ocsvm` continuous scores.
    pub fn scores_csv(&self) -> String {
        let mut out = String::from("region");
        for o in &self.outcomes {
            out.push(',');
            out.push_str(o.method.key());
        }
        out.push('\n');
        for (r, code) in self.flag_table.region_codes.iter().enumerate() {
            out.push_str(code);
            for o in &self.outcomes {
                out.push(',');
                out.push_str(&o.scores[r].to_string());
            }
            out.push('\n');
        }
        out
    }

    /// Text table of per-method counts followed by the structural regions.
    pub fn summary_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<24} {:>8} {:>12}\n",
            "Method", "Flagged", "Overlap(Mah)"
        ));
        for m in &self.methods {
            let overlap = m
                .overlap_with_mahalanobis
                .map_or("--".to_owned(), |v| format!("{:.0}%", v * 100.0));
            out.push_str(&format!(
                "{:<24} {:>8} {:>12}\n",
                m.name, m.flagged, overlap
            ));
        }
        out.push('\n');
        let ranked = self.flag_table.ranked_structural();
        if ranked.is_empty() {
            out.push_str(&format!(
                "No regions flagged by at least {} of {} methods.\n",
                self.flag_table.threshold,
                self.flag_table.methods.len()
            ));
        } else {
            out.push_str(&format!("{:<8} {:>6}\n", "Region", "Votes"));
            for (code, votes) in ranked {
                out.push_str(&format!("{code:<8} {votes:>6}\n"));
            }
        }
        if let Some(reference) = self.reference_ranking() {
            out.push_str("\nReference votes shipped with the input\n");
            out.push_str(&format!("{:<8} {:>6}\n", "Region", "Votes"));
            for (code, votes) in reference {
                out.push_str(&format!("{code:<8} {votes:>6}\n"));
            }
        }
        out
    }

    /// Fixture vote counts, highest first then by code.
    pub fn reference_ranking(&self) -> Option<Vec<(&str, u32)>> {
        let expected = self.expected_votes.as_ref()?;
        let mut ranked: Vec<(&str, u32)> = self
            .flag_table
            .region_codes
            .iter()
            .map(String::as_str)
            .zip(expected.iter().copied())
            .collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        Some(ranked)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detectors::MethodParams;

    fn outcome(method: Method, flags: &[bool]) -> DetectorOutcome {
        DetectorOutcome {
            method,
            scores: flags.iter().map(|&f| f64::from(u8::from(f))).collect(),
            flags: flags.to_vec(),
            threshold: 0.5,
            params: MethodParams::Zscore { c: 3.0 },
        }
    }

    fn outcomes(rows: &[[bool; 5]]) -> Vec<DetectorOutcome> {
        Method::ALL
            .iter()
            .enumerate()
            .map(|(m, &method)| {
                let col: Vec<bool> = rows.iter().map(|r| r[m]).collect();
                outcome(method, &col)
            })
            .collect()
    }

    fn codes(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("R{i:03}")).collect()
    }

    #[test]
    fn three_of_five_boundary() {
        let t = vote(
            &codes(2),
            &outcomes(&[
                [true, true, true, false, false],
                [true, true, false, false, false],
            ]),
            3,
        )
        .unwrap();
        assert_eq!(t.votes, vec![3, 2]);
        assert_eq!(t.structural, vec![true, false]);
    }

    #[test]
    fn order_of_outcomes_is_irrelevant() {
        let mut o = outcomes(&[
            [true, false, true, false, true],
            [false, true, true, true, false],
        ]);
        let a = vote(&codes(2), &o, 3).unwrap();
        o.reverse();
        let b = vote(&codes(2), &o, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn region_count_mismatch() {
        let o = outcomes(&[[true; 5]]);
        assert!(matches!(
            vote(&codes(2), &o, 3),
            Err(EnsembleError::RegionMismatch(_))
        ));
    }

    #[test]
    fn missing_method() {
        let mut o = outcomes(&[[true; 5]]);
        o.pop();
        assert!(matches!(
            vote(&codes(1), &o, 3),
            Err(EnsembleError::MethodMismatch(_))
        ));
    }

    #[test]
    fn overlap_cases() {
        let a = [true, false, true];
        assert_eq!(overlap_with(&a, &a).unwrap(), 1.0);
        assert_eq!(overlap_with(&[false, true, false], &a).unwrap(), 0.0);
        assert_eq!(overlap_with(&a, &[false; 3]).unwrap(), 0.0);
        assert_eq!(
            overlap_with(&[true, true, true], &[true, false, false]).unwrap(),
            1.0
        );
        assert!(overlap_with(&a, &[true]).is_err());
    }

    #[test]
    fn jaccard() {
        assert_eq!(jaccard_distance(&[true, false], &[true, false]), 0.0);
        assert_eq!(jaccard_distance(&[true, false], &[false, true]), 1.0);
        assert_eq!(jaccard_distance(&[false], &[false]), 0.0);
        assert!((jaccard_distance(&[true, true], &[true, false]) - 0.5).abs() < 1e-15);
    }
}
