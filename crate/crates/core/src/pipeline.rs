//! Detection run over a merged dataset: standardize, run the five detectors,
//! vote, project, and write the output files.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{standardize_dataset, DatasetError, RegionalDataset};
use crate::detectors::{
    iforest_detector, lof_detector, mahalanobis_detector, ocsvm_detector, validate_contamination,
    zscore_detector, DetectorError, DetectorOutcome, GammaMode, IsolationForestParams,
    MahalanobisMode, Method, OcsvmParams,
};
use crate::ensemble::{
    build_report, jaccard_distance, vote, EnsembleError, Provenance, RunReport,
    DEFAULT_VOTE_THRESHOLD,
};
use crate::numkit::{pca_project, Matrix, DEFAULT_SEED};
use crate::viz::{render_heatmap, render_pca_scatter, VizError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("{method}: {source}")]
    Detector {
        method: &'static str,
        #[source]
        source: DetectorError,
    },
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Viz(#[from] VizError),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn detector_err(method: Method) -> impl FnOnce(DetectorError) -> PipelineError {
    move |source| PipelineError::Detector {
        method: method.key(),
        source,
    }
}

/// Detector hyperparameters; the defaults are the reference configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    pub seed: u64,
    pub contamination: f64,
    pub zscore_c: f64,
    pub mahalanobis: MahalanobisMode,
    pub iforest_trees: usize,
    pub iforest_subsample: Option<usize>,
    pub lof_k: usize,
    pub nu: f64,
    pub gamma: GammaMode,
    pub vote_threshold: u32,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            contamination: 0.05,
            zscore_c: 3.0,
            mahalanobis: MahalanobisMode::default(),
            iforest_trees: 300,
            iforest_subsample: None,
            lof_k: 20,
            nu: 0.05,
            gamma: GammaMode::Scale,
            vote_threshold: DEFAULT_VOTE_THRESHOLD,
        }
    }
}

impl DetectionConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        validate_contamination(self.contamination)
            .map_err(|e| PipelineError::Config(e.to_string()))?;
        let bad = |msg: String| Err(PipelineError::Config(msg));
        if !(self.zscore_c > 0.0 && self.zscore_c.is_finite()) {
            return bad(format!("zscore_c {} must be positive", self.zscore_c));
        }
        match self.mahalanobis {
            MahalanobisMode::EmpiricalPercentile { p } if !(0.0..=1.0).contains(&p) => {
                return bad(format!("percentile {p} outside [0, 1]"));
            }
            MahalanobisMode::ChiSquare { alpha } if !(alpha > 0.0 && alpha < 1.0) => {
                return bad(format!("alpha {alpha} outside (0, 1)"));
            }
            _ => {}
        }
        if self.iforest_trees == 0 {
            return bad("iforest_trees must be positive".into());
        }
        if matches!(self.iforest_subsample, Some(s) if s < 2) {
            return bad("iforest_subsample must be at least 2".into());
        }
        if self.lof_k == 0 {
            return bad("lof_k must be positive".into());
        }
        if !(self.nu > 0.0 && self.nu <= 1.0) {
            return bad(format!("nu {} outside (0, 1]", self.nu));
        }
        if let GammaMode::Fixed(g) = self.gamma {
            if !(g > 0.0 && g.is_finite()) {
                return bad(format!("gamma {g} must be positive"));
            }
        }
        if !(1..=5).contains(&self.vote_threshold) {
            return bad(format!(
                "vote_threshold {} outside 1..=5",
                self.vote_threshold
            ));
        }
        Ok(())
    }
}

/// Runs all five detectors on a standardized matrix, in [`Method::ALL`] order.
pub fn run_detectors(
    z: &Matrix,
    region_codes: &[String],
    config: &DetectionConfig,
) -> Result<Vec<DetectorOutcome>, PipelineError> {
    let zscore = zscore_detector(z, config.zscore_c);
    let mahalanobis =
        mahalanobis_detector(z, config.mahalanobis).map_err(detector_err(Method::Mahalanobis))?;
    let iforest = iforest_detector(
        z,
        Some(region_codes),
        &IsolationForestParams {
            trees: config.iforest_trees,
            subsample: config.iforest_subsample,
            seed: config.seed,
        },
        config.contamination,
    )
    .map_err(detector_err(Method::Iforest))?;
    let lof = lof_detector(
        z,
        effective_lof_k(config.lof_k, z.rows()),
        config.contamination,
    )
    .map_err(detector_err(Method::Lof))?;
    let ocsvm = ocsvm_detector(
        z,
        &OcsvmParams {
            nu: config.nu,
            gamma: config.gamma,
            ..OcsvmParams::default()
        },
        config.contamination,
    )
    .map_err(detector_err(Method::Ocsvm))?;
    Ok(vec![zscore, mahalanobis, iforest, lof, ocsvm])
}

/// LOF needs more rows than neighbours; small inputs use `n - 1`.
pub fn effective_lof_k(k: usize, rows: usize) -> usize {
    k.min(rows.saturating_sub(1)).max(1)
}

/// Full detection run producing the report (no files written).
pub fn run_detection(
    dataset: &RegionalDataset,
    year: Option<u16>,
    config: &DetectionConfig,
    provenance: Provenance,
) -> Result<RunReport, PipelineError> {
    config.validate()?;
    let dataset = standardize_dataset(dataset)?;
    let z = dataset
        .standardized
        .as_ref()
        .expect("standardize_dataset fills the matrix");
    let outcomes = run_detectors(z, &dataset.region_codes, config)?;
    let table = vote(&dataset.region_codes, &outcomes, config.vote_threshold)?;
    let pca = pca_project(z, 2.min(z.cols())).ok();
    Ok(build_report(
        &dataset,
        year,
        outcomes,
        table,
        pca.as_ref(),
        provenance,
    )?)
}

/// Names of the files written by [`write_outputs`].
pub const REPORT_FILE: &str = "report.json";
pub const FLAGS_FILE: &str = "flags.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const SCATTER_FILE: &str = "pca_scatter.svg";
pub const HEATMAP_FILE: &str = "heatmap.svg";

fn write_file(path: &Path, contents: &str) -> Result<(), PipelineError> {
    std::fs::write(path, contents).map_err(|e| PipelineError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

pub fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::Io {
        path: dir.to_owned(),
        message: e.to_string(),
    })
}

/// Writes `report.json`, `flags.csv` and `scores.csv`.
pub fn write_outputs(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    ensure_dir(dir)?;
    let files = [
        (REPORT_FILE, report.to_json()),
        (FLAGS_FILE, report.flags_csv()),
        (SCORES_FILE, report.scores_csv()),
    ];
    files
        .into_iter()
        .map(|(name, body)| {
            let path = dir.join(name);
            write_file(&path, &body)?;
            Ok(path)
        })
        .collect()
}

/// Regions shown in the heatmap with their vote counts: the structural set, or,
/// when it is empty, the regions whose shipped reference votes reach the threshold.
pub fn heatmap_selection(report: &RunReport) -> Vec<(usize, u32)> {
    let table = &report.flag_table;
    let computed: Vec<(usize, u32)> = (0..table.region_codes.len())
        .filter(|&r| table.structural[r])
        .map(|r| (r, table.votes[r]))
        .collect();
    if !computed.is_empty() {
        return computed;
    }
    match &report.expected_votes {
        Some(expected) => expected
            .iter()
            .enumerate()
            .filter(|&(_, &v)| v >= table.threshold)
            .map(|(r, &v)| (r, v))
            .collect(),
        None => Vec::new(),
    }
}

/// Renders both figures from a report. The heatmap is `None` when
/// [`heatmap_selection`] is empty.
pub fn render_figures(
    report: &RunReport,
) -> Result<(Option<String>, Option<String>), PipelineError> {
    let table = &report.flag_table;
    let scatter = match &report.pca {
        Some(pca) => {
            let scores = Matrix::from_rows(&pca.scores)
                .map_err(|e| PipelineError::Config(format!("report PCA block is invalid: {e}")))?;
            Some(render_pca_scatter(&scores, &table.structural, &table.region_codes)?.to_svg())
        }
        None => None,
    };
    let selected = heatmap_selection(report);
    let heatmap = if selected.is_empty() || report.dataset.standardized.is_empty() {
        None
    } else {
        let rows: Vec<Vec<f64>> = selected
            .iter()
            .map(|&(r, _)| report.dataset.standardized[r].clone())
            .collect();
        let labels: Vec<String> = selected
            .iter()
            .map(|&(r, _)| table.region_codes[r].clone())
            .collect();
        let votes: Vec<u32> = selected.iter().map(|&(_, v)| v).collect();
        Some(render_heatmap(&rows, &labels, &report.dataset.indicator_names, &votes)?.to_svg())
    };
    Ok((scatter, heatmap))
}

/// Writes whichever figures could be rendered and returns their paths.
pub fn write_figures(report: &RunReport, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    ensure_dir(dir)?;
    let (scatter, heatmap) = render_figures(report)?;
    let mut written = Vec::new();
    for (name, svg) in [(SCATTER_FILE, scatter), (HEATMAP_FILE, heatmap)] {
        if let Some(svg) = svg {
            let path = dir.join(name);
            write_file(&path, &svg)?;
            written.push(path);
        }
    }
    Ok(written)
}

/// How much a per-column monotone transform changes each method's flag set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub method: Method,
    pub flagged_before: usize,
    pub flagged_after: usize,
    pub jaccard_distance: f64,
}

pub fn monotone_sensitivity(
    dataset: &RegionalDataset,
    column: usize,
    transform: impl Fn(f64) -> f64,
    config: &DetectionConfig,
) -> Result<Vec<SensitivityRow>, PipelineError> {
    config.validate()?;
    let before = standardize_dataset(dataset)?;
    let after = standardize_dataset(&dataset.map_column(column, transform)?)?;
    let a = run_detectors(
        before.standardized.as_ref().expect("standardized"),
        &before.region_codes,
        config,
    )?;
    let b = run_detectors(
        after.standardized.as_ref().expect("standardized"),
        &after.region_codes,
        config,
    )?;
    Ok(a.iter()
        .zip(&b)
        .map(|(x, y)| SensitivityRow {
            method: x.method,
            flagged_before: x.flag_count(),
            flagged_after: y.flag_count(),
            jaccard_distance: jaccard_distance(&x.flags, &y.flags),
        })
        .collect())
}
