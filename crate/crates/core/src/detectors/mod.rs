//! The five anomaly detectors. Each consumes the standardized indicator
//! matrix and yields a [`DetectorOutcome`]: a score per region (higher is
//! more anomalous) and a binary flag per region.

mod classical;
mod iforest;
mod lof;
mod ocsvm;

pub use classical::{mahalanobis_detector, zscore_detector, MahalanobisMode};
pub use iforest::{
    anomaly_score, average_path_length, iforest_detector, iforest_fit, iforest_score,
    IsolationForest, IsolationForestParams, IsolationTree, IsolationTreeNode,
};
pub use lof::{local_outlier_factor, lof_detector, LofResult, LRD_SENTINEL};
pub use ocsvm::{
    dual_objective, ocsvm_decision, ocsvm_detector, ocsvm_fit, ocsvm_fit_observed, rbf_gram,
    GammaMode, OcsvmParams, SolverStep, SvmModel,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numkit::NumError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectorError {
    #[error(transparent)]
    Numeric(#[from] NumError),
    #[error("degenerate data: {0}")]
    DegenerateData(String),
    #[error("need more than {k} rows, got {rows}")]
    TooFewRows { rows: usize, k: usize },
    #[error("solver stopped after {iterations} iterations with KKT violation {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Zscore,
    Mahalanobis,
    Iforest,
    Lof,
    Ocsvm,
}

impl Method {
    /// Fixed serialization and voting order.
    pub const ALL: [Method; 5] = [
        Method::Zscore,
        Method::Mahalanobis,
        Method::Iforest,
        Method::Lof,
        Method::Ocsvm,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Method::Zscore => "zscore",
            Method::Mahalanobis => "mahalanobis",
            Method::Iforest => "iforest",
            Method::Lof => "lof",
            Method::Ocsvm => "ocsvm",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Method::Zscore => "Univariate z-scores",
            Method::Mahalanobis => "Mahalanobis distance",
            Method::Iforest => "Isolation Forest",
            Method::Lof => "Local Outlier Factor",
            Method::Ocsvm => "One-Class SVM",
        }
    }
}

/// Hyperparameters and fitted quantities a detector ran with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodParams {
    Zscore {
        c: f64,
    },
    Mahalanobis {
        mode: MahalanobisMode,
        ridge_used: f64,
    },
    Iforest {
        trees: usize,
        subsample: usize,
        height_limit: usize,
        seed: u64,
        contamination: f64,
    },
    Lof {
        k: usize,
        contamination: f64,
    },
    Ocsvm {
        nu: f64,
        gamma_mode: GammaMode,
        gamma: f64,
        rho: f64,
        support_vectors: usize,
        iterations: usize,
        contamination: f64,
        /// Regions with a negative decision value, before rank thresholding.
        raw_flags: Vec<bool>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorOutcome {
    pub method: Method,
    pub scores: Vec<f64>,
    pub flags: Vec<bool>,
    /// `+inf` (serialized as `null`) when a rank threshold flags nothing.
    #[serde(with = "threshold_serde")]
    pub threshold: f64,
    pub params: MethodParams,
}

mod threshold_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl DetectorOutcome {
    pub fn flag_count(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }
}

/// Flags exactly `round(contamination * n)` rows: the highest scores, ties
/// resolved towards the lower row index. Returns the flags and the smallest
/// flagged score (`+inf` when nothing is flagged).
pub fn threshold_by_contamination(
    scores: &[f64],
    contamination: f64,
) -> Result<(Vec<bool>, f64), DetectorError> {
    validate_contamination(contamination)?;
    let n = scores.len();
    let m = (contamination * n as f64).round() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut flags = vec![false; n];
    for &i in &order[..m] {
        flags[i] = true;
    }
    let threshold = if m == 0 {
        f64::INFINITY
    } else {
        scores[order[m - 1]]
    };
    Ok((flags, threshold))
}

pub fn validate_contamination(contamination: f64) -> Result<(), DetectorError> {
    if contamination > 0.0 && contamination < 0.5 {
        Ok(())
    } else {
        Err(DetectorError::InvalidParameter(format!(
            "contamination {contamination} outside (0, 0.5)"
        )))
    }
}
