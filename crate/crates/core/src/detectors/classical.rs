use serde::{Deserialize, Serialize};

use super::{DetectorError, DetectorOutcome, Method, MethodParams};
use crate::numkit::{chi2_quantile, mahalanobis_d2, percentile, spd_summary, Matrix};

/// Largest absolute z-score per row, flagged above `c`.
pub fn zscore_detector(z: &Matrix, c: f64) -> DetectorOutcome {
    let scores: Vec<f64> = z
        .row_iter()
        .map(|row| row.iter().fold(0.0, |m: f64, v| m.max(v.abs())))
        .collect();
    let flags = scores.iter().map(|&s| s > c).collect();
    DetectorOutcome {
        method: Method::Zscore,
        scores,
        flags,
        threshold: c,
        params: MethodParams::Zscore { c },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MahalanobisMode {
    /// Flag distances strictly above the interpolated `p` quantile of the sample.
    EmpiricalPercentile { p: f64 },
    /// Flag distances above the `1 - alpha` quantile of chi-squared with K dof.
    ChiSquare { alpha: f64 },
}

impl Default for MahalanobisMode {
    fn default() -> Self {
        Self::EmpiricalPercentile { p: 0.99 }
    }
}

pub fn mahalanobis_detector(
    z: &Matrix,
    mode: MahalanobisMode,
) -> Result<DetectorOutcome, DetectorError> {
    let summary = spd_summary(z)?;
    let scores = mahalanobis_d2(z, &summary)?;
    let threshold = match mode {
        MahalanobisMode::EmpiricalPercentile { p } => percentile(&scores, p)?,
        MahalanobisMode::ChiSquare { alpha } => {
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(DetectorError::InvalidParameter(format!(
                    "alpha {alpha} outside (0, 1)"
                )));
            }
            chi2_quantile(z.cols() as u32, 1.0 - alpha)?
        }
    };
    let flags = scores.iter().map(|&s| s > threshold).collect();
    Ok(DetectorOutcome {
        method: Method::Mahalanobis,
        scores,
        flags,
        threshold,
        params: MethodParams::Mahalanobis {
            mode,
            ridge_used: summary.ridge_used,
        },
    })
}
