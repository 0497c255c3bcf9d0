//! Local Outlier Factor over exact Euclidean distances.

use super::{threshold_by_contamination, DetectorError, DetectorOutcome, Method, MethodParams};
use crate::numkit::{squared_distance, Matrix};

/// Local reachability density assigned when every reachability distance is
/// zero (a point with at least k exact duplicates).
pub const LRD_SENTINEL: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct LofResult {
    pub k_distance: Vec<f64>,
    /// Indices within the k-distance of each point, ties included.
    pub neighborhoods: Vec<Vec<usize>>,
    pub lrd: Vec<f64>,
    pub lof: Vec<f64>,
}

pub fn local_outlier_factor(z: &Matrix, k: usize) -> Result<LofResult, DetectorError> {
    let n = z.rows();
    if k == 0 {
        return Err(DetectorError::InvalidParameter("k must be positive".into()));
    }
    if n <= k {
        return Err(DetectorError::TooFewRows { rows: n, k });
    }
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = squared_distance(z.row(i), z.row(j)).sqrt();
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let d = |i: usize, j: usize| dist[i * n + j];

    let mut k_distance = Vec::with_capacity(n);
    let mut neighborhoods = Vec::with_capacity(n);
    for i in 0..n {
        let mut others: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d(i, j)).collect();
        others.sort_by(f64::total_cmp);
        let kd = others[k - 1];
        k_distance.push(kd);
        neighborhoods.push(
            (0..n)
                .filter(|&j| j != i && d(i, j) <= kd)
                .collect::<Vec<_>>(),
        );
    }

    let lrd: Vec<f64> = (0..n)
        .map(|i| {
            let nb = &neighborhoods[i];
            let total: f64 = nb.iter().map(|&q| d(i, q).max(k_distance[q])).sum();
            if total == 0.0 {
                LRD_SENTINEL
            } else {
                nb.len() as f64 / total
            }
        })
        .collect();

    let lof = (0..n)
        .map(|i| {
            let nb = &neighborhoods[i];
            nb.iter().map(|&q| lrd[q] / lrd[i]).sum::<f64>() / nb.len() as f64
        })
        .collect();

    Ok(LofResult {
        k_distance,
        neighborhoods,
        lrd,
        lof,
    })
}

pub fn lof_detector(
    z: &Matrix,
    k: usize,
    contamination: f64,
) -> Result<DetectorOutcome, DetectorError> {
    let scores = local_outlier_factor(z, k)?.lof;
    let (flags, threshold) = threshold_by_contamination(&scores, contamination)?;
    Ok(DetectorOutcome {
        method: Method::Lof,
        scores,
        flags,
        threshold,
        params: MethodParams::Lof { k, contamination },
    })
}
