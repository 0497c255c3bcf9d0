//! Isolation Forest with height-limited trees.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{threshold_by_contamination, DetectorError, DetectorOutcome, Method, MethodParams};
use crate::numkit::{Matrix, Rng, DEFAULT_SEED};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForestParams {
    pub trees: usize,
    /// Rows drawn per tree; `None` means `min(256, n)`.
    pub subsample: Option<usize>,
    pub seed: u64,
}

impl Default for IsolationForestParams {
    fn default() -> Self {
        Self {
            trees: 300,
            subsample: None,
            seed: DEFAULT_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum IsolationTreeNode {
    /// Rows with `x[feature] < split` go left.
    Internal {
        feature: usize,
        split: f64,
        left: usize,
        right: usize,
    },
    External {
        size: usize,
    },
}

/// Arena of nodes; the root is `nodes[0]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationTree {
    pub nodes: Vec<IsolationTreeNode>,
}

impl IsolationTree {
    /// Edges to the external node reached by `x`, plus `c(size)` for its unresolved rows.
    pub fn path_length(&self, x: &[f64]) -> f64 {
        let mut node = 0;
        let mut depth = 0usize;
        loop {
            match self.nodes[node] {
                IsolationTreeNode::Internal {
                    feature,
                    split,
                    left,
                    right,
                } => {
                    node = if x[feature] < split { left } else { right };
                    depth += 1;
                }
                IsolationTreeNode::External { size } => {
                    return depth as f64 + average_path_length(size);
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IsolationForest {
    pub trees: Vec<IsolationTree>,
    pub subsample: usize,
    pub height_limit: usize,
    /// Seed after mixing in the region codes.
    pub derived_seed: u64,
}

/// `c(n) = 2 H(n-1) - 2 (n-1) / n`: mean unsuccessful-search path length in a
/// binary search tree of `n` keys. `c(0) = c(1) = 0`.
pub fn average_path_length(n: usize) -> f64 {
    if n <= 1 {
        return 0.0;
    }
    let harmonic: f64 = (1..n).map(|i| 1.0 / i as f64).sum();
    2.0 * harmonic - 2.0 * (n - 1) as f64 / n as f64
}

/// `2^(-h / c(n))`.
pub fn anomaly_score(mean_path_length: f64, subsample: usize) -> f64 {
    let c = average_path_length(subsample);
    if c == 0.0 {
        return 1.0;
    }
    2f64.powf(-mean_path_length / c)
}

/// Mixes the user seed with the sorted region codes so results do not depend on row order.
fn derive_seed(seed: u64, sorted_codes: &[&str]) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for code in sorted_codes {
        hasher.update(code.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest is 32 bytes"))
}

/// Fits a forest on `z`. `region_codes`, when given, fixes the canonical row
/// order used for subsampling; otherwise row position is used.
pub fn iforest_fit(
    z: &Matrix,
    region_codes: Option<&[String]>,
    params: &IsolationForestParams,
) -> Result<IsolationForest, DetectorError> {
    let n = z.rows();
    if n < 2 {
        return Err(DetectorError::TooFewRows { rows: n, k: 1 });
    }
    if params.trees == 0 {
        return Err(DetectorError::InvalidParameter(
            "trees must be positive".into(),
        ));
    }
    if z.row_iter().all(|r| r == z.row(0)) {
        return Err(DetectorError::DegenerateData(
            "all rows are identical".into(),
        ));
    }
    let subsample = params.subsample.unwrap_or(256).min(n);
    if subsample < 2 {
        return Err(DetectorError::InvalidParameter(
            "subsample must be at least 2".into(),
        ));
    }
    let height_limit = (subsample as f64).log2().ceil() as usize;

    let mut canonical: Vec<usize> = (0..n).collect();
    let derived_seed = match region_codes {
        Some(codes) => {
            if codes.len() != n {
                return Err(DetectorError::InvalidParameter(format!(
                    "{} region codes for {n} rows",
                    codes.len()
                )));
            }
            canonical.sort_by(|&a, &b| codes[a].cmp(&codes[b]));
            let sorted: Vec<&str> = canonical.iter().map(|&i| codes[i].as_str()).collect();
            derive_seed(params.seed, &sorted)
        }
        None => params.seed,
    };

    let trees = (0..params.trees)
        .map(|t| {
            let mut rng = Rng::with_stream(derived_seed, t as u64);
            let rows: Vec<usize> = rng
                .sample_without_replacement(n, subsample)
                .into_iter()
                .map(|p| canonical[p])
                .collect();
            let mut nodes = Vec::new();
            grow(z, rows, 0, height_limit, &mut rng, &mut nodes);
            IsolationTree { nodes }
        })
        .collect();

    Ok(IsolationForest {
        trees,
        subsample,
        height_limit,
        derived_seed,
    })
}

fn grow(
    z: &Matrix,
    rows: Vec<usize>,
    depth: usize,
    height_limit: usize,
    rng: &mut Rng,
    nodes: &mut Vec<IsolationTreeNode>,
) -> usize {
    let id = nodes.len();
    nodes.push(IsolationTreeNode::External { size: rows.len() });
    if rows.len() <= 1 || depth >= height_limit {
        return id;
    }
    let ranges: Vec<(usize, f64, f64)> = (0..z.cols())
        .filter_map(|f| {
            let (lo, hi) = rows
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                    let v = z[(r, f)];
                    (lo.min(v), hi.max(v))
                });
            (lo < hi).then_some((f, lo, hi))
        })
        .collect();
    if ranges.is_empty() {
        return id;
    }
    let (feature, lo, hi) = ranges[rng.index(ranges.len())];
    let split = loop {
        let s = lo + rng.uniform() * (hi - lo);
        if s > lo && s < hi {
            break s;
        }
    };
    let (left_rows, right_rows): (Vec<usize>, Vec<usize>) =
        rows.into_iter().partition(|&r| z[(r, feature)] < split);
    let left = grow(z, left_rows, depth + 1, height_limit, rng, nodes);
    let right = grow(z, right_rows, depth + 1, height_limit, rng, nodes);
    nodes[id] = IsolationTreeNode::Internal {
        feature,
        split,
        left,
        right,
    };
    id
}

/// Anomaly score in (0, 1] for every row of `z`.
pub fn iforest_score(forest: &IsolationForest, z: &Matrix) -> Vec<f64> {
    let t = forest.trees.len() as f64;
    z.row_iter()
        .map(|x| {
            let h = forest
                .trees
                .iter()
                .map(|tree| tree.path_length(x))
                .sum::<f64>()
                / t;
            anomaly_score(h, forest.subsample)
        })
        .collect()
}

pub fn iforest_detector(
    z: &Matrix,
    region_codes: Option<&[String]>,
    params: &IsolationForestParams,
    contamination: f64,
) -> Result<DetectorOutcome, DetectorError> {
    let forest = iforest_fit(z, region_codes, params)?;
    let scores = iforest_score(&forest, z);
    let (flags, threshold) = threshold_by_contamination(&scores, contamination)?;
    Ok(DetectorOutcome {
        method: Method::Iforest,
        scores,
        flags,
        threshold,
        params: MethodParams::Iforest {
            trees: params.trees,
            subsample: forest.subsample,
            height_limit: forest.height_limit,
            seed: params.seed,
            contamination,
        },
    })
}
