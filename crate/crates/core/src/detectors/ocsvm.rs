//! One-Class SVM (nu formulation, RBF kernel).
//!
//! The dual is
//!
//! ```text
//! min_a  1/2 a'Qa   s.t.  0 <= a_i <= 1/(nu n),  sum_i a_i = 1
//! ```
//!
//! with `Q_ij = exp(-gamma |x_i - x_j|^2)`. It is solved by pairwise
//! coordinate descent: each step moves mass between two coordinates, so the
//! equality constraint is preserved exactly and the box is enforced by
//! clipping. The pair is the maximal-violating `i` plus the `j` with the best
//! second-order gain.

use serde::{Deserialize, Serialize};

use super::{threshold_by_contamination, DetectorError, DetectorOutcome, Method, MethodParams};
use crate::numkit::{squared_distance, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum GammaMode {
    /// `1 / (K * mean column variance)`; `1/K` on standardized data.
    Scale,
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OcsvmParams {
    pub nu: f64,
    pub gamma: GammaMode,
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for OcsvmParams {
    fn default() -> Self {
        Self {
            nu: 0.05,
            gamma: GammaMode::Scale,
            tolerance: 1e-6,
            max_iterations: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub alphas: Vec<f64>,
    pub rho: f64,
    pub gamma: f64,
    pub upper_bound: f64,
    pub support_indices: Vec<usize>,
    pub training_points: Matrix,
    pub iterations: usize,
    /// Maximal KKT violation at termination.
    pub max_violation: f64,
    pub objective: f64,
}

/// State after one solver step, for inspection in tests.
#[derive(Debug)]
pub struct SolverStep<'a> {
    pub iteration: usize,
    pub alphas: &'a [f64],
    pub objective: f64,
}

const SUPPORT_EPS: f64 = 1e-12;
const TAU: f64 = 1e-12;

pub fn rbf_gram(x: &Matrix, gamma: f64) -> Vec<f64> {
    let n = x.rows();
    let mut q = vec![1.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v = (-gamma * squared_distance(x.row(i), x.row(j))).exp();
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    q
}

/// `1/2 a'Qa` for a row-major `n x n` Gram matrix.
pub fn dual_objective(q: &[f64], alphas: &[f64]) -> f64 {
    let n = alphas.len();
    let mut acc = 0.0;
    for i in 0..n {
        if alphas[i] == 0.0 {
            continue;
        }
        let row = &q[i * n..(i + 1) * n];
        acc += alphas[i] * row.iter().zip(alphas).map(|(a, b)| a * b).sum::<f64>();
    }
    0.5 * acc
}

fn resolve_gamma(z: &Matrix, mode: GammaMode) -> Result<f64, DetectorError> {
    match mode {
        GammaMode::Fixed(g) if g > 0.0 && g.is_finite() => Ok(g),
        GammaMode::Fixed(g) => Err(DetectorError::InvalidParameter(format!(
            "gamma {g} must be positive"
        ))),
        GammaMode::Scale => {
            let n = z.rows() as f64;
            let k = z.cols();
            let mean_var = (0..k)
                .map(|c| {
                    let col = z.column(c);
                    let mean = col.iter().sum::<f64>() / n;
                    col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n
                })
                .sum::<f64>()
                / k as f64;
            if mean_var > 0.0 {
                Ok(1.0 / (k as f64 * mean_var))
            } else {
                Err(DetectorError::DegenerateData(
                    "zero variance; cannot scale gamma".into(),
                ))
            }
        }
    }
}

pub fn ocsvm_fit(z: &Matrix, params: &OcsvmParams) -> Result<SvmModel, DetectorError> {
    ocsvm_fit_observed(z, params, |_| {})
}

/// [`ocsvm_fit`] calling `observer` after every solver step.
pub fn ocsvm_fit_observed(
    z: &Matrix,
    params: &OcsvmParams,
    mut observer: impl FnMut(&SolverStep<'_>),
) -> Result<SvmModel, DetectorError> {
    let n = z.rows();
    if !(params.nu > 0.0 && params.nu <= 1.0) {
        return Err(DetectorError::InvalidParameter(format!(
            "nu {} outside (0, 1]",
            params.nu
        )));
    }
    if n < 2 || z.cols() == 0 {
        return Err(DetectorError::DegenerateData(format!(
            "need at least 2 rows, got {n}"
        )));
    }
    let gamma = resolve_gamma(z, params.gamma)?;
    let q = rbf_gram(z, gamma);
    let upper = 1.0 / (params.nu * n as f64);

    // Feasible start: the first floor(nu n) coordinates at the bound, the remainder on the next.
    let mut alphas = vec![0.0; n];
    let full = ((params.nu * n as f64).floor() as usize).min(n);
    for a in alphas.iter_mut().take(full) {
        *a = upper;
    }
    if full < n {
        alphas[full] = (1.0 - full as f64 * upper).clamp(0.0, upper);
    }

    let mut grad: Vec<f64> = (0..n)
        .map(|i| {
            q[i * n..(i + 1) * n]
                .iter()
                .zip(&alphas)
                .map(|(a, b)| a * b)
                .sum()
        })
        .collect();

    let mut iterations = 0;
    let max_violation = loop {
        // i: most profitable coordinate to increase; violation against the worst decrease.
        let mut i_sel = None;
        let mut g_min = f64::INFINITY;
        let mut g_max = f64::NEG_INFINITY;
        for t in 0..n {
            if alphas[t] < upper && grad[t] < g_min {
                g_min = grad[t];
                i_sel = Some(t);
            }
            if alphas[t] > 0.0 && grad[t] > g_max {
                g_max = grad[t];
            }
        }
        let violation = (g_max - g_min).max(0.0);
        let Some(i) = i_sel else { break 0.0 };
        if violation < params.tolerance {
            break violation;
        }
        if iterations >= params.max_iterations {
            return Err(DetectorError::NotConverged {
                iterations,
                residual: violation,
            });
        }

        let mut j_sel = None;
        let mut best_gain = f64::NEG_INFINITY;
        for t in 0..n {
            if alphas[t] > 0.0 && grad[t] > g_min {
                let b = grad[t] - g_min;
                let a = (q[i * n + i] + q[t * n + t] - 2.0 * q[i * n + t]).max(TAU);
                let gain = b * b / a;
                if gain > best_gain {
                    best_gain = gain;
                    j_sel = Some(t);
                }
            }
        }
        let j = j_sel.expect("violation > 0 implies a decreasable coordinate");

        let eta = (q[i * n + i] + q[j * n + j] - 2.0 * q[i * n + j]).max(TAU);
        let room_i = upper - alphas[i];
        let room_j = alphas[j];
        let unclipped = (grad[j] - grad[i]) / eta;
        let step = unclipped.min(room_i).min(room_j);
        if step == room_i {
            alphas[i] = upper;
        } else {
            alphas[i] += step;
        }
        if step == room_j {
            alphas[j] = 0.0;
        } else {
            alphas[j] -= step;
        }
        for t in 0..n {
            grad[t] += step * (q[t * n + i] - q[t * n + j]);
        }
        iterations += 1;
        observer(&SolverStep {
            iteration: iterations,
            alphas: &alphas,
            objective: dual_objective(&q, &alphas),
        });
    };

    // Refresh the gradient to shed accumulated update error before computing rho.
    for t in 0..n {
        grad[t] = q[t * n..(t + 1) * n]
            .iter()
            .zip(&alphas)
            .map(|(a, b)| a * b)
            .sum();
    }
    let rho = offset(&alphas, &grad, upper);
    let support_indices = (0..n).filter(|&i| alphas[i] > SUPPORT_EPS).collect();
    let objective = dual_objective(&q, &alphas);

    Ok(SvmModel {
        alphas,
        rho,
        gamma,
        upper_bound: upper,
        support_indices,
        training_points: z.clone(),
        iterations,
        max_violation,
        objective,
    })
}

/// Mean gradient over free coordinates, else the midpoint of the interval
/// allowed by the bounded ones (`a = U` needs `G <= rho`, `a = 0` needs `G >= rho`).
fn offset(alphas: &[f64], grad: &[f64], upper: f64) -> f64 {
    let mut free_sum = 0.0;
    let mut free_count = 0usize;
    let mut lower_limit = f64::NEG_INFINITY;
    let mut upper_limit = f64::INFINITY;
    for (&a, &g) in alphas.iter().zip(grad) {
        if a > 0.0 && a < upper {
            free_sum += g;
            free_count += 1;
        } else if a >= upper {
            lower_limit = lower_limit.max(g);
        } else {
            upper_limit = upper_limit.min(g);
        }
    }
    if free_count > 0 {
        free_sum / free_count as f64
    } else if lower_limit.is_finite() && upper_limit.is_finite() {
        0.5 * (lower_limit + upper_limit)
    } else if lower_limit.is_finite() {
        lower_limit
    } else {
        upper_limit
    }
}

/// Decision values `f(x) = sum_i a_i K(x_i, x) - rho`; negative outside the support.
pub fn ocsvm_decision(model: &SvmModel, z: &Matrix) -> Vec<f64> {
    z.row_iter()
        .map(|x| {
            model
                .support_indices
                .iter()
                .map(|&i| {
                    model.alphas[i]
                        * (-model.gamma * squared_distance(model.training_points.row(i), x)).exp()
                })
                .sum::<f64>()
                - model.rho
        })
        .collect()
}

pub fn ocsvm_detector(
    z: &Matrix,
    params: &OcsvmParams,
    contamination: f64,
) -> Result<DetectorOutcome, DetectorError> {
    let model = ocsvm_fit(z, params)?;
    let decision = ocsvm_decision(&model, z);
    let scores: Vec<f64> = decision.iter().map(|f| -f).collect();
    let (flags, threshold) = threshold_by_contamination(&scores, contamination)?;
    Ok(DetectorOutcome {
        method: Method::Ocsvm,
        scores,
        flags,
        threshold,
        params: MethodParams::Ocsvm {
            nu: params.nu,
            gamma_mode: params.gamma,
            gamma: model.gamma,
            rho: model.rho,
            support_vectors: model.support_indices.len(),
            iterations: model.iterations,
            contamination,
            raw_flags: decision.iter().map(|&f| f < 0.0).collect(),
        },
    })
}
