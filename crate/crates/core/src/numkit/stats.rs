use serde::{Deserialize, Serialize};

use super::{Matrix, NumError};

/// Output of [`standardize`]: the z-matrix plus the column moments needed to map back.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardized {
    pub z: Matrix,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Column-wise z-scores using the population standard deviation.
pub fn standardize(x: &Matrix) -> Result<Standardized, NumError> {
    if x.rows() < 2 {
        return Err(NumError::TooFewRows {
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    let n = x.rows() as f64;
    let mut means = Vec::with_capacity(x.cols());
    let mut stds = Vec::with_capacity(x.cols());
    for c in 0..x.cols() {
        let col = x.column(c);
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = var.sqrt();
        // Spread below rounding noise of the mean is treated as constant.
        if std <= f64::EPSILON * mean.abs().max(f64::MIN_POSITIVE) * 4.0 || std == 0.0 {
            return Err(NumError::ConstantColumn(c));
        }
        means.push(mean);
        stds.push(std);
    }
    let mut data = Vec::with_capacity(x.rows() * x.cols());
    for row in x.row_iter() {
        data.extend(
            row.iter()
                .enumerate()
                .map(|(c, v)| (v - means[c]) / stds[c]),
        );
    }
    Ok(Standardized {
        z: Matrix::new(x.rows(), x.cols(), data)?,
        means,
        stds,
    })
}

/// Population covariance (divisor n) and column means.
pub fn covariance(x: &Matrix) -> (Vec<f64>, Matrix) {
    let n = x.rows() as f64;
    let k = x.cols();
    let means: Vec<f64> = (0..k)
        .map(|c| x.column(c).iter().sum::<f64>() / n)
        .collect();
    let mut cov = Matrix::zeros(k, k);
    for row in x.row_iter() {
        for i in 0..k {
            let di = row[i] - means[i];
            for j in i..k {
                cov[(i, j)] += di * (row[j] - means[j]);
            }
        }
    }
    for i in 0..k {
        for j in i..k {
            let v = cov[(i, j)] / n;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
        }
    }
    (means, cov)
}

/// Mean, covariance and inverse covariance of a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpdSummary {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
    pub inverse: Matrix,
    /// Ridge added to the diagonal before inversion; zero when the covariance was invertible as is.
    pub ridge_used: f64,
}

const RIDGE_LADDER: [f64; 3] = [1e-10, 1e-8, 1e-6];
const INVERSE_RESIDUAL_BOUND: f64 = 1e-8;

pub fn spd_summary(x: &Matrix) -> Result<SpdSummary, NumError> {
    if x.rows() <= x.cols() {
        return Err(NumError::TooFewRows {
            rows: x.rows(),
            cols: x.cols(),
        });
    }
    let (mean, covariance) = covariance(x);
    let k = covariance.rows();
    if let Some(inverse) = checked_spd_inverse(&covariance) {
        return Ok(SpdSummary {
            mean,
            covariance,
            inverse,
            ridge_used: 0.0,
        });
    }
    let scale = (0..k).map(|i| covariance[(i, i)]).sum::<f64>() / k as f64;
    for factor in RIDGE_LADDER {
        let ridge = factor * scale;
        let mut shifted = covariance.clone();
        for i in 0..k {
            shifted[(i, i)] += ridge;
        }
        if let Some(inverse) = checked_spd_inverse(&shifted) {
            return Ok(SpdSummary {
                mean,
                covariance,
                inverse,
                ridge_used: ridge,
            });
        }
    }
    Err(NumError::Singular)
}

/// Cholesky-based inverse, accepted only if `inverse * a` is within the residual bound of identity.
fn checked_spd_inverse(a: &Matrix) -> Option<Matrix> {
    let inverse = cholesky_inverse(a)?;
    let residual = inverse
        .matmul(a)
        .ok()?
        .max_abs_diff(&Matrix::identity(a.rows()));
    (residual <= INVERSE_RESIDUAL_BOUND).then_some(inverse)
}

fn cholesky_inverse(a: &Matrix) -> Option<Matrix> {
    let n = a.rows();
    let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
    if max_diag <= 0.0 {
        return None;
    }
    let pivot_floor = max_diag * 1e-14;
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for p in 0..j {
            d -= l[(j, p)] * l[(j, p)];
        }
        if d <= pivot_floor {
            return None;
        }
        let ljj = d.sqrt();
        l[(j, j)] = ljj;
        for i in j + 1..n {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    // Solve L L^T X = I column by column.
    let mut inv = Matrix::zeros(n, n);
    let mut y = vec![0.0; n];
    for col in 0..n {
        for i in 0..n {
            let mut s = if i == col { 1.0 } else { 0.0 };
            for p in 0..i {
                s -= l[(i, p)] * y[p];
            }
            y[i] = s / l[(i, i)];
        }
        for i in (0..n).rev() {
            let mut s = y[i];
            for p in i + 1..n {
                s -= l[(p, i)] * inv[(p, col)];
            }
            inv[(i, col)] = s / l[(i, i)];
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            let v = 0.5 * (inv[(i, j)] + inv[(j, i)]);
            inv[(i, j)] = v;
            inv[(j, i)] = v;
        }
    }
    Some(inv)
}

/// Squared Mahalanobis distance of every row to the summary mean.
pub fn mahalanobis_d2(x: &Matrix, s: &SpdSummary) -> Result<Vec<f64>, NumError> {
    let k = s.mean.len();
    if x.cols() != k {
        return Err(NumError::DimensionMismatch {
            expected: k,
            found: x.cols(),
        });
    }
    let mut diff = vec![0.0; k];
    Ok(x.row_iter()
        .map(|row| {
            for (d, (v, m)) in diff.iter_mut().zip(row.iter().zip(&s.mean)) {
                *d = v - m;
            }
            let mut acc = 0.0;
            for i in 0..k {
                let mut inner = 0.0;
                for (j, dj) in diff.iter().enumerate() {
                    inner += s.inverse[(i, j)] * dj;
                }
                acc += diff[i] * inner;
            }
            acc.max(0.0)
        })
        .collect())
}

/// Linear-interpolation quantile: position `p * (n - 1)` in the sorted sample.
pub fn percentile(values: &[f64], p: f64) -> Result<f64, NumError> {
    if values.is_empty() {
        return Err(NumError::EmptyInput);
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(NumError::NonFinite);
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(NumError::InvalidArgument(format!(
            "percentile fraction {p} outside [0, 1]"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    Ok(sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::Rng;

    fn column_moments(m: &Matrix, c: usize) -> (f64, f64) {
        let col = m.column(c);
        let n = col.len() as f64;
        let mean = col.iter().sum::<f64>() / n;
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    fn gaussian_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
        let mut rng = Rng::new(seed);
        let data = (0..rows * cols).map(|_| rng.standard_normal()).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn standardize_small_column() {
        let x = Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap();
        let s = standardize(&x).unwrap();
        // population std of [1,2,3] is sqrt(2/3); (3-2)/sqrt(2/3) = sqrt(3/2)
        let expected = (1.5f64).sqrt();
        assert!((s.z[(0, 0)] + expected).abs() < 1e-12);
        assert!(s.z[(1, 0)].abs() < 1e-12);
        assert!((s.z[(2, 0)] - expected).abs() < 1e-12);
        assert!((s.stds[0] - (2.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn standardize_constant_column() {
        let x = Matrix::from_rows(&[[1.0, 5.0], [2.0, 5.0], [3.0, 5.0]]).unwrap();
        assert_eq!(standardize(&x), Err(NumError::ConstantColumn(1)));
    }

    #[test]
    fn standardize_is_idempotent() {
        let x = gaussian_matrix(40, 3, 7);
        let once = standardize(&x).unwrap().z;
        let twice = standardize(&once).unwrap().z;
        assert!(once.max_abs_diff(&twice) < 1e-12);
        for c in 0..3 {
            let (mean, std) = column_moments(&once, c);
            assert!(mean.abs() < 1e-10);
            assert!((std - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn standardize_needs_two_rows() {
        let x = Matrix::from_rows(&[[1.0, 2.0]]).unwrap();
        assert!(matches!(standardize(&x), Err(NumError::TooFewRows { .. })));
    }

    #[test]
    fn summary_of_uncorrelated_columns() {
        // Columns are orthogonal, mean zero, unit population variance.
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let s = spd_summary(&x).unwrap();
        assert!(s.covariance.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        assert!(s.inverse.max_abs_diff(&Matrix::identity(2)) < 1e-12);
        assert_eq!(s.ridge_used, 0.0);
    }

    #[test]
    fn summary_falls_back_to_ridge_on_duplicate_columns() {
        let base = gaussian_matrix(30, 2, 11);
        let rows: Vec<Vec<f64>> = base.row_iter().map(|r| vec![r[0], r[1], r[0]]).collect();
        let x = Matrix::from_rows(&rows).unwrap();
        let s = spd_summary(&x).unwrap();
        assert!(s.ridge_used > 0.0);
        let mut shifted = s.covariance.clone();
        for i in 0..3 {
            shifted[(i, i)] += s.ridge_used;
        }
        let residual = s
            .inverse
            .matmul(&shifted)
            .unwrap()
            .max_abs_diff(&Matrix::identity(3));
        assert!(residual < 1e-8, "residual {residual}");
    }

    #[test]
    fn summary_requires_more_rows_than_columns() {
        let x = gaussian_matrix(2, 3, 1);
        assert!(matches!(spd_summary(&x), Err(NumError::TooFewRows { .. })));
    }

    #[test]
    fn d2_zero_at_mean_and_euclidean_under_identity() {
        let x = Matrix::from_rows(&[[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]]).unwrap();
        let s = spd_summary(&x).unwrap();
        let probe = Matrix::from_rows(&[[0.0, 0.0], [3.0, 4.0]]).unwrap();
        let d2 = mahalanobis_d2(&probe, &s).unwrap();
        assert!(d2[0].abs() < 1e-15);
        assert!((d2[1] - 25.0).abs() < 1e-12);
    }

    #[test]
    fn d2_dimension_mismatch() {
        let x = gaussian_matrix(10, 2, 3);
        let s = spd_summary(&x).unwrap();
        let probe = gaussian_matrix(2, 3, 4);
        assert!(matches!(
            mahalanobis_d2(&probe, &s),
            Err(NumError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn d2_sums_to_n_times_k() {
        let z = standardize(&gaussian_matrix(50, 4, 5)).unwrap().z;
        let s = spd_summary(&z).unwrap();
        let d2 = mahalanobis_d2(&z, &s).unwrap();
        let mut total = 0.0;
        for v in &d2 {
            total += v;
        }
        assert!((total - 200.0).abs() / 200.0 < 1e-6, "sum {total}");
    }

    #[test]
    fn percentile_rules() {
        assert_eq!(percentile(&[1.0, 2.0, 3.0, 4.0], 0.5).unwrap(), 2.5);
        assert_eq!(percentile(&[10.0], 0.3).unwrap(), 10.0);
        let seq: Vec<f64> = (0..100).map(f64::from).collect();
        assert!((percentile(&seq, 0.99).unwrap() - 98.01).abs() < 1e-12);
        assert_eq!(percentile(&seq, 0.0).unwrap(), 0.0);
        assert_eq!(percentile(&seq, 1.0).unwrap(), 99.0);
        assert_eq!(percentile(&[], 0.5), Err(NumError::EmptyInput));
    }
}
