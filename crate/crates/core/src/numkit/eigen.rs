use super::{covariance, Matrix, NumError};

/// Eigen-decomposition of a symmetric matrix.
///
/// `vectors` holds the eigenvectors as columns, in the same order as
/// `values` (descending). Each vector is oriented so that its largest-magnitude
/// entry is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigen {
    pub values: Vec<f64>,
    pub vectors: Matrix,
}

const SYMMETRY_TOLERANCE: f64 = 1e-10;
const OFF_DIAGONAL_TOLERANCE: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi rotations until the off-diagonal Frobenius norm drops below 1e-12
/// (relative to the matrix norm when that exceeds one).
pub fn symmetric_eigen(a: &Matrix) -> Result<Eigen, NumError> {
    let n = a.rows();
    if a.cols() != n {
        return Err(NumError::DimensionMismatch {
            expected: n,
            found: a.cols(),
        });
    }
    let asym = a.max_abs_diff(&a.transpose());
    if asym > SYMMETRY_TOLERANCE {
        return Err(NumError::NotSymmetric(asym));
    }

    let mut m = a.clone();
    let mut v = Matrix::identity(n);
    let scale = frobenius(&m).max(1.0);
    for _ in 0..MAX_SWEEPS {
        if off_diagonal_norm(&m) <= OFF_DIAGONAL_TOLERANCE * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                rotate(&mut m, &mut v, p, q, c, s);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].total_cmp(&m[(i, i)]));
    let values: Vec<f64> = order.iter().map(|&i| m[(i, i)]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut lead = 0;
        for r in 0..n {
            if v[(r, src)].abs() > v[(lead, src)].abs() + 1e-15 {
                lead = r;
            }
        }
        let sign = if v[(lead, src)] < 0.0 { -1.0 } else { 1.0 };
        for r in 0..n {
            vectors[(r, dst)] = sign * v[(r, src)];
        }
    }
    Ok(Eigen { values, vectors })
}

fn rotate(m: &mut Matrix, v: &mut Matrix, p: usize, q: usize, c: f64, s: f64) {
    let n = m.rows();
    for k in 0..n {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..n {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

fn frobenius(m: &Matrix) -> f64 {
    m.data().iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn off_diagonal_norm(m: &Matrix) -> f64 {
    let n = m.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                acc += m[(i, j)] * m[(i, j)];
            }
        }
    }
    acc.sqrt()
}

/// Principal component projection of a (typically standardized) matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Pca {
    /// rows × n_components projections of the centred data.
    pub scores: Matrix,
    /// Population variance of each component (the covariance eigenvalues).
    pub explained_variance: Vec<f64>,
    /// cols × n_components loadings.
    pub components: Matrix,
    pub means: Vec<f64>,
}

impl Pca {
    /// Maps scores back to the original space; exact when all components are kept.
    pub fn reconstruct(&self) -> Matrix {
        let mut out = self
            .scores
            .matmul(&self.components.transpose())
            .expect("scores and components agree by construction");
        for r in 0..out.rows() {
            for c in 0..out.cols() {
                out[(r, c)] += self.means[c];
            }
        }
        out
    }
}

pub fn pca_project(z: &Matrix, n_components: usize) -> Result<Pca, NumError> {
    if n_components > z.cols() {
        return Err(NumError::InvalidArgument(format!(
            "{n_components} components requested from {} columns",
            z.cols()
        )));
    }
    if z.rows() == 0 {
        return Err(NumError::EmptyInput);
    }
    let (means, cov) = covariance(z);
    let eig = symmetric_eigen(&cov)?;
    let k = z.cols();
    let mut components = Matrix::zeros(k, n_components);
    for r in 0..k {
        for c in 0..n_components {
            components[(r, c)] = eig.vectors[(r, c)];
        }
    }
    let mut centred = z.clone();
    for r in 0..centred.rows() {
        for c in 0..k {
            centred[(r, c)] -= means[c];
        }
    }
    let scores = centred.matmul(&components)?;
    Ok(Pca {
        scores,
        explained_variance: eig.values[..n_components].to_vec(),
        components,
        means,
    })
}
