//! Slow, direct reference implementations and seeded synthetic data used to
//! check the production code. Nothing here depends on `regionscope-core`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub type Rows = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// `n` rows of `k` independent standard normals.
pub fn normal_rows(seed: u64, n: usize, k: usize) -> Rows {
    let mut r = rng(seed);
    (0..n)
        .map(|_| (0..k).map(|_| r.sample::<f64, _>(StandardNormal)).collect())
        .collect()
}

/// 99 standard-normal points in 2-D plus one point at (6, 6) in the last row.
pub fn blob_with_outlier(seed: u64) -> (Rows, usize) {
    let mut rows = normal_rows(seed, 99, 2);
    rows.push(vec![6.0, 6.0]);
    (rows, 99)
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Population mean and standard deviation of each column.
pub fn column_moments(rows: &Rows) -> Vec<(f64, f64)> {
    let n = rows.len() as f64;
    (0..rows[0].len())
        .map(|c| {
            let mean = rows.iter().map(|r| r[c]).sum::<f64>() / n;
            let var = rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / n;
            (mean, var.sqrt())
        })
        .collect()
}

pub fn standardize_rows(rows: &Rows) -> Rows {
    let m = column_moments(rows);
    rows.iter()
        .map(|r| {
            r.iter()
                .zip(&m)
                .map(|(v, (mu, sd))| (v - mu) / sd)
                .collect()
        })
        .collect()
}

/// Local Outlier Factor written straight from the definitions:
/// k-distance, neighbourhood with ties, reachability distance, lrd, LOF.
pub fn lof_brute_force(points: &Rows, k: usize) -> Vec<f64> {
    let n = points.len();
    let d = |a: usize, b: usize| euclidean(&points[a], &points[b]);
    let k_distance = |p: usize| {
        let mut ds: Vec<f64> = (0..n).filter(|&o| o != p).map(|o| d(p, o)).collect();
        ds.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ds[k - 1]
    };
    let neighbours = |p: usize| -> Vec<usize> {
        let kd = k_distance(p);
        (0..n).filter(|&o| o != p && d(p, o) <= kd).collect()
    };
    let reach = |p: usize, o: usize| k_distance(o).max(d(p, o));
    let lrd = |p: usize| {
        let nb = neighbours(p);
        let mean_reach = nb.iter().map(|&o| reach(p, o)).sum::<f64>() / nb.len() as f64;
        1.0 / mean_reach
    };
    (0..n)
        .map(|p| {
            let nb = neighbours(p);
            nb.iter().map(|&o| lrd(o)).sum::<f64>() / (nb.len() as f64 * lrd(p))
        })
        .collect()
}

/// `exp(-gamma |xi - xj|^2)` for all pairs, row-major.
pub fn rbf_kernel(points: &Rows, gamma: f64) -> Vec<f64> {
    let n = points.len();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            q[i * n + j] = (-gamma * euclidean(&points[i], &points[j]).powi(2)).exp();
        }
    }
    q
}

pub fn quadratic_form(q: &[f64], a: &[f64]) -> f64 {
    let n = a.len();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            s += a[i] * q[i * n + j] * a[j];
        }
    }
    0.5 * s
}

/// Euclidean projection onto `{0 <= a_i <= upper, sum a = 1}` by bisection on the shift.
pub fn project_capped_simplex(v: &[f64], upper: f64) -> Vec<f64> {
    let clip = |t: f64| -> Vec<f64> { v.iter().map(|x| (x - t).clamp(0.0, upper)).collect() };
    let total = |t: f64| clip(t).iter().sum::<f64>();
    let mut lo = v.iter().cloned().fold(f64::INFINITY, f64::min) - upper - 1.0;
    let mut hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if total(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    clip(0.5 * (lo + hi))
}

/// Accelerated projected gradient on `min 1/2 a'Qa` over the capped simplex.
/// Returns the minimiser and its objective.
pub fn capped_simplex_qp(q: &[f64], n: usize, upper: f64, iterations: usize) -> (Vec<f64>, f64) {
    let lipschitz = (0..n)
        .map(|i| (0..n).map(|j| q[i * n + j].abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let step = 1.0 / lipschitz;
    let grad = |a: &[f64]| -> Vec<f64> {
        (0..n)
            .map(|i| (0..n).map(|j| q[i * n + j] * a[j]).sum())
            .collect()
    };
    let mut x = project_capped_simplex(&vec![1.0 / n as f64; n], upper);
    let mut y = x.clone();
    let mut t = 1.0_f64;
    let mut best = quadratic_form(q, &x);
    let mut stalled = 0;
    for _ in 0..iterations {
        let g = grad(&y);
        let next = project_capped_simplex(
            &y.iter()
                .zip(&g)
                .map(|(yi, gi)| yi - step * gi)
                .collect::<Vec<_>>(),
            upper,
        );
        let value = quadratic_form(q, &next);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        stalled = if best - value <= 1e-15 * best {
            stalled + 1
        } else {
            0
        };
        if stalled >= 200 {
            break;
        }
        if value > best {
            // Function-value restart.
            y = x.clone();
            t = 1.0;
            continue;
        }
        let momentum = (t - 1.0) / t_next;
        y = next
            .iter()
            .zip(&x)
            .map(|(a, b)| a + momentum * (a - b))
            .collect();
        x = next;
        t = t_next;
        best = value;
    }
    (x, best)
}

/// Chi-squared CDF for even degrees of freedom by composite Simpson integration of the density.
pub fn chi2_cdf_simpson(dof: u32, x: f64, intervals: usize) -> f64 {
    assert!(
        dof >= 2 && dof.is_multiple_of(2),
        "oracle handles even dof only"
    );
    let half = dof / 2;
    let gamma_half: f64 = (1..half).map(f64::from).product();
    let norm = 2f64.powi(half as i32) * gamma_half;
    let pdf = |t: f64| t.powi(half as i32 - 1) * (-t / 2.0).exp() / norm;
    let m = intervals + intervals % 2;
    let h = x / m as f64;
    let mut s = pdf(0.0) + pdf(x);
    for i in 1..m {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * pdf(i as f64 * h);
    }
    s * h / 3.0
}

/// Quantile of the Simpson CDF by bisection.
pub fn chi2_quantile_simpson(dof: u32, p: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, 1.0);
    while chi2_cdf_simpson(dof, hi, 4000) < p {
        hi *= 2.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if chi2_cdf_simpson(dof, mid, 20_000) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Rows, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut m: Rows = a
        .iter()
        .zip(b)
        .map(|(row, &bi)| row.iter().cloned().chain([bi]).collect())
        .collect();
    for c in 0..n {
        let p = (c..n)
            .max_by(|&i, &j| m[i][c].abs().partial_cmp(&m[j][c].abs()).unwrap())
            .unwrap();
        m.swap(c, p);
        for r in c + 1..n {
            let f = m[r][c] / m[c][c];
            let pivot = m[c].clone();
            for (x, p) in m[r][c..].iter_mut().zip(&pivot[c..]) {
                *x -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|k| m[r][k] * x[k]).sum();
        x[r] = (m[r][n] - s) / m[r][r];
    }
    x
}

/// Squared Mahalanobis distances using the population covariance, solved row by row.
pub fn mahalanobis_brute_force(rows: &Rows) -> Vec<f64> {
    let n = rows.len() as f64;
    let k = rows[0].len();
    let m: Vec<f64> = column_moments(rows).iter().map(|(mu, _)| *mu).collect();
    let cov: Rows = (0..k)
        .map(|a| {
            (0..k)
                .map(|b| {
                    rows.iter()
                        .map(|r| (r[a] - m[a]) * (r[b] - m[b]))
                        .sum::<f64>()
                        / n
                })
                .collect()
        })
        .collect();
    rows.iter()
        .map(|r| {
            let d: Vec<f64> = r.iter().zip(&m).map(|(v, mu)| v - mu).collect();
            let y = solve(&cov, &d);
            d.iter().zip(&y).map(|(a, b)| a * b).sum()
        })
        .collect()
}

/// Size of the symmetric difference over the union; 0 when both sets are empty.
pub fn jaccard_distance(a: &[bool], b: &[bool]) -> f64 {
    let union = a.iter().zip(b).filter(|(x, y)| **x || **y).count();
    let inter = a.iter().zip(b).filter(|(x, y)| **x && **y).count();
    if union == 0 {
        0.0
    } else {
        1.0 - inter as f64 / union as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simpson_matches_closed_form_dof_two() {
        for x in [0.5, 2.0, 9.0] {
            let exact = 1.0 - (-x / 2.0_f64).exp();
            assert!((chi2_cdf_simpson(2, x, 2000) - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn projection_is_feasible() {
        let a = project_capped_simplex(&[3.0, -1.0, 0.2, 0.1], 0.5);
        assert!((a.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(a.iter().all(|&v| (0.0..=0.5).contains(&v)));
    }

    #[test]
    fn solve_small_system() {
        let x = solve(&vec![vec![2.0, 1.0], vec![1.0, 3.0]], &[3.0, 5.0]);
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
    }
}
