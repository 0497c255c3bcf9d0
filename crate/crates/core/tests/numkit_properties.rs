use proptest::prelude::*;
use regionscope_core::numkit::{
    chi2_cdf, chi2_quantile, covariance, mahalanobis_d2, pca_project, percentile, spd_summary,
    standardize, symmetric_eigen, Matrix,
};
use regionscope_testkit as tk;

fn matrix(rows: &tk::Rows) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Seeded normal data with per-column scale and shift, so columns differ in units.
fn arb_data() -> impl Strategy<Value = tk::Rows> {
    (any::<u64>(), 8usize..40, 1usize..6).prop_flat_map(|(seed, n, k)| {
        (
            Just(tk::normal_rows(seed, n, k)),
            prop::collection::vec((0.1f64..50.0, -100.0f64..100.0), k),
        )
            .prop_map(|(rows, scales)| {
                rows.into_iter()
                    .map(|r| r.iter().zip(&scales).map(|(v, (s, b))| v * s + b).collect())
                    .collect()
            })
    })
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn standardize_is_idempotent(rows in arb_data()) {
        let once = standardize(&matrix(&rows)).unwrap().z;
        let twice = standardize(&once).unwrap().z;
        prop_assert!(once.max_abs_diff(&twice) < 1e-9);
    }

    #[test]
    fn standardized_columns_have_zero_mean_unit_variance(rows in arb_data()) {
        let z = standardize(&matrix(&rows)).unwrap().z;
        for (mean, sd) in tk::column_moments(&(0..z.rows()).map(|r| z.row(r).to_vec()).collect()) {
            prop_assert!(mean.abs() < 1e-9);
            prop_assert!((sd - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn squared_distances_sum_to_n_times_k(rows in arb_data()) {
        let x = matrix(&rows);
        let d2 = mahalanobis_d2(&x, &spd_summary(&x).unwrap()).unwrap();
        let total: f64 = d2.iter().sum();
        let nk = (x.rows() * x.cols()) as f64;
        prop_assert!(((total - nk) / nk).abs() < 1e-6, "sum {total} vs {nk}");
    }

    #[test]
    fn distances_match_direct_solve(rows in arb_data()) {
        let x = matrix(&rows);
        let d2 = mahalanobis_d2(&x, &spd_summary(&x).unwrap()).unwrap();
        for (a, b) in d2.iter().zip(tk::mahalanobis_brute_force(&rows)) {
            prop_assert!(rel_close(*a, b, 1e-8), "{a} vs {b}");
        }
    }

    #[test]
    fn distances_invariant_under_affine_recoding(
        rows in arb_data(),
        seed in any::<u64>(),
    ) {
        let k = rows[0].len();
        // Diagonally dominant mixing matrix, hence invertible.
        let noise = tk::normal_rows(seed, k + 1, k);
        let a: tk::Rows = (0..k)
            .map(|i| (0..k).map(|j| if i == j { 3.0 + noise[i][j].abs() } else { noise[i][j] / k as f64 }).collect())
            .collect();
        let shift = &noise[k];
        let recoded: tk::Rows = rows
            .iter()
            .map(|r| (0..k).map(|j| (0..k).map(|i| r[i] * a[i][j]).sum::<f64>() + shift[j]).collect())
            .collect();
        let before = mahalanobis_d2(&matrix(&rows), &spd_summary(&matrix(&rows)).unwrap()).unwrap();
        let after = mahalanobis_d2(&matrix(&recoded), &spd_summary(&matrix(&recoded)).unwrap()).unwrap();
        for (p, q) in before.iter().zip(&after) {
            prop_assert!(rel_close(*p, *q, 1e-6), "{p} vs {q}");
        }
    }

    #[test]
    fn eigen_pairs_satisfy_definition(rows in arb_data()) {
        let (_, cov) = covariance(&matrix(&rows));
        let e = symmetric_eigen(&cov).unwrap();
        let k = cov.rows();
        let scale = cov.norm_inf().max(1.0);
        for c in 0..k {
            let v = e.vectors.column(c);
            for r in 0..k {
                let av: f64 = (0..k).map(|j| cov[(r, j)] * v[j]).sum();
                prop_assert!((av - e.values[c] * v[r]).abs() < 1e-9 * scale);
            }
        }
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        let vtv = e.vectors.transpose().matmul(&e.vectors).unwrap();
        prop_assert!(vtv.max_abs_diff(&Matrix::identity(k)) < 1e-10);
    }

    #[test]
    fn pca_properties(rows in arb_data()) {
        let z = standardize(&matrix(&rows)).unwrap().z;
        let k = z.cols();
        let pca = pca_project(&z, k).unwrap();
        let ctc = pca.components.transpose().matmul(&pca.components).unwrap();
        prop_assert!(ctc.max_abs_diff(&Matrix::identity(k)) < 1e-10);
        let score_rows: tk::Rows = (0..pca.scores.rows()).map(|r| pca.scores.row(r).to_vec()).collect();
        for (c, (_, sd)) in tk::column_moments(&score_rows).iter().enumerate() {
            prop_assert!((sd * sd - pca.explained_variance[c]).abs() < 1e-8);
        }
        let (_, cov) = covariance(&z);
        let eig = symmetric_eigen(&cov).unwrap();
        for (a, b) in pca.explained_variance.iter().zip(&eig.values) {
            prop_assert!((a - b).abs() < 1e-8);
        }
        prop_assert!(pca.reconstruct().max_abs_diff(&z) < 1e-8);
    }

    #[test]
    fn percentile_is_monotone_in_p(values in prop::collection::vec(-1e3f64..1e3, 1..50), p in 0.0f64..1.0, q in 0.0f64..1.0) {
        let (lo, hi) = if p <= q { (p, q) } else { (q, p) };
        prop_assert!(percentile(&values, lo).unwrap() <= percentile(&values, hi).unwrap());
    }

    #[test]
    fn chi2_quantile_inverts_cdf(dof in 1u32..30, p in 0.001f64..0.999) {
        let x = chi2_quantile(dof, p).unwrap();
        prop_assert!((chi2_cdf(dof, x) - p).abs() < 1e-10);
    }
}

#[test]
fn chi2_two_dof_closed_form() {
    for p in [0.5, 0.9, 0.95, 0.99] {
        let exact = -2.0 * (1.0_f64 - p).ln();
        assert!(
            (chi2_quantile(2, p).unwrap() - exact).abs() < 1e-8,
            "p = {p}"
        );
    }
}

#[test]
fn chi2_matches_simpson_integration() {
    for (dof, p) in [(4, 0.99), (4, 0.5), (6, 0.95)] {
        let oracle = tk::chi2_quantile_simpson(dof, p);
        let got = chi2_quantile(dof, p).unwrap();
        assert!(
            (got - oracle).abs() < 1e-6,
            "dof {dof} p {p}: {got} vs {oracle}"
        );
    }
}

#[test]
fn chi2_four_dof_frozen() {
    // Simpson-integration value, frozen once it agreed with the implementation.
    const Q4_99: f64 = 13.276704135987622;
    assert!((chi2_quantile(4, 0.99).unwrap() - Q4_99).abs() < 1e-9);
}
