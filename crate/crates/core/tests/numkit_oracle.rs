mod common;

use ementa::numkit::{kmeans, kmeans_best_of, silhouette, truncated_svd, Clustering, DenseMatrix, DEFAULT_MAX_ITERS};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;

fn random_matrix(rng: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    DenseMatrix::new(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

#[test]
fn svd_matches_symmetric_eigensolver() {
    let mut rng = common::rng(2024);
    let mut projector_checks = 0;
    for case in 0..100u64 {
        let rows = rng.random_range(1..=12);
        let cols = rng.random_range(1..=12);
        let k = rng.random_range(1..=rows.min(cols));
        let m = random_matrix(&mut rng, rows, cols);
        let svd = truncated_svd(&m, k, case).unwrap();
        let want = common::oracle_singular_values(rows, cols, m.as_slice());
        for j in 0..k {
            assert!(
                (svd.singular_values[j] - want[j]).abs() < 1e-8,
                "case {case}: σ{j} {} vs {}",
                svd.singular_values[j],
                want[j]
            );
        }
        let u = DMatrix::from_row_slice(rows, k, svd.u.as_slice());
        let v = DMatrix::from_row_slice(cols, k, svd.v.as_slice());
        assert!((u.transpose() * &u - DMatrix::identity(k, k)).norm() < 1e-8);
        assert!((v.transpose() * &v - DMatrix::identity(k, k)).norm() < 1e-8);
        let dense = DMatrix::from_row_slice(rows, cols, m.as_slice());
        for j in 0..k {
            let resid = &dense * v.column(j) - u.column(j) * svd.singular_values[j];
            assert!(resid.norm() < 1e-8, "case {case}: triplet {j} residual {}", resid.norm());
        }
        let next = want.get(k).copied().unwrap_or(0.0);
        if k < cols && want[k - 1] - next > 1e-4 {
            let p = common::oracle_right_projector(rows, cols, m.as_slice(), k);
            assert!((&v * v.transpose() - p).norm() < 1e-8, "case {case}: subspace differs");
            projector_checks += 1;
        }
        if k == rows.min(cols) {
            let diff = DMatrix::from_row_slice(rows, cols, svd.reconstruct().as_slice()) - dense;
            assert!(diff.norm() < 1e-8);
        }
    }
    assert!(projector_checks >= 50, "only {projector_checks} subspace comparisons ran");
}

fn points_strategy() -> impl Strategy<Value = (DenseMatrix, usize, u64)> {
    (5usize..60, 1usize..5, 1usize..7, any::<u64>()).prop_map(|(n, dim, k, seed)| {
        let mut rng = common::rng(seed);
        (random_matrix(&mut rng, n, dim), k.min(n), seed)
    })
}

fn relabeled(c: &Clustering, perm: &[usize]) -> Clustering {
    let mut out = c.clone();
    out.assignments = c.assignments.iter().map(|&a| perm[a]).collect();
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn inertia_never_increases((pts, k, seed) in points_strategy()) {
        let c = kmeans(&pts, k, seed, DEFAULT_MAX_ITERS).unwrap();
        for w in c.inertia_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{:?}", c.inertia_history);
        }
        prop_assert_eq!(c.inertia_history.last().copied(), Some(c.inertia));
        let one = kmeans_best_of(&pts, k, seed, DEFAULT_MAX_ITERS, 1).unwrap();
        let five = kmeans_best_of(&pts, k, seed, DEFAULT_MAX_ITERS, 5).unwrap();
        prop_assert!(five.inertia <= one.inertia);
    }

    #[test]
    fn silhouette_invariances((pts, k, seed) in points_strategy(), scale in 0.1f64..10.0, shift in -5.0f64..5.0) {
        prop_assume!(k >= 2);
        let c = kmeans(&pts, k, seed, DEFAULT_MAX_ITERS).unwrap();
        let s = silhouette(&pts, &c).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s));
        let moved = DenseMatrix::new(pts.rows(), pts.cols(), pts.as_slice().iter().map(|v| v * scale + shift).collect()).unwrap();
        prop_assert!((silhouette(&moved, &c).unwrap() - s).abs() < 1e-9);
        let perm: Vec<usize> = (0..k).rev().collect();
        prop_assert!((silhouette(&pts, &relabeled(&c, &perm)).unwrap() - s).abs() < 1e-12);
    }
}
