mod common;

use ementa::metrics::{evaluate_all, hamming_accuracy, subset_accuracy, LabelMatrix};
use proptest::prelude::*;

fn matrix(rows: &[Vec<bool>]) -> LabelMatrix {
    let m = rows[0].len();
    LabelMatrix::from_bools(rows.len(), m, rows.concat()).unwrap()
}

#[test]
fn matches_brute_force_on_random_instances() {
    let mut rng = common::rng(11);
    for _ in 0..200 {
        let (g, p) = common::random_pair(&mut rng, 20, 10);
        let got = evaluate_all(&matrix(&g), &matrix(&p)).unwrap().values();
        let want = common::brute_force_metrics(&g, &p);
        for (a, b) in got.iter().zip(want) {
            assert!((a - b).abs() <= 1e-12, "{got:?} vs {want:?}");
        }
    }
}

fn pair() -> impl Strategy<Value = (Vec<Vec<bool>>, Vec<Vec<bool>>)> {
    (1usize..12, 1usize..8).prop_flat_map(|(n, m)| {
        let rows = prop::collection::vec(prop::collection::vec(any::<bool>(), m), n);
        (rows.clone(), rows)
    })
}

proptest! {
    #[test]
    fn values_are_bounded_and_subset_below_hamming((g, p) in pair()) {
        let (g, p) = (matrix(&g), matrix(&p));
        let r = evaluate_all(&g, &p).unwrap();
        prop_assert!(r.values().iter().all(|v| (0.0..=1.0).contains(v)));
        prop_assert!(subset_accuracy(&g, &p).unwrap() <= hamming_accuracy(&g, &p).unwrap());
    }

    #[test]
    fn label_permutation_invariance((g, p) in pair(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let m = g[0].len();
        let mut perm: Vec<usize> = (0..m).collect();
        perm.shuffle(&mut common::rng(seed));
        let permute = |rows: &[Vec<bool>]| -> Vec<Vec<bool>> {
            rows.iter().map(|r| perm.iter().map(|&j| r[j]).collect()).collect()
        };
        let a = evaluate_all(&matrix(&g), &matrix(&p)).unwrap().values();
        let b = evaluate_all(&matrix(&permute(&g)), &matrix(&permute(&p))).unwrap().values();
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn document_permutation_invariance((g, p) in pair(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut perm: Vec<usize> = (0..g.len()).collect();
        perm.shuffle(&mut common::rng(seed));
        let gp: Vec<Vec<bool>> = perm.iter().map(|&i| g[i].clone()).collect();
        let pp: Vec<Vec<bool>> = perm.iter().map(|&i| p[i].clone()).collect();
        let a = evaluate_all(&matrix(&g), &matrix(&p)).unwrap().values();
        let b = evaluate_all(&matrix(&gp), &matrix(&pp)).unwrap().values();
        for (x, y) in a.iter().zip(b) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn identical_matrices_have_full_accuracy((g, _) in pair()) {
        let g = matrix(&g);
        prop_assert_eq!(hamming_accuracy(&g, &g).unwrap(), 1.0);
        prop_assert_eq!(subset_accuracy(&g, &g).unwrap(), 1.0);
    }
}
