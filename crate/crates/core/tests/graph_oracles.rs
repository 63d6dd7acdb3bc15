mod common;

use common::{dense_kron_sum, dense_laplacian, rng};
use faer::Mat;
use mwgl::graph::{adjoint_on_matrix, laplacian_from_weights, num_pairs, product_weights, validate_laplacian};
use mwgl::WeightVector;
use proptest::prelude::*;
use rand::Rng;

fn weights(max_p: usize) -> impl Strategy<Value = (usize, Vec<f64>)> {
    (2..=max_p).prop_flat_map(|p| (Just(p), prop::collection::vec(0.0..5.0f64, num_pairs(p))))
}

proptest! {
    #[test]
    fn adjoint_identity((p, w) in weights(9), seed in any::<u64>()) {
        let mut r = rng(seed);
        let q = Mat::from_fn(p, p, |_, _| r.random_range(-1.0..1.0));
        let lw = laplacian_from_weights(&WeightVector::new(p, w.clone()).unwrap());
        let lhs: f64 = (0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| lw.as_mat()[(i, j)] * q[(i, j)]).sum();
        let adj = adjoint_on_matrix(q.as_ref()).unwrap();
        let rhs: f64 = w.iter().zip(&adj).map(|(a, b)| a * b).sum();
        prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()).max(1.0));
    }

    #[test]
    fn laplacian_matches_entrywise_construction((p, w) in weights(10)) {
        let l = laplacian_from_weights(&WeightVector::new(p, w.clone()).unwrap());
        let d = dense_laplacian(p, &w);
        for i in 0..p {
            for j in 0..p {
                prop_assert!((l.as_mat()[(i, j)] - d[(i, j)]).abs() <= 1e-12);
            }
        }
        prop_assert!(validate_laplacian(l.as_mat(), 1e-12));
    }

    #[test]
    fn product_weights_give_kronecker_sum((p1, w1) in weights(6), (p2, w2) in weights(6)) {
        let g1 = WeightVector::new(p1, w1.clone()).unwrap();
        let g2 = WeightVector::new(p2, w2.clone()).unwrap();
        let lp = laplacian_from_weights(&product_weights(&g1, &g2));
        let dense = dense_kron_sum(dense_laplacian(p1, &w1).as_ref(), dense_laplacian(p2, &w2).as_ref());
        prop_assert_eq!(lp.dim(), p1 * p2);
        for i in 0..p1 * p2 {
            for j in 0..p1 * p2 {
                prop_assert!((lp.as_mat()[(i, j)] - dense[(i, j)]).abs() <= 1e-12);
            }
        }
    }
}

/// `L*(L e_l)` for every unit vector, against the adjoint formula evaluated by hand.
#[test]
fn adjoint_of_laplacian_on_unit_vectors() {
    for p in 2..=6 {
        let m = num_pairs(p);
        let idx: Vec<(usize, usize)> = (0..p).flat_map(|j| (j + 1..p).map(move |i| (i, j))).collect();
        for l in 0..m {
            let mut e = vec![0.0; m];
            e[l] = 1.0;
            let lw = dense_laplacian(p, &e);
            let got = adjoint_on_matrix(lw.as_ref()).unwrap();
            for (k, &(i, j)) in idx.iter().enumerate() {
                let expected = lw[(i, i)] - lw[(i, j)] - lw[(j, i)] + lw[(j, j)];
                assert_eq!(got[k], expected, "p = {p}, l = {l}, k = {k}");
            }
            assert_eq!(got[l], 4.0);
        }
    }
}
