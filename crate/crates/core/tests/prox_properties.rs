//! Property tests for the norm and proximal-operator invariants.

use proptest::prelude::*;
use rootpcp::linalg::{frobenius_norm, l1_norm, nuclear_norm, spectral_norm, svd, DenseMatrix};
use rootpcp::prox::{prox_frobenius, prox_l1, prox_nuclear};

fn matrix_strategy(max_dim: usize) -> impl Strategy<Value = DenseMatrix> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        prop::collection::vec(-10.0f64..10.0, r * c)
            .prop_map(move |v| DenseMatrix::from_col_major(r, c, v).unwrap())
    })
}

fn matrix_pair_strategy(max_dim: usize) -> impl Strategy<Value = (DenseMatrix, DenseMatrix)> {
    (1..=max_dim, 1..=max_dim).prop_flat_map(|(r, c)| {
        let cell = -10.0f64..10.0;
        (
            prop::collection::vec(cell.clone(), r * c)
                .prop_map(move |v| DenseMatrix::from_col_major(r, c, v).unwrap()),
            prop::collection::vec(cell, r * c)
                .prop_map(move |v| DenseMatrix::from_col_major(r, c, v).unwrap()),
        )
    })
}

proptest! {
    #[test]
    fn frobenius_norm_is_homogeneous(a in matrix_strategy(6), c in -5.0f64..5.0) {
        let lhs = frobenius_norm(&a.scale(c));
        let rhs = c.abs() * frobenius_norm(&a);
        prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn frobenius_norm_triangle_inequality((a, b) in matrix_pair_strategy(6)) {
        prop_assert!(frobenius_norm(&a.add(&b)) <= frobenius_norm(&a) + frobenius_norm(&b) + 1e-12);
    }

    #[test]
    fn svd_reconstructs_random_matrices(a in matrix_strategy(6)) {
        let f = svd(&a).unwrap();
        let err = frobenius_norm(&a.sub(&f.reconstruct()));
        prop_assert!(err <= 1e-8 * (1.0 + frobenius_norm(&a)));
        prop_assert!(f.singular_values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(f.singular_values.iter().all(|&s| s >= 0.0));
    }

    #[test]
    fn proxes_are_nonexpansive((a, b) in matrix_pair_strategy(5), gamma in 0.0f64..3.0) {
        let d = frobenius_norm(&a.sub(&b));
        let nuc = frobenius_norm(&prox_nuclear(&a, gamma).unwrap().sub(&prox_nuclear(&b, gamma).unwrap()));
        prop_assert!(nuc <= d + 1e-10);
        let l1 = frobenius_norm(&prox_l1(&a, gamma).sub(&prox_l1(&b, gamma)));
        prop_assert!(l1 <= d + 1e-10);
        let fro = frobenius_norm(&prox_frobenius(&a, gamma).sub(&prox_frobenius(&b, gamma)));
        prop_assert!(fro <= d + 1e-10);
    }

    #[test]
    fn prox_outputs_shrink_with_gamma(a in matrix_strategy(5), g1 in 0.0f64..2.0, g2 in 0.0f64..2.0) {
        let (lo, hi) = if g1 <= g2 { (g1, g2) } else { (g2, g1) };
        prop_assert!(
            nuclear_norm(&prox_nuclear(&a, hi).unwrap()).unwrap()
                <= nuclear_norm(&prox_nuclear(&a, lo).unwrap()).unwrap() + 1e-10
        );
        prop_assert!(l1_norm(&prox_l1(&a, hi)) <= l1_norm(&prox_l1(&a, lo)) + 1e-10);
        prop_assert!(
            frobenius_norm(&prox_frobenius(&a, hi))
                <= frobenius_norm(&prox_frobenius(&a, lo)) + 1e-10
        );
    }

    #[test]
    fn spectral_bounded_by_frobenius(a in matrix_strategy(6)) {
        let spec = spectral_norm(&a).unwrap();
        let frob = frobenius_norm(&a);
        let k = a.rows().min(a.cols()) as f64;
        prop_assert!(spec <= frob + 1e-12);
        prop_assert!(frob <= k.sqrt() * spec + 1e-12);
    }
}
