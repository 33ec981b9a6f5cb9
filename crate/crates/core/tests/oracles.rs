use hyperstab_core::fitting::DEFAULT_TOL_RANK;
use hyperstab_core::{derivation_nullspace_dim, jordan_triple_nullspace_dim, AlgebraDescriptor, ScalarField};

#[test]
fn nullspace_dimensions_match_inner_derivations() {
    for n in 2..=3usize {
        let alg = AlgebraDescriptor::full_matrix(n, ScalarField::Real).unwrap();
        let pairs = 3 * n.pow(4);
        for r in [
            jordan_triple_nullspace_dim(&alg, pairs, 11, DEFAULT_TOL_RANK).unwrap(),
            derivation_nullspace_dim(&alg, pairs, 11, DEFAULT_TOL_RANK).unwrap(),
        ] {
            assert_eq!(r.dimension, n * n - 1);
            assert!(r.singular_value_gap >= 1e6 * r.threshold, "{r:?}");
            assert!(!r.inconclusive);
        }
    }
}

#[test]
fn nullspace_rejects_unsupported_inputs() {
    let ut = AlgebraDescriptor::upper_triangular(2, ScalarField::Real).unwrap();
    assert!(jordan_triple_nullspace_dim(&ut, 48, 0, DEFAULT_TOL_RANK).is_err());
    let big = AlgebraDescriptor::full_matrix(5, ScalarField::Real).unwrap();
    assert!(jordan_triple_nullspace_dim(&big, 3 * 625, 0, DEFAULT_TOL_RANK).is_err());
}
