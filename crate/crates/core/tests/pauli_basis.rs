mod common;

use chi::linalg::{self, c, Mat, ONE, ZERO};
use chi::pauli_basis::*;
use chi::gates;
use proptest::prelude::*;

#[test]
fn single_qubit_basis_matrices() {
    let b = build_basis(1).unwrap();
    let x = Mat::from_row_slice(2, 2, &[ZERO, ONE, ONE, ZERO]);
    let y = Mat::from_row_slice(2, 2, &[ZERO, c(0.0, -1.0), c(0.0, 1.0), ZERO]);
    let z = Mat::from_row_slice(2, 2, &[ONE, ZERO, ZERO, -ONE]);
    assert_eq!(b.operators, vec![linalg::eye(2), x, y, z]);
}

#[test]
fn two_qubit_basis_and_indexing() {
    let b = build_basis(2).unwrap();
    assert_eq!(b.len(), 16);
    assert_eq!(b.operators[0], linalg::eye(4));
    assert_eq!(index_of("ZX").unwrap(), 13);
    assert_eq!(PauliLabel::parse("ZX").unwrap().index(), 13);
    assert_eq!(label(13, 2), "ZX");
    assert!(build_basis(0).is_err());
    assert!(build_basis(5).is_err());
}

#[test]
fn product_examples() {
    assert_eq!(pauli_product(1, 2, 1), (3, c(0.0, 1.0)));
    for n in 0..16 {
        assert_eq!(pauli_product(n, 0, 2), (n, ONE));
    }
    let (k, ph) = pauli_product(index_of("XY").unwrap(), index_of("YX").unwrap(), 2);
    let b = build_basis(2).unwrap();
    let direct = &b.operators[index_of("XY").unwrap()] * &b.operators[index_of("YX").unwrap()];
    assert_eq!(k, index_of("ZZ").unwrap());
    assert_eq!(ph, ONE);
    assert!(linalg::max_abs_diff(&direct, &b.operators[k]) < 1e-15);
}

#[test]
fn products_match_matrix_multiplication() {
    for n_q in 1..=2 {
        let b = build_basis(n_q).unwrap();
        for m in 0..b.len() {
            for n in 0..b.len() {
                let (k, ph) = pauli_product(m, n, n_q);
                let direct = &b.operators[m] * &b.operators[n];
                assert!(linalg::max_abs_diff(&direct, &(&b.operators[k] * ph)) < 1e-15);
            }
            assert_eq!(pauli_product(m, m, n_q), (0, ONE));
        }
    }
}

#[test]
fn hilbert_schmidt_orthogonality() {
    for n_q in 1..=3 {
        let b = build_basis(n_q).unwrap();
        let d = b.dim as f64;
        for (m, em) in b.operators.iter().enumerate() {
            for (n, en) in b.operators.iter().enumerate() {
                let t = linalg::trace(&(em.adjoint() * en));
                let want = if m == n { d } else { 0.0 };
                assert!((t - c(want, 0.0)).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn expansion_examples() {
    let phi: f64 = 0.7;
    let b1 = build_basis(1).unwrap();
    let u = expand_in_pauli(&gates::z_phase(phi), &b1).unwrap();
    let g = c(0.0, phi / 2.0).exp();
    let want = [g * (phi / 2.0).cos(), ZERO, ZERO, g * c(0.0, -(phi / 2.0).sin())];
    for k in 0..4 {
        assert!((u[k] - want[k]).norm() < 1e-15);
    }
    let (fixed, flag) = phase_fix(&u);
    assert!(!flag);
    assert!((fixed[0] - c((phi / 2.0).cos(), 0.0)).norm() < 1e-15);
    assert!((fixed[3] - c(0.0, -(phi / 2.0).sin())).norm() < 1e-15);

    let b2 = build_basis(2).unwrap();
    let id = expand_in_pauli(&linalg::eye(4), &b2).unwrap();
    assert_eq!(id[0], ONE);
    assert!(id.iter().skip(1).all(|z| *z == ZERO));

    let cn = expand_in_pauli(&gates::cnot(), &b2).unwrap();
    for (k, z) in cn.iter().enumerate() {
        let want = match label(k, 2).as_str() {
            "II" | "IX" | "ZI" => 0.5,
            "ZX" => -0.5,
            _ => 0.0,
        };
        assert!((z - c(want, 0.0)).norm() < 1e-15, "{}", label(k, 2));
    }
}

#[test]
fn phase_fix_examples() {
    let v = linalg::Vector::from_vec(vec![ONE, ZERO, ZERO, ZERO]);
    assert_eq!(phase_fix(&v), (v.clone(), false));
    let w = linalg::Vector::from_vec(vec![c(0.0, 0.6), c(0.0, 0.8), ZERO, ZERO]);
    let (f, flag) = phase_fix(&w);
    assert!(!flag);
    assert!((f[0] - c(0.6, 0.0)).norm() < 1e-15 && (f[1] - c(0.8, 0.0)).norm() < 1e-15);
    let tiny = linalg::Vector::from_vec(vec![c(1e-13, 0.0), ONE, ZERO, ZERO]);
    let (same, flag) = phase_fix(&tiny);
    assert!(flag);
    assert_eq!(same, tiny);
}

proptest! {
    #[test]
    fn expansion_round_trip(seed in any::<u64>(), n_q in 1usize..=3) {
        let mut r = common::rng(seed);
        let b = build_basis(n_q).unwrap();
        let m = common::ginibre(&mut r, b.dim);
        let back = reconstruct(&expand_in_pauli(&m, &b).unwrap(), &b);
        prop_assert!(linalg::max_abs_diff(&back, &m) < 1e-12);
    }

    #[test]
    fn involution(n_q in 1usize..=4, idx in any::<usize>()) {
        let m = idx % (1 << (2 * n_q));
        prop_assert_eq!(pauli_product(m, m, n_q), (0, ONE));
    }
}
