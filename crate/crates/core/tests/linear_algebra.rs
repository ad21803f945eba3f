mod common;

use common::*;
use germflow_core::linalg::blocks;
use germflow_core::{
    kappa, operator_norm, pseudo_inverse, pseudoinverse_identity_residual, submatrix_norm_property, KuoVectors,
    Partition,
};
use rand::Rng;

#[test]
fn pseudo_distance_matches_least_squares_oracle() {
    let mut r = rng(1);
    for _ in 0..200 {
        let p = r.random_range(1..=4);
        let n = r.random_range(2..=8);
        let a = random_matrix(&mut r, p, n);
        let kv = KuoVectors::from_gradients(a.clone());
        let oracle = least_squares_pseudo_distance(&a);
        if p > n {
            assert!(kv.degenerate);
            assert!(oracle <= 1e-12);
            continue;
        }
        let got = kv.pseudo_distance();
        assert!((got - oracle).abs() <= 1e-8 * oracle, "p={p} n={n}: {got} vs {oracle}");
    }
}

#[test]
fn normal_norm_is_determinant_over_cofactor() {
    let mut r = rng(2);
    for _ in 0..200 {
        let p = r.random_range(1..=4);
        let n = r.random_range(p.max(2)..=8);
        let kv = KuoVectors::from_gradients(random_matrix(&mut r, p, n));
        for j in 0..p {
            let expected = kv.determinant / kv.cofactors[(j, j)];
            let got = kv.normals[j].norm_squared();
            assert!((got - expected).abs() <= 1e-8 * expected);
        }
    }
}

#[test]
fn normals_are_orthogonal_to_other_rows() {
    let mut r = rng(3);
    for _ in 0..100 {
        let a = random_matrix(&mut r, 3, 5);
        let kv = KuoVectors::from_gradients(a.clone());
        for (j, nv) in kv.normals.iter().enumerate() {
            for i in (0..3).filter(|&i| i != j) {
                assert!(a.row(i).dot(&nv.transpose()).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn pseudoinverse_columns_are_scaled_normals() {
    let mut r = rng(4);
    for _ in 0..100 {
        let a = random_matrix(&mut r, 3, 6);
        assert!(pseudoinverse_identity_residual(&a).unwrap() <= 1e-9);
    }
}

#[test]
fn kappa_times_pinv_norm_is_one() {
    let mut r = rng(5);
    for _ in 0..200 {
        let p = r.random_range(1..=4);
        let n = r.random_range(p..=8);
        let a = random_matrix(&mut r, p, n);
        let pinv = pseudo_inverse(&a).unwrap().matrix;
        let product = kappa(&a) * power_norm(&pinv);
        assert!((product - 1.0).abs() <= 1e-8, "{product}");
    }
}

#[test]
fn pseudo_inverse_is_a_right_inverse() {
    let mut r = rng(6);
    let a = random_matrix(&mut r, 2, 5);
    let pinv = pseudo_inverse(&a).unwrap().matrix;
    assert!((&a * &pinv - nalgebra::DMatrix::identity(2, 2)).norm() <= 1e-12);
}

#[test]
fn blocks_never_exceed_the_whole() {
    let mut r = rng(7);
    for _ in 0..1000 {
        let rows = r.random_range(1..=6);
        let cols = r.random_range(1..=6);
        let a = random_matrix(&mut r, rows, cols);
        let part = Partition { row_split: r.random_range(0..=rows), col_split: r.random_range(0..=cols) };
        assert!(submatrix_norm_property(&a, part));
        let whole = power_norm(&a);
        for b in blocks(&a, part) {
            assert!(power_norm(&b) <= whole + 1e-9);
        }
    }
}

#[test]
fn operator_norm_agrees_with_power_iteration() {
    let mut r = rng(8);
    for _ in 0..50 {
        let a = random_matrix(&mut r, 4, 3);
        assert!((operator_norm(&a) - power_norm(&a)).abs() <= 1e-9);
    }
}
