//! Small dense linear algebra: normal-equation pseudoinverse, κ, operator norms.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct PseudoInverse {
    pub matrix: DMatrix<f64>,
    /// σ_max / σ_min of the input.
    pub condition_number: f64,
}

fn singular_values(a: &DMatrix<f64>) -> Vec<f64> {
    if a.is_empty() {
        return Vec::new();
    }
    a.singular_values().iter().copied().collect()
}

fn rank_tol(a: &DMatrix<f64>, smax: f64) -> f64 {
    f64::EPSILON * a.nrows().max(a.ncols()) as f64 * smax
}

/// A⁺ = Aᵀ(AAᵀ)⁻¹ for a p×m matrix of full row rank, via a Cholesky solve of the Gram matrix.
pub fn pseudo_inverse(a: &DMatrix<f64>) -> Result<PseudoInverse> {
    let sv = singular_values(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = if a.nrows() > a.ncols() { 0.0 } else { sv.iter().copied().fold(f64::INFINITY, f64::min) };
    if a.nrows() == 0 || smin <= rank_tol(a, smax) {
        return Err(Error::RankDeficient { smallest_singular: if smin.is_finite() { smin } else { 0.0 } });
    }
    let gram = a * a.transpose();
    let chol = gram.cholesky().ok_or(Error::RankDeficient { smallest_singular: smin })?;
    let inv = chol.inverse();
    Ok(PseudoInverse { matrix: a.transpose() * inv, condition_number: smax / smin })
}

/// inf over unit α of ‖αᵀA‖; zero when the rows are dependent.
pub fn kappa(a: &DMatrix<f64>) -> f64 {
    if a.nrows() > a.ncols() || a.nrows() == 0 {
        return 0.0;
    }
    let sv = singular_values(a);
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin <= rank_tol(a, smax) {
        0.0
    } else {
        smin
    }
}

pub fn operator_norm(a: &DMatrix<f64>) -> f64 {
    singular_values(a).into_iter().fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct Partition {
    pub row_split: usize,
    pub col_split: usize,
}

/// The four blocks cut out by a row split and a column split.
pub fn blocks(a: &DMatrix<f64>, part: Partition) -> Vec<DMatrix<f64>> {
    let (r, c) = (part.row_split.min(a.nrows()), part.col_split.min(a.ncols()));
    let (nr, nc) = (a.nrows() - r, a.ncols() - c);
    vec![
        a.view((0, 0), (r, c)).into_owned(),
        a.view((0, c), (r, nc)).into_owned(),
        a.view((r, 0), (nr, c)).into_owned(),
        a.view((r, c), (nr, nc)).into_owned(),
    ]
}

/// True iff every block has operator norm at most ‖A‖ + 1e-12.
pub fn submatrix_norm_property(a: &DMatrix<f64>, part: Partition) -> bool {
    let whole = operator_norm(a);
    blocks(a, part).iter().all(|b| operator_norm(b) <= whole + 1e-12)
}

/// Minimum-norm least-squares solution of J z = r.
pub(crate) fn min_norm_solve(j: &DMatrix<f64>, r: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = j.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 {
        return None;
    }
    svd.solve(r, 1e-13 * smax).ok()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pinv_examples() {
        let i = DMatrix::<f64>::identity(3, 3);
        assert_relative_eq!(pseudo_inverse(&i).unwrap().matrix, i, epsilon = 1e-15);
        let row = DMatrix::from_row_slice(1, 2, &[3.0, 4.0]);
        let p = pseudo_inverse(&row).unwrap();
        assert_relative_eq!(p.matrix, DMatrix::from_row_slice(2, 1, &[3.0 / 25.0, 4.0 / 25.0]), epsilon = 1e-15);
        let dup = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]);
        assert!(matches!(pseudo_inverse(&dup), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn kappa_examples() {
        assert_relative_eq!(kappa(&DMatrix::identity(2, 2)), 1.0, epsilon = 1e-15);
        assert_relative_eq!(kappa(&DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, 3.0]))), 2.0, epsilon = 1e-14);
        assert_eq!(kappa(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0])), 0.0);
        assert_eq!(kappa(&DMatrix::from_row_slice(2, 1, &[1.0, 2.0])), 0.0);
    }

    #[test]
    fn blocks_of_identity() {
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(submatrix_norm_property(&i, Partition { row_split: 1, col_split: 1 }));
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -7.0, 0.5, 2.0]);
        let b = blocks(&a, Partition { row_split: 1, col_split: 1 });
        assert!(b[1][(0, 0)].abs() <= operator_norm(&a));
    }
}
