#![allow(dead_code)]

use germflow_core::{parse_germ_spec, GermSpec, HomotopyProblem, HornSpec, MetricChoice};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const PITCHFORK: &str = "\
dims 1 1 1
group source -1
group target -1
map 1 1 3 0
map 1 -1 1 1
";

pub fn spec(text: &str) -> GermSpec {
    parse_germ_spec(text).expect("valid spec")
}

pub fn pitchfork() -> GermSpec {
    spec(PITCHFORK)
}

/// Pitchfork with perturbation `coeff·x^power`.
pub fn pitchfork_problem(power: u32, coeff: f64) -> HomotopyProblem {
    let base = pitchfork();
    let pert = spec(&format!("dims 1 1 1\nmap 1 {coeff} {power} 0\n")).germ;
    HomotopyProblem::new(
        base.germ,
        pert,
        base.weights,
        base.sigma,
        HornSpec::new(3.0, 0.5, 0.5).unwrap(),
        base.group,
        MetricChoice::Auto,
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Distance of row j from the span of the other rows, by an SVD least-squares solve.
pub fn row_residual(a: &DMatrix<f64>, j: usize) -> f64 {
    let target: DVector<f64> = a.row(j).transpose();
    if a.nrows() == 1 {
        return target.norm();
    }
    let others = a.clone().remove_row(j).transpose();
    let coeffs = others.clone().svd(true, true).solve(&target, 1e-14).unwrap();
    (target - others * coeffs).norm()
}

pub fn least_squares_pseudo_distance(a: &DMatrix<f64>) -> f64 {
    (0..a.nrows()).map(|j| row_residual(a, j)).fold(f64::INFINITY, f64::min)
}

/// Largest singular value by power iteration on AᵀA.
pub fn power_norm(a: &DMatrix<f64>) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ata = a.transpose() * a;
    let mut v = DVector::from_fn(a.ncols(), |i, _| 1.0 + 0.1 * i as f64);
    let mut lambda = 0.0;
    for _ in 0..2000 {
        let w = &ata * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / n;
        lambda = n;
    }
    lambda.sqrt()
}
