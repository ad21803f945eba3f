//! Kuo pseudo-distance and the relative Kuo condition.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germ::MapGerm;
use crate::horn::{sample_horn, HornSpec};
use crate::linalg::{min_norm_solve, pseudo_inverse};
use crate::rng;
use crate::sigma::SigmaSet;
use crate::weights::WeightSystem;

/// Relative determinant below which a Gram matrix counts as singular.
pub const GRAM_DEGENERACY: f64 = 1e-14;

/// How state-space gradients are measured.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KuoMetric {
    /// Frame vectors ρ^{ω_j}∂/∂x_j of the singular metric.
    Weighted,
    /// Plain Euclidean gradients.
    Euclidean,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricChoice {
    /// Euclidean when every weight is 1, weighted otherwise.
    #[default]
    Auto,
    Weighted,
    Euclidean,
}

impl MetricChoice {
    pub fn resolve(self, weights: &WeightSystem) -> KuoMetric {
        match self {
            MetricChoice::Auto if weights.is_uniform() => KuoMetric::Euclidean,
            MetricChoice::Auto | MetricChoice::Weighted => KuoMetric::Weighted,
            MetricChoice::Euclidean => KuoMetric::Euclidean,
        }
    }
}

/// Per-coordinate factors turning ∂/∂x_j into the metric's orthonormal frame.
pub fn frame(metric: KuoMetric, weights: &WeightSystem, u: &[f64], n: usize) -> Vec<f64> {
    match metric {
        KuoMetric::Euclidean => vec![1.0; n],
        KuoMetric::Weighted => {
            let rho = weights.rho(u);
            weights.weights()[..n].iter().map(|&w| rho.powi(w as i32)).collect()
        }
    }
}

/// Rows ρ^{ω_j}·∂F_i/∂x_j (or the Euclidean gradients).
pub fn gradient_matrix(germ: &MapGerm, metric: KuoMetric, weights: &WeightSystem, u: &[f64]) -> DMatrix<f64> {
    let mut d = germ.grad_x(u);
    let fr = frame(metric, weights, u, germ.n());
    for j in 0..germ.n() {
        d.column_mut(j).scale_mut(fr[j]);
    }
    d
}

/// Coefficients (ρ^{ω_1}∂g/∂x_1, …, ρ^{ω_n}∂g/∂x_n) of the weighted gradient of one component.
pub fn weighted_gradient_x(germ: &MapGerm, component: usize, weights: &WeightSystem, u: &[f64]) -> Vec<f64> {
    gradient_matrix(germ, KuoMetric::Weighted, weights, u).row(component).iter().copied().collect()
}

#[derive(Clone, Debug)]
pub struct KuoVectors {
    pub gradients: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub cofactors: DMatrix<f64>,
    pub determinant: f64,
    /// N(f,j,u) for each j; empty when degenerate.
    pub normals: Vec<DVector<f64>>,
    pub degenerate: bool,
}

impl KuoVectors {
    /// Builds the Kuo vectors from a p×n gradient matrix (one gradient per row).
    pub fn from_gradients(gradients: DMatrix<f64>) -> Self {
        let p = gradients.nrows();
        let gram = &gradients * gradients.transpose();
        let determinant = gram.clone().determinant();
        let cofactors = if p == 1 {
            DMatrix::from_element(1, 1, 1.0)
        } else {
            DMatrix::from_fn(p, p, |i, j| {
                let minor = gram.clone().remove_row(i).remove_column(j);
                let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
                sign * minor.determinant()
            })
        };
        let hadamard: f64 = (0..p).map(|i| gram[(i, i)]).product();
        let degenerate = !(hadamard > 0.0) || !(determinant > GRAM_DEGENERACY * hadamard);
        let normals = if degenerate {
            Vec::new()
        } else {
            (0..p)
                .map(|j| {
                    let mut v = DVector::zeros(gradients.ncols());
                    for i in 0..p {
                        v += gradients.row(i).transpose() * (cofactors[(j, i)] / cofactors[(j, j)]);
                    }
                    v
                })
                .collect()
        };
        Self { gradients, gram, cofactors, determinant, normals, degenerate }
    }

    pub fn pseudo_distance(&self) -> f64 {
        if self.degenerate {
            return 0.0;
        }
        self.normals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min)
    }
}

pub fn kuo_vectors(germ: &MapGerm, weights: &WeightSystem, u: &[f64]) -> KuoVectors {
    KuoVectors::from_gradients(gradient_matrix(germ, KuoMetric::Weighted, weights, u))
}

/// d_{ω,x}∇f at u for the weighted metric.
pub fn kuo_pseudo_distance(germ: &MapGerm, weights: &WeightSystem, u: &[f64]) -> f64 {
    kuo_vectors(germ, weights, u).pseudo_distance()
}

pub fn pseudo_distance_with(germ: &MapGerm, metric: KuoMetric, weights: &WeightSystem, u: &[f64]) -> f64 {
    KuoVectors::from_gradients(gradient_matrix(germ, metric, weights, u)).pseudo_distance()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    HoldsEmpirically,
    FailsWithWitness,
    Indeterminate,
}

impl Verdict {
    pub fn holds(self) -> bool {
        self == Verdict::HoldsEmpirically
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KuoCheck {
    pub delta: f64,
    pub horn: HornSpec,
    pub samples: usize,
    pub seed: u64,
    /// C_min.
    pub floor: f64,
    pub slope_slack: f64,
    pub metric: MetricChoice,
}

impl KuoCheck {
    pub fn new(delta: f64, horn: HornSpec, samples: usize, seed: u64) -> Self {
        Self { delta, horn, samples, seed, floor: 1e-6, slope_slack: 0.1, metric: MetricChoice::Auto }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KuoWitness {
    pub point: Vec<f64>,
    pub distance: f64,
    pub pseudo_distance: f64,
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KuoCertificate {
    pub r: f64,
    pub delta: f64,
    pub width: f64,
    pub radius: f64,
    pub metric: KuoMetric,
    pub samples_requested: usize,
    pub samples_used: usize,
    pub proposals: usize,
    pub acceptance_ratio: f64,
    pub min_margin: f64,
    pub fitted_exponent: f64,
    pub required_exponent: f64,
    pub floor: f64,
    /// Sample with the smallest margin; the witness when the verdict fails.
    pub worst: Option<KuoWitness>,
    pub verdict: Verdict,
    pub diagnostic: Option<String>,
}

/// Least-squares slope of y against x.
pub(crate) fn fit_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    if points.len() < 2 {
        return f64::NAN;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx == 0.0 {
        f64::NAN
    } else {
        sxy / sxx
    }
}

pub fn check_kuo_condition(germ: &MapGerm, sigma: &SigmaSet, weights: &WeightSystem, cfg: &KuoCheck) -> KuoCertificate {
    let metric = cfg.metric.resolve(weights);
    let r = cfg.horn.degree;
    let set = sample_horn(germ, &cfg.horn, sigma, weights, cfg.samples, cfg.seed);
    let evaluated: Vec<KuoWitness> = set
        .samples
        .par_iter()
        .filter(|s| s.distance > 0.0)
        .map(|s| {
            let dk = pseudo_distance_with(germ, metric, weights, &s.point);
            KuoWitness { point: s.point.clone(), distance: s.distance, pseudo_distance: dk, margin: dk / s.distance.powf(r - cfg.delta) }
        })
        .collect();

    let mut worst: Option<&KuoWitness> = None;
    for w in &evaluated {
        if worst.is_none_or(|b| w.margin < b.margin) {
            worst = Some(w);
        }
    }
    let log_pts: Vec<(f64, f64)> =
        evaluated.iter().filter(|w| w.pseudo_distance > 0.0).map(|w| (w.distance.ln(), w.pseudo_distance.ln())).collect();
    let fitted_exponent = fit_slope(&log_pts);
    let required_exponent = r - cfg.delta - cfg.slope_slack;
    let min_margin = worst.map_or(f64::NAN, |w| w.margin);

    let (verdict, diagnostic) = if evaluated.is_empty() {
        (Verdict::Indeterminate, Some(set.diagnostic.unwrap_or_else(|| "no horn samples off sigma".into())))
    } else if min_margin >= cfg.floor && fitted_exponent >= required_exponent {
        (Verdict::HoldsEmpirically, None)
    } else {
        let why = if min_margin < cfg.floor {
            format!("margin {min_margin:.3e} below floor {:.1e}", cfg.floor)
        } else {
            format!("fitted exponent {fitted_exponent:.4} below {required_exponent:.4}")
        };
        (Verdict::FailsWithWitness, Some(why))
    };

    KuoCertificate {
        r,
        delta: cfg.delta,
        width: cfg.horn.width,
        radius: cfg.horn.radius,
        metric,
        samples_requested: cfg.samples,
        samples_used: evaluated.len(),
        proposals: set.proposals,
        acceptance_ratio: set.acceptance_ratio,
        min_margin,
        fitted_exponent,
        required_exponent,
        floor: cfg.floor,
        worst: worst.cloned(),
        verdict,
        diagnostic,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RankReport {
    pub full_rank: bool,
    pub samples: usize,
    /// Smallest relative singular value seen.
    pub min_relative_singular: f64,
    pub witness: Option<Vec<f64>>,
}

const RANK_TOL: f64 = 1e-10;

fn relative_smin(germ: &MapGerm, u: &[f64]) -> f64 {
    let a = germ.grad_x(u);
    if germ.p() > germ.n() {
        return 0.0;
    }
    let smin = a.singular_values().iter().copied().fold(f64::INFINITY, f64::min);
    let scale = 1.0 + germ.grad_u(u).singular_values().iter().copied().fold(0.0, f64::max);
    smin / scale
}

/// Searches V ∖ Σ×ℝˡ for points where ∇ₓG loses rank: random points in the ball, each
/// refined by Gauss–Newton on αᵀ∇ₓG(u) = 0, ‖α‖ = 1.
pub fn check_rank_condition(germ: &MapGerm, sigma: &SigmaSet, radius: f64, samples: usize, seed: u64) -> RankReport {
    let (n, p, dim) = (germ.n(), germ.p(), germ.dim());
    let second: Vec<Vec<Vec<_>>> =
        (0..p).map(|i| (0..n).map(|j| (0..dim).map(|k| germ.partial(i, j).derivative(k)).collect()).collect()).collect();
    let off_sigma = |u: &[f64]| sigma.euclidean_distance(u) > 1e-8 * radius && rng::norm(u) < radius;

    let results: Vec<(f64, Option<Vec<f64>>)> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let dir = rng::unit_vec(&mut r, dim);
            let rad = radius * r.random::<f64>().powf(1.0 / dim as f64);
            let u0: Vec<f64> = dir.iter().map(|x| x * rad).collect();
            let mut best = relative_smin(germ, &u0);
            if best <= RANK_TOL && off_sigma(&u0) {
                return (best, Some(u0));
            }
            if p > n {
                return (best, None);
            }
            // refine
            let a0 = germ.grad_x(&u0);
            let svd = a0.svd(true, false);
            let imin = (0..svd.singular_values.len())
                .min_by(|&a, &b| svd.singular_values[a].total_cmp(&svd.singular_values[b]))
                .unwrap_or(0);
            let mut alpha: DVector<f64> = svd.u.as_ref().unwrap().column(imin).into_owned();
            let mut u = u0;
            for _ in 0..30 {
                let a = germ.grad_x(&u);
                let mut res = DVector::zeros(n + 1);
                let mut jac = DMatrix::zeros(n + 1, dim + p);
                for j in 0..n {
                    res[j] = (0..p).map(|i| alpha[i] * a[(i, j)]).sum();
                    for kk in 0..dim {
                        jac[(j, kk)] = (0..p).map(|i| alpha[i] * second[i][j][kk].eval(&u)).sum();
                    }
                    for i in 0..p {
                        jac[(j, dim + i)] = a[(i, j)];
                    }
                }
                res[n] = 0.5 * (alpha.norm_squared() - 1.0);
                for i in 0..p {
                    jac[(n, dim + i)] = alpha[i];
                }
                let Some(step) = min_norm_solve(&jac, &res) else { break };
                for kk in 0..dim {
                    u[kk] -= step[kk];
                }
                for i in 0..p {
                    alpha[i] -= step[dim + i];
                }
                if !u.iter().all(|x| x.is_finite()) || step.norm() < 1e-16 {
                    break;
                }
            }
            if u.iter().all(|x| x.is_finite()) && off_sigma(&u) {
                let s = relative_smin(germ, &u);
                best = best.min(s);
                if s <= RANK_TOL {
                    return (best, Some(u));
                }
            }
            (best, None)
        })
        .collect();

    let min_relative_singular = results.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let witness = results.into_iter().find_map(|r| r.1);
    RankReport { full_rank: witness.is_none(), samples, min_relative_singular, witness }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbedMargin {
    pub perturbed: f64,
    pub base: f64,
    pub ratio: f64,
}

/// Pseudo-distances of F = f + t·p and of f at u.
pub fn perturbed_margin(
    f: &MapGerm,
    pert: &MapGerm,
    t: f64,
    metric: KuoMetric,
    weights: &WeightSystem,
    u: &[f64],
) -> Result<PerturbedMargin> {
    let big = f.add_scaled(pert, t)?;
    let perturbed = pseudo_distance_with(&big, metric, weights, u);
    let base = pseudo_distance_with(f, metric, weights, u);
    let ratio = if base == 0.0 {
        if perturbed == 0.0 { 1.0 } else { f64::INFINITY }
    } else {
        perturbed / base
    };
    Ok(PerturbedMargin { perturbed, base, ratio })
}

/// max_j ‖N_j/‖N_j‖² − column_j(D⁺)‖ / ‖column_j(D⁺)‖ for a gradient matrix D.
pub fn pseudoinverse_identity_residual(gradients: &DMatrix<f64>) -> Result<f64> {
    let kv = KuoVectors::from_gradients(gradients.clone());
    if kv.degenerate {
        return Err(Error::DegenerateGram { point: Vec::new() });
    }
    let pinv = pseudo_inverse(gradients)?.matrix;
    Ok(kv
        .normals
        .iter()
        .enumerate()
        .map(|(j, nv)| (nv / nv.norm_squared() - pinv.column(j)).norm() / pinv.column(j).norm())
        .fold(0.0, f64::max))
}

pub fn pseudoinverse_identity_check(germ: &MapGerm, weights: &WeightSystem, u: &[f64]) -> Result<f64> {
    pseudoinverse_identity_residual(&gradient_matrix(germ, KuoMetric::Weighted, weights, u)).map_err(|e| match e {
        Error::DegenerateGram { .. } => Error::DegenerateGram { point: u.to_vec() },
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::poly::{Monomial, Polynomial};
    use approx::assert_relative_eq;

    fn pitchfork() -> MapGerm {
        MapGerm::new(
            1,
            1,
            1,
            vec![Polynomial::new(
                2,
                [Monomial { exponents: vec![3, 0], coefficient: 1.0 }, Monomial { exponents: vec![1, 1], coefficient: -1.0 }],
            )],
        )
        .unwrap()
    }

    fn two_gradients() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 1.0, 1.0])
    }

    #[test]
    fn hand_gram_schmidt() {
        let kv = KuoVectors::from_gradients(two_gradients());
        assert!(!kv.degenerate);
        assert_relative_eq!(kv.normals[0].norm(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(kv.normals[1].norm(), 1.0, epsilon = 1e-15);
        assert_relative_eq!(kv.pseudo_distance(), 0.5f64.sqrt(), epsilon = 1e-15);
        assert!(pseudoinverse_identity_residual(&two_gradients()).unwrap() <= 1e-12);
    }

    #[test]
    fn dependent_gradients() {
        let kv = KuoVectors::from_gradients(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 1.0, 2.0]));
        assert!(kv.degenerate);
        assert_eq!(kv.pseudo_distance(), 0.0);
    }

    #[test]
    fn single_component_is_gradient() {
        let kv = KuoVectors::from_gradients(DMatrix::from_row_slice(1, 3, &[1.0, -2.0, 0.5]));
        assert_eq!(kv.normals[0].as_slice(), &[1.0, -2.0, 0.5]);
    }

    #[test]
    fn pitchfork_weighted_gradient() {
        let f = pitchfork();
        let w = WeightSystem::uniform(2);
        let g = weighted_gradient_x(&f, 0, &w, &[1.0, 1.0]);
        assert_relative_eq!(g[0], 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert_relative_eq!(kuo_pseudo_distance(&f, &w, &[1.0, 1.0]), 2.0 * 2f64.sqrt(), epsilon = 1e-15);
        assert_eq!(MetricChoice::Auto.resolve(&w), KuoMetric::Euclidean);
        assert_eq!(MetricChoice::Auto.resolve(&WeightSystem::new(vec![1, 2]).unwrap()), KuoMetric::Weighted);
    }

    #[test]
    fn perturbed_margin_examples() {
        let f = pitchfork();
        let x5 = MapGerm::new(1, 1, 1, vec![Polynomial::monomial(2, 1.0, vec![5, 0])]).unwrap();
        let w = WeightSystem::uniform(2);
        let m = perturbed_margin(&f, &x5, 0.0, KuoMetric::Weighted, &w, &[0.1, 0.01]).unwrap();
        assert_eq!(m.ratio, 1.0);
        let m = perturbed_margin(&f, &x5, 1.0, KuoMetric::Weighted, &w, &[0.1, 0.01]).unwrap();
        assert!((0.9..=1.1).contains(&m.ratio));
        let m = perturbed_margin(&f, &MapGerm::zero(1, 1, 1), 0.7, KuoMetric::Weighted, &w, &[0.1, 0.01]).unwrap();
        assert_eq!(m.ratio, 1.0);
    }

    #[test]
    fn slope_of_line() {
        let pts: Vec<(f64, f64)> = (0..10).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        assert_relative_eq!(fit_slope(&pts), 2.0, epsilon = 1e-14);
    }
}
