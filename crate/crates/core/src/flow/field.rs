use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::HomotopyProblem;
use crate::error::{Error, Result};
use crate::horn::sample_horn;
use crate::kuo::{frame, KuoMetric, GRAM_DEGENERACY};
use crate::rng;

/// Coordinate velocity of the x-block of the Kuo field plus the orthogonality residual
/// max_j |∇ₓF_j·v + p_j|.
pub(crate) fn kuo_velocity(problem: &HomotopyProblem, u: &[f64], t: f64) -> Result<(Vec<f64>, f64)> {
    let n = problem.n();
    let grad = problem.grad_x(u, t);
    let fr = frame(problem.metric, &problem.weights, u, n);
    let mut d = grad.clone();
    for j in 0..n {
        d.column_mut(j).scale_mut(fr[j]);
    }
    let gram = &d * d.transpose();
    let hadamard: f64 = (0..gram.nrows()).map(|i| gram[(i, i)]).product();
    let degenerate = || Error::DegenerateGram { point: u.to_vec() };
    if !(hadamard > 0.0) {
        return Err(degenerate());
    }
    let chol = gram.clone().cholesky().ok_or_else(degenerate)?;
    let det: f64 = chol.l_dirty().diagonal().iter().map(|x| x * x).product();
    if !(det > GRAM_DEGENERACY * hadamard) {
        return Err(degenerate());
    }
    let p = DVector::from_vec(problem.pert.value(u));
    let c = d.transpose() * chol.solve(&p);
    let v: Vec<f64> = (0..n).map(|j| -fr[j] * c[j]).collect();
    let vv = DVector::from_column_slice(&v);
    let orth = (&grad * vv + &p).amax();
    Ok((v, orth))
}

/// X₁ = (v, 0_l, 1) with ∇ₓF_j·v = −p_j.
pub fn kuo_vector_field(problem: &HomotopyProblem, u: &[f64], t: f64) -> Result<Vec<f64>> {
    let (v, _) = kuo_velocity(problem, u, t)?;
    let mut x = v;
    x.extend(std::iter::repeat_n(0.0, problem.base.l()));
    x.push(1.0);
    Ok(x)
}

fn mollifier(t: f64) -> f64 {
    if t > 0.0 {
        (-1.0 / (t * t)).exp()
    } else {
        0.0
    }
}

/// β(s): 1 for s ≤ 1/2, 0 for s ≥ 1, smooth and decreasing in between.
pub fn bump_profile(s: f64) -> f64 {
    let a = mollifier(1.0 - s);
    let b = mollifier(s - 0.5);
    if a + b == 0.0 {
        return 0.0;
    }
    a / (a + b)
}

/// χ(u) = β(‖f(u)‖ / (w̄·d_ω(x,Σ)^r)).
pub fn bump_chi(problem: &HomotopyProblem, u: &[f64]) -> f64 {
    let fnorm = rng::norm(&problem.base.value(u));
    let d = problem.sigma.distance(&problem.weights, u);
    if fnorm == 0.0 {
        return 1.0;
    }
    let bound = problem.horn.width * d.powf(problem.horn.degree);
    if bound == 0.0 {
        return 0.0;
    }
    bump_profile(fnorm / bound)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldEval {
    /// (ẋ, λ̇ = 0, ṫ = 1).
    pub field: Vec<f64>,
    pub chi: f64,
    /// Orthogonality residual of X₁; zero where X₁ is not used.
    pub orth_residual: f64,
    pub kuo_violation: bool,
}

/// Velocity of the x-block of X = χX₁ + (1−χ)∂/∂t; `Err` when the Gram matrix is singular
/// inside the support of χ.
pub(crate) fn state_velocity(problem: &HomotopyProblem, u: &[f64], t: f64) -> std::result::Result<(Vec<f64>, f64, f64), ()> {
    let n = problem.n();
    if problem.sigma.contains(u) {
        return Ok((vec![0.0; n], bump_chi(problem, u), 0.0));
    }
    let chi = bump_chi(problem, u);
    if chi == 0.0 {
        return Ok((vec![0.0; n], 0.0, 0.0));
    }
    match kuo_velocity(problem, u, t) {
        Ok((v, orth)) => Ok((v.into_iter().map(|x| chi * x).collect(), chi, orth)),
        Err(_) => Err(()),
    }
}

pub fn extended_field(problem: &HomotopyProblem, u: &[f64], t: f64) -> FieldEval {
    let (v, chi, orth_residual, kuo_violation) = match state_velocity(problem, u, t) {
        Ok((v, chi, orth)) => (v, chi, orth, false),
        Err(()) => (vec![0.0; problem.n()], bump_chi(problem, u), 0.0, true),
    };
    let mut field = v;
    field.extend(std::iter::repeat_n(0.0, problem.base.l()));
    field.push(1.0);
    FieldEval { field, chi, orth_residual, kuo_violation }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FieldBound {
    /// sup over samples of max_i |ẋ_i| / d_ω^{ω_i}.
    pub componentwise: f64,
    /// sup over samples of ‖X − ∂/∂t‖ / d_ω in the metric used by the field.
    pub metric_ratio: f64,
    pub samples: usize,
    pub violations: usize,
}

/// Samples the w̄-horn of f at random t ∈ [0, 1] and records how fast the field moves
/// relative to the distance to Σ.
pub fn field_bound(problem: &HomotopyProblem, samples: usize, seed: u64) -> FieldBound {
    let set = sample_horn(&problem.base, &problem.horn, &problem.sigma, &problem.weights, samples, seed);
    let n = problem.n();
    let w = problem.weights.weights();
    let per: Vec<Option<(f64, f64)>> = set
        .samples
        .par_iter()
        .enumerate()
        .map(|(k, s)| {
            if s.distance == 0.0 {
                return Some((0.0, 0.0));
            }
            let t = rng::stream(seed ^ 0x5eed, k as u64).random::<f64>();
            let (v, _, _) = state_velocity(problem, &s.point, t).ok()?;
            let comp = (0..n).map(|i| v[i].abs() / s.distance.powi(w[i] as i32)).fold(0.0, f64::max);
            let metric = match problem.metric {
                KuoMetric::Euclidean => rng::norm(&v),
                KuoMetric::Weighted => {
                    let rho = problem.weights.rho(&s.point);
                    (0..n).map(|i| (v[i] / rho.powi(w[i] as i32)).powi(2)).sum::<f64>().sqrt()
                }
            };
            Some((comp, metric / s.distance))
        })
        .collect();
    let violations = per.iter().filter(|x| x.is_none()).count();
    let (componentwise, metric_ratio) =
        per.iter().flatten().fold((0.0f64, 0.0f64), |(a, b), &(c, m)| (a.max(c), b.max(m)));
    FieldBound { componentwise, metric_ratio, samples: set.samples.len(), violations }
}
