//! Quasi-homogeneous gauge attached to integer weights.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightSystem {
    weights: Vec<u32>,
    q: u64,
    q_i: Vec<u64>,
}

impl WeightSystem {
    pub fn new(weights: Vec<u32>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Weights("no coordinates".into()));
        }
        if weights.contains(&0) {
            return Err(Error::Weights("weights must be positive".into()));
        }
        let q = weights
            .iter()
            .try_fold(1u64, |acc, &w| acc.checked_mul(w as u64))
            .filter(|&q| q <= 1 << 30)
            .ok_or_else(|| Error::Weights("weight product too large".into()))?;
        let q_i = weights.iter().map(|&w| q / w as u64).collect();
        Ok(Self { weights, q, q_i })
    }

    pub fn uniform(m: usize) -> Self {
        Self::new(vec![1; m]).expect("unit weights are valid")
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn q(&self) -> u64 {
        self.q
    }

    pub fn q_i(&self) -> &[u64] {
        &self.q_i
    }

    /// |ω| = max ω_i.
    pub fn max_weight(&self) -> u32 {
        *self.weights.iter().max().unwrap()
    }

    pub fn is_uniform(&self) -> bool {
        self.weights.iter().all(|&w| w == 1)
    }

    pub fn rho(&self, u: &[f64]) -> f64 {
        self.rho_over(u, |_| true)
    }

    /// ρ of the vector obtained from `u` by zeroing every coordinate not selected by `keep`.
    pub fn rho_over(&self, u: &[f64], keep: impl Fn(usize) -> bool) -> f64 {
        debug_assert!(u.len() <= self.weights.len());
        if self.q == 1 {
            return u.iter().enumerate().filter(|(i, _)| keep(*i)).map(|(_, x)| x * x).sum::<f64>().sqrt();
        }
        // Factor out s = max |u_i|^{1/ω_i} so every scaled term lies in [0, 1].
        let mut s: f64 = 0.0;
        for (i, &x) in u.iter().enumerate() {
            if keep(i) && x != 0.0 {
                s = s.max(x.abs().powf(1.0 / self.weights[i] as f64));
            }
        }
        if s == 0.0 {
            return 0.0;
        }
        let mut sum = 0.0;
        for (i, &x) in u.iter().enumerate() {
            if keep(i) && x != 0.0 {
                let r = x.abs() / s.powi(self.weights[i] as i32);
                sum += pow_u(r, 2 * self.q_i[i]);
            }
        }
        s * sum.powf(0.5 / self.q as f64)
    }

    /// Closed-form ∂ρ/∂u_i = (1/ω_i) ρ^{1−2q} u_i^{2q_i−1}.
    pub fn grad_rho(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rho = self.rho(u);
        if rho == 0.0 {
            return Err(Error::Invalid("gradient of rho is undefined at the origin".into()));
        }
        Ok(self.scaled_grad(u, rho).into_iter().enumerate().map(|(i, g)| g * rho.powi(1 - self.weights[i] as i32)).collect())
    }

    /// The products ∂ρ/∂u_i · ρ^{ω_i−1}, bounded by 1/ω_i.
    pub fn grad_rho_scaled(&self, u: &[f64]) -> Result<Vec<f64>> {
        let rho = self.rho(u);
        if rho == 0.0 {
            return Err(Error::Invalid("gradient of rho is undefined at the origin".into()));
        }
        Ok(self.scaled_grad(u, rho))
    }

    fn scaled_grad(&self, u: &[f64], rho: f64) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &x)| {
                let w = self.weights[i];
                let r = x.abs() / rho.powi(w as i32);
                x.signum() * pow_u(r, 2 * self.q_i[i] - 1) / w as f64
            })
            .collect()
    }

    /// Quasi-homogeneous dilation (t^{ω_1} u_1, …, t^{ω_m} u_m).
    pub fn dilate(&self, u: &[f64], t: f64) -> Vec<f64> {
        u.iter().zip(&self.weights).map(|(x, &w)| x * t.powi(w as i32)).collect()
    }

    /// Rescales a nonzero vector along the dilation orbit onto the sphere ρ = 1.
    pub fn to_unit_sphere(&self, v: &[f64]) -> Vec<f64> {
        let r = self.rho(v);
        self.dilate(v, 1.0 / r)
    }
}

fn pow_u(x: f64, e: u64) -> f64 {
    if e <= i32::MAX as u64 {
        x.powi(e as i32)
    } else {
        x.powf(e as f64)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LojasiewiczFit {
    pub constant: f64,
    pub exponent: f64,
    pub samples: usize,
    pub pass: bool,
}

/// Fits ρ(u)^{2q} ≥ c‖u‖^{2α_L} on the closed unit ball with α_L = q / min ω_i.
///
/// Half of the samples lie on the unit sphere, the rest at log-uniform radii in [1e-3, 1].
pub fn lojasiewicz_estimate(weights: &WeightSystem, samples: usize, seed: u64) -> LojasiewiczFit {
    let m = weights.len();
    let q = weights.q() as f64;
    let alpha = q / *weights.weights().iter().min().unwrap() as f64;
    let ratios: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let dir = rng::unit_vec(&mut r, m);
            let radius = if k % 2 == 0 { 1.0 } else { 10f64.powf(-3.0 * r.random::<f64>()) };
            let u: Vec<f64> = dir.iter().map(|x| x * radius).collect();
            let lr = weights.rho(&u).ln();
            (2.0 * q * lr - 2.0 * alpha * radius.ln()).exp()
        })
        .collect();
    let constant = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let pass = constant.is_finite() && constant > 0.0 && ratios.iter().all(|&x| x >= constant);
    LojasiewiczFit { constant, exponent: alpha, samples, pass }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GradRhoBound {
    /// max over samples and coordinates of |∂ρ/∂u_i|·ρ^{ω_i−1}.
    pub max_scaled: f64,
    /// L = m · max_scaled, so |∂ρ/∂u_i| ≤ (L/m)ρ^{1−ω_i}.
    pub lipschitz: f64,
    pub samples: usize,
    pub finite: bool,
}

pub fn grad_rho_bound_check(weights: &WeightSystem, samples: usize, seed: u64) -> GradRhoBound {
    let m = weights.len();
    let maxima: Vec<f64> = (0..samples)
        .into_par_iter()
        .map(|k| {
            let mut r = rng::stream(seed, k as u64);
            let dir = weights.to_unit_sphere(&rng::unit_vec(&mut r, m));
            let t = 10f64.powf(-6.0 * r.random::<f64>());
            let u = weights.dilate(&dir, t);
            weights
                .grad_rho_scaled(&u)
                .map(|g| g.iter().fold(0.0f64, |a, x| a.max(x.abs())))
                .unwrap_or(f64::NAN)
        })
        .collect();
    let finite = maxima.iter().all(|x| x.is_finite());
    let max_scaled = maxima.iter().copied().fold(0.0f64, f64::max);
    GradRhoBound { max_scaled, lipschitz: m as f64 * max_scaled, samples, finite }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rho_examples() {
        let w = WeightSystem::new(vec![1, 1]).unwrap();
        assert_eq!(w.rho(&[3.0, 4.0]), 5.0);
        let w = WeightSystem::new(vec![1, 2]).unwrap();
        assert_relative_eq!(w.rho(&[0.0, 3.0]), 3f64.sqrt(), max_relative = 1e-15);
        assert_eq!(w.rho(&[0.0, 0.0]), 0.0);
    }

    #[test]
    fn derived_exponents() {
        let w = WeightSystem::new(vec![2, 3, 1]).unwrap();
        assert_eq!(w.q(), 6);
        assert_eq!(w.q_i(), &[3, 2, 6]);
        assert_eq!(w.max_weight(), 3);
        assert!(WeightSystem::new(vec![1, 0]).is_err());
    }

    #[test]
    fn rho_matches_direct_formula() {
        let w = WeightSystem::new(vec![1, 2, 3]).unwrap();
        let u = [0.3, -0.2, 0.7];
        let direct = (0.3f64.powi(12) + 0.2f64.powi(6) + 0.7f64.powi(4)).powf(1.0 / 12.0);
        assert_relative_eq!(w.rho(&u), direct, max_relative = 1e-14);
    }

    #[test]
    fn grad_on_axis() {
        let w = WeightSystem::new(vec![1, 2, 3]).unwrap();
        for i in 0..3 {
            let mut u = vec![0.0; 3];
            u[i] = 1.0;
            let g = w.grad_rho_scaled(&u).unwrap();
            assert_relative_eq!(g[i], 1.0 / w.weights()[i] as f64, max_relative = 1e-14);
        }
        assert!(w.grad_rho(&[0.0; 3]).is_err());
    }

    #[test]
    fn grad_matches_finite_difference() {
        let w = WeightSystem::new(vec![1, 2]).unwrap();
        let u = [0.4, -0.3];
        let g = w.grad_rho(&u).unwrap();
        for i in 0..2 {
            let h = 1e-6;
            let mut a = u;
            let mut b = u;
            a[i] += h;
            b[i] -= h;
            let fd = (w.rho(&a) - w.rho(&b)) / (2.0 * h);
            assert_relative_eq!(g[i], fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn uniform_grad_bound() {
        let b = grad_rho_bound_check(&WeightSystem::uniform(2), 500, 1);
        assert!(b.finite);
        assert!(b.max_scaled <= 1.0 + 1e-15);
        assert!(b.lipschitz <= 2.0 + 1e-14);
    }

    #[test]
    fn lojasiewicz_identity_case() {
        let fit = lojasiewicz_estimate(&WeightSystem::uniform(2), 200, 3);
        assert!(fit.pass);
        assert_eq!(fit.exponent, 1.0);
        assert_relative_eq!(fit.constant, 1.0, max_relative = 1e-12);
    }

    #[test]
    fn lojasiewicz_mixed_weights() {
        let fit = lojasiewicz_estimate(&WeightSystem::new(vec![1, 2]).unwrap(), 4000, 3);
        assert!(fit.pass);
        assert_eq!(fit.exponent, 2.0);
        // min over the unit circle of x^4 + y^2 is 3/4
        assert!(fit.constant >= 0.75 - 1e-12 && fit.constant < 0.76, "{}", fit.constant);
    }
}
