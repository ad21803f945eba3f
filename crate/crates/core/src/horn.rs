//! Horn neighbourhoods of the zero set relative to Σ, and deterministic sampling of them.

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germ::MapGerm;
use crate::linalg::min_norm_solve;
use crate::rng;
use crate::sigma::SigmaSet;
use crate::weights::{LojasiewiczFit, WeightSystem};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HornSpec {
    /// Degree r.
    pub degree: f64,
    /// Width w̄.
    pub width: f64,
    /// Ball radius α.
    pub radius: f64,
}

impl HornSpec {
    pub fn new(degree: f64, width: f64, radius: f64) -> Result<Self> {
        if !(degree > 0.0 && width > 0.0 && radius > 0.0) {
            return Err(Error::Invalid("horn degree, width and radius must be positive".into()));
        }
        Ok(Self { degree, width, radius })
    }
}

/// ‖f(u)‖ ≤ w̄·d_ω(x,Σ)^r and ‖u‖ < α.
pub fn horn_membership(germ: &MapGerm, u: &[f64], horn: &HornSpec, sigma: &SigmaSet, weights: &WeightSystem) -> bool {
    let d = sigma.distance(weights, u);
    rng::norm(u) < horn.radius && rng::norm(&germ.value(u)) <= horn.width * d.powf(horn.degree)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HornSample {
    pub point: Vec<f64>,
    pub distance: f64,
    pub value_norm: f64,
    pub in_horn: bool,
    pub in_ball: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SampleSet<T> {
    pub samples: Vec<T>,
    pub proposals: usize,
    pub acceptance_ratio: f64,
    pub diagnostic: Option<String>,
}

pub type HornSampleSet = SampleSet<HornSample>;

/// A region of the (x, λ) ball that can be sampled.
pub(crate) trait Region: Sync {
    fn germ(&self) -> &MapGerm;
    fn weights(&self) -> &WeightSystem;
    fn radius(&self) -> f64;
    /// Level y for a guided proposal from a zero-set point z, with unit direction e and c ∈ [0, 1.25].
    fn level(&self, z: &[f64], e: &[f64], c: f64) -> Vec<f64>;
    fn contains(&self, u: &[f64], value: &[f64]) -> bool;
}

pub(crate) struct RelativeHorn<'a> {
    pub germ: &'a MapGerm,
    pub sigma: &'a SigmaSet,
    pub weights: &'a WeightSystem,
    pub horn: HornSpec,
    /// Use the Euclidean distance to Σ instead of d_ω.
    pub euclidean: bool,
}

impl RelativeHorn<'_> {
    fn distance(&self, u: &[f64]) -> f64 {
        if self.euclidean {
            self.sigma.euclidean_distance(u)
        } else {
            self.sigma.distance(self.weights, u)
        }
    }
}

impl Region for RelativeHorn<'_> {
    fn germ(&self) -> &MapGerm {
        self.germ
    }
    fn weights(&self) -> &WeightSystem {
        self.weights
    }
    fn radius(&self) -> f64 {
        self.horn.radius
    }
    fn level(&self, z: &[f64], e: &[f64], c: f64) -> Vec<f64> {
        let bound = self.horn.width * self.distance(z).powf(self.horn.degree);
        e.iter().map(|x| c * bound * x).collect()
    }
    fn contains(&self, u: &[f64], value: &[f64]) -> bool {
        rng::norm(u) < self.horn.radius && rng::norm(value) <= self.horn.width * self.distance(u).powf(self.horn.degree)
    }
}

pub(crate) struct ZeroSet<'a> {
    pub germ: &'a MapGerm,
    pub sigma: &'a SigmaSet,
    pub weights: &'a WeightSystem,
    pub radius: f64,
    pub tol: f64,
}

impl Region for ZeroSet<'_> {
    fn germ(&self) -> &MapGerm {
        self.germ
    }
    fn weights(&self) -> &WeightSystem {
        self.weights
    }
    fn radius(&self) -> f64 {
        self.radius
    }
    fn level(&self, _z: &[f64], e: &[f64], _c: f64) -> Vec<f64> {
        vec![0.0; e.len()]
    }
    fn contains(&self, u: &[f64], value: &[f64]) -> bool {
        rng::norm(u) < self.radius && self.sigma.distance(self.weights, u) > 0.0 && rng::norm(value) <= self.tol
    }
}

/// Gauss–Newton towards f(u) = y, moving the parameter block when it can carry the
/// equation and all coordinates otherwise.
pub(crate) fn solve_level(germ: &MapGerm, start: &[f64], y: &[f64], iterations: usize) -> Option<Vec<f64>> {
    let (n, dim) = (germ.n(), germ.dim());
    let blocks: Vec<Vec<usize>> =
        if germ.l() >= germ.p() { vec![(n..dim).collect(), (0..dim).collect()] } else { vec![(0..dim).collect()] };
    let target = DVector::from_column_slice(y);
    let mut best: Option<(f64, Vec<f64>)> = None;
    for block in blocks {
        let mut u = start.to_vec();
        for _ in 0..iterations {
            let r = &target - DVector::from_vec(germ.value(&u));
            if r.norm() <= 1e-15 * (1.0 + target.norm()) {
                break;
            }
            let full = germ.grad_u(&u);
            let j = full.select_columns(block.iter());
            let Some(step) = min_norm_solve(&j, &r) else { break };
            for (k, &c) in block.iter().enumerate() {
                u[c] += step[k];
            }
            if !u.iter().all(|x| x.is_finite()) {
                break;
            }
            if step.norm() <= 1e-16 * (1.0 + rng::norm(&u)) {
                break;
            }
        }
        if u.iter().all(|x| x.is_finite()) {
            let res = (&target - DVector::from_vec(germ.value(&u))).norm();
            let done = res <= 1e-12 * (1.0 + target.norm());
            if best.as_ref().is_none_or(|b| res < b.0) {
                best = Some((res, u));
            }
            if done {
                break;
            }
        }
    }
    best.map(|b| b.1)
}

fn proposal<R: Region + ?Sized>(region: &R, seed: u64, k: u64) -> Vec<f64> {
    let germ = region.germ();
    let weights = region.weights();
    let mut r = rng::stream(seed, k);
    let t = region.radius() * 10f64.powf(-6.0 * r.random::<f64>());
    let dir = weights.to_unit_sphere(&rng::unit_vec(&mut r, germ.dim()));
    let u = weights.dilate(&dir, t);
    if k.is_multiple_of(4) {
        return u;
    }
    let Some(z) = solve_level(germ, &u, &vec![0.0; germ.p()], 30) else { return u };
    let e = rng::unit_vec(&mut r, germ.p());
    let c = 1.25 * r.random::<f64>();
    let y = region.level(&z, &e, c);
    if y.iter().all(|&v| v == 0.0) {
        return z;
    }
    solve_level(germ, &z, &y, 10).unwrap_or(z)
}

/// Accepted points in proposal order; deterministic for a given seed regardless of thread count.
pub(crate) fn sample_region<R: Region + ?Sized>(region: &R, count: usize, seed: u64) -> SampleSet<Vec<f64>> {
    let cap = count.saturating_mul(100).max(100);
    let mut accepted = Vec::with_capacity(count);
    let mut next = 0usize;
    while accepted.len() < count && next < cap {
        let batch = (4 * (count - accepted.len())).max(256).min(cap - next);
        let results: Vec<Option<Vec<f64>>> = (next..next + batch)
            .into_par_iter()
            .map(|k| {
                let u = proposal(region, seed, k as u64);
                let v = region.germ().value(&u);
                region.contains(&u, &v).then_some(u)
            })
            .collect();
        for (i, res) in results.into_iter().enumerate() {
            if let Some(u) = res {
                accepted.push(u);
                if accepted.len() == count {
                    next += i + 1;
                    break;
                }
            }
        }
        if accepted.len() < count {
            next += batch;
        }
    }
    let acceptance_ratio = accepted.len() as f64 / next.max(1) as f64;
    let diagnostic = accepted.is_empty().then(|| format!("empty horn sample after {next} proposals"));
    SampleSet { samples: accepted, proposals: next, acceptance_ratio, diagnostic }
}

pub fn sample_horn(
    germ: &MapGerm,
    horn: &HornSpec,
    sigma: &SigmaSet,
    weights: &WeightSystem,
    count: usize,
    seed: u64,
) -> HornSampleSet {
    let region = RelativeHorn { germ, sigma, weights, horn: *horn, euclidean: false };
    let set = sample_region(&region, count, seed);
    SampleSet {
        samples: set
            .samples
            .into_iter()
            .map(|point| {
                let distance = sigma.distance(weights, &point);
                let value_norm = rng::norm(&germ.value(&point));
                let in_ball = rng::norm(&point) < horn.radius;
                HornSample { in_horn: value_norm <= horn.width * distance.powf(horn.degree), in_ball, point, distance, value_norm }
            })
            .collect(),
        proposals: set.proposals,
        acceptance_ratio: set.acceptance_ratio,
        diagnostic: set.diagnostic,
    }
}

/// Points of f⁻¹(0) off Σ×ℝˡ inside the ball, with ‖f‖ ≤ tol.
pub fn sample_zero_set(
    germ: &MapGerm,
    sigma: &SigmaSet,
    weights: &WeightSystem,
    radius: f64,
    tol: f64,
    count: usize,
    seed: u64,
) -> SampleSet<Vec<f64>> {
    sample_region(&ZeroSet { germ, sigma, weights, radius, tol }, count, seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HornInclusionReport {
    pub unweighted_degree: f64,
    pub unweighted_width: f64,
    pub samples: usize,
    pub violations: usize,
    pub witness: Option<Vec<f64>>,
}

/// Samples the unweighted horn of degree α_L·r/q and width w̄·c^{r/2q} and checks that every
/// member also lies in the weighted horn of degree r and width w̄. The ball is capped at
/// radius 1, where the fitted inequality is valid.
pub fn check_horn_inclusion(
    germ: &MapGerm,
    sigma: &SigmaSet,
    weights: &WeightSystem,
    horn: &HornSpec,
    fit: &LojasiewiczFit,
    count: usize,
    seed: u64,
) -> HornInclusionReport {
    let q = weights.q() as f64;
    let unweighted = HornSpec {
        degree: fit.exponent * horn.degree / q,
        width: horn.width * fit.constant.powf(horn.degree / (2.0 * q)),
        radius: horn.radius.min(1.0),
    };
    let region = RelativeHorn { germ, sigma, weights, horn: unweighted, euclidean: true };
    let set = sample_region(&region, count, seed);
    let weighted = HornSpec { radius: unweighted.radius, ..*horn };
    let mut violations = 0;
    let mut witness = None;
    for u in &set.samples {
        if !horn_membership(germ, u, &weighted, sigma, weights) {
            violations += 1;
            witness.get_or_insert_with(|| u.clone());
        }
    }
    HornInclusionReport {
        unweighted_degree: unweighted.degree,
        unweighted_width: unweighted.width,
        samples: set.samples.len(),
        violations,
        witness,
    }
}
