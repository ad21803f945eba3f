//! Nondegeneracy ND(ν): κ(ρ^{1−ν}∇ₓF) ≥ ε on the ν-horn, with ρ = ‖u‖.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::germ::MapGerm;
use crate::horn::{sample_region, Region};
use crate::kuo::{pseudo_distance_with, KuoMetric, Verdict};
use crate::linalg::kappa;
use crate::rng;
use crate::weights::WeightSystem;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NdCheck {
    pub nu: Vec<f64>,
    pub epsilon: f64,
    /// Width of the ν-horn (not the Kuo exponent gap).
    pub nd_width: f64,
    pub radius: f64,
    pub samples: usize,
    pub seed: u64,
}

struct NuHorn<'a> {
    germ: &'a MapGerm,
    weights: WeightSystem,
    nu: &'a [f64],
    width: f64,
    radius: f64,
}

fn scaled_value(nu: &[f64], u: &[f64], value: &[f64]) -> Vec<f64> {
    let rho = rng::norm(u);
    value.iter().zip(nu).map(|(v, n)| v * rho.powf(1.0 - n)).collect()
}

impl Region for NuHorn<'_> {
    fn germ(&self) -> &MapGerm {
        self.germ
    }
    fn weights(&self) -> &WeightSystem {
        &self.weights
    }
    fn radius(&self) -> f64 {
        self.radius
    }
    fn level(&self, z: &[f64], e: &[f64], c: f64) -> Vec<f64> {
        let rho = rng::norm(z);
        e.iter().zip(self.nu).map(|(x, n)| c * self.width * x * rho.powf(n - 1.0)).collect()
    }
    fn contains(&self, u: &[f64], value: &[f64]) -> bool {
        let rho = rng::norm(u);
        rho > 0.0 && rho < self.radius && rng::norm(&scaled_value(self.nu, u, value)) <= self.width
    }
}

/// κ(diag(ρ^{1−ν_i})·∇ₓF(u)).
pub fn nd_kappa(germ: &MapGerm, nu: &[f64], u: &[f64]) -> f64 {
    let rho = rng::norm(u);
    let mut a: DMatrix<f64> = germ.grad_x(u);
    for (i, n) in nu.iter().enumerate() {
        a.row_mut(i).scale_mut(rho.powf(1.0 - n));
    }
    kappa(&a)
}

fn sample_nu_horn(germ: &MapGerm, nu: &[f64], cfg: &NdCheck) -> crate::horn::SampleSet<Vec<f64>> {
    let region = NuHorn { germ, weights: WeightSystem::uniform(germ.dim()), nu, width: cfg.nd_width, radius: cfg.radius };
    sample_region(&region, cfg.samples, cfg.seed)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NdSweep {
    pub nu: Vec<f64>,
    pub samples_used: usize,
    pub proposals: usize,
    pub min_kappa: f64,
    pub verdict: Verdict,
    pub witness: Option<Vec<f64>>,
}

fn sweep(germ: &MapGerm, nu: &[f64], cfg: &NdCheck) -> NdSweep {
    let set = sample_nu_horn(germ, nu, cfg);
    let kappas: Vec<f64> = set.samples.par_iter().map(|u| nd_kappa(germ, nu, u)).collect();
    let (mut min_kappa, mut arg) = (f64::INFINITY, None);
    for (k, u) in kappas.iter().zip(&set.samples) {
        if *k < min_kappa {
            min_kappa = *k;
            arg = Some(u.clone());
        }
    }
    let verdict = if set.samples.is_empty() {
        Verdict::Indeterminate
    } else if min_kappa >= cfg.epsilon {
        Verdict::HoldsEmpirically
    } else {
        Verdict::FailsWithWitness
    };
    NdSweep {
        nu: nu.to_vec(),
        samples_used: set.samples.len(),
        proposals: set.proposals,
        min_kappa,
        witness: if verdict == Verdict::FailsWithWitness { arg } else { None },
        verdict,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NdReport {
    pub epsilon: f64,
    pub nd_width: f64,
    pub radius: f64,
    /// The check at ν.
    pub primary: NdSweep,
    /// The same check with every entry replaced by |ν| = max ν_i.
    pub uniform: NdSweep,
    pub verdict: Verdict,
}

pub fn check_nd(germ: &MapGerm, cfg: &NdCheck) -> NdReport {
    let primary = sweep(germ, &cfg.nu, cfg);
    let abs_nu = cfg.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let uniform = sweep(germ, &vec![abs_nu; cfg.nu.len()], cfg);
    NdReport { epsilon: cfg.epsilon, nd_width: cfg.nd_width, radius: cfg.radius, verdict: primary.verdict, primary, uniform }
}

/// The constant in d∇F ≥ C·ρ^{|ν|−1}.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BridgeConstant {
    /// C = ε·√(n+l).
    Scaled,
    /// C = ε, the bound that follows from κ ≤ d∇F·ρ^{1−|ν|}.
    Sharp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct BridgeReport {
    pub premise: Verdict,
    pub constant: BridgeConstant,
    pub constant_value: f64,
    pub samples_checked: usize,
    pub violations: usize,
    /// min over samples of d∇F / (C·ρ^{|ν|−1}).
    pub worst_ratio: f64,
    pub witness: Option<Vec<f64>>,
    pub verdict: Verdict,
}

/// Checks the unweighted Kuo bound d∇F ≥ C·ρ^{|ν|−1} on the |ν|-horn, given ND(ν).
///
/// The sweep runs even when ND(ν) fails so the violations are on record, but the verdict is
/// then indeterminate: the implication says nothing without its premise.
pub fn nd_implies_kuo_check(germ: &MapGerm, cfg: &NdCheck, constant: BridgeConstant) -> BridgeReport {
    let nd = check_nd(germ, cfg);
    let abs_nu = cfg.nu.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = match constant {
        BridgeConstant::Scaled => cfg.epsilon * (germ.dim() as f64).sqrt(),
        BridgeConstant::Sharp => cfg.epsilon,
    };
    let mut report = BridgeReport {
        premise: nd.verdict,
        constant,
        constant_value: c,
        samples_checked: 0,
        violations: 0,
        worst_ratio: f64::NAN,
        witness: None,
        verdict: Verdict::Indeterminate,
    };
    let weights = WeightSystem::uniform(germ.dim());
    let set = sample_nu_horn(germ, &vec![abs_nu; cfg.nu.len()], cfg);
    let ratios: Vec<f64> = set
        .samples
        .par_iter()
        .map(|u| pseudo_distance_with(germ, KuoMetric::Euclidean, &weights, u) / (c * rng::norm(u).powf(abs_nu - 1.0)))
        .collect();
    report.samples_checked = ratios.len();
    report.worst_ratio = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    for (r, u) in ratios.iter().zip(&set.samples) {
        if *r < 1.0 {
            report.violations += 1;
            report.witness.get_or_insert_with(|| u.clone());
        }
    }
    report.verdict = if ratios.is_empty() || !nd.verdict.holds() {
        Verdict::Indeterminate
    } else if report.violations == 0 {
        Verdict::HoldsEmpirically
    } else {
        Verdict::FailsWithWitness
    };
    report
}
