//! The controlled homotopy flow between a germ and its perturbation.

mod equivalence;
mod field;
mod integrate;
mod monitor;

pub use equivalence::{
    build_homeomorphism, contact_tau, contact_theta, verify_contact_identity, ContactOptions, ContactReport,
    ContactSample, HomeoPair, HomeomorphismReport, RayDecay,
};
pub use field::{bump_chi, bump_profile, extended_field, field_bound, kuo_vector_field, FieldBound, FieldEval};
pub use integrate::{integrate_flow, FlowTolerances, FlowTrace, Termination, TraceRow};
pub use monitor::{distance_monitor, EnvelopeReport};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::germ::{check_equivariance, perturbation_order, EquivarianceReport, MapGerm, PerturbationOrderReport};
use crate::group::GroupAction;
use crate::horn::HornSpec;
use crate::kuo::{KuoMetric, MetricChoice};
use crate::sigma::SigmaSet;
use crate::weights::WeightSystem;

/// F(u, t) = f(u) + t·p(u) on the horn of f, t ∈ [0, 1].
#[derive(Clone, Debug)]
pub struct HomotopyProblem {
    pub base: MapGerm,
    pub pert: MapGerm,
    pub weights: WeightSystem,
    pub sigma: SigmaSet,
    pub horn: HornSpec,
    pub group: GroupAction,
    pub metric: KuoMetric,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ProblemValidation {
    pub order: PerturbationOrderReport,
    pub base_equivariance: EquivarianceReport,
    pub pert_equivariance: EquivarianceReport,
    pub admissible: bool,
}

impl HomotopyProblem {
    pub fn new(
        base: MapGerm,
        pert: MapGerm,
        weights: WeightSystem,
        sigma: SigmaSet,
        horn: HornSpec,
        group: GroupAction,
        metric: MetricChoice,
    ) -> Result<Self> {
        base.check_same_shape(&pert)?;
        if weights.len() != base.dim() || sigma.n() != base.n() || group.n() != base.n() || group.p() != base.p() {
            return Err(Error::Dimension("weights, sigma or group do not match the germ".into()));
        }
        group.validate_weights(&weights)?;
        sigma.validate_invariant(&group)?;
        let metric = metric.resolve(&weights);
        Ok(Self { base, pert, weights, sigma, horn, group, metric })
    }

    pub fn n(&self) -> usize {
        self.base.n()
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Perturbation order for d = r, and equivariance of f and p.
    pub fn validate(&self, samples: usize, seed: u64) -> Result<ProblemValidation> {
        let order = perturbation_order(&self.pert, &self.sigma, &self.weights, self.horn.degree)?;
        let base_equivariance = check_equivariance(&self.base, &self.group, samples, seed)?;
        let pert_equivariance = check_equivariance(&self.pert, &self.group, samples, seed)?;
        let admissible = order.pass && base_equivariance.equivariant && pert_equivariance.equivariant;
        Ok(ProblemValidation { order, base_equivariance, pert_equivariance, admissible })
    }

    pub fn value(&self, u: &[f64], t: f64) -> Vec<f64> {
        let f = self.base.value(u);
        let p = self.pert.value(u);
        f.iter().zip(&p).map(|(a, b)| a + t * b).collect()
    }

    pub fn grad_x(&self, u: &[f64], t: f64) -> DMatrix<f64> {
        self.base.grad_x(u) + self.pert.grad_x(u) * t
    }

    pub fn target_germ(&self) -> Result<MapGerm> {
        self.base.add_scaled(&self.pert, 1.0)
    }
}
