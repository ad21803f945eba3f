//! Kuo-type nondegeneracy checks and controlled-flow equivalence for polynomial
//! bifurcation germs.

pub mod error;
pub mod flow;
pub mod format;
pub mod germ;
pub mod group;
pub mod horn;
pub mod kuo;
pub mod linalg;
pub mod nd;
pub mod poly;
pub mod sigma;
pub mod weights;

mod rng;

pub use error::{Error, Result};
pub use format::{parse_germ_spec, GermSpec};
pub use germ::{
    check_equivariance, jet_at, jets_agree_on_sigma, perturbation_order, EquivarianceReport, Jet, JetAgreement,
    MapGerm, PerturbationOrderReport,
};
pub use group::{GroupAction, GroupElement, Side};
pub use poly::{Monomial, Polynomial};
pub use sigma::{DistanceOracle, SigmaSet};
pub use weights::{grad_rho_bound_check, lojasiewicz_estimate, GradRhoBound, LojasiewiczFit, WeightSystem};
pub use horn::{
    check_horn_inclusion, horn_membership, sample_horn, sample_zero_set, HornInclusionReport, HornSample,
    HornSampleSet, HornSpec, SampleSet,
};
pub use linalg::{kappa, operator_norm, pseudo_inverse, submatrix_norm_property, Partition, PseudoInverse};
pub use kuo::{
    check_kuo_condition, check_rank_condition, frame, gradient_matrix, kuo_pseudo_distance, kuo_vectors,
    perturbed_margin, pseudo_distance_with, pseudoinverse_identity_check, pseudoinverse_identity_residual,
    weighted_gradient_x, KuoCertificate, KuoCheck, KuoMetric, KuoVectors, KuoWitness, MetricChoice, PerturbedMargin,
    RankReport, Verdict,
};
pub use nd::{check_nd, nd_implies_kuo_check, nd_kappa, BridgeConstant, BridgeReport, NdCheck, NdReport, NdSweep};
pub use flow::{
    build_homeomorphism, bump_chi, contact_tau, contact_theta, distance_monitor, extended_field, field_bound,
    integrate_flow, kuo_vector_field, verify_contact_identity, ContactOptions, ContactReport, EnvelopeReport,
    FieldBound, FlowTolerances, FlowTrace, HomeomorphismReport, HomotopyProblem, ProblemValidation, Termination,
};
