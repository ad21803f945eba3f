//! Polynomial map germs (ℝⁿ×ℝˡ,0) → (ℝᵖ,0), jets, equivariance and perturbation order.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupAction;
use crate::poly::Polynomial;
use crate::rng;
use crate::sigma::SigmaSet;
use crate::weights::WeightSystem;

#[derive(Clone, Debug, PartialEq)]
pub struct MapGerm {
    n: usize,
    l: usize,
    p: usize,
    components: Vec<Polynomial>,
    /// ∂f_i/∂u_k for every component i and coordinate k.
    partials: Vec<Vec<Polynomial>>,
}

impl MapGerm {
    pub fn new(n: usize, l: usize, p: usize, components: Vec<Polynomial>) -> Result<Self> {
        if components.len() != p {
            return Err(Error::Dimension(format!("{} components for target dimension {p}", components.len())));
        }
        if let Some(c) = components.iter().find(|c| c.nvars() != n + l) {
            return Err(Error::Dimension(format!("component in {} variables, expected {}", c.nvars(), n + l)));
        }
        if let Some(i) = components.iter().position(|c| c.constant_term() != 0.0) {
            return Err(Error::Invalid(format!("component {} does not vanish at the origin", i + 1)));
        }
        let partials = components.iter().map(|c| (0..n + l).map(|k| c.derivative(k)).collect()).collect();
        Ok(Self { n, l, p, components, partials })
    }

    pub fn zero(n: usize, l: usize, p: usize) -> Self {
        Self::new(n, l, p, vec![Polynomial::zero(n + l); p]).expect("zero germ")
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn dim(&self) -> usize {
        self.n + self.l
    }

    pub fn components(&self) -> &[Polynomial] {
        &self.components
    }

    pub fn is_zero(&self) -> bool {
        self.components.iter().all(Polynomial::is_zero)
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.components.iter().filter_map(Polynomial::total_degree).max()
    }

    pub fn evaluate(&self, u: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        Ok(self.value(u))
    }

    /// Evaluation without the dimension check.
    pub fn value(&self, u: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(u)).collect()
    }

    /// p×n matrix ∇ₓF(u).
    pub fn jacobian_x(&self, u: &[f64]) -> Result<DMatrix<f64>> {
        self.check_point(u)?;
        Ok(self.grad_x(u))
    }

    pub fn grad_x(&self, u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.n, |i, j| self.partials[i][j].eval(u))
    }

    /// p×(n+l) Jacobian in all coordinates.
    pub fn grad_u(&self, u: &[f64]) -> DMatrix<f64> {
        DMatrix::from_fn(self.p, self.n + self.l, |i, k| self.partials[i][k].eval(u))
    }

    pub fn partial(&self, component: usize, var: usize) -> &Polynomial {
        &self.partials[component][var]
    }

    /// self + t·other.
    pub fn add_scaled(&self, other: &MapGerm, t: f64) -> Result<MapGerm> {
        self.check_same_shape(other)?;
        let comps = self.components.iter().zip(&other.components).map(|(a, b)| a.add(&b.scale(t))).collect();
        MapGerm::new(self.n, self.l, self.p, comps)
    }

    pub fn sub(&self, other: &MapGerm) -> Result<MapGerm> {
        self.add_scaled(other, -1.0)
    }

    pub fn check_same_shape(&self, other: &MapGerm) -> Result<()> {
        if (self.n, self.l, self.p) != (other.n, other.l, other.p) {
            return Err(Error::Dimension(format!(
                "germ dims ({}, {}, {}) vs ({}, {}, {})",
                self.n, self.l, self.p, other.n, other.l, other.p
            )));
        }
        Ok(())
    }

    fn check_point(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n + self.l {
            return Err(Error::Dimension(format!("point of length {}, expected {}", u.len(), self.n + self.l)));
        }
        Ok(())
    }
}

/// Truncated Taylor expansion at a base point, stored as polynomials in the offset h = u − a.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub base_point: Vec<f64>,
    pub degree: u32,
    pub components: Vec<Polynomial>,
}

impl Jet {
    pub fn of_polynomials(components: &[Polynomial], a: &[f64], k: u32) -> Self {
        Self {
            base_point: a.to_vec(),
            degree: k,
            components: components.iter().map(|c| c.shift(a).truncate(k)).collect(),
        }
    }

    pub fn value_at_base(&self) -> Vec<f64> {
        self.components.iter().map(Polynomial::constant_term).collect()
    }

    pub fn eval(&self, u: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = u.iter().zip(&self.base_point).map(|(x, a)| x - a).collect();
        self.components.iter().map(|c| c.eval(&h)).collect()
    }

    /// Jet of this jet (viewed as a polynomial map) at another point.
    pub fn rejet(&self, a: &[f64], k: u32) -> Jet {
        let offset: Vec<f64> = a.iter().zip(&self.base_point).map(|(x, b)| x - b).collect();
        Jet { base_point: a.to_vec(), degree: k, components: self.components.iter().map(|c| c.shift(&offset).truncate(k)).collect() }
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs_coefficient()))
    }
}

pub fn jet_at(germ: &MapGerm, a: &[f64], k: u32) -> Result<Jet> {
    germ.check_point(a)?;
    Ok(Jet::of_polynomials(germ.components(), a, k))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JetAgreement {
    pub agree: bool,
    pub worst_residual: f64,
    pub witness: Option<Vec<f64>>,
    pub points_checked: usize,
    /// True when the structured grid alone proves agreement along every subspace.
    pub exact: bool,
}

const GRID_CAP: usize = 4096;
const JET_TOL: f64 = 1e-12;

/// Compares k-jets of f and g at points of Σ×ℝˡ.
///
/// Each subspace of free dimension m gets a tensor grid with D+1 nodes per axis, D being the
/// larger of k and the degree of f − g, so vanishing on the grid forces vanishing everywhere;
/// `samples` random points are added on top.
pub fn jets_agree_on_sigma(
    f: &MapGerm,
    g: &MapGerm,
    k: u32,
    sigma: &SigmaSet,
    samples: usize,
    seed: u64,
) -> Result<JetAgreement> {
    f.check_same_shape(g)?;
    let diff = f.sub(g)?;
    let dim = f.dim();
    let n = f.n();
    let nodes_per_axis = diff.total_degree().unwrap_or(0).max(k) as usize + 1;

    let mut out = JetAgreement { agree: true, worst_residual: 0.0, witness: None, points_checked: 0, exact: true };
    let check = |a: Vec<f64>, out: &mut JetAgreement| {
        let scale = 1.0 + Jet::of_polynomials(f.components(), &a, k).max_abs_coefficient();
        let r = Jet::of_polynomials(diff.components(), &a, k).max_abs_coefficient() / scale;
        out.points_checked += 1;
        if r > out.worst_residual {
            out.worst_residual = r;
        }
        if r > JET_TOL && out.agree {
            out.agree = false;
            out.witness = Some(a);
        }
    };

    for (si, s) in sigma.subspaces().iter().enumerate() {
        let free: Vec<usize> = s.iter().copied().chain(n..dim).collect();
        let m = free.len();
        let mut per_axis = nodes_per_axis;
        if (per_axis as f64).powi(m as i32) > GRID_CAP as f64 {
            out.exact = false;
            per_axis = (k as usize + 1).max(1);
            while per_axis > 1 && (per_axis as f64).powi(m as i32) > GRID_CAP as f64 {
                per_axis -= 1;
            }
        }
        let total = per_axis.pow(m as u32);
        for idx in 0..total {
            let mut a = vec![0.0; dim];
            let mut rem = idx;
            for &j in &free {
                let node = rem % per_axis;
                rem /= per_axis;
                // nodes 0, 1/D, -2/D, 3/D, ... are distinct
                let v = node as f64 / per_axis as f64;
                a[j] = if node.is_multiple_of(2) { -v } else { v };
            }
            check(a, &mut out);
        }
        let mut r = rng::stream(seed, si as u64);
        for _ in 0..samples {
            let mut a = vec![0.0; dim];
            for &j in &free {
                a[j] = r.random_range(-1.0..1.0);
            }
            check(a, &mut out);
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EquivarianceReport {
    pub equivariant: bool,
    /// max of ‖f(γx,λ) − γf(x,λ)‖ / (1 + ‖f(u)‖).
    pub worst_residual: f64,
    pub witness: Option<Vec<f64>>,
    pub samples: usize,
}

pub fn check_equivariance(germ: &MapGerm, group: &GroupAction, samples: usize, seed: u64) -> Result<EquivarianceReport> {
    if group.n() != germ.n() || group.p() != germ.p() {
        return Err(Error::Dimension("group action does not match germ dimensions".into()));
    }
    let mut worst = 0.0f64;
    let mut witness = None;
    for k in 0..samples {
        let mut r = rng::stream(seed, k as u64);
        let u: Vec<f64> = (0..germ.dim()).map(|_| r.random_range(-1.0..1.0)).collect();
        let fu = germ.value(&u);
        let scale = 1.0 + rng::norm(&fu);
        for el in group.elements() {
            let lhs = germ.value(&group.act_source(el, &u));
            let rhs = group.act_target(el, &fu);
            let res: Vec<f64> = lhs.iter().zip(&rhs).map(|(a, b)| a - b).collect();
            let rel = rng::norm(&res) / scale;
            if rel > worst {
                worst = rel;
                witness = Some(u.clone());
            }
        }
    }
    let equivariant = worst <= 1e-9;
    Ok(EquivarianceReport { equivariant, worst_residual: worst, witness: if equivariant { None } else { witness }, samples })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComponentOrder {
    /// Weighted vanishing order along Σ; `None` means the component is identically zero.
    pub value_order: Option<u64>,
    /// Order of ∂p_i/∂x_j for each state coordinate j.
    pub derivative_orders: Vec<Option<u64>>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PerturbationOrderReport {
    pub components: Vec<ComponentOrder>,
    /// d + |ω|.
    pub value_threshold: f64,
    /// d.
    pub derivative_threshold: f64,
    pub value_pass: bool,
    pub derivative_pass: bool,
    pub pass: bool,
}

impl PerturbationOrderReport {
    pub fn min_value_order(&self) -> Option<u64> {
        self.components.iter().filter_map(|c| c.value_order).min()
    }

    pub fn min_derivative_order(&self) -> Option<u64> {
        self.components.iter().flat_map(|c| c.derivative_orders.iter().copied().flatten()).min()
    }

    pub fn summary(&self) -> String {
        if self.pass {
            return "perturbation order condition holds".into();
        }
        if !self.value_pass {
            let o = self.min_value_order().unwrap_or(0);
            return format!("perturbation order {o} ≤ {}", self.value_threshold);
        }
        let o = self.min_derivative_order().unwrap_or(0);
        format!("perturbation derivative order {o} ≤ {}", self.derivative_threshold)
    }
}

/// Minimal weighted degree, in the coordinates normal to each subspace, over all monomials
/// and subspaces. `None` for the zero polynomial.
pub fn weighted_order(poly: &Polynomial, sigma: &SigmaSet, weights: &WeightSystem) -> Option<u64> {
    let n = sigma.n();
    let w = weights.weights();
    sigma
        .subspaces()
        .iter()
        .filter_map(|s| {
            poly.terms()
                .iter()
                .map(|t| {
                    (0..n).filter(|j| !s.contains(j)).map(|j| t.exponents[j] as u64 * w[j] as u64).sum::<u64>()
                })
                .min()
        })
        .min()
}

pub fn perturbation_order(
    pert: &MapGerm,
    sigma: &SigmaSet,
    weights: &WeightSystem,
    d: f64,
) -> Result<PerturbationOrderReport> {
    if sigma.n() != pert.n() || weights.len() != pert.dim() {
        return Err(Error::Dimension("perturbation, sigma and weights disagree on dimensions".into()));
    }
    let value_threshold = d + weights.max_weight() as f64;
    let exceeds = |o: Option<u64>, th: f64| o.is_none_or(|o| o as f64 > th);
    let components: Vec<ComponentOrder> = (0..pert.p())
        .map(|i| ComponentOrder {
            value_order: weighted_order(&pert.components()[i], sigma, weights),
            derivative_orders: (0..pert.n()).map(|j| weighted_order(pert.partial(i, j), sigma, weights)).collect(),
        })
        .collect();
    let value_pass = components.iter().all(|c| exceeds(c.value_order, value_threshold));
    let derivative_pass = components.iter().all(|c| c.derivative_orders.iter().all(|&o| exceeds(o, d)));
    Ok(PerturbationOrderReport {
        components,
        value_threshold,
        derivative_threshold: d,
        value_pass,
        derivative_pass,
        pass: value_pass && derivative_pass,
    })
}
