//! Finite orthogonal group actions on the state block and the target.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::weights::WeightSystem;

pub const DEFAULT_MAX_ORDER: usize = 1024;
const ORTHO_TOL: f64 = 1e-12;
const MATCH_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct GroupElement {
    pub source: DMatrix<f64>,
    pub target: DMatrix<f64>,
}

#[derive(Clone, Debug)]
pub struct GroupAction {
    n: usize,
    p: usize,
    source_generators: Vec<DMatrix<f64>>,
    target_generators: Vec<DMatrix<f64>>,
    elements: Vec<GroupElement>,
    max_order: usize,
}

/// Which representation an inner product is taken in.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Source,
    Target,
}

impl GroupAction {
    pub fn trivial(n: usize, p: usize) -> Self {
        Self::new(n, p, Vec::new(), Vec::new(), DEFAULT_MAX_ORDER).expect("trivial group")
    }

    /// Enumerates the group generated by index-paired (source, target) generators.
    pub fn new(
        n: usize,
        p: usize,
        source_generators: Vec<DMatrix<f64>>,
        target_generators: Vec<DMatrix<f64>>,
        max_order: usize,
    ) -> Result<Self> {
        if source_generators.len() != target_generators.len() {
            return Err(Error::Dimension(format!(
                "{} source generators but {} target generators",
                source_generators.len(),
                target_generators.len()
            )));
        }
        for (index, (s, t)) in source_generators.iter().zip(&target_generators).enumerate() {
            if s.shape() != (n, n) || t.shape() != (p, p) {
                return Err(Error::Dimension(format!("generator {} has the wrong shape", index + 1)));
            }
            for m in [s, t] {
                let deviation = (m.transpose() * m - DMatrix::identity(m.nrows(), m.nrows())).norm();
                if deviation > ORTHO_TOL {
                    return Err(Error::NonOrthogonal { index: index + 1, deviation });
                }
            }
        }

        let mut elements = vec![GroupElement { source: DMatrix::identity(n, n), target: DMatrix::identity(p, p) }];
        let mut frontier = 0;
        while frontier < elements.len() {
            for (gs, gt) in source_generators.iter().zip(&target_generators) {
                let candidate = GroupElement {
                    source: gs * &elements[frontier].source,
                    target: gt * &elements[frontier].target,
                };
                match elements.iter().find(|e| close(&e.source, &candidate.source)) {
                    Some(e) if !close(&e.target, &candidate.target) => return Err(Error::NotHomomorphism),
                    Some(_) => {}
                    None => {
                        if elements.len() >= max_order {
                            return Err(Error::GroupTooLarge { cap: max_order });
                        }
                        elements.push(candidate);
                    }
                }
            }
            frontier += 1;
        }
        Ok(Self { n, p, source_generators, target_generators, elements, max_order })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn source_generators(&self) -> &[DMatrix<f64>] {
        &self.source_generators
    }

    pub fn target_generators(&self) -> &[DMatrix<f64>] {
        &self.target_generators
    }

    pub fn elements(&self) -> &[GroupElement] {
        &self.elements
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    pub fn max_order(&self) -> usize {
        self.max_order
    }

    pub fn is_trivial(&self) -> bool {
        self.elements.len() == 1
    }

    /// Accepts only generators that never mix coordinates of different weight.
    pub fn validate_weights(&self, weights: &WeightSystem) -> Result<()> {
        let w = weights.weights();
        for (index, g) in self.source_generators.iter().enumerate() {
            for i in 0..self.n {
                for j in 0..self.n {
                    if w[i] != w[j] && g[(i, j)].abs() > ORTHO_TOL {
                        return Err(Error::WeightIncompatible { index: index + 1 });
                    }
                }
            }
        }
        Ok(())
    }

    /// (γx, λ): acts on the first n coordinates and leaves the rest alone.
    pub fn act_source(&self, element: &GroupElement, u: &[f64]) -> Vec<f64> {
        let mut out = u.to_vec();
        for i in 0..self.n {
            out[i] = (0..self.n).map(|j| element.source[(i, j)] * u[j]).sum();
        }
        out
    }

    pub fn act_target(&self, element: &GroupElement, y: &[f64]) -> Vec<f64> {
        (0..self.p).map(|i| (0..self.p).map(|j| element.target[(i, j)] * y[j]).sum()).collect()
    }

    /// (1/|Γ|) Σ_γ ⟨γu, γv⟩. Source vectors may carry trailing parameter coordinates.
    pub fn haar_inner_product(&self, side: Side, u: &[f64], v: &[f64]) -> Result<f64> {
        if u.len() != v.len() {
            return Err(Error::Dimension("inner product of vectors of different length".into()));
        }
        let ok = match side {
            Side::Source => u.len() >= self.n,
            Side::Target => u.len() == self.p,
        };
        if !ok {
            return Err(Error::Dimension(format!("vector of length {} for {side:?} side", u.len())));
        }
        let mut total = 0.0;
        for el in &self.elements {
            let (gu, gv) = match side {
                Side::Source => (self.act_source(el, u), self.act_source(el, v)),
                Side::Target => (self.act_target(el, u), self.act_target(el, v)),
            };
            total += gu.iter().zip(&gv).map(|(a, b)| a * b).sum::<f64>();
        }
        Ok(total / self.elements.len() as f64)
    }
}

fn close(a: &DMatrix<f64>, b: &DMatrix<f64>) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= MATCH_TOL)
}
