//! The relative singular set: a finite union of coordinate subspaces of the state space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::GroupAction;
use crate::weights::WeightSystem;

/// A distance-to-Σ oracle. Bundled analyses use [`SigmaSet`]; other implementations
/// can be plugged into code that only needs distances.
pub trait DistanceOracle {
    fn distance(&self, weights: &WeightSystem, u: &[f64]) -> f64;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SigmaSet {
    n: usize,
    /// Free coordinate indices (0-based) of each subspace.
    subspaces: Vec<Vec<usize>>,
}

impl SigmaSet {
    /// Σ = {0}.
    pub fn origin(n: usize) -> Self {
        Self { n, subspaces: vec![Vec::new()] }
    }

    pub fn new(n: usize, subspaces: Vec<Vec<usize>>) -> Result<Self> {
        if subspaces.is_empty() {
            return Ok(Self::origin(n));
        }
        let mut out = Vec::with_capacity(subspaces.len());
        for mut s in subspaces {
            s.sort_unstable();
            s.dedup();
            if let Some(&bad) = s.iter().find(|&&j| j >= n) {
                return Err(Error::Dimension(format!("sigma index {} exceeds n = {n}", bad + 1)));
            }
            if !out.contains(&s) {
                out.push(s);
            }
        }
        Ok(Self { n, subspaces: out })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn subspaces(&self) -> &[Vec<usize>] {
        &self.subspaces
    }

    pub fn is_origin(&self) -> bool {
        self.subspaces.iter().all(Vec::is_empty)
    }

    /// Weighted distance d_ω(x, Σ); `u` may be the state x or the full point (x, λ).
    pub fn distance(&self, weights: &WeightSystem, u: &[f64]) -> f64 {
        self.subspaces
            .iter()
            .map(|s| weights.rho_over(&u[..self.n], |j| !s.contains(&j)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Euclidean distance of the state block to Σ.
    pub fn euclidean_distance(&self, u: &[f64]) -> f64 {
        self.subspaces
            .iter()
            .map(|s| {
                u[..self.n]
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| !s.contains(j))
                    .map(|(_, x)| x * x)
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        self.subspaces.iter().any(|s| u[..self.n].iter().enumerate().all(|(j, &x)| x == 0.0 || s.contains(&j)))
    }

    /// Index of the subspace achieving the weighted distance.
    pub fn nearest(&self, weights: &WeightSystem, u: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, s) in self.subspaces.iter().enumerate() {
            let d = weights.rho_over(&u[..self.n], |j| !s.contains(&j));
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    /// Checks γΣ ⊂ Σ for every element of the group.
    pub fn validate_invariant(&self, group: &GroupAction) -> Result<()> {
        for el in group.elements() {
            for s in &self.subspaces {
                let image_rows: Vec<usize> = (0..self.n)
                    .filter(|&i| s.iter().any(|&j| el.source[(i, j)].abs() > 1e-12))
                    .collect();
                let ok = self.subspaces.iter().any(|t| image_rows.iter().all(|i| t.contains(i)));
                if !ok {
                    return Err(Error::SigmaNotInvariant);
                }
            }
        }
        Ok(())
    }
}

impl DistanceOracle for SigmaSet {
    fn distance(&self, weights: &WeightSystem, u: &[f64]) -> f64 {
        SigmaSet::distance(self, weights, u)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn distance_examples() {
        let w = WeightSystem::uniform(2);
        let s = SigmaSet::origin(2);
        assert_eq!(s.distance(&w, &[3.0, 4.0]), 5.0);

        let w = WeightSystem::new(vec![1, 2]).unwrap();
        let s = SigmaSet::new(2, vec![vec![1]]).unwrap();
        assert!((s.distance(&w, &[3.0, 5.0]) - 3.0).abs() < 1e-14);
        assert_eq!(s.distance(&w, &[0.0, 5.0]), 0.0);
        assert!(s.contains(&[0.0, 5.0]));
        assert!(!s.contains(&[1e-300, 5.0]));
    }

    #[test]
    fn union_takes_minimum() {
        let w = WeightSystem::uniform(2);
        let s = SigmaSet::new(2, vec![vec![0], vec![1]]).unwrap();
        assert_eq!(s.distance(&w, &[3.0, 0.5]), 0.5);
        assert_eq!(s.nearest(&w, &[3.0, 0.5]), 0);
    }

    #[test]
    fn out_of_range_index() {
        assert!(SigmaSet::new(1, vec![vec![1]]).is_err());
    }
}
