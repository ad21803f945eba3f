//! Sparse multivariate polynomials with binary64 coefficients.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub exponents: Vec<u32>,
    pub coefficient: f64,
}

impl Monomial {
    pub fn degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        let mut v = self.coefficient;
        for (&e, &x) in self.exponents.iter().zip(u) {
            if e > 0 {
                v *= x.powi(e as i32);
            }
        }
        v
    }
}

/// Terms are kept sorted by exponent vector, merged, and free of zero coefficients.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Polynomial {
    nvars: usize,
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero(nvars: usize) -> Self {
        Self { nvars, terms: Vec::new() }
    }

    /// Builds a polynomial, merging repeated exponent vectors.
    ///
    /// Panics if an exponent vector has the wrong length; callers validate first.
    pub fn new(nvars: usize, terms: impl IntoIterator<Item = Monomial>) -> Self {
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for t in terms {
            assert_eq!(t.exponents.len(), nvars, "exponent vector length");
            *acc.entry(t.exponents).or_insert(0.0) += t.coefficient;
        }
        Self::from_map(nvars, acc)
    }

    fn from_map(nvars: usize, acc: BTreeMap<Vec<u32>, f64>) -> Self {
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|(exponents, coefficient)| Monomial { exponents, coefficient })
            .collect();
        Self { nvars, terms }
    }

    pub fn monomial(nvars: usize, coefficient: f64, exponents: Vec<u32>) -> Self {
        Self::new(nvars, [Monomial { exponents, coefficient }])
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `None` for the zero polynomial.
    pub fn total_degree(&self) -> Option<u32> {
        self.terms.iter().map(Monomial::degree).max()
    }

    pub fn constant_term(&self) -> f64 {
        self.terms
            .iter()
            .find(|t| t.exponents.iter().all(|&e| e == 0))
            .map_or(0.0, |t| t.coefficient)
    }

    pub fn max_abs_coefficient(&self) -> f64 {
        self.terms.iter().fold(0.0, |m, t| m.max(t.coefficient.abs()))
    }

    pub fn eval(&self, u: &[f64]) -> f64 {
        debug_assert_eq!(u.len(), self.nvars);
        self.terms.iter().map(|t| t.eval(u)).sum()
    }

    pub fn derivative(&self, var: usize) -> Self {
        let terms = self.terms.iter().filter(|t| t.exponents[var] > 0).map(|t| {
            let mut exponents = t.exponents.clone();
            let e = exponents[var];
            exponents[var] -= 1;
            Monomial { exponents, coefficient: t.coefficient * e as f64 }
        });
        Self::new(self.nvars, terms)
    }

    pub fn scale(&self, c: f64) -> Self {
        Self::new(
            self.nvars,
            self.terms.iter().map(|t| Monomial { exponents: t.exponents.clone(), coefficient: t.coefficient * c }),
        )
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.nvars, other.nvars);
        Self::new(self.nvars, self.terms.iter().chain(other.terms.iter()).cloned())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Multiplies by the coordinate `var`.
    pub fn mul_var(&self, var: usize) -> Self {
        Self::new(
            self.nvars,
            self.terms.iter().map(|t| {
                let mut exponents = t.exponents.clone();
                exponents[var] += 1;
                Monomial { exponents, coefficient: t.coefficient }
            }),
        )
    }

    /// Drops every term of total degree above `k`.
    pub fn truncate(&self, k: u32) -> Self {
        Self { nvars: self.nvars, terms: self.terms.iter().filter(|t| t.degree() <= k).cloned().collect() }
    }

    /// Re-expands around `a`: the result `q` satisfies `q(h) = self(a + h)`.
    pub fn shift(&self, a: &[f64]) -> Self {
        assert_eq!(a.len(), self.nvars);
        let mut acc: BTreeMap<Vec<u32>, f64> = BTreeMap::new();
        for t in &self.terms {
            let mut partial: Vec<(Vec<u32>, f64)> = vec![(vec![0; self.nvars], t.coefficient)];
            for (i, &e) in t.exponents.iter().enumerate() {
                if e == 0 {
                    continue;
                }
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                for (exp, c) in &partial {
                    let mut binom = 1.0;
                    for k in 0..=e {
                        let factor = if e - k == 0 { 1.0 } else { a[i].powi((e - k) as i32) };
                        let coef = c * binom * factor;
                        if coef != 0.0 {
                            let mut ex = exp.clone();
                            ex[i] = k;
                            next.push((ex, coef));
                        }
                        binom = binom * (e - k) as f64 / (k + 1) as f64;
                    }
                }
                partial = next;
            }
            for (exp, c) in partial {
                *acc.entry(exp).or_insert(0.0) += c;
            }
        }
        Self::from_map(self.nvars, acc)
    }

    /// Coefficient of the given exponent vector (zero if absent).
    pub fn coefficient(&self, exponents: &[u32]) -> f64 {
        self.terms
            .binary_search_by(|t| t.exponents.as_slice().cmp(exponents))
            .map_or(0.0, |i| self.terms[i].coefficient)
    }
}
