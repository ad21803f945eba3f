//! Line-oriented germ specification format.
//!
//! ```text
//! # pitchfork
//! dims 1 1 1
//! weights 1 1
//! sigma free
//! map 1 1 3 0
//! map 1 -1 1 1
//! ```

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::germ::MapGerm;
use crate::group::{GroupAction, DEFAULT_MAX_ORDER};
use crate::poly::{Monomial, Polynomial};
use crate::sigma::SigmaSet;
use crate::weights::WeightSystem;

#[derive(Clone, Debug)]
pub struct GermSpec {
    pub germ: MapGerm,
    pub weights: WeightSystem,
    pub sigma: SigmaSet,
    pub group: GroupAction,
}

impl PartialEq for GermSpec {
    fn eq(&self, other: &Self) -> bool {
        self.germ == other.germ
            && self.weights == other.weights
            && self.sigma == other.sigma
            && self.group.source_generators() == other.group.source_generators()
            && self.group.target_generators() == other.group.target_generators()
    }
}

impl GermSpec {
    /// Assembles a spec with a trivial group, unit weights and Σ = {0}.
    pub fn plain(germ: MapGerm) -> Self {
        let (n, p) = (germ.n(), germ.p());
        Self { weights: WeightSystem::uniform(germ.dim()), sigma: SigmaSet::origin(n), group: GroupAction::trivial(n, p), germ }
    }

    pub fn to_spec_string(&self) -> String {
        let g = &self.germ;
        let mut s = String::new();
        writeln!(s, "dims {} {} {}", g.n(), g.l(), g.p()).unwrap();
        let w: Vec<String> = self.weights.weights().iter().map(u32::to_string).collect();
        writeln!(s, "weights {}", w.join(" ")).unwrap();
        for sub in self.sigma.subspaces() {
            let idx: Vec<String> = sub.iter().map(|j| (j + 1).to_string()).collect();
            writeln!(s, "sigma free{}{}", if idx.is_empty() { "" } else { " " }, idx.join(" ")).unwrap();
        }
        for (src, tgt) in self.group.source_generators().iter().zip(self.group.target_generators()) {
            writeln!(s, "group source {}", matrix_entries(src)).unwrap();
            writeln!(s, "group target {}", matrix_entries(tgt)).unwrap();
        }
        for (i, c) in g.components().iter().enumerate() {
            for t in c.terms() {
                let e: Vec<String> = t.exponents.iter().map(u32::to_string).collect();
                writeln!(s, "map {} {:?} {}", i + 1, t.coefficient, e.join(" ")).unwrap();
            }
        }
        s
    }
}

fn matrix_entries(m: &DMatrix<f64>) -> String {
    let mut out = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(format!("{:?}", m[(i, j)]));
        }
    }
    out.join(" ")
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_usize(tok: &str, line: usize) -> Result<usize> {
    tok.parse().map_err(|_| parse_err(line, format!("expected a nonnegative integer, got `{tok}`")))
}

/// Accepts decimal/scientific numbers and exact rationals `a/b`.
fn parse_scalar(tok: &str, line: usize) -> Result<f64> {
    let bad = || parse_err(line, format!("invalid number `{tok}`"));
    if let Some((a, b)) = tok.split_once('/') {
        let a: i64 = a.parse().map_err(|_| bad())?;
        let b: i64 = b.parse().map_err(|_| bad())?;
        if b == 0 {
            return Err(parse_err(line, "zero denominator"));
        }
        return Ok(a as f64 / b as f64);
    }
    let v: f64 = tok.parse().map_err(|_| bad())?;
    if !v.is_finite() {
        return Err(bad());
    }
    Ok(v)
}

fn parse_rational(tok: &str, line: usize) -> Result<(u64, u64)> {
    let bad = || parse_err(line, format!("weights must be positive integers or rationals, got `{tok}`"));
    let (a, b) = match tok.split_once('/') {
        Some((a, b)) => (a.parse::<u64>().map_err(|_| bad())?, b.parse::<u64>().map_err(|_| bad())?),
        None => (tok.parse::<u64>().map_err(|_| bad())?, 1),
    };
    if a == 0 || b == 0 {
        return Err(bad());
    }
    Ok((a, b))
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn parse_germ_spec(text: &str) -> Result<GermSpec> {
    let mut dims: Option<(usize, usize, usize)> = None;
    let mut weights: Option<WeightSystem> = None;
    let mut subspaces: Vec<Vec<usize>> = Vec::new();
    let mut sources: Vec<DMatrix<f64>> = Vec::new();
    let mut targets: Vec<DMatrix<f64>> = Vec::new();
    let mut terms: Vec<Vec<Monomial>> = Vec::new();
    let mut last_line = 0;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        let need_dims = || dims.ok_or_else(|| parse_err(line, "`dims` must come first"));
        match toks[0] {
            "dims" => {
                if dims.is_some() {
                    return Err(parse_err(line, "duplicate `dims`"));
                }
                if toks.len() != 4 {
                    return Err(parse_err(line, "`dims` takes three integers n l p"));
                }
                let (n, l, p) = (parse_usize(toks[1], line)?, parse_usize(toks[2], line)?, parse_usize(toks[3], line)?);
                if n == 0 || p == 0 {
                    return Err(parse_err(line, "n and p must be positive"));
                }
                dims = Some((n, l, p));
                terms = vec![Vec::new(); p];
            }
            "weights" => {
                let (n, l, _) = need_dims()?;
                if toks.len() - 1 != n + l {
                    return Err(Error::Dimension(format!("line {line}: {} weights for {} coordinates", toks.len() - 1, n + l)));
                }
                let rats = toks[1..].iter().map(|t| parse_rational(t, line)).collect::<Result<Vec<_>>>()?;
                let lcm = rats.iter().fold(1u64, |acc, &(_, b)| acc / gcd(acc, b) * b);
                let ints = rats
                    .iter()
                    .map(|&(a, b)| u32::try_from(a * (lcm / b)).map_err(|_| parse_err(line, "weight too large")))
                    .collect::<Result<Vec<_>>>()?;
                weights = Some(WeightSystem::new(ints).map_err(|e| parse_err(line, e.to_string()))?);
            }
            "sigma" => {
                let (n, _, _) = need_dims()?;
                if toks.get(1) != Some(&"free") {
                    return Err(parse_err(line, "expected `sigma free i1 i2 ...`"));
                }
                let mut s = Vec::new();
                for t in &toks[2..] {
                    let j = parse_usize(t, line)?;
                    if j == 0 || j > n {
                        return Err(Error::Dimension(format!("line {line}: sigma index {j} outside 1..={n}")));
                    }
                    s.push(j - 1);
                }
                subspaces.push(s);
            }
            "group" => {
                let (n, _, p) = need_dims()?;
                let (side, size) = match toks.get(1) {
                    Some(&"source") => (0, n),
                    Some(&"target") => (1, p),
                    _ => return Err(parse_err(line, "expected `group source ...` or `group target ...`")),
                };
                let vals = toks[2..].iter().map(|t| parse_scalar(t, line)).collect::<Result<Vec<_>>>()?;
                if vals.len() != size * size {
                    return Err(Error::Dimension(format!("line {line}: expected {} matrix entries, got {}", size * size, vals.len())));
                }
                let m = DMatrix::from_row_slice(size, size, &vals);
                if side == 0 {
                    sources.push(m);
                } else {
                    targets.push(m);
                }
            }
            "map" => {
                let (n, l, p) = need_dims()?;
                if toks.len() != 3 + n + l {
                    return Err(Error::Dimension(format!("line {line}: `map` needs component, coefficient and {} exponents", n + l)));
                }
                let i = parse_usize(toks[1], line)?;
                if i == 0 || i > p {
                    return Err(Error::Dimension(format!("line {line}: component {i} outside 1..={p}")));
                }
                let coefficient = parse_scalar(toks[2], line)?;
                let exponents = toks[3..]
                    .iter()
                    .map(|t| t.parse::<u32>().map_err(|_| parse_err(line, format!("invalid exponent `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                if exponents.iter().all(|&e| e == 0) && coefficient != 0.0 {
                    return Err(parse_err(line, "constant term: germs must vanish at the origin"));
                }
                terms[i - 1].push(Monomial { exponents, coefficient });
            }
            other => return Err(parse_err(line, format!("unknown keyword `{other}`"))),
        }
    }

    let (n, l, p) = dims.ok_or_else(|| parse_err(last_line.max(1), "missing `dims`"))?;
    let weights = weights.unwrap_or_else(|| WeightSystem::uniform(n + l));
    let sigma = SigmaSet::new(n, subspaces)?;
    let components = terms.into_iter().map(|t| Polynomial::new(n + l, t)).collect();
    let germ = MapGerm::new(n, l, p, components)?;
    let group = GroupAction::new(n, p, sources, targets, DEFAULT_MAX_ORDER)?;
    group.validate_weights(&weights)?;
    sigma.validate_invariant(&group)?;
    Ok(GermSpec { germ, weights, sigma, group })
}
