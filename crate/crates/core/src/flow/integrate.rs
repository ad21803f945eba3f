use std::fmt;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use super::field::{bump_chi, kuo_velocity, state_velocity};
use super::HomotopyProblem;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowTolerances {
    pub atol: f64,
    pub rtol: f64,
    /// Fraction of the distance to Σ a single step may cover.
    pub eta: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for FlowTolerances {
    fn default() -> Self {
        Self { atol: 1e-10, rtol: 1e-8, eta: 0.1, h_min: 1e-15, h_max: 0.05, max_steps: 200_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    StiffnessNearSigma,
    LeftChart,
    KuoViolated,
    MaxSteps,
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Termination::Completed => "completed",
            Termination::StiffnessNearSigma => "stiffness near Σ",
            Termination::LeftChart => "left chart",
            Termination::KuoViolated => "Kuo condition violated on support",
            Termination::MaxSteps => "step budget exhausted",
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceRow {
    /// Signed flow time, t − t₀.
    pub s: f64,
    pub t: f64,
    pub u: Vec<f64>,
    pub d_omega: f64,
    /// ‖F(u(s), t(s)) − F(u₀, t₀)‖.
    pub f_drift: f64,
    pub chi: f64,
    pub orth_residual: f64,
    /// Size of the step that produced this row (0 for the initial row).
    pub step: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowTrace {
    pub initial: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
    pub rows: Vec<TraceRow>,
    pub termination: Termination,
    /// Point where the field could not be formed, if any.
    pub witness: Option<Vec<f64>>,
}

impl FlowTrace {
    pub fn completed(&self) -> bool {
        self.termination == Termination::Completed
    }

    pub fn final_point(&self) -> &[f64] {
        &self.rows.last().expect("trace has an initial row").u
    }

    pub fn final_t(&self) -> f64 {
        self.rows.last().expect("trace has an initial row").t
    }

    pub fn csv_header(dim: usize) -> Vec<String> {
        let mut h = vec!["s".to_string(), "t".to_string()];
        h.extend((1..=dim).map(|i| format!("u{i}")));
        h.extend(["d_omega", "F_drift", "chi", "orth_residual", "step"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{}", Self::csv_header(self.initial.len()).join(","))?;
        for r in &self.rows {
            let mut fields = vec![r.s, r.t];
            fields.extend(&r.u);
            fields.extend([r.d_omega, r.f_drift, r.chi, r.orth_residual, r.step]);
            let line: Vec<String> = fields.iter().map(|x| format!("{x:?}")).collect();
            writeln!(w, "{}", line.join(","))?;
        }
        Ok(())
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Rhs<'a> {
    problem: &'a HomotopyProblem,
    lambda: &'a [f64],
    t0: f64,
    dir: f64,
}

impl Rhs<'_> {
    fn point(&self, x: &[f64]) -> Vec<f64> {
        let mut u = x.to_vec();
        u.extend_from_slice(self.lambda);
        u
    }

    fn eval(&self, tau: f64, x: &[f64]) -> std::result::Result<Vec<f64>, Vec<f64>> {
        let u = self.point(x);
        match state_velocity(self.problem, &u, self.t0 + self.dir * tau) {
            Ok((v, _, _)) => Ok(v.into_iter().map(|a| self.dir * a).collect()),
            Err(()) => Err(u),
        }
    }
}

fn make_row(problem: &HomotopyProblem, u: Vec<f64>, s: f64, t: f64, f0: &[f64], step: f64) -> TraceRow {
    let d_omega = problem.sigma.distance(&problem.weights, &u);
    let ft = problem.value(&u, t);
    let drift: Vec<f64> = ft.iter().zip(f0).map(|(a, b)| a - b).collect();
    let chi = bump_chi(problem, &u);
    let orth_residual = if d_omega > 0.0 && chi > 0.0 { kuo_velocity(problem, &u, t).map_or(0.0, |(_, o)| o) } else { 0.0 };
    TraceRow { s, t, d_omega, f_drift: rng::norm(&drift), chi, orth_residual, step, u }
}

/// Integrates u' = X(u, t) from (u₀, t₀) until t = t₁ with an embedded 5(4) Runge–Kutta pair.
///
/// Only the state block moves: λ is copied through and t advances exactly with the flow time.
pub fn integrate_flow(problem: &HomotopyProblem, u0: &[f64], t0: f64, t1: f64, tol: &FlowTolerances) -> Result<FlowTrace> {
    if u0.len() != problem.dim() {
        return Err(Error::Dimension(format!("initial point of length {}, expected {}", u0.len(), problem.dim())));
    }
    if rng::norm(u0) >= problem.horn.radius {
        return Err(Error::Invalid("initial point outside the ball".into()));
    }
    let n = problem.n();
    let f0 = problem.value(u0, t0);
    let mut trace = FlowTrace {
        initial: u0.to_vec(),
        t0,
        t1,
        rows: vec![make_row(problem, u0.to_vec(), 0.0, t0, &f0, 0.0)],
        termination: Termination::Completed,
        witness: None,
    };
    let span = (t1 - t0).abs();
    let dir = if t1 >= t0 { 1.0 } else { -1.0 };
    if span == 0.0 {
        return Ok(trace);
    }
    if problem.sigma.contains(u0) {
        trace.rows.push(make_row(problem, u0.to_vec(), t1 - t0, t1, &f0, span));
        return Ok(trace);
    }

    let lambda = &u0[n..];
    let rhs = Rhs { problem, lambda, t0, dir };
    let weights = problem.weights.weights();
    let mut x = u0[..n].to_vec();
    let mut tau = 0.0;
    let mut k1 = match rhs.eval(0.0, &x) {
        Ok(k) => k,
        Err(w) => {
            trace.termination = Termination::KuoViolated;
            trace.witness = Some(w);
            return Ok(trace);
        }
    };
    let clamp = |x: &[f64], v: &[f64]| -> f64 {
        let d = problem.sigma.distance(&problem.weights, &rhs.point(x));
        (0..n)
            .filter(|&i| v[i] != 0.0)
            .map(|i| tol.eta * d.powi(weights[i] as i32) / v[i].abs())
            .fold(f64::INFINITY, f64::min)
    };
    let mut h = tol.h_max.min(span).min(clamp(&x, &k1));
    let mut err_old: f64 = 1e-4;
    let mut steps = 0;
    let beta = 0.04;
    let expo1 = 0.2 - 0.75 * beta;

    while tau < span {
        if steps >= tol.max_steps {
            trace.termination = Termination::MaxSteps;
            return Ok(trace);
        }
        h = h.min(clamp(&x, &k1)).min(tol.h_max).min(span - tau);
        if h < tol.h_min && span - tau > tol.h_min {
            trace.termination = Termination::StiffnessNearSigma;
            return Ok(trace);
        }
        let mut k = vec![k1.clone()];
        let mut failed = None;
        for stage in 1..7 {
            let y: Vec<f64> =
                (0..n).map(|i| x[i] + h * (0..stage).map(|j| A[stage][j] * k[j][i]).sum::<f64>()).collect();
            match rhs.eval(tau + C[stage] * h, &y) {
                Ok(v) => k.push(v),
                Err(w) => {
                    failed = Some(w);
                    break;
                }
            }
        }
        if let Some(w) = failed {
            trace.termination = Termination::KuoViolated;
            trace.witness = Some(w);
            return Ok(trace);
        }
        let y_new: Vec<f64> = (0..n).map(|i| x[i] + h * (0..6).map(|j| A[6][j] * k[j][i]).sum::<f64>()).collect();
        let err = ((0..n)
            .map(|i| {
                let e = h * (0..7).map(|j| E[j] * k[j][i]).sum::<f64>();
                let sc = tol.atol + tol.rtol * x[i].abs().max(y_new[i].abs());
                (e / sc).powi(2)
            })
            .sum::<f64>()
            / n as f64)
            .sqrt();
        steps += 1;
        let fac11 = err.powf(expo1);
        if err <= 1.0 {
            let fac = (fac11 / err_old.powf(beta) / 0.9).clamp(0.1, 5.0);
            tau = if span - tau - h <= 1e-15 * span { span } else { tau + h };
            let step = h;
            x = y_new;
            k1 = k.swap_remove(6);
            err_old = err.max(1e-4);
            let u = rhs.point(&x);
            let s = dir * tau;
            trace.rows.push(make_row(problem, u.clone(), s, t0 + s, &f0, step));
            if rng::norm(&u) >= problem.horn.radius {
                trace.termination = Termination::LeftChart;
                return Ok(trace);
            }
            h /= fac;
        } else {
            h /= (fac11 / 0.9).min(5.0);
        }
    }
    // land exactly on t1
    if let Some(last) = trace.rows.last_mut() {
        last.t = t1;
        last.s = t1 - t0;
    }
    Ok(trace)
}
