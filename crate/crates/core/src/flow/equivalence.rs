use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::field::bump_chi;
use super::{integrate_flow, FlowTolerances, FlowTrace, HomotopyProblem, Termination};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomeoPair {
    pub u: Vec<f64>,
    /// φ(u); absent when the forward flow did not complete.
    pub phi: Option<Vec<f64>>,
    pub round_trip_error: f64,
    pub forward: Termination,
    pub backward: Option<Termination>,
    pub lambda_preserved: bool,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomeomorphismReport {
    pub pairs: Vec<HomeoPair>,
    pub failures: usize,
    pub failure_fraction: f64,
    pub max_round_trip: f64,
    pub lambda_preserved: bool,
    pub sigma_fixed: bool,
    pub sigma_points_checked: usize,
    /// max ‖φ(γu) − γφ(u)‖ / (1 + ‖u‖) over the checked orbits.
    pub equivariance_residual: f64,
    pub orbits_checked: usize,
    pub passed: bool,
    #[serde(skip)]
    pub traces: Vec<FlowTrace>,
}

fn forward_backward(problem: &HomotopyProblem, u: &[f64], tol: &FlowTolerances) -> (HomeoPair, FlowTrace) {
    let n = problem.n();
    let forward = match integrate_flow(problem, u, 0.0, 1.0, tol) {
        Ok(tr) => tr,
        Err(_) => {
            let pair = HomeoPair {
                u: u.to_vec(),
                phi: None,
                round_trip_error: f64::NAN,
                forward: Termination::LeftChart,
                backward: None,
                lambda_preserved: true,
                ok: false,
            };
            let trace = FlowTrace { initial: u.to_vec(), t0: 0.0, t1: 1.0, rows: Vec::new(), termination: Termination::LeftChart, witness: None };
            return (pair, trace);
        }
    };
    let mut pair = HomeoPair {
        u: u.to_vec(),
        phi: None,
        round_trip_error: f64::NAN,
        forward: forward.termination,
        backward: None,
        lambda_preserved: forward.rows.iter().all(|r| r.u[n..] == u[n..]),
        ok: false,
    };
    if forward.completed() {
        let phi = forward.final_point().to_vec();
        if let Ok(back) = integrate_flow(problem, &phi, 1.0, 0.0, tol) {
            pair.backward = Some(back.termination);
            if back.completed() {
                let diff: Vec<f64> = back.final_point().iter().zip(u).map(|(a, b)| a - b).collect();
                pair.round_trip_error = rng::norm(&diff);
            }
        } else {
            pair.backward = Some(Termination::LeftChart);
        }
        pair.phi = Some(phi);
        pair.ok = pair.backward == Some(Termination::Completed)
            && pair.round_trip_error <= 1e-7 * (1.0 + rng::norm(u))
            && pair.lambda_preserved;
    }
    (pair, forward)
}

/// φ(u) = state part of the flow from (u, 0) to t = 1, with the inverse checked by flowing back.
///
/// Assumes the Kuo condition has already been certified for the base germ.
pub fn build_homeomorphism(problem: &HomotopyProblem, points: &[Vec<f64>], tol: &FlowTolerances) -> HomeomorphismReport {
    let n = problem.n();
    let results: Vec<(HomeoPair, FlowTrace)> = points.par_iter().map(|u| forward_backward(problem, u, tol)).collect();
    let (pairs, traces): (Vec<HomeoPair>, Vec<FlowTrace>) = results.into_iter().unzip();
    let failures = pairs.iter().filter(|p| !p.ok).count();
    let failure_fraction = if pairs.is_empty() { 0.0 } else { failures as f64 / pairs.len() as f64 };
    let max_round_trip = pairs.iter().filter(|p| p.ok).map(|p| p.round_trip_error).fold(0.0, f64::max);
    let lambda_preserved = pairs.iter().all(|p| p.lambda_preserved);

    // Σ×ℝˡ must be fixed pointwise: the seeds already on it, and projections of the first few seeds.
    let mut sigma_points: Vec<Vec<f64>> = points.iter().filter(|u| problem.sigma.contains(u)).cloned().collect();
    for u in points.iter().take(8) {
        let k = problem.sigma.nearest(&problem.weights, u);
        let free = &problem.sigma.subspaces()[k];
        let mut v = u.clone();
        for (j, x) in v.iter_mut().enumerate().take(n) {
            if !free.contains(&j) {
                *x = 0.0;
            }
        }
        sigma_points.push(v);
    }
    let sigma_fixed = sigma_points.iter().all(|v| {
        integrate_flow(problem, v, 0.0, 1.0, tol).is_ok_and(|tr| tr.completed() && tr.final_point() == v.as_slice())
    });

    let mut equivariance_residual: f64 = 0.0;
    let mut orbits_checked = 0;
    if !problem.group.is_trivial() {
        let base: Vec<&HomeoPair> = pairs.iter().filter(|p| p.ok).take(16).collect();
        let res: Vec<f64> = base
            .par_iter()
            .flat_map_iter(|pair| {
                let phi = pair.phi.clone().unwrap();
                problem.group.elements()[1..].iter().map(move |el| {
                    let gu = problem.group.act_source(el, &pair.u);
                    match integrate_flow(problem, &gu, 0.0, 1.0, tol) {
                        Ok(tr) if tr.completed() => {
                            let gphi = problem.group.act_source(el, &phi);
                            let d: Vec<f64> = tr.final_point().iter().zip(&gphi).map(|(a, b)| a - b).collect();
                            rng::norm(&d) / (1.0 + rng::norm(&pair.u))
                        }
                        _ => f64::INFINITY,
                    }
                })
            })
            .collect();
        orbits_checked = base.len();
        equivariance_residual = res.into_iter().fold(0.0, f64::max);
    }

    let passed = failure_fraction <= 0.01 && lambda_preserved && sigma_fixed && equivariance_residual <= 1e-7;
    HomeomorphismReport {
        pairs,
        failures,
        failure_fraction,
        max_round_trip,
        lambda_preserved,
        sigma_fixed,
        sigma_points_checked: sigma_points.len(),
        equivariance_residual,
        orbits_checked,
        passed,
        traces,
    }
}

/// θ = P·Gᵀ/‖G‖², the rank-one map with θ(G) = P; zero when G = 0.
pub fn contact_theta(g: &[f64], p: &[f64]) -> DMatrix<f64> {
    let gg: f64 = g.iter().map(|x| x * x).sum();
    let m = g.len();
    if gg == 0.0 {
        return DMatrix::zeros(m, m);
    }
    DMatrix::from_fn(m, m, |i, j| p[i] * g[j] / gg)
}

/// τ = (I + θ)⁻¹, defined while ‖θ‖ < 1.
pub fn contact_tau(theta: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norm = crate::linalg::operator_norm(theta);
    if norm >= 1.0 {
        return Err(Error::NeighborhoodTooLarge { norm });
    }
    let m = theta.nrows();
    let inv = (DMatrix::identity(m, m) + theta).try_inverse().ok_or(Error::NeighborhoodTooLarge { norm })?;
    Ok(inv)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactOptions {
    /// Values of ‖G‖ and ‖P_φ‖ at or below this are treated as exact zeros.
    pub zero_tol: f64,
    /// Width β of the horn on which P_φ must vanish; defaults to w̄/4.
    pub beta: Option<f64>,
    /// Radius of the neighbourhood for the β-horn check; defaults to α/2.
    pub beta_radius: Option<f64>,
    pub residual_tol: f64,
    pub ray_samples: usize,
    pub ray_levels: usize,
    pub drift_traces: usize,
    pub drift_max_step: f64,
    pub drift_tol: f64,
}

impl Default for ContactOptions {
    fn default() -> Self {
        Self {
            zero_tol: 1e-9,
            beta: None,
            beta_radius: None,
            residual_tol: 1e-6,
            ray_samples: 8,
            ray_levels: 6,
            drift_traces: 32,
            drift_max_step: 1e-3,
            drift_tol: 1e-5,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactSample {
    pub u: Vec<f64>,
    pub g_norm: f64,
    pub p_norm: f64,
    pub theta_norm: f64,
    pub residual: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RayDecay {
    pub start: Vec<f64>,
    /// (d_ω, ‖d_ω^{−r}P_φ‖) from the start point towards Σ.
    pub levels: Vec<(f64, f64)>,
    pub decays: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContactReport {
    pub samples: usize,
    /// Samples outside the shrunk neighbourhood, where ‖θ‖ < 1 could not be ensured.
    pub excluded: usize,
    pub radius: f64,
    pub max_residual: f64,
    pub max_theta_norm: f64,
    pub worst: Option<ContactSample>,
    pub beta: f64,
    pub beta_radius: f64,
    pub beta_horn_samples: usize,
    pub beta_horn_nonzero: usize,
    pub rays: Vec<RayDecay>,
    pub drift_law_max_error: f64,
    pub drift_rows_checked: usize,
    pub passed: bool,
}

/// Past its largest value the ratio must shrink monotonically and end strictly below the peak.
fn decays_from_peak(levels: &[(f64, f64)]) -> bool {
    if levels.iter().any(|l| !l.1.is_finite()) {
        return false;
    }
    let (peak_idx, peak) = levels.iter().enumerate().fold((0, 0.0f64), |b, (i, l)| if l.1 > b.1 { (i, l.1) } else { b });
    if peak <= 1e-12 {
        return true;
    }
    let tail = &levels[peak_idx..];
    tail.windows(2).all(|w| w[1].1 <= w[0].1 * (1.0 + 1e-6) + 1e-15) && tail.len() > 1
}

/// Checks G(u) = τ(u)·G̃(φ(u)) on the homeomorphism samples, P_φ = 0 on the β-horn, decay of
/// d_ω^{−r}P_φ towards Σ, and the drift law d/ds F = (1−χ)p along trajectories.
pub fn verify_contact_identity(
    problem: &HomotopyProblem,
    homeo: &HomeomorphismReport,
    tol: &FlowTolerances,
    opts: &ContactOptions,
) -> Result<ContactReport> {
    let target = problem.target_germ()?;
    let r = problem.horn.degree;
    let beta = opts.beta.unwrap_or(problem.horn.width / 4.0);
    let beta_radius = opts.beta_radius.unwrap_or(problem.horn.radius / 2.0);
    let snap = |v: Vec<f64>| if rng::norm(&v) <= opts.zero_tol { vec![0.0; v.len()] } else { v };

    struct Raw {
        u: Vec<f64>,
        g: Vec<f64>,
        gt: Vec<f64>,
        p: Vec<f64>,
        theta: f64,
    }
    let raws: Vec<Raw> = homeo
        .pairs
        .iter()
        .filter_map(|pair| {
            let phi = pair.phi.as_ref()?;
            let g = problem.base.value(&pair.u);
            let gt = target.value(phi);
            let p: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
            let theta = crate::linalg::operator_norm(&contact_theta(&snap(g.clone()), &snap(p.clone())));
            Some(Raw { u: pair.u.clone(), g, gt, p, theta })
        })
        .collect();

    // shrink the neighbourhood until ‖θ‖ < 1 everywhere inside it
    let radius = raws.iter().filter(|x| x.theta >= 1.0).map(|x| rng::norm(&x.u)).fold(problem.horn.radius, f64::min);
    let mut report = ContactReport {
        samples: 0,
        excluded: 0,
        radius,
        max_residual: 0.0,
        max_theta_norm: 0.0,
        worst: None,
        beta,
        beta_radius,
        beta_horn_samples: 0,
        beta_horn_nonzero: 0,
        rays: Vec::new(),
        drift_law_max_error: 0.0,
        drift_rows_checked: 0,
        passed: false,
    };
    for x in &raws {
        if rng::norm(&x.u) >= radius {
            report.excluded += 1;
            continue;
        }
        let theta = contact_theta(&snap(x.g.clone()), &snap(x.p.clone()));
        let tau = contact_tau(&theta)?;
        let tg = &tau * nalgebra::DVector::from_column_slice(&x.gt);
        let res: Vec<f64> = x.g.iter().zip(tg.iter()).map(|(a, b)| a - b).collect();
        let residual = rng::norm(&res);
        report.samples += 1;
        report.max_theta_norm = report.max_theta_norm.max(x.theta);
        if report.worst.as_ref().is_none_or(|w| residual > w.residual) {
            report.worst = Some(ContactSample {
                u: x.u.clone(),
                g_norm: rng::norm(&x.g),
                p_norm: rng::norm(&x.p),
                theta_norm: x.theta,
                residual,
            });
        }
        report.max_residual = report.max_residual.max(residual);

        let d = problem.sigma.distance(&problem.weights, &x.u);
        if rng::norm(&x.u) < beta_radius && d > 0.0 && rng::norm(&x.g) <= beta * d.powf(r) {
            report.beta_horn_samples += 1;
            if rng::norm(&x.p) > opts.zero_tol {
                report.beta_horn_nonzero += 1;
            }
        }
    }

    // decay of d^{-r} P along rays that shrink the normal coordinates
    let n = problem.n();
    let starts: Vec<Vec<f64>> =
        raws.iter().filter(|x| problem.sigma.distance(&problem.weights, &x.u) > 0.0).take(opts.ray_samples).map(|x| x.u.clone()).collect();
    report.rays = starts
        .par_iter()
        .map(|u| {
            let k = problem.sigma.nearest(&problem.weights, u);
            let free = problem.sigma.subspaces()[k].clone();
            let mut levels = Vec::with_capacity(opts.ray_levels);
            for lev in 0..opts.ray_levels {
                let s = 0.5f64.powi(lev as i32);
                let v: Vec<f64> =
                    u.iter().enumerate().map(|(j, &x)| if j < n && !free.contains(&j) { x * s } else { x }).collect();
                let d = problem.sigma.distance(&problem.weights, &v);
                let ratio = match integrate_flow(problem, &v, 0.0, 1.0, tol) {
                    Ok(tr) if tr.completed() => {
                        let gt = target.value(tr.final_point());
                        let g = problem.base.value(&v);
                        let p: Vec<f64> = gt.iter().zip(&g).map(|(a, b)| a - b).collect();
                        rng::norm(&p) / d.powf(r)
                    }
                    _ => f64::NAN,
                };
                levels.push((d, ratio));
            }
            RayDecay { start: u.clone(), decays: decays_from_peak(&levels), levels }
        })
        .collect();

    // drift law on finely stepped re-integrations
    let fine = FlowTolerances { h_max: opts.drift_max_step, ..*tol };
    let drift: Vec<(f64, usize)> = homeo
        .pairs
        .iter()
        .filter(|p| p.ok)
        .take(opts.drift_traces)
        .collect::<Vec<_>>()
        .par_iter()
        .map(|pair| {
            let Ok(tr) = integrate_flow(problem, &pair.u, 0.0, 1.0, &fine) else { return (f64::INFINITY, 0) };
            let scale = 1.0
                + tr.rows.iter().map(|row| rng::norm(&problem.pert.value(&row.u))).fold(0.0, f64::max);
            let mut worst: f64 = 0.0;
            for w in tr.rows.windows(2) {
                let ds = w[1].s - w[0].s;
                if ds == 0.0 {
                    continue;
                }
                let f1 = problem.value(&w[1].u, w[1].t);
                let f0 = problem.value(&w[0].u, w[0].t);
                let law = |row: &super::TraceRow| {
                    let c = 1.0 - bump_chi(problem, &row.u);
                    problem.pert.value(&row.u).into_iter().map(move |x| c * x)
                };
                let avg: Vec<f64> = law(&w[0]).zip(law(&w[1])).map(|(a, b)| 0.5 * (a + b)).collect();
                let err: Vec<f64> = (0..f1.len()).map(|i| (f1[i] - f0[i]) / ds - avg[i]).collect();
                worst = worst.max(rng::norm(&err) / scale);
            }
            (worst, tr.rows.len().saturating_sub(1))
        })
        .collect();
    report.drift_law_max_error = drift.iter().map(|d| d.0).fold(0.0, f64::max);
    report.drift_rows_checked = drift.iter().map(|d| d.1).sum();

    report.passed = report.samples > 0
        && report.max_residual <= opts.residual_tol
        && report.beta_horn_samples > 0
        && report.beta_horn_nonzero == 0
        && report.rays.iter().all(|r| r.decays)
        && report.drift_law_max_error <= opts.drift_tol;
    Ok(report)
}
