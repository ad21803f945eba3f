use std::fs;
use std::path::Path;
use std::time::Instant;

use germflow_core::flow::HomeoPair;
use germflow_core::{
    build_homeomorphism, check_equivariance, check_horn_inclusion, check_kuo_condition, check_nd, check_rank_condition,
    distance_monitor, field_bound, grad_rho_bound_check, integrate_flow, jets_agree_on_sigma, lojasiewicz_estimate,
    nd_implies_kuo_check, parse_germ_spec, perturbation_order, pseudoinverse_identity_check, sample_horn,
    sample_zero_set, verify_contact_identity, ContactOptions, FlowTolerances, GermSpec, HomotopyProblem, HornSpec,
    KuoCertificate, KuoCheck, MapGerm, NdCheck, Verdict,
};
use serde::Serialize;

use crate::args::{Command, JobConfig};
use crate::error::{CliError, Result};
use crate::plot;
use crate::report::{Report, VerdictEntry};

/// Residual bound on the target germ at the endpoint of a flowed zero.
const ENDPOINT_TOL: f64 = 1e-6;
/// Fraction of seeds allowed to miss `ENDPOINT_TOL`.
const ENDPOINT_FAILURE_BUDGET: f64 = 0.01;
const ENVELOPE_SLACK: f64 = 0.05;
const EQUIVARIANCE_SAMPLES: usize = 200;

fn load_spec(path: &Path) -> Result<GermSpec> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read { path: path.into(), source })?;
    parse_germ_spec(&text).map_err(|source| CliError::Spec { path: path.into(), source })
}

fn timed<T>(report: &mut Report, key: &str, f: impl FnOnce() -> T) -> T {
    let start = Instant::now();
    let out = f();
    report.time(key, start.elapsed().as_secs_f64());
    out
}

fn horn(job: &JobConfig) -> Result<HornSpec> {
    Ok(HornSpec::new(job.r, job.width, job.radius)?)
}

fn tolerances(job: &JobConfig) -> FlowTolerances {
    FlowTolerances { atol: job.atol, rtol: job.rtol, eta: job.eta, ..FlowTolerances::default() }
}

/// The perturbation from `--pert`, or `target − base` from `--target`, or zero.
fn perturbation(job: &JobConfig, base: &MapGerm) -> Result<Option<MapGerm>> {
    let pert = if let Some(p) = &job.pert {
        load_spec(p)?.germ
    } else if let Some(t) = &job.target {
        load_spec(t)?.germ.sub(base)?
    } else {
        return Ok(None);
    };
    base.check_same_shape(&pert)?;
    Ok(Some(pert))
}

fn require_perturbation(job: &JobConfig, base: &MapGerm) -> Result<MapGerm> {
    perturbation(job, base)?.ok_or_else(|| CliError::Usage(format!("{} needs --pert or --target", job.command)))
}

fn kuo_entry(cert: &KuoCertificate) -> VerdictEntry {
    let witness = (cert.verdict == Verdict::FailsWithWitness).then(|| cert.worst.as_ref().map(|w| w.point.clone())).flatten();
    VerdictEntry {
        verdict: cert.verdict,
        margin: cert.min_margin.is_finite().then_some(cert.min_margin),
        witness,
        message: cert.diagnostic.clone(),
    }
}

fn kuo(report: &mut Report, spec: &GermSpec) -> Result<Verdict> {
    let job = report.job.clone();
    let mut cfg = KuoCheck::new(job.delta, horn(&job)?, job.samples, job.seed);
    cfg.metric = job.metric.into();
    let cert = timed(report, "kuo", || check_kuo_condition(&spec.germ, &spec.sigma, &spec.weights, &cfg));
    report.verdict("kuo", kuo_entry(&cert));
    report.certificate("kuo", &cert)?;
    Ok(cert.verdict)
}

pub fn run(cmd: &Command) -> Result<Report> {
    let mut report = Report::new(JobConfig::from_command(cmd));
    let spec = load_spec(&report.job.spec)?;
    match cmd {
        Command::CheckKuo(_) => {
            kuo(&mut report, &spec)?;
        }
        Command::CheckNd(_) => check_nd_cmd(&mut report, &spec)?,
        Command::CheckRank(_) => {
            let job = &report.job;
            let (radius, samples, seed) = (job.radius, job.samples, job.seed);
            let rank = timed(&mut report, "rank", || check_rank_condition(&spec.germ, &spec.sigma, radius, samples, seed));
            let entry = VerdictEntry::from_bool(rank.full_rank).witness(rank.witness.clone());
            report.verdict("rank", entry.margin(rank.min_relative_singular));
            report.certificate("rank", &rank)?;
        }
        Command::CheckPerturbation(_) => {
            let pert = require_perturbation(&report.job, &spec.germ)?;
            order_and_equivariance(&mut report, &spec, &pert)?;
            jets(&mut report, &spec, &pert)?;
        }
        Command::Flow(_) => flow_cmd(&mut report, &spec)?,
        Command::VerifyEquivalence(_) => verify_equivalence(&mut report, &spec)?,
        Command::VerifyLemmas(_) => verify_lemmas(&mut report, &spec)?,
    }
    Ok(report)
}

fn check_nd_cmd(report: &mut Report, spec: &GermSpec) -> Result<()> {
    let job = report.job.clone();
    if job.nu.len() != spec.germ.p() {
        return Err(CliError::Usage(format!("--nu needs {} entries", spec.germ.p())));
    }
    let cfg = NdCheck {
        nu: job.nu.clone(),
        epsilon: job.epsilon,
        nd_width: job.nd_width,
        radius: job.radius,
        samples: job.samples,
        seed: job.seed,
    };
    let nd = timed(report, "nd", || check_nd(&spec.germ, &cfg));
    report.verdict(
        "nd",
        VerdictEntry { verdict: nd.verdict, margin: Some(nd.primary.min_kappa), witness: nd.primary.witness.clone(), message: None },
    );
    report.verdict(
        "nd-uniform",
        VerdictEntry {
            verdict: nd.uniform.verdict,
            margin: Some(nd.uniform.min_kappa),
            witness: nd.uniform.witness.clone(),
            message: None,
        },
    );
    report.certificate("nd", &nd)?;
    let bridge = timed(report, "nd-kuo-bridge", || nd_implies_kuo_check(&spec.germ, &cfg, job.bridge_constant.into()));
    report.verdict(
        "nd-kuo-bridge",
        VerdictEntry {
            verdict: bridge.verdict,
            margin: bridge.worst_ratio.is_finite().then_some(bridge.worst_ratio),
            witness: bridge.witness.clone(),
            message: None,
        },
    );
    report.certificate("nd-kuo-bridge", &bridge)?;
    Ok(())
}

/// Returns whether the perturbation is admissible.
fn order_and_equivariance(report: &mut Report, spec: &GermSpec, pert: &MapGerm) -> Result<bool> {
    let job = report.job.clone();
    let order = perturbation_order(pert, &spec.sigma, &spec.weights, job.degree)?;
    let margin = order.min_value_order().map(|o| o as f64 - order.value_threshold);
    report.verdict(
        "perturbation-order",
        VerdictEntry { margin, ..VerdictEntry::from_bool(order.pass) }.message(order.summary()),
    );
    report.certificate("perturbation-order", &order)?;
    if !order.pass {
        eprintln!("{}", order.summary());
    }

    let base_eq = check_equivariance(&spec.germ, &spec.group, EQUIVARIANCE_SAMPLES, job.seed)?;
    let pert_eq = check_equivariance(pert, &spec.group, EQUIVARIANCE_SAMPLES, job.seed)?;
    let ok = base_eq.equivariant && pert_eq.equivariant;
    let witness = base_eq.witness.clone().or_else(|| pert_eq.witness.clone());
    report.verdict(
        "equivariance",
        VerdictEntry::from_bool(ok).margin(base_eq.worst_residual.max(pert_eq.worst_residual)).witness(witness),
    );
    #[derive(Serialize)]
    struct Equivariance<'a> {
        base: &'a germflow_core::EquivarianceReport,
        perturbation: &'a germflow_core::EquivarianceReport,
    }
    report.certificate("equivariance", &Equivariance { base: &base_eq, perturbation: &pert_eq })?;
    Ok(order.pass && ok)
}

/// When a target germ is given, compares (d+1)-jets of base and target along Σ.
fn jets(report: &mut Report, spec: &GermSpec, pert: &MapGerm) -> Result<()> {
    let job = report.job.clone();
    if job.target.is_none() {
        return Ok(());
    }
    let target = spec.germ.add_scaled(pert, 1.0)?;
    let k = job.degree.floor() as u32 + 1;
    let agreement = jets_agree_on_sigma(&spec.germ, &target, k, &spec.sigma, 64, job.seed)?;
    report.verdict(
        "jets",
        VerdictEntry::from_bool(agreement.agree).margin(agreement.worst_residual).witness(agreement.witness.clone()),
    );
    #[derive(Serialize)]
    struct Jets<'a> {
        k: u32,
        #[serde(flatten)]
        agreement: &'a germflow_core::JetAgreement,
    }
    report.certificate("jets", &Jets { k, agreement: &agreement })?;
    Ok(())
}

fn problem(report: &Report, spec: &GermSpec, pert: MapGerm) -> Result<HomotopyProblem> {
    let job = &report.job;
    Ok(HomotopyProblem::new(
        spec.germ.clone(),
        pert,
        spec.weights.clone(),
        spec.sigma.clone(),
        horn(job)?,
        spec.group.clone(),
        job.metric.into(),
    )?)
}

fn flow_cmd(report: &mut Report, spec: &GermSpec) -> Result<()> {
    let job = report.job.clone();
    if job.u0.len() != spec.germ.dim() {
        return Err(CliError::Usage(format!("--u0 needs {} entries", spec.germ.dim())));
    }
    let pert = perturbation(&job, &spec.germ)?.unwrap_or_else(|| MapGerm::zero(spec.germ.n(), spec.germ.l(), spec.germ.p()));
    let problem = problem(report, spec, pert)?;
    let tol = tolerances(&job);
    let trace = timed(report, "flow", || integrate_flow(&problem, &job.u0, job.t0, job.t1, &tol))?;

    let completed = trace.completed();
    let residual = completed.then(|| {
        let v = problem.value(trace.final_point(), job.t1);
        v.iter().map(|x| x * x).sum::<f64>().sqrt()
    });
    let entry = VerdictEntry::from_bool(completed).witness(trace.witness.clone()).message(trace.termination.to_string());
    report.verdict("flow", VerdictEntry { margin: residual, ..entry });

    #[derive(Serialize)]
    struct FlowSummary<'a> {
        termination: String,
        steps: usize,
        final_t: f64,
        final_point: &'a [f64],
        final_residual: Option<f64>,
    }
    report.certificate(
        "flow",
        &FlowSummary {
            termination: trace.termination.to_string(),
            steps: trace.rows.len().saturating_sub(1),
            final_t: trace.final_t(),
            final_point: trace.final_point(),
            final_residual: residual,
        },
    )?;
    if let Some(dir) = &job.trace_dir {
        plot::write_traces(dir, std::slice::from_ref(&trace))?;
    }
    Ok(())
}

fn endpoint_residuals(target: &MapGerm, pairs: &[HomeoPair]) -> (usize, f64) {
    let mut bad = 0;
    let mut worst: f64 = 0.0;
    for p in pairs {
        match &p.phi {
            Some(phi) => {
                let r = target.value(phi).iter().map(|x| x * x).sum::<f64>().sqrt();
                worst = worst.max(r);
                if r > ENDPOINT_TOL {
                    bad += 1;
                }
            }
            None => bad += 1,
        }
    }
    (bad, worst)
}

fn verify_equivalence(report: &mut Report, spec: &GermSpec) -> Result<()> {
    let job = report.job.clone();
    let pert = require_perturbation(&job, &spec.germ)?;
    let admissible = order_and_equivariance(report, spec, &pert)?;
    jets(report, spec, &pert)?;
    if !admissible {
        return Ok(());
    }
    if !kuo(report, spec)?.holds() {
        return Ok(());
    }

    let problem = problem(report, spec, pert)?;
    let target = problem.target_germ()?;
    let tol = tolerances(&job);

    // Zero set of f carried to the zero set of f + p.
    let seeds = sample_zero_set(&spec.germ, &spec.sigma, &spec.weights, job.radius, 1e-14, job.seeds, job.seed);
    let homeo = timed(report, "homeomorphism", || build_homeomorphism(&problem, &seeds.samples, &tol));
    let (bad, worst) = endpoint_residuals(&target, &homeo.pairs);
    let fraction = if homeo.pairs.is_empty() { 1.0 } else { bad as f64 / homeo.pairs.len() as f64 };
    let ok = homeo.passed && !homeo.pairs.is_empty() && fraction <= ENDPOINT_FAILURE_BUDGET;
    let witness = homeo.pairs.iter().find(|p| !p.ok).map(|p| p.u.clone());
    report.verdict("homeomorphism", VerdictEntry::from_bool(ok).margin(worst).witness(witness));
    #[derive(Serialize)]
    struct Homeo<'a> {
        seeds_requested: usize,
        seeds_found: usize,
        endpoint_tolerance: f64,
        endpoint_failures: usize,
        max_endpoint_residual: f64,
        #[serde(flatten)]
        report: &'a germflow_core::HomeomorphismReport,
    }
    report.certificate(
        "homeomorphism",
        &Homeo {
            seeds_requested: job.seeds,
            seeds_found: seeds.samples.len(),
            endpoint_tolerance: ENDPOINT_TOL,
            endpoint_failures: bad,
            max_endpoint_residual: worst,
            report: &homeo,
        },
    )?;
    if let Some(dir) = &job.plot_dir {
        fs::create_dir_all(dir)?;
        plot::write_overlay(&dir.join("zero_set_overlay.csv"), problem.dim(), &homeo.pairs, &target)?;
    }
    if let Some(dir) = &job.trace_dir {
        plot::write_traces(dir, &homeo.traces)?;
    }

    // Distance envelope along every completed trajectory.
    let bound = timed(report, "field-bound", || field_bound(&problem, job.samples.min(10000), job.seed ^ 0x5eed));
    let lip = grad_rho_bound_check(&spec.weights, 1000, job.seed).lipschitz;
    let cl = bound.componentwise * lip;
    let envelopes: Vec<_> =
        homeo.traces.iter().filter(|t| t.completed()).map(|t| distance_monitor(t, cl, ENVELOPE_SLACK)).collect();
    let env_fail = envelopes.iter().position(|e| !e.holds);
    let max_ratio = envelopes.iter().map(|e| e.max_ratio).fold(0.0, f64::max);
    let env_witness = env_fail.map(|k| homeo.traces.iter().filter(|t| t.completed()).nth(k).unwrap().initial.clone());
    report.verdict("envelope", VerdictEntry::from_bool(env_fail.is_none()).margin(max_ratio).witness(env_witness));
    #[derive(Serialize)]
    struct Envelope<'a> {
        field_bound: &'a germflow_core::FieldBound,
        lipschitz: f64,
        slack: f64,
        traces_checked: usize,
        violations: usize,
        max_ratio: f64,
    }
    report.certificate(
        "envelope",
        &Envelope {
            field_bound: &bound,
            lipschitz: lip,
            slack: ENVELOPE_SLACK,
            traces_checked: envelopes.len(),
            violations: envelopes.iter().filter(|e| !e.holds).count(),
            max_ratio,
        },
    )?;

    // Contact identity on horn samples.
    let horn_set = sample_horn(&spec.germ, &problem.horn, &spec.sigma, &spec.weights, job.contact_samples, job.seed + 1);
    let points: Vec<Vec<f64>> = horn_set.samples.iter().map(|s| s.point.clone()).collect();
    let horn_homeo = timed(report, "contact-flows", || build_homeomorphism(&problem, &points, &tol));
    let contact = timed(report, "contact", || verify_contact_identity(&problem, &horn_homeo, &tol, &ContactOptions::default()))?;
    let ok = contact.passed && horn_homeo.passed;
    let witness = contact.worst.as_ref().filter(|_| !ok).map(|w| w.u.clone());
    report.verdict("contact", VerdictEntry::from_bool(ok).margin(contact.max_residual).witness(witness));
    #[derive(Serialize)]
    struct Contact<'a> {
        horn_samples: usize,
        flow_failures: usize,
        max_round_trip: f64,
        #[serde(flatten)]
        report: &'a germflow_core::ContactReport,
    }
    report.certificate(
        "contact",
        &Contact {
            horn_samples: points.len(),
            flow_failures: horn_homeo.failures,
            max_round_trip: horn_homeo.max_round_trip,
            report: &contact,
        },
    )?;
    Ok(())
}

fn verify_lemmas(report: &mut Report, spec: &GermSpec) -> Result<()> {
    let job = report.job.clone();
    let samples = job.samples.min(5000);

    let fit = lojasiewicz_estimate(&spec.weights, samples, job.seed);
    report.verdict("lojasiewicz", VerdictEntry::from_bool(fit.pass).margin(fit.constant));
    report.certificate("lojasiewicz", &fit)?;

    let grad = grad_rho_bound_check(&spec.weights, samples, job.seed);
    report.verdict("grad-rho-bound", VerdictEntry::from_bool(grad.finite).margin(grad.max_scaled));
    report.certificate("grad-rho-bound", &grad)?;

    let horn = horn(&job)?;
    let inclusion = check_horn_inclusion(&spec.germ, &spec.sigma, &spec.weights, &horn, &fit, samples, job.seed);
    report.verdict(
        "horn-inclusion",
        VerdictEntry::from_bool(inclusion.violations == 0 && inclusion.samples > 0)
            .margin(inclusion.violations as f64)
            .witness(inclusion.witness.clone()),
    );
    report.certificate("horn-inclusion", &inclusion)?;

    // Pseudoinverse identity at horn points off Σ.
    let set = sample_horn(&spec.germ, &horn, &spec.sigma, &spec.weights, samples.min(1000), job.seed);
    let mut worst: f64 = 0.0;
    let mut witness = None;
    let mut checked = 0;
    for s in &set.samples {
        if let Ok(r) = pseudoinverse_identity_check(&spec.germ, &spec.weights, &s.point) {
            checked += 1;
            if r > worst {
                worst = r;
                witness = Some(s.point.clone());
            }
        }
    }
    let ok = checked > 0 && worst <= 1e-9;
    report.verdict(
        "pseudoinverse-identity",
        VerdictEntry::from_bool(ok).margin(worst).witness(if ok { None } else { witness }),
    );
    #[derive(Serialize)]
    struct Pinv {
        points_checked: usize,
        max_residual: f64,
    }
    report.certificate("pseudoinverse-identity", &Pinv { points_checked: checked, max_residual: worst })?;
    Ok(())
}
