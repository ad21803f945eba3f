mod common;

use common::*;
use germflow_core::{
    check_equivariance, check_kuo_condition, check_nd, check_rank_condition, grad_rho_bound_check, jets_agree_on_sigma,
    lojasiewicz_estimate, nd_implies_kuo_check, nd_kappa, perturbation_order, perturbed_margin, sample_horn,
    BridgeConstant, HornSpec, KuoCheck, KuoMetric, MapGerm, NdCheck, SigmaSet, Verdict, WeightSystem,
};

fn kuo_cert(text: &str, r: f64, width: f64, samples: usize) -> germflow_core::KuoCertificate {
    let s = spec(text);
    let cfg = KuoCheck::new(1.0, HornSpec::new(r, width, 0.5).unwrap(), samples, 42);
    check_kuo_condition(&s.germ, &s.sigma, &s.weights, &cfg)
}

/// min over a dense grid of the horn of |∂f/∂x| / |x|^{r−δ} for f = x³ − λx.
fn pitchfork_grid_margin(width: f64) -> f64 {
    let mut best = f64::INFINITY;
    let steps = 2000;
    for i in 1..=steps {
        let x = 0.5 * i as f64 / steps as f64;
        for k in 0..=steps {
            let lam = -0.5 + k as f64 / steps as f64;
            if x * x + lam * lam >= 0.25 || (x * x * x - lam * x).abs() > width * x.powi(3) {
                continue;
            }
            best = best.min((3.0 * x * x - lam).abs() / (x * x));
        }
    }
    best
}

#[test]
fn pitchfork_kuo_margin_matches_grid() {
    let cert = kuo_cert(PITCHFORK, 3.0, 0.5, 20_000);
    assert_eq!(cert.verdict, Verdict::HoldsEmpirically);
    assert_eq!(cert.metric, KuoMetric::Euclidean);
    let oracle = pitchfork_grid_margin(0.5);
    assert!((oracle - 1.5).abs() < 1e-2, "{oracle}");
    assert!(cert.min_margin >= oracle - 1e-3 && cert.min_margin <= oracle + 0.05, "{}", cert.min_margin);
    assert!((1.9..=2.1).contains(&cert.fitted_exponent));
}

#[test]
fn closed_form_margins() {
    // |f| = |x|^r everywhere, so the horn is only nonempty for widths ≥ 1.
    let square = kuo_cert("dims 1 1 1\nmap 1 1 2 0\n", 2.0, 2.0, 2000);
    assert_eq!(square.verdict, Verdict::HoldsEmpirically);
    assert!((square.min_margin - 2.0).abs() < 1e-9);

    let cube = kuo_cert("dims 1 1 1\nmap 1 1 3 0\n", 3.0, 2.0, 2000);
    assert_eq!(cube.verdict, Verdict::HoldsEmpirically);
    assert!((cube.min_margin - 3.0).abs() < 1e-9);
    assert!((cube.fitted_exponent - 2.0).abs() < 1e-6);
}

#[test]
fn kuo_check_is_deterministic() {
    let a = kuo_cert(PITCHFORK, 3.0, 0.5, 3000);
    let b = kuo_cert(PITCHFORK, 3.0, 0.5, 3000);
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
}

#[test]
fn rank_drops_on_the_pitchfork_only() {
    let s = pitchfork();
    let rank = check_rank_condition(&s.germ, &s.sigma, 0.5, 500, 1);
    assert!(!rank.full_rank);
    let w = rank.witness.unwrap();
    assert!((3.0 * w[0] * w[0] - w[1]).abs() < 1e-8 && w[0] != 0.0);

    let lin = spec("dims 2 0 1\nmap 1 1 1 0\n");
    assert!(check_rank_condition(&lin.germ, &lin.sigma, 0.5, 500, 1).full_rank);
}

#[test]
fn perturbation_keeps_margin() {
    let s = pitchfork();
    let p = spec("dims 1 1 1\nmap 1 1 5 0\n").germ;
    let m = perturbed_margin(&s.germ, &p, 1.0, KuoMetric::Euclidean, &s.weights, &[0.1, 0.01]).unwrap();
    assert!((0.9..=1.1).contains(&m.ratio));
    let zero = MapGerm::zero(1, 1, 1);
    assert_eq!(perturbed_margin(&s.germ, &zero, 0.7, KuoMetric::Euclidean, &s.weights, &[0.1, 0.01]).unwrap().ratio, 1.0);
}

#[test]
fn perturbation_order_examples() {
    let s = pitchfork();
    let order = |text: &str| perturbation_order(&spec(text).germ, &s.sigma, &s.weights, 3.0).unwrap();
    assert!(order("dims 1 1 1\nmap 1 1 5 0\n").pass);
    let x4 = order("dims 1 1 1\nmap 1 1 4 0\n");
    assert!(!x4.pass);
    assert_eq!(x4.summary(), "perturbation order 4 ≤ 4");
    assert!(perturbation_order(&MapGerm::zero(1, 1, 1), &s.sigma, &s.weights, 3.0).unwrap().pass);
}

#[test]
fn jets_along_sigma() {
    let f = pitchfork().germ;
    let sigma = SigmaSet::origin(1);
    let x5 = f.add_scaled(&spec("dims 1 1 1\nmap 1 1 5 0\n").germ, 1.0).unwrap();
    let agree = jets_agree_on_sigma(&f, &x5, 4, &sigma, 16, 3).unwrap();
    assert!(agree.agree && agree.exact);
    let x2 = f.add_scaled(&spec("dims 1 1 1\nmap 1 1 2 0\n").germ, 1.0).unwrap();
    let differ = jets_agree_on_sigma(&f, &x2, 2, &sigma, 16, 3).unwrap();
    assert!(!differ.agree);
    assert_eq!(differ.witness.unwrap(), vec![0.0, 0.0]);
}

#[test]
fn equivariance_examples() {
    let s = pitchfork();
    assert!(check_equivariance(&s.germ, &s.group, 100, 1).unwrap().equivariant);
    let square = spec("dims 1 1 1\nmap 1 1 2 0\n").germ;
    assert!(!check_equivariance(&square, &s.group, 100, 1).unwrap().equivariant);
    let trivial = spec("dims 1 1 1\nmap 1 1 2 0\n");
    assert!(check_equivariance(&square, &trivial.group, 100, 1).unwrap().equivariant);
}

#[test]
fn lojasiewicz_constant_matches_sphere_minimum() {
    let ws = WeightSystem::new(vec![1, 2]).unwrap();
    let fit = lojasiewicz_estimate(&ws, 4000, 9);
    // Oracle: ρ⁴/‖u‖⁴ = x⁴ + y² on the unit circle, minimised on a fine angle grid.
    let oracle = (0..200_000)
        .map(|k| {
            let a = k as f64 * std::f64::consts::TAU / 200_000.0;
            a.cos().powi(4) + a.sin().powi(2)
        })
        .fold(f64::INFINITY, f64::min);
    assert!((oracle - 0.75).abs() < 1e-9);
    assert!(fit.pass);
    assert!(fit.constant >= oracle - 1e-12 && fit.constant <= oracle + 1e-3, "{}", fit.constant);

    let flat = lojasiewicz_estimate(&WeightSystem::uniform(2), 100, 9);
    assert!((flat.constant - 1.0).abs() < 1e-12 && flat.exponent == 1.0);
}

#[test]
fn grad_rho_on_axes() {
    let ws = WeightSystem::new(vec![1, 3]).unwrap();
    for (i, w) in [1.0, 3.0].into_iter().enumerate() {
        let mut e = vec![0.0; 2];
        e[i] = 1.0;
        assert!((ws.grad_rho_scaled(&e).unwrap()[i] - 1.0 / w).abs() < 1e-12);
    }
    let bound = grad_rho_bound_check(&WeightSystem::uniform(2), 500, 1);
    assert!(bound.finite && bound.max_scaled <= 1.0 + 1e-12);
}

#[test]
fn horn_sampler_covers_zero_germ_ball() {
    let zero = MapGerm::zero(1, 1, 1);
    let s = pitchfork();
    let horn = HornSpec::new(3.0, 0.5, 0.5).unwrap();
    let a = sample_horn(&zero, &horn, &s.sigma, &s.weights, 100, 5);
    assert_eq!(a.samples.len(), 100);
    let b = sample_horn(&zero, &horn, &s.sigma, &s.weights, 100, 5);
    let pts = |set: &germflow_core::HornSampleSet| set.samples.iter().map(|x| x.point.clone()).collect::<Vec<_>>();
    assert_eq!(pts(&a), pts(&b));
}

#[test]
fn narrow_horn_hugs_the_branch() {
    let s = pitchfork();
    let horn = HornSpec::new(3.0, 0.1, 0.5).unwrap();
    let set = sample_horn(&s.germ, &horn, &s.sigma, &s.weights, 1000, 5);
    for h in &set.samples {
        let (x, lam) = (h.point[0], h.point[1]);
        assert!((lam - x * x).abs() <= 0.1 * x * x + 1e-15);
    }
}

#[test]
fn linear_germ_is_nd_and_kuo() {
    let lin = spec("dims 1 1 1\nmap 1 1 1 0\n").germ;
    let cfg = NdCheck { nu: vec![1.0], epsilon: 0.7, nd_width: 0.5, radius: 0.5, samples: 2000, seed: 42 };
    let nd = check_nd(&lin, &cfg);
    assert_eq!(nd.verdict, Verdict::HoldsEmpirically);
    assert!((nd.primary.min_kappa - 1.0).abs() < 1e-12);
    let bridge = nd_implies_kuo_check(&lin, &cfg, BridgeConstant::Scaled);
    assert_eq!(bridge.verdict, Verdict::HoldsEmpirically);
    assert_eq!(bridge.violations, 0);
}

#[test]
fn pitchfork_kappa_vanishes_on_the_fold_curve() {
    // On λ = 3x² the x-derivative vanishes while |f| = 2|x|³ ≤ δ‖u‖² for small x, so
    // every ν = 3 horn contains points with κ = 0.
    let f = pitchfork().germ;
    for x in [1e-2f64, 1e-3, 1e-4] {
        let u = [x, 3.0 * x * x];
        let rho = (u[0] * u[0] + u[1] * u[1]).sqrt();
        assert!((x * x * x - u[1] * x).abs() <= 0.1 * rho * rho);
        assert!(nd_kappa(&f, &[3.0], &u) < 1e-12);
    }
    let cfg = NdCheck { nu: vec![3.0], epsilon: 0.1, nd_width: 0.1, radius: 0.5, samples: 2000, seed: 42 };
    assert_eq!(check_nd(&f, &cfg).verdict, Verdict::FailsWithWitness);
}
