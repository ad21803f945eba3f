mod common;

use common::*;
use germflow_core::germ::weighted_order;
use germflow_core::{
    bump_chi, jet_at, kuo_pseudo_distance, parse_germ_spec, GermSpec, MapGerm, Monomial, Polynomial, SigmaSet, Side,
    WeightSystem,
};
use proptest::prelude::*;
use rand::Rng;

const COUPLED: &str = "\
dims 2 1 2
group source 0 1 1 0
group target 0 1 1 0
map 1 1 3 0 0
map 1 -1 1 0 1
map 2 1 0 3 0
map 2 -1 0 1 1
";

fn weights_and_point() -> impl Strategy<Value = (Vec<u32>, Vec<f64>)> {
    (1usize..=5).prop_flat_map(|m| (prop::collection::vec(1u32..=4, m), prop::collection::vec(-2.0f64..2.0, m)))
}

proptest! {
    #[test]
    fn rho_is_quasi_homogeneous((w, u) in weights_and_point(), t in 1e-3f64..1e3) {
        let ws = WeightSystem::new(w).unwrap();
        let base = ws.rho(&u);
        prop_assume!(base > 0.0);
        let scaled = ws.rho(&ws.dilate(&u, t));
        prop_assert!((scaled - t * base).abs() <= 1e-12 * t * base);
    }

    #[test]
    fn rho_is_euclidean_for_unit_weights(u in prop::collection::vec(-1e3f64..1e3, 1..6)) {
        let ws = WeightSystem::uniform(u.len());
        let euclid = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        prop_assert!((ws.rho(&u) - euclid).abs() <= 1e-15 * euclid.max(1.0));
    }

    #[test]
    fn unit_sphere_normalisation((w, u) in weights_and_point()) {
        let ws = WeightSystem::new(w).unwrap();
        prop_assume!(ws.rho(&u) > 1e-6);
        prop_assert!((ws.rho(&ws.to_unit_sphere(&u)) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn sigma_distance_scales_with_dilation(u in prop::collection::vec(-1.0f64..1.0, 4), t in 1e-2f64..1e2) {
        let ws = WeightSystem::new(vec![1, 2, 3, 1]).unwrap();
        let sigma = SigmaSet::new(3, vec![vec![0], vec![2]]).unwrap();
        let d = sigma.distance(&ws, &u);
        let dt = sigma.distance(&ws, &ws.dilate(&u, t));
        prop_assert!((dt - t * d).abs() <= 1e-12 * t * d.max(1e-300));
    }

    #[test]
    fn distances_are_group_invariant(u in prop::collection::vec(-0.5f64..0.5, 3)) {
        for spec in [pitchfork(), spec(COUPLED)] {
            let u = &u[..spec.germ.dim()];
            let d = spec.sigma.distance(&spec.weights, u);
            let k = kuo_pseudo_distance(&spec.germ, &spec.weights, u);
            for el in spec.group.elements() {
                let gu = spec.group.act_source(el, u);
                prop_assert!((spec.sigma.distance(&spec.weights, &gu) - d).abs() <= 1e-9);
                prop_assert!((kuo_pseudo_distance(&spec.germ, &spec.weights, &gu) - k).abs() <= 1e-9);
            }
        }
    }

    #[test]
    fn haar_product_is_symmetric_bilinear_invariant(
        u in prop::collection::vec(-1.0f64..1.0, 3),
        v in prop::collection::vec(-1.0f64..1.0, 3),
        w in prop::collection::vec(-1.0f64..1.0, 3),
        a in -2.0f64..2.0,
    ) {
        let g = spec(COUPLED).group;
        let ip = |x: &[f64], y: &[f64]| g.haar_inner_product(Side::Source, x, y).unwrap();
        prop_assert!((ip(&u, &v) - ip(&v, &u)).abs() <= 1e-12);
        let au_w: Vec<f64> = u.iter().zip(&w).map(|(x, y)| a * x + y).collect();
        prop_assert!((ip(&au_w, &v) - (a * ip(&u, &v) + ip(&w, &v))).abs() <= 1e-12);
        for el in g.elements() {
            let (gu, gv) = (g.act_source(el, &u), g.act_source(el, &v));
            prop_assert!((ip(&gu, &gv) - ip(&u, &v)).abs() <= 1e-12);
        }
    }

    #[test]
    fn jet_of_a_jet_is_the_jet(a in prop::collection::vec(-1.0f64..1.0, 2), k in 0u32..5) {
        let f = pitchfork().germ;
        let j = jet_at(&f, &a, k).unwrap();
        prop_assert_eq!(j.rejet(&a, k), j.clone());
        let lower = jet_at(&f, &a, k.saturating_sub(1)).unwrap();
        prop_assert_eq!(j.rejet(&a, k.saturating_sub(1)), lower);
    }

    #[test]
    fn jet_error_shrinks_like_a_power(a in prop::collection::vec(-0.5f64..0.5, 2), dir in prop::collection::vec(-1.0f64..1.0, 2), k in 0u32..3) {
        // Taylor remainder of a cubic along a ray: |f(a+sh) − J^k f(a)(a+sh)| ≤ C s^{k+1}.
        let f = pitchfork().germ;
        let j = jet_at(&f, &a, k).unwrap();
        let err = |s: f64| {
            let u: Vec<f64> = a.iter().zip(&dir).map(|(x, h)| x + s * h).collect();
            (f.value(&u)[0] - j.eval(&u)[0]).abs()
        };
        let c = 8.0;
        for s in [1e-1, 1e-2, 1e-3] {
            prop_assert!(err(s) <= c * s.powi(k as i32 + 1) + 1e-15);
        }
    }

    #[test]
    fn multiplying_by_a_variable_adds_its_weight(
        terms in prop::collection::vec((prop::collection::vec(0u32..4, 3), 0.5f64..2.0), 1..5),
        var in 0usize..2,
    ) {
        let poly = Polynomial::new(3, terms.into_iter().map(|(exponents, coefficient)| Monomial { exponents, coefficient }));
        let ws = WeightSystem::new(vec![1, 3, 1]).unwrap();
        let sigma = SigmaSet::origin(2);
        let before = weighted_order(&poly, &sigma, &ws).unwrap();
        let after = weighted_order(&poly.mul_var(var), &sigma, &ws).unwrap();
        prop_assert_eq!(after, before + ws.weights()[var] as u64);
    }

    #[test]
    fn spec_round_trip(
        terms in prop::collection::vec((0usize..2, prop::collection::vec(0u32..5, 3), -4i32..=4), 1..8),
        w in prop::collection::vec(1u32..4, 3),
    ) {
        let mut comps = vec![Polynomial::zero(3), Polynomial::zero(3)];
        for (c, mut exponents, coeff) in terms {
            // germs vanish at the origin
            if exponents.iter().all(|&e| e == 0) {
                exponents[0] = 1;
            }
            comps[c] = comps[c].add(&Polynomial::monomial(3, coeff as f64 / 4.0, exponents));
        }
        let germ = MapGerm::new(2, 1, 2, comps).unwrap();
        let mut spec = GermSpec::plain(germ);
        spec.weights = WeightSystem::new(w).unwrap();
        let parsed = parse_germ_spec(&spec.to_spec_string()).unwrap();
        prop_assert_eq!(parsed, spec);
    }
}

#[test]
fn chi_sandwich() {
    let problem = pitchfork_problem(5, 1.0);
    let mut r = rng(11);
    let mut inner = 0;
    let mut outer = 0;
    for _ in 0..10_000 {
        // Mix points near the zero set with generic ones so both regions are hit.
        let x: f64 = r.random_range(-0.3..0.3);
        let lam = if r.random_bool(0.5) { x * x + r.random_range(-0.02..0.02) } else { r.random_range(-0.3..0.3) };
        let u = [x, lam];
        let ratio = (x * x * x - lam * x).abs() / (0.5 * x.abs().powi(3));
        let chi = bump_chi(&problem, &u);
        if ratio <= 0.5 {
            inner += 1;
            assert_eq!(chi, 1.0, "{u:?}");
        } else if ratio >= 1.0 {
            outer += 1;
            assert_eq!(chi, 0.0, "{u:?}");
        } else {
            assert!((0.0..=1.0).contains(&chi));
        }
    }
    assert!(inner > 100 && outer > 100);
}
