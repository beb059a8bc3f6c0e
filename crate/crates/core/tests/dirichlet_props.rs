use proptest::prelude::*;
use radialcap::diffusion::exact_hitting_prob;
use radialcap::dirichlet::{
    capacity_upper_bound, chebyshev_nodes, drifted_capacity, operator_residual, solve_dirichlet_closed,
    solve_dirichlet_ode, Profile,
};
use radialcap::{Constellation, ModelSpace, RadialExpr};

fn model(kind: usize, m: usize) -> ModelSpace {
    match kind {
        0 => ModelSpace::euclidean(m),
        1 => ModelSpace::hyperbolic(m),
        _ => ModelSpace::new(m, RadialExpr::parse("r + r^3").unwrap()).unwrap(),
    }
}

fn constellation(kind: usize, m: usize, h_scale: f64) -> Constellation {
    let base = Constellation::self_constellation(model(kind, m));
    let h = RadialExpr::parse(&format!("{h_scale:.3} / (1 + r)")).unwrap();
    Constellation::new(m + 1, base.model().clone(), RadialExpr::constant(1.0), RadialExpr::constant(0.0), h, base.tangency())
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn closed_form_and_ode_agree(
        kind in 0usize..3, m in 2usize..=5, h_scale in 0.0f64..2.0,
        p in 2.0f64..6.0, rho in 0.3f64..2.0, stretch in 1.2f64..4.0,
    ) {
        let c = constellation(kind, m, h_scale);
        let big_r = rho * stretch;
        let closed = solve_dirichlet_closed(&c, p, rho, big_r).unwrap();
        let ode = solve_dirichlet_ode(&c, p, rho, big_r, 2000).unwrap();
        let exact = closed.sample(&ode.nodes).unwrap();
        for (k, (&a, &b)) in exact.iter().zip(&ode.psi).enumerate() {
            prop_assert!((a - b).abs() < 1e-6, "node {}: {} vs {}", k, a, b);
        }
        let probes = chebyshev_nodes(rho, big_r, 17);
        prop_assert!(operator_residual(&c, p, &closed, &probes).unwrap() < 1e-6);
    }

    #[test]
    fn solution_increases_from_zero_to_one(kind in 0usize..3, m in 2usize..=5, p in 2.0f64..6.0, rho in 0.3f64..2.0) {
        let c = constellation(kind, m, 0.5);
        let big_r = 3.0 * rho;
        let sol = solve_dirichlet_closed(&c, p, rho, big_r).unwrap();
        let mut nodes: Vec<f64> = (0..=40).map(|i| rho + (big_r - rho) * i as f64 / 40.0).collect();
        nodes[40] = big_r;
        let psi = sol.sample(&nodes).unwrap();
        prop_assert_eq!(psi[0], 0.0);
        prop_assert_eq!(*psi.last().unwrap(), 1.0);
        prop_assert!(psi.windows(2).all(|w| w[1] > w[0]));
        prop_assert!(sol.dpsi(rho).unwrap() > 0.0);
    }

    #[test]
    fn drifted_capacity_decreases_in_outer_radius(kind in 0usize..3, m in 2usize..=5, p in 2.0f64..6.0, rho in 0.3f64..2.0) {
        let c = constellation(kind, m, 0.3);
        let caps: Vec<f64> = [1.5, 2.0, 4.0, 8.0]
            .iter()
            .map(|&s| drifted_capacity(&c, p, rho, s * rho).unwrap())
            .collect();
        prop_assert!(caps.iter().all(|&x| x > 0.0 && x.is_finite()));
        prop_assert!(caps.windows(2).all(|w| w[1] < w[0]), "{:?}", caps);
    }

    #[test]
    fn bound_is_linear_in_flux(p in 2.0f64..5.0, flux in 0.01f64..100.0) {
        let c = constellation(1, 3, 1.0);
        let one = capacity_upper_bound(&c, p, 1.0, 3.0, 1.0).unwrap();
        let scaled = capacity_upper_bound(&c, p, 1.0, 3.0, flux).unwrap();
        prop_assert!((scaled - flux * one).abs() <= 1e-12 * scaled);
    }

    #[test]
    fn drifted_capacity_is_the_model_capacity_at_p_two(kind in 0usize..3, m in 2usize..=5, rho in 0.3f64..2.0, stretch in 1.2f64..20.0) {
        let c = Constellation::self_constellation(model(kind, m));
        let big_r = rho * stretch;
        let drifted = drifted_capacity(&c, 2.0, rho, big_r).unwrap();
        let exact = c.model().exact_annulus_p_capacity(rho, big_r, 2.0).unwrap();
        prop_assert!((drifted - exact).abs() <= 1e-9 * exact);
    }

    #[test]
    fn hitting_probability_is_one_minus_psi(kind in 0usize..3, m in 2usize..=5, rho in 0.3f64..2.0, t in 0.0f64..1.0) {
        let c = Constellation::self_constellation(model(kind, m));
        let big_r = 4.0 * rho;
        let r0 = rho + t * (big_r - rho);
        let psi = solve_dirichlet_closed(&c, 2.0, rho, big_r).unwrap().psi(r0).unwrap();
        let hit = exact_hitting_prob(c.model(), r0, rho, big_r).unwrap();
        prop_assert!((hit - (1.0 - psi)).abs() < 1e-9);
        prop_assert!((0.0..=1.0).contains(&hit));
    }
}
