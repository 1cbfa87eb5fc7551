use proptest::prelude::*;
use selab_core::comparison::{check_ordering, random_suite, Conclusion};
use selab_core::constructions::build_subsolution_convection;
use selab_core::hprofile::build_h_profile;
use selab_core::solver::{newton_solve, singular_mass, Verdict};
use selab_core::{make_problem, Grid, Potential, ReactionTerm, SingularTerm};

/// Half-width of the positive hump of `-u'' = u^p` with peak 1, by RK4
/// shooting from the centre.
fn shoot_half_width(p: f64) -> f64 {
    let rhs = |u: f64| -u.max(0.0).powf(p);
    let (mut x, mut u, mut du) = (0.0, 1.0, 0.0);
    let h = 1e-5;
    loop {
        let k1 = (du, rhs(u));
        let k2 = (du + 0.5 * h * k1.1, rhs(u + 0.5 * h * k1.0));
        let k3 = (du + 0.5 * h * k2.1, rhs(u + 0.5 * h * k2.0));
        let k4 = (du + h * k3.1, rhs(u + h * k3.0));
        let un = u + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        let dn = du + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        if un <= 0.0 {
            // Linear interpolation of the crossing.
            return x + h * u / (u - un);
        }
        x += h;
        u = un;
        du = dn;
    }
}

#[test]
fn sqrt_reaction_matches_shooting() {
    let p = 0.5;
    // The hump with peak M has half-width M^{(1-p)/2} L(1).
    let l1 = shoot_half_width(p);
    let peak = (0.5 / l1).powf(2.0 / (1.0 - p));
    let mut errs = Vec::new();
    for n in [31, 63, 127] {
        let grid = Grid::interval(1.0, n).unwrap();
        let spec = make_problem(
            grid.clone(),
            Potential::Constant(1.0),
            SingularTerm::power(0.5).unwrap(),
            ReactionTerm::power(p).unwrap(),
            1.0,
            1.0,
            0.0,
        )
        .unwrap()
        .with_terms_disabled(true, true);
        let init = grid.field_from(|x| peak * 4.0 * x[0] * (1.0 - x[0]));
        let rep = newton_solve(&spec, &init, 1e-12, 60).unwrap();
        assert_eq!(rep.verdict, Verdict::Converged);
        errs.push((rep.max_value - peak).abs() / peak);
    }
    assert!(errs[2] < 1e-3, "{errs:?}");
    let order = (errs[1] / errs[2]).log2();
    assert!(order > 1.8, "order {order}, {errs:?}");
}

#[test]
fn quadratic_convection_matches_hopf_cole() {
    // -v'' + v'^2 = 1, v(0) = v(1) = 0 has v = ln cosh(1/2) - ln cosh(x - 1/2).
    let exact = |x: f64| 0.5f64.cosh().ln() - (x - 0.5).cosh().ln();
    let mut errs = Vec::new();
    for n in [31, 63, 127] {
        let grid = Grid::interval(1.0, n).unwrap();
        // p = min(λ f(1), -K g(1)) = min(2, 1) = 1.
        let spec = make_problem(
            grid.clone(),
            Potential::Constant(-1.0),
            SingularTerm::power(0.7).unwrap(),
            ReactionTerm::power(0.5).unwrap(),
            2.0,
            2.0,
            0.0,
        )
        .unwrap();
        let c = build_subsolution_convection(&spec).unwrap();
        let e = grid
            .points()
            .zip(c.field.iter())
            .fold(0.0f64, |m, (x, v)| m.max((v - exact(x[0])).abs()));
        errs.push(e);
    }
    assert!(errs[2] < 1e-5, "{errs:?}");
    for w in errs.windows(2) {
        assert!((w[0] / w[1]).log2() > 1.8, "{errs:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn h_profile_is_increasing_and_convex(alpha in 0.1f64..0.9) {
        let g = SingularTerm::power(alpha).unwrap();
        let prof = build_h_profile(&g, 1.0, 1e-10).unwrap();
        let mut prev = (0.0, 0.0);
        for i in 1..=40 {
            let s = i as f64 / 40.0;
            let (h, dh) = prof.eval(s);
            prop_assert!(h > prev.0 && dh >= prev.1 - 1e-9, "s={} h={} dh={}", s, h, dh);
            prev = (h, dh);
        }
    }

    #[test]
    fn singular_mass_decreases_in_eps(alpha in 0.1f64..0.95, e1 in 1e-4f64..1e-1, scale in 0.1f64..3.0) {
        let grid = Grid::interval(1.0, 31).unwrap();
        let g = SingularTerm::power(alpha).unwrap();
        let u = grid.field_from(|x| scale * (std::f64::consts::PI * x[0]).sin());
        let m1 = singular_mass(&grid, &g, &u, e1).unwrap();
        let m2 = singular_mass(&grid, &g, &u, 2.0 * e1).unwrap();
        prop_assert!(m1.is_finite() && m2 < m1);
    }

    #[test]
    fn comparison_suite_never_red_flags(seed in 0u64..1000) {
        let inst = &random_suite(seed, 1).unwrap()[0];
        let psi = |k: usize, s: f64| inst.psi(k, s);
        let rep = check_ordering(&inst.grid, &psi, &inst.v, &inst.w, 1e-8).unwrap();
        prop_assert_ne!(rep.conclusion, Conclusion::RedFlag);
        prop_assert!(rep.ordered);
    }
}
