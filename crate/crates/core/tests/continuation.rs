use ssprofile::continuation::*;
use ssprofile::expander::*;
use ssprofile::*;

fn demo_params() -> PhysicalParams {
    PhysicalParams::new(3, 0.5, 1.0, 1.0, 1.0, 1.0, -2.0 / 3.0).unwrap()
}

fn passing_bd(p: &PhysicalParams) -> BoundaryData {
    BoundaryData::new(p, 1e-3, 1e-2, 1e-2, 5e-4, 0.375).unwrap()
}

fn startup() -> Startup {
    Startup { p_exponent: 0.0, u_slope: 0.0, theta0: 0.0 }
}

fn solve(r_max: f64, outer: usize) -> (PhysicalParams, BoundaryData, ProfileTriple, ProfileTriple) {
    let p = demo_params();
    let bd = passing_bd(&p);
    let grid = build_grid_rmin(bd.delta, r_max, 256, outer, 1e-6).unwrap();
    let inner = picard_solve(&p, &bd, &grid, 1e-15, 60).unwrap().profile;
    let global = extend_global(&inner, &p, &grid, DEFAULT_RTOL).unwrap();
    (p, bd, inner, global)
}

#[test]
fn fit_synthetic_density() {
    let g = build_grid(1.0, 100.0, 16, 256, 1.0).unwrap();
    let n = g.len();
    let p: Vec<f64> = g.nodes.iter().map(|r| 2.0 + 3.0 / (r * r)).collect();
    let prof = ProfileTriple::new(g, p, vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], None, startup(), Mode::Expander).unwrap();
    let fit = fit_asymptotics(&prof, default_fit_window(100.0)).unwrap();
    assert!((fit.p_inf - 2.0).abs() <= 1e-9, "{}", fit.p_inf);
    assert!((fit.rate_p - 2.0).abs() <= 1e-3, "{}", fit.rate_p);
    assert_eq!(fit.u_inf, 0.0);
    assert_eq!(fit.theta_inf, 0.0);
}

#[test]
fn fit_power_tail_recovers_rate() {
    let r: Vec<f64> = (0..50).map(|i| 10.0 + i as f64).collect();
    let f: Vec<f64> = r.iter().map(|x| -1.5 + 4.0 * x.powf(-3.0)).collect();
    let (f_inf, c, rate, rms) = fit_power_tail(&r, &f);
    assert!((f_inf + 1.5).abs() < 1e-10 && (c - 4.0).abs() < 1e-6 && (rate - 3.0).abs() < 1e-6 && rms < 1e-12);
}

#[test]
fn fit_needs_enough_nodes() {
    let g = build_grid(1.0, 100.0, 16, 16, 1.0).unwrap();
    let n = g.len();
    let prof = ProfileTriple::new(g, vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], None, startup(), Mode::Expander).unwrap();
    assert!(matches!(fit_asymptotics(&prof, [95.0, 100.0]), Err(Error::FitDegenerate(_))));
}

/// Independent restatement of every inequality of the constant chain.
fn chain_holds(c: &BootstrapConstants, p: &PhysicalParams, bd: &BoundaryData) -> bool {
    let (m1, m1p, m2) = (c.m1, c.m1p, c.m2);
    let (a, pd, dl, th, al) = (bd.a_slope, bd.p_delta, bd.delta, bd.theta0, p.alpha);
    let ll = |x: f64, y: f64| x <= 0.1 * y * (1.0 + 1e-12);
    let le = |x: f64, y: f64| x <= y * (1.0 + 1e-12);
    ll(m2, m1)
        && ll(m1, m1p)
        && ll(m1p, 1.0)
        && ll(a, m1)
        && ll(th, m2)
        && ll(a * a, pd * m2)
        && le(m1p * (1.0 / (dl * dl * pd.powf(1.0 - al))).ln(), 1.0)
        && le(pd.powf(1.0 - al) / a * m1p, 1.0)
        && ll(m2, m1 * pd.powf(0.5 + al))
        && ll(m1 * m1p, pd * m2)
        && ll(m1.powi(3), pd.powf(1.0 - 2.0 * al) * th)
        && ll(m1 * m1p, th * pd.powf(1.0 - al))
        && ll(m1.powi(3) / pd.powf(1.0 - 2.0 * al) + m1 * m1p / pd.powf(1.0 - al), th)
}

#[test]
fn bootstrap_constants_feasible_for_tiny_data() {
    let p = demo_params();
    let bd = BoundaryData { a_slope: 1e-13, delta: 1e-2, p_delta: 1e-4, theta0: 1e-19, eps_norm: 0.375 };
    let c = find_bootstrap_constants(&p, &bd).unwrap();
    assert!(chain_holds(&c, &p, &bd), "{c:?}");
    assert!(c.m2 <= 0.1 * c.m1 * (1.0 + 1e-12) && c.m1 <= 0.1 * c.m1p * (1.0 + 1e-12));
}

#[test]
fn bootstrap_constants_infeasible_for_large_slope() {
    let p = demo_params();
    let bd = BoundaryData::new(&p, 0.4, 1e-2, 1e-2, 1e-3, 0.375).unwrap();
    match find_bootstrap_constants(&p, &bd) {
        Err(Error::Infeasible { violated, ratio }) => {
            assert!(!violated.is_empty() && ratio > 0.0);
            let s = bootstrap_search(&p, &bd);
            assert_eq!(s.tightest.name, violated);
            assert!(!chain_holds(&s.constants, &p, &bd));
        }
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn bootstrap_search_is_deterministic() {
    let p = demo_params();
    let bd = passing_bd(&p);
    assert_eq!(bootstrap_search(&p, &bd), bootstrap_search(&p, &bd));
}

#[test]
fn monitor_zero_profile() {
    let p = demo_params();
    let bd = passing_bd(&p);
    let g = build_grid_rmin(bd.delta, 10.0, 64, 64, 1e-6).unwrap();
    let n = g.len();
    let prof = ProfileTriple::new(g, vec![1.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], None, startup(), Mode::Expander).unwrap();
    let c = BootstrapConstants { m1: 1e-2, m1p: 1e-1, m2: 1e-3 };
    let v = bootstrap_monitor(&prof, &c, &bd, &p);
    assert!(v.z.iter().all(|&z| z == 0.0));
    assert!(v.verdict);
}

#[test]
fn monitor_flags_scaled_velocity() {
    let (p, bd, _, mut global) = solve(50.0, 512);
    let c = bootstrap_search(&p, &bd).constants;
    for i in 0..global.len() {
        global.u[i] *= 10.0;
        global.u_prime[i] *= 10.0;
    }
    let v = bootstrap_monitor(&global, &c, &bd, &p);
    assert!(!v.verdict && v.z_delta > 0.5);
    assert!(v.z.windows(2).all(|w| w[1] >= w[0]));
}

#[test]
fn extension_of_zero_state_is_stationary() {
    let p = demo_params();
    let grid = build_grid_rmin(1.0, 20.0, 32, 128, 1e-4).unwrap();
    let inner_grid = grid.inner();
    let n = inner_grid.len();
    let inner = ProfileTriple::new(inner_grid, vec![0.3; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n], None, startup(), Mode::Expander).unwrap();
    let g = extend_global(&inner, &p, &grid, DEFAULT_RTOL).unwrap();
    assert!(g.p.iter().all(|&x| x == 0.3));
    assert!(g.u.iter().chain(&g.theta).chain(&g.u_prime).chain(&g.theta_prime).all(|&x| x == 0.0));
}

#[test]
fn extension_rejects_mismatched_grid() {
    let (p, _, inner, _) = solve(10.0, 64);
    let other = build_grid_rmin(2e-2, 10.0, 256, 64, 1e-6).unwrap();
    assert!(extend_global(&inner, &p, &other, DEFAULT_RTOL).is_err());
}

#[test]
fn integrator_self_convergence() {
    let p = demo_params();
    let bd = passing_bd(&p);
    let grid = build_grid_rmin(bd.delta, 10.0, 256, 128, 1e-6).unwrap();
    let inner = picard_solve(&p, &bd, &grid, 1e-15, 60).unwrap().profile;
    let a = extend_global(&inner, &p, &grid, 1e-9).unwrap();
    let b = extend_global(&inner, &p, &grid, 1e-11).unwrap();
    let last = grid.len() - 1;
    for (x, y) in [(a.p[last], b.p[last]), (a.u[last], b.u[last]), (a.u_prime[last], b.u_prime[last]), (a.theta[last], b.theta[last]), (a.theta_prime[last], b.theta_prime[last])] {
        assert!((x - y).abs() <= 1e-7 * y.abs(), "{x} vs {y}");
    }
}

#[test]
fn integrate_nodes_exponential() {
    let f = |_r: f64, y: &[f64; 5]| [y[0], -y[1], 2.0 * y[2], 0.0, 1.0];
    let nodes: Vec<f64> = (0..=20).map(|i| i as f64 * 0.1).collect();
    let out = integrate_nodes(&f, &nodes, [1.0, 1.0, 1.0, 1.0, 0.0], 1e-10, |_, _| Ok(())).unwrap();
    for (r, y) in nodes.iter().zip(&out) {
        assert!((y[0] - r.exp()).abs() <= 1e-8 * r.exp());
        assert!((y[1] - (-r).exp()).abs() <= 1e-8);
        assert!((y[2] - (2.0 * r).exp()).abs() <= 1e-8 * (2.0 * r).exp());
        assert_eq!(y[3], 1.0);
        assert!((y[4] - r).abs() <= 1e-12);
    }
}

#[test]
fn integrate_nodes_reports_blow_up() {
    let f = |_r: f64, y: &[f64; 5]| [y[0] * y[0], 0.0, 0.0, 0.0, 0.0];
    let nodes = vec![0.0, 0.5, 0.99, 2.0];
    let out = integrate_nodes(&f, &nodes, [1.0, 1.0, 1.0, 1.0, 1.0], 1e-9, |_, _| Ok(()));
    assert!(matches!(out, Err(Error::BlowUp { .. }) | Err(Error::StepSizeUnderflow { .. })));
}

#[test]
fn global_solution_properties() {
    let (p, bd, inner, global) = solve(200.0, 1024);
    let di = inner.len() - 1;
    // hand-off at delta
    for (a, b) in [(inner.p[di], global.p[di]), (inner.u[di], global.u[di]), (inner.theta_prime[di], global.theta_prime[di])] {
        assert_eq!(a, b);
    }
    assert!(mass_identity_error(&global, &p).unwrap() <= 1e-7);
    assert!(global.theta.iter().all(|&t| t >= 0.0));
    assert!(global.u.iter().zip(global.r()).all(|(u, r)| r / 2.0 - u > 0.0));
    let env = envelope_constants(&global, &p, &bd);
    assert!(env.theta_nonnegative);
    for c in [env.u, env.u_prime, env.theta, env.theta_prime, env.p_upper] {
        assert!(c.is_finite() && c > 0.0);
    }
    assert!(env.p_lower > 0.0);
}

#[test]
fn asymptotic_rates_of_demo_solution() {
    let (_, _, _, global) = solve(1000.0, 2048);
    let fit = fit_asymptotics(&global, default_fit_window(1000.0)).unwrap();
    assert!(fit.p_inf > 0.0 && fit.u_inf > 0.0 && fit.theta_inf > 0.0, "{fit:?}");
    for rate in [fit.rate_p, fit.rate_u, fit.rate_theta] {
        assert!((rate - 2.0).abs() <= 0.1, "{fit:?}");
    }
}
