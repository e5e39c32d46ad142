//! Property tests over random inputs for the connection, profile, weight and
//! flux invariants.

use proptest::prelude::*;

use shockline::diagnostics::{relative_quantities, y_coordinate};
use shockline::hugoniot::{lambda2, lax_check, rh_residual, solve_hugoniot, EndState, GasParams};
use shockline::profile::{integrate_profile, verify_tails, ProfileOptions, ShockProfile, Weight};
use shockline::solver::{cfl_dt, choose_beta, dissipation_speed, flux, physical_flux, FluidField, Grid};

fn oracle_profile() -> ShockProfile {
    let gas = GasParams::new(2.0).unwrap();
    let conn = solve_hugoniot(EndState { rho: 1.0, u: -1.0 }, -0.9, &gas).unwrap();
    integrate_profile(&conn, &ProfileOptions::default()).unwrap()
}

fn profile_for(delta: f64) -> ShockProfile {
    let gas = GasParams::new(2.0).unwrap();
    let conn = solve_hugoniot(EndState { rho: 1.0, u: -1.0 }, -1.0 + delta, &gas).unwrap();
    integrate_profile(&conn, &ProfileOptions::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn admissible_connections_satisfy_jump_and_lax(
        gamma in 1.05..3.0_f64,
        rho in 0.2..5.0_f64,
        mach in 0.05..0.99_f64,
        frac in 0.01..0.9_f64,
    ) {
        let gas = GasParams::new(gamma).unwrap();
        let u = -mach * gas.dpressure(rho).sqrt();
        let delta = (frac * u.abs()).min(0.3);
        let conn = solve_hugoniot(EndState { rho, u }, u + delta, &gas).unwrap();
        let (r1, r2) = rh_residual(&conn);
        let scale = conn.residual_scale();
        prop_assert!(r1.abs() <= 1e-12 * scale && r2.abs() <= 1e-12 * scale, "{r1:e} {r2:e}");
        prop_assert!(conn.sigma > 0.0);
        prop_assert!(conn.left.rho > rho);
        let lax = lax_check(&conn);
        prop_assert!(lax.admissible, "{lax:?}");
    }

    #[test]
    fn numerical_flux_lies_within_dissipation_band(
        rl in 0.1..3.0_f64, ul in -3.0..3.0_f64,
        rr in 0.1..3.0_f64, ur in -3.0..3.0_f64,
    ) {
        let gas = GasParams::new(1.4).unwrap();
        let f = flux((rl, ul), (rr, ur), &gas);
        let (fl, fr) = (physical_flux(rl, ul, &gas), physical_flux(rr, ur, &gas));
        let alpha = dissipation_speed((rl, ul), (rr, ur), &gas);
        let jumps = [rr - rl, rr * ur - rl * ul];
        for k in 0..2 {
            let mid = 0.5 * (fl[k] + fr[k]);
            let band = 0.5 * alpha * jumps[k].abs();
            prop_assert!((f[k] - mid).abs() <= band * (1.0 + 1e-12) + 1e-14 * mid.abs().max(1.0));
        }
        let same = flux((rl, ul), (rl, ul), &gas);
        prop_assert_eq!(same, fl);
    }

    #[test]
    fn time_step_shrinks_when_speeds_grow(bump in 0.01..2.0_f64, at in 0usize..400) {
        let gas = GasParams::new(2.0).unwrap();
        let grid = Grid::new(40.0, 400).unwrap();
        let base = FluidField::uniform(400, EndState { rho: 1.0, u: -1.0 });
        let mut f = base.clone();
        f.mom[at] = f.rho[at] * (-1.0 - bump);
        prop_assert!(cfl_dt(&f, &grid, &gas, 0.4) <= cfl_dt(&base, &grid, &gas, 0.4));
        let fine = Grid::new(40.0, 800).unwrap();
        let f2 = FluidField::uniform(800, EndState { rho: 1.0, u: -1.0 });
        prop_assert!(cfl_dt(&f2, &fine, &gas, 0.4) <= 0.5 * cfl_dt(&base, &grid, &gas, 0.4));
    }

    #[test]
    fn relative_entropy_is_nonnegative(
        r in 0.05..4.0_f64, u in -3.0..0.0_f64,
        rt in 0.05..4.0_f64, ut in -3.0..0.0_f64,
        gamma in 1.05..3.0_f64,
    ) {
        let gas = GasParams::new(gamma).unwrap();
        let q = relative_quantities((r, u), (rt, ut), &gas).unwrap();
        prop_assert!(q.eta >= 0.0);
    }
}

#[test]
fn weight_and_interpolant_at_random_points() {
    let p = oracle_profile();
    let w = Weight::new(&p);
    let (lo, hi) = (p.xi_min() - 50.0, p.xi_max() + 50.0);
    let (up, um) = (p.conn.right.u, p.conn.left.u);
    let mut runner = proptest::test_runner::TestRunner::new(ProptestConfig::with_cases(10_000));
    runner
        .run(&(lo..hi), |xi| {
            let q = p.evaluate(xi);
            let (a, da) = w.at(&q);
            prop_assert!(a >= 1.0 && a <= w.upper_bound(), "a({xi}) = {a}");
            prop_assert!(q.u >= up && q.u <= um, "u({xi}) = {}", q.u);
            prop_assert!(da >= 0.0);
            if xi > p.xi_min() && xi < p.xi_max() {
                prop_assert!(da > 0.0, "a'({xi}) = {da}");
            }
            let y = y_coordinate(q.u, um, p.delta());
            prop_assert!((0.0..=1.0).contains(&y));
            Ok(())
        })
        .unwrap();
}

#[test]
fn connection_is_monotone_along_the_curve() {
    let gas = GasParams::new(2.0).unwrap();
    let right = EndState { rho: 1.0, u: -1.0 };
    let lam = lambda2(right, &gas).unwrap();
    let deltas: Vec<f64> = (1..=30).map(|k| 0.01 * k as f64).collect();
    let conns: Vec<_> = deltas.iter().map(|&d| solve_hugoniot(right, right.u + d, &gas).unwrap()).collect();
    for w in conns.windows(2) {
        assert!(w[1].left.rho > w[0].left.rho);
        assert!(w[1].sigma > w[0].sigma);
    }
    let ds = [0.2, 0.1, 0.05, 0.025];
    let gaps: Vec<f64> = ds
        .iter()
        .map(|&d| (solve_hugoniot(right, right.u + d, &gas).unwrap().sigma - lam).abs())
        .collect();
    let slope = shockline::diagnostics::loglog_slope(&ds, &gaps);
    assert!((0.9..=1.1).contains(&slope), "{slope}");
    // degenerate limit
    for k in 4..9 {
        let d = 10f64.powi(-k);
        let c = solve_hugoniot(right, right.u + d, &gas).unwrap();
        assert!((c.sigma - lam).abs() < 2.0 * d);
        assert!(c.left.rho - 1.0 < 2.0 * d);
    }
    // transonic right state: sigma -> 0+
    let tr = EndState { rho: 0.5, u: -1.0 };
    for d in [1e-2, 1e-3, 1e-4] {
        let c = solve_hugoniot(tr, tr.u + d, &gas).unwrap();
        assert!(c.sigma > 0.0 && c.sigma < d, "{}", c.sigma);
    }
}

#[test]
fn profile_scales_with_strength() {
    let (p1, p2) = (profile_for(0.1), profile_for(0.05));
    let extent = |p: &ShockProfile| p.xi_max() - p.xi_min();
    let r = extent(&p2) / extent(&p1);
    assert!((1.8..=2.2).contains(&r), "extent ratio {r}");
    let (t1, t2) = (verify_tails(&p1).unwrap(), verify_tails(&p2).unwrap());
    for (a, b) in [(t1.rate_left, t2.rate_left), (t1.rate_right, t2.rate_right)] {
        assert!((1.7..=2.3).contains(&(a / b)), "{a} / {b}");
    }
    let ratios: Vec<f64> = [0.2, 0.1, 0.05, 0.025]
        .iter()
        .map(|&d| verify_tails(&profile_for(d)).unwrap().second_derivative_ratio)
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0_f64), |(l, h), &r| (l.min(r), h.max(r)));
    assert!(lo > 0.0 && hi.is_finite() && hi / lo < 2.0, "{ratios:?}");
}

#[test]
fn choose_beta_follows_the_tail_model() {
    let p = oracle_profile();
    let rate = p.tail_left.rate;
    let b6 = choose_beta(&p, 1e-6, 1.0);
    let b12 = choose_beta(&p, 1e-12, 1.0);
    // log-linear: squaring the target adds ln(1e6) / rate
    assert!(((b12 - b6) - 1e6f64.ln() / rate).abs() < 1e-9 * b12, "{b6} {b12}");
    assert!(p.offset_left(-b6) <= 1.0000001e-6, "{}", p.offset_left(-b6));
    // targets above the tail amplitude clamp to the minimum
    assert_eq!(choose_beta(&p, 10.0, 2.0), 2.0);
    let betas: Vec<f64> = [0.05, 0.1, 0.2].iter().map(|&d| choose_beta(&profile_for(d), 1e-6, 1.0)).collect();
    assert!(betas[0] >= betas[1] && betas[1] >= betas[2], "{betas:?}");
}
