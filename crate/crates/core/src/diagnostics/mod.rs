//! Relative entropy, the monitored functionals, boundary terms and the
//! standalone lemma validators.
//!
//! Run-time functionals use the midpoint rule on the solver grid with
//! `phi = rho - rho~` and `psi = u - u~`; perturbation derivatives are
//! differences of the field minus the analytic profile derivatives.

pub mod lemmas;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hugoniot::GasParams;
use crate::profile::{ProfilePoint, ShockProfile, Weight};
use crate::shift::{sample_shifted, shift_rhs_sampled, weight_constant, ShiftMode};
use crate::solver::{apply_boundary, compensated_sum, FluidField, SolverContext};

pub use lemmas::{jacobian_lemma_check, jacobian_sweep, loglog_slope, poincare_check, poincare_suite, JacobianSweep, PoincareResult, PoincareSuite};

/// Order of the columns in the diagnostic CSV stream.
pub const DIAG_COLUMNS: [&str; 23] = [
    "t",
    "X",
    "Xdot",
    "E",
    "Gnew",
    "GS",
    "Gbd",
    "Drho",
    "Du1",
    "Du2",
    "P",
    "supnorm_phi",
    "supnorm_psi",
    "l2_phi",
    "l2_psi",
    "h1_phi",
    "h1_psi",
    "y0",
    "tail_truncation_bound",
    "rho_min",
    "rho_max",
    "mass",
    "boundary_u_trace",
];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DiagRecord {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    /// `int a eta(U | U~)`.
    pub e: f64,
    pub gnew: f64,
    pub gs: f64,
    pub gbd: f64,
    pub drho: f64,
    pub du1: f64,
    pub du2: f64,
    /// Boundary production at `x = 0`.
    pub p: f64,
    pub supnorm_phi: f64,
    pub supnorm_psi: f64,
    pub l2_phi: f64,
    pub l2_psi: f64,
    pub h1_phi: f64,
    pub h1_psi: f64,
    pub y0: f64,
    pub tail_truncation_bound: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub mass: f64,
    /// `u` reconstructed at `x = 0` from the ghost and first cell.
    pub boundary_u_trace: f64,
}

impl DiagRecord {
    pub fn values(&self) -> [f64; 23] {
        [
            self.t,
            self.x,
            self.xdot,
            self.e,
            self.gnew,
            self.gs,
            self.gbd,
            self.drho,
            self.du1,
            self.du2,
            self.p,
            self.supnorm_phi,
            self.supnorm_psi,
            self.l2_phi,
            self.l2_psi,
            self.h1_phi,
            self.h1_psi,
            self.y0,
            self.tail_truncation_bound,
            self.rho_min,
            self.rho_max,
            self.mass,
            self.boundary_u_trace,
        ]
    }

    /// The seven functionals `E, Gnew, GS, Gbd, Drho, Du1, Du2`.
    pub fn functionals(&self) -> [f64; 7] {
        [self.e, self.gnew, self.gs, self.gbd, self.drho, self.du1, self.du2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelativeQuantities {
    pub eta: f64,
    pub q: f64,
    pub f_rel: f64,
}

/// `g(s) = (1 + s)^gamma - 1 - gamma s`, without cancellation for small `s`.
fn convex_remainder(s: f64, gamma: f64) -> f64 {
    if s.abs() < 1e-3 {
        let mut coef = gamma * (gamma - 1.0) / 2.0;
        let mut pow = s * s;
        let mut acc = 0.0;
        for k in 2..12 {
            acc += coef * pow;
            coef *= (gamma - k as f64) / (k + 1) as f64;
            pow *= s;
        }
        acc
    } else {
        (gamma * s.ln_1p()).exp_m1() - gamma * s
    }
}

/// `p(rho | rho~) = p(rho) - p(rho~) - p'(rho~)(rho - rho~)`.
pub fn relative_pressure(rho: f64, rho_tilde: f64, gas: &GasParams) -> Result<f64> {
    if !(rho > 0.0 && rho_tilde > 0.0) {
        return Err(Error::Domain(format!(
            "relative pressure needs positive densities, got {rho} and {rho_tilde}"
        )));
    }
    Ok(relative_pressure_unchecked(rho, rho_tilde, gas))
}

#[inline]
fn relative_pressure_unchecked(rho: f64, rho_tilde: f64, gas: &GasParams) -> f64 {
    let s = (rho - rho_tilde) / rho_tilde;
    (gas.pressure(rho_tilde) * convex_remainder(s, gas.gamma)).max(0.0)
}

#[inline]
fn relative_unchecked(rho: f64, u: f64, rt: f64, ut: f64, gas: &GasParams) -> RelativeQuantities {
    let psi = u - ut;
    let pr = relative_pressure_unchecked(rho, rt, gas);
    let g1 = gas.gamma - 1.0;
    RelativeQuantities {
        eta: 0.5 * rho * psi * psi + pr / g1,
        q: 0.5 * rho * u * psi * psi + u * pr / g1 + (gas.pressure(rho) - gas.pressure(rt)) * psi,
        f_rel: rho * psi * psi + pr,
    }
}

/// `eta`, `q` and the momentum component of the relative flux.
pub fn relative_quantities(state: (f64, f64), tilde: (f64, f64), gas: &GasParams) -> Result<RelativeQuantities> {
    relative_pressure(state.0, tilde.0, gas)?;
    Ok(relative_unchecked(state.0, state.1, tilde.0, tilde.1, gas))
}

/// `y = (u_- - u~) / delta`.
#[inline]
pub fn y_coordinate(u_tilde: f64, u_minus: f64, delta: f64) -> f64 {
    (u_minus - u_tilde) / delta
}

/// `y` at the boundary, `(u_- - u~(-sigma t - X - beta)) / delta`, using the
/// cancellation-free offset.
pub fn boundary_y(profile: &ShockProfile, t: f64, x_shift: f64, beta: f64) -> f64 {
    let xi = -profile.conn.sigma * t - x_shift - beta;
    profile.offset_left(xi) / profile.delta()
}

/// Traces of the solution and perturbation at `x = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryTrace {
    pub rho: f64,
    pub u: f64,
    pub phi_x: f64,
    pub psi: f64,
    pub psi_x: f64,
    pub tilde: ProfilePoint,
    pub a: f64,
}

/// Second-order traces at the face `x = 0` from the first three cell
/// centres. `u(0)` is the prescribed boundary value; density is extrapolated
/// with `(15 f0 - 10 f1 + 3 f2) / 8` and derivatives use `(-2 f0 + 3 f1 - f2) / h`
/// (density) and `(-8 u_b + 9 u0 - u1) / (3h)` (velocity).
pub fn boundary_trace(field: &FluidField, x_shift: f64, ctx: &SolverContext) -> BoundaryTrace {
    let h = ctx.grid.h;
    let r = &field.rho;
    let (u0, u1) = (field.velocity(0), field.velocity(1));
    let ub = ctx.boundary_velocity(field.t);
    let xi = -ctx.profile.conn.sigma * field.t - x_shift - ctx.beta;
    let tilde = ctx.profile.evaluate(xi);
    let rho = (15.0 * r[0] - 10.0 * r[1] + 3.0 * r[2]) / 8.0;
    let rho_x = (-2.0 * r[0] + 3.0 * r[1] - r[2]) / h;
    let u_x = (-8.0 * ub + 9.0 * u0 - u1) / (3.0 * h);
    let (a, _) = Weight::new(ctx.profile).at(&tilde);
    BoundaryTrace {
        rho,
        u: ub,
        phi_x: rho_x - tilde.drho,
        psi: ub - tilde.u,
        psi_x: u_x - tilde.du,
        tilde,
        a,
    }
}

/// `a(0) q(U; U~)(0) - a(0) psi(0) psi_x(0)`.
pub fn production_from_trace(tr: &BoundaryTrace, gas: &GasParams) -> f64 {
    let q = relative_unchecked(tr.rho.max(f64::MIN_POSITIVE), tr.u, tr.tilde.rho, tr.tilde.u, gas).q;
    tr.a * q - tr.a * tr.psi * tr.psi_x
}

pub fn boundary_production(field: &FluidField, x_shift: f64, ctx: &SolverContext) -> f64 {
    production_from_trace(&boundary_trace(field, x_shift, ctx), &ctx.gas)
}

/// Second-order first derivative at cell `i` of a cell-centred array.
#[inline]
fn diff1(f: &[f64], i: usize, h: f64) -> f64 {
    let n = f.len();
    if i == 0 {
        (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
    } else if i + 1 == n {
        (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
    } else {
        (f[i + 1] - f[i - 1]) / (2.0 * h)
    }
}

/// Bound on what the truncation at `x = L` removes from `E` and from the
/// shift integrals, assuming the far field beyond `L` and the exponential
/// tail model of the wave.
pub fn tail_truncation_bound(ctx: &SolverContext, t: f64, x_shift: f64) -> f64 {
    let prof = ctx.profile;
    let conn = prof.conn;
    let xi_l = ctx.grid.length - conn.sigma * t - x_shift - ctx.beta;
    let pt = prof.evaluate(xi_l);
    let w = prof.offset_right(xi_l).abs();
    let phi = (pt.rho - conn.right.rho).abs();
    let rate = prof.tail_right.rate.max(f64::MIN_POSITIVE);
    let amax = Weight::new(prof).upper_bound();
    let entropy = amax * (conn.left.rho * w * w + conn.gas.dpressure(conn.left.rho) / conn.right.rho * phi * phi) / (2.0 * rate);
    let pmax = conn.gas.pressure(conn.left.rho).max(conn.gas.dpressure(conn.left.rho));
    let shift = weight_constant(&conn) / conn.delta
        * amax
        * (pmax / (conn.sigma - conn.left.u) * pt.drho.abs() + conn.left.rho * pt.du.abs())
        * w
        / (2.0 * rate);
    entropy.max(shift)
}

/// Evaluates every field of a [`DiagRecord`] for `field` against the wave
/// shifted by `x_shift`.
pub fn functionals(field: &FluidField, x_shift: f64, ctx: &SolverContext, mode: ShiftMode) -> DiagRecord {
    let pts = sample_shifted(ctx, field.t, x_shift);
    functionals_sampled(field, x_shift, &pts, ctx, mode)
}

pub fn functionals_sampled(field: &FluidField, x_shift: f64, pts: &[ProfilePoint], ctx: &SolverContext, mode: ShiftMode) -> DiagRecord {
    let n = field.len();
    let h = ctx.grid.h;
    let gas = ctx.gas;
    let conn = ctx.profile.conn;
    let sigma = conn.sigma;
    let weight = Weight::new(ctx.profile);
    let u = field.velocities();
    let g = apply_boundary(field.t, &field.rho, &u, ctx);
    let rho = &field.rho;

    let cells: Vec<[f64; 12]> = ctx.exec.map_range(n, |i| {
        let p = &pts[i];
        let phi = rho[i] - p.rho;
        let psi = u[i] - p.u;
        let phi_x = diff1(rho, i, h) - p.drho;
        let psi_x = diff1(&u, i, h) - p.du;
        let um = if i == 0 { g.left_u[0] } else { u[i - 1] };
        let up = if i + 1 == n { g.right_u[0] } else { u[i + 1] };
        let psi_xx = (um - 2.0 * u[i] + up) / (h * h) - p.ddu;
        let (a, ax) = weight.at(p);
        let rel = relative_unchecked(rho[i], u[i], p.rho, p.u, &gas);
        let gap = sigma - p.u;
        let bracket = phi - p.rho / gap * psi;
        [
            a * rel.eta,
            ax * gap / 2.0 * gas.dpressure(p.rho) / p.rho * bracket * bracket,
            p.du.abs() * psi * psi,
            gas.dpressure(rho[i]) / rho[i] * phi_x * phi_x,
            a * psi_x * psi_x,
            psi_xx * psi_xx,
            phi * phi,
            psi * psi,
            phi_x * phi_x,
            psi_x * psi_x,
            phi.abs(),
            psi.abs(),
        ]
    });
    let sum = |k: usize| compensated_sum(cells.iter().map(|c| c[k])) * h;
    let sup = |k: usize| cells.iter().fold(0.0_f64, |m, c| m.max(c[k]));

    let tr = boundary_trace(field, x_shift, ctx);
    let gbd = -0.5 * ctx.u_minus * (tr.phi_x / tr.rho) * (tr.phi_x / tr.rho);
    let (l2p, l2s) = (sum(6), sum(7));
    let (dpx, dsx) = (sum(8), sum(9));
    let (_, rmin) = field.min_density();
    let rmax = rho.iter().fold(f64::NEG_INFINITY, |m, &r| m.max(r));

    DiagRecord {
        t: field.t,
        x: x_shift,
        xdot: shift_rhs_sampled(field, pts, ctx, mode),
        e: sum(0),
        gnew: sum(1),
        gs: sum(2),
        gbd,
        drho: sum(3),
        du1: sum(4),
        du2: sum(5),
        p: production_from_trace(&tr, &gas),
        supnorm_phi: sup(10),
        supnorm_psi: sup(11),
        l2_phi: l2p.sqrt(),
        l2_psi: l2s.sqrt(),
        h1_phi: (l2p + dpx).sqrt(),
        h1_psi: (l2s + dsx).sqrt(),
        y0: boundary_y(ctx.profile, field.t, x_shift, ctx.beta),
        tail_truncation_bound: tail_truncation_bound(ctx, field.t, x_shift),
        rho_min: rmin,
        rho_max: rmax,
        mass: field.mass(h),
        boundary_u_trace: 0.5 * (g.left_u[0] + u[0]),
    }
}

/// `r(t) = E(t) - E(0) - int_0^t P_+`, with `P_+` integrated by the
/// trapezoidal rule over the records, and whether `r <= budget` throughout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyBalance {
    pub residuals: Vec<(f64, f64)>,
    pub budget: f64,
    pub max_residual: f64,
    pub pass: bool,
}

/// Relative slack granted to the scheme on top of `E(0)`.
pub const ENTROPY_BUDGET_REL: f64 = 1e-2;
/// Absolute slack, covering runs that start at `E(0) = 0`.
pub const ENTROPY_BUDGET_ABS: f64 = 1e-12;

pub fn entropy_balance_check(records: &[DiagRecord]) -> Result<EntropyBalance> {
    if records.len() < 2 {
        return Err(Error::Domain("entropy balance needs at least two records".into()));
    }
    let e0 = records[0].e;
    let budget = ENTROPY_BUDGET_REL * e0 + ENTROPY_BUDGET_ABS;
    let mut acc = 0.0;
    let mut residuals = Vec::with_capacity(records.len());
    residuals.push((records[0].t, 0.0));
    for w in records.windows(2) {
        acc += 0.5 * (w[0].p.max(0.0) + w[1].p.max(0.0)) * (w[1].t - w[0].t);
        residuals.push((w[1].t, w[1].e - e0 - acc));
    }
    let max_residual = residuals.iter().fold(f64::NEG_INFINITY, |m, r| m.max(r.1));
    Ok(EntropyBalance {
        residuals,
        budget,
        max_residual,
        pass: max_residual <= budget,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exec::Exec;
    use crate::hugoniot::{solve_hugoniot, EndState};
    use crate::profile::{integrate_profile, ProfileOptions};
    use crate::solver::{BoundaryData, Grid};
    use proptest::prelude::*;

    fn gas2() -> GasParams {
        GasParams::new(2.0).unwrap()
    }

    #[test]
    fn relative_pressure_examples() {
        let g = gas2();
        assert!((relative_pressure(1.5, 1.0, &g).unwrap() - 0.25).abs() < 1e-15);
        assert_eq!(relative_pressure(1.3, 1.3, &g).unwrap(), 0.0);
        for s in [1e-2, 3e-4, 1e-6] {
            let s = (1.0 + s) - 1.0;
            let v = relative_pressure(1.0 + s, 1.0, &g).unwrap();
            assert!((v - s * s).abs() <= 1e-14 * s * s, "{s}: {v}");
        }
        assert!(relative_pressure(0.0, 1.0, &g).is_err());
        assert!(relative_pressure(1.0, -1.0, &g).is_err());
    }

    #[test]
    fn relative_pressure_quadratic_expansion() {
        let g = GasParams::new(1.4).unwrap();
        let rt: f64 = 1.3;
        let c2 = g.gamma * (g.gamma - 1.0) / 2.0 * rt.powf(g.gamma - 2.0);
        let mut ratios = Vec::new();
        for d in [1e-1, 1e-2, 1e-3, 1e-4] {
            let v = relative_pressure(rt + d, rt, &g).unwrap();
            ratios.push((v - c2 * d * d).abs() / (d * d * d));
        }
        // cubic coefficient gamma (gamma-1)(gamma-2)/6 rt^(gamma-3)
        let c3 = (g.gamma * (g.gamma - 1.0) * (g.gamma - 2.0) / 6.0 * rt.powf(g.gamma - 3.0)).abs();
        assert!((ratios[3] - c3).abs() < 1e-3 * c3, "{ratios:?}");
        assert!(ratios.iter().all(|r| r.is_finite() && *r < 2.0 * c3));
    }

    #[test]
    fn relative_quantity_example() {
        let q = relative_quantities((1.0, -0.8), (1.0, -1.0), &gas2()).unwrap();
        assert!((q.eta - 0.02).abs() < 1e-16);
        assert!((q.f_rel - 0.04).abs() < 1e-16);
        assert!((q.q + 0.016).abs() < 1e-16);
        let z = relative_quantities((1.2, -0.3), (1.2, -0.3), &gas2()).unwrap();
        assert_eq!((z.eta, z.q, z.f_rel), (0.0, 0.0, 0.0));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn eta_is_nonnegative(r in 0.05f64..5.0, rt in 0.05f64..5.0, u in -3.0f64..3.0, ut in -3.0f64..3.0, gamma in 1.05f64..3.0) {
            let g = GasParams::new(gamma).unwrap();
            let q = relative_quantities((r, u), (rt, ut), &g).unwrap();
            prop_assert!(q.eta >= 0.0);
            prop_assert!(q.f_rel >= 0.0);
        }
    }

    #[test]
    fn y_coordinate_ends() {
        assert_eq!(y_coordinate(-0.9, -0.9, 0.1), 0.0);
        assert!((y_coordinate(-1.0, -0.9, 0.1) - 1.0).abs() < 1e-15);
    }

    fn setup() -> ShockProfile {
        let conn = solve_hugoniot(EndState { rho: 1.0, u: -1.0 }, -0.9, &gas2()).unwrap();
        integrate_profile(&conn, &ProfileOptions::default()).unwrap()
    }

    fn ctx(p: &ShockProfile) -> SolverContext<'_> {
        SolverContext {
            grid: Grid::new(600.0, 3000).unwrap(),
            gas: p.conn.gas,
            right: p.conn.right,
            u_minus: p.conn.left.u,
            boundary: BoundaryData::Outflow,
            profile: p,
            beta: 80.0,
            exec: Exec::Sequential,
        }
    }

    fn pointwise(c: &SolverContext, t: f64) -> FluidField {
        let pts = sample_shifted(c, t, 0.0);
        FluidField {
            t,
            rho: pts.iter().map(|q| q.rho).collect(),
            mom: pts.iter().map(|q| q.rho * q.u).collect(),
        }
    }

    #[test]
    fn exact_wave_has_negligible_functionals() {
        let p = setup();
        let c = ctx(&p);
        let f = pointwise(&c, 0.0);
        let d = functionals(&f, 0.0, &c, ShiftMode::YgConsistent);
        assert_eq!(d.supnorm_phi, 0.0);
        assert_eq!(d.supnorm_psi, 0.0);
        assert_eq!((d.e, d.gnew, d.gs), (0.0, 0.0, 0.0));
        // derivatives come from differences, so only O(h^2) small
        assert!(d.drho < 1e-10 && d.du1 < 1e-10 && d.du2 < 1e-10, "{d:?}");
        assert!(d.gbd < 1e-14);
        assert!(d.xdot.abs() < 1e-15);
        assert!(d.y0 > 0.0 && d.y0 < 1e-4);
        assert!(d.tail_truncation_bound < 1e-30);
    }

    #[test]
    fn diagonal_field_zeroes_gnew_only() {
        let p = setup();
        let c = ctx(&p);
        let pts = sample_shifted(&c, 0.0, 0.0);
        let sigma = p.conn.sigma;
        let mut f = pointwise(&c, 0.0);
        for (i, q) in pts.iter().enumerate() {
            let x = c.grid.center(i);
            let s: f64 = (x - 80.0) / 20.0;
            let psi = if s.abs() < 1.0 { 1e-3 * (1.0 - 1.0 / (1.0 - s * s)).exp() } else { 0.0 };
            let rho = q.rho + q.rho / (sigma - q.u) * psi;
            f.rho[i] = rho;
            f.mom[i] = rho * (q.u + psi);
        }
        let d = functionals(&f, 0.0, &c, ShiftMode::YgConsistent);
        assert!(d.gs > 1e-9);
        assert!(d.gnew < 1e-20 * d.gs.max(1.0), "{}", d.gnew);
        for v in d.functionals() {
            assert!(v >= 0.0);
        }
    }

    #[test]
    fn unperturbed_boundary_production_is_small() {
        let p = setup();
        let c = ctx(&p);
        let f = pointwise(&c, 0.0);
        let pr = boundary_production(&f, 0.0, &c);
        // the only mismatch is u(0) = u_- against u~(-beta)
        let gap = p.offset_left(-80.0);
        assert!(pr.abs() < 10.0 * gap, "{pr} vs {gap}");
    }

    #[test]
    fn production_vanishes_on_matching_traces() {
        let p = setup();
        let tilde = p.evaluate(-80.0);
        let tr = BoundaryTrace {
            rho: tilde.rho,
            u: tilde.u,
            phi_x: 0.0,
            psi: 0.0,
            psi_x: 0.0,
            tilde,
            a: 1.3,
        };
        assert_eq!(production_from_trace(&tr, &p.conn.gas), 0.0);
    }

    #[test]
    fn entropy_balance_on_synthetic_records() {
        let mk = |t: f64, e: f64, p: f64| DiagRecord { t, e, p, ..Default::default() };
        let ok = [mk(0.0, 1.0, 0.0), mk(1.0, 0.9, 0.2), mk(2.0, 1.1, 0.0)];
        let b = entropy_balance_check(&ok).unwrap();
        assert!(b.pass);
        assert!((b.residuals[2].1 - (0.1 - 0.2)).abs() < 1e-15);
        let bad = [mk(0.0, 1.0, 0.0), mk(1.0, 1.5, 0.0)];
        assert!(!entropy_balance_check(&bad).unwrap().pass);
        assert!(entropy_balance_check(&ok[..1]).is_err());
    }
}
