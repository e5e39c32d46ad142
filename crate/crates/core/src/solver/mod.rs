//! Conservative finite-volume solver for the barotropic Navier–Stokes system
//! on the truncated half-line `[0, L]`.
//!
//! Convective fluxes use a local Lax–Friedrichs flux on van Leer limited
//! linear reconstructions of `(rho, u)`; the viscous term is a central second
//! difference of `u = m / rho`. Time integration is the two-stage SSP
//! Runge–Kutta scheme. The left boundary prescribes `u(t, 0) = u_-` through an
//! odd reflection of `u` about `u_-` and extrapolates density; the right
//! boundary is Dirichlet at the far-field state.

pub mod run;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hugoniot::{EndState, GasParams};
use crate::profile::{ProfilePoint, ShockProfile};

pub use run::{
    bump, choose_beta, BumpTerm, InitReport, NullObserver, OutputCadence, Perturbation, PerturbationShape, RunObserver, RunStats,
    RunSummary, SimConfig, Simulation,
};

/// Densities at or below this abort the run.
pub const RHO_FLOOR: f64 = 1e-10;

/// Identifier of the discretisation, echoed into run metadata.
pub const SCHEME_ID: &str = "fv-llf-vanleer-muscl/central-viscous/ssprk2-explicit";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub length: f64,
    pub cells: usize,
    pub h: f64,
}

impl Grid {
    pub fn new(length: f64, cells: usize) -> Result<Self> {
        if cells < 16 {
            return Err(Error::config("N", format!("need at least 16 cells, got {cells}")));
        }
        if !(length > 0.0) || !length.is_finite() {
            return Err(Error::config("L", format!("domain length must be positive, got {length}")));
        }
        Ok(Self {
            length,
            cells,
            h: length / cells as f64,
        })
    }

    #[inline]
    pub fn center(&self, i: usize) -> f64 {
        (i as f64 + 0.5) * self.h
    }

    /// Cell centre of a ghost or real cell by signed index.
    #[inline]
    pub fn center_signed(&self, i: isize) -> f64 {
        (i as f64 + 0.5) * self.h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FluidField {
    pub t: f64,
    pub rho: Vec<f64>,
    pub mom: Vec<f64>,
}

impl FluidField {
    pub fn uniform(cells: usize, state: EndState) -> Self {
        Self {
            t: 0.0,
            rho: vec![state.rho; cells],
            mom: vec![state.rho * state.u; cells],
        }
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    #[inline]
    pub fn velocity(&self, i: usize) -> f64 {
        self.mom[i] / self.rho[i]
    }

    pub fn velocities(&self) -> Vec<f64> {
        self.mom.iter().zip(&self.rho).map(|(m, r)| m / r).collect()
    }

    /// `sum rho_i h`, compensated.
    pub fn mass(&self, h: f64) -> f64 {
        compensated_sum(self.rho.iter().copied()) * h
    }

    pub fn min_density(&self) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, &r) in self.rho.iter().enumerate() {
            if !(r >= best.1) {
                best = (i, r);
            }
        }
        best
    }
}

/// Neumaier summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0_f64, 0.0_f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BoundaryData {
    /// `u(t,0) = u_-`, density extrapolated, far-field Dirichlet on the right.
    #[default]
    Outflow,
    /// Both boundaries driven by the unshifted traveling wave
    /// `(rho~, u~)(x - sigma t - beta)`; used for order studies.
    ExactProfile,
}

/// Ghost values, index 0 adjacent to the domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ghosts {
    pub left_rho: [f64; 2],
    pub left_u: [f64; 2],
    pub right_rho: [f64; 2],
    pub right_u: [f64; 2],
}

/// Everything the spatial operator needs besides the field itself.
#[derive(Debug, Clone, Copy)]
pub struct SolverContext<'a> {
    pub grid: Grid,
    pub gas: GasParams,
    pub right: EndState,
    pub u_minus: f64,
    pub boundary: BoundaryData,
    pub profile: &'a ShockProfile,
    pub beta: f64,
    pub exec: Exec,
}

impl<'a> SolverContext<'a> {
    /// Left boundary velocity at time `t`.
    pub fn boundary_velocity(&self, t: f64) -> f64 {
        match self.boundary {
            BoundaryData::Outflow => self.u_minus,
            BoundaryData::ExactProfile => self.exact_point(t, 0.0).u,
        }
    }

    fn exact_point(&self, t: f64, x: f64) -> ProfilePoint {
        self.profile.evaluate(x - self.profile.conn.sigma * t - self.beta)
    }
}

/// Ghost values for `u = m / rho` given as `u`.
pub fn apply_boundary(t: f64, rho: &[f64], u: &[f64], ctx: &SolverContext) -> Ghosts {
    let n = rho.len();
    let ub = ctx.boundary_velocity(t);
    let left_u = [2.0 * ub - u[0], 2.0 * ub - u[1]];
    match ctx.boundary {
        BoundaryData::Outflow => Ghosts {
            left_rho: [rho[0], rho[0]],
            left_u,
            right_rho: [ctx.right.rho; 2],
            right_u: [ctx.right.u; 2],
        },
        BoundaryData::ExactProfile => {
            let g = &ctx.grid;
            let l0 = ctx.exact_point(t, g.center_signed(-1));
            let l1 = ctx.exact_point(t, g.center_signed(-2));
            let r0 = ctx.exact_point(t, g.center(n));
            let r1 = ctx.exact_point(t, g.center(n + 1));
            Ghosts {
                left_rho: [l0.rho, l1.rho],
                left_u,
                right_rho: [r0.rho, r1.rho],
                right_u: [r0.u, r1.u],
            }
        }
    }
}

/// Physical convective flux `(m, m^2/rho + p)` of a primitive state.
#[inline]
pub fn physical_flux(rho: f64, u: f64, gas: &GasParams) -> [f64; 2] {
    [rho * u, rho * u * u + gas.pressure(rho)]
}

/// Local Lax–Friedrichs flux between primitive states `(rho, u)`.
#[inline]
pub fn flux(left: (f64, f64), right: (f64, f64), gas: &GasParams) -> [f64; 2] {
    let (rl, ul) = left;
    let (rr, ur) = right;
    let cl = gas.dpressure(rl).sqrt();
    let cr = gas.dpressure(rr).sqrt();
    let alpha = (ul.abs() + cl).max(ur.abs() + cr);
    let fl = physical_flux(rl, ul, gas);
    let fr = physical_flux(rr, ur, gas);
    [
        0.5 * (fl[0] + fr[0]) - 0.5 * alpha * (rr - rl),
        0.5 * (fl[1] + fr[1]) - 0.5 * alpha * (rr * ur - rl * ul),
    ]
}

/// Checked variant of [`flux`] for external callers.
pub fn flux_checked(left: (f64, f64), right: (f64, f64), gas: &GasParams) -> Result<[f64; 2]> {
    if !(left.0 > 0.0 && right.0 > 0.0) {
        return Err(Error::Domain(format!(
            "vacuum state in flux: rho_l = {}, rho_r = {}",
            left.0, right.0
        )));
    }
    Ok(flux(left, right, gas))
}

/// Dissipation speed used by [`flux`].
pub fn dissipation_speed(left: (f64, f64), right: (f64, f64), gas: &GasParams) -> f64 {
    (left.1.abs() + gas.dpressure(left.0).sqrt()).max(right.1.abs() + gas.dpressure(right.0).sqrt())
}

#[inline]
fn van_leer(dm: f64, dp: f64) -> f64 {
    let prod = dm * dp;
    if prod > 0.0 {
        2.0 * prod / (dm + dp)
    } else {
        0.0
    }
}

/// `u_xx` at cell `i` by the central second difference, using ghost values
/// at the ends.
pub fn viscous_term(field: &FluidField, i: usize, ctx: &SolverContext) -> f64 {
    let u = field.velocities();
    let g = apply_boundary(field.t, &field.rho, &u, ctx);
    let n = u.len();
    let um = if i == 0 { g.left_u[0] } else { u[i - 1] };
    let up = if i + 1 == n { g.right_u[0] } else { u[i + 1] };
    (um - 2.0 * u[i] + up) / (ctx.grid.h * ctx.grid.h)
}

/// `dt = cfl * min(h / max(|u| + c), min(1, rho_min) h^2 / (2 mu))`.
pub fn cfl_dt(field: &FluidField, grid: &Grid, gas: &GasParams, cfl: f64) -> f64 {
    let mut speed = 0.0_f64;
    let mut rho_min = f64::INFINITY;
    for (r, m) in field.rho.iter().zip(&field.mom) {
        let u = m / r;
        speed = speed.max(u.abs() + gas.dpressure(*r).sqrt());
        rho_min = rho_min.min(*r);
    }
    let h = grid.h;
    let viscous = rho_min.min(1.0) * h * h / (2.0 * gas.viscosity);
    cfl * (h / speed).min(viscous)
}

/// Semi-discrete right-hand side and the boundary mass fluxes.
pub struct Rates {
    pub drho: Vec<f64>,
    pub dmom: Vec<f64>,
    /// Mass flux through `x = 0` (positive to the right).
    pub mass_flux_left: f64,
    /// Mass flux through `x = L`.
    pub mass_flux_right: f64,
}

pub fn rates(field: &FluidField, ctx: &SolverContext) -> Rates {
    let n = field.len();
    let h = ctx.grid.h;
    let gas = ctx.gas;
    let u = field.velocities();
    let g = apply_boundary(field.t, &field.rho, &u, ctx);

    // extended arrays: two ghosts on each side, real cell i at i + 2
    let mut re = Vec::with_capacity(n + 4);
    let mut ue = Vec::with_capacity(n + 4);
    re.extend([g.left_rho[1], g.left_rho[0]]);
    ue.extend([g.left_u[1], g.left_u[0]]);
    re.extend_from_slice(&field.rho);
    ue.extend_from_slice(&u);
    re.extend(g.right_rho);
    ue.extend(g.right_u);

    let recon = |k: usize| -> (f64, f64, f64, f64) {
        // (rho_minus_face, rho_plus_face, u_minus_face, u_plus_face) of ext cell k
        let sr = van_leer(re[k] - re[k - 1], re[k + 1] - re[k]);
        let su = van_leer(ue[k] - ue[k - 1], ue[k + 1] - ue[k]);
        (re[k] - 0.5 * sr, re[k] + 0.5 * sr, ue[k] - 0.5 * su, ue[k] + 0.5 * su)
    };

    // face f sits between real cells f-1 and f, i.e. ext cells f+1 and f+2
    let faces: Vec<[f64; 2]> = ctx.exec.map_range(n + 1, |f| {
        let (_, rl, _, ul) = recon(f + 1);
        let (rr, _, ur, _) = recon(f + 2);
        flux((rl, ul), (rr, ur), &gas)
    });

    let inv_h = 1.0 / h;
    let nu = gas.viscosity * inv_h * inv_h;
    let cells: Vec<(f64, f64)> = ctx.exec.map_range(n, |i| {
        let e = i + 2;
        let drho = -(faces[i + 1][0] - faces[i][0]) * inv_h;
        let dmom = -(faces[i + 1][1] - faces[i][1]) * inv_h + nu * (ue[e - 1] - 2.0 * ue[e] + ue[e + 1]);
        (drho, dmom)
    });
    let (drho, dmom) = cells.into_iter().unzip();
    Rates {
        drho,
        dmom,
        mass_flux_left: faces[0][0],
        mass_flux_right: faces[n][0],
    }
}

fn check_positive(field: &FluidField, grid: &Grid) -> Result<()> {
    if let Some((i, &r)) = field.rho.iter().enumerate().find(|(_, r)| !(**r > RHO_FLOOR)) {
        return Err(Error::Positivity {
            t: field.t,
            cell: i,
            x: grid.center(i),
            value: r,
            dump: None,
        });
    }
    Ok(())
}

/// Result of one coupled step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub field: FluidField,
    pub shift: f64,
    /// Shift velocities evaluated at the two stages.
    pub shift_rates: [f64; 2],
    /// `int (F_R - F_L) dt` over the step: net mass leaving the domain.
    pub mass_outflow: f64,
}

/// One SSP-RK2 step of the field together with a scalar shift `X` whose rate
/// is evaluated stage-consistently from each stage's field and shift.
pub fn step_coupled<R>(field: &FluidField, shift: f64, dt: f64, ctx: &SolverContext, shift_rate: R) -> Result<StepOutcome>
where
    R: Fn(&FluidField, f64) -> f64,
{
    let xdot0 = shift_rate(field, shift);
    let k0 = rates(field, ctx);
    let stage = FluidField {
        t: field.t + dt,
        rho: ctx.exec.map_range(field.len(), |i| field.rho[i] + dt * k0.drho[i]),
        mom: ctx.exec.map_range(field.len(), |i| field.mom[i] + dt * k0.dmom[i]),
    };
    check_positive(&stage, &ctx.grid)?;
    let shift_stage = shift + dt * xdot0;

    let xdot1 = shift_rate(&stage, shift_stage);
    let k1 = rates(&stage, ctx);
    let next = FluidField {
        t: field.t + dt,
        rho: ctx
            .exec
            .map_range(field.len(), |i| 0.5 * field.rho[i] + 0.5 * (stage.rho[i] + dt * k1.drho[i])),
        mom: ctx
            .exec
            .map_range(field.len(), |i| 0.5 * field.mom[i] + 0.5 * (stage.mom[i] + dt * k1.dmom[i])),
    };
    check_positive(&next, &ctx.grid)?;
    let out0 = k0.mass_flux_right - k0.mass_flux_left;
    let out1 = k1.mass_flux_right - k1.mass_flux_left;
    Ok(StepOutcome {
        field: next,
        shift: crate::shift::two_stage(shift, dt, [xdot0, xdot1]),
        shift_rates: [xdot0, xdot1],
        mass_outflow: 0.5 * dt * (out0 + out1),
    })
}

/// Uncoupled step of the field alone.
pub fn step(field: &FluidField, dt: f64, ctx: &SolverContext) -> Result<(FluidField, f64)> {
    let out = step_coupled(field, 0.0, dt, ctx, |_, _| 0.0)?;
    Ok((out.field, out.mass_outflow))
}

/// Five-point Gauss–Legendre nodes and weights on `[-1/2, 1/2]`.
pub(crate) const GAUSS5: [(f64, f64); 5] = [
    (-0.453_089_922_969_332_2, 0.118_463_442_528_094_54),
    (-0.269_234_655_052_841_5, 0.239_314_335_249_683_24),
    (0.0, 0.284_444_444_444_444_45),
    (0.269_234_655_052_841_5, 0.239_314_335_249_683_24),
    (0.453_089_922_969_332_2, 0.118_463_442_528_094_54),
];

/// Cell averages of `(rho, m)` for the traveling wave `(rho~, u~)(x - offset)`.
pub fn profile_cell_averages(profile: &ShockProfile, grid: &Grid, offset: f64, exec: Exec) -> (Vec<f64>, Vec<f64>) {
    let pairs: Vec<(f64, f64)> = exec.map_range(grid.cells, |i| {
        let xc = grid.center(i);
        let (mut r, mut m) = (0.0, 0.0);
        for &(s, w) in &GAUSS5 {
            let p = profile.evaluate(xc + s * grid.h - offset);
            r += w * p.rho;
            m += w * p.rho * p.u;
        }
        (r, m)
    });
    pairs.into_iter().unzip()
}

/// L2 distance in conservative variables between `field` and cell averages
/// of the traveling wave positioned at `offset` (`x - offset = xi`).
pub fn tracking_error(field: &FluidField, grid: &Grid, profile: &ShockProfile, offset: f64, exec: Exec) -> f64 {
    let (r, m) = profile_cell_averages(profile, grid, offset, exec);
    let sq = (0..field.len()).map(|i| {
        let (a, b) = (field.rho[i] - r[i], field.mom[i] - m[i]);
        a * a + b * b
    });
    (compensated_sum(sq) * grid.h).sqrt()
}
