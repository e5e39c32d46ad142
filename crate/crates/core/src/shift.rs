//! The shift `X(t)` of the reference wave and lab-frame profile evaluation.
//!
//! `X' = -(M / delta) (I_1 + I_2)` with `M = 2 (gamma + 1) / rho_+`,
//! `I_1 = int a P(rho~) / (sigma - u~) rho~_x (u - u~)` and
//! `I_2 = int a rho~ (u - u~) u~_x`, every profile quantity evaluated at
//! `xi = x - sigma t - X - beta`.

use serde::{Deserialize, Serialize};

use crate::hugoniot::ShockConnection;
use crate::profile::{ProfilePoint, Weight};
use crate::solver::{compensated_sum, FluidField, SolverContext};

/// Pressure factor `P` in the first shift integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShiftMode {
    /// `P = p`, the factor of the defining equation as displayed.
    AsPrinted,
    /// `P = p'`, the factor used when the shift is combined with the bad
    /// terms in the energy estimate.
    #[default]
    YgConsistent,
}

/// `M = 2 (gamma + 1) / rho_+`.
pub fn weight_constant(conn: &ShockConnection) -> f64 {
    2.0 * (conn.gas.gamma + 1.0) / conn.right.rho
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShiftState {
    pub x: f64,
    pub xdot: f64,
    /// `(t, X, X')`, one entry per accepted step plus the initial state.
    pub history: Vec<(f64, f64, f64)>,
    pub m: f64,
    pub beta: f64,
}

impl ShiftState {
    pub fn new(conn: &ShockConnection, beta: f64) -> Self {
        Self {
            x: 0.0,
            xdot: 0.0,
            history: Vec::new(),
            m: weight_constant(conn),
            beta,
        }
    }

    /// Time average of `|X'|` over `[t0, t1]` from the recorded history,
    /// treating `X'` as piecewise linear between entries.
    pub fn mean_abs_rate(&self, t0: f64, t1: f64) -> f64 {
        let mut acc = 0.0;
        let mut span = 0.0;
        for w in self.history.windows(2) {
            let (ta, _, va) = w[0];
            let (tb, _, vb) = w[1];
            let lo = ta.max(t0);
            let hi = tb.min(t1);
            if hi <= lo {
                continue;
            }
            let lerp = |t: f64| va + (vb - va) * (t - ta) / (tb - ta);
            acc += 0.5 * (lerp(lo).abs() + lerp(hi).abs()) * (hi - lo);
            span += hi - lo;
        }
        if span > 0.0 {
            acc / span
        } else {
            0.0
        }
    }
}

/// `xi = x - sigma t - X - beta`.
#[inline]
pub fn shifted_coordinate(x: f64, t: f64, shift: &ShiftState, sigma: f64) -> f64 {
    x - sigma * t - shift.x - shift.beta
}

/// Profile samples at every cell centre for shift `x_shift` at time `t`.
pub fn sample_shifted(ctx: &SolverContext, t: f64, x_shift: f64) -> Vec<ProfilePoint> {
    let g = ctx.grid;
    let xi0 = g.center(0) - ctx.profile.conn.sigma * t - x_shift - ctx.beta;
    ctx.profile.sample_uniform(xi0, g.h, g.cells, ctx.exec)
}

/// Shift velocity for `field` against the wave shifted by `x_shift`, with the
/// profile already sampled at the cell centres.
pub fn shift_rhs_sampled(field: &FluidField, pts: &[ProfilePoint], ctx: &SolverContext, mode: ShiftMode) -> f64 {
    let conn = &ctx.profile.conn;
    let gas = conn.gas;
    let sigma = conn.sigma;
    let weight = Weight::new(ctx.profile);
    let terms: Vec<f64> = ctx.exec.map_range(field.len(), |i| {
        let p = &pts[i];
        let psi = field.mom[i] / field.rho[i] - p.u;
        let (a, _) = weight.at(p);
        let pf = match mode {
            ShiftMode::AsPrinted => gas.pressure(p.rho),
            ShiftMode::YgConsistent => gas.dpressure(p.rho),
        };
        a * psi * (pf / (sigma - p.u) * p.drho + p.rho * p.du)
    });
    let integral = compensated_sum(terms) * ctx.grid.h;
    -weight_constant(conn) / conn.delta * integral
}

/// `X'` for the field at its own time and the given shift.
pub fn shift_rhs(field: &FluidField, x_shift: f64, ctx: &SolverContext, mode: ShiftMode) -> f64 {
    let pts = sample_shifted(ctx, field.t, x_shift);
    shift_rhs_sampled(field, &pts, ctx, mode)
}

/// The two-stage update `X^{n+1} = X/2 + (X + dt r0 + dt r1)/2`, matching
/// the field's SSP-RK2 step.
#[inline]
pub fn two_stage(x: f64, dt: f64, rates: [f64; 2]) -> f64 {
    let stage = x + dt * rates[0];
    0.5 * x + 0.5 * (stage + dt * rates[1])
}

/// Logs the state at the start of a step and applies the step's stage rates.
/// `rates[0]` is `X'` at the old time level.
pub fn advance_shift(shift: &mut ShiftState, t: f64, dt: f64, rates: [f64; 2]) {
    shift.history.push((t, shift.x, rates[0]));
    shift.x = two_stage(shift.x, dt, rates);
    shift.xdot = rates[1];
}
