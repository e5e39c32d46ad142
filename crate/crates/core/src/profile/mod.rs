//! Viscous 2-shock profile.
//!
//! The mass equation of the traveling-wave system integrates to
//! `rho (u - sigma) = rho_+ (u_+ - sigma)`, and the momentum equation then to
//! the scalar autonomous equation `u' = f(u)` with
//! `f(u) = rho_+ (u - u_+)(u_+ - sigma) + p(rho(u)) - p(rho_+)`. Only `u` is
//! integrated; density and all derivatives follow algebraically.

pub mod ode;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hugoniot::ShockConnection;

use self::ode::{OdeFailure, StepControl};

pub const DEFAULT_TAIL_EPS: f64 = 1e-8;

/// Algebraic pieces of the profile equation with endpoint-relative
/// arithmetic, so that `f` keeps full relative precision in both tails.
#[derive(Debug, Clone, Copy)]
pub(crate) struct ProfileEq {
    pub conn: ShockConnection,
    rp: f64,
    up: f64,
    rm: f64,
    um: f64,
    sigma: f64,
}

impl ProfileEq {
    pub fn new(conn: &ShockConnection) -> Self {
        Self {
            conn: *conn,
            rp: conn.right.rho,
            up: conn.right.u,
            rm: conn.left.rho,
            um: conn.left.u,
            sigma: conn.sigma,
        }
    }

    /// Density on the profile at velocity `u`.
    #[inline]
    pub fn density(&self, u: f64) -> f64 {
        self.rp * (self.sigma - self.up) / (self.sigma - u)
    }

    /// Plus-branch slope with `w = u - u_+`.
    #[inline]
    fn slope_plus(&self, w: f64) -> f64 {
        let gap = (self.sigma - self.up) - w;
        // rho / rho_+ - 1 = w / gap
        let s = self.conn.gas.pressure_slope_rel(self.rp, w / gap);
        w * self.rp * (s / gap - (self.sigma - self.up))
    }

    /// Minus-branch slope with `v = u_- - u`.
    #[inline]
    fn slope_minus(&self, v: f64) -> f64 {
        let gap = (self.sigma - self.um) + v;
        let rho = self.rm * (self.sigma - self.um) / gap;
        // rho_- / rho - 1 = v / (sigma - u_-)
        let s = self.conn.gas.pressure_slope_rel(rho, v / (self.sigma - self.um));
        v * self.rm * ((self.sigma - self.um) - s / gap)
    }

    /// `u'` using whichever endpoint is nearer, given both offsets.
    #[inline]
    pub fn slope_offsets(&self, w: f64, v: f64) -> f64 {
        if w <= v {
            self.slope_plus(w)
        } else {
            self.slope_minus(v)
        }
    }

    #[inline]
    pub fn slope(&self, u: f64) -> f64 {
        self.slope_offsets(u - self.up, self.um - u)
    }

    /// `df/du`.
    #[inline]
    pub fn slope_derivative(&self, u: f64) -> f64 {
        let rho = self.density(u);
        let j = self.rp * (self.up - self.sigma);
        j + self.conn.gas.dpressure(rho) * rho / (self.sigma - u)
    }

    pub fn point(&self, xi: f64, u: f64) -> ProfilePoint {
        let rho = self.density(u);
        let du = self.slope(u);
        ProfilePoint {
            xi,
            rho,
            u,
            drho: rho / (self.sigma - u) * du,
            du,
            ddu: self.slope_derivative(u) * du,
        }
    }

    /// Linearised decay rates `(left, right)` of the profile at its endpoints.
    pub fn linear_rates(&self) -> (f64, f64) {
        (self.slope_derivative(self.um).abs(), self.slope_derivative(self.up).abs())
    }
}

/// `rho~ = rho_+ (u_+ - sigma) / (u - sigma)`.
pub fn density_from_velocity(u: f64, conn: &ShockConnection) -> Result<f64> {
    if !(u < conn.sigma) {
        return Err(Error::Domain(format!(
            "velocity {u} must lie below the shock speed {}",
            conn.sigma
        )));
    }
    Ok(ProfileEq::new(conn).density(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    Plus,
    Minus,
}

/// Profile slope `u~'` evaluated with the literal plus- or minus-endpoint
/// form of the integrated momentum equation.
pub fn profile_rhs_branch(u: f64, conn: &ShockConnection, branch: Branch) -> Result<f64> {
    check_velocity_range(u, conn)?;
    let eq = ProfileEq::new(conn);
    let gas = &conn.gas;
    let rho = eq.density(u);
    Ok(match branch {
        Branch::Plus => {
            let (rp, up) = (conn.right.rho, conn.right.u);
            rp * (u - up) * (up - conn.sigma) + gas.pressure(rho) - gas.pressure(rp)
        }
        Branch::Minus => {
            let (rm, um) = (conn.left.rho, conn.left.u);
            rm * (u - um) * (um - conn.sigma) + gas.pressure(rho) - gas.pressure(rm)
        }
    })
}

/// Profile slope `u~'(u)`; exactly zero at both end states.
pub fn profile_rhs(u: f64, conn: &ShockConnection) -> Result<f64> {
    check_velocity_range(u, conn)?;
    Ok(ProfileEq::new(conn).slope(u))
}

fn check_velocity_range(u: f64, conn: &ShockConnection) -> Result<()> {
    if !(u >= conn.right.u && u <= conn.left.u) {
        return Err(Error::Domain(format!(
            "velocity {u} outside [{}, {}]",
            conn.right.u, conn.left.u
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileOptions {
    /// Integration stops once the profile is within `tail_eps * delta` of
    /// the end state.
    pub tail_eps: f64,
    /// Maximum node spacing in units of the inverse linear decay rate.
    pub node_spacing: f64,
    pub rtol: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        Self {
            tail_eps: DEFAULT_TAIL_EPS,
            node_spacing: 0.01,
            rtol: 1e-13,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailFit {
    pub rate: f64,
    pub amplitude: f64,
    pub r2: f64,
    pub points: usize,
}

/// One evaluation of the wave and its derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ProfilePoint {
    pub xi: f64,
    pub rho: f64,
    pub u: f64,
    pub drho: f64,
    pub du: f64,
    pub ddu: f64,
}

#[derive(Debug, Clone)]
pub struct ShockProfile {
    pub conn: ShockConnection,
    pub xi: Vec<f64>,
    pub u: Vec<f64>,
    pub rho: Vec<f64>,
    pub du: Vec<f64>,
    pub drho: Vec<f64>,
    pub ddu: Vec<f64>,
    /// Index of the node at `xi = 0`.
    pub center: usize,
    pub tail_left: TailFit,
    pub tail_right: TailFit,
    pub tail_eps: f64,
    eq: ProfileEq,
}

pub fn integrate_profile(conn: &ShockConnection, opts: &ProfileOptions) -> Result<ShockProfile> {
    let eq = ProfileEq::new(conn);
    let delta = conn.delta;
    if !(delta > 0.0) {
        return Err(Error::Domain("zero-strength connection has no profile".into()));
    }
    let (rate_l, rate_r) = eq.linear_rates();
    let rate = rate_l.max(rate_r);
    let h_max = opts.node_spacing / rate;
    let ctl = StepControl {
        rtol: opts.rtol,
        atol: 1e-3 * opts.tail_eps * delta * opts.rtol,
        h_init: 0.1 * h_max,
        h_max,
        h_min: 1e-10 * h_max,
        max_steps: 5_000_000,
    };
    let stop_at = opts.tail_eps * delta;

    let rho0 = 0.5 * (conn.left.rho + conn.right.rho);
    let u0 = conn.sigma + conn.mass_flux() / rho0;
    let w0 = u0 - conn.right.u;
    let v0 = conn.left.u - u0;

    let fail = |e: OdeFailure, forward: bool| {
        let (xi, off, reason) = match e {
            OdeFailure::StepUnderflow { t, y, h } => (t, y, format!("step size underflow (h = {h:e})")),
            OdeFailure::TooManySteps { t, y } => (t, y, "step limit reached".to_string()),
            OdeFailure::NonFinite { t, y } => (t, y, "non-finite state".to_string()),
        };
        let (xi, u) = if forward {
            (xi, conn.right.u + off)
        } else {
            (-xi, conn.left.u - off)
        };
        Error::Integration { xi, u, reason }
    };

    // xi -> +inf in w = u - u_+; xi -> -inf in v = u_- - u with s = -xi
    let fwd = ode::integrate(|w| eq.slope_offsets(w, delta - w), w0, &ctl, |w| w <= stop_at)
        .map_err(|e| fail(e, true))?;
    let bwd = ode::integrate(|v| eq.slope_offsets(delta - v, v), v0, &ctl, |v| v <= stop_at)
        .map_err(|e| fail(e, false))?;

    let n = fwd.len() + bwd.len() - 1;
    let mut xi = Vec::with_capacity(n);
    let mut u = Vec::with_capacity(n);
    for &(s, v) in bwd.iter().skip(1).rev() {
        xi.push(-s);
        u.push(conn.left.u - v);
    }
    let center = xi.len();
    for &(t, w) in &fwd {
        xi.push(t);
        u.push(if t == 0.0 { u0 } else { conn.right.u + w });
    }

    let pts: Vec<ProfilePoint> = xi.iter().zip(&u).map(|(&x, &uu)| eq.point(x, uu)).collect();
    let mut rho: Vec<f64> = pts.iter().map(|p| p.rho).collect();
    rho[center] = rho0;

    let tail_right = fit_tail(fwd.iter().map(|&(t, w)| (t, w)).collect(), true)?;
    let tail_left = fit_tail(bwd.iter().map(|&(s, v)| (-s, v)).collect(), false)?;

    Ok(ShockProfile {
        conn: *conn,
        du: pts.iter().map(|p| p.du).collect(),
        drho: pts.iter().map(|p| p.drho).collect(),
        ddu: pts.iter().map(|p| p.ddu).collect(),
        xi,
        u,
        rho,
        center,
        tail_left,
        tail_right,
        tail_eps: opts.tail_eps,
        eq,
    })
}

/// Least-squares fit of `log(offset)` against `xi` over the farthest quarter
/// of a branch (at least 20 nodes).
fn fit_tail(branch: Vec<(f64, f64)>, right: bool) -> Result<TailFit> {
    let mut nodes: Vec<(f64, f64)> = branch.into_iter().filter(|&(_, off)| off > 0.0).collect();
    if nodes.len() < 20 {
        return Err(Error::TailFit(format!("only {} tail nodes", nodes.len())));
    }
    nodes.sort_by(|a, b| a.1.total_cmp(&b.1));
    let take = (nodes.len() / 4).max(20);
    let window = &nodes[..take];
    let m = window.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for &(x, off) in window {
        sx += x;
        sy += off.ln();
    }
    let (mx, my) = (sx / m, sy / m);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, off) in window {
        let (dx, dy) = (x - mx, off.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    let rate = if right { -slope } else { slope };
    Ok(TailFit {
        rate,
        amplitude: intercept.exp(),
        r2,
        points: take,
    })
}

impl ShockProfile {
    pub fn delta(&self) -> f64 {
        self.conn.delta
    }

    pub fn xi_min(&self) -> f64 {
        self.xi[0]
    }

    pub fn xi_max(&self) -> f64 {
        *self.xi.last().unwrap()
    }

    pub fn len(&self) -> usize {
        self.xi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xi.is_empty()
    }

    /// Linearised endpoint decay rates `(left, right)`.
    pub fn linear_rates(&self) -> (f64, f64) {
        self.eq.linear_rates()
    }

    pub fn node(&self, k: usize) -> ProfilePoint {
        ProfilePoint {
            xi: self.xi[k],
            rho: self.rho[k],
            u: self.u[k],
            drho: self.drho[k],
            du: self.du[k],
            ddu: self.ddu[k],
        }
    }

    /// Evaluates the wave at any `xi`: shape-preserving cubic Hermite inside
    /// the table, exponential tails outside.
    pub fn evaluate(&self, xi: f64) -> ProfilePoint {
        let k = self.xi.partition_point(|&x| x <= xi);
        self.evaluate_in(xi, k)
    }

    /// `k` is the number of nodes `<= xi`.
    #[inline]
    fn evaluate_in(&self, xi: f64, k: usize) -> ProfilePoint {
        let n = self.xi.len();
        if k == 0 {
            let d = xi - self.xi[0];
            let r = self.tail_left.rate;
            let v = (self.conn.left.u - self.u[0]) * (r * d).exp();
            return self.tail_point(xi, self.conn.left.u - v, -v * r, -v * r * r, false);
        }
        if k == n {
            if xi == self.xi[n - 1] {
                return self.node(n - 1);
            }
            let d = xi - self.xi[n - 1];
            let r = self.tail_right.rate;
            let w = (self.u[n - 1] - self.conn.right.u) * (-r * d).exp();
            return self.tail_point(xi, self.conn.right.u + w, -w * r, w * r * r, true);
        }
        let i = k - 1;
        if xi == self.xi[i] {
            return self.node(i);
        }
        let (x0, x1) = (self.xi[i], self.xi[i + 1]);
        let (y0, y1) = (self.u[i], self.u[i + 1]);
        let h = x1 - x0;
        let secant = (y1 - y0) / h;
        let (mut m0, mut m1) = (self.du[i], self.du[i + 1]);
        if secant == 0.0 {
            m0 = 0.0;
            m1 = 0.0;
        } else {
            let (a, b) = (m0 / secant, m1 / secant);
            let norm = a * a + b * b;
            if norm > 9.0 {
                let tau = 3.0 / norm.sqrt();
                m0 = tau * a * secant;
                m1 = tau * b * secant;
            }
        }
        let t = (xi - x0) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let u = h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
        self.eq.point(xi, u.clamp(y1, y0))
    }

    fn tail_point(&self, xi: f64, u: f64, du: f64, ddu: f64, right: bool) -> ProfilePoint {
        let sigma = self.conn.sigma;
        let rho = if right {
            let w = u - self.conn.right.u;
            self.conn.right.rho + self.conn.right.rho * w / (sigma - u)
        } else {
            let v = self.conn.left.u - u;
            self.conn.left.rho - self.conn.left.rho * v / (sigma - u)
        };
        ProfilePoint {
            xi,
            rho,
            u,
            drho: rho / (sigma - u) * du,
            du,
            ddu,
        }
    }

    /// Evaluates at `xi0 + i * dx`, `i = 0..n`, walking the table once per
    /// chunk instead of searching for every point.
    pub fn sample_uniform(&self, xi0: f64, dx: f64, n: usize, exec: Exec) -> Vec<ProfilePoint> {
        exec.map_chunks(n, 1024, |range| {
            let mut out = Vec::with_capacity(range.len());
            let first = xi0 + range.start as f64 * dx;
            let mut k = self.xi.partition_point(|&x| x <= first);
            for i in range {
                let x = xi0 + i as f64 * dx;
                while k < self.xi.len() && self.xi[k] <= x {
                    k += 1;
                }
                out.push(self.evaluate_in(x, k));
            }
            out
        })
    }

    /// `u_- - u~(xi)` without the cancellation of forming `u~` first, which
    /// matters deep in the left tail where `u~` rounds to `u_-`.
    pub fn offset_left(&self, xi: f64) -> f64 {
        if xi < self.xi[0] {
            (self.conn.left.u - self.u[0]) * (self.tail_left.rate * (xi - self.xi[0])).exp()
        } else {
            self.conn.left.u - self.evaluate(xi).u
        }
    }

    /// `u~(xi) - u_+`, accurate deep in the right tail.
    pub fn offset_right(&self, xi: f64) -> f64 {
        let n = self.xi.len();
        if xi > self.xi[n - 1] {
            (self.u[n - 1] - self.conn.right.u) * (-self.tail_right.rate * (xi - self.xi[n - 1])).exp()
        } else {
            self.evaluate(xi).u - self.conn.right.u
        }
    }

    /// `p'(rho~)` at a point, for callers that need the pressure derivative.
    #[inline]
    pub fn dpressure(&self, p: &ProfilePoint) -> f64 {
        self.conn.gas.dpressure(p.rho)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub rate_left: f64,
    pub rate_right: f64,
    pub amplitude_left: f64,
    pub amplitude_right: f64,
    pub r2_left: f64,
    pub r2_right: f64,
    pub linear_rate_left: f64,
    pub linear_rate_right: f64,
    /// `max |u~''| / (delta max |u~'|)`
    pub second_derivative_ratio: f64,
}

/// Minimum coefficient of determination for an accepted exponential tail.
pub const TAIL_R2_MIN: f64 = 0.99;

pub fn verify_tails(profile: &ShockProfile) -> Result<TailReport> {
    let (lin_l, lin_r) = profile.linear_rates();
    let max_du = profile.du.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let max_ddu = profile.ddu.iter().fold(0.0_f64, |m, d| m.max(d.abs()));
    let rep = TailReport {
        rate_left: profile.tail_left.rate,
        rate_right: profile.tail_right.rate,
        amplitude_left: profile.tail_left.amplitude,
        amplitude_right: profile.tail_right.amplitude,
        r2_left: profile.tail_left.r2,
        r2_right: profile.tail_right.r2,
        linear_rate_left: lin_l,
        linear_rate_right: lin_r,
        second_derivative_ratio: max_ddu / (profile.delta() * max_du),
    };
    if !(rep.rate_left > 0.0 && rep.rate_right > 0.0) {
        return Err(Error::TailFit(format!(
            "non-positive decay rate (left {}, right {})",
            rep.rate_left, rep.rate_right
        )));
    }
    if rep.r2_left < TAIL_R2_MIN || rep.r2_right < TAIL_R2_MIN {
        return Err(Error::TailFit(format!(
            "non-exponential tail (R^2 left {}, right {})",
            rep.r2_left, rep.r2_right
        )));
    }
    if !rep.second_derivative_ratio.is_finite() {
        return Err(Error::TailFit("second derivative ratio is not finite".into()));
    }
    Ok(rep)
}

/// Table-wide consistency measurements of an integrated profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    /// Max over nodes of the momentum-equation residual over its local scale.
    pub ode_residual: f64,
    /// Same for the mass equation.
    pub mass_residual: f64,
    /// Max relative deviation of `rho~ (u~ - sigma)` from the mass flux.
    pub first_integral_drift: f64,
    pub monotone: bool,
    pub subsonic_gap_positive: bool,
    /// `max |sigma - u~ - sqrt(p'(rho~))|`
    pub sonic_deviation: f64,
    pub center_density_error: f64,
    pub left_end_gap: f64,
    pub right_end_gap: f64,
}

pub fn fidelity(profile: &ShockProfile) -> FidelityReport {
    let conn = &profile.conn;
    let gas = &conn.gas;
    let s = conn.sigma;
    let j = conn.mass_flux();
    let mut rep = FidelityReport {
        ode_residual: 0.0,
        mass_residual: 0.0,
        first_integral_drift: 0.0,
        monotone: true,
        subsonic_gap_positive: true,
        sonic_deviation: 0.0,
        center_density_error: (profile.rho[profile.center] - 0.5 * (conn.left.rho + conn.right.rho)).abs(),
        left_end_gap: (profile.u[0] - conn.left.u).abs(),
        right_end_gap: (profile.u[profile.len() - 1] - conn.right.u).abs(),
    };
    for k in 0..profile.len() {
        let p = profile.node(k);
        let dp = gas.dpressure(p.rho);
        let terms = [
            -s * p.drho * p.u,
            -s * p.rho * p.du,
            p.drho * p.u * p.u,
            2.0 * p.rho * p.u * p.du,
            dp * p.drho,
            -p.ddu,
        ];
        let scale = terms.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        let res: f64 = terms.iter().sum();
        if scale > 0.0 {
            rep.ode_residual = rep.ode_residual.max(res.abs() / scale);
        }
        let mass = [-s * p.drho, p.drho * p.u, p.rho * p.du];
        let mscale = mass.iter().fold(0.0_f64, |m, t| m.max(t.abs()));
        if mscale > 0.0 {
            rep.mass_residual = rep.mass_residual.max(mass.iter().sum::<f64>().abs() / mscale);
        }
        rep.first_integral_drift = rep.first_integral_drift.max((p.rho * (p.u - s) - j).abs() / j.abs());
        rep.sonic_deviation = rep.sonic_deviation.max((s - p.u - dp.sqrt()).abs());
        if !(s - p.u > 0.0) {
            rep.subsonic_gap_positive = false;
        }
        if k > 0 && !(profile.u[k] < profile.u[k - 1] && profile.rho[k] < profile.rho[k - 1]) {
            rep.monotone = false;
        }
    }
    rep
}

/// The weight `a(xi) = 1 + sqrt(delta) + (u_+ - u~(xi)) / sqrt(delta)`,
/// written as `1 + (u_- - u~) / sqrt(delta)`.
#[derive(Debug, Clone, Copy)]
pub struct Weight {
    pub delta: f64,
    sqrt_delta: f64,
    u_minus: f64,
}

impl Weight {
    pub fn new(profile: &ShockProfile) -> Self {
        let delta = profile.delta();
        Self {
            delta,
            sqrt_delta: delta.sqrt(),
            u_minus: profile.conn.left.u,
        }
    }

    /// `(a, a')` at an already evaluated profile point.
    #[inline]
    pub fn at(&self, p: &ProfilePoint) -> (f64, f64) {
        (1.0 + (self.u_minus - p.u) / self.sqrt_delta, -p.du / self.sqrt_delta)
    }

    pub fn upper_bound(&self) -> f64 {
        1.0 + self.sqrt_delta
    }
}

pub fn weight_at(profile: &ShockProfile, xi: f64) -> (f64, f64) {
    Weight::new(profile).at(&profile.evaluate(xi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hugoniot::{solve_hugoniot, EndState, GasParams};

    fn oracle() -> ShockConnection {
        solve_hugoniot(EndState { rho: 1.0, u: -1.0 }, -0.9, &GasParams::new(2.0).unwrap()).unwrap()
    }

    #[test]
    fn density_endpoints_and_inverse() {
        let c = oracle();
        assert_eq!(density_from_velocity(c.right.u, &c).unwrap(), c.right.rho);
        assert!((density_from_velocity(c.left.u, &c).unwrap() - c.left.rho).abs() < 1e-14);
        let rho0 = 0.5 * (c.left.rho + c.right.rho);
        let u0 = c.sigma + c.mass_flux() / rho0;
        assert!((density_from_velocity(u0, &c).unwrap() - rho0).abs() < 1e-15);
        assert!(density_from_velocity(c.sigma, &c).is_err());
        assert!(density_from_velocity(c.sigma + 1.0, &c).is_err());
    }

    #[test]
    fn rhs_vanishes_at_ends_and_branches_agree() {
        let c = oracle();
        assert_eq!(profile_rhs(c.right.u, &c).unwrap(), 0.0);
        assert_eq!(profile_rhs(c.left.u, &c).unwrap(), 0.0);
        let plus = profile_rhs_branch(c.left.u, &c, Branch::Plus).unwrap();
        let minus = profile_rhs_branch(c.left.u, &c, Branch::Minus).unwrap();
        assert!((plus - minus).abs() < 1e-12);
        assert!(plus.abs() < 1e-12);
        for k in 1..20 {
            let u = c.right.u + c.delta * k as f64 / 20.0;
            let a = profile_rhs_branch(u, &c, Branch::Plus).unwrap();
            let b = profile_rhs_branch(u, &c, Branch::Minus).unwrap();
            let f = profile_rhs(u, &c).unwrap();
            assert!(f < 0.0);
            assert!((a - b).abs() < 1e-14 && (a - f).abs() < 1e-14);
        }
        assert!(profile_rhs(c.right.u - 1e-3, &c).is_err());
        assert!(profile_rhs(c.left.u + 1e-3, &c).is_err());
    }

    #[test]
    fn midpoint_slope_regression() {
        let c = oracle();
        let mid = 0.5 * (c.left.u + c.right.u);
        let f = profile_rhs(mid, &c).unwrap();
        assert!(f < 0.0);
        // independent 40-digit evaluation of the plus-branch formula
        assert!((f - MIDPOINT_SLOPE).abs() < 1e-14, "{f:.17e}");
    }

    const MIDPOINT_SLOPE: f64 = -3.878_623_621_731_935e-3;

    #[test]
    fn table_is_monotone_and_normalised() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        let rep = fidelity(&p);
        assert!(rep.monotone);
        assert!(rep.subsonic_gap_positive);
        assert!(rep.first_integral_drift <= 1e-10);
        assert!(rep.ode_residual <= 1e-8);
        assert_eq!(p.evaluate(0.0).rho, 0.5 * (p.conn.left.rho + p.conn.right.rho));
        let eps = p.tail_eps * p.delta();
        assert!(rep.left_end_gap <= eps && rep.right_end_gap <= eps);
    }

    #[test]
    fn far_tails_reach_end_states() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        let d = p.delta();
        let tol = p.tail_eps * d * 1e-3;
        let r = p.evaluate(p.xi_max() + 100.0 / d);
        assert!((r.u - p.conn.right.u).abs() <= tol);
        assert!((r.rho - p.conn.right.rho).abs() <= tol);
        assert!(r.du.abs() <= tol && r.drho.abs() <= tol && r.ddu.abs() <= tol);
        let l = p.evaluate(p.xi_min() - 100.0 / d);
        assert!((l.u - p.conn.left.u).abs() <= tol);
        assert!((l.rho - p.conn.left.rho).abs() <= tol);
    }

    #[test]
    fn tail_extrapolation_is_continuous() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        for (inside, outside) in [(p.xi_min() + 1e-9, p.xi_min() - 1e-9), (p.xi_max() - 1e-9, p.xi_max() + 1e-9)] {
            let (a, b) = (p.evaluate(inside), p.evaluate(outside));
            assert!(a.du < 0.0 && b.du < 0.0);
            assert!((a.du / b.du - 1.0).abs() < 1e-3, "{} vs {}", a.du, b.du);
            assert!((a.ddu / b.ddu - 1.0).abs() < 1e-2, "{} vs {}", a.ddu, b.ddu);
            assert!((a.drho / b.drho - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn tails_match_linearisation() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        let rep = verify_tails(&p).unwrap();
        assert!(rep.rate_left > 0.0 && rep.rate_right > 0.0);
        assert!((rep.rate_left / rep.linear_rate_left - 1.0).abs() < 1e-3);
        assert!((rep.rate_right / rep.linear_rate_right - 1.0).abs() < 1e-3);
        assert!(rep.r2_left > 0.999 && rep.r2_right > 0.999);
    }

    #[test]
    fn interpolation_is_accurate_between_nodes() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        // a coarser table must reproduce the fine one at the fine nodes
        let coarse = integrate_profile(
            &oracle(),
            &ProfileOptions {
                node_spacing: 0.05,
                ..Default::default()
            },
        )
        .unwrap();
        let mut worst: f64 = 0.0;
        for k in (0..p.len()).step_by(7) {
            let e = coarse.evaluate(p.xi[k]);
            worst = worst.max((e.u - p.u[k]).abs());
        }
        assert!(worst < 1e-10, "worst {worst:e}");
    }

    #[test]
    fn weight_limits() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        let d = p.delta();
        let (a_left, _) = weight_at(&p, -1e4);
        let (a_right, _) = weight_at(&p, 1e4);
        assert!((a_left - 1.0).abs() < 1e-12);
        assert!((a_right - (1.0 + d.sqrt())).abs() < 1e-12);
        let (_, da) = weight_at(&p, 0.0);
        assert!(da > 0.0);
    }

    #[test]
    fn uniform_sampling_matches_pointwise() {
        let p = integrate_profile(&oracle(), &ProfileOptions::default()).unwrap();
        let pts = p.sample_uniform(-400.0, 0.37, 3000, Exec::Sequential);
        for (i, q) in pts.iter().enumerate().step_by(13) {
            let e = p.evaluate(-400.0 + i as f64 * 0.37);
            assert_eq!(*q, e);
        }
        let par = p.sample_uniform(-400.0, 0.37, 3000, Exec::Parallel);
        assert_eq!(pts, par);
    }
}
