//! Rankine–Hugoniot connection for the second characteristic family of the
//! barotropic system with gamma-law pressure `p = K rho^gamma`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default shock strength above which a warning is logged.
pub const DEFAULT_DELTA_WARN: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GasParams {
    pub gamma: f64,
    pub pressure_constant: f64,
    pub viscosity: f64,
}

impl GasParams {
    /// Gamma-law gas with `K = mu = 1`.
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 1.0) || !gamma.is_finite() {
            return Err(Error::Domain(format!("gamma must be > 1, got {gamma}")));
        }
        Ok(Self {
            gamma,
            pressure_constant: 1.0,
            viscosity: 1.0,
        })
    }

    #[inline]
    pub fn pressure(&self, rho: f64) -> f64 {
        self.pressure_constant * rho.powf(self.gamma)
    }

    /// `p'(rho)`.
    #[inline]
    pub fn dpressure(&self, rho: f64) -> f64 {
        self.pressure_constant * self.gamma * rho.powf(self.gamma - 1.0)
    }

    /// `(p(b) - p(a)) / (b - a)` without cancellation for `b` close to `a`.
    pub fn pressure_slope(&self, a: f64, b: f64) -> f64 {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        self.pressure_slope_rel(lo, (hi - lo) / lo)
    }

    /// `(p(lo (1 + x)) - p(lo)) / (lo x)` for a relative gap `x >= 0` known
    /// more accurately than the two densities themselves.
    pub fn pressure_slope_rel(&self, lo: f64, x: f64) -> f64 {
        if x == 0.0 {
            return self.dpressure(lo);
        }
        self.pressure_constant * lo.powf(self.gamma - 1.0) * (self.gamma * x.ln_1p()).exp_m1() / x
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EndState {
    pub rho: f64,
    pub u: f64,
}

impl EndState {
    pub fn new(rho: f64, u: f64) -> Result<Self> {
        if !(rho > 0.0) || !rho.is_finite() || !u.is_finite() {
            return Err(Error::Domain(format!("invalid state (rho = {rho}, u = {u})")));
        }
        Ok(Self { rho, u })
    }
}

/// Sound speed `sqrt(p'(rho))`.
pub fn sound_speed(state: EndState, gas: &GasParams) -> Result<f64> {
    if !(state.rho > 0.0) {
        return Err(Error::Domain(format!("non-positive density {}", state.rho)));
    }
    Ok(gas.dpressure(state.rho).sqrt())
}

/// Second characteristic speed `u + sqrt(p'(rho))`.
pub fn lambda2(state: EndState, gas: &GasParams) -> Result<f64> {
    Ok(state.u + sound_speed(state, gas)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StateClass {
    Subsonic,
    Transonic,
    Supersonic,
    NotInScope,
}

/// Sonic tolerance: `|u + c| <= 1e-10 c` counts as transonic.
pub const TOL_SONIC: f64 = 1e-10;

pub fn classify_state(state: EndState, gas: &GasParams) -> Result<StateClass> {
    let c = sound_speed(state, gas)?;
    if state.u >= 0.0 {
        return Ok(StateClass::NotInScope);
    }
    let lam = state.u + c;
    Ok(if lam.abs() <= TOL_SONIC * c {
        StateClass::Transonic
    } else if lam > 0.0 {
        StateClass::Subsonic
    } else {
        StateClass::Supersonic
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShockConnection {
    pub right: EndState,
    pub left: EndState,
    pub sigma: f64,
    pub delta: f64,
    pub gas: GasParams,
}

impl ShockConnection {
    /// Mass flux through the shock, `rho_+ (u_+ - sigma)` (negative).
    pub fn mass_flux(&self) -> f64 {
        self.right.rho * (self.right.u - self.sigma)
    }

    /// Scale used to normalise Rankine–Hugoniot residuals.
    pub fn residual_scale(&self) -> f64 {
        let r = self.right;
        (r.rho * r.u * r.u + self.gas.pressure(r.rho)).abs().max(1.0)
    }
}

pub fn rh_residual(conn: &ShockConnection) -> (f64, f64) {
    let (rp, up) = (conn.right.rho, conn.right.u);
    let (rm, um) = (conn.left.rho, conn.left.u);
    let s = conn.sigma;
    let gas = &conn.gas;
    let r1 = -s * (rp - rm) + (rp * up - rm * um);
    let r2 = -s * (rp * up - rm * um) + (rp * up * up - rm * um * um + gas.pressure(rp) - gas.pressure(rm));
    (r1, r2)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaxReport {
    pub admissible: bool,
    /// `sigma - lambda2(U+)`
    pub plus_margin: f64,
    /// `lambda2(U-) - sigma`
    pub minus_margin: f64,
}

pub fn lax_check(conn: &ShockConnection) -> LaxReport {
    let gas = &conn.gas;
    let lam_plus = conn.right.u + gas.dpressure(conn.right.rho).sqrt();
    let lam_minus = conn.left.u + gas.dpressure(conn.left.rho).sqrt();
    let plus_margin = conn.sigma - lam_plus;
    let minus_margin = lam_minus - conn.sigma;
    LaxReport {
        admissible: plus_margin > 0.0 && minus_margin > 0.0,
        plus_margin,
        minus_margin,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HugoniotOptions {
    pub delta_warn: f64,
}

impl Default for HugoniotOptions {
    fn default() -> Self {
        Self {
            delta_warn: DEFAULT_DELTA_WARN,
        }
    }
}

pub fn solve_hugoniot(right: EndState, u_minus: f64, gas: &GasParams) -> Result<ShockConnection> {
    solve_hugoniot_with(right, u_minus, gas, &HugoniotOptions::default())
}

/// Solves for the left state `(rho_-, u_minus)` on the 2-shock curve through
/// `right`, and the shock speed.
///
/// Eliminating `sigma` with the mass condition reduces the jump relations to
/// `(p(rho_-) - p(rho_+)) (rho_- - rho_+) / (rho_+ rho_-) = delta^2`, whose
/// left side is strictly increasing in `rho_- > rho_+`. The root is bracketed
/// geometrically and bisected to machine precision.
pub fn solve_hugoniot_with(
    right: EndState,
    u_minus: f64,
    gas: &GasParams,
    opts: &HugoniotOptions,
) -> Result<ShockConnection> {
    let right = EndState::new(right.rho, right.u)?;
    if !u_minus.is_finite() || !(right.u < u_minus && u_minus < 0.0) {
        return Err(Error::Domain(format!(
            "requires u+ < u- < 0 (u+ = {}, u- = {u_minus})",
            right.u
        )));
    }
    match classify_state(right, gas)? {
        StateClass::Subsonic | StateClass::Transonic => {}
        other => {
            return Err(Error::Domain(format!(
                "right state must be subsonic or transonic, got {other:?}"
            )))
        }
    }

    let delta = u_minus - right.u;
    if delta > opts.delta_warn {
        log::warn!(
            "shock strength {delta:.3} exceeds {:.3}; the stability theory is small-amplitude",
            opts.delta_warn
        );
    }

    let rp = right.rho;
    let d2 = delta * delta;
    let reduced = |rm: f64| gas.pressure_slope(rp, rm) * (rm - rp) * (rm - rp) / (rp * rm) - d2;

    let mut lo = rp * (1.0 + 1e-14);
    if reduced(lo) >= 0.0 {
        // delta is below what double precision can resolve on this curve
        return Err(Error::NoAdmissibleShock(format!(
            "shock strength {delta:e} too small to bracket"
        )));
    }
    let mut hi = rp * 2.0;
    let mut grow = 0;
    while reduced(hi) <= 0.0 {
        lo = hi;
        hi *= 2.0;
        grow += 1;
        if grow > 200 || !hi.is_finite() {
            return Err(Error::NoAdmissibleShock("no sign change of the reduced relation".into()));
        }
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if reduced(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let rm = if reduced(hi).abs() < reduced(lo).abs() { hi } else { lo };

    let sigma = right.u + (rm / rp).sqrt() * gas.pressure_slope(rp, rm).sqrt();
    let sigma_mass = (rm * u_minus - rp * right.u) / (rm - rp);
    let cond = 8.0 * f64::EPSILON * (rm * u_minus.abs() + rp * right.u.abs()) / (rm - rp);
    if (sigma - sigma_mass).abs() > 1e-10_f64.max(cond) {
        return Err(Error::Internal(format!(
            "closed-form shock speed {sigma:.16e} disagrees with mass relation {sigma_mass:.16e}"
        )));
    }

    let conn = ShockConnection {
        right,
        left: EndState { rho: rm, u: u_minus },
        sigma,
        delta,
        gas: *gas,
    };
    let lax = lax_check(&conn);
    if !lax.admissible {
        return Err(Error::Inadmissible {
            plus: lax.plus_margin,
            minus: lax.minus_margin,
        });
    }
    Ok(conn)
}
