//! Run configuration, initial data and the time loop.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{cfl_dt, compensated_sum, step_coupled, BoundaryData, FluidField, Grid, SolverContext, GAUSS5, RHO_FLOOR};
use crate::diagnostics::{boundary_production, functionals_sampled, DiagRecord};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hugoniot::{solve_hugoniot_with, EndState, GasParams, HugoniotOptions, ShockConnection, DEFAULT_DELTA_WARN};
use crate::profile::{fidelity, integrate_profile, verify_tails, FidelityReport, ProfileOptions, ProfilePoint, ShockProfile, TailReport};
use crate::shift::{advance_shift, sample_shifted, shift_rhs, ShiftMode, ShiftState};

fn default_cfl() -> f64 {
    0.4
}

fn default_beta_target() -> f64 {
    1e-6
}

fn default_delta_warn() -> f64 {
    DEFAULT_DELTA_WARN
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub gamma: f64,
    pub rho_plus: f64,
    pub u_plus: f64,
    pub u_minus: f64,
    /// Initial distance of the shock centre from the boundary; chosen from
    /// the left tail and `beta_target` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(rename = "L")]
    pub length: f64,
    #[serde(rename = "N")]
    pub cells: usize,
    pub t_final: f64,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    /// Overrides the CFL step (the last step is still clipped to `t_final`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fixed_dt: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta_target")]
    pub beta_target: f64,
    #[serde(default = "default_delta_warn")]
    pub delta_warn: f64,
    #[serde(default)]
    pub boundary: BoundaryData,
    #[serde(default)]
    pub shift_mode: ShiftMode,
    #[serde(default)]
    pub exec: Exec,
    #[serde(default)]
    pub perturbation: Perturbation,
    #[serde(default)]
    pub output: OutputCadence,
    #[serde(default)]
    pub profile: ProfileOptions,
}

impl SimConfig {
    /// Connection inputs with everything else at defaults.
    pub fn new(gamma: f64, rho_plus: f64, u_plus: f64, u_minus: f64, length: f64, cells: usize, t_final: f64) -> Self {
        Self {
            gamma,
            rho_plus,
            u_plus,
            u_minus,
            beta: None,
            length,
            cells,
            t_final,
            cfl: default_cfl(),
            fixed_dt: None,
            seed: 0,
            beta_target: default_beta_target(),
            delta_warn: default_delta_warn(),
            boundary: BoundaryData::default(),
            shift_mode: ShiftMode::default(),
            exec: Exec::default(),
            perturbation: Perturbation::default(),
            output: OutputCadence::default(),
            profile: ProfileOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PerturbationShape {
    None,
    /// `eps * bump((x - center) / width)` on both `rho` and `u`.
    #[default]
    Bump,
    /// `count` bumps of half the width with seeded random centres in
    /// `center +- width` and independent amplitudes in `[-eps, eps]`.
    RandomBumps,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Perturbation {
    pub shape: PerturbationShape,
    pub amplitude: f64,
    /// Defaults to the standoff `beta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center: Option<f64>,
    pub width: f64,
    pub count: usize,
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            shape: PerturbationShape::Bump,
            amplitude: 0.0,
            center: None,
            width: 20.0,
            count: 4,
        }
    }
}

/// `exp(1 - 1 / (1 - s^2))` on `|s| < 1`, zero elsewhere; peak value 1.
pub fn bump(s: f64) -> f64 {
    if s.abs() < 1.0 {
        (1.0 - 1.0 / (1.0 - s * s)).exp()
    } else {
        0.0
    }
}

/// One smooth bump added to `(rho, u)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpTerm {
    pub center: f64,
    pub width: f64,
    pub amp_rho: f64,
    pub amp_u: f64,
}

impl Perturbation {
    /// Resolves the shape into explicit bumps. Deterministic in `seed`.
    pub fn terms(&self, beta: f64, seed: u64) -> Vec<BumpTerm> {
        let c = self.center.unwrap_or(beta);
        let eps = self.amplitude;
        match self.shape {
            PerturbationShape::None => Vec::new(),
            _ if eps == 0.0 => Vec::new(),
            PerturbationShape::Bump => vec![BumpTerm {
                center: c,
                width: self.width,
                amp_rho: eps,
                amp_u: eps,
            }],
            PerturbationShape::RandomBumps => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                (0..self.count)
                    .map(|_| BumpTerm {
                        center: c + self.width * rng.gen_range(-1.0..1.0),
                        width: 0.5 * self.width,
                        amp_rho: eps * rng.gen_range(-1.0..1.0),
                        amp_u: eps * rng.gen_range(-1.0..1.0),
                    })
                    .collect()
            }
        }
    }

    /// Leftmost point of the support.
    pub fn support_start(&self, beta: f64) -> f64 {
        let c = self.center.unwrap_or(beta);
        match self.shape {
            PerturbationShape::None => f64::INFINITY,
            PerturbationShape::Bump => c - self.width,
            PerturbationShape::RandomBumps => c - 1.5 * self.width,
        }
    }
}

fn eval_terms(terms: &[BumpTerm], x: f64) -> (f64, f64) {
    terms.iter().fold((0.0, 0.0), |(r, u), b| {
        let v = bump((x - b.center) / b.width);
        (r + b.amp_rho * v, u + b.amp_u * v)
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputCadence {
    /// Diagnostic records per time the shock needs to cross its own width
    /// `1 / delta`.
    pub records_per_crossing: f64,
    /// One snapshot every this many records.
    pub snapshot_every: usize,
    pub snapshots: bool,
}

impl Default for OutputCadence {
    fn default() -> Self {
        Self {
            records_per_crossing: 50.0,
            snapshot_every: 10,
            snapshots: true,
        }
    }
}

/// Norms of the initial data entering the smallness condition, plus the
/// pieces they decompose into.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    /// `||(rho0, u0) - (rho_+, u_+)||` over `(beta, L)`.
    pub l2_right: f64,
    /// `||(rho0, u0) - (rho_-, u_-)||` over `(0, beta)`.
    pub l2_left: f64,
    /// `||(rho0_x, u0_x)||` over `(0, L)`.
    pub grad_l2: f64,
    pub total: f64,
    /// L2 norm of the added perturbation alone.
    pub perturbation_l2: f64,
    pub perturbation_sup: f64,
    /// `l2_right` of the unperturbed wave.
    pub profile_right_l2: f64,
    pub rho_min: f64,
}

/// A fully prepared simulation: connection, profile, grid and standoff.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub config: SimConfig,
    pub conn: ShockConnection,
    pub profile: ShockProfile,
    pub tails: TailReport,
    pub fidelity: FidelityReport,
    pub grid: Grid,
    pub beta: f64,
    /// Distance from `L` the tracked shock must keep.
    pub margin: f64,
}

/// Smallest `beta` with `A exp(-rate beta) <= target` for the fitted left
/// tail, clamped below by `beta_min`.
pub fn choose_beta(profile: &ShockProfile, target: f64, beta_min: f64) -> f64 {
    let t = profile.tail_left;
    let beta = (t.amplitude / target).ln() / t.rate;
    if beta.is_finite() {
        beta.max(beta_min)
    } else {
        beta_min
    }
}

impl Simulation {
    pub fn new(config: SimConfig) -> Result<Self> {
        let gas = GasParams::new(config.gamma).map_err(|e| Error::config("gamma", e.to_string()))?;
        let right = EndState::new(config.rho_plus, config.u_plus).map_err(|e| Error::config("rho_plus", e.to_string()))?;
        if !(config.delta_warn > 0.0) {
            return Err(Error::config("delta_warn", "must be positive"));
        }
        let conn = solve_hugoniot_with(right, config.u_minus, &gas, &HugoniotOptions { delta_warn: config.delta_warn })
            .map_err(|e| match e {
                Error::Internal(_) => e,
                other => Error::config("u_minus", other.to_string()),
            })?;
        let grid = Grid::new(config.length, config.cells)?;
        if !(config.cfl > 0.0 && config.cfl <= 1.0) {
            return Err(Error::config("cfl", format!("must lie in (0, 1], got {}", config.cfl)));
        }
        if !(config.t_final >= 0.0) || !config.t_final.is_finite() {
            return Err(Error::config("t_final", "must be finite and nonnegative"));
        }
        if let Some(dt) = config.fixed_dt {
            if !(dt > 0.0) {
                return Err(Error::config("fixed_dt", "must be positive"));
            }
        }
        if !(config.beta_target > 0.0) {
            return Err(Error::config("beta_target", "must be positive"));
        }
        let o = &config.output;
        if !(o.records_per_crossing > 0.0) || o.snapshot_every == 0 {
            return Err(Error::config("output", "records_per_crossing and snapshot_every must be positive"));
        }
        let p = &config.profile;
        if !(p.tail_eps > 0.0 && p.tail_eps < 1.0 && p.node_spacing > 0.0 && p.rtol > 0.0) {
            return Err(Error::config("profile", "tail_eps in (0,1), node_spacing and rtol positive"));
        }
        let profile = integrate_profile(&conn, &config.profile)?;
        let tails = verify_tails(&profile)?;
        let fidelity = fidelity(&profile);
        let beta = match config.beta {
            Some(b) if b > 0.0 && b.is_finite() => b,
            Some(b) => return Err(Error::config("beta", format!("must be positive, got {b}"))),
            None => choose_beta(&profile, config.beta_target, 10.0 * grid.h),
        };
        let margin = 20.0 / profile.tail_right.rate;
        let reach = beta + conn.sigma * config.t_final + margin;
        if !(config.length > reach) {
            return Err(Error::config(
                "L",
                format!("domain too short: need L > beta + sigma t_final + 20/rate = {reach:.6}"),
            ));
        }
        let pert = &config.perturbation;
        if pert.shape != PerturbationShape::None && pert.amplitude != 0.0 {
            if !(pert.width > 0.0) {
                return Err(Error::config("perturbation.width", "must be positive"));
            }
            if !(pert.support_start(beta) > 0.0) {
                return Err(Error::config(
                    "perturbation.center",
                    "perturbation support must stay away from x = 0",
                ));
            }
        }
        Ok(Self {
            config,
            conn,
            profile,
            tails,
            fidelity,
            grid,
            beta,
            margin,
        })
    }

    pub fn context(&self) -> SolverContext<'_> {
        SolverContext {
            grid: self.grid,
            gas: self.conn.gas,
            right: self.conn.right,
            u_minus: self.conn.left.u,
            boundary: self.config.boundary,
            profile: &self.profile,
            beta: self.beta,
            exec: self.config.exec,
        }
    }

    /// Time between diagnostic records.
    pub fn record_interval(&self) -> f64 {
        1.0 / (self.conn.delta * self.conn.sigma) / self.config.output.records_per_crossing
    }

    /// Cell averages of `(rho~, u~)(x - beta)` plus the perturbation, with
    /// momentum averaged as `(rho~ + b_rho)(u~ + b_u)`.
    pub fn init_data(&self) -> Result<(FluidField, InitReport)> {
        let g = self.grid;
        let terms = self.config.perturbation.terms(self.beta, self.config.seed);
        let cells: Vec<[f64; 4]> = self.config.exec.map_range(g.cells, |i| {
            let xc = g.center(i);
            let mut acc = [0.0; 4];
            for &(s, w) in &GAUSS5 {
                let x = xc + s * g.h;
                let p = self.profile.evaluate(x - self.beta);
                let (br, bu) = eval_terms(&terms, x);
                acc[0] += w * (p.rho + br);
                acc[1] += w * (p.rho + br) * (p.u + bu);
                acc[2] += w * p.rho;
                acc[3] += w * p.rho * p.u;
            }
            acc
        });
        let rho: Vec<f64> = cells.iter().map(|c| c[0]).collect();
        let mom: Vec<f64> = cells.iter().map(|c| c[1]).collect();
        if let Some((i, &r)) = rho.iter().enumerate().find(|(_, r)| !(**r > RHO_FLOOR)) {
            return Err(Error::config(
                "perturbation.amplitude",
                format!("initial density {r:e} at x = {} is not positive", g.center(i)),
            ));
        }
        let field = FluidField { t: 0.0, rho, mom };
        let base = FluidField {
            t: 0.0,
            rho: cells.iter().map(|c| c[2]).collect(),
            mom: cells.iter().map(|c| c[3]).collect(),
        };
        let report = self.init_report(&field, &base);
        Ok((field, report))
    }

    fn init_report(&self, field: &FluidField, base: &FluidField) -> InitReport {
        let g = self.grid;
        let (l, r) = (self.conn.left, self.conn.right);
        let u = field.velocities();
        let ub = base.velocities();
        let sq = |a: f64, b: f64| a * a + b * b;
        let right_part = |rho: &[f64], vel: &[f64]| {
            compensated_sum((0..g.cells).filter(|&i| g.center(i) >= self.beta).map(|i| sq(rho[i] - r.rho, vel[i] - r.u)))
        };
        let l2_right = (right_part(&field.rho, &u) * g.h).sqrt();
        let profile_right_l2 = (right_part(&base.rho, &ub) * g.h).sqrt();
        let l2_left = (compensated_sum(
            (0..g.cells)
                .filter(|&i| g.center(i) < self.beta)
                .map(|i| sq(field.rho[i] - l.rho, u[i] - l.u)),
        ) * g.h)
            .sqrt();
        let n = g.cells;
        let d = |f: &[f64], i: usize| {
            if i == 0 {
                (f[1] - f[0]) / g.h
            } else if i + 1 == n {
                (f[n - 1] - f[n - 2]) / g.h
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * g.h)
            }
        };
        let grad_l2 = (compensated_sum((0..n).map(|i| sq(d(&field.rho, i), d(&u, i)))) * g.h).sqrt();
        let perturbation_l2 = (compensated_sum((0..n).map(|i| sq(field.rho[i] - base.rho[i], u[i] - ub[i]))) * g.h).sqrt();
        let perturbation_sup = (0..n).fold(0.0_f64, |m, i| m.max((field.rho[i] - base.rho[i]).abs()).max((u[i] - ub[i]).abs()));
        InitReport {
            l2_right,
            l2_left,
            grad_l2,
            total: l2_right + l2_left + grad_l2,
            perturbation_l2,
            perturbation_sup,
            profile_right_l2,
            rho_min: field.min_density().1,
        }
    }

    /// Runs to `t_final` with no output sink.
    pub fn run_quiet(&self) -> Result<RunSummary> {
        self.run(&mut NullObserver)
    }

    pub fn run(&self, obs: &mut dyn RunObserver) -> Result<RunSummary> {
        let ctx = self.context();
        let (mut field, init) = self.init_data()?;
        let h = self.grid.h;
        let t_final = self.config.t_final;
        let mode = self.config.shift_mode;
        let sigma = self.conn.sigma;
        let cadence = self.config.output;
        let interval = self.record_interval();

        let mut shift = ShiftState::new(&self.conn, self.beta);
        let mass0 = field.mass(h);
        let mut mass_prev = mass0;
        let mut outflow = Accumulator::default();
        let mut max_step_imbalance = 0.0_f64;
        let mut rho_min = field.min_density().1;
        let mut rho_max = field.rho.iter().fold(f64::NEG_INFINITY, |m, &r| m.max(r));
        let mut p_int = Accumulator::default();
        let mut p_plus = Accumulator::default();
        let mut p_max = 0.0_f64;
        let mut p_prev = boundary_production(&field, 0.0, &ctx);

        let mut records = Vec::new();
        let mut snapshots = 0usize;
        let mut steps = 0usize;
        let mut c0 = 0.0_f64;
        loop {
            let due = field.t >= records.len() as f64 * interval - 1e-9 * interval;
            if due || field.t >= t_final {
                let pts = sample_shifted(&ctx, field.t, shift.x);
                let rec = functionals_sampled(&field, shift.x, &pts, &ctx, mode);
                let sup = rec.supnorm_phi + rec.supnorm_psi;
                if sup > 0.0 {
                    c0 = c0.max(rec.xdot.abs() / sup);
                }
                obs.record(&rec)?;
                if cadence.snapshots && records.len() % cadence.snapshot_every == 0 {
                    obs.snapshot(snapshots, &field, &pts, shift.x)?;
                    snapshots += 1;
                }
                records.push(rec);
            }
            if field.t >= t_final {
                break;
            }
            let mut dt = self.config.fixed_dt.unwrap_or_else(|| cfl_dt(&field, &self.grid, &ctx.gas, self.config.cfl));
            if field.t + dt >= t_final - 1e-12 * dt {
                dt = t_final - field.t;
            }
            let out = match step_coupled(&field, shift.x, dt, &ctx, |f, x| shift_rhs(f, x, &ctx, mode)) {
                Ok(o) => o,
                Err(Error::Positivity { t, cell, x, value, .. }) => {
                    let dump = obs.abort(&field);
                    return Err(Error::Positivity { t, cell, x, value, dump });
                }
                Err(e) => return Err(e),
            };
            advance_shift(&mut shift, field.t, dt, out.shift_rates);
            let t_new = if dt == t_final - field.t { t_final } else { field.t + dt };
            field = out.field;
            field.t = t_new;
            steps += 1;

            let mass = field.mass(h);
            max_step_imbalance = max_step_imbalance.max((mass - mass_prev + out.mass_outflow).abs() / mass0);
            mass_prev = mass;
            outflow.add(out.mass_outflow);
            rho_min = rho_min.min(field.min_density().1);
            rho_max = field.rho.iter().fold(rho_max, |m, &r| m.max(r));

            let p_new = boundary_production(&field, shift.x, &ctx);
            p_int.add(0.5 * (p_prev + p_new) * dt);
            p_plus.add(0.5 * (p_prev.max(0.0) + p_new.max(0.0)) * dt);
            p_max = p_max.max(p_int.value());
            p_prev = p_new;

            let position = sigma * field.t + shift.x + self.beta;
            let limit = self.grid.length - self.margin;
            if position > limit {
                return Err(Error::ShockExit {
                    t: field.t,
                    position,
                    limit,
                });
            }
        }
        let last = *records.last().expect("at least one record");
        shift.history.push((field.t, shift.x, last.xdot));
        shift.xdot = last.xdot;
        let mass_final = field.mass(h);
        let cumulative_outflow = outflow.value();
        let stats = RunStats {
            steps,
            t_end: field.t,
            beta: self.beta,
            x_final: shift.x,
            max_abs_x: shift.history.iter().fold(0.0_f64, |m, e| m.max(e.1.abs())),
            mass_initial: mass0,
            mass_final,
            cumulative_outflow,
            mass_imbalance_rel: (mass_final - mass0 + cumulative_outflow).abs() / mass0,
            max_step_imbalance_rel: max_step_imbalance,
            rho_min,
            rho_max,
            lipschitz_c0: c0,
            production_integral: p_int.value(),
            production_plus_integral: p_plus.value(),
            production_running_max: p_max,
            records: records.len(),
            snapshots,
        };
        Ok(RunSummary {
            stats,
            init,
            records,
            shift,
            field,
        })
    }
}

#[derive(Debug, Default, Clone, Copy)]
struct Accumulator {
    sum: f64,
    comp: f64,
}

impl Accumulator {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Receives the run's output as it is produced.
pub trait RunObserver {
    fn record(&mut self, _rec: &DiagRecord) -> Result<()> {
        Ok(())
    }

    /// `pts` holds the shifted wave at the cell centres.
    fn snapshot(&mut self, _index: usize, _field: &FluidField, _pts: &[ProfilePoint], _x_shift: f64) -> Result<()> {
        Ok(())
    }

    /// Called with the last accepted field before a positivity abort;
    /// returns the path of a dump if one was written.
    fn abort(&mut self, _last: &FluidField) -> Option<PathBuf> {
        None
    }
}

pub struct NullObserver;

impl RunObserver for NullObserver {}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunStats {
    pub steps: usize,
    pub t_end: f64,
    pub beta: f64,
    pub x_final: f64,
    pub max_abs_x: f64,
    pub mass_initial: f64,
    pub mass_final: f64,
    /// Net mass that left through both boundaries.
    pub cumulative_outflow: f64,
    pub mass_imbalance_rel: f64,
    pub max_step_imbalance_rel: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Largest `|X'| / (sup|phi| + sup|psi|)` over the records.
    pub lipschitz_c0: f64,
    /// `int_0^T P` by the trapezoidal rule over every step.
    pub production_integral: f64,
    pub production_plus_integral: f64,
    /// `max_t int_0^t P`, the quantity bounded uniformly in time.
    pub production_running_max: f64,
    pub records: usize,
    pub snapshots: usize,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub stats: RunStats,
    pub init: InitReport,
    pub records: Vec<DiagRecord>,
    pub shift: ShiftState,
    pub field: FluidField,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(cells: usize, t_final: f64) -> SimConfig {
        let mut c = SimConfig::new(2.0, 1.0, -1.0, -0.9, 400.0, cells, t_final);
        c.beta = Some(80.0);
        c.exec = Exec::Sequential;
        c
    }

    #[test]
    fn zero_final_time_gives_one_record_equal_to_initial_data() {
        let mut c = base(800, 0.0);
        c.perturbation.amplitude = 0.01;
        let sim = Simulation::new(c).unwrap();
        let out = sim.run_quiet().unwrap();
        assert_eq!(out.records.len(), 1);
        assert_eq!(out.stats.steps, 0);
        let (f0, _) = sim.init_data().unwrap();
        assert_eq!(out.field, f0);
    }

    #[test]
    fn unperturbed_initial_data_matches_profile_averages() {
        let sim = Simulation::new(base(800, 0.0)).unwrap();
        let (f, rep) = sim.init_data().unwrap();
        let (r, m) = super::super::profile_cell_averages(&sim.profile, &sim.grid, sim.beta, Exec::Sequential);
        assert_eq!(f.rho, r);
        assert_eq!(f.mom, m);
        assert_eq!(rep.perturbation_l2, 0.0);
    }

    #[test]
    fn perturbed_initial_norms() {
        let mut c = base(1600, 0.0);
        c.perturbation.amplitude = 0.01;
        let sim = Simulation::new(c).unwrap();
        let (f, rep) = sim.init_data().unwrap();
        assert!(rep.l2_right <= rep.perturbation_l2 + rep.profile_right_l2 + 1e-15);
        assert!(rep.rho_min >= 0.5);
        assert!(f.min_density().1 >= 0.5);
        // eps * ||bump|| over width 20, two components
        let n = 20000;
        let bl2: f64 = (0..n).map(|k| bump(-1.0 + 2.0 * (k as f64 + 0.5) / n as f64).powi(2)).sum::<f64>() * 2.0 / n as f64;
        let expect = 0.01 * (2.0 * 20.0 * bl2).sqrt();
        assert!((rep.perturbation_l2 - expect).abs() < 0.02 * expect, "{} vs {expect}", rep.perturbation_l2);
    }

    #[test]
    fn config_invariants() {
        let mut c = base(800, 0.0);
        c.u_minus = -1.1;
        let e = Simulation::new(c).unwrap_err();
        assert!(matches!(e, Error::Config { ref key, .. } if key == "u_minus"), "{e}");
        let mut c = base(800, 400.0);
        c.length = 400.0;
        assert!(matches!(Simulation::new(c).unwrap_err(), Error::Config { ref key, .. } if key == "L"));
        let mut c = base(800, 0.0);
        c.perturbation.amplitude = 0.01;
        c.perturbation.center = Some(10.0);
        assert!(Simulation::new(c).is_err());
        let mut c = base(800, 0.0);
        c.perturbation.amplitude = -2.0;
        let sim = Simulation::new(c).unwrap();
        assert!(matches!(sim.init_data().unwrap_err(), Error::Config { .. }));
    }

    #[test]
    fn beta_defaults_from_tail() {
        let mut c = base(800, 0.0);
        c.beta = None;
        let sim = Simulation::new(c).unwrap();
        let t = sim.profile.tail_left;
        assert!((t.amplitude * (-t.rate * sim.beta).exp() - 1e-6).abs() < 1e-12);
        let b2 = choose_beta(&sim.profile, 1e-12, 0.0);
        let b1 = choose_beta(&sim.profile, 1e-6, 0.0);
        assert!((b2 - b1 - 6.0 * 10f64.ln() / t.rate).abs() < 1e-9);
        assert_eq!(choose_beta(&sim.profile, 1.0, 5.0), 5.0);
    }

    #[test]
    fn random_bumps_are_seeded() {
        let p = Perturbation {
            shape: PerturbationShape::RandomBumps,
            amplitude: 0.01,
            ..Default::default()
        };
        assert_eq!(p.terms(80.0, 3), p.terms(80.0, 3));
        assert_ne!(p.terms(80.0, 3), p.terms(80.0, 4));
        assert!(p.terms(80.0, 3).iter().all(|b| b.center - b.width > p.support_start(80.0) - 1e-12));
    }

    #[test]
    fn short_run_is_deterministic_and_conserves_mass() {
        let mut c = base(800, 2.0);
        c.perturbation.amplitude = 0.01;
        let sim = Simulation::new(c).unwrap();
        let a = sim.run_quiet().unwrap();
        let b = sim.run_quiet().unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.shift.history, b.shift.history);
        assert!(a.stats.mass_imbalance_rel < 1e-12, "{}", a.stats.mass_imbalance_rel);
        assert!(a.stats.max_step_imbalance_rel < 1e-13);
        assert_eq!(a.stats.t_end, 2.0);
        for r in &a.records {
            assert!((r.boundary_u_trace - (-0.9)).abs() < 1e-15);
            assert!(r.y0 > 0.0 && r.y0 < 1.0);
            assert!(r.functionals().iter().all(|v| *v >= 0.0));
        }
    }
}
