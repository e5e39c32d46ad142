//! Command-line experiments: config resolution, single runs, parameter sweeps
//! and the standalone validator suites. Every mode writes `meta.json` and
//! `report.json` into its output directory; runs add `diag.csv`,
//! `shift.csv`, `profile.csv` and `snapshots/`.

mod config;
mod output;

use std::path::Path;

use serde::Serialize;

pub use config::{parse_config, parse_config_str, ExperimentSpec, Mode, SweepLists};
pub use output::{
    fmt_f64, write_csv, write_json, write_profile_csv, write_shift_csv, BundleObserver, CsvSink, PROFILE_COLUMNS,
    SHIFT_COLUMNS, SNAPSHOT_COLUMNS,
};
pub use crate::solver::choose_beta;

use crate::diagnostics::{entropy_balance_check, jacobian_sweep, loglog_slope, poincare_suite};
use crate::error::Result;
use crate::hugoniot::{solve_hugoniot, EndState, GasParams};
use crate::profile::{fidelity, integrate_profile, verify_tails, FidelityReport, TailReport, Weight, TAIL_R2_MIN};
use crate::solver::{
    tracking_error, BoundaryData, InitReport, PerturbationShape, RunStats, RunSummary, SimConfig, Simulation, SCHEME_ID,
};

/// Relative discrete mass imbalance allowed over a run.
pub const MASS_TOL: f64 = 1e-10;
/// Fraction of `[0, T]` in the leading and trailing `|X'|` windows.
pub const WINDOW_FRACTION: f64 = 0.1;
pub const MIN_ORDER: f64 = 1.8;
pub const SONIC_SLOPE: (f64, f64) = (0.8, 1.2);
pub const JACOBIAN_SLOPE: (f64, f64) = (1.7, 2.3);
/// Largest allowed spread `max/min` of `deviation / delta^2` over a sweep.
pub const JACOBIAN_RATIO_SPREAD: f64 = 2.0;
pub const ODE_RESIDUAL_TOL: f64 = 1e-8;
pub const FIRST_INTEGRAL_TOL: f64 = 1e-10;
pub const EXTREMAL_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    fn prefixed(mut self, label: &str) -> Self {
        self.name = format!("{label}/{}", self.name);
        self
    }
}

/// What `run_experiment` hands back besides the files it wrote.
#[derive(Debug, Clone, Serialize)]
pub struct Outcome {
    pub mode: Mode,
    pub checks: Vec<Check>,
    /// Human-readable result lines, also printed by the CLI.
    pub summary: Vec<String>,
    pub results: serde_json::Value,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    /// 0 when every check passed, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }
}

#[derive(Serialize)]
struct Meta<'a> {
    program: &'static str,
    version: &'static str,
    scheme: &'static str,
    mode: Mode,
    seed: u64,
    parallel_build: bool,
    config: &'a SimConfig,
    sweep: &'a SweepLists,
}

/// Per-run measurements written into `report.json`.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub label: String,
    pub delta: f64,
    pub sigma: f64,
    pub rho_minus: f64,
    pub beta: f64,
    pub cells: usize,
    pub stats: RunStats,
    pub init: InitReport,
    pub tails: TailReport,
    pub fidelity: FidelityReport,
    pub e_initial: f64,
    pub e_final: f64,
    pub sup_initial: f64,
    pub sup_final: f64,
    pub xdot_lead: f64,
    pub xdot_trail: f64,
    pub entropy_max_residual: Option<f64>,
    pub entropy_budget: Option<f64>,
    /// Range of `E / (|phi|^2 + |psi|^2)` over the records inside the small ball.
    pub l2_equivalence: Option<(f64, f64)>,
    /// L2 distance to the unshifted travelling wave at `t_final`.
    pub tracking_error: f64,
}

pub struct RunBundle {
    pub report: RunReport,
    pub checks: Vec<Check>,
    pub summary: RunSummary,
}

/// One simulation with its full artifact set written to `dir`.
pub fn run_bundle(config: SimConfig, dir: &Path, label: &str) -> Result<RunBundle> {
    let sim = Simulation::new(config)?;
    std::fs::create_dir_all(dir).map_err(|e| crate::Error::io(dir, e))?;
    write_profile_csv(&dir.join("profile.csv"), &sim.profile)?;
    let mut obs = BundleObserver::new(dir, sim.grid)?;
    let summary = sim.run(&mut obs)?;
    obs.finish()?;
    write_shift_csv(&dir.join("shift.csv"), &summary.shift)?;
    let (report, checks) = assess(&sim, &summary, label)?;
    Ok(RunBundle { report, checks, summary })
}

/// Invariant checks and headline numbers for a finished run.
pub fn assess(sim: &Simulation, s: &RunSummary, label: &str) -> Result<(RunReport, Vec<Check>)> {
    let conn = &sim.conn;
    let recs = &s.records;
    let first = recs.first().expect("runs record t = 0");
    let last = recs.last().expect("runs record t_final");
    let t = s.stats.t_end;
    let mut checks = Vec::new();

    let m = s.stats.mass_imbalance_rel.max(s.stats.max_step_imbalance_rel);
    checks.push(Check::new("mass_balance", m <= MASS_TOL, format!("relative imbalance {m:.3e} (tol {MASS_TOL:.0e})")));

    let negative = recs.iter().filter(|r| r.functionals().iter().any(|v| !(*v >= 0.0))).count();
    checks.push(Check::new(
        "functionals_nonnegative",
        negative == 0,
        format!("{negative} of {} records with a negative functional", recs.len()),
    ));

    let bad_y = recs.iter().filter(|r| !(r.y0 > 0.0 && r.y0 < 1.0)).count();
    checks.push(Check::new("y0_in_unit_interval", bad_y == 0, format!("{bad_y} records outside (0, 1)")));

    let w = Weight::new(&sim.profile);
    let (amin, amax) = (0..sim.profile.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
        let a = w.at(&sim.profile.node(k)).0;
        (lo.min(a), hi.max(a))
    });
    checks.push(Check::new(
        "weight_sandwich",
        amin >= 1.0 && amax <= w.upper_bound(),
        format!("a in [{amin:.16e}, {amax:.16e}], bound {:.16e}", w.upper_bound()),
    ));

    let (entropy_max_residual, entropy_budget) = if recs.len() >= 2 {
        let eb = entropy_balance_check(recs)?;
        checks.push(Check::new(
            "entropy_balance",
            eb.pass,
            format!("max E(t) - E(0) - int P+ = {:.3e}, budget {:.3e}", eb.max_residual, eb.budget),
        ));
        (Some(eb.max_residual), Some(eb.budget))
    } else {
        (None, None)
    };

    // E against |phi|^2 + |psi|^2 for records in the a priori ball
    let ball = 0.1 * conn.right.rho;
    let ratios: Vec<f64> = recs
        .iter()
        .filter(|r| r.supnorm_phi <= ball && r.supnorm_psi <= ball)
        .filter_map(|r| {
            let n2 = r.l2_phi * r.l2_phi + r.l2_psi * r.l2_psi;
            (n2 > 1e-20).then(|| r.e / n2)
        })
        .collect();
    let l2_equivalence = if ratios.is_empty() {
        None
    } else {
        let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let (c_lo, c_hi) = equivalence_bounds(sim);
        checks.push(Check::new(
            "entropy_l2_equivalence",
            lo >= c_lo && hi <= c_hi,
            format!("E/|U-U~|^2 in [{lo:.4e}, {hi:.4e}], allowed [{c_lo:.4e}, {c_hi:.4e}]"),
        ));
        Some((lo, hi))
    };

    checks.push(Check::new(
        "lipschitz_constant_finite",
        s.stats.lipschitz_c0.is_finite(),
        format!("max |X'| / sup|U-U~| = {:.4e}", s.stats.lipschitz_c0),
    ));

    if sim.config.boundary == BoundaryData::Outflow {
        let um = conn.left.u;
        let dev = recs.iter().fold(0.0_f64, |m, r| m.max((r.boundary_u_trace - um).abs()));
        checks.push(Check::new(
            "boundary_velocity",
            dev <= 1e-12 * um.abs(),
            format!("max |u(0) - u_-| = {dev:.3e}"),
        ));
    }

    let sup = |r: &crate::diagnostics::DiagRecord| r.supnorm_phi.max(r.supnorm_psi);
    let tracking = tracking_error(&s.field, &sim.grid, &sim.profile, conn.sigma * t + sim.beta, sim.config.exec);
    let report = RunReport {
        label: label.to_string(),
        delta: conn.delta,
        sigma: conn.sigma,
        rho_minus: conn.left.rho,
        beta: sim.beta,
        cells: sim.grid.cells,
        stats: s.stats,
        init: s.init,
        tails: sim.tails,
        fidelity: sim.fidelity,
        e_initial: first.e,
        e_final: last.e,
        sup_initial: sup(first),
        sup_final: sup(last),
        xdot_lead: s.shift.mean_abs_rate(0.0, WINDOW_FRACTION * t),
        xdot_trail: s.shift.mean_abs_rate((1.0 - WINDOW_FRACTION) * t, t),
        entropy_max_residual,
        entropy_budget,
        l2_equivalence,
        tracking_error: tracking,
    };
    let checks = if label.is_empty() { checks } else { checks.into_iter().map(|c| c.prefixed(label)).collect() };
    Ok((report, checks))
}

/// Bounds for `E / (|phi|^2 + |psi|^2)`: the quadratic part of `a eta` has
/// coefficients `a rho / 2` and `a p'(rho) / (2 rho)`; the ball allows a
/// factor 2 either way for the cubic remainder and the state spread.
fn equivalence_bounds(sim: &Simulation) -> (f64, f64) {
    let gas = sim.conn.gas;
    let w = Weight::new(&sim.profile);
    let coefs = |r: f64| [r / 2.0, gas.dpressure(r) / (2.0 * r)];
    let (mut lo, mut hi) = (f64::INFINITY, 0.0_f64);
    for r in [sim.conn.right.rho, sim.conn.left.rho] {
        for c in coefs(r) {
            lo = lo.min(c);
            hi = hi.max(c);
        }
    }
    (0.5 * lo, 2.0 * w.upper_bound() * hi)
}

/// Runs the mode described by `spec`, writing its bundle under `spec.out_dir`.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Outcome> {
    let out = &spec.out_dir;
    std::fs::create_dir_all(out).map_err(|e| crate::Error::io(out, e))?;
    write_json(
        &out.join("meta.json"),
        &Meta {
            program: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            scheme: SCHEME_ID,
            mode: spec.mode,
            seed: spec.seed,
            parallel_build: crate::Exec::parallel_available(),
            config: &spec.base,
            sweep: &spec.sweep,
        },
    )?;
    let outcome = match spec.mode {
        Mode::Run => mode_run(spec)?,
        Mode::SweepDelta => mode_sweep_delta(spec)?,
        Mode::SweepBeta => mode_sweep_beta(spec)?,
        Mode::ValidateProfile => mode_validate_profile(spec)?,
        Mode::ValidatePoincare => mode_validate_poincare(spec)?,
        Mode::ValidateJacobian => mode_validate_jacobian(spec)?,
        Mode::ConvergenceStudy => mode_convergence(spec)?,
    };
    write_json(&out.join("report.json"), &outcome)?;
    Ok(outcome)
}

fn run_line(r: &RunReport) -> String {
    format!(
        "delta={:.4} beta={:.4} N={} steps={} E {:.4e} -> {:.4e}, sup {:.4e} -> {:.4e}, |X'| lead {:.3e} trail {:.3e}, X={:.6e}",
        r.delta,
        r.beta,
        r.cells,
        r.stats.steps,
        r.e_initial,
        r.e_final,
        r.sup_initial,
        r.sup_final,
        r.xdot_lead,
        r.xdot_trail,
        r.stats.x_final
    )
}

fn mode_run(spec: &ExperimentSpec) -> Result<Outcome> {
    let b = run_bundle(spec.base.clone(), &spec.out_dir, "")?;
    Ok(Outcome {
        mode: spec.mode,
        checks: b.checks,
        summary: vec![run_line(&b.report)],
        results: serde_json::to_value(&b.report)?,
    })
}

/// Runs sweep members as independent jobs; the first error wins.
fn run_members(spec: &ExperimentSpec, members: Vec<(String, SimConfig)>) -> Result<Vec<RunBundle>> {
    let out = spec.out_dir.clone();
    let jobs = spec.base.exec.map_jobs(members, |(label, cfg)| run_bundle(cfg, &out.join(&label), &label));
    jobs.into_iter().collect()
}

fn collect(spec: &ExperimentSpec, bundles: &[RunBundle], mut extra: Vec<Check>, mut summary: Vec<String>) -> Result<Outcome> {
    let mut checks: Vec<Check> = bundles.iter().flat_map(|b| b.checks.clone()).collect();
    checks.append(&mut extra);
    let reports: Vec<&RunReport> = bundles.iter().map(|b| &b.report).collect();
    let mut lines: Vec<String> = reports.iter().map(|r| run_line(r)).collect();
    lines.append(&mut summary);
    Ok(Outcome {
        mode: spec.mode,
        checks,
        summary: lines,
        results: serde_json::to_value(reports)?,
    })
}

fn mode_sweep_delta(spec: &ExperimentSpec) -> Result<Outcome> {
    let members = spec
        .sweep
        .delta
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let mut c = spec.base.clone();
            c.u_minus = c.u_plus + d;
            (format!("delta_{i:02}"), c)
        })
        .collect();
    let bundles = run_members(spec, members)?;
    let mut extra = Vec::new();
    if spec.base.beta.is_none() {
        let mut pairs: Vec<(f64, f64)> = bundles.iter().map(|b| (b.report.delta, b.report.beta)).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let ok = pairs.windows(2).all(|w| w[1].1 <= w[0].1);
        extra.push(Check::new("beta_nonincreasing_in_delta", ok, format!("(delta, beta) = {pairs:?}")));
    }
    collect(spec, &bundles, extra, Vec::new())
}

fn mode_sweep_beta(spec: &ExperimentSpec) -> Result<Outcome> {
    let members = spec
        .sweep
        .beta
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let mut c = spec.base.clone();
            c.beta = Some(b);
            (format!("beta_{i:02}"), c)
        })
        .collect();
    let bundles = run_members(spec, members)?;
    let mut rows: Vec<&RunReport> = bundles.iter().map(|b| &b.report).collect();
    rows.sort_by(|a, b| a.beta.total_cmp(&b.beta));
    let signed: Vec<f64> = rows.iter().map(|r| r.stats.production_integral).collect();
    let ok = signed.windows(2).all(|w| w[1] < w[0]);
    let detail = rows
        .iter()
        .map(|r| format!("beta={}: {:.4e}", r.beta, r.stats.production_integral))
        .collect::<Vec<_>>()
        .join(", ");
    let extra = vec![Check::new("production_decreasing_in_beta", ok, detail)];
    let summary = rows
        .iter()
        .map(|r| {
            format!(
                "beta={}: int P = {:.6e}, int P+ = {:.6e}, max_t int_0^t P = {:.6e}",
                r.beta, r.stats.production_integral, r.stats.production_plus_integral, r.stats.production_running_max
            )
        })
        .collect();
    collect(spec, &bundles, extra, summary)
}

#[derive(Debug, Clone, Serialize)]
struct ProfileRow {
    delta: f64,
    sigma: f64,
    rho_minus: f64,
    nodes: usize,
    fidelity: FidelityReport,
    tails: Option<TailReport>,
    tail_error: Option<String>,
    weight_min: f64,
    weight_max: f64,
}

fn mode_validate_profile(spec: &ExperimentSpec) -> Result<Outcome> {
    let base = &spec.base;
    let gas = GasParams::new(base.gamma)?;
    let right = EndState::new(base.rho_plus, base.u_plus)?;
    let opts = base.profile;
    let rows: Vec<Result<ProfileRow>> = base.exec.map_jobs(spec.sweep.delta.iter().copied().enumerate().collect(), |(i, d)| {
        let conn = solve_hugoniot(right, right.u + d, &gas)?;
        let prof = integrate_profile(&conn, &opts)?;
        write_profile_csv(&spec.out_dir.join(format!("profile_{i:02}.csv")), &prof)?;
        let w = Weight::new(&prof);
        let (lo, hi) = (0..prof.len()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), k| {
            let a = w.at(&prof.node(k)).0;
            (lo.min(a), hi.max(a))
        });
        let tails = verify_tails(&prof);
        Ok(ProfileRow {
            delta: d,
            sigma: conn.sigma,
            rho_minus: conn.left.rho,
            nodes: prof.len(),
            fidelity: fidelity(&prof),
            tail_error: tails.as_ref().err().map(|e| e.to_string()),
            tails: tails.ok(),
            weight_min: lo,
            weight_max: hi,
        })
    });
    let rows = rows.into_iter().collect::<Result<Vec<_>>>()?;
    let mut checks = Vec::new();
    let mut summary = Vec::new();
    for r in &rows {
        let f = &r.fidelity;
        let tag = format!("delta={}", r.delta);
        checks.push(Check::new(
            format!("{tag}/ode_residual"),
            f.ode_residual <= ODE_RESIDUAL_TOL,
            format!("{:.3e}", f.ode_residual),
        ));
        checks.push(Check::new(
            format!("{tag}/first_integral"),
            f.first_integral_drift <= FIRST_INTEGRAL_TOL,
            format!("{:.3e}", f.first_integral_drift),
        ));
        checks.push(Check::new(format!("{tag}/monotone"), f.monotone, ""));
        checks.push(Check::new(format!("{tag}/subsonic_gap"), f.subsonic_gap_positive, ""));
        let tails_ok = r
            .tails
            .map(|t| t.rate_left > 0.0 && t.rate_right > 0.0 && t.r2_left >= TAIL_R2_MIN && t.r2_right >= TAIL_R2_MIN)
            .unwrap_or(false);
        let detail = match (&r.tails, &r.tail_error) {
            (Some(t), _) => format!("rates ({:.4e}, {:.4e}), R2 ({:.6}, {:.6})", t.rate_left, t.rate_right, t.r2_left, t.r2_right),
            (None, Some(e)) => e.clone(),
            _ => String::new(),
        };
        checks.push(Check::new(format!("{tag}/tails"), tails_ok, detail));
        let bound = 1.0 + r.delta.sqrt();
        checks.push(Check::new(
            format!("{tag}/weight_sandwich"),
            r.weight_min >= 1.0 && r.weight_max <= bound,
            format!("[{:.16e}, {:.16e}]", r.weight_min, r.weight_max),
        ));
        summary.push(format!(
            "delta={}: sigma={:.16e} rho_-={:.16e} ode {:.2e} drift {:.2e} sonic {:.4e}",
            r.delta, r.sigma, r.rho_minus, f.ode_residual, f.first_integral_drift, f.sonic_deviation
        ));
    }
    let ds: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let sonic: Vec<f64> = rows.iter().map(|r| r.fidelity.sonic_deviation).collect();
    let slope = loglog_slope(&ds, &sonic);
    checks.push(Check::new(
        "sonic_deviation_slope",
        slope >= SONIC_SLOPE.0 && slope <= SONIC_SLOPE.1,
        format!("{slope:.4}"),
    ));
    summary.push(format!("sonic deviation log-log slope {slope:.4}"));
    Ok(Outcome {
        mode: spec.mode,
        checks,
        summary,
        results: serde_json::json!({ "profiles": rows, "sonic_slope": slope }),
    })
}

fn mode_validate_poincare(spec: &ExperimentSpec) -> Result<Outcome> {
    let s = poincare_suite(spec.sweep.trials, spec.sweep.samples, spec.seed)?;
    let checks = vec![
        Check::new(
            "no_violations",
            s.violations == 0,
            format!("{} of {} trials, max lhs/rhs {:.12}", s.violations, s.trials, s.max_ratio),
        ),
        Check::new(
            "extremal_ratio",
            (s.extremal_ratio - 1.0).abs() <= EXTREMAL_TOL,
            format!("{:.12}", s.extremal_ratio),
        ),
    ];
    let summary = vec![format!(
        "{} trials, {} violations, max ratio {:.12}, extremal ratio {:.12}",
        s.trials, s.violations, s.max_ratio, s.extremal_ratio
    )];
    Ok(Outcome {
        mode: spec.mode,
        checks,
        summary,
        results: serde_json::to_value(&s)?,
    })
}

fn mode_validate_jacobian(spec: &ExperimentSpec) -> Result<Outcome> {
    let base = &spec.base;
    let gas = GasParams::new(base.gamma)?;
    let right = EndState::new(base.rho_plus, base.u_plus)?;
    let sw = jacobian_sweep(&gas, right, &spec.sweep.delta, &base.profile, base.exec)?;
    let lo = sw.ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = sw.ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let checks = vec![
        Check::new(
            "deviation_slope",
            sw.slope >= JACOBIAN_SLOPE.0 && sw.slope <= JACOBIAN_SLOPE.1,
            format!("{:.4}", sw.slope),
        ),
        Check::new(
            "ratio_stable",
            lo > 0.0 && hi / lo <= JACOBIAN_RATIO_SPREAD,
            format!("deviation/delta^2 in [{lo:.4e}, {hi:.4e}]"),
        ),
    ];
    let mut summary: Vec<String> = sw
        .deltas
        .iter()
        .zip(&sw.max_deviation)
        .map(|(d, v)| format!("delta={d}: max deviation {v:.6e}"))
        .collect();
    summary.push(format!("log-log slope {:.4}", sw.slope));
    Ok(Outcome {
        mode: spec.mode,
        checks,
        summary,
        results: serde_json::to_value(&sw)?,
    })
}

fn mode_convergence(spec: &ExperimentSpec) -> Result<Outcome> {
    let members = spec
        .sweep
        .cells
        .iter()
        .map(|&n| {
            let mut c = spec.base.clone();
            c.cells = n;
            c.perturbation.shape = PerturbationShape::None;
            c.perturbation.amplitude = 0.0;
            c.boundary = BoundaryData::ExactProfile;
            (format!("N_{n}"), c)
        })
        .collect();
    let bundles = run_members(spec, members)?;
    let mut rows: Vec<(f64, f64, usize)> = bundles
        .iter()
        .map(|b| (b.summary.field.len() as f64, b.report.tracking_error, b.report.stats.steps))
        .collect();
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    let hs: Vec<f64> = rows.iter().map(|r| spec.base.length / r.0).collect();
    let errs: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let order = loglog_slope(&hs, &errs);
    let mut summary = vec!["N, h, steps, L2 error, observed order".to_string()];
    for (k, r) in rows.iter().enumerate() {
        let local = if k == 0 { String::from("-") } else { format!("{:.4}", (errs[k - 1] / errs[k]).log2() / (hs[k - 1] / hs[k]).log2()) };
        summary.push(format!("{}, {:.6e}, {}, {:.6e}, {local}", r.0, hs[k], r.2, r.1));
    }
    summary.push(format!("fitted order {order:.4}"));
    let extra = vec![Check::new("observed_order", order >= MIN_ORDER, format!("{order:.4} (min {MIN_ORDER})"))];
    let mut out = collect(spec, &bundles, extra, Vec::new())?;
    out.summary = summary;
    out.results = serde_json::json!({ "order": order, "runs": out.results });
    Ok(out)
}
