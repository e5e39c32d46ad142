//! Resolution of a TOML config file plus `--set` overrides into an
//! [`ExperimentSpec`].

use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::hugoniot::{solve_hugoniot, EndState, GasParams};
use crate::solver::{SimConfig, Simulation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Run,
    SweepDelta,
    SweepBeta,
    ValidateProfile,
    ValidatePoincare,
    ValidateJacobian,
    ConvergenceStudy,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::SweepDelta => "sweep-delta",
            Mode::SweepBeta => "sweep-beta",
            Mode::ValidateProfile => "validate-profile",
            Mode::ValidatePoincare => "validate-poincare",
            Mode::ValidateJacobian => "validate-jacobian",
            Mode::ConvergenceStudy => "convergence-study",
        }
    }
}

/// The `[sweep]` section. Only the lists used by the selected mode matter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepLists {
    /// Shock strengths `u_- - u_+` for sweep-delta, validate-profile and
    /// validate-jacobian.
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
    /// Cell counts for convergence-study.
    #[serde(rename = "N")]
    pub cells: Vec<usize>,
    /// Random test functions for validate-poincare.
    pub trials: usize,
    pub samples: usize,
}

impl Default for SweepLists {
    fn default() -> Self {
        Self {
            delta: vec![0.2, 0.1, 0.05, 0.025],
            beta: vec![40.0, 80.0, 160.0],
            cells: vec![3000, 6000, 12000],
            trials: 1000,
            samples: 2001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentSpec {
    pub mode: Mode,
    pub base: SimConfig,
    pub sweep: SweepLists,
    pub out_dir: PathBuf,
    pub seed: u64,
}

impl ExperimentSpec {
    /// Spec from an in-memory config, with the same checks as [`parse_config`].
    pub fn new(mode: Mode, base: SimConfig, sweep: SweepLists, out_dir: impl Into<PathBuf>) -> Result<Self> {
        let spec = Self {
            mode,
            seed: base.seed,
            base,
            sweep,
            out_dir: out_dir.into(),
        };
        spec.validate()?;
        Ok(spec)
    }

    fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        let positive = |v: &[f64]| v.iter().all(|x| *x > 0.0 && x.is_finite());
        match self.mode {
            Mode::SweepDelta | Mode::ValidateProfile | Mode::ValidateJacobian => {
                let need = if self.mode == Mode::SweepDelta { 1 } else { 2 };
                if s.delta.len() < need || !positive(&s.delta) {
                    return Err(Error::config("sweep.delta", format!("need at least {need} positive strengths")));
                }
            }
            Mode::SweepBeta => {
                if s.beta.is_empty() || !positive(&s.beta) {
                    return Err(Error::config("sweep.beta", "need at least one positive beta"));
                }
            }
            Mode::ConvergenceStudy => {
                if s.cells.len() < 2 {
                    return Err(Error::config("sweep.N", "need at least two grids"));
                }
            }
            Mode::ValidatePoincare => {
                if s.trials == 0 {
                    return Err(Error::config("sweep.trials", "must be positive"));
                }
                if s.samples < 5 || s.samples.is_multiple_of(2) {
                    return Err(Error::config("sweep.samples", "must be odd and at least 5"));
                }
            }
            Mode::Run => {}
        }
        match self.mode {
            Mode::Run => {
                Simulation::new(self.base.clone())?;
            }
            Mode::SweepBeta => {
                for &b in &s.beta {
                    let mut c = self.base.clone();
                    c.beta = Some(b);
                    Simulation::new(c)?;
                }
            }
            Mode::ConvergenceStudy => {
                for &n in &s.cells {
                    let mut c = self.base.clone();
                    c.cells = n;
                    Simulation::new(c)?;
                }
            }
            Mode::SweepDelta | Mode::ValidateProfile | Mode::ValidateJacobian => {
                let gas = GasParams::new(self.base.gamma).map_err(|e| Error::config("gamma", e.to_string()))?;
                let right = EndState::new(self.base.rho_plus, self.base.u_plus).map_err(|e| Error::config("rho_plus", e.to_string()))?;
                for &d in &s.delta {
                    solve_hugoniot(right, right.u + d, &gas).map_err(|e| Error::config("sweep.delta", e.to_string()))?;
                }
            }
            Mode::ValidatePoincare => {}
        }
        std::fs::create_dir_all(&self.out_dir)
            .map_err(|e| Error::config("--out", format!("cannot create {}: {e}", self.out_dir.display())))?;
        let probe = self.out_dir.join(".write-probe");
        std::fs::write(&probe, b"")
            .and_then(|_| std::fs::remove_file(&probe))
            .map_err(|e| Error::config("--out", format!("{} is not writable: {e}", self.out_dir.display())))?;
        Ok(())
    }
}

/// Reads `path`, applies `key=value` overrides (flags win), and resolves the
/// result. Values are parsed as TOML, falling back to a bare string, so
/// `--set perturbation.shape=bump` and `--set N=6000` both work.
pub fn parse_config(mode: Mode, path: &Path, overrides: &[String], out_dir: &Path) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::config("--config", format!("cannot read {}: {e}", path.display())))?;
    parse_config_str(mode, &text, overrides, out_dir)
}

pub fn parse_config_str(mode: Mode, text: &str, overrides: &[String], out_dir: &Path) -> Result<ExperimentSpec> {
    let mut table: Table = text
        .parse()
        .map_err(|e: toml::de::Error| Error::config("--config", e.to_string().trim_end()))?;
    for o in overrides {
        let (key, raw) = o
            .split_once('=')
            .ok_or_else(|| Error::config("--set", format!("expected key=value, got `{o}`")))?;
        set_path(&mut table, key.trim(), parse_value(raw.trim()))?;
    }
    let sweep = match table.remove("sweep") {
        Some(v) => from_value::<SweepLists>(v, "sweep.")?,
        None => SweepLists::default(),
    };
    let base = from_value::<SimConfig>(Value::Table(table), "")?;
    ExperimentSpec::new(mode, base, sweep, out_dir)
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(table: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(Error::config("--set", format!("malformed key `{key}`")));
    }
    let mut cur = table;
    for (k, part) in parts.iter().enumerate() {
        if k + 1 == parts.len() {
            cur.insert(part.to_string(), value);
            return Ok(());
        }
        let entry = cur.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => {
                return Err(Error::config(parts[..=k].join("."), "is a value, not a section"));
            }
        };
    }
    Ok(())
}

fn from_value<T: DeserializeOwned>(value: Value, prefix: &str) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let key = if path == "." { prefix.trim_end_matches('.').to_string() } else { format!("{prefix}{path}") };
        let key = if key.is_empty() { "<root>".to_string() } else { key };
        Error::config(key, e.into_inner().to_string().trim_end())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "gamma = 2\nrho_plus = 1\nu_plus = -1\nu_minus = -0.9\nbeta = 80\nL = 600\nN = 12000\nt_final = 200\n";

    fn out() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn minimal_config_resolves() {
        let d = out();
        let s = parse_config_str(Mode::Run, MINIMAL, &[], d.path()).unwrap();
        assert_eq!(s.base.beta, Some(80.0));
        assert_eq!(s.base.cells, 12000);
        assert_eq!(s.base.length, 600.0);
        assert_eq!(s.base.gamma, 2.0);
        assert_eq!(s.sweep, SweepLists::default());
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn overrides_win_over_file() {
        let d = out();
        let sets = ["N=3000".to_string(), "perturbation.amplitude=0.01".into(), "boundary=exact-profile".into(), "seed=7".into()];
        let s = parse_config_str(Mode::Run, MINIMAL, &sets, d.path()).unwrap();
        assert_eq!(s.base.cells, 3000);
        assert_eq!(s.base.perturbation.amplitude, 0.01);
        assert_eq!(s.base.boundary, crate::solver::BoundaryData::ExactProfile);
        assert_eq!(s.seed, 7);
        let s = parse_config_str(Mode::SweepBeta, MINIMAL, &["sweep.beta=[40, 80]".into()], d.path()).unwrap();
        assert_eq!(s.sweep.beta, vec![40.0, 80.0]);
    }

    #[test]
    fn inadmissible_strength_is_rejected() {
        let d = out();
        let e = parse_config_str(Mode::Run, MINIMAL, &["u_minus=-1.1".into()], d.path()).unwrap_err();
        match e {
            Error::Config { key, message } => {
                assert_eq!(key, "u_minus");
                assert!(message.contains("u_+ < u_-") || message.contains("u+ < u-") || message.contains("requires"), "{message}");
            }
            other => panic!("{other}"),
        }
    }

    #[test]
    fn missing_beta_defaults() {
        let d = out();
        let text = MINIMAL.replace("beta = 80\n", "");
        let s = parse_config_str(Mode::Run, &text, &["N=3000".into()], d.path()).unwrap();
        assert_eq!(s.base.beta, None);
        let sim = Simulation::new(s.base).unwrap();
        assert!(sim.beta > 50.0 && sim.beta < 200.0, "{}", sim.beta);
    }

    #[test]
    fn errors_carry_key_paths() {
        let d = out();
        let key_of = |e: Error| match e {
            Error::Config { key, .. } => key,
            other => panic!("{other}"),
        };
        let e = parse_config_str(Mode::Run, &format!("{MINIMAL}bogus = 1\n"), &[], d.path()).unwrap_err();
        assert!(e.to_string().contains("bogus"), "{e}");
        let e = parse_config_str(Mode::Run, &format!("{MINIMAL}[perturbation]\nwidth = \"wide\"\n"), &[], d.path()).unwrap_err();
        assert_eq!(key_of(e), "perturbation.width");
        let e = parse_config_str(Mode::SweepBeta, &format!("{MINIMAL}[sweep]\nbeta = []\n"), &[], d.path()).unwrap_err();
        assert_eq!(key_of(e), "sweep.beta");
        let e = parse_config_str(Mode::Run, MINIMAL, &["N".into()], d.path()).unwrap_err();
        assert_eq!(key_of(e), "--set");
        let e = parse_config_str(Mode::Run, MINIMAL, &["N=abc".into()], d.path()).unwrap_err();
        assert_eq!(key_of(e), "N");
        let e = parse_config_str(Mode::Run, "gamma = 2\n", &[], d.path()).unwrap_err();
        assert!(e.to_string().contains("rho_plus"), "{e}");
        let e = parse_config_str(Mode::Run, MINIMAL, &["L=100".into()], d.path()).unwrap_err();
        assert_eq!(key_of(e), "L");
    }
}
