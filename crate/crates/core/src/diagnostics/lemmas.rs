//! Standalone checks: the profile Jacobian estimate in the `y` coordinate and
//! the weighted Poincaré inequality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::hugoniot::{solve_hugoniot, EndState, GasParams};
use crate::profile::{integrate_profile, ProfileOptions, ShockProfile};

/// Least-squares slope of `ln y` against `ln x`.
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    sxy / sxx
}

/// `max |u~' delta / ((u_- - u~)(u~ - u_+)) + (gamma + 1) rho_+ delta / 2|`
/// over the interior table nodes, i.e. the deviation of
/// `(1 / (y (1 - y))) dy/dx` from `(gamma + 1) rho_+ delta / 2`.
pub fn jacobian_lemma_check(profile: &ShockProfile) -> f64 {
    let conn = profile.conn;
    let delta = conn.delta;
    let target = (conn.gas.gamma + 1.0) * conn.right.rho * delta / 2.0;
    let n = profile.len();
    (1..n - 1)
        .map(|k| {
            let v = conn.left.u - profile.u[k];
            let w = profile.u[k] - conn.right.u;
            let jac = -profile.du[k] * delta / (v * w);
            (jac - target).abs()
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianSweep {
    pub gamma: f64,
    pub rho_plus: f64,
    pub u_plus: f64,
    pub deltas: Vec<f64>,
    pub max_deviation: Vec<f64>,
    /// `max_deviation / delta^2`.
    pub ratios: Vec<f64>,
    pub slope: f64,
}

/// Runs [`jacobian_lemma_check`] over shock strengths `u_- = u_+ + delta`.
pub fn jacobian_sweep(gas: &GasParams, right: EndState, deltas: &[f64], opts: &ProfileOptions, exec: Exec) -> Result<JacobianSweep> {
    if deltas.len() < 2 {
        return Err(Error::config("sweep.delta", "need at least two strengths for a slope"));
    }
    let devs: Vec<Result<f64>> = exec.map_jobs(deltas.to_vec(), |d| {
        let conn = solve_hugoniot(right, right.u + d, gas)?;
        let prof = integrate_profile(&conn, opts)?;
        Ok(jacobian_lemma_check(&prof))
    });
    let devs = devs.into_iter().collect::<Result<Vec<_>>>()?;
    let ratios = deltas.iter().zip(&devs).map(|(d, v)| v / (d * d)).collect();
    Ok(JacobianSweep {
        gamma: gas.gamma,
        rho_plus: right.rho,
        u_plus: right.u,
        deltas: deltas.to_vec(),
        slope: loglog_slope(deltas, &devs),
        max_deviation: devs,
        ratios,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoincareResult {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relative tolerance of the inequality checks.
pub const TOL_Q: f64 = 1e-9;

fn simpson(values: impl Iterator<Item = f64>, n: usize, h: f64) -> f64 {
    let mut acc = 0.0;
    for (k, v) in values.enumerate() {
        let w = if k == 0 || k + 1 == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        acc += w * v;
    }
    acc * h / 3.0
}

/// Checks `int |f - mean f|^2 <= 1/2 int (y - a)(b - y) |f'|^2` on `[a, b]`
/// from `n` equispaced samples (`n` odd, composite Simpson). Without `df`
/// the derivative is taken by second-order differences.
pub fn poincare_check(a: f64, b: f64, f: &[f64], df: Option<&[f64]>) -> Result<PoincareResult> {
    let n = f.len();
    if n < 5 || n.is_multiple_of(2) {
        return Err(Error::Domain(format!("need an odd number of samples >= 5, got {n}")));
    }
    if !(b > a) {
        return Err(Error::Domain(format!("empty interval [{a}, {b}]")));
    }
    if let Some(d) = df {
        if d.len() != n {
            return Err(Error::Domain("derivative samples do not match".into()));
        }
    }
    let h = (b - a) / (n - 1) as f64;
    let owned;
    let d = match df {
        Some(d) => d,
        None => {
            owned = (0..n)
                .map(|i| {
                    if i == 0 {
                        (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
                    } else if i + 1 == n {
                        (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h)
                    } else {
                        (f[i + 1] - f[i - 1]) / (2.0 * h)
                    }
                })
                .collect::<Vec<_>>();
            &owned
        }
    };
    // subtracting f[0] first keeps constants exactly zero
    let g: Vec<f64> = f.iter().map(|v| v - f[0]).collect();
    let mean = simpson(g.iter().copied(), n, h) / (b - a);
    let lhs = simpson(g.iter().map(|v| (v - mean) * (v - mean)), n, h);
    let rhs = 0.5
        * simpson(
            d.iter().enumerate().map(|(i, dv)| {
                let y = a + i as f64 * h;
                (y - a) * (b - y) * dv * dv
            }),
            n,
            h,
        );
    Ok(PoincareResult {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + TOL_Q),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoincareSuite {
    pub trials: usize,
    pub samples: usize,
    pub seed: u64,
    pub violations: usize,
    pub max_ratio: f64,
    /// `lhs / rhs` for `f(y) = y` on `[0, 1]`.
    pub extremal_ratio: f64,
    pub extremal_lhs: f64,
    pub extremal_rhs: f64,
}

/// Random smooth test function on `s in [0, 1]`: value and derivative.
enum TestFn {
    Poly(Vec<f64>),
    Trig(Vec<(f64, f64, f64)>),
}

impl TestFn {
    fn random(rng: &mut ChaCha8Rng) -> Self {
        if rng.gen_bool(0.5) {
            let deg = rng.gen_range(1..=6);
            TestFn::Poly((0..=deg).map(|_| rng.gen_range(-1.0..1.0)).collect())
        } else {
            let terms = rng.gen_range(1..=5);
            TestFn::Trig(
                (0..terms)
                    .map(|_| {
                        let k = rng.gen_range(1..=5) as f64 * std::f64::consts::PI;
                        (rng.gen_range(-1.0..1.0), k, rng.gen_range(0.0..std::f64::consts::TAU))
                    })
                    .collect(),
            )
        }
    }

    fn eval(&self, s: f64) -> (f64, f64) {
        match self {
            TestFn::Poly(c) => {
                let (mut v, mut d) = (0.0, 0.0);
                for &ck in c.iter().rev() {
                    d = d * s + v;
                    v = v * s + ck;
                }
                (v, d)
            }
            TestFn::Trig(terms) => terms.iter().fold((0.0, 0.0), |(v, d), &(amp, k, ph)| {
                (v + amp * (k * s + ph).sin(), d + amp * k * (k * s + ph).cos())
            }),
        }
    }
}

/// Runs the inequality on `trials` random polynomials and trigonometric sums
/// over random intervals, plus the extremal case `f(y) = y` on `[0, 1]`.
pub fn poincare_suite(trials: usize, samples: usize, seed: u64) -> Result<PoincareSuite> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut max_ratio = 0.0_f64;
    for _ in 0..trials {
        let a = rng.gen_range(-5.0..5.0);
        let b = a + rng.gen_range(0.1..10.0);
        let tf = TestFn::random(&mut rng);
        let (f, df): (Vec<f64>, Vec<f64>) = (0..samples)
            .map(|i| {
                let s = i as f64 / (samples - 1) as f64;
                let (v, d) = tf.eval(s);
                (v, d / (b - a))
            })
            .unzip();
        let r = poincare_check(a, b, &f, Some(&df))?;
        if !r.holds {
            violations += 1;
        }
        if r.rhs > 0.0 {
            max_ratio = max_ratio.max(r.lhs / r.rhs);
        }
    }
    let (f, df): (Vec<f64>, Vec<f64>) = (0..samples).map(|i| (i as f64 / (samples - 1) as f64, 1.0)).unzip();
    let ext = poincare_check(0.0, 1.0, &f, Some(&df))?;
    Ok(PoincareSuite {
        trials,
        samples,
        seed,
        violations,
        max_ratio,
        extremal_ratio: ext.lhs / ext.rhs,
        extremal_lhs: ext.lhs,
        extremal_rhs: ext.rhs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_and_extremal() {
        let f = vec![2.5; 101];
        let r = poincare_check(0.0, 1.0, &f, None).unwrap();
        assert_eq!((r.lhs, r.rhs, r.holds), (0.0, 0.0, true));
        let n = 2001;
        let f: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let r = poincare_check(0.0, 1.0, &f, None).unwrap();
        assert!((r.lhs - 1.0 / 12.0).abs() < 1e-14);
        assert!((r.rhs - 1.0 / 12.0).abs() < 1e-14);
        assert!((r.lhs / r.rhs - 1.0).abs() < 1e-12);
        assert!(r.holds);
    }

    #[test]
    fn sample_validation() {
        assert!(poincare_check(0.0, 1.0, &[1.0; 4], None).is_err());
        assert!(poincare_check(1.0, 1.0, &[1.0; 5], None).is_err());
    }

    #[test]
    fn quadratic_is_strict() {
        let n = 1001;
        let f: Vec<f64> = (0..n).map(|i| (i as f64 / (n - 1) as f64).powi(2)).collect();
        let r = poincare_check(0.0, 1.0, &f, None).unwrap();
        // lhs = 4/45, rhs = 1/2 int 4 y^3 (1-y) = 1/10
        assert!((r.lhs - 4.0 / 45.0).abs() < 1e-12);
        assert!((r.rhs - 0.1).abs() < 1e-9);
    }

    #[test]
    fn suite_is_deterministic_and_clean() {
        let a = poincare_suite(200, 401, 7).unwrap();
        let b = poincare_suite(200, 401, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.violations, 0);
        assert!(a.max_ratio <= 1.0 + TOL_Q);
    }

    #[test]
    fn loglog_slope_recovers_power() {
        let xs = [0.2, 0.1, 0.05];
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x * x).collect();
        assert!((loglog_slope(&xs, &ys) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn jacobian_deviation_shrinks_with_strength() {
        let gas = GasParams::new(2.0).unwrap();
        let right = EndState { rho: 1.0, u: -1.0 };
        let s = jacobian_sweep(&gas, right, &[0.1, 0.05], &ProfileOptions::default(), Exec::Sequential).unwrap();
        assert!(s.max_deviation[1] < s.max_deviation[0]);
        assert!(s.slope > 1.7 && s.slope < 2.3, "{}", s.slope);
    }
}
