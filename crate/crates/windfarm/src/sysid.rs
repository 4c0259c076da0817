//! Identification of the power-to-thrust dynamics: open-loop step
//! experiment, first-order transfer-function fit with a normalized-RMS fit
//! percentage, forward-Euler discretization, and assembly of the diagonal
//! farm model matrices.

use std::path::Path;
use std::sync::Arc;

use nalgebra::DMatrix;
use serde::Deserialize;

use crate::aero::AeroTables;
use crate::error::{Error, Result};
use crate::turbine::{available_power, Turbine, TurbineParams};

/// Step-experiment settings.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdentifyConfig {
    /// Rotor-effective inflow during the experiment [m/s].
    pub inflow: f64,
    /// Baseline power demand [W].
    pub baseline_power: f64,
    /// Step size [W].
    pub step_size: f64,
    /// Settling time at the baseline before recording [s].
    pub settle_time: f64,
    /// Recorded window before the step [s].
    pub record_pre: f64,
    /// Recorded window after the step [s].
    pub record_post: f64,
    pub ts: f64,
}

impl Default for IdentifyConfig {
    fn default() -> Self {
        IdentifyConfig {
            inflow: 12.0,
            baseline_power: 2.5e6,
            step_size: 1.0e6,
            settle_time: 300.0,
            record_pre: 10.0,
            // covers the full thrust transient (settled well before 60 s)
            // without drowning the fit metric in steady samples
            record_post: 60.0,
            ts: 0.1,
        }
    }
}

/// Recorded open-loop step experiment.
#[derive(Debug, Clone)]
pub struct StepExperiment {
    pub time: Vec<f64>,
    pub p_dem: Vec<f64>,
    pub f_t: Vec<f64>,
    pub baseline_power: f64,
    pub step_size: f64,
    pub inflow: f64,
    pub ts: f64,
    /// Index of the first sample with the stepped demand.
    pub step_index: usize,
}

/// Identified first-order thrust model K1/(T1 s + 1) and its forward-Euler
/// discretization a = 1 − T_s/T1, b = T_s K1/T1.
#[derive(Debug, Clone, Copy)]
pub struct LinearThrustModel {
    pub k1: f64,
    pub t1: f64,
    pub ts: f64,
    pub a: f64,
    pub b: f64,
    pub fit_percent: f64,
}

/// Run the open-loop experiment on a single turbine with both farm loops
/// disabled: settle at the baseline demand, apply the step, record demand
/// and thrust at T_s.
pub fn run_step_experiment(
    params: &TurbineParams,
    tables: Arc<AeroTables>,
    cfg: &IdentifyConfig,
) -> Result<StepExperiment> {
    if cfg.step_size == 0.0 {
        return Err(Error::Identification(
            "step size is zero; the output carries no information".into(),
        ));
    }
    if cfg.ts <= 0.0 || cfg.settle_time < 0.0 || cfg.record_pre < 0.0 || cfg.record_post <= 0.0 {
        return Err(Error::Config("invalid identification timing".into()));
    }
    let p_final = cfg.baseline_power.max(cfg.baseline_power + cfg.step_size);
    let avail = available_power(cfg.inflow, params, &tables);
    if p_final >= avail {
        return Err(Error::Identification(format!(
            "demand {:.0} W exceeds available power {:.0} W; the turbine would saturate",
            p_final, avail
        )));
    }

    let mut turbine = Turbine::new(params.clone(), tables, cfg.inflow, cfg.baseline_power);
    let settle_steps = (cfg.settle_time / cfg.ts).round() as usize;
    for _ in 0..settle_steps {
        turbine.step(cfg.inflow, cfg.baseline_power, cfg.ts);
    }

    let pre_steps = (cfg.record_pre / cfg.ts).round() as usize;
    let post_steps = (cfg.record_post / cfg.ts).round() as usize;
    let mut time = Vec::with_capacity(pre_steps + post_steps);
    let mut p_dem = Vec::with_capacity(time.capacity());
    let mut f_t = Vec::with_capacity(time.capacity());
    for k in 0..pre_steps + post_steps {
        let dem = if k < pre_steps {
            cfg.baseline_power
        } else {
            cfg.baseline_power + cfg.step_size
        };
        let state = turbine.step(cfg.inflow, dem, cfg.ts);
        if turbine.is_saturated() {
            return Err(Error::Identification(
                "turbine saturated during the experiment; record is invalid".into(),
            ));
        }
        time.push(k as f64 * cfg.ts);
        p_dem.push(dem);
        f_t.push(state.thrust);
    }

    Ok(StepExperiment {
        time,
        p_dem,
        f_t,
        baseline_power: cfg.baseline_power,
        step_size: cfg.step_size,
        inflow: cfg.inflow,
        ts: cfg.ts,
        step_index: pre_steps,
    })
}

/// Normalized-RMS fit percentage: 100 (1 − ‖y − ŷ‖₂ / ‖y − ȳ‖₂).
pub fn fit_percentage(y: &[f64], y_hat: &[f64]) -> f64 {
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let err: f64 = y
        .iter()
        .zip(y_hat)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    let spread: f64 = y
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        .sqrt();
    if spread == 0.0 {
        return f64::NEG_INFINITY;
    }
    100.0 * (1.0 - err / spread)
}

/// Unit-gain first-order response to input `u` at sample time `ts` with time
/// constant `t1` (zero-order-hold discretization).
fn filter_unit(u: &[f64], ts: f64, t1: f64) -> Vec<f64> {
    let alpha = (-ts / t1).exp();
    let mut y = Vec::with_capacity(u.len());
    let mut state = 0.0;
    for &ui in u {
        state = alpha * state + (1.0 - alpha) * ui;
        y.push(state);
    }
    y
}

/// Fit K1/(T1 s + 1) to the de-trended step record by least squares: a grid
/// of T1 candidates with a golden-section refinement; for each T1 the gain
/// K1 has a closed-form solution.
pub fn fit_first_order(exp: &StepExperiment) -> Result<LinearThrustModel> {
    if exp.time.len() < 10 || exp.step_index >= exp.time.len() {
        return Err(Error::Identification("record too short to fit".into()));
    }
    // de-trend: subtract pre-step means (fall back to first samples when the
    // record starts at the step)
    let pre = exp.step_index.max(1);
    let u_base = exp.p_dem[..pre].iter().sum::<f64>() / pre as f64;
    let y_base = exp.f_t[..pre].iter().sum::<f64>() / pre as f64;
    let u: Vec<f64> = exp.p_dem.iter().map(|v| v - u_base).collect();
    let y: Vec<f64> = exp.f_t.iter().map(|v| v - y_base).collect();

    let y_norm: f64 = y.iter().map(|v| v * v).sum();
    if y_norm == 0.0 {
        return Err(Error::Identification(
            "output never deviates from baseline".into(),
        ));
    }

    let sse_for = |t1: f64| -> (f64, f64) {
        let g = filter_unit(&u, exp.ts, t1);
        let gg: f64 = g.iter().map(|v| v * v).sum();
        if gg == 0.0 {
            return (f64::INFINITY, 0.0);
        }
        let gy: f64 = g.iter().zip(&y).map(|(a, b)| a * b).sum();
        let k1 = gy / gg;
        let sse = y_norm - k1 * gy;
        (sse, k1)
    };

    // log-spaced seed grid
    let (t_lo, t_hi) = (0.02_f64, 200.0_f64);
    let n_grid = 200;
    let mut best = (f64::INFINITY, t_lo, 0.0);
    for i in 0..n_grid {
        let t1 = t_lo * (t_hi / t_lo).powf(i as f64 / (n_grid - 1) as f64);
        let (sse, k1) = sse_for(t1);
        if sse < best.0 {
            best = (sse, t1, k1);
        }
    }
    // golden-section refinement in log space around the best seed
    let ratio = (t_hi / t_lo).powf(1.0 / (n_grid - 1) as f64);
    let (mut lo, mut hi) = ((best.1 / ratio).ln(), (best.1 * ratio).ln());
    const PHI: f64 = 0.618_033_988_749_895;
    for _ in 0..80 {
        let m1 = hi - PHI * (hi - lo);
        let m2 = lo + PHI * (hi - lo);
        if sse_for(m1.exp()).0 < sse_for(m2.exp()).0 {
            hi = m2;
        } else {
            lo = m1;
        }
    }
    let t1 = (0.5 * (lo + hi)).exp();
    let (_, k1) = sse_for(t1);

    if !t1.is_finite() || t1 <= 0.0 || !k1.is_finite() {
        return Err(Error::Identification("fit did not converge".into()));
    }

    let y_hat = filter_unit(&u, exp.ts, t1);
    let y_hat: Vec<f64> = y_hat.iter().map(|v| k1 * v).collect();
    let fit_percent = fit_percentage(&y, &y_hat);

    let (a, b) = discretize_fe(k1, t1, exp.ts)?;
    Ok(LinearThrustModel {
        k1,
        t1,
        ts: exp.ts,
        a,
        b,
        fit_percent,
    })
}

/// Forward-Euler discretization of K1/(T1 s + 1): a = 1 − T_s/T1,
/// b = T_s K1/T1. Requires T_s < T1 for a stable discrete pole.
pub fn discretize_fe(k1: f64, t1: f64, ts: f64) -> Result<(f64, f64)> {
    if t1 <= 0.0 {
        return Err(Error::Identification(
            "time constant must be positive".into(),
        ));
    }
    if ts >= t1 {
        return Err(Error::Identification(format!(
            "forward Euler unstable: T_s = {ts} not below T1 = {t1}"
        )));
    }
    Ok((1.0 - ts / t1, ts * k1 / t1))
}

/// Diagonal farm model: A = a I, B = b I of size N_t.
pub fn assemble_ab(a: f64, b: f64, n_t: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    (
        DMatrix::from_diagonal_element(n_t, n_t, a),
        DMatrix::from_diagonal_element(n_t, n_t, b),
    )
}

impl StepExperiment {
    /// CSV with columns t, P_dem, F_T.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::from("t,P_dem,F_T\n");
        for i in 0..self.time.len() {
            out.push_str(&format!(
                "{:.6},{:.6},{:.6}\n",
                self.time[i], self.p_dem[i], self.f_t[i]
            ));
        }
        std::fs::write(path, out).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_csv(path: &Path, baseline_power: f64, step_size: f64, inflow: f64) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let mut time = Vec::new();
        let mut p_dem = Vec::new();
        let mut f_t = Vec::new();
        for (ln, line) in text.lines().enumerate().skip(1) {
            let mut cols = line.split(',');
            let mut next = || -> Result<f64> {
                cols.next()
                    .and_then(|c| c.trim().parse().ok())
                    .ok_or_else(|| Error::Parse {
                        path: path.to_path_buf(),
                        msg: format!("bad row at line {}", ln + 1),
                    })
            };
            time.push(next()?);
            p_dem.push(next()?);
            f_t.push(next()?);
        }
        if time.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                msg: "need at least two samples".into(),
            });
        }
        let ts = time[1] - time[0];
        let step_index = p_dem
            .iter()
            .position(|&p| (p - p_dem[0]).abs() > 0.5 * step_size.abs())
            .unwrap_or(0);
        Ok(StepExperiment {
            time,
            p_dem,
            f_t,
            baseline_power,
            step_size,
            inflow,
            ts,
            step_index,
        })
    }
}

impl LinearThrustModel {
    /// Plain-text model file with key = value lines.
    pub fn write_file(&self, path: &Path) -> Result<()> {
        let text = format!(
            "k1 = {:.12e}\nt1 = {:.12e}\nts = {:.12e}\na = {:.12e}\nb = {:.12e}\nfit_percent = {:.6}\n",
            self.k1, self.t1, self.ts, self.a, self.b, self.fit_percent
        );
        std::fs::write(path, text).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let get = |key: &str| -> Result<f64> {
            text.lines()
                .find_map(|l| {
                    let (k, v) = l.split_once('=')?;
                    (k.trim() == key).then(|| v.trim().parse::<f64>().ok())?
                })
                .ok_or_else(|| Error::Parse {
                    path: path.to_path_buf(),
                    msg: format!("missing or malformed key `{key}`"),
                })
        };
        Ok(LinearThrustModel {
            k1: get("k1")?,
            t1: get("t1")?,
            ts: get("ts")?,
            a: get("a")?,
            b: get("b")?,
            fit_percent: get("fit_percent")?,
        })
    }
}
