//! Scenario orchestration: configuration schema, warm start, the tick loop
//! coupling wake field, farm controller, and turbines, metrics, and the
//! run artifacts (time-series CSV, metrics summary).

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::Deserialize;

use crate::aero::AeroTables;
use crate::error::{Error, Result};
use crate::farm::{thrust_error, CclMode, FarmController};
use crate::reference::{ReferenceSignal, SignalConfig};
use crate::turbine::{Turbine, TurbineParams};
use crate::wake::{FarmLayout, LayoutConfig, WakeField};

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WakeConfig {
    /// Wake expansion coefficient.
    pub k_w: f64,
    /// Thrust coefficient used to seed delay buffers before warm start.
    pub initial_ct: f64,
}

impl Default for WakeConfig {
    fn default() -> Self {
        WakeConfig {
            k_w: 0.05,
            initial_ct: 0.8,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerConfig {
    /// 1 = saturation compensation only, 2 = compensation plus thrust
    /// balancing.
    pub setting_case: u8,
    pub ccl_mode: CclMode,
    /// Per-turbine thrust-balance integral gain [W/(N s)].
    pub k_tcl: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        ControllerConfig {
            setting_case: 2,
            ccl_mode: CclMode::Broadcast,
            k_tcl: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Ambient inflow speed [m/s].
    pub inflow: f64,
    /// Run length [s], a multiple of `ts`.
    pub duration: f64,
    /// Sampling period [s].
    pub ts: f64,
    pub seed: u64,
    /// Std of additive Gaussian noise on rotor-effective wind [m/s].
    pub input_noise_std: f64,
    /// Std of additive Gaussian noise on the power measurements fed to the
    /// controller [W].
    pub output_noise_std: f64,
    /// Metrics window [s, s].
    pub metrics_window: [f64; 2],
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            inflow: 13.0,
            duration: 1200.0,
            ts: 0.1,
            seed: 0,
            input_noise_std: 0.0,
            output_noise_std: 0.0,
            metrics_window: [300.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub layout: LayoutConfig,
    pub turbine: TurbineParams,
    pub wake: WakeConfig,
    pub controller: ControllerConfig,
    pub signal: SignalConfig,
    pub sim: SimConfig,
    pub output: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg: ScenarioConfig = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            msg: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.turbine.validate().map_err(Error::Config)?;
        if self.sim.ts <= 0.0 {
            return Err(Error::Config("ts must be positive".into()));
        }
        let steps = self.sim.duration / self.sim.ts;
        if self.sim.duration <= 0.0 || (steps - steps.round()).abs() > 1e-6 {
            return Err(Error::Config(
                "duration must be a positive multiple of ts".into(),
            ));
        }
        if self.sim.inflow <= 0.0 {
            return Err(Error::Config("inflow must be positive".into()));
        }
        if !matches!(self.controller.setting_case, 1 | 2) {
            return Err(Error::Config("setting_case must be 1 or 2".into()));
        }
        if self.controller.k_tcl < 0.0 {
            return Err(Error::Config("k_tcl must be non-negative".into()));
        }
        if self.sim.input_noise_std < 0.0 || self.sim.output_noise_std < 0.0 {
            return Err(Error::Config("noise std must be non-negative".into()));
        }
        let [w0, w1] = self.sim.metrics_window;
        if !(0.0 <= w0 && w0 < w1 && w1 <= self.sim.duration) {
            return Err(Error::Config(
                "metrics window must lie within the run".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.wake.initial_ct) || self.wake.k_w <= 0.0 {
            return Err(Error::Config("wake parameters out of range".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.sim.duration / self.sim.ts).round() as usize
    }
}

/// Summary numbers for one run.
#[derive(Debug, Clone)]
pub struct RunMetrics {
    /// RMS of P_ref_WF − P_meas_WF over the metrics window [W].
    pub rms_tracking_error: f64,
    /// Per-turbine fraction of window steps spent saturated.
    pub saturation_occupancy: Vec<f64>,
    /// max − min thrust over unsaturated turbines at the final step [N];
    /// zero when fewer than two are unsaturated.
    pub terminal_thrust_spread: f64,
    /// Mean thrust over unsaturated turbines at the final step [N].
    pub terminal_mean_thrust: f64,
    /// Σ P_meas_WF · T_s over the whole run [J].
    pub total_energy: f64,
    pub metrics_window: [f64; 2],
    pub setting_case: u8,
    pub inflow: f64,
    pub duration: f64,
    pub ts: f64,
    pub seed: u64,
    pub n_t: usize,
}

impl RunMetrics {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "rms_tracking_error_w = {:.6}", self.rms_tracking_error);
        let occ: Vec<String> = self
            .saturation_occupancy
            .iter()
            .map(|o| format!("{o:.6}"))
            .collect();
        let _ = writeln!(s, "saturation_occupancy = {}", occ.join(","));
        let _ = writeln!(
            s,
            "terminal_thrust_spread_n = {:.6}",
            self.terminal_thrust_spread
        );
        let _ = writeln!(
            s,
            "terminal_mean_thrust_n = {:.6}",
            self.terminal_mean_thrust
        );
        let _ = writeln!(s, "total_energy_j = {:.6}", self.total_energy);
        let _ = writeln!(
            s,
            "metrics_window_s = {:.1},{:.1}",
            self.metrics_window[0], self.metrics_window[1]
        );
        let _ = writeln!(s, "setting_case = {}", self.setting_case);
        let _ = writeln!(s, "inflow_ms = {:.4}", self.inflow);
        let _ = writeln!(s, "duration_s = {:.1}", self.duration);
        let _ = writeln!(s, "ts_s = {:.4}", self.ts);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "n_t = {}", self.n_t);
        s
    }

    pub fn write_file(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// Full time series of one run plus its metrics.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub time: Vec<f64>,
    pub p_ref_wf: Vec<f64>,
    pub p_meas_wf: Vec<f64>,
    pub u_p: Vec<f64>,
    /// Per-step, per-turbine series, indexed [step][turbine].
    pub p_dem: Vec<Vec<f64>>,
    pub p_meas: Vec<Vec<f64>>,
    pub f_t: Vec<Vec<f64>>,
    pub pitch: Vec<Vec<f64>>,
    pub tau_gen: Vec<Vec<f64>>,
    pub omega_r: Vec<Vec<f64>>,
    pub saturated: Vec<Vec<bool>>,
    /// Rotor-effective wind speed seen by each turbine this step.
    pub v_r: Vec<Vec<f64>>,
    pub metrics: RunMetrics,
}

impl RunOutput {
    /// Render the time-series CSV. Fixed-precision formatting keeps repeated
    /// runs byte-identical.
    pub fn to_csv(&self) -> String {
        let n = self.metrics.n_t;
        let mut s = String::from("t");
        for i in 0..n {
            let _ = write!(
                s,
                ",p_dem_{i},p_meas_{i},f_t_{i},pitch_{i},tau_gen_{i},omega_r_{i},s_{i}"
            );
        }
        s.push_str(",p_ref_wf,p_meas_wf,u_p\n");
        for k in 0..self.time.len() {
            let _ = write!(s, "{:.6}", self.time[k]);
            for i in 0..n {
                let _ = write!(
                    s,
                    ",{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
                    self.p_dem[k][i],
                    self.p_meas[k][i],
                    self.f_t[k][i],
                    self.pitch[k][i],
                    self.tau_gen[k][i],
                    self.omega_r[k][i],
                    u8::from(self.saturated[k][i]),
                );
            }
            let _ = writeln!(
                s,
                ",{:.6},{:.6},{:.6}",
                self.p_ref_wf[k], self.p_meas_wf[k], self.u_p[k]
            );
        }
        s
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|source| Error::Write {
            path: path.to_path_buf(),
            source,
        })
    }
}

/// RMS of the tracking error over a time window. Errors on an empty window.
pub fn rms_error(time: &[f64], p_ref: &[f64], p_meas: &[f64], window: (f64, f64)) -> Result<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for ((&t, &r), &m) in time.iter().zip(p_ref).zip(p_meas) {
        if t >= window.0 && t <= window.1 {
            let e = r - m;
            sum += e * e;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Config("empty metrics window".into()));
    }
    Ok((sum / count as f64).sqrt())
}

/// Thrust coefficient at a turbine's current operating point.
fn current_ct(t: &Turbine) -> f64 {
    t.tables.ct(t.state.tip_speed_ratio, t.state.pitch).value
}

/// Fixed-point warm start: iterate greedy operating points against the
/// steady wake solution, then seed the delay buffers with the converged
/// thrust coefficients.
fn warm_start(
    cfg: &ScenarioConfig,
    tables: &Arc<AeroTables>,
    layout: &FarmLayout,
    wake: &mut WakeField,
    initial_dem: f64,
) -> Vec<Turbine> {
    let n = layout.len();
    let mut turbines: Vec<Turbine> = (0..n)
        .map(|_| {
            Turbine::new(
                cfg.turbine.clone(),
                Arc::clone(tables),
                cfg.sim.inflow,
                initial_dem,
            )
        })
        .collect();
    for _ in 0..50 {
        let ct: Vec<f64> = turbines.iter().map(current_ct).collect();
        let v = wake.steady(&ct);
        turbines = v
            .iter()
            .map(|&vi| Turbine::new(cfg.turbine.clone(), Arc::clone(tables), vi, initial_dem))
            .collect();
    }
    let ct: Vec<f64> = turbines.iter().map(current_ct).collect();
    wake.fill_buffers(&ct);
    turbines
}

/// Run one scenario to completion.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let tables = Arc::new(AeroTables::generate());
    let layout = FarmLayout::grid(&cfg.layout, 2.0 * cfg.turbine.rotor_radius)?;
    let n = layout.len();
    let total_rated = n as f64 * cfg.turbine.rated_power;
    let signal = ReferenceSignal::new(
        cfg.signal.clone(),
        total_rated,
        cfg.sim.duration,
        cfg.sim.ts,
    )?;
    let mut wake = WakeField::new(
        &layout,
        cfg.sim.inflow,
        cfg.wake.k_w,
        cfg.sim.ts,
        cfg.wake.initial_ct,
    )?;
    let initial_dem = signal.value(0.0) / n as f64;
    let mut turbines = warm_start(cfg, &tables, &layout, &mut wake, initial_dem);

    let mut controller = FarmController::new(cfg.sim.ts, n, cfg.turbine.rated_power);
    controller.ccl_mode = cfg.controller.ccl_mode;
    controller.tcl_enabled = cfg.controller.setting_case == 2;
    controller.k_tcl = vec![cfg.controller.k_tcl; n];

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.sim.seed);
    let input_noise = noise(cfg.sim.input_noise_std)?;
    let output_noise = noise(cfg.sim.output_noise_std)?;

    let steps = cfg.steps();
    let mut out = RunOutput {
        time: Vec::with_capacity(steps),
        p_ref_wf: Vec::with_capacity(steps),
        p_meas_wf: Vec::with_capacity(steps),
        u_p: Vec::with_capacity(steps),
        p_dem: Vec::with_capacity(steps),
        p_meas: Vec::with_capacity(steps),
        f_t: Vec::with_capacity(steps),
        pitch: Vec::with_capacity(steps),
        tau_gen: Vec::with_capacity(steps),
        omega_r: Vec::with_capacity(steps),
        saturated: Vec::with_capacity(steps),
        v_r: Vec::with_capacity(steps),
        metrics: RunMetrics {
            rms_tracking_error: 0.0,
            saturation_occupancy: vec![0.0; n],
            terminal_thrust_spread: 0.0,
            terminal_mean_thrust: 0.0,
            total_energy: 0.0,
            metrics_window: cfg.sim.metrics_window,
            setting_case: cfg.controller.setting_case,
            inflow: cfg.sim.inflow,
            duration: cfg.sim.duration,
            ts: cfg.sim.ts,
            seed: cfg.sim.seed,
            n_t: n,
        },
    };

    for k in 0..steps {
        let t = k as f64 * cfg.sim.ts;

        // wake propagation from last tick's operating points
        let ct: Vec<f64> = turbines.iter().map(current_ct).collect();
        let mut v: Vec<f64> = wake.advance(&ct).to_vec();
        if let Some(dist) = &input_noise {
            for vi in &mut v {
                *vi = (*vi + dist.sample(&mut rng)).max(0.1);
            }
        }

        // measurements available to the controller (previous-tick state)
        let mut p_meas: Vec<f64> = turbines.iter().map(|tb| tb.state.p_meas).collect();
        if let Some(dist) = &output_noise {
            for p in &mut p_meas {
                *p += dist.sample(&mut rng);
            }
        }
        let f_meas: Vec<f64> = turbines.iter().map(|tb| tb.state.thrust).collect();
        let sat: Vec<bool> = turbines.iter().map(Turbine::is_saturated).collect();

        let p_ref_wf = signal.value(t);
        let (setpoints, u_p) = if t + 1e-9 >= signal.engage_time() {
            let o = controller.step(p_ref_wf, &p_meas, &f_meas, &sat);
            (o.setpoints, o.u_p)
        } else {
            (vec![p_ref_wf / n as f64; n], 0.0)
        };

        let mut row_p_meas = Vec::with_capacity(n);
        let mut row_f = Vec::with_capacity(n);
        let mut row_pitch = Vec::with_capacity(n);
        let mut row_tau = Vec::with_capacity(n);
        let mut row_omega = Vec::with_capacity(n);
        for (i, tb) in turbines.iter_mut().enumerate() {
            let st = tb.step(v[i], setpoints[i], cfg.sim.ts);
            if !st.p_meas.is_finite() || !st.omega_r.is_finite() || !st.thrust.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite turbine state at t = {t:.1} s (turbine {i})"
                )));
            }
            row_p_meas.push(st.p_meas);
            row_f.push(st.thrust);
            row_pitch.push(st.pitch);
            row_tau.push(st.applied_torque);
            row_omega.push(st.omega_r);
        }
        let p_meas_wf: f64 = row_p_meas.iter().sum();
        let sat_now: Vec<bool> = turbines.iter().map(Turbine::is_saturated).collect();

        out.metrics.total_energy += p_meas_wf * cfg.sim.ts;
        out.time.push(t);
        out.p_ref_wf.push(p_ref_wf);
        out.p_meas_wf.push(p_meas_wf);
        out.u_p.push(u_p);
        out.p_dem.push(setpoints);
        out.p_meas.push(row_p_meas);
        out.f_t.push(row_f);
        out.pitch.push(row_pitch);
        out.tau_gen.push(row_tau);
        out.omega_r.push(row_omega);
        out.saturated.push(sat_now);
        out.v_r.push(v);
    }

    // metrics over the configured window
    let [w0, w1] = cfg.sim.metrics_window;
    out.metrics.rms_tracking_error = rms_error(&out.time, &out.p_ref_wf, &out.p_meas_wf, (w0, w1))?;
    let mut window_steps = 0usize;
    let mut sat_counts = vec![0usize; n];
    for (k, &t) in out.time.iter().enumerate() {
        if t >= w0 && t <= w1 {
            window_steps += 1;
            for (c, &s) in sat_counts.iter_mut().zip(&out.saturated[k]) {
                if s {
                    *c += 1;
                }
            }
        }
    }
    for (occ, &c) in out.metrics.saturation_occupancy.iter_mut().zip(&sat_counts) {
        *occ = c as f64 / window_steps as f64;
    }
    let last = out.time.len() - 1;
    let unsat_thrusts: Vec<f64> = (0..n)
        .filter(|&i| !out.saturated[last][i])
        .map(|i| out.f_t[last][i])
        .collect();
    if !unsat_thrusts.is_empty() {
        let max = unsat_thrusts.iter().cloned().fold(f64::MIN, f64::max);
        let min = unsat_thrusts.iter().cloned().fold(f64::MAX, f64::min);
        out.metrics.terminal_mean_thrust =
            unsat_thrusts.iter().sum::<f64>() / unsat_thrusts.len() as f64;
        out.metrics.terminal_thrust_spread = if unsat_thrusts.len() >= 2 {
            max - min
        } else {
            0.0
        };
    }

    Ok(out)
}

fn noise(std: f64) -> Result<Option<Normal<f64>>> {
    if std == 0.0 {
        return Ok(None);
    }
    Normal::new(0.0, std)
        .map(Some)
        .map_err(|e| Error::Config(format!("bad noise std: {e}")))
}

/// Side-by-side comparison of two runs that differ only in setting case.
pub fn compare_cases(a: &RunMetrics, b: &RunMetrics) -> Result<String> {
    if a.n_t != b.n_t
        || (a.inflow - b.inflow).abs() > 1e-9
        || (a.duration - b.duration).abs() > 1e-9
        || (a.ts - b.ts).abs() > 1e-12
        || a.metrics_window != b.metrics_window
    {
        return Err(Error::Config(
            "runs are not comparable: layout, inflow, timing, or window differ".into(),
        ));
    }
    let occ = |m: &RunMetrics| m.saturation_occupancy.iter().sum::<f64>() / m.n_t as f64;
    let mut s = String::new();
    let _ = writeln!(
        s,
        "metric,case_{},case_{},delta",
        a.setting_case, b.setting_case
    );
    let _ = writeln!(
        s,
        "rms_tracking_error_w,{:.6},{:.6},{:.6}",
        a.rms_tracking_error,
        b.rms_tracking_error,
        b.rms_tracking_error - a.rms_tracking_error
    );
    let _ = writeln!(
        s,
        "mean_saturation_occupancy,{:.6},{:.6},{:.6}",
        occ(a),
        occ(b),
        occ(b) - occ(a)
    );
    let _ = writeln!(
        s,
        "terminal_thrust_spread_n,{:.6},{:.6},{:.6}",
        a.terminal_thrust_spread,
        b.terminal_thrust_spread,
        b.terminal_thrust_spread - a.terminal_thrust_spread
    );
    let _ = writeln!(
        s,
        "total_energy_j,{:.6},{:.6},{:.6}",
        a.total_energy,
        b.total_energy,
        b.total_energy - a.total_energy
    );
    Ok(s)
}

/// Parse a metrics summary file back into `RunMetrics` (for `compare`).
pub fn read_metrics(path: &Path) -> Result<RunMetrics> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut m = RunMetrics {
        rms_tracking_error: f64::NAN,
        saturation_occupancy: Vec::new(),
        terminal_thrust_spread: 0.0,
        terminal_mean_thrust: 0.0,
        total_energy: 0.0,
        metrics_window: [0.0, 0.0],
        setting_case: 0,
        inflow: 0.0,
        duration: 0.0,
        ts: 0.0,
        seed: 0,
        n_t: 0,
    };
    for line in text.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        let key = key.trim();
        let value = value.trim();
        let parse = |v: &str| -> Result<f64> {
            v.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                msg: format!("bad value for {key}"),
            })
        };
        match key {
            "rms_tracking_error_w" => m.rms_tracking_error = parse(value)?,
            "saturation_occupancy" => {
                m.saturation_occupancy =
                    value.split(',').map(parse).collect::<Result<Vec<f64>>>()?;
            }
            "terminal_thrust_spread_n" => m.terminal_thrust_spread = parse(value)?,
            "terminal_mean_thrust_n" => m.terminal_mean_thrust = parse(value)?,
            "total_energy_j" => m.total_energy = parse(value)?,
            "metrics_window_s" => {
                let parts: Vec<f64> = value.split(',').map(parse).collect::<Result<Vec<f64>>>()?;
                if parts.len() == 2 {
                    m.metrics_window = [parts[0], parts[1]];
                }
            }
            "setting_case" => m.setting_case = parse(value)? as u8,
            "inflow_ms" => m.inflow = parse(value)?,
            "duration_s" => m.duration = parse(value)?,
            "ts_s" => m.ts = parse(value)?,
            "seed" => m.seed = parse(value)? as u64,
            "n_t" => m.n_t = parse(value)? as usize,
            _ => {}
        }
    }
    if !m.rms_tracking_error.is_finite() || m.n_t == 0 {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: "metrics file is missing required keys".into(),
        });
    }
    Ok(m)
}

/// Per-step sanity checks used by tests: Σ e_T over unsaturated is zero and
/// measured power stays under the available-power ceiling.
pub fn thrust_error_sum(f_meas: &[f64], saturated: &[bool]) -> Option<f64> {
    thrust_error(f_meas, saturated).map(|e| {
        e.iter()
            .zip(saturated)
            .filter(|(_, &s)| !s)
            .map(|(v, _)| v)
            .sum()
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quick_config() -> ScenarioConfig {
        let mut cfg = ScenarioConfig::default();
        cfg.sim.duration = 120.0;
        cfg.sim.metrics_window = [60.0, 120.0];
        cfg.signal.engage_time = 30.0;
        cfg
    }

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn validation_rejects_bad_fields() {
        let mut c = ScenarioConfig::default();
        c.sim.duration = 100.05;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.controller.setting_case = 3;
        assert!(c.validate().is_err());
        let mut c = ScenarioConfig::default();
        c.sim.metrics_window = [900.0, 300.0];
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip_with_partial_sections() {
        let text = r#"
[sim]
inflow = 12.25
duration = 600.0

[controller]
setting_case = 1
"#;
        let cfg: ScenarioConfig = toml::from_str(text).unwrap();
        assert_eq!(cfg.sim.inflow, 12.25);
        assert_eq!(cfg.controller.setting_case, 1);
        // untouched sections keep defaults
        assert_eq!(cfg.layout.rows, 3);
        assert_relative_eq!(cfg.turbine.rated_power, 5.0e6);
    }

    #[test]
    fn rms_error_examples() {
        let t: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let r = vec![5.0e6; 100];
        assert_eq!(rms_error(&t, &r, &r, (0.0, 99.0)).unwrap(), 0.0);
        let m: Vec<f64> = r.iter().map(|v| v - 100.0).collect();
        assert_relative_eq!(rms_error(&t, &r, &m, (0.0, 99.0)).unwrap(), 100.0);
        // alternating ±c
        let alt: Vec<f64> = (0..100)
            .map(|k| 5.0e6 + if k % 2 == 0 { 100.0 } else { -100.0 })
            .collect();
        assert_relative_eq!(rms_error(&t, &r, &alt, (0.0, 99.0)).unwrap(), 100.0);
        assert!(rms_error(&t, &r, &r, (500.0, 600.0)).is_err());
    }

    #[test]
    fn short_run_produces_consistent_series() {
        let cfg = quick_config();
        let out = run_scenario(&cfg).unwrap();
        assert_eq!(out.time.len(), cfg.steps());
        // energy bookkeeping is exact
        let energy: f64 = out.p_meas_wf.iter().map(|p| p * cfg.sim.ts).sum();
        assert_eq!(energy, out.metrics.total_energy);
        // farm total equals the per-turbine sum
        for k in 0..out.time.len() {
            assert_relative_eq!(
                out.p_meas[k].iter().sum::<f64>(),
                out.p_meas_wf[k],
                epsilon = 1e-6
            );
        }
    }

    #[test]
    fn uniform_dispatch_before_engagement() {
        let cfg = quick_config();
        let out = run_scenario(&cfg).unwrap();
        let n = cfg.layout.rows * cfg.layout.cols;
        for k in 0..out.time.len() {
            if out.time[k] < cfg.signal.engage_time {
                for i in 0..n {
                    assert_relative_eq!(
                        out.p_dem[k][i],
                        out.p_ref_wf[k] / n as f64,
                        epsilon = 1e-9
                    );
                }
                assert_eq!(out.u_p[k], 0.0);
            }
        }
    }

    #[test]
    fn supply_ceiling_respected() {
        // measured power never exceeds the wind supply plus the rotor's
        // kinetic-energy release while decelerating (5% margin on the sum)
        let cfg = quick_config();
        let tables = AeroTables::generate();
        let out = run_scenario(&cfg).unwrap();
        for k in 1..out.time.len() {
            for i in 0..out.metrics.n_t {
                let avail = crate::turbine::available_power(out.v_r[k][i], &cfg.turbine, &tables);
                let omega = out.omega_r[k][i];
                let decel = (out.omega_r[k - 1][i] - omega) / cfg.sim.ts;
                let release = (cfg.turbine.drivetrain_inertia
                    * omega
                    * decel
                    * cfg.turbine.generator_efficiency)
                    .max(0.0);
                assert!(
                    out.p_meas[k][i] <= (avail + release) * 1.05 + 1.0,
                    "t = {} turbine {} p = {} avail = {} release = {}",
                    out.time[k],
                    i,
                    out.p_meas[k][i],
                    avail,
                    release
                );
            }
        }
    }

    #[test]
    fn determinism_identical_csv() {
        let mut cfg = quick_config();
        cfg.sim.input_noise_std = 0.05;
        cfg.sim.seed = 42;
        let a = run_scenario(&cfg).unwrap().to_csv();
        let b = run_scenario(&cfg).unwrap().to_csv();
        assert_eq!(a, b);
    }

    #[test]
    fn seed_changes_noisy_output() {
        let mut cfg = quick_config();
        cfg.sim.input_noise_std = 0.05;
        cfg.sim.seed = 1;
        let a = run_scenario(&cfg).unwrap().to_csv();
        cfg.sim.seed = 2;
        let b = run_scenario(&cfg).unwrap().to_csv();
        assert_ne!(a, b);
    }

    #[test]
    fn metrics_text_round_trip() {
        let cfg = quick_config();
        let out = run_scenario(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("metrics.txt");
        out.metrics.write_file(&path).unwrap();
        let back = read_metrics(&path).unwrap();
        assert_relative_eq!(
            back.rms_tracking_error,
            out.metrics.rms_tracking_error,
            epsilon = 1e-5
        );
        assert_eq!(back.n_t, out.metrics.n_t);
        assert_eq!(back.setting_case, out.metrics.setting_case);
        assert_eq!(back.saturation_occupancy.len(), out.metrics.n_t);
    }

    #[test]
    fn compare_identical_runs_all_deltas_zero() {
        let cfg = quick_config();
        let out = run_scenario(&cfg).unwrap();
        let report = compare_cases(&out.metrics, &out.metrics).unwrap();
        for line in report.lines().skip(1) {
            let delta: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
            assert_eq!(delta, 0.0);
        }
    }

    #[test]
    fn compare_rejects_mismatched_runs() {
        let cfg = quick_config();
        let a = run_scenario(&cfg).unwrap();
        let mut cfg2 = quick_config();
        cfg2.sim.inflow = 11.0;
        let b = run_scenario(&cfg2).unwrap();
        assert!(compare_cases(&a.metrics, &b.metrics).is_err());
    }

    #[test]
    fn csv_shape_matches_header() {
        let mut cfg = quick_config();
        cfg.sim.duration = 10.0;
        cfg.sim.metrics_window = [0.0, 10.0];
        cfg.signal.engage_time = 5.0;
        let out = run_scenario(&cfg).unwrap();
        let csv = out.to_csv();
        let mut lines = csv.lines();
        let header_cols = lines.next().unwrap().split(',').count();
        for line in lines {
            assert_eq!(line.split(',').count(), header_cols);
        }
        assert_eq!(header_cols, 1 + 9 * 7 + 3);
    }
}
