//! Farm-level set-point dispatch: compensation control loop (CCL) and
//! thrust control loop (TCL).
//!
//! The CCL integrates the total power tracking error and raises every set
//! point by the common offset u_P; integration of a shortfall freezes when
//! every turbine is saturated (windup guard), while surplus errors always
//! integrate so the farm can unwind. The TCL integrates each unsaturated turbine's deviation from
//! the mean thrust of the unsaturated set and feeds it back through a
//! diagonal gain. Saturated turbines are masked out of the mean and their
//! integrators hold their last value until release.

use serde::Deserialize;

/// How the CCL offset is distributed across turbines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CclMode {
    /// u_P added to every set point (default).
    Broadcast,
    /// u_P added to unsaturated set points only.
    Masked,
}

/// Overall farm tracking error: reference minus the summed measured power.
pub fn total_error(p_ref_wf: f64, p_meas: &[f64]) -> f64 {
    p_ref_wf - p_meas.iter().sum::<f64>()
}

/// Mean thrust over unsaturated turbines. `None` when every turbine is
/// saturated (no mean defined; the TCL step is skipped).
pub fn mean_thrust(f_meas: &[f64], saturated: &[bool]) -> Option<f64> {
    let mut sum = 0.0;
    let mut m = 0usize;
    for (f, &s) in f_meas.iter().zip(saturated) {
        if !s {
            sum += f;
            m += 1;
        }
    }
    (m > 0).then(|| sum / m as f64)
}

/// Thrust error vector: mean minus own thrust for unsaturated turbines,
/// zero for saturated ones.
pub fn thrust_error(f_meas: &[f64], saturated: &[bool]) -> Option<Vec<f64>> {
    let mean = mean_thrust(f_meas, saturated)?;
    Some(
        f_meas
            .iter()
            .zip(saturated)
            .map(|(f, &s)| if s { 0.0 } else { mean - f })
            .collect(),
    )
}

/// Element-wise sum of the per-turbine reference and both loop corrections,
/// clamped per turbine to [0, rated]. Returns the set points and whether any
/// clamp engaged.
pub fn compose_setpoints(
    p_ref: &[f64],
    dp_ccl: &[f64],
    dp_tcl: &[f64],
    rated_power: f64,
) -> (Vec<f64>, bool) {
    let mut clamped = false;
    let dem = p_ref
        .iter()
        .zip(dp_ccl)
        .zip(dp_tcl)
        .map(|((r, p), t)| {
            let raw = r + p + t;
            let v = raw.clamp(0.0, rated_power);
            if v != raw {
                clamped = true;
            }
            v
        })
        .collect();
    (dem, clamped)
}

/// Output of one controller tick.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub setpoints: Vec<f64>,
    pub u_p: f64,
    pub e_total: f64,
    pub clamped: bool,
    /// TCL step skipped because every turbine was saturated.
    pub tcl_skipped: bool,
}

/// Two-loop farm controller state.
#[derive(Debug, Clone)]
pub struct FarmController {
    pub ts: f64,
    pub n_t: usize,
    /// CCL integral gain [1/s]; default T_s⁻¹ N_t⁻¹.
    pub k_ccl: f64,
    /// Diagonal TCL gains [W/(N s)]; default 0.5 each.
    pub k_tcl: Vec<f64>,
    pub ccl_enabled: bool,
    pub tcl_enabled: bool,
    pub ccl_mode: CclMode,
    pub rated_power: f64,
    /// CCL integrator u_P [W].
    pub u_p: f64,
    /// TCL integral errors e_I [N s].
    pub e_i: Vec<f64>,
}

impl FarmController {
    pub fn new(ts: f64, n_t: usize, rated_power: f64) -> Self {
        assert!(n_t >= 1 && ts > 0.0);
        FarmController {
            ts,
            n_t,
            k_ccl: 1.0 / (ts * n_t as f64),
            k_tcl: vec![0.5; n_t],
            ccl_enabled: true,
            tcl_enabled: true,
            ccl_mode: CclMode::Broadcast,
            rated_power,
            u_p: 0.0,
            e_i: vec![0.0; n_t],
        }
    }

    /// CCL update: integrate the total error, except that a shortfall
    /// (positive error) is not integrated while every turbine is saturated —
    /// raising u_P further cannot raise the output. Negative errors always
    /// integrate so an overproducing farm can unwind. Returns the per-turbine
    /// offset vector.
    pub fn ccl_step(&mut self, e_total: f64, saturated: &[bool]) -> Vec<f64> {
        let any_unsaturated = saturated.iter().any(|&s| !s);
        if any_unsaturated || e_total < 0.0 {
            self.u_p += self.k_ccl * e_total * self.ts;
        }
        match self.ccl_mode {
            CclMode::Broadcast => vec![self.u_p; self.n_t],
            CclMode::Masked => saturated
                .iter()
                .map(|&s| if s { 0.0 } else { self.u_p })
                .collect(),
        }
    }

    /// TCL update: e_I(k+1) = e_I(k) + e_T(k) T_s, output K_I e_I. Entries
    /// of `e_t` are zero for saturated turbines, so their integrators hold.
    pub fn tcl_step(&mut self, e_t: &[f64]) -> Vec<f64> {
        for (ei, et) in self.e_i.iter_mut().zip(e_t) {
            *ei += et * self.ts;
        }
        self.e_i
            .iter()
            .zip(&self.k_tcl)
            .map(|(e, k)| k * e)
            .collect()
    }

    /// One full dispatch tick from the gathered measurements.
    pub fn step(
        &mut self,
        p_ref_wf: f64,
        p_meas: &[f64],
        f_meas: &[f64],
        saturated: &[bool],
    ) -> ControlOutput {
        let p_ref: Vec<f64> = vec![p_ref_wf / self.n_t as f64; self.n_t];
        let e_total = total_error(p_ref_wf, p_meas);

        let dp_ccl = if self.ccl_enabled {
            self.ccl_step(e_total, saturated)
        } else {
            vec![0.0; self.n_t]
        };

        let mut tcl_skipped = false;
        let dp_tcl = if self.tcl_enabled {
            match thrust_error(f_meas, saturated) {
                Some(e_t) => self.tcl_step(&e_t),
                None => {
                    tcl_skipped = true;
                    self.e_i
                        .iter()
                        .zip(&self.k_tcl)
                        .map(|(e, k)| k * e)
                        .collect()
                }
            }
        } else {
            vec![0.0; self.n_t]
        };

        let (setpoints, clamped) = compose_setpoints(&p_ref, &dp_ccl, &dp_tcl, self.rated_power);
        ControlOutput {
            setpoints,
            u_p: self.u_p,
            e_total,
            clamped,
            tcl_skipped,
        }
    }
}
