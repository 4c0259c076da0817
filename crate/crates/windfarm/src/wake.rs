//! Engineering wake model: top-hat wake deficits with root-sum-square
//! superposition and advection delay between aligned turbines.
//!
//! The wind is aligned with the grid rows, so only turbines in the same
//! column interact and full wake overlap is assumed. Each ordered pair
//! carries a ring buffer of upstream thrust-coefficient history; the buffer
//! length encodes the advection delay.

use std::collections::VecDeque;

use serde::Deserialize;

use crate::error::{Error, Result};

/// Rectangular farm layout. Wind travels along +x (row 1 first).
#[derive(Debug, Clone)]
pub struct FarmLayout {
    /// Turbine positions [m], (x downwind, y crosswind).
    pub positions: Vec<[f64; 2]>,
    pub rotor_diameter: f64,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LayoutConfig {
    pub rows: usize,
    pub cols: usize,
    pub spacing_diameters: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        LayoutConfig {
            rows: 3,
            cols: 3,
            spacing_diameters: 5.0,
        }
    }
}

impl FarmLayout {
    /// Regular grid, `rows` lines perpendicular to the wind.
    pub fn grid(cfg: &LayoutConfig, rotor_diameter: f64) -> Result<Self> {
        if cfg.rows == 0 || cfg.cols == 0 {
            return Err(Error::Config(
                "layout must have at least one turbine".into(),
            ));
        }
        if cfg.spacing_diameters <= 0.0 {
            return Err(Error::Config("layout spacing must be positive".into()));
        }
        let spacing = cfg.spacing_diameters * rotor_diameter;
        let mut positions = Vec::with_capacity(cfg.rows * cfg.cols);
        for r in 0..cfg.rows {
            for c in 0..cfg.cols {
                positions.push([r as f64 * spacing, c as f64 * spacing]);
            }
        }
        Ok(FarmLayout {
            positions,
            rotor_diameter,
            rows: cfg.rows,
            cols: cfg.cols,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    /// Row index (downwind rank) of turbine `i` in a grid layout.
    pub fn row_of(&self, i: usize) -> usize {
        i / self.cols.max(1)
    }
}

/// Top-hat wake deficit: δ = (1 − √(1 − C_T)) / (1 + k_w x/D)².
/// C_T is clamped just below 1; the returned flag reports that clamping.
pub fn wake_deficit(ct_upstream: f64, distance: f64, rotor_diameter: f64, k_w: f64) -> (f64, bool) {
    let clamped = ct_upstream >= 1.0;
    let ct = ct_upstream.clamp(0.0, 0.9999);
    let expansion = 1.0 + k_w * distance / rotor_diameter;
    let delta = (1.0 - (1.0 - ct).sqrt()) / (expansion * expansion);
    (delta, clamped)
}

struct WakePair {
    upstream: usize,
    downstream: usize,
    distance: f64,
    /// Upstream C_T history; front is the oldest (delayed) sample.
    buffer: VecDeque<f64>,
}

/// Per-turbine rotor-effective wind speeds under ambient inflow and delayed
/// upstream wake deficits.
pub struct WakeField {
    pub ambient: f64,
    pub k_w: f64,
    rotor_diameter: f64,
    n: usize,
    pairs: Vec<WakePair>,
    v_r: Vec<f64>,
}

impl WakeField {
    /// Build the interaction graph for an aligned layout. The advection
    /// delay per pair is distance over the mean of the ambient and the
    /// nominally waked speed, rounded to whole steps; buffers are seeded
    /// with `initial_ct`.
    pub fn new(
        layout: &FarmLayout,
        ambient: f64,
        k_w: f64,
        dt: f64,
        initial_ct: f64,
    ) -> Result<Self> {
        if ambient <= 0.0 {
            return Err(Error::Config("ambient wind speed must be positive".into()));
        }
        if dt <= 0.0 {
            return Err(Error::Config("time step must be positive".into()));
        }
        let n = layout.len();
        let mut pairs = Vec::new();
        // nominal deficit used only to size the delay buffers
        const NOMINAL_CT: f64 = 0.8;
        for j in 0..n {
            for i in 0..n {
                let dx = layout.positions[i][0] - layout.positions[j][0];
                let dy = (layout.positions[i][1] - layout.positions[j][1]).abs();
                if dx <= 0.0 || dy > 0.5 * layout.rotor_diameter {
                    continue;
                }
                let (delta_nom, _) = wake_deficit(NOMINAL_CT, dx, layout.rotor_diameter, k_w);
                let waked = ambient * (1.0 - delta_nom);
                let advection = 0.5 * (ambient + waked);
                let steps = ((dx / advection) / dt).round().max(1.0) as usize;
                pairs.push(WakePair {
                    upstream: j,
                    downstream: i,
                    distance: dx,
                    buffer: VecDeque::from(vec![initial_ct; steps]),
                });
            }
        }
        let mut field = WakeField {
            ambient,
            k_w,
            rotor_diameter: layout.rotor_diameter,
            n,
            pairs,
            v_r: vec![ambient; n],
        };
        let seed = vec![initial_ct; field.pairs.len()];
        field.recompute(&seed);
        Ok(field)
    }

    /// Delay (in steps) of the pair feeding `downstream` from `upstream`,
    /// if they interact.
    pub fn delay_steps(&self, upstream: usize, downstream: usize) -> Option<usize> {
        self.pairs
            .iter()
            .find(|p| p.upstream == upstream && p.downstream == downstream)
            .map(|p| p.buffer.len())
    }

    fn recompute(&mut self, delayed_ct: &[f64]) {
        let mut sum_sq = vec![0.0_f64; self.n];
        for (p, &ct) in self.pairs.iter().zip(delayed_ct) {
            let (delta, _) = wake_deficit(ct, p.distance, self.rotor_diameter, self.k_w);
            sum_sq[p.downstream] += delta * delta;
        }
        for (v, &s) in self.v_r.iter_mut().zip(&sum_sq) {
            *v = (self.ambient * (1.0 - s.sqrt())).clamp(0.0, self.ambient);
        }
    }

    /// Push each turbine's current thrust coefficient into the delay buffers
    /// and update the effective wind speeds from the delayed samples.
    pub fn advance(&mut self, ct: &[f64]) -> &[f64] {
        assert_eq!(ct.len(), self.n);
        let mut delayed = Vec::with_capacity(self.pairs.len());
        for p in &mut self.pairs {
            p.buffer.push_back(ct[p.upstream]);
            delayed.push(p.buffer.pop_front().unwrap_or(0.0));
        }
        self.recompute(&delayed);
        &self.v_r
    }

    /// Effective speeds without touching the buffers (steady-state query,
    /// used for warm starts).
    pub fn steady(&mut self, ct: &[f64]) -> Vec<f64> {
        let delayed: Vec<f64> = self.pairs.iter().map(|p| ct[p.upstream]).collect();
        self.recompute(&delayed);
        self.v_r.clone()
    }

    /// Reset all delay buffers to a constant C_T.
    pub fn fill_buffers(&mut self, ct: &[f64]) {
        for p in &mut self.pairs {
            let len = p.buffer.len();
            p.buffer.clear();
            p.buffer.extend(std::iter::repeat_n(ct[p.upstream], len));
        }
    }

    pub fn speeds(&self) -> &[f64] {
        &self.v_r
    }
}
