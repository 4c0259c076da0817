//! Farm power reference programs: constant de-rate before engagement, then
//! either a constant level, a built-in synthetic ramp-and-hold program, or an
//! externally supplied sample series.

use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::error::{Error, Result};

/// Post-engagement reference shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalKind {
    /// Hold `peak_fraction` of total rated power.
    Constant,
    /// Built-in ramp-and-hold program peaking at `peak_fraction`.
    Synthetic,
    /// Replay samples from `external_path` (CSV `t,value`).
    External,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SignalConfig {
    pub kind: SignalKind,
    /// Pre-engagement level as a fraction of total rated power.
    pub derate_fraction: f64,
    /// Program maximum as a fraction of total rated power.
    pub peak_fraction: f64,
    /// Controllers engage and the program starts here [s].
    pub engage_time: f64,
    pub external_path: Option<PathBuf>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        SignalConfig {
            kind: SignalKind::Synthetic,
            derate_fraction: 0.5,
            peak_fraction: 0.7,
            engage_time: 300.0,
            external_path: None,
        }
    }
}

/// Normalized ramp-and-hold envelope: (time fraction of the post-engagement
/// window, level fraction of the program peak). Starts near the de-rate level
/// to avoid a discontinuity at engagement, touches 1.0 twice, max is exactly
/// 1.0.
const SYNTHETIC_PROGRAM: &[(f64, f64)] = &[
    (0.00, 0.715),
    (0.06, 0.715),
    (0.16, 1.000),
    (0.26, 1.000),
    (0.36, 0.860),
    (0.46, 0.930),
    (0.58, 0.800),
    (0.68, 0.870),
    (0.80, 1.000),
    (0.88, 0.780),
    (1.00, 0.840),
];

/// Evaluable reference signal for one run.
#[derive(Debug, Clone)]
pub struct ReferenceSignal {
    cfg: SignalConfig,
    total_rated: f64,
    duration: f64,
    /// External samples at `ts` spacing starting at the engage time.
    samples: Option<Vec<f64>>,
    ts: f64,
}

impl ReferenceSignal {
    pub fn new(cfg: SignalConfig, total_rated: f64, duration: f64, ts: f64) -> Result<Self> {
        if !(0.0 < cfg.derate_fraction && cfg.derate_fraction <= 1.0) {
            return Err(Error::Config("derate_fraction must be in (0, 1]".into()));
        }
        if !(0.0 < cfg.peak_fraction && cfg.peak_fraction <= 1.0) {
            return Err(Error::Config("peak_fraction must be in (0, 1]".into()));
        }
        if cfg.engage_time < 0.0 || cfg.engage_time > duration {
            return Err(Error::Config("engage_time must lie within the run".into()));
        }
        let samples = match cfg.kind {
            SignalKind::External => {
                let path = cfg.external_path.as_deref().ok_or_else(|| {
                    Error::Config("external signal requires external_path".into())
                })?;
                Some(load_signal_csv(path)?)
            }
            _ => None,
        };
        Ok(ReferenceSignal {
            cfg,
            total_rated,
            duration,
            samples,
            ts,
        })
    }

    pub fn engage_time(&self) -> f64 {
        self.cfg.engage_time
    }

    /// Reference power [W] at time `t`.
    pub fn value(&self, t: f64) -> f64 {
        if t < self.cfg.engage_time {
            return self.cfg.derate_fraction * self.total_rated;
        }
        let peak = self.cfg.peak_fraction * self.total_rated;
        match self.cfg.kind {
            SignalKind::Constant => peak,
            SignalKind::Synthetic => {
                let window = (self.duration - self.cfg.engage_time).max(self.ts);
                let tau = ((t - self.cfg.engage_time) / window).clamp(0.0, 1.0);
                peak * interp_program(tau)
            }
            SignalKind::External => {
                let samples = self.samples.as_ref().expect("loaded in new()");
                let idx = ((t - self.cfg.engage_time) / self.ts).round() as usize;
                samples[idx.min(samples.len() - 1)]
            }
        }
    }
}

fn interp_program(tau: f64) -> f64 {
    let pts = SYNTHETIC_PROGRAM;
    if tau <= pts[0].0 {
        return pts[0].1;
    }
    for w in pts.windows(2) {
        let (t0, l0) = w[0];
        let (t1, l1) = w[1];
        if tau <= t1 {
            return l0 + (l1 - l0) * (tau - t0) / (t1 - t0);
        }
    }
    pts[pts.len() - 1].1
}

/// CSV with a header line, then `t,value` rows. Values are replayed
/// sample-exact by index from engagement.
fn load_signal_csv(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Read {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.chars().next().is_some_and(|c| c.is_alphabetic())) {
            continue;
        }
        let value = line
            .split(',')
            .nth(1)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                msg: format!("bad signal row at line {}", i + 1),
            })?;
        out.push(value);
    }
    if out.is_empty() {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            msg: "signal file contains no samples".into(),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::io::Write;

    fn total_rated() -> f64 {
        9.0 * 5.0e6
    }

    #[test]
    fn derate_level_before_engagement() {
        let r = ReferenceSignal::new(SignalConfig::default(), total_rated(), 1200.0, 0.1).unwrap();
        // 50% of 45 MW
        assert_relative_eq!(r.value(100.0), 22.5e6, epsilon = 1e-6);
        assert_relative_eq!(r.value(0.0), 22.5e6, epsilon = 1e-6);
    }

    #[test]
    fn synthetic_peak_is_seventy_percent() {
        let r = ReferenceSignal::new(SignalConfig::default(), total_rated(), 1200.0, 0.1).unwrap();
        let mut max = 0.0_f64;
        let mut t = 0.0;
        while t <= 1200.0 {
            max = max.max(r.value(t));
            t += 0.1;
        }
        // 70% of 45 MW
        assert_relative_eq!(max, 31.5e6, epsilon = 1.0);
    }

    #[test]
    fn constant_kind_steps_at_engagement() {
        let cfg = SignalConfig {
            kind: SignalKind::Constant,
            ..SignalConfig::default()
        };
        let r = ReferenceSignal::new(cfg, total_rated(), 1200.0, 0.1).unwrap();
        assert_relative_eq!(r.value(299.9), 22.5e6, epsilon = 1e-6);
        assert_relative_eq!(r.value(300.0), 31.5e6, epsilon = 1e-6);
        assert_relative_eq!(r.value(1200.0), 31.5e6, epsilon = 1e-6);
    }

    #[test]
    fn synthetic_is_continuous_at_engagement_within_a_few_percent() {
        let r = ReferenceSignal::new(SignalConfig::default(), total_rated(), 1200.0, 0.1).unwrap();
        let before = r.value(299.9);
        let after = r.value(300.0);
        assert!((after - before).abs() / before < 0.02);
    }

    #[test]
    fn external_replayed_sample_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "t,value").unwrap();
        for (i, v) in [1.0e6, 2.0e6, 3.0e6].iter().enumerate() {
            writeln!(f, "{},{}", i as f64 * 0.1, v).unwrap();
        }
        let cfg = SignalConfig {
            kind: SignalKind::External,
            external_path: Some(path),
            engage_time: 0.0,
            ..SignalConfig::default()
        };
        let r = ReferenceSignal::new(cfg, total_rated(), 10.0, 0.1).unwrap();
        assert_eq!(r.value(0.0), 1.0e6);
        assert_eq!(r.value(0.1), 2.0e6);
        assert_eq!(r.value(0.2), 3.0e6);
        // past the end: last sample holds
        assert_eq!(r.value(5.0), 3.0e6);
    }

    #[test]
    fn invalid_configs_rejected() {
        let bad = SignalConfig {
            derate_fraction: 0.0,
            ..SignalConfig::default()
        };
        assert!(ReferenceSignal::new(bad, total_rated(), 1200.0, 0.1).is_err());
        let missing = SignalConfig {
            kind: SignalKind::External,
            external_path: None,
            ..SignalConfig::default()
        };
        assert!(ReferenceSignal::new(missing, total_rated(), 1200.0, 0.1).is_err());
        let engage_late = SignalConfig {
            engage_time: 2000.0,
            ..SignalConfig::default()
        };
        assert!(ReferenceSignal::new(engage_late, total_rated(), 1200.0, 0.1).is_err());
    }
}
