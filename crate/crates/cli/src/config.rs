//! Run configuration. Every section has defaults, so a config file only
//! lists what it changes; command-line flags are applied on top.

use std::path::{Path, PathBuf};

use nvdnp_core::{Component, FieldConfig, RateModel, ScanGrid, SystemParams};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::record::ResultRecord;

/// Environment variable holding the default worker count.
pub const WORKERS_ENV: &str = "NVDNP_WORKERS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub system: SystemParams,
    pub field: FieldSection,
    pub rates: RateModel,
    pub time: TimeGrid,
    pub scan: ScanSection,
    pub sweep: SweepSection,
    pub calibration: CalibrationSection,
    /// Trace files for `fit-cperp`.
    pub inputs: Vec<PathBuf>,
    /// CSV output; the JSON record goes next to it.
    pub output: Option<PathBuf>,
    pub workers: Option<usize>,
    pub seed: u64,
    /// Gaussian noise added to simulated traces.
    pub noise_sigma: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            system: SystemParams::default(),
            field: FieldSection::default(),
            rates: RateModel::default(),
            time: TimeGrid::default(),
            scan: ScanSection::default(),
            sweep: SweepSection::default(),
            calibration: CalibrationSection::default(),
            inputs: Vec::new(),
            output: None,
            workers: None,
            seed: 0,
            noise_sigma: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FieldSection {
    pub b_gauss: f64,
    pub theta_deg: f64,
}

impl Default for FieldSection {
    fn default() -> Self {
        FieldSection { b_gauss: 348.0, theta_deg: 1.5 }
    }
}

impl FieldSection {
    pub fn config(&self) -> FieldConfig {
        FieldConfig::new(self.b_gauss, self.theta_deg)
    }
}

/// Pump-time grid (µs): `count` uniform points on `[start, stop]`, or an
/// explicit list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeGrid {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
    pub times: Option<Vec<f64>>,
}

impl Default for TimeGrid {
    fn default() -> Self {
        TimeGrid { start: 0.0, stop: 20.0, count: 50, times: None }
    }
}

impl TimeGrid {
    pub fn points(&self) -> CliResult<Vec<f64>> {
        let pts = match &self.times {
            Some(t) => t.clone(),
            None => {
                if !(self.start.is_finite() && self.stop.is_finite()) || self.start < 0.0 || self.stop < self.start {
                    return Err(CliError::usage(format!(
                        "time grid [{}, {}] us must satisfy 0 <= start <= stop",
                        self.start, self.stop
                    )));
                }
                match self.count {
                    0 => Vec::new(),
                    1 => vec![self.start],
                    n => (0..n)
                        .map(|k| self.start + (self.stop - self.start) * k as f64 / (n - 1) as f64)
                        .collect(),
                }
            }
        };
        if pts.is_empty() {
            return Err(CliError::usage("time grid has no points"));
        }
        if pts.iter().any(|t| !t.is_finite() || *t < 0.0) || pts.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CliError::usage("time grid must be finite, >= 0 and strictly increasing"));
        }
        Ok(pts)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanSection {
    pub c_start_mhz: f64,
    pub c_stop_mhz: f64,
    pub c_step_mhz: f64,
    pub refine_step_mhz: f64,
    pub refine_halfwidth_mhz: f64,
    pub components: Vec<Component>,
}

impl Default for ScanSection {
    fn default() -> Self {
        let g = ScanGrid::default();
        ScanSection {
            c_start_mhz: g.start,
            c_stop_mhz: g.stop,
            c_step_mhz: g.step,
            refine_step_mhz: g.refine_step,
            refine_halfwidth_mhz: g.refine_halfwidth,
            components: Component::ALL.to_vec(),
        }
    }
}

impl ScanSection {
    pub fn grid(&self) -> ScanGrid {
        ScanGrid {
            start: self.c_start_mhz,
            stop: self.c_stop_mhz,
            step: self.c_step_mhz,
            refine_step: self.refine_step_mhz,
            refine_halfwidth: self.refine_halfwidth_mhz,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    /// Fields for `steady-scan` (G).
    pub b_gauss: Vec<f64>,
    /// Angles for `steady-scan` (deg).
    pub theta_deg: Vec<f64>,
    /// Pump parameters for `power-scan`.
    pub w: Vec<f64>,
    /// Ionization rates for `ionization-scan` (MHz).
    pub gamma_ion_mhz: Vec<f64>,
    /// Fields for `ionization-scan` (G).
    pub ionization_b_gauss: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            b_gauss: (0..=32).map(|k| 200.0 + 10.0 * k as f64).collect(),
            theta_deg: vec![0.0, 1.0, 1.5, 2.0, 2.5, 3.0],
            w: vec![0.01, 0.02, 0.05, 0.1, 0.2, 0.5, 1.0],
            gamma_ion_mhz: vec![0.0, 1.0, 5.0, 10.0, 20.0],
            ionization_b_gauss: vec![150.0, 450.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationSection {
    pub nu_plus_mhz: Option<f64>,
    pub nu_minus_mhz: Option<f64>,
    /// CSV of steady-state populations for the angle refinement.
    pub steady_file: Option<PathBuf>,
}

impl RunConfig {
    /// Reads a TOML config, or the `config` echoed in a JSON result record.
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::usage(format!("cannot read config {}: {e}", path.display())))?;
        if path.extension().is_some_and(|e| e == "json") {
            let record: ResultRecord = serde_json::from_str(&text)
                .map_err(|e| CliError::usage(format!("{}: {e}", path.display())))?;
            return Ok(record.config);
        }
        toml::from_str(&text).map_err(|e| CliError::usage(format!("{}: {e}", path.display())))
    }

    /// Worker count: explicit setting, then the environment, then all cores.
    pub fn resolve_workers(&mut self) -> CliResult<usize> {
        let n = match self.workers {
            Some(n) => n,
            None => match std::env::var(WORKERS_ENV) {
                Ok(v) => v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::usage(format!("{WORKERS_ENV}={v} is not a worker count")))?,
                Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
            },
        };
        if n == 0 {
            return Err(CliError::usage("worker count must be positive"));
        }
        self.workers = Some(n);
        Ok(n)
    }

    pub fn validate(&self) -> CliResult<()> {
        self.system.validate().map_err(|e| CliError::usage(format!("[system] {e}")))?;
        self.field.config().validate().map_err(|e| CliError::usage(format!("[field] {e}")))?;
        self.rates.validate().map_err(|e| CliError::usage(format!("[rates] {e}")))?;
        self.scan.grid().validate().map_err(|e| CliError::usage(format!("[scan] {e}")))?;
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(CliError::usage(format!("noise_sigma = {} must be >= 0", self.noise_sigma)));
        }
        if self.workers == Some(0) {
            return Err(CliError::usage("worker count must be positive"));
        }
        Ok(())
    }
}
