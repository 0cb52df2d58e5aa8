//! Command-line flags. Flags override values from `--config`.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use nvdnp_core::{Component, Recombination};

use crate::commands::CommandKind;
use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

#[derive(Debug, Parser)]
#[command(name = "nvdnp", version, about = "NV-14N dynamic nuclear polarization simulator and estimators")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate the preparation, swap and pump sequence.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        time: TimeArgs,
        /// Gaussian noise added to the populations.
        #[arg(long)]
        noise_sigma: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Steady-state populations over a (B, θ) grid.
    SteadyScan {
        #[command(flatten)]
        common: CommonArgs,
        /// Field list (G).
        #[arg(long, value_delimiter = ',', conflicts_with = "b_range")]
        b_list: Option<Vec<f64>>,
        /// Field range as start,stop,step (G).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        b_range: Option<Vec<f64>>,
        /// Angle list (deg).
        #[arg(long, value_delimiter = ',')]
        theta_list: Option<Vec<f64>>,
    },
    /// Estimate C⊥ from measured traces by χ² scans.
    FitCperp {
        #[command(flatten)]
        common: CommonArgs,
        /// Trace CSV files.
        inputs: Vec<PathBuf>,
        /// Coarse grid as start,stop,step (MHz).
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        c_range: Option<Vec<f64>>,
        /// Refinement as step,halfwidth (MHz).
        #[arg(long, value_delimiter = ',')]
        refine: Option<Vec<f64>>,
        /// Components to fit (plus1, zero).
        #[arg(long, value_delimiter = ',')]
        components: Option<Vec<String>>,
    },
    /// Calibrate B and θ from ODMR lines and steady-state populations.
    Calibrate {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long)]
        nu_plus: Option<f64>,
        #[arg(long)]
        nu_minus: Option<f64>,
        /// CSV with columns [b_gauss,] p_plus1, p_zero.
        #[arg(long)]
        steady_file: Option<PathBuf>,
    },
    /// Rise times versus the pump parameter W.
    PowerScan {
        #[command(flatten)]
        common: CommonArgs,
        #[arg(long, value_delimiter = ',')]
        w_list: Option<Vec<f64>>,
    },
    /// Rise times versus the ionization rate, 24-level model.
    IonizationScan {
        #[command(flatten)]
        common: CommonArgs,
        /// Ionization rates (MHz).
        #[arg(long, value_delimiter = ',')]
        gamma_ion_list: Option<Vec<f64>>,
        /// Fields (G).
        #[arg(long, value_delimiter = ',')]
        b_list: Option<Vec<f64>>,
    },
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML config, or a JSON result record to replay.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// CSV output path; the JSON record is written alongside.
    #[arg(long, short)]
    pub output: Option<PathBuf>,
    /// Worker threads (default: $NVDNP_WORKERS, else all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    #[arg(long)]
    pub b_gauss: Option<f64>,
    #[arg(long)]
    pub theta_deg: Option<f64>,
    /// Excited-state transverse hyperfine (MHz).
    #[arg(long, allow_hyphen_values = true)]
    pub c_perp: Option<f64>,
    /// Pump parameter.
    #[arg(long)]
    pub w: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Ionization rate (MHz).
    #[arg(long)]
    pub gamma_ion: Option<f64>,
    /// Recombination target: uniform or ground_zero_only.
    #[arg(long)]
    pub recombination: Option<String>,
    /// Disable the ε spin-flip family in the pump channel.
    #[arg(long)]
    pub no_pump_leakage: bool,
}

#[derive(Debug, Args)]
pub struct TimeArgs {
    #[arg(long)]
    pub t_start: Option<f64>,
    #[arg(long)]
    pub t_stop: Option<f64>,
    #[arg(long)]
    pub t_count: Option<usize>,
    /// Explicit time list (µs).
    #[arg(long, value_delimiter = ',')]
    pub times: Option<Vec<f64>>,
}

fn set<T>(slot: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *slot = v;
    }
}

impl CommonArgs {
    fn apply(&self, cfg: &mut RunConfig) -> CliResult<()> {
        if self.output.is_some() {
            cfg.output = self.output.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        set(&mut cfg.field.b_gauss, self.b_gauss);
        set(&mut cfg.field.theta_deg, self.theta_deg);
        set(&mut cfg.system.c_perp, self.c_perp);
        set(&mut cfg.rates.w, self.w);
        set(&mut cfg.rates.epsilon, self.epsilon);
        set(&mut cfg.rates.gamma_ion, self.gamma_ion);
        if let Some(r) = &self.recombination {
            cfg.rates.recombination = match r.as_str() {
                "uniform" => Recombination::Uniform,
                "ground_zero_only" => Recombination::GroundZeroOnly,
                other => return Err(CliError::usage(format!("unknown recombination '{other}'"))),
            };
        }
        if self.no_pump_leakage {
            cfg.rates.pump_leakage = false;
        }
        Ok(())
    }
}

fn arity(flag: &str, v: &[f64], n: usize) -> CliResult<()> {
    if v.len() != n {
        return Err(CliError::usage(format!("--{flag} takes {n} comma-separated values, got {}", v.len())));
    }
    Ok(())
}

fn arithmetic(range: &[f64]) -> CliResult<Vec<f64>> {
    arity("b-range", range, 3)?;
    let (a, b, s) = (range[0], range[1], range[2]);
    if !(a.is_finite() && b.is_finite() && s > 0.0 && b >= a) {
        return Err(CliError::usage(format!("range {a},{b},{s} needs start <= stop and step > 0")));
    }
    let n = ((b - a) / s + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| a + s * k as f64).collect())
}

impl Command {
    /// Loads the config file if given and applies flag overrides.
    pub fn resolve(self) -> CliResult<(CommandKind, RunConfig)> {
        let common = match &self {
            Command::Simulate { common, .. }
            | Command::SteadyScan { common, .. }
            | Command::FitCperp { common, .. }
            | Command::Calibrate { common, .. }
            | Command::PowerScan { common, .. }
            | Command::IonizationScan { common, .. } => common,
        };
        let mut cfg = match &common.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        common.apply(&mut cfg)?;
        let kind = match self {
            Command::Simulate { time, noise_sigma, seed, .. } => {
                set(&mut cfg.time.start, time.t_start);
                set(&mut cfg.time.stop, time.t_stop);
                set(&mut cfg.time.count, time.t_count);
                if time.times.is_some() {
                    cfg.time.times = time.times;
                } else if time.t_start.is_some() || time.t_stop.is_some() || time.t_count.is_some() {
                    cfg.time.times = None;
                }
                set(&mut cfg.noise_sigma, noise_sigma);
                set(&mut cfg.seed, seed);
                CommandKind::Simulate
            }
            Command::SteadyScan { b_list, b_range, theta_list, .. } => {
                set(&mut cfg.sweep.b_gauss, b_list);
                if let Some(r) = b_range {
                    cfg.sweep.b_gauss = arithmetic(&r)?;
                }
                set(&mut cfg.sweep.theta_deg, theta_list);
                CommandKind::SteadyScan
            }
            Command::FitCperp { inputs, c_range, refine, components, .. } => {
                if !inputs.is_empty() {
                    cfg.inputs = inputs;
                }
                if let Some(r) = c_range {
                    arity("c-range", &r, 3)?;
                    cfg.scan.c_start_mhz = r[0];
                    cfg.scan.c_stop_mhz = r[1];
                    cfg.scan.c_step_mhz = r[2];
                }
                if let Some(r) = refine {
                    arity("refine", &r, 2)?;
                    cfg.scan.refine_step_mhz = r[0];
                    cfg.scan.refine_halfwidth_mhz = r[1];
                }
                if let Some(c) = components {
                    cfg.scan.components =
                        c.iter().map(|s| s.parse::<Component>()).collect::<Result<_, _>>().map_err(CliError::from)?;
                }
                CommandKind::FitCperp
            }
            Command::Calibrate { nu_plus, nu_minus, steady_file, .. } => {
                if nu_plus.is_some() {
                    cfg.calibration.nu_plus_mhz = nu_plus;
                }
                if nu_minus.is_some() {
                    cfg.calibration.nu_minus_mhz = nu_minus;
                }
                if steady_file.is_some() {
                    cfg.calibration.steady_file = steady_file;
                }
                CommandKind::Calibrate
            }
            Command::PowerScan { w_list, .. } => {
                set(&mut cfg.sweep.w, w_list);
                CommandKind::PowerScan
            }
            Command::IonizationScan { gamma_ion_list, b_list, .. } => {
                set(&mut cfg.sweep.gamma_ion_mhz, gamma_ion_list);
                set(&mut cfg.sweep.ionization_b_gauss, b_list);
                CommandKind::IonizationScan
            }
        };
        Ok((kind, cfg))
    }
}
