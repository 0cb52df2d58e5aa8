//! Command implementations. Each command has a typed entry point returning
//! its results, and a table/JSON rendering used by [`run`].

use std::io::Write;
use std::time::Instant;

use nvdnp_core::estimation::CharacteristicTimes;
use nvdnp_core::{
    calibrate_angle, calibrate_field, dnp_sequence, estimate_cperp, rise_times, scan_cperp, steady_populations,
    AngleEstimate, Chi2Scan, CperpEstimate, FieldConfig, NuclearPopulations, PolarizationTrace, SteadyObservation,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::io::{num, opt_num, read_steady, read_trace, Table};
use crate::record::{sidecar_path, ResultRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandKind {
    Simulate,
    SteadyScan,
    FitCperp,
    Calibrate,
    PowerScan,
    IonizationScan,
}

impl CommandKind {
    pub fn name(self) -> &'static str {
        match self {
            CommandKind::Simulate => "simulate",
            CommandKind::SteadyScan => "steady-scan",
            CommandKind::FitCperp => "fit-cperp",
            CommandKind::Calibrate => "calibrate",
            CommandKind::PowerScan => "power-scan",
            CommandKind::IonizationScan => "ionization-scan",
        }
    }
}

/// Rendered output of one command.
#[derive(Debug, Clone)]
pub struct Report {
    pub table: Table,
    pub outputs: serde_json::Value,
    /// Failure raised after partial results were produced.
    pub failure: Option<CliError>,
}

/// Pump-on trace, with Gaussian noise when `noise_sigma > 0`.
pub fn simulate(cfg: &RunConfig) -> CliResult<PolarizationTrace> {
    let times = cfg.time.points()?;
    let mut trace = dnp_sequence(&cfg.system, &cfg.field.config(), &cfg.rates, &times)?;
    if cfg.noise_sigma > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let noise = Normal::new(0.0, cfg.noise_sigma).map_err(|e| CliError::usage(e.to_string()))?;
        for k in 0..trace.len() {
            for v in [&mut trace.p_plus1[k], &mut trace.p_zero[k], &mut trace.p_minus1[k]] {
                *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }
    Ok(trace)
}

fn simulate_report(cfg: &RunConfig) -> CliResult<Report> {
    let trace = simulate(cfg)?;
    let mut table = Table::new(&["t_us", "p_plus1", "p_zero", "p_minus1"])
        .meta("b_gauss", cfg.field.b_gauss)
        .meta("theta_deg", cfg.field.theta_deg)
        .meta("c_perp_mhz", cfg.system.c_perp)
        .meta("noise_sigma", cfg.noise_sigma);
    for k in 0..trace.len() {
        table.push(vec![num(trace.times[k]), num(trace.p_plus1[k]), num(trace.p_zero[k]), num(trace.p_minus1[k])]);
    }
    let outputs = json!({ "points": trace.len() });
    Ok(Report { table, outputs, failure: None })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SteadyRow {
    pub b_gauss: f64,
    pub theta_deg: f64,
    pub populations: NuclearPopulations,
}

/// Steady states over the sweep grid, sorted by `(θ, B)`.
pub fn steady_scan(cfg: &RunConfig) -> CliResult<Vec<SteadyRow>> {
    let s = &cfg.sweep;
    if s.b_gauss.is_empty() || s.theta_deg.is_empty() {
        return Err(CliError::usage("steady-scan needs at least one field and one angle"));
    }
    let mut points: Vec<(f64, f64)> =
        s.theta_deg.iter().flat_map(|&t| s.b_gauss.iter().map(move |&b| (t, b))).collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    for &(t, b) in &points {
        FieldConfig::new(b, t).validate()?;
    }
    points
        .par_iter()
        .map(|&(t, b)| {
            let populations = steady_populations(&cfg.system, &FieldConfig::new(b, t), &cfg.rates)
                .map_err(|e| CliError::from(e).context(format!("B = {b} G, theta = {t} deg")))?;
            Ok(SteadyRow { b_gauss: b, theta_deg: t, populations })
        })
        .collect()
}

fn steady_report(cfg: &RunConfig) -> CliResult<Report> {
    let rows = steady_scan(cfg)?;
    let mut table = Table::new(&["b_gauss", "theta_deg", "p_plus1", "p_zero", "p_minus1"]);
    for r in &rows {
        let p = r.populations;
        table.push(vec![num(r.b_gauss), num(r.theta_deg), num(p.p_plus1), num(p.p_zero), num(p.p_minus1)]);
    }
    Ok(Report { table, outputs: json!({ "rows": rows.len() }), failure: None })
}

/// χ² scans for every input file and component, and their pooled estimate.
pub fn fit_cperp(cfg: &RunConfig) -> CliResult<(Vec<Chi2Scan>, nvdnp_core::Result<CperpEstimate>)> {
    if cfg.inputs.is_empty() {
        return Err(CliError::usage("fit-cperp needs at least one trace file"));
    }
    if cfg.scan.components.is_empty() {
        return Err(CliError::usage("no components selected"));
    }
    let traces = cfg.inputs.iter().map(|p| read_trace(p)).collect::<CliResult<Vec<_>>>()?;
    let grid = cfg.scan.grid();
    let mut scans = Vec::new();
    for (trace, path) in traces.iter().zip(&cfg.inputs) {
        let s = scan_cperp(trace, &cfg.system, &cfg.rates, &grid, &cfg.scan.components)
            .map_err(|e| CliError::from(e).context(path.display()))?;
        scans.extend(s);
    }
    let estimate = estimate_cperp(&scans);
    Ok((scans, estimate))
}

fn fit_report(cfg: &RunConfig) -> CliResult<Report> {
    let (scans, estimate) = fit_cperp(cfg)?;
    let mut table = Table::new(&["file", "b_gauss", "theta_deg", "component", "c_perp_mhz", "chi2", "error"]);
    let per_file = cfg.scan.components.len();
    for (k, s) in scans.iter().enumerate() {
        let file = cfg.inputs[k / per_file].display().to_string();
        for p in &s.points {
            table.push(vec![
                file.clone(),
                num(s.field.b_gauss),
                num(s.field.theta_deg),
                s.component.name().to_string(),
                num(p.c_perp),
                opt_num(p.chi2),
                p.error.clone().unwrap_or_default(),
            ]);
        }
    }
    Ok(match estimate {
        Ok(est) => {
            table = table
                .meta("c_perp_best_mhz", est.c_perp_best)
                .meta("uncertainty_mhz", est.uncertainty)
                .meta("standard_error_mhz", est.standard_error);
            let outputs = json!({
                "c_perp_best_mhz": est.c_perp_best,
                "uncertainty_mhz": est.uncertainty,
                "standard_error_mhz": est.standard_error,
                "uncertainty_note": "statistical, conditional on the rate table",
                "per_scan": est.per_scan,
            });
            Report { table, outputs, failure: None }
        }
        Err(e) => {
            let failure = CliError::from(e);
            Report { table, outputs: json!({ "scans": scans.len() }), failure: Some(failure) }
        }
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Calibration {
    pub stage1: Option<FieldConfig>,
    pub stage2: Option<AngleEstimate>,
    /// Calibrated field magnitude, when one is determined.
    pub b_gauss: Option<f64>,
    pub theta_deg: f64,
    /// `"stage1"` or `"stage2"`.
    pub theta_source: &'static str,
}

/// Field magnitude and angle from ODMR lines, refined by steady-state
/// populations when a steady file is given.
pub fn calibrate(cfg: &RunConfig) -> CliResult<Calibration> {
    let c = &cfg.calibration;
    let stage1 = match (c.nu_plus_mhz, c.nu_minus_mhz) {
        (Some(p), Some(m)) => Some(calibrate_field(p, m, &cfg.system).map_err(|e| match e {
            nvdnp_core::Error::InvalidParameter(m) => CliError::usage(m),
            other => other.into(),
        })?),
        (None, None) => None,
        _ => return Err(CliError::usage("nu_plus and nu_minus must be given together")),
    };
    let stage2 = match &c.steady_file {
        Some(path) => {
            let rows = read_steady(path)?;
            let data = rows
                .iter()
                .map(|r| {
                    let b = r.b_gauss.or(stage1.map(|f| f.b_gauss)).ok_or_else(|| {
                        CliError::usage(format!("{}: rows without b_gauss need nu_plus/nu_minus", path.display()))
                    })?;
                    Ok(SteadyObservation { b_gauss: b, p_plus1: r.p_plus1, p_zero: r.p_zero })
                })
                .collect::<CliResult<Vec<_>>>()?;
            Some(calibrate_angle(&data, &cfg.system, &cfg.rates)?)
        }
        None => None,
    };
    if stage1.is_none() && stage2.is_none() {
        return Err(CliError::usage("calibrate needs nu_plus/nu_minus, a steady_file, or both"));
    }
    let (theta_deg, theta_source) = match (&stage2, &stage1) {
        (Some(a), _) => (a.theta_deg, "stage2"),
        (None, Some(f)) => (f.theta_deg, "stage1"),
        (None, None) => unreachable!(),
    };
    Ok(Calibration { stage1, b_gauss: stage1.map(|f| f.b_gauss), stage2, theta_deg, theta_source })
}

fn calibrate_report(cfg: &RunConfig) -> CliResult<Report> {
    let cal = calibrate(cfg)?;
    let mut table = Table::new(&["stage", "b_gauss", "theta_deg", "chi2"]);
    if let Some(f) = cal.stage1 {
        table.push(vec!["stage1".into(), num(f.b_gauss), num(f.theta_deg), String::new()]);
    }
    if let Some(a) = &cal.stage2 {
        table.push(vec!["stage2".into(), opt_num(cal.b_gauss), num(a.theta_deg), num(a.chi2)]);
    }
    table.push(vec!["final".into(), opt_num(cal.b_gauss), num(cal.theta_deg), String::new()]);
    let outputs = serde_json::to_value(&cal)?;
    Ok(Report { table, outputs, failure: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PowerRow {
    pub w: f64,
    pub times: CharacteristicTimes,
}

/// Rise times over the pump-parameter grid.
pub fn power_scan(cfg: &RunConfig) -> CliResult<Vec<PowerRow>> {
    if cfg.sweep.w.is_empty() {
        return Err(CliError::usage("power-scan needs at least one W value"));
    }
    if let Some(w) = cfg.sweep.w.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
        return Err(CliError::usage(format!("W = {w} must be positive")));
    }
    let f = cfg.field.config();
    cfg.sweep
        .w
        .par_iter()
        .map(|&w| {
            let times = rise_times(&cfg.system, &f, &cfg.rates.with_pump(w))
                .map_err(|e| CliError::from(e).context(format!("W = {w}")))?;
            Ok(PowerRow { w, times })
        })
        .collect()
}

fn power_report(cfg: &RunConfig) -> CliResult<Report> {
    let rows = power_scan(cfg)?;
    let mut table = Table::new(&["w", "tau_plus1_us", "tau_zero_us", "tau_minus1_us", "window_us"])
        .meta("b_gauss", cfg.field.b_gauss)
        .meta("theta_deg", cfg.field.theta_deg);
    for r in &rows {
        let t = &r.times;
        table.push(vec![
            num(r.w),
            num(t.plus1.tau),
            opt_num(t.zero.as_ref().map(|f| f.tau)),
            opt_num(t.minus1.as_ref().map(|f| f.tau)),
            num(t.window_us),
        ]);
    }
    Ok(Report { table, outputs: json!({ "rows": rows }), failure: None })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IonizationRow {
    pub gamma_ion_mhz: f64,
    pub b_gauss: f64,
    pub tau_plus1_us: f64,
    pub window_us: f64,
}

/// Rise times over ionization rates and fields at the configured angle.
/// Γ_I = 0 runs the 21-level model.
pub fn ionization_scan(cfg: &RunConfig) -> CliResult<Vec<IonizationRow>> {
    let s = &cfg.sweep;
    if s.gamma_ion_mhz.is_empty() || s.ionization_b_gauss.is_empty() {
        return Err(CliError::usage("ionization-scan needs at least one rate and one field"));
    }
    if let Some(g) = s.gamma_ion_mhz.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(CliError::usage(format!("gamma_ion = {g} MHz must be >= 0")));
    }
    let points: Vec<(f64, f64)> =
        s.ionization_b_gauss.iter().flat_map(|&b| s.gamma_ion_mhz.iter().map(move |&g| (g, b))).collect();
    points
        .par_iter()
        .map(|&(g, b)| {
            let f = FieldConfig::new(b, cfg.field.theta_deg);
            let t = rise_times(&cfg.system, &f, &cfg.rates.with_ionization(g))
                .map_err(|e| CliError::from(e).context(format!("gamma_ion = {g} MHz, B = {b} G")))?;
            Ok(IonizationRow { gamma_ion_mhz: g, b_gauss: b, tau_plus1_us: t.plus1.tau, window_us: t.window_us })
        })
        .collect()
}

fn ionization_report(cfg: &RunConfig) -> CliResult<Report> {
    let rows = ionization_scan(cfg)?;
    let mut table = Table::new(&["gamma_ion_mhz", "b_gauss", "tau_plus1_us", "window_us"])
        .meta("theta_deg", cfg.field.theta_deg);
    for r in &rows {
        table.push(vec![num(r.gamma_ion_mhz), num(r.b_gauss), num(r.tau_plus1_us), num(r.window_us)]);
    }
    Ok(Report { table, outputs: json!({ "rows": rows }), failure: None })
}

pub fn execute(kind: CommandKind, cfg: &RunConfig) -> CliResult<Report> {
    match kind {
        CommandKind::Simulate => simulate_report(cfg),
        CommandKind::SteadyScan => steady_report(cfg),
        CommandKind::FitCperp => fit_report(cfg),
        CommandKind::Calibrate => calibrate_report(cfg),
        CommandKind::PowerScan => power_report(cfg),
        CommandKind::IonizationScan => ionization_report(cfg),
    }
}

/// Validates the config, runs the command on a pool of the configured size
/// and writes the CSV plus its JSON record. Without an output path the CSV
/// goes to stdout and the record to stderr.
pub fn run(kind: CommandKind, mut cfg: RunConfig) -> CliResult<ResultRecord> {
    cfg.validate()?;
    let workers = cfg.resolve_workers()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::usage(format!("thread pool: {e}")))?;
    let start = Instant::now();
    let report = pool.install(|| execute(kind, &cfg))?;
    let mut record = ResultRecord::new(kind.name(), cfg.clone(), report.outputs, start.elapsed().as_secs_f64());
    record.error = report.failure.as_ref().map(|e| e.to_string());
    match &cfg.output {
        Some(path) => {
            report.table.write(path)?;
            std::fs::write(sidecar_path(path), record.to_json()?)?;
        }
        None => {
            std::io::stdout().write_all(&report.table.to_bytes()?)?;
            eprintln!("{}", record.to_json()?);
        }
    }
    match report.failure {
        Some(e) => Err(e),
        None => Ok(record),
    }
}
