//! Inference on top of the forward model: χ² scans over C⊥, pooled C⊥
//! estimates, field calibration from ODMR lines, angle refinement from
//! steady-state populations, and rise-time extraction.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cubic::solve_cubic;
use crate::dissipator::RateModel;
use crate::error::{Error, Result};
use crate::evolution::{steady_populations, DnpModel, NuclearPopulations, PolarizationTrace};
use crate::fit::{fit_exponential, ExpFit};
use crate::hamiltonian::{FieldConfig, SystemParams, MAX_CALIBRATION_FIELD};

/// Nuclear component used as the fit observable. m_I = −1 is not offered:
/// its readout amplitude is too small to be informative.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Component {
    Plus1,
    Zero,
}

impl Component {
    pub const ALL: [Component; 2] = [Component::Plus1, Component::Zero];

    pub fn name(self) -> &'static str {
        match self {
            Component::Plus1 => "plus1",
            Component::Zero => "zero",
        }
    }

    pub fn of(self, p: &NuclearPopulations) -> f64 {
        match self {
            Component::Plus1 => p.p_plus1,
            Component::Zero => p.p_zero,
        }
    }
}

impl std::str::FromStr for Component {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "plus1" | "+1" | "p_plus1" => Ok(Component::Plus1),
            "zero" | "0" | "p_zero" => Ok(Component::Zero),
            other => Err(Error::InvalidParameter(format!("unknown component '{other}' (plus1 | zero)"))),
        }
    }
}

/// Measured relative populations after a pump interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentTrace {
    pub field: FieldConfig,
    /// µs, strictly increasing.
    pub times: Vec<f64>,
    pub p_plus1: Vec<f64>,
    pub p_zero: Vec<f64>,
    /// Per-point uncertainty; `None` weights points uniformly.
    pub sigma: Option<Vec<f64>>,
}

impl ExperimentTrace {
    /// Builds a trace, ordering points by time.
    pub fn new(
        field: FieldConfig,
        times: Vec<f64>,
        p_plus1: Vec<f64>,
        p_zero: Vec<f64>,
        sigma: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = times.len();
        if p_plus1.len() != n || p_zero.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: p_plus1.len().min(p_zero.len()) });
        }
        if let Some(s) = &sigma {
            if s.len() != n {
                return Err(Error::DimensionMismatch { expected: n, found: s.len() });
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
        let pick = |v: &[f64]| order.iter().map(|&k| v[k]).collect::<Vec<_>>();
        let trace = ExperimentTrace {
            field,
            times: pick(&times),
            p_plus1: pick(&p_plus1),
            p_zero: pick(&p_zero),
            sigma: sigma.as_deref().map(pick),
        };
        trace.validate()?;
        Ok(trace)
    }

    /// Noise-free trace from a simulation.
    pub fn from_simulation(field: FieldConfig, trace: &PolarizationTrace) -> Result<Self> {
        Self::new(field, trace.times.clone(), trace.p_plus1.clone(), trace.p_zero.clone(), None)
    }

    pub fn validate(&self) -> Result<()> {
        self.field.validate()?;
        if self.times.is_empty() {
            return Err(Error::DegenerateData("trace has no points".into()));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if w[1] <= w[0] {
                return Err(Error::DegenerateData(format!(
                    "times not strictly increasing at point {} ({} -> {} us)",
                    k + 1,
                    w[0],
                    w[1]
                )));
            }
        }
        if let Some(&t) = self.times.iter().find(|t| !t.is_finite() || **t < 0.0) {
            return Err(Error::DegenerateData(format!("time {t} us must be finite and >= 0")));
        }
        for (name, v) in [("p_plus1", &self.p_plus1), ("p_zero", &self.p_zero)] {
            if let Some(k) = v.iter().position(|p| !(0.0..=1.0).contains(p)) {
                return Err(Error::DegenerateData(format!("{name} = {} outside [0, 1] at point {k}", v[k])));
            }
        }
        if let Some(s) = &self.sigma {
            if let Some(k) = s.iter().position(|x| !(x.is_finite() && *x > 0.0)) {
                return Err(Error::DegenerateData(format!("sigma = {} must be positive at point {k}", s[k])));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn values(&self, c: Component) -> &[f64] {
        match c {
            Component::Plus1 => &self.p_plus1,
            Component::Zero => &self.p_zero,
        }
    }

    /// Mean squared weighted residual of `model` against component `c`.
    pub fn chi2(&self, model: &PolarizationTrace, c: Component) -> Result<f64> {
        if model.times.len() != self.len() {
            return Err(Error::DimensionMismatch { expected: self.len(), found: model.times.len() });
        }
        let predicted = match c {
            Component::Plus1 => &model.p_plus1,
            Component::Zero => &model.p_zero,
        };
        let data = self.values(c);
        let sum: f64 = (0..self.len())
            .map(|k| {
                let s = self.sigma.as_ref().map_or(1.0, |s| s[k]);
                ((predicted[k] - data[k]) / s).powi(2)
            })
            .sum();
        Ok(sum / self.len() as f64)
    }
}

/// One grid point of a χ² scan. Failed simulations keep their message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    pub c_perp: f64,
    pub chi2: Option<f64>,
    pub error: Option<String>,
}

/// χ²(C⊥) for one trace and one component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Scan {
    pub field: FieldConfig,
    pub component: Component,
    /// Number of data points behind each χ² value.
    pub n_points: usize,
    /// Sorted by `c_perp`.
    pub points: Vec<ScanPoint>,
}

impl Chi2Scan {
    pub fn valid(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.points.iter().filter_map(|p| p.chi2.map(|c| (p.c_perp, c)))
    }

    /// Valid grid point with the smallest χ².
    pub fn discrete_minimum(&self) -> Option<(f64, f64)> {
        self.valid().min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// C⊥ grid: a uniform coarse pass, refined around each coarse minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
    pub refine_step: f64,
    pub refine_halfwidth: f64,
}

impl Default for ScanGrid {
    fn default() -> Self {
        ScanGrid { start: -45.0, stop: -5.0, step: 1.0, refine_step: 0.25, refine_halfwidth: 3.0 }
    }
}

impl ScanGrid {
    pub fn validate(&self) -> Result<()> {
        let ok = self.start.is_finite()
            && self.stop.is_finite()
            && self.start < self.stop
            && self.step > 0.0
            && self.refine_step > 0.0
            && self.refine_halfwidth >= 0.0;
        if !ok {
            return Err(Error::InvalidParameter(format!("invalid C_perp scan grid {self:?}")));
        }
        Ok(())
    }

    fn arithmetic(start: f64, stop: f64, step: f64) -> Vec<f64> {
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        (0..=n).map(|k| start + step * k as f64).collect()
    }

    pub fn coarse(&self) -> Vec<f64> {
        Self::arithmetic(self.start, self.stop, self.step)
    }

    /// Fine points within `refine_halfwidth` of `center`, clipped to the
    /// coarse range.
    pub fn refinement(&self, center: f64) -> Vec<f64> {
        Self::arithmetic(center - self.refine_halfwidth, center + self.refine_halfwidth, self.refine_step)
            .into_iter()
            .filter(|c| (self.start..=self.stop).contains(c))
            .collect()
    }
}

fn simulate_for(data: &ExperimentTrace, p: &SystemParams, r: &RateModel, c_perp: f64) -> Result<PolarizationTrace> {
    DnpModel::new(&p.with_c_perp(c_perp), &data.field, r)?.trace(&data.times)
}

/// Evaluates χ² for several components from one simulation per grid point.
pub fn chi2_scan_components(
    data: &ExperimentTrace,
    p: &SystemParams,
    r: &RateModel,
    c_grid: &[f64],
    components: &[Component],
) -> Result<Vec<Chi2Scan>> {
    if c_grid.is_empty() {
        return Err(Error::Precondition("C_perp grid is empty".into()));
    }
    if components.is_empty() {
        return Err(Error::Precondition("no component selected".into()));
    }
    if let Some(c) = c_grid.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("C_perp grid value {c}")));
    }
    data.validate()?;
    r.validate()?;
    let mut grid = c_grid.to_vec();
    grid.sort_by(|a, b| a.total_cmp(b));
    grid.dedup();
    let evaluated: Vec<Vec<ScanPoint>> = grid
        .par_iter()
        .map(|&c| {
            let sim = simulate_for(data, p, r, c);
            components
                .iter()
                .map(|&comp| match sim.as_ref().map_err(Clone::clone).and_then(|s| data.chi2(s, comp)) {
                    Ok(chi2) => ScanPoint { c_perp: c, chi2: Some(chi2), error: None },
                    Err(e) => ScanPoint { c_perp: c, chi2: None, error: Some(e.to_string()) },
                })
                .collect()
        })
        .collect();
    Ok(components
        .iter()
        .enumerate()
        .map(|(k, &component)| Chi2Scan {
            field: data.field,
            component,
            n_points: data.len(),
            points: evaluated.iter().map(|row| row[k].clone()).collect(),
        })
        .collect())
}

/// χ²(C⊥) against one component over `c_grid`.
pub fn chi2_scan(
    data: &ExperimentTrace,
    p: &SystemParams,
    r: &RateModel,
    c_grid: &[f64],
    component: Component,
) -> Result<Vec<ScanPoint>> {
    Ok(chi2_scan_components(data, p, r, c_grid, &[component])?.remove(0).points)
}

/// Coarse scan followed by refinement around each component's minimum.
pub fn scan_cperp(
    data: &ExperimentTrace,
    p: &SystemParams,
    r: &RateModel,
    grid: &ScanGrid,
    components: &[Component],
) -> Result<Vec<Chi2Scan>> {
    grid.validate()?;
    let coarse = grid.coarse();
    let mut scans = chi2_scan_components(data, p, r, &coarse, components)?;
    let windows: Vec<Option<f64>> = scans.iter().map(|s| s.discrete_minimum().map(|m| m.0)).collect();
    let mut extra: Vec<f64> = windows
        .iter()
        .flatten()
        .flat_map(|&c| grid.refinement(c))
        .filter(|c| !coarse.iter().any(|g| (g - c).abs() < 1e-9))
        .collect();
    extra.sort_by(|a, b| a.total_cmp(b));
    extra.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
    if extra.is_empty() {
        return Ok(scans);
    }
    let fine = chi2_scan_components(data, p, r, &extra, components)?;
    for ((scan, fine), center) in scans.iter_mut().zip(fine).zip(windows) {
        let Some(center) = center else { continue };
        scan.points.extend(
            fine.points
                .into_iter()
                .filter(|pt| (pt.c_perp - center).abs() <= grid.refine_halfwidth + 1e-9),
        );
        scan.points.sort_by(|a, b| a.c_perp.total_cmp(&b.c_perp));
    }
    Ok(scans)
}

/// Half-width (MHz) of the window used for the local quartic fit.
pub const QUARTIC_WINDOW: f64 = 6.0;
const MIN_WIDTH: f64 = 1e-6;

/// Continuum minimum of one scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanMinimum {
    pub field: FieldConfig,
    pub component: Component,
    pub c_perp: f64,
    /// Curvature-based 1σ width (MHz).
    pub width: f64,
    pub chi2_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CperpEstimate {
    /// Inverse-variance weighted mean of the per-scan minimizers (MHz).
    pub c_perp_best: f64,
    /// Weighted standard deviation of the minimizers; the single-scan width
    /// when only one scan is pooled. Statistical, conditional on the rate
    /// table.
    pub uncertainty: f64,
    /// `1/sqrt(Σ w)`.
    pub standard_error: f64,
    pub per_scan: Vec<ScanMinimum>,
    pub scans: Vec<Chi2Scan>,
}

/// Least-squares polynomial coefficients (ascending powers).
fn polyfit(x: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let v = DMatrix::from_fn(x.len(), degree + 1, |i, j| x[i].powi(j as i32));
    let rhs = DVector::from_column_slice(y);
    let c = v
        .svd(true, true)
        .solve(&rhs, 1e-13)
        .map_err(|e| Error::Singular(format!("polynomial fit: {e}")))?;
    Ok(c.iter().copied().collect())
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &k| acc * x + k)
}

fn poly_deriv(c: &[f64]) -> Vec<f64> {
    c.iter().enumerate().skip(1).map(|(k, &v)| k as f64 * v).collect()
}

/// Quartic fit around the discrete minimum of one scan.
pub fn scan_minimum(scan: &Chi2Scan) -> Result<ScanMinimum> {
    let pts: Vec<(f64, f64)> = scan.valid().collect();
    let (c_min, _) = scan
        .discrete_minimum()
        .ok_or_else(|| Error::DegenerateData("scan has no valid grid points".into()))?;
    let lo = pts.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = pts.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if c_min <= lo || c_min >= hi {
        return Err(Error::BoundaryMinimum { value: c_min });
    }
    let window: Vec<(f64, f64)> =
        pts.iter().copied().filter(|p| (p.0 - c_min).abs() <= QUARTIC_WINDOW + 1e-9).collect();
    let degree = match window.len() {
        n if n >= 5 => 4,
        n if n >= 3 => 2,
        n => return Err(Error::DegenerateData(format!("{n} points near the scan minimum"))),
    };
    // work in x = (C⊥ − c_min)/W for conditioning
    let x: Vec<f64> = window.iter().map(|p| (p.0 - c_min) / QUARTIC_WINDOW).collect();
    let y: Vec<f64> = window.iter().map(|p| p.1).collect();
    let coef = polyfit(&x, &y, degree)?;
    let d1 = poly_deriv(&coef);
    let d2 = poly_deriv(&d1);
    let (x_lo, x_hi) = (x.iter().copied().fold(f64::INFINITY, f64::min), x.iter().copied().fold(f64::NEG_INFINITY, f64::max));
    let n_probe = 2000;
    let mut best = x_lo;
    for k in 0..=n_probe {
        let t = x_lo + (x_hi - x_lo) * k as f64 / n_probe as f64;
        if poly(&coef, t) < poly(&coef, best) {
            best = t;
        }
    }
    for _ in 0..50 {
        let curv = poly(&d2, best);
        if curv <= 0.0 {
            break;
        }
        let next = (best - poly(&d1, best) / curv).clamp(x_lo, x_hi);
        let done = (next - best).abs() < 1e-14;
        best = next;
        if done {
            break;
        }
    }
    let curvature = poly(&d2, best) / (QUARTIC_WINDOW * QUARTIC_WINDOW);
    if !(curvature > 0.0) {
        return Err(Error::DegenerateData(format!(
            "chi2 curve not convex near C_perp = {c_min} MHz (curvature {curvature:e})"
        )));
    }
    let chi2_min = poly(&coef, best).max(0.0);
    let n = scan.n_points.max(2) as f64;
    let s2 = n * chi2_min / (n - 1.0);
    let width = (2.0 * s2 / (n * curvature)).sqrt().max(MIN_WIDTH);
    Ok(ScanMinimum {
        field: scan.field,
        component: scan.component,
        c_perp: c_min + best * QUARTIC_WINDOW,
        width,
        chi2_min,
    })
}

/// Pools per-scan minimizers by inverse-variance weighting.
pub fn estimate_cperp(scans: &[Chi2Scan]) -> Result<CperpEstimate> {
    if scans.is_empty() {
        return Err(Error::Precondition("no scans to pool".into()));
    }
    let per_scan = scans.iter().map(scan_minimum).collect::<Result<Vec<_>>>()?;
    let w: Vec<f64> = per_scan.iter().map(|m| 1.0 / (m.width * m.width)).collect();
    let sw: f64 = w.iter().sum();
    let mean = per_scan.iter().zip(&w).map(|(m, w)| w * m.c_perp).sum::<f64>() / sw;
    let uncertainty = if per_scan.len() >= 2 {
        (per_scan.iter().zip(&w).map(|(m, w)| w * (m.c_perp - mean).powi(2)).sum::<f64>() / sw).sqrt()
    } else {
        per_scan[0].width
    };
    Ok(CperpEstimate {
        c_perp_best: mean,
        uncertainty,
        standard_error: sw.sqrt().recip(),
        per_scan,
        scans: scans.to_vec(),
    })
}

/// Resolution (MHz) of the field calibration.
pub const FREQUENCY_TOL: f64 = 1e-6;

/// Inverts the ground-state transition frequencies `(ν+, ν−)` for `(B, θ)`.
///
/// Newton iteration runs in `(B, u = sin²θ)`, where the Jacobian stays
/// regular at θ = 0. Root derivatives follow implicitly from the cubic.
pub fn calibrate_field(nu_plus: f64, nu_minus: f64, p: &SystemParams) -> Result<FieldConfig> {
    let (d, g) = (p.d_g, p.gamma_e);
    let band = (d - g * MAX_CALIBRATION_FIELD, d + g * MAX_CALIBRATION_FIELD);
    if !(nu_plus.is_finite() && nu_minus.is_finite()) {
        return Err(Error::InvalidParameter("transition frequencies must be finite".into()));
    }
    if nu_plus <= nu_minus {
        return Err(Error::InvalidParameter(format!(
            "nu_plus = {nu_plus} MHz must exceed nu_minus = {nu_minus} MHz"
        )));
    }
    for nu in [nu_plus, nu_minus] {
        if !(band.0..=band.1).contains(&nu) {
            return Err(Error::InvalidParameter(format!(
                "transition {nu} MHz outside [{:.1}, {:.1}] MHz",
                band.0, band.1
            )));
        }
    }
    let b0 = (nu_plus - nu_minus) / (2.0 * g);
    let offset = 0.5 * (nu_plus + nu_minus) - d;
    if offset.abs() <= FREQUENCY_TOL {
        return Ok(FieldConfig::new(b0, 0.0));
    }
    if offset < 0.0 {
        return Err(Error::NoSolution(format!(
            "mean transition {offset:.6} MHz below D_g is not reachable at any angle"
        )));
    }

    let target = Vector2::new(nu_plus, nu_minus);
    let mut x = Vector2::new(b0, 0.0);
    for _ in 0..100 {
        let (b, u) = (x[0], x[1]);
        let theta = u.clamp(0.0, 1.0).sqrt().asin().to_degrees();
        let roots = solve_cubic(p, b, theta)?;
        let nu = Vector2::new(roots[2] - roots[0], roots[1] - roots[0]);
        let resid = nu - target;
        if resid.amax() < FREQUENCY_TOL {
            if !(0.0..MAX_CALIBRATION_FIELD).contains(&b) {
                return Err(Error::NoSolution(format!("B = {b} G outside the calibration range")));
            }
            return Ok(FieldConfig::new(b, theta));
        }
        let z = g * b;
        let dl = |lam: f64| -> (f64, f64) {
            let f_lam = 3.0 * lam * lam - 4.0 * d * lam + d * d - z * z;
            let f_b = 2.0 * z * g * (d * u - lam);
            let f_u = d * z * z;
            (-f_b / f_lam, -f_u / f_lam)
        };
        let [l0, l1, l2] = roots.map(dl);
        let jac = Matrix2::new(l2.0 - l0.0, l2.1 - l0.1, l1.0 - l0.0, l1.1 - l0.1);
        let step = jac
            .lu()
            .solve(&(-resid))
            .ok_or_else(|| Error::Singular("field calibration Jacobian".into()))?;
        x += step;
        x[0] = x[0].clamp(1e-6, MAX_CALIBRATION_FIELD);
        x[1] = x[1].clamp(0.0, 1.0);
    }
    Err(Error::NoSolution(format!("Newton iteration did not reach {FREQUENCY_TOL} MHz")))
}

/// Steady-state populations at one calibrated field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyObservation {
    pub b_gauss: f64,
    pub p_plus1: f64,
    pub p_zero: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleEstimate {
    pub theta_deg: f64,
    pub chi2: f64,
    /// Pre-scan `(θ, χ²)` pairs.
    pub grid: Vec<(f64, f64)>,
}

pub const ANGLE_MAX_DEG: f64 = 5.0;
pub const ANGLE_GRID_STEP: f64 = 0.1;
const ANGLE_TOL: f64 = 1e-5;

fn angle_chi2(theta: f64, data: &[SteadyObservation], p: &SystemParams, r: &RateModel) -> Result<f64> {
    let mut sum = 0.0;
    for obs in data {
        let m = steady_populations(p, &FieldConfig::new(obs.b_gauss, theta), r)?;
        sum += (m.p_plus1 - obs.p_plus1).powi(2) + (m.p_zero - obs.p_zero).powi(2);
    }
    Ok(sum / (2 * data.len()) as f64)
}

/// Least-squares angle from steady-state populations at known fields.
pub fn calibrate_angle(data: &[SteadyObservation], p: &SystemParams, r: &RateModel) -> Result<AngleEstimate> {
    if data.is_empty() {
        return Err(Error::Precondition("no steady-state observations".into()));
    }
    for obs in data {
        FieldConfig::new(obs.b_gauss, 0.0).validate()?;
        if !(0.0..=1.0).contains(&obs.p_plus1) || !(0.0..=1.0).contains(&obs.p_zero) {
            return Err(Error::DegenerateData(format!("populations outside [0, 1] at B = {} G", obs.b_gauss)));
        }
    }
    let n = (ANGLE_MAX_DEG / ANGLE_GRID_STEP).round() as usize;
    let thetas: Vec<f64> = (0..=n).map(|k| k as f64 * ANGLE_GRID_STEP).collect();
    let grid = thetas
        .par_iter()
        .map(|&t| angle_chi2(t, data, p, r).map(|c| (t, c)))
        .collect::<Result<Vec<_>>>()?;
    let k = (0..grid.len()).min_by(|&a, &b| grid[a].1.total_cmp(&grid[b].1)).expect("nonempty grid");
    if k == n {
        return Err(Error::OutOfModel { theta_deg: ANGLE_MAX_DEG });
    }
    let (mut a, mut b) = (thetas[k.saturating_sub(1)], thetas[(k + 1).min(n)]);
    let phi = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = angle_chi2(x1, data, p, r)?;
    let mut f2 = angle_chi2(x2, data, p, r)?;
    while b - a > ANGLE_TOL {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = angle_chi2(x1, data, p, r)?;
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = angle_chi2(x2, data, p, r)?;
        }
    }
    let (theta, chi2) = [(x1, f1), (x2, f2), grid[k]]
        .into_iter()
        .min_by(|l, r| l.1.total_cmp(&r.1))
        .expect("candidates");
    Ok(AngleEstimate { theta_deg: theta, chi2, grid })
}

/// Fraction of the initial distance to steady state left at the end of the
/// fit window.
pub const SETTLE_FRACTION: f64 = 0.05;
pub const WINDOW_POINTS: usize = 61;
const MAX_WINDOW_US: f64 = 1e5;

/// Rise times of the three nuclear components after the swap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CharacteristicTimes {
    /// Fit window (µs).
    pub window_us: f64,
    pub plus1: ExpFit,
    pub zero: Option<ExpFit>,
    pub minus1: Option<ExpFit>,
}

/// Time after which P₊₁ stays within [`SETTLE_FRACTION`] of its initial
/// distance from the steady state.
pub fn settle_window(model: &DnpModel) -> Result<f64> {
    let p_inf = model.steady_populations()?.p_plus1;
    let p_0 = crate::evolution::populations(model.prepared())?.p_plus1;
    let target = SETTLE_FRACTION * (p_inf - p_0).abs();
    if target <= 1e-12 {
        return Err(Error::DegenerateData("P+1 does not change during pumping".into()));
    }
    let gap = |t: f64| -> Result<f64> { Ok((model.populations_at(t)?.p_plus1 - p_inf).abs() - target) };
    let (mut lo, mut hi) = (0.0, 0.5);
    while gap(hi)? > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > MAX_WINDOW_US {
            return Err(Error::NonConvergence(format!("P+1 not settled within {MAX_WINDOW_US} us")));
        }
    }
    while hi - lo > 1e-3 * hi {
        let mid = 0.5 * (lo + hi);
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Exponential fits on [`WINDOW_POINTS`] uniform samples of the settle
/// window. Only the P₊₁ fit is required to succeed.
pub fn characteristic_times(model: &DnpModel) -> Result<CharacteristicTimes> {
    let window_us = settle_window(model)?;
    let times: Vec<f64> =
        (0..WINDOW_POINTS).map(|k| window_us * k as f64 / (WINDOW_POINTS - 1) as f64).collect();
    let trace = model.trace(&times)?;
    Ok(CharacteristicTimes {
        window_us,
        plus1: fit_exponential(&times, &trace.p_plus1, None)?,
        zero: fit_exponential(&times, &trace.p_zero, None).ok(),
        minus1: fit_exponential(&times, &trace.p_minus1, None).ok(),
    })
}

/// `characteristic_times` at one parameter point.
pub fn rise_times(p: &SystemParams, f: &FieldConfig, r: &RateModel) -> Result<CharacteristicTimes> {
    characteristic_times(&DnpModel::new(p, f, r)?)
}
