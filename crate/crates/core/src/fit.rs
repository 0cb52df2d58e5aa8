//! Weighted exponential fits `P(t) = p0 − a·exp(−t/τ)`.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 200;
pub const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpFit {
    pub p0: f64,
    pub a: f64,
    /// Time constant (µs).
    pub tau: f64,
    /// Covariance of `(p0, a, tau)`. Scaled by the reduced χ² when no
    /// per-point uncertainties were supplied.
    pub covariance: [[f64; 3]; 3],
    /// `sqrt(Σ ((y − f)/σ)²)`.
    pub residual_norm: f64,
    pub iterations: usize,
}

impl ExpFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.p0 - self.a * (-t / self.tau).exp()
    }

    pub fn tau_std(&self) -> f64 {
        self.covariance[2][2].max(0.0).sqrt()
    }
}

fn model(x: &Vector3<f64>, t: f64) -> (f64, Vector3<f64>) {
    let (p0, a, tau) = (x[0], x[1], x[2]);
    let e = (-t / tau).exp();
    (p0 - a * e, Vector3::new(1.0, -e, -a * e * t / (tau * tau)))
}

/// Time at which linear interpolation of `values` first covers half of
/// the total change.
fn half_change_time(times: &[f64], values: &[f64]) -> Option<f64> {
    let (y0, y1) = (values[0], values[values.len() - 1]);
    let target = 0.5 * (y0 + y1);
    let above = |y: f64| (y - target) * (y1 - y0) >= 0.0;
    for k in 1..values.len() {
        if above(values[k]) {
            let (ya, yb) = (values[k - 1], values[k]);
            let frac = if yb != ya { (target - ya) / (yb - ya) } else { 1.0 };
            let t = times[k - 1] + frac.clamp(0.0, 1.0) * (times[k] - times[k - 1]);
            return Some(t - times[0]);
        }
    }
    None
}

/// Weighted least-squares fit by damped Gauss–Newton (Levenberg–Marquardt).
///
/// `sigma` gives per-point uncertainties; `None` weights all points equally.
pub fn fit_exponential(times: &[f64], values: &[f64], sigma: Option<&[f64]>) -> Result<ExpFit> {
    let n = times.len();
    if values.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: values.len() });
    }
    if n < 4 {
        return Err(Error::DegenerateData(format!("{n} points; an exponential fit needs at least 4")));
    }
    if let Some(s) = sigma {
        if s.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: s.len() });
        }
        if s.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
            return Err(Error::InvalidParameter("sigma entries must be finite and positive".into()));
        }
    }
    if times.iter().chain(values).any(|x| !x.is_finite()) {
        return Err(Error::DegenerateData("non-finite time or value".into()));
    }
    let spread = values.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        - values.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    let scale = values.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1e-300);
    if spread <= 1e-14 * scale {
        return Err(Error::DegenerateData("values are constant".into()));
    }
    let span = times.iter().fold(f64::NEG_INFINITY, |m, &t| m.max(t))
        - times.iter().fold(f64::INFINITY, |m, &t| m.min(t));
    if span <= 0.0 {
        return Err(Error::DegenerateData("all time stamps coincide".into()));
    }

    let weights: Vec<f64> = match sigma {
        Some(s) => s.iter().map(|x| 1.0 / (x * x)).collect(),
        None => vec![1.0; n],
    };
    let cost = |x: &Vector3<f64>| -> f64 {
        times
            .iter()
            .zip(values)
            .zip(&weights)
            .map(|((&t, &y), &w)| w * (y - model(x, t).0).powi(2))
            .sum()
    };
    let normal = |x: &Vector3<f64>| -> (Matrix3<f64>, Vector3<f64>) {
        let mut jtj = Matrix3::zeros();
        let mut jtr = Vector3::zeros();
        for ((&t, &y), &w) in times.iter().zip(values).zip(&weights) {
            let (f, g) = model(x, t);
            jtj += w * g * g.transpose();
            jtr += w * (y - f) * g;
        }
        (jtj, jtr)
    };

    let p0 = values[n - 1];
    let tau0 = half_change_time(times, values).filter(|&t| t > 0.0).unwrap_or(span / 3.0);
    let mut x = Vector3::new(p0, p0 - values[0], tau0);
    let mut c = cost(&x);
    let mut lambda = 1e-3;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (jtj, jtr) = normal(&x);
        let mut accepted = false;
        for _ in 0..60 {
            let mut damped = jtj;
            for k in 0..3 {
                damped[(k, k)] += lambda * jtj[(k, k)].max(1e-300);
            }
            let Some(step) = damped.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let trial = x + step;
            if trial[2] <= 0.0 || !trial.iter().all(|v| v.is_finite()) {
                lambda *= 10.0;
                continue;
            }
            let ct = cost(&trial);
            if ct <= c {
                let rel = (0..3)
                    .map(|k| step[k].abs() / trial[k].abs().max(1e-12))
                    .fold(0.0, f64::max);
                x = trial;
                c = ct;
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                converged = rel < STEP_TOL;
                break;
            }
            lambda *= 10.0;
        }
        // no descent direction left: the current point is a minimum to
        // working precision
        if !accepted || converged {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence(format!(
            "exponential fit did not converge in {MAX_ITERATIONS} iterations (tau = {})",
            x[2]
        )));
    }
    if !(x[2] > 0.0 && x[2].is_finite()) {
        return Err(Error::NonConvergence(format!("exponential fit ended at tau = {}", x[2])));
    }

    let (jtj, _) = normal(&x);
    let inv = jtj.try_inverse().ok_or_else(|| Error::Singular("exponential fit normal matrix".into()))?;
    let cov = if sigma.is_some() { inv } else { inv * (c / (n as f64 - 3.0).max(1.0)) };
    let mut covariance = [[0.0; 3]; 3];
    for (i, row) in covariance.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = cov[(i, j)];
        }
    }
    Ok(ExpFit { p0: x[0], a: x[1], tau: x[2], covariance, residual_norm: c.sqrt(), iterations })
}
