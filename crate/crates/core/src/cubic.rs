//! Closed-form roots of the ground-state characteristic cubic.
//!
//! Without hyperfine coupling and strain, the electronic ground Hamiltonian
//! `D_g·Sz² + γ_e·S·B` has eigenvalues solving
//!
//! ```text
//! λ³ − 2·D_g·λ² + (D_g² − (γ_e·B)²)·λ + (D_g/2)·(γ_e·B)²·(1 − cos 2θ) = 0
//! ```

use crate::error::{Error, Result};
use crate::hamiltonian::SystemParams;

/// Coefficients `(a2, a1, a0)` of the monic ground-state cubic.
pub fn ground_cubic_coefficients(d_g: f64, gamma_e: f64, b_gauss: f64, theta_deg: f64) -> [f64; 3] {
    let zeeman = gamma_e * b_gauss;
    let z2 = zeeman * zeeman;
    let cos2t = (2.0 * theta_deg.to_radians()).cos();
    [-2.0 * d_g, d_g * d_g - z2, 0.5 * d_g * z2 * (1.0 - cos2t)]
}

/// Three real roots of `x³ + a2·x² + a1·x + a0`, ascending.
///
/// Uses the trigonometric form on the depressed cubic, followed by one
/// Newton polish per root.
pub fn real_cubic_roots(a2: f64, a1: f64, a0: f64) -> Result<[f64; 3]> {
    if a0 == 0.0 {
        return factored_roots(a2, a1);
    }
    let shift = a2 / 3.0;
    let p = a1 - a2 * a2 / 3.0;
    let q = 2.0 * a2 * a2 * a2 / 27.0 - a2 * a1 / 3.0 + a0;
    let discriminant = -(4.0 * p * p * p + 27.0 * q * q);
    let scale = (a2.abs() + a1.abs().sqrt() + a0.abs().cbrt()).max(1.0);

    if p >= 0.0 {
        // p = 0 with q = 0 is a triple root; anything else has a complex pair.
        if q.abs() <= 1e-12 * scale.powi(3) && p.abs() <= 1e-12 * scale.powi(2) {
            return Ok([-shift; 3]);
        }
        return Err(Error::ComplexRoots { discriminant });
    }

    let m = 2.0 * (-p / 3.0).sqrt();
    let arg = 3.0 * q / (p * m);
    if arg.abs() > 1.0 + 1e-9 {
        return Err(Error::ComplexRoots { discriminant });
    }
    let phi = arg.clamp(-1.0, 1.0).acos() / 3.0;
    let two_pi_3 = 2.0 * std::f64::consts::PI / 3.0;
    let mut roots = [0.0; 3];
    for (k, r) in roots.iter_mut().enumerate() {
        *r = m * (phi - two_pi_3 * k as f64).cos() - shift;
    }

    let poly = |x: f64| ((x + a2) * x + a1) * x + a0;
    let deriv = |x: f64| (3.0 * x + 2.0 * a2) * x + a1;
    for r in roots.iter_mut() {
        let d = deriv(*r);
        if d.abs() > 1e-6 * scale * scale {
            let step = poly(*r) / d;
            if step.abs() < 1e-6 * scale {
                *r -= step;
            }
        }
    }
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// `x·(x² + a2·x + a1)`.
fn factored_roots(a2: f64, a1: f64) -> Result<[f64; 3]> {
    let h = -a2 / 2.0;
    let disc = h * h - a1;
    if disc < 0.0 {
        return Err(Error::ComplexRoots { discriminant: disc });
    }
    let s = disc.sqrt();
    let big = if h >= 0.0 { h + s } else { h - s };
    let small = if big == 0.0 { 0.0 } else { a1 / big };
    let mut roots = [0.0, small, big];
    roots.sort_by(|a, b| a.total_cmp(b));
    Ok(roots)
}

/// Eigenvalues (MHz) of the hyperfine-free ground electronic Hamiltonian,
/// ascending.
pub fn solve_cubic(p: &SystemParams, b_gauss: f64, theta_deg: f64) -> Result<[f64; 3]> {
    let [a2, a1, a0] = ground_cubic_coefficients(p.d_g, p.gamma_e, b_gauss, theta_deg);
    real_cubic_roots(a2, a1, a0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_field_factorizes() {
        let p = SystemParams::default();
        for b in [0.0, 10.0, 252.0, 600.0, 900.0] {
            let r = solve_cubic(&p, b, 0.0).unwrap();
            let z = p.gamma_e * b;
            let mut expect = [0.0, p.d_g - z, p.d_g + z];
            expect.sort_by(|a, b| a.total_cmp(b));
            for k in 0..3 {
                assert!((r[k] - expect[k]).abs() < 1e-10, "B={b}: {r:?} vs {expect:?}");
            }
        }
    }

    #[test]
    fn vieta_sum() {
        let p = SystemParams::default();
        for (b, t) in [(100.0, 3.0), (348.0, 1.5), (411.0, 0.8), (600.0, 45.0), (50.0, 89.0)] {
            let r = solve_cubic(&p, b, t).unwrap();
            let sum: f64 = r.iter().sum();
            assert!(((sum - 2.0 * p.d_g) / (2.0 * p.d_g)).abs() < 1e-8);
        }
    }

    #[test]
    fn generic_cubics() {
        // (x-1)(x-2)(x-3)
        let r = real_cubic_roots(-6.0, 11.0, -6.0).unwrap();
        for (a, b) in r.iter().zip([1.0, 2.0, 3.0]) {
            assert!((a - b).abs() < 1e-12);
        }
        // triple root at 2
        let r = real_cubic_roots(-6.0, 12.0, -8.0).unwrap();
        assert!(r.iter().all(|x| (x - 2.0).abs() < 1e-6));
        // x³ + x has a complex pair
        assert!(matches!(real_cubic_roots(0.0, 1.0, 0.0), Err(Error::ComplexRoots { .. })));
        assert!(matches!(real_cubic_roots(0.0, -1.0, 5.0), Err(Error::ComplexRoots { .. })));
    }
}
