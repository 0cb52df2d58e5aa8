use nalgebra::Matrix3;
use nvdnp_core::cubic::ground_cubic_coefficients;
use nvdnp_core::hamiltonian::{ground_electronic_hamiltonian, transition_frequencies_from_cubic};
use nvdnp_core::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Osborne balancing: similarity scaling that equalizes row and column
/// norms before the eigensolve.
fn balance(mut c: Matrix3<f64>) -> Matrix3<f64> {
    for _ in 0..100 {
        let mut done = true;
        for i in 0..3 {
            let col: f64 = (0..3).filter(|&k| k != i).map(|k| c[(k, i)].abs()).sum();
            let row: f64 = (0..3).filter(|&k| k != i).map(|k| c[(i, k)].abs()).sum();
            if col == 0.0 || row == 0.0 {
                continue;
            }
            let f = (row / col).sqrt();
            if (f - 1.0).abs() > 1e-3 {
                done = false;
                for k in 0..3 {
                    c[(k, i)] *= f;
                    c[(i, k)] /= f;
                }
            }
        }
        if done {
            break;
        }
    }
    c
}

fn companion_roots(a2: f64, a1: f64, a0: f64) -> [f64; 3] {
    let c = balance(Matrix3::new(0.0, 0.0, -a0, 1.0, 0.0, -a1, 0.0, 1.0, -a2));
    let ev = c.complex_eigenvalues();
    let mut r = [ev[0].re, ev[1].re, ev[2].re];
    r.sort_by(|a, b| a.total_cmp(b));
    r
}

#[test]
fn cubic_matches_companion_matrix_and_hamiltonian() {
    let p = SystemParams::default();
    for i in 0..20 {
        for j in 0..20 {
            let b = 5.0 + 595.0 * i as f64 / 19.0;
            let theta = 5.0 * j as f64 / 19.0;
            let roots = solve_cubic(&p, b, theta).unwrap();
            let [a2, a1, a0] = ground_cubic_coefficients(p.d_g, p.gamma_e, b, theta);
            let comp = companion_roots(a2, a1, a0);
            let mut ham: Vec<f64> =
                ground_electronic_hamiltonian(&p, &FieldConfig::new(b, theta)).symmetric_eigenvalues().iter().copied().collect();
            ham.sort_by(|a, b| a.total_cmp(b));
            for k in 0..3 {
                assert!((roots[k] - comp[k]).abs() < 1e-9, "B={b} θ={theta}: {roots:?} vs {comp:?}");
                assert!((roots[k] - ham[k]).abs() < 1e-9, "B={b} θ={theta}: {roots:?} vs {ham:?}");
            }
        }
    }
}

/// Exact inverse from Vieta: the roots sum to 2D, so λ₀ follows from ν±
/// alone, and the remaining symmetric functions give (γB)² and sin²θ.
fn vieta_inverse(nu_plus: f64, nu_minus: f64, p: &SystemParams) -> (f64, f64) {
    let d = p.d_g;
    let l0 = (2.0 * d - nu_plus - nu_minus) / 3.0;
    let (l1, l2) = (l0 + nu_minus, l0 + nu_plus);
    let z2 = d * d - (l0 * l1 + l0 * l2 + l1 * l2);
    let u = -(l0 * l1 * l2) / (d * z2);
    (z2.sqrt() / p.gamma_e, u.max(0.0).sqrt().asin().to_degrees())
}

#[test]
fn field_calibration_matches_closed_form() {
    let p = SystemParams::default();
    for b in [100.0, 180.0, 252.0, 348.0, 411.0, 500.0, 600.0] {
        for theta in [0.2, 0.8, 1.5, 1.7, 3.0, 5.0] {
            let (np, nm) = ground_transition_frequencies(&p, &FieldConfig::new(b, theta)).unwrap();
            let f = calibrate_field(np, nm, &p).unwrap();
            let (vb, vt) = vieta_inverse(np, nm, &p);
            assert!((vb - b).abs() < 1e-6 && (vt - theta).abs() < 1e-4, "oracle self-check at {b}, {theta}");
            assert!((f.b_gauss - vb).abs() < 0.05, "B: {} vs {vb}", f.b_gauss);
            assert!((f.theta_deg - vt).abs() < 0.02, "θ: {} vs {vt}", f.theta_deg);
        }
    }
}

#[test]
fn cubic_and_hamiltonian_frequencies_agree() {
    let p = SystemParams::default();
    for (b, t) in [(252.0, 1.7), (348.0, 1.5), (411.0, 0.8), (850.0, 4.0)] {
        let f = FieldConfig::new(b, t);
        let (a, bm) = ground_transition_frequencies(&p, &f).unwrap();
        let (c, d) = transition_frequencies_from_cubic(&p, &f).unwrap();
        assert!((a - c).abs() < 1e-9 && (bm - d).abs() < 1e-9);
    }
}

#[test]
fn exponential_fit_monte_carlo() {
    let times: Vec<f64> = (0..30).map(|k| 15.0 * k as f64 / 29.0).collect();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let mut worst: f64 = 0.0;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<f64> = times.iter().map(|&t| 0.9 - 0.5 * (-t / 2.3).exp() + noise.sample(&mut rng)).collect();
        let f = fit_exponential(&times, &y, Some(&[0.01; 30])).unwrap();
        worst = worst.max((f.tau / 2.3 - 1.0).abs());
    }
    assert!(worst <= 0.15, "worst relative τ error {worst}");
}
