use nalgebra::DMatrix;
use nvdnp_core::evolution::{Propagator, HERMITIAN_TOL, POSITIVITY_TOL, TRACE_TOL};
use nvdnp_core::sector::HermitianSector;
use nvdnp_core::spin::{max_abs, C64};
use nvdnp_core::*;
use proptest::prelude::*;

fn liouvillian(p: &SystemParams, f: &FieldConfig, r: &RateModel, space: StateSpace) -> Liouvillian {
    let h = build_hamiltonian(p, f, space);
    assemble_liouvillian(&h, &build_jumps(r, space).unwrap()).unwrap()
}

/// Block-diagonal density matrix with random populations and in-block
/// coherences, built as `A·A†` per block.
fn block_state(space: StateSpace, seed: &[f64]) -> DensityState {
    let d = space.dim();
    let mut a = DMatrix::<C64>::zeros(d, d);
    let mut k = 0;
    for m in space.manifolds() {
        let (start, size) = space.block(*m).unwrap();
        for i in 0..size {
            for j in 0..size {
                let re = seed[k % seed.len()];
                let im = seed[(k + 7) % seed.len()];
                a[(start + i, start + j)] = C64::new(re, 0.3 * im);
                k += 1;
            }
        }
    }
    let rho = &a * a.adjoint();
    let tr = rho.trace();
    DensityState::new(rho / tr).unwrap()
}

fn direct_lindblad(h: &HamiltonianSet, jumps: &JumpSet, rho: &DMatrix<C64>) -> DMatrix<C64> {
    let d = h.dim();
    let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let mut out = (&h.h_total * rho - rho * &h.h_total) * (-two_pi_i);
    for j in &jumps.jumps {
        let mut l = DMatrix::<C64>::zeros(d, d);
        let s = flat_index(j.source, jumps.space).unwrap();
        let t = flat_index(j.target, jumps.space).unwrap();
        l[(t, s)] = C64::new(j.rate.sqrt(), 0.0);
        let ldl = l.adjoint() * &l;
        out += &l * rho * l.adjoint() - (&ldl * rho + rho * &ldl) * C64::new(0.5, 0.0);
    }
    out
}

#[test]
fn vectorized_generator_matches_commutator_form() {
    for (space, r) in [
        (StateSpace::Standard, RateModel::default()),
        (StateSpace::WithNv0, RateModel::default().with_ionization(10.0)),
    ] {
        let p = SystemParams::default();
        let f = FieldConfig::new(411.0, 0.8);
        let h = build_hamiltonian(&p, &f, space);
        let js = build_jumps(&r, space).unwrap();
        let l = assemble_liouvillian(&h, &js).unwrap();
        let d = space.dim();
        let rho = DMatrix::<C64>::from_fn(d, d, |i, j| C64::new(((3 * i + 5 * j) % 11) as f64, i as f64 - j as f64));
        let expect = direct_lindblad(&h, &js, &rho);
        let got = l.apply(&rho).unwrap();
        assert!(max_abs(&(got - &expect)) <= 1e-9 * max_abs(&expect));
    }
}

#[test]
fn semigroup_and_linearity() {
    let p = SystemParams::default();
    let f = FieldConfig::new(348.0, 1.5);
    let r = RateModel::default();
    let space = StateSpace::Standard;
    let l = liouvillian(&p, &f, &r, space);
    let s = HermitianSector::for_populations(&[&l], space).unwrap();
    let prop = Propagator::new(&l, s).unwrap();
    let r1 = block_state(space, &[0.3, -1.2, 0.8, 0.1, 2.0, -0.4, 0.9]);
    let r2 = block_state(space, &[1.1, 0.2, -0.7, 0.5, 0.05, 1.4, -0.9, 0.6]);

    let once = prop.evolve(&r1, 3.7).unwrap();
    let twice = prop.evolve(&prop.evolve(&r1, 1.2).unwrap(), 2.5).unwrap();
    assert!(max_abs(&(once.rho - twice.rho)) < 1e-10);

    let a = 0.35;
    let mix = DensityState::new(&r1.rho * C64::new(a, 0.0) + &r2.rho * C64::new(1.0 - a, 0.0)).unwrap();
    let lhs = prop.evolve(&mix, 2.0).unwrap().rho;
    let rhs = prop.evolve(&r1, 2.0).unwrap().rho * C64::new(a, 0.0)
        + prop.evolve(&r2, 2.0).unwrap().rho * C64::new(1.0 - a, 0.0);
    assert!(max_abs(&(lhs - rhs)) < 1e-12);
}

#[test]
fn sector_propagation_matches_full_space() {
    let p = SystemParams::default();
    let f = FieldConfig::new(252.0, 1.7);
    let space = StateSpace::Standard;
    let l = liouvillian(&p, &f, &RateModel::default(), space);
    let rho = block_state(space, &[0.4, 1.0, -0.2, 0.7, 0.3]);
    let small = Propagator::new(&l, HermitianSector::for_populations(&[&l], space).unwrap()).unwrap();
    let full = Propagator::new(&l, HermitianSector::full(space)).unwrap();
    assert_eq!(full.sector().len(), 441);
    for t in [0.3, 2.0, 9.0] {
        let a = small.evolve(&rho, t).unwrap();
        let b = full.evolve(&rho, t).unwrap();
        assert!(max_abs(&(a.rho - b.rho)) < 1e-10, "t = {t}");
    }
}

#[test]
fn real_representation_preserves_spectral_invariants() {
    let p = SystemParams::default();
    let f = FieldConfig::new(100.0, 3.0);
    let space = StateSpace::Standard;
    let l = liouvillian(&p, &f, &RateModel::default(), space);
    let g = HermitianSector::full(space).real_generator(&l).unwrap();
    let lc = l.to_dense();
    let (mut gk, mut lk) = (g.clone(), lc.clone());
    for k in 1..=3 {
        let tg = gk.trace();
        let tl = lk.trace();
        let scale = tg.abs().max(1.0);
        assert!((tg - tl.re).abs() < 1e-9 * scale, "k = {k}: {tg} vs {tl}");
        assert!(tl.im.abs() < 1e-9 * scale);
        gk = &gk * &g;
        lk = &lk * &lc;
    }
}

#[test]
fn charge_extension_without_ionization_reduces_to_baseline() {
    let p = SystemParams::default();
    let f = FieldConfig::new(150.0, 1.0);
    let r = RateModel::default();
    let l21 = liouvillian(&p, &f, &r, StateSpace::Standard);
    let l24 = liouvillian(&p, &f, &r, StateSpace::WithNv0);
    let rho21 = block_state(StateSpace::Standard, &[0.2, 0.9, -0.5, 1.3]);
    let mut big = DMatrix::<C64>::zeros(24, 24);
    big.view_mut((0, 0), (21, 21)).copy_from(&rho21.rho);
    let rho24 = DensityState::new(big).unwrap();
    for t in [0.5, 4.0] {
        let a = propagate(&l21, &rho21, t).unwrap();
        let b = propagate(&l24, &rho24, t).unwrap();
        assert!(max_abs(&(b.rho.view((0, 0), (21, 21)) - &a.rho)) < 1e-12);
        assert!(max_abs(&b.rho.view((21, 21), (3, 3))) < 1e-12);
    }
    // the decoupled NV⁰ block makes the 24-level steady state non-unique
    assert!(matches!(
        DnpModel::in_space(&p, &f, &r, StateSpace::WithNv0),
        Err(Error::DegenerateKernel { .. })
    ));
    let seq21 = DnpModel::new(&p, &f, &r).unwrap();
    assert_eq!(seq21.prepared().space(), StateSpace::Standard);
}

#[test]
fn steady_state_is_stationary() {
    let p = SystemParams::default();
    let f = FieldConfig::new(411.0, 0.8);
    let r = RateModel::default().with_ionization(5.0);
    let m = DnpModel::new(&p, &f, &r).unwrap();
    let later = m.pump_on().evolve(&m.steady().state, 50.0).unwrap();
    assert!(max_abs(&(later.rho - &m.steady().state.rho)) < 1e-10);
    assert!(m.steady().residual < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, .. ProptestConfig::default() })]

    #[test]
    fn propagated_states_stay_physical(
        b in 0.0f64..600.0,
        theta in 0.0f64..5.0,
        c_perp in -60.0f64..0.0,
        w in 0.0f64..2.0,
        ion in prop::bool::ANY,
        seed in prop::collection::vec(-1.0f64..1.0, 5..12),
    ) {
        let p = SystemParams::default().with_c_perp(c_perp);
        let f = FieldConfig::new(b, theta);
        let r = RateModel::default().with_pump(w).with_ionization(if ion { 10.0 } else { 0.0 });
        let space = r.natural_space();
        let l = liouvillian(&p, &f, &r, space);
        prop_assert!(l.trace_preservation_residual() <= 1e-9);
        let rho = block_state(space, &seed);
        let prop = Propagator::new(&l, HermitianSector::for_populations(&[&l], space).unwrap()).unwrap();
        for s in prop.evolve_grid(&rho, &[0.01, 0.5, 3.0, 20.0]).unwrap() {
            prop_assert!((s.trace().re - 1.0).abs() <= TRACE_TOL);
            prop_assert!(s.hermiticity_error() <= HERMITIAN_TOL);
            prop_assert!(s.min_eigenvalue() >= -POSITIVITY_TOL);
        }
    }

    #[test]
    fn populations_sum_to_one(b in 50.0f64..600.0, theta in 0.0f64..5.0) {
        let tr = dnp_sequence(
            &SystemParams::default(),
            &FieldConfig::new(b, theta),
            &RateModel::default(),
            &[0.0, 1.0, 5.0],
        ).unwrap();
        for k in 0..tr.len() {
            let s = tr.p_plus1[k] + tr.p_zero[k] + tr.p_minus1[k];
            prop_assert!((s - 1.0).abs() < 1e-12);
        }
    }
}
