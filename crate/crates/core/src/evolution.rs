//! Time evolution, steady states and the polarization measurement sequence.
//!
//! Propagation restricts the generator to the invariant Hermitian sector
//! reached from the initial state and exponentiates that real matrix by
//! scaling and squaring. Times are in µs.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::dissipator::{assemble_liouvillian, build_jumps, Liouvillian, RateModel};
use crate::error::{Error, Result};
use crate::hamiltonian::{build_hamiltonian, FieldConfig, SystemParams};
use crate::sector::HermitianSector;
use crate::spin::{flat_index, max_abs, BasisIndex, StateSpace, C64};

pub const TRACE_TOL: f64 = 1e-9;
pub const HERMITIAN_TOL: f64 = 1e-9;
pub const POSITIVITY_TOL: f64 = 1e-8;
/// Smallest admissible second decay rate (1/µs) for a unique steady state.
pub const KERNEL_GAP: f64 = 1e-6;
/// Pump-off interval between preparation and the RF swap (µs).
pub const RELAXATION_US: f64 = 1.0;

/// Density matrix over the composite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    pub rho: DMatrix<C64>,
}

impl DensityState {
    /// Wraps a matrix after checking the density-matrix invariants.
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        StateSpace::from_dim(rho.nrows())?;
        if !rho.is_square() {
            return Err(Error::DimensionMismatch { expected: rho.nrows(), found: rho.ncols() });
        }
        let s = DensityState { rho };
        s.check_invariants()?;
        Ok(s)
    }

    pub fn maximally_mixed(space: StateSpace) -> Self {
        let d = space.dim();
        DensityState { rho: DMatrix::identity(d, d) * C64::new(1.0 / d as f64, 0.0) }
    }

    pub fn pure(b: BasisIndex, space: StateSpace) -> Result<Self> {
        let i = flat_index(b, space)?;
        let mut rho = DMatrix::zeros(space.dim(), space.dim());
        rho[(i, i)] = C64::new(1.0, 0.0);
        Ok(DensityState { rho })
    }

    pub fn space(&self) -> StateSpace {
        StateSpace::from_dim(self.rho.nrows()).expect("validated dimension")
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.rho - self.rho.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let h = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        h.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn population(&self, i: usize) -> f64 {
        self.rho[(i, i)].re
    }

    pub fn check_invariants(&self) -> Result<()> {
        let tr = self.trace();
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::InvariantViolation(format!("trace {tr}")));
        }
        let herm = self.hermiticity_error();
        if herm > HERMITIAN_TOL {
            return Err(Error::InvariantViolation(format!("hermiticity error {herm:e}")));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Error::InvariantViolation(format!("negative eigenvalue {min:e}")));
        }
        Ok(())
    }

    fn rehermitize(mut self) -> Self {
        self.rho = (&self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        self
    }
}

/// Generator restricted to a sector, ready for repeated exponentiation.
#[derive(Debug, Clone)]
pub struct Propagator {
    sector: HermitianSector,
    generator: DMatrix<f64>,
}

impl Propagator {
    pub fn new(l: &Liouvillian, sector: HermitianSector) -> Result<Self> {
        let generator = sector.real_generator(l)?;
        Ok(Propagator { sector, generator })
    }

    pub fn sector(&self) -> &HermitianSector {
        &self.sector
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    /// `exp(G·t)` on the sector coordinates.
    pub fn step(&self, t: f64) -> DMatrix<f64> {
        (&self.generator * t).exp()
    }

    pub fn encode(&self, rho: &DensityState) -> Result<DVector<f64>> {
        self.sector.to_real(&rho.rho)
    }

    /// Decodes, re-Hermitizes and checks invariants.
    pub fn decode(&self, x: &DVector<f64>) -> Result<DensityState> {
        let s = DensityState { rho: self.sector.from_real(x) }.rehermitize();
        s.check_invariants()?;
        Ok(s)
    }

    pub fn evolve(&self, rho0: &DensityState, t: f64) -> Result<DensityState> {
        check_time(t)?;
        if t == 0.0 {
            return Ok(rho0.clone());
        }
        let x = self.step(t) * self.encode(rho0)?;
        self.decode(&x)
    }

    /// States at every time of an increasing grid. Equal consecutive steps
    /// reuse one exponential.
    pub fn evolve_grid(&self, rho0: &DensityState, times: &[f64]) -> Result<Vec<DensityState>> {
        check_grid(times)?;
        let t_max = times[times.len() - 1].max(1.0);
        let mut cached: Option<(f64, DMatrix<f64>)> = None;
        let mut x = self.encode(rho0)?;
        let mut now = 0.0;
        let mut out = Vec::with_capacity(times.len());
        for &t in times {
            let dt = t - now;
            if dt > 0.0 {
                let reuse = matches!(&cached, Some((h, _)) if (h - dt).abs() <= 1e-12 * t_max);
                if !reuse {
                    cached = Some((dt, self.step(dt)));
                }
                x = &cached.as_ref().expect("cached step").1 * x;
            }
            now = t;
            out.push(self.decode(&x)?);
        }
        Ok(out)
    }
}

fn check_time(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        return Err(Error::Precondition(format!("time {t} us must be finite and >= 0")));
    }
    Ok(())
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(Error::Precondition("time grid is empty".into()));
    }
    for &t in times {
        check_time(t)?;
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(Error::Precondition(format!("time grid not increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

/// `exp(𝓛·t)[ρ₀]`.
pub fn propagate(l: &Liouvillian, rho0: &DensityState, t: f64) -> Result<DensityState> {
    check_time(t)?;
    if rho0.rho.nrows() != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: rho0.rho.nrows() });
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let sector = HermitianSector::for_state(&[l], &rho0.rho)?;
    Propagator::new(l, sector)?.evolve(rho0, t)
}

/// Decay rates `−Re λ` of the generator restricted to a sector, ascending by
/// magnitude of the real part.
pub fn relaxation_rates(generator: &DMatrix<f64>) -> Result<Vec<f64>> {
    let schur = nalgebra::linalg::Schur::try_new(generator.clone(), 1e-14, 10_000)
        .ok_or_else(|| Error::NonConvergence("Schur decomposition of the generator".into()))?;
    let mut rates: Vec<f64> = schur.complex_eigenvalues().iter().map(|z| -z.re).collect();
    rates.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    Ok(rates)
}

/// Steady state via the bordered system `[𝓛 with one row → tr] x = e`.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub state: DensityState,
    /// Second-smallest |Re λ| (1/µs), the slowest relaxation toward the state.
    pub gap: f64,
    /// `max |𝓛 vec(ρ)|`.
    pub residual: f64,
}

pub fn solve_steady_state(propagator: &Propagator) -> Result<SteadyState> {
    let g = propagator.generator();
    let sector = propagator.sector();
    let rates = relaxation_rates(g)?;
    let gap = rates.get(1).map(|r| r.abs()).unwrap_or(f64::INFINITY);
    if gap <= KERNEL_GAP {
        return Err(Error::DegenerateKernel { second_rate: gap });
    }
    let row = (0..sector.space().dim())
        .find_map(|i| sector.population_coord(i))
        .ok_or_else(|| Error::Precondition("sector holds no populations".into()))?;
    let mut a = g.clone();
    a.set_row(row, &sector.trace_functional().transpose());
    let mut b = DVector::zeros(g.nrows());
    b[row] = 1.0;
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Singular("bordered steady-state system".into()))?;
    let residual = (g * &x).amax();
    let state = propagator.decode(&x)?;
    Ok(SteadyState { state, gap, residual })
}

/// Unique stationary state of 𝓛 with unit trace.
pub fn steady_state(l: &Liouvillian) -> Result<DensityState> {
    let sector = HermitianSector::for_populations(&[l], l.space)?;
    let p = Propagator::new(l, sector)?;
    Ok(solve_steady_state(&p)?.state)
}

/// Steady-state nuclear populations under continuous pumping.
pub fn steady_populations(p: &SystemParams, f: &FieldConfig, r: &RateModel) -> Result<NuclearPopulations> {
    p.validate()?;
    f.validate()?;
    r.validate()?;
    let space = r.natural_space();
    let h = build_hamiltonian(p, f, space);
    let l = assemble_liouvillian(&h, &build_jumps(r, space)?)?;
    populations(&steady_state(&l)?)
}

/// Relative populations of the ground m_s = 0 hyperfine levels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NuclearPopulations {
    pub p_plus1: f64,
    pub p_zero: f64,
    pub p_minus1: f64,
}

impl NuclearPopulations {
    pub fn as_array(&self) -> [f64; 3] {
        [self.p_plus1, self.p_zero, self.p_minus1]
    }
}

pub fn populations(rho: &DensityState) -> Result<NuclearPopulations> {
    let space = rho.space();
    let idx = |mi| flat_index(BasisIndex::ground(0, mi), space);
    let raw = [rho.population(idx(1)?), rho.population(idx(0)?), rho.population(idx(-1)?)];
    let total: f64 = raw.iter().sum();
    if total <= 1e-12 {
        return Err(Error::Precondition(format!(
            "ground m_s = 0 population {total:e} too small to normalize"
        )));
    }
    Ok(NuclearPopulations {
        p_plus1: raw[0] / total,
        p_zero: raw[1] / total,
        p_minus1: raw[2] / total,
    })
}

/// Exchanges `|0,0⟩_g` and `|0,+1⟩_g`.
pub fn apply_pi_swap(rho: &DensityState) -> DensityState {
    let space = rho.space();
    let a = flat_index(BasisIndex::ground(0, 1), space).expect("ground level");
    let b = flat_index(BasisIndex::ground(0, 0), space).expect("ground level");
    let mut out = rho.rho.clone();
    out.swap_rows(a, b);
    out.swap_columns(a, b);
    DensityState { rho: out }
}

/// Time series of the relative ground m_s = 0 populations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarizationTrace {
    pub times: Vec<f64>,
    pub p_plus1: Vec<f64>,
    pub p_zero: Vec<f64>,
    pub p_minus1: Vec<f64>,
}

impl PolarizationTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.times.len();
        if self.p_plus1.len() != n || self.p_zero.len() != n || self.p_minus1.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.p_plus1.len() });
        }
        check_grid(&self.times)?;
        for k in 0..n {
            let row = [self.p_plus1[k], self.p_zero[k], self.p_minus1[k]];
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-6 {
                return Err(Error::InvariantViolation(format!("populations sum to {sum} at row {k}")));
            }
            if row.iter().any(|&p| !(-1e-9..=1.0 + 1e-9).contains(&p)) {
                return Err(Error::InvariantViolation(format!("population outside [0, 1] at row {k}")));
            }
        }
        Ok(())
    }

    pub fn push(&mut self, t: f64, p: NuclearPopulations) {
        self.times.push(t);
        self.p_plus1.push(p.p_plus1);
        self.p_zero.push(p.p_zero);
        self.p_minus1.push(p.p_minus1);
    }
}

/// Forward model of the preparation → swap → pump sequence at one parameter
/// point. Holds both generators so repeated queries share the work.
#[derive(Debug, Clone)]
pub struct DnpModel {
    pump_on: Propagator,
    pump_off: Propagator,
    steady: SteadyState,
    prepared: DensityState,
}

impl DnpModel {
    pub fn new(p: &SystemParams, f: &FieldConfig, r: &RateModel) -> Result<Self> {
        Self::in_space(p, f, r, r.natural_space())
    }

    pub fn in_space(p: &SystemParams, f: &FieldConfig, r: &RateModel, space: StateSpace) -> Result<Self> {
        p.validate()?;
        f.validate()?;
        r.validate()?;
        let h = build_hamiltonian(p, f, space);
        let on = assemble_liouvillian(&h, &build_jumps(r, space)?)?;
        let off = assemble_liouvillian(&h, &build_jumps(&r.with_pump(0.0), space)?)?;
        let sector = HermitianSector::for_populations(&[&on, &off], space)?;
        let steady = solve_steady_state(&Propagator::new(&on, sector.clone())?)?;
        let pump_off = Propagator::new(&off, sector)?;
        let relaxed = pump_off.evolve(&steady.state, RELAXATION_US)?;
        let prepared = apply_pi_swap(&relaxed);
        // the swap can move coherences out of the sector when a symmetry
        // (θ = 0) keeps that sector small
        let d = space.dim();
        let seeds = (0..d)
            .flat_map(|j| (0..d).map(move |i| (i, j)))
            .filter(|&(i, j)| i == j || prepared.rho[(i, j)] != C64::new(0.0, 0.0));
        let after = HermitianSector::closure(&[&on], space, seeds)?;
        let pump_on = Propagator::new(&on, after)?;
        Ok(DnpModel { pump_on, pump_off, steady, prepared })
    }

    pub fn steady(&self) -> &SteadyState {
        &self.steady
    }

    pub fn steady_populations(&self) -> Result<NuclearPopulations> {
        populations(&self.steady.state)
    }

    /// State right after the swap, at pump time zero.
    pub fn prepared(&self) -> &DensityState {
        &self.prepared
    }

    pub fn pump_on(&self) -> &Propagator {
        &self.pump_on
    }

    pub fn pump_off(&self) -> &Propagator {
        &self.pump_off
    }

    pub fn populations_at(&self, t: f64) -> Result<NuclearPopulations> {
        populations(&self.pump_on.evolve(&self.prepared, t)?)
    }

    pub fn trace(&self, times: &[f64]) -> Result<PolarizationTrace> {
        let states = self.pump_on.evolve_grid(&self.prepared, times)?;
        let mut trace = PolarizationTrace {
            times: Vec::with_capacity(times.len()),
            p_plus1: Vec::with_capacity(times.len()),
            p_zero: Vec::with_capacity(times.len()),
            p_minus1: Vec::with_capacity(times.len()),
        };
        for (&t, s) in times.iter().zip(&states) {
            trace.push(t, populations(s)?);
        }
        trace.validate()?;
        Ok(trace)
    }
}

/// Runs the measurement sequence and reads populations on `t_grid`.
pub fn dnp_sequence(
    p: &SystemParams,
    f: &FieldConfig,
    r: &RateModel,
    t_grid: &[f64],
) -> Result<PolarizationTrace> {
    check_grid(t_grid)?;
    DnpModel::new(p, f, r)?.trace(t_grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spin::Manifold;

    fn generator(b: f64, theta: f64) -> Liouvillian {
        let h = build_hamiltonian(&SystemParams::default(), &FieldConfig::new(b, theta), StateSpace::Standard);
        assemble_liouvillian(&h, &build_jumps(&RateModel::default(), StateSpace::Standard).unwrap()).unwrap()
    }

    #[test]
    fn zero_time_is_identity() {
        let l = generator(348.0, 1.5);
        let rho = DensityState::pure(BasisIndex::ground(0, 1), StateSpace::Standard).unwrap();
        assert_eq!(propagate(&l, &rho, 0.0).unwrap(), rho);
        assert!(propagate(&l, &rho, -1.0).is_err());
    }

    #[test]
    fn zero_generator_freezes_state() {
        let space = StateSpace::Standard;
        let h = crate::hamiltonian::HamiltonianSet { space, h_total: DMatrix::zeros(21, 21) };
        let l = assemble_liouvillian(&h, &crate::dissipator::JumpSet { space, jumps: vec![] }).unwrap();
        let rho = DensityState::maximally_mixed(space);
        let out = propagate(&l, &rho, 12.5).unwrap();
        assert!(max_abs(&(out.rho - rho.rho)) < 1e-15);
    }

    #[test]
    fn trace_preserved_over_time() {
        let l = generator(348.0, 1.5);
        let rho = DensityState::maximally_mixed(StateSpace::Standard);
        for t in [0.1, 1.0, 10.0, 100.0] {
            let s = propagate(&l, &rho, t).unwrap();
            assert!((s.trace().re - 1.0).abs() <= 1e-9);
        }
    }

    #[test]
    fn steady_state_residual_and_cross_check() {
        let l = generator(348.0, 1.5);
        let sector = HermitianSector::for_populations(&[&l], StateSpace::Standard).unwrap();
        let p = Propagator::new(&l, sector).unwrap();
        let ss = solve_steady_state(&p).unwrap();
        assert!(ss.residual <= 1e-9, "residual {}", ss.residual);
        let long = propagate(&l, &DensityState::maximally_mixed(StateSpace::Standard), 200.0).unwrap();
        assert!(max_abs(&(long.rho - &ss.state.rho)) < 1e-6);
    }

    #[test]
    fn degenerate_kernel_reported() {
        // no pumping: every ground state that commutes with H_g is stationary
        let h = build_hamiltonian(&SystemParams::default(), &FieldConfig::new(300.0, 0.0), StateSpace::Standard);
        let js = build_jumps(&RateModel::default().with_pump(0.0), StateSpace::Standard).unwrap();
        let l = assemble_liouvillian(&h, &js).unwrap();
        assert!(matches!(steady_state(&l), Err(Error::DegenerateKernel { .. })));
    }

    #[test]
    fn population_readout() {
        let s = StateSpace::Standard;
        let p = populations(&DensityState::pure(BasisIndex::ground(0, 1), s).unwrap()).unwrap();
        assert_eq!(p.as_array(), [1.0, 0.0, 0.0]);
        let mut rho = DMatrix::zeros(21, 21);
        for mi in [1, 0, -1] {
            let i = flat_index(BasisIndex::ground(0, mi), s).unwrap();
            rho[(i, i)] = C64::new(1.0 / 3.0, 0.0);
        }
        let p = populations(&DensityState::new(rho).unwrap()).unwrap();
        for v in p.as_array() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let excited = DensityState::pure(BasisIndex::excited(0, 1), s).unwrap();
        assert!(populations(&excited).is_err());
    }

    #[test]
    fn pi_swap() {
        let s = StateSpace::Standard;
        let mut rho = DMatrix::zeros(21, 21);
        for (mi, w) in [(1, 0.9), (0, 0.08), (-1, 0.02)] {
            let i = flat_index(BasisIndex::ground(0, mi), s).unwrap();
            rho[(i, i)] = C64::new(w, 0.0);
        }
        rho[(3, 4)] = C64::new(0.01, 0.005);
        rho[(4, 3)] = C64::new(0.01, -0.005);
        let state = DensityState::new(rho).unwrap();
        let swapped = apply_pi_swap(&state);
        let p = populations(&swapped).unwrap();
        assert!((p.p_plus1 - 0.08).abs() < 1e-15 && (p.p_zero - 0.9).abs() < 1e-15);
        assert_eq!(apply_pi_swap(&swapped), state);
        assert!((swapped.trace() - state.trace()).norm() < 1e-15);
        let (mut a, mut b): (Vec<f64>, Vec<f64>) = (
            state.rho.symmetric_eigenvalues().iter().copied().collect(),
            swapped.rho.symmetric_eigenvalues().iter().copied().collect(),
        );
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn density_state_validation() {
        let mut rho = DMatrix::<C64>::identity(21, 21) * C64::new(0.1, 0.0);
        assert!(DensityState::new(rho.clone()).is_err());
        rho = DMatrix::identity(21, 21) * C64::new(1.0 / 21.0, 0.0);
        rho[(0, 1)] = C64::new(0.2, 0.0);
        assert!(DensityState::new(rho).is_err());
        assert!(DensityState::new(DMatrix::identity(5, 5)).is_err());
    }

    #[test]
    fn grid_validation() {
        let p = SystemParams::default();
        let f = FieldConfig::new(348.0, 1.5);
        let r = RateModel::default();
        assert!(dnp_sequence(&p, &f, &r, &[]).is_err());
        assert!(dnp_sequence(&p, &f, &r, &[0.0, 2.0, 1.0]).is_err());
    }

    #[test]
    fn zero_angle_sequence_runs() {
        let r = RateModel::default().with_ionization(0.0);
        let m = DnpModel::new(&SystemParams::default(), &FieldConfig::new(150.0, 0.0), &r).unwrap();
        let tr = m.trace(&[0.0, 1.0, 10.0]).unwrap();
        let s = tr.p_plus1[2] + tr.p_zero[2] + tr.p_minus1[2];
        assert!((s - 1.0).abs() < 1e-9);
    }

    #[test]
    fn prepared_state_has_no_excited_coherence() {
        let m = DnpModel::new(&SystemParams::default(), &FieldConfig::new(348.0, 1.5), &RateModel::default()).unwrap();
        let space = StateSpace::Standard;
        let (start, size) = space.block(Manifold::Excited).unwrap();
        let (g0, _) = space.block(Manifold::Ground).unwrap();
        assert!(max_abs(&m.prepared().rho.view((start, g0), (size, 9))) == 0.0);
    }
}
