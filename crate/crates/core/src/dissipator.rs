//! Jump operators and the vectorized Lindblad generator.
//!
//! Vectorization stacks columns: `vec(A·ρ·B) = (Bᵀ ⊗ A)·vec(ρ)`, so the
//! density-matrix entry `ρ[i, j]` sits at `i + j·d`. The generator is
//!
//! ```text
//! 𝓛 = −2πi·(I ⊗ H − Hᵀ ⊗ I) + Σ_k [ L̄_k ⊗ L_k − ½·(I ⊗ L_k†L_k + (L_k†L_k)ᵀ ⊗ I) ]
//! ```
//!
//! with `H` in MHz, giving rates in 1/µs.

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::{CooMatrix, CscMatrix, CsrMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::HamiltonianSet;
use crate::spin::{flat_index, BasisIndex, Manifold, StateSpace, C64, PROJECTIONS};

/// How NV⁰ recombination distributes over the ground m_s levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recombination {
    /// Γ_I/3 into each of m_s = +1, 0, −1.
    #[default]
    Uniform,
    /// Γ_I into m_s = 0 only.
    GroundZeroOnly,
}

/// Optical and intersystem-crossing rates (MHz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateModel {
    /// Spin-conserving radiative decay, excited → ground.
    pub gamma_rad: f64,
    /// Excited m_s = 0 → singlet.
    pub gamma_isc0: f64,
    /// Excited m_s = ±1 → singlet.
    pub gamma_iscpm: f64,
    /// Singlet → ground m_s = 0.
    pub gamma_s0: f64,
    /// Singlet → ground m_s = ±1.
    pub gamma_spm: f64,
    /// Spin-flipping fraction of the radiative rate.
    pub epsilon: f64,
    /// Pump rate in units of the matching decay rate.
    pub w: f64,
    /// Ionization / recombination rate through NV⁰.
    pub gamma_ion: f64,
    /// Whether pumping also carries the ε spin-flip family.
    pub pump_leakage: bool,
    pub recombination: Recombination,
}

impl Default for RateModel {
    fn default() -> Self {
        RateModel {
            gamma_rad: 63.0,
            gamma_isc0: 12.0,
            gamma_iscpm: 80.0,
            gamma_s0: 3.3,
            gamma_spm: 2.4,
            epsilon: 0.01,
            w: 1.0,
            gamma_ion: 0.0,
            pump_leakage: true,
            recombination: Recombination::Uniform,
        }
    }
}

impl RateModel {
    pub fn with_pump(mut self, w: f64) -> Self {
        self.w = w;
        self
    }

    pub fn with_ionization(mut self, gamma_ion: f64) -> Self {
        self.gamma_ion = gamma_ion;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("gamma_rad", self.gamma_rad),
            ("gamma_isc0", self.gamma_isc0),
            ("gamma_iscpm", self.gamma_iscpm),
            ("gamma_s0", self.gamma_s0),
            ("gamma_spm", self.gamma_spm),
            ("epsilon", self.epsilon),
            ("w", self.w),
            ("gamma_ion", self.gamma_ion),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }

    /// Smallest state space that holds every channel with a nonzero rate.
    pub fn natural_space(&self) -> StateSpace {
        if self.gamma_ion > 0.0 {
            StateSpace::WithNv0
        } else {
            StateSpace::Standard
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Radiative,
    RadiativeSpinFlip,
    IscToSinglet,
    SingletToGround,
    Pump,
    PumpSpinFlip,
    Ionization,
    Recombination,
}

/// One jump operator `√rate·|target⟩⟨source|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub source: BasisIndex,
    pub target: BasisIndex,
    pub rate: f64,
    pub channel: Channel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JumpSet {
    pub space: StateSpace,
    pub jumps: Vec<Jump>,
}

impl JumpSet {
    pub fn len(&self) -> usize {
        self.jumps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jumps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }
}

/// Enumerates every nuclear-spin-conserving channel with a nonzero rate.
pub fn build_jumps(r: &RateModel, space: StateSpace) -> Result<JumpSet> {
    r.validate()?;
    if r.gamma_ion > 0.0 && space != StateSpace::WithNv0 {
        return Err(Error::InvalidParameter(
            "ionization rate requires the 24-level state space".into(),
        ));
    }
    let mut jumps = Vec::new();
    let mut push = |source, target, rate: f64, channel| {
        if rate > 0.0 {
            jumps.push(Jump { source, target, rate, channel });
        }
    };
    let radiative_flip = r.epsilon * r.gamma_rad;
    let pump_flip = if r.pump_leakage { r.w * radiative_flip } else { 0.0 };

    for &mi in &PROJECTIONS {
        for &ms in &PROJECTIONS {
            let e = BasisIndex::excited(ms, mi);
            let g = BasisIndex::ground(ms, mi);
            push(e, g, r.gamma_rad, Channel::Radiative);
            push(g, e, r.w * r.gamma_rad, Channel::Pump);
            for &other in PROJECTIONS.iter().filter(|&&m| m != ms) {
                push(e, BasisIndex::ground(other, mi), radiative_flip, Channel::RadiativeSpinFlip);
                push(g, BasisIndex::excited(other, mi), pump_flip, Channel::PumpSpinFlip);
            }
            let (isc, back) = if ms == 0 {
                (r.gamma_isc0, r.gamma_s0)
            } else {
                (r.gamma_iscpm, r.gamma_spm)
            };
            push(e, BasisIndex::singlet(mi), isc, Channel::IscToSinglet);
            push(BasisIndex::singlet(mi), g, back, Channel::SingletToGround);

            if r.gamma_ion > 0.0 {
                push(e, BasisIndex::nv0(mi), r.gamma_ion, Channel::Ionization);
                let rec = match r.recombination {
                    Recombination::Uniform => r.gamma_ion / 3.0,
                    Recombination::GroundZeroOnly if ms == 0 => r.gamma_ion,
                    Recombination::GroundZeroOnly => 0.0,
                };
                push(BasisIndex::nv0(mi), g, rec, Channel::Recombination);
            }
        }
    }
    Ok(JumpSet { space, jumps })
}

/// Sparse superoperator over column-stacked `d×d` density matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Liouvillian {
    pub space: StateSpace,
    pub matrix: CsrMatrix<C64>,
}

fn vec_index(i: usize, j: usize, d: usize) -> usize {
    i + j * d
}

fn coherent_triplets(h: &DMatrix<C64>, coo: &mut CooMatrix<C64>) {
    let d = h.nrows();
    let two_pi_i = C64::new(0.0, 2.0 * std::f64::consts::PI);
    for a in 0..d {
        for b in 0..d {
            let hab = h[(a, b)];
            if hab == C64::new(0.0, 0.0) {
                continue;
            }
            for j in 0..d {
                // −2πi (I ⊗ H): ρ[a, j] ← H[a, b] ρ[b, j]
                coo.push(vec_index(a, j, d), vec_index(b, j, d), -two_pi_i * hab);
                // +2πi (Hᵀ ⊗ I): ρ[j, b] ← ρ[j, a] H[a, b]
                coo.push(vec_index(j, b, d), vec_index(j, a, d), two_pi_i * hab);
            }
        }
    }
}

fn dissipative_triplets(jumps: &JumpSet, coo: &mut CooMatrix<C64>) -> Result<()> {
    let d = jumps.dim();
    for jump in &jumps.jumps {
        let m = flat_index(jump.target, jumps.space)?;
        let n = flat_index(jump.source, jumps.space)?;
        let rate = C64::new(jump.rate, 0.0);
        let half = C64::new(0.5 * jump.rate, 0.0);
        coo.push(vec_index(m, m, d), vec_index(n, n, d), rate);
        for j in 0..d {
            coo.push(vec_index(n, j, d), vec_index(n, j, d), -half);
            coo.push(vec_index(j, n, d), vec_index(j, n, d), -half);
        }
    }
    Ok(())
}

impl Liouvillian {
    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    /// Superoperator of `ρ ↦ −2πi[H, ρ]`.
    pub fn coherent(h: &HamiltonianSet) -> Self {
        let d = h.dim();
        let mut coo = CooMatrix::new(d * d, d * d);
        coherent_triplets(&h.h_total, &mut coo);
        Liouvillian { space: h.space, matrix: CsrMatrix::from(&coo) }
    }

    /// Superoperator of the jump sum alone.
    pub fn dissipative(jumps: &JumpSet) -> Result<Self> {
        let d = jumps.dim();
        let mut coo = CooMatrix::new(d * d, d * d);
        dissipative_triplets(jumps, &mut coo)?;
        Ok(Liouvillian { space: jumps.space, matrix: CsrMatrix::from(&coo) })
    }

    pub fn sum(&self, other: &Liouvillian) -> Result<Liouvillian> {
        if self.space != other.space {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: other.dim() });
        }
        Ok(Liouvillian { space: self.space, matrix: &self.matrix + &other.matrix })
    }

    pub fn nnz(&self) -> usize {
        self.matrix.nnz()
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        DMatrix::from(&self.matrix)
    }

    pub fn to_csc(&self) -> CscMatrix<C64> {
        CscMatrix::from(&self.matrix)
    }

    pub fn apply_vec(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.matrix * v
    }

    /// `𝓛[ρ]` as a matrix.
    pub fn apply(&self, rho: &DMatrix<C64>) -> Result<DMatrix<C64>> {
        let d = self.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
        }
        let v = DVector::from_column_slice(rho.as_slice());
        let out = self.apply_vec(&v);
        Ok(DMatrix::from_column_slice(d, d, out.as_slice()))
    }

    /// `max |vec(I)ᵀ·𝓛|`, zero for a trace-preserving generator.
    pub fn trace_preservation_residual(&self) -> f64 {
        let d = self.dim();
        let mut acc = vec![C64::new(0.0, 0.0); d * d];
        for (row, col, v) in self.matrix.triplet_iter() {
            if row % d == row / d {
                acc[col] += *v;
            }
        }
        acc.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn assemble_liouvillian(h: &HamiltonianSet, jumps: &JumpSet) -> Result<Liouvillian> {
    if h.dim() != jumps.dim() {
        return Err(Error::DimensionMismatch { expected: h.dim(), found: jumps.dim() });
    }
    let d = h.dim();
    let mut coo = CooMatrix::new(d * d, d * d);
    coherent_triplets(&h.h_total, &mut coo);
    dissipative_triplets(jumps, &mut coo)?;
    Ok(Liouvillian { space: h.space, matrix: CsrMatrix::from(&coo) })
}

/// Manifold of the block a jump leaves from and arrives in.
pub fn jump_manifolds(j: &Jump) -> (Manifold, Manifold) {
    (j.source.manifold, j.target.manifold)
}
