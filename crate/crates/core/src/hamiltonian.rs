//! Ground, excited and spinless-manifold Hamiltonians of the NV⁻–¹⁴N pair.
//!
//! Units: MHz for energies, Gauss for fields, degrees for angles. The field
//! lies in the x–z plane, `B·(sin θ, 0, cos θ)`.

use nalgebra::{DMatrix, Matrix3};
use serde::{Deserialize, Serialize};

use crate::cubic::solve_cubic;
use crate::error::{Error, Result};
use crate::spin::{embed, spin1_ops, Manifold, StateSpace, C64};

/// Physical constants of the electron–nuclear spin pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemParams {
    /// Ground-state zero-field splitting (MHz).
    pub d_g: f64,
    /// Excited-state zero-field splitting (MHz).
    pub d_e: f64,
    /// Nuclear quadrupole splitting (MHz).
    pub q: f64,
    /// Electron gyromagnetic ratio (MHz/G).
    pub gamma_e: f64,
    /// ¹⁴N gyromagnetic ratio (MHz/G).
    pub gamma_n: f64,
    /// Ground longitudinal hyperfine (MHz).
    pub a_par: f64,
    /// Ground transverse hyperfine (MHz).
    pub a_perp: f64,
    /// Excited longitudinal hyperfine (MHz).
    pub c_par: f64,
    /// Excited transverse hyperfine (MHz), the estimated quantity.
    pub c_perp: f64,
    /// Ground-state strain splitting E (MHz).
    pub strain_e: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        SystemParams {
            d_g: 2870.0,
            d_e: 1420.0,
            q: -4.945,
            gamma_e: 2.802,
            gamma_n: -0.000308,
            a_par: -2.162,
            a_perp: -2.62,
            c_par: -40.0,
            c_perp: -23.0,
            strain_e: 0.0,
        }
    }
}

impl SystemParams {
    pub fn with_c_perp(mut self, c_perp: f64) -> Self {
        self.c_perp = c_perp;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("d_g", self.d_g),
            ("d_e", self.d_e),
            ("q", self.q),
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("a_par", self.a_par),
            ("a_perp", self.a_perp),
            ("c_par", self.c_par),
            ("c_perp", self.c_perp),
            ("strain_e", self.strain_e),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!("{name} = {v} is not finite")));
        }
        if self.d_g <= 0.0 || self.d_e <= 0.0 {
            return Err(Error::InvalidParameter("zero-field splittings must be positive".into()));
        }
        Ok(())
    }
}

/// Magnitude and polar angle of the static field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FieldConfig {
    pub b_gauss: f64,
    pub theta_deg: f64,
}

impl FieldConfig {
    pub fn new(b_gauss: f64, theta_deg: f64) -> Self {
        FieldConfig { b_gauss, theta_deg }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b_gauss.is_finite() || self.b_gauss < 0.0 {
            return Err(Error::InvalidParameter(format!("field {} G must be >= 0", self.b_gauss)));
        }
        if !self.theta_deg.is_finite() || !(0.0..=90.0).contains(&self.theta_deg) {
            return Err(Error::InvalidParameter(format!(
                "angle {} deg outside [0, 90]",
                self.theta_deg
            )));
        }
        Ok(())
    }

    /// Cartesian field components (G).
    pub fn vector(&self) -> [f64; 3] {
        let t = self.theta_deg.to_radians();
        [self.b_gauss * t.sin(), 0.0, self.b_gauss * t.cos()]
    }
}

/// Total Hamiltonian over the composite basis, block diagonal by manifold.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonianSet {
    pub space: StateSpace,
    pub h_total: DMatrix<C64>,
}

impl HamiltonianSet {
    pub fn dim(&self) -> usize {
        self.h_total.nrows()
    }

    pub fn block(&self, manifold: Manifold) -> Result<DMatrix<C64>> {
        let (start, size) = self.space.block(manifold)?;
        Ok(self.h_total.view((start, start), (size, size)).into_owned())
    }
}

fn re(x: f64) -> C64 {
    C64::new(x, 0.0)
}

struct BlockTerms {
    zfs: f64,
    strain: f64,
    hf_par: f64,
    hf_perp: f64,
}

fn electron_nuclear_block(p: &SystemParams, f: &FieldConfig, t: BlockTerms) -> DMatrix<C64> {
    let s = spin1_ops();
    let [bx, _, bz] = f.vector();
    let k = crate::spin::kron3;
    let id = &s.id3;
    let sz2 = s.sz * s.sz;
    let electron = sz2 * re(t.zfs)
        + (s.sx * re(bx) + s.sz * re(bz)) * re(p.gamma_e)
        + (s.sx * s.sx - s.sy * s.sy) * re(t.strain);
    let nucleus = sz2 * re(p.q) + (s.sx * re(bx) + s.sz * re(bz)) * re(p.gamma_n);
    k(&electron, id)
        + k(id, &nucleus)
        + k(&s.sz, &s.sz) * re(t.hf_par)
        + (k(&s.sx, &s.sx) + k(&s.sy, &s.sy)) * re(t.hf_perp)
}

fn nuclear_block(p: &SystemParams, f: &FieldConfig) -> Matrix3<C64> {
    let s = spin1_ops();
    let [bx, _, bz] = f.vector();
    s.sz * s.sz * re(p.q) + (s.sx * re(bx) + s.sz * re(bz)) * re(p.gamma_n)
}

pub fn build_hamiltonian(p: &SystemParams, f: &FieldConfig, space: StateSpace) -> HamiltonianSet {
    let d = space.dim();
    let mut h = DMatrix::zeros(d, d);
    let ground = electron_nuclear_block(
        p,
        f,
        BlockTerms { zfs: p.d_g, strain: p.strain_e, hf_par: p.a_par, hf_perp: p.a_perp },
    );
    let excited = electron_nuclear_block(
        p,
        f,
        BlockTerms { zfs: p.d_e, strain: 0.0, hf_par: p.c_par, hf_perp: p.c_perp },
    );
    h.view_mut((0, 0), (9, 9)).copy_from(&ground);
    h.view_mut((9, 9), (9, 9)).copy_from(&excited);
    let nuc = nuclear_block(p, f);
    let id = Matrix3::identity();
    for &m in space.manifolds() {
        if !m.has_electron_spin() {
            // embedding cannot fail for an identity electronic factor
            h += embed(&id, &nuc, m, space).expect("spinless block");
        }
    }
    HamiltonianSet { space, h_total: h }
}

/// Aligned-field centre of the excited-state level anticrossing (G).
pub fn eslac_field(p: &SystemParams) -> Result<f64> {
    if p.gamma_e <= 0.0 {
        return Err(Error::Precondition("gamma_e must be positive".into()));
    }
    Ok(p.d_e / p.gamma_e)
}

/// Hyperfine- and strain-free ground electronic Hamiltonian (3×3, MHz).
pub fn ground_electronic_hamiltonian(p: &SystemParams, f: &FieldConfig) -> Matrix3<C64> {
    let s = spin1_ops();
    let [bx, _, bz] = f.vector();
    s.sz * s.sz * re(p.d_g) + (s.sx * re(bx) + s.sz * re(bz)) * re(p.gamma_e)
}

/// Upper field bound for the transition-frequency model; the ground-state
/// anticrossing sits near 1025 G.
pub const MAX_CALIBRATION_FIELD: f64 = 900.0;

/// `(ν+, ν−)` of the m_s = 0 → ±1 ground transitions (MHz), from a direct
/// Hermitian eigensolve.
pub fn ground_transition_frequencies(p: &SystemParams, f: &FieldConfig) -> Result<(f64, f64)> {
    f.validate()?;
    if f.b_gauss >= MAX_CALIBRATION_FIELD {
        return Err(Error::Precondition(format!(
            "B = {} G too close to the ground-state anticrossing (limit {MAX_CALIBRATION_FIELD} G)",
            f.b_gauss
        )));
    }
    let h = ground_electronic_hamiltonian(p, f);
    let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    Ok((ev[2] - ev[0], ev[1] - ev[0]))
}

/// Same frequencies via the closed-form cubic.
pub fn transition_frequencies_from_cubic(p: &SystemParams, f: &FieldConfig) -> Result<(f64, f64)> {
    let r = solve_cubic(p, f.b_gauss, f.theta_deg)?;
    Ok((r[2] - r[0], r[1] - r[0]))
}
