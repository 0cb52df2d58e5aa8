//! Spin-1 operators and the composite electron ⊗ nucleus basis.
//!
//! The state space is ordered as
//!
//! | flat index | manifold | labels                      |
//! |-----------:|----------|-----------------------------|
//! | 0..9       | Ground   | m_s = +1, 0, −1 (outer) × m_i = +1, 0, −1 (inner) |
//! | 9..18      | Excited  | same ordering as Ground     |
//! | 18..21     | Singlet  | m_i = +1, 0, −1             |
//! | 21..24     | Nv0      | m_i = +1, 0, −1 (only with the charge-state extension) |
//!
//! In the seven-level optical scheme, level 1 is the ground m_s = 0 block,
//! levels 2 and 3 the ground m_s = ±1 blocks, level 4 the excited m_s = 0
//! block, levels 5 and 6 the excited m_s = ±1 blocks and level 7 the singlet.

use nalgebra::{DMatrix, Matrix3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Largest entry modulus of a complex matrix.
pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<C64, R, C>>(
    m: &nalgebra::Matrix<C64, R, C, S>,
) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Spin projections in basis order.
pub const PROJECTIONS: [i8; 3] = [1, 0, -1];

/// Position of a spin projection inside a 3-dimensional block.
pub fn projection_slot(m: i8) -> Result<usize> {
    match m {
        1 => Ok(0),
        0 => Ok(1),
        -1 => Ok(2),
        _ => Err(Error::InvalidBasis(format!("spin-1 projection {m}"))),
    }
}

/// Dimensionless spin-1 operators in the m = +1, 0, −1 basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinOps {
    pub sx: Matrix3<C64>,
    pub sy: Matrix3<C64>,
    pub sz: Matrix3<C64>,
    pub id3: Matrix3<C64>,
}

pub fn spin1_ops() -> SpinOps {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let z = C64::new(0.0, 0.0);
    let re = |x: f64| C64::new(x, 0.0);
    let im = |x: f64| C64::new(0.0, x);
    SpinOps {
        sx: Matrix3::new(z, re(r), z, re(r), z, re(r), z, re(r), z),
        sy: Matrix3::new(z, im(-r), z, im(r), z, im(-r), z, im(r), z),
        sz: Matrix3::from_diagonal(&nalgebra::Vector3::new(re(1.0), z, re(-1.0))),
        id3: Matrix3::identity(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Manifold {
    Ground,
    Excited,
    Singlet,
    Nv0,
}

impl Manifold {
    pub fn has_electron_spin(self) -> bool {
        matches!(self, Manifold::Ground | Manifold::Excited)
    }
}

/// Size of the composite state space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateSpace {
    /// Ground, excited and singlet manifolds (21 levels).
    Standard,
    /// Adds the NV⁰ bottleneck manifold (24 levels).
    WithNv0,
}

impl StateSpace {
    pub fn dim(self) -> usize {
        match self {
            StateSpace::Standard => 21,
            StateSpace::WithNv0 => 24,
        }
    }

    pub fn from_dim(dim: usize) -> Result<Self> {
        match dim {
            21 => Ok(StateSpace::Standard),
            24 => Ok(StateSpace::WithNv0),
            _ => Err(Error::DimensionMismatch { expected: 21, found: dim }),
        }
    }

    pub fn contains(self, manifold: Manifold) -> bool {
        manifold != Manifold::Nv0 || self == StateSpace::WithNv0
    }

    /// First flat index and size of a manifold's block.
    pub fn block(self, manifold: Manifold) -> Result<(usize, usize)> {
        if !self.contains(manifold) {
            return Err(Error::InvalidBasis(format!("{manifold:?} not in {self:?} space")));
        }
        Ok(match manifold {
            Manifold::Ground => (0, 9),
            Manifold::Excited => (9, 9),
            Manifold::Singlet => (18, 3),
            Manifold::Nv0 => (21, 3),
        })
    }

    pub fn manifolds(self) -> &'static [Manifold] {
        match self {
            StateSpace::Standard => &[Manifold::Ground, Manifold::Excited, Manifold::Singlet],
            StateSpace::WithNv0 => {
                &[Manifold::Ground, Manifold::Excited, Manifold::Singlet, Manifold::Nv0]
            }
        }
    }

    /// Manifold of every flat index, in order.
    pub fn manifold_of(self, index: usize) -> Result<Manifold> {
        basis_of(index, self).map(|b| b.manifold)
    }
}

/// A labelled basis state. `m_s` is `None` for the singlet and NV⁰ manifolds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BasisIndex {
    pub manifold: Manifold,
    pub m_s: Option<i8>,
    pub m_i: i8,
}

impl BasisIndex {
    pub fn ground(m_s: i8, m_i: i8) -> Self {
        BasisIndex { manifold: Manifold::Ground, m_s: Some(m_s), m_i }
    }

    pub fn excited(m_s: i8, m_i: i8) -> Self {
        BasisIndex { manifold: Manifold::Excited, m_s: Some(m_s), m_i }
    }

    pub fn singlet(m_i: i8) -> Self {
        BasisIndex { manifold: Manifold::Singlet, m_s: None, m_i }
    }

    pub fn nv0(m_i: i8) -> Self {
        BasisIndex { manifold: Manifold::Nv0, m_s: None, m_i }
    }
}

pub fn flat_index(b: BasisIndex, space: StateSpace) -> Result<usize> {
    let (start, _) = space.block(b.manifold)?;
    let mi = projection_slot(b.m_i)?;
    match (b.manifold.has_electron_spin(), b.m_s) {
        (true, Some(ms)) => Ok(start + 3 * projection_slot(ms)? + mi),
        (false, None) => Ok(start + mi),
        (true, None) => Err(Error::InvalidBasis(format!("{:?} state needs m_s", b.manifold))),
        (false, Some(_)) => Err(Error::InvalidBasis(format!("{:?} state has no m_s", b.manifold))),
    }
}

pub fn basis_of(index: usize, space: StateSpace) -> Result<BasisIndex> {
    let dim = space.dim();
    if index >= dim {
        return Err(Error::IndexOutOfRange { index, dim });
    }
    Ok(match index {
        0..=8 => BasisIndex::ground(PROJECTIONS[index / 3], PROJECTIONS[index % 3]),
        9..=17 => BasisIndex::excited(PROJECTIONS[(index - 9) / 3], PROJECTIONS[(index - 9) % 3]),
        18..=20 => BasisIndex::singlet(PROJECTIONS[index - 18]),
        _ => BasisIndex::nv0(PROJECTIONS[index - 21]),
    })
}

/// Kronecker product of two 3×3 factors, electron outer.
pub fn kron3(a: &Matrix3<C64>, b: &Matrix3<C64>) -> DMatrix<C64> {
    let mut out = DMatrix::zeros(9, 9);
    for i in 0..3 {
        for j in 0..3 {
            let aij = a[(i, j)];
            if aij == C64::new(0.0, 0.0) {
                continue;
            }
            for k in 0..3 {
                for l in 0..3 {
                    out[(3 * i + k, 3 * j + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// Places `op_electron ⊗ op_nucleus` in the diagonal block of `manifold`.
///
/// Spinless manifolds (singlet, NV⁰) only accept the identity as electronic
/// factor; the result is then `op_nucleus` in that block.
pub fn embed(
    op_electron: &Matrix3<C64>,
    op_nucleus: &Matrix3<C64>,
    manifold: Manifold,
    space: StateSpace,
) -> Result<DMatrix<C64>> {
    let (start, size) = space.block(manifold)?;
    let mut out = DMatrix::zeros(space.dim(), space.dim());
    if manifold.has_electron_spin() {
        out.view_mut((start, start), (size, size))
            .copy_from(&kron3(op_electron, op_nucleus));
    } else {
        if (op_electron - Matrix3::identity()).norm() > 1e-14 {
            return Err(Error::InvalidEmbedding(format!(
                "{manifold:?} carries no electronic spin; electronic factor must be the identity"
            )));
        }
        out.view_mut((start, start), (3, 3)).copy_from(op_nucleus);
    }
    Ok(out)
}
