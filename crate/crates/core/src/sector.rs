//! Invariant Hermitian sectors of a Lindblad generator.
//!
//! Jumps of the form `|m⟩⟨n|` only move populations, so coherences between
//! manifolds never feed back into the block-diagonal part of ρ. Starting
//! from a given support, the set of density-matrix entries reachable under
//! 𝓛 is closed, and the generator restricted to it is exact.
//!
//! Inside a sector a Hermitian ρ is stored as real coordinates: `ρ[i,i]` for
//! diagonal entries and `(Re ρ[i,j], Im ρ[i,j])` for `i < j`. Because 𝓛 maps
//! Hermitian matrices to Hermitian matrices, its restriction is a real
//! matrix with the same spectrum.

use std::collections::{HashMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use nalgebra_sparse::CscMatrix;

use crate::dissipator::Liouvillian;
use crate::error::{Error, Result};
use crate::spin::{StateSpace, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Coord {
    Diag(usize),
    Re(usize, usize),
    Im(usize, usize),
}

#[derive(Debug, Clone)]
pub struct HermitianSector {
    space: StateSpace,
    coords: Vec<Coord>,
    /// First coordinate of each upper-triangular pair.
    lookup: HashMap<(usize, usize), usize>,
}

impl HermitianSector {
    /// Every entry of the `d×d` matrix.
    pub fn full(space: StateSpace) -> Self {
        let d = space.dim();
        let pairs = (0..d).flat_map(|j| (0..=j).map(move |i| (i, j)));
        Self::from_pairs(space, pairs)
    }

    /// Smallest sector containing `seeds` that every generator in `gens`
    /// leaves invariant.
    pub fn closure(
        gens: &[&Liouvillian],
        space: StateSpace,
        seeds: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self> {
        let d = space.dim();
        for g in gens {
            if g.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: g.dim() });
            }
        }
        let cscs: Vec<CscMatrix<C64>> = gens.iter().map(|g| g.to_csc()).collect();
        let mut seen = vec![false; d * d];
        let mut queue = VecDeque::new();
        let visit = |k: usize, seen: &mut Vec<bool>, queue: &mut VecDeque<usize>| {
            for idx in [k, (k / d) + (k % d) * d] {
                if !seen[idx] {
                    seen[idx] = true;
                    queue.push_back(idx);
                }
            }
        };
        for (i, j) in seeds {
            if i >= d || j >= d {
                return Err(Error::IndexOutOfRange { index: i.max(j), dim: d });
            }
            visit(i + j * d, &mut seen, &mut queue);
        }
        while let Some(k) = queue.pop_front() {
            for csc in &cscs {
                let col = csc.col(k);
                for (&row, v) in col.row_indices().iter().zip(col.values()) {
                    if *v != C64::new(0.0, 0.0) {
                        visit(row, &mut seen, &mut queue);
                    }
                }
            }
        }
        let pairs = (0..d)
            .flat_map(|j| (0..=j).map(move |i| (i, j)))
            .filter(|&(i, j)| seen[i + j * d]);
        Ok(Self::from_pairs(space, pairs))
    }

    /// Sector reached from the support of `rho`.
    pub fn for_state(gens: &[&Liouvillian], rho: &DMatrix<C64>) -> Result<Self> {
        let space = StateSpace::from_dim(rho.nrows())?;
        let d = space.dim();
        let seeds = (0..d)
            .flat_map(|j| (0..d).map(move |i| (i, j)))
            .filter(|&(i, j)| rho[(i, j)] != C64::new(0.0, 0.0));
        Self::closure(gens, space, seeds)
    }

    /// Sector reached from the maximally mixed state.
    pub fn for_populations(gens: &[&Liouvillian], space: StateSpace) -> Result<Self> {
        Self::closure(gens, space, (0..space.dim()).map(|i| (i, i)))
    }

    fn from_pairs(space: StateSpace, pairs: impl Iterator<Item = (usize, usize)>) -> Self {
        let mut coords = Vec::new();
        let mut lookup = HashMap::new();
        for (i, j) in pairs {
            lookup.insert((i, j), coords.len());
            if i == j {
                coords.push(Coord::Diag(i));
            } else {
                coords.push(Coord::Re(i, j));
                coords.push(Coord::Im(i, j));
            }
        }
        HermitianSector { space, coords, lookup }
    }

    pub fn space(&self) -> StateSpace {
        self.space
    }

    /// Number of real coordinates.
    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.lookup.contains_key(&(i.min(j), i.max(j)))
    }

    /// Real coordinates of a Hermitian matrix. Fails if `rho` has support
    /// outside the sector.
    pub fn to_real(&self, rho: &DMatrix<C64>) -> Result<DVector<f64>> {
        let d = self.space.dim();
        if rho.nrows() != d || rho.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, found: rho.nrows() });
        }
        for j in 0..d {
            for i in 0..=j {
                if rho[(i, j)] != C64::new(0.0, 0.0) && !self.contains(i, j) {
                    return Err(Error::Precondition(format!(
                        "density matrix entry ({i}, {j}) lies outside the propagation sector"
                    )));
                }
            }
        }
        Ok(DVector::from_iterator(
            self.len(),
            self.coords.iter().map(|c| match *c {
                Coord::Diag(i) => rho[(i, i)].re,
                Coord::Re(i, j) => 0.5 * (rho[(i, j)].re + rho[(j, i)].re),
                Coord::Im(i, j) => 0.5 * (rho[(i, j)].im - rho[(j, i)].im),
            }),
        ))
    }

    /// Hermitian matrix from real coordinates.
    pub fn from_real(&self, x: &DVector<f64>) -> DMatrix<C64> {
        let d = self.space.dim();
        let mut rho = DMatrix::zeros(d, d);
        for (c, &v) in self.coords.iter().zip(x.iter()) {
            match *c {
                Coord::Diag(i) => rho[(i, i)] = C64::new(v, 0.0),
                Coord::Re(i, j) => {
                    rho[(i, j)].re = v;
                    rho[(j, i)].re = v;
                }
                Coord::Im(i, j) => {
                    rho[(i, j)].im = v;
                    rho[(j, i)].im = -v;
                }
            }
        }
        rho
    }

    /// Row vector `t` with `t·x = tr ρ`.
    pub fn trace_functional(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.len(),
            self.coords.iter().map(|c| if matches!(c, Coord::Diag(_)) { 1.0 } else { 0.0 }),
        )
    }

    /// Coordinate index of the population `ρ[i, i]`.
    pub fn population_coord(&self, i: usize) -> Option<usize> {
        self.lookup.get(&(i, i)).copied()
    }

    /// Real matrix of `𝓛` restricted to this sector.
    pub fn real_generator(&self, l: &Liouvillian) -> Result<DMatrix<f64>> {
        let d = self.space.dim();
        if l.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, found: l.dim() });
        }
        let csc = l.to_csc();
        let n = self.len();
        let mut g = DMatrix::zeros(n, n);
        let mut out = vec![C64::new(0.0, 0.0); d * d];
        let mut touched = Vec::new();
        for (col, c) in self.coords.iter().enumerate() {
            let input: Vec<(usize, C64)> = match *c {
                Coord::Diag(i) => vec![(i + i * d, C64::new(1.0, 0.0))],
                Coord::Re(i, j) => vec![(i + j * d, C64::new(1.0, 0.0)), (j + i * d, C64::new(1.0, 0.0))],
                Coord::Im(i, j) => vec![(i + j * d, C64::new(0.0, 1.0)), (j + i * d, C64::new(0.0, -1.0))],
            };
            for (k, scale) in input {
                let column = csc.col(k);
                for (&row, v) in column.row_indices().iter().zip(column.values()) {
                    if out[row] == C64::new(0.0, 0.0) {
                        touched.push(row);
                    }
                    out[row] += *v * scale;
                }
            }
            for &row in &touched {
                let (i, j) = (row % d, row / d);
                if !self.contains(i, j) && out[row].norm() > 0.0 {
                    return Err(Error::InvariantViolation(format!(
                        "generator leaks out of the sector at entry ({i}, {j})"
                    )));
                }
            }
            for (r, rc) in self.coords.iter().enumerate() {
                let v = match *rc {
                    Coord::Diag(i) => out[i + i * d].re,
                    Coord::Re(i, j) => out[i + j * d].re,
                    Coord::Im(i, j) => out[i + j * d].im,
                };
                if v != 0.0 {
                    g[(r, col)] = v;
                }
            }
            for &row in &touched {
                out[row] = C64::new(0.0, 0.0);
            }
            touched.clear();
        }
        Ok(g)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipator::{assemble_liouvillian, build_jumps, RateModel};
    use crate::hamiltonian::{build_hamiltonian, FieldConfig, SystemParams};

    fn generator(theta: f64) -> Liouvillian {
        let h = build_hamiltonian(
            &SystemParams::default(),
            &FieldConfig::new(348.0, theta),
            StateSpace::Standard,
        );
        let js = build_jumps(&RateModel::default(), StateSpace::Standard).unwrap();
        assemble_liouvillian(&h, &js).unwrap()
    }

    #[test]
    fn population_sector_is_block_diagonal() {
        let l = generator(1.5);
        let s = HermitianSector::for_populations(&[&l], StateSpace::Standard).unwrap();
        // 9² + 9² + 3² real coordinates
        assert_eq!(s.len(), 171);
        assert!(!s.contains(0, 9));
        assert!(s.contains(0, 8));
    }

    #[test]
    fn real_generator_matches_complex_action() {
        let l = generator(1.5);
        let s = HermitianSector::full(StateSpace::Standard);
        let g = s.real_generator(&l).unwrap();
        let mut rho = DMatrix::<C64>::zeros(21, 21);
        for i in 0..21 {
            for j in 0..21 {
                rho[(i, j)] = C64::new(((i * 7 + j * 3) % 5) as f64, (i as f64 - j as f64) * 0.1);
            }
        }
        let rho = &rho + rho.adjoint();
        let direct = l.apply(&rho).unwrap();
        let via = s.from_real(&(&g * s.to_real(&rho).unwrap()));
        assert!((direct - via).norm() < 1e-8 * rho.norm() * g.norm());
    }

    #[test]
    fn round_trip_and_trace() {
        let s = HermitianSector::full(StateSpace::Standard);
        let mut rho = DMatrix::<C64>::identity(21, 21) * C64::new(1.0 / 21.0, 0.0);
        rho[(0, 3)] = C64::new(0.01, 0.02);
        rho[(3, 0)] = C64::new(0.01, -0.02);
        let x = s.to_real(&rho).unwrap();
        assert!((s.from_real(&x) - &rho).norm() < 1e-15);
        assert!((s.trace_functional().dot(&x) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_support_outside_sector() {
        let l = generator(0.0);
        let s = HermitianSector::for_populations(&[&l], StateSpace::Standard).unwrap();
        let mut rho = DMatrix::<C64>::zeros(21, 21);
        rho[(0, 12)] = C64::new(0.1, 0.0);
        rho[(12, 0)] = C64::new(0.1, 0.0);
        assert!(s.to_real(&rho).is_err());
    }
}
