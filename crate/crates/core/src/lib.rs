//! Lindblad model of optically pumped ¹⁴N nuclear polarization in the NV⁻
//! centre, and the estimators built on it.

pub mod cubic;
pub mod dissipator;
pub mod error;
pub mod estimation;
pub mod evolution;
pub mod fit;
pub mod hamiltonian;
pub mod sector;
pub mod spin;

pub use dissipator::{assemble_liouvillian, build_jumps, Jump, JumpSet, Liouvillian, RateModel, Recombination};
pub use error::{Error, Result};
pub use estimation::{
    calibrate_angle, calibrate_field, characteristic_times, chi2_scan, chi2_scan_components,
    estimate_cperp, rise_times, scan_cperp, AngleEstimate, CharacteristicTimes, Chi2Scan, Component,
    CperpEstimate, ExperimentTrace, ScanGrid, ScanMinimum, ScanPoint, SteadyObservation,
};
pub use evolution::{
    apply_pi_swap, dnp_sequence, populations, propagate, steady_populations, steady_state, DensityState,
    DnpModel, NuclearPopulations, PolarizationTrace,
};
pub use fit::{fit_exponential, ExpFit};
pub use hamiltonian::{
    build_hamiltonian, eslac_field, ground_transition_frequencies, FieldConfig, HamiltonianSet, SystemParams,
};
pub use cubic::solve_cubic;
pub use spin::{basis_of, embed, flat_index, spin1_ops, BasisIndex, Manifold, SpinOps, StateSpace};
