//! Semiclassical phase-space quantum dynamics.
//!
//! Wave packet transform, anisotropic Gaussian propagation of phase-space
//! wavefunctions, the Fourier-integral representation of evolved WKB
//! states, and narrow beam asymptotics, with closed-form oracles for
//! free motion, a linear field and the harmonic oscillator.

pub mod beam;
pub mod classical;
pub mod error;
pub mod exact;
pub mod fourier;
pub mod hamiltonian;
pub mod linalg;
pub mod propagator;
pub mod quadrature;
mod stencil;
pub mod types;
pub mod wavepacket;

pub use beam::{
    beam_amplitude, beam_field, beam_phase, beam_q, build_beam_cache, integrate_beam_record,
    manifold_phase_discrepancy, nearest_point, on_manifold_restriction, BeamCache, BeamField,
    BeamRecord, LagrangianChart,
};
pub use classical::{
    anisotropy_q, anisotropy_z, ehrenfest_time, integrate_flow, integrate_orbit,
    integrate_variational, EhrenfestTime, OrbitEndpoint, TrajectoryRecord, VariationalState,
    DEFAULT_DT,
};
pub use error::{Error, Result};
pub use exact::{
    error_norms, exact_field, exact_psi, exact_value, ErrorNorms, ScenarioKind, ScenarioOracle,
};
pub use fourier::{eval_fourier_integral, solve_stationary_point, FourierProblem};
pub use hamiltonian::{double_phase_symbol, CustomHamiltonian, HamiltonianModel, ModelKind};
pub use linalg::{canonical_j, check_scaled_symplectic, check_siegel, CMat, RMat, SiegelCheck};
pub use num_complex::Complex64;
pub use propagator::{
    apply_phase_space_hamiltonian, bergmann_kernel, kernel_frozen, kernel_kz, propagate_aga,
    propagate_frozen, superpose, KernelKind, SourceCache,
};
pub use quadrature::PhaseSpaceQuadrature;
pub use types::{
    ComplexField, ComplexSymMatrix, DoublePhasePoint, GridSpec, Method, PhasePoint,
    SemiclassicalConfig,
};
pub use wavepacket::{
    fock_bargmann_residual, inverse_wave_packet_transform, wave_packet_transform, GaussianWkb,
    TransformQuadrature, WkbInitialData,
};
