//! Numerics for self-stabilizing (McKean–Vlasov) diffusions in a double-well
//! potential.
//!
//! The crate is `no_std` with `alloc`. It covers polynomial potentials and
//! their assumption gates, grid densities and free energies, the granular
//! media equation, stationary measures by self-consistent fixed point, the
//! mean-field particle system, small-noise asymptotics, and the convergence
//! and basin experiments built on top of them.
#![cfg_attr(not(any(test, feature = "std")), no_std)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod asymptotics;
pub mod experiments;
pub mod math;
pub mod particles;
pub mod pde;
pub mod measures;
pub mod poly;
pub mod potentials;
pub mod quadrature;
pub mod stationary;

pub use measures::{
    free_energy, free_energy_lower_bound, reduced_free_energy, DensitySpec, FreeEnergyBreakdown,
    Grid, GridDensity, MeasureError, MomentVector,
};
pub use pde::{
    dissipation, dissipation_check, eta, evolve, DissipationReport, RunStatus, Scheme, SolverConfig,
    SolverError, TrajectoryRecord,
};
pub use poly::{Polynomial, SturmSequence};
pub use potentials::{
    convolve_with_moments, validate_confining, validate_interaction, ConfiningPotential,
    InteractionPotential, PotentialError,
};
pub use stationary::{
    enumerate, find_x0, fixed_point_solve, gibbs_density, EnumerationReport, M3Status,
    StationaryConfig, StationaryError, StationaryMeasure, Symmetry,
};
pub use particles::{
    drift_all, drift_all_pairwise, em_step, upsilon_n, Bandwidth, EmpiricalTrajectory,
    InitialLaw, ParticleConfig, ParticleError, ParticleState,
};
pub use asymptotics::{
    extract_minima, free_energy_sweep, laplace_ratio, laplace_report, AsymptoticsError,
    LaplaceReport, SweepReport,
};
pub use experiments::{
    inf_over_hyperplane, verify_basin, verify_global_convergence, BasinSpec, BasinVerdict,
    ConvergenceVerdict, ExperimentConfig, ExperimentError, Hypothesis, HypothesisCheck,
};
