//! One-dimensional Hamiltonian field dynamics.
//!
//! Relativistic nonlinear wave equations `psi_tt = psi_xx - m^2 psi + F(psi) - V(x) psi`
//! on uniform grids: kinks of the Ginzburg-Landau equation, solitary waves of
//! polynomial models, symplectic time stepping, linearized spectra,
//! structure tracking and adiabatic effective dynamics of solitons.
//!
//! All numerics are generic over [`Scalar`] (`f32`/`f64`); the aliases at the
//! crate root fix `f64`, which is what the experiments use.

pub mod diagnostics;
pub mod effective;
pub mod error;
pub mod field;
pub mod integrate;
pub mod models;
pub mod scalar;
pub mod soliton;
pub mod spectral;
pub mod string_osc;

pub use diagnostics::{
    convergence_report, detect_kinks, fit_manifold, global_soliton_center, line_fit, measure_oscillation,
    measure_width, ridge_speeds, soliton_center, track, track_soliton, Band, BandConfig, ConvergenceReport,
    FitOptions, KinkDetection, KinkTrack, ManifoldFit, OscillationEstimate, RidgeOptions, SolitonTrack, Track,
    TrackEvent,
};
pub use effective::{
    compare_adiabatic, fit_effective_mass, integrate_effective, tabulate_family, AdiabaticOptions,
    AdiabaticReport, EffectiveMass, EffectivePotential, EffectiveTrajectory, FamilyRow, MonotoneCubic,
    SolitonCoupledPotential, SolitonFamilyTable,
};
pub use error::{LabError, Result};
pub use field::{
    charge, energy, local_l2_distance, local_l2_distance_about, local_phase_distance, momentum,
    EnergySnapshot, FieldKind, FieldState, Grid1D, Samples, StateView,
};
pub use integrate::{
    run, run_observables, step, Boundary, Dynamics, ForceLaw, IntegratorConfig, Probe, Series,
    Stepper, Trajectory,
};
pub use models::{force_field, ExternalPotential, ModelSpec, Nonlinearity};
pub use num_complex::Complex;
pub use string_osc::{
    free_trace, simulate_string, stationary_states, trace_ode_oracle, Coupling, DeltaRegularization,
    StringOscillatorModel, TraceSeries,
};
pub use spectral::{
    discrete_spectrum, group_velocity, wiener_check, SchrodingerOperator1D, Spectrum, WienerReport,
};
pub use scalar::{FieldValue, Scalar};
pub use soliton::{
    frozen_profile, internal_mode_frequency, internal_mode_shape, kink, kink_profile,
    kink_with_internal_mode, moving_soliton, solve_profile, solve_profile_with, static_kink_width,
    KinkSpec, ProfileOptions, SolitaryWaveProfile,
};

pub type Grid = Grid1D<f64>;
pub type State = FieldState<f64>;
pub type Model = ModelSpec<f64>;
pub type Energy = EnergySnapshot<f64>;
pub type Config = IntegratorConfig<f64>;
pub type Traj = Trajectory<f64>;
pub type Profile = SolitaryWaveProfile<f64>;
pub type Family = SolitonFamilyTable<f64>;
