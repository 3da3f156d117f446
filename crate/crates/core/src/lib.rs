//! Quantum kicked rotor under periodic and quasiperiodic kick schedules.
//!
//! The wavefunction lives in the momentum basis ([`state`]). Kick timelines
//! come from [`schedule`], one-step maps and their adjoints from
//! [`propagator`], diagnostics from [`observables`], and the echo protocols
//! and scans from [`experiments`].

pub mod bessel;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
pub mod observables;
pub mod propagator;
pub mod schedule;
pub mod state;
pub mod validate;

pub use error::{Error, ErrorCategory, Result};
pub use experiments::{apply_perturbation, run_forward, run_reversal, ExperimentPlan, ReversalResult};
pub use observables::{ObservableSeries, Sample};
pub use propagator::{Propagator, PropagatorKind, StepParams};
pub use schedule::{build_schedule, KickSchedule, ScheduleMode};
pub use state::{InitialStateSpec, RotorState};
