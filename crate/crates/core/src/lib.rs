//! Simulation and analysis of chaotic weak chimeras in weakly coupled
//! populations of identical phase oscillators.
//!
//! The crate is organized bottom-up: [`coupling`] functions feed [`network`]
//! vector fields, which the [`integrator`] advances; [`observables`] and
//! [`lyapunov`] analyze the resulting trajectories, [`bounds`] evaluates the
//! persistence estimates, and [`experiment`] ties everything to the
//! `chimera` command-line runner.

pub mod bounds;
pub mod coupling;
pub mod error;
pub mod experiment;
pub mod integrator;
pub mod lyapunov;
pub mod network;
pub mod observables;

pub use coupling::{BumpArgument, BumpReading, BumpTerm, CouplingSpec, FourierSeries, TableIndexing};
pub use error::{Error, Result};
pub use integrator::{integrate, integrate_augmented, IntegratorConfig, LiftedTrajectory};
pub use lyapunov::{max_lyapunov, LyapunovConfig, LyapunovResult};
pub use network::{NetworkSpec, PopulationSpec};
pub use observables::{FrequencyInterval, FrequencyReport};

/// Flat population-major phase vector `(phi_{1,1}, .., phi_{1,n}, phi_{2,1}, ..)`.
pub type PhaseVector = Vec<f64>;
