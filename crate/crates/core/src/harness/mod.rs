//! Experiment drivers behind the command-line tool.

pub mod benchmark;
pub mod coarsen;
pub mod config;
pub mod ode;
pub mod output;
pub mod pde;
pub mod run;
pub mod singularity;

pub use ode::{ode_convergence, ConvergenceRow};
pub use pde::pde_convergence;
pub use run::{run_trajectory, RunConfig, RunReport, StepRecord};
