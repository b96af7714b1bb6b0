//! Noise-induced state transitions of the Morris-Lecar neuron under
//! symmetric alpha-stable Levy noise.
//!
//! The crate is organised around the analysis pipeline:
//!
//! - [`model`]: deterministic dynamics, fixed point, limit cycles, basins.
//! - [`stable_noise`]: symmetric stable laws, jump measure, samplers.
//! - [`fp_solver`]: the nonlocal Fokker-Planck equation on a rescaled grid.
//! - [`mlt`]: maximal likely trajectories, transition verdicts, phase diagrams.
//! - [`montecarlo`]: Euler-Maruyama ensembles used as an independent check.

pub mod fp_solver;
pub mod mlt;
pub mod model;
pub mod montecarlo;
pub mod special;
pub mod stable_noise;

pub use fp_solver::{DensityField, Domain, Grid, SolverConfig};
pub use mlt::{MlTrajectory, PhaseDiagram, TransitionVerdict, Verdict};
pub use model::{Landscape, LimitCycle, MlParams, State};
pub use stable_noise::StableSpec;
