//! Learning the factor graphs of a Cartesian product graph from two-way signals.

pub mod error;
pub mod experiment;
pub mod graph;
pub mod io;
pub mod metrics;
pub mod missing;
pub mod model;
pub mod solver;
pub mod spectral;
pub mod synth;

pub use error::{Error, GraphId, Result};
pub use graph::{Laplacian, ProductModel, WeightVector};
pub use missing::{mwgl_missing_solve, ImputationConfig, MissingSolveResult, ObservationMask};
pub use model::{ModeCovariances, SignalSet};
pub use solver::{mwgl_solve, mwgl_solve_signals, SolveResult, SolverConfig};
