//! Rate operator quantum jump (ROQJ) unravellings of time-local master
//! equations
//!
//! ```text
//! dρ/dt = −i[H, ρ] + Σ_α c_α(t) (L_α ρ L_α† − ½{L_α†L_α, ρ})
//! ```
//!
//! with rates c_α(t) that may turn negative. Trajectories jump to eigenvectors
//! of the rate operator W_ψ; when W_ψ has negative eigenvalues, ensemble
//! members jump between each other instead ([`engines::roqj_step_general`]).

pub mod analysis;
pub mod engines;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod rate_operator;

pub use analysis::{ensemble_average, observable_mean_stderr, trace_distance, Observable, SimulationResult};
pub use engines::{run, EngineKind, Ensemble, InitialState, RunConfig, TrajectoryClass};
pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, DensityMatrix, PureState};
pub use model::{LindbladTerm, MasterEquationModel, ModelAt, TimeOperator, TimeRate};
