//! BROJA bivariate partial information decomposition.
//!
//! Splits the mutual information `MI(X; (Y, Z))` of a finite joint
//! distribution into shared, unique and synergistic parts by solving an
//! exponential cone program with an in-house barrier method, and audits the
//! returned solution through its dual certificate.

pub mod cone;
pub mod distributions;
pub mod error;
pub mod gates;
mod linalg;
pub mod model;
pub mod oracle;
pub mod pid;
pub mod quality;
pub mod solver;

pub use distributions::{Label, Outcome};
pub use error::{Error, Result};
pub use gates::{copy_gate, gate, random_simplex_distribution, GateKind};
pub use pid::{pid, pid_with_log, OutputMode, PidResult, ReturnData};
pub use solver::{SolveStatus, SolverParams, SOLVER_NAME};
