//! Variational integrators for perturbed non-canonical Hamiltonian systems.
//!
//! The crate builds two-step variational integrators from truncated
//! discrete phase-space Lagrangians. The truncation order l in the
//! perturbation strength controls the local accuracy, O(eps^(l+1)), while
//! the time step stays O(1) by leaning on the analytic unperturbed flow.
//!
//! Modules:
//! - [`phase`]: chart, one-form, Hamiltonian vector fields, pairing function;
//! - [`lagrangian`]: the discrete Lagrangians L0, L1, L2 and the
//!   rotor-oscillator closed form;
//! - [`stepper`]: implicit two-step discrete Euler-Lagrange solver;
//! - [`oracle`]: adaptive Runge-Kutta reference integrator;
//! - [`diagnostics`]: symplecticity, energy and convergence measurements;
//! - [`systems`]: built-in example systems.

pub mod diagnostics;
pub mod error;
pub mod fd;
pub mod lagrangian;
pub mod oracle;
pub mod phase;
pub mod quad;
pub mod stepper;
pub mod systems;

pub use error::{PviError, Result};
pub use lagrangian::{DiscreteLagrangian, Order};
pub use oracle::OracleConfig;
pub use phase::{PhasePoint, SystemSpec};
pub use quad::QuadratureRule;
pub use stepper::{InitMode, Predictor, SolverConfig, Trajectory};
pub use systems::BuiltinName;
