//! Phase retrieval with gradient descent and momentum methods.
//!
//! The crate solves the real Gaussian phase retrieval problem, recovering
//! `x_star` (up to sign) from `y_i = (a_i · x_star)^2`, by minimising the
//! quartic least-squares cost
//!
//! ```text
//! f(x) = 1/(4m) * sum_i ((a_i · x)^2 - y_i)^2
//! ```
//!
//! with plain gradient descent, Polyak's heavy ball, or Nesterov's
//! accelerated gradient, starting from a spectral (or random) initial point.
//!
//! Alongside the solvers, [`diagnostics`] turns the usual
//! implicit-regularization argument into checks that can run next to a
//! solve: locality and incoherence predicates, the two-step contraction
//! matrices of the momentum methods, leave-one-out sequences, concentration
//! bounds for the sensing ensemble, and a convex quadratic rate oracle.
//!
//! ```
//! use accelwf::{model, init, solvers};
//!
//! let ens = model::SensingEnsemble::sample(200, 10, 0).unwrap();
//! let gt = model::GroundTruth::unit(10, 0).unwrap();
//! let y = model::observe(&ens, &gt).unwrap();
//! let start = init::spectral_init(&ens, &y, 1e-10, 1000).unwrap();
//! let params = solvers::default_params(10, 1.0, solvers::Method::Polyak).unwrap();
//! let trace = solvers::run(&ens, &y, &start.x0, &params, Some(&gt)).unwrap();
//! assert_eq!(trace.status, solvers::Status::Converged);
//! ```

pub mod diagnostics;
pub mod error;
pub mod init;
pub mod linalg;
pub mod model;
pub mod objective;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};
pub use model::{dist, GroundTruth, Observations, SensingEnsemble};
pub use objective::PhaseObjective;
pub use solvers::{IterationTrace, Method, SolverParams, SolverState, Status};
