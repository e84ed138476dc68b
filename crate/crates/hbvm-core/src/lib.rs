//! Energy-conserving HBVM(k,s) integrators for separable Hamiltonian systems
//! subject to quadratic holonomic constraints.
//!
//! The problem class is
//!
//! ```text
//!     H(q, p) = 1/2 p' M^-1 p - U(q),
//!     q' = M^-1 p,        p' = grad U(q) - grad g(q) lambda,      g(q) = 0,
//! ```
//!
//! with `g: R^m -> R^nu` made of quadratic polynomials and `M` symmetric
//! positive definite. An HBVM(k,s) step expands the stage velocity and the
//! potential gradient in the shifted orthonormal Legendre basis, keeping `s`
//! Fourier coefficients and evaluating the gradient coefficients with a
//! `k`-node Gauss rule (`k >= s`). The stage multipliers are chosen so that
//! the constraint and, for polynomial potentials of moderate degree, the
//! Hamiltonian are conserved exactly (up to round-off); for general
//! potentials the energy error decays as `O(h^{2k+1})`.
//!
//! Module layout:
//!
//! * [`polybasis`] - shifted orthonormal Legendre basis, Gauss rules, and the
//!   tableau matrices of the method;
//! * [`linalg`] - the small dense factorizations and block products used by
//!   the stage equations;
//! * [`model`] - the constrained Hamiltonian problem and its exact
//!   Lagrange-multiplier formula;
//! * [`hbvm`] - the fixed-point solution of the discrete stage equations,
//!   single steps, and propagation;
//! * [`diagnostics`] - reference solutions, error metrics, and empirical
//!   convergence tables;
//! * [`problems`] - ready-made benchmark problems (pendula and a tethered
//!   satellite system).

pub mod diagnostics;
pub mod hbvm;
pub mod linalg;
pub mod model;
pub mod polybasis;
pub mod problems;

pub use diagnostics::{
    compute_metrics, convergence_study, convergence_study_with_reference, reference_solution,
    ConvergenceRow, ConvergenceTable, DyadicSchedule, ErrorMetrics, Execution, RateEntry,
    ReferenceConfig, ReferenceTrajectory, StudyConfig,
};
pub use hbvm::{fixed_point_step, propagate, SolverConfig, StepResult, Trajectory};
pub use model::{ConstrainedHamiltonianSystem, State};
pub use polybasis::{build_tableau, HbvmTableau};
pub use problems::BenchmarkProblem;
