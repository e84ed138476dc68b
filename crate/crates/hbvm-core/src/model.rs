//! Separable Hamiltonian systems with quadratic holonomic constraints.
//!
//! The model class is
//!
//! ```text
//!     H(q, p) = 1/2 p' M^{-1} p - U(q),        q, p in R^m,
//!     g(q) = 0,                                 g : R^m -> R^nu quadratic,
//! ```
//!
//! with M symmetric positive definite and the regularity condition that
//! `G(q)' M^{-1} G(q)` stays positive definite along the motion, where
//! `G = grad g`. The constrained equations read `q' = M^{-1} p`,
//! `p' = grad U(q) - G(q) lambda`, and differentiating the hidden constraint
//! `G(q)' M^{-1} p = 0` once more yields the exact multiplier
//!
//! ```text
//!     lambda = [G' M^{-1} G]^{-1} [ hess g (M^{-1}p, M^{-1}p) + G' M^{-1} grad U ].
//! ```
//!
//! Callers supply the potential, its gradient, the constraints, their
//! Jacobian, and the constraint Hessian quadratic forms as closures; the
//! constructor cross-checks every derivative against finite differences and
//! verifies that each constraint really is quadratic, so sign slips in
//! hand-coded gradients are caught at build time rather than as mysterious
//! drift during integration.

use crate::linalg::{cholesky, DenseMatrix, LinalgError, SpdFactorization};
use thiserror::Error;

/// A phase-space point together with its time.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub q: Vec<f64>,
    pub p: Vec<f64>,
    pub t: f64,
}

impl State {
    pub fn new(q: Vec<f64>, p: Vec<f64>, t: f64) -> Self {
        Self { q, p, t }
    }
}

/// Errors from system construction and state queries.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("mass matrix is not symmetric positive definite: {0}")]
    MassNotSpd(#[from] LinalgError),
    #[error("inconsistent dimensions: {context}")]
    DimensionMismatch { context: String },
    #[error(
        "potential gradient component {coordinate} disagrees with finite differences at probe \
         {probe}: analytic {analytic:e}, finite-difference {finite_difference:e}"
    )]
    GradientMismatch { probe: usize, coordinate: usize, analytic: f64, finite_difference: f64 },
    #[error(
        "constraint Jacobian entry ({coordinate}, {constraint}) disagrees with finite \
         differences at probe {probe}: analytic {analytic:e}, finite-difference \
         {finite_difference:e}"
    )]
    JacobianMismatch {
        probe: usize,
        constraint: usize,
        coordinate: usize,
        analytic: f64,
        finite_difference: f64,
    },
    #[error(
        "constraint {constraint} is not quadratic: second-order Taylor residual {residual:e} \
         at probe {probe}"
    )]
    NotQuadratic { probe: usize, constraint: usize, residual: f64 },
    #[error("constraint regularity violated: G' M^{{-1}} G is not positive definite ({0})")]
    RegularityViolation(LinalgError),
    #[error("state violates {which} constraint: residual {residual:e} exceeds {tol:e}")]
    InconsistentState { which: &'static str, residual: f64, tol: f64 },
}

type ScalarFn = Box<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFn = Box<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>;
type QuadraticFormFn = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// The ingredients of a system, handed to the validating constructor.
pub struct SystemDefinition {
    /// Mass matrix M, `m x m`, symmetric positive definite.
    pub mass: DenseMatrix,
    /// `U(q)`; the Hamiltonian is `1/2 p' M^{-1} p - U(q)`.
    pub potential: ScalarFn,
    /// `grad U(q)`, length m.
    pub grad_potential: VectorFn,
    /// `g(q)`, length nu.
    pub constraints: VectorFn,
    /// `G(q) = grad g(q)`, `m x nu`; column l is `grad g_l(q)`.
    pub constraint_jacobian: JacobianFn,
    /// `(q, w) -> [w' hess g_l w]_{l < nu}`; constant in q for quadratic g.
    pub constraint_hessian_form: QuadraticFormFn,
}

/// A validated separable Hamiltonian system with quadratic constraints.
pub struct ConstrainedHamiltonianSystem {
    m: usize,
    nu: usize,
    mass: DenseMatrix,
    mass_chol: SpdFactorization,
    potential: ScalarFn,
    grad_potential: VectorFn,
    constraints: VectorFn,
    constraint_jacobian: JacobianFn,
    constraint_hessian_form: QuadraticFormFn,
}

impl std::fmt::Debug for ConstrainedHamiltonianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ConstrainedHamiltonianSystem")
            .field("m", &self.m)
            .field("nu", &self.nu)
            .finish_non_exhaustive()
    }
}

const FD_STEP: f64 = 1e-6;
const FD_TOL: f64 = 1e-4;
const QUADRATIC_TOL: f64 = 1e-12;
/// Default tolerance for the consistency check of initial states.
pub const CONSISTENCY_TOL: f64 = 1e-10;

impl ConstrainedHamiltonianSystem {
    /// Validates the definition at the supplied probe positions and builds
    /// the system. At least one probe is required; probes must avoid
    /// singularities of the potential.
    pub fn new(def: SystemDefinition, probes: &[Vec<f64>]) -> Result<Self, ModelError> {
        if def.mass.rows() != def.mass.cols() {
            return Err(ModelError::DimensionMismatch {
                context: format!("mass matrix is {}x{}", def.mass.rows(), def.mass.cols()),
            });
        }
        let m = def.mass.rows();
        if probes.is_empty() {
            return Err(ModelError::DimensionMismatch {
                context: "at least one validation probe is required".into(),
            });
        }
        let nu = (def.constraints)(&probes[0]).len();
        if nu == 0 || nu > m {
            return Err(ModelError::DimensionMismatch {
                context: format!("need 1 <= nu <= m, got nu = {nu}, m = {m}"),
            });
        }
        let mass_chol = cholesky(&def.mass)?;

        let sys = Self {
            m,
            nu,
            mass: def.mass,
            mass_chol,
            potential: def.potential,
            grad_potential: def.grad_potential,
            constraints: def.constraints,
            constraint_jacobian: def.constraint_jacobian,
            constraint_hessian_form: def.constraint_hessian_form,
        };
        for (pi, q) in probes.iter().enumerate() {
            sys.validate_probe(pi, q)?;
        }
        Ok(sys)
    }

    fn validate_probe(&self, pi: usize, q: &[f64]) -> Result<(), ModelError> {
        if q.len() != self.m {
            return Err(ModelError::DimensionMismatch {
                context: format!("probe {pi} has length {}, expected {}", q.len(), self.m),
            });
        }
        let grad = (self.grad_potential)(q);
        let jac = (self.constraint_jacobian)(q);
        let g0 = (self.constraints)(q);
        if grad.len() != self.m {
            return Err(ModelError::DimensionMismatch {
                context: format!("gradient length {} != m = {}", grad.len(), self.m),
            });
        }
        if jac.rows() != self.m || jac.cols() != self.nu {
            return Err(ModelError::DimensionMismatch {
                context: format!(
                    "constraint Jacobian is {}x{}, expected {}x{}",
                    jac.rows(),
                    jac.cols(),
                    self.m,
                    self.nu
                ),
            });
        }
        if g0.len() != self.nu {
            return Err(ModelError::DimensionMismatch {
                context: format!("constraint value length {} != nu = {}", g0.len(), self.nu),
            });
        }

        // Central finite differences of U and g against the supplied
        // derivatives.
        let mut shifted = q.to_vec();
        for i in 0..self.m {
            let h = FD_STEP * q[i].abs().max(1.0);
            shifted[i] = q[i] + h;
            let u_plus = (self.potential)(&shifted);
            let g_plus = (self.constraints)(&shifted);
            shifted[i] = q[i] - h;
            let u_minus = (self.potential)(&shifted);
            let g_minus = (self.constraints)(&shifted);
            shifted[i] = q[i];

            let fd_u = (u_plus - u_minus) / (2.0 * h);
            if (fd_u - grad[i]).abs() > FD_TOL * grad[i].abs().max(1.0) {
                return Err(ModelError::GradientMismatch {
                    probe: pi,
                    coordinate: i,
                    analytic: grad[i],
                    finite_difference: fd_u,
                });
            }
            for l in 0..self.nu {
                let fd_g = (g_plus[l] - g_minus[l]) / (2.0 * h);
                if (fd_g - jac[(i, l)]).abs() > FD_TOL * jac[(i, l)].abs().max(1.0) {
                    return Err(ModelError::JacobianMismatch {
                        probe: pi,
                        constraint: l,
                        coordinate: i,
                        analytic: jac[(i, l)],
                        finite_difference: fd_g,
                    });
                }
            }
        }

        // Quadraticity: the second-order Taylor expansion around q must be
        // exact for finite displacements. Directions come from a fixed
        // xorshift64* stream so failures are reproducible.
        let mut rng_state = 0x9e37_79b9_7f4a_7c15_u64 ^ (pi as u64).wrapping_mul(0xd134_2543_de82_ef95);
        let mut next = move || {
            rng_state ^= rng_state >> 12;
            rng_state ^= rng_state << 25;
            rng_state ^= rng_state >> 27;
            let bits = rng_state.wrapping_mul(0x2545_f491_4f6c_dd1d);
            (bits >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..3 {
            let w: Vec<f64> = (0..self.m).map(|_| next()).collect();
            let q_plus: Vec<f64> = q.iter().zip(&w).map(|(a, b)| a + b).collect();
            let g_plus = (self.constraints)(&q_plus);
            let hess = (self.constraint_hessian_form)(q, &w);
            if hess.len() != self.nu {
                return Err(ModelError::DimensionMismatch {
                    context: format!("Hessian form length {} != nu = {}", hess.len(), self.nu),
                });
            }
            for l in 0..self.nu {
                let linear: f64 = (0..self.m).map(|i| jac[(i, l)] * w[i]).sum();
                let residual = g_plus[l] - g0[l] - linear - 0.5 * hess[l];
                let scale =
                    1.0_f64.max(g_plus[l].abs()).max(g0[l].abs()).max(linear.abs());
                if residual.abs() > QUADRATIC_TOL * scale {
                    return Err(ModelError::NotQuadratic {
                        probe: pi,
                        constraint: l,
                        residual,
                    });
                }
            }
        }
        Ok(())
    }

    /// Phase-space dimension m.
    pub fn dim(&self) -> usize {
        self.m
    }

    /// Number of constraints nu.
    pub fn num_constraints(&self) -> usize {
        self.nu
    }

    pub fn mass(&self) -> &DenseMatrix {
        &self.mass
    }

    /// `M^{-1} v` via the cached Cholesky factorization.
    pub fn minv_apply(&self, v: &[f64]) -> Vec<f64> {
        self.mass_chol.solve(v)
    }

    /// `M^{-1} B` column by column via the cached Cholesky factorization.
    pub fn minv_apply_matrix(&self, b: &DenseMatrix) -> DenseMatrix {
        self.mass_chol.solve_matrix(b)
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        (self.potential)(q)
    }

    pub fn grad_potential(&self, q: &[f64]) -> Vec<f64> {
        (self.grad_potential)(q)
    }

    pub fn constraints(&self, q: &[f64]) -> Vec<f64> {
        (self.constraints)(q)
    }

    pub fn constraint_jacobian(&self, q: &[f64]) -> DenseMatrix {
        (self.constraint_jacobian)(q)
    }

    pub fn constraint_hessian_form(&self, q: &[f64], w: &[f64]) -> Vec<f64> {
        (self.constraint_hessian_form)(q, w)
    }

    /// `H(q, p) = 1/2 p' M^{-1} p - U(q)`.
    pub fn hamiltonian(&self, state: &State) -> f64 {
        let minv_p = self.minv_apply(&state.p);
        let kinetic: f64 = 0.5 * state.p.iter().zip(&minv_p).map(|(a, b)| a * b).sum::<f64>();
        kinetic - (self.potential)(&state.q)
    }

    /// The hidden-constraint values `G(q)' M^{-1} p`, length nu.
    pub fn hidden_constraint(&self, q: &[f64], p: &[f64]) -> Vec<f64> {
        let v = self.minv_apply(p);
        let jac = (self.constraint_jacobian)(q);
        jac.tr_matvec(&v)
    }

    /// Checks `g(q) = 0` and `G(q)' M^{-1} p = 0` within `tol`
    /// (`CONSISTENCY_TOL` when `None`).
    pub fn check_consistency(&self, state: &State, tol: Option<f64>) -> Result<(), ModelError> {
        let tol = tol.unwrap_or(CONSISTENCY_TOL);
        let g = (self.constraints)(&state.q);
        let worst_g = g.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if worst_g > tol {
            return Err(ModelError::InconsistentState {
                which: "position",
                residual: worst_g,
                tol,
            });
        }
        let hidden = self.hidden_constraint(&state.q, &state.p);
        let worst_h = hidden.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
        if worst_h > tol {
            return Err(ModelError::InconsistentState {
                which: "hidden",
                residual: worst_h,
                tol,
            });
        }
        Ok(())
    }

    /// The exact multiplier of the constrained flow at a state:
    /// `[G' M^{-1} G] lambda = hess g (M^{-1}p, M^{-1}p) + G' M^{-1} grad U`.
    pub fn exact_lambda(&self, state: &State) -> Result<Vec<f64>, ModelError> {
        let jac = (self.constraint_jacobian)(&state.q);
        let minv_g = self.mass_chol.solve_matrix(&jac);
        let gram = DenseMatrix::from_fn(self.nu, self.nu, |i, j| {
            (0..self.m).map(|r| jac[(r, i)] * minv_g[(r, j)]).sum()
        });
        let gram_chol = cholesky(&gram).map_err(ModelError::RegularityViolation)?;

        let v = self.minv_apply(&state.p);
        let hess = (self.constraint_hessian_form)(&state.q, &v);
        let grad_u = (self.grad_potential)(&state.q);
        let minv_grad_u = self.minv_apply(&grad_u);
        let rhs: Vec<f64> = (0..self.nu)
            .map(|l| {
                hess[l] + (0..self.m).map(|r| jac[(r, l)] * minv_grad_u[r]).sum::<f64>()
            })
            .collect();
        Ok(gram_chol.solve(&rhs))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Planar pendulum on the unit circle: U(q) = -e2'q, g(q) = |q|^2 - 1.
    fn pendulum() -> ConstrainedHamiltonianSystem {
        let def = SystemDefinition {
            mass: DenseMatrix::identity(2),
            potential: Box::new(|q: &[f64]| -q[1]),
            grad_potential: Box::new(|_q: &[f64]| vec![0.0, -1.0]),
            constraints: Box::new(|q: &[f64]| vec![q[0] * q[0] + q[1] * q[1] - 1.0]),
            constraint_jacobian: Box::new(|q: &[f64]| {
                DenseMatrix::from_rows(&[&[2.0 * q[0]], &[2.0 * q[1]]])
            }),
            constraint_hessian_form: Box::new(|_q: &[f64], w: &[f64]| {
                vec![2.0 * (w[0] * w[0] + w[1] * w[1])]
            }),
        };
        ConstrainedHamiltonianSystem::new(def, &[vec![0.0, -1.0], vec![0.6, 0.8]]).unwrap()
    }

    #[test]
    fn pendulum_hamiltonian_at_initial_state() {
        let sys = pendulum();
        let state = State::new(vec![0.0, -1.0], vec![1.0, 0.0], 0.0);
        assert!((sys.hamiltonian(&state) + 0.5).abs() < 1e-15);
    }

    #[test]
    fn pendulum_exact_lambda_at_rest() {
        let sys = pendulum();
        let state = State::new(vec![0.0, -1.0], vec![0.0, 0.0], 0.0);
        let lambda = sys.exact_lambda(&state).unwrap();
        assert_eq!(lambda.len(), 1);
        assert!((lambda[0] - 0.5).abs() < 1e-14, "lambda = {}", lambda[0]);
    }

    #[test]
    fn pendulum_hidden_constraint_value() {
        let sys = pendulum();
        let hidden = sys.hidden_constraint(&[1.0, 0.0], &[1.0, 0.0]);
        assert!((hidden[0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn consistency_check_accepts_tangent_rejects_radial_momentum() {
        let sys = pendulum();
        let good = State::new(vec![0.0, -1.0], vec![1.0, 0.0], 0.0);
        sys.check_consistency(&good, None).unwrap();
        let bad = State::new(vec![0.0, -1.0], vec![0.0, 1.0], 0.0);
        assert!(matches!(
            sys.check_consistency(&bad, None),
            Err(ModelError::InconsistentState { which: "hidden", .. })
        ));
        let off_circle = State::new(vec![0.0, -1.1], vec![0.0, 0.0], 0.0);
        assert!(matches!(
            sys.check_consistency(&off_circle, None),
            Err(ModelError::InconsistentState { which: "position", .. })
        ));
    }

    #[test]
    fn finite_difference_validator_catches_sign_error() {
        let def = SystemDefinition {
            mass: DenseMatrix::identity(2),
            potential: Box::new(|q: &[f64]| -q[1]),
            // Wrong sign.
            grad_potential: Box::new(|_q: &[f64]| vec![0.0, 1.0]),
            constraints: Box::new(|q: &[f64]| vec![q[0] * q[0] + q[1] * q[1] - 1.0]),
            constraint_jacobian: Box::new(|q: &[f64]| {
                DenseMatrix::from_rows(&[&[2.0 * q[0]], &[2.0 * q[1]]])
            }),
            constraint_hessian_form: Box::new(|_q: &[f64], w: &[f64]| {
                vec![2.0 * (w[0] * w[0] + w[1] * w[1])]
            }),
        };
        let err = ConstrainedHamiltonianSystem::new(def, &[vec![0.0, -1.0]]).unwrap_err();
        assert!(matches!(err, ModelError::GradientMismatch { coordinate: 1, .. }));
    }

    #[test]
    fn quadraticity_check_rejects_quartic_constraint() {
        let def = SystemDefinition {
            mass: DenseMatrix::identity(2),
            potential: Box::new(|q: &[f64]| -q[1]),
            grad_potential: Box::new(|_q: &[f64]| vec![0.0, -1.0]),
            // g = |q|^4 - 1 with its correct Jacobian, but a quadratic-form
            // Hessian cannot reproduce it exactly.
            constraints: Box::new(|q: &[f64]| {
                let r2 = q[0] * q[0] + q[1] * q[1];
                vec![r2 * r2 - 1.0]
            }),
            constraint_jacobian: Box::new(|q: &[f64]| {
                let r2 = q[0] * q[0] + q[1] * q[1];
                DenseMatrix::from_rows(&[&[4.0 * r2 * q[0]], &[4.0 * r2 * q[1]]])
            }),
            constraint_hessian_form: Box::new(|q: &[f64], w: &[f64]| {
                let r2 = q[0] * q[0] + q[1] * q[1];
                let qw = q[0] * w[0] + q[1] * w[1];
                let ww = w[0] * w[0] + w[1] * w[1];
                vec![8.0 * qw * qw + 4.0 * r2 * ww]
            }),
        };
        let err = ConstrainedHamiltonianSystem::new(def, &[vec![0.0, -1.0]]).unwrap_err();
        assert!(matches!(err, ModelError::NotQuadratic { .. }));
    }

    #[test]
    fn nonuniform_mass_matrix_inverse_apply() {
        let def = SystemDefinition {
            mass: DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 0.5]]),
            potential: Box::new(|q: &[f64]| -q[1]),
            grad_potential: Box::new(|_q: &[f64]| vec![0.0, -1.0]),
            constraints: Box::new(|q: &[f64]| vec![q[0] * q[0] + q[1] * q[1] - 1.0]),
            constraint_jacobian: Box::new(|q: &[f64]| {
                DenseMatrix::from_rows(&[&[2.0 * q[0]], &[2.0 * q[1]]])
            }),
            constraint_hessian_form: Box::new(|_q: &[f64], w: &[f64]| {
                vec![2.0 * (w[0] * w[0] + w[1] * w[1])]
            }),
        };
        let sys = ConstrainedHamiltonianSystem::new(def, &[vec![0.0, -1.0]]).unwrap();
        let v = sys.minv_apply(&[4.0, 4.0]);
        assert!((v[0] - 2.0).abs() < 1e-14);
        assert!((v[1] - 8.0).abs() < 1e-14);
    }

    #[test]
    fn exact_lambda_makes_hidden_constraint_stationary() {
        // With lambda from exact_lambda, the defining relation
        // hess g(v, v) + G' M^{-1} (grad U - G lambda) = 0 must hold.
        let sys = pendulum();
        let theta: f64 = 0.7;
        let omega = 1.3;
        let q = vec![theta.sin(), -theta.cos()];
        let p = vec![omega * theta.cos(), omega * theta.sin()];
        let state = State::new(q.clone(), p.clone(), 0.0);
        sys.check_consistency(&state, Some(1e-12)).unwrap();
        let lambda = sys.exact_lambda(&state).unwrap();

        let v = sys.minv_apply(&p);
        let hess = sys.constraint_hessian_form(&q, &v);
        let jac = sys.constraint_jacobian(&q);
        let grad_u = sys.grad_potential(&q);
        let force: Vec<f64> =
            (0..2).map(|r| grad_u[r] - jac[(r, 0)] * lambda[0]).collect();
        let minv_force = sys.minv_apply(&force);
        let residual =
            hess[0] + (0..2).map(|r| jac[(r, 0)] * minv_force[r]).sum::<f64>();
        assert!(residual.abs() < 1e-10, "residual = {residual}");
    }

    proptest! {
        #[test]
        fn prop_pendulum_lambda_matches_hand_formula(
            theta in -3.0_f64..3.0,
            omega in -2.0_f64..2.0,
        ) {
            // On the unit circle with unit mass, the multiplier reduces to
            // lambda = (|p|^2 - q_y) / 2, derived by hand from the Gram
            // system.
            let sys = pendulum();
            let q = vec![theta.sin(), -theta.cos()];
            let p = vec![omega * theta.cos(), omega * theta.sin()];
            let state = State::new(q, p, 0.0);
            let lambda = sys.exact_lambda(&state).unwrap();
            let hand = (omega * omega - state.q[1]) / 2.0;
            prop_assert!((lambda[0] - hand).abs() <= 1e-12);
        }
    }
}
