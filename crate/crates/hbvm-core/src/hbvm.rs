//! The HBVM(k, s) step for constrained Hamiltonian problems.
//!
//! One step of size h advances (q0, p0) through degree-s polynomial
//! approximations u ~ q, v ~ p on [0, h], written in the shifted Legendre
//! basis. The unknowns are the basis coefficients `gamma_j` of v and the
//! quadrature approximations `psi_hat_j` of the Fourier coefficients of
//! `grad U(u)`; the stage multipliers `lambda_i` enforce the hidden
//! constraint `G(u(c_i h))' M^{-1} v(c_i h) = 0` at the s Gauss nodes, which
//! makes g(q1) and, for polynomial potentials of degree <= 2k/s, H(q1, p1)
//! exact up to round-off. Everything is solved by the fixed-point sweep
//!
//! ```text
//!     G_i      <- grad g at stage positions from gamma^l,
//!     lambda^l <- linear system assembled from (G_i, psi_hat^l),
//!     zeta^l   <- projection of G_i lambda_i^l,
//!     gamma^{l+1}    <- projection of stage momenta from (psi_hat^l, zeta^l),
//!     psi_hat^{l+1}  <- projection of grad U at quadrature positions from gamma^l,
//! ```
//!
//! started at `gamma^0 = psi_hat^0 = 0` (a pure Jacobi update: both new
//! iterates use only old values). After the loop a closure pass re-solves
//! the multipliers from the final coefficients, and the step closes with
//! `q1 = q0 + h M^{-1} gamma_0`, `p1 = p0 + h (psi_hat_0 - zeta_0)`, and the
//! end-point multiplier `lambda_bar = sum_i l_i(1) lambda_i`.

use crate::linalg::{block_kron_apply, lu_solve_vec, norm_inf, DenseMatrix, LinalgError};
use crate::model::{ConstrainedHamiltonianSystem, State};
use crate::polybasis::HbvmTableau;
use thiserror::Error;

/// Controls for the fixed-point iteration.
#[derive(Debug, Clone)]
pub struct SolverConfig {
    /// Convergence threshold on the max-norm increment of the concatenated
    /// `(gamma, psi_hat)` vector. `None` selects
    /// `5 eps max(1, |q0|_inf, |p0|_inf)` per step.
    pub stop_tol: Option<f64>,
    /// Hard cap on fixed-point sweeps before the step fails.
    pub max_iterations: usize,
    /// Number of consecutive sweeps without a new best increment after
    /// which the iteration is considered stalled on a round-off plateau.
    pub stagnation_window: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { stop_tol: None, max_iterations: 100, stagnation_window: 3 }
    }
}

/// A stalled iteration is accepted as a round-off plateau only while the
/// increment stays within this factor of the stop tolerance; a plateau at a
/// genuinely large increment means the iteration is diverging (h too large)
/// and must fail instead of silently returning garbage.
pub const PLATEAU_FACTOR: f64 = 1e3;

/// Outcome of one step.
#[derive(Debug, Clone)]
pub struct StepResult {
    pub q1: Vec<f64>,
    pub p1: Vec<f64>,
    /// End-point multiplier approximation, length nu.
    pub lambda_bar: Vec<f64>,
    /// Fixed-point sweeps performed.
    pub iterations: usize,
    /// True when the increment fell below the stop tolerance (as opposed to
    /// a round-off plateau accepted near it).
    pub converged: bool,
    pub final_increment: f64,
    /// `|g(q1)|_inf`.
    pub g_residual: f64,
    /// `|G(q1)' M^{-1} p1|_inf`.
    pub hidden_residual: f64,
    /// `H(q1, p1)`.
    pub energy: f64,
}

/// Internal stage quantities of a converged step, for inspection and tests.
#[derive(Debug, Clone)]
pub struct StageState {
    /// Stage positions `u(c_i h)`, s vectors of length m.
    pub positions: Vec<Vec<f64>>,
    /// Stage momenta `v(c_i h)`, s vectors of length m.
    pub momenta: Vec<Vec<f64>>,
    /// Stage multipliers `lambda_i`, s vectors of length nu.
    pub multipliers: Vec<Vec<f64>>,
}

#[derive(Debug, Error)]
pub enum StepError {
    #[error(
        "fixed-point iteration did not converge in {iterations} sweeps: increment \
         {last_increment:e}, tolerance {stop_tol:e} (the step size is likely too large)"
    )]
    NonConvergence { iterations: usize, last_increment: f64, stop_tol: f64 },
    #[error("multiplier system could not be solved: {0}")]
    Multiplier(#[from] LinalgError),
}

#[derive(Debug, Error)]
#[error("step {step} (t = {time}) failed: {source}")]
pub struct PropagateError {
    pub step: usize,
    pub time: f64,
    #[source]
    pub source: StepError,
}

/// A propagated orbit: the initial state plus one [`StepResult`] per step.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub initial: State,
    pub h: f64,
    pub steps: Vec<StepResult>,
    /// Mean fixed-point sweeps per step.
    pub mean_iterations: f64,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// State after n steps; n = 0 is the initial state.
    pub fn state_at(&self, n: usize) -> State {
        if n == 0 {
            return self.initial.clone();
        }
        let step = &self.steps[n - 1];
        State::new(step.q1.clone(), step.p1.clone(), self.initial.t + n as f64 * self.h)
    }

    pub fn final_state(&self) -> State {
        self.state_at(self.len())
    }
}

/// Stage positions `q0 + h M^{-1} sum_j imat[i][j] gamma_j`, one block per
/// row of `imat` (the stage grid for `I_s`, the quadrature grid for
/// `I_hat`).
fn positions_from_gamma(
    sys: &ConstrainedHamiltonianSystem,
    q0: &[f64],
    h: f64,
    imat: &DenseMatrix,
    gamma: &[f64],
) -> Vec<Vec<f64>> {
    let m = sys.dim();
    let combo = block_kron_apply(imat, gamma, m);
    (0..imat.rows())
        .map(|i| {
            let minv = sys.minv_apply(&combo[i * m..(i + 1) * m]);
            (0..m).map(|r| q0[r] + h * minv[r]).collect()
        })
        .collect()
}

/// Solves the stage-multiplier system
///
/// ```text
///     [h a_ij G_i' M^{-1} G_j]_{ij} lambda = [G_i' M^{-1}(p0 + h (I_s psi_hat)_i)]_i
/// ```
///
/// for the flat vector `(lambda_1, ..., lambda_s)` of length `s nu`, given
/// the constraint Jacobians `G_i` at the stage positions.
pub fn solve_multipliers(
    sys: &ConstrainedHamiltonianSystem,
    tab: &HbvmTableau,
    h: f64,
    p0: &[f64],
    psi_hat: &[f64],
    jacobians: &[DenseMatrix],
) -> Result<Vec<f64>, LinalgError> {
    let s = tab.s;
    let m = sys.dim();
    let nu = sys.num_constraints();
    debug_assert_eq!(jacobians.len(), s);

    let minv_g: Vec<DenseMatrix> =
        jacobians.iter().map(|g| sys.minv_apply_matrix(g)).collect();

    let mut w = DenseMatrix::zeros(s * nu, s * nu);
    for i in 0..s {
        for j in 0..s {
            let scale = h * tab.butcher[(i, j)];
            for a in 0..nu {
                for b in 0..nu {
                    let gram: f64 =
                        (0..m).map(|r| jacobians[i][(r, a)] * minv_g[j][(r, b)]).sum();
                    w[(i * nu + a, j * nu + b)] = scale * gram;
                }
            }
        }
    }

    let combo = block_kron_apply(&tab.i_s, psi_hat, m);
    let mut rhs = vec![0.0; s * nu];
    for i in 0..s {
        let momentum: Vec<f64> =
            (0..m).map(|r| p0[r] + h * combo[i * m + r]).collect();
        let minv_p = sys.minv_apply(&momentum);
        for a in 0..nu {
            rhs[i * nu + a] = (0..m).map(|r| jacobians[i][(r, a)] * minv_p[r]).sum();
        }
    }
    lu_solve_vec(&w, &rhs)
}

/// One HBVM step, also returning the internal stage quantities.
pub fn fixed_point_step_with_stages(
    sys: &ConstrainedHamiltonianSystem,
    tab: &HbvmTableau,
    state: &State,
    h: f64,
    config: &SolverConfig,
) -> Result<(StepResult, StageState), StepError> {
    let m = sys.dim();
    let nu = sys.num_constraints();
    let s = tab.s;
    let q0 = &state.q;
    let p0 = &state.p;

    if h == 0.0 {
        let result = finish_step(sys, state, q0.clone(), p0.clone(), vec![0.0; nu], 0, true, 0.0);
        let stages = StageState {
            positions: vec![q0.clone(); s],
            momenta: vec![p0.clone(); s],
            multipliers: vec![vec![0.0; nu]; s],
        };
        return Ok((result, stages));
    }

    let stop_tol = config.stop_tol.unwrap_or_else(|| {
        5.0 * f64::EPSILON * norm_inf(q0).max(norm_inf(p0)).max(1.0)
    });

    let mut gamma = vec![0.0; s * m];
    let mut psi_hat = vec![0.0; s * m];
    let mut iterations = 0;
    let mut converged = false;
    let mut accepted = false;
    let mut increment = f64::INFINITY;
    let mut best_increment = f64::INFINITY;
    let mut since_best = 0;

    while iterations < config.max_iterations {
        iterations += 1;

        // Forces at the quadrature grid, from the old gamma.
        let quad_positions = positions_from_gamma(sys, q0, h, &tab.i_hat, &gamma);
        let mut forces = vec![0.0; tab.k * m];
        for (i, pos) in quad_positions.iter().enumerate() {
            forces[i * m..(i + 1) * m].copy_from_slice(&sys.grad_potential(pos));
        }
        let psi_hat_new = block_kron_apply(&tab.proj_hat, &forces, m);

        // Multipliers and constraint-force coefficients, from the old
        // gamma and psi_hat.
        let stage_positions = positions_from_gamma(sys, q0, h, &tab.i_s, &gamma);
        let jacobians: Vec<DenseMatrix> =
            stage_positions.iter().map(|u| sys.constraint_jacobian(u)).collect();
        let lambda = solve_multipliers(sys, tab, h, p0, &psi_hat, &jacobians)?;
        let zeta = constraint_force_coefficients(tab, m, &jacobians, &lambda);

        // Stage momenta and the new gamma, still from the old psi_hat.
        let gamma_new = project_momenta(tab, m, p0, h, &psi_hat, &zeta);

        let inc_gamma = gamma_new
            .iter()
            .zip(&gamma)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        let inc_psi = psi_hat_new
            .iter()
            .zip(&psi_hat)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        increment = inc_gamma.max(inc_psi);
        gamma = gamma_new;
        psi_hat = psi_hat_new;

        if increment <= stop_tol {
            converged = true;
            accepted = true;
            break;
        }
        if increment < best_increment {
            best_increment = increment;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= config.stagnation_window && increment <= PLATEAU_FACTOR * stop_tol {
                // Round-off plateau just above the tolerance.
                accepted = true;
                break;
            }
        }
    }
    if !accepted {
        return Err(StepError::NonConvergence {
            iterations,
            last_increment: increment,
            stop_tol,
        });
    }

    // Closure pass: re-solve the multipliers consistently with the final
    // coefficients, so the hidden stage conditions hold to solver accuracy.
    let stage_positions = positions_from_gamma(sys, q0, h, &tab.i_s, &gamma);
    let jacobians: Vec<DenseMatrix> =
        stage_positions.iter().map(|u| sys.constraint_jacobian(u)).collect();
    let lambda = solve_multipliers(sys, tab, h, p0, &psi_hat, &jacobians)?;
    let zeta = constraint_force_coefficients(tab, m, &jacobians, &lambda);
    let momenta = stage_momenta(tab, m, p0, h, &psi_hat, &zeta);
    let gamma_out = block_kron_apply(&tab.proj, &momenta_flat(&momenta), m);

    let minv_gamma0 = sys.minv_apply(&gamma_out[0..m]);
    let q1: Vec<f64> = (0..m).map(|r| q0[r] + h * minv_gamma0[r]).collect();
    let p1: Vec<f64> = (0..m).map(|r| p0[r] + h * (psi_hat[r] - zeta[r])).collect();
    let lambda_bar: Vec<f64> = (0..nu)
        .map(|a| (0..s).map(|i| tab.lagrange_end[i] * lambda[i * nu + a]).sum())
        .collect();

    let result =
        finish_step(sys, state, q1, p1, lambda_bar, iterations, converged, increment);
    let stages = StageState {
        positions: stage_positions,
        momenta,
        multipliers: (0..s).map(|i| lambda[i * nu..(i + 1) * nu].to_vec()).collect(),
    };
    Ok((result, stages))
}

/// One HBVM step from `state` with step size `h`.
pub fn fixed_point_step(
    sys: &ConstrainedHamiltonianSystem,
    tab: &HbvmTableau,
    state: &State,
    h: f64,
    config: &SolverConfig,
) -> Result<StepResult, StepError> {
    fixed_point_step_with_stages(sys, tab, state, h, config).map(|(result, _)| result)
}

fn constraint_force_coefficients(
    tab: &HbvmTableau,
    m: usize,
    jacobians: &[DenseMatrix],
    lambda: &[f64],
) -> Vec<f64> {
    let s = tab.s;
    let nu = jacobians[0].cols();
    let mut stage_forces = vec![0.0; s * m];
    for i in 0..s {
        let force = jacobians[i].matvec(&lambda[i * nu..(i + 1) * nu]);
        stage_forces[i * m..(i + 1) * m].copy_from_slice(&force);
    }
    block_kron_apply(&tab.proj, &stage_forces, m)
}

fn stage_momenta(
    tab: &HbvmTableau,
    m: usize,
    p0: &[f64],
    h: f64,
    psi_hat: &[f64],
    zeta: &[f64],
) -> Vec<Vec<f64>> {
    let diff: Vec<f64> = psi_hat.iter().zip(zeta).map(|(a, b)| a - b).collect();
    let combo = block_kron_apply(&tab.i_s, &diff, m);
    (0..tab.s)
        .map(|i| (0..m).map(|r| p0[r] + h * combo[i * m + r]).collect())
        .collect()
}

fn momenta_flat(momenta: &[Vec<f64>]) -> Vec<f64> {
    momenta.iter().flat_map(|v| v.iter().copied()).collect()
}

fn project_momenta(
    tab: &HbvmTableau,
    m: usize,
    p0: &[f64],
    h: f64,
    psi_hat: &[f64],
    zeta: &[f64],
) -> Vec<f64> {
    let momenta = stage_momenta(tab, m, p0, h, psi_hat, zeta);
    block_kron_apply(&tab.proj, &momenta_flat(&momenta), m)
}

#[allow(clippy::too_many_arguments)]
fn finish_step(
    sys: &ConstrainedHamiltonianSystem,
    state: &State,
    q1: Vec<f64>,
    p1: Vec<f64>,
    lambda_bar: Vec<f64>,
    iterations: usize,
    converged: bool,
    final_increment: f64,
) -> StepResult {
    let g_residual = norm_inf(&sys.constraints(&q1));
    let hidden_residual = norm_inf(&sys.hidden_constraint(&q1, &p1));
    let energy = sys.hamiltonian(&State::new(q1.clone(), p1.clone(), state.t));
    StepResult {
        q1,
        p1,
        lambda_bar,
        iterations,
        converged,
        final_increment,
        g_residual,
        hidden_residual,
        energy,
    }
}

/// Propagates `n_steps` steps of size `h` from `state0`, invoking
/// `observer(t_{n+1}, &step)` after each step. Fails on the first step that
/// does not converge, reporting its index and time.
pub fn propagate(
    sys: &ConstrainedHamiltonianSystem,
    tab: &HbvmTableau,
    state0: &State,
    h: f64,
    n_steps: usize,
    config: &SolverConfig,
    mut observer: impl FnMut(f64, &StepResult),
) -> Result<Trajectory, PropagateError> {
    let mut steps = Vec::with_capacity(n_steps);
    let mut current = state0.clone();
    let mut total_iterations = 0_usize;
    for n in 0..n_steps {
        let result = fixed_point_step(sys, tab, &current, h, config).map_err(|source| {
            PropagateError { step: n, time: current.t, source }
        })?;
        let t_next = state0.t + (n + 1) as f64 * h;
        current = State::new(result.q1.clone(), result.p1.clone(), t_next);
        total_iterations += result.iterations;
        observer(t_next, &result);
        steps.push(result);
    }
    let mean_iterations =
        if n_steps == 0 { 0.0 } else { total_iterations as f64 / n_steps as f64 };
    Ok(Trajectory { initial: state0.clone(), h, steps, mean_iterations })
}
