//! Error metrics, reference solutions, and convergence studies.
//!
//! A convergence study integrates the same problem over a dyadic ladder of
//! step sizes `h_i = t_end / (base_steps 2^i)` and reports, per row, the
//! max-norm solution error `e_y`, multiplier error `e_lambda`, hidden- and
//! holonomic-constraint residuals `e_hid`, `e_g`, and the energy deviation
//! `e_H`, together with empirical orders `rate = log2(e(h_{i-1}) / e(h_i))`
//! between consecutive rows. Errors are measured against a high-order
//! reference trajectory computed on the finest row's grid with a refined
//! step, aligned by integer strides so no interpolation is ever involved.
//! A rate whose numerator or denominator sits at the round-off floor is
//! flagged instead of reported as a number.
//!
//! Rows of a study are independent; with the `parallel` feature they can be
//! computed by rayon worker threads. Each row is internally sequential and
//! the assembly is order-preserving, so results are bit-identical across
//! execution modes and thread counts.

use crate::hbvm::{propagate, SolverConfig, Trajectory};
use crate::linalg::norm_inf;
use crate::model::{ConstrainedHamiltonianSystem, ModelError, State};
use crate::polybasis::{build_tableau, BasisError};
use std::fmt;
use thiserror::Error;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// How the rows of a study are executed. `Parallel` requires the `parallel`
/// feature; without it, it falls back to sequential execution. Results are
/// identical either way.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Max-norm error metrics of one trajectory against the reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorMetrics {
    /// `max_n |(q_n, p_n) - (q_ref, p_ref)(t_n)|_inf`.
    pub e_y: f64,
    /// `max_n |lambda_bar_n - lambda_exact(ref(t_{n+1}))|_inf`.
    pub e_lambda: f64,
    /// `max_n |G(q_n)' M^{-1} p_n|_inf`.
    pub e_hid: f64,
    /// `max_n |g(q_n)|_inf`.
    pub e_g: f64,
    /// `max_n |H(q_n, p_n) - H_0|`.
    pub e_h: f64,
}

/// One empirical order entry: absent on the first row, a number in the
/// resolved regime, or a round-off flag rendered as `***`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateEntry {
    None,
    Value(f64),
    RoundOff,
}

impl fmt::Display for RateEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RateEntry::None => Ok(()),
            RateEntry::Value(v) => write!(f, "{v}"),
            RateEntry::RoundOff => write!(f, "***"),
        }
    }
}

/// One row of a convergence table.
#[derive(Debug, Clone)]
pub struct ConvergenceRow {
    pub i: u32,
    pub h: f64,
    pub n_steps: usize,
    pub metrics: ErrorMetrics,
    pub rate_y: RateEntry,
    pub rate_lambda: RateEntry,
    pub rate_hid: RateEntry,
    pub rate_h: RateEntry,
}

/// A row that failed to integrate; the study continues without it.
#[derive(Debug, Clone)]
pub struct RowFailure {
    pub i: u32,
    pub h: f64,
    pub message: String,
}

/// Result of a convergence study: successful rows with h strictly
/// decreasing, plus any failed rows.
#[derive(Debug, Clone)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    pub failures: Vec<RowFailure>,
}

/// Dyadic step schedule: row i uses `base_steps * 2^i` steps over
/// `[t0, t0 + t_end]`, i.e. `h_i = t_end / (base_steps * 2^i)`.
#[derive(Debug, Clone)]
pub struct DyadicSchedule {
    pub t_end: f64,
    pub base_steps: usize,
    pub i_min: u32,
    pub i_max: u32,
}

impl DyadicSchedule {
    pub fn new(
        t_end: f64,
        base_steps: usize,
        i_min: u32,
        i_max: u32,
    ) -> Result<Self, StudyError> {
        if !(t_end > 0.0) || !t_end.is_finite() {
            return Err(StudyError::InvalidSchedule {
                detail: format!("t_end must be positive and finite, got {t_end}"),
            });
        }
        if base_steps == 0 {
            return Err(StudyError::InvalidSchedule {
                detail: "base_steps must be at least 1".into(),
            });
        }
        if i_max < i_min {
            return Err(StudyError::InvalidSchedule {
                detail: format!("empty schedule: i_min = {i_min} > i_max = {i_max}"),
            });
        }
        if i_max - i_min + 1 < 2 {
            return Err(StudyError::InvalidSchedule {
                detail: "a convergence study needs at least two step sizes".into(),
            });
        }
        if i_max >= 40 || base_steps.saturating_mul(1 << i_max) > 1 << 40 {
            return Err(StudyError::InvalidSchedule {
                detail: format!(
                    "schedule too fine: {base_steps} * 2^{i_max} steps requested"
                ),
            });
        }
        Ok(Self { t_end, base_steps, i_min, i_max })
    }

    pub fn n_steps(&self, i: u32) -> usize {
        self.base_steps << i
    }

    pub fn h(&self, i: u32) -> f64 {
        self.t_end / self.n_steps(i) as f64
    }

    pub fn indices(&self) -> impl Iterator<Item = u32> {
        self.i_min..=self.i_max
    }
}

/// Reference-solution method: HBVM(k, s) at a step `refinement` times finer
/// than the output grid. The order-16 default dominates the error of every
/// method a study can request by several orders of magnitude.
#[derive(Debug, Clone)]
pub struct ReferenceConfig {
    pub k: usize,
    pub s: usize,
    pub refinement: usize,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self { k: 16, s: 8, refinement: 8 }
    }
}

/// Settings of a convergence study.
#[derive(Debug, Clone)]
pub struct StudyConfig {
    pub reference: ReferenceConfig,
    pub solver: SolverConfig,
    /// A rate is flagged `***` when either error in the ratio is below
    /// `roundoff_factor * eps * max(1, |q0|_inf, |p0|_inf)`.
    pub roundoff_factor: f64,
    pub execution: Execution,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            reference: ReferenceConfig::default(),
            solver: SolverConfig::default(),
            roundoff_factor: 50.0,
            execution: Execution::Parallel,
        }
    }
}

/// High-accuracy states on the uniform output grid
/// `t_n = t0 + n (t_end - t0) / n_out`, `n = 0..=n_out`.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub states: Vec<State>,
    pub t_end: f64,
    pub n_out: usize,
}

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("invalid schedule: {detail}")]
    InvalidSchedule { detail: String },
    #[error("invalid method or reference configuration: {0}")]
    Basis(#[from] BasisError),
    #[error("reference propagation failed: {0}")]
    Reference(#[from] crate::hbvm::PropagateError),
    #[error(
        "trajectory with {row} steps does not align with the reference grid of {reference} \
         intervals"
    )]
    GridMismatch { row: usize, reference: usize },
    #[error("multiplier evaluation on the reference failed: {0}")]
    Model(#[from] ModelError),
}

/// Integrates the reference trajectory for `[t0, t0 + t_end]`... the grid has
/// `n_out + 1` states including the initial one. `t_end = 0` or `n_out = 0`
/// returns the initial state alone.
pub fn reference_solution(
    sys: &ConstrainedHamiltonianSystem,
    state0: &State,
    t_end: f64,
    n_out: usize,
    reference: &ReferenceConfig,
    solver: &SolverConfig,
) -> Result<ReferenceTrajectory, StudyError> {
    if n_out == 0 || t_end == 0.0 {
        return Ok(ReferenceTrajectory { states: vec![state0.clone()], t_end, n_out: 0 });
    }
    let tab = build_tableau(reference.s, reference.k)?;
    let refinement = reference.refinement.max(1);
    let n_total = n_out * refinement;
    let h_ref = t_end / n_total as f64;
    let traj = propagate(sys, &tab, state0, h_ref, n_total, solver, |_, _| {})?;
    let states = (0..=n_out).map(|n| traj.state_at(n * refinement)).collect();
    Ok(ReferenceTrajectory { states, t_end, n_out })
}

/// Measures a trajectory against the reference. The trajectory's step count
/// must divide the reference grid (`stride = n_out / len` exact); the
/// multiplier error compares each step's end-point `lambda_bar` with the
/// exact multiplier evaluated on the reference state at that step's end.
pub fn compute_metrics(
    sys: &ConstrainedHamiltonianSystem,
    traj: &Trajectory,
    reference: &ReferenceTrajectory,
) -> Result<ErrorMetrics, StudyError> {
    let n = traj.len();
    if n == 0 || reference.n_out == 0 || reference.n_out % n != 0 {
        return Err(StudyError::GridMismatch { row: n, reference: reference.n_out });
    }
    let stride = reference.n_out / n;
    let h0 = sys.hamiltonian(&traj.initial);

    let mut e_y = 0.0_f64;
    let mut e_lambda = 0.0_f64;
    let mut e_hid = 0.0_f64;
    let mut e_g = 0.0_f64;
    let mut e_h = 0.0_f64;
    for (j, step) in traj.steps.iter().enumerate() {
        let ref_state = &reference.states[(j + 1) * stride];
        let dq = step
            .q1
            .iter()
            .zip(&ref_state.q)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        let dp = step
            .p1
            .iter()
            .zip(&ref_state.p)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        e_y = e_y.max(dq).max(dp);

        let lambda_exact = sys.exact_lambda(ref_state)?;
        let dl = step
            .lambda_bar
            .iter()
            .zip(&lambda_exact)
            .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
        e_lambda = e_lambda.max(dl);

        e_hid = e_hid.max(step.hidden_residual);
        e_g = e_g.max(step.g_residual);
        e_h = e_h.max((step.energy - h0).abs());
    }
    Ok(ErrorMetrics { e_y, e_lambda, e_hid, e_g, e_h })
}

/// Empirical orders for one metric column: `log2(e_prev / e_cur)` per
/// adjacent pair, with `None` for the first row or a gap, and `RoundOff`
/// when either value sits below `threshold`.
fn rate_entry(prev: Option<f64>, cur: f64, threshold: f64) -> RateEntry {
    match prev {
        None => RateEntry::None,
        Some(p) => {
            if p < threshold || cur < threshold {
                RateEntry::RoundOff
            } else {
                RateEntry::Value((p / cur).log2())
            }
        }
    }
}

/// Runs a convergence study, computing the reference on the finest row's
/// grid first.
pub fn convergence_study(
    sys: &ConstrainedHamiltonianSystem,
    state0: &State,
    k: usize,
    s: usize,
    schedule: &DyadicSchedule,
    config: &StudyConfig,
) -> Result<ConvergenceTable, StudyError> {
    let n_max = schedule.n_steps(schedule.i_max);
    let reference = reference_solution(
        sys,
        state0,
        schedule.t_end,
        n_max,
        &config.reference,
        &config.solver,
    )?;
    convergence_study_with_reference(sys, state0, k, s, schedule, config, &reference)
}

/// Runs a convergence study against a precomputed reference (which must
/// cover the finest row's grid). Rows run sequentially or in parallel per
/// `config.execution`; per-row failures are recorded and skipped.
pub fn convergence_study_with_reference(
    sys: &ConstrainedHamiltonianSystem,
    state0: &State,
    k: usize,
    s: usize,
    schedule: &DyadicSchedule,
    config: &StudyConfig,
    reference: &ReferenceTrajectory,
) -> Result<ConvergenceTable, StudyError> {
    let tab = build_tableau(s, k)?;
    let indices: Vec<u32> = schedule.indices().collect();

    let run_row = |i: &u32| -> (u32, Result<(usize, ErrorMetrics), String>) {
        let i = *i;
        let n = schedule.n_steps(i);
        let h = schedule.h(i);
        let outcome = propagate(sys, &tab, state0, h, n, &config.solver, |_, _| {})
            .map_err(|e| e.to_string())
            .and_then(|traj| {
                compute_metrics(sys, &traj, reference)
                    .map(|m| (n, m))
                    .map_err(|e| e.to_string())
            });
        (i, outcome)
    };

    let outcomes: Vec<(u32, Result<(usize, ErrorMetrics), String>)> = match config.execution {
        Execution::Sequential => indices.iter().map(run_row).collect(),
        Execution::Parallel => {
            #[cfg(feature = "parallel")]
            {
                indices.par_iter().map(run_row).collect()
            }
            #[cfg(not(feature = "parallel"))]
            {
                indices.iter().map(run_row).collect()
            }
        }
    };

    let scale = norm_inf(&state0.q).max(norm_inf(&state0.p)).max(1.0);
    let threshold = config.roundoff_factor * f64::EPSILON * scale;

    let mut rows = Vec::new();
    let mut failures = Vec::new();
    let mut prev: Option<(u32, ErrorMetrics)> = None;
    for (i, outcome) in outcomes {
        match outcome {
            Ok((n_steps, metrics)) => {
                // Rates only between adjacent successful rows.
                let adjacent = prev.filter(|(pi, _)| *pi + 1 == i).map(|(_, m)| m);
                rows.push(ConvergenceRow {
                    i,
                    h: schedule.h(i),
                    n_steps,
                    metrics,
                    rate_y: rate_entry(adjacent.map(|m| m.e_y), metrics.e_y, threshold),
                    rate_lambda: rate_entry(
                        adjacent.map(|m| m.e_lambda),
                        metrics.e_lambda,
                        threshold,
                    ),
                    rate_hid: rate_entry(adjacent.map(|m| m.e_hid), metrics.e_hid, threshold),
                    rate_h: rate_entry(adjacent.map(|m| m.e_h), metrics.e_h, threshold),
                });
                prev = Some((i, metrics));
            }
            Err(message) => {
                failures.push(RowFailure { i, h: schedule.h(i), message });
                prev = None;
            }
        }
    }
    Ok(ConvergenceTable { rows, failures })
}
