//! The built-in benchmark problems.
//!
//! Four constrained systems with known structure:
//!
//! * `simple-pendulum` — planar pendulum on the unit circle, large
//!   oscillation from the bottom with horizontal kick.
//! * `modified-pendulum` — same pendulum plus an attractive Coulomb center
//!   at an exterior point `q*`, which makes the multiplier genuinely
//!   nonpolynomial along the motion.
//! * `conical-pendulum` — spherical pendulum launched on its steady
//!   horizontal circle; the exact solution is a uniform rotation with period
//!   `2^{3/4} pi` and a constant multiplier `1/sqrt(2)`.
//! * `tethered-satellites` — three unit-mass satellites in a central-force
//!   field (gravity plus an oscillatory `cos` term), pairwise tethered at
//!   unit distance; the initial speed of the third body is chosen by
//!   bisection so the total energy vanishes.

use crate::linalg::DenseMatrix;
use crate::model::{ConstrainedHamiltonianSystem, ModelError, State, SystemDefinition};
use thiserror::Error;

/// Analytically known facts about a benchmark problem, used by diagnostics
/// and tests. `None` means the quantity has no simple closed form.
#[derive(Debug, Clone)]
pub struct KnownFacts {
    /// Period of the exact solution, when it is periodic.
    pub period: Option<f64>,
    /// The multiplier when it is constant along the exact solution.
    pub constant_lambda: Option<f64>,
    /// Energy of the initial state (the conserved value).
    pub initial_energy: f64,
}

/// A ready-to-integrate benchmark: system, consistent initial state, and a
/// default time horizon.
#[derive(Debug)]
pub struct BenchmarkProblem {
    pub name: &'static str,
    pub system: ConstrainedHamiltonianSystem,
    pub initial_state: State,
    pub default_horizon: f64,
    pub known: KnownFacts,
}

#[derive(Debug, Error)]
pub enum ProblemError {
    #[error("invalid problem configuration: {detail}")]
    InvalidConfiguration { detail: String },
    #[error("unknown problem {name:?}; available: {available}")]
    UnknownProblem { name: String, available: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Names accepted by [`by_name`], in catalog order.
pub fn names() -> &'static [&'static str] {
    &["simple-pendulum", "modified-pendulum", "conical-pendulum", "tethered-satellites"]
}

/// Builds a benchmark problem from its catalog name; `modified-pendulum`
/// uses the default center `q* = (2, 0)`.
pub fn by_name(name: &str) -> Result<BenchmarkProblem, ProblemError> {
    match name {
        "simple-pendulum" => simple_pendulum(),
        "modified-pendulum" => modified_pendulum(None),
        "conical-pendulum" => conical_pendulum(),
        "tethered-satellites" => tethered_satellites(),
        _ => Err(ProblemError::UnknownProblem {
            name: name.to_string(),
            available: names().join(", "),
        }),
    }
}

fn unit_circle_constraint_2d() -> (VectorFnAlias, JacobianFnAlias, FormFnAlias) {
    (
        Box::new(|q: &[f64]| vec![q[0] * q[0] + q[1] * q[1] - 1.0]),
        Box::new(|q: &[f64]| DenseMatrix::from_rows(&[&[2.0 * q[0]], &[2.0 * q[1]]])),
        Box::new(|_q: &[f64], w: &[f64]| vec![2.0 * (w[0] * w[0] + w[1] * w[1])]),
    )
}

type VectorFnAlias = Box<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type JacobianFnAlias = Box<dyn Fn(&[f64]) -> DenseMatrix + Send + Sync>;
type FormFnAlias = Box<dyn Fn(&[f64], &[f64]) -> Vec<f64> + Send + Sync>;

/// Planar pendulum: `H = 1/2 |p|^2 + e2'q` on the unit circle, started at
/// the bottom with unit horizontal momentum. `U(q) = -e2'q`, so the
/// conserved energy is `-1/2`.
pub fn simple_pendulum() -> Result<BenchmarkProblem, ProblemError> {
    let (constraints, jacobian, hessian) = unit_circle_constraint_2d();
    let def = SystemDefinition {
        mass: DenseMatrix::identity(2),
        potential: Box::new(|q: &[f64]| -q[1]),
        grad_potential: Box::new(|_q: &[f64]| vec![0.0, -1.0]),
        constraints,
        constraint_jacobian: jacobian,
        constraint_hessian_form: hessian,
    };
    let probes = vec![vec![0.0, -1.0], vec![0.6, 0.8], vec![-0.35, 0.2]];
    let system = ConstrainedHamiltonianSystem::new(def, &probes)?;
    let initial_state = State::new(vec![0.0, -1.0], vec![1.0, 0.0], 0.0);
    let initial_energy = system.hamiltonian(&initial_state);
    Ok(BenchmarkProblem {
        name: "simple-pendulum",
        system,
        initial_state,
        default_horizon: 10.0,
        known: KnownFacts { period: None, constant_lambda: None, initial_energy },
    })
}

/// Pendulum with an added attractive Coulomb center at `q*` (default
/// `(2, 0)`): `H = 1/2 |p|^2 + e2'q - 1/|q - q*|`, i.e.
/// `U(q) = -e2'q + 1/|q - q*|`. The center must stay well away from the
/// unit circle the motion lives on.
pub fn modified_pendulum(q_star: Option<[f64; 2]>) -> Result<BenchmarkProblem, ProblemError> {
    let q_star = q_star.unwrap_or([2.0, 0.0]);
    let star_norm = (q_star[0] * q_star[0] + q_star[1] * q_star[1]).sqrt();
    if (star_norm - 1.0).abs() < 1e-6 {
        return Err(ProblemError::InvalidConfiguration {
            detail: format!(
                "Coulomb center ({}, {}) lies on the unit circle the pendulum moves on",
                q_star[0], q_star[1]
            ),
        });
    }
    let (constraints, jacobian, hessian) = unit_circle_constraint_2d();
    let star_p = q_star;
    let star_g = q_star;
    let def = SystemDefinition {
        mass: DenseMatrix::identity(2),
        potential: Box::new(move |q: &[f64]| {
            let dx = q[0] - star_p[0];
            let dy = q[1] - star_p[1];
            -q[1] + 1.0 / (dx * dx + dy * dy).sqrt()
        }),
        grad_potential: Box::new(move |q: &[f64]| {
            let dx = q[0] - star_g[0];
            let dy = q[1] - star_g[1];
            let r3 = (dx * dx + dy * dy).sqrt().powi(3);
            vec![-dx / r3, -1.0 - dy / r3]
        }),
        constraints,
        constraint_jacobian: jacobian,
        constraint_hessian_form: hessian,
    };
    let probes = vec![vec![0.0, -1.0], vec![0.6, 0.8], vec![-0.35, 0.2]];
    let system = ConstrainedHamiltonianSystem::new(def, &probes)?;
    let initial_state = State::new(vec![0.0, -1.0], vec![1.0, 0.0], 0.0);
    let initial_energy = system.hamiltonian(&initial_state);
    Ok(BenchmarkProblem {
        name: "modified-pendulum",
        system,
        initial_state,
        default_horizon: 20.0,
        known: KnownFacts { period: None, constant_lambda: None, initial_energy },
    })
}

/// Spherical pendulum on its steady conical orbit: with `z0 = 1/sqrt(2)`,
/// the state `q = (z0, 0, -z0)`, `p = (0, sqrt(z0), 0)` rotates uniformly
/// with period `2^{3/4} pi`, and the multiplier is identically `z0`.
pub fn conical_pendulum() -> Result<BenchmarkProblem, ProblemError> {
    let z0 = std::f64::consts::FRAC_1_SQRT_2;
    let def = SystemDefinition {
        mass: DenseMatrix::identity(3),
        potential: Box::new(|q: &[f64]| -q[2]),
        grad_potential: Box::new(|_q: &[f64]| vec![0.0, 0.0, -1.0]),
        constraints: Box::new(|q: &[f64]| {
            vec![q[0] * q[0] + q[1] * q[1] + q[2] * q[2] - 1.0]
        }),
        constraint_jacobian: Box::new(|q: &[f64]| {
            DenseMatrix::from_rows(&[&[2.0 * q[0]], &[2.0 * q[1]], &[2.0 * q[2]]])
        }),
        constraint_hessian_form: Box::new(|_q: &[f64], w: &[f64]| {
            vec![2.0 * (w[0] * w[0] + w[1] * w[1] + w[2] * w[2])]
        }),
    };
    let probes = vec![vec![z0, 0.0, -z0], vec![0.1, 0.7, -0.6]];
    let system = ConstrainedHamiltonianSystem::new(def, &probes)?;
    let initial_state = State::new(vec![z0, 0.0, -z0], vec![0.0, z0.sqrt(), 0.0], 0.0);
    let initial_energy = system.hamiltonian(&initial_state);
    let period = 2.0_f64.powf(0.75) * std::f64::consts::PI;
    Ok(BenchmarkProblem {
        name: "conical-pendulum",
        system,
        initial_state,
        default_horizon: period,
        known: KnownFacts {
            period: Some(period),
            constant_lambda: Some(z0),
            initial_energy,
        },
    })
}

/// Three tethered satellites in R^3. Writing `q = (q1, q2, q3)` and
/// `r_i = |q_i|`, the energy is
///
/// ```text
///     H = sum_i [ 1/2 |p_i|^2 - 1/r_i - cos(r_i) ],
/// ```
///
/// i.e. `U(q) = sum_i (1/r_i + cos r_i)` in the `H = T - U` convention, so
/// that the central force is attractive and a zero-energy launch speed
/// exists. The tethers fix the three pairwise distances at one, starting
/// from an equilateral triangle at height `z0 = 20`; bodies 1 and 2 are at
/// rest and body 3 gets the speed `v0 > 0` along x that makes `H = 0`,
/// found by bisection.
pub fn tethered_satellites() -> Result<BenchmarkProblem, ProblemError> {
    let def = SystemDefinition {
        mass: DenseMatrix::identity(9),
        potential: Box::new(|q: &[f64]| {
            (0..3)
                .map(|i| {
                    let b = &q[3 * i..3 * i + 3];
                    let r = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                    1.0 / r + r.cos()
                })
                .sum()
        }),
        grad_potential: Box::new(|q: &[f64]| {
            let mut grad = vec![0.0; 9];
            for i in 0..3 {
                let b = &q[3 * i..3 * i + 3];
                let r = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
                let coeff = -1.0 / (r * r * r) - r.sin() / r;
                for c in 0..3 {
                    grad[3 * i + c] = coeff * b[c];
                }
            }
            grad
        }),
        constraints: Box::new(|q: &[f64]| {
            let d2 = |a: usize, b: usize| {
                (0..3)
                    .map(|c| (q[3 * a + c] - q[3 * b + c]).powi(2))
                    .sum::<f64>()
            };
            vec![d2(0, 1) - 1.0, d2(1, 2) - 1.0, d2(0, 2) - 1.0]
        }),
        constraint_jacobian: Box::new(|q: &[f64]| {
            let mut jac = DenseMatrix::zeros(9, 3);
            // Constraint l ties the pair (a_l, b_l); columns hold
            // 2 (q_a - q_b) in block a and the negative in block b.
            let pairs = [(0usize, 1usize), (1, 2), (0, 2)];
            for (l, &(a, b)) in pairs.iter().enumerate() {
                for c in 0..3 {
                    let diff = 2.0 * (q[3 * a + c] - q[3 * b + c]);
                    jac[(3 * a + c, l)] = diff;
                    jac[(3 * b + c, l)] = -diff;
                }
            }
            jac
        }),
        constraint_hessian_form: Box::new(|_q: &[f64], w: &[f64]| {
            let d2 = |a: usize, b: usize| {
                (0..3)
                    .map(|c| (w[3 * a + c] - w[3 * b + c]).powi(2))
                    .sum::<f64>()
            };
            vec![2.0 * d2(0, 1), 2.0 * d2(1, 2), 2.0 * d2(0, 2)]
        }),
    };

    let z0 = 20.0;
    let q0 = vec![
        0.0,
        0.5,
        z0,
        0.0,
        -0.5,
        z0,
        0.0,
        0.0,
        z0 - 3.0_f64.sqrt() / 2.0,
    ];
    let mut probe2 = q0.clone();
    for (i, v) in probe2.iter_mut().enumerate() {
        *v += if i % 2 == 0 { 0.05 } else { -0.05 };
    }
    let system = ConstrainedHamiltonianSystem::new(def, &[q0.clone(), probe2])?;

    // Zero-energy launch speed: H(v) = v^2/2 - U(q0) is increasing in v > 0,
    // so bisect it over (0, 10].
    let u0 = system.potential(&q0);
    let energy = |v: f64| 0.5 * v * v - u0;
    let (mut lo, mut hi) = (0.0_f64, 10.0_f64);
    if !(energy(lo) < 0.0 && energy(hi) > 0.0) {
        return Err(ProblemError::InvalidConfiguration {
            detail: format!(
                "zero-energy speed not bracketed in (0, 10]: H(0) = {:e}, H(10) = {:e}",
                energy(lo),
                energy(hi)
            ),
        });
    }
    while hi - lo > 1e-14 {
        let mid = 0.5 * (lo + hi);
        if energy(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let v0 = 0.5 * (lo + hi);

    let mut p0 = vec![0.0; 9];
    p0[6] = v0;
    let initial_state = State::new(q0, p0, 0.0);
    let initial_energy = system.hamiltonian(&initial_state);
    Ok(BenchmarkProblem {
        name: "tethered-satellites",
        system,
        initial_state,
        default_horizon: 1000.0,
        known: KnownFacts { period: None, constant_lambda: None, initial_energy },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_problems_have_consistent_initial_states() {
        for name in names() {
            let prob = by_name(name).unwrap();
            prob.system
                .check_consistency(&prob.initial_state, Some(1e-12))
                .unwrap_or_else(|e| panic!("{name}: {e}"));
        }
    }

    #[test]
    fn simple_pendulum_energy_and_jacobian() {
        let prob = simple_pendulum().unwrap();
        assert!((prob.known.initial_energy + 0.5).abs() < 1e-15);
        let jac = prob.system.constraint_jacobian(&prob.initial_state.q);
        assert!((jac[(0, 0)] - 0.0).abs() < 1e-15);
        assert!((jac[(1, 0)] + 2.0).abs() < 1e-15);
    }

    #[test]
    fn modified_pendulum_energy_and_center_distance() {
        let prob = modified_pendulum(None).unwrap();
        let q = &prob.initial_state.q;
        let dist = ((q[0] - 2.0).powi(2) + q[1].powi(2)).sqrt();
        assert!((dist - 5.0_f64.sqrt()).abs() < 1e-15);
        let expect = -0.5 - 1.0 / 5.0_f64.sqrt();
        assert!((prob.known.initial_energy - expect).abs() < 1e-14);
    }

    #[test]
    fn modified_pendulum_rejects_center_on_circle() {
        let err = modified_pendulum(Some([0.6, 0.8])).unwrap_err();
        assert!(matches!(err, ProblemError::InvalidConfiguration { .. }));
    }

    #[test]
    fn conical_pendulum_known_facts() {
        let prob = conical_pendulum().unwrap();
        let z0 = std::f64::consts::FRAC_1_SQRT_2;
        assert!((prob.known.initial_energy + 0.5 * z0).abs() < 1e-15);
        assert!((prob.known.period.unwrap() - 2.0_f64.powf(0.75) * std::f64::consts::PI).abs()
            < 1e-15);
        let lambda = prob.system.exact_lambda(&prob.initial_state).unwrap();
        assert!((lambda[0] - z0).abs() < 1e-14, "lambda = {}", lambda[0]);
        assert_eq!(prob.known.constant_lambda, Some(z0));
    }

    #[test]
    fn tethered_satellites_geometry_and_energy() {
        let prob = tethered_satellites().unwrap();
        let g = prob.system.constraints(&prob.initial_state.q);
        for (l, v) in g.iter().enumerate() {
            assert!(v.abs() < 1e-13, "g_{l} = {v:e}");
        }
        // Zero total energy by construction of the launch speed.
        assert!(prob.known.initial_energy.abs() < 1e-12);
        let v0 = prob.initial_state.p[6];
        assert!(v0 > 1.9 && v0 < 2.0, "v0 = {v0}");
        assert_eq!(prob.system.dim(), 9);
        assert_eq!(prob.system.num_constraints(), 3);
    }

    #[test]
    fn by_name_covers_catalog_and_rejects_unknown() {
        for name in names() {
            assert_eq!(by_name(name).unwrap().name, *name);
        }
        assert!(matches!(
            by_name("double-pendulum"),
            Err(ProblemError::UnknownProblem { .. })
        ));
    }
}
