//! Shifted orthonormal Legendre basis, Gauss rules, and tableau matrices.
//!
//! The basis on [0, 1] is `P_j(x) = sqrt(2j+1) * L_j(2x - 1)`, with `L_j` the
//! classical Legendre polynomial, so that `int_0^1 P_i P_j = delta_ij`. The
//! definite integrals admit the closed forms
//!
//! ```text
//!     int_0^x P_0 = xi_0 P_0(x) + xi_1 P_1(x),
//!     int_0^x P_j = xi_{j+1} P_{j+1}(x) - xi_j P_{j-1}(x),    j >= 1,
//! ```
//!
//! with `xi_i = (2 sqrt(|4 i^2 - 1|))^{-1}` (so `xi_0 = 1/2`), which the test
//! suite validates against brute-force composite quadrature: the tableau
//! factorization `I_s = P_s X_s` alone would only pin the integrals down at
//! the Gauss nodes.

use crate::linalg::DenseMatrix;
use thiserror::Error;

/// Errors produced while constructing basis or tableau data.
#[derive(Debug, Error)]
pub enum BasisError {
    #[error("degree {degree} exceeds the basis maximum {max_degree}")]
    DegreeOutOfRange { degree: usize, max_degree: usize },
    #[error("Gauss node refinement failed to converge for n = {n}")]
    RootsNotConverged { n: usize },
    #[error("invalid HBVM configuration: need 1 <= s <= k, got s = {s}, k = {k}")]
    InvalidConfiguration { s: usize, k: usize },
}

/// `xi_i = (2 sqrt(|4 i^2 - 1|))^{-1}`, the recurrence constants of the
/// integral identities and of the matrix `X_s`.
pub fn xi(i: usize) -> f64 {
    let d = (4 * i * i) as f64 - 1.0;
    1.0 / (2.0 * d.abs().sqrt())
}

/// Values `P_0(x), ..., P_n(x)` by the classical three-term recurrence on
/// `L_j(t)`, `t = 2x - 1`, scaled by `sqrt(2j+1)`.
fn eval_all(n: usize, x: f64) -> Vec<f64> {
    let t = 2.0 * x - 1.0;
    let mut p = Vec::with_capacity(n + 1);
    let mut l_prev = 1.0; // L_0
    p.push(1.0);
    if n == 0 {
        return p;
    }
    let mut l = t; // L_1
    p.push(3.0_f64.sqrt() * l);
    for j in 1..n {
        let l_next = (((2 * j + 1) as f64) * t * l - j as f64 * l_prev) / (j + 1) as f64;
        l_prev = l;
        l = l_next;
        p.push(((2 * (j + 1) + 1) as f64).sqrt() * l);
    }
    p
}

/// `P_n(x)` and its derivative, for Newton refinement of the Gauss nodes.
fn eval_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let t = 2.0 * x - 1.0;
    let scale = ((2 * n + 1) as f64).sqrt();
    if n == 0 {
        return (1.0, 0.0);
    }
    let mut l_prev = 1.0;
    let mut l = t;
    for j in 1..n {
        let l_next = (((2 * j + 1) as f64) * t * l - j as f64 * l_prev) / (j + 1) as f64;
        l_prev = l;
        l = l_next;
    }
    // (1 - t^2) L_n'(t) = n (L_{n-1}(t) - t L_n(t)); the chain rule for
    // t = 2x - 1 contributes a factor 2. Nodes are interior, so 1 - t^2 > 0.
    let dl = n as f64 * (l_prev - t * l) / (1.0 - t * t);
    (scale * l, scale * 2.0 * dl)
}

/// The shifted orthonormal Legendre family up to a fixed degree.
#[derive(Debug, Clone)]
pub struct LegendreBasis {
    max_degree: usize,
}

impl LegendreBasis {
    pub fn new(max_degree: usize) -> Self {
        Self { max_degree }
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// `P_j(x)`.
    pub fn eval(&self, j: usize, x: f64) -> Result<f64, BasisError> {
        if j > self.max_degree {
            return Err(BasisError::DegreeOutOfRange { degree: j, max_degree: self.max_degree });
        }
        Ok(eval_all(j, x)[j])
    }

    /// `int_0^x P_j(tau) dtau` by the closed forms above.
    pub fn integral(&self, j: usize, x: f64) -> Result<f64, BasisError> {
        if j > self.max_degree {
            return Err(BasisError::DegreeOutOfRange { degree: j, max_degree: self.max_degree });
        }
        Ok(integral_unchecked(j, x))
    }
}

fn integral_unchecked(j: usize, x: f64) -> f64 {
    let p = eval_all(j + 1, x);
    if j == 0 {
        // Equals x, written in basis form so the X_s factorization is exact.
        xi(0) * p[0] + xi(1) * p[1]
    } else {
        xi(j + 1) * p[j + 1] - xi(j) * p[j - 1]
    }
}

/// A Gauss-Legendre rule on [0, 1]: nodes strictly increasing in (0, 1),
/// weights positive and summing to one.
#[derive(Debug, Clone)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Applies the rule to `f` on [0, 1].
    pub fn integrate(&self, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&c, &w)| w * f(c)).sum()
    }
}

const NEWTON_TOL: f64 = 1e-15;
const NEWTON_MAX_ITER: usize = 100;

/// The `n`-node Gauss-Legendre rule on [0, 1].
///
/// Nodes are the roots of `P_n`, refined by Newton iteration from Chebyshev
/// initial guesses; weights use the Christoffel formula
/// `w_j = 1 / sum_{l < n} P_l(c_j)^2`, which is numerically stable and needs
/// no linear solve.
pub fn gauss_rule(n: usize) -> Result<GaussRule, BasisError> {
    assert!(n >= 1, "a Gauss rule needs at least one node");
    let mut nodes = Vec::with_capacity(n);
    for j in 1..=n {
        // Chebyshev-point guess for the j-th root of L_n on [-1, 1],
        // descending in t hence ascending after the flip below.
        let t0 = (std::f64::consts::PI * (4 * j - 1) as f64 / (4 * n + 2) as f64).cos();
        let mut c = 0.5 * (1.0 - t0);
        let mut converged = false;
        for _ in 0..NEWTON_MAX_ITER {
            let (p, dp) = eval_with_derivative(n, c);
            let delta = p / dp;
            c -= delta;
            if delta.abs() <= NEWTON_TOL {
                // One polishing step past the tolerance.
                let (p, dp) = eval_with_derivative(n, c);
                c -= p / dp;
                converged = true;
                break;
            }
        }
        if !converged || !c.is_finite() {
            return Err(BasisError::RootsNotConverged { n });
        }
        nodes.push(c);
    }
    let weights = nodes
        .iter()
        .map(|&c| {
            let p = eval_all(n - 1, c);
            1.0 / p.iter().map(|v| v * v).sum::<f64>()
        })
        .collect();
    Ok(GaussRule { nodes, weights })
}

/// All tableau data of an HBVM(k, s) method.
///
/// `p_s` and `i_s` hold the basis values and integrals at the `s` stage
/// nodes `c_i`; `p_hat` and `i_hat` the analogous `k x s` matrices at the
/// quadrature nodes. The identities `I_s = P_s X_s` and
/// `P_s' Omega = P_s^{-1}` tie them together; the products used on the hot
/// path of the stage iteration are precomputed once here.
#[derive(Debug, Clone)]
pub struct HbvmTableau {
    pub s: usize,
    pub k: usize,
    /// Stage rule: nodes `c`, weights `b` (the diagonal of `Omega`).
    pub stage_rule: GaussRule,
    /// Quadrature rule: nodes `c_hat`, weights `b_hat` (diagonal of `Omega_hat`).
    pub quad_rule: GaussRule,
    /// `(P_s)_{ij} = P_{j-1}(c_i)`, `s x s`.
    pub p_s: DenseMatrix,
    /// `(I_s)_{ij} = int_0^{c_i} P_{j-1}`, `s x s`.
    pub i_s: DenseMatrix,
    /// `P_{j-1}(c_hat_i)`, `k x s`.
    pub p_hat: DenseMatrix,
    /// `int_0^{c_hat_i} P_{j-1}`, `k x s`.
    pub i_hat: DenseMatrix,
    /// Tridiagonal-with-corner matrix with `(X_s)_11 = xi_0`,
    /// `(X_s)_{j+1,j} = xi_j`, `(X_s)_{j,j+1} = -xi_j`.
    pub x_s: DenseMatrix,
    /// `P_s' Omega`, `s x s`: projects stage values onto basis coefficients.
    pub proj: DenseMatrix,
    /// `P_hat' Omega_hat`, `s x k`: projects quadrature-node values.
    pub proj_hat: DenseMatrix,
    /// `I_s P_s' Omega`, `s x s`: the Butcher matrix of the s-stage Gauss
    /// method, which also assembles the multiplier system.
    pub butcher: DenseMatrix,
    /// `d_i = sum_{j < s} P_j(1) b_i P_j(c_i)`; the end-point multiplier is
    /// `lambda_bar = sum_i d_i lambda_i`, equivalent to evaluating the
    /// Lagrange interpolant of the stage multipliers at 1.
    pub lagrange_end: Vec<f64>,
}

impl HbvmTableau {
    /// Stage weights `b` (the diagonal of `Omega`).
    pub fn omega(&self) -> &[f64] {
        &self.stage_rule.weights
    }

    /// Quadrature weights `b_hat` (the diagonal of `Omega_hat`).
    pub fn omega_hat(&self) -> &[f64] {
        &self.quad_rule.weights
    }
}

/// Builds the HBVM(k, s) tableau. Requires `1 <= s <= k`.
pub fn build_tableau(s: usize, k: usize) -> Result<HbvmTableau, BasisError> {
    if s < 1 || k < s {
        return Err(BasisError::InvalidConfiguration { s, k });
    }
    let stage_rule = gauss_rule(s)?;
    let quad_rule = gauss_rule(k)?;

    let basis_at = |nodes: &[f64]| {
        let vals = DenseMatrix::from_fn(nodes.len(), s, |i, j| eval_all(s - 1, nodes[i])[j]);
        let ints = DenseMatrix::from_fn(nodes.len(), s, |i, j| integral_unchecked(j, nodes[i]));
        (vals, ints)
    };
    let (p_s, i_s) = basis_at(&stage_rule.nodes);
    let (p_hat, i_hat) = basis_at(&quad_rule.nodes);

    let mut x_s = DenseMatrix::zeros(s, s);
    x_s[(0, 0)] = xi(0);
    for j in 1..s {
        x_s[(j, j - 1)] = xi(j);
        x_s[(j - 1, j)] = -xi(j);
    }

    let proj = DenseMatrix::from_fn(s, s, |j, i| stage_rule.weights[i] * p_s[(i, j)]);
    let proj_hat = DenseMatrix::from_fn(s, k, |j, i| quad_rule.weights[i] * p_hat[(i, j)]);
    let butcher = i_s.matmul(&proj);

    let p_at_one = eval_all(s - 1, 1.0);
    let lagrange_end = (0..s)
        .map(|i| (0..s).map(|j| p_at_one[j] * proj[(j, i)]).sum())
        .collect();

    Ok(HbvmTableau {
        s,
        k,
        stage_rule,
        quad_rule,
        p_s,
        i_s,
        p_hat,
        i_hat,
        x_s,
        proj,
        proj_hat,
        butcher,
        lagrange_end,
    })
}

/// The Butcher matrix `a_ij = b_j sum_{l=0}^{s-1} int_0^{c_i} P_l * P_l(c_j)`
/// computed directly from the defining sum, i.e. `A = I_s P_s' Omega`. Equal
/// to the classical s-stage Gauss matrix; the copy precomputed in the tableau
/// is checked against this in the tests.
pub fn butcher_matrix(tab: &HbvmTableau) -> DenseMatrix {
    let s = tab.s;
    DenseMatrix::from_fn(s, s, |i, j| {
        let bj = tab.stage_rule.weights[j];
        let sum: f64 = (0..s).map(|l| tab.i_s[(i, l)] * tab.p_s[(j, l)]).sum();
        bj * sum
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Brute-force oracle: composite Simpson quadrature of `f` over [a, b].
    /// Panel counts are chosen large enough that the O(h^4) error is far
    /// below the comparison tolerances for polynomial degrees <= 12.
    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
        let h = (b - a) / panels as f64;
        let mut sum = f(a) + f(b);
        for i in 1..panels {
            let x = a + i as f64 * h;
            sum += if i % 2 == 0 { 2.0 } else { 4.0 } * f(x);
        }
        sum * h / 3.0
    }

    #[test]
    fn p0_is_one_everywhere() {
        let basis = LegendreBasis::new(4);
        assert_eq!(basis.eval(0, 0.37).unwrap(), 1.0);
        assert_eq!(basis.eval(0, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn p1_odd_about_midpoint_and_sqrt3_at_one() {
        let basis = LegendreBasis::new(4);
        assert_eq!(basis.eval(1, 0.5).unwrap(), 0.0);
        assert!((basis.eval(1, 1.0).unwrap() - 3.0_f64.sqrt()).abs() < 1e-15);
        // Independent normalization check of P_1 by fine trapezoidal
        // quadrature of its square.
        let n = 200_000;
        let h = 1.0 / n as f64;
        let sq = |x: f64| basis.eval(1, x).unwrap().powi(2);
        let mut trap = 0.5 * (sq(0.0) + sq(1.0));
        for i in 1..n {
            trap += sq(i as f64 * h);
        }
        trap *= h;
        assert!((trap - 1.0).abs() < 1e-9, "int P_1^2 = {trap}");
    }

    #[test]
    fn degree_out_of_range_is_reported() {
        let basis = LegendreBasis::new(3);
        assert!(matches!(
            basis.eval(4, 0.5),
            Err(BasisError::DegreeOutOfRange { degree: 4, max_degree: 3 })
        ));
        assert!(matches!(basis.integral(4, 0.5), Err(BasisError::DegreeOutOfRange { .. })));
    }

    #[test]
    fn integral_closed_form_frozen_values() {
        let basis = LegendreBasis::new(6);
        // int_0^1 P_0 = 1 and int_0^1 P_j = 0 by orthogonality to P_0.
        assert!((basis.integral(0, 1.0).unwrap() - 1.0).abs() < 1e-15);
        for j in 1..=6 {
            assert!(basis.integral(j, 1.0).unwrap().abs() < 1e-15, "j = {j}");
        }
        // int_0^{1/2} P_1 = -sqrt(3)/4, the analytic integral of sqrt(3)(2x-1).
        let expect = -3.0_f64.sqrt() / 4.0;
        assert!((basis.integral(1, 0.5).unwrap() - expect).abs() < 1e-15);
    }

    #[test]
    fn integral_closed_form_matches_brute_force_quadrature() {
        let basis = LegendreBasis::new(12);
        for j in 0..=12 {
            for &x in &[0.1, 0.317, 0.5, 0.85, 1.0] {
                let oracle = simpson(|t| eval_all(j, t)[j], 0.0, x, 50_000);
                let closed = basis.integral(j, x).unwrap();
                assert!(
                    (closed - oracle).abs() < 1e-12,
                    "j = {j}, x = {x}: closed {closed} vs oracle {oracle}"
                );
            }
        }
    }

    #[test]
    fn orthonormality_via_gauss_rule() {
        // A rule with 2n - 1 >= i + j integrates P_i P_j exactly.
        let rule = gauss_rule(11).unwrap();
        let basis = LegendreBasis::new(10);
        for i in 0..=10 {
            for j in 0..=10 {
                let val = rule.integrate(|x| {
                    basis.eval(i, x).unwrap() * basis.eval(j, x).unwrap()
                });
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((val - expect).abs() < 1e-13, "i = {i}, j = {j}: {val}");
            }
        }
    }

    #[test]
    fn gauss_rule_one_node() {
        let rule = gauss_rule(1).unwrap();
        assert!((rule.nodes[0] - 0.5).abs() < 1e-15);
        assert!((rule.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_rule_two_nodes() {
        let rule = gauss_rule(2).unwrap();
        let lo = (3.0 - 3.0_f64.sqrt()) / 6.0;
        let hi = (3.0 + 3.0_f64.sqrt()) / 6.0;
        assert!((rule.nodes[0] - lo).abs() < 1e-15);
        assert!((rule.nodes[1] - hi).abs() < 1e-15);
        assert!((rule.weights[0] - 0.5).abs() < 1e-15);
        assert!((rule.weights[1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn gauss_rule_five_nodes_integrates_x9() {
        let rule = gauss_rule(5).unwrap();
        let val = rule.integrate(|x| x.powi(9));
        assert!((val - 0.1).abs() < 1e-15, "got {val}");
    }

    #[test]
    fn gauss_rules_are_exact_on_monomials() {
        for n in 1..=12 {
            let rule = gauss_rule(n).unwrap();
            for d in 0..=(2 * n - 1) {
                let val = rule.integrate(|x| x.powi(d as i32));
                let exact = 1.0 / (d + 1) as f64;
                assert!((val - exact).abs() < 1e-13, "n = {n}, d = {d}: {val}");
            }
        }
    }

    #[test]
    fn gauss_nodes_symmetric_weights_normalized() {
        for n in 1..=20 {
            let rule = gauss_rule(n).unwrap();
            for j in 0..n {
                assert!(
                    (rule.nodes[j] + rule.nodes[n - 1 - j] - 1.0).abs() < 1e-14,
                    "n = {n}, j = {j}"
                );
                assert!(rule.weights[j] > 0.0);
                assert!(rule.nodes[j] > 0.0 && rule.nodes[j] < 1.0);
                if j > 0 {
                    assert!(rule.nodes[j] > rule.nodes[j - 1]);
                }
            }
            let total: f64 = rule.weights.iter().sum();
            assert!((total - 1.0).abs() < 1e-14, "n = {n}: weights sum {total}");
        }
    }

    #[test]
    fn gauss_nodes_are_roots_up_to_n_50() {
        // The scaled polynomial has derivative O(n^2 sqrt(n)) at its roots,
        // so judge each node by its backward error |P/P'| (the distance to
        // the true root), which a fully converged Newton leaves at the ulp
        // level of the node itself.
        for n in [1, 2, 5, 10, 25, 50] {
            let rule = gauss_rule(n).unwrap();
            for &c in &rule.nodes {
                let (p, dp) = eval_with_derivative(n, c);
                let backward = (p / dp).abs();
                assert!(backward <= 5e-16, "n = {n}: |P_n/P_n'|(c) = {backward}");
            }
        }
    }

    #[test]
    fn tableau_x_matrix_structure() {
        let tab = build_tableau(1, 1).unwrap();
        assert!((tab.x_s[(0, 0)] - 0.5).abs() < 1e-15);

        let tab = build_tableau(2, 2).unwrap();
        let xi1 = 1.0 / (2.0 * 3.0_f64.sqrt());
        assert!((tab.x_s[(1, 0)] - xi1).abs() < 1e-15);
        assert!((tab.x_s[(0, 1)] + xi1).abs() < 1e-15);

        let tab = build_tableau(6, 6).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let expect = if i == 0 && j == 0 {
                    xi(0)
                } else if i == j + 1 {
                    xi(j + 1)
                } else if j == i + 1 {
                    -xi(i + 1)
                } else {
                    0.0
                };
                assert!((tab.x_s[(i, j)] - expect).abs() < 1e-15, "({i}, {j})");
            }
        }
    }

    #[test]
    fn tableau_identities_hold_up_to_s_10() {
        for s in 1..=10 {
            let tab = build_tableau(s, s).unwrap();
            // I_s = P_s X_s.
            let px = tab.p_s.matmul(&tab.x_s);
            let mut worst: f64 = 0.0;
            for i in 0..s {
                for j in 0..s {
                    worst = worst.max((px[(i, j)] - tab.i_s[(i, j)]).abs());
                }
            }
            assert!(worst <= 1e-13, "s = {s}: |I_s - P_s X_s| = {worst}");

            // P_s' Omega P_s = I, i.e. proj inverts P_s.
            let prod = tab.proj.matmul(&tab.p_s);
            let mut worst: f64 = 0.0;
            for i in 0..s {
                for j in 0..s {
                    let expect = if i == j { 1.0 } else { 0.0 };
                    worst = worst.max((prod[(i, j)] - expect).abs());
                }
            }
            assert!(worst <= 1e-12, "s = {s}: |P_s' Omega P_s - I| = {worst}");
        }
    }

    #[test]
    fn hatted_integrals_match_brute_force_quadrature() {
        let tab = build_tableau(3, 6).unwrap();
        assert_eq!(tab.i_hat.rows(), 6);
        assert_eq!(tab.i_hat.cols(), 3);
        for i in 0..6 {
            let c_hat = tab.quad_rule.nodes[i];
            for j in 0..3 {
                let oracle = simpson(|t| eval_all(j, t)[j], 0.0, c_hat, 20_000);
                assert!(
                    (tab.i_hat[(i, j)] - oracle).abs() < 1e-13,
                    "row {i}, col {j}: {} vs {oracle}",
                    tab.i_hat[(i, j)]
                );
            }
        }
    }

    #[test]
    fn invalid_configuration_rejected() {
        assert!(matches!(build_tableau(3, 2), Err(BasisError::InvalidConfiguration { s: 3, k: 2 })));
        assert!(matches!(build_tableau(0, 0), Err(BasisError::InvalidConfiguration { .. })));
    }

    #[test]
    fn butcher_matrix_s1_is_midpoint() {
        let tab = build_tableau(1, 1).unwrap();
        let a = butcher_matrix(&tab);
        assert!((a[(0, 0)] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn butcher_matrix_s2_is_gauss_two_stage() {
        let tab = build_tableau(2, 2).unwrap();
        let a = butcher_matrix(&tab);
        let r3 = 3.0_f64.sqrt();
        let expect = [[0.25, 0.25 - r3 / 6.0], [0.25 + r3 / 6.0, 0.25]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[(i, j)] - expect[i][j]).abs() < 1e-15, "({i}, {j})");
            }
        }
    }

    #[test]
    fn butcher_matrix_satisfies_collocation_conditions() {
        // sum_j a_ij c_j^{q-1} = c_i^q / q for q = 1..s characterizes the
        // Gauss collocation matrix; q = 1 is the row-sum consistency check.
        for s in 1..=8 {
            let tab = build_tableau(s, s).unwrap();
            let a = butcher_matrix(&tab);
            for q in 1..=s {
                for i in 0..s {
                    let lhs: f64 = (0..s)
                        .map(|j| a[(i, j)] * tab.stage_rule.nodes[j].powi(q as i32 - 1))
                        .sum();
                    let rhs = tab.stage_rule.nodes[i].powi(q as i32) / q as f64;
                    assert!((lhs - rhs).abs() <= 1e-12, "s = {s}, q = {q}, i = {i}");
                }
            }
        }
    }

    #[test]
    fn butcher_matrix_agrees_with_precomputed_product() {
        for (s, k) in [(1, 1), (2, 4), (5, 5), (8, 16)] {
            let tab = build_tableau(s, k).unwrap();
            let a = butcher_matrix(&tab);
            for i in 0..s {
                for j in 0..s {
                    assert!((a[(i, j)] - tab.butcher[(i, j)]).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn lagrange_end_weights_match_cardinal_polynomials() {
        // Independent oracle: l_i(1) = prod_{j != i} (1 - c_j) / (c_i - c_j).
        for s in 1..=8 {
            let tab = build_tableau(s, s).unwrap();
            let c = &tab.stage_rule.nodes;
            for i in 0..s {
                let mut li = 1.0;
                for j in 0..s {
                    if j != i {
                        li *= (1.0 - c[j]) / (c[i] - c[j]);
                    }
                }
                assert!(
                    (tab.lagrange_end[i] - li).abs() < 1e-12,
                    "s = {s}, i = {i}: {} vs {li}",
                    tab.lagrange_end[i]
                );
            }
            let total: f64 = tab.lagrange_end.iter().sum();
            assert!((total - 1.0).abs() < 1e-13, "s = {s}: sum {total}");
        }
    }

    proptest! {
        #[test]
        fn prop_three_term_recurrence_residual(x in 0.0_f64..=1.0) {
            // Rebuild the classical values L_j = P_j / sqrt(2j+1) and check
            // (j+1) L_{j+1} = (2j+1) t L_j - j L_{j-1} at t = 2x - 1.
            let p = eval_all(20, x);
            let t = 2.0 * x - 1.0;
            let l: Vec<f64> =
                p.iter().enumerate().map(|(j, v)| v / ((2 * j + 1) as f64).sqrt()).collect();
            for j in 1..20 {
                let residual = (j + 1) as f64 * l[j + 1]
                    - (2 * j + 1) as f64 * t * l[j]
                    + j as f64 * l[j - 1];
                prop_assert!(residual.abs() <= 1e-13, "j = {}: {}", j, residual);
            }
        }

        #[test]
        fn prop_integral_is_antiderivative(j in 0usize..=10, x in 0.01_f64..=0.99) {
            // Central finite difference of the closed-form integral
            // recovers P_j(x).
            let basis = LegendreBasis::new(11);
            let h = 1e-6;
            let fd = (basis.integral(j, x + h).unwrap() - basis.integral(j, x - h).unwrap())
                / (2.0 * h);
            let p = basis.eval(j, x).unwrap();
            prop_assert!((fd - p).abs() <= 1e-4 * (1.0 + p.abs()), "j = {}, x = {}", j, x);
        }
    }
}
