//! Asymptotic behaviour of the rate mapping and the performance limits it
//! implies.
//!
//! For the rate mapping, `T(h w) / h` tends to the linear map `G w` with
//! `G = diag(p)^-1 Phi V diag(p)`, `Phi = (ln 2 / W) diag(r)`. The Perron
//! pair `(lambda, w_inf)` of `G` gives
//!
//! - the utility ceiling `sup U = 1 / lambda`,
//! - the efficiency ceiling `sup E = 1 / ||T(0)||`,
//! - the transition point `theta_trans = ||T(0)|| / lambda` separating
//!   the noise-limited from the interference-limited regime.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::netmodel::{build_coupling, per_bs_norm, Scenario};
use crate::sif::{fixed_point_solve, FixedPointConfig, InterferenceMapping, MonotoneNorm};

/// Relative stopping tolerance of [`perron_eigenpair`] used by the reports.
pub const POWER_ITERATION_TOL: f64 = 1e-12;
pub const POWER_ITERATION_MAX_ITER: usize = 10_000;

/// `G[k,l] = ln2 r_k / (W p_k) * V[k,l] * p_l`.
pub fn asymptotic_matrix_from(
    v_tilde: &DMatrix<f64>,
    powers: &[f64],
    demands: &[f64],
    bandwidth_hz: f64,
) -> Result<DMatrix<f64>> {
    let k = v_tilde.nrows();
    if powers.len() != k || demands.len() != k || v_tilde.ncols() != k {
        return Err(Error::DimensionMismatch { expected: k, got: powers.len().min(demands.len()) });
    }
    if let Some(i) = powers.iter().position(|p| !(*p > 0.0)) {
        return Err(Error::param("powers", format!("entry {i} must be positive")));
    }
    let ln2 = std::f64::consts::LN_2;
    Ok(DMatrix::from_fn(k, k, |r, c| ln2 * demands[r] / (bandwidth_hz * powers[r]) * v_tilde[(r, c)] * powers[c]))
}

pub fn asymptotic_matrix(scenario: &Scenario) -> Result<DMatrix<f64>> {
    let coupling = build_coupling(scenario)?;
    asymptotic_matrix_from(&coupling.v_tilde, &scenario.powers, &scenario.demands, scenario.bandwidth_hz)
}

/// Dominant eigenpair of a nonnegative matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PerronPair {
    pub value: f64,
    /// Nonnegative eigenvector with unit max-norm.
    pub vector: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Set for the all-zero matrix.
    pub degenerate: bool,
}

/// Power iteration from the all-ones vector.
///
/// Each step applies `G + s I` with `s` half the current Collatz-Wielandt
/// upper bound `max_i (Gx)_i / x_i`. The shift keeps the Perron vector and
/// moves the spectrum right, which removes the oscillation plain power
/// iteration shows on periodic (e.g. bipartite) irreducible matrices.
/// Tying it to the bound rather than to the row sums keeps the contraction
/// rate independent of diagonal rescalings `D G D^-1`, which can make row
/// sums differ by orders of magnitude. The eigenvalue estimate is
/// `||(G + sI) x||_inf / ||x||_inf - s`.
///
/// `tol` is relative. For irreducible `G` the iteration stops once the
/// Collatz-Wielandt bracket `[min_i (Gx)_i / x_i, max_i (Gx)_i / x_i]`,
/// which always contains the spectral radius, is narrower than
/// `tol * lambda`. A reducible `G` has no such guarantee and stops when
/// successive estimates differ by less than `tol * lambda`.
pub fn perron_eigenpair(g: &DMatrix<f64>, tol: f64, max_iter: usize) -> PerronPair {
    let k = g.nrows();
    assert!(g.is_square(), "perron_eigenpair needs a square matrix");
    let max_row_sum = (0..k).map(|r| g.row(r).iter().sum::<f64>()).fold(0.0, f64::max);
    if max_row_sum <= 0.0 {
        return PerronPair { value: 0.0, vector: vec![1.0; k], iterations: 0, converged: true, degenerate: true };
    }
    let bracketed = is_irreducible(g);
    let mut x = vec![1.0; k];
    let mut gx = vec![0.0; k];
    let mut lambda = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < max_iter {
        iterations += 1;
        for r in 0..k {
            gx[r] = g.row(r).iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        }
        let (lo, hi) = gx.iter().zip(&x).fold((f64::INFINITY, 0.0f64), |(lo, hi), (a, b)| {
            let ratio = a / b;
            (lo.min(ratio), hi.max(ratio))
        });
        let shift = 0.5 * hi;
        let mu = gx.iter().zip(&x).map(|(a, b)| a + shift * b).fold(0.0, f64::max);
        let next = mu - shift;
        let done = if bracketed { hi - lo <= tol * next } else { (next - lambda).abs() <= tol * next };
        lambda = next;
        for (xr, a) in x.iter_mut().zip(&gx) {
            *xr = (a + shift * *xr) / mu;
        }
        if done {
            converged = true;
            break;
        }
    }
    PerronPair { value: lambda.max(0.0), vector: x, iterations, converged, degenerate: false }
}

/// Whether the directed graph of the nonzero pattern of `g` is strongly connected.
pub fn is_irreducible(g: &DMatrix<f64>) -> bool {
    let k = g.nrows();
    if k == 1 {
        return g[(0, 0)] > 0.0;
    }
    let reach = |forward: bool| {
        let mut seen = vec![false; k];
        let mut stack = vec![0];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for u in 0..k {
                let edge = if forward { g[(v, u)] } else { g[(u, v)] };
                if edge > 0.0 && !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        seen.into_iter().all(|s| s)
    };
    reach(true) && reach(false)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AsymptoticReport {
    pub lambda_inf: f64,
    /// Perron vector scaled to unit per-cell load, `||A w_inf||_inf = 1`.
    pub w_inf: Vec<f64>,
    pub sup_utility: f64,
    pub sup_efficiency: f64,
    /// `||T(0)|| / lambda_inf`, infinite when `lambda_inf = 0`.
    pub theta_trans: f64,
    /// `||T(0)||` under the solve norm.
    pub noise_norm: f64,
    pub irreducible: bool,
    pub degenerate: bool,
    pub converged: bool,
}

/// Builds the report from an explicit asymptotic matrix.
///
/// `load_norm` normalizes `w_inf`; `norm` is the norm of the solve and
/// defines `||T(0)||`.
pub fn report_from_matrix(
    g: &DMatrix<f64>,
    load_norm: &dyn MonotoneNorm,
    mapping: &dyn InterferenceMapping,
    norm: &dyn MonotoneNorm,
) -> Result<AsymptoticReport> {
    let k = mapping.dim();
    if g.nrows() != k || load_norm.dim() != k || norm.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: g.nrows() });
    }
    let pair = perron_eigenpair(g, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITER);
    let scale = load_norm.norm(&pair.vector);
    let w_inf = pair.vector.iter().map(|v| v / scale).collect();
    let t0 = mapping.eval(&vec![0.0; k]);
    if let Some(index) = t0.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::NonFinite { index, iteration: 0 });
    }
    let noise_norm = norm.norm(&t0);
    let lambda = pair.value;
    let (theta_trans, sup_utility) =
        if lambda > 0.0 { (noise_norm / lambda, 1.0 / lambda) } else { (f64::INFINITY, f64::INFINITY) };
    Ok(AsymptoticReport {
        lambda_inf: lambda,
        w_inf,
        sup_utility,
        sup_efficiency: 1.0 / noise_norm,
        theta_trans,
        noise_norm,
        irreducible: is_irreducible(g),
        degenerate: pair.degenerate,
        converged: pair.converged,
    })
}

/// Report for the downlink problem of `scenario` solved with `mapping` and `norm`.
pub fn asymptotic_report(
    scenario: &Scenario,
    mapping: &dyn InterferenceMapping,
    norm: &dyn MonotoneNorm,
) -> Result<AsymptoticReport> {
    let g = asymptotic_matrix(scenario)?;
    report_from_matrix(&g, &per_bs_norm(scenario), mapping, norm)
}

/// `T(h x) / h` at the largest `h` of `h_grid`, a numeric estimate of the
/// asymptotic mapping at `x`.
pub fn numeric_asymptotic_limit(mapping: &dyn InterferenceMapping, x: &[f64], h_grid: &[f64]) -> Result<Vec<f64>> {
    if x.len() != mapping.dim() {
        return Err(Error::DimensionMismatch { expected: mapping.dim(), got: x.len() });
    }
    let h = h_grid.iter().copied().fold(f64::NAN, f64::max);
    if !(h > 0.0) {
        return Err(Error::param("h_grid", "needs at least one positive entry"));
    }
    let hx: Vec<f64> = x.iter().map(|v| h * v).collect();
    Ok(mapping.eval(&hx).into_iter().map(|v| v / h).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub theta: f64,
    pub utility: f64,
    /// `U(theta) / ||w*(theta)||`.
    pub efficiency: f64,
    /// `min(theta / ||T(0)||, 1 / lambda)`.
    pub utility_bound: f64,
    /// `min(1 / ||T(0)||, 1 / (lambda theta))`.
    pub efficiency_bound: f64,
    pub converged: bool,
}

/// `n` points log-spaced on `[lo, hi]`.
pub fn log_spaced(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n).map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp()).collect()
        }
    }
}

/// Solves the problem for every budget in `theta_grid` and pairs each
/// utility and efficiency with its ceiling.
///
/// Budgets above 1 are allowed; they describe the asymptotic regime even
/// though physical resource fractions cannot exceed 1.
pub fn sweep(
    mapping: &dyn InterferenceMapping,
    norm: &dyn MonotoneNorm,
    report: &AsymptoticReport,
    theta_grid: &[f64],
    base: &FixedPointConfig,
) -> Result<Vec<SweepPoint>> {
    if theta_grid.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
        return Err(Error::param("theta_grid", "all budgets must be positive and finite"));
    }
    if theta_grid.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::param("theta_grid", "budgets must be sorted"));
    }
    theta_grid
        .par_iter()
        .map(|&theta| {
            let cfg = FixedPointConfig { theta, init: None, ..base.clone() };
            let sol = fixed_point_solve(mapping, norm, &cfg)?;
            let used = norm.norm(&sol.allocation);
            Ok(SweepPoint {
                theta,
                utility: sol.utility,
                efficiency: sol.utility / used,
                utility_bound: (theta / report.noise_norm).min(report.sup_utility),
                efficiency_bound: report.sup_efficiency.min(1.0 / (report.lambda_inf * theta)),
                converged: sol.converged,
            })
        })
        .collect()
}
