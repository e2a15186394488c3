//! Standard interference functions and the conditional eigenvalue problem.
//!
//! A max-min utility problem with utilities `u_k(x) = x_k / T_k(x)` and a
//! monotone budget constraint `||x|| <= theta` is solved by the normalized
//! fixed-point iteration `x <- theta * T(x) / ||T(x)||`. At the limit every
//! service sees the same utility `c = theta / ||T(x)||`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A vector mapping `T: R_+^K -> R_++^K`.
///
/// Implementations are expected to be standard interference functions
/// (positive, monotone, scalable); [`check_sif_axioms`] samples for
/// violations. Evaluation must be read-only so one mapping can back several
/// concurrent solves.
pub trait InterferenceMapping: Send + Sync {
    fn dim(&self) -> usize;

    /// Writes `T(x)` into `out`. Both slices have length [`dim`](Self::dim).
    fn eval_into(&self, x: &[f64], out: &mut [f64]);

    fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(x, &mut out);
        out
    }
}

/// A monotone norm on `R^K`: `0 <= x <= y` implies `||x|| <= ||y||`.
pub trait MonotoneNorm: Send + Sync {
    fn dim(&self) -> usize;
    fn norm(&self, x: &[f64]) -> f64;
    /// Human-readable description of how the norm was built.
    fn describe(&self) -> String;
}

/// How a [`LoadNorm`] was constructed.
#[derive(Debug, Clone, PartialEq)]
pub enum NormKind {
    /// Plain max-abs norm, one group per component.
    Max,
    /// `max_n sum_{k in K_n} |w_k|`: the per-cell load.
    PerCell,
    /// Per-cell load plus the load of bottleneck services in neighboring
    /// cells. Holds the sorted bottleneck set.
    Muting { bottlenecks: Vec<usize> },
}

/// A norm of the form `max_g sum_{k in group g} |x_k|`.
///
/// When every component belongs to at least one group this is a monotone
/// norm. Both the per-cell load norm and the muting-augmented norm have
/// this shape and differ only in their groups.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadNorm {
    dim: usize,
    groups: Vec<Vec<usize>>,
    kind: NormKind,
}

impl LoadNorm {
    pub fn new(dim: usize, groups: Vec<Vec<usize>>, kind: NormKind) -> Result<Self> {
        let mut covered = vec![false; dim];
        for group in &groups {
            for &k in group {
                if k >= dim {
                    return Err(Error::UnknownService(k));
                }
                covered[k] = true;
            }
        }
        if let Some(k) = covered.iter().position(|c| !c) {
            return Err(Error::param(
                "groups",
                format!("component {k} belongs to no group, the result would not be a norm"),
            ));
        }
        Ok(Self { dim, groups, kind })
    }

    /// The max-abs norm on `R^dim`.
    pub fn max(dim: usize) -> Self {
        Self { dim, groups: (0..dim).map(|k| vec![k]).collect(), kind: NormKind::Max }
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn kind(&self) -> &NormKind {
        &self.kind
    }
}

impl MonotoneNorm for LoadNorm {
    fn dim(&self) -> usize {
        self.dim
    }

    fn norm(&self, x: &[f64]) -> f64 {
        self.groups
            .iter()
            .map(|g| g.iter().map(|&k| x[k].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn describe(&self) -> String {
        match &self.kind {
            NormKind::Max => format!("max-abs norm on R^{}", self.dim),
            NormKind::PerCell => format!("per-cell load norm over {} cells", self.groups.len()),
            NormKind::Muting { bottlenecks } => format!(
                "muting load norm over {} cells with bottleneck set {:?}",
                self.groups.len(),
                bottlenecks
            ),
        }
    }
}

/// The affine mapping `x -> G x + b`.
///
/// With `G >= 0` and `b > 0` this is a standard interference function. It
/// is mostly useful for tests and as a constant mapping (`G = 0`).
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMapping {
    pub matrix: DMatrix<f64>,
    pub offset: Vec<f64>,
}

impl AffineMapping {
    pub fn new(matrix: DMatrix<f64>, offset: Vec<f64>) -> Result<Self> {
        if !matrix.is_square() {
            return Err(Error::param("matrix", "must be square"));
        }
        if matrix.nrows() != offset.len() {
            return Err(Error::DimensionMismatch { expected: matrix.nrows(), got: offset.len() });
        }
        Ok(Self { matrix, offset })
    }

    pub fn constant(value: Vec<f64>) -> Self {
        let k = value.len();
        Self { matrix: DMatrix::zeros(k, k), offset: value }
    }
}

impl InterferenceMapping for AffineMapping {
    fn dim(&self) -> usize {
        self.offset.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        for (k, o) in out.iter_mut().enumerate() {
            let row = self.matrix.row(k);
            *o = self.offset[k] + row.iter().zip(x).map(|(g, xi)| g * xi).sum::<f64>();
        }
    }
}

/// Settings for [`fixed_point_solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointConfig {
    /// Budget `theta > 0`.
    pub theta: f64,
    /// Stop once the max-abs distance between successive iterates is at most this.
    pub tol: f64,
    pub max_iter: usize,
    /// Starting point; `None` uses the uniform vector scaled to norm `theta`.
    pub init: Option<Vec<f64>>,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        Self { theta: 1.0, tol: 1e-9, max_iter: 100_000, init: None }
    }
}

impl FixedPointConfig {
    pub fn with_theta(theta: f64) -> Self {
        Self { theta, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.theta > 0.0 && self.theta.is_finite()) {
            return Err(Error::param("theta", format!("must be positive and finite, got {}", self.theta)));
        }
        if !(self.tol > 0.0) {
            return Err(Error::param("tol", format!("must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::param("max_iter", "must be at least 1"));
        }
        if let Some(init) = &self.init {
            if init.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                return Err(Error::param("init", "must be nonnegative and finite"));
            }
        }
        Ok(())
    }
}

/// Solution of the conditional eigenvalue problem `T(w) = w / c`, `||w|| = theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct CevpSolution {
    /// Fixed point `w*`.
    pub allocation: Vec<f64>,
    /// Common utility `c* = theta / ||T(w*)||`.
    pub utility: f64,
    pub iterations: usize,
    /// Max-abs distance of the last update.
    pub residual: f64,
    pub converged: bool,
}

/// Runs `w <- theta * T(w) / ||T(w)||` until successive iterates are within
/// `cfg.tol` in max-abs distance.
///
/// Exhausting `max_iter` is not an error: the last iterate is returned with
/// `converged == false`. A non-finite or nonpositive mapping value is an
/// error since it means `T` is not a standard interference function.
pub fn fixed_point_solve(
    mapping: &dyn InterferenceMapping,
    norm: &dyn MonotoneNorm,
    cfg: &FixedPointConfig,
) -> Result<CevpSolution> {
    cfg.validate()?;
    let k = mapping.dim();
    if norm.dim() != k {
        return Err(Error::DimensionMismatch { expected: k, got: norm.dim() });
    }
    let mut w = match &cfg.init {
        Some(init) if init.len() != k => {
            return Err(Error::DimensionMismatch { expected: k, got: init.len() })
        }
        Some(init) => init.clone(),
        None => uniform_on_sphere(norm, cfg.theta),
    };

    let mut t = vec![0.0; k];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    while iterations < cfg.max_iter {
        iterations += 1;
        mapping.eval_into(&w, &mut t);
        check_positive(&t, iterations)?;
        let scale = cfg.theta / norm.norm(&t);
        residual = 0.0;
        for (wk, tk) in w.iter_mut().zip(&t) {
            let next = scale * tk;
            residual = f64::max(residual, (next - *wk).abs());
            *wk = next;
        }
        if residual <= cfg.tol {
            converged = true;
            break;
        }
    }

    mapping.eval_into(&w, &mut t);
    check_positive(&t, iterations)?;
    let utility = cfg.theta / norm.norm(&t);
    Ok(CevpSolution { allocation: w, utility, iterations, residual, converged })
}

fn uniform_on_sphere(norm: &dyn MonotoneNorm, theta: f64) -> Vec<f64> {
    let ones = vec![1.0; norm.dim()];
    let scale = theta / norm.norm(&ones);
    ones.into_iter().map(|v| v * scale).collect()
}

fn check_positive(t: &[f64], iteration: usize) -> Result<()> {
    match t.iter().position(|v| !v.is_finite() || *v <= 0.0) {
        Some(index) => Err(Error::NonFinite { index, iteration }),
        None => Ok(()),
    }
}

/// `u_k = w_k / T_k(w)`.
pub fn per_service_utilities(w: &[f64], mapping: &dyn InterferenceMapping) -> Result<Vec<f64>> {
    if w.len() != mapping.dim() {
        return Err(Error::DimensionMismatch { expected: mapping.dim(), got: w.len() });
    }
    let t = mapping.eval(w);
    Ok(w.iter().zip(&t).map(|(wk, tk)| wk / tk).collect())
}

/// Which axiom a sampled input violated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axiom {
    Positivity,
    Monotonicity,
    Scalability,
}

/// A witnessed violation of one of the axioms.
#[derive(Debug, Clone, PartialEq)]
pub struct AxiomViolation {
    pub axiom: Axiom,
    pub component: usize,
    pub x: Vec<f64>,
    /// The larger vector for monotonicity; `alpha * x` for scalability.
    pub y: Option<Vec<f64>>,
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct AxiomReport {
    pub samples: usize,
    pub violations: Vec<AxiomViolation>,
}

impl AxiomReport {
    pub fn count(&self, axiom: Axiom) -> usize {
        self.violations.iter().filter(|v| v.axiom == axiom).count()
    }

    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Samples random pairs `0 <= x <= y` and scalars `alpha > 1` and records
/// every positivity, monotonicity or scalability violation.
///
/// Sample vectors are drawn with components in `[0, 2]`, a quarter of them
/// set to exactly zero so boundary faces of the orthant are exercised.
pub fn check_sif_axioms(mapping: &dyn InterferenceMapping, sample_count: usize, seed: u64) -> AxiomReport {
    let k = mapping.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AxiomReport { samples: sample_count, violations: Vec::new() };
    // Tolerance for rounding when x and y are nearly equal.
    let mono_slack = 1e-12;

    for _ in 0..sample_count {
        let x: Vec<f64> = (0..k)
            .map(|_| if rng.gen_bool(0.25) { 0.0 } else { rng.gen_range(0.0..2.0) })
            .collect();
        let y: Vec<f64> = x
            .iter()
            .map(|xi| if rng.gen_bool(0.3) { *xi } else { xi + rng.gen_range(0.0..1.0) })
            .collect();
        let alpha = rng.gen_range(1.0..4.0_f64).max(1.0 + 1e-3);
        let ax: Vec<f64> = x.iter().map(|v| alpha * v).collect();

        let tx = mapping.eval(&x);
        let ty = mapping.eval(&y);
        let tax = mapping.eval(&ax);

        for c in 0..k {
            if !(tx[c] > 0.0 && tx[c].is_finite()) {
                report.violations.push(AxiomViolation {
                    axiom: Axiom::Positivity,
                    component: c,
                    x: x.clone(),
                    y: None,
                    alpha: None,
                });
                continue;
            }
            if tx[c] > ty[c] * (1.0 + mono_slack) {
                report.violations.push(AxiomViolation {
                    axiom: Axiom::Monotonicity,
                    component: c,
                    x: x.clone(),
                    y: Some(y.clone()),
                    alpha: None,
                });
            }
            if !(alpha * tx[c] > tax[c]) {
                report.violations.push(AxiomViolation {
                    axiom: Axiom::Scalability,
                    component: c,
                    x: x.clone(),
                    y: Some(ax.clone()),
                    alpha: Some(alpha),
                });
            }
        }
    }
    report
}
