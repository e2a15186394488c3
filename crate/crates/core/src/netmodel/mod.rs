//! Network scenarios and the rate-based interference model.
//!
//! A service `k` is served by cell `n_k`, transmits with power spectral
//! density `p_k` and demands `r_k` bit/s. With resource fractions `w` the
//! SINR of service `k` is
//!
//! ```text
//! SINR_k(w) = p_k / [V diag(p) w + sigma]_k,
//! ```
//!
//! where `V[k,l] = v[k,l] / v[k,k]` (zero diagonal) and
//! `sigma_k = noise_k / v[k,k]`. The rate is `w_k W log2(1 + SINR_k(w))`.

mod generator;
mod io;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

pub use generator::{generate_scenario, GeneratorParams, Point};
pub use io::{load_scenario, save_scenario, scenario_from_json, scenario_to_json, ScenarioFile};

use crate::error::{Error, Result};
use crate::sif::{InterferenceMapping, LoadNorm, NormKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DuplexMode {
    Uplink,
    Downlink,
}

/// A static network instance.
///
/// Construct through [`Scenario::new`] (or the generator / file loader),
/// which checks the structural invariants.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub n_cells: usize,
    /// Serving cell of every service.
    pub serving_cell: Vec<usize>,
    /// Total bandwidth `W` in Hz.
    pub bandwidth_hz: f64,
    /// Transmit power spectral density per service, W/Hz.
    pub powers: Vec<f64>,
    /// Rate demand per service, bit/s.
    pub demands: Vec<f64>,
    /// Raw linear gains, `gains[(k, l)]` from the transmitter of `l` to the receiver of `k`.
    pub gains: DMatrix<f64>,
    /// Receiver noise spectral density per service, W/Hz.
    pub noise: Vec<f64>,
    /// Symmetric, irreflexive cell adjacency.
    pub neighbors: Vec<Vec<usize>>,
    pub modes: Vec<DuplexMode>,
}

impl Scenario {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_cells: usize,
        serving_cell: Vec<usize>,
        bandwidth_hz: f64,
        powers: Vec<f64>,
        demands: Vec<f64>,
        gains: DMatrix<f64>,
        noise: Vec<f64>,
        neighbors: Vec<Vec<usize>>,
        modes: Vec<DuplexMode>,
    ) -> Result<Self> {
        let mut neighbors = neighbors;
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }
        let s = Self { n_cells, serving_cell, bandwidth_hz, powers, demands, gains, noise, neighbors, modes };
        s.validate()?;
        Ok(s)
    }

    pub fn n_services(&self) -> usize {
        self.serving_cell.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.n_services();
        if self.n_cells == 0 {
            return Err(Error::scenario("cells", "at least one cell is required"));
        }
        if k == 0 {
            return Err(Error::scenario("services", "at least one service is required"));
        }
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::scenario("bandwidth_hz", "must be positive and finite"));
        }
        for (name, v) in [("powers", &self.powers), ("demands", &self.demands), ("noise", &self.noise)] {
            if v.len() != k {
                return Err(Error::scenario(name, format!("expected {k} entries, found {}", v.len())));
            }
            if let Some(i) = v.iter().position(|x| !(*x > 0.0 && x.is_finite())) {
                return Err(Error::scenario(name, format!("entry {i} must be positive and finite")));
            }
        }
        if self.modes.len() != k {
            return Err(Error::scenario("modes", format!("expected {k} entries, found {}", self.modes.len())));
        }
        if self.gains.nrows() != k || self.gains.ncols() != k {
            return Err(Error::scenario(
                "gains",
                format!("expected a {k}x{k} matrix, found {}x{}", self.gains.nrows(), self.gains.ncols()),
            ));
        }
        for r in 0..k {
            for c in 0..k {
                let g = self.gains[(r, c)];
                if !(g >= 0.0 && g.is_finite()) {
                    return Err(Error::scenario("gains", format!("entry ({r},{c}) must be nonnegative and finite")));
                }
            }
            if self.gains[(r, r)] <= 0.0 {
                return Err(Error::scenario("gains", format!("direct gain ({r},{r}) must be positive")));
            }
        }
        let mut served = vec![0usize; self.n_cells];
        for (s, &n) in self.serving_cell.iter().enumerate() {
            if n >= self.n_cells {
                return Err(Error::scenario("services", format!("service {s} refers to unknown cell {n}")));
            }
            served[n] += 1;
        }
        if let Some(n) = served.iter().position(|c| *c == 0) {
            return Err(Error::scenario("services", format!("cell {n} serves no service")));
        }
        if self.neighbors.len() != self.n_cells {
            return Err(Error::scenario(
                "neighbors",
                format!("expected {} adjacency lists, found {}", self.n_cells, self.neighbors.len()),
            ));
        }
        for (n, list) in self.neighbors.iter().enumerate() {
            for &m in list {
                if m >= self.n_cells {
                    return Err(Error::scenario("neighbors", format!("cell {n} lists unknown cell {m}")));
                }
                if m == n {
                    return Err(Error::scenario("neighbors", format!("cell {n} lists itself")));
                }
                if !self.neighbors[m].contains(&n) {
                    return Err(Error::scenario("neighbors", format!("relation {n}-{m} is not symmetric")));
                }
            }
        }
        Ok(())
    }

    /// Services served by each cell, in increasing service order.
    pub fn cell_members(&self) -> Vec<Vec<usize>> {
        let mut members = vec![Vec::new(); self.n_cells];
        for (k, &n) in self.serving_cell.iter().enumerate() {
            members[n].push(k);
        }
        members
    }

    /// The assignment matrix `A` with `A[n,k] = 1` iff cell `n` serves `k`.
    pub fn assignment_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n_cells, self.n_services());
        for (k, &n) in self.serving_cell.iter().enumerate() {
            a[(n, k)] = 1.0;
        }
        a
    }

    pub fn is_all_downlink(&self) -> bool {
        self.modes.iter().all(|m| *m == DuplexMode::Downlink)
    }

    pub(crate) fn check_service(&self, k: usize) -> Result<()> {
        if k < self.n_services() {
            Ok(())
        } else {
            Err(Error::UnknownService(k))
        }
    }
}

/// Normalized interference coupling `V` (zero diagonal) and effective noise `sigma`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub v_tilde: DMatrix<f64>,
    pub sigma_tilde: Vec<f64>,
}

impl Coupling {
    pub fn dim(&self) -> usize {
        self.sigma_tilde.len()
    }

    /// Elementwise product `C o V`, used by the inter-mode interference model.
    pub fn masked(&self, overlap: &DMatrix<f64>) -> Result<Coupling> {
        if overlap.shape() != self.v_tilde.shape() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: overlap.nrows() });
        }
        Ok(Coupling { v_tilde: self.v_tilde.component_mul(overlap), sigma_tilde: self.sigma_tilde.clone() })
    }
}

pub fn build_coupling(scenario: &Scenario) -> Result<Coupling> {
    let k = scenario.n_services();
    let mut v_tilde = DMatrix::zeros(k, k);
    let mut sigma_tilde = Vec::with_capacity(k);
    for r in 0..k {
        let direct = scenario.gains[(r, r)];
        if !(direct > 0.0) {
            return Err(Error::scenario("gains", format!("direct gain ({r},{r}) must be positive")));
        }
        for c in 0..k {
            if c != r {
                v_tilde[(r, c)] = scenario.gains[(r, c)] / direct;
            }
        }
        sigma_tilde.push(scenario.noise[r] / direct);
    }
    Ok(Coupling { v_tilde, sigma_tilde })
}

/// `SINR_k = p_k / [V diag(p) w + sigma]_k`.
pub fn sinr(w: &[f64], coupling: &Coupling, powers: &[f64]) -> Vec<f64> {
    let k = coupling.dim();
    (0..k)
        .map(|r| {
            let interference: f64 = (0..k).map(|c| coupling.v_tilde[(r, c)] * powers[c] * w[c]).sum();
            powers[r] / (interference + coupling.sigma_tilde[r])
        })
        .collect()
}

/// `r_k = w_k W log2(1 + SINR_k(w))` in bit/s.
pub fn rate(w: &[f64], coupling: &Coupling, powers: &[f64], bandwidth_hz: f64) -> Vec<f64> {
    sinr(w, coupling, powers)
        .into_iter()
        .zip(w)
        .map(|(s, wk)| wk * bandwidth_hz * (1.0 + s).log2())
        .collect()
}

/// The rate-based standard interference function
/// `T_k(w) = r_k / (W log2(1 + SINR_k(w)))`.
///
/// `T_k(w)` is the resource fraction service `k` would need to meet its
/// demand under the interference generated by `w`, so `w_k / T_k(w)` equals
/// the QoS satisfaction ratio `r_k(w) / r_demand_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateMapping {
    /// `V diag(p)`, precomputed.
    weighted: DMatrix<f64>,
    sigma_tilde: Vec<f64>,
    powers: Vec<f64>,
    demands: Vec<f64>,
    bandwidth_hz: f64,
}

impl RateMapping {
    pub fn new(coupling: &Coupling, powers: &[f64], demands: &[f64], bandwidth_hz: f64) -> Result<Self> {
        let k = coupling.dim();
        for len in [powers.len(), demands.len()] {
            if len != k {
                return Err(Error::DimensionMismatch { expected: k, got: len });
            }
        }
        let mut weighted = coupling.v_tilde.clone();
        for (c, p) in powers.iter().enumerate() {
            weighted.column_mut(c).scale_mut(*p);
        }
        Ok(Self {
            weighted,
            sigma_tilde: coupling.sigma_tilde.clone(),
            powers: powers.to_vec(),
            demands: demands.to_vec(),
            bandwidth_hz,
        })
    }
}

impl InterferenceMapping for RateMapping {
    fn dim(&self) -> usize {
        self.powers.len()
    }

    fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        let k = self.dim();
        // Column-major walk over V diag(p) to accumulate the interference.
        out.copy_from_slice(&self.sigma_tilde);
        for c in 0..k {
            let xc = x[c];
            if xc != 0.0 {
                let col = self.weighted.column(c);
                for r in 0..k {
                    out[r] += col[r] * xc;
                }
            }
        }
        for r in 0..k {
            let spectral_eff = (self.powers[r] / out[r]).ln_1p() / std::f64::consts::LN_2;
            out[r] = self.demands[r] / (self.bandwidth_hz * spectral_eff);
        }
    }
}

/// The downlink mapping built from the scenario's own coupling.
pub fn downlink_sif(scenario: &Scenario) -> Result<RateMapping> {
    let coupling = build_coupling(scenario)?;
    RateMapping::new(&coupling, &scenario.powers, &scenario.demands, scenario.bandwidth_hz)
}

/// `g(w) = max_n sum_{k in K_n} |w_k| = ||A |w| ||_inf`.
pub fn per_bs_norm(scenario: &Scenario) -> LoadNorm {
    LoadNorm::new(scenario.n_services(), scenario.cell_members(), NormKind::PerCell)
        .expect("scenario invariants guarantee every service has a cell")
}
