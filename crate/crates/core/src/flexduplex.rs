//! Joint uplink/downlink allocation under flexible duplex.
//!
//! Uplink and downlink services share one resource pool per cell. A
//! resource used in mode `x_l` by cell `n_l` hits service `k` (mode `x_k`,
//! cell `n_k`) with a probability approximated by the load overlap
//!
//! ```text
//! c_kl = [(nu_l + nu_k - 1) / nu_k]^+      if x_l != x_k
//! c_kl = min(1, nu_l / nu_k)               if x_l == x_k
//! ```
//!
//! with `nu_k` the load of cell `n_k` in mode `x_k`. The masked coupling
//! `C(w) o V` makes the rate mapping depend on `w` through `C`, so it is no
//! longer a standard interference function. SAFP alternates between a
//! fixed-point solve with `C` frozen and a refresh of `C`, from several
//! random starting points, keeping the best fixed point.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::asymptotics::{asymptotic_matrix_from, report_from_matrix, AsymptoticReport};
use crate::error::{Error, Result};
use crate::muting::{
    interference_indicator, mute_interference, muting_norm, rank_descending, select_bottlenecks, trigger,
    MutingPlan, MutingStep, Selection, SelectionStrategy,
};
use crate::netmodel::{build_coupling, per_bs_norm, sinr, Coupling, DuplexMode, RateMapping, Scenario};
use crate::sif::{
    fixed_point_solve, per_service_utilities, FixedPointConfig, LoadNorm, MonotoneNorm, NormKind,
};

/// Per-cell load in each duplex mode.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadVector {
    pub uplink: Vec<f64>,
    pub downlink: Vec<f64>,
}

impl LoadVector {
    pub fn get(&self, cell: usize, mode: DuplexMode) -> f64 {
        match mode {
            DuplexMode::Uplink => self.uplink[cell],
            DuplexMode::Downlink => self.downlink[cell],
        }
    }
}

pub fn loads(w: &[f64], scenario: &Scenario) -> Result<LoadVector> {
    if w.len() != scenario.n_services() {
        return Err(Error::DimensionMismatch { expected: scenario.n_services(), got: w.len() });
    }
    let mut out = LoadVector { uplink: vec![0.0; scenario.n_cells], downlink: vec![0.0; scenario.n_cells] };
    for (k, wk) in w.iter().enumerate() {
        let n = scenario.serving_cell[k];
        match scenario.modes[k] {
            DuplexMode::Uplink => out.uplink[n] += wk,
            DuplexMode::Downlink => out.downlink[n] += wk,
        }
    }
    Ok(out)
}

/// Overlap factor seen by a receiver whose own-mode load is `receiver_load`
/// from an interferer with load `interferer_load`.
///
/// A receiver with zero load occupies no resources, so it overlaps with
/// nothing and the factor is 0. The result is clamped to `[0, 1]`.
pub fn overlap_factor(interferer_load: f64, receiver_load: f64, same_mode: bool) -> f64 {
    if receiver_load <= 0.0 {
        return 0.0;
    }
    let raw = if same_mode {
        interferer_load / receiver_load
    } else {
        (interferer_load + receiver_load - 1.0) / receiver_load
    };
    raw.clamp(0.0, 1.0)
}

/// The overlap matrix `C(w)`, with unit diagonal.
pub fn overlap_matrix(w: &[f64], scenario: &Scenario) -> Result<DMatrix<f64>> {
    let nu = loads(w, scenario)?;
    let k = scenario.n_services();
    let load_of = |s: usize| nu.get(scenario.serving_cell[s], scenario.modes[s]);
    Ok(DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            1.0
        } else {
            overlap_factor(load_of(c), load_of(r), scenario.modes[r] == scenario.modes[c])
        }
    }))
}

/// `SINR_k = p_k / [(C o V) diag(p) w + sigma]_k`.
pub fn imi_sinr(w: &[f64], coupling: &Coupling, powers: &[f64], overlap: &DMatrix<f64>) -> Result<Vec<f64>> {
    Ok(sinr(w, &coupling.masked(overlap)?, powers))
}

/// The rate mapping with the overlap frozen at `overlap`.
pub fn frozen_mapping(scenario: &Scenario, coupling: &Coupling, overlap: &DMatrix<f64>) -> Result<RateMapping> {
    RateMapping::new(&coupling.masked(overlap)?, &scenario.powers, &scenario.demands, scenario.bandwidth_hz)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafpConfig {
    /// Number of random restarts.
    pub restarts: usize,
    /// Outer stop distance (max-abs) between successive fixed points.
    pub eps: f64,
    pub max_outer: usize,
    /// Settings of each frozen-overlap solve; its `init` is ignored.
    pub inner: FixedPointConfig,
    pub seed: u64,
}

impl Default for SafpConfig {
    fn default() -> Self {
        Self { restarts: 8, eps: 1e-6, max_outer: 200, inner: FixedPointConfig::default(), seed: 0 }
    }
}

impl SafpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::param("restarts", "must be at least 1"));
        }
        if !(self.eps > 0.0) {
            return Err(Error::param("eps", "must be positive"));
        }
        if self.max_outer == 0 {
            return Err(Error::param("max_outer", "must be at least 1"));
        }
        self.inner.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafpRestart {
    pub index: usize,
    pub initial: Vec<f64>,
    pub allocation: Vec<f64>,
    /// Overlap matrix evaluated at the final allocation.
    pub overlap: DMatrix<f64>,
    /// Minimum per-service utility under `overlap`.
    pub utility: f64,
    pub outer_iterations: usize,
    /// Outer distance of the last refresh.
    pub outer_residual: f64,
    /// The outer stop rule was met within the cap.
    pub converged: bool,
    /// An inner solve failed; the restart is excluded from best selection.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SafpResult {
    pub restarts: Vec<SafpRestart>,
    pub best_index: usize,
    pub allocation: Vec<f64>,
    pub utility: f64,
    pub overlap: DMatrix<f64>,
}

/// SAFP on the scenario's own coupling with the per-cell load norm.
pub fn safp(scenario: &Scenario, cfg: &SafpConfig) -> Result<SafpResult> {
    let coupling = build_coupling(scenario)?;
    safp_with(scenario, &coupling, &per_bs_norm(scenario), cfg)
}

/// SAFP with an explicit coupling and budget norm (used by muting).
pub fn safp_with(
    scenario: &Scenario,
    coupling: &Coupling,
    norm: &dyn MonotoneNorm,
    cfg: &SafpConfig,
) -> Result<SafpResult> {
    cfg.validate()?;
    let restarts: Vec<SafpRestart> = (0..cfg.restarts)
        .into_par_iter()
        .map(|index| safp_restart(scenario, coupling, norm, cfg, index))
        .collect::<Result<_>>()?;

    let mut best: Option<usize> = None;
    for r in restarts.iter().filter(|r| !r.failed) {
        if best.is_none_or(|b| r.utility > restarts[b].utility) {
            best = Some(r.index);
        }
    }
    let best_index = best.ok_or(Error::AllRestartsFailed(cfg.restarts))?;
    let b = &restarts[best_index];
    Ok(SafpResult {
        best_index,
        allocation: b.allocation.clone(),
        utility: b.utility,
        overlap: b.overlap.clone(),
        restarts,
    })
}

fn safp_restart(
    scenario: &Scenario,
    coupling: &Coupling,
    norm: &dyn MonotoneNorm,
    cfg: &SafpConfig,
    index: usize,
) -> Result<SafpRestart> {
    let theta = cfg.inner.theta;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(index as u64));
    let raw: Vec<f64> = (0..scenario.n_services()).map(|_| 1.0 - rng.gen::<f64>()).collect();
    let scale = theta / norm.norm(&raw);
    let initial: Vec<f64> = raw.into_iter().map(|v| v * scale).collect();

    let mut w = initial.clone();
    let mut overlap = overlap_matrix(&w, scenario)?;
    let mut outer_iterations = 0;
    let mut outer_residual = f64::INFINITY;
    let mut converged = false;
    let mut failed = false;
    while outer_iterations < cfg.max_outer {
        outer_iterations += 1;
        let mapping = frozen_mapping(scenario, coupling, &overlap)?;
        let inner = FixedPointConfig { init: Some(w.clone()), ..cfg.inner.clone() };
        let sol = fixed_point_solve(&mapping, norm, &inner)?;
        if !sol.converged {
            failed = true;
            w = sol.allocation;
            overlap = overlap_matrix(&w, scenario)?;
            break;
        }
        outer_residual = max_abs_diff(&sol.allocation, &w);
        w = sol.allocation;
        overlap = overlap_matrix(&w, scenario)?;
        if outer_residual <= cfg.eps {
            converged = true;
            break;
        }
    }

    let mapping = frozen_mapping(scenario, coupling, &overlap)?;
    let utility = per_service_utilities(&w, &mapping)?.into_iter().fold(f64::INFINITY, f64::min);
    Ok(SafpRestart {
        index,
        initial,
        allocation: w,
        overlap,
        utility,
        outer_iterations,
        outer_residual,
        converged,
        failed,
    })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Asymptotic report of the rate mapping with the overlap frozen at `overlap`.
pub fn frozen_c_asymptotics(scenario: &Scenario, overlap: &DMatrix<f64>) -> Result<AsymptoticReport> {
    frozen_report(scenario, &build_coupling(scenario)?, overlap)
}

fn frozen_report(scenario: &Scenario, coupling: &Coupling, overlap: &DMatrix<f64>) -> Result<AsymptoticReport> {
    let masked = coupling.masked(overlap)?;
    let g = asymptotic_matrix_from(&masked.v_tilde, &scenario.powers, &scenario.demands, scenario.bandwidth_hz)?;
    let mapping = RateMapping::new(&masked, &scenario.powers, &scenario.demands, scenario.bandwidth_hz)?;
    let norm = per_bs_norm(scenario);
    report_from_matrix(&g, &norm, &mapping, &norm)
}

/// Partial resource muting with SAFP as the inner solver.
///
/// Triggering and ranking use the frozen-overlap report of the best
/// baseline restart.
pub fn run_flexduplex_muting(
    scenario: &Scenario,
    strategy: SelectionStrategy,
    cfg: &SafpConfig,
) -> Result<MutingPlan<SafpResult>> {
    let baseline = safp(scenario, cfg)?;
    flexduplex_muting_from(scenario, strategy, cfg, baseline)
}

/// [`run_flexduplex_muting`] starting from an already computed SAFP baseline.
pub fn flexduplex_muting_from(
    scenario: &Scenario,
    strategy: SelectionStrategy,
    cfg: &SafpConfig,
    baseline: SafpResult,
) -> Result<MutingPlan<SafpResult>> {
    let coupling = build_coupling(scenario)?;
    let report = frozen_report(scenario, &coupling, &baseline.overlap)?;
    let triggered = trigger(&report);
    let order = match strategy {
        SelectionStrategy::Indicator => rank_descending(&interference_indicator(scenario, &baseline.allocation)?),
        _ => rank_descending(&report.w_inf),
    };

    let selection = if triggered {
        select_bottlenecks(&order, strategy, &baseline, baseline.utility, |set| {
            let muted = mute_interference(&coupling, scenario, set)?;
            let norm = muting_norm(scenario, set)?;
            match safp_with(scenario, &muted, &norm, cfg) {
                Ok(res) => Ok((res.utility, res)),
                Err(Error::AllRestartsFailed(_)) => Ok((f64::NEG_INFINITY, baseline.clone())),
                Err(e) => Err(e),
            }
        })?
    } else {
        Selection {
            set: vec![],
            steps: vec![MutingStep { step: 0, added: None, set: vec![], utility: baseline.utility, accepted: true }],
            solution: baseline.clone(),
            utility: baseline.utility,
        }
    };

    Ok(MutingPlan {
        triggered,
        report,
        order,
        bottleneck_set: selection.set,
        step_utilities: selection.steps.iter().map(|s| s.utility).collect(),
        steps: selection.steps,
        baseline,
        final_utility: selection.utility,
        final_solution: selection.solution,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct FixedSplitResult {
    /// Minimum utility over both sub-problems.
    pub utility: f64,
    /// Resource fractions of the whole band.
    pub allocation: Vec<f64>,
    pub uplink_utility: Option<f64>,
    pub downlink_utility: Option<f64>,
    pub converged: bool,
}

/// Static duplexing baseline: every cell reserves `uplink_share` of the band
/// for uplink and the rest for downlink, synchronized across cells, so the
/// two modes never interfere. Each mode is solved on its own sub-band.
pub fn fixed_split(scenario: &Scenario, uplink_share: f64, cfg: &FixedPointConfig) -> Result<FixedSplitResult> {
    if !(0.0..=1.0).contains(&uplink_share) {
        return Err(Error::param("uplink_share", format!("must lie in [0,1], got {uplink_share}")));
    }
    let coupling = build_coupling(scenario)?;
    let k = scenario.n_services();
    let mut allocation = vec![0.0; k];
    let mut result =
        FixedSplitResult { utility: f64::INFINITY, allocation: vec![], uplink_utility: None, downlink_utility: None, converged: true };

    for (mode, share) in [(DuplexMode::Uplink, uplink_share), (DuplexMode::Downlink, 1.0 - uplink_share)] {
        let idx: Vec<usize> = (0..k).filter(|&s| scenario.modes[s] == mode).collect();
        if idx.is_empty() {
            continue;
        }
        if share <= 0.0 {
            return Err(Error::param("uplink_share", format!("{mode:?} services exist but get no resources")));
        }
        let sub = Coupling {
            v_tilde: DMatrix::from_fn(idx.len(), idx.len(), |r, c| coupling.v_tilde[(idx[r], idx[c])]),
            sigma_tilde: idx.iter().map(|&s| coupling.sigma_tilde[s]).collect(),
        };
        let pick = |v: &[f64]| idx.iter().map(|&s| v[s]).collect::<Vec<_>>();
        let mapping =
            RateMapping::new(&sub, &pick(&scenario.powers), &pick(&scenario.demands), share * scenario.bandwidth_hz)?;
        let position = |s: usize| idx.iter().position(|&i| i == s);
        let groups: Vec<Vec<usize>> = scenario
            .cell_members()
            .into_iter()
            .map(|m| m.into_iter().filter_map(position).collect::<Vec<_>>())
            .filter(|g| !g.is_empty())
            .collect();
        let norm = LoadNorm::new(idx.len(), groups, NormKind::PerCell)?;
        // Sub-band fractions w' relate to whole-band fractions by w = share * w'.
        let sol = fixed_point_solve(&mapping, &norm, &FixedPointConfig { init: None, ..cfg.clone() })?;
        for (j, &s) in idx.iter().enumerate() {
            allocation[s] = share * sol.allocation[j];
        }
        result.converged &= sol.converged;
        result.utility = result.utility.min(sol.utility);
        match mode {
            DuplexMode::Uplink => result.uplink_utility = Some(sol.utility),
            DuplexMode::Downlink => result.downlink_utility = Some(sol.utility),
        }
    }
    result.allocation = allocation;
    Ok(result)
}

/// Normalized per-cell `[uplink, downlink]` demand pairs (each sums to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct TrafficProfile {
    pub per_cell: Vec<[f64; 2]>,
}

impl TrafficProfile {
    pub fn new(per_cell: Vec<[f64; 2]>) -> Result<Self> {
        if per_cell.iter().flatten().any(|v| !(*v >= 0.0)) {
            return Err(Error::param("per_cell", "demands must be nonnegative"));
        }
        Ok(Self { per_cell })
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        let mut per_cell = vec![[0.0; 2]; scenario.n_cells];
        for (k, &n) in scenario.serving_cell.iter().enumerate() {
            let slot = match scenario.modes[k] {
                DuplexMode::Uplink => 0,
                DuplexMode::Downlink => 1,
            };
            per_cell[n][slot] += scenario.demands[k];
        }
        for d in &mut per_cell {
            let total = d[0] + d[1];
            if total > 0.0 {
                d[0] /= total;
                d[1] /= total;
            }
        }
        Self { per_cell }
    }
}

/// `D[m,n] = ||d_n - d_m||_2`.
pub fn traffic_distance(profile: &TrafficProfile) -> DMatrix<f64> {
    let d = &profile.per_cell;
    DMatrix::from_fn(d.len(), d.len(), |m, n| (d[n][0] - d[m][0]).hypot(d[n][1] - d[m][1]))
}

/// Mean of `D[m,n]` over unordered cell pairs; 0 for a single cell.
pub fn mean_traffic_distance(profile: &TrafficProfile) -> f64 {
    let d = traffic_distance(profile);
    let n = d.nrows();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for m in 0..n {
        for k in (m + 1)..n {
            sum += d[(m, k)];
        }
    }
    sum / (n * (n - 1) / 2) as f64
}
