use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::flexduplex::{
    fixed_split, flexduplex_muting_from, mean_traffic_distance, safp, SafpConfig, TrafficProfile,
};
use crate::muting::{run_partial_muting, SelectionStrategy, DEFAULT_CANDIDATES};
use crate::netmodel::{downlink_sif, generate_scenario, per_bs_norm, GeneratorParams, Scenario};
use crate::sif::{fixed_point_solve, FixedPointConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Protocol {
    /// Full reuse, every link interferes.
    NonMuting,
    Successive,
    Exhaustive,
    Indicator,
    /// Static 50/50 (configurable) uplink/downlink split.
    FixedSplit,
    Safp,
    /// SAFP with muting ranked by the interference indicator.
    SafpIndicator,
    /// SAFP with muting ranked by the asymptotic allocation.
    SafpWinf,
}

impl Protocol {
    pub const ALL: [Protocol; 8] = [
        Protocol::NonMuting,
        Protocol::Successive,
        Protocol::Exhaustive,
        Protocol::Indicator,
        Protocol::FixedSplit,
        Protocol::Safp,
        Protocol::SafpIndicator,
        Protocol::SafpWinf,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Protocol::NonMuting => "non-muting",
            Protocol::Successive => "successive",
            Protocol::Exhaustive => "exhaustive",
            Protocol::Indicator => "indicator",
            Protocol::FixedSplit => "fixed-split",
            Protocol::Safp => "safp",
            Protocol::SafpIndicator => "safp-indicator",
            Protocol::SafpWinf => "safp-winf",
        }
    }

    fn uses_safp(self) -> bool {
        matches!(self, Protocol::Safp | Protocol::SafpIndicator | Protocol::SafpWinf)
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Protocol::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::param("protocol", format!("unknown protocol `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Template for every trial; its seed is replaced by `master_seed + trial`.
    pub generator: GeneratorParams,
    pub solver: FixedPointConfig,
    pub safp: SafpConfig,
    pub protocols: Vec<Protocol>,
    /// Candidate count of the exhaustive strategy.
    pub candidates: usize,
    pub uplink_share: f64,
    pub trials: usize,
    pub master_seed: u64,
    /// Number of equal-count bins of mean traffic distance.
    pub distance_bins: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorParams::default(),
            solver: FixedPointConfig::default(),
            safp: SafpConfig::default(),
            protocols: vec![Protocol::NonMuting],
            candidates: DEFAULT_CANDIDATES,
            uplink_share: 0.5,
            trials: 100,
            master_seed: 0,
            distance_bins: 3,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::param("trials", "must be at least 1"));
        }
        if self.protocols.is_empty() {
            return Err(Error::param("protocols", "select at least one protocol"));
        }
        if self.distance_bins == 0 {
            return Err(Error::param("distance_bins", "must be at least 1"));
        }
        self.generator.validate()?;
        self.solver.validate()?;
        if self.protocols.iter().any(|p| p.uses_safp()) {
            self.safp.validate()?;
        }
        Ok(())
    }

    pub fn trial_seed(&self, trial: usize) -> u64 {
        self.master_seed.wrapping_add(trial as u64)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    pub seed: u64,
    pub services: usize,
    pub mean_distance: f64,
    /// One entry per configured protocol, in configuration order.
    pub utilities: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    pub trial: usize,
    pub seed: u64,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    /// Mean utility per protocol.
    pub means: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloSummary {
    pub protocols: Vec<Protocol>,
    pub trials: Vec<TrialRecord>,
    pub failures: Vec<TrialFailure>,
}

impl MonteCarloSummary {
    fn position(&self, protocol: Protocol) -> Option<usize> {
        self.protocols.iter().position(|&p| p == protocol)
    }

    pub fn column(&self, protocol: Protocol) -> Option<Vec<f64>> {
        let i = self.position(protocol)?;
        Some(self.trials.iter().map(|t| t.utilities[i]).collect())
    }

    pub fn mean(&self, protocol: Protocol) -> Option<f64> {
        let col = self.column(protocol)?;
        Some(col.iter().sum::<f64>() / col.len() as f64)
    }

    /// Empirical CDF as `(value, F(value))` pairs, one per trial.
    pub fn cdf(&self, protocol: Protocol) -> Option<Vec<(f64, f64)>> {
        let mut col = self.column(protocol)?;
        col.sort_by(f64::total_cmp);
        let n = col.len() as f64;
        Some(col.into_iter().enumerate().map(|(i, v)| (v, (i + 1) as f64 / n)).collect())
    }

    /// Splits trials into `bins` equal-count bins of increasing mean
    /// traffic distance (ties broken by trial index).
    pub fn binned_by_distance(&self, bins: usize) -> Vec<DistanceBin> {
        let mut order: Vec<&TrialRecord> = self.trials.iter().collect();
        order.sort_by(|a, b| a.mean_distance.total_cmp(&b.mean_distance).then(a.trial.cmp(&b.trial)));
        let bins = bins.clamp(1, order.len().max(1));
        let n = order.len();
        (0..bins)
            .filter_map(|b| {
                let chunk = &order[b * n / bins..(b + 1) * n / bins];
                let first = chunk.first()?;
                let mut means = vec![0.0; self.protocols.len()];
                for t in chunk {
                    for (m, u) in means.iter_mut().zip(&t.utilities) {
                        *m += u / chunk.len() as f64;
                    }
                }
                Some(DistanceBin {
                    lo: first.mean_distance,
                    hi: chunk[chunk.len() - 1].mean_distance,
                    count: chunk.len(),
                    means,
                })
            })
            .collect()
    }
}

/// Runs every configured protocol on one scenario.
pub fn evaluate_protocols(scenario: &Scenario, cfg: &ExperimentConfig) -> Result<Vec<f64>> {
    let mut safp_baseline: Option<crate::flexduplex::SafpResult> = None;
    let mut out = Vec::with_capacity(cfg.protocols.len());
    for &p in &cfg.protocols {
        let u = match p {
            Protocol::NonMuting => {
                let sol = fixed_point_solve(&downlink_sif(scenario)?, &per_bs_norm(scenario), &cfg.solver)?;
                if !sol.converged {
                    return Err(Error::NotConverged { what: "full-reuse fixed point" });
                }
                sol.utility
            }
            Protocol::Successive => run_partial_muting(scenario, SelectionStrategy::Successive, &cfg.solver)?.final_utility,
            Protocol::Exhaustive => {
                let strategy = SelectionStrategy::Exhaustive { candidates: cfg.candidates };
                run_partial_muting(scenario, strategy, &cfg.solver)?.final_utility
            }
            Protocol::Indicator => run_partial_muting(scenario, SelectionStrategy::Indicator, &cfg.solver)?.final_utility,
            Protocol::FixedSplit => {
                let res = fixed_split(scenario, cfg.uplink_share, &cfg.solver)?;
                if !res.converged {
                    return Err(Error::NotConverged { what: "fixed-split fixed point" });
                }
                res.utility
            }
            Protocol::Safp | Protocol::SafpIndicator | Protocol::SafpWinf => {
                let safp_cfg = SafpConfig { inner: cfg.solver.clone(), ..cfg.safp.clone() };
                let baseline = match &safp_baseline {
                    Some(b) => b.clone(),
                    None => {
                        let b = safp(scenario, &safp_cfg)?;
                        safp_baseline = Some(b.clone());
                        b
                    }
                };
                match p {
                    Protocol::Safp => baseline.utility,
                    Protocol::SafpIndicator => {
                        flexduplex_muting_from(scenario, SelectionStrategy::Indicator, &safp_cfg, baseline)?.final_utility
                    }
                    _ => flexduplex_muting_from(scenario, SelectionStrategy::Successive, &safp_cfg, baseline)?.final_utility,
                }
            }
        };
        out.push(u);
    }
    Ok(out)
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialRecord> {
    let seed = cfg.trial_seed(trial);
    let scenario = generate_scenario(&GeneratorParams { seed, ..cfg.generator.clone() })?;
    let utilities = evaluate_protocols(&scenario, cfg)?;
    Ok(TrialRecord {
        trial,
        seed,
        services: scenario.n_services(),
        mean_distance: mean_traffic_distance(&TrafficProfile::from_scenario(&scenario)),
        utilities,
    })
}

/// Runs all trials in parallel. Failed trials are set aside; the batch
/// fails only if more than 10% of the trials fail.
pub fn montecarlo(cfg: &ExperimentConfig) -> Result<MonteCarloSummary> {
    let summary = montecarlo_lenient(cfg)?;
    if summary.failures.len() * 10 > cfg.trials {
        return Err(Error::TooManyFailures { failed: summary.failures.len(), total: cfg.trials });
    }
    Ok(summary)
}

/// Like [`montecarlo`] but returns the summary however many trials failed.
pub fn montecarlo_lenient(cfg: &ExperimentConfig) -> Result<MonteCarloSummary> {
    cfg.validate()?;
    let results: Vec<Result<TrialRecord>> = (0..cfg.trials).into_par_iter().map(|i| run_trial(cfg, i)).collect();
    let mut trials = Vec::new();
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(t) => trials.push(t),
            Err(e) => failures.push(TrialFailure { trial: i, seed: cfg.trial_seed(i), reason: e.to_string() }),
        }
    }
    Ok(MonteCarloSummary { protocols: cfg.protocols.clone(), trials, failures })
}
