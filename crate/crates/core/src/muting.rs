//! Partial resource muting.
//!
//! When the full-reuse network sits in the interference-limited regime
//! (`theta_trans < 1`), selected bottleneck services are moved to a muting
//! region: they neither receive interference from nor cause interference
//! to the services of neighboring cells, and in exchange their resources
//! are charged against the budget of every neighboring cell.

use rayon::prelude::*;

use crate::asymptotics::{asymptotic_report, AsymptoticReport};
use crate::error::{Error, Result};
use crate::netmodel::{build_coupling, downlink_sif, per_bs_norm, Coupling, RateMapping, Scenario};
use crate::sif::{fixed_point_solve, CevpSolution, FixedPointConfig, LoadNorm, NormKind};

/// Default size of the candidate set searched exhaustively.
pub const DEFAULT_CANDIDATES: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionStrategy {
    /// Add services in descending `w_inf` order until the utility drops.
    Successive,
    /// Best subset of the top-`candidates` services by `w_inf`.
    Exhaustive { candidates: usize },
    /// Like `Successive`, ranked by the interference indicator instead.
    Indicator,
}

impl SelectionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::Successive => "successive",
            SelectionStrategy::Exhaustive { .. } => "exhaustive",
            SelectionStrategy::Indicator => "indicator",
        }
    }
}

/// One evaluated bottleneck set.
#[derive(Debug, Clone, PartialEq)]
pub struct MutingStep {
    pub step: usize,
    /// Service added at this step (successive strategies only).
    pub added: Option<usize>,
    pub set: Vec<usize>,
    /// Utility of the muted problem, `-inf` if its solve failed.
    pub utility: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MutingPlan<S = CevpSolution> {
    pub triggered: bool,
    pub report: AsymptoticReport,
    /// Services in ranking order (highest first).
    pub order: Vec<usize>,
    /// Accepted bottleneck set, in ranking order.
    pub bottleneck_set: Vec<usize>,
    pub steps: Vec<MutingStep>,
    /// Utility of every evaluated step; entry 0 is the non-muting utility.
    pub step_utilities: Vec<f64>,
    pub baseline: S,
    pub final_solution: S,
    pub final_utility: f64,
}

/// Muting is worthwhile when full reuse lies beyond the transition point.
pub fn trigger(report: &AsymptoticReport) -> bool {
    report.theta_trans < 1.0
}

fn dedup_services(scenario: &Scenario, bottlenecks: &[usize]) -> Result<Vec<usize>> {
    for &k in bottlenecks {
        scenario.check_service(k)?;
    }
    let mut set = bottlenecks.to_vec();
    set.sort_unstable();
    set.dedup();
    Ok(set)
}

/// Zeroes `V[k,l]` and `V[l,k]` for every bottleneck `k` and every service
/// `l` of a cell neighboring `k`'s serving cell. Returns a new coupling.
pub fn mute_interference(coupling: &Coupling, scenario: &Scenario, bottlenecks: &[usize]) -> Result<Coupling> {
    let set = dedup_services(scenario, bottlenecks)?;
    if coupling.dim() != scenario.n_services() {
        return Err(Error::DimensionMismatch { expected: scenario.n_services(), got: coupling.dim() });
    }
    let members = scenario.cell_members();
    let mut muted = coupling.clone();
    for k in set {
        for &m in &scenario.neighbors[scenario.serving_cell[k]] {
            for &l in &members[m] {
                muted.v_tilde[(k, l)] = 0.0;
                muted.v_tilde[(l, k)] = 0.0;
            }
        }
    }
    Ok(muted)
}

/// `g(w) = max_n ( sum_{k in K_n} |w_k| + sum_{m in N_n} sum_{l in Kb_m} |w_l| )`.
pub fn muting_norm(scenario: &Scenario, bottlenecks: &[usize]) -> Result<LoadNorm> {
    let set = dedup_services(scenario, bottlenecks)?;
    if set.is_empty() {
        return Ok(per_bs_norm(scenario));
    }
    let mut groups = scenario.cell_members();
    for (n, group) in groups.iter_mut().enumerate() {
        group.extend(set.iter().filter(|&&l| scenario.neighbors[n].contains(&scenario.serving_cell[l])));
    }
    LoadNorm::new(scenario.n_services(), groups, NormKind::Muting { bottlenecks: set })
}

/// `I_k = sum_{l != k} (p_l v[k,l] w_l + p_k v[l,k] w_k)`: interference
/// received plus interference generated by service `k`, from raw gains.
pub fn interference_indicator(scenario: &Scenario, w: &[f64]) -> Result<Vec<f64>> {
    let k = scenario.n_services();
    if w.len() != k {
        return Err(Error::DimensionMismatch { expected: k, got: w.len() });
    }
    let p = &scenario.powers;
    let v = &scenario.gains;
    Ok((0..k)
        .map(|s| (0..k).filter(|&l| l != s).map(|l| p[l] * v[(s, l)] * w[l] + p[s] * v[(l, s)] * w[s]).sum())
        .collect())
}

/// Indices sorted by descending value; ties keep the lower index first.
pub fn rank_descending(values: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    order
}

pub(crate) struct Selection<S> {
    pub set: Vec<usize>,
    pub steps: Vec<MutingStep>,
    pub solution: S,
    pub utility: f64,
}

/// Bottleneck selection shared by the downlink and flexible-duplex plans.
///
/// `evaluate` returns the utility of the problem muted with the given set
/// (`-inf` when its solve failed) together with the solution.
pub(crate) fn select_bottlenecks<S, F>(
    order: &[usize],
    strategy: SelectionStrategy,
    baseline: &S,
    baseline_utility: f64,
    evaluate: F,
) -> Result<Selection<S>>
where
    S: Clone + Send,
    F: Fn(&[usize]) -> Result<(f64, S)> + Sync,
{
    let step0 = MutingStep { step: 0, added: None, set: vec![], utility: baseline_utility, accepted: true };
    let mut steps = vec![step0];
    match strategy {
        SelectionStrategy::Successive | SelectionStrategy::Indicator => {
            let mut best = Selection { set: vec![], steps: vec![], solution: baseline.clone(), utility: baseline_utility };
            for n in 1..=order.len() {
                let set = &order[..n];
                let (utility, solution) = evaluate(set)?;
                // Ties keep growing the set; a strict decrease stops.
                let accepted = utility >= best.utility;
                steps.push(MutingStep { step: n, added: Some(order[n - 1]), set: set.to_vec(), utility, accepted });
                if !accepted {
                    break;
                }
                best.set = set.to_vec();
                best.solution = solution;
                best.utility = utility;
            }
            best.steps = steps;
            Ok(best)
        }
        SelectionStrategy::Exhaustive { candidates } => {
            if candidates == 0 {
                return Err(Error::param("candidates", "must be at least 1"));
            }
            let pool = &order[..candidates.min(order.len())];
            let subsets: Vec<Vec<usize>> = (1u64..(1u64 << pool.len()))
                .map(|mask| pool.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, &k)| k).collect())
                .collect();
            let results: Vec<(f64, S)> = subsets.par_iter().map(|set| evaluate(set)).collect::<Result<_>>()?;
            let mut best_index = None;
            let mut best_utility = baseline_utility;
            for (i, (u, _)) in results.iter().enumerate() {
                if *u > best_utility {
                    best_utility = *u;
                    best_index = Some(i);
                }
            }
            steps[0].accepted = best_index.is_none();
            let mut solution = baseline.clone();
            for (i, (set, (utility, sol))) in subsets.iter().zip(results).enumerate() {
                let accepted = best_index == Some(i);
                if accepted {
                    solution = sol;
                }
                steps.push(MutingStep { step: i + 1, added: None, set: set.clone(), utility, accepted });
            }
            let set = best_index.map(|i| subsets[i].clone()).unwrap_or_default();
            Ok(Selection { set, steps, solution, utility: best_utility })
        }
    }
}

fn score(sol: &CevpSolution) -> f64 {
    if sol.converged {
        sol.utility
    } else {
        f64::NEG_INFINITY
    }
}

/// Solves the downlink problem with the bottleneck set `bottlenecks` muted.
pub fn solve_muted(
    scenario: &Scenario,
    coupling: &Coupling,
    bottlenecks: &[usize],
    cfg: &FixedPointConfig,
) -> Result<CevpSolution> {
    let muted = mute_interference(coupling, scenario, bottlenecks)?;
    let mapping = RateMapping::new(&muted, &scenario.powers, &scenario.demands, scenario.bandwidth_hz)?;
    let norm = muting_norm(scenario, bottlenecks)?;
    fixed_point_solve(&mapping, &norm, cfg)
}

/// Partial resource muting for a downlink network.
///
/// Solves the full-reuse problem, derives the asymptotic report and, if the
/// network is interference limited, searches bottleneck sets with
/// `strategy`. The returned plan is never worse than full reuse.
pub fn run_partial_muting(
    scenario: &Scenario,
    strategy: SelectionStrategy,
    cfg: &FixedPointConfig,
) -> Result<MutingPlan> {
    let coupling = build_coupling(scenario)?;
    let mapping = downlink_sif(scenario)?;
    let norm = per_bs_norm(scenario);
    let baseline = fixed_point_solve(&mapping, &norm, cfg)?;
    let report = asymptotic_report(scenario, &mapping, &norm)?;
    let triggered = trigger(&report);
    let order = match strategy {
        SelectionStrategy::Indicator => rank_descending(&interference_indicator(scenario, &baseline.allocation)?),
        _ => rank_descending(&report.w_inf),
    };
    let baseline_utility = baseline.utility;

    let selection = if triggered {
        select_bottlenecks(&order, strategy, &baseline, baseline_utility, |set| {
            let sol = solve_muted(scenario, &coupling, set, cfg)?;
            Ok((score(&sol), sol))
        })?
    } else {
        Selection {
            set: vec![],
            steps: vec![MutingStep { step: 0, added: None, set: vec![], utility: baseline_utility, accepted: true }],
            solution: baseline.clone(),
            utility: baseline_utility,
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
