//! End-to-end acceptance checks, one line per criterion.
//!
//! Runs as a plain binary (`harness = false`) so every criterion is
//! reported even when an earlier one fails. Exits nonzero on any failure.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use resmute::asymptotics::{
    asymptotic_matrix, asymptotic_report, log_spaced, numeric_asymptotic_limit, perron_eigenpair, sweep,
    POWER_ITERATION_MAX_ITER, POWER_ITERATION_TOL,
};
use resmute::flexduplex::{frozen_mapping, safp, SafpConfig};
use resmute::harness::{brute_force_maxmin, montecarlo, ExperimentConfig, Protocol};
use resmute::netmodel::{
    build_coupling, downlink_sif, generate_scenario, per_bs_norm, DuplexMode, GeneratorParams, Scenario,
};
use resmute::sif::{check_sif_axioms, fixed_point_solve, per_service_utilities, FixedPointConfig, MonotoneNorm};

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self { pass, detail: detail.into() }
    }
}

fn generated(seed: u64) -> Scenario {
    generate_scenario(&GeneratorParams { seed, ..Default::default() }).expect("generator")
}

fn mixed(seed: u64) -> Scenario {
    generate_scenario(&GeneratorParams { seed, uplink_fraction: 0.5, uplink_spread: 0.25, ..Default::default() })
        .expect("generator")
}

/// Up to three services on up to three mutually neighboring cells.
///
/// Demands are comparable to the achievable rates so the optimum is of
/// order one: the grid oracle's discretization error grows like
/// `utility * step / min_k w_k`.
fn tiny_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(1..=3);
    let n_cells = rng.gen_range(1..=k);
    let mut serving: Vec<usize> = (0..n_cells).collect();
    serving.extend((n_cells..k).map(|_| rng.gen_range(0..n_cells)));
    serving.sort_unstable();
    let gains = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            rng.gen_range(0.5..2.0)
        } else if serving[r] == serving[c] {
            0.0
        } else {
            rng.gen_range(0.0..0.5)
        }
    });
    Scenario::new(
        n_cells,
        serving,
        1.0,
        (0..k).map(|_| rng.gen_range(0.5..2.0)).collect(),
        (0..k).map(|_| rng.gen_range(1.0..3.0)).collect(),
        gains,
        (0..k).map(|_| rng.gen_range(0.05..0.2)).collect(),
        (0..n_cells).map(|n| (0..n_cells).filter(|&m| m != n).collect()).collect(),
        vec![DuplexMode::Downlink; k],
    )
    .expect("tiny scenario")
}

fn symmetric_pair() -> Scenario {
    Scenario::new(
        2,
        vec![0, 1],
        1.0,
        vec![1.0; 2],
        vec![1.0; 2],
        DMatrix::from_element(2, 2, 1.0),
        vec![0.1; 2],
        vec![vec![1], vec![0]],
        vec![DuplexMode::Downlink; 2],
    )
    .expect("pair")
}

/// Ring of `n` cells with `m` identical downlink users each; cross gains
/// depend only on ring distance, so the max-min point loads every cell
/// equally.
fn ring(n: usize, m: usize, seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let by_distance: Vec<f64> = (0..=n / 2).map(|d| if d == 0 { 0.0 } else { rng.gen_range(0.05..0.6) }).collect();
    let serving: Vec<usize> = (0..n).flat_map(|c| std::iter::repeat_n(c, m)).collect();
    let k = serving.len();
    let gains = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            1.0
        } else {
            let d = serving[r].abs_diff(serving[c]);
            by_distance[d.min(n - d)]
        }
    });
    Scenario::new(
        n,
        serving,
        1.0,
        vec![1.0; k],
        vec![0.5; k],
        gains,
        vec![0.1; k],
        (0..n).map(|c| (0..n).filter(|&o| o != c).collect()).collect(),
        vec![DuplexMode::Downlink; k],
    )
    .expect("ring")
}

fn spread(u: &[f64]) -> f64 {
    let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    hi - lo
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let (mut worst, mut above): (f64, usize) = (0.0, 0);
    for seed in 0..50 {
        let s = tiny_scenario(seed);
        let sol = fixed_point_solve(&downlink_sif(&s).unwrap(), &per_bs_norm(&s), &FixedPointConfig::default()).unwrap();
        let (_, grid) = brute_force_maxmin(&s, 1.0, 1e-3).unwrap();
        worst = worst.max((sol.utility - grid).abs());
        // A grid point is feasible, so it can never beat the optimum.
        above += usize::from(grid > sol.utility + 1e-9);
    }
    let elapsed = start.elapsed();
    Outcome::new(
        worst <= 5e-3 && above == 0 && elapsed < Duration::from_secs(60),
        format!("max |fp - grid| = {worst:.3e}, grid above optimum {above}, {:.1} s", elapsed.as_secs_f64()),
    )
}

fn equal_utility() -> Outcome {
    let (mut worst_spread, mut worst_norm, mut unconverged, mut max_k): (f64, f64, usize, usize) = (0.0, 0.0, 0, 0);
    for seed in 0..100 {
        let s = generated(seed);
        max_k = max_k.max(s.n_services());
        let (mapping, norm) = (downlink_sif(&s).unwrap(), per_bs_norm(&s));
        let sol = fixed_point_solve(&mapping, &norm, &FixedPointConfig::default()).unwrap();
        if !sol.converged {
            unconverged += 1;
            continue;
        }
        worst_spread = worst_spread.max(spread(&per_service_utilities(&sol.allocation, &mapping).unwrap()));
        worst_norm = worst_norm.max((norm.norm(&sol.allocation) - 1.0).abs());
    }
    Outcome::new(
        worst_spread <= 1e-6 && worst_norm <= 1e-9 && unconverged == 0 && max_k <= 30,
        format!("spread {worst_spread:.2e}, |norm - theta| {worst_norm:.2e}, unconverged {unconverged}, K <= {max_k}"),
    )
}

fn sif_axioms() -> Outcome {
    let (mut downlink, mut frozen) = (0, 0);
    for seed in 0..20 {
        let s = generated(seed);
        downlink += check_sif_axioms(&downlink_sif(&s).unwrap(), 1000, seed).violations.len();
        let m = mixed(seed);
        let overlap = safp(&m, &SafpConfig { seed, ..Default::default() }).unwrap().overlap;
        let mapping = frozen_mapping(&m, &build_coupling(&m).unwrap(), &overlap).unwrap();
        frozen += check_sif_axioms(&mapping, 1000, seed).violations.len();
    }
    Outcome::new(
        downlink == 0 && frozen == 0,
        format!("violations: downlink {downlink}, frozen overlap {frozen}"),
    )
}

fn asymptotics() -> Outcome {
    let s = symmetric_pair();
    let (mapping, norm) = (downlink_sif(&s).unwrap(), per_bs_norm(&s));
    let r = asymptotic_report(&s, &mapping, &norm).unwrap();
    let expected_trans = 1.0 / 11f64.log2() / LN_2;
    let lambda_err = (r.lambda_inf - LN_2).abs();
    let trans_err = (r.theta_trans - expected_trans).abs();
    let g = asymptotic_matrix(&s).unwrap();
    let mut limit_err: f64 = 0.0;
    for x in [[1.0, 1.0], [0.2, 1.0], [1.0, 0.05], [0.7, 0.3]] {
        let gx = &g * DVector::from_row_slice(&x);
        let limit = numeric_asymptotic_limit(&mapping, &x, &[1e6]).unwrap();
        for (a, b) in limit.iter().zip(gx.iter()) {
            limit_err = limit_err.max((a - b).abs() / b.abs());
        }
    }
    Outcome::new(
        lambda_err <= 1e-9 && trans_err <= 1e-6 && limit_err <= 1e-3,
        format!(
            "|lambda - ln2| {lambda_err:.1e}, theta_trans {:.12} (|err| {trans_err:.1e}), limit rel err {limit_err:.1e}",
            r.theta_trans
        ),
    )
}

fn bounds() -> Outcome {
    let grid = log_spaced(1e-3, 1e3, 20);
    let (mut violations, mut decreases, mut unconverged) = (0, 0, 0);
    let mut worst_drop: f64 = 0.0;
    for seed in 0..20 {
        let s = generated(seed);
        let (mapping, norm) = (downlink_sif(&s).unwrap(), per_bs_norm(&s));
        let report = asymptotic_report(&s, &mapping, &norm).unwrap();
        let pts = sweep(&mapping, &norm, &report, &grid, &FixedPointConfig::default()).unwrap();
        for p in &pts {
            unconverged += usize::from(!p.converged);
            if p.utility > p.utility_bound * (1.0 + 1e-6) || p.efficiency > p.efficiency_bound * (1.0 + 1e-6) {
                violations += 1;
            }
        }
        for w in pts.windows(2) {
            if w[1].utility < w[0].utility {
                decreases += 1;
                worst_drop = worst_drop.max((w[0].utility - w[1].utility) / w[0].utility);
            }
        }
    }
    Outcome::new(
        violations == 0 && decreases == 0,
        format!("bound violations {violations}, decreases {decreases} (worst rel {worst_drop:.1e}), unconverged {unconverged}"),
    )
}

fn p_invariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let s = generated(seed);
        let base = perron_eigenpair(&asymptotic_matrix(&s).unwrap(), POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITER).value;
        for _ in 0..10 {
            let mut scaled = s.clone();
            for p in scaled.powers.iter_mut() {
                *p *= 10f64.powf(rng.gen_range(-2.0..2.0));
            }
            let g = asymptotic_matrix(&scaled).unwrap();
            let lambda = perron_eigenpair(&g, POWER_ITERATION_TOL, POWER_ITERATION_MAX_ITER).value;
            worst = worst.max((lambda - base).abs() / base);
        }
    }
    Outcome::new(worst <= 1e-9, format!("max relative change {worst:.2e}"))
}

fn muting_dominance() -> Outcome {
    let start = Instant::now();
    let cfg = ExperimentConfig {
        generator: GeneratorParams { services_per_cell: (4, 8), ..Default::default() },
        protocols: vec![Protocol::NonMuting, Protocol::Successive, Protocol::Exhaustive, Protocol::Indicator],
        trials: 200,
        master_seed: 1,
        ..Default::default()
    };
    let summary = match montecarlo(&cfg) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, format!("batch failed: {e}")),
    };
    let col = |p| summary.column(p).unwrap();
    let (base, succ, exh) =
        (col(Protocol::NonMuting), col(Protocol::Successive), col(Protocol::Exhaustive));
    let below_base = succ.iter().zip(&base).filter(|(s, b)| s < b).count();
    let below_succ = exh.iter().zip(&succ).filter(|(e, s)| e < s).count();
    let (mean_succ, mean_ind) = (summary.mean(Protocol::Successive).unwrap(), summary.mean(Protocol::Indicator).unwrap());
    let elapsed = start.elapsed();
    let mean_k = summary.trials.iter().map(|t| t.services as f64).sum::<f64>() / summary.trials.len() as f64;
    Outcome::new(
        below_base == 0 && below_succ == 0 && mean_succ >= mean_ind && elapsed < Duration::from_secs(600),
        format!(
            "{} trials, mean K {mean_k:.1}; successive < non-muting: {below_base}, exhaustive < successive: {below_succ}; \
             mean successive {mean_succ:.6} vs indicator {mean_ind:.6}, mean exhaustive {:.6}; {:.1} s",
            summary.trials.len(),
            summary.mean(Protocol::Exhaustive).unwrap(),
            elapsed.as_secs_f64()
        ),
    )
}

fn safp_consistency() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut cases = 0;
    for n in 2..=6 {
        for m in 1..=2 {
            let s = ring(n, m, (10 * n + m) as u64);
            let plain = fixed_point_solve(&downlink_sif(&s).unwrap(), &per_bs_norm(&s), &FixedPointConfig::default())
                .unwrap()
                .utility;
            let best = safp(&s, &SafpConfig { seed: n as u64, ..Default::default() }).unwrap().utility;
            worst = worst.max((best - plain).abs());
            cases += 1;
        }
    }
    let mut all_converged = 0;
    let mut restarts = (0, 0);
    for seed in 0..100 {
        let res = safp(&mixed(1000 + seed), &SafpConfig { seed, ..Default::default() }).unwrap();
        let ok = res.restarts.iter().filter(|r| r.converged && r.outer_residual <= 1e-6 && r.outer_iterations <= 200).count();
        restarts.0 += ok;
        restarts.1 += res.restarts.len();
        all_converged += usize::from(ok == res.restarts.len());
    }
    Outcome::new(
        worst <= 1e-6 && all_converged >= 95,
        format!(
            "{cases} ring instances, max |safp - plain| {worst:.2e}; {all_converged}/100 mixed instances with every restart \
             converged ({}/{} restarts)",
            restarts.0, restarts.1
        ),
    )
}

fn flexduplex_orderings() -> Outcome {
    let cfg = ExperimentConfig {
        generator: GeneratorParams { uplink_fraction: 0.5, uplink_spread: 0.5, ..Default::default() },
        protocols: vec![Protocol::FixedSplit, Protocol::Safp, Protocol::SafpWinf],
        trials: 300,
        master_seed: 9000,
        ..Default::default()
    };
    let summary = match montecarlo(&cfg) {
        Ok(s) => s,
        Err(e) => return Outcome::new(false, format!("batch failed: {e}")),
    };
    let (safp_col, winf_col) = (summary.column(Protocol::Safp).unwrap(), summary.column(Protocol::SafpWinf).unwrap());
    let below = winf_col.iter().zip(&safp_col).filter(|(w, s)| w < s).count();
    let bins = summary.binned_by_distance(3);
    let (fs, sf, wi) = (0, 1, 2);
    let safp_wins = bins.iter().all(|b| b.means[sf] > b.means[fs]);
    let gains: Vec<f64> = bins.iter().map(|b| b.means[wi] - b.means[sf]).collect();
    let trend = gains.windows(2).all(|g| g[1] >= g[0]);
    let describe: Vec<String> = bins
        .iter()
        .zip(&gains)
        .map(|(b, g)| {
            format!("D [{:.3},{:.3}] n={} fixed {:.4} safp {:.4} gain {g:.4}", b.lo, b.hi, b.count, b.means[fs], b.means[sf])
        })
        .collect();
    Outcome::new(
        below == 0 && safp_wins && trend && bins.iter().all(|b| b.count == 100),
        format!("muting below safp: {below}; {}", describe.join("; ")),
    )
}

fn csv_files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if matches!(path.extension().and_then(|e| e.to_str()), Some("csv" | "json")) {
            out.insert(path.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&path).unwrap());
        }
    }
    out
}

fn determinism() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_resmute");
    let tmp = tempfile::tempdir().unwrap();
    let scen = tmp.path().join("scenario.json");
    let mixed_scen = tmp.path().join("mixed.json");
    let tiny = tmp.path().join("tiny.json");
    let run = |args: &[&str]| Command::new(bin).args(args).output().map(|o| o.status.success()).unwrap_or(false);
    let s = |p: &Path| p.to_string_lossy().into_owned();
    if !(run(&["--out-dir", &s(&tmp.path().join("gen")), "generate", "--seed", "3", "--out", &s(&scen)])
        && run(&[
            "--out-dir", &s(&tmp.path().join("gen")), "generate", "--seed", "4", "--uplink-fraction", "0.5",
            "--uplink-spread", "0.3", "--out", &s(&mixed_scen),
        ])
        && run(&[
            "--out-dir", &s(&tmp.path().join("gen")), "generate", "--cells", "2", "--users-min", "1",
            "--users-max", "1", "--seed", "5", "--out", &s(&tiny),
        ]))
    {
        return Outcome::new(false, "scenario generation failed");
    }
    let (scen, mixed_scen, tiny) = (s(&scen), s(&mixed_scen), s(&tiny));
    let pipelines: Vec<(&str, Vec<&str>)> = vec![
        ("generate", vec!["generate", "--seed", "11", "--uplink-fraction", "0.3", "--out", "OUT/scenario.json"]),
        ("solve", vec!["solve", "--scenario", &scen]),
        ("analyze", vec!["analyze", "--scenario", &scen]),
        ("sweep", vec!["sweep", "--scenario", &scen, "--points", "8"]),
        ("mute-successive", vec!["mute", "--scenario", &scen]),
        ("mute-exhaustive", vec!["mute", "--scenario", &scen, "--strategy", "exhaustive"]),
        ("mute-indicator", vec!["mute", "--scenario", &scen, "--strategy", "indicator"]),
        ("flexduplex", vec!["flexduplex", "--scenario", &mixed_scen, "--mute", "successive", "--safp-seed", "2"]),
        (
            "montecarlo",
            vec![
                "montecarlo", "--trials", "40", "--seed", "7", "--uplink-fraction", "0.5", "--uplink-spread", "0.4",
                "--protocols", "non-muting,successive,fixed-split,safp,safp-winf",
            ],
        ),
        ("oracle", vec!["oracle", "--scenario", &tiny]),
    ];
    let mut mismatched = Vec::new();
    let mut compared = 0;
    for (name, args) in &pipelines {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let dir = tmp.path().join(format!("{name}-{rep}"));
            std::fs::create_dir_all(&dir).unwrap();
            let args: Vec<String> = args.iter().map(|a| a.replace("OUT", &s(&dir))).collect();
            let mut full = vec!["--out-dir".to_string(), s(&dir)];
            full.extend(args);
            let refs: Vec<&str> = full.iter().map(String::as_str).collect();
            if !run(&refs) {
                return Outcome::new(false, format!("pipeline {name} failed"));
            }
            outputs.push(csv_files(&dir));
        }
        if outputs[0].is_empty() || outputs[0] != outputs[1] {
            mismatched.push(*name);
        }
        compared += outputs[0].len();
    }
    Outcome::new(
        mismatched.is_empty(),
        format!("{} pipelines, {compared} files compared, mismatched: {mismatched:?}", pipelines.len()),
    )
}

fn main() {
    type Criterion = (&'static str, &'static str, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("AC1", "oracle equivalence", oracle_equivalence),
        ("AC2", "equal-utility fixed point", equal_utility),
        ("AC3", "interference function axioms", sif_axioms),
        ("AC4", "asymptotics", asymptotics),
        ("AC5", "bound satisfaction", bounds),
        ("AC6", "power invariance", p_invariance),
        ("AC7", "muting dominance", muting_dominance),
        ("AC8", "SAFP consistency", safp_consistency),
        ("AC9", "flexible duplex orderings", flexduplex_orderings),
        ("AC10", "determinism", determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        let start = Instant::now();
        let outcome = check();
        failed += usize::from(!outcome.pass);
        println!(
            "[{}] {id} {name}: {} ({:.1} s)",
            if outcome.pass { "PASS" } else { "FAIL" },
            outcome.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
