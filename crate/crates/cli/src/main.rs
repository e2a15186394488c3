use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use resmute::asymptotics::{asymptotic_report, log_spaced, sweep};
use resmute::flexduplex::{fixed_split, flexduplex_muting_from, safp, SafpConfig};
use resmute::harness::output::{
    write_allocation, write_binned, write_cdf, write_failures, write_muting_steps, write_safp, write_service_values,
    write_sweep, write_trials,
};
use resmute::harness::{brute_force_maxmin, montecarlo_lenient, ExperimentConfig, Manifest, Protocol};
use resmute::muting::{run_partial_muting, SelectionStrategy, DEFAULT_CANDIDATES};
use resmute::netmodel::{
    build_coupling, downlink_sif, generate_scenario, load_scenario, per_bs_norm, save_scenario, GeneratorParams,
    Scenario,
};
use resmute::sif::{fixed_point_solve, per_service_utilities, FixedPointConfig};
use resmute::Error;

#[derive(Parser)]
#[command(name = "resmute", version, about = "Max-min utility allocation and partial resource muting")]
struct Cli {
    /// Directory for CSV outputs and the run manifest.
    #[arg(long, global = true, default_value = "resmute-out")]
    out_dir: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic hexagonal scenario file.
    Generate {
        #[command(flatten)]
        gen: GenArgs,
        /// Scenario file to write (JSON).
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the max-min problem at one budget.
    Solve {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Asymptotic limits and transition point.
    Analyze {
        #[arg(long)]
        scenario: PathBuf,
    },
    /// Utility and efficiency over log-spaced budgets, with their bounds.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        theta_min: f64,
        #[arg(long, default_value_t = 1e3)]
        theta_max: f64,
        #[arg(long, default_value_t = 20)]
        points: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Partial resource muting.
    Mute {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = StrategyArg::Successive)]
        strategy: StrategyArg,
        /// Candidate count of the exhaustive strategy.
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        candidates: usize,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Joint uplink/downlink allocation with SAFP, optionally with muting.
    Flexduplex {
        #[arg(long)]
        scenario: PathBuf,
        #[command(flatten)]
        safp: SafpArgs,
        /// Muting strategy on top of SAFP.
        #[arg(long, value_enum)]
        mute: Option<StrategyArg>,
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        candidates: usize,
        /// Uplink share of the fixed-split baseline.
        #[arg(long, default_value_t = 0.5)]
        uplink_share: f64,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Monte Carlo batch over generated scenarios.
    Montecarlo {
        #[command(flatten)]
        gen: GenArgs,
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Comma-separated protocols: non-muting, successive, exhaustive,
        /// indicator, fixed-split, safp, safp-indicator, safp-winf.
        #[arg(long, value_delimiter = ',', default_value = "non-muting")]
        protocols: Vec<String>,
        #[arg(long, default_value_t = DEFAULT_CANDIDATES)]
        candidates: usize,
        #[arg(long, default_value_t = 0.5)]
        uplink_share: f64,
        /// Number of traffic-distance bins in binned.csv.
        #[arg(long, default_value_t = 3)]
        bins: usize,
        #[command(flatten)]
        safp: SafpArgs,
        #[command(flatten)]
        solver: SolverArgs,
    },
    /// Grid-search reference solution (at most 3 services).
    Oracle {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        theta: f64,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
    },
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, default_value_t = 7)]
    cells: usize,
    /// Master seed (per-trial seeds are seed + trial index).
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 2)]
    users_min: usize,
    #[arg(long, default_value_t = 4)]
    users_max: usize,
    #[arg(long, default_value_t = 250.0)]
    radius: f64,
    #[arg(long, default_value_t = 10.0)]
    edge_snr_db: f64,
    /// Log-normal shadowing standard deviation in dB.
    #[arg(long)]
    jitter_db: Option<f64>,
    /// Upper end of the per-user demand range, bit/s.
    #[arg(long, default_value_t = 10e6)]
    max_demand: f64,
    #[arg(long, default_value_t = 0.0)]
    uplink_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    uplink_spread: f64,
}

impl GenArgs {
    fn params(&self) -> GeneratorParams {
        GeneratorParams {
            n_cells: self.cells,
            services_per_cell: (self.users_min, self.users_max),
            cell_radius_m: self.radius,
            edge_snr_db: self.edge_snr_db,
            jitter_db: self.jitter_db,
            demand_range_bps: (0.0, self.max_demand),
            uplink_fraction: self.uplink_fraction,
            uplink_spread: self.uplink_spread,
            seed: self.seed,
            ..Default::default()
        }
    }

    fn record(&self, m: &mut Manifest) {
        let p = self.params();
        m.push("cells", p.n_cells)
            .push("seed", p.seed)
            .push("users_per_cell", format!("{}..={}", self.users_min, self.users_max))
            .push("radius_m", p.cell_radius_m)
            .push("edge_snr_db", p.edge_snr_db)
            .push("jitter_db", p.jitter_db.map_or("none".to_string(), |j| j.to_string()))
            .push("max_demand_bps", self.max_demand)
            .push("uplink_fraction", p.uplink_fraction)
            .push("uplink_spread", p.uplink_spread);
    }
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, default_value_t = 1.0)]
    theta: f64,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    #[arg(long, default_value_t = 100_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> FixedPointConfig {
        FixedPointConfig { theta: self.theta, tol: self.tol, max_iter: self.max_iter, init: None }
    }

    fn record(&self, m: &mut Manifest) {
        m.push("theta", self.theta).push("tol", self.tol).push("max_iter", self.max_iter);
    }
}

#[derive(Args)]
struct SafpArgs {
    #[arg(long, default_value_t = 8)]
    restarts: usize,
    #[arg(long, default_value_t = 1e-6)]
    eps: f64,
    #[arg(long, default_value_t = 200)]
    max_outer: usize,
    /// Seed of the restart initializations.
    #[arg(long, default_value_t = 0)]
    safp_seed: u64,
}

impl SafpArgs {
    fn config(&self, inner: FixedPointConfig) -> SafpConfig {
        SafpConfig { restarts: self.restarts, eps: self.eps, max_outer: self.max_outer, inner, seed: self.safp_seed }
    }

    fn record(&self, m: &mut Manifest) {
        m.push("restarts", self.restarts)
            .push("eps", self.eps)
            .push("max_outer", self.max_outer)
            .push("safp_seed", self.safp_seed);
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    Successive,
    Exhaustive,
    Indicator,
}

impl StrategyArg {
    fn strategy(self, candidates: usize) -> SelectionStrategy {
        match self {
            StrategyArg::Successive => SelectionStrategy::Successive,
            StrategyArg::Exhaustive => SelectionStrategy::Exhaustive { candidates },
            StrategyArg::Indicator => SelectionStrategy::Indicator,
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = match &cli.command {
        Command::Generate { .. } => "generate",
        Command::Solve { .. } => "solve",
        Command::Analyze { .. } => "analyze",
        Command::Sweep { .. } => "sweep",
        Command::Mute { .. } => "mute",
        Command::Flexduplex { .. } => "flexduplex",
        Command::Montecarlo { .. } => "montecarlo",
        Command::Oracle { .. } => "oracle",
    };
    let mut manifest = Manifest::new(name);
    if let Err(e) = fs::create_dir_all(&cli.out_dir) {
        eprintln!("error: cannot create output directory {}: {e}", cli.out_dir.display());
        return ExitCode::from(3);
    }
    let result = run(&cli, &mut manifest);
    let code = match &result {
        Ok(()) => {
            manifest.push("status", "ok");
            ExitCode::SUCCESS
        }
        Err(e) => {
            manifest.push("status", format!("error: {e:#}"));
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(e))
        }
    };
    if let Err(e) = manifest.write(&cli.out_dir.join("manifest.txt")) {
        eprintln!("error: cannot write manifest: {e}");
        return ExitCode::from(3);
    }
    code
}

/// 3: filesystem, 4: invalid input, 5: numerical failure.
fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<Error>() {
        Some(Error::Io(_) | Error::Csv(_)) => 3,
        Some(
            Error::InvalidParameter { .. }
            | Error::InvalidScenario { .. }
            | Error::Schema(_)
            | Error::UnknownService(_)
            | Error::ProblemTooLarge { .. }
            | Error::DimensionMismatch { .. },
        ) => 4,
        Some(_) => 5,
        None => 1,
    }
}

fn load(path: &Path, m: &mut Manifest) -> Result<Scenario> {
    m.push("scenario", path.display());
    load_scenario(path).with_context(|| format!("cannot load scenario {}", path.display()))
}

fn output(dir: &Path, file: &str, m: &mut Manifest) -> PathBuf {
    m.push("output", file);
    dir.join(file)
}

fn run(cli: &Cli, m: &mut Manifest) -> Result<()> {
    let dir = cli.out_dir.as_path();
    match &cli.command {
        Command::Generate { gen, out } => {
            gen.record(m);
            let scenario = generate_scenario(&gen.params())?;
            save_scenario(&scenario, out).with_context(|| format!("cannot write {}", out.display()))?;
            m.push("services", scenario.n_services()).push("scenario_out", out.display());
            println!("wrote {} ({} cells, {} services)", out.display(), scenario.n_cells, scenario.n_services());
        }
        Command::Solve { scenario, solver } => {
            let s = load(scenario, m)?;
            solver.record(m);
            let mapping = downlink_sif(&s)?;
            let sol = fixed_point_solve(&mapping, &per_bs_norm(&s), &solver.config())?;
            let utilities = per_service_utilities(&sol.allocation, &mapping)?;
            write_allocation(&output(dir, "allocation.csv", m), &s, &sol.allocation, &utilities)?;
            m.push("utility", sol.utility).push("iterations", sol.iterations).push("converged", sol.converged);
            println!("c* = {}", sol.utility);
            println!("iterations = {} converged = {}", sol.iterations, sol.converged);
            if !sol.converged {
                return Err(Error::NotConverged { what: "fixed point" }.into());
            }
        }
        Command::Analyze { scenario } => {
            let s = load(scenario, m)?;
            let report = asymptotic_report(&s, &downlink_sif(&s)?, &per_bs_norm(&s))?;
            write_service_values(&output(dir, "w_inf.csv", m), &s, "w_inf", &report.w_inf)?;
            m.push("lambda_inf", report.lambda_inf).push("theta_trans", report.theta_trans);
            println!("lambda_inf = {}", report.lambda_inf);
            println!("theta_trans = {}", report.theta_trans);
            println!("sup_utility = {}", report.sup_utility);
            println!("sup_efficiency = {}", report.sup_efficiency);
            println!("irreducible = {} degenerate = {}", report.irreducible, report.degenerate);
        }
        Command::Sweep { scenario, theta_min, theta_max, points, solver } => {
            let s = load(scenario, m)?;
            solver.record(m);
            m.push("theta_min", theta_min).push("theta_max", theta_max).push("points", points);
            if !(*theta_min > 0.0 && theta_max >= theta_min) || *points == 0 {
                bail!(Error::InvalidParameter { name: "theta range", reason: "need 0 < min <= max and points >= 1".into() });
            }
            let mapping = downlink_sif(&s)?;
            let norm = per_bs_norm(&s);
            let report = asymptotic_report(&s, &mapping, &norm)?;
            let grid = log_spaced(*theta_min, *theta_max, *points);
            let pts = sweep(&mapping, &norm, &report, &grid, &solver.config())?;
            write_sweep(&output(dir, "sweep.csv", m), &pts)?;
            println!("{} points, theta_trans = {}", pts.len(), report.theta_trans);
        }
        Command::Mute { scenario, strategy, candidates, solver } => {
            let s = load(scenario, m)?;
            solver.record(m);
            let strategy = strategy.strategy(*candidates);
            m.push("strategy", strategy.name()).push("candidates", candidates);
            let plan = run_partial_muting(&s, strategy, &solver.config())?;
            write_muting_steps(&output(dir, "muting_steps.csv", m), &plan.steps)?;
            let mapping = resmute::netmodel::RateMapping::new(
                &resmute::muting::mute_interference(&build_coupling(&s)?, &s, &plan.bottleneck_set)?,
                &s.powers,
                &s.demands,
                s.bandwidth_hz,
            )?;
            let w = &plan.final_solution.allocation;
            write_allocation(&output(dir, "allocation.csv", m), &s, w, &per_service_utilities(w, &mapping)?)?;
            m.push("triggered", plan.triggered).push("utility", plan.final_utility);
            println!("triggered = {} theta_trans = {}", plan.triggered, plan.report.theta_trans);
            println!("baseline = {} muted = {}", plan.baseline.utility, plan.final_utility);
            println!("bottlenecks = {:?}", plan.bottleneck_set);
        }
        Command::Flexduplex { scenario, safp: safp_args, mute, candidates, uplink_share, solver } => {
            let s = load(scenario, m)?;
            solver.record(m);
            safp_args.record(m);
            m.push("uplink_share", uplink_share);
            let cfg = safp_args.config(solver.config());
            let base = safp(&s, &cfg)?;
            write_safp(&output(dir, "safp.csv", m), &base)?;
            let fix = fixed_split(&s, *uplink_share, &solver.config())?;
            println!("fixed_split = {}", fix.utility);
            println!("safp = {} (restart {})", base.utility, base.best_index);
            m.push("fixed_split", fix.utility).push("safp", base.utility);
            let (w, utility) = match mute {
                Some(strategy) => {
                    let strategy = strategy.strategy(*candidates);
                    m.push("strategy", strategy.name());
                    let plan = flexduplex_muting_from(&s, strategy, &cfg, base)?;
                    write_muting_steps(&output(dir, "muting_steps.csv", m), &plan.steps)?;
                    println!("muted = {} bottlenecks = {:?}", plan.final_utility, plan.bottleneck_set);
                    m.push("muted", plan.final_utility);
                    (plan.final_solution.allocation, plan.final_utility)
                }
                None => (base.allocation, base.utility),
            };
            let n = s.n_services();
            write_allocation(&output(dir, "allocation.csv", m), &s, &w, &vec![utility; n])?;
        }
        Command::Montecarlo { gen, trials, protocols, candidates, uplink_share, bins, safp: safp_args, solver } => {
            gen.record(m);
            solver.record(m);
            let protocols = protocols.iter().map(|p| p.parse()).collect::<Result<Vec<Protocol>, _>>()?;
            m.push("trials", trials)
                .push("protocols", protocols.iter().map(|p| p.name()).collect::<Vec<_>>().join(","))
                .push("candidates", candidates)
                .push("uplink_share", uplink_share)
                .push("bins", bins);
            if protocols.iter().any(|p| matches!(p, Protocol::Safp | Protocol::SafpIndicator | Protocol::SafpWinf)) {
                safp_args.record(m);
            }
            let cfg = ExperimentConfig {
                generator: gen.params(),
                solver: solver.config(),
                safp: safp_args.config(solver.config()),
                protocols,
                candidates: *candidates,
                uplink_share: *uplink_share,
                trials: *trials,
                master_seed: gen.seed,
                distance_bins: *bins,
            };
            let summary = montecarlo_lenient(&cfg)?;
            write_trials(&output(dir, "trials.csv", m), &summary)?;
            write_cdf(&output(dir, "cdf.csv", m), &summary)?;
            write_binned(&output(dir, "binned.csv", m), &summary, &summary.binned_by_distance(*bins))?;
            write_failures(&output(dir, "failures.csv", m), &summary)?;
            m.push("failed_trials", summary.failures.len());
            for &p in &summary.protocols {
                if let Some(mean) = summary.mean(p) {
                    println!("{p}: mean utility {mean}");
                }
            }
            println!("{} of {} trials failed", summary.failures.len(), trials);
            if summary.failures.len() * 10 > *trials {
                return Err(Error::TooManyFailures { failed: summary.failures.len(), total: *trials }.into());
            }
        }
        Command::Oracle { scenario, theta, step } => {
            let s = load(scenario, m)?;
            m.push("theta", theta).push("step", step);
            let (w, u) = brute_force_maxmin(&s, *theta, *step)?;
            let utilities = per_service_utilities(&w, &downlink_sif(&s)?)?;
            write_allocation(&output(dir, "allocation.csv", m), &s, &w, &utilities)?;
            m.push("utility", u);
            println!("utility = {u}");
            println!("w = {w:?}");
        }
    }
    Ok(())
}
