//! Experiment plumbing: Monte Carlo batches, CSV output and the
//! brute-force reference solver.

pub mod montecarlo;
pub mod oracle;
pub mod output;

pub use montecarlo::{
    evaluate_protocols, montecarlo, montecarlo_lenient, run_trial, DistanceBin, ExperimentConfig, MonteCarloSummary,
    Protocol, TrialFailure, TrialRecord,
};
pub use oracle::{brute_force_maxmin, BRUTE_FORCE_MAX_SERVICES};
pub use output::Manifest;
