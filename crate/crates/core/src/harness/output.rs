//! CSV and manifest emission.
//!
//! Every table is comma separated with a header row, LF line endings and
//! shortest round-trip float formatting, so identical inputs give
//! byte-identical files.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use csv::{Terminator, Writer, WriterBuilder};

use super::montecarlo::{DistanceBin, MonteCarloSummary};
use crate::asymptotics::SweepPoint;
use crate::error::Result;
use crate::flexduplex::SafpResult;
use crate::muting::MutingStep;
use crate::netmodel::{DuplexMode, Scenario};

fn writer(path: &Path) -> Result<Writer<File>> {
    Ok(WriterBuilder::new().terminator(Terminator::Any(b'\n')).from_path(path)?)
}

fn join(set: &[usize]) -> String {
    set.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

fn mode_name(m: DuplexMode) -> &'static str {
    match m {
        DuplexMode::Uplink => "uplink",
        DuplexMode::Downlink => "downlink",
    }
}

pub fn write_allocation(path: &Path, scenario: &Scenario, allocation: &[f64], utilities: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["service", "cell", "mode", "allocation", "utility"])?;
    for (k, (a, u)) in allocation.iter().zip(utilities).enumerate() {
        w.write_record([
            k.to_string(),
            scenario.serving_cell[k].to_string(),
            mode_name(scenario.modes[k]).to_string(),
            a.to_string(),
            u.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One named per-service column, e.g. the asymptotic allocation.
pub fn write_service_values(path: &Path, scenario: &Scenario, column: &str, values: &[f64]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["service", "cell", "mode", column])?;
    for (k, v) in values.iter().enumerate() {
        w.write_record([
            k.to_string(),
            scenario.serving_cell[k].to_string(),
            mode_name(scenario.modes[k]).to_string(),
            v.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_sweep(path: &Path, points: &[SweepPoint]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["theta", "utility", "efficiency", "utility_bound", "efficiency_bound", "converged"])?;
    for p in points {
        w.write_record([
            p.theta.to_string(),
            p.utility.to_string(),
            p.efficiency.to_string(),
            p.utility_bound.to_string(),
            p.efficiency_bound.to_string(),
            p.converged.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_muting_steps(path: &Path, steps: &[MutingStep]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["step", "added", "set", "utility", "accepted"])?;
    for s in steps {
        w.write_record([
            s.step.to_string(),
            s.added.map(|a| a.to_string()).unwrap_or_default(),
            join(&s.set),
            s.utility.to_string(),
            s.accepted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_safp(path: &Path, result: &SafpResult) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["restart", "outer_iterations", "utility", "converged", "failed", "best"])?;
    for r in &result.restarts {
        w.write_record([
            r.index.to_string(),
            r.outer_iterations.to_string(),
            r.utility.to_string(),
            r.converged.to_string(),
            r.failed.to_string(),
            (r.index == result.best_index).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_trials(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["trial".to_string(), "seed".into(), "services".into(), "mean_distance".into()];
    header.extend(summary.protocols.iter().map(|p| p.name().to_string()));
    w.write_record(&header)?;
    for t in &summary.trials {
        let mut row = vec![t.trial.to_string(), t.seed.to_string(), t.services.to_string(), t.mean_distance.to_string()];
        row.extend(t.utilities.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_cdf(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["protocol", "utility", "cdf"])?;
    for &p in &summary.protocols {
        for (v, f) in summary.cdf(p).unwrap_or_default() {
            w.write_record([p.name().to_string(), v.to_string(), f.to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_binned(path: &Path, summary: &MonteCarloSummary, bins: &[DistanceBin]) -> Result<()> {
    let mut w = writer(path)?;
    let mut header = vec!["bin".to_string(), "distance_lo".into(), "distance_hi".into(), "count".into()];
    header.extend(summary.protocols.iter().map(|p| p.name().to_string()));
    w.write_record(&header)?;
    for (i, b) in bins.iter().enumerate() {
        let mut row = vec![i.to_string(), b.lo.to_string(), b.hi.to_string(), b.count.to_string()];
        row.extend(b.means.iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_failures(path: &Path, summary: &MonteCarloSummary) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["trial", "seed", "reason"])?;
    for f in &summary.failures {
        w.write_record([f.trial.to_string(), f.seed.to_string(), f.reason.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Plain-text `key = value` manifest describing a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Manifest {
    entries: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &str) -> Self {
        let mut m = Self::default();
        m.push("command", command);
        m.push("version", env!("CARGO_PKG_VERSION"));
        m
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) -> &mut Self {
        self.entries.push((key.into(), value.to_string()));
        self
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        File::create(path)?.write_all(self.render().as_bytes())?;
        Ok(())
    }
}
