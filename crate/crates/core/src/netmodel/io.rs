//! JSON scenario files.
//!
//! ```json
//! {
//!   "cells": 2,                      // number of cells N
//!   "services": [0, 1],              // serving cell of each service
//!   "bandwidth_hz": 10000000.0,      // Hz
//!   "neighbors": [[1], [0]],         // symmetric cell adjacency
//!   "gains": [[1e-9, 2e-11], ...],   // linear, row k = receiver of service k
//!   "noise": [3e-20, 3e-20],         // W/Hz
//!   "demands": [5e6, 2e6],           // bit/s
//!   "powers": [2e-6, 2e-6],          // W/Hz
//!   "modes": ["downlink", "uplink"]  // optional, defaults to all downlink
//! }
//! ```

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::{DuplexMode, Scenario};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub cells: usize,
    pub services: Vec<usize>,
    pub bandwidth_hz: f64,
    pub neighbors: Vec<Vec<usize>>,
    pub gains: Vec<Vec<f64>>,
    pub noise: Vec<f64>,
    pub demands: Vec<f64>,
    pub powers: Vec<f64>,
    #[serde(default)]
    pub modes: Option<Vec<DuplexMode>>,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let gains = (0..s.gains.nrows()).map(|r| s.gains.row(r).iter().copied().collect()).collect();
        Self {
            cells: s.n_cells,
            services: s.serving_cell.clone(),
            bandwidth_hz: s.bandwidth_hz,
            neighbors: s.neighbors.clone(),
            gains,
            noise: s.noise.clone(),
            demands: s.demands.clone(),
            powers: s.powers.clone(),
            modes: Some(s.modes.clone()),
        }
    }
}

impl TryFrom<ScenarioFile> for Scenario {
    type Error = Error;

    fn try_from(f: ScenarioFile) -> Result<Self> {
        let k = f.services.len();
        if f.gains.len() != k {
            return Err(Error::scenario("gains", format!("expected {k} rows, found {}", f.gains.len())));
        }
        if let Some(r) = f.gains.iter().position(|row| row.len() != k) {
            return Err(Error::scenario("gains", format!("row {r} has {} entries, expected {k}", f.gains[r].len())));
        }
        let flat: Vec<f64> = f.gains.into_iter().flatten().collect();
        let gains = DMatrix::from_row_slice(k, k, &flat);
        let modes = f.modes.unwrap_or_else(|| vec![DuplexMode::Downlink; k]);
        Scenario::new(f.cells, f.services, f.bandwidth_hz, f.powers, f.demands, gains, f.noise, f.neighbors, modes)
    }
}

pub fn scenario_to_json(s: &Scenario) -> String {
    serde_json::to_string_pretty(&ScenarioFile::from(s)).expect("scenario values are finite")
}

pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
    Scenario::try_from(file)
}

pub fn save_scenario(s: &Scenario, path: impl AsRef<Path>) -> Result<()> {
    let mut text = scenario_to_json(s);
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario> {
    scenario_from_json(&fs::read_to_string(path)?)
}
