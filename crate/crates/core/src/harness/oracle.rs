//! Grid-search reference solver for tiny networks.

use crate::error::{Error, Result};
use crate::netmodel::{downlink_sif, Scenario};
use crate::sif::InterferenceMapping;

/// Largest network accepted by [`brute_force_maxmin`].
pub const BRUTE_FORCE_MAX_SERVICES: usize = 3;

/// Maximizes `min_k r_k(w) / rbar_k` over the grid `step * N^K` subject to the
/// per-cell budget `||A w||_inf <= theta`.
///
/// All but the last coordinate are enumerated. Along the last one, its own
/// utility grows linearly while every other utility falls, so the grid
/// optimum sits where the two curves cross and is found by bisection.
pub fn brute_force_maxmin(scenario: &Scenario, theta: f64, step: f64) -> Result<(Vec<f64>, f64)> {
    let k = scenario.n_services();
    if k > BRUTE_FORCE_MAX_SERVICES {
        return Err(Error::ProblemTooLarge { max: BRUTE_FORCE_MAX_SERVICES, got: k });
    }
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::param("step", format!("must be positive, got {step}")));
    }
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::param("theta", format!("must be nonnegative, got {theta}")));
    }
    let mapping = downlink_sif(scenario)?;
    let cells = &scenario.serving_cell;
    let slack = 1e-9 * theta.max(1.0);
    let steps_within = |cap: f64| ((cap + slack) / step).floor().max(0.0) as usize;

    let mut search = Search { mapping: &mapping, t: vec![0.0; k], best_w: vec![0.0; k], best_u: 0.0 };
    let mut w = vec![0.0; k];
    let mut idx = vec![0usize; k - 1];
    let last = k - 1;
    loop {
        for (i, &n) in idx.iter().enumerate() {
            w[i] = n as f64 * step;
        }
        let used: f64 = (0..last).filter(|&i| cells[i] == cells[last]).map(|i| w[i]).sum();
        let feasible = (0..last).all(|i| {
            (0..last).filter(|&j| cells[j] == cells[i]).map(|j| w[j]).sum::<f64>() <= theta + slack
        });
        if feasible {
            search.line(&mut w, steps_within(theta - used), step);
        }
        // Odometer over the leading coordinates.
        let mut d = 0;
        while d < idx.len() {
            idx[d] += 1;
            if idx[d] as f64 * step <= theta + slack {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
        if d == idx.len() {
            break;
        }
    }
    Ok((search.best_w, search.best_u))
}

struct Search<'a> {
    mapping: &'a dyn InterferenceMapping,
    t: Vec<f64>,
    best_w: Vec<f64>,
    best_u: f64,
}

impl Search<'_> {
    /// Returns (own utility of the last service, min utility of the others).
    fn split(&mut self, w: &mut [f64], j: usize, step: f64) -> (f64, f64) {
        let last = w.len() - 1;
        w[last] = j as f64 * step;
        self.mapping.eval_into(w, &mut self.t);
        let own = w[last] / self.t[last];
        let others = (0..last).map(|i| w[i] / self.t[i]).fold(f64::INFINITY, f64::min);
        (own, others)
    }

    fn line(&mut self, w: &mut [f64], j_max: usize, step: f64) {
        // Smallest j where the last service is no longer the minimum.
        let (mut lo, mut hi) = (0usize, j_max + 1);
        while lo < hi {
            let mid = (lo + hi) / 2;
            let (own, others) = self.split(w, mid, step);
            if own >= others {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        for j in [lo.saturating_sub(1), lo.min(j_max)] {
            let (own, others) = self.split(w, j, step);
            let u = own.min(others);
            if u > self.best_u {
                self.best_u = u;
                self.best_w.copy_from_slice(w);
            }
        }
    }
}
