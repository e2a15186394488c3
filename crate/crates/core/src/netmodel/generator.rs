use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{DuplexMode, Scenario};
use crate::error::{Error, Result};

/// Parameters of the synthetic hexagonal-layout generator.
///
/// Cells sit on a hexagonal lattice with inter-site distance
/// `sqrt(3) * cell_radius_m`. Users are dropped uniformly in a disk of
/// `cell_radius_m` around their drop cell and then attached to the cell
/// with the strongest gain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub n_cells: usize,
    /// Inclusive range of users dropped per cell.
    pub services_per_cell: (usize, usize),
    pub cell_radius_m: f64,
    pub pathloss_exponent: f64,
    /// Distances are clamped to at least this before applying the pathloss.
    pub min_distance_m: f64,
    /// Gain at 1 m. `None` calibrates it from `edge_snr_db`.
    pub reference_gain: Option<f64>,
    /// Downlink SNR of a user at the cell edge with no interference.
    pub edge_snr_db: f64,
    /// Standard deviation of log-normal per-link jitter; `None` disables it.
    pub jitter_db: Option<f64>,
    /// Demands are uniform on `(lo, hi]`, bit/s.
    pub demand_range_bps: (f64, f64),
    pub bandwidth_hz: f64,
    pub dl_power_density: f64,
    pub ul_power_density: f64,
    pub noise_density: f64,
    /// Cells closer than this are neighbors. `None` uses 1.5 inter-site distances.
    pub neighbor_distance_m: Option<f64>,
    /// Mean probability that a service is uplink. 0 gives an all-downlink network.
    pub uplink_fraction: f64,
    /// Per-cell uplink probability is uniform on `uplink_fraction +/- uplink_spread`.
    pub uplink_spread: f64,
    pub seed: u64,
    pub max_retries: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        Self {
            n_cells: 7,
            services_per_cell: (2, 4),
            cell_radius_m: 250.0,
            pathloss_exponent: 3.7,
            min_distance_m: 10.0,
            reference_gain: None,
            edge_snr_db: 10.0,
            jitter_db: None,
            demand_range_bps: (0.0, 10e6),
            bandwidth_hz: 10e6,
            // 43 dBm over 10 MHz.
            dl_power_density: 2e-6,
            // 23 dBm over 1 MHz.
            ul_power_density: 2e-7,
            // -174 dBm/Hz plus a 9 dB noise figure.
            noise_density: 3.162e-20,
            neighbor_distance_m: None,
            uplink_fraction: 0.0,
            uplink_spread: 0.0,
            seed: 0,
            max_retries: 100,
        }
    }
}

impl GeneratorParams {
    pub fn inter_site_distance(&self) -> f64 {
        3f64.sqrt() * self.cell_radius_m
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_cells == 0 {
            return Err(Error::param("n_cells", "must be at least 1"));
        }
        let (lo, hi) = self.services_per_cell;
        if lo == 0 || lo > hi {
            return Err(Error::param("services_per_cell", format!("invalid range {lo}..={hi}")));
        }
        let positive = [
            ("cell_radius_m", self.cell_radius_m),
            ("pathloss_exponent", self.pathloss_exponent),
            ("min_distance_m", self.min_distance_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("dl_power_density", self.dl_power_density),
            ("ul_power_density", self.ul_power_density),
            ("noise_density", self.noise_density),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, format!("must be positive and finite, got {v}")));
            }
        }
        let (dlo, dhi) = self.demand_range_bps;
        if !(dlo >= 0.0 && dhi > dlo && dhi.is_finite()) {
            return Err(Error::param("demand_range_bps", format!("invalid range ({dlo}, {dhi}]")));
        }
        if !(0.0..=1.0).contains(&self.uplink_fraction) || !(self.uplink_spread >= 0.0) {
            return Err(Error::param("uplink_fraction", "fraction must be in [0,1] and spread nonnegative"));
        }
        if let Some(g) = self.reference_gain {
            if !(g > 0.0) {
                return Err(Error::param("reference_gain", "must be positive"));
            }
        }
        if let Some(j) = self.jitter_db {
            if !(j >= 0.0) {
                return Err(Error::param("jitter_db", "must be nonnegative"));
            }
        }
        if self.max_retries == 0 {
            return Err(Error::param("max_retries", "must be at least 1"));
        }
        Ok(())
    }

    fn reference_gain(&self) -> f64 {
        self.reference_gain.unwrap_or_else(|| {
            let snr = 10f64.powf(self.edge_snr_db / 10.0);
            snr * self.noise_density / (self.dl_power_density * self.cell_radius_m.powf(-self.pathloss_exponent))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// The first `n` sites of a hexagonal lattice, center first, then ring by ring.
pub fn hex_sites(n: usize, spacing: f64) -> Vec<Point> {
    let mut rings = 0i64;
    while 1 + 3 * rings * (rings + 1) < n as i64 {
        rings += 1;
    }
    let mut axial = Vec::new();
    for q in -rings..=rings {
        for r in -rings..=rings {
            let ring = q.abs().max(r.abs()).max((q + r).abs());
            if ring <= rings {
                axial.push((ring, q, r));
            }
        }
    }
    let mut sites: Vec<(i64, f64, Point)> = axial
        .into_iter()
        .map(|(ring, q, r)| {
            let p = Point { x: spacing * (q as f64 + r as f64 / 2.0), y: spacing * (r as f64 * 3f64.sqrt() / 2.0) };
            (ring, p.y.atan2(p.x), p)
        })
        .collect();
    sites.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
    sites.into_iter().take(n).map(|(_, _, p)| p).collect()
}

/// Draws a scenario from `params`. The result depends on `params` only.
pub fn generate_scenario(params: &GeneratorParams) -> Result<Scenario> {
    params.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let sites = hex_sites(params.n_cells, params.inter_site_distance());
    let mut last_reason = String::new();
    for _ in 0..params.max_retries {
        match draw(params, &sites, &mut rng) {
            Ok(s) => return Ok(s),
            Err(reason) => last_reason = reason,
        }
    }
    Err(Error::Generation { attempts: params.max_retries, reason: last_reason })
}

fn draw(params: &GeneratorParams, sites: &[Point], rng: &mut ChaCha8Rng) -> std::result::Result<Scenario, String> {
    let n_cells = sites.len();
    let g0 = params.reference_gain();
    let pathloss = |d: f64| g0 * d.max(params.min_distance_m).powf(-params.pathloss_exponent);
    let jitter = params.jitter_db.filter(|s| *s > 0.0).map(|s| Normal::new(0.0, s).expect("finite sigma"));
    let jitter_factor = |rng: &mut ChaCha8Rng| match &jitter {
        Some(dist) => 10f64.powf(dist.sample(rng) / 10.0),
        None => 1.0,
    };

    let uplink_prob: Vec<f64> = (0..n_cells)
        .map(|_| {
            let spread = params.uplink_spread;
            let offset = if spread > 0.0 { rng.gen_range(-spread..=spread) } else { 0.0 };
            (params.uplink_fraction + offset).clamp(0.0, 1.0)
        })
        .collect();

    let mut users = Vec::new();
    let mut drop_cell = Vec::new();
    for (n, site) in sites.iter().enumerate() {
        let count = rng.gen_range(params.services_per_cell.0..=params.services_per_cell.1);
        for _ in 0..count {
            let radius = params.cell_radius_m * rng.gen::<f64>().sqrt();
            let angle = rng.gen_range(0.0..std::f64::consts::TAU);
            users.push(Point { x: site.x + radius * angle.cos(), y: site.y + radius * angle.sin() });
            drop_cell.push(n);
        }
    }
    let k = users.len();

    // Access gains user <-> site, jittered per link, decide attachment.
    let mut access = DMatrix::zeros(k, n_cells);
    for (u, user) in users.iter().enumerate() {
        for (n, site) in sites.iter().enumerate() {
            access[(u, n)] = pathloss(user.dist(*site)) * jitter_factor(rng);
        }
    }
    let serving: Vec<usize> = (0..k)
        .map(|u| (0..n_cells).fold(0, |best, n| if access[(u, n)] > access[(u, best)] { n } else { best }))
        .collect();
    let mut served = vec![0usize; n_cells];
    for &n in &serving {
        served[n] += 1;
    }
    if let Some(n) = served.iter().position(|c| *c == 0) {
        return Err(format!("cell {n} serves no user after attachment"));
    }

    let modes: Vec<DuplexMode> = drop_cell
        .iter()
        .zip(&serving)
        .map(|(_, &n)| if rng.gen_bool(uplink_prob[n]) { DuplexMode::Uplink } else { DuplexMode::Downlink })
        .collect();
    let demands: Vec<f64> = (0..k)
        .map(|_| {
            let (lo, hi) = params.demand_range_bps;
            lo + (hi - lo) * (1.0 - rng.gen::<f64>())
        })
        .collect();
    let powers: Vec<f64> = modes
        .iter()
        .map(|m| match m {
            DuplexMode::Downlink => params.dl_power_density,
            DuplexMode::Uplink => params.ul_power_density,
        })
        .collect();

    // Receiver of k / transmitter of l: the user in downlink, the site in uplink.
    let receiver = |s: usize| match modes[s] {
        DuplexMode::Downlink => users[s],
        DuplexMode::Uplink => sites[serving[s]],
    };
    let transmitter = |s: usize| match modes[s] {
        DuplexMode::Downlink => sites[serving[s]],
        DuplexMode::Uplink => users[s],
    };
    let mut gains = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in 0..k {
            if r == c {
                gains[(r, r)] = access[(r, serving[r])];
            } else if serving[r] != serving[c] {
                // Services of one cell use orthogonal resources.
                gains[(r, c)] = pathloss(receiver(r).dist(transmitter(c))) * jitter_factor(rng);
            }
        }
    }

    let threshold = params.neighbor_distance_m.unwrap_or(1.5 * params.inter_site_distance());
    let neighbors: Vec<Vec<usize>> = (0..n_cells)
        .map(|n| (0..n_cells).filter(|&m| m != n && sites[n].dist(sites[m]) <= threshold).collect())
        .collect();

    Scenario::new(
        n_cells,
        serving,
        params.bandwidth_hz,
        powers,
        demands,
        gains,
        vec![params.noise_density; k],
        neighbors,
        modes,
    )
    .map_err(|e| e.to_string())
}
