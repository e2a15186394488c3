#![allow(dead_code)]

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resmute::netmodel::{DuplexMode, Scenario};

/// Two single-service neighbor cells with unit powers, demands and
/// bandwidth, all gains 1 and noise 0.1.
pub fn symmetric_pair() -> Scenario {
    Scenario::new(
        2,
        vec![0, 1],
        1.0,
        vec![1.0, 1.0],
        vec![1.0, 1.0],
        DMatrix::from_element(2, 2, 1.0),
        vec![0.1, 0.1],
        vec![vec![1], vec![0]],
        vec![DuplexMode::Downlink; 2],
    )
    .unwrap()
}

/// A small dimensionless network whose utilities are of order one.
///
/// Every cell neighbors every other; intra-cell gains are zero.
pub fn random_scenario(seed: u64, n_cells: usize, users: (usize, usize), uplink_prob: f64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut serving = Vec::new();
    for n in 0..n_cells {
        for _ in 0..rng.gen_range(users.0..=users.1) {
            serving.push(n);
        }
    }
    let k = serving.len();
    let modes: Vec<DuplexMode> = (0..k)
        .map(|_| if rng.gen_bool(uplink_prob) { DuplexMode::Uplink } else { DuplexMode::Downlink })
        .collect();
    let gains = DMatrix::from_fn(k, k, |r, c| {
        if r == c {
            rng.gen_range(0.5..2.0)
        } else if serving[r] == serving[c] {
            0.0
        } else {
            rng.gen_range(0.0..0.4)
        }
    });
    Scenario::new(
        n_cells,
        serving,
        1.0,
        (0..k).map(|_| rng.gen_range(0.5..2.0)).collect(),
        (0..k).map(|_| rng.gen_range(0.2..1.0)).collect(),
        gains,
        (0..k).map(|_| rng.gen_range(0.05..0.2)).collect(),
        (0..n_cells).map(|n| (0..n_cells).filter(|&m| m != n).collect()).collect(),
        modes,
    )
    .unwrap()
}
