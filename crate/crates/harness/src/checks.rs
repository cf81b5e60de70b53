//! Property measurements shared by the `selftest` and `oracle-check`
//! commands. Each returns the measured statistic; callers own thresholds.

use rand::Rng;
use wpmec_core::dual_solver::psd_constraint_cut;
use wpmec_core::model::{beta, beta_prime, SystemParams, UserParams};
use wpmec_core::oracle::{grid_oracle_k1, jensen_sampler, DEFAULT_GRID};
use wpmec_core::subproblem::inverse_beta_gap;
use wpmec_core::{solve_joint, SolveOptions};

use crate::channels::{gen_channels, realization_seed, PATH_LOSS_EXPONENT, REFERENCE_GAIN};
use crate::error::Result;

/// Worst relative error of `x ↦ inverse_beta_gap(β(x) − xβ′(x))` over `x`
/// uniform in `(0, 10B]`.
pub fn inverse_identity_error(samples: usize, noise_power: f64, bandwidth: f64, rng: &mut impl Rng) -> Result<f64> {
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let x = bandwidth * 10.0 * (1.0 - rng.random::<f64>());
        let y = beta(x, noise_power, bandwidth) - x * beta_prime(x, noise_power, bandwidth);
        let back = inverse_beta_gap(y.min(0.0), noise_power, bandwidth)?;
        worst = worst.max((back - x).abs() / x);
    }
    Ok(worst)
}

/// Worst mismatch between central differences of `π(λ) = λ_min(F(λ))` and
/// the directional derivative `−(cut vector)·δ`, over points where the two
/// smallest eigenvalues of `F` are well separated.
///
/// Directions are scaled per coordinate by `1/(ζ‖h_i‖²)` so that the
/// derivative is of order one; the error is relative to `1 + |derivative|`.
pub fn eigen_subgradient_error(points: usize, antennas: usize, users: usize, seed: u64, rng: &mut impl Rng) -> Result<f64> {
    let zeta = 0.3;
    let channels = gen_channels(seed, antennas, &vec![5.0; users], REFERENCE_GAIN, PATH_LOSS_EXPONENT)?;
    let scale: Vec<f64> = (0..users).map(|i| 1.0 / (zeta * channels.downlink_gain(i))).collect();
    let pi = |lambda: &[f64]| psd_constraint_cut(lambda, &channels, zeta).map(|c| c.margin);
    let mut worst = 0.0f64;
    let mut accepted = 0;
    while accepted < points {
        let lambda: Vec<f64> = scale.iter().map(|s| rng.random_range(0.0..0.5) * s).collect();
        let f = wpmec_core::dual_solver::psd_matrix(&lambda, &channels, zeta);
        let eig = wpmec_core::numerics::hermitian_eig(&f)?;
        if antennas > 1 && eig.values[1] - eig.values[0] < 1e-2 {
            continue;
        }
        let cut = psd_constraint_cut(&lambda, &channels, zeta)?;
        let dir: Vec<f64> = scale.iter().map(|s| rng.random_range(-1.0..1.0) * s).collect();
        let predicted: f64 = -cut.vector.iter().zip(&dir).map(|(g, d)| g * d).sum::<f64>();
        let h = 1e-6;
        let shifted = |sign: f64| -> Vec<f64> { lambda.iter().zip(&dir).map(|(l, d)| l + sign * h * d).collect() };
        let fd = (pi(&shifted(1.0))? - pi(&shifted(-1.0))?) / (2.0 * h);
        worst = worst.max((fd - predicted).abs() / (1.0 + predicted.abs()));
        accepted += 1;
    }
    Ok(worst)
}

/// Smallest Jensen ratio over `samples` deadline-meeting frequency vectors
/// for each cycle count.
pub fn jensen_min_ratio(cycles: &[usize], samples: usize, rng: &mut impl Rng) -> Vec<f64> {
    cycles.iter().map(|&m| jensen_sampler(m, 0.1, 1e-28, samples, rng)).collect()
}

#[derive(Debug, Clone)]
pub struct OracleCase {
    pub seed: u64,
    pub antennas: usize,
    pub joint: f64,
    pub oracle: f64,
    pub relative_error: f64,
}

/// Single-user instances cycling through one and two antennas and a few
/// block lengths and task sizes, solved both by the joint solver and by the
/// grid oracle.
pub fn oracle_cases(count: usize, master: u64, options: &SolveOptions) -> Result<Vec<OracleCase>> {
    const BLOCKS: [f64; 3] = [0.05, 0.1, 0.2];
    const TASKS: [f64; 4] = [5e3, 10e3, 20e3, 40e3];
    (0..count)
        .map(|i| {
            let seed = realization_seed(master, i as u64);
            let antennas = 1 + i % 2;
            let mut params = SystemParams::homogeneous(1, BLOCKS[i % 3], UserParams::with_task(TASKS[i % 4]));
            params.antennas = antennas;
            let channels = gen_channels(seed, antennas, &[5.0], REFERENCE_GAIN, PATH_LOSS_EXPONENT)?;
            let joint = solve_joint(&params, &channels, options)?.primal_value;
            let oracle = grid_oracle_k1(&params, &channels, DEFAULT_GRID)?.allocation.objective;
            Ok(OracleCase {
                seed,
                antennas,
                joint,
                oracle,
                relative_error: (joint - oracle).abs() / oracle.abs().max(f64::MIN_POSITIVE),
            })
        })
        .collect()
}
