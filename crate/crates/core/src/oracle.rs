//! Brute-force references that share no code path with the dual solver
//! beyond the energy formulas.

use rand::Rng;

use crate::dual_solver::{
    dual_function, maximize, psd_constraint_cut, ConstraintCheck, Cut, CutKind, DualPoint, DualProblem,
    EllipsoidOptions, Evaluation, PSD_TOLERANCE,
};
use crate::error::{invalid, Error, Result};
use crate::model::{local_energy, offload_energy, Allocation, ChannelSet, SystemParams};
use crate::numerics::{outer, HermitianMatrix};

pub const DEFAULT_GRID: usize = 200;
const ZOOM: f64 = 10.0;
const PASSES: usize = 3;

#[derive(Debug, Clone)]
pub struct GridOracle {
    pub allocation: Allocation,
    /// Best objective after each pass.
    pub pass_objectives: Vec<f64>,
}

/// Exhaustive search for a single user over `ℓ ∈ [ℓ_min, R]` and `t ∈ (0, T]`,
/// plus the all-local point. The covariance is the rank-one beam that
/// exactly covers the required energy. The initial grid is refined twice,
/// each time zooming ×10 around the incumbent.
pub fn grid_oracle_k1(params: &SystemParams, channels: &ChannelSet, resolution: usize) -> Result<GridOracle> {
    params.validate()?;
    channels.check_dims(params)?;
    if params.num_users() != 1 {
        return Err(invalid("users", "the grid oracle handles exactly one user"));
    }
    if resolution < 2 {
        return Err(invalid("resolution", "need at least two grid points"));
    }
    let user = &params.users[0];
    let t_blk = params.block_length;
    let gain = channels.downlink_gain(0);
    if user.task_bits == 0.0 {
        return Ok(GridOracle {
            allocation: Allocation::zero(params, channels)?,
            pass_objectives: vec![0.0],
        });
    }
    if !(gain > 0.0) {
        return Err(Error::Infeasible("zero downlink channel".into()));
    }
    let objective = |bits: f64, time: f64| -> f64 {
        let c = local_energy(bits, user, t_blk).energy
            + offload_energy(time, bits, channels.uplink_gain(0), user.circuit_power, params);
        c / (params.eh_efficiency * gain) + params.ap_energy_per_bit * bits
    };

    let l_min = user.min_offload_bits(t_blk);
    let mut best = (f64::INFINITY, 0.0, 0.0);
    if l_min == 0.0 {
        best = (objective(0.0, 0.0), 0.0, 0.0);
    }
    let (mut l_lo, mut l_hi) = (l_min, user.task_bits);
    let (mut t_lo, mut t_hi) = (0.0, t_blk);
    let mut pass_objectives = Vec::with_capacity(PASSES);
    for _ in 0..PASSES {
        let steps = (resolution - 1) as f64;
        for a in 0..resolution {
            let bits = l_lo + (l_hi - l_lo) * a as f64 / steps;
            for b in 0..resolution {
                let time = t_lo + (t_hi - t_lo) * b as f64 / steps;
                if time <= 0.0 {
                    continue;
                }
                let v = objective(bits, time);
                if v < best.0 {
                    best = (v, bits, time);
                }
            }
        }
        pass_objectives.push(best.0);
        let (dl, dt) = ((l_hi - l_lo) / (2.0 * ZOOM), (t_hi - t_lo) / (2.0 * ZOOM));
        l_lo = (best.1 - dl).max(l_min);
        l_hi = (best.1 + dl).min(user.task_bits);
        t_lo = (best.2 - dt).max(0.0);
        t_hi = (best.2 + dt).min(t_blk);
    }
    if !best.0.is_finite() {
        return Err(Error::Infeasible("no finite grid point".into()));
    }
    let (_, bits, time) = best;
    let c = local_energy(bits, user, t_blk).energy
        + offload_energy(time, bits, channels.uplink_gain(0), user.circuit_power, params);
    let beam = channels.downlink(0).normalized().expect("non-zero downlink");
    let covariance = outer(&beam).scale(c / (t_blk * params.eh_efficiency * gain));
    let allocation = Allocation::evaluate(covariance, vec![time], vec![bits], params, channels)?;
    Ok(GridOracle {
        allocation,
        pass_objectives,
    })
}

/// Worst ratio `Σκf_n² / (M·κ(M/T)²)` over random frequency vectors that
/// exactly meet the deadline `Σ1/f_n = T`. Jensen's inequality bounds it
/// below by one.
pub fn jensen_sampler(cycles: usize, block_length: f64, capacitance: f64, samples: usize, rng: &mut impl Rng) -> f64 {
    assert!(cycles >= 1, "at least one cycle");
    let m = cycles as f64;
    let uniform_energy = m * capacitance * (m / block_length).powi(2);
    let mut worst = f64::INFINITY;
    let mut f = vec![0.0; cycles];
    for _ in 0..samples {
        for v in f.iter_mut() {
            *v = rng.random_range(-3.0f64..3.0).exp();
        }
        let time: f64 = f.iter().map(|v| 1.0 / v).sum();
        let scale = time / block_length;
        let energy: f64 = f.iter().map(|v| capacitance * (v * scale).powi(2)).sum();
        worst = worst.min(energy / uniform_energy);
    }
    worst
}

/// Checks `Φ(point) ≤ objective` against `n` random feasible allocations.
///
/// Each allocation draws `ℓ_i` uniformly in `[ℓ_min, R_i]`, slots from a
/// random point of the scaled simplex, and the covariance
/// `Σ_i c_i/(Tζ‖h_i‖²)·ĥ_iĥ_iᴴ`, which covers every user by its own beam.
pub fn weak_duality_sampler(
    params: &SystemParams,
    channels: &ChannelSet,
    point: &DualPoint,
    n: usize,
    rng: &mut impl Rng,
) -> Result<bool> {
    let phi = dual_function(point, params, channels)?.value;
    let k = params.num_users();
    let t_blk = params.block_length;
    for _ in 0..n {
        let weights: Vec<f64> = (0..k).map(|_| -rng.random_range(1e-12f64..1.0).ln()).collect();
        let total: f64 = weights.iter().sum();
        let fill = rng.random_range(0.05f64..1.0);
        let mut q = HermitianMatrix::zeros(params.antennas);
        let mut time = Vec::with_capacity(k);
        let mut bits = Vec::with_capacity(k);
        for (i, user) in params.users.iter().enumerate() {
            let l_min = user.min_offload_bits(t_blk);
            let l = if user.task_bits > 0.0 {
                l_min + (user.task_bits - l_min) * rng.random_range(0.0f64..=1.0)
            } else {
                0.0
            };
            let t = fill * t_blk * weights[i] / total;
            let c = local_energy(l, user, t_blk).energy
                + offload_energy(t, l, channels.uplink_gain(i), user.circuit_power, params);
            if c > 0.0 {
                let gain = channels.downlink_gain(i);
                let beam = channels
                    .downlink(i)
                    .normalized()
                    .ok_or_else(|| Error::Infeasible(format!("user {} has a zero downlink", i + 1)))?;
                q = q.add_outer(c / (t_blk * params.eh_efficiency * gain), &beam);
            }
            time.push(t);
            bits.push(l);
        }
        let alloc = Allocation::evaluate(q, time, bits, params, channels)?;
        if phi > alloc.objective * (1.0 + 1e-12) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Dual of the covariance SDP, `max Σν_i c_i` s.t. `I − ζΣν_iH_i ⪰ 0`,
/// `ν ≥ 0`, solved by the ellipsoid method with the PSD cut.
struct CovarianceDual<'a> {
    /// Energy requirements `c_i`.
    weights: Vec<f64>,
    channels: &'a ChannelSet,
    eh_efficiency: f64,
    upper: Vec<f64>,
}

impl DualProblem for CovarianceDual<'_> {
    fn dim(&self) -> usize {
        self.weights.len()
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn check_constraints(&self, z: &[f64]) -> Result<ConstraintCheck> {
        let cut = psd_constraint_cut(z, self.channels, self.eh_efficiency)?;
        if cut.margin >= -PSD_TOLERANCE {
            return Ok(ConstraintCheck {
                margin: cut.margin,
                cut: None,
            });
        }
        Ok(ConstraintCheck {
            margin: cut.margin,
            cut: Some(Cut {
                kind: CutKind::PsdConstraint,
                g: cut.vector[..z.len()].to_vec(),
                offset: -cut.margin,
            }),
        })
    }

    fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
        Ok(Evaluation {
            value: self.weights.iter().zip(z).map(|(w, v)| w * v.max(0.0)).sum(),
            supergradient: self.weights.clone(),
        })
    }
}

/// Minimum `T·tr(Q)` of the covariance SDP, computed from its dual without
/// the barrier solver. Strong duality makes the two values equal.
pub fn sdp_dual_ellipsoid(requirements: &[f64], channels: &ChannelSet, eh_efficiency: f64, tol: f64) -> Result<f64> {
    if requirements.len() != channels.num_users() {
        return Err(Error::Dimension("one requirement per user".into()));
    }
    let mut upper = Vec::with_capacity(requirements.len());
    for (i, c) in requirements.iter().enumerate() {
        let gain = channels.downlink_gain(i);
        if gain > 0.0 {
            upper.push(1.0 / (eh_efficiency * gain));
        } else if *c > 0.0 {
            return Err(Error::Infeasible(format!("user {} needs energy but has a zero downlink", i + 1)));
        } else {
            upper.push(1.0);
        }
    }
    let problem = CovarianceDual {
        weights: requirements.to_vec(),
        channels,
        eh_efficiency,
        upper,
    };
    let options = EllipsoidOptions {
        tol,
        ..Default::default()
    };
    Ok(maximize(&problem, &options)?.best_value)
}
