//! Primal recovery from a dual point: closed-form `(ℓ, t, f)` followed by the
//! minimum-power energy covariance, plus KKT diagnostics.

mod sdp;

pub use sdp::{solve_wpt_sdp, SdpSolution, SdpStatus};

use crate::dual_solver::{dual_function, DualPoint, LAMBDA_ZERO_RATIO};
use crate::error::Result;
use crate::model::{check_feasible, Allocation, ChannelSet, SystemParams};
use crate::subproblem::{user_energy_requirement, user_subproblem, UserSubSolution};

/// Default relative duality-gap target of the covariance SDP. Multipliers
/// estimated from a barrier iterate lose accuracy not far below this.
pub const SDP_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct Recovery {
    pub allocation: Allocation,
    /// Dual point with `μ` re-tuned so the recovered slots fill the block.
    pub polished: DualPoint,
    /// `Φ` at the polished point.
    pub polished_value: f64,
    /// Energy each user must harvest, `c_i`.
    pub requirements: Vec<f64>,
    pub sdp: SdpSolution,
}

/// Multipliers used for recovery: tiny entries are zeroed, except for users
/// whose CPU limit forces offloading, which need a positive multiplier.
pub(crate) fn recovery_lambda(dual: &DualPoint, params: &SystemParams) -> Vec<f64> {
    let mut lambda = dual.effective_lambda();
    let max = dual.lambda.iter().copied().fold(0.0, f64::max);
    for (l, user) in lambda.iter_mut().zip(&params.users) {
        if *l == 0.0 && user.task_bits > 0.0 && user.min_offload_bits(params.block_length) > 0.0 {
            *l = (LAMBDA_ZERO_RATIO * max).max(f64::MIN_POSITIVE);
        }
    }
    lambda
}

fn subsolutions(lambda: &[f64], mu: f64, params: &SystemParams, channels: &ChannelSet) -> Result<Vec<UserSubSolution>> {
    params
        .users
        .iter()
        .enumerate()
        .map(|(i, user)| user_subproblem(lambda[i], mu, user, channels.uplink_gain(i), params))
        .collect()
}

fn total_time(subs: &[UserSubSolution]) -> f64 {
    subs.iter().map(|s| s.time).sum()
}

/// Smallest `μ` whose per-user slots fit in the block. `Σt*(λ, μ)` is
/// non-increasing in `μ`.
pub fn polish_mu(lambda: &[f64], mu_hint: f64, params: &SystemParams, channels: &ChannelSet) -> Result<f64> {
    polish_time_multiplier(
        |mu| Ok(total_time(&subsolutions(lambda, mu, params, channels)?)),
        mu_hint,
        params.block_length,
    )
}

/// Bisection for the smallest `μ ≥ 0` with `total_time(μ) ≤ block_length`,
/// where `total_time` is non-increasing.
pub(crate) fn polish_time_multiplier(
    total_time: impl Fn(f64) -> Result<f64>,
    mu_hint: f64,
    block_length: f64,
) -> Result<f64> {
    if total_time(0.0)? <= block_length {
        return Ok(0.0);
    }
    let mut lo = 0.0;
    let mut hi = if mu_hint > 0.0 { mu_hint } else { 1e-12 };
    while total_time(hi)? > block_length {
        lo = hi;
        hi *= 2.0;
        if !hi.is_finite() {
            return Ok(lo);
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total_time(mid)? > block_length {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}

/// Assembles the primal solution attached to a dual point.
pub fn recover_primal(dual: &DualPoint, params: &SystemParams, channels: &ChannelSet, sdp_tol: f64) -> Result<Recovery> {
    params.validate()?;
    channels.check_dims(params)?;
    let lambda = recovery_lambda(dual, params);
    let mu = polish_mu(&lambda, dual.mu, params, channels)?;
    let subs = subsolutions(&lambda, mu, params, channels)?;
    let requirements: Vec<f64> = subs
        .iter()
        .zip(&params.users)
        .enumerate()
        .map(|(i, (s, user))| {
            if user.task_bits == 0.0 {
                0.0
            } else {
                user_energy_requirement(s.bits, s.time, user, channels.uplink_gain(i), params)
            }
        })
        .collect();
    let sdp = solve_wpt_sdp(&requirements, channels, params.block_length, params.eh_efficiency, sdp_tol)?;
    let allocation = Allocation::evaluate(
        sdp.covariance.clone(),
        subs.iter().map(|s| s.time).collect(),
        subs.iter().map(|s| s.bits).collect(),
        params,
        channels,
    )?;
    let allocation = reclaim_surplus(allocation, params, channels)?;
    let polished = DualPoint {
        lambda: dual.lambda.clone(),
        mu,
    };
    let polished_value = dual_function(&polished, params, channels)?.value;
    Ok(Recovery {
        allocation,
        polished,
        polished_value,
        requirements,
        sdp,
    })
}

/// Spends each user's surplus harvested energy on local computing.
///
/// With `Q` and `t` fixed, lowering `ℓ_i` raises the user's energy demand
/// wherever `∂c_i/∂ℓ < 0` and lowers the objective by `αΔℓ`. Each user with
/// a surplus moves to the smallest `ℓ ≥ ℓ_min` whose demand still fits.
pub fn reclaim_surplus(alloc: Allocation, params: &SystemParams, channels: &ChannelSet) -> Result<Allocation> {
    let t_blk = params.block_length;
    let mut bits = alloc.bits.clone();
    let mut changed = false;
    for (i, user) in params.users.iter().enumerate() {
        let (l, t) = (bits[i], alloc.time[i]);
        let l_min = user.min_offload_bits(t_blk);
        let available = alloc.energy[i].harvested;
        let g = channels.uplink_gain(i);
        let demand = |x: f64| user_energy_requirement(x, t, user, g, params);
        if user.task_bits == 0.0 || t <= 0.0 || l <= l_min || demand(l) >= available {
            continue;
        }
        let c3 = user.cycles_per_bit.powi(3);
        let slope = -3.0 * user.capacitance * c3 * (user.task_bits - l).powi(2) / (t_blk * t_blk)
            + params.beta_prime(l / t) / g;
        if slope >= 0.0 {
            continue;
        }
        // `demand` is convex with negative slope at `l`, so it decreases on [l_min, l].
        let target = if demand(l_min) <= available {
            l_min
        } else {
            let (mut lo, mut hi) = (l_min, l);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if demand(mid) <= available {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            hi
        };
        if target < l {
            bits[i] = target;
            changed = true;
        }
    }
    if !changed {
        return Ok(alloc);
    }
    Allocation::evaluate(alloc.covariance, alloc.time, bits, params, channels)
}

/// Optimality diagnostics of a primal/dual pair, in natural units.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    /// `λ_i·|E_i − E_loc,i − E_offl,i|` in J.
    pub eh_products: Vec<f64>,
    /// `μ·|T − Σt|` in J.
    pub time_product: f64,
    /// Residual of the `ℓ` stationarity condition in J/bit; sign-aware at
    /// the bounds of `ℓ`.
    pub bits_stationarity: Vec<f64>,
    /// Residual of the `t` stationarity condition in W, for `t_i > 0`.
    pub time_stationarity: Vec<f64>,
    /// Largest primal constraint violation.
    pub primal_violation: f64,
}

impl KktReport {
    /// Largest complementary-slackness product.
    pub fn max_product(&self) -> f64 {
        self.eh_products.iter().copied().fold(self.time_product, f64::max)
    }
}

pub fn kkt_residuals(alloc: &Allocation, dual: &DualPoint, params: &SystemParams, channels: &ChannelSet) -> KktReport {
    let t_blk = params.block_length;
    let lambda = dual.effective_lambda();
    let residual = alloc.residual_energy();
    let eh_products = lambda
        .iter()
        .zip(&residual)
        .map(|(l, r)| if *l == 0.0 { 0.0 } else { l * r.abs() })
        .collect();
    let time_product = dual.mu * (t_blk - alloc.time.iter().sum::<f64>()).abs();

    let mut bits_stationarity = Vec::with_capacity(lambda.len());
    let mut time_stationarity = Vec::with_capacity(lambda.len());
    for (i, user) in params.users.iter().enumerate() {
        let (l, t, lam) = (alloc.bits[i], alloc.time[i], lambda[i]);
        let g = channels.uplink_gain(i);
        if user.task_bits == 0.0 {
            bits_stationarity.push(0.0);
            time_stationarity.push(0.0);
            continue;
        }
        let rate = if t > 0.0 { l / t } else { 0.0 };
        let c3 = user.cycles_per_bit.powi(3);
        let local_bits = user.task_bits - l;
        let d_bits = params.ap_energy_per_bit - 3.0 * lam * user.capacitance * c3 * local_bits * local_bits / (t_blk * t_blk)
            + lam * params.beta_prime(rate) / g;
        let l_min = user.min_offload_bits(t_blk);
        let at_lower = l <= l_min;
        let at_upper = l >= user.task_bits;
        let r_bits = if at_lower && at_upper {
            0.0
        } else if at_lower {
            (-d_bits).max(0.0)
        } else if at_upper {
            d_bits.max(0.0)
        } else {
            d_bits.abs()
        };
        bits_stationarity.push(r_bits);
        let r_time = if t > 0.0 {
            (lam / g * (params.beta(rate) - rate * params.beta_prime(rate)) + lam * user.circuit_power + dual.mu).abs()
        } else {
            0.0
        };
        time_stationarity.push(r_time);
    }
    KktReport {
        eh_products,
        time_product,
        bits_stationarity,
        time_stationarity,
        primal_violation: check_feasible(alloc, params, channels).max_violation(),
    }
}
