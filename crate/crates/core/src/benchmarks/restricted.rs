//! Schemes that keep a dual search: offloading only, isotropic energy
//! transmission and equal offloading slots.

use std::f64::consts::LN_2;

use super::{check_reachable, finish, requirements, within_gap, SchemeId, SchemeResult};
use crate::dual_solver::{
    active_users, dual_function_unchecked, maximize, psd_constraint_cut, ConstraintCheck, Cut, CutKind, DualPoint,
    DualProblem, EllipsoidOutcome, Evaluation, StopReason, LAMBDA_ZERO_RATIO, PSD_TOLERANCE,
};
use crate::error::Result;
use crate::model::{offload_energy, Allocation, ChannelSet, SystemParams, UserParams};
use crate::numerics::HermitianMatrix;
use crate::primal_recovery::{polish_mu, polish_time_multiplier, recovery_lambda, SdpStatus};
use crate::subproblem::{offload_rate_star, user_energy_requirement, UserSubSolution};
use crate::SolveOptions;

/// Expands reduced coordinates `(λ_active[, μ])` into a full dual point.
fn expand(z: &[f64], active: &[usize], users: usize, with_mu: bool) -> DualPoint {
    let mut lambda = vec![0.0; users];
    for (k, &i) in active.iter().enumerate() {
        lambda[i] = z[k].max(0.0);
    }
    let mu = if with_mu { z[active.len()].max(0.0) } else { 0.0 };
    DualPoint { lambda, mu }
}

/// `μ` bound from weak duality at a strictly time-feasible primal point
/// `(ℓ⁰, t⁰)`: `μ ≤ (Σ_i b_i c_i(ℓ⁰, t⁰) + αΣℓ⁰ − Φ_lb) / (T − Σt⁰)`.
fn mu_bound(
    params: &SystemParams,
    channels: &ChannelSet,
    active: &[usize],
    lambda_upper: &[f64],
    bits0: impl Fn(&UserParams) -> f64,
    dual_lower_bound: f64,
) -> f64 {
    let t_blk = params.block_length;
    let time0 = t_blk / (2.0 * active.len().max(1) as f64);
    let mut numerator = -dual_lower_bound;
    let mut used = 0.0;
    for (k, &i) in active.iter().enumerate() {
        let user = &params.users[i];
        let bits = bits0(user);
        let time = if bits > 0.0 { time0 } else { 0.0 };
        used += time;
        numerator += params.ap_energy_per_bit * bits
            + lambda_upper[k] * user_energy_requirement(bits, time, user, channels.uplink_gain(i), params);
    }
    let mu = numerator / (t_blk - used);
    if mu > 0.0 && mu.is_finite() {
        mu
    } else {
        1.0
    }
}

fn psd_check(lambda: &[f64], active: &[usize], channels: &ChannelSet, zeta: f64, with_mu: bool) -> Result<ConstraintCheck> {
    let cut = psd_constraint_cut(lambda, channels, zeta)?;
    if cut.margin >= -PSD_TOLERANCE {
        return Ok(ConstraintCheck {
            margin: cut.margin,
            cut: None,
        });
    }
    let mut g: Vec<f64> = active.iter().map(|&i| cut.vector[i]).collect();
    if with_mu {
        g.push(0.0);
    }
    Ok(ConstraintCheck {
        margin: cut.margin,
        cut: Some(Cut {
            kind: CutKind::PsdConstraint,
            g,
            offset: -cut.margin,
        }),
    })
}

fn dual_status(out: &EllipsoidOutcome, sdp: SdpStatus, primal: f64, dual: f64) -> (bool, String) {
    let ok = out.stop == StopReason::Converged && sdp == SdpStatus::Optimal && within_gap(primal, dual);
    let gap = super::relative_gap(primal, dual);
    (ok, format!("gap={gap:.3e} iterations={}", out.iterations))
}

/// Per-user minimizer with `ℓ = R` fixed:
/// `min_t αR + λ[(t/g̃)β(R/t) + p_c t] + μt`.
///
/// At `λ = 0` the infimum pushes `t → 0`; the returned slot is zero and the
/// energy requirement infinite.
pub fn offload_only_subproblem(
    lambda: f64,
    mu: f64,
    user: &UserParams,
    uplink_gain: f64,
    params: &SystemParams,
) -> Result<UserSubSolution> {
    let bits = user.task_bits;
    if bits == 0.0 {
        return Ok(UserSubSolution::ZERO);
    }
    let alpha_bits = params.ap_energy_per_bit * bits;
    if lambda == 0.0 {
        return Ok(UserSubSolution {
            time: 0.0,
            bits,
            rate: f64::INFINITY,
            value: alpha_bits,
        });
    }
    let rate = offload_rate_star(
        lambda,
        mu,
        uplink_gain,
        user.circuit_power,
        params.noise_power,
        params.bandwidth,
    )?;
    let time = bits / rate;
    let value = alpha_bits + lambda * offload_energy(time, bits, uplink_gain, user.circuit_power, params) + mu * time;
    Ok(UserSubSolution {
        time,
        bits,
        rate,
        value,
    })
}

struct OffloadOnlyDual<'a> {
    params: &'a SystemParams,
    channels: &'a ChannelSet,
    active: Vec<usize>,
    upper: Vec<f64>,
}

impl OffloadOnlyDual<'_> {
    fn subsolutions(&self, point: &DualPoint) -> Result<Vec<UserSubSolution>> {
        offload_subsolutions(&point.effective_lambda(), point.mu, self.params, self.channels)
    }
}

fn offload_subsolutions(lambda: &[f64], mu: f64, params: &SystemParams, channels: &ChannelSet) -> Result<Vec<UserSubSolution>> {
    params
        .users
        .iter()
        .enumerate()
        .map(|(i, user)| offload_only_subproblem(lambda[i], mu, user, channels.uplink_gain(i), params))
        .collect()
}

fn offload_dual_value(subs: &[UserSubSolution], mu: f64, block_length: f64) -> f64 {
    -mu * block_length + subs.iter().map(|s| s.value).sum::<f64>()
}

impl DualProblem for OffloadOnlyDual<'_> {
    fn dim(&self) -> usize {
        self.active.len() + 1
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn check_constraints(&self, z: &[f64]) -> Result<ConstraintCheck> {
        let point = expand(z, &self.active, self.params.num_users(), true);
        psd_check(&point.lambda, &self.active, self.channels, self.params.eh_efficiency, true)
    }

    fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
        let point = expand(z, &self.active, self.params.num_users(), true);
        let subs = self.subsolutions(&point)?;
        let value = offload_dual_value(&subs, point.mu, self.params.block_length);
        let req = requirements(&subs, self.params, self.channels);
        let mut supergradient: Vec<f64> = self.active.iter().map(|&i| req[i]).collect();
        supergradient.push(subs.iter().map(|s| s.time).sum::<f64>() - self.params.block_length);
        Ok(Evaluation { value, supergradient })
    }
}

/// All bits are offloaded: `ℓ = R`, no local computing.
pub(crate) fn offload_only(params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SchemeResult> {
    let active = active_users(params);
    check_reachable(params, channels)?;
    let k = params.num_users();
    if active.is_empty() {
        let alloc = Allocation::zero(params, channels)?;
        return Ok(SchemeResult::solved(SchemeId::OffloadOnly, alloc, true, String::new()));
    }
    let mut upper: Vec<f64> = active
        .iter()
        .map(|&i| 1.0 / (params.eh_efficiency * channels.downlink_gain(i)))
        .collect();
    // Φ(0, 0) = αΣR.
    let alpha_total: f64 = params.users.iter().map(|u| params.ap_energy_per_bit * u.task_bits).sum();
    upper.push(mu_bound(params, channels, &active, &upper, |u| u.task_bits, alpha_total));
    let problem = OffloadOnlyDual {
        params,
        channels,
        active,
        upper,
    };
    let out = maximize(&problem, &options.ellipsoid())?;
    let best = expand(&out.best_point, &problem.active, k, true);

    let mut lambda = best.effective_lambda();
    let max = lambda.iter().copied().fold(0.0, f64::max);
    for &i in &problem.active {
        if lambda[i] == 0.0 {
            lambda[i] = (LAMBDA_ZERO_RATIO * max).max(f64::MIN_POSITIVE);
        }
    }
    let mu = polish_time_multiplier(
        |mu| Ok(offload_subsolutions(&lambda, mu, params, channels)?.iter().map(|s| s.time).sum()),
        best.mu,
        params.block_length,
    )?;
    let subs = offload_subsolutions(&lambda, mu, params, channels)?;
    let req = requirements(&subs, params, channels);
    let (alloc, sdp) = finish(
        &req,
        subs.iter().map(|s| s.time).collect(),
        subs.iter().map(|s| s.bits).collect(),
        params,
        channels,
        options,
    )?;
    let polished = DualPoint {
        lambda: best.lambda.clone(),
        mu,
    };
    let polished_value = offload_dual_value(&problem.subsolutions(&polished)?, mu, params.block_length);
    let (ok, diag) = dual_status(&out, sdp, alloc.objective, out.best_value.max(polished_value));
    Ok(SchemeResult::solved(SchemeId::OffloadOnly, alloc, ok, diag))
}

struct IsotropicDual<'a> {
    params: &'a SystemParams,
    channels: &'a ChannelSet,
    active: Vec<usize>,
    upper: Vec<f64>,
}

/// `N − ζΣλ_i‖h_i‖²`, the trace of `F(λ)`.
fn trace_margin(lambda: &[f64], params: &SystemParams, channels: &ChannelSet) -> f64 {
    params.antennas as f64
        - params.eh_efficiency
            * lambda
                .iter()
                .enumerate()
                .map(|(i, l)| l * channels.downlink_gain(i))
                .sum::<f64>()
}

impl DualProblem for IsotropicDual<'_> {
    fn dim(&self) -> usize {
        self.active.len() + 1
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn check_constraints(&self, z: &[f64]) -> Result<ConstraintCheck> {
        let point = expand(z, &self.active, self.params.num_users(), true);
        let margin = trace_margin(&point.lambda, self.params, self.channels);
        if margin >= -PSD_TOLERANCE {
            return Ok(ConstraintCheck { margin, cut: None });
        }
        let mut g: Vec<f64> = self
            .active
            .iter()
            .map(|&i| self.params.eh_efficiency * self.channels.downlink_gain(i))
            .collect();
        g.push(0.0);
        Ok(ConstraintCheck {
            margin,
            cut: Some(Cut {
                kind: CutKind::PsdConstraint,
                g,
                offset: -margin,
            }),
        })
    }

    fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
        let point = expand(z, &self.active, self.params.num_users(), true);
        let dv = dual_function_unchecked(&point, self.params, self.channels)?;
        let req = requirements(&dv.subsolutions, self.params, self.channels);
        let mut supergradient: Vec<f64> = self.active.iter().map(|&i| req[i]).collect();
        supergradient.push(dv.subsolutions.iter().map(|s| s.time).sum::<f64>() - self.params.block_length);
        Ok(Evaluation {
            value: dv.value,
            supergradient,
        })
    }
}

/// Isotropic energy transmission `Q = pI`.
pub(crate) fn isotropic_wpt(params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SchemeResult> {
    let active = active_users(params);
    check_reachable(params, channels)?;
    let k = params.num_users();
    if active.is_empty() {
        let alloc = Allocation::zero(params, channels)?;
        return Ok(SchemeResult::solved(SchemeId::Isotropic, alloc, true, String::new()));
    }
    let n = params.antennas as f64;
    let mut upper: Vec<f64> = active
        .iter()
        .map(|&i| n / (params.eh_efficiency * channels.downlink_gain(i)))
        .collect();
    let t_blk = params.block_length;
    upper.push(mu_bound(params, channels, &active, &upper, |u| u.min_offload_bits(t_blk), 0.0));
    let problem = IsotropicDual {
        params,
        channels,
        active,
        upper,
    };
    let out = maximize(&problem, &options.ellipsoid())?;
    let best = expand(&out.best_point, &problem.active, k, true);

    let lambda = recovery_lambda(&best, params);
    let mu = polish_mu(&lambda, best.mu, params, channels)?;
    let polished = DualPoint {
        lambda: best.lambda.clone(),
        mu,
    };
    let subs: Vec<UserSubSolution> = {
        let point = DualPoint { lambda, mu };
        dual_function_unchecked(&point, params, channels)?.subsolutions
    };
    let req = requirements(&subs, params, channels);
    let power = req
        .iter()
        .enumerate()
        .filter(|(_, c)| **c > 0.0)
        .map(|(i, c)| c / (t_blk * params.eh_efficiency * channels.downlink_gain(i)))
        .fold(0.0, f64::max);
    let alloc = Allocation::evaluate(
        HermitianMatrix::scaled_identity(params.antennas, power),
        subs.iter().map(|s| s.time).collect(),
        subs.iter().map(|s| s.bits).collect(),
        params,
        channels,
    )?;
    let polished_value = dual_function_unchecked(&polished, params, channels)?.value;
    let (ok, diag) = dual_status(&out, SdpStatus::Optimal, alloc.objective, out.best_value.max(polished_value));
    Ok(SchemeResult::solved(SchemeId::Isotropic, alloc, ok, diag))
}

/// Minimizer of `αℓ + λ[κC³(R − ℓ)³/T² + (t/g̃)β(ℓ/t)]` over `[ℓ_min, R]`
/// for a fixed slot `t > 0`. The derivative is increasing in `ℓ`; its root
/// is found by safeguarded Newton steps.
pub fn equal_time_bits(lambda: f64, time: f64, user: &UserParams, uplink_gain: f64, params: &SystemParams) -> f64 {
    let t_blk = params.block_length;
    let r_task = user.task_bits;
    let l_min = user.min_offload_bits(t_blk);
    if lambda == 0.0 || r_task == 0.0 || time <= 0.0 {
        return l_min;
    }
    let cubic = 3.0 * lambda * user.capacitance * user.cycles_per_bit.powi(3) / (t_blk * t_blk);
    let slope = |l: f64| {
        params.ap_energy_per_bit - cubic * (r_task - l) * (r_task - l) + lambda * params.beta_prime(l / time) / uplink_gain
    };
    let curvature = |l: f64| {
        2.0 * cubic * (r_task - l) + lambda * params.beta_prime(l / time) * LN_2 / (params.bandwidth * time * uplink_gain)
    };
    if slope(l_min) >= 0.0 {
        return l_min;
    }
    let (mut lo, mut hi) = (l_min, r_task);
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let d = slope(x);
        if d == 0.0 {
            return x;
        }
        if d > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let step = d / curvature(x);
        let newton = x - step;
        let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 4.0 * f64::EPSILON * r_task || hi - lo <= 4.0 * f64::EPSILON * r_task {
            return next;
        }
        x = next;
    }
    x
}

struct EqualTimeDual<'a> {
    params: &'a SystemParams,
    channels: &'a ChannelSet,
    active: Vec<usize>,
    slots: Vec<f64>,
    upper: Vec<f64>,
}

impl EqualTimeDual<'_> {
    /// Per-user bits and the dual value at `λ`.
    fn solve_users(&self, lambda: &[f64]) -> (Vec<f64>, f64) {
        let mut value = 0.0;
        let bits: Vec<f64> = self
            .params
            .users
            .iter()
            .enumerate()
            .map(|(i, user)| {
                if user.task_bits == 0.0 {
                    return 0.0;
                }
                let g = self.channels.uplink_gain(i);
                let l = equal_time_bits(lambda[i], self.slots[i], user, g, self.params);
                let c = user_energy_requirement(l, self.slots[i], user, g, self.params);
                value += self.params.ap_energy_per_bit * l + if lambda[i] == 0.0 { 0.0 } else { lambda[i] * c };
                l
            })
            .collect();
        (bits, value)
    }

    fn requirements(&self, bits: &[f64]) -> Vec<f64> {
        self.params
            .users
            .iter()
            .enumerate()
            .map(|(i, user)| {
                if user.task_bits == 0.0 {
                    0.0
                } else {
                    user_energy_requirement(bits[i], self.slots[i], user, self.channels.uplink_gain(i), self.params)
                }
            })
            .collect()
    }
}

impl DualProblem for EqualTimeDual<'_> {
    fn dim(&self) -> usize {
        self.active.len()
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn check_constraints(&self, z: &[f64]) -> Result<ConstraintCheck> {
        let point = expand(z, &self.active, self.params.num_users(), false);
        psd_check(&point.lambda, &self.active, self.channels, self.params.eh_efficiency, false)
    }

    fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
        let point = expand(z, &self.active, self.params.num_users(), false);
        let (bits, value) = self.solve_users(&point.effective_lambda());
        let req = self.requirements(&bits);
        Ok(Evaluation {
            value,
            supergradient: self.active.iter().map(|&i| req[i]).collect(),
        })
    }
}

/// Every user with a task gets the same slot `T/K'`, where `K'` counts the
/// users with a task; the circuit power is spent over the whole slot.
pub(crate) fn equal_time(params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SchemeResult> {
    let active = active_users(params);
    check_reachable(params, channels)?;
    let k = params.num_users();
    if active.is_empty() {
        let alloc = Allocation::zero(params, channels)?;
        return Ok(SchemeResult::solved(SchemeId::EqualTime, alloc, true, String::new()));
    }
    let slot = params.block_length / active.len() as f64;
    let slots: Vec<f64> = params
        .users
        .iter()
        .map(|u| if u.task_bits > 0.0 { slot } else { 0.0 })
        .collect();
    let upper = active
        .iter()
        .map(|&i| 1.0 / (params.eh_efficiency * channels.downlink_gain(i)))
        .collect();
    let problem = EqualTimeDual {
        params,
        channels,
        active,
        slots,
        upper,
    };
    let out = maximize(&problem, &options.ellipsoid())?;
    let best = expand(&out.best_point, &problem.active, k, false);
    let (bits, _) = problem.solve_users(&best.effective_lambda());
    let req = problem.requirements(&bits);
    let (alloc, sdp) = finish(&req, problem.slots.clone(), bits, params, channels, options)?;
    let (ok, diag) = dual_status(&out, sdp, alloc.objective, out.best_value);
    Ok(SchemeResult::solved(SchemeId::EqualTime, alloc, ok, diag))
}
