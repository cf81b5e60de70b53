//! Closed-form per-user minimizers of the partial Lagrangian.

use std::f64::consts::LN_2;

use crate::error::{Error, Result};
use crate::model::{local_energy, offload_energy, SystemParams, UserParams};
use crate::numerics::w0_branch_offset;

/// Minimizer of one user's Lagrangian term and its value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UserSubSolution {
    /// Offloading time `t*` in s.
    pub time: f64,
    /// Offloaded bits `ℓ*`.
    pub bits: f64,
    /// Offloading rate `r*` in bits/s; infinite when bits are pushed through
    /// a zero-length slot.
    pub rate: f64,
    /// `αℓ + λ(E_loc + E_offl) + μt` at the minimizer.
    pub value: f64,
}

impl UserSubSolution {
    pub const ZERO: Self = Self {
        time: 0.0,
        bits: 0.0,
        rate: 0.0,
        value: 0.0,
    };
}

/// Constant CPU frequency `C(R − ℓ)/T`.
pub fn optimal_cpu_frequency(bits: f64, user: &UserParams, block_length: f64) -> f64 {
    user.cycles_per_bit * (user.task_bits - bits).max(0.0) / block_length
}

/// Solves `β(x) − xβ′(x) = y` for `x ≥ 0`, given `y ≤ 0`.
pub fn inverse_beta_gap(y: f64, noise_power: f64, bandwidth: f64) -> Result<f64> {
    if y.is_nan() || y > 0.0 {
        return Err(Error::Domain {
            function: "inverse_beta_gap",
            value: y,
        });
    }
    // With u = x ln2/B: β − xβ′ = σ²(eᵘ(1 − u) − 1), so 1 − (1 − u)eᵘ = −y/σ².
    Ok(bandwidth / LN_2 * w0_branch_offset(-y / noise_power)?)
}

/// Optimal offloading rate for `λ > 0`:
/// `r* = (B/ln2)·(W₀((g̃(μ/λ + p_c)/σ² − 1)/e) + 1)`.
pub fn offload_rate_star(
    lambda: f64,
    mu: f64,
    uplink_gain: f64,
    circuit_power: f64,
    noise_power: f64,
    bandwidth: f64,
) -> Result<f64> {
    if !(lambda > 0.0) || mu < 0.0 {
        return Err(Error::Contract(format!("offload_rate_star needs λ > 0 and μ ≥ 0, got ({lambda}, {mu})")));
    }
    let q = uplink_gain * (mu / lambda + circuit_power) / noise_power;
    if !(q > 0.0) {
        return Err(Error::Degenerate("zero offloading rate: circuit power and μ both vanish".into()));
    }
    inverse_beta_gap(-noise_power * q, noise_power, bandwidth)
}

/// Minimizes `αℓ + λ[κC³(R − ℓ)³/T² + (t/g̃)β(ℓ/t) + p_c t] + μt` over
/// `t ≥ 0`, `ℓ ∈ [ℓ_min, R]`.
///
/// For `λ = 0` with `ℓ_min > 0` and `μ > 0` the infimum is not attained;
/// the returned point pushes `ℓ_min` through a zero-length slot at infinite
/// rate, which callers read as an unbounded supergradient in `λ`.
pub fn user_subproblem(
    lambda: f64,
    mu: f64,
    user: &UserParams,
    uplink_gain: f64,
    params: &SystemParams,
) -> Result<UserSubSolution> {
    if !(lambda >= 0.0) || !(mu >= 0.0) {
        return Err(Error::Contract(format!("multipliers must be non-negative, got λ = {lambda}, μ = {mu}")));
    }
    let t_blk = params.block_length;
    let alpha = params.ap_energy_per_bit;
    let r_task = user.task_bits;
    if r_task == 0.0 {
        return Ok(UserSubSolution::ZERO);
    }
    let l_min = user.min_offload_bits(t_blk);

    if lambda == 0.0 {
        if l_min == 0.0 {
            return Ok(UserSubSolution::ZERO);
        }
        if mu > 0.0 {
            return Ok(UserSubSolution {
                time: 0.0,
                bits: l_min,
                rate: f64::INFINITY,
                value: alpha * l_min,
            });
        }
        // μ = 0: every slot length is optimal; take the λ → 0⁺ rate.
        let rate = inverse_beta_gap(
            -uplink_gain * user.circuit_power,
            params.noise_power,
            params.bandwidth,
        )?;
        return Ok(UserSubSolution {
            time: l_min / rate,
            bits: l_min,
            rate,
            value: alpha * l_min,
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
    let marginal = alpha / lambda + params.beta_prime(rate) / uplink_gain;
    let c = user.cycles_per_bit;
    let kept = (t_blk * t_blk / (3.0 * user.capacitance * c * c * c) * marginal).sqrt();
    let bits = (r_task - kept).max(0.0).clamp(l_min, r_task);
    let time = if bits > 0.0 { bits / rate } else { 0.0 };
    let value = subproblem_value(lambda, mu, bits, time, user, uplink_gain, params);
    Ok(UserSubSolution {
        time,
        bits,
        rate,
        value,
    })
}

/// Objective of the per-user subproblem at an arbitrary `(t, ℓ)`.
pub fn subproblem_value(
    lambda: f64,
    mu: f64,
    bits: f64,
    time: f64,
    user: &UserParams,
    uplink_gain: f64,
    params: &SystemParams,
) -> f64 {
    let energy = user_energy_requirement(bits, time, user, uplink_gain, params);
    let weighted = if lambda == 0.0 && energy.is_finite() { 0.0 } else { lambda * energy };
    params.ap_energy_per_bit * bits + weighted + mu * time
}

/// `κC³(R − ℓ)³/T² + (t/g̃)β(ℓ/t) + p_c t`: the energy a user must harvest.
pub fn user_energy_requirement(bits: f64, time: f64, user: &UserParams, uplink_gain: f64, params: &SystemParams) -> f64 {
    local_energy(bits, user, params.block_length).energy
        + offload_energy(time, bits, uplink_gain, user.circuit_power, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::beta;
    use proptest::prelude::*;

    const SIGMA2: f64 = 1e-9;
    const BW: f64 = 2e6;

    fn params(block: f64) -> SystemParams {
        SystemParams::homogeneous(1, block, UserParams::with_task(1e4))
    }

    fn gap(x: f64) -> f64 {
        beta(x, SIGMA2, BW) - x * crate::model::beta_prime(x, SIGMA2, BW)
    }

    /// Root of `β(r) − rβ′(r) = target` by bisection; the left side is
    /// decreasing in `r`.
    fn bisect_gap(target: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, 1e9);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if gap(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn cpu_frequency_cases() {
        let user = UserParams::with_task(1e4);
        assert_eq!(optimal_cpu_frequency(1e4, &user, 1.0), 0.0);
        assert!((optimal_cpu_frequency(0.0, &user, 1.0) - 1e7).abs() < 1e-6);
        assert!((optimal_cpu_frequency(5e3, &user, 1.0) - 5e6).abs() < 1e-6);
    }

    #[test]
    fn rate_at_unit_argument() {
        // g̃(μ/λ + p_c)/σ² = 1 gives W₀(0) = 0.
        let r = offload_rate_star(1.0, 0.0, 1e-5, 1e-4, SIGMA2, BW).unwrap();
        assert!((r - BW / LN_2).abs() < 1e-6);
    }

    #[test]
    fn rate_vanishes_with_circuit_power() {
        let r = offload_rate_star(1.0, 0.0, 5e-6, 1e-18, SIGMA2, BW).unwrap();
        assert!(r > 0.0 && r < 1e-3 * BW);
    }

    #[test]
    fn rate_matches_bisection_on_stationarity() {
        for &(mu_over_lambda, g) in &[(0.0, 5e-6), (1e-6, 5e-6), (1e-2, 2e-5), (0.0, 1e-7)] {
            let r = offload_rate_star(1.0, mu_over_lambda, g, 1e-4, SIGMA2, BW).unwrap();
            let oracle = bisect_gap(-g * (mu_over_lambda + 1e-4));
            assert!((r - oracle).abs() <= 1e-9 * oracle, "{r} vs {oracle}");
        }
    }

    #[test]
    fn inverse_gap_cases() {
        assert_eq!(inverse_beta_gap(0.0, SIGMA2, BW).unwrap(), 0.0);
        assert!(inverse_beta_gap(1e-12, SIGMA2, BW).is_err());
        let x = inverse_beta_gap(-SIGMA2, SIGMA2, BW).unwrap();
        assert!((x - BW / LN_2).abs() < 1e-6);
        assert!((gap(x) + SIGMA2).abs() < 1e-9 * SIGMA2);
    }

    #[test]
    fn zero_multiplier_keeps_everything_local() {
        let p = params(1.0);
        let s = user_subproblem(0.0, 1e-3, &p.users[0], 5e-6, &p).unwrap();
        assert_eq!((s.time, s.bits, s.value), (0.0, 0.0, 0.0));
    }

    #[test]
    fn large_multiplier_still_keeps_local_bits() {
        let p = params(0.1);
        let user = &p.users[0];
        let g = 5e-6;
        let lambda = 1e12;
        let s = user_subproblem(lambda, 0.0, user, g, &p).unwrap();
        let c3 = 1e9;
        let floor = (0.01 * SIGMA2 * LN_2 / (BW * g) * 2f64.powf(s.rate / BW) / (3.0 * 1e-28 * c3)).sqrt();
        assert!(floor < user.task_bits);
        assert!(s.bits < user.task_bits);
        assert!((user.task_bits - s.bits) >= floor * (1.0 - 1e-9));
    }

    /// Minimizes the subproblem on a grid over `t ∈ (0, 2T]`, `ℓ ∈ [0, R]`,
    /// zooming twice around the best cell.
    fn grid_minimum(lambda: f64, mu: f64, user: &UserParams, g: f64, p: &SystemParams) -> f64 {
        let (mut t_lo, mut t_hi) = (0.0, 2.0 * p.block_length);
        let (mut l_lo, mut l_hi) = (0.0, user.task_bits);
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for _ in 0..3 {
            let n = 400;
            for a in 0..=n {
                let t = t_lo + (t_hi - t_lo) * a as f64 / n as f64;
                if t <= 0.0 {
                    continue;
                }
                for b in 0..=n {
                    let l = l_lo + (l_hi - l_lo) * b as f64 / n as f64;
                    let v = subproblem_value(lambda, mu, l, t, user, g, p);
                    if v < best.0 {
                        best = (v, t, l);
                    }
                }
            }
            let (dt, dl) = ((t_hi - t_lo) / 40.0, (l_hi - l_lo) / 40.0);
            t_lo = (best.1 - dt).max(0.0);
            t_hi = best.1 + dt;
            l_lo = (best.2 - dl).max(0.0);
            l_hi = (best.2 + dl).min(user.task_bits);
        }
        best.0.min(subproblem_value(lambda, mu, 0.0, 0.0, user, g, p))
    }

    #[test]
    fn closed_form_matches_grid_search() {
        let p = params(1.0);
        let user = &p.users[0];
        let (lambda, mu, g) = (1e4, 1e-2, 5e-6);
        let s = user_subproblem(lambda, mu, user, g, &p).unwrap();
        let grid = grid_minimum(lambda, mu, user, g, &p);
        assert!(s.value <= grid * (1.0 + 1e-9));
        assert!((s.value - grid).abs() <= 1e-3 * grid);
    }

    #[test]
    fn stationarity_holds_at_interior_solution() {
        let p = params(0.2);
        let user = &p.users[0];
        let (lambda, mu, g) = (1e6, 3e-2, 5e-6);
        let s = user_subproblem(lambda, mu, user, g, &p).unwrap();
        assert!(s.bits > 0.0 && s.bits < user.task_bits);
        let r = s.bits / s.time;
        let c3 = user.cycles_per_bit.powi(3);
        let d_bits = p.ap_energy_per_bit - 3.0 * lambda * user.capacitance * c3 * (user.task_bits - s.bits).powi(2)
            / (p.block_length * p.block_length)
            + lambda * p.beta_prime(r) / g;
        let d_time = lambda / g * (p.beta(r) - r * p.beta_prime(r)) + lambda * user.circuit_power + mu;
        assert!(d_bits.abs() <= 1e-8 * p.ap_energy_per_bit, "{d_bits}");
        assert!(d_time.abs() <= 1e-8 * (lambda * user.circuit_power + mu), "{d_time}");
    }

    #[test]
    fn cpu_limit_forces_offloading() {
        let mut p = params(1.0);
        p.users[0].max_frequency = 2e6;
        let user = p.users[0].clone();
        let s = user_subproblem(1e-3, 0.0, &user, 5e-6, &p).unwrap();
        assert!(s.bits >= user.min_offload_bits(1.0) - 1e-9);
        let idle = user_subproblem(0.0, 1.0, &user, 5e-6, &p).unwrap();
        assert!(idle.rate.is_infinite() && idle.time == 0.0);
        assert!((idle.bits - 8e3).abs() < 1e-9);
    }

    #[test]
    fn rejects_negative_multipliers() {
        let p = params(1.0);
        assert!(matches!(user_subproblem(-1.0, 0.0, &p.users[0], 5e-6, &p), Err(Error::Contract(_))));
        assert!(user_subproblem(1.0, -1.0, &p.users[0], 5e-6, &p).is_err());
    }

    fn solve(lambda: f64, mu: f64, g: f64, pc: f64, alpha: f64, block: f64) -> UserSubSolution {
        let mut p = params(block);
        p.ap_energy_per_bit = alpha;
        p.users[0].circuit_power = pc;
        let user = p.users[0].clone();
        user_subproblem(lambda, mu, &user, g, &p).unwrap()
    }

    proptest! {
        #[test]
        fn inverse_gap_round_trip(x in 1e-3f64..2e7) {
            let back = inverse_beta_gap(gap(x), SIGMA2, BW).unwrap();
            prop_assert!((back - x).abs() <= 1e-9 * x);
        }

        #[test]
        fn bits_grow_and_rate_falls_with_lambda(
            l1 in 1e2f64..1e7, f in 1.0f64..100.0, mu in 0.0f64..1e-1,
        ) {
            let a = solve(l1, mu, 5e-6, 1e-4, 1e-4, 0.1);
            let b = solve(l1 * f, mu, 5e-6, 1e-4, 1e-4, 0.1);
            prop_assert!(b.bits >= a.bits * (1.0 - 1e-12));
            prop_assert!(b.rate <= a.rate * (1.0 + 1e-12));
        }

        #[test]
        fn better_channel_offloads_more(lambda in 1e3f64..1e7, g in 1e-7f64..1e-4, f in 1.0f64..10.0) {
            let a = solve(lambda, 0.0, g, 1e-4, 1e-4, 0.1);
            let b = solve(lambda, 0.0, g * f, 1e-4, 1e-4, 0.1);
            prop_assert!(b.bits >= a.bits * (1.0 - 1e-12));
            prop_assert!(b.rate >= a.rate * (1.0 - 1e-12));
        }

        #[test]
        fn circuit_power_raises_rate(lambda in 1e3f64..1e7, pc in 1e-6f64..1e-3, f in 1.0f64..10.0) {
            let a = solve(lambda, 0.0, 5e-6, pc, 1e-4, 0.1);
            let b = solve(lambda, 0.0, 5e-6, pc * f, 1e-4, 0.1);
            prop_assert!(b.rate >= a.rate * (1.0 - 1e-12));
        }

        #[test]
        fn alpha_and_block_length_reduce_bits(
            lambda in 1e3f64..1e7, alpha in 1e-6f64..1e-3, block in 0.02f64..0.5, f in 1.0f64..5.0,
        ) {
            let base = solve(lambda, 0.0, 5e-6, 1e-4, alpha, block);
            let dearer = solve(lambda, 0.0, 5e-6, 1e-4, alpha * f, block);
            let longer = solve(lambda, 0.0, 5e-6, 1e-4, alpha, block * f);
            prop_assert!(dearer.bits <= base.bits * (1.0 + 1e-12));
            prop_assert!(longer.bits <= base.bits * (1.0 + 1e-12));
        }

        #[test]
        fn minimizer_beats_random_points(
            lambda in 1e2f64..1e7, mu in 0.0f64..1e-1,
            samples in proptest::collection::vec((0.0f64..1.0, 0.0f64..1.0), 200),
        ) {
            let p = params(0.1);
            let user = &p.users[0];
            let s = user_subproblem(lambda, mu, user, 5e-6, &p).unwrap();
            for (a, b) in samples {
                let t = 2.0 * p.block_length * a;
                let l = user.task_bits * b;
                let v = subproblem_value(lambda, mu, l, t, user, 5e-6, &p);
                prop_assert!(s.value <= v * (1.0 + 1e-12) + 1e-300);
            }
        }
    }
}
