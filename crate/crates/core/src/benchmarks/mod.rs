//! Comparison schemes. Each one restricts the joint problem, so on a common
//! instance its objective can only be larger.

mod restricted;

use std::fmt;
use std::str::FromStr;

pub use restricted::{equal_time_bits, offload_only_subproblem};

use crate::dual_solver::active_users;
use crate::error::{Error, Result};
use crate::model::{check_feasible, Allocation, ChannelSet, SystemParams};
use crate::primal_recovery::{polish_time_multiplier, solve_wpt_sdp, SdpStatus};
use crate::subproblem::{user_energy_requirement, user_subproblem, UserSubSolution};
use crate::{solve_joint, SolveOptions, SolveStatus, GAP_WARNING};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeId {
    Joint,
    LocalOnly,
    OffloadOnly,
    Isotropic,
    Separate,
    EqualTime,
}

impl SchemeId {
    pub const ALL: [SchemeId; 6] = [
        SchemeId::Joint,
        SchemeId::LocalOnly,
        SchemeId::OffloadOnly,
        SchemeId::Isotropic,
        SchemeId::Separate,
        SchemeId::EqualTime,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeId::Joint => "joint",
            SchemeId::LocalOnly => "local_only",
            SchemeId::OffloadOnly => "offload_only",
            SchemeId::Isotropic => "isotropic",
            SchemeId::Separate => "separate",
            SchemeId::EqualTime => "equal_time",
        }
    }
}

impl fmt::Display for SchemeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SchemeId::ALL
            .into_iter()
            .find(|id| id.as_str() == s)
            .ok_or_else(|| Error::InvalidParameter {
                name: "scheme".into(),
                reason: format!("unknown scheme `{s}`"),
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeStatus {
    Converged,
    ToleranceWarning,
    Infeasible,
}

impl SchemeStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SchemeStatus::Converged => "ok",
            SchemeStatus::ToleranceWarning => "warning",
            SchemeStatus::Infeasible => "infeasible",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SchemeResult {
    pub scheme: SchemeId,
    /// `None` when the scheme has no feasible point.
    pub allocation: Option<Allocation>,
    /// Objective in J; `+∞` when infeasible.
    pub objective: f64,
    pub feasible: bool,
    pub status: SchemeStatus,
    pub diagnostics: String,
}

impl SchemeResult {
    fn infeasible(scheme: SchemeId, reason: impl Into<String>) -> Self {
        Self {
            scheme,
            allocation: None,
            objective: f64::INFINITY,
            feasible: false,
            status: SchemeStatus::Infeasible,
            diagnostics: reason.into(),
        }
    }

    fn solved(scheme: SchemeId, allocation: Allocation, converged: bool, diagnostics: String) -> Self {
        Self {
            scheme,
            objective: allocation.objective,
            allocation: Some(allocation),
            feasible: true,
            status: if converged {
                SchemeStatus::Converged
            } else {
                SchemeStatus::ToleranceWarning
            },
            diagnostics,
        }
    }
}

/// Runs one scheme; an infeasible instance yields an infeasible result
/// rather than an error.
pub fn run_scheme(scheme: SchemeId, params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SchemeResult> {
    params.validate()?;
    channels.check_dims(params)?;
    let out = match scheme {
        SchemeId::Joint => solve_joint(params, channels, options).map(|r| {
            let diag = format!("gap={:.3e} iterations={}", r.relative_gap, r.iterations);
            SchemeResult::solved(scheme, r.allocation, r.status == SolveStatus::Converged, diag)
        }),
        SchemeId::LocalOnly => local_only(params, channels, options),
        SchemeId::OffloadOnly => restricted::offload_only(params, channels, options),
        SchemeId::Isotropic => restricted::isotropic_wpt(params, channels, options),
        SchemeId::Separate => separate_design(params, channels, options),
        SchemeId::EqualTime => restricted::equal_time(params, channels, options),
    };
    match out {
        Err(Error::Infeasible(reason)) => Ok(SchemeResult::infeasible(scheme, reason)),
        other => other,
    }
}

/// Covariance for the given energy requirements and the resulting allocation.
fn finish(
    requirements: &[f64],
    time: Vec<f64>,
    bits: Vec<f64>,
    params: &SystemParams,
    channels: &ChannelSet,
    options: &SolveOptions,
) -> Result<(Allocation, SdpStatus)> {
    let sdp = solve_wpt_sdp(requirements, channels, params.block_length, params.eh_efficiency, options.sdp_tol)?;
    let alloc = Allocation::evaluate(sdp.covariance, time, bits, params, channels)?;
    Ok((alloc, sdp.status))
}

fn requirements(subs: &[UserSubSolution], params: &SystemParams, channels: &ChannelSet) -> Vec<f64> {
    subs.iter()
        .zip(&params.users)
        .enumerate()
        .map(|(i, (s, user))| {
            if user.task_bits == 0.0 {
                0.0
            } else {
                user_energy_requirement(s.bits, s.time, user, channels.uplink_gain(i), params)
            }
        })
        .collect()
}

fn check_reachable(params: &SystemParams, channels: &ChannelSet) -> Result<()> {
    crate::dual_solver::check_reachable(channels, &active_users(params))
}

/// Everything is computed locally: `ℓ = 0`, `t = 0`.
pub fn local_only(params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SchemeResult> {
    let t_blk = params.block_length;
    for (i, user) in params.users.iter().enumerate() {
        if user.cycles_per_bit * user.task_bits / t_blk > user.max_frequency {
            return Ok(SchemeResult::infeasible(
                SchemeId::LocalOnly,
                format!("user {} cannot meet its deadline locally", i + 1),
            ));
        }
    }
    check_reachable(params, channels)?;
    let k = params.num_users();
    let req: Vec<f64> = params
        .users
        .iter()
        .enumerate()
        .map(|(i, user)| user_energy_requirement(0.0, 0.0, user, channels.uplink_gain(i), params))
        .collect();
    let (alloc, sdp) = finish(&req, vec![0.0; k], vec![0.0; k], params, channels, options)?;
    Ok(SchemeResult::solved(
        SchemeId::LocalOnly,
        alloc,
        sdp == SdpStatus::Optimal,
        String::new(),
    ))
}

/// Users first minimize their own energy `Σ(E_loc + E_offl)` under the
/// shared time budget, ignoring the access point's costs; the covariance is
/// then designed for the resulting requirements.
pub fn separate_design(params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SchemeResult> {
    check_reachable(params, channels)?;
    let stage1 = separate_stage1(params, channels)?;
    let req = requirements(&stage1.subsolutions, params, channels);
    let (alloc, sdp) = finish(
        &req,
        stage1.subsolutions.iter().map(|s| s.time).collect(),
        stage1.subsolutions.iter().map(|s| s.bits).collect(),
        params,
        channels,
        options,
    )?;
    Ok(SchemeResult::solved(
        SchemeId::Separate,
        alloc,
        sdp == SdpStatus::Optimal,
        format!("mu={:.6e}", stage1.mu),
    ))
}

/// User-side stage of the separate design.
#[derive(Debug, Clone)]
pub struct SeparateStage1 {
    /// Multiplier of the time budget.
    pub mu: f64,
    pub subsolutions: Vec<UserSubSolution>,
    /// The user-side problem: `α = 0`.
    pub user_params: SystemParams,
}

pub fn separate_stage1(params: &SystemParams, channels: &ChannelSet) -> Result<SeparateStage1> {
    let mut user_params = params.clone();
    user_params.ap_energy_per_bit = 0.0;
    let subs_at = |mu: f64| -> Result<Vec<UserSubSolution>> {
        user_params
            .users
            .iter()
            .enumerate()
            .map(|(i, user)| user_subproblem(1.0, mu, user, channels.uplink_gain(i), &user_params))
            .collect()
    };
    let mu = polish_time_multiplier(
        |mu| Ok(subs_at(mu)?.iter().map(|s| s.time).sum()),
        1e-6,
        params.block_length,
    )?;
    let subsolutions = subs_at(mu)?;
    Ok(SeparateStage1 {
        mu,
        subsolutions,
        user_params,
    })
}

/// Relative gap `|primal − dual| / (1 + |primal|)`.
fn relative_gap(primal: f64, dual: f64) -> f64 {
    (primal - dual).abs() / (1.0 + primal.abs())
}

fn within_gap(primal: f64, dual: f64) -> bool {
    relative_gap(primal, dual) <= GAP_WARNING
}

/// Feasibility of a scheme's allocation within an absolute tolerance scaled
/// to the objective.
pub fn scheme_feasible(result: &SchemeResult, params: &SystemParams, channels: &ChannelSet, tol: f64) -> bool {
    match &result.allocation {
        Some(a) => check_feasible(a, params, channels).is_feasible(tol),
        None => false,
    }
}

