//! Lagrange dual of the energy-minimization problem and its ellipsoid solver.
//!
//! The dual variables are one multiplier `λ_i` per energy-harvesting
//! constraint and `μ` for the shared time budget. The dual function is finite
//! only on `S = {λ ≥ 0, μ ≥ 0 : I − ζΣλ_iH_i ⪰ 0}`, where the covariance
//! term of the Lagrangian vanishes at `Q = 0`.

mod ellipsoid;

pub use ellipsoid::{
    ellipsoid_step, maximize, ConstraintCheck, Cut, CutKind, DualProblem, EllipsoidOptions, EllipsoidOutcome,
    EllipsoidState, Evaluation, StopReason, TraceEntry,
};

use crate::error::{Error, Result};
use crate::model::{ChannelSet, SystemParams};
use crate::numerics::{min_eigpair, ComplexVector, HermitianMatrix};
use crate::subproblem::{user_energy_requirement, user_subproblem, UserSubSolution};

/// Multipliers at or below this fraction of the largest one are treated as
/// exactly zero by the per-user minimizers.
pub const LAMBDA_ZERO_RATIO: f64 = 1e-12;

/// Points with `λ_min(F(λ))` above this value are accepted as dual feasible.
pub const PSD_TOLERANCE: f64 = 1e-10;

/// Dual variables `(λ, μ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPoint {
    pub lambda: Vec<f64>,
    pub mu: f64,
}

impl DualPoint {
    pub fn zero(users: usize) -> Self {
        Self {
            lambda: vec![0.0; users],
            mu: 0.0,
        }
    }

    /// `λ` with entries below the relative zero threshold set to zero.
    pub fn effective_lambda(&self) -> Vec<f64> {
        let max = self.lambda.iter().copied().fold(0.0, f64::max);
        self.lambda
            .iter()
            .map(|&l| if l <= LAMBDA_ZERO_RATIO * max { 0.0 } else { l })
            .collect()
    }
}

/// Dual function value and the per-user minimizers that attain it.
#[derive(Debug, Clone, PartialEq)]
pub struct DualValue {
    pub value: f64,
    pub subsolutions: Vec<UserSubSolution>,
}

/// `F(λ) = I − ζΣλ_iH_i`.
pub fn psd_matrix(lambda: &[f64], channels: &ChannelSet, eh_efficiency: f64) -> HermitianMatrix {
    let mut f = HermitianMatrix::identity(channels.antennas());
    for (i, &l) in lambda.iter().enumerate() {
        if l != 0.0 {
            f = f.axpy(-eh_efficiency * l, channels.downlink_outer(i));
        }
    }
    f
}

/// Smallest eigenvalue of `F(λ)` with its subgradient data.
#[derive(Debug, Clone, PartialEq)]
pub struct PsdCut {
    /// `π = λ_min(F(λ))`.
    pub margin: f64,
    /// Unit eigenvector `v` for `π`.
    pub eigenvector: ComplexVector,
    /// `[ζvᴴH_1v, …, ζvᴴH_Kv, 0]`; `−vector` is a subgradient of `π`.
    pub vector: Vec<f64>,
}

pub fn psd_constraint_cut(lambda: &[f64], channels: &ChannelSet, eh_efficiency: f64) -> Result<PsdCut> {
    let f = psd_matrix(lambda, channels, eh_efficiency);
    let (margin, v) = min_eigpair(&f)?;
    let mut vector: Vec<f64> = (0..channels.num_users())
        .map(|i| eh_efficiency * channels.downlink(i).dot(&v).norm_sqr())
        .collect();
    vector.push(0.0);
    Ok(PsdCut {
        margin,
        eigenvector: v,
        vector,
    })
}

/// `Φ(λ, μ) = −μT + Σ_i min_{t,ℓ} [αℓ + λ_i c_i(ℓ, t) + μt]`.
pub fn dual_function(point: &DualPoint, params: &SystemParams, channels: &ChannelSet) -> Result<DualValue> {
    check_point(point, params)?;
    let cut = psd_constraint_cut(&point.lambda, channels, params.eh_efficiency)?;
    if cut.margin < -PSD_TOLERANCE {
        return Err(Error::Contract(format!(
            "dual point outside S: λ_min(F) = {:.3e}",
            cut.margin
        )));
    }
    dual_function_unchecked(point, params, channels)
}

fn check_point(point: &DualPoint, params: &SystemParams) -> Result<()> {
    if point.lambda.len() != params.num_users() {
        return Err(Error::Dimension(format!(
            "{} multipliers for {} users",
            point.lambda.len(),
            params.num_users()
        )));
    }
    if point.lambda.iter().any(|l| !(*l >= 0.0)) || !(point.mu >= 0.0) {
        return Err(Error::Contract("dual variables must be non-negative".into()));
    }
    Ok(())
}

pub(crate) fn dual_function_unchecked(point: &DualPoint, params: &SystemParams, channels: &ChannelSet) -> Result<DualValue> {
    let lambda = point.effective_lambda();
    let mut value = -point.mu * params.block_length;
    let mut subsolutions = Vec::with_capacity(lambda.len());
    for (i, user) in params.users.iter().enumerate() {
        let s = user_subproblem(lambda[i], point.mu, user, channels.uplink_gain(i), params)?;
        value += s.value;
        subsolutions.push(s);
    }
    Ok(DualValue { value, subsolutions })
}

/// Supergradient of `Φ`: the energy each user must harvest (without the
/// covariance term) followed by `Σt − T`.
pub fn objective_subgradient(subsolutions: &[UserSubSolution], params: &SystemParams, channels: &ChannelSet) -> Vec<f64> {
    let mut g: Vec<f64> = subsolutions
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
    g.push(subsolutions.iter().map(|s| s.time).sum::<f64>() - params.block_length);
    g
}

/// Users that take part in the dual search; the rest keep `λ_i = 0`.
pub(crate) fn active_users(params: &SystemParams) -> Vec<usize> {
    (0..params.num_users())
        .filter(|&i| params.users[i].task_bits > 0.0)
        .collect()
}

/// Rejects instances where a user with a task cannot harvest any energy.
pub(crate) fn check_reachable(channels: &ChannelSet, active: &[usize]) -> Result<()> {
    for &i in active {
        if !(channels.downlink_gain(i) > 0.0) {
            return Err(Error::Infeasible(format!(
                "user {} has a task but a zero downlink channel",
                i + 1
            )));
        }
    }
    Ok(())
}

/// The joint dual problem restricted to active users, in the coordinates
/// `(λ_active, μ)`.
pub struct JointDual<'a> {
    params: &'a SystemParams,
    channels: &'a ChannelSet,
    active: Vec<usize>,
    upper: Vec<f64>,
}

impl<'a> JointDual<'a> {
    pub fn new(params: &'a SystemParams, channels: &'a ChannelSet) -> Result<Self> {
        params.validate()?;
        channels.check_dims(params)?;
        let active = active_users(params);
        check_reachable(channels, &active)?;
        let upper = joint_box(params, channels, &active);
        Ok(Self {
            params,
            channels,
            active,
            upper,
        })
    }

    pub fn active(&self) -> &[usize] {
        &self.active
    }

    /// Expands reduced coordinates into a full dual point.
    pub fn point(&self, z: &[f64]) -> DualPoint {
        let mut lambda = vec![0.0; self.params.num_users()];
        for (k, &i) in self.active.iter().enumerate() {
            lambda[i] = z[k].max(0.0);
        }
        DualPoint {
            lambda,
            mu: z[self.active.len()].max(0.0),
        }
    }
}

/// Box containing every dual optimum.
///
/// `F(λ) ⪰ 0` gives `λ_i ≤ 1/(ζ‖h_i‖²)`. For `μ`, weak duality against any
/// primal point `(ℓ⁰, t⁰)` with `Σt⁰ < T` and `Φ* ≥ 0` gives
/// `μ ≤ (αΣℓ⁰ + Σ_i b_i c_i(ℓ⁰, t⁰)) / (T − Σt⁰)`.
fn joint_box(params: &SystemParams, channels: &ChannelSet, active: &[usize]) -> Vec<f64> {
    let t_blk = params.block_length;
    let k = active.len().max(1) as f64;
    let mut upper = Vec::with_capacity(active.len() + 1);
    let mut numerator = 0.0;
    let mut used_time = 0.0;
    for &i in active {
        let user = &params.users[i];
        let b = 1.0 / (params.eh_efficiency * channels.downlink_gain(i));
        let bits = user.min_offload_bits(t_blk);
        let time = if bits > 0.0 { t_blk / (2.0 * k) } else { 0.0 };
        used_time += time;
        numerator += params.ap_energy_per_bit * bits
            + b * user_energy_requirement(bits, time, user, channels.uplink_gain(i), params);
        upper.push(b);
    }
    let mu_max = numerator / (t_blk - used_time);
    upper.push(if mu_max > 0.0 { mu_max } else { 1.0 });
    upper
}

impl DualProblem for JointDual<'_> {
    fn dim(&self) -> usize {
        self.active.len() + 1
    }

    fn upper_bounds(&self) -> &[f64] {
        &self.upper
    }

    fn check_constraints(&self, z: &[f64]) -> Result<ConstraintCheck> {
        let point = self.point(z);
        let cut = psd_constraint_cut(&point.lambda, self.channels, self.params.eh_efficiency)?;
        if cut.margin >= -PSD_TOLERANCE {
            return Ok(ConstraintCheck {
                margin: cut.margin,
                cut: None,
            });
        }
        let mut g: Vec<f64> = self.active.iter().map(|&i| cut.vector[i]).collect();
        g.push(0.0);
        Ok(ConstraintCheck {
            margin: cut.margin,
            cut: Some(Cut {
                kind: CutKind::PsdConstraint,
                g,
                offset: -cut.margin,
            }),
        })
    }

    fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
        let point = self.point(z);
        let dv = dual_function_unchecked(&point, self.params, self.channels)?;
        let full = objective_subgradient(&dv.subsolutions, self.params, self.channels);
        let mut supergradient: Vec<f64> = self.active.iter().map(|&i| full[i]).collect();
        supergradient.push(full[self.params.num_users()]);
        Ok(Evaluation {
            value: dv.value,
            supergradient,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    pub point: DualPoint,
    /// Best dual value found; a certified lower bound on the optimum.
    pub value: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub stop: StopReason,
    pub trace: Vec<TraceEntry>,
}

/// Maximizes the dual function over `S`; returns the best feasible iterate.
pub fn solve_dual(params: &SystemParams, channels: &ChannelSet, options: &EllipsoidOptions) -> Result<DualSolution> {
    let problem = JointDual::new(params, channels)?;
    if problem.active().is_empty() {
        return Ok(DualSolution {
            point: DualPoint::zero(params.num_users()),
            value: 0.0,
            iterations: 0,
            restarts: 0,
            stop: StopReason::Converged,
            trace: Vec::new(),
        });
    }
    let out = maximize(&problem, options)?;
    Ok(DualSolution {
        point: problem.point(&out.best_point),
        value: out.best_value,
        iterations: out.iterations,
        restarts: out.restarts,
        stop: out.stop,
        trace: out.trace,
    })
}
