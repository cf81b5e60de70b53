//! Energy-minimal design of a wireless-powered multiuser mobile-edge
//! computing system.
//!
//! An access point with `N` antennas charges `K` single-antenna users by
//! energy beamforming. Each user splits a task of `R_i` bits into a locally
//! computed part and a part offloaded to the access point in its own TDMA
//! slot. [`solve_joint`] minimizes the access point's energy (beamforming
//! plus edge computing) subject to every user's deadline and energy budget.
//!
//! The solver works on the Lagrange dual: per-user closed forms built on the
//! Lambert W function, an ellipsoid method over the multipliers, and a small
//! semidefinite program for the energy covariance.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmarks;
pub mod dual_solver;
pub mod error;
pub mod model;
pub mod numerics;
pub mod oracle;
pub mod primal_recovery;
pub mod subproblem;

use dual_solver::{solve_dual, DualPoint, EllipsoidOptions, StopReason, TraceEntry};
use model::{Allocation, ChannelSet, SystemParams};
use primal_recovery::{kkt_residuals, recover_primal, KktReport, SdpStatus, SDP_TOL};

pub use error::{Error, Result};

/// Relative primal/dual gap above which a solve is flagged.
pub const GAP_WARNING: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    /// Ellipsoid stopping tolerance on the dual scale. Tighter than the
    /// bare dual solver's default: primal recovery loses about three orders
    /// of magnitude in the complementary-slackness products.
    pub tol: f64,
    /// Ellipsoid iteration cap; defaults to `500·(K + 1)²`.
    pub max_iter: Option<usize>,
    /// Relative duality-gap target of the covariance SDP.
    pub sdp_tol: f64,
    pub record_trace: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: None,
            sdp_tol: SDP_TOL,
            record_trace: false,
        }
    }
}

impl SolveOptions {
    pub fn ellipsoid(&self) -> EllipsoidOptions {
        EllipsoidOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            record_trace: self.record_trace,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    /// A tolerance was not met; the allocation is feasible but its
    /// optimality is not certified to the requested accuracy.
    ToleranceWarning,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub allocation: Allocation,
    /// Dual point after re-tuning `μ` to the recovered slots.
    pub dual: DualPoint,
    /// Best certified dual value.
    pub dual_value: f64,
    pub primal_value: f64,
    /// `|primal − dual| / (1 + |primal|)`.
    pub relative_gap: f64,
    pub kkt: KktReport,
    pub iterations: usize,
    pub stop: StopReason,
    pub sdp_status: SdpStatus,
    pub status: SolveStatus,
    pub trace: Vec<TraceEntry>,
}

/// Solves the joint design problem.
pub fn solve_joint(params: &SystemParams, channels: &ChannelSet, options: &SolveOptions) -> Result<SolveReport> {
    let dual = solve_dual(params, channels, &options.ellipsoid())?;
    let rec = recover_primal(&dual.point, params, channels, options.sdp_tol)?;
    let dual_value = dual.value.max(rec.polished_value);
    let primal_value = rec.allocation.objective;
    let relative_gap = (primal_value - dual_value).abs() / (1.0 + primal_value.abs());
    let kkt = kkt_residuals(&rec.allocation, &rec.polished, params, channels);
    let status = if dual.stop == StopReason::Converged
        && rec.sdp.status == SdpStatus::Optimal
        && relative_gap <= GAP_WARNING
    {
        SolveStatus::Converged
    } else {
        SolveStatus::ToleranceWarning
    };
    Ok(SolveReport {
        allocation: rec.allocation,
        dual: rec.polished,
        dual_value,
        primal_value,
        relative_gap,
        kkt,
        iterations: dual.iterations,
        stop: dual.stop,
        sdp_status: rec.sdp.status,
        status,
        trace: dual.trace,
    })
}
