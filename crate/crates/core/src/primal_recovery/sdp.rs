use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::ChannelSet;
use crate::numerics::{hermitian_eig, outer, solve_spd, ComplexVector, HermitianMatrix};

const NEWTON_TOL: f64 = 1e-10;
const MAX_NEWTON: usize = 200;
/// Newton decrement below which an iterate is close enough to the central
/// path for the multiplier estimate; the certificate decides optimality.
const CENTRED: f64 = 1e-3;
const TAU_GROWTH: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    /// Newton stalled before the requested duality gap was certified.
    ToleranceWarning,
}

/// Solution of `min T·tr(Q)` s.t. `Tζ·tr(QH_i) ≥ c_i`, `Q ⪰ 0`.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub covariance: HermitianMatrix,
    /// Multipliers `ν_i` of the coverage constraints.
    pub multipliers: Vec<f64>,
    /// `T·tr(Q)`.
    pub primal_objective: f64,
    /// `Σν_i c_i`, a lower bound on the optimum.
    pub dual_objective: f64,
    /// `max(0, c_i − Tζ·tr(QH_i))`.
    pub coverage_violation: Vec<f64>,
    pub newton_steps: usize,
    pub status: SdpStatus,
}

/// Minimum-power energy covariance meeting every requirement `c_i`.
///
/// Constraints are rescaled to `ĥ_iᴴQ′ĥ_i ≥ b_i ≤ 1` with `ĥ_i` the unit
/// channel direction, then solved by a primal log-barrier method over the
/// `N²` real coordinates of `Q′`. `K = 1` and `N = 1` use closed forms.
pub fn solve_wpt_sdp(
    requirements: &[f64],
    channels: &ChannelSet,
    block_length: f64,
    eh_efficiency: f64,
    tol: f64,
) -> Result<SdpSolution> {
    let k = channels.num_users();
    let n = channels.antennas();
    if requirements.len() != k {
        return Err(Error::Dimension(format!("{} requirements for {k} users", requirements.len())));
    }
    if requirements.iter().any(|c| !(*c >= 0.0 && c.is_finite())) {
        return Err(Error::Contract("energy requirements must be finite and non-negative".into()));
    }
    let rows: Vec<usize> = (0..k).filter(|&i| requirements[i] > 0.0).collect();
    for &i in &rows {
        if !(channels.downlink_gain(i) > 0.0) {
            return Err(Error::Infeasible(format!("user {} needs energy but has a zero downlink", i + 1)));
        }
    }
    if rows.is_empty() {
        return Ok(SdpSolution {
            covariance: HermitianMatrix::zeros(n),
            multipliers: vec![0.0; k],
            primal_objective: 0.0,
            dual_objective: 0.0,
            coverage_violation: vec![0.0; k],
            newton_steps: 0,
            status: SdpStatus::Optimal,
        });
    }

    // Power needed along ĥ_i alone, r_i = c_i / (Tζ‖h_i‖²).
    let power: Vec<f64> = rows
        .iter()
        .map(|&i| requirements[i] / (block_length * eh_efficiency * channels.downlink_gain(i)))
        .collect();
    let scale = power.iter().copied().fold(0.0, f64::max);
    let targets: Vec<f64> = power.iter().map(|p| p / scale).collect();
    let dirs: Vec<Vec<Complex64>> = rows
        .iter()
        .map(|&i| channels.downlink(i).normalized().expect("non-zero downlink").entries().to_vec())
        .collect();

    let (q_unit, omega, steps, status) = if rows.len() == 1 {
        let h = channels.downlink(rows[0]).normalized().expect("non-zero downlink");
        (outer(&h).scale(targets[0]), vec![1.0], 0, SdpStatus::Optimal)
    } else if n == 1 {
        let q = HermitianMatrix::scaled_identity(1, 1.0);
        let mut omega = vec![0.0; rows.len()];
        let top = targets.iter().position(|&b| b == 1.0).expect("max target is one");
        omega[top] = 1.0;
        (q, omega, 0, SdpStatus::Optimal)
    } else {
        barrier(n, &dirs, &targets, tol)?
    };

    let covariance = q_unit.scale(scale);
    let mut multipliers = vec![0.0; k];
    for (r, &i) in rows.iter().enumerate() {
        multipliers[i] = omega[r] / (eh_efficiency * channels.downlink_gain(i));
    }
    let coverage_violation = (0..k)
        .map(|i| {
            let got = block_length * eh_efficiency * covariance.trace_product(channels.downlink_outer(i));
            (requirements[i] - got).max(0.0)
        })
        .collect();
    Ok(SdpSolution {
        primal_objective: block_length * covariance.trace(),
        dual_objective: multipliers.iter().zip(requirements).map(|(v, c)| v * c).sum(),
        covariance,
        multipliers,
        coverage_violation,
        newton_steps: steps,
        status,
    })
}

/// One real coordinate of a Hermitian matrix: a list of `(row, col, coef)`.
type BasisElement = Vec<(usize, usize, Complex64)>;

fn hermitian_basis(n: usize) -> Vec<BasisElement> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let mut basis: Vec<BasisElement> = (0..n).map(|p| vec![(p, p, one)]).collect();
    for p in 0..n {
        for q in p + 1..n {
            basis.push(vec![(p, q, one), (q, p, one)]);
            basis.push(vec![(p, q, i), (q, p, -i)]);
        }
    }
    basis
}

fn assemble(n: usize, basis: &[BasisElement], x: &[f64]) -> HermitianMatrix {
    let mut m = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for (e, &xk) in basis.iter().zip(x) {
        for &(r, c, a) in e {
            m[r][c] += a * xk;
        }
    }
    HermitianMatrix::from_rows(&m).expect("finite barrier iterate")
}

struct Barrier<'a> {
    n: usize,
    basis: Vec<BasisElement>,
    /// `G_ik = ĥ_iᴴ E_k ĥ_i`.
    gram: Vec<Vec<f64>>,
    targets: &'a [f64],
    trace_coef: Vec<f64>,
}

impl Barrier<'_> {
    fn slacks(&self, x: &[f64]) -> Vec<f64> {
        self.gram
            .iter()
            .zip(self.targets)
            .map(|(g, b)| g.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() - b)
            .collect()
    }

    /// Barrier value, or `None` outside the domain.
    fn value(&self, tau: f64, x: &[f64]) -> Option<f64> {
        let q = assemble(self.n, &self.basis, x);
        let (_, logdet) = q.inverse_and_logdet()?;
        let slacks = self.slacks(x);
        if slacks.iter().any(|s| !(*s > 0.0)) {
            return None;
        }
        let tr: f64 = self.trace_coef.iter().zip(x).map(|(a, b)| a * b).sum();
        Some(tau * tr - logdet - slacks.iter().map(|s| s.ln()).sum::<f64>())
    }

    fn derivatives(&self, tau: f64, x: &[f64]) -> Option<(Vec<f64>, Vec<f64>)> {
        let m = x.len();
        let q = assemble(self.n, &self.basis, x);
        let (w, _) = q.inverse_and_logdet()?;
        let slacks = self.slacks(x);
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; m * m];
        for k in 0..m {
            let tr_we: f64 = self.basis[k].iter().map(|&(r, c, a)| (w.get(c, r) * a).re).sum();
            grad[k] = tau * self.trace_coef[k] - tr_we
                - self.gram.iter().zip(&slacks).map(|(g, s)| g[k] / s).sum::<f64>();
            for l in k..m {
                let mut h = Complex64::new(0.0, 0.0);
                for &(r, c, a) in &self.basis[k] {
                    for &(r2, c2, b) in &self.basis[l] {
                        h += a * b * w.get(c, r2) * w.get(c2, r);
                    }
                }
                let mut v = h.re;
                for (g, s) in self.gram.iter().zip(&slacks) {
                    v += g[k] * g[l] / (s * s);
                }
                hess[k * m + l] = v;
                hess[l * m + k] = v;
            }
        }
        Some((grad, hess))
    }
}

fn barrier(
    n: usize,
    dirs: &[Vec<Complex64>],
    targets: &[f64],
    tol: f64,
) -> Result<(HermitianMatrix, Vec<f64>, usize, SdpStatus)> {
    let basis = hermitian_basis(n);
    let m = basis.len();
    let gram: Vec<Vec<f64>> = dirs
        .iter()
        .map(|h| {
            basis
                .iter()
                .map(|e| e.iter().map(|&(r, c, a)| (h[r].conj() * a * h[c]).re).sum())
                .collect()
        })
        .collect();
    let trace_coef: Vec<f64> = (0..m).map(|k| if k < n { 1.0 } else { 0.0 }).collect();
    let problem = Barrier {
        n,
        basis,
        gram,
        targets,
        trace_coef,
    };

    let mut x = vec![0.0; m];
    for xk in x.iter_mut().take(n) {
        *xk = 2.0;
    }
    let constraints = (n + targets.len()) as f64;
    let mut tau = 1.0;
    let mut steps = 0;
    let mut best: Option<(Vec<f64>, Vec<f64>, f64)> = None;
    loop {
        if center(&problem, tau, &mut x, &mut steps).is_err() {
            break;
        }
        let (omega, gap) = certificate(&problem, dirs, &x, tau)?;
        let record = best.as_ref().map_or(f64::INFINITY, |b| b.2);
        if gap <= record {
            best = Some((x.clone(), omega, gap));
        }
        // Past the precision limit of the slacks the certificate degrades.
        if gap <= tol || gap > 10.0 * record || constraints / tau <= 1e-3 * tol {
            break;
        }
        tau *= TAU_GROWTH;
    }
    let (x, omega, gap) = best.ok_or(Error::NoConvergence {
        algorithm: "covariance barrier",
        iterations: steps,
    })?;
    let status = if gap <= tol {
        SdpStatus::Optimal
    } else {
        SdpStatus::ToleranceWarning
    };
    Ok((assemble(n, &problem.basis, &x), omega, steps, status))
}

/// Relative gap certified by multipliers `ω ≥ 0` after scaling them into
/// the dual feasible set `Σω_iĥ_iĥ_iᴴ ⪯ I`.
fn certify(problem: &Barrier<'_>, dirs: &[Vec<Complex64>], x: &[f64], mut omega: Vec<f64>) -> Result<(Vec<f64>, f64)> {
    let mut m = HermitianMatrix::zeros(problem.n);
    for (d, w) in dirs.iter().zip(&omega) {
        let h = ComplexVector::new(d.clone()).expect("finite direction");
        m = m.add_outer(*w, &h);
    }
    let top = hermitian_eig(&m)?.values.last().copied().unwrap_or(0.0);
    if top > 1.0 {
        for w in &mut omega {
            *w /= top;
        }
    }
    let primal: f64 = problem.trace_coef.iter().zip(x).map(|(a, b)| a * b).sum();
    let dual: f64 = omega.iter().zip(problem.targets).map(|(w, b)| w * b).sum();
    Ok((omega, (primal - dual).max(0.0) / primal))
}

/// Best dual certificate at a centred iterate. Two estimates are tried:
/// `ω_i = 1/(τ s_i)`, and the least-squares solution of the centrality
/// condition `Σω_iĥ_iĥ_iᴴ = I − Q⁻¹/τ`, which avoids dividing by tiny slacks.
fn certificate(problem: &Barrier<'_>, dirs: &[Vec<Complex64>], x: &[f64], tau: f64) -> Result<(Vec<f64>, f64)> {
    let slacks = problem.slacks(x);
    let from_slacks: Vec<f64> = slacks.iter().map(|s| 1.0 / (tau * s)).collect();
    let first = certify(problem, dirs, x, from_slacks)?;
    let Some((w, _)) = assemble(problem.n, &problem.basis, x).inverse_and_logdet() else {
        return Ok(first);
    };
    let k = dirs.len();
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 { a.iter().zip(b).map(|(u, v)| u.conj() * v).sum() };
    let mut gram = vec![0.0; k * k];
    let mut rhs = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            gram[i * k + j] = dot(&dirs[i], &dirs[j]).norm_sqr();
        }
        let h = ComplexVector::new(dirs[i].clone()).expect("finite direction");
        rhs[i] = 1.0 - w.quadratic_form(&h) / tau;
    }
    let Some(est) = solve_spd(&gram, &rhs) else {
        return Ok(first);
    };
    let second = certify(problem, dirs, x, est.into_iter().map(|v| v.max(0.0)).collect())?;
    Ok(if second.1 < first.1 { second } else { first })
}

/// Newton's method on the barrier for fixed `τ`. `Err` signals a stall.
fn center(problem: &Barrier<'_>, tau: f64, x: &mut Vec<f64>, steps: &mut usize) -> std::result::Result<(), ()> {
    for _ in 0..MAX_NEWTON {
        let (grad, hess) = problem.derivatives(tau, x).ok_or(())?;
        let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
        let dx = solve_spd(&hess, &neg).ok_or(())?;
        let decrement: f64 = -grad.iter().zip(&dx).map(|(g, d)| g * d).sum::<f64>();
        if !decrement.is_finite() {
            return Err(());
        }
        if decrement / 2.0 <= NEWTON_TOL {
            return Ok(());
        }
        let f0 = problem.value(tau, x).ok_or(())?;
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a + t * d).collect();
            if let Some(f1) = problem.value(tau, &trial) {
                if f1 <= f0 - 0.25 * t * decrement {
                    *x = trial;
                    accepted = true;
                    break;
                }
            }
            t *= 0.5;
        }
        *steps += 1;
        if !accepted {
            // No progress is possible at working precision.
            return if decrement <= CENTRED { Ok(()) } else { Err(()) };
        }
    }
    let (grad, hess) = problem.derivatives(tau, x).ok_or(())?;
    let neg: Vec<f64> = grad.iter().map(|g| -g).collect();
    let dx = solve_spd(&hess, &neg).ok_or(())?;
    let decrement: f64 = -grad.iter().zip(&dx).map(|(g, d)| g * d).sum::<f64>();
    if decrement <= CENTRED {
        Ok(())
    } else {
        Err(())
    }
}
