use crate::error::{Error, Result};

/// Why a cut was generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutKind {
    Objective,
    PsdConstraint,
    Nonnegativity,
    /// Upper end of the a-priori box that contains every optimum.
    BoxBound,
}

impl CutKind {
    pub fn as_str(self) -> &'static str {
        match self {
            CutKind::Objective => "objective",
            CutKind::PsdConstraint => "psd",
            CutKind::Nonnegativity => "nonneg",
            CutKind::BoxBound => "box",
        }
    }
}

/// The half-space `{z : gᵀ(z − x) + offset ≤ 0}` around the current centre
/// `x`; `offset ≥ 0` gives a deep cut.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub kind: CutKind,
    pub g: Vec<f64>,
    pub offset: f64,
}

/// Ellipsoid `{z : (z − c)ᵀ A⁻¹ (z − c) ≤ 1}`; `shape` is row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidState {
    pub center: Vec<f64>,
    pub shape: Vec<f64>,
    pub iteration: usize,
}

impl EllipsoidState {
    /// Ball of the given radius.
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        let n = center.len();
        let mut shape = vec![0.0; n * n];
        for i in 0..n {
            shape[i * n + i] = radius * radius;
        }
        Self {
            center,
            shape,
            iteration: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    /// `gᵀ A g`.
    pub fn norm_sqr(&self, g: &[f64]) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for r in 0..n {
            let row: f64 = (0..n).map(|c| self.shape[r * n + c] * g[c]).sum();
            acc += g[r] * row;
        }
        acc
    }

    fn shape_times(&self, g: &[f64]) -> Vec<f64> {
        let n = self.dim();
        (0..n)
            .map(|r| (0..n).map(|c| self.shape[r * n + c] * g[c]).sum())
            .collect()
    }
}

/// One deep-cut ellipsoid update. The result contains the intersection of
/// the old ellipsoid with the cut's half-space. Offsets that would empty the
/// ellipsoid fall back to a central cut.
pub fn ellipsoid_step(state: &EllipsoidState, cut: &Cut) -> Result<EllipsoidState> {
    let n = state.dim();
    if cut.g.len() != n {
        return Err(Error::Dimension(format!("cut of length {} for a {n}-dimensional ellipsoid", cut.g.len())));
    }
    let gag = state.norm_sqr(&cut.g);
    if !(gag > 0.0) || !gag.is_finite() {
        return Err(Error::Degenerate(format!("cut norm gᵀAg = {gag}")));
    }
    let root = gag.sqrt();
    let mut a = (cut.offset / root).max(0.0);
    if a >= 1.0 {
        a = 0.0;
    }
    let gt: Vec<f64> = state.shape_times(&cut.g).into_iter().map(|v| v / root).collect();
    let nf = n as f64;

    let mut center = state.center.clone();
    let shift = (1.0 + nf * a) / (nf + 1.0);
    for (c, g) in center.iter_mut().zip(&gt) {
        *c -= shift * g;
    }

    let mut shape = vec![0.0; n * n];
    if n == 1 {
        let half = 0.5 * (1.0 - a);
        shape[0] = state.shape[0] * half * half;
    } else {
        let factor = nf * nf * (1.0 - a * a) / (nf * nf - 1.0);
        let coef = 2.0 * (1.0 + nf * a) / ((nf + 1.0) * (1.0 + a));
        for r in 0..n {
            for c in r..n {
                let sym = 0.5 * (state.shape[r * n + c] + state.shape[c * n + r]);
                let v = factor * (sym - coef * gt[r] * gt[c]);
                shape[r * n + c] = v;
                shape[c * n + r] = v;
            }
        }
    }
    Ok(EllipsoidState {
        center,
        shape,
        iteration: state.iteration + 1,
    })
}

/// Value and supergradient of a concave function.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    /// May contain `+∞` where the function is unboundedly steep.
    pub supergradient: Vec<f64>,
}

/// Outcome of a constraint test at a candidate point.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintCheck {
    /// Constraint margin, non-negative when satisfied.
    pub margin: f64,
    /// A cut separating the point from the feasible set, if it is violated.
    pub cut: Option<Cut>,
}

/// Concave maximization over `{z ≥ 0} ∩ {constraints}` with every maximizer
/// inside the box `0 ≤ z ≤ upper_bounds`.
pub trait DualProblem {
    fn dim(&self) -> usize;
    fn upper_bounds(&self) -> &[f64];
    fn check_constraints(&self, z: &[f64]) -> Result<ConstraintCheck>;
    fn evaluate(&self, z: &[f64]) -> Result<Evaluation>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipsoidOptions {
    /// Stop when the objective cut's ellipsoidal norm falls below
    /// `tol·(1 + |best|)`.
    pub tol: f64,
    /// Defaults to `500·n²`.
    pub max_iter: Option<usize>,
    pub record_trace: bool,
}

impl Default for EllipsoidOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: None,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    Degenerate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceEntry {
    pub iteration: usize,
    /// Objective at the centre; NaN when the centre was infeasible.
    pub value: f64,
    /// Constraint margin at the centre; NaN when not evaluated.
    pub margin: f64,
    pub kind: CutKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EllipsoidOutcome {
    pub best_point: Vec<f64>,
    pub best_value: f64,
    pub iterations: usize,
    pub restarts: usize,
    pub stop: StopReason,
    /// Last objective-cut norm `√(gᵀAg)`.
    pub width: f64,
    pub trace: Vec<TraceEntry>,
}

const MAX_RESTARTS: usize = 3;
const BOUNDARY_FRACTION: f64 = 0.99;

/// Deep-cut ellipsoid method in box-normalized coordinates `y = z / upper`.
///
/// The initial ellipsoid is the ball around the box centre that contains the
/// whole box with a 5% margin. If the returned point ends within 1% of its
/// boundary the run is repeated with a doubled radius, at most three times.
pub fn maximize<P: DualProblem + ?Sized>(problem: &P, options: &EllipsoidOptions) -> Result<EllipsoidOutcome> {
    let n = problem.dim();
    let upper = problem.upper_bounds().to_vec();
    if upper.len() != n || upper.iter().any(|&u| !(u > 0.0 && u.is_finite())) {
        return Err(Error::Contract("box bounds must be positive and finite".into()));
    }
    let origin = vec![0.0; n];
    let start = problem.evaluate(&origin)?;
    if n == 0 {
        return Ok(EllipsoidOutcome {
            best_point: origin,
            best_value: start.value,
            iterations: 0,
            restarts: 0,
            stop: StopReason::Converged,
            width: 0.0,
            trace: Vec::new(),
        });
    }
    let max_iter = options.max_iter.unwrap_or(500 * n * n);
    let base_radius = 1.05 * (n as f64).sqrt() / 2.0;

    let mut total_iter = 0;
    let mut trace = Vec::new();
    let mut radius = base_radius;
    let mut restarts = 0;
    loop {
        let run = run_ellipsoid(problem, &upper, radius, max_iter, options, &start, &mut trace)?;
        total_iter += run.iterations;
        let y: Vec<f64> = run.best_point.iter().zip(&upper).map(|(z, u)| z / u).collect();
        let dist = y.iter().map(|v| (v - 0.5) * (v - 0.5)).sum::<f64>().sqrt();
        if dist >= BOUNDARY_FRACTION * radius && restarts < MAX_RESTARTS {
            restarts += 1;
            radius *= 2.0;
            continue;
        }
        return Ok(EllipsoidOutcome {
            iterations: total_iter,
            restarts,
            trace,
            ..run
        });
    }
}

fn run_ellipsoid<P: DualProblem + ?Sized>(
    problem: &P,
    upper: &[f64],
    radius: f64,
    max_iter: usize,
    options: &EllipsoidOptions,
    start: &Evaluation,
    trace: &mut Vec<TraceEntry>,
) -> Result<EllipsoidOutcome> {
    let n = upper.len();
    let mut state = EllipsoidState::ball(vec![0.5; n], radius);
    let mut best_point = vec![0.0; n];
    let mut best_value = start.value;
    let mut width = f64::INFINITY;
    let mut stop = StopReason::MaxIterations;

    while state.iteration < max_iter {
        let y = &state.center;
        let z: Vec<f64> = y.iter().zip(upper).map(|(y, u)| y * u).collect();
        let mut value = f64::NAN;
        let mut margin = f64::NAN;

        let cut = if let Some(j) = most_negative(y) {
            let mut g = vec![0.0; n];
            g[j] = -1.0;
            Cut {
                kind: CutKind::Nonnegativity,
                g,
                offset: -y[j],
            }
        } else if let Some(j) = most_above_one(y) {
            let mut g = vec![0.0; n];
            g[j] = 1.0;
            Cut {
                kind: CutKind::BoxBound,
                g,
                offset: y[j] - 1.0,
            }
        } else {
            let check = problem.check_constraints(&z)?;
            margin = check.margin;
            match check.cut {
                Some(mut cut) => {
                    for (g, u) in cut.g.iter_mut().zip(upper) {
                        *g *= u;
                    }
                    cut
                }
                None => {
                    let eval = problem.evaluate(&z)?;
                    value = eval.value;
                    if value > best_value {
                        best_value = value;
                        best_point = z.clone();
                    }
                    let unbounded: Vec<usize> = (0..n).filter(|&j| eval.supergradient[j] == f64::INFINITY).collect();
                    if unbounded.is_empty() {
                        let g: Vec<f64> = eval.supergradient.iter().zip(upper).map(|(d, u)| -d * u).collect();
                        if g.iter().any(|v| !v.is_finite()) {
                            return Err(Error::Degenerate("non-finite supergradient".into()));
                        }
                        let gag = state.norm_sqr(&g);
                        width = gag.max(0.0).sqrt();
                        if width <= options.tol * (1.0 + best_value.abs()) {
                            stop = StopReason::Converged;
                            if options.record_trace {
                                trace.push(TraceEntry {
                                    iteration: state.iteration,
                                    value,
                                    margin,
                                    kind: CutKind::Objective,
                                });
                            }
                            break;
                        }
                        Cut {
                            kind: CutKind::Objective,
                            g,
                            offset: best_value - value,
                        }
                    } else {
                        let mut g = vec![0.0; n];
                        for j in unbounded {
                            g[j] = -1.0;
                        }
                        Cut {
                            kind: CutKind::Objective,
                            g,
                            offset: 0.0,
                        }
                    }
                }
            }
        };
        if options.record_trace {
            trace.push(TraceEntry {
                iteration: state.iteration,
                value,
                margin,
                kind: cut.kind,
            });
        }
        match ellipsoid_step(&state, &cut) {
            Ok(next) => state = next,
            Err(Error::Degenerate(_)) => {
                stop = StopReason::Degenerate;
                break;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(EllipsoidOutcome {
        best_point,
        best_value,
        iterations: state.iteration,
        restarts: 0,
        stop,
        width,
        trace: Vec::new(),
    })
}

fn most_negative(y: &[f64]) -> Option<usize> {
    y.iter()
        .enumerate()
        .filter(|(_, v)| **v < 0.0)
        .min_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
}

fn most_above_one(y: &[f64]) -> Option<usize> {
    y.iter()
        .enumerate()
        .filter(|(_, v)| **v > 1.0)
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(j, _)| j)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::symmetric_jacobi;
    use proptest::prelude::*;

    fn log_volume(s: &EllipsoidState) -> f64 {
        let eig = symmetric_jacobi(&s.shape, s.dim()).unwrap();
        0.5 * eig.values.iter().map(|v| v.ln()).sum::<f64>()
    }

    #[test]
    fn one_dimensional_central_cut_halves_interval() {
        let s = EllipsoidState::ball(vec![0.0], 1.0);
        let cut = Cut {
            kind: CutKind::Objective,
            g: vec![1.0],
            offset: 0.0,
        };
        let next = ellipsoid_step(&s, &cut).unwrap();
        assert!((next.center[0] + 0.5).abs() < 1e-15);
        assert!((next.shape[0] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn one_dimensional_deep_cut_trims_interval() {
        let s = EllipsoidState::ball(vec![0.0], 1.0);
        // Keep z ≤ -0.5: the interval becomes [-1, -0.5].
        let cut = Cut {
            kind: CutKind::Objective,
            g: vec![1.0],
            offset: 0.5,
        };
        let next = ellipsoid_step(&s, &cut).unwrap();
        assert!((next.center[0] + 0.75).abs() < 1e-15);
        assert!((next.shape[0].sqrt() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn unit_ball_axis_cut() {
        let n = 3;
        let s = EllipsoidState::ball(vec![0.0; n], 1.0);
        let mut g = vec![0.0; n];
        g[0] = 1.0;
        let next = ellipsoid_step(
            &s,
            &Cut {
                kind: CutKind::Objective,
                g,
                offset: 0.0,
            },
        )
        .unwrap();
        assert!((next.center[0] + 1.0 / (n as f64 + 1.0)).abs() < 1e-15);
        let nf = n as f64;
        assert!((next.shape[0] - (nf / (nf + 1.0)).powi(2)).abs() < 1e-14);
        assert!((next.shape[4] - nf * nf / (nf * nf - 1.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_cut_is_degenerate() {
        let s = EllipsoidState::ball(vec![0.0; 2], 1.0);
        let cut = Cut {
            kind: CutKind::Objective,
            g: vec![0.0, 0.0],
            offset: 0.0,
        };
        assert!(matches!(ellipsoid_step(&s, &cut), Err(Error::Degenerate(_))));
    }

    struct Quadratic {
        target: Vec<f64>,
        upper: Vec<f64>,
    }

    impl DualProblem for Quadratic {
        fn dim(&self) -> usize {
            self.target.len()
        }
        fn upper_bounds(&self) -> &[f64] {
            &self.upper
        }
        fn check_constraints(&self, _z: &[f64]) -> Result<ConstraintCheck> {
            Ok(ConstraintCheck {
                margin: 1.0,
                cut: None,
            })
        }
        fn evaluate(&self, z: &[f64]) -> Result<Evaluation> {
            let value = -z.iter().zip(&self.target).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            let supergradient = z.iter().zip(&self.target).map(|(a, b)| -2.0 * (a - b)).collect();
            Ok(Evaluation { value, supergradient })
        }
    }

    #[test]
    fn maximizes_concave_quadratic_with_boundary_optimum() {
        let p = Quadratic {
            target: vec![3.0, -1.0, 0.25],
            upper: vec![10.0, 5.0, 1.0],
        };
        let out = maximize(
            &p,
            &EllipsoidOptions {
                tol: 1e-10,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.stop, StopReason::Converged);
        assert!((out.best_point[0] - 3.0).abs() < 1e-4);
        assert!(out.best_point[1].abs() < 1e-4);
        assert!((out.best_point[2] - 0.25).abs() < 1e-4);
        assert!((out.best_value + 1.0).abs() < 1e-8);
    }

    proptest! {
        #[test]
        fn volume_shrinks_at_guaranteed_rate(
            cuts in proptest::collection::vec((proptest::collection::vec(-1.0f64..1.0, 3), 0.0f64..0.9), 1..40)
        ) {
            let n = 3;
            let mut s = EllipsoidState::ball(vec![0.0; n], 1.0);
            let v0 = log_volume(&s);
            let mut m = 0;
            for (g, frac) in cuts {
                if g.iter().all(|v| v.abs() < 1e-3) {
                    continue;
                }
                let offset = frac * s.norm_sqr(&g).sqrt();
                s = ellipsoid_step(&s, &Cut { kind: CutKind::Objective, g, offset }).unwrap();
                m += 1;
            }
            prop_assert!(log_volume(&s) <= v0 - m as f64 / (2.0 * n as f64) + 1e-9);
        }

        #[test]
        fn step_keeps_points_of_the_cut_region(
            g in proptest::collection::vec(-1.0f64..1.0, 2),
            frac in 0.0f64..0.95,
            samples in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 50),
        ) {
            prop_assume!(g.iter().any(|v| v.abs() > 1e-3));
            let s = EllipsoidState::ball(vec![0.0, 0.0], 1.0);
            let offset = frac * s.norm_sqr(&g).sqrt();
            let next = ellipsoid_step(&s, &Cut { kind: CutKind::Objective, g: g.clone(), offset }).unwrap();
            let det = next.shape[0] * next.shape[3] - next.shape[1] * next.shape[2];
            for (a, b) in samples {
                if a * a + b * b > 1.0 || g[0] * a + g[1] * b + offset > 0.0 {
                    continue;
                }
                let (dx, dy) = (a - next.center[0], b - next.center[1]);
                // (z − c)ᵀ A⁻¹ (z − c) via the 2×2 adjugate.
                let q = (next.shape[3] * dx * dx - 2.0 * next.shape[1] * dx * dy + next.shape[0] * dy * dy) / det;
                prop_assert!(q <= 1.0 + 1e-9);
            }
        }
    }
}
