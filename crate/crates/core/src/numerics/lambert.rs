use std::f64::consts::E;

use crate::error::{Error, Result};

const MAX_HALLEY: usize = 50;
const BRANCH_TOL: f64 = 1e-12;

/// Principal branch `W₀(x)` for `x ≥ -1/e`.
///
/// Arguments up to `1e-12` below `-1/e` are treated as the branch point.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < -1.0 / E - BRANCH_TOL {
        return Err(Error::Domain {
            function: "lambert_w0",
            value: x,
        });
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    let q = E.mul_add(x, 1.0);
    if q < 0.5 {
        return Ok(branch_distance(q.max(0.0))? - 1.0);
    }
    halley_w(x)
}

/// `1 + W₀((q - 1)/e)` for `q ≥ 0`, evaluated without cancellation.
///
/// `q` is the distance `1 + e·x` to the branch point; for small `q` the result
/// behaves like `√(2q)`.
pub fn w0_branch_offset(q: f64) -> Result<f64> {
    if q.is_nan() || q < -BRANCH_TOL {
        return Err(Error::Domain {
            function: "w0_branch_offset",
            value: q,
        });
    }
    if q == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if q < 0.5 {
        return branch_distance(q.max(0.0));
    }
    Ok(1.0 + halley_w((q - 1.0) / E)?)
}

/// `h(d) = 1 - (1 - d)·eᵈ`, the branch-point distance as a function of `d = 1 + w`.
fn h(d: f64) -> f64 {
    if d < 1.0 {
        // Σ_{k≥2} (k-1)/k! · dᵏ, all terms positive for d > 0.
        // power = dᵏ/k!
        let mut power = d * d / 2.0;
        let mut sum = power;
        let mut k = 2.0;
        loop {
            k += 1.0;
            power *= d / k;
            let term = (k - 1.0) * power;
            sum += term;
            if term <= 1e-18 * sum {
                break sum;
            }
        }
    } else {
        1.0 - (1.0 - d) * d.exp()
    }
}

/// Solves `h(d) = q` by Halley iteration; `d ∈ [0, ∞)`.
fn branch_distance(q: f64) -> Result<f64> {
    if q == 0.0 {
        return Ok(0.0);
    }
    let p = (2.0 * q).sqrt();
    let mut d = p - p * p / 3.0 + 11.0 * p * p * p / 72.0;
    for _ in 0..MAX_HALLEY {
        let ed = d.exp();
        let f = h(d) - q;
        let f1 = d * ed;
        let f2 = (1.0 + d) * ed;
        let step = 2.0 * f * f1 / (2.0 * f1 * f1 - f * f2);
        let next = d - step;
        d = if next > 0.0 { next } else { 0.5 * d };
        if step.abs() <= 4.0 * f64::EPSILON * d {
            return Ok(d);
        }
    }
    Err(Error::NoConvergence {
        algorithm: "lambert_w0 near branch point",
        iterations: MAX_HALLEY,
    })
}

fn halley_w(x: f64) -> Result<f64> {
    if x == 0.0 {
        return Ok(0.0);
    }
    let mut w = if x <= 3.0 {
        x.ln_1p()
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };
    for _ in 0..MAX_HALLEY {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        let step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            return Ok(w);
        }
    }
    Err(Error::NoConvergence {
        algorithm: "lambert_w0",
        iterations: MAX_HALLEY,
    })
}
