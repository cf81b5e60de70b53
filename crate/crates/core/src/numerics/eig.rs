use num_complex::Complex64;

use super::dense::symmetric_jacobi;
use super::matrix::{ComplexVector, HermitianMatrix};
use crate::error::Result;

/// Spectrum of a Hermitian matrix: ascending eigenvalues with matching
/// orthonormal eigenvectors.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<ComplexVector>,
}

/// Full eigen-decomposition of a Hermitian matrix.
///
/// `M = A + iB` is embedded as the real symmetric `[[A, -B], [B, A]]`, whose
/// spectrum is that of `M` with every eigenvalue doubled. Complex eigenvectors
/// `x + iy` are then extracted from each eigenvalue cluster by pivoted
/// Gram-Schmidt, which discards the `i·v` partner of every accepted `v`.
pub fn hermitian_eig(m: &HermitianMatrix) -> Result<HermitianEigen> {
    let n = m.dim();
    let n2 = 2 * n;
    let mut emb = vec![0.0; n2 * n2];
    for r in 0..n {
        for c in 0..n {
            let z = m.get(r, c);
            emb[r * n2 + c] = z.re;
            emb[(r + n) * n2 + (c + n)] = z.re;
            emb[r * n2 + (c + n)] = -z.im;
            emb[(r + n) * n2 + c] = z.im;
        }
    }
    let real = symmetric_jacobi(&emb, n2)?;

    let mut order: Vec<usize> = (0..n2).collect();
    order.sort_by(|&a, &b| real.values[a].total_cmp(&real.values[b]));

    let norm = m.frobenius_norm();
    let cluster_tol = 1e-11 * norm.max(f64::MIN_POSITIVE);

    let as_complex = |k: usize| -> Vec<Complex64> {
        (0..n)
            .map(|r| Complex64::new(real.vectors[r * n2 + k], real.vectors[(r + n) * n2 + k]))
            .collect()
    };

    let mut accepted: Vec<Vec<Complex64>> = Vec::with_capacity(n);
    let mut start = 0;
    while start < n2 && accepted.len() < n {
        let mut end = start + 1;
        while end < n2
            && real.values[order[end]] - real.values[order[end - 1]] <= cluster_tol
        {
            end += 1;
        }
        let mut candidates: Vec<Vec<Complex64>> =
            order[start..end].iter().map(|&k| as_complex(k)).collect();
        let wanted = (end - start).div_ceil(2);
        let mut taken = 0;
        while taken < wanted && accepted.len() < n {
            // Project every candidate against the accepted basis and keep the
            // one with the largest residual.
            let mut best: Option<(usize, f64, Vec<Complex64>)> = None;
            for (idx, cand) in candidates.iter().enumerate() {
                let mut r = cand.clone();
                for q in &accepted {
                    let coeff: Complex64 = q.iter().zip(&r).map(|(a, b)| a.conj() * b).sum();
                    for (ri, qi) in r.iter_mut().zip(q) {
                        *ri -= coeff * qi;
                    }
                }
                let rn = r.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                if best.as_ref().is_none_or(|b| rn > b.1) {
                    best = Some((idx, rn, r));
                }
            }
            let Some((idx, rn, r)) = best else { break };
            if rn < 1e-6 {
                break;
            }
            accepted.push(r.into_iter().map(|z| z / rn).collect());
            candidates.swap_remove(idx);
            taken += 1;
        }
        start = end;
    }

    let mut pairs: Vec<(f64, ComplexVector)> = accepted
        .into_iter()
        .map(|v| {
            let v = canonical_phase(v);
            let vec = ComplexVector::new(v).expect("eigenvector entries are finite");
            (m.quadratic_form(&vec), vec)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let (values, vectors) = pairs.into_iter().unzip();
    Ok(HermitianEigen { values, vectors })
}

/// Rotates the phase so the largest-magnitude entry is real and positive.
fn canonical_phase(mut v: Vec<Complex64>) -> Vec<Complex64> {
    let pivot = v
        .iter()
        .copied()
        .fold(Complex64::new(0.0, 0.0), |acc, z| {
            if z.norm_sqr() > acc.norm_sqr() * (1.0 + 1e-12) {
                z
            } else {
                acc
            }
        });
    let mag = pivot.norm();
    if mag > 0.0 {
        let phase = pivot.conj() / mag;
        for z in &mut v {
            *z *= phase;
        }
    }
    v
}

/// Smallest eigenvalue and a unit eigenvector for it.
pub fn min_eigpair(m: &HermitianMatrix) -> Result<(f64, ComplexVector)> {
    let eig = hermitian_eig(m)?;
    let v = eig.vectors.into_iter().next().expect("non-empty spectrum");
    Ok((eig.values[0], v))
}

/// `λ_min(M) ≥ -tol`. A non-converging decomposition reports `false`.
pub fn is_psd(m: &HermitianMatrix, tol: f64) -> bool {
    min_eigpair(m).map(|(l, _)| l >= -tol).unwrap_or(false)
}
