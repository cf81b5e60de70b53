use std::ops::Index;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A finite, non-empty complex column vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Dimension("vector must have at least one entry".into()));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("vector entries must be finite".into()));
        }
        Ok(Self(entries))
    }

    pub fn from_real(entries: &[f64]) -> Result<Self> {
        Self::new(entries.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "vector must have at least one entry");
        Self(vec![Complex64::new(0.0, 0.0); dim])
    }

    /// The `k`-th standard basis vector.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.0[k] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `selfᴴ other`.
    pub fn dot(&self, other: &ComplexVector) -> Complex64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scaled(&self, s: f64) -> ComplexVector {
        ComplexVector(self.0.iter().map(|z| z * s).collect())
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(&self) -> Option<ComplexVector> {
        let n = self.norm();
        (n > 0.0).then(|| self.scaled(1.0 / n))
    }
}

impl Index<usize> for ComplexVector {
    type Output = Complex64;

    fn index(&self, i: usize) -> &Complex64 {
        &self.0[i]
    }
}

/// Dense Hermitian matrix stored row-major. Every constructor mirrors the
/// upper triangle, so `M = Mᴴ` holds exactly in storage.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianMatrix {
    /// Builds a matrix from the upper triangle of `f(row, col)`; the diagonal
    /// keeps only its real part.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        assert!(n > 0, "matrix must be at least 1x1");
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for r in 0..n {
            data[r * n + r] = Complex64::new(f(r, r).re, 0.0);
            for c in r + 1..n {
                let z = f(r, c);
                data[r * n + c] = z;
                data[c * n + r] = z.conj();
            }
        }
        Self { n, data }
    }

    /// Symmetrizes an arbitrary square matrix as `(A + Aᴴ)/2`.
    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension("matrix must be square and non-empty".into()));
        }
        if rows.iter().flatten().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Contract("matrix entries must be finite".into()));
        }
        Ok(Self::from_fn(n, |r, c| (rows[r][c] + rows[c][r].conj()) * 0.5))
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_fn(n, |_, _| Complex64::new(0.0, 0.0))
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, s: f64) -> Self {
        Self::from_fn(n, |r, c| {
            if r == c {
                Complex64::new(s, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self::from_fn(diag.len(), |r, c| {
            if r == c {
                Complex64::new(diag[r], 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.n + c]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    /// `Re tr(self · other)`; the imaginary part vanishes for Hermitian pairs.
    pub fn trace_product(&self, other: &HermitianMatrix) -> f64 {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut acc = 0.0;
        for r in 0..n {
            for c in 0..n {
                // tr(AB) = Σ A_rc B_cr and B_cr = conj(B_rc)
                acc += (self.data[r * n + c] * other.data[r * n + c].conj()).re;
            }
        }
        acc
    }

    /// `vᴴ M v`, real for Hermitian `M`.
    pub fn quadratic_form(&self, v: &ComplexVector) -> f64 {
        assert_eq!(self.n, v.dim());
        let n = self.n;
        let mut acc = Complex64::new(0.0, 0.0);
        for r in 0..n {
            let mut row = Complex64::new(0.0, 0.0);
            for c in 0..n {
                row += self.data[r * n + c] * v[c];
            }
            acc += v[r].conj() * row;
        }
        acc.re
    }

    pub fn mul_vec(&self, v: &ComplexVector) -> ComplexVector {
        assert_eq!(self.n, v.dim());
        let n = self.n;
        ComplexVector(
            (0..n)
                .map(|r| (0..n).map(|c| self.data[r * n + c] * v[c]).sum())
                .collect(),
        )
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn scale(&self, s: f64) -> HermitianMatrix {
        HermitianMatrix {
            n: self.n,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &HermitianMatrix) -> HermitianMatrix {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> HermitianMatrix {
        self.axpy(-1.0, other)
    }

    /// `self + a · other`.
    pub fn axpy(&self, a: f64, other: &HermitianMatrix) -> HermitianMatrix {
        assert_eq!(self.n, other.n);
        HermitianMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(x, y)| x + y * a)
                .collect(),
        }
    }

    /// `self + a · v vᴴ`.
    pub fn add_outer(&self, a: f64, v: &ComplexVector) -> HermitianMatrix {
        assert_eq!(self.n, v.dim());
        let n = self.n;
        let mut out = self.clone();
        for r in 0..n {
            for c in 0..n {
                out.data[r * n + c] += v[r] * v[c].conj() * a;
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Lower-triangular Cholesky factor `L` with `M = L Lᴴ`, or `None` when
    /// `M` is not numerically positive definite.
    pub fn cholesky(&self) -> Option<Vec<Complex64>> {
        let n = self.n;
        let mut l = vec![Complex64::new(0.0, 0.0); n * n];
        for j in 0..n {
            let mut d = self.data[j * n + j].re;
            for k in 0..j {
                d -= l[j * n + k].norm_sqr();
            }
            if !(d > 0.0) {
                return None;
            }
            let djj = d.sqrt();
            l[j * n + j] = Complex64::new(djj, 0.0);
            for i in j + 1..n {
                let mut s = self.data[i * n + j];
                for k in 0..j {
                    s -= l[i * n + k] * l[j * n + k].conj();
                }
                l[i * n + j] = s / djj;
            }
        }
        Some(l)
    }

    /// `(M⁻¹, ln det M)` for positive definite `M`.
    pub fn inverse_and_logdet(&self) -> Option<(HermitianMatrix, f64)> {
        let n = self.n;
        let l = self.cholesky()?;
        let logdet = 2.0 * (0..n).map(|i| l[i * n + i].re.ln()).sum::<f64>();
        // Solve L X = I column by column, then M⁻¹ = Xᴴ X.
        let mut x = vec![Complex64::new(0.0, 0.0); n * n];
        for col in 0..n {
            for i in 0..n {
                let mut s = if i == col {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                };
                for k in 0..i {
                    s -= l[i * n + k] * x[k * n + col];
                }
                x[i * n + col] = s / l[i * n + i];
            }
        }
        let inv = HermitianMatrix::from_fn(n, |r, c| {
            (0..n).map(|k| x[k * n + r].conj() * x[k * n + c]).sum()
        });
        Some((inv, logdet))
    }
}

/// `h hᴴ`; Hermitian and of rank at most one.
pub fn outer(h: &ComplexVector) -> HermitianMatrix {
    HermitianMatrix::from_fn(h.dim(), |r, c| h[r] * h[c].conj())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn outer_of_zero_vector_is_zero() {
        let m = outer(&ComplexVector::zeros(3));
        assert_eq!(m, HermitianMatrix::zeros(3));
    }

    #[test]
    fn outer_of_basis_vector() {
        let m = outer(&ComplexVector::basis(3, 0));
        for r in 0..3 {
            for col in 0..3 {
                let expected = if r == 0 && col == 0 { 1.0 } else { 0.0 };
                assert_eq!(m.get(r, col), c(expected, 0.0));
            }
        }
    }

    #[test]
    fn outer_of_one_i() {
        let h = ComplexVector::new(vec![c(1.0, 0.0), c(0.0, 1.0)]).unwrap();
        let m = outer(&h);
        assert_eq!(m.get(0, 0), c(1.0, 0.0));
        assert_eq!(m.get(0, 1), c(0.0, -1.0));
        assert_eq!(m.get(1, 0), c(0.0, 1.0));
        assert_eq!(m.get(1, 1), c(1.0, 0.0));
    }

    #[test]
    fn rejects_non_finite_and_empty() {
        assert!(ComplexVector::new(vec![]).is_err());
        assert!(ComplexVector::new(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn from_rows_symmetrizes() {
        let m = HermitianMatrix::from_rows(&[
            vec![c(1.0, 0.5), c(2.0, 1.0)],
            vec![c(0.0, 0.0), c(3.0, 0.0)],
        ])
        .unwrap();
        assert_eq!(m.get(0, 1), m.get(1, 0).conj());
        assert_eq!(m.get(0, 0).im, 0.0);
    }

    #[test]
    fn trace_product_matches_quadratic_form_for_rank_one() {
        let h = ComplexVector::new(vec![c(0.3, -0.2), c(1.1, 0.4), c(-0.5, 0.9)]).unwrap();
        let q = HermitianMatrix::from_fn(3, |r, col| c((r + 2 * col) as f64 * 0.1, (r as f64 - col as f64) * 0.2))
            .add(&HermitianMatrix::scaled_identity(3, 2.0));
        let lhs = q.trace_product(&outer(&h));
        let rhs = q.quadratic_form(&h);
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn inverse_of_positive_definite_matrix() {
        let a = HermitianMatrix::from_fn(3, |r, col| {
            if r == col {
                c(4.0 + r as f64, 0.0)
            } else {
                c(0.5, 0.25 * (col as f64 - r as f64))
            }
        });
        let (inv, logdet) = a.inverse_and_logdet().unwrap();
        for k in 0..3 {
            let e = ComplexVector::basis(3, k);
            let back = a.mul_vec(&inv.mul_vec(&e));
            for r in 0..3 {
                let expected = if r == k { 1.0 } else { 0.0 };
                assert!((back[r] - c(expected, 0.0)).norm() < 1e-12);
            }
        }
        assert!(logdet.is_finite());
        assert!(HermitianMatrix::scaled_identity(2, -1.0).cholesky().is_none());
    }
}
