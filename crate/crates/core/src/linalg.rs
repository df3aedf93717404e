//! Vector kernels and sparse direct factorizations.

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu};
use faer::{Col, Mat, Side};

use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dot: length mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    assert_eq!(x.len(), y.len(), "axpy: length mismatch");
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "sub: length mismatch");
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    assert_eq!(a.len(), b.len(), "add: length mismatch");
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scale(a: &[f64], s: f64) -> Vec<f64> {
    a.iter().map(|x| s * x).collect()
}

pub fn concat(parts: &[&[f64]]) -> Vec<f64> {
    parts.iter().flat_map(|p| p.iter().copied()).collect()
}

/// Relative difference `‖a − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let nb = norm2(b);
    let d = norm2(&sub(a, b));
    if nb > 0.0 {
        d / nb
    } else {
        d
    }
}

pub fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

pub(crate) fn col_from(v: &[f64]) -> Col<f64> {
    Col::from_fn(v.len(), |i| v[i])
}

pub(crate) fn vec_from(c: &Col<f64>) -> Vec<f64> {
    (0..c.nrows()).map(|i| c[i]).collect()
}

/// Kind of sparse factorization to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorKind {
    /// Sparse Cholesky; requires a symmetric positive definite matrix.
    Cholesky,
    /// Sparse LU with partial pivoting; used for indefinite saddle-point
    /// matrices.
    Lu,
}

// Only one factorization lives per matrix, so the size gap is harmless.
#[allow(clippy::large_enum_variant)]
enum Inner {
    Empty,
    Llt(Llt<usize, f64>),
    Lu(Lu<usize, f64>),
}

/// A factorized square sparse matrix, reusable for many right-hand sides.
pub struct Factorization {
    n: usize,
    kind: FactorKind,
    inner: Inner,
}

impl std::fmt::Debug for Factorization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Factorization")
            .field("n", &self.n)
            .field("kind", &self.kind)
            .finish()
    }
}

impl Factorization {
    pub fn new(matrix: &CsrMatrix, kind: FactorKind, what: &str) -> Result<Self> {
        let (n, m) = matrix.shape();
        if n != m {
            return Err(Error::Dimension(format!("{what} is {n}x{m}, expected square")));
        }
        if n == 0 {
            return Ok(Self {
                n,
                kind,
                inner: Inner::Empty,
            });
        }
        let fail = |reason: String| Error::Factorization {
            what: what.to_string(),
            reason,
        };
        let a = matrix.to_faer()?;
        let inner = match kind {
            FactorKind::Cholesky => Inner::Llt(a.sp_cholesky(Side::Lower).map_err(|e| fail(format!("{e:?}")))?),
            FactorKind::Lu => Inner::Lu(a.sp_lu().map_err(|e| fail(format!("{e:?}")))?),
        };
        let f = Self { n, kind, inner };
        // Sparse LU reports success on exactly singular pivots; catch that
        // through a finite-solution probe.
        let probe = f.solve(&vec![1.0; n]);
        if probe.iter().any(|v| !v.is_finite()) {
            return Err(fail("singular matrix (non-finite solve)".into()));
        }
        Ok(f)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn kind(&self) -> FactorKind {
        self.kind
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n, "solve: rhs has wrong length");
        match &self.inner {
            Inner::Empty => Vec::new(),
            Inner::Llt(l) => vec_from(&l.solve(col_from(rhs))),
            Inner::Lu(l) => vec_from(&l.solve(col_from(rhs))),
        }
    }
}

/// Singular values of a dense matrix, descending.
pub fn singular_values(m: &Mat<f64>) -> Result<Vec<f64>> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Ok(Vec::new());
    }
    m.singular_values()
        .map_err(|e| Error::Factorization {
            what: "dense SVD".into(),
            reason: format!("{e:?}"),
        })
}

/// Dense Cholesky factor used for small per-segment blocks.
#[derive(Debug)]
pub struct DenseSpd {
    n: usize,
    llt: Option<faer::linalg::solvers::Llt<f64>>,
}

impl DenseSpd {
    pub fn new(m: &Mat<f64>, what: &str) -> Result<Self> {
        let n = m.nrows();
        if n == 0 {
            return Ok(Self { n, llt: None });
        }
        let llt = m.llt(Side::Lower).map_err(|e| Error::Factorization {
            what: what.to_string(),
            reason: format!("{e:?}"),
        })?;
        Ok(Self { n, llt: Some(llt) })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        assert_eq!(rhs.len(), self.n);
        match &self.llt {
            None => Vec::new(),
            Some(l) => vec_from(&l.solve(col_from(rhs))),
        }
    }
}

/// Dense general solve (partial-pivot LU); `None` for empty systems.
pub fn dense_solve(m: &Mat<f64>, rhs: &Mat<f64>) -> Mat<f64> {
    if m.nrows() == 0 {
        return Mat::zeros(0, rhs.ncols());
    }
    m.partial_piv_lu().solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd3() -> CsrMatrix {
        CsrMatrix::from_dense(&[
            vec![4.0, -1.0, 0.0],
            vec![-1.0, 4.0, -1.0],
            vec![0.0, -1.0, 4.0],
        ])
    }

    #[test]
    fn cholesky_and_lu_agree() {
        let a = spd3();
        let b = [1.0, 2.0, 3.0];
        let x1 = Factorization::new(&a, FactorKind::Cholesky, "a").unwrap().solve(&b);
        let x2 = Factorization::new(&a, FactorKind::Lu, "a").unwrap().solve(&b);
        assert!(rel_diff(&x1, &x2) < 1e-14);
        assert!(rel_diff(&a.matvec(&x1), &b) < 1e-14);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = CsrMatrix::from_dense(&[vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(Factorization::new(&a, FactorKind::Cholesky, "saddle").is_err());
        let x = Factorization::new(&a, FactorKind::Lu, "saddle").unwrap().solve(&[1.0, 2.0]);
        assert!((x[0] - 2.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn singular_lu_is_reported() {
        let a = CsrMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 1.0]]);
        assert!(Factorization::new(&a, FactorKind::Lu, "singular").is_err());
    }

    #[test]
    fn empty_factorization() {
        let f = Factorization::new(&CsrMatrix::zeros(0, 0), FactorKind::Lu, "empty").unwrap();
        assert!(f.solve(&[]).is_empty());
    }
}
