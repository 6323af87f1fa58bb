//! Dense nonnegative matrices and their exact functionals.
//!
//! A [`PositiveMatrix`] is any square matrix with nonnegative entries. Its
//! [`MatrixClass`] depends only on the zero pattern: allowable matrices have a
//! positive entry in every row and every column, strictly positive matrices
//! have no zero entry at all. Zero is always tested exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pattern::BooleanPattern;
use crate::projective::SimplexPoint;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixClass {
    Outside,
    Allowable,
    StrictlyPositive,
}

impl MatrixClass {
    pub fn is_allowable(self) -> bool {
        !matches!(self, MatrixClass::Outside)
    }
}

/// Square matrix with nonnegative finite entries, stored row-major.
///
/// Serializes as an array of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<f64>>", into = "Vec<Vec<f64>>")]
pub struct PositiveMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl TryFrom<Vec<Vec<f64>>> for PositiveMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<f64>>) -> Result<Self> {
        PositiveMatrix::new(rows)
    }
}

impl From<PositiveMatrix> for Vec<Vec<f64>> {
    fn from(m: PositiveMatrix) -> Self {
        m.rows()
    }
}

impl PositiveMatrix {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::InvalidEntries("empty matrix".into()));
        }
        let mut data = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend(row);
        }
        Self::from_row_major(dim, data)
    }

    pub fn from_row_major(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: data.len(),
            });
        }
        if let Some(bad) = data.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::InvalidEntries(format!(
                "entries must be finite and nonnegative, found {bad}"
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Self { dim, data }
    }

    pub fn ones(dim: usize) -> Self {
        Self {
            dim,
            data: vec![1.0; dim * dim],
        }
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, v) in diag.iter().enumerate() {
            data[i * dim + i] = *v;
        }
        Self::from_row_major(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.data.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    pub fn classify(&self) -> MatrixClass {
        let q = self.dim;
        if self.data.iter().all(|&v| v > 0.0) {
            return MatrixClass::StrictlyPositive;
        }
        let rows_ok = (0..q).all(|i| (0..q).any(|j| self.get(i, j) > 0.0));
        let cols_ok = (0..q).all(|j| (0..q).any(|i| self.get(i, j) > 0.0));
        if rows_ok && cols_ok {
            MatrixClass::Allowable
        } else {
            MatrixClass::Outside
        }
    }

    pub fn is_allowable(&self) -> bool {
        self.classify().is_allowable()
    }

    pub fn ensure_allowable(&self) -> Result<()> {
        if self.is_allowable() {
            Ok(())
        } else {
            Err(Error::NotAllowable)
        }
    }

    pub fn pattern(&self) -> BooleanPattern {
        BooleanPattern::from_fn(self.dim, |i, j| self.get(i, j) > 0.0)
    }

    pub fn multiply(&self, other: &PositiveMatrix) -> Result<PositiveMatrix> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        let q = self.dim;
        let mut data = vec![0.0; q * q];
        mul_into(q, &self.data, &other.data, &mut data);
        Ok(PositiveMatrix { dim: q, data })
    }

    /// Transpose; the adjoint for the canonical scalar product.
    pub fn adjoint(&self) -> PositiveMatrix {
        let q = self.dim;
        let mut data = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                data[j * q + i] = self.data[i * q + j];
            }
        }
        PositiveMatrix { dim: q, data }
    }

    pub fn scaled(&self, factor: f64) -> Result<PositiveMatrix> {
        Self::from_row_major(self.dim, self.data.iter().map(|v| v * factor).collect())
    }

    /// Linear image `g x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let q = self.dim;
        debug_assert_eq!(x.len(), q);
        (0..q)
            .map(|i| {
                self.data[i * q..(i + 1) * q]
                    .iter()
                    .zip(x)
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.dim).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let q = self.dim;
        (0..q).map(|j| (0..q).map(|i| self.get(i, j)).sum()).collect()
    }

    pub fn max_entry(&self) -> f64 {
        self.data.iter().copied().fold(0.0, f64::max)
    }

    /// Entry sum, row-sum minimum, and the extreme values of `‖g x‖₁` over the
    /// simplex. The latter are the extreme column sums because `‖g x‖₁` is
    /// linear in `x` on the simplex.
    pub fn size_functionals(&self) -> Result<SizeFunctionals> {
        self.ensure_allowable()?;
        let rows = self.row_sums();
        let cols = self.col_sums();
        let n1: f64 = rows.iter().sum();
        let v1 = rows.iter().copied().fold(f64::INFINITY, f64::min);
        let opnorm = cols.iter().copied().fold(0.0, f64::max);
        let vmin = cols.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(SizeFunctionals {
            n1,
            v1,
            opnorm,
            vmin,
            ell: opnorm.ln().abs() + vmin.ln().abs(),
        })
    }

    /// Spectral radius and a nonnegative eigenvector on the simplex.
    ///
    /// Iterates `m + I` rather than `m`: same eigenvectors, but the Perron
    /// root becomes strictly dominant even for periodic patterns.
    pub fn perron(&self, tol: f64) -> Result<Perron> {
        self.perron_with_limit(tol, PERRON_MAX_ITER)
    }

    pub fn perron_with_limit(&self, tol: f64, max_iter: usize) -> Result<Perron> {
        if !(tol > 0.0) {
            return Err(Error::InvalidArgument("perron tolerance must be positive".into()));
        }
        self.ensure_allowable()?;
        let q = self.dim;
        let scale = self.max_entry();
        let a: Vec<f64> = self.data.iter().map(|v| v / scale).collect();
        let mut r = vec![1.0 / q as f64; q];
        let mut next = vec![0.0; q];
        let mut best = f64::INFINITY;
        for it in 1..=max_iter {
            // next = (a + I) r
            for i in 0..q {
                next[i] = r[i] + a[i * q..(i + 1) * q].iter().zip(&r).map(|(x, y)| x * y).sum::<f64>();
            }
            let norm: f64 = next.iter().sum();
            for v in next.iter_mut() {
                *v /= norm;
            }
            std::mem::swap(&mut r, &mut next);
            let lambda = norm - 1.0;
            let residual: f64 = (0..q)
                .map(|i| {
                    let ar: f64 = a[i * q..(i + 1) * q].iter().zip(&r).map(|(x, y)| x * y).sum();
                    (ar - lambda * r[i]).abs()
                })
                .sum();
            best = best.min(residual);
            if residual <= tol * lambda {
                // Recompute the root from the converged vector for full accuracy.
                let image: f64 = (0..q)
                    .map(|i| a[i * q..(i + 1) * q].iter().zip(&r).map(|(x, y)| x * y).sum::<f64>())
                    .sum();
                return Ok(Perron {
                    lambda: image * scale,
                    vector: SimplexPoint::from_normalized_unchecked(r),
                    iterations: it,
                    residual: residual * scale,
                });
            }
        }
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual: best * scale,
        })
    }
}

pub(crate) const PERRON_MAX_ITER: usize = 200_000;

/// `out = a * b` for row-major `q x q` buffers.
#[inline]
pub(crate) fn mul_into(q: usize, a: &[f64], b: &[f64], out: &mut [f64]) {
    for i in 0..q {
        for j in 0..q {
            let mut s = 0.0;
            for k in 0..q {
                s += a[i * q + k] * b[k * q + j];
            }
            out[i * q + j] = s;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeFunctionals {
    /// Sum of all entries.
    pub n1: f64,
    /// Smallest row sum.
    pub v1: f64,
    /// `sup ‖g x‖₁` over the simplex.
    pub opnorm: f64,
    /// `inf ‖g x‖₁` over the simplex.
    pub vmin: f64,
    /// `|ln opnorm| + |ln vmin|`.
    pub ell: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Perron {
    pub lambda: f64,
    pub vector: SimplexPoint,
    pub iterations: usize,
    pub residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[&[f64]]) -> PositiveMatrix {
        PositiveMatrix::new(rows.iter().map(|r| r.to_vec()).collect()).unwrap()
    }

    #[test]
    fn classify_examples() {
        assert_eq!(PositiveMatrix::identity(2).classify(), MatrixClass::Allowable);
        assert_eq!(PositiveMatrix::ones(2).classify(), MatrixClass::StrictlyPositive);
        assert_eq!(m(&[&[1.0, 0.0], &[1.0, 0.0]]).classify(), MatrixClass::Outside);
        assert_eq!(m(&[&[0.0, 0.0], &[1.0, 1.0]]).classify(), MatrixClass::Outside);
    }

    #[test]
    fn construction_rejects_bad_entries() {
        assert!(PositiveMatrix::new(vec![vec![1.0, -1.0], vec![0.0, 1.0]]).is_err());
        assert!(PositiveMatrix::new(vec![vec![1.0, f64::NAN], vec![0.0, 1.0]]).is_err());
        assert!(matches!(
            PositiveMatrix::new(vec![vec![1.0, 1.0], vec![0.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(PositiveMatrix::new(vec![]).is_err());
    }

    #[test]
    fn multiply_and_adjoint_examples() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        assert_eq!(a.adjoint(), m(&[&[1.0, 3.0], &[2.0, 4.0]]));

        let p = PositiveMatrix::identity(2).multiply(&PositiveMatrix::ones(2)).unwrap();
        assert_eq!(p, PositiveMatrix::ones(2));
        assert_eq!(p.classify(), MatrixClass::StrictlyPositive);

        let u = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        let l = m(&[&[1.0, 0.0], &[1.0, 1.0]]);
        let ul = u.multiply(&l).unwrap();
        assert_eq!(ul, m(&[&[2.0, 1.0], &[1.0, 1.0]]));
        assert_eq!(ul.classify(), MatrixClass::StrictlyPositive);

        assert!(matches!(
            a.multiply(&PositiveMatrix::identity(3)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn size_functionals_examples() {
        let s = m(&[&[1.0, 2.0], &[3.0, 4.0]]).size_functionals().unwrap();
        assert_eq!((s.n1, s.v1, s.opnorm, s.vmin), (10.0, 3.0, 6.0, 4.0));
        assert!((s.ell - (6f64.ln() + 4f64.ln())).abs() < 1e-15);

        let s = PositiveMatrix::identity(2).size_functionals().unwrap();
        assert_eq!((s.n1, s.v1, s.opnorm, s.vmin, s.ell), (2.0, 1.0, 1.0, 1.0, 0.0));

        let s = PositiveMatrix::ones(2).size_functionals().unwrap();
        assert_eq!((s.n1, s.v1, s.opnorm, s.vmin), (4.0, 2.0, 2.0, 2.0));
        assert!((s.ell - 2.0 * 2f64.ln()).abs() < 1e-15);

        assert_eq!(
            m(&[&[1.0, 0.0], &[1.0, 0.0]]).size_functionals(),
            Err(Error::NotAllowable)
        );
    }

    #[test]
    fn opnorm_and_vmin_match_grid_search() {
        // Oracle: brute-force evaluation of ‖g x‖₁ on a fine grid of the simplex.
        let g = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let (mut hi, mut lo) = (0.0f64, f64::INFINITY);
        for k in 0..=10_000 {
            let s = k as f64 / 10_000.0;
            let v: f64 = g.apply(&[s, 1.0 - s]).iter().sum();
            hi = hi.max(v);
            lo = lo.min(v);
        }
        let f = g.size_functionals().unwrap();
        assert!((f.opnorm - hi).abs() < 1e-12);
        assert!((f.vmin - lo).abs() < 1e-12);
    }

    #[test]
    fn perron_examples() {
        let p = m(&[&[2.0, 1.0], &[1.0, 2.0]]).perron(1e-12).unwrap();
        assert!((p.lambda - 3.0).abs() < 1e-10);
        assert!((p.vector.coords()[0] - 0.5).abs() < 1e-10);

        let p = PositiveMatrix::diagonal(&[2.0, 3.0]).unwrap().perron(1e-12).unwrap();
        assert!((p.lambda - 3.0).abs() < 1e-10);
        assert!(p.vector.coords()[0] < 1e-10);

        // Periodic pattern: plain power iteration would oscillate.
        let p = m(&[&[0.0, 2.0], &[2.0, 0.0]]).perron(1e-12).unwrap();
        assert!((p.lambda - 2.0).abs() < 1e-10);
        assert!((p.vector.coords()[0] - 0.5).abs() < 1e-10);
    }

    #[test]
    fn perron_reports_non_convergence() {
        // Jordan block: eigenvector converges only like 1/k.
        let j = m(&[&[1.0, 1.0], &[0.0, 1.0]]);
        match j.perron_with_limit(1e-14, 50) {
            Err(Error::NoConvergence { iterations, residual }) => {
                assert_eq!(iterations, 50);
                assert!(residual.is_finite() && residual > 0.0);
            }
            other => panic!("expected NoConvergence, got {other:?}"),
        }
    }

    #[test]
    fn serde_is_row_major() {
        let a = m(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1.0,2.0],[3.0,4.0]]");
        let b: PositiveMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
        assert!(serde_json::from_str::<PositiveMatrix>("[[1.0,-2.0],[3.0,4.0]]").is_err());
    }
}
