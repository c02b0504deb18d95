//! Dense kernels: products, Gram matrices on supports, Jacobi eigenvalue
//! extremes, Cholesky solves and the soft-threshold operator.
//!
//! Everything accumulates in `f64` with a fixed summation order, so results
//! are bit-reproducible run to run.

use crate::ensembles::MeasurementMatrix;
use crate::error::{Error, Result};

/// Dot product with four independent accumulators (fixed order).
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let ca = a.chunks_exact(4);
    let cb = b.chunks_exact(4);
    let tail: f64 = ca
        .remainder()
        .iter()
        .zip(cb.remainder())
        .map(|(x, y)| x * y)
        .sum();
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|v| v.abs()).sum()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// `M v`, or `M^T v` when `transposed`.
pub fn matvec(m: &MeasurementMatrix, v: &[f64], transposed: bool) -> Result<Vec<f64>> {
    if transposed {
        if v.len() != m.rows() {
            return Err(Error::DimensionMismatch {
                expected: m.rows(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; m.cols()];
        matvec_t_into(m, v, &mut out);
        Ok(out)
    } else {
        if v.len() != m.cols() {
            return Err(Error::DimensionMismatch {
                expected: m.cols(),
                got: v.len(),
            });
        }
        let mut out = vec![0.0; m.rows()];
        matvec_into(m, v, &mut out);
        Ok(out)
    }
}

pub(crate) fn matvec_into(m: &MeasurementMatrix, v: &[f64], out: &mut [f64]) {
    for (i, o) in out.iter_mut().enumerate() {
        *o = dot(m.row(i), v);
    }
}

pub(crate) fn matvec_t_into(m: &MeasurementMatrix, w: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (i, &wi) in w.iter().enumerate() {
        if wi != 0.0 {
            axpy(wi, m.row(i), out);
        }
    }
}

/// Square symmetric matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricDenseMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SymmetricDenseMatrix {
    /// Checks exact symmetry.
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidDimension("symmetric matrix of dimension 0".into()));
        }
        if data.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: data.len(),
            });
        }
        for i in 0..dim {
            for j in i + 1..dim {
                if data[i * dim + j] != data[j * dim + i] {
                    return Err(Error::InvalidInput(format!("matrix not symmetric at ({i}, {j})")));
                }
            }
        }
        Ok(SymmetricDenseMatrix { dim, data })
    }

    pub fn identity(dim: usize) -> Self {
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        SymmetricDenseMatrix { dim, data }
    }

    pub fn diagonal(diag: &[f64]) -> Self {
        let dim = diag.len();
        let mut data = vec![0.0; dim * dim];
        for (i, d) in diag.iter().enumerate() {
            data[i * dim + i] = *d;
        }
        SymmetricDenseMatrix { dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.dim + j]
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        (0..self.dim)
            .map(|i| dot(&self.data[i * self.dim..(i + 1) * self.dim], v))
            .collect()
    }
}

/// `G^T G` for `G` the columns of `m` listed in `support`, in that order.
pub fn gram_on_support(m: &MeasurementMatrix, support: &[usize]) -> Result<SymmetricDenseMatrix> {
    if support.is_empty() {
        return Err(Error::InvalidInput("empty support".into()));
    }
    let mut seen = vec![false; m.cols()];
    for &j in support {
        if j >= m.cols() {
            return Err(Error::InvalidInput(format!(
                "support index {j} out of range for {} columns",
                m.cols()
            )));
        }
        if std::mem::replace(&mut seen[j], true) {
            return Err(Error::InvalidInput(format!("duplicate support index {j}")));
        }
    }
    let cols: Vec<Vec<f64>> = support.iter().map(|&j| m.column(j)).collect();
    // Sign ensembles: form inner products as integer / n so unit columns are
    // exactly 1.
    let exact_signs = m.ensemble().is_sign();
    let inner = |a: &[f64], b: &[f64]| {
        if exact_signs {
            let agree = a.iter().zip(b).filter(|(x, y)| (**x > 0.0) == (**y > 0.0)).count() as i64;
            (2 * agree - a.len() as i64) as f64 / a.len() as f64
        } else {
            dot(a, b)
        }
    };
    let k = support.len();
    let mut data = vec![0.0; k * k];
    for a in 0..k {
        for b in a..k {
            let v = inner(&cols[a], &cols[b]);
            data[a * k + b] = v;
            data[b * k + a] = v;
        }
    }
    Ok(SymmetricDenseMatrix { dim: k, data })
}

const JACOBI_MAX_SWEEPS: usize = 100;

/// Smallest and largest eigenvalue by cyclic Jacobi rotations.
///
/// Sweeps stop once the off-diagonal Frobenius norm is at most `tol`; by
/// Weyl's inequality the diagonal then holds every eigenvalue to within
/// `tol`.
pub fn sym_eigen_extremes(s: &SymmetricDenseMatrix, tol: f64) -> Result<(f64, f64)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let n = s.dim;
    let mut a = s.data.clone();
    let off_norm = |a: &[f64]| {
        let mut acc = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                acc += 2.0 * a[i * n + j] * a[i * n + j];
            }
        }
        acc.sqrt()
    };

    let mut sweeps = 0;
    while off_norm(&a) > tol {
        if sweeps == JACOBI_MAX_SWEEPS {
            return Err(Error::NoConvergence { iterations: sweeps });
        }
        sweeps += 1;
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * c;
                for k in 0..n {
                    let akp = a[k * n + p];
                    let akq = a[k * n + q];
                    a[k * n + p] = c * akp - sn * akq;
                    a[k * n + q] = sn * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p * n + k];
                    let aqk = a[q * n + k];
                    a[p * n + k] = c * apk - sn * aqk;
                    a[q * n + k] = sn * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
            }
        }
    }
    let diag = (0..n).map(|i| a[i * n + i]);
    let (lo, hi) = diag.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), d| {
        (lo.min(d), hi.max(d))
    });
    Ok((lo, hi))
}

/// `sign(v_i) * max(|v_i| - tau, 0)`
pub fn soft_threshold(v: &[f64], tau: f64) -> Vec<f64> {
    v.iter().map(|&x| shrink(x, tau)).collect()
}

#[inline]
pub(crate) fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

const PIVOT_REL_TOL: f64 = 1e-12;

/// Lower-triangular Cholesky factor `S = L L^T`, row-major.
#[derive(Debug, Clone)]
pub struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

impl Cholesky {
    /// Fails with [`Error::Singular`] when a pivot drops to
    /// `1e-12 * max diagonal` or below.
    pub fn factor(s: &SymmetricDenseMatrix) -> Result<Self> {
        Self::factor_raw(s.dim, &s.data)
    }

    pub(crate) fn factor_raw(n: usize, s: &[f64]) -> Result<Self> {
        let max_diag = (0..n).map(|i| s[i * n + i]).fold(0.0f64, f64::max);
        let threshold = PIVOT_REL_TOL * max_diag;
        let mut l = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..=i {
                let partial = dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                let v = s[i * n + j] - partial;
                if i == j {
                    if !(v > threshold) {
                        return Err(Error::Singular { index: i, pivot: v });
                    }
                    l[i * n + i] = v.sqrt();
                } else {
                    l[i * n + j] = v / l[j * n + j];
                }
            }
        }
        Ok(Cholesky { dim: n, l })
    }

    /// Greedy factorisation over a maximal linearly independent subset of
    /// the index set, visited in order: an index whose pivot falls to
    /// `rel_tol * max diagonal` is skipped. Returns the factor of the kept
    /// principal submatrix and the kept indices.
    pub(crate) fn factor_independent(n: usize, s: &[f64], rel_tol: f64) -> (Self, Vec<usize>) {
        let max_diag = (0..n).map(|i| s[i * n + i]).fold(0.0f64, f64::max);
        let threshold = rel_tol * max_diag;
        let mut kept: Vec<usize> = Vec::new();
        // rows of L for kept indices, each of length n (only prefix used)
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for i in 0..n {
            let r = kept.len();
            let mut row = vec![0.0; r + 1];
            for (a, &ka) in kept.iter().enumerate() {
                let partial = dot(&row[..a], &rows[a][..a]);
                row[a] = (s[i * n + ka] - partial) / rows[a][a];
            }
            let pivot = s[i * n + i] - dot(&row[..r], &row[..r]);
            if pivot > threshold {
                row[r] = pivot.sqrt();
                rows.push(row);
                kept.push(i);
            }
        }
        let k = kept.len();
        let mut l = vec![0.0; k * k];
        for (i, row) in rows.iter().enumerate() {
            l[i * k..i * k + row.len()].copy_from_slice(row);
        }
        (Cholesky { dim: k, l }, kept)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub(crate) fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim;
        for i in 0..n {
            let s = dot(&self.l[i * n..i * n + i], &x[..i]);
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
        for i in (0..n).rev() {
            let mut s = 0.0;
            for k in i + 1..n {
                s += self.l[k * n + i] * x[k];
            }
            x[i] = (x[i] - s) / self.l[i * n + i];
        }
    }
}

/// Solves `S x = b` for symmetric positive definite `S`, with up to three
/// rounds of iterative refinement to meet `||S x - b|| <= tol ||b||`.
pub fn solve_spd(s: &SymmetricDenseMatrix, b: &[f64], tol: f64) -> Result<Vec<f64>> {
    if b.len() != s.dim {
        return Err(Error::DimensionMismatch {
            expected: s.dim,
            got: b.len(),
        });
    }
    let chol = Cholesky::factor(s)?;
    let mut x = chol.solve(b);
    let target = tol * norm2(b);
    for round in 0..=3 {
        let sx = s.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&sx).map(|(bi, si)| bi - si).collect();
        if norm2(&r) <= target {
            return Ok(x);
        }
        if round == 3 {
            break;
        }
        let dx = chol.solve(&r);
        axpy(1.0, &dx, &mut x);
    }
    Err(Error::NoConvergence { iterations: 3 })
}

/// Gaussian elimination with partial pivoting on a small square system.
/// Returns `None` when a pivot is below `1e-12` times the largest entry.
pub(crate) fn lu_solve(n: usize, a: &[f64], b: &[f64]) -> Option<Vec<f64>> {
    let mut m = a.to_vec();
    let mut x = b.to_vec();
    let scale = m.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    if scale == 0.0 {
        return None;
    }
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i * n + col].abs().total_cmp(&m[j * n + col].abs()))?;
        if m[piv * n + col].abs() <= 1e-12 * scale {
            return None;
        }
        if piv != col {
            for k in 0..n {
                m.swap(col * n + k, piv * n + k);
            }
            x.swap(col, piv);
        }
        for r in col + 1..n {
            let f = m[r * n + col] / m[col * n + col];
            if f != 0.0 {
                for k in col..n {
                    m[r * n + k] -= f * m[col * n + k];
                }
                x[r] -= f * x[col];
            }
        }
    }
    for i in (0..n).rev() {
        let mut s = x[i];
        for k in i + 1..n {
            s -= m[i * n + k] * x[k];
        }
        x[i] = s / m[i * n + i];
    }
    Some(x)
}
