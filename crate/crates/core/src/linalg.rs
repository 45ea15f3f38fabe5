//! Dense kernels: row-major matrices, orthonormal bases, projection and a
//! normal-equations pseudoinverse used as a reference oracle.

use crate::error::{Error, Result};

/// Plain dense vector. All kernels work on slices.
pub type DenseVector = Vec<f64>;

/// Default relative rank tolerance for [`orthonormalize`].
pub const DEFAULT_RANK_TOL: f64 = 1e-10;

/// Orthonormality tolerance enforced by [`OrthonormalBasis`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from row-major data, rejecting non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: rows * cols,
                found: data.len(),
            });
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(Error::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::from_row_major(rows.len(), cols, data)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows, columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != rows {
                return Err(Error::DimensionMismatch {
                    expected: rows,
                    found: col.len(),
                });
            }
            for (i, v) in col.iter().enumerate() {
                m.set(i, j, *v);
            }
        }
        if let Some(pos) = m.data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> DenseVector {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                let src = other.row(k);
                for (o, b) in out.row_mut(i).iter_mut().zip(src) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.cols {
            return Err(Error::DimensionMismatch {
                expected: self.cols,
                found: x.len(),
            });
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), x)).collect())
    }

    /// `selfᵀ · x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Result<DenseVector> {
        if x.len() != self.rows {
            return Err(Error::DimensionMismatch {
                expected: self.rows,
                found: x.len(),
            });
        }
        let mut out = vec![0.0; self.cols];
        for (i, xi) in x.iter().enumerate() {
            if *xi != 0.0 {
                axpy(*xi, self.row(i), &mut out);
            }
        }
        Ok(out)
    }

    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    norm_sq(a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn max_norm(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// Componentwise `max(v_i, 0)`.
pub fn positive_part(v: &[f64]) -> DenseVector {
    v.iter().map(|x| x.max(0.0)).collect()
}

/// Orthonormal basis `Q` (n×m) of a subspace `L`, so that `P_L = Q Qᵀ`.
///
/// Row `i` of `Q` is the point `q_i ∈ ℝᵐ`, i.e. column `i` of `Qᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct OrthonormalBasis {
    q: DenseMatrix,
}

impl OrthonormalBasis {
    /// Wraps a matrix that is already orthonormal, checking `‖QᵀQ − I‖_max`.
    pub fn new(q: DenseMatrix) -> Result<Self> {
        let (n, m) = (q.rows(), q.cols());
        if m == 0 || m > n {
            return Err(Error::InvalidArgument(format!(
                "basis must satisfy 1 <= m <= n, got n={n}, m={m}"
            )));
        }
        let defect = orthonormality_defect(&q);
        if defect > ORTHONORMAL_TOL {
            return Err(Error::InvalidArgument(format!(
                "columns are not orthonormal (defect {defect:e})"
            )));
        }
        Ok(OrthonormalBasis { q })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.q.rows()
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.q.cols()
    }

    pub fn matrix(&self) -> &DenseMatrix {
        &self.q
    }

    /// The point `q_i = Qᵀe_i`.
    #[inline]
    pub fn point(&self, i: usize) -> &[f64] {
        self.q.row(i)
    }

    /// `Q · z`.
    pub fn lift(&self, z: &[f64]) -> Result<DenseVector> {
        self.q.mul_vec(z)
    }

    /// `Qᵀ · x`.
    pub fn coords(&self, x: &[f64]) -> Result<DenseVector> {
        self.q.tr_mul_vec(x)
    }
}

/// `‖QᵀQ − I‖_max`.
pub fn orthonormality_defect(q: &DenseMatrix) -> f64 {
    let m = q.cols();
    let mut worst: f64 = 0.0;
    for a in 0..m {
        for b in a..m {
            let mut s = 0.0;
            for i in 0..q.rows() {
                s += q.get(i, a) * q.get(i, b);
            }
            let target = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((s - target).abs());
        }
    }
    worst
}

/// Modified Gram–Schmidt with one reorthogonalization pass.
///
/// A column whose residual after projection falls below `tol` times its
/// original norm is reported as [`Error::RankDeficient`].
pub fn orthonormalize(raw: &DenseMatrix, tol: f64) -> Result<OrthonormalBasis> {
    let (n, k) = (raw.rows(), raw.cols());
    if k == 0 || k > n {
        return Err(Error::RankDeficient(format!(
            "cannot orthonormalize {k} columns in dimension {n}"
        )));
    }
    let mut accepted: Vec<DenseVector> = Vec::with_capacity(k);
    for j in 0..k {
        let original = raw.column(j);
        let original_norm = norm(&original);
        let mut v = original;
        for _pass in 0..2 {
            for q in &accepted {
                let c = dot(q, &v);
                axpy(-c, q, &mut v);
            }
        }
        let residual = norm(&v);
        if original_norm == 0.0 || residual <= tol * original_norm {
            return Err(Error::RankDeficient(format!(
                "column {j} has relative residual {:e}",
                if original_norm == 0.0 { 0.0 } else { residual / original_norm }
            )));
        }
        v.iter_mut().for_each(|e| *e /= residual);
        accepted.push(v);
    }
    Ok(OrthonormalBasis {
        q: DenseMatrix::from_columns(&accepted)?,
    })
}

/// `Q (Qᵀ x)` in `O(nm)`.
pub fn project(basis: &OrthonormalBasis, x: &[f64]) -> Result<DenseVector> {
    if x.len() != basis.n() {
        return Err(Error::DimensionMismatch {
            expected: basis.n(),
            found: x.len(),
        });
    }
    let z = basis.coords(x)?;
    basis.lift(&z)
}

/// Completes `Q` to an orthonormal basis of ℝⁿ and returns the `n − m` new
/// columns, spanning `L^⊥`.
///
/// Runs column-pivoted Gram–Schmidt on the residuals `(I − QQᵀ) e_i`, always
/// taking the candidate with the largest remaining norm (ties to the
/// smallest index).
pub fn complement_basis(basis: &OrthonormalBasis) -> OrthonormalBasis {
    let (n, m) = (basis.n(), basis.m());
    assert!(m < n, "complement of a full-dimensional subspace is empty");

    // residuals[i] = (I − QQᵀ) e_i
    let mut residuals: Vec<DenseVector> = (0..n)
        .map(|i| {
            let mut r = vec![0.0; n];
            r[i] = 1.0;
            let qi = basis.point(i);
            for (row, rv) in r.iter_mut().enumerate() {
                *rv -= dot(basis.point(row), qi);
            }
            r
        })
        .collect();
    let mut used = vec![false; n];
    let mut accepted: Vec<DenseVector> = Vec::with_capacity(n - m);

    while accepted.len() < n - m {
        let mut best = None;
        let mut best_norm = -1.0;
        for (i, r) in residuals.iter().enumerate() {
            if used[i] {
                continue;
            }
            let nr = norm_sq(r);
            if nr > best_norm {
                best_norm = nr;
                best = Some(i);
            }
        }
        let pick = best.expect("candidate available while columns are missing");
        used[pick] = true;
        let mut v = residuals[pick].clone();
        // reorthogonalize against Q and the accepted columns
        for col in 0..m {
            let qc = basis.matrix().column(col);
            let c = dot(&qc, &v);
            axpy(-c, &qc, &mut v);
        }
        for a in &accepted {
            let c = dot(a, &v);
            axpy(-c, a, &mut v);
        }
        let nv = norm(&v);
        assert!(nv > 0.0, "complement candidate collapsed to zero");
        v.iter_mut().for_each(|e| *e /= nv);
        for (i, r) in residuals.iter_mut().enumerate() {
            if !used[i] {
                let c = dot(&v, r);
                axpy(-c, &v, r);
            }
        }
        accepted.push(v);
    }
    OrthonormalBasis {
        q: DenseMatrix::from_columns(&accepted).expect("finite complement columns"),
    }
}

/// Solves `A X = B` for square `A` by Gaussian elimination with partial
/// pivoting. A pivot below `1e-13 · max|A|` counts as singular.
pub fn solve_linear(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    if a.cols() != n || b.rows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: if a.cols() != n { a.cols() } else { b.rows() },
        });
    }
    let mut lhs = a.clone();
    let mut rhs = b.clone();
    let scale = max_norm(lhs.as_slice());
    if scale == 0.0 {
        return Err(Error::RankDeficient("zero matrix".into()));
    }
    let threshold = 1e-13 * scale;
    for col in 0..n {
        let (pivot_row, pivot_abs) = (col..n)
            .map(|r| (r, lhs.get(r, col).abs()))
            .fold((col, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if pivot_abs <= threshold {
            return Err(Error::RankDeficient(format!(
                "pivot {pivot_abs:e} in column {col}"
            )));
        }
        if pivot_row != col {
            swap_rows(&mut lhs, pivot_row, col);
            swap_rows(&mut rhs, pivot_row, col);
        }
        let pivot = lhs.get(col, col);
        for r in (col + 1)..n {
            let factor = lhs.get(r, col) / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let v = lhs.get(r, c) - factor * lhs.get(col, c);
                lhs.set(r, c, v);
            }
            for c in 0..rhs.cols() {
                let v = rhs.get(r, c) - factor * rhs.get(col, c);
                rhs.set(r, c, v);
            }
        }
    }
    let mut x = DenseMatrix::zeros(n, rhs.cols());
    for r in (0..n).rev() {
        for c in 0..rhs.cols() {
            let mut s = rhs.get(r, c);
            for k in (r + 1)..n {
                s -= lhs.get(r, k) * x.get(k, c);
            }
            x.set(r, c, s / lhs.get(r, r));
        }
    }
    Ok(x)
}

fn swap_rows(m: &mut DenseMatrix, a: usize, b: usize) {
    for c in 0..m.cols() {
        let tmp = m.get(a, c);
        m.set(a, c, m.get(b, c));
        m.set(b, c, tmp);
    }
}

/// `M† = (MᵀM)⁻¹Mᵀ` for a full-column-rank `M`, via the normal equations.
pub fn pseudoinverse_direct(m: &DenseMatrix) -> Result<DenseMatrix> {
    let mt = m.transpose();
    let gram = mt.matmul(m)?;
    let x0 = solve_linear(&gram, &mt)?;
    // Forming MᵀM squares the condition number; one Newton–Schulz step
    // X ← (2I − X·M)·X pulls the left-inverse defect back to roughly κ·ε.
    let q = m.cols();
    let mut correction = x0.matmul(m)?;
    for i in 0..q {
        for j in 0..q {
            let e = correction.get(i, j);
            correction.set(i, j, if i == j { 2.0 - e } else { -e });
        }
    }
    correction.matmul(&x0)
}
