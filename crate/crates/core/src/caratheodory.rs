//! Affinely independent convex representations and the incremental
//! representation reduction step (mIRR).
//!
//! A point set is an n×m matrix whose row `i` is the point `a_i ∈ ℝᵐ`
//! (column `i` of `A`). The augmented column `ã_i` is `(1, a_i) ∈ ℝ^{m+1}`.
//! [`ActiveBasis`] keeps an ordered index list `B` with the pseudoinverse of
//! `Ã_B` and updates both in `O(m²)` per call.

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm, norm_sq, pseudoinverse_direct, DenseMatrix, DenseVector};

/// A point of the standard simplex stored densely; weights are `>= 0` and
/// the support is the set of strictly positive entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexPoint {
    weights: Vec<f64>,
}

impl SimplexPoint {
    /// The vertex `e_i`.
    pub fn vertex(n: usize, i: usize) -> Self {
        assert!(i < n, "vertex index {i} out of range for n={n}");
        let mut weights = vec![0.0; n];
        weights[i] = 1.0;
        SimplexPoint { weights }
    }

    /// Validates nonnegativity and `Σw = 1` within `1e-10`.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if let Some(pos) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite(pos));
        }
        if weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("negative simplex weight".into()));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidArgument(format!(
                "simplex weights sum to {sum}"
            )));
        }
        Ok(SimplexPoint { weights })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.weights
            .iter()
            .enumerate()
            .filter(|(_, w)| **w > 0.0)
            .map(|(i, _)| i)
    }

    pub fn support_len(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    /// `‖x‖_∞`.
    pub fn max_weight(&self) -> f64 {
        self.weights.iter().fold(0.0, |a, w| a.max(*w))
    }

    /// `|Σx − 1|`.
    pub fn sum_defect(&self) -> f64 {
        (self.weights.iter().sum::<f64>() - 1.0).abs()
    }

    /// `A·x = Σ x_i a_i` for a point set with rows `a_i`.
    pub fn represented(&self, points: &DenseMatrix) -> DenseVector {
        assert_eq!(points.rows(), self.n());
        let mut out = vec![0.0; points.cols()];
        for i in self.support() {
            axpy(self.weights[i], points.row(i), &mut out);
        }
        out
    }
}

/// Tolerances for [`ActiveBasis`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrConfig {
    /// `ã_j` counts as independent when `‖r‖² > dependence_tol · ‖ã_j‖²`.
    pub dependence_tol: f64,
    /// Rebuild the pseudoinverse when the post-update probe exceeds this.
    pub drift_tol: f64,
    /// Unconditional rebuild after this many pseudoinverse updates.
    /// `None` disables every rebuild, including the drift-triggered one.
    pub refactor_period: Option<usize>,
}

impl MirrConfig {
    /// Default tolerances, rebuilding every `10·n` updates.
    pub fn for_dimension(n: usize) -> Self {
        MirrConfig {
            dependence_tol: 1e-12,
            drift_tol: 1e-6,
            refactor_period: Some(10 * n.max(1)),
        }
    }

    pub fn without_refactorization() -> Self {
        MirrConfig {
            refactor_period: None,
            ..Self::for_dimension(1)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum DependenceVerdict {
    Independent {
        u_prime: DenseVector,
        residual: DenseVector,
        residual_sq: f64,
    },
    Dependent {
        u_prime: DenseVector,
    },
}

/// Result of a reduction step. `pivot` is a position in `B' = [B, j]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReductionOutcome {
    pub theta: f64,
    pub pivot: usize,
    pub replaced: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MirrEvent {
    Extended,
    Reduced(ReductionOutcome),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// `‖pinv·Ã_B − I‖_max`
    pub identity_defect: f64,
    /// `‖Ã_B·(pinv·(1, z)) − (1, z)‖`
    pub range_residual: f64,
    /// `|Σx − 1|`
    pub simplex_defect: f64,
    pub support_in_basis: bool,
    pub basis_len: usize,
    pub max_basis_len: usize,
}

impl ConsistencyReport {
    pub fn within(&self, tol: f64) -> bool {
        self.identity_defect <= tol
            && self.range_residual <= tol
            && self.simplex_defect <= tol
            && self.support_in_basis
            && self.basis_len <= self.max_basis_len
    }

    pub fn worst_residual(&self) -> f64 {
        self.identity_defect
            .max(self.range_residual)
            .max(self.simplex_defect)
    }
}

/// Ordered active index list `B` together with `Ã_B†` (k×(m+1), row-major).
#[derive(Debug, Clone)]
pub struct ActiveBasis {
    indices: Vec<usize>,
    pinv: Vec<f64>,
    dim: usize,
    config: MirrConfig,
    updates_since_rebuild: usize,
    ops: u64,
    rebuilds: usize,
}

fn augmented(points: &DenseMatrix, j: usize) -> DenseVector {
    let mut a = Vec::with_capacity(points.cols() + 1);
    a.push(1.0);
    a.extend_from_slice(points.row(j));
    a
}

impl ActiveBasis {
    /// Starts from the vertex `e_i` with `B = [i]` and `Ã_B† = ã_iᵀ/‖ã_i‖²`.
    pub fn init_active(points: &DenseMatrix, i: usize, config: MirrConfig) -> (SimplexPoint, Self) {
        let a = augmented(points, i);
        let scale = 1.0 / norm_sq(&a);
        let pinv = a.iter().map(|v| v * scale).collect();
        let basis = ActiveBasis {
            indices: vec![i],
            pinv,
            dim: points.cols(),
            config,
            updates_since_rebuild: 0,
            ops: 2 * a.len() as u64,
            rebuilds: 0,
        };
        (SimplexPoint::vertex(points.rows(), i), basis)
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn contains(&self, j: usize) -> bool {
        self.indices.contains(&j)
    }

    pub fn config(&self) -> &MirrConfig {
        &self.config
    }

    /// Multiply-adds spent in dependence tests and updates so far.
    pub fn counted_ops(&self) -> u64 {
        self.ops
    }

    pub fn rebuilds(&self) -> usize {
        self.rebuilds
    }

    #[inline]
    fn width(&self) -> usize {
        self.dim + 1
    }

    fn pinv_row(&self, r: usize) -> &[f64] {
        let w = self.width();
        &self.pinv[r * w..(r + 1) * w]
    }

    /// `Ã_B†` as a k×(m+1) matrix.
    pub fn pinv_matrix(&self) -> DenseMatrix {
        DenseMatrix::from_row_major(self.len(), self.width(), self.pinv.clone())
            .expect("pseudoinverse entries are finite")
    }

    /// `Ã_B` as an (m+1)×k matrix.
    pub fn augmented_matrix(&self, points: &DenseMatrix) -> DenseMatrix {
        let cols: Vec<DenseVector> = self.indices.iter().map(|&b| augmented(points, b)).collect();
        DenseMatrix::from_columns(&cols).expect("point set entries are finite")
    }

    /// `Ã_B·v` for `v ∈ ℝᵏ`.
    fn combine(&self, points: &DenseMatrix, v: &[f64]) -> DenseVector {
        let mut out = vec![0.0; self.width()];
        for (coef, &b) in v.iter().zip(&self.indices) {
            out[0] += coef;
            axpy(*coef, points.row(b), &mut out[1..]);
        }
        out
    }

    /// Decides whether `ã_j` lies in the range of `Ã_B`.
    pub fn affine_dependence(&mut self, points: &DenseMatrix, j: usize) -> DependenceVerdict {
        debug_assert!(!self.contains(j));
        let a = augmented(points, j);
        let k = self.len();
        let u_prime: DenseVector = (0..k).map(|r| dot(self.pinv_row(r), &a)).collect();
        let mut residual = a.clone();
        let fitted = self.combine(points, &u_prime);
        for (r, f) in residual.iter_mut().zip(&fitted) {
            *r -= f;
        }
        let residual_sq = norm_sq(&residual);
        let scale = norm_sq(&a);
        self.ops += (2 * k * self.width() + 2 * self.width()) as u64;
        if residual_sq > self.config.dependence_tol * scale {
            DependenceVerdict::Independent {
                u_prime,
                residual,
                residual_sq,
            }
        } else {
            DependenceVerdict::Dependent { u_prime }
        }
    }

    /// Appends `j` using the bordered update
    /// `pinv⁺ = [pinv; 0] − [u′; −1]·rᵀ/‖r‖²`.
    pub fn extend(&mut self, j: usize, u_prime: &[f64], residual: &[f64], residual_sq: f64) {
        assert!(self.len() <= self.dim, "active basis already has m+1 columns");
        let w = self.width();
        let inv = 1.0 / residual_sq;
        for (r, coef) in u_prime.iter().enumerate() {
            let scale = coef * inv;
            axpy(-scale, residual, &mut self.pinv[r * w..(r + 1) * w]);
        }
        self.pinv.extend(residual.iter().map(|v| v * inv));
        self.indices.push(j);
        self.ops += ((self.len()) * w + w) as u64;
    }

    /// Removes the dependence of `ã_j` by moving `x` along `u = (u′, −1)`
    /// until the first weight in `B' = [B, j]` reaches zero, then swaps `j`
    /// into that position (or drops `j` when it is the one that vanished).
    pub fn reduce(&mut self, x: &mut SimplexPoint, j: usize, u_prime: &[f64]) -> ReductionOutcome {
        let k = self.len();
        debug_assert_eq!(u_prime.len(), k);
        // Step bound over positions with u_i < 0; u_k = −1 always qualifies.
        let mut theta = x.weight(j);
        let mut pivot = k;
        for (i, &ui) in u_prime.iter().enumerate() {
            if ui < 0.0 {
                let ratio = -x.weight(self.indices[i]) / ui;
                if ratio < theta || (ratio == theta && i < pivot) {
                    theta = ratio;
                    pivot = i;
                }
            }
        }
        let theta = theta.max(0.0);

        let weights = x.weights_mut();
        for (i, &ui) in u_prime.iter().enumerate() {
            let b = self.indices[i];
            let v = weights[b] + theta * ui;
            weights[b] = if v > 0.0 { v } else { 0.0 };
        }
        let vj = weights[j] - theta;
        weights[j] = if vj > 0.0 { vj } else { 0.0 };
        let departing = if pivot == k { j } else { self.indices[pivot] };
        weights[departing] = 0.0;
        self.ops += (2 * (k + 1)) as u64;

        if pivot == k {
            return ReductionOutcome {
                theta,
                pivot,
                replaced: false,
            };
        }

        // Gauss–Jordan pivot on [pinv | u′] turning the last column into e_pivot.
        let w = self.width();
        let inv = 1.0 / u_prime[pivot];
        for v in &mut self.pinv[pivot * w..(pivot + 1) * w] {
            *v *= inv;
        }
        let pivot_row: DenseVector = self.pinv[pivot * w..(pivot + 1) * w].to_vec();
        for (r, &ur) in u_prime.iter().enumerate() {
            if r != pivot && ur != 0.0 {
                axpy(-ur, &pivot_row, &mut self.pinv[r * w..(r + 1) * w]);
            }
        }
        self.indices[pivot] = j;
        self.ops += (k * w) as u64;
        ReductionOutcome {
            theta,
            pivot,
            replaced: true,
        }
    }

    /// One mIRR call: keeps `A·x` fixed while making the representation of
    /// `x` affinely independent again after `j` entered the support.
    pub fn mirr(&mut self, points: &DenseMatrix, x: &mut SimplexPoint, j: usize) -> Result<MirrEvent> {
        debug_assert!(!self.contains(j));
        let event = match self.affine_dependence(points, j) {
            DependenceVerdict::Independent {
                u_prime,
                residual,
                residual_sq,
            } => {
                self.extend(j, &u_prime, &residual, residual_sq);
                self.after_update(points, self.len() - 1)?;
                MirrEvent::Extended
            }
            DependenceVerdict::Dependent { u_prime } => {
                let outcome = self.reduce(x, j, &u_prime);
                if outcome.replaced {
                    self.after_update(points, outcome.pivot)?;
                }
                MirrEvent::Reduced(outcome)
            }
        };
        Ok(event)
    }

    /// Drift guard: probes `pinv·ã_{B(pos)} ≈ e_pos` for the column that just
    /// changed and rebuilds from the direct pseudoinverse when it drifts or
    /// the periodic rebuild is due.
    fn after_update(&mut self, points: &DenseMatrix, pos: usize) -> Result<()> {
        let Some(period) = self.config.refactor_period else {
            return Ok(());
        };
        self.updates_since_rebuild += 1;
        let a = augmented(points, self.indices[pos]);
        let mut probe: f64 = 0.0;
        for r in 0..self.len() {
            let target = if r == pos { 1.0 } else { 0.0 };
            probe = probe.max((dot(self.pinv_row(r), &a) - target).abs());
        }
        self.ops += (self.len() * self.width()) as u64;
        if probe > self.config.drift_tol || self.updates_since_rebuild >= period {
            self.rebuild(points)?;
        }
        Ok(())
    }

    /// Recomputes `Ã_B†` from scratch in `O(m³)`.
    pub fn rebuild(&mut self, points: &DenseMatrix) -> Result<()> {
        let fresh = pseudoinverse_direct(&self.augmented_matrix(points)).map_err(|e| {
            Error::NumericalBreakdown(format!("active matrix lost full column rank: {e}"))
        })?;
        self.pinv = fresh.as_slice().to_vec();
        self.updates_since_rebuild = 0;
        self.rebuilds += 1;
        Ok(())
    }

    pub fn check_consistency(&self, points: &DenseMatrix, x: &SimplexPoint, z: &[f64]) -> ConsistencyReport {
        let k = self.len();
        let mut identity_defect: f64 = 0.0;
        for (c, &b) in self.indices.iter().enumerate() {
            let a = augmented(points, b);
            for r in 0..k {
                let target = if r == c { 1.0 } else { 0.0 };
                identity_defect = identity_defect.max((dot(self.pinv_row(r), &a) - target).abs());
            }
        }
        let mut target = Vec::with_capacity(self.width());
        target.push(1.0);
        target.extend_from_slice(z);
        let coef: DenseVector = (0..k).map(|r| dot(self.pinv_row(r), &target)).collect();
        let mut diff = self.combine(points, &coef);
        for (d, t) in diff.iter_mut().zip(&target) {
            *d -= t;
        }
        ConsistencyReport {
            identity_defect,
            range_residual: norm(&diff),
            simplex_defect: x.sum_defect(),
            support_in_basis: x.support().all(|i| self.contains(i)),
            basis_len: k,
            max_basis_len: self.dim + 1,
        }
    }

    #[cfg(test)]
    pub(crate) fn pinv_mut(&mut self) -> &mut [f64] {
        &mut self.pinv
    }
}
