//! Seeded random instances with a known feasibility witness.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{complement_basis, norm, orthonormalize, project, DenseMatrix, DenseVector, OrthonormalBasis, DEFAULT_RANK_TOL};

pub const PRIMAL_GENERATOR: &str = "primal_feasible/v1";
pub const DUAL_GENERATOR: &str = "dual_feasible/v1";

/// Relative tolerance for witness membership checks.
pub const WITNESS_TOL: f64 = 1e-8;

const MAX_RESAMPLES: u64 = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WitnessTag {
    /// Witness lies in `L` with every entry positive.
    PrimalInterior,
    /// Witness lies in `L^⊥` with every entry positive.
    DualInterior,
}

impl WitnessTag {
    pub fn name(self) -> &'static str {
        match self {
            WitnessTag::PrimalInterior => "PrimalInterior",
            WitnessTag::DualInterior => "DualInterior",
        }
    }
}

impl fmt::Display for WitnessTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WitnessTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "PrimalInterior" => Ok(WitnessTag::PrimalInterior),
            "DualInterior" => Ok(WitnessTag::DualInterior),
            other => Err(Error::InvalidArgument(format!("unknown witness tag `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub tag: WitnessTag,
    pub vector: DenseVector,
}

/// A subspace `L ⊆ ℝⁿ` given by `m` spanning columns (not necessarily
/// orthonormal), with an optional feasibility witness.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub n: usize,
    pub m: usize,
    pub basis: DenseMatrix,
    pub witness: Option<Witness>,
    pub seed: u64,
    pub generator_id: String,
}

impl Instance {
    pub fn new(basis: DenseMatrix, witness: Option<Witness>, seed: u64, generator_id: impl Into<String>) -> Result<Self> {
        let (n, m) = (basis.rows(), basis.cols());
        if m == 0 || m >= n {
            return Err(Error::InvalidArgument(format!(
                "instance requires 1 <= m < n, got n={n}, m={m}"
            )));
        }
        if let Some(w) = &witness {
            if w.vector.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: w.vector.len(),
                });
            }
        }
        Ok(Instance {
            n,
            m,
            basis,
            witness,
            seed,
            generator_id: generator_id.into(),
        })
    }

    pub fn orthonormal_basis(&self) -> Result<OrthonormalBasis> {
        orthonormalize(&self.basis, DEFAULT_RANK_TOL)
    }

    /// Checks the witness against its tag; an instance without a witness
    /// passes trivially.
    pub fn check_witness(&self) -> Result<()> {
        let Some(w) = &self.witness else {
            return Ok(());
        };
        let q = self.orthonormal_basis()?;
        if !check_witness_vector(&q, w.tag, &w.vector) {
            return Err(Error::InvalidArgument(format!(
                "witness does not satisfy {}",
                w.tag
            )));
        }
        Ok(())
    }
}

/// `true` when `v > 0` and `v` lies in `L` (primal) or `L^⊥` (dual) within
/// [`WITNESS_TOL`] relative to `‖v‖`.
pub fn check_witness_vector(q: &OrthonormalBasis, tag: WitnessTag, v: &[f64]) -> bool {
    if v.len() != q.n() || !v.iter().all(|e| *e > 0.0) {
        return false;
    }
    let p = project(q, v).expect("dimension checked");
    let residual = match tag {
        WitnessTag::PrimalInterior => v.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        WitnessTag::DualInterior => norm(&p),
    };
    residual <= WITNESS_TOL * norm(v)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorOptions {
    /// The smallest witness entry is divided by this factor (`>= 1`).
    pub hardness: f64,
}

impl Default for GeneratorOptions {
    fn default() -> Self {
        GeneratorOptions { hardness: 1.0 }
    }
}

fn check_dims(n: usize, m: usize, hardness: f64) -> Result<()> {
    if m == 0 || m >= n {
        return Err(Error::InvalidArgument(format!(
            "generator requires 1 <= m < n, got n={n}, m={m}"
        )));
    }
    if !(hardness >= 1.0 && hardness.is_finite()) {
        return Err(Error::InvalidArgument(format!("hardness must be >= 1, got {hardness}")));
    }
    Ok(())
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Entries uniform in `[0.1, 1]`, smallest entry divided by `hardness`.
fn positive_witness(n: usize, seed: u64, hardness: f64) -> DenseVector {
    let mut rng = stream(seed, 0);
    let mut v: DenseVector = (0..n).map(|_| rng.random_range(0.1..=1.0)).collect();
    let (min_pos, _) = v
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (i, e)| if *e < best.1 { (i, *e) } else { best });
    v[min_pos] /= hardness;
    v
}

/// `[w | G]` with `G` an n×extra standard-normal matrix, resampled until
/// the columns are independent.
fn span_with(w: &[f64], extra: usize, seed: u64) -> Result<DenseMatrix> {
    let n = w.len();
    for attempt in 0..MAX_RESAMPLES {
        let mut rng = stream(seed, 1 + attempt);
        let mut cols = vec![w.to_vec()];
        for _ in 0..extra {
            cols.push((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect());
        }
        let raw = DenseMatrix::from_columns(&cols)?;
        if orthonormalize(&raw, DEFAULT_RANK_TOL).is_ok() {
            return Ok(raw);
        }
    }
    Err(Error::NumericalBreakdown(format!(
        "no full-rank sample after {MAX_RESAMPLES} attempts (seed {seed})"
    )))
}

pub fn gen_primal_feasible(n: usize, m: usize, seed: u64) -> Result<Instance> {
    gen_primal_feasible_with(n, m, seed, &GeneratorOptions::default())
}

/// `L = span[x* | G]` with `x* > 0`, so `x*` witnesses `L ∩ ℝⁿ₊₊ ≠ ∅`.
pub fn gen_primal_feasible_with(n: usize, m: usize, seed: u64, opts: &GeneratorOptions) -> Result<Instance> {
    check_dims(n, m, opts.hardness)?;
    let witness = positive_witness(n, seed, opts.hardness);
    let basis = span_with(&witness, m - 1, seed)?;
    let inst = Instance::new(
        basis,
        Some(Witness {
            tag: WitnessTag::PrimalInterior,
            vector: witness,
        }),
        seed,
        PRIMAL_GENERATOR,
    )?;
    inst.check_witness()?;
    Ok(inst)
}

pub fn gen_dual_feasible(n: usize, m: usize, seed: u64) -> Result<Instance> {
    gen_dual_feasible_with(n, m, seed, &GeneratorOptions::default())
}

/// `L = (span[y* | G])^⊥` with `y* > 0`, so `y*` witnesses
/// `L^⊥ ∩ ℝⁿ₊₊ ≠ ∅`. The basis is stored orthonormal.
pub fn gen_dual_feasible_with(n: usize, m: usize, seed: u64, opts: &GeneratorOptions) -> Result<Instance> {
    check_dims(n, m, opts.hardness)?;
    let witness = positive_witness(n, seed, opts.hardness);
    let dual_span = span_with(&witness, n - m - 1, seed)?;
    let dual = orthonormalize(&dual_span, DEFAULT_RANK_TOL)?;
    let primal = complement_basis(&dual);
    let inst = Instance::new(
        primal.matrix().clone(),
        Some(Witness {
            tag: WitnessTag::DualInterior,
            vector: witness,
        }),
        seed,
        DUAL_GENERATOR,
    )?;
    inst.check_witness()?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primal_witness_is_fixed_by_projection() {
        let inst = gen_primal_feasible(6, 3, 11).unwrap();
        let q = inst.orthonormal_basis().unwrap();
        let w = &inst.witness.as_ref().unwrap().vector;
        let p = project(&q, w).unwrap();
        for (a, b) in w.iter().zip(&p) {
            assert!((a - b).abs() <= 1e-8);
        }
        assert!(p.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn deterministic_for_seed() {
        let a = gen_primal_feasible(4, 2, 7).unwrap();
        let b = gen_primal_feasible(4, 2, 7).unwrap();
        assert_eq!(a, b);
        let c = gen_primal_feasible(4, 2, 8).unwrap();
        assert_ne!(a, c);
        assert_eq!(gen_dual_feasible(5, 2, 3).unwrap(), gen_dual_feasible(5, 2, 3).unwrap());
    }

    #[test]
    fn dual_witness_is_orthogonal() {
        let inst = gen_dual_feasible(8, 3, 5).unwrap();
        let q = inst.orthonormal_basis().unwrap();
        let w = &inst.witness.as_ref().unwrap().vector;
        let coords = q.coords(w).unwrap();
        assert!(norm(&coords) <= 1e-8);
        assert!(w.iter().all(|v| *v > 0.0));
    }

    #[test]
    fn dual_in_the_plane_is_orthogonal_line() {
        let inst = gen_dual_feasible(2, 1, 1).unwrap();
        let w = &inst.witness.as_ref().unwrap().vector;
        let col = inst.basis.column(0);
        // L is the line orthogonal to y*: (w1, w2) ⟂ (c1, c2)
        assert!((w[0] * col[0] + w[1] * col[1]).abs() < 1e-12);
        assert!(col[0] * col[1] < 0.0);
    }

    #[test]
    fn hardness_shrinks_smallest_entry() {
        let soft = gen_primal_feasible(10, 2, 4).unwrap();
        let hard = gen_primal_feasible_with(10, 2, 4, &GeneratorOptions { hardness: 100.0 }).unwrap();
        let min = |i: &Instance| i.witness.as_ref().unwrap().vector.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!((min(&hard) - min(&soft) / 100.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(gen_primal_feasible(5, 5, 1).is_err());
        assert!(gen_dual_feasible(5, 0, 1).is_err());
        assert!(gen_primal_feasible_with(5, 2, 1, &GeneratorOptions { hardness: 0.5 }).is_err());
    }

    #[test]
    fn tags_exclude_each_other() {
        let p = gen_primal_feasible(12, 4, 2).unwrap();
        let q = p.orthonormal_basis().unwrap();
        let w = &p.witness.as_ref().unwrap().vector;
        assert!(check_witness_vector(&q, WitnessTag::PrimalInterior, w));
        assert!(!check_witness_vector(&q, WitnessTag::DualInterior, w));

        let d = gen_dual_feasible(12, 4, 2).unwrap();
        let q = d.orthonormal_basis().unwrap();
        let w = &d.witness.as_ref().unwrap().vector;
        assert!(check_witness_vector(&q, WitnessTag::DualInterior, w));
        assert!(!check_witness_vector(&q, WitnessTag::PrimalInterior, w));
    }
}
