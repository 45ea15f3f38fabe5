//! Projection-and-rescaling driver.
//!
//! Each round runs a basic procedure on the current primal subspace and, if
//! that does not produce a strictly positive point, on the current dual
//! subspace. A rescale certificate doubles the coordinate that carries the
//! largest weight of the certificate. Both sides keep their own scaling.

use serde::Serialize;

use crate::caratheodory::SimplexPoint;
use crate::error::{Error, Result};
use crate::instance::Instance;
use crate::linalg::{complement_basis, norm, orthonormalize, project, DenseVector, OrthonormalBasis, DEFAULT_RANK_TOL};
use crate::procedures::{iteration_bound, run_procedure, BasicOutcome, ProcedureKind, StoppingPolicy};

/// Relative subspace-membership tolerance used when verifying solutions.
pub const MEMBERSHIP_TOL: f64 = 1e-8;

/// Accumulated diagonal scaling `D = diag(d)`; every `d_i` is a power of two.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingState {
    pub d: DenseVector,
    pub rounds: usize,
}

impl ScalingState {
    pub fn identity(n: usize) -> Self {
        ScalingState {
            d: vec![1.0; n],
            rounds: 0,
        }
    }

    /// Maps a point of `D·L` back to `L`.
    pub fn unscale(&self, y: &[f64]) -> DenseVector {
        y.iter().zip(&self.d).map(|(v, d)| v / d).collect()
    }
}

/// Doubles coordinate `i* = argmax x̂` (smallest index on ties) and
/// re-orthonormalizes the scaled basis.
pub fn rescale(
    basis: &OrthonormalBasis,
    x_hat: &SimplexPoint,
    state: &ScalingState,
) -> Result<(OrthonormalBasis, ScalingState, usize)> {
    let weights = x_hat.weights();
    let mut pick = 0;
    for (i, w) in weights.iter().enumerate() {
        if *w > weights[pick] {
            pick = i;
        }
    }
    let mut scaled = basis.matrix().clone();
    for v in scaled.row_mut(pick) {
        *v *= 2.0;
    }
    let next = orthonormalize(&scaled, DEFAULT_RANK_TOL)?;
    let mut s = state.clone();
    s.d[pick] *= 2.0;
    s.rounds += 1;
    Ok((next, s, pick))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveConfig {
    pub procedure: ProcedureKind,
    pub max_rounds: usize,
    /// Per basic-procedure iteration budget; `None` uses `9(d+1)²n` for the
    /// side's subspace dimension `d`.
    pub per_round_budget: Option<u64>,
}

impl SolveConfig {
    pub fn new(procedure: ProcedureKind) -> Self {
        SolveConfig {
            procedure,
            max_rounds: 200,
            per_round_budget: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Primal,
    Dual,
}

impl Side {
    pub fn name(self) -> &'static str {
        match self {
            Side::Primal => "primal",
            Side::Dual => "dual",
        }
    }
}

/// One basic-procedure run inside the driver.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RoundRecord {
    pub round: usize,
    pub side: Side,
    pub outcome: &'static str,
    pub subspace_dim: usize,
    pub iterations: u64,
    pub iteration_bound: u64,
    pub max_support: usize,
    pub counted_ops: u64,
    pub mirr_calls: u64,
    pub mirr_ops: u64,
    pub decay_violations: u64,
    pub rescaled_index: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum SolveVerdict {
    /// `y ∈ L`, `y > 0`, in original coordinates.
    PrimalStrict { y: DenseVector },
    /// `y ∈ L^⊥`, `y > 0`, in original coordinates.
    DualStrict { y: DenseVector },
    Undetermined { rounds_used: usize },
}

impl SolveVerdict {
    pub fn tag(&self) -> &'static str {
        match self {
            SolveVerdict::PrimalStrict { .. } => "primal_strict",
            SolveVerdict::DualStrict { .. } => "dual_strict",
            SolveVerdict::Undetermined { .. } => "undetermined",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveOutcome {
    pub verdict: SolveVerdict,
    pub rounds: Vec<RoundRecord>,
    pub primal_scaling: ScalingState,
    pub dual_scaling: ScalingState,
}

impl SolveOutcome {
    pub fn rescalings(&self) -> usize {
        self.primal_scaling.rounds + self.dual_scaling.rounds
    }

    pub fn total_iterations(&self) -> u64 {
        self.rounds.iter().map(|r| r.iterations).sum()
    }

    pub fn total_ops(&self) -> u64 {
        self.rounds.iter().map(|r| r.counted_ops).sum()
    }

    pub fn max_support(&self, side: Side) -> usize {
        self.rounds
            .iter()
            .filter(|r| r.side == side)
            .map(|r| r.max_support)
            .max()
            .unwrap_or(0)
    }
}

struct SideState {
    side: Side,
    basis: OrthonormalBasis,
    scaling: ScalingState,
}

enum Step {
    Solved(DenseVector),
    Continue,
}

pub fn solve(instance: &Instance, cfg: &SolveConfig) -> Result<SolveOutcome> {
    let primal = instance.orthonormal_basis()?;
    solve_basis(&primal, cfg)
}

/// Driver on an orthonormal basis of `L` with `m < n`.
pub fn solve_basis(primal: &OrthonormalBasis, cfg: &SolveConfig) -> Result<SolveOutcome> {
    let n = primal.n();
    if primal.m() >= n {
        return Err(Error::InvalidArgument("subspace must be proper (m < n)".into()));
    }
    let policy = StoppingPolicy::for_dimension(n);
    let mut sides = [
        SideState {
            side: Side::Primal,
            basis: primal.clone(),
            scaling: ScalingState::identity(n),
        },
        SideState {
            side: Side::Dual,
            basis: complement_basis(primal),
            scaling: ScalingState::identity(n),
        },
    ];
    let mut rounds = Vec::new();

    for round in 1..=cfg.max_rounds {
        for state in sides.iter_mut() {
            if let Step::Solved(y) = run_side(state, round, cfg, &policy, &mut rounds)? {
                let verdict = match state.side {
                    Side::Primal => SolveVerdict::PrimalStrict { y },
                    Side::Dual => SolveVerdict::DualStrict { y },
                };
                let [p, d] = sides;
                return Ok(SolveOutcome {
                    verdict,
                    rounds,
                    primal_scaling: p.scaling,
                    dual_scaling: d.scaling,
                });
            }
        }
    }
    let [p, d] = sides;
    Ok(SolveOutcome {
        verdict: SolveVerdict::Undetermined {
            rounds_used: cfg.max_rounds,
        },
        rounds,
        primal_scaling: p.scaling,
        dual_scaling: d.scaling,
    })
}

fn run_side(
    state: &mut SideState,
    round: usize,
    cfg: &SolveConfig,
    policy: &StoppingPolicy,
    log: &mut Vec<RoundRecord>,
) -> Result<Step> {
    let dim = state.basis.m();
    let bound = iteration_bound(state.basis.n(), dim);
    let budget = cfg.per_round_budget.unwrap_or(bound);
    let result = run_procedure(&state.basis, cfg.procedure, policy, budget).map_err(|e| match e {
        Error::NumericalBreakdown(msg) => {
            Error::NumericalBreakdown(format!("round {round}, {} side: {msg}", state.side.name()))
        }
        other => other,
    })?;
    let mut record = RoundRecord {
        round,
        side: state.side,
        outcome: result.outcome.tag(),
        subspace_dim: dim,
        iterations: result.trace.iterations,
        iteration_bound: bound,
        max_support: result.trace.max_support,
        counted_ops: result.trace.counted_ops,
        mirr_calls: result.trace.mirr_calls,
        mirr_ops: result.trace.mirr_ops,
        decay_violations: result.trace.decay_violations,
        rescaled_index: None,
    };
    let step = match result.outcome {
        BasicOutcome::StrictSolution { y } => Step::Solved(state.scaling.unscale(&y)),
        BasicOutcome::RescaleCertificate => {
            let (basis, scaling, pick) = rescale(&state.basis, &result.x, &state.scaling)?;
            state.basis = basis;
            state.scaling = scaling;
            record.rescaled_index = Some(pick);
            Step::Continue
        }
        // No valid certificate: leave this side unscaled for the round.
        BasicOutcome::BudgetExhausted => Step::Continue,
    };
    log.push(record);
    Ok(step)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub side: Side,
    pub min_entry: f64,
    /// Distance from the claimed subspace relative to `‖y‖`.
    pub membership_residual: f64,
    pub positive: bool,
    pub in_subspace: bool,
    pub passed: bool,
}

/// Checks `y > 0` and `y ∈ L` (primal) or `y ∈ L^⊥` (dual) against the
/// instance's original basis.
pub fn verify_vector(basis: &OrthonormalBasis, side: Side, y: &[f64]) -> Result<VerificationReport> {
    let p = project(basis, y)?;
    let residual = match side {
        Side::Primal => y.iter().zip(&p).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt(),
        Side::Dual => norm(&p),
    };
    let scale = norm(y);
    let membership_residual = if scale > 0.0 { residual / scale } else { f64::INFINITY };
    let min_entry = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let positive = min_entry > 0.0;
    let in_subspace = membership_residual <= MEMBERSHIP_TOL;
    Ok(VerificationReport {
        side,
        min_entry,
        membership_residual,
        positive,
        in_subspace,
        passed: positive && in_subspace,
    })
}

pub fn verify_certificate(instance: &Instance, verdict: &SolveVerdict) -> Result<VerificationReport> {
    let basis = instance.orthonormal_basis()?;
    match verdict {
        SolveVerdict::PrimalStrict { y } => verify_vector(&basis, Side::Primal, y),
        SolveVerdict::DualStrict { y } => verify_vector(&basis, Side::Dual, y),
        SolveVerdict::Undetermined { .. } => Err(Error::InvalidArgument(
            "an undetermined outcome carries no certificate".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn line(v: &[f64]) -> Instance {
        let rows: Vec<Vec<f64>> = v.iter().map(|e| vec![*e]).collect();
        Instance::new(DenseMatrix::from_rows(&rows).unwrap(), None, 0, "hand").unwrap()
    }

    #[test]
    fn rescale_diagonal_doubles_first_coordinate() {
        let q = line(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).orthonormal_basis().unwrap();
        let x = SimplexPoint::from_weights(vec![0.6, 0.4]).unwrap();
        let (next, s, pick) = rescale(&q, &x, &ScalingState::identity(2)).unwrap();
        assert_eq!(pick, 0);
        let col = next.matrix().column(0);
        let r5 = 5f64.sqrt();
        assert!((col[0] - 2.0 / r5).abs() < 1e-15 && (col[1] - 1.0 / r5).abs() < 1e-15);
        assert_eq!(s.d, vec![2.0, 1.0]);
        assert_eq!(s.rounds, 1);
    }

    #[test]
    fn rescale_ties_pick_smallest_index() {
        let q = line(&[FRAC_1_SQRT_2, FRAC_1_SQRT_2]).orthonormal_basis().unwrap();
        let x = SimplexPoint::from_weights(vec![0.5, 0.5]).unwrap();
        let (_, s, pick) = rescale(&q, &x, &ScalingState::identity(2)).unwrap();
        assert_eq!(pick, 0);
        assert_eq!(s.d, vec![2.0, 1.0]);
    }

    #[test]
    fn identity_scaling_is_noop() {
        let s = ScalingState::identity(3);
        assert_eq!(s.unscale(&[1.0, 2.0, 3.0]), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn primal_strict_on_diagonal() {
        let inst = line(&[1.0, 1.0]);
        let out = solve(&inst, &SolveConfig::new(ProcedureKind::Lsvn)).unwrap();
        match &out.verdict {
            SolveVerdict::PrimalStrict { y } => {
                assert!((y[0] - 0.5).abs() < 1e-15 && (y[1] - 0.5).abs() < 1e-15)
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(out.rescalings(), 0);
        assert_eq!(out.total_iterations(), 0);
        assert!(verify_certificate(&inst, &out.verdict).unwrap().passed);
    }

    #[test]
    fn dual_strict_on_antidiagonal() {
        let inst = line(&[1.0, -1.0]);
        let out = solve(&inst, &SolveConfig::new(ProcedureKind::Lsvn)).unwrap();
        assert_eq!(out.verdict.tag(), "dual_strict");
        assert_eq!(out.rounds.len(), 2);
        assert_eq!(out.rounds[0].outcome, "certificate");
        assert!(verify_certificate(&inst, &out.verdict).unwrap().passed);
    }

    #[test]
    fn boundary_case_is_undetermined() {
        let inst = line(&[0.0, 1.0]);
        let cfg = SolveConfig {
            max_rounds: 7,
            ..SolveConfig::new(ProcedureKind::Lsvn)
        };
        let out = solve(&inst, &cfg).unwrap();
        assert_eq!(out.verdict, SolveVerdict::Undetermined { rounds_used: 7 });
        assert_eq!(out.rounds.len(), 14);
        assert!(verify_certificate(&inst, &out.verdict).is_err());
    }

    #[test]
    fn verification_detects_bad_vectors() {
        let inst = line(&[1.0, 1.0]);
        let good = SolveVerdict::PrimalStrict { y: vec![0.5, 0.5] };
        assert!(verify_certificate(&inst, &good).unwrap().passed);

        let negated = SolveVerdict::PrimalStrict { y: vec![-0.5, 0.5] };
        let rep = verify_certificate(&inst, &negated).unwrap();
        assert!(!rep.positive && !rep.passed);

        // push y out of L by 1e-3·‖y‖ along (1, −1)/√2
        let off = 1e-3 * (0.5f64).sqrt() * FRAC_1_SQRT_2;
        let moved = SolveVerdict::PrimalStrict {
            y: vec![0.5 + off, 0.5 - off],
        };
        let rep = verify_certificate(&inst, &moved).unwrap();
        assert!(rep.positive && !rep.in_subspace && !rep.passed);
        assert!((rep.membership_residual - 1e-3).abs() < 1e-8);
    }
}
