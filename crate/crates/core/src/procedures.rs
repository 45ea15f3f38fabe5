//! Basic procedures on the simplex: the limited-support schemes (LSP, LSVN,
//! LSVNA) that keep the iterate on at most `m + 1` affinely independent
//! points, and the dense Perceptron / Von Neumann baselines.
//!
//! Every procedure drives `z = Qᵀx` toward the origin and stops when either
//! `y = Qz = P_L x` is strictly positive or `‖y⁺‖ ≤ ‖x‖_∞ / (3√n)`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::caratheodory::{ActiveBasis, MirrConfig, MirrEvent, SimplexPoint};
use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm_sq, DenseVector, OrthonormalBasis};

/// Slack added to the certificate threshold so the comparison does not flap.
const CERTIFICATE_SLACK: f64 = 1e-15;

/// Squared direction norms at or below this are treated as degenerate.
const DEGENERATE_DIRECTION: f64 = 1e-24;

/// Relative slack used when checking `‖z_t‖² ≤ 1/t`.
pub const DECAY_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcedureKind {
    Lsp,
    Lsvn,
    Lsvna,
    BaselinePerceptron,
    #[serde(rename = "baseline_vn")]
    BaselineVonNeumann,
    #[serde(rename = "baseline_vna")]
    BaselineVnAway,
}

impl ProcedureKind {
    pub const ALL: [ProcedureKind; 6] = [
        ProcedureKind::Lsp,
        ProcedureKind::Lsvn,
        ProcedureKind::Lsvna,
        ProcedureKind::BaselinePerceptron,
        ProcedureKind::BaselineVonNeumann,
        ProcedureKind::BaselineVnAway,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProcedureKind::Lsp => "lsp",
            ProcedureKind::Lsvn => "lsvn",
            ProcedureKind::Lsvna => "lsvna",
            ProcedureKind::BaselinePerceptron => "baseline_perceptron",
            ProcedureKind::BaselineVonNeumann => "baseline_vn",
            ProcedureKind::BaselineVnAway => "baseline_vna",
        }
    }

    /// Whether the procedure maintains an active basis through mIRR.
    pub fn is_limited_support(self) -> bool {
        matches!(self, ProcedureKind::Lsp | ProcedureKind::Lsvn | ProcedureKind::Lsvna)
    }

    fn rule(self) -> StepRule {
        match self {
            ProcedureKind::Lsp | ProcedureKind::BaselinePerceptron => StepRule::Perceptron,
            ProcedureKind::Lsvn | ProcedureKind::BaselineVonNeumann => StepRule::LineSearch,
            ProcedureKind::Lsvna | ProcedureKind::BaselineVnAway => StepRule::Away,
        }
    }
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProcedureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProcedureKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown procedure `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum StepRule {
    Perceptron,
    LineSearch,
    Away,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingPolicy {
    /// Certificate threshold factor, `1/(3√n)` by default.
    pub eps: f64,
    /// `y` counts as strictly positive when `min y_i > strict_tol`.
    pub strict_tol: f64,
}

impl StoppingPolicy {
    pub fn for_dimension(n: usize) -> Self {
        StoppingPolicy {
            eps: 1.0 / (3.0 * (n as f64).sqrt()),
            strict_tol: 0.0,
        }
    }
}

/// `9(m+1)²n`, the iteration count by which a limited-support run must stop.
pub fn iteration_bound(n: usize, m: usize) -> u64 {
    9 * ((m + 1) as u64).pow(2) * n as u64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Strict,
    Certificate,
    Continue,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateEval {
    /// `y = Qz`; entry `i` equals `⟨q_i, z⟩ = (P x)_i`.
    pub y: DenseVector,
    pub verdict: Verdict,
    /// Smallest index attaining `min_i ⟨q_i, z⟩`.
    pub j_min: usize,
}

pub fn evaluate_state(
    basis: &OrthonormalBasis,
    x: &SimplexPoint,
    z: &[f64],
    policy: &StoppingPolicy,
) -> StateEval {
    let y: DenseVector = (0..basis.n()).map(|i| dot(basis.point(i), z)).collect();
    let mut j_min = 0;
    for (i, v) in y.iter().enumerate() {
        if *v < y[j_min] {
            j_min = i;
        }
    }
    let verdict = if y[j_min] > policy.strict_tol {
        Verdict::Strict
    } else {
        let pos_sq: f64 = y.iter().filter(|v| **v > 0.0).map(|v| v * v).sum();
        if pos_sq.sqrt() <= policy.eps * x.max_weight() + CERTIFICATE_SLACK {
            Verdict::Certificate
        } else {
            Verdict::Continue
        }
    };
    StateEval { y, verdict, j_min }
}

/// Perceptron step length `1/(t+1)`.
pub fn step_perceptron(t: u64) -> f64 {
    1.0 / (t as f64 + 1.0)
}

/// Exact minimizer of `‖z + θ(q_j − z)‖²` over `θ ∈ [0, 1]`.
pub fn step_linesearch(z: &[f64], q_j: &[f64]) -> Result<f64> {
    let mut num = 0.0;
    let mut den = 0.0;
    for (zi, qi) in z.iter().zip(q_j) {
        let d = zi - qi;
        num += zi * d;
        den += d * d;
    }
    if den <= DEGENERATE_DIRECTION {
        return Err(Error::DegenerateDirection(den));
    }
    Ok((num / den).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepKind {
    Regular,
    Away,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepChoice {
    pub kind: StepKind,
    /// Toward vertex: `argmin_i ⟨q_i, z⟩` over all indices.
    pub j: usize,
    /// Away vertex: `argmax_i ⟨q_i, z⟩` over the support of `x`.
    pub k: usize,
    pub theta: f64,
    pub theta_max: f64,
}

/// `‖z‖² − ⟨q_j,z⟩ > ⟨q_k,z⟩ − ‖z‖²`
pub fn prefers_regular(z_norm_sq: f64, toward_ip: f64, away_ip: f64) -> bool {
    z_norm_sq - toward_ip > away_ip - z_norm_sq
}

/// Chooses between the Frank–Wolfe step toward `e_j` and the away step from
/// `e_k`, then runs the clamped exact line search along that direction.
pub fn choose_direction_away(
    basis: &OrthonormalBasis,
    x: &SimplexPoint,
    z: &[f64],
    inner_products: &[f64],
) -> StepChoice {
    let mut j = 0;
    for (i, v) in inner_products.iter().enumerate() {
        if *v < inner_products[j] {
            j = i;
        }
    }
    let mut k = None;
    for i in x.support() {
        match k {
            Some(best) if inner_products[i] <= inner_products[best] => {}
            _ => k = Some(i),
        }
    }
    let k = k.expect("simplex point has nonempty support");

    if prefers_regular(norm_sq(z), inner_products[j], inner_products[k]) {
        // a = e_j − x, Qᵀa = q_j − z
        let theta = step_linesearch(z, basis.point(j)).unwrap_or(0.0);
        StepChoice {
            kind: StepKind::Regular,
            j,
            k,
            theta,
            theta_max: 1.0,
        }
    } else {
        // a = x − e_k, Qᵀa = z − q_k
        let xk = x.weight(k);
        let theta_max = xk / (1.0 - xk);
        let q_k = basis.point(k);
        let mut num = 0.0;
        let mut den = 0.0;
        for (zi, qi) in z.iter().zip(q_k) {
            let d = zi - qi;
            num -= zi * d;
            den += d * d;
        }
        let theta = if xk >= 1.0 || den <= DEGENERATE_DIRECTION {
            0.0
        } else {
            (num / den).clamp(0.0, theta_max)
        };
        StepChoice {
            kind: StepKind::Away,
            j,
            k,
            theta,
            theta_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BasicOutcome {
    StrictSolution { y: DenseVector },
    RescaleCertificate,
    BudgetExhausted,
}

impl BasicOutcome {
    pub fn tag(&self) -> &'static str {
        match self {
            BasicOutcome::StrictSolution { .. } => "strict",
            BasicOutcome::RescaleCertificate => "certificate",
            BasicOutcome::BudgetExhausted => "budget_exhausted",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub iterations: u64,
    /// Largest support of any iterate, including the final one.
    pub max_support: usize,
    /// Largest active basis size (limited-support procedures only).
    pub max_basis: usize,
    pub counted_ops: u64,
    pub mirr_calls: u64,
    pub mirr_ops: u64,
    /// mIRR calls that took the reduction branch.
    pub reductions: u64,
    /// Iteration at which the first reduction happened.
    pub first_reduction: Option<u64>,
    pub rebuilds: usize,
    pub away_steps: u64,
    /// `‖z_t‖²` for `t = 0, 1, …` up to and including the halting iterate.
    pub z_norm_history: Vec<f64>,
    /// Iterations `t ≥ 1` where `‖z_t‖² > (1 + 1e-9)/t`.
    pub decay_violations: u64,
    /// Largest `‖z_t − Qᵀx_t‖ / (1 + ‖x_t‖)` seen (checked at every
    /// iteration in debug builds, at halting otherwise).
    pub max_z_drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BasicResult {
    pub outcome: BasicOutcome,
    pub x: SimplexPoint,
    pub trace: Trace,
}

/// Runs a limited-support procedure (LSP, LSVN or LSVNA).
pub fn run_basic(
    basis: &OrthonormalBasis,
    kind: ProcedureKind,
    policy: &StoppingPolicy,
    budget: u64,
) -> Result<BasicResult> {
    if !kind.is_limited_support() {
        return Err(Error::InvalidArgument(format!(
            "{kind} is not a limited-support procedure"
        )));
    }
    run(basis, kind, policy, budget)
}

/// Runs a dense baseline procedure without representation reduction.
pub fn run_baseline(
    basis: &OrthonormalBasis,
    kind: ProcedureKind,
    policy: &StoppingPolicy,
    budget: u64,
) -> Result<BasicResult> {
    if kind.is_limited_support() {
        return Err(Error::InvalidArgument(format!("{kind} is not a baseline procedure")));
    }
    run(basis, kind, policy, budget)
}

/// Dispatches to [`run_basic`] or [`run_baseline`].
pub fn run_procedure(
    basis: &OrthonormalBasis,
    kind: ProcedureKind,
    policy: &StoppingPolicy,
    budget: u64,
) -> Result<BasicResult> {
    run(basis, kind, policy, budget)
}

fn z_drift(basis: &OrthonormalBasis, x: &SimplexPoint, z: &[f64]) -> f64 {
    let exact = x.represented(basis.matrix());
    let diff: f64 = exact
        .iter()
        .zip(z)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    diff / (1.0 + norm_sq(x.weights()).sqrt())
}

fn run(
    basis: &OrthonormalBasis,
    kind: ProcedureKind,
    policy: &StoppingPolicy,
    budget: u64,
) -> Result<BasicResult> {
    if budget == 0 {
        return Err(Error::InvalidArgument("budget must be at least 1".into()));
    }
    let n = basis.n();
    let m = basis.m();
    let points = basis.matrix();
    let rule = kind.rule();

    let (mut x, mut active) = if kind.is_limited_support() {
        let (x, ab) = ActiveBasis::init_active(points, 0, MirrConfig::for_dimension(n));
        (x, Some(ab))
    } else {
        (SimplexPoint::vertex(n, 0), None)
    };
    let mut z: DenseVector = basis.point(0).to_vec();
    let mut trace = Trace::default();
    let mut t: u64 = 0;
    let mut stalled = 0usize;
    let mut scratch = vec![0.0; m];

    let outcome = loop {
        let zz = norm_sq(&z);
        trace.z_norm_history.push(zz);
        if t >= 1 && zz > (1.0 + DECAY_SLACK) / t as f64 {
            trace.decay_violations += 1;
        }
        trace.max_support = trace.max_support.max(x.support_len());
        if let Some(ab) = &active {
            trace.max_basis = trace.max_basis.max(ab.len());
        }
        if cfg!(debug_assertions) {
            trace.max_z_drift = trace.max_z_drift.max(z_drift(basis, &x, &z));
        }

        let eval = evaluate_state(basis, &x, &z, policy);
        trace.counted_ops += (n * m + 2 * n) as u64;
        match eval.verdict {
            Verdict::Strict => break BasicOutcome::StrictSolution { y: eval.y },
            Verdict::Certificate => break BasicOutcome::RescaleCertificate,
            Verdict::Continue => {}
        }
        if t >= budget {
            break BasicOutcome::BudgetExhausted;
        }

        let step = match rule {
            StepRule::Perceptron => StepChoice {
                kind: StepKind::Regular,
                j: eval.j_min,
                k: eval.j_min,
                theta: step_perceptron(t),
                theta_max: 1.0,
            },
            StepRule::LineSearch => StepChoice {
                kind: StepKind::Regular,
                j: eval.j_min,
                k: eval.j_min,
                theta: step_linesearch(&z, basis.point(eval.j_min)).unwrap_or(0.0),
                theta_max: 1.0,
            },
            StepRule::Away => choose_direction_away(basis, &x, &z, &eval.y),
        };
        trace.counted_ops += (4 * m) as u64;

        let theta = step.theta;
        match step.kind {
            StepKind::Regular => {
                let j = step.j;
                if theta != 0.0 {
                    let keep = 1.0 - theta;
                    for w in x.weights_mut() {
                        *w *= keep;
                    }
                    x.weights_mut()[j] += theta;
                    // z ← z + θ(q_j − z)
                    scratch.copy_from_slice(basis.point(j));
                    axpy(-1.0, &z, &mut scratch);
                    axpy(theta, &scratch, &mut z);
                }
                trace.counted_ops += (n + 2 * m) as u64;
                if let Some(ab) = active.as_mut() {
                    if !ab.contains(j) {
                        let before = ab.counted_ops();
                        if let MirrEvent::Reduced(_) = ab.mirr(points, &mut x, j)? {
                            trace.reductions += 1;
                            trace.first_reduction.get_or_insert(t);
                        }
                        trace.mirr_calls += 1;
                        let spent = ab.counted_ops() - before;
                        trace.mirr_ops += spent;
                        trace.counted_ops += spent;
                    }
                }
            }
            StepKind::Away => {
                trace.away_steps += 1;
                let k = step.k;
                if theta != 0.0 {
                    let grow = 1.0 + theta;
                    for w in x.weights_mut() {
                        *w *= grow;
                    }
                    let wk = &mut x.weights_mut()[k];
                    *wk -= theta;
                    if theta >= step.theta_max || *wk < 0.0 {
                        *wk = 0.0;
                    }
                    // z ← z + θ(z − q_k)
                    scratch.copy_from_slice(&z);
                    axpy(-1.0, basis.point(k), &mut scratch);
                    axpy(theta, &scratch, &mut z);
                }
                trace.counted_ops += (n + 2 * m) as u64;
            }
        }

        if theta == 0.0 {
            stalled += 1;
            if stalled > n {
                return Err(Error::NumericalBreakdown(format!(
                    "{kind} stalled with zero step for {stalled} consecutive iterations at t={t}"
                )));
            }
        } else {
            stalled = 0;
        }
        t += 1;
    };

    trace.iterations = t;
    trace.max_z_drift = trace.max_z_drift.max(z_drift(basis, &x, &z));
    if let Some(ab) = &active {
        trace.rebuilds = ab.rebuilds();
    }
    Ok(BasicResult { outcome, x, trace })
}
