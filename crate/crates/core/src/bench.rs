//! Benchmark harness: runs the driver over a generated suite and records
//! one [`BenchRecord`] per (instance, procedure) pair.
//!
//! CSV columns, in order: `instance_id, procedure, n, m, iterations,
//! max_support, rescalings, counted_ops, wall_nanoseconds, result_tag`.
//! `iterations` and `counted_ops` are totals over every basic-procedure run
//! of the solve; `max_support` is the largest iterate support seen on the
//! primal side (subspace dimension `m`).

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{gen_dual_feasible, gen_primal_feasible, Instance};
use crate::procedures::ProcedureKind;
use crate::solver::{solve, verify_certificate, SolveConfig, SolveVerdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Primal,
    Dual,
}

impl InstanceKind {
    pub fn name(self) -> &'static str {
        match self {
            InstanceKind::Primal => "primal",
            InstanceKind::Dual => "dual",
        }
    }

    pub fn generate(self, n: usize, m: usize, seed: u64) -> Result<Instance> {
        match self {
            InstanceKind::Primal => gen_primal_feasible(n, m, seed),
            InstanceKind::Dual => gen_dual_feasible(n, m, seed),
        }
    }
}

impl fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InstanceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "primal" => Ok(InstanceKind::Primal),
            "dual" => Ok(InstanceKind::Dual),
            other => Err(Error::InvalidArgument(format!("unknown instance kind `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultTag {
    PrimalStrict,
    DualStrict,
    Undetermined,
    Breakdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub instance_id: String,
    pub procedure: ProcedureKind,
    pub n: usize,
    pub m: usize,
    pub iterations: u64,
    pub max_support: usize,
    pub rescalings: usize,
    pub counted_ops: u64,
    pub wall_nanoseconds: u64,
    pub result_tag: ResultTag,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteSpec {
    pub ns: Vec<usize>,
    pub ms: Vec<usize>,
    pub seeds: Vec<u64>,
    pub procedures: Vec<ProcedureKind>,
    pub kind: InstanceKind,
    pub max_rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchEntry {
    pub kind: InstanceKind,
    pub n: usize,
    pub m: usize,
    pub seed: u64,
    pub procedure: ProcedureKind,
}

impl BenchEntry {
    pub fn instance_id(&self) -> String {
        format!("{}-n{:04}-m{:03}-s{:05}", self.kind, self.n, self.m, self.seed)
    }
}

impl SuiteSpec {
    /// Every (n, m, seed, procedure) combination with `m < n`.
    pub fn entries(&self) -> Result<Vec<BenchEntry>> {
        if self.ns.is_empty() || self.ms.is_empty() || self.seeds.is_empty() || self.procedures.is_empty() {
            return Err(Error::InvalidArgument(
                "suite needs at least one n, m, seed and procedure".into(),
            ));
        }
        let mut out = Vec::new();
        for &n in &self.ns {
            for &m in &self.ms {
                if m == 0 || m >= n {
                    continue;
                }
                for &seed in &self.seeds {
                    for &procedure in &self.procedures {
                        out.push(BenchEntry {
                            kind: self.kind,
                            n,
                            m,
                            seed,
                            procedure,
                        });
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::InvalidArgument("suite has no (n, m) pair with 1 <= m < n".into()));
        }
        Ok(out)
    }
}

/// A bound that a limited-support run failed to honor.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub instance_id: String,
    pub procedure: ProcedureKind,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} [{}]: {}", self.instance_id, self.procedure, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntryResult {
    pub record: BenchRecord,
    pub violations: Vec<Violation>,
}

/// Generates the instance, solves it, and checks the per-run iteration and
/// support bounds for limited-support procedures.
pub fn run_entry(entry: &BenchEntry, max_rounds: usize) -> Result<EntryResult> {
    let instance = entry.kind.generate(entry.n, entry.m, entry.seed)?;
    let instance_id = entry.instance_id();
    let cfg = SolveConfig {
        max_rounds,
        ..SolveConfig::new(entry.procedure)
    };
    let started = Instant::now();
    let solved = solve(&instance, &cfg);
    let wall = started.elapsed().as_nanos() as u64;

    let mut record = BenchRecord {
        instance_id: instance_id.clone(),
        procedure: entry.procedure,
        n: entry.n,
        m: entry.m,
        iterations: 0,
        max_support: 0,
        rescalings: 0,
        counted_ops: 0,
        wall_nanoseconds: wall,
        result_tag: ResultTag::Breakdown,
    };
    let mut violations = Vec::new();
    let outcome = match solved {
        Ok(outcome) => outcome,
        Err(Error::NumericalBreakdown(_)) => {
            return Ok(EntryResult { record, violations });
        }
        Err(other) => return Err(other),
    };

    record.iterations = outcome.total_iterations();
    record.max_support = outcome.max_support(crate::solver::Side::Primal);
    record.rescalings = outcome.rescalings();
    record.counted_ops = outcome.total_ops();
    record.result_tag = match &outcome.verdict {
        SolveVerdict::PrimalStrict { .. } => ResultTag::PrimalStrict,
        SolveVerdict::DualStrict { .. } => ResultTag::DualStrict,
        SolveVerdict::Undetermined { .. } => ResultTag::Undetermined,
    };

    let mut flag = |message: String| {
        violations.push(Violation {
            instance_id: instance_id.clone(),
            procedure: entry.procedure,
            message,
        })
    };
    if !matches!(outcome.verdict, SolveVerdict::Undetermined { .. }) {
        let report = verify_certificate(&instance, &outcome.verdict)?;
        if !report.passed {
            flag(format!(
                "returned solution failed verification (min entry {:e}, residual {:e})",
                report.min_entry, report.membership_residual
            ));
        }
    }
    if entry.procedure.is_limited_support() {
        for r in &outcome.rounds {
            let side = r.side.name();
            if r.iterations > r.iteration_bound || r.outcome == "budget_exhausted" {
                flag(format!(
                    "round {} ({side}): {} iterations without halting within bound {}",
                    r.round, r.iterations, r.iteration_bound
                ));
            }
            if r.max_support > r.subspace_dim + 1 {
                flag(format!(
                    "round {} ({side}): support {} exceeds {}",
                    r.round,
                    r.max_support,
                    r.subspace_dim + 1
                ));
            }
        }
    }
    Ok(EntryResult { record, violations })
}

/// Sorts by `(instance_id, procedure name)`.
pub fn canonicalize(records: &mut [BenchRecord]) {
    records.sort_by(|a, b| {
        (a.instance_id.as_str(), a.procedure.name()).cmp(&(b.instance_id.as_str(), b.procedure.name()))
    });
}

pub fn write_csv<W: Write>(records: &[BenchRecord], sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    for r in records {
        w.serialize(r).map_err(|e| Error::Io(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(source: R) -> Result<Vec<BenchRecord>> {
    let mut rd = csv::Reader::from_reader(source);
    rd.deserialize()
        .map(|row| row.map_err(|e| Error::Io(e.to_string())))
        .collect()
}
