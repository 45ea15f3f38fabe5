use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde_json::json;

use carascale::bench::{canonicalize, run_entry, write_csv, BenchRecord, InstanceKind, SuiteSpec, Violation};
use carascale::format::{parse_instance, parse_vector, render_instance, render_number, render_vector};
use carascale::instance::{gen_dual_feasible_with, gen_primal_feasible_with, GeneratorOptions, Instance};
use carascale::procedures::ProcedureKind;
use carascale::solver::{solve, verify_certificate, verify_vector, Side, SolveConfig, SolveVerdict, VerificationReport};
use carascale::Error;

const EXIT_ERROR: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_UNDETERMINED: u8 = 3;
const EXIT_VIOLATION: u8 = 4;
const EXIT_VERIFY_FAILED: u8 = 5;

#[derive(Parser)]
#[command(name = "carascale", version, about = "Conic feasibility by projection and rescaling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a seeded random instance with a feasibility witness.
    Generate {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = KindArg::Primal)]
        kind: KindArg,
        /// Divide the smallest witness entry by this factor.
        #[arg(long, default_value_t = 1.0)]
        hardness: f64,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Solve an instance and verify the result against the original basis.
    Solve {
        instance: PathBuf,
        #[arg(long, default_value = "lsvna")]
        procedure: String,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        /// Per basic-procedure iteration budget (default 9(d+1)²n).
        #[arg(long)]
        budget: Option<u64>,
        #[arg(long, value_enum, default_value_t = OutputFormat::Text)]
        format: OutputFormat,
        /// Also write the solution vector as a prmat column.
        #[arg(long)]
        solution_out: Option<PathBuf>,
    },
    /// Run a generated suite and write one CSV row per (instance, procedure).
    Bench {
        /// Comma-separated ambient dimensions.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        n: Vec<usize>,
        /// Comma-separated subspace dimensions.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        m: Vec<usize>,
        /// Seeds as a comma list and/or ranges, e.g. `1..10,42`.
        #[arg(long)]
        seeds: String,
        #[arg(long, value_delimiter = ',', default_value = "lsvn,baseline_vn")]
        procedures: Vec<String>,
        #[arg(long, value_enum, default_value_t = KindArg::Primal)]
        kind: KindArg,
        #[arg(long, default_value_t = 200)]
        max_rounds: usize,
        #[arg(short, long)]
        out: PathBuf,
    },
    /// Check that a vector is strictly positive and lies in L (or L^⊥).
    Verify {
        instance: PathBuf,
        solution: PathBuf,
        #[arg(long, value_enum, default_value_t = SideArg::Auto)]
        side: SideArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum KindArg {
    Primal,
    Dual,
}

impl From<KindArg> for InstanceKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Primal => InstanceKind::Primal,
            KindArg::Dual => InstanceKind::Dual,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum OutputFormat {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum SideArg {
    Primal,
    Dual,
    Auto,
}

/// A failure mapped onto the exit-code contract.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidArgument(_) => EXIT_USAGE,
            _ => EXIT_ERROR,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: EXIT_ERROR,
        message: format!("{}: {e}", path.display()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Generate {
            n,
            m,
            seed,
            kind,
            hardness,
            out,
        } => cmd_generate(n, m, seed, kind, hardness, &out),
        Command::Solve {
            instance,
            procedure,
            max_rounds,
            budget,
            format,
            solution_out,
        } => cmd_solve(&instance, &procedure, max_rounds, budget, format, solution_out.as_deref()),
        Command::Bench {
            n,
            m,
            seeds,
            procedures,
            kind,
            max_rounds,
            out,
        } => cmd_bench(n, m, &seeds, &procedures, kind, max_rounds, &out),
        Command::Verify {
            instance,
            solution,
            side,
        } => cmd_verify(&instance, &solution, side),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn cmd_generate(n: usize, m: usize, seed: u64, kind: KindArg, hardness: f64, out: &Path) -> Result<u8, Failure> {
    if m == 0 || m >= n {
        return Err(Failure::usage(format!("need 1 <= m < n, got n={n}, m={m}")));
    }
    let opts = GeneratorOptions { hardness };
    let inst = match kind {
        KindArg::Primal => gen_primal_feasible_with(n, m, seed, &opts)?,
        KindArg::Dual => gen_dual_feasible_with(n, m, seed, &opts)?,
    };
    fs::write(out, render_instance(&inst)).map_err(|e| io_failure(out, e))?;
    Ok(0)
}

fn load_instance(path: &Path) -> Result<Instance, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_instance(&text, Some(base)).map_err(|e| Failure {
        code: EXIT_ERROR,
        message: format!("{}: {e}", path.display()),
    })
}

fn format_vector(v: &[f64]) -> String {
    v.iter().map(|e| render_number(*e)).collect::<Vec<_>>().join(" ")
}

fn cmd_solve(
    path: &Path,
    procedure: &str,
    max_rounds: usize,
    budget: Option<u64>,
    format: OutputFormat,
    solution_out: Option<&Path>,
) -> Result<u8, Failure> {
    let procedure: ProcedureKind = procedure.parse()?;
    if max_rounds == 0 || budget == Some(0) {
        return Err(Failure::usage("max-rounds and budget must be positive"));
    }
    let inst = load_instance(path)?;
    let cfg = SolveConfig {
        procedure,
        max_rounds,
        per_round_budget: budget,
    };
    let outcome = match solve(&inst, &cfg) {
        Ok(o) => o,
        Err(e @ Error::NumericalBreakdown(_)) => {
            if format == OutputFormat::Json {
                println!("{}", json!({ "result": "breakdown", "message": e.to_string() }));
            } else {
                println!("result: breakdown\nmessage: {e}");
            }
            return Ok(EXIT_ERROR);
        }
        Err(e) => return Err(e.into()),
    };

    let (y, report) = match &outcome.verdict {
        SolveVerdict::PrimalStrict { y } | SolveVerdict::DualStrict { y } => {
            (Some(y.clone()), Some(verify_certificate(&inst, &outcome.verdict)?))
        }
        SolveVerdict::Undetermined { .. } => (None, None),
    };

    match format {
        OutputFormat::Json => {
            let doc = json!({
                "result": outcome.verdict.tag(),
                "procedure": procedure.name(),
                "n": inst.n,
                "m": inst.m,
                "rounds": outcome.rounds.len(),
                "rescalings": outcome.rescalings(),
                "iterations": outcome.total_iterations(),
                "counted_ops": outcome.total_ops(),
                "solution": y,
                "verification": report,
                "trace": outcome.rounds,
            });
            println!("{}", serde_json::to_string_pretty(&doc).expect("serializable report"));
        }
        OutputFormat::Text => {
            println!("result: {}", outcome.verdict.tag());
            println!("procedure: {procedure}");
            println!("n: {}  m: {}", inst.n, inst.m);
            println!("basic runs: {}", outcome.rounds.len());
            println!("rescalings: {}", outcome.rescalings());
            println!("iterations: {}", outcome.total_iterations());
            if let Some(r) = &report {
                println!(
                    "verification: {} (min entry {:e}, membership residual {:e})",
                    if r.passed { "pass" } else { "fail" },
                    r.min_entry,
                    r.membership_residual
                );
            }
            if let Some(y) = &y {
                println!("y: {}", format_vector(y));
            }
        }
    }

    if let (Some(out), Some(y)) = (solution_out, &y) {
        fs::write(out, render_vector(y)).map_err(|e| io_failure(out, e))?;
    }

    Ok(match report {
        Some(r) if r.passed => 0,
        Some(_) => EXIT_ERROR,
        None => EXIT_UNDETERMINED,
    })
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>, Failure> {
    let mut seeds = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let bad = || Failure::usage(format!("invalid seed spec `{part}`"));
        if let Some((lo, hi)) = part.split_once("..") {
            let lo: u64 = lo.parse().map_err(|_| bad())?;
            let hi: u64 = hi.parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(bad());
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(part.parse().map_err(|_| bad())?);
        }
    }
    Ok(seeds)
}

fn bench_threads() -> Result<usize, Failure> {
    match std::env::var("CARASCALE_THREADS") {
        Ok(v) => v
            .parse::<usize>()
            .ok()
            .filter(|t| *t > 0)
            .ok_or_else(|| Failure::usage(format!("CARASCALE_THREADS must be a positive integer, got `{v}`"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_bench(
    ns: Vec<usize>,
    ms: Vec<usize>,
    seeds: &str,
    procedures: &[String],
    kind: KindArg,
    max_rounds: usize,
    out: &Path,
) -> Result<u8, Failure> {
    let procedures = procedures
        .iter()
        .map(|p| p.parse::<ProcedureKind>())
        .collect::<Result<Vec<_>, _>>()?;
    let suite = SuiteSpec {
        ns,
        ms,
        seeds: parse_seeds(seeds)?,
        procedures,
        kind: kind.into(),
        max_rounds,
    };
    let entries = suite.entries()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(bench_threads()?)
        .build()
        .map_err(|e| Failure {
            code: EXIT_ERROR,
            message: e.to_string(),
        })?;

    let sink: Mutex<(Vec<BenchRecord>, Vec<Violation>)> = Mutex::new((Vec::new(), Vec::new()));
    let errors: Vec<Error> = pool.install(|| {
        entries
            .par_iter()
            .filter_map(|entry| match run_entry(entry, max_rounds) {
                Ok(res) => {
                    let mut guard = sink.lock().expect("bench sink poisoned");
                    guard.0.push(res.record);
                    guard.1.extend(res.violations);
                    None
                }
                Err(e) => Some(e),
            })
            .collect()
    });
    if let Some(e) = errors.into_iter().next() {
        return Err(e.into());
    }
    let (mut records, violations) = sink.into_inner().expect("bench sink poisoned");
    canonicalize(&mut records);

    let file = fs::File::create(out).map_err(|e| io_failure(out, e))?;
    write_csv(&records, std::io::BufWriter::new(file))?;

    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "bench: {} runs written to {}", records.len(), out.display());
    for proc_kind in ProcedureKind::ALL {
        let rows: Vec<&BenchRecord> = records.iter().filter(|r| r.procedure == proc_kind).collect();
        if rows.is_empty() {
            continue;
        }
        let max_support = rows.iter().map(|r| r.max_support).max().unwrap_or(0);
        let worst_excess = rows
            .iter()
            .map(|r| r.max_support as i64 - (r.m as i64 + 1))
            .max()
            .unwrap_or(0);
        let mean_iters = rows.iter().map(|r| r.iterations as f64).sum::<f64>() / rows.len() as f64;
        let solved = rows
            .iter()
            .filter(|r| matches!(r.result_tag, carascale::bench::ResultTag::PrimalStrict | carascale::bench::ResultTag::DualStrict))
            .count();
        let _ = writeln!(
            err,
            "  {:<20} runs={:<5} solved={:<5} mean_iterations={:<10.1} max_support={:<4} max(support-(m+1))={}",
            proc_kind.name(),
            rows.len(),
            solved,
            mean_iters,
            max_support,
            worst_excess
        );
    }
    if violations.is_empty() {
        Ok(0)
    } else {
        for v in &violations {
            let _ = writeln!(err, "violation: {v}");
        }
        Ok(EXIT_VIOLATION)
    }
}

fn print_report(label: &str, r: &VerificationReport) {
    println!(
        "{label}: {} (min entry {:e}, membership residual {:e}, positive {}, in subspace {})",
        if r.passed { "pass" } else { "fail" },
        r.min_entry,
        r.membership_residual,
        r.positive,
        r.in_subspace
    );
}

fn cmd_verify(instance: &Path, solution: &Path, side: SideArg) -> Result<u8, Failure> {
    let inst = load_instance(instance)?;
    let text = fs::read_to_string(solution).map_err(|e| io_failure(solution, e))?;
    let y = parse_vector(&text).map_err(|e| Failure {
        code: EXIT_ERROR,
        message: format!("{}: {e}", solution.display()),
    })?;
    if y.len() != inst.n {
        return Err(Failure::usage(format!(
            "solution has {} entries, instance has n={}",
            y.len(),
            inst.n
        )));
    }
    let basis = inst.orthonormal_basis()?;
    let sides: &[Side] = match side {
        SideArg::Primal => &[Side::Primal],
        SideArg::Dual => &[Side::Dual],
        SideArg::Auto => &[Side::Primal, Side::Dual],
    };
    let mut passed = false;
    for s in sides {
        let report = verify_vector(&basis, *s, &y)?;
        print_report(s.name(), &report);
        passed |= report.passed;
    }
    Ok(if passed { 0 } else { EXIT_VERIFY_FAILED })
}
