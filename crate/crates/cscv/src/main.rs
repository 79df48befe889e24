//! Command-line entry points: verify one contract, dump analysis or context
//! artifacts, run the corpus sweep, or serve as an SMT-LIB2 shim backend.

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};

use cscv::analysis;
use cscv::corpus::{
    self, load_manifest, read_to_string, PipelineConfig, SolverChoice, SweepOptions,
};
use cscv::engine::{Budget, Verdict};
use cscv::frontend::{parse_contract, parse_property, parse_snapshot};
use cscv::optimization::{load_heuristic_base, select_heuristics, HeuristicSet};
use cscv::report;

const EXIT_VERIFIED: u8 = 0;
const EXIT_VIOLATED: u8 = 1;
const EXIT_UNKNOWN: u8 = 2;
const EXIT_USAGE: u8 = 64;
const EXIT_INPUT: u8 = 65;

#[derive(Parser)]
#[command(
    name = "cscv",
    version,
    about = "Context-sensitive concolic verification for MCL contracts"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify a property of one contract at one block snapshot.
    Verify(VerifyArgs),
    /// Dump access sets and the state-variable dependency graph.
    Analyze(AnalyzeArgs),
    /// Build and dump the verification context.
    Context(ContextArgs),
    /// Run the corpus harness over a heuristic-proportion grid.
    Corpus(CorpusArgs),
    /// Read an SMT-LIB2 script on stdin and answer sat/unsat plus a model,
    /// like an external solver process would.
    SmtShim(SmtShimArgs),
}

#[derive(Args, Clone)]
struct EngineArgs {
    /// Maximum transitions from the initial state.
    #[arg(long, default_value_t = 4)]
    diameter: u32,
    /// Wall-clock budget in seconds.
    #[arg(long, default_value_t = 60.0)]
    time_budget: f64,
    /// Maximum branch negations per transition.
    #[arg(long, default_value_t = 8)]
    branch_flips: u32,
    /// Maximum nesting of injected reentrant invocations.
    #[arg(long, default_value_t = 1)]
    reentry_depth: u32,
    /// Heuristic base file (JSON list).
    #[arg(long)]
    heuristics: Option<PathBuf>,
    /// Proportion of the heuristic base to sample.
    #[arg(long, default_value_t = 0.0)]
    heuristic_proportion: f64,
    /// RNG seed for heuristic selection.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Solver backend: auto, builtin, or external.
    #[arg(long, default_value = "auto")]
    solver: String,
    /// External solver command (SMT-LIB2 on stdin). Also read from
    /// CSCV_SOLVER.
    #[arg(long)]
    solver_cmd: Option<String>,
    /// Value range LO..HI for the built-in solver.
    #[arg(long, default_value = "0..64")]
    builtin_range: String,
    /// Zero-fill state variables missing from the snapshot.
    #[arg(long)]
    default_zero: bool,
    /// Disable view-function constantization.
    #[arg(long)]
    no_constantize: bool,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    contract: PathBuf,
    #[arg(long)]
    property: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    /// Write the attack-vector report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    contract: PathBuf,
    /// Write access sets and dependency edges here.
    #[arg(long)]
    emit_deps: Option<PathBuf>,
}

#[derive(Args)]
struct ContextArgs {
    #[arg(long)]
    contract: PathBuf,
    #[arg(long)]
    property: PathBuf,
    #[arg(long)]
    snapshot: PathBuf,
    /// Write the context dump here.
    #[arg(long)]
    emit: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct CorpusArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Comma-separated heuristic proportions.
    #[arg(long, default_value = "0,0.25,0.5,0.75", value_delimiter = ',')]
    proportions: Vec<f64>,
    /// Comma-separated selection seeds.
    #[arg(long, default_value = "42", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Parallel verification jobs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Write the sweep report here.
    #[arg(long)]
    report: Option<PathBuf>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct SmtShimArgs {
    /// Default enumeration range LO..HI for variables without syntactic
    /// bounds.
    #[arg(long, default_value = "-64..64", allow_hyphen_values = true)]
    range: String,
}

fn parse_range(text: &str) -> Option<(i64, i64)> {
    let body = text.trim();
    // Split on the last ".." so a negative LO parses.
    let idx = body.rfind("..")?;
    let lo: i64 = body[..idx].trim().parse().ok()?;
    let hi: i64 = body[idx + 2..].trim().parse().ok()?;
    Some((lo, hi))
}

fn usage_error(msg: &str) -> ExitCode {
    eprintln!("cscv: {msg}");
    ExitCode::from(EXIT_USAGE)
}

fn input_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("cscv: {msg}");
    ExitCode::from(EXIT_INPUT)
}

fn solver_choice(engine: &EngineArgs) -> Result<SolverChoice, String> {
    match engine.solver.as_str() {
        "builtin" => {
            let (lo, hi) = parse_range(&engine.builtin_range)
                .ok_or_else(|| format!("bad --builtin-range `{}`", engine.builtin_range))?;
            Ok(SolverChoice::Builtin { lo, hi })
        }
        "external" => {
            let cmd = engine
                .solver_cmd
                .clone()
                .or_else(|| std::env::var("CSCV_SOLVER").ok())
                .filter(|c| !c.trim().is_empty())
                .ok_or_else(|| "--solver external needs --solver-cmd or CSCV_SOLVER".to_string())?;
            Ok(SolverChoice::External { cmd })
        }
        "auto" => match &engine.solver_cmd {
            Some(cmd) => Ok(SolverChoice::External { cmd: cmd.clone() }),
            None => Ok(SolverChoice::Auto),
        },
        other => Err(format!("unknown --solver `{other}` (auto, builtin, external)")),
    }
}

fn pipeline_config(engine: &EngineArgs) -> Result<PipelineConfig, String> {
    Ok(PipelineConfig {
        budget: Budget {
            diameter: engine.diameter,
            time_limit: Duration::from_secs_f64(engine.time_budget),
            branch_flips: engine.branch_flips,
            reentry_depth: engine.reentry_depth,
        },
        default_zero: engine.default_zero,
        constantize: !engine.no_constantize,
        solver: solver_choice(engine)?,
    })
}

fn heuristic_set(engine: &EngineArgs) -> Result<HeuristicSet, ExitCode> {
    match &engine.heuristics {
        None => Ok(HeuristicSet::empty()),
        Some(path) => {
            let text = read_to_string(path).map_err(input_error)?;
            let base = load_heuristic_base(&text)
                .map_err(|e| input_error(format!("bad heuristic base: {e}")))?;
            Ok(select_heuristics(&base, engine.heuristic_proportion, engine.seed))
        }
    }
}

fn write_output(path: &Option<PathBuf>, text: &str) -> Result<(), ExitCode> {
    match path {
        Some(path) => std::fs::write(path, text)
            .map_err(|e| input_error(format!("cannot write {}: {e}", path.display()))),
        None => Ok(()),
    }
}

fn run_verify(args: &VerifyArgs) -> ExitCode {
    let cfg = match pipeline_config(&args.engine) {
        Ok(cfg) => cfg,
        Err(msg) => return usage_error(&msg),
    };
    let heuristics = match heuristic_set(&args.engine) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let inputs = (|| -> Result<_, corpus::PipelineError> {
        Ok((
            read_to_string(&args.contract)?,
            read_to_string(&args.property)?,
            read_to_string(&args.snapshot)?,
        ))
    })();
    let (contract_src, property_src, snapshot_src) = match inputs {
        Ok(t) => t,
        Err(e) => return input_error(e),
    };

    match corpus::verify_sources(&contract_src, &property_src, &snapshot_src, heuristics, &cfg) {
        Ok(output) => {
            let json = report::verdict_report(&output.verdict, &output.property.source);
            if let Err(code) = write_output(&args.report, &report::write_pretty(&json)) {
                return code;
            }
            let stats = output.verdict.stats();
            match &output.verdict {
                Verdict::Violated(vector, _) => {
                    println!(
                        "violated: attack vector of length {} in {} ms ({} transitions, {} states, {} solver calls)",
                        vector.invocations.len(),
                        stats.elapsed_ms,
                        stats.transitions,
                        stats.states,
                        stats.solver_calls
                    );
                    ExitCode::from(EXIT_VIOLATED)
                }
                Verdict::Verified(_) => {
                    println!(
                        "verified: state-space fixpoint in {} ms ({} transitions, {} states)",
                        stats.elapsed_ms, stats.transitions, stats.states
                    );
                    ExitCode::from(EXIT_VERIFIED)
                }
                Verdict::Unknown(reason, _) => {
                    println!(
                        "unknown ({}): no violation within budget in {} ms ({} transitions, {} states)",
                        reason.as_str(),
                        stats.elapsed_ms,
                        stats.transitions,
                        stats.states
                    );
                    ExitCode::from(EXIT_UNKNOWN)
                }
            }
        }
        Err(e) => input_error(e),
    }
}

fn run_analyze(args: &AnalyzeArgs) -> ExitCode {
    let source = match read_to_string(&args.contract) {
        Ok(s) => s,
        Err(e) => return input_error(e),
    };
    let contract = match parse_contract(&source) {
        Ok(c) => c,
        Err(e) => return input_error(e),
    };
    let sets = analysis::access_sets(&contract);
    let graph = analysis::dependency_graph(&contract);
    let text = report::write_pretty(&report::deps_report(&sets, &graph));
    if let Err(code) = write_output(&args.emit_deps, &text) {
        return code;
    }
    if args.emit_deps.is_none() {
        print!("{text}");
    } else {
        println!(
            "analyzed {}: {} functions, {} dependency edges",
            contract.name,
            contract.functions.len(),
            graph.edges.len()
        );
    }
    ExitCode::from(EXIT_VERIFIED)
}

fn run_context(args: &ContextArgs) -> ExitCode {
    let heuristics = match heuristic_set(&args.engine) {
        Ok(h) => h,
        Err(code) => return code,
    };
    let result = (|| -> Result<_, corpus::PipelineError> {
        let contract = parse_contract(&read_to_string(&args.contract)?)?;
        let property = parse_property(&read_to_string(&args.property)?, &contract)?;
        let snapshot = parse_snapshot(&read_to_string(&args.snapshot)?, &contract)?;
        let ctx = cscv::context::build_context(
            &property,
            &contract,
            &snapshot,
            HeuristicSet::empty(),
            args.engine.default_zero,
        )?;
        Ok(cscv::optimization::apply_heuristics(&ctx, &heuristics))
    })();
    match result {
        Ok(ctx) => {
            let text = report::write_pretty(&report::context_report(&ctx));
            if let Err(code) = write_output(&args.emit, &text) {
                return code;
            }
            if args.emit.is_none() {
                print!("{text}");
            } else {
                println!(
                    "context built: domain {:?}, initial ranking {:?}",
                    ctx.evaluation.domain, ctx.relevance.initial
                );
            }
            ExitCode::from(EXIT_VERIFIED)
        }
        Err(e) => input_error(e),
    }
}

fn run_corpus_cmd(args: &CorpusArgs) -> ExitCode {
    let cfg = match pipeline_config(&args.engine) {
        Ok(cfg) => cfg,
        Err(msg) => return usage_error(&msg),
    };
    let manifest = match load_manifest(&args.manifest) {
        Ok(m) => m,
        Err(e) => return input_error(e),
    };
    let heuristic_base = match &args.engine.heuristics {
        Some(path) => {
            let text = match read_to_string(path) {
                Ok(t) => t,
                Err(e) => return input_error(e),
            };
            match load_heuristic_base(&text) {
                Ok(base) => base,
                Err(e) => return input_error(format!("bad heuristic base: {e}")),
            }
        }
        None => Vec::new(),
    };
    let opts = SweepOptions {
        proportions: args.proportions.clone(),
        seeds: args.seeds.clone(),
        jobs: args.jobs,
        heuristic_base,
        pipeline: cfg,
    };
    let sweep = corpus::run_corpus(&manifest, &opts);
    for p in &sweep.proportions {
        println!(
            "proportion {:.2}: detected {}/{} vulnerable, {} attack vectors, mean {:.3} s",
            p.proportion, p.detected, p.total_vulnerable, p.attack_vectors, p.mean_elapsed_s
        );
        for e in &p.entries {
            let status = if e.ok { "ok" } else { "UNEXPECTED" };
            let verdicts: Vec<&str> = e.runs.iter().map(|r| r.verdict.as_str()).collect();
            println!("  [{status}] {} ({}): {:?}", e.id, e.class, verdicts);
        }
    }
    let json = serde_json::to_value(&sweep).expect("sweep serializes");
    if let Err(code) = write_output(&args.report, &report::write_pretty(&json)) {
        return code;
    }
    let all_ok = sweep.proportions.iter().all(|p| p.entries.iter().all(|e| e.ok));
    if all_ok {
        ExitCode::from(EXIT_VERIFIED)
    } else {
        ExitCode::from(EXIT_VIOLATED)
    }
}

fn run_smt_shim(args: &SmtShimArgs) -> ExitCode {
    let Some((lo, hi)) = parse_range(&args.range) else {
        return usage_error(&format!("bad --range `{}`", args.range));
    };
    let mut input = String::new();
    if std::io::stdin().read_to_string(&mut input).is_err() {
        return input_error("cannot read stdin");
    }
    print!("{}", cscv::solver::run_shim(&input, lo, hi));
    ExitCode::from(EXIT_VERIFIED)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let _ = e.print();
            return match e.kind() {
                // Help and version requests are not usage errors.
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::from(EXIT_VERIFIED),
                _ => ExitCode::from(EXIT_USAGE),
            };
        }
    };
    match &cli.command {
        Command::Verify(args) => run_verify(args),
        Command::Analyze(args) => run_analyze(args),
        Command::Context(args) => run_context(args),
        Command::Corpus(args) => run_corpus_cmd(args),
        Command::SmtShim(args) => run_smt_shim(args),
    }
}
