//! Verification pipeline wiring and the corpus sweep harness.

use std::path::{Path, PathBuf};
use std::time::Duration;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{self, Context, ContextError};
use crate::engine::{self, Budget, SymbolicTrace, Verdict};
use crate::frontend::{
    parse_contract, parse_property, parse_snapshot, Address, BlockSnapshot, ContractAST,
    FrontendError, TemporalProperty,
};
use crate::optimization::{
    apply_heuristics, constantize, select_heuristics, spatialize, Heuristic, HeuristicSet,
    OptError, VulnClass,
};
use crate::solver::{Backend, SolverHandle, DEFAULT_QUERY_TIMEOUT_MS};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{0}")]
    Frontend(#[from] FrontendError),
    #[error("{0}")]
    Context(#[from] ContextError),
    #[error("{0}")]
    Optimization(#[from] OptError),
    #[error("cannot read {path}: {err}")]
    Io { path: PathBuf, err: String },
    #[error("{0}")]
    Manifest(String),
}

/// Which solver backend a run should use.
#[derive(Debug, Clone)]
pub enum SolverChoice {
    /// External command when configured (flag or `CSCV_SOLVER`), otherwise
    /// the built-in bounded solver.
    Auto,
    Builtin { lo: i64, hi: i64 },
    External { cmd: String },
}

impl SolverChoice {
    fn backend(&self) -> Backend {
        match self {
            SolverChoice::Builtin { lo, hi } => {
                Backend::Builtin { lo: BigInt::from(*lo), hi: BigInt::from(*hi) }
            }
            SolverChoice::External { cmd } => {
                Backend::External { cmd: cmd.clone(), timeout_ms: DEFAULT_QUERY_TIMEOUT_MS }
            }
            SolverChoice::Auto => match std::env::var("CSCV_SOLVER") {
                Ok(cmd) if !cmd.trim().is_empty() => {
                    Backend::External { cmd, timeout_ms: DEFAULT_QUERY_TIMEOUT_MS }
                }
                _ => Backend::Builtin {
                    lo: BigInt::from(crate::solver::DEFAULT_BUILTIN_LO),
                    hi: BigInt::from(crate::solver::DEFAULT_BUILTIN_HI),
                },
            },
        }
    }
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub budget: Budget,
    pub default_zero: bool,
    pub constantize: bool,
    pub solver: SolverChoice,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            budget: Budget::default(),
            default_zero: false,
            constantize: true,
            solver: SolverChoice::Auto,
        }
    }
}

pub struct VerifyOutput {
    pub verdict: Verdict,
    pub property: TemporalProperty,
    pub contract: ContractAST,
    pub snapshot: BlockSnapshot,
    pub context: Context,
}

/// Actor list for the solver: attacker first so models prefer it, the rest
/// in snapshot order.
fn solver_actors(snapshot: &BlockSnapshot) -> Vec<Address> {
    let mut actors = vec![snapshot.attacker.clone()];
    for a in &snapshot.actors {
        if *a != snapshot.attacker {
            actors.push(a.clone());
        }
    }
    actors
}

/// Run the full pipeline over parsed inputs.
pub fn verify_parsed(
    contract: &ContractAST,
    property: &TemporalProperty,
    snapshot: &BlockSnapshot,
    heuristics: HeuristicSet,
    cfg: &PipelineConfig,
    trace_sink: &mut Option<&mut Vec<SymbolicTrace>>,
) -> Result<VerifyOutput, PipelineError> {
    let built = context::build_context(property, contract, snapshot, HeuristicSet::empty(), cfg.default_zero);
    let ctx = match built {
        Ok(ctx) => apply_heuristics(&ctx, &heuristics),
        Err(ContextError::NoExternalFunctions) => {
            // Empty transition relation: verification degenerates to the
            // initial state.
            let ctx = context::build_context_without_externals(
                property,
                contract,
                snapshot,
                cfg.default_zero,
            )?;
            let instrumented = spatialize(property, contract)?;
            let verdict = engine::verify_empty_transition_system(
                &ctx,
                contract,
                snapshot,
                &instrumented,
            );
            return Ok(VerifyOutput {
                verdict,
                property: property.clone(),
                contract: contract.clone(),
                snapshot: snapshot.clone(),
                context: ctx,
            });
        }
        Err(e) => return Err(e.into()),
    };

    let folded = if cfg.constantize {
        constantize(contract, &ctx, snapshot, cfg.default_zero)?
    } else {
        contract.clone()
    };
    let instrumented = spatialize(property, &folded)?;
    let mut solver = SolverHandle::new(cfg.solver.backend(), solver_actors(snapshot));
    let verdict = engine::explore_with(
        &ctx,
        &instrumented,
        snapshot,
        &cfg.budget,
        &mut solver,
        trace_sink,
    );
    Ok(VerifyOutput {
        verdict,
        property: property.clone(),
        contract: contract.clone(),
        snapshot: snapshot.clone(),
        context: ctx,
    })
}

/// Parse three sources and verify.
pub fn verify_sources(
    contract_src: &str,
    property_src: &str,
    snapshot_src: &str,
    heuristics: HeuristicSet,
    cfg: &PipelineConfig,
) -> Result<VerifyOutput, PipelineError> {
    let contract = parse_contract(contract_src)?;
    let property = parse_property(property_src, &contract)?;
    let snapshot = parse_snapshot(snapshot_src, &contract)?;
    verify_parsed(&contract, &property, &snapshot, heuristics, cfg, &mut None)
}

pub fn read_to_string(path: &Path) -> Result<String, PipelineError> {
    std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io { path: path.to_path_buf(), err: e.to_string() })
}

// ---------------------------------------------------------------------------
// Corpus manifest
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Expected {
    #[serde(rename = "violated")]
    Violated,
    #[serde(rename = "not-violated-within-budget")]
    NotViolatedWithinBudget,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct BudgetOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diameter: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_budget_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_flips: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reentry_depth: Option<u32>,
}

impl BudgetOverride {
    pub fn apply(&self, base: &Budget) -> Budget {
        Budget {
            diameter: self.diameter.unwrap_or(base.diameter),
            time_limit: self
                .time_budget_s
                .map(Duration::from_secs_f64)
                .unwrap_or(base.time_limit),
            branch_flips: self.branch_flips.unwrap_or(base.branch_flips),
            reentry_depth: self.reentry_depth.unwrap_or(base.reentry_depth),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub class: VulnClass,
    pub contract: String,
    pub property: String,
    pub snapshot: String,
    pub expected: Expected,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<BudgetOverride>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl CorpusManifest {
    pub fn resolve(&self, relative: &str) -> PathBuf {
        self.base_dir.join(relative)
    }
}

/// Load a manifest and check the taxonomy coverage invariant: every class
/// appears with at least one vulnerable and one patched entry.
pub fn load_manifest(path: &Path) -> Result<CorpusManifest, PipelineError> {
    let text = read_to_string(path)?;
    let mut manifest: CorpusManifest =
        serde_json::from_str(&text).map_err(|e| PipelineError::Manifest(e.to_string()))?;
    manifest.base_dir = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
    for class in VulnClass::ALL {
        let vulnerable = manifest
            .entries
            .iter()
            .any(|e| e.class == class && e.expected == Expected::Violated);
        let patched = manifest
            .entries
            .iter()
            .any(|e| e.class == class && e.expected == Expected::NotViolatedWithinBudget);
        if !vulnerable || !patched {
            return Err(PipelineError::Manifest(format!(
                "class {} needs at least one vulnerable and one patched entry",
                class.as_str()
            )));
        }
    }
    Ok(manifest)
}

// ---------------------------------------------------------------------------
// Proportion sweep
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub seed: u64,
    pub verdict: String,
    pub reason: Option<String>,
    pub vector_length: Option<usize>,
    pub heuristics_used: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EntryReport {
    pub id: String,
    pub class: String,
    pub expected: String,
    pub ok: bool,
    pub runs: Vec<RunReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ProportionReport {
    pub proportion: f64,
    pub detected: usize,
    pub total_vulnerable: usize,
    pub attack_vectors: usize,
    pub mean_elapsed_s: f64,
    pub entries: Vec<EntryReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub proportions: Vec<ProportionReport>,
}

impl SweepReport {
    /// Zero every timing field; what remains must be byte-identical across
    /// runs with the same seeds.
    pub fn without_timing(&self) -> SweepReport {
        let mut out = self.clone();
        for p in &mut out.proportions {
            p.mean_elapsed_s = 0.0;
            for e in &mut p.entries {
                for r in &mut e.runs {
                    r.elapsed_ms = 0;
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub proportions: Vec<f64>,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    pub heuristic_base: Vec<Heuristic>,
    pub pipeline: PipelineConfig,
}

fn verdict_fields(verdict: &Verdict) -> (String, Option<String>, Option<usize>) {
    match verdict {
        Verdict::Violated(v, _) => ("violated".into(), None, Some(v.invocations.len())),
        Verdict::Verified(_) => ("verified".into(), None, None),
        Verdict::Unknown(reason, _) => {
            ("unknown".into(), Some(reason.as_str().to_string()), None)
        }
    }
}

struct LoadedEntry {
    contract: ContractAST,
    property: TemporalProperty,
    snapshot: BlockSnapshot,
    budget: Budget,
}

fn load_entry(
    manifest: &CorpusManifest,
    entry: &ManifestEntry,
    base_budget: &Budget,
) -> Result<LoadedEntry, PipelineError> {
    let contract = parse_contract(&read_to_string(&manifest.resolve(&entry.contract))?)?;
    let property =
        parse_property(&read_to_string(&manifest.resolve(&entry.property))?, &contract)?;
    let snapshot =
        parse_snapshot(&read_to_string(&manifest.resolve(&entry.snapshot))?, &contract)?;
    let budget = entry.budget.clone().unwrap_or_default().apply(base_budget);
    Ok(LoadedEntry { contract, property, snapshot, budget })
}

/// Run the proportion sweep: for every (proportion, entry, seed), select
/// heuristics and verify. Per-entry failures are recorded, never fatal.
/// Entries run in parallel up to `jobs`; aggregation order is fixed by the
/// manifest, so output is deterministic given the seeds.
pub fn run_corpus(manifest: &CorpusManifest, opts: &SweepOptions) -> SweepReport {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.jobs.max(1))
        .build()
        .expect("thread pool");

    let mut proportions = Vec::new();
    for &proportion in &opts.proportions {
        // One job per (entry, seed) pair.
        let jobs: Vec<(usize, u64)> = manifest
            .entries
            .iter()
            .enumerate()
            .flat_map(|(i, _)| opts.seeds.iter().map(move |s| (i, *s)))
            .collect();

        let results: Vec<RunReport> = pool.install(|| {
            use rayon::prelude::*;
            jobs.par_iter()
                .map(|(entry_idx, seed)| {
                    let entry = &manifest.entries[*entry_idx];
                    let selection = select_heuristics(&opts.heuristic_base, proportion, *seed);
                    let used = selection.selected.len();
                    match load_entry(manifest, entry, &opts.pipeline.budget) {
                        Ok(loaded) => {
                            let mut cfg = opts.pipeline.clone();
                            cfg.budget = loaded.budget.clone();
                            match verify_parsed(
                                &loaded.contract,
                                &loaded.property,
                                &loaded.snapshot,
                                selection,
                                &cfg,
                                &mut None,
                            ) {
                                Ok(output) => {
                                    let (verdict, reason, vector_length) =
                                        verdict_fields(&output.verdict);
                                    RunReport {
                                        seed: *seed,
                                        verdict,
                                        reason,
                                        vector_length,
                                        heuristics_used: used,
                                        elapsed_ms: output.verdict.stats().elapsed_ms,
                                    }
                                }
                                Err(e) => RunReport {
                                    seed: *seed,
                                    verdict: "error".into(),
                                    reason: Some(e.to_string()),
                                    vector_length: None,
                                    heuristics_used: used,
                                    elapsed_ms: 0,
                                },
                            }
                        }
                        Err(e) => RunReport {
                            seed: *seed,
                            verdict: "error".into(),
                            reason: Some(e.to_string()),
                            vector_length: None,
                            heuristics_used: used,
                            elapsed_ms: 0,
                        },
                    }
                })
                .collect()
        });

        let per_seed = opts.seeds.len().max(1);
        let mut entries = Vec::new();
        let mut detected = 0usize;
        let mut attack_vectors = 0usize;
        let mut total_vulnerable = 0usize;
        let mut elapsed_total_ms = 0u64;
        for (i, entry) in manifest.entries.iter().enumerate() {
            let runs: Vec<RunReport> =
                results[i * per_seed..(i + 1) * per_seed].to_vec();
            elapsed_total_ms += runs.iter().map(|r| r.elapsed_ms).sum::<u64>();
            let violated_runs = runs.iter().filter(|r| r.verdict == "violated").count();
            let ok = match entry.expected {
                Expected::Violated => violated_runs == runs.len(),
                Expected::NotViolatedWithinBudget => violated_runs == 0,
            };
            if entry.expected == Expected::Violated {
                total_vulnerable += 1;
                if violated_runs == runs.len() {
                    detected += 1;
                }
                attack_vectors += violated_runs;
            }
            entries.push(EntryReport {
                id: entry.id.clone(),
                class: entry.class.as_str().to_string(),
                expected: match entry.expected {
                    Expected::Violated => "violated".into(),
                    Expected::NotViolatedWithinBudget => "not-violated-within-budget".into(),
                },
                ok,
                runs,
            });
        }
        proportions.push(ProportionReport {
            proportion,
            detected,
            total_vulnerable,
            attack_vectors,
            mean_elapsed_s: if results.is_empty() {
                0.0
            } else {
                (elapsed_total_ms as f64 / 1000.0) / results.len() as f64
            },
            entries,
        });
    }
    SweepReport { proportions }
}
