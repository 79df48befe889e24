//! Concolic verification engine: a context-carrying transition system
//! explored breadth-first, one concolic execution per transition.

mod exec;
mod hashing;
mod inputs;
mod replay;

use std::collections::{BTreeMap, HashMap, HashSet, VecDeque};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_traits::Zero;

use crate::context::Context;
use crate::frontend::{Address, BlockSnapshot, ContractAST};
use crate::optimization::InstrumentedContract;
use crate::solver::{ConstraintTerm, Model, ModelValue, SolverHandle, SymbolDecl};
use crate::value::Value;

pub use exec::{step_concolic, ExecEnv, Outcome, StepResult};
pub use hashing::{canonical_hash, canonical_serialize, StateDigest};
pub use inputs::{generate_inputs, SearchMemo};
pub use replay::{replay, ReplayError};

/// Concrete valuation of every state variable plus the native balance
/// ledger of the actors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalState {
    pub valuation: BTreeMap<String, Value>,
    pub actor_balances: BTreeMap<Address, BigInt>,
    /// Transitions taken from the initial state.
    pub depth: u32,
}

impl GlobalState {
    /// Structural equality that ignores the depth bookkeeping.
    pub fn same_contents(&self, other: &GlobalState) -> bool {
        self.valuation == other.valuation && self.actor_balances == other.actor_balances
    }
}

/// One external write function invocation, possibly with reentrant
/// invocations the engine injects when the contract calls out to the
/// attacker.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Invocation {
    pub function: String,
    pub sender: Address,
    pub value: BigInt,
    pub args: Vec<Value>,
    pub reentry: Vec<Invocation>,
}

/// Alternating sequence of states and invocations ending in the
/// property-violating state.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackVector {
    /// s0..sn; one more state than invocations.
    pub states: Vec<GlobalState>,
    pub invocations: Vec<Invocation>,
    pub violating_index: usize,
}

/// Exploration bounds.
#[derive(Debug, Clone)]
pub struct Budget {
    pub diameter: u32,
    pub time_limit: Duration,
    pub branch_flips: u32,
    pub reentry_depth: u32,
}

impl Default for Budget {
    fn default() -> Self {
        Budget {
            diameter: 4,
            time_limit: Duration::from_secs(60),
            branch_flips: 8,
            reentry_depth: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Stats {
    pub transitions: u64,
    pub states: u64,
    pub solver_calls: u64,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnknownReason {
    TimeExhausted,
    DiameterExhausted,
    SolverUnknown,
}

impl UnknownReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            UnknownReason::TimeExhausted => "time-exhausted",
            UnknownReason::DiameterExhausted => "diameter-exhausted",
            UnknownReason::SolverUnknown => "solver-unknown",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Violated(AttackVector, Stats),
    Verified(Stats),
    Unknown(UnknownReason, Stats),
}

impl Verdict {
    pub fn stats(&self) -> &Stats {
        match self {
            Verdict::Violated(_, s) | Verdict::Verified(s) | Verdict::Unknown(_, s) => s,
        }
    }

    pub fn is_violated(&self) -> bool {
        matches!(self, Verdict::Violated(..))
    }
}

/// Where a symbol entered the run: an argument, the sender, or the attached
/// value of the invocation at `path` (the chain of reentry indices from the
/// top-level invocation).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SymbolRole {
    Arg { path: Vec<usize>, index: usize },
    Sender { path: Vec<usize> },
    AttachedValue { path: Vec<usize> },
}

#[derive(Debug, Clone)]
pub struct TraceSymbol {
    pub decl: SymbolDecl,
    pub role: SymbolRole,
    pub witness: ModelValue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchKind {
    Require,
    If,
    DivisorSign,
    CallAmountSign,
    ValueSign,
    MapKeyPin,
}

#[derive(Debug, Clone)]
pub struct BranchRecord {
    pub kind: BranchKind,
    pub taken: bool,
    /// Index into `path_constraints`; absent for branches over constants.
    pub constraint_index: Option<usize>,
}

/// The symbolic side of one concolic execution.
#[derive(Debug, Clone)]
pub struct SymbolicTrace {
    pub function: String,
    pub invocation: Invocation,
    pub symbols: Vec<TraceSymbol>,
    pub path_constraints: Vec<ConstraintTerm>,
    pub branch_log: Vec<BranchRecord>,
    /// Symbolic form of "the postcondition holds in the post-state";
    /// present when the run completed.
    pub postcondition_sym: Option<ConstraintTerm>,
}

impl SymbolicTrace {
    pub fn decls(&self) -> Vec<SymbolDecl> {
        self.symbols.iter().map(|s| s.decl.clone()).collect()
    }

    pub fn witness_model(&self) -> Model {
        self.symbols.iter().enumerate().map(|(i, s)| (i, s.witness.clone())).collect()
    }

    /// The run's concrete inputs satisfy every recorded constraint.
    pub fn check_consistency(&self) -> bool {
        let model = self.witness_model();
        crate::solver::eval_conjunction(&self.path_constraints, &model) == Some(true)
    }
}

/// Build the initial state: the evaluation function's values, extended by
/// declared initializers and zeros for out-of-domain variables. Actor
/// balances start at zero; attacker capital is unconstrained anyway because
/// attached value is a symbolic input (the flash-loan reading).
pub fn initial_state(
    context: &Context,
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
) -> GlobalState {
    let mut valuation = BTreeMap::new();
    for decl in &contract.state_vars {
        let value = if let Some(v) = context.evaluation.valuation.get(&decl.name) {
            v.clone()
        } else if let Some(init) = &decl.init {
            Value::from_literal(init)
        } else if decl.ty == crate::frontend::VarType::MapAddrInt {
            let mut m = BTreeMap::new();
            for a in &snapshot.actors {
                m.insert(a.clone(), BigInt::zero());
            }
            Value::Map(m)
        } else {
            Value::zero_of(decl.ty)
        };
        valuation.insert(decl.name.clone(), value);
    }
    let actor_balances =
        snapshot.actors.iter().map(|a| (a.clone(), BigInt::zero())).collect();
    GlobalState { valuation, actor_balances, depth: 0 }
}

struct Node {
    state: GlobalState,
    parent: Option<(usize, Invocation)>,
    via: Option<String>,
    depth: u32,
}

fn reconstruct_vector(
    arena: &[Node],
    from: usize,
    last_inv: Invocation,
    violating: GlobalState,
) -> AttackVector {
    let mut states = Vec::new();
    let mut invocations = Vec::new();
    let mut cursor = Some(from);
    while let Some(idx) = cursor {
        states.push(arena[idx].state.clone());
        match &arena[idx].parent {
            Some((parent, inv)) => {
                invocations.push(inv.clone());
                cursor = Some(*parent);
            }
            None => cursor = None,
        }
    }
    states.reverse();
    invocations.reverse();
    invocations.push(last_inv);
    states.push(violating);
    let violating_index = states.len() - 1;
    AttackVector { states, invocations, violating_index }
}

/// Explore the transition system breadth-first. Successor functions are
/// tried in the relevance order of the function that produced the state;
/// new states enter the frontier only if their canonical hash is unseen.
/// The first postcondition violation is replay-validated and reported as an
/// attack vector; an emptied frontier below the diameter is a state-space
/// fixpoint and upgrades the answer to Verified.
pub fn explore(
    context: &Context,
    instrumented: &InstrumentedContract,
    snapshot: &BlockSnapshot,
    budget: &Budget,
    solver: &mut SolverHandle,
) -> Verdict {
    explore_with(context, instrumented, snapshot, budget, solver, &mut None)
}

/// As [`explore`], optionally keeping every recorded trace for inspection.
pub fn explore_with(
    context: &Context,
    instrumented: &InstrumentedContract,
    snapshot: &BlockSnapshot,
    budget: &Budget,
    solver: &mut SolverHandle,
    trace_sink: &mut Option<&mut Vec<SymbolicTrace>>,
) -> Verdict {
    let started = Instant::now();
    let contract = &instrumented.base;
    let env = ExecEnv {
        instrumented,
        attacker: snapshot.attacker.clone(),
        actors: snapshot.actors.clone(),
        reentry_depth: budget.reentry_depth,
    };
    let mut stats = Stats::default();
    let base_calls = solver.calls;

    let finish = |mut stats: Stats, solver: &SolverHandle, started: Instant| -> Stats {
        stats.solver_calls = solver.calls - base_calls;
        stats.elapsed_ms = started.elapsed().as_millis() as u64;
        stats
    };

    let s0 = initial_state(context, contract, snapshot);

    // Depth-0 check: a property without old-terms must already hold in the
    // initial state.
    if !context.property.has_old() {
        let holds = exec::eval_post_concrete(
            &instrumented.postcondition,
            &[],
            &s0,
            &snapshot.attacker,
        );
        if holds != Some(true) {
            let vector = AttackVector {
                states: vec![s0],
                invocations: Vec::new(),
                violating_index: 0,
            };
            stats.states = 1;
            assert!(
                replay(&vector, instrumented, snapshot, context) == Ok(true),
                "replay must confirm the initial-state violation"
            );
            return Verdict::Violated(vector, finish(stats, solver, started));
        }
    }

    let mut arena: Vec<Node> = vec![Node { state: s0, parent: None, via: None, depth: 0 }];
    let mut seen: HashMap<StateDigest, Vec<usize>> = HashMap::new();
    seen.entry(canonical_hash(&arena[0].state, contract, &snapshot.actors))
        .or_default()
        .push(0);
    let mut queue: VecDeque<usize> = VecDeque::from([0]);
    let mut diameter_pruned = false;
    stats.states = 1;

    while let Some(u) = queue.pop_front() {
        if started.elapsed() > budget.time_limit {
            return Verdict::Unknown(
                UnknownReason::TimeExhausted,
                finish(stats, solver, started),
            );
        }
        if arena[u].depth >= budget.diameter {
            diameter_pruned = true;
            continue;
        }
        let order: Vec<String> =
            context.relevance.order_after(arena[u].via.as_deref()).to_vec();

        for function in &order {
            let mut memo = SearchMemo::default();
            let mut falsifications = 0u32;
            let mut history: Vec<SymbolicTrace> = Vec::new();
            let mut executed: HashSet<Invocation> = HashSet::new();
            let mut pending: VecDeque<Invocation> = VecDeque::new();
            pending.extend(generate_inputs(
                &arena[u].state,
                function,
                context,
                &history,
                budget,
                solver,
                instrumented,
                &snapshot.attacker,
                &snapshot.actors,
                &mut memo,
            ));

            loop {
                while let Some(inv) = pending.pop_front() {
                    if !executed.insert(inv.clone()) {
                        continue;
                    }
                    if started.elapsed() > budget.time_limit {
                        return Verdict::Unknown(
                            UnknownReason::TimeExhausted,
                            finish(stats, solver, started),
                        );
                    }
                    let step = step_concolic(&arena[u].state, &inv, &env);
                    stats.transitions += 1;
                    debug_assert!(step.trace.check_consistency());

                    match step.outcome {
                        Outcome::PostconditionViolated => {
                            if let Some(sink) = trace_sink.as_deref_mut() {
                                sink.push(step.trace);
                            }
                            let vector =
                                reconstruct_vector(&arena, u, inv, step.post);
                            assert!(
                                replay(&vector, instrumented, snapshot, context) == Ok(true),
                                "reported vectors must replay"
                            );
                            return Verdict::Violated(
                                vector,
                                finish(stats, solver, started),
                            );
                        }
                        Outcome::Ok => {
                            // When the concrete post-state satisfies the
                            // postcondition, ask the solver whether some
                            // other input along this path falsifies it.
                            if let Some(post_sym) = step.trace.postcondition_sym.clone() {
                                if post_sym.has_symbols() && falsifications < budget.branch_flips
                                {
                                    falsifications += 1;
                                    let mut query = step.trace.path_constraints.clone();
                                    query.push(post_sym.negated());
                                    if let crate::solver::SolverResult::Sat(model) =
                                        solver.solve(&step.trace.decls(), &query)
                                    {
                                        let candidate =
                                            inputs::rebuild_invocation(&step.trace, &model);
                                        if !executed.contains(&candidate) {
                                            pending.push_front(candidate);
                                        }
                                    }
                                }
                            }
                            let digest =
                                canonical_hash(&step.post, contract, &snapshot.actors);
                            let bucket = seen.entry(digest).or_default();
                            let known = bucket
                                .iter()
                                .any(|i| arena[*i].state.same_contents(&step.post));
                            if !known {
                                arena.push(Node {
                                    state: step.post,
                                    parent: Some((u, inv.clone())),
                                    via: Some(function.clone()),
                                    depth: arena[u].depth + 1,
                                });
                                let id = arena.len() - 1;
                                seen.entry(digest).or_default().push(id);
                                queue.push_back(id);
                                stats.states += 1;
                            }
                            if let Some(sink) = trace_sink.as_deref_mut() {
                                sink.push(step.trace.clone());
                            }
                            history.push(step.trace);
                        }
                        Outcome::RequireFailed | Outcome::Trap => {
                            if let Some(sink) = trace_sink.as_deref_mut() {
                                sink.push(step.trace.clone());
                            }
                            history.push(step.trace);
                        }
                    }
                }

                if memo.flips_used >= budget.branch_flips {
                    break;
                }
                let batch = generate_inputs(
                    &arena[u].state,
                    function,
                    context,
                    &history,
                    budget,
                    solver,
                    instrumented,
                    &snapshot.attacker,
                    &snapshot.actors,
                    &mut memo,
                );
                let fresh: Vec<Invocation> =
                    batch.into_iter().filter(|inv| !executed.contains(inv)).collect();
                if fresh.is_empty() {
                    break;
                }
                pending.extend(fresh);
            }
        }
    }

    let stats = finish(stats, solver, started);
    if diameter_pruned {
        Verdict::Unknown(UnknownReason::DiameterExhausted, stats)
    } else if solver.unknowns > 0 {
        Verdict::Unknown(UnknownReason::SolverUnknown, stats)
    } else {
        Verdict::Verified(stats)
    }
}

/// Verdict for a contract with no external functions: the transition
/// relation is empty, so the initial state is the whole reachable space.
pub fn verify_empty_transition_system(
    context: &Context,
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
    instrumented: &InstrumentedContract,
) -> Verdict {
    let started = Instant::now();
    let s0 = initial_state(context, contract, snapshot);
    let mut stats = Stats { states: 1, ..Stats::default() };
    if !context.property.has_old() {
        let holds = exec::eval_post_concrete(
            &instrumented.postcondition,
            &[],
            &s0,
            &snapshot.attacker,
        );
        if holds != Some(true) {
            let vector =
                AttackVector { states: vec![s0], invocations: Vec::new(), violating_index: 0 };
            stats.elapsed_ms = started.elapsed().as_millis() as u64;
            return Verdict::Violated(vector, stats);
        }
    }
    stats.elapsed_ms = started.elapsed().as_millis() as u64;
    Verdict::Verified(stats)
}
