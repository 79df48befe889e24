//! Candidate invocation generation: seed values first, then generational
//! branch flips over recorded traces.

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeSet, HashSet};
use std::hash::{Hash, Hasher};

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::exec::body_reads_value;
use super::{Budget, GlobalState, Invocation, SymbolRole, SymbolicTrace};
use crate::analysis::access_sets;
use crate::context::Context;
use crate::frontend::{
    ContractAST, Expr, FunctionDecl, Literal, PropExpr, Stmt, VarType,
};
use crate::optimization::{heuristic_arg_seeds, heuristic_reentry_targets, InstrumentedContract};
use crate::solver::{ModelValue, SolverHandle, SolverResult};
use crate::value::Value;

/// Hard cap on phase-one candidates per (state, function) pair; parameter
/// seed products stay tiny on realistic signatures, this is a backstop.
const MAX_SEED_CANDIDATES: usize = 256;

/// Per-(state, function) search bookkeeping across `generate_inputs` calls.
#[derive(Debug, Default)]
pub struct SearchMemo {
    attempted_flips: HashSet<u64>,
    pub flips_used: u32,
}

/// Integer literals in the guard conditions (`require`/`if`) of a function,
/// including transitively called views.
fn guard_literals(f: &FunctionDecl, contract: &ContractAST, out: &mut Vec<BigInt>) {
    fn walk_stmts(stmts: &[Stmt], contract: &ContractAST, out: &mut Vec<BigInt>) {
        for s in stmts {
            match s {
                Stmt::Require(cond) => collect_expr(cond, contract, out),
                Stmt::If { cond, then_body, else_body } => {
                    collect_expr(cond, contract, out);
                    walk_stmts(then_body, contract, out);
                    walk_stmts(else_body, contract, out);
                }
                _ => {}
            }
        }
    }
    fn collect_expr(e: &Expr, contract: &ContractAST, out: &mut Vec<BigInt>) {
        match e {
            Expr::Lit(Literal::Int(v)) => out.push(v.clone()),
            Expr::MapIndex { key, .. } => collect_expr(key, contract, out),
            Expr::ViewCall(name) => {
                if let Some(g) = contract.function(name) {
                    walk_stmts(&g.body, contract, out);
                    for s in &g.body {
                        if let Stmt::Return(Some(e)) = s {
                            collect_expr(e, contract, out);
                        }
                    }
                }
            }
            Expr::Unary(_, a) => collect_expr(a, contract, out),
            Expr::Binary(_, a, b) => {
                collect_expr(a, contract, out);
                collect_expr(b, contract, out);
            }
            _ => {}
        }
    }
    walk_stmts(&f.body, contract, out);
}

/// State variables appearing inside comparisons in the function's guards or
/// in the property.
fn compared_state_vars(
    f: &FunctionDecl,
    contract: &ContractAST,
    property: &PropExpr,
) -> BTreeSet<String> {
    fn names_in(e: &Expr, contract: &ContractAST, out: &mut BTreeSet<String>) {
        match e {
            Expr::Ident(n) => {
                if contract.state_var(n).is_some() {
                    out.insert(n.clone());
                }
            }
            Expr::MapIndex { map, key } => {
                out.insert(map.clone());
                names_in(key, contract, out);
            }
            Expr::ViewCall(name) => {
                if let Some(g) = contract.function(name) {
                    for s in &g.body {
                        stmt_names(s, contract, out);
                    }
                }
            }
            Expr::Unary(_, a) => names_in(a, contract, out),
            Expr::Binary(_, a, b) => {
                names_in(a, contract, out);
                names_in(b, contract, out);
            }
            _ => {}
        }
    }
    fn stmt_names(s: &Stmt, contract: &ContractAST, out: &mut BTreeSet<String>) {
        if let Stmt::Return(Some(e)) = s {
            names_in(e, contract, out);
        }
    }
    fn walk_expr(e: &Expr, contract: &ContractAST, out: &mut BTreeSet<String>) {
        if let Expr::Binary(op, a, b) = e {
            if op.is_comparison() {
                names_in(a, contract, out);
                names_in(b, contract, out);
            } else {
                walk_expr(a, contract, out);
                walk_expr(b, contract, out);
            }
        } else if let Expr::Unary(_, a) = e {
            walk_expr(a, contract, out);
        }
    }
    fn walk_stmts(stmts: &[Stmt], contract: &ContractAST, out: &mut BTreeSet<String>) {
        for s in stmts {
            match s {
                Stmt::Require(cond) => walk_expr(cond, contract, out),
                Stmt::If { cond, then_body, else_body } => {
                    walk_expr(cond, contract, out);
                    walk_stmts(then_body, contract, out);
                    walk_stmts(else_body, contract, out);
                }
                _ => {}
            }
        }
    }
    fn walk_prop(e: &PropExpr, out: &mut BTreeSet<String>) {
        match e {
            PropExpr::Binary(op, a, b) if op.is_comparison() => {
                collect_prop_names(a, out);
                collect_prop_names(b, out);
            }
            PropExpr::Binary(_, a, b) | PropExpr::Implies(a, b) => {
                walk_prop(a, out);
                walk_prop(b, out);
            }
            PropExpr::Unary(_, a) => walk_prop(a, out),
            _ => {}
        }
    }
    fn collect_prop_names(e: &PropExpr, out: &mut BTreeSet<String>) {
        match e {
            PropExpr::State(lv) | PropExpr::Old(lv) => {
                out.insert(lv.var_name().to_string());
            }
            PropExpr::Unary(_, a) => collect_prop_names(a, out),
            PropExpr::Binary(_, a, b) | PropExpr::Implies(a, b) => {
                collect_prop_names(a, out);
                collect_prop_names(b, out);
            }
            PropExpr::Lit(_) => {}
        }
    }

    let mut out = BTreeSet::new();
    walk_stmts(&f.body, contract, &mut out);
    walk_prop(property, &mut out);
    out
}

fn prop_int_literals(e: &PropExpr, out: &mut Vec<BigInt>) {
    match e {
        PropExpr::Lit(Literal::Int(v)) => out.push(v.clone()),
        PropExpr::Unary(_, a) => prop_int_literals(a, out),
        PropExpr::Binary(_, a, b) | PropExpr::Implies(a, b) => {
            prop_int_literals(a, out);
            prop_int_literals(b, out);
        }
        _ => {}
    }
}

/// The deterministic integer seed pool for one function at one state:
/// heuristic seeds first, then {0, 1}, literals from the property and the
/// function's guards, and current values of compared state variables.
fn int_seed_pool(
    state: &GlobalState,
    f: &FunctionDecl,
    context: &Context,
    contract: &ContractAST,
) -> Vec<BigInt> {
    let sets = access_sets(contract);
    let heur = heuristic_arg_seeds(&context.heuristics, &f.name, sets.writes_of(&f.name));

    let mut pool: Vec<BigInt> = vec![BigInt::zero(), BigInt::one()];
    prop_int_literals(&context.property.pred, &mut pool);
    guard_literals(f, contract, &mut pool);
    for var in compared_state_vars(f, contract, &context.property.pred) {
        match state.valuation.get(&var) {
            Some(Value::Int(v)) => pool.push(v.clone()),
            Some(Value::Map(m)) => {
                for v in m.values() {
                    pool.push(v.clone());
                }
            }
            _ => {}
        }
    }
    pool.sort();
    pool.dedup();

    let mut out: Vec<BigInt> = Vec::new();
    for v in heur {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    for v in pool {
        if !out.contains(&v) {
            out.push(v);
        }
    }
    out
}

fn seed_lists_for_params(
    f: &FunctionDecl,
    ints: &[BigInt],
    actors: &[crate::frontend::Address],
    attacker: &crate::frontend::Address,
) -> Vec<Vec<Value>> {
    let mut addr_seeds: Vec<Value> = vec![Value::Addr(attacker.clone())];
    for a in actors {
        if a != attacker {
            addr_seeds.push(Value::Addr(a.clone()));
        }
    }
    f.params
        .iter()
        .map(|p| match p.ty {
            VarType::Int => ints.iter().map(|v| Value::Int(v.clone())).collect(),
            VarType::Bool => vec![Value::Bool(false), Value::Bool(true)],
            VarType::Address => addr_seeds.clone(),
            VarType::MapAddrInt => vec![],
        })
        .collect()
}

fn cartesian(lists: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut out: Vec<Vec<Value>> = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::new();
        for prefix in &out {
            for item in list {
                let mut row = prefix.clone();
                row.push(item.clone());
                next.push(row);
            }
            if next.len() > MAX_SEED_CANDIDATES {
                break;
            }
        }
        out = next;
    }
    out.truncate(MAX_SEED_CANDIDATES);
    out
}

fn function_has_call(f: &FunctionDecl) -> bool {
    fn in_stmts(stmts: &[Stmt]) -> bool {
        stmts.iter().any(|s| match s {
            Stmt::Call { .. } => true,
            Stmt::If { then_body, else_body, .. } => in_stmts(then_body) || in_stmts(else_body),
            _ => false,
        })
    }
    in_stmts(&f.body)
}

fn seed_candidates(
    state: &GlobalState,
    function: &str,
    context: &Context,
    budget: &Budget,
    instrumented: &InstrumentedContract,
    attacker: &crate::frontend::Address,
    actors: &[crate::frontend::Address],
) -> Vec<Invocation> {
    let contract = &instrumented.base;
    let Some(f) = contract.function(function) else { return Vec::new() };
    let ints = int_seed_pool(state, f, context, contract);
    let arg_lists = seed_lists_for_params(f, &ints, actors, attacker);
    let value_seeds: Vec<BigInt> = if body_reads_value(f, contract) {
        ints.clone()
    } else {
        vec![BigInt::zero()]
    };

    let mut out = Vec::new();
    for args in cartesian(&arg_lists) {
        for value in &value_seeds {
            let base = Invocation {
                function: function.to_string(),
                sender: attacker.clone(),
                value: value.clone(),
                args: args.clone(),
                reentry: Vec::new(),
            };
            out.push(base.clone());
            // Reentry variants: functions that call out can be reentered by
            // the attacker. Heuristic targets first, then the classic
            // same-function reentry.
            if budget.reentry_depth >= 1 && function_has_call(f) {
                let mut targets = heuristic_reentry_targets(&context.heuristics, function);
                if !targets.contains(&f.name) {
                    targets.push(f.name.clone());
                }
                for target in targets {
                    let inner = if target == *function {
                        Invocation { reentry: Vec::new(), ..base.clone() }
                    } else {
                        let Some(g) = contract.function(&target) else { continue };
                        let g_ints = int_seed_pool(state, g, context, contract);
                        let g_args: Vec<Value> = g
                            .params
                            .iter()
                            .map(|p| match p.ty {
                                VarType::Int => Value::Int(
                                    g_ints.first().cloned().unwrap_or_else(BigInt::zero),
                                ),
                                VarType::Bool => Value::Bool(false),
                                VarType::Address => Value::Addr(attacker.clone()),
                                VarType::MapAddrInt => Value::Int(BigInt::zero()),
                            })
                            .collect();
                        Invocation {
                            function: target.clone(),
                            sender: attacker.clone(),
                            value: BigInt::zero(),
                            args: g_args,
                            reentry: Vec::new(),
                        }
                    };
                    let mut with_reentry = base.clone();
                    with_reentry.reentry = vec![inner];
                    out.push(with_reentry);
                }
            }
            if out.len() >= MAX_SEED_CANDIDATES {
                return out;
            }
        }
    }
    out
}

/// Rewrite an invocation with values taken from a solver model, navigating
/// symbol roles into the reentry chain. Symbols absent from the model keep
/// their witness values.
pub fn rebuild_invocation(trace: &SymbolicTrace, model: &crate::solver::Model) -> Invocation {
    let mut inv = trace.invocation.clone();
    for (id, sym) in trace.symbols.iter().enumerate() {
        let Some(value) = model.get(&id) else { continue };
        let target = locate(&mut inv, match &sym.role {
            SymbolRole::Arg { path, .. }
            | SymbolRole::Sender { path }
            | SymbolRole::AttachedValue { path } => path,
        });
        let Some(target) = target else { continue };
        match (&sym.role, value) {
            (SymbolRole::Sender { .. }, ModelValue::Addr(a)) => target.sender = a.clone(),
            (SymbolRole::AttachedValue { .. }, ModelValue::Int(v)) => target.value = v.clone(),
            (SymbolRole::Arg { index, .. }, mv) => {
                if let Some(slot) = target.args.get_mut(*index) {
                    *slot = match (&slot, mv) {
                        (Value::Int(_), ModelValue::Int(v)) => Value::Int(v.clone()),
                        (Value::Bool(_), ModelValue::Int(v)) => Value::Bool(!v.is_zero()),
                        (Value::Addr(_), ModelValue::Addr(a)) => Value::Addr(a.clone()),
                        _ => continue,
                    };
                }
            }
            _ => {}
        }
    }
    inv
}

fn locate<'a>(inv: &'a mut Invocation, path: &[usize]) -> Option<&'a mut Invocation> {
    let mut cursor = inv;
    for idx in path {
        cursor = cursor.reentry.get_mut(*idx)?;
    }
    Some(cursor)
}

fn flip_signature(trace_constraints: &[crate::solver::ConstraintTerm], index: usize) -> u64 {
    let mut hasher = DefaultHasher::new();
    for c in &trace_constraints[..index] {
        c.hash(&mut hasher);
    }
    trace_constraints[index].negated().hash(&mut hasher);
    hasher.finish()
}

/// Generate candidate invocations of `function` at `state`.
///
/// With no history this returns the seed candidates: heuristic argument
/// seeds first, then defaults drawn from {0, 1}, property and guard
/// literals, and current values of compared state variables. With history
/// it performs generational search: negate the last unflipped branch
/// constraint of each trace, solve the prefix conjunction, and turn
/// satisfiable models into new invocations, up to the flip budget.
#[allow(clippy::too_many_arguments)]
pub fn generate_inputs(
    state: &GlobalState,
    function: &str,
    context: &Context,
    trace_history: &[SymbolicTrace],
    budget: &Budget,
    solver: &mut SolverHandle,
    instrumented: &InstrumentedContract,
    attacker: &crate::frontend::Address,
    actors: &[crate::frontend::Address],
    memo: &mut SearchMemo,
) -> Vec<Invocation> {
    if trace_history.is_empty() {
        return seed_candidates(state, function, context, budget, instrumented, attacker, actors);
    }
    let mut out = Vec::new();
    for trace in trace_history {
        for index in (0..trace.path_constraints.len()).rev() {
            if memo.flips_used >= budget.branch_flips {
                return out;
            }
            let signature = flip_signature(&trace.path_constraints, index);
            if !memo.attempted_flips.insert(signature) {
                continue;
            }
            memo.flips_used += 1;
            let mut query: Vec<crate::solver::ConstraintTerm> =
                trace.path_constraints[..index].to_vec();
            query.push(trace.path_constraints[index].negated());
            if let SolverResult::Sat(model) = solver.solve(&trace.decls(), &query) {
                out.push(rebuild_invocation(trace, &model));
            }
        }
    }
    out
}
