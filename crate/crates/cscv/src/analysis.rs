//! Read/write sets and state-variable dependency analysis.
//!
//! Maps are tracked at whole-variable granularity and view-function calls
//! are inlined transitively, so every set here is a pure syntactic fixpoint
//! over the validated AST.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use crate::frontend::{ContractAST, Expr, FnKind, LValue, Stmt};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("shared-variable count requires two distinct functions, got `{0}` twice")]
    SameFunction(String),
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
}

/// Per-function read and write sets over state variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AccessSets {
    pub reads: BTreeMap<String, BTreeSet<String>>,
    pub writes: BTreeMap<String, BTreeSet<String>>,
}

impl AccessSets {
    pub fn reads_of(&self, f: &str) -> &BTreeSet<String> {
        static EMPTY: std::sync::OnceLock<BTreeSet<String>> = std::sync::OnceLock::new();
        self.reads.get(f).unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    pub fn writes_of(&self, f: &str) -> &BTreeSet<String> {
        static EMPTY: std::sync::OnceLock<BTreeSet<String>> = std::sync::OnceLock::new();
        self.writes.get(f).unwrap_or_else(|| EMPTY.get_or_init(BTreeSet::new))
    }

    /// reads(f) ∪ writes(f).
    pub fn touched(&self, f: &str) -> BTreeSet<String> {
        self.reads_of(f).union(self.writes_of(f)).cloned().collect()
    }
}

/// Directed edges `v -> w`: the value of `v` after some function may depend
/// on `w`, through data flow or through a guard (`require`/`if`) controlling
/// an assignment to `v`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DependencyGraph {
    pub edges: BTreeSet<(String, String)>,
}

impl DependencyGraph {
    pub fn successors<'a>(&'a self, v: &'a str) -> impl Iterator<Item = &'a str> {
        self.edges.iter().filter(move |(a, _)| a == v).map(|(_, b)| b.as_str())
    }
}

/// State variables read by an expression, with view calls inlined.
fn expr_reads(e: &Expr, contract: &ContractAST, out: &mut BTreeSet<String>) {
    match e {
        Expr::Lit(_) | Expr::MsgSender | Expr::MsgValue => {}
        Expr::Ident(name) => {
            if contract.state_var(name).is_some() {
                out.insert(name.clone());
            }
        }
        Expr::MapIndex { map, key } => {
            out.insert(map.clone());
            expr_reads(key, contract, out);
        }
        Expr::ViewCall(name) => {
            // Validation guarantees the view exists and the call graph is
            // acyclic, so inlining terminates.
            if let Some(g) = contract.function(name) {
                for stmt in &g.body {
                    stmt_reads(stmt, contract, out);
                }
            }
        }
        Expr::Unary(_, a) => expr_reads(a, contract, out),
        Expr::Binary(_, a, b) => {
            expr_reads(a, contract, out);
            expr_reads(b, contract, out);
        }
    }
}

fn stmt_reads(stmt: &Stmt, contract: &ContractAST, out: &mut BTreeSet<String>) {
    match stmt {
        Stmt::Require(e) => expr_reads(e, contract, out),
        Stmt::Assign { target, value } => {
            if let LValue::MapEntry { key, .. } = target {
                expr_reads(key, contract, out);
            }
            expr_reads(value, contract, out);
        }
        Stmt::Call { target, amount } => {
            expr_reads(target, contract, out);
            expr_reads(amount, contract, out);
        }
        Stmt::If { cond, then_body, else_body } => {
            expr_reads(cond, contract, out);
            for s in then_body {
                stmt_reads(s, contract, out);
            }
            for s in else_body {
                stmt_reads(s, contract, out);
            }
        }
        Stmt::Return(Some(e)) => expr_reads(e, contract, out),
        Stmt::Return(None) => {}
    }
}

fn stmt_writes(stmt: &Stmt, out: &mut BTreeSet<String>) {
    match stmt {
        Stmt::Assign { target, .. } => {
            out.insert(target.var_name().to_string());
        }
        Stmt::If { then_body, else_body, .. } => {
            for s in then_body {
                stmt_writes(s, out);
            }
            for s in else_body {
                stmt_writes(s, out);
            }
        }
        _ => {}
    }
}

/// Compute read and write sets for every function of the contract.
pub fn access_sets(contract: &ContractAST) -> AccessSets {
    let mut reads = BTreeMap::new();
    let mut writes = BTreeMap::new();
    for f in &contract.functions {
        let mut r = BTreeSet::new();
        let mut w = BTreeSet::new();
        for stmt in &f.body {
            stmt_reads(stmt, contract, &mut r);
            stmt_writes(stmt, &mut w);
        }
        debug_assert!(f.kind != FnKind::View || w.is_empty());
        reads.insert(f.name.clone(), r);
        writes.insert(f.name.clone(), w);
    }
    AccessSets { reads, writes }
}

/// Build the union dependency graph over all functions.
pub fn dependency_graph(contract: &ContractAST) -> DependencyGraph {
    let mut graph = DependencyGraph::default();
    for f in &contract.functions {
        walk_deps(&f.body, contract, &mut BTreeSet::new(), &mut graph);
    }
    graph
}

/// Walk a block carrying the set of guard variables in scope. A `require`
/// guards every later statement (failure aborts the transition); an `if`
/// whose branch may return guards the remainder of the enclosing block too.
fn walk_deps(
    stmts: &[Stmt],
    contract: &ContractAST,
    guards: &mut BTreeSet<String>,
    graph: &mut DependencyGraph,
) {
    let mut local_guards = guards.clone();
    for stmt in stmts {
        match stmt {
            Stmt::Require(cond) => {
                expr_reads(cond, contract, &mut local_guards);
            }
            Stmt::Assign { target, value } => {
                let v = target.var_name().to_string();
                let mut deps = BTreeSet::new();
                if let LValue::MapEntry { key, .. } = target {
                    expr_reads(key, contract, &mut deps);
                }
                expr_reads(value, contract, &mut deps);
                deps.extend(local_guards.iter().cloned());
                for w in deps {
                    if w != v {
                        graph.edges.insert((v.clone(), w));
                    }
                }
            }
            Stmt::Call { .. } => {}
            Stmt::If { cond, then_body, else_body } => {
                let mut inner = local_guards.clone();
                expr_reads(cond, contract, &mut inner);
                walk_deps(then_body, contract, &mut inner.clone(), graph);
                walk_deps(else_body, contract, &mut inner.clone(), graph);
                if block_may_return(then_body) || block_may_return(else_body) {
                    // Skipping the rest of the block depends on the branch
                    // condition, so it guards everything after the `if`.
                    expr_reads(cond, contract, &mut local_guards);
                }
            }
            Stmt::Return(_) => {}
        }
    }
}

fn block_may_return(stmts: &[Stmt]) -> bool {
    stmts.iter().any(|s| match s {
        Stmt::Return(_) => true,
        Stmt::If { then_body, else_body, .. } => {
            block_may_return(then_body) || block_may_return(else_body)
        }
        _ => false,
    })
}

/// Least fixpoint of `seed_vars` under the dependency edges: whenever `v` is
/// in the closure and `v -> w` is an edge, `w` joins the closure.
pub fn dependency_closure(
    seed_vars: &BTreeSet<String>,
    contract: &ContractAST,
) -> BTreeSet<String> {
    let graph = dependency_graph(contract);
    let mut closure = seed_vars.clone();
    let mut work: Vec<String> = seed_vars.iter().cloned().collect();
    while let Some(v) = work.pop() {
        for w in graph.successors(&v) {
            if closure.insert(w.to_string()) {
                work.push(w.to_string());
            }
        }
    }
    closure
}

/// |(reads(f) ∪ writes(f)) ∩ (reads(g) ∪ writes(g))|.
pub fn shared_variable_count(
    f: &str,
    g: &str,
    sets: &AccessSets,
) -> Result<usize, AnalysisError> {
    if f == g {
        return Err(AnalysisError::SameFunction(f.to_string()));
    }
    if !sets.reads.contains_key(f) {
        return Err(AnalysisError::UnknownFunction(f.to_string()));
    }
    if !sets.reads.contains_key(g) {
        return Err(AnalysisError::UnknownFunction(g.to_string()));
    }
    Ok(sets.touched(f).intersection(&sets.touched(g)).count())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_contract;

    const VAULT: &str = r#"
        contract Vault {
            state balances: map<address, int>;
            state total: int;

            external fn deposit(amount: int) {
                require(amount > 0);
                balances[msg.sender] = balances[msg.sender] + amount;
                total = total + amount;
            }

            external fn withdraw(amount: int) {
                require(balances[msg.sender] >= amount);
                call msg.sender amount;
                balances[msg.sender] = balances[msg.sender] - amount;
                total = total - amount;
            }

            view fn getTotal() -> int {
                return total;
            }
        }
    "#;

    fn names(set: &BTreeSet<String>) -> Vec<&str> {
        set.iter().map(String::as_str).collect()
    }

    #[test]
    fn vault_deposit_access_sets() {
        let c = parse_contract(VAULT).unwrap();
        let sets = access_sets(&c);
        assert_eq!(names(sets.reads_of("deposit")), vec!["balances", "total"]);
        assert_eq!(names(sets.writes_of("deposit")), vec!["balances", "total"]);
    }

    #[test]
    fn view_reads_only() {
        let c = parse_contract(VAULT).unwrap();
        let sets = access_sets(&c);
        assert_eq!(names(sets.reads_of("getTotal")), vec!["total"]);
        assert!(sets.writes_of("getTotal").is_empty());
    }

    #[test]
    fn empty_body_has_empty_sets() {
        let c = parse_contract("contract E { external fn nop() { } }").unwrap();
        let sets = access_sets(&c);
        assert!(sets.reads_of("nop").is_empty());
        assert!(sets.writes_of("nop").is_empty());
    }

    #[test]
    fn view_calls_are_inlined() {
        let c = parse_contract(
            "contract I { state a: int; state b: int;
               view fn inner() -> int { return a; }
               view fn outer() -> int { return inner() + b; }
               external fn f(x: int) { require(outer() > x); b = x; } }",
        )
        .unwrap();
        let sets = access_sets(&c);
        assert_eq!(names(sets.reads_of("f")), vec!["a", "b"]);
        assert_eq!(names(sets.writes_of("f")), vec!["b"]);
    }

    #[test]
    fn closure_includes_control_dependence() {
        let c = parse_contract(VAULT).unwrap();
        let seed: BTreeSet<String> = ["total".to_string()].into();
        let closure = dependency_closure(&seed, &c);
        // withdraw's assignment to total is guarded by a require over
        // balances, so balances joins the closure.
        assert_eq!(names(&closure), vec!["balances", "total"]);
    }

    #[test]
    fn closure_of_empty_seed_is_empty() {
        let c = parse_contract(VAULT).unwrap();
        assert!(dependency_closure(&BTreeSet::new(), &c).is_empty());
    }

    #[test]
    fn closure_of_everything_is_everything() {
        let c = parse_contract(VAULT).unwrap();
        let all: BTreeSet<String> = c.state_vars.iter().map(|v| v.name.clone()).collect();
        assert_eq!(dependency_closure(&all, &c), all);
    }

    #[test]
    fn early_return_guards_later_assignments() {
        let c = parse_contract(
            "contract G { state gate: bool; state x: int;
               external fn f(a: int) { if (gate) { return; } x = a; } }",
        )
        .unwrap();
        let graph = dependency_graph(&c);
        assert!(graph.edges.contains(&("x".to_string(), "gate".to_string())));
    }

    #[test]
    fn shared_count_on_vault() {
        let c = parse_contract(VAULT).unwrap();
        let sets = access_sets(&c);
        assert_eq!(shared_variable_count("deposit", "withdraw", &sets).unwrap(), 2);
        assert_eq!(shared_variable_count("withdraw", "deposit", &sets).unwrap(), 2);
    }

    #[test]
    fn disjoint_functions_share_nothing() {
        let c = parse_contract(
            "contract D { state a: int; state b: int;
               external fn f(x: int) { a = x; }
               external fn g(x: int) { b = x; } }",
        )
        .unwrap();
        let sets = access_sets(&c);
        assert_eq!(shared_variable_count("f", "g", &sets).unwrap(), 0);
    }

    #[test]
    fn same_function_is_an_error() {
        let c = parse_contract(VAULT).unwrap();
        let sets = access_sets(&c);
        assert!(matches!(
            shared_variable_count("deposit", "deposit", &sets),
            Err(AnalysisError::SameFunction(_))
        ));
    }
}
