//! Brute-force reference checker: exhaustive enumeration of bounded
//! invocation sequences under an independently written interpreter, with
//! the property judged by the trace monitor.
//!
//! This module is the ground truth the engine is measured against in tests.
//! It must stay free of the engine's execution, hashing, and search code.

use std::collections::{BTreeMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use crate::engine::{GlobalState, Invocation};
use crate::frontend::{
    Address, BinOp, BlockSnapshot, ContractAST, Expr, FnKind, FunctionDecl, LValue, Literal,
    Stmt, TemporalProperty, UnOp, VarType,
};
use crate::monitor;
use crate::value::Value;

#[derive(Debug, Clone)]
pub struct OracleBounds {
    pub depth: u32,
    pub arg_lo: i64,
    pub arg_hi: i64,
    pub reentry_depth: u32,
}

impl Default for OracleBounds {
    fn default() -> Self {
        OracleBounds { depth: 3, arg_lo: 0, arg_hi: 8, reentry_depth: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleFinding {
    pub depth: u32,
    pub sequence: Vec<Invocation>,
}

#[derive(Debug, Clone)]
pub struct OracleReport {
    pub violation: Option<OracleFinding>,
    pub states_explored: usize,
    pub transitions_executed: usize,
}

// ---------------------------------------------------------------------------
// Independent interpreter
// ---------------------------------------------------------------------------

enum Halt {
    Abort,
}

struct Interp<'a> {
    contract: &'a ContractAST,
    attacker: &'a Address,
    reentry_cap: u32,
    modulus: Option<BigInt>,
}

struct Scope<'a> {
    locals: BTreeMap<&'a str, Value>,
    sender: Address,
    value: BigInt,
    queued: VecDeque<Invocation>,
    level: u32,
}

/// Floor division via truncation plus correction, deliberately a different
/// route than the engine's arithmetic.
fn odiv(a: &BigInt, b: &BigInt) -> BigInt {
    let q = a / b;
    let r = a - &q * b;
    if !r.is_zero() && (r.is_negative() != b.is_negative()) {
        q - 1
    } else {
        q
    }
}

impl<'a> Interp<'a> {
    fn reduce(&self, v: BigInt) -> BigInt {
        match &self.modulus {
            Some(n) => ((v % n) + n) % n,
            None => v,
        }
    }

    fn run(
        &self,
        state: &GlobalState,
        inv: &Invocation,
        level: u32,
    ) -> Result<GlobalState, Halt> {
        let function = self.contract.function(&inv.function).ok_or(Halt::Abort)?;
        if function.kind != FnKind::External || function.params.len() != inv.args.len() {
            return Err(Halt::Abort);
        }
        if inv.value.is_negative() {
            return Err(Halt::Abort);
        }
        let mut next = state.clone();
        *next.actor_balances.entry(inv.sender.clone()).or_default() -= &inv.value;
        let mut scope = Scope {
            locals: function
                .params
                .iter()
                .zip(&inv.args)
                .map(|(p, a)| (p.name.as_str(), a.clone()))
                .collect(),
            sender: inv.sender.clone(),
            value: inv.value.clone(),
            queued: inv.reentry.iter().cloned().collect(),
            level,
        };
        self.block(&function.body, &mut scope, &mut next)?;
        Ok(next)
    }

    fn block(
        &self,
        stmts: &'a [Stmt],
        scope: &mut Scope<'a>,
        state: &mut GlobalState,
    ) -> Result<Option<Value>, Halt> {
        for stmt in stmts {
            match stmt {
                Stmt::Require(cond) => {
                    if self.expr(cond, scope, state)? != Value::Bool(true) {
                        return Err(Halt::Abort);
                    }
                }
                Stmt::Assign { target, value } => {
                    let v = self.expr(value, scope, state)?;
                    match target {
                        LValue::Var(name) => {
                            state.valuation.insert(name.clone(), v);
                        }
                        LValue::MapEntry { map, key } => {
                            let Value::Addr(k) = self.expr(key, scope, state)? else {
                                return Err(Halt::Abort);
                            };
                            let Value::Int(n) = v else { return Err(Halt::Abort) };
                            if let Some(Value::Map(m)) = state.valuation.get_mut(map) {
                                m.insert(k, n);
                            } else {
                                return Err(Halt::Abort);
                            }
                        }
                    }
                }
                Stmt::Call { target, amount } => {
                    let Value::Addr(to) = self.expr(target, scope, state)? else {
                        return Err(Halt::Abort);
                    };
                    let Value::Int(amt) = self.expr(amount, scope, state)? else {
                        return Err(Halt::Abort);
                    };
                    if amt.is_negative() {
                        return Err(Halt::Abort);
                    }
                    *state.actor_balances.entry(to.clone()).or_default() += &amt;
                    if to == *self.attacker && scope.level < self.reentry_cap {
                        if let Some(inner) = scope.queued.pop_front() {
                            // Contained: a failing reentrant call leaves the
                            // outer execution running on the old state.
                            if let Ok(after) = self.run(state, &inner, scope.level + 1) {
                                *state = after;
                            }
                        }
                    }
                }
                Stmt::If { cond, then_body, else_body } => {
                    let Value::Bool(b) = self.expr(cond, scope, state)? else {
                        return Err(Halt::Abort);
                    };
                    let chosen = if b { then_body } else { else_body };
                    if let Some(v) = self.block(chosen, scope, state)? {
                        return Ok(Some(v));
                    }
                }
                Stmt::Return(None) => return Ok(Some(Value::Bool(true))),
                Stmt::Return(Some(e)) => return Ok(Some(self.expr(e, scope, state)?)),
            }
        }
        Ok(None)
    }

    fn expr(
        &self,
        e: &Expr,
        scope: &mut Scope<'a>,
        state: &mut GlobalState,
    ) -> Result<Value, Halt> {
        match e {
            Expr::Lit(Literal::Int(v)) => Ok(Value::Int(v.clone())),
            Expr::Lit(Literal::Bool(b)) => Ok(Value::Bool(*b)),
            Expr::Lit(Literal::Addr(a)) => Ok(Value::Addr(a.clone())),
            Expr::Ident(name) => {
                if let Some(v) = scope.locals.get(name.as_str()) {
                    return Ok(v.clone());
                }
                state.valuation.get(name).cloned().ok_or(Halt::Abort)
            }
            Expr::MapIndex { map, key } => {
                let Value::Addr(k) = self.expr(key, scope, state)? else {
                    return Err(Halt::Abort);
                };
                match state.valuation.get(map) {
                    Some(m @ Value::Map(_)) => Ok(Value::Int(m.map_get(&k))),
                    _ => Err(Halt::Abort),
                }
            }
            Expr::MsgSender => Ok(Value::Addr(scope.sender.clone())),
            Expr::MsgValue => Ok(Value::Int(scope.value.clone())),
            Expr::ViewCall(name) => {
                let view = self.contract.function(name).ok_or(Halt::Abort)?;
                let mut inner = Scope {
                    locals: BTreeMap::new(),
                    sender: scope.sender.clone(),
                    value: scope.value.clone(),
                    queued: VecDeque::new(),
                    level: scope.level,
                };
                match self.block(&view.body, &mut inner, state)? {
                    Some(v) => Ok(v),
                    None => Err(Halt::Abort),
                }
            }
            Expr::Unary(UnOp::Neg, a) => match self.expr(a, scope, state)? {
                Value::Int(v) => Ok(Value::Int(self.reduce(-v))),
                _ => Err(Halt::Abort),
            },
            Expr::Unary(UnOp::Not, a) => match self.expr(a, scope, state)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                _ => Err(Halt::Abort),
            },
            Expr::Binary(op, a, b) => {
                // Short-circuit forms first.
                if *op == BinOp::And {
                    return match self.expr(a, scope, state)? {
                        Value::Bool(false) => Ok(Value::Bool(false)),
                        Value::Bool(true) => self.expr(b, scope, state),
                        _ => Err(Halt::Abort),
                    };
                }
                if *op == BinOp::Or {
                    return match self.expr(a, scope, state)? {
                        Value::Bool(true) => Ok(Value::Bool(true)),
                        Value::Bool(false) => self.expr(b, scope, state),
                        _ => Err(Halt::Abort),
                    };
                }
                let x = self.expr(a, scope, state)?;
                let y = self.expr(b, scope, state)?;
                match (op, x, y) {
                    (BinOp::Add, Value::Int(x), Value::Int(y)) => {
                        Ok(Value::Int(self.reduce(x + y)))
                    }
                    (BinOp::Sub, Value::Int(x), Value::Int(y)) => {
                        Ok(Value::Int(self.reduce(x - y)))
                    }
                    (BinOp::Mul, Value::Int(x), Value::Int(y)) => {
                        Ok(Value::Int(self.reduce(x * y)))
                    }
                    (BinOp::Div, Value::Int(x), Value::Int(y)) => {
                        if y.is_zero() {
                            Err(Halt::Abort)
                        } else {
                            Ok(Value::Int(self.reduce(odiv(&x, &y))))
                        }
                    }
                    (BinOp::Eq, x, y) => Ok(Value::Bool(x == y)),
                    (BinOp::Ne, x, y) => Ok(Value::Bool(x != y)),
                    (BinOp::Lt, Value::Int(x), Value::Int(y)) => Ok(Value::Bool(x < y)),
                    (BinOp::Le, Value::Int(x), Value::Int(y)) => Ok(Value::Bool(x <= y)),
                    (BinOp::Gt, Value::Int(x), Value::Int(y)) => Ok(Value::Bool(x > y)),
                    (BinOp::Ge, Value::Int(x), Value::Int(y)) => Ok(Value::Bool(x >= y)),
                    _ => Err(Halt::Abort),
                }
            }
        }
    }
}

/// Execute one invocation; `None` when it aborts (failed require or trap).
pub fn interpret(
    contract: &ContractAST,
    state: &GlobalState,
    inv: &Invocation,
    attacker: &Address,
    reentry_cap: u32,
) -> Option<GlobalState> {
    let interp = Interp {
        contract,
        attacker,
        reentry_cap,
        modulus: contract.wrap256.then(|| BigInt::one() << 256u32),
    };
    interp.run(state, inv, 0).ok().map(|mut s| {
        s.depth = state.depth + 1;
        s
    })
}

// ---------------------------------------------------------------------------
// Exhaustive bounded search
// ---------------------------------------------------------------------------

fn normalize_key(state: &GlobalState) -> String {
    let mut out = String::new();
    for (name, value) in &state.valuation {
        out.push_str(name);
        out.push('=');
        match value {
            Value::Map(m) => {
                out.push('{');
                for (k, v) in m {
                    if v.is_zero() {
                        continue;
                    }
                    out.push_str(k.as_str());
                    out.push(':');
                    out.push_str(&v.to_string());
                    out.push(',');
                }
                out.push('}');
            }
            other => out.push_str(&other.to_string()),
        }
        out.push(';');
    }
    out.push('#');
    for (k, v) in &state.actor_balances {
        if v.is_zero() {
            continue;
        }
        out.push_str(k.as_str());
        out.push(':');
        out.push_str(&v.to_string());
        out.push(',');
    }
    out
}

fn arg_grid(ty: VarType, bounds: &OracleBounds, actors: &[Address]) -> Vec<Value> {
    match ty {
        VarType::Int => {
            (bounds.arg_lo..=bounds.arg_hi).map(|v| Value::Int(BigInt::from(v))).collect()
        }
        VarType::Bool => vec![Value::Bool(false), Value::Bool(true)],
        VarType::Address => actors.iter().map(|a| Value::Addr(a.clone())).collect(),
        VarType::MapAddrInt => vec![],
    }
}

fn product(lists: &[Vec<Value>]) -> Vec<Vec<Value>> {
    let mut rows = vec![Vec::new()];
    for list in lists {
        let mut next = Vec::with_capacity(rows.len() * list.len());
        for row in &rows {
            for item in list {
                let mut r = row.clone();
                r.push(item.clone());
                next.push(r);
            }
        }
        rows = next;
    }
    rows
}

fn reads_msg_value(f: &FunctionDecl, contract: &ContractAST) -> bool {
    fn expr_has(e: &Expr, c: &ContractAST) -> bool {
        match e {
            Expr::MsgValue => true,
            Expr::MapIndex { key, .. } => expr_has(key, c),
            Expr::ViewCall(name) => c
                .function(name)
                .map(|g| g.body.iter().any(|s| stmt_has(s, c)))
                .unwrap_or(false),
            Expr::Unary(_, a) => expr_has(a, c),
            Expr::Binary(_, a, b) => expr_has(a, c) || expr_has(b, c),
            _ => false,
        }
    }
    fn stmt_has(s: &Stmt, c: &ContractAST) -> bool {
        match s {
            Stmt::Require(e) => expr_has(e, c),
            Stmt::Assign { target, value } => {
                matches!(target, LValue::MapEntry { key, .. } if expr_has(key, c))
                    || expr_has(value, c)
            }
            Stmt::Call { target, amount } => expr_has(target, c) || expr_has(amount, c),
            Stmt::If { cond, then_body, else_body } => {
                expr_has(cond, c)
                    || then_body.iter().any(|s| stmt_has(s, c))
                    || else_body.iter().any(|s| stmt_has(s, c))
            }
            Stmt::Return(Some(e)) => expr_has(e, c),
            Stmt::Return(None) => false,
        }
    }
    f.body.iter().any(|s| stmt_has(s, contract))
}

fn has_call_stmt(f: &FunctionDecl) -> bool {
    fn walk(stmts: &[Stmt]) -> bool {
        stmts.iter().any(|s| match s {
            Stmt::Call { .. } => true,
            Stmt::If { then_body, else_body, .. } => walk(then_body) || walk(else_body),
            _ => false,
        })
    }
    walk(&f.body)
}

/// All candidate invocations of every external function at one state,
/// within the bounds: every sender, every argument tuple from the grid, and
/// for call-bearing functions every single-level reentry option.
fn all_invocations(
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
    bounds: &OracleBounds,
) -> Vec<Invocation> {
    let mut out = Vec::new();
    let actors = &snapshot.actors;
    for f in contract.external_functions() {
        let grids: Vec<Vec<Value>> =
            f.params.iter().map(|p| arg_grid(p.ty, bounds, actors)).collect();
        let values: Vec<BigInt> = if reads_msg_value(f, contract) {
            (bounds.arg_lo.max(0)..=bounds.arg_hi).map(BigInt::from).collect()
        } else {
            vec![BigInt::zero()]
        };
        let mut inners: Vec<Option<Invocation>> = vec![None];
        if bounds.reentry_depth >= 1 && has_call_stmt(f) {
            for g in contract.external_functions() {
                let g_grids: Vec<Vec<Value>> =
                    g.params.iter().map(|p| arg_grid(p.ty, bounds, actors)).collect();
                let g_values: Vec<BigInt> = if reads_msg_value(g, contract) {
                    (bounds.arg_lo.max(0)..=bounds.arg_hi).map(BigInt::from).collect()
                } else {
                    vec![BigInt::zero()]
                };
                for args in product(&g_grids) {
                    for value in &g_values {
                        inners.push(Some(Invocation {
                            function: g.name.clone(),
                            sender: snapshot.attacker.clone(),
                            value: value.clone(),
                            args: args.clone(),
                            reentry: Vec::new(),
                        }));
                    }
                }
            }
        }
        for sender in actors {
            for args in product(&grids) {
                for value in &values {
                    for inner in &inners {
                        out.push(Invocation {
                            function: f.name.clone(),
                            sender: sender.clone(),
                            value: value.clone(),
                            args: args.clone(),
                            reentry: inner.clone().into_iter().collect(),
                        });
                    }
                }
            }
        }
    }
    out
}

/// Breadth-first exhaustive search for a property violation within the
/// bounds. The returned depth is minimal by construction.
pub fn search(
    contract: &ContractAST,
    property: &TemporalProperty,
    snapshot: &BlockSnapshot,
    initial: &GlobalState,
    bounds: &OracleBounds,
) -> OracleReport {
    let attacker = &snapshot.attacker;
    let mut states_explored = 1usize;
    let mut transitions_executed = 0usize;

    if monitor::first_violation(property, initial, &[], attacker) == Some(0) {
        return OracleReport {
            violation: Some(OracleFinding { depth: 0, sequence: Vec::new() }),
            states_explored,
            transitions_executed,
        };
    }

    let candidates = all_invocations(contract, snapshot, bounds);
    let mut seen: HashSet<String> = HashSet::new();
    seen.insert(normalize_key(initial));
    // Queue entries carry the invocation sequence for reporting.
    let mut queue: VecDeque<(GlobalState, Vec<Invocation>)> =
        VecDeque::from([(initial.clone(), Vec::new())]);

    while let Some((state, sequence)) = queue.pop_front() {
        if state.depth >= bounds.depth {
            continue;
        }
        for inv in &candidates {
            let Some(post) = interpret(contract, &state, inv, attacker, bounds.reentry_depth)
            else {
                transitions_executed += 1;
                continue;
            };
            transitions_executed += 1;
            let step = [(state.clone(), post.clone())];
            if monitor::first_violation(property, initial, &step, attacker).is_some() {
                let mut sequence = sequence.clone();
                sequence.push(inv.clone());
                return OracleReport {
                    violation: Some(OracleFinding { depth: post.depth, sequence }),
                    states_explored,
                    transitions_executed,
                };
            }
            let key = normalize_key(&post);
            if seen.insert(key) {
                states_explored += 1;
                let mut sequence = sequence.clone();
                sequence.push(inv.clone());
                queue.push_back((post, sequence));
            }
        }
    }

    OracleReport { violation: None, states_explored, transitions_executed }
}
