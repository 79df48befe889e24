//! Context optimizations: property spatialization, function constantization,
//! and heuristic selection/application.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{access_sets, dependency_closure};
use crate::context::Context;
use crate::frontend::{
    BinOp, BlockSnapshot, ContractAST, Expr, FnKind, FunctionDecl, LValue, Literal, PropExpr,
    PropLValue, Quantifier, Stmt, TemporalProperty, UnOp,
};
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OptError {
    #[error("only `always` properties can be spatialized")]
    UnsupportedForm,
    #[error("no snapshot value or initializer for `{0}` while folding `{1}`")]
    MissingValue(String, String),
}

// ---------------------------------------------------------------------------
// Property spatialization
// ---------------------------------------------------------------------------

/// Postcondition expression: the property's predicate with every `old(lv)`
/// replaced by a reference into the captured pre-state slots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PostExpr {
    Lit(Literal),
    State(PropLValue),
    Captured(usize),
    Unary(UnOp, Box<PostExpr>),
    Binary(BinOp, Box<PostExpr>, Box<PostExpr>),
    Implies(Box<PostExpr>, Box<PostExpr>),
}

/// A contract whose external functions all carry the property compiled into
/// a pre-state capture list and a non-temporal postcondition, checked at
/// top-level invocation boundaries.
#[derive(Debug, Clone)]
pub struct InstrumentedContract {
    pub base: ContractAST,
    pub pre_capture: Vec<PropLValue>,
    pub postcondition: PostExpr,
}

impl InstrumentedContract {
    /// Spatialization is uniform over the external set: every function
    /// carries the same derived postcondition.
    pub fn postcondition_for(&self, function: &str) -> Option<&PostExpr> {
        self.base
            .function(function)
            .filter(|f| f.kind == FnKind::External)
            .map(|_| &self.postcondition)
    }
}

fn rewrite_old(e: &PropExpr, capture: &[PropLValue]) -> PostExpr {
    match e {
        PropExpr::Lit(l) => PostExpr::Lit(l.clone()),
        PropExpr::State(lv) => PostExpr::State(lv.clone()),
        PropExpr::Old(lv) => {
            let slot = capture.iter().position(|c| c == lv).expect("capture collected first");
            PostExpr::Captured(slot)
        }
        PropExpr::Unary(op, a) => PostExpr::Unary(*op, Box::new(rewrite_old(a, capture))),
        PropExpr::Binary(op, a, b) => PostExpr::Binary(
            *op,
            Box::new(rewrite_old(a, capture)),
            Box::new(rewrite_old(b, capture)),
        ),
        PropExpr::Implies(a, b) => PostExpr::Implies(
            Box::new(rewrite_old(a, capture)),
            Box::new(rewrite_old(b, capture)),
        ),
    }
}

/// Compile the temporal property into pre-capture slots plus a non-temporal
/// postcondition attached to every external function.
pub fn spatialize(
    property: &TemporalProperty,
    contract: &ContractAST,
) -> Result<InstrumentedContract, OptError> {
    if property.quantifier != Quantifier::Always {
        return Err(OptError::UnsupportedForm);
    }
    let pre_capture = property.old_lvalues();
    let postcondition = rewrite_old(&property.pred, &pre_capture);
    Ok(InstrumentedContract { base: contract.clone(), pre_capture, postcondition })
}

// ---------------------------------------------------------------------------
// Function constantization
// ---------------------------------------------------------------------------

fn expr_uses_msg(e: &Expr, contract: &ContractAST) -> bool {
    match e {
        Expr::MsgSender | Expr::MsgValue => true,
        Expr::Lit(_) | Expr::Ident(_) => false,
        Expr::MapIndex { key, .. } => expr_uses_msg(key, contract),
        Expr::ViewCall(name) => contract
            .function(name)
            .map(|g| g.body.iter().any(|s| stmt_uses_msg(s, contract)))
            .unwrap_or(false),
        Expr::Unary(_, a) => expr_uses_msg(a, contract),
        Expr::Binary(_, a, b) => expr_uses_msg(a, contract) || expr_uses_msg(b, contract),
    }
}

fn stmt_uses_msg(s: &Stmt, contract: &ContractAST) -> bool {
    match s {
        Stmt::Require(e) => expr_uses_msg(e, contract),
        Stmt::Assign { target, value } => {
            let key_uses =
                matches!(target, LValue::MapEntry { key, .. } if expr_uses_msg(key, contract));
            key_uses || expr_uses_msg(value, contract)
        }
        Stmt::Call { target, amount } => {
            expr_uses_msg(target, contract) || expr_uses_msg(amount, contract)
        }
        Stmt::If { cond, then_body, else_body } => {
            expr_uses_msg(cond, contract)
                || then_body.iter().any(|s| stmt_uses_msg(s, contract))
                || else_body.iter().any(|s| stmt_uses_msg(s, contract))
        }
        Stmt::Return(Some(e)) => expr_uses_msg(e, contract),
        Stmt::Return(None) => false,
    }
}

/// View functions whose value cannot change under any external invocation:
/// nullary, caller-independent, and with a read closure disjoint from every
/// externally written variable (and from heuristically symbolized ones).
pub fn constantizable_views(contract: &ContractAST, context: &Context) -> Vec<String> {
    let sets = access_sets(contract);
    let mut written: BTreeSet<String> = BTreeSet::new();
    for f in contract.external_functions() {
        written.extend(sets.writes_of(&f.name).iter().cloned());
    }
    let seeded: BTreeSet<String> = context
        .heuristics
        .selected
        .iter()
        .filter(|h| h.kind == HeuristicKind::StateSeed)
        .filter_map(|h| h.matcher.variable.clone())
        .collect();
    contract
        .view_functions()
        .filter(|g| g.params.is_empty())
        .filter(|g| !g.body.iter().any(|s| stmt_uses_msg(s, contract)))
        .filter(|g| {
            let closure = dependency_closure(sets.reads_of(&g.name), contract);
            closure.is_disjoint(&written) && closure.is_disjoint(&seeded)
        })
        .map(|g| g.name.clone())
        .collect()
}

enum EvalStop {
    Missing(String),
    NotConstant,
}

struct ConstEval<'a> {
    contract: &'a ContractAST,
    valuation: &'a BTreeMap<String, Value>,
    default_zero: bool,
}

impl<'a> ConstEval<'a> {
    fn lookup(&self, name: &str) -> Result<Value, EvalStop> {
        if let Some(v) = self.valuation.get(name) {
            return Ok(v.clone());
        }
        let decl = self.contract.state_var(name).ok_or(EvalStop::NotConstant)?;
        if let Some(init) = &decl.init {
            return Ok(Value::from_literal(init));
        }
        if self.default_zero {
            return Ok(Value::zero_of(decl.ty));
        }
        Err(EvalStop::Missing(name.to_string()))
    }

    fn eval_expr(&self, e: &Expr) -> Result<Value, EvalStop> {
        match e {
            Expr::Lit(l) => Ok(Value::from_literal(l)),
            Expr::Ident(name) => self.lookup(name),
            Expr::MapIndex { map, key } => {
                let key = match self.eval_expr(key)? {
                    Value::Addr(a) => a,
                    _ => return Err(EvalStop::NotConstant),
                };
                Ok(Value::Int(self.lookup(map)?.map_get(&key)))
            }
            Expr::MsgSender | Expr::MsgValue => Err(EvalStop::NotConstant),
            Expr::ViewCall(name) => {
                let g = self.contract.function(name).ok_or(EvalStop::NotConstant)?;
                self.eval_view(g)
            }
            Expr::Unary(UnOp::Neg, a) => match self.eval_expr(a)? {
                Value::Int(v) => Ok(Value::Int(-v)),
                _ => Err(EvalStop::NotConstant),
            },
            Expr::Unary(UnOp::Not, a) => match self.eval_expr(a)? {
                Value::Bool(b) => Ok(Value::Bool(!b)),
                _ => Err(EvalStop::NotConstant),
            },
            Expr::Binary(op, a, b) => {
                let va = self.eval_expr(a)?;
                let vb = self.eval_expr(b)?;
                match op {
                    BinOp::Add | BinOp::Sub | BinOp::Mul | BinOp::Div => {
                        let (Value::Int(x), Value::Int(y)) = (va, vb) else {
                            return Err(EvalStop::NotConstant);
                        };
                        match op {
                            BinOp::Add => Ok(Value::Int(x + y)),
                            BinOp::Sub => Ok(Value::Int(x - y)),
                            BinOp::Mul => Ok(Value::Int(x * y)),
                            _ => {
                                if y.is_zero() {
                                    Err(EvalStop::NotConstant)
                                } else {
                                    Ok(Value::Int(crate::solver::floor_div(&x, &y)))
                                }
                            }
                        }
                    }
                    BinOp::And | BinOp::Or => {
                        let (Value::Bool(x), Value::Bool(y)) = (va, vb) else {
                            return Err(EvalStop::NotConstant);
                        };
                        Ok(Value::Bool(if *op == BinOp::And { x && y } else { x || y }))
                    }
                    BinOp::Eq => Ok(Value::Bool(va == vb)),
                    BinOp::Ne => Ok(Value::Bool(va != vb)),
                    BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge => {
                        let (Value::Int(x), Value::Int(y)) = (va, vb) else {
                            return Err(EvalStop::NotConstant);
                        };
                        Ok(Value::Bool(match op {
                            BinOp::Lt => x < y,
                            BinOp::Le => x <= y,
                            BinOp::Gt => x > y,
                            _ => x >= y,
                        }))
                    }
                }
            }
        }
    }

    fn eval_view(&self, g: &FunctionDecl) -> Result<Value, EvalStop> {
        match self.eval_block(&g.body)? {
            Some(v) => Ok(v),
            None => Err(EvalStop::NotConstant),
        }
    }

    fn eval_block(&self, stmts: &[Stmt]) -> Result<Option<Value>, EvalStop> {
        for stmt in stmts {
            match stmt {
                Stmt::Require(cond) => match self.eval_expr(cond)? {
                    Value::Bool(true) => {}
                    // A view that always aborts is not a constant.
                    _ => return Err(EvalStop::NotConstant),
                },
                Stmt::If { cond, then_body, else_body } => {
                    let taken = match self.eval_expr(cond)? {
                        Value::Bool(b) => b,
                        _ => return Err(EvalStop::NotConstant),
                    };
                    let body = if taken { then_body } else { else_body };
                    if let Some(v) = self.eval_block(body)? {
                        return Ok(Some(v));
                    }
                }
                Stmt::Return(Some(e)) => return Ok(Some(self.eval_expr(e)?)),
                Stmt::Return(None) => return Ok(None),
                Stmt::Assign { .. } | Stmt::Call { .. } => return Err(EvalStop::NotConstant),
            }
        }
        Ok(None)
    }
}

fn value_to_literal(v: &Value) -> Option<Literal> {
    match v {
        Value::Int(x) => Some(Literal::Int(x.clone())),
        Value::Bool(b) => Some(Literal::Bool(*b)),
        Value::Addr(a) => Some(Literal::Addr(a.clone())),
        Value::Map(_) => None,
    }
}

fn substitute_expr(e: &Expr, folded: &BTreeMap<String, Literal>) -> Expr {
    match e {
        Expr::ViewCall(name) => match folded.get(name) {
            Some(lit) => Expr::Lit(lit.clone()),
            None => e.clone(),
        },
        Expr::MapIndex { map, key } => Expr::MapIndex {
            map: map.clone(),
            key: Box::new(substitute_expr(key, folded)),
        },
        Expr::Unary(op, a) => Expr::Unary(*op, Box::new(substitute_expr(a, folded))),
        Expr::Binary(op, a, b) => Expr::Binary(
            *op,
            Box::new(substitute_expr(a, folded)),
            Box::new(substitute_expr(b, folded)),
        ),
        other => other.clone(),
    }
}

fn substitute_stmt(s: &Stmt, folded: &BTreeMap<String, Literal>) -> Stmt {
    match s {
        Stmt::Require(e) => Stmt::Require(substitute_expr(e, folded)),
        Stmt::Assign { target, value } => Stmt::Assign {
            target: match target {
                LValue::Var(n) => LValue::Var(n.clone()),
                LValue::MapEntry { map, key } => LValue::MapEntry {
                    map: map.clone(),
                    key: substitute_expr(key, folded),
                },
            },
            value: substitute_expr(value, folded),
        },
        Stmt::Call { target, amount } => Stmt::Call {
            target: substitute_expr(target, folded),
            amount: substitute_expr(amount, folded),
        },
        Stmt::If { cond, then_body, else_body } => Stmt::If {
            cond: substitute_expr(cond, folded),
            then_body: then_body.iter().map(|s| substitute_stmt(s, folded)).collect(),
            else_body: else_body.iter().map(|s| substitute_stmt(s, folded)).collect(),
        },
        Stmt::Return(v) => Stmt::Return(v.as_ref().map(|e| substitute_expr(e, folded))),
    }
}

/// Replace every call to a state-constant nullary view by the literal it
/// evaluates to under the snapshot. Ineligible calls are left untouched.
pub fn constantize(
    contract: &ContractAST,
    context: &Context,
    snapshot: &BlockSnapshot,
    default_zero: bool,
) -> Result<ContractAST, OptError> {
    let eligible = constantizable_views(contract, context);
    if eligible.is_empty() {
        return Ok(contract.clone());
    }

    // Snapshot values first, then the evaluation function's domain, then
    // initializers (inside the evaluator).
    let mut valuation = context.evaluation.valuation.clone();
    for (name, snap) in &snapshot.state {
        if let Some(lit) = crate::frontend::snap_to_literal(snap) {
            valuation.entry(name.clone()).or_insert_with(|| Value::from_literal(&lit));
        } else if let crate::frontend::SnapValue::Map(m) = snap {
            valuation.entry(name.clone()).or_insert_with(|| Value::Map(m.clone()));
        }
    }

    let evaluator = ConstEval { contract, valuation: &valuation, default_zero };
    let mut folded: BTreeMap<String, Literal> = BTreeMap::new();
    for name in eligible {
        let g = contract.function(&name).expect("eligible view exists");
        match evaluator.eval_view(g) {
            Ok(v) => {
                if let Some(lit) = value_to_literal(&v) {
                    folded.insert(name, lit);
                }
            }
            Err(EvalStop::Missing(var)) => return Err(OptError::MissingValue(var, name)),
            Err(EvalStop::NotConstant) => {}
        }
    }
    if folded.is_empty() {
        return Ok(contract.clone());
    }

    let mut out = contract.clone();
    for f in &mut out.functions {
        f.body = f.body.iter().map(|s| substitute_stmt(s, &folded)).collect();
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Heuristics
// ---------------------------------------------------------------------------

/// The six root-cause classes of the vulnerability taxonomy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum VulnClass {
    BF,
    RE,
    PM,
    IV,
    AF,
    UE,
}

impl VulnClass {
    pub const ALL: [VulnClass; 6] = [
        VulnClass::BF,
        VulnClass::RE,
        VulnClass::PM,
        VulnClass::IV,
        VulnClass::AF,
        VulnClass::UE,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            VulnClass::BF => "BF",
            VulnClass::RE => "RE",
            VulnClass::PM => "PM",
            VulnClass::IV => "IV",
            VulnClass::AF => "AF",
            VulnClass::UE => "UE",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeuristicKind {
    #[serde(rename = "priority-boost")]
    PriorityBoost,
    #[serde(rename = "arg-seed")]
    ArgSeed,
    #[serde(rename = "state-seed")]
    StateSeed,
    #[serde(rename = "reentry-target")]
    ReentryTarget,
}

/// Name-based match predicate; heuristics that match nothing in the
/// contract under verification are inert.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub variable: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeuristicPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_function: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Heuristic {
    pub id: String,
    pub class: VulnClass,
    pub kind: HeuristicKind,
    #[serde(rename = "match")]
    pub matcher: MatchSpec,
    pub payload: HeuristicPayload,
}

impl Heuristic {
    /// Kind determines the payload shape.
    pub fn validate(&self) -> Result<(), String> {
        let ok = match self.kind {
            HeuristicKind::PriorityBoost => {
                self.payload.delta.is_some() && self.matcher.function.is_some()
            }
            HeuristicKind::ArgSeed => {
                self.payload.values.is_some() && self.matcher.function.is_some()
            }
            HeuristicKind::StateSeed => {
                self.payload.values.is_some() && self.matcher.variable.is_some()
            }
            HeuristicKind::ReentryTarget => {
                self.payload.target_function.is_some() && self.matcher.function.is_some()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!("heuristic `{}` has a payload/match shape mismatch", self.id))
        }
    }
}

/// Parse and validate a heuristic base file (a JSON list of heuristics).
pub fn load_heuristic_base(text: &str) -> Result<Vec<Heuristic>, String> {
    let base: Vec<Heuristic> = serde_json::from_str(text).map_err(|e| e.to_string())?;
    for h in &base {
        h.validate()?;
    }
    Ok(base)
}

/// A reproducible sample from a heuristic base.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeuristicSet {
    pub selected: Vec<Heuristic>,
    pub base_size: usize,
    pub proportion: f64,
    pub rng_seed: u64,
}

impl HeuristicSet {
    pub fn empty() -> Self {
        HeuristicSet { selected: Vec::new(), base_size: 0, proportion: 0.0, rng_seed: 0 }
    }

    pub fn ids(&self) -> Vec<&str> {
        self.selected.iter().map(|h| h.id.as_str()).collect()
    }
}

/// Uniform sample without replacement of exactly `floor(proportion * |base|)`
/// heuristics, deterministic in the seed. The sample keeps base-file order.
pub fn select_heuristics(base: &[Heuristic], proportion: f64, rng_seed: u64) -> HeuristicSet {
    let n = base.len();
    let k = ((proportion * n as f64).floor() as usize).min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut indices: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        indices.swap(i, j);
    }
    let mut picked: Vec<usize> = indices.into_iter().take(k).collect();
    picked.sort_unstable();
    HeuristicSet {
        selected: picked.into_iter().map(|i| base[i].clone()).collect(),
        base_size: n,
        proportion,
        rng_seed,
    }
}

fn boost_in(list: &mut Vec<String>, function: &str, delta: usize) {
    if let Some(pos) = list.iter().position(|f| f == function) {
        let target = pos.saturating_sub(delta);
        let item = list.remove(pos);
        list.insert(target, item);
    }
}

/// Attach a heuristic set to a context. Priority boosts reorder the
/// relevance rankings; seed and reentry heuristics ride along for the
/// engine's input generation. The evaluation function is never touched.
pub fn apply_heuristics(context: &Context, set: &HeuristicSet) -> Context {
    let mut out = context.clone();
    out.heuristics = set.clone();
    for h in &set.selected {
        if h.kind != HeuristicKind::PriorityBoost {
            continue;
        }
        let (Some(function), Some(delta)) = (&h.matcher.function, h.payload.delta) else {
            continue;
        };
        boost_in(&mut out.relevance.initial, function, delta);
        for list in out.relevance.ranked.values_mut() {
            boost_in(list, function, delta);
        }
    }
    out
}

/// Extra integer argument seeds contributed by heuristics for one function:
/// its own arg-seeds plus state-seeds of any variable it writes.
pub fn heuristic_arg_seeds(
    set: &HeuristicSet,
    function: &str,
    writes: &BTreeSet<String>,
) -> Vec<BigInt> {
    let mut out = Vec::new();
    for h in &set.selected {
        match h.kind {
            HeuristicKind::ArgSeed => {
                if h.matcher.function.as_deref() == Some(function) {
                    if let Some(values) = &h.payload.values {
                        out.extend(values.iter().map(|v| BigInt::from(*v)));
                    }
                }
            }
            HeuristicKind::StateSeed => {
                if let Some(var) = &h.matcher.variable {
                    if writes.contains(var) {
                        if let Some(values) = &h.payload.values {
                            out.extend(values.iter().map(|v| BigInt::from(*v)));
                        }
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Reentry targets heuristics request when `function` runs.
pub fn heuristic_reentry_targets(set: &HeuristicSet, function: &str) -> Vec<String> {
    let mut out = Vec::new();
    for h in &set.selected {
        if h.kind == HeuristicKind::ReentryTarget
            && h.matcher.function.as_deref() == Some(function)
        {
            if let Some(target) = &h.payload.target_function {
                if !out.contains(target) {
                    out.push(target.clone());
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::build_context;
    use crate::frontend::{parse_contract, parse_property, parse_snapshot, PropKey};

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
            view fn getTotal() -> int { return total; }
        }
    "#;

    const SNAP: &str = r#"{"block":0,"state":{"total":5,"balances":{"0xA":5}},"actors":["0xA","0xB"],"attacker":"0xA"}"#;

    fn vault_context() -> (ContractAST, crate::frontend::BlockSnapshot, Context) {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("always total >= 0", &c).unwrap();
        let s = parse_snapshot(SNAP, &c).unwrap();
        let ctx = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        (c, s, ctx)
    }

    #[test]
    fn spatialize_without_old_terms() {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("always total >= 0", &c).unwrap();
        let inst = spatialize(&p, &c).unwrap();
        assert!(inst.pre_capture.is_empty());
        assert!(inst.postcondition_for("deposit").is_some());
        assert!(inst.postcondition_for("withdraw").is_some());
        assert!(inst.postcondition_for("getTotal").is_none());
    }

    #[test]
    fn spatialize_captures_old_lvalues() {
        let src = "contract Amm { state reserveX: int; state reserveY: int; }";
        let c = parse_contract(src).unwrap();
        let p = parse_property(
            "always reserveX * reserveY >= old(reserveX) * old(reserveY)",
            &c,
        )
        .unwrap();
        let inst = spatialize(&p, &c).unwrap();
        assert_eq!(
            inst.pre_capture,
            vec![PropLValue::Var("reserveX".into()), PropLValue::Var("reserveY".into())]
        );
        fn has_state_only(e: &PostExpr) -> bool {
            match e {
                PostExpr::Captured(_) | PostExpr::Lit(_) | PostExpr::State(_) => true,
                PostExpr::Unary(_, a) => has_state_only(a),
                PostExpr::Binary(_, a, b) | PostExpr::Implies(a, b) => {
                    has_state_only(a) && has_state_only(b)
                }
            }
        }
        assert!(has_state_only(&inst.postcondition));
    }

    #[test]
    fn attacker_key_survives_rewrite() {
        let src = "contract K { state paid: map<address, int>; }";
        let c = parse_contract(src).unwrap();
        let p = parse_property("always paid[@attacker] == 0", &c).unwrap();
        let inst = spatialize(&p, &c).unwrap();
        fn has_attacker(e: &PostExpr) -> bool {
            match e {
                PostExpr::State(PropLValue::MapEntry { key: PropKey::Attacker, .. }) => true,
                PostExpr::Unary(_, a) => has_attacker(a),
                PostExpr::Binary(_, a, b) | PostExpr::Implies(a, b) => {
                    has_attacker(a) || has_attacker(b)
                }
                _ => false,
            }
        }
        assert!(has_attacker(&inst.postcondition));
    }

    #[test]
    fn eventually_is_unsupported() {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("eventually total == 0", &c).unwrap();
        assert!(matches!(spatialize(&p, &c), Err(OptError::UnsupportedForm)));
    }

    #[test]
    fn constant_view_is_folded() {
        let src = r#"
            contract F {
                state feeRate: int;
                state pool: int;
                external fn drain(amount: int) {
                    require(amount * fee() <= pool);
                    pool = pool - amount;
                }
                view fn fee() -> int { return feeRate; }
            }
        "#;
        let c = parse_contract(src).unwrap();
        let p = parse_property("always pool >= 0", &c).unwrap();
        let s = parse_snapshot(
            r#"{"block":0,"state":{"feeRate":3,"pool":9},"actors":["0xA"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap();
        let ctx = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        assert_eq!(constantizable_views(&c, &ctx), vec!["fee".to_string()]);
        let folded = constantize(&c, &ctx, &s, false).unwrap();
        let printed = crate::frontend::pretty_print(&folded);
        assert!(printed.contains("amount * 3 <= pool"), "got:\n{printed}");
    }

    #[test]
    fn written_closure_blocks_folding() {
        let (c, s, ctx) = vault_context();
        // getTotal reads total, which withdraw writes.
        assert!(constantizable_views(&c, &ctx).is_empty());
        let same = constantize(&c, &ctx, &s, false).unwrap();
        assert_eq!(same, c);
    }

    #[test]
    fn no_view_calls_leaves_ast_identical() {
        let src = "contract P { state a: int; external fn f(v: int) { a = v; } view fn g() -> int { return 7; } }";
        let c = parse_contract(src).unwrap();
        let p = parse_property("always a >= 0", &c).unwrap();
        let s =
            parse_snapshot(r#"{"block":0,"state":{"a":0},"actors":["0xA"],"attacker":"0xA"}"#, &c)
                .unwrap();
        let ctx = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        let folded = constantize(&c, &ctx, &s, false).unwrap();
        assert_eq!(folded, c);
    }

    #[test]
    fn caller_dependent_view_is_not_constant() {
        let src = r#"
            contract M {
                state tier: map<address, int>;
                state pool: int;
                external fn f(v: int) { pool = v; }
                view fn myTier() -> int { return tier[msg.sender]; }
            }
        "#;
        let c = parse_contract(src).unwrap();
        let p = parse_property("always pool >= 0", &c).unwrap();
        let s = parse_snapshot(
            r#"{"block":0,"state":{"pool":0},"actors":["0xA"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap();
        let ctx = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        assert!(constantizable_views(&c, &ctx).is_empty());
    }

    #[test]
    fn missing_value_during_folding_is_reported() {
        let src = r#"
            contract F {
                state feeRate: int;
                state pool: int;
                external fn f(v: int) { pool = v; }
                view fn fee() -> int { return feeRate; }
            }
        "#;
        let c = parse_contract(src).unwrap();
        let p = parse_property("always pool >= 0", &c).unwrap();
        let s = parse_snapshot(
            r#"{"block":0,"state":{"pool":0},"actors":["0xA"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap();
        let ctx = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        assert!(matches!(
            constantize(&c, &ctx, &s, false),
            Err(OptError::MissingValue(var, view)) if var == "feeRate" && view == "fee"
        ));
        // With the zero default the fold succeeds.
        assert!(constantize(&c, &ctx, &s, true).is_ok());
    }

    fn sample_base(n: usize) -> Vec<Heuristic> {
        (0..n)
            .map(|i| Heuristic {
                id: format!("h{i}"),
                class: VulnClass::ALL[i % 6],
                kind: HeuristicKind::ArgSeed,
                matcher: MatchSpec { function: Some(format!("f{i}")), variable: None },
                payload: HeuristicPayload {
                    delta: None,
                    values: Some(vec![i as i64]),
                    target_function: None,
                },
            })
            .collect()
    }

    #[test]
    fn selection_size_and_determinism() {
        let base = sample_base(8);
        let a = select_heuristics(&base, 0.75, 42);
        assert_eq!(a.selected.len(), 6);
        let b = select_heuristics(&base, 0.75, 42);
        assert_eq!(a, b);
    }

    #[test]
    fn proportion_zero_selects_nothing() {
        let base = sample_base(8);
        assert!(select_heuristics(&base, 0.0, 42).selected.is_empty());
    }

    #[test]
    fn sweep_grid_sizes() {
        let base = sample_base(8);
        let sizes: Vec<usize> = [0.0, 0.25, 0.5, 0.75]
            .iter()
            .map(|p| select_heuristics(&base, *p, 1).selected.len())
            .collect();
        assert_eq!(sizes, vec![0, 2, 4, 6]);
    }

    fn boost(function: &str, delta: usize) -> HeuristicSet {
        HeuristicSet {
            selected: vec![Heuristic {
                id: format!("boost-{function}"),
                class: VulnClass::RE,
                kind: HeuristicKind::PriorityBoost,
                matcher: MatchSpec { function: Some(function.into()), variable: None },
                payload: HeuristicPayload {
                    delta: Some(delta),
                    values: None,
                    target_function: None,
                },
            }],
            base_size: 1,
            proportion: 1.0,
            rng_seed: 0,
        }
    }

    #[test]
    fn boost_clamps_at_top() {
        let (_, _, ctx) = vault_context();
        let boosted = apply_heuristics(&ctx, &boost("deposit", 1));
        assert_eq!(
            boosted.relevance.initial,
            vec!["deposit".to_string(), "withdraw".to_string()]
        );
    }

    #[test]
    fn boost_moves_function_up() {
        let (_, _, ctx) = vault_context();
        let boosted = apply_heuristics(&ctx, &boost("withdraw", 1));
        assert_eq!(
            boosted.relevance.initial,
            vec!["withdraw".to_string(), "deposit".to_string()]
        );
        assert_eq!(boosted.evaluation, ctx.evaluation);
    }

    #[test]
    fn empty_set_is_identity() {
        let (_, _, ctx) = vault_context();
        let same = apply_heuristics(&ctx, &HeuristicSet::empty());
        assert_eq!(same.relevance, ctx.relevance);
        assert_eq!(same.evaluation, ctx.evaluation);
    }

    #[test]
    fn heuristic_base_rejects_shape_mismatch() {
        let bad = r#"[{"id":"x","class":"RE","kind":"priority-boost","match":{"function":"f"},"payload":{"values":[1]}}]"#;
        assert!(load_heuristic_base(bad).is_err());
        let good = r#"[{"id":"x","class":"RE","kind":"priority-boost","match":{"function":"f"},"payload":{"delta":2}}]"#;
        assert_eq!(load_heuristic_base(good).unwrap().len(), 1);
    }
}
