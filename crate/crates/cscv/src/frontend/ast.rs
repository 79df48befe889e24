//! Syntax trees for MCL contracts, temporal properties, and runtime values.

use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

/// An opaque address token, canonicalized to lowercase hex.
///
/// Addresses are labels: the only operations are equality and ordering (the
/// latter purely for deterministic serialization).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Address(String);

impl Address {
    /// Parse `0x` followed by 1..=8 hex digits; normalizes to lowercase.
    pub fn parse(text: &str) -> Option<Address> {
        let hex = text.strip_prefix("0x").or_else(|| text.strip_prefix("0X"))?;
        if hex.is_empty() || hex.len() > 8 || !hex.chars().all(|c| c.is_ascii_hexdigit()) {
            return None;
        }
        Some(Address(format!("0x{}", hex.to_ascii_lowercase())))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Declared variable/parameter types.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarType {
    Int,
    Bool,
    Address,
    /// `map<address, int>` — the only map shape in the language.
    MapAddrInt,
}

impl fmt::Display for VarType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VarType::Int => f.write_str("int"),
            VarType::Bool => f.write_str("bool"),
            VarType::Address => f.write_str("address"),
            VarType::MapAddrInt => f.write_str("map<address, int>"),
        }
    }
}

/// A literal constant.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Literal {
    Int(BigInt),
    Bool(bool),
    Addr(Address),
}

impl Literal {
    pub fn ty(&self) -> VarType {
        match self {
            Literal::Int(_) => VarType::Int,
            Literal::Bool(_) => VarType::Bool,
            Literal::Addr(_) => VarType::Address,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Literal::Int(v) => write!(f, "{v}"),
            Literal::Bool(v) => write!(f, "{v}"),
            Literal::Addr(a) => write!(f, "{a}"),
        }
    }
}

/// A state variable declaration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVar {
    pub name: String,
    pub ty: VarType,
    pub init: Option<Literal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FnKind {
    External,
    View,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub ty: VarType,
}

/// A contract function: `external` functions form the set of transitions the
/// engine may invoke; `view` functions are pure readers callable from
/// expressions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDecl {
    pub name: String,
    pub kind: FnKind,
    pub params: Vec<Param>,
    pub ret: Option<VarType>,
    pub body: Vec<Stmt>,
}

/// Assignment target: a scalar state variable or one map entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LValue {
    Var(String),
    MapEntry { map: String, key: Expr },
}

impl LValue {
    /// Name of the state variable being addressed (the whole map for entries).
    pub fn var_name(&self) -> &str {
        match self {
            LValue::Var(n) => n,
            LValue::MapEntry { map, .. } => map,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Stmt {
    Require(Expr),
    Assign { target: LValue, value: Expr },
    /// `call target amount;` — transfer `amount` native units to `target`.
    /// When `target` is the attacker, the engine may inject a reentrant
    /// invocation at this point.
    Call { target: Expr, amount: Expr },
    If { cond: Expr, then_body: Vec<Stmt>, else_body: Vec<Stmt> },
    Return(Option<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnOp {
    Neg,
    Not,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
    And,
    Or,
}

impl BinOp {
    pub fn is_comparison(self) -> bool {
        matches!(
            self,
            BinOp::Eq | BinOp::Ne | BinOp::Lt | BinOp::Le | BinOp::Gt | BinOp::Ge
        )
    }
}

impl fmt::Display for BinOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Lt => "<",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Ge => ">=",
            BinOp::And => "&&",
            BinOp::Or => "||",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Lit(Literal),
    /// A state variable or parameter reference; resolution is checked during
    /// validation, evaluation looks params up first (shadowing is rejected).
    Ident(String),
    MapIndex { map: String, key: Box<Expr> },
    MsgSender,
    MsgValue,
    /// Nullary view-function call.
    ViewCall(String),
    Unary(UnOp, Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
}

/// A parsed and validated MCL contract.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractAST {
    pub name: String,
    /// `pragma wrap256;` — arithmetic wraps modulo 2^256 instead of being
    /// unbounded.
    pub wrap256: bool,
    pub state_vars: Vec<StateVar>,
    pub functions: Vec<FunctionDecl>,
}

impl ContractAST {
    pub fn state_var(&self, name: &str) -> Option<&StateVar> {
        self.state_vars.iter().find(|v| v.name == name)
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDecl> {
        self.functions.iter().find(|f| f.name == name)
    }

    /// The external write functions, in declaration order.
    pub fn external_functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.functions.iter().filter(|f| f.kind == FnKind::External)
    }

    pub fn view_functions(&self) -> impl Iterator<Item = &FunctionDecl> {
        self.functions.iter().filter(|f| f.kind == FnKind::View)
    }
}

/// Temporal quantifier of a property. Only `always` is verifiable; the
/// parser accepts `eventually` so the instrumenter can reject it with a
/// dedicated error instead of a generic syntax failure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantifier {
    Always,
    Eventually,
}

/// Map key inside a property: a concrete address or the designated attacker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropKey {
    Addr(Address),
    Attacker,
}

/// State lvalue referenced by a property.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropLValue {
    Var(String),
    MapEntry { map: String, key: PropKey },
}

impl PropLValue {
    pub fn var_name(&self) -> &str {
        match self {
            PropLValue::Var(n) => n,
            PropLValue::MapEntry { map, .. } => map,
        }
    }
}

/// Boolean connectives and comparisons over state lvalues, `old(·)` terms,
/// and integer/boolean literals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PropExpr {
    Lit(Literal),
    State(PropLValue),
    Old(PropLValue),
    Unary(UnOp, Box<PropExpr>),
    Binary(BinOp, Box<PropExpr>, Box<PropExpr>),
    Implies(Box<PropExpr>, Box<PropExpr>),
}

/// An `always`-quantified predicate bound to a contract's state variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemporalProperty {
    pub quantifier: Quantifier,
    pub pred: PropExpr,
    /// Original source text, carried through to reports.
    pub source: String,
}

impl TemporalProperty {
    /// State variables referenced by the predicate (current or old).
    pub fn referenced_vars(&self) -> Vec<String> {
        let mut out = Vec::new();
        collect_prop_vars(&self.pred, &mut out);
        out.sort();
        out.dedup();
        out
    }

    /// Lvalues appearing under `old(·)`, in first-occurrence order.
    pub fn old_lvalues(&self) -> Vec<PropLValue> {
        let mut out = Vec::new();
        collect_old_lvalues(&self.pred, &mut out);
        out
    }

    pub fn has_old(&self) -> bool {
        !self.old_lvalues().is_empty()
    }
}

fn collect_prop_vars(e: &PropExpr, out: &mut Vec<String>) {
    match e {
        PropExpr::Lit(_) => {}
        PropExpr::State(lv) | PropExpr::Old(lv) => out.push(lv.var_name().to_string()),
        PropExpr::Unary(_, a) => collect_prop_vars(a, out),
        PropExpr::Binary(_, a, b) | PropExpr::Implies(a, b) => {
            collect_prop_vars(a, out);
            collect_prop_vars(b, out);
        }
    }
}

fn collect_old_lvalues(e: &PropExpr, out: &mut Vec<PropLValue>) {
    match e {
        PropExpr::Lit(_) | PropExpr::State(_) => {}
        PropExpr::Old(lv) => {
            if !out.contains(lv) {
                out.push(lv.clone());
            }
        }
        PropExpr::Unary(_, a) => collect_old_lvalues(a, out),
        PropExpr::Binary(_, a, b) | PropExpr::Implies(a, b) => {
            collect_old_lvalues(a, out);
            collect_old_lvalues(b, out);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn address_normalizes_case() {
        let a = Address::parse("0xAb1").unwrap();
        let b = Address::parse("0xaB1").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.as_str(), "0xab1");
    }

    #[test]
    fn address_rejects_malformed() {
        assert!(Address::parse("0x").is_none());
        assert!(Address::parse("0x123456789").is_none());
        assert!(Address::parse("12").is_none());
        assert!(Address::parse("0xg1").is_none());
    }
}
