//! Parsing of MCL contracts, temporal properties, and block snapshots.
//!
//! All three entry points are total: malformed input always yields a
//! [`FrontendError`] diagnostic, never a panic or a partial tree.

pub mod ast;
mod lexer;
mod parser;
mod pretty;
mod snapshot;

use thiserror::Error;

pub use ast::{
    Address, BinOp, ContractAST, Expr, FnKind, FunctionDecl, LValue, Literal, Param, PropExpr,
    PropKey, PropLValue, Quantifier, StateVar, Stmt, TemporalProperty, UnOp, VarType,
};
pub use pretty::pretty_print;
pub use snapshot::{snap_to_literal, BlockSnapshot, SnapValue};

/// Diagnostics for the three parse operations.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrontendError {
    #[error("syntax error at {line}:{col}: expected {expected}")]
    Syntax { line: u32, col: u32, expected: String },
    #[error("unresolved identifier `{0}`")]
    Resolution(String),
    #[error("kind error: {0}")]
    Kind(String),
    #[error("unknown state variable `{0}`")]
    UnknownVariable(String),
    #[error("`old(...)` must not nest")]
    NestedOld,
    #[error("type mismatch for `{name}`: expected {expected}")]
    TypeMismatch { name: String, expected: String },
    #[error("malformed address `{0}`")]
    MalformedAddress(String),
    #[error("attacker address {0} is not listed in actors")]
    AttackerNotInActors(String),
    #[error("snapshot is not valid JSON: {0}")]
    SnapshotJson(String),
}

/// Parse MCL source text into a validated contract.
pub fn parse_contract(source: &str) -> Result<ContractAST, FrontendError> {
    let tokens = lexer::tokenize(source)?;
    let contract = parser::Parser::new(tokens).parse_contract()?;
    parser::validate_contract(&contract)?;
    Ok(contract)
}

/// Parse a temporal property and bind it against a contract.
pub fn parse_property(
    source: &str,
    contract: &ContractAST,
) -> Result<TemporalProperty, FrontendError> {
    let tokens = lexer::tokenize(source)?;
    let prop = parser::Parser::new(tokens).parse_property(source)?;
    parser::validate_property(&prop, contract)?;
    Ok(prop)
}

/// Parse a JSON block snapshot and type-check it against a contract.
pub fn parse_snapshot(
    source: &str,
    contract: &ContractAST,
) -> Result<BlockSnapshot, FrontendError> {
    snapshot::parse(source, contract)
}
