//! Path-constraint satisfiability: terms, models, and the solver handle.
//!
//! Constraints are quantifier-free nonlinear integer arithmetic plus
//! address-equality atoms over the finite actor set. Queries go to an
//! external SMT-LIB2 process when one is configured, otherwise to the
//! built-in bounded enumerator.

mod bounded;
mod smtlib;

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::Zero;
use thiserror::Error;

use crate::frontend::Address;

pub use bounded::{solve_bounded, DEFAULT_DOMAIN_CAP};
pub use smtlib::{emit_smtlib, run_shim};

pub type SymbolId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sort {
    Int,
    /// An address drawn from the finite actor set.
    Addr,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SymbolDecl {
    pub name: String,
    pub sort: Sort,
}

/// Integer-valued term.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IntTerm {
    Lit(BigInt),
    Sym(SymbolId),
    Add(Box<IntTerm>, Box<IntTerm>),
    Sub(Box<IntTerm>, Box<IntTerm>),
    Mul(Box<IntTerm>, Box<IntTerm>),
    /// Floor division (toward negative infinity).
    FloorDiv(Box<IntTerm>, Box<IntTerm>),
    /// Floor modulus; only produced under the wrap256 pragma.
    Mod(Box<IntTerm>, Box<IntTerm>),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum AddrTerm {
    Lit(Address),
    Sym(SymbolId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn negate(self) -> CmpOp {
        match self {
            CmpOp::Eq => CmpOp::Ne,
            CmpOp::Ne => CmpOp::Eq,
            CmpOp::Lt => CmpOp::Ge,
            CmpOp::Le => CmpOp::Gt,
            CmpOp::Gt => CmpOp::Le,
            CmpOp::Ge => CmpOp::Lt,
        }
    }

    pub fn apply(self, a: &BigInt, b: &BigInt) -> bool {
        match self {
            CmpOp::Eq => a == b,
            CmpOp::Ne => a != b,
            CmpOp::Lt => a < b,
            CmpOp::Le => a <= b,
            CmpOp::Gt => a > b,
            CmpOp::Ge => a >= b,
        }
    }
}

/// Boolean constraint over integer terms and address atoms.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ConstraintTerm {
    Lit(bool),
    Cmp(CmpOp, IntTerm, IntTerm),
    AddrEq(AddrTerm, AddrTerm),
    Not(Box<ConstraintTerm>),
    And(Box<ConstraintTerm>, Box<ConstraintTerm>),
    Or(Box<ConstraintTerm>, Box<ConstraintTerm>),
}

impl ConstraintTerm {
    pub fn negated(&self) -> ConstraintTerm {
        match self {
            ConstraintTerm::Lit(b) => ConstraintTerm::Lit(!b),
            ConstraintTerm::Cmp(op, a, b) => ConstraintTerm::Cmp(op.negate(), a.clone(), b.clone()),
            ConstraintTerm::Not(inner) => (**inner).clone(),
            other => ConstraintTerm::Not(Box::new(other.clone())),
        }
    }

    pub fn symbols(&self) -> Vec<SymbolId> {
        let mut out = Vec::new();
        collect_pred_syms(self, &mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    pub fn has_symbols(&self) -> bool {
        !self.symbols().is_empty()
    }
}

impl IntTerm {
    pub fn has_symbols(&self) -> bool {
        let mut syms = Vec::new();
        collect_term_syms(self, &mut syms);
        !syms.is_empty()
    }
}

fn collect_term_syms(t: &IntTerm, out: &mut Vec<SymbolId>) {
    match t {
        IntTerm::Lit(_) => {}
        IntTerm::Sym(s) => out.push(*s),
        IntTerm::Add(a, b)
        | IntTerm::Sub(a, b)
        | IntTerm::Mul(a, b)
        | IntTerm::FloorDiv(a, b)
        | IntTerm::Mod(a, b) => {
            collect_term_syms(a, out);
            collect_term_syms(b, out);
        }
    }
}

fn collect_pred_syms(p: &ConstraintTerm, out: &mut Vec<SymbolId>) {
    match p {
        ConstraintTerm::Lit(_) => {}
        ConstraintTerm::Cmp(_, a, b) => {
            collect_term_syms(a, out);
            collect_term_syms(b, out);
        }
        ConstraintTerm::AddrEq(a, b) => {
            if let AddrTerm::Sym(s) = a {
                out.push(*s);
            }
            if let AddrTerm::Sym(s) = b {
                out.push(*s);
            }
        }
        ConstraintTerm::Not(inner) => collect_pred_syms(inner, out),
        ConstraintTerm::And(a, b) | ConstraintTerm::Or(a, b) => {
            collect_pred_syms(a, out);
            collect_pred_syms(b, out);
        }
    }
}

pub fn symbols_of(terms: &[ConstraintTerm]) -> Vec<SymbolId> {
    let mut out = Vec::new();
    for t in terms {
        collect_pred_syms(t, &mut out);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// A value assigned to a symbol by a model or a witness.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelValue {
    Int(BigInt),
    Addr(Address),
}

impl fmt::Display for ModelValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelValue::Int(v) => write!(f, "{v}"),
            ModelValue::Addr(a) => write!(f, "{a}"),
        }
    }
}

pub type Model = BTreeMap<SymbolId, ModelValue>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SolverResult {
    Sat(Model),
    Unsat,
    Unknown(String),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SolverError {
    #[error("bounded solving domain exceeds cap: {0} assignments")]
    DomainTooLarge(BigInt),
    #[error("external solver unavailable: {0}")]
    BackendUnavailable(String),
    #[error("symbol {0} has no bound")]
    UnboundedSymbol(SymbolId),
}

/// Floor division and floor modulus, the concrete semantics of `/` and the
/// wrap reduction.
pub fn floor_div(a: &BigInt, b: &BigInt) -> BigInt {
    a.div_floor(b)
}

pub fn floor_mod(a: &BigInt, b: &BigInt) -> BigInt {
    a.mod_floor(b)
}

/// Evaluate an integer term under an assignment. `None` means a division by
/// zero, which the engine treats as a trap.
pub fn eval_int_term(t: &IntTerm, env: &Model) -> Option<BigInt> {
    match t {
        IntTerm::Lit(v) => Some(v.clone()),
        IntTerm::Sym(s) => match env.get(s) {
            Some(ModelValue::Int(v)) => Some(v.clone()),
            _ => None,
        },
        IntTerm::Add(a, b) => Some(eval_int_term(a, env)? + eval_int_term(b, env)?),
        IntTerm::Sub(a, b) => Some(eval_int_term(a, env)? - eval_int_term(b, env)?),
        IntTerm::Mul(a, b) => Some(eval_int_term(a, env)? * eval_int_term(b, env)?),
        IntTerm::FloorDiv(a, b) => {
            let d = eval_int_term(b, env)?;
            if d.is_zero() {
                return None;
            }
            Some(floor_div(&eval_int_term(a, env)?, &d))
        }
        IntTerm::Mod(a, b) => {
            let d = eval_int_term(b, env)?;
            if d.is_zero() {
                return None;
            }
            Some(floor_mod(&eval_int_term(a, env)?, &d))
        }
    }
}

fn eval_addr_term(t: &AddrTerm, env: &Model) -> Option<Address> {
    match t {
        AddrTerm::Lit(a) => Some(a.clone()),
        AddrTerm::Sym(s) => match env.get(s) {
            Some(ModelValue::Addr(a)) => Some(a.clone()),
            _ => None,
        },
    }
}

/// Evaluate a constraint under an assignment. `None` on division by zero or
/// a missing/ill-sorted symbol.
pub fn eval_constraint(p: &ConstraintTerm, env: &Model) -> Option<bool> {
    match p {
        ConstraintTerm::Lit(b) => Some(*b),
        ConstraintTerm::Cmp(op, a, b) => {
            Some(op.apply(&eval_int_term(a, env)?, &eval_int_term(b, env)?))
        }
        ConstraintTerm::AddrEq(a, b) => Some(eval_addr_term(a, env)? == eval_addr_term(b, env)?),
        ConstraintTerm::Not(inner) => Some(!eval_constraint(inner, env)?),
        ConstraintTerm::And(a, b) => Some(eval_constraint(a, env)? && eval_constraint(b, env)?),
        ConstraintTerm::Or(a, b) => Some(eval_constraint(a, env)? || eval_constraint(b, env)?),
    }
}

pub fn eval_conjunction(terms: &[ConstraintTerm], env: &Model) -> Option<bool> {
    for t in terms {
        if !eval_constraint(t, env)? {
            return Some(false);
        }
    }
    Some(true)
}

/// Which backend a handle drives.
#[derive(Debug, Clone)]
pub enum Backend {
    /// Bounded enumeration over `lo..=hi` for every integer symbol.
    Builtin { lo: BigInt, hi: BigInt },
    /// External SMT-LIB2 process: the command gets the script on stdin and
    /// answers `sat`/`unsat`/`unknown` plus a model on stdout.
    External { cmd: String, timeout_ms: u64 },
}

/// A solver handle confined to one engine instance. Tracks call counts and
/// whether any query came back unknown.
#[derive(Debug, Clone)]
pub struct SolverHandle {
    backend: Backend,
    actors: Vec<Address>,
    pub calls: u64,
    pub unknowns: u64,
    /// Set when the external backend failed to start and the handle fell
    /// back to the built-in solver.
    pub backend_failed: bool,
}

pub const DEFAULT_BUILTIN_LO: i64 = 0;
pub const DEFAULT_BUILTIN_HI: i64 = 64;
pub const DEFAULT_QUERY_TIMEOUT_MS: u64 = 5_000;

impl SolverHandle {
    pub fn new(backend: Backend, actors: Vec<Address>) -> Self {
        SolverHandle { backend, actors, calls: 0, unknowns: 0, backend_failed: false }
    }

    pub fn builtin(actors: Vec<Address>) -> Self {
        Self::new(
            Backend::Builtin {
                lo: BigInt::from(DEFAULT_BUILTIN_LO),
                hi: BigInt::from(DEFAULT_BUILTIN_HI),
            },
            actors,
        )
    }

    pub fn actors(&self) -> &[Address] {
        &self.actors
    }

    /// Decide satisfiability of the conjunction of `terms` over the symbols
    /// in `decls`. Never panics: backend trouble degrades to the built-in
    /// solver, and cap overruns degrade to `Unknown`.
    pub fn solve(&mut self, decls: &[SymbolDecl], terms: &[ConstraintTerm]) -> SolverResult {
        self.calls += 1;
        let result = match &self.backend {
            Backend::External { cmd, timeout_ms } => {
                match smtlib::solve_external(cmd, *timeout_ms, decls, &self.actors, terms) {
                    Ok(res) => res,
                    Err(SolverError::BackendUnavailable(_)) => {
                        self.backend_failed = true;
                        self.solve_builtin_default(decls, terms)
                    }
                    Err(e) => SolverResult::Unknown(e.to_string()),
                }
            }
            Backend::Builtin { .. } => self.solve_builtin_default(decls, terms),
        };
        if matches!(result, SolverResult::Unknown(_)) {
            self.unknowns += 1;
        }
        result
    }

    fn solve_builtin_default(
        &self,
        decls: &[SymbolDecl],
        terms: &[ConstraintTerm],
    ) -> SolverResult {
        let (lo, hi) = match &self.backend {
            Backend::Builtin { lo, hi } => (lo.clone(), hi.clone()),
            Backend::External { .. } => {
                (BigInt::from(DEFAULT_BUILTIN_LO), BigInt::from(DEFAULT_BUILTIN_HI))
            }
        };
        let mut bounds = BTreeMap::new();
        for id in symbols_of(terms) {
            match decls.get(id).map(|d| d.sort) {
                Some(Sort::Addr) => {
                    let n = self.actors.len().max(1) as i64;
                    bounds.insert(id, (BigInt::from(0), BigInt::from(n - 1)));
                }
                _ => {
                    bounds.insert(id, (lo.clone(), hi.clone()));
                }
            }
        }
        match bounded::solve_bounded_with_actors(
            terms,
            &bounds,
            decls,
            &self.actors,
            DEFAULT_DOMAIN_CAP,
        ) {
            Ok(res) => res,
            Err(e) => SolverResult::Unknown(e.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sym(i: usize) -> IntTerm {
        IntTerm::Sym(i)
    }

    fn lit(v: i64) -> IntTerm {
        IntTerm::Lit(BigInt::from(v))
    }

    fn int_decls(n: usize) -> Vec<SymbolDecl> {
        (0..n).map(|i| SymbolDecl { name: format!("x{i}"), sort: Sort::Int }).collect()
    }

    #[test]
    fn satisfiable_atom_yields_model_satisfying_it() {
        let mut h = SolverHandle::builtin(vec![]);
        let terms = vec![ConstraintTerm::Cmp(CmpOp::Gt, sym(0), lit(5))];
        match h.solve(&int_decls(1), &terms) {
            SolverResult::Sat(model) => {
                assert_eq!(eval_conjunction(&terms, &model), Some(true));
                match model.get(&0) {
                    Some(ModelValue::Int(v)) => assert!(*v > BigInt::from(5)),
                    other => panic!("bad model value {other:?}"),
                }
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn contradiction_is_unsat() {
        let mut h = SolverHandle::builtin(vec![]);
        let terms = vec![
            ConstraintTerm::Cmp(CmpOp::Gt, sym(0), lit(5)),
            ConstraintTerm::Cmp(CmpOp::Lt, sym(0), lit(3)),
        ];
        assert_eq!(h.solve(&int_decls(1), &terms), SolverResult::Unsat);
    }

    #[test]
    fn nonlinear_instance_solves_all_conjuncts() {
        let mut h = SolverHandle::builtin(vec![]);
        let terms = vec![
            ConstraintTerm::Cmp(
                CmpOp::Eq,
                IntTerm::Mul(Box::new(sym(0)), Box::new(sym(1))),
                lit(12),
            ),
            ConstraintTerm::Cmp(CmpOp::Gt, sym(0), sym(1)),
            ConstraintTerm::Cmp(CmpOp::Gt, sym(0), lit(0)),
            ConstraintTerm::Cmp(CmpOp::Gt, sym(1), lit(0)),
        ];
        match h.solve(&int_decls(2), &terms) {
            SolverResult::Sat(model) => {
                assert_eq!(eval_conjunction(&terms, &model), Some(true));
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn floor_division_rounds_toward_negative_infinity() {
        assert_eq!(floor_div(&BigInt::from(7), &BigInt::from(2)), BigInt::from(3));
        assert_eq!(floor_div(&BigInt::from(-7), &BigInt::from(2)), BigInt::from(-4));
        assert_eq!(floor_div(&BigInt::from(7), &BigInt::from(-2)), BigInt::from(-4));
        assert_eq!(floor_div(&BigInt::from(-7), &BigInt::from(-2)), BigInt::from(3));
    }

    #[test]
    fn address_atoms_enumerate_actors() {
        let a = Address::parse("0xa").unwrap();
        let b = Address::parse("0xb").unwrap();
        let mut h = SolverHandle::builtin(vec![a.clone(), b.clone()]);
        let decls = vec![SymbolDecl { name: "sender".into(), sort: Sort::Addr }];
        let terms = vec![ConstraintTerm::Not(Box::new(ConstraintTerm::AddrEq(
            AddrTerm::Sym(0),
            AddrTerm::Lit(a),
        )))];
        match h.solve(&decls, &terms) {
            SolverResult::Sat(model) => {
                assert_eq!(model.get(&0), Some(&ModelValue::Addr(b)));
            }
            other => panic!("expected sat, got {other:?}"),
        }
        // An address outside the actor set can never be matched.
        let c = Address::parse("0xc1").unwrap();
        let terms = vec![ConstraintTerm::AddrEq(AddrTerm::Sym(0), AddrTerm::Lit(c))];
        assert_eq!(h.solve(&decls, &terms), SolverResult::Unsat);
    }
}
