//! Built-in bounded-domain solver: exhaustive enumeration, first satisfying
//! assignment wins. Doubles as the dependency-free fallback backend and as a
//! test oracle for the external path.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_traits::One;

use super::{
    eval_conjunction, ConstraintTerm, Model, ModelValue, SolverError, SolverResult, Sort,
    SymbolDecl,
};
use crate::frontend::Address;

/// Maximum number of assignments the enumerator will visit.
pub const DEFAULT_DOMAIN_CAP: u64 = 1_000_000;

/// Enumerate assignments in lexicographic symbol/value order (symbols by id,
/// values ascending, the last symbol varying fastest) and return the first
/// satisfying one.
///
/// Every symbol occurring in `terms` must have a bound. Symbols declared
/// with the address sort are enumerated as actor indices and reported as
/// addresses in the model.
pub fn solve_bounded(
    terms: &[ConstraintTerm],
    bounds: &BTreeMap<usize, (BigInt, BigInt)>,
) -> Result<SolverResult, SolverError> {
    solve_bounded_with_actors(terms, bounds, &[], &[], DEFAULT_DOMAIN_CAP)
}

pub fn solve_bounded_with_actors(
    terms: &[ConstraintTerm],
    bounds: &BTreeMap<usize, (BigInt, BigInt)>,
    decls: &[SymbolDecl],
    actors: &[Address],
    cap: u64,
) -> Result<SolverResult, SolverError> {
    let used = super::symbols_of(terms);
    let mut ranges: Vec<(usize, BigInt, BigInt)> = Vec::new();
    let mut domain_size = BigInt::one();
    for id in &used {
        let (lo, hi) = bounds.get(id).ok_or(SolverError::UnboundedSymbol(*id))?;
        if lo > hi {
            return Ok(SolverResult::Unsat);
        }
        domain_size *= hi - lo + 1;
        ranges.push((*id, lo.clone(), hi.clone()));
    }
    if domain_size > BigInt::from(cap) {
        return Err(SolverError::DomainTooLarge(domain_size));
    }

    let mut current: Vec<BigInt> = ranges.iter().map(|(_, lo, _)| lo.clone()).collect();
    loop {
        let mut env: Model = BTreeMap::new();
        for ((id, _, _), value) in ranges.iter().zip(&current) {
            let mv = match decls.get(*id).map(|d| d.sort) {
                Some(Sort::Addr) => {
                    let idx = usize::try_from(value.clone()).unwrap_or(usize::MAX);
                    match actors.get(idx) {
                        Some(a) => ModelValue::Addr(a.clone()),
                        None => ModelValue::Int(value.clone()),
                    }
                }
                _ => ModelValue::Int(value.clone()),
            };
            env.insert(*id, mv);
        }
        // Division by zero inside a candidate just means this assignment
        // does not satisfy the conjunction.
        if eval_conjunction(terms, &env) == Some(true) {
            return Ok(SolverResult::Sat(env));
        }
        // Odometer step: last symbol varies fastest.
        let mut pos = ranges.len();
        loop {
            if pos == 0 {
                return Ok(SolverResult::Unsat);
            }
            pos -= 1;
            if current[pos] < ranges[pos].2 {
                current[pos] += 1;
                for later in pos + 1..ranges.len() {
                    current[later] = ranges[later].1.clone();
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::{CmpOp, IntTerm};

    fn sym(i: usize) -> IntTerm {
        IntTerm::Sym(i)
    }

    fn lit(v: i64) -> IntTerm {
        IntTerm::Lit(BigInt::from(v))
    }

    fn range(lo: i64, hi: i64) -> (BigInt, BigInt) {
        (BigInt::from(lo), BigInt::from(hi))
    }

    #[test]
    fn first_witness_in_order() {
        let terms = vec![ConstraintTerm::Cmp(CmpOp::Gt, sym(0), lit(5))];
        let bounds = BTreeMap::from([(0, range(0, 8))]);
        match solve_bounded(&terms, &bounds).unwrap() {
            SolverResult::Sat(m) => assert_eq!(m.get(&0), Some(&ModelValue::Int(BigInt::from(6)))),
            other => panic!("expected sat, got {other:?}"),
        }
    }

    #[test]
    fn empty_feasible_set_is_unsat() {
        let terms = vec![ConstraintTerm::Cmp(CmpOp::Gt, sym(0), lit(8))];
        let bounds = BTreeMap::from([(0, range(0, 8))]);
        assert_eq!(solve_bounded(&terms, &bounds).unwrap(), SolverResult::Unsat);
    }

    #[test]
    fn oversized_domain_is_rejected() {
        let terms = vec![ConstraintTerm::Cmp(CmpOp::Eq, sym(0), sym(1))];
        let bounds = BTreeMap::from([(0, range(0, 1999)), (1, range(0, 1999))]);
        assert!(matches!(
            solve_bounded(&terms, &bounds),
            Err(SolverError::DomainTooLarge(_))
        ));
    }

    #[test]
    fn empty_conjunction_is_sat() {
        let terms: Vec<ConstraintTerm> = vec![];
        let bounds = BTreeMap::new();
        assert!(matches!(
            solve_bounded(&terms, &bounds).unwrap(),
            SolverResult::Sat(m) if m.is_empty()
        ));
    }

    #[test]
    fn lexicographic_order_over_two_symbols() {
        // x + y == 3 with x,y in 0..=3: first hit should be x=0, y=3.
        let terms = vec![ConstraintTerm::Cmp(
            CmpOp::Eq,
            IntTerm::Add(Box::new(sym(0)), Box::new(sym(1))),
            lit(3),
        )];
        let bounds = BTreeMap::from([(0, range(0, 3)), (1, range(0, 3))]);
        match solve_bounded(&terms, &bounds).unwrap() {
            SolverResult::Sat(m) => {
                assert_eq!(m.get(&0), Some(&ModelValue::Int(BigInt::from(0))));
                assert_eq!(m.get(&1), Some(&ModelValue::Int(BigInt::from(3))));
            }
            other => panic!("expected sat, got {other:?}"),
        }
    }
}
