//! Trace monitor: direct evaluation of `always`-properties over executed
//! traces. This is the reference semantics the spatialized postconditions
//! are checked against, so it deliberately shares no code with the
//! instrumentation path.

use num_bigint::BigInt;
use num_traits::Zero;

use crate::engine::GlobalState;
use crate::frontend::{
    Address, BinOp, Literal, PropExpr, PropKey, PropLValue, TemporalProperty, UnOp,
};
use crate::value::Value;

fn read_lvalue(lv: &PropLValue, state: &GlobalState, attacker: &Address) -> Value {
    match lv {
        PropLValue::Var(name) => {
            state.valuation.get(name).cloned().unwrap_or(Value::Int(BigInt::zero()))
        }
        PropLValue::MapEntry { map, key } => {
            let addr = match key {
                PropKey::Addr(a) => a.clone(),
                PropKey::Attacker => attacker.clone(),
            };
            Value::Int(
                state
                    .valuation
                    .get(map)
                    .map(|m| m.map_get(&addr))
                    .unwrap_or_else(BigInt::zero),
            )
        }
    }
}

fn eval(
    e: &PropExpr,
    pre: Option<&GlobalState>,
    post: &GlobalState,
    attacker: &Address,
) -> Option<Value> {
    match e {
        PropExpr::Lit(Literal::Int(v)) => Some(Value::Int(v.clone())),
        PropExpr::Lit(Literal::Bool(b)) => Some(Value::Bool(*b)),
        PropExpr::Lit(Literal::Addr(a)) => Some(Value::Addr(a.clone())),
        PropExpr::State(lv) => Some(read_lvalue(lv, post, attacker)),
        PropExpr::Old(lv) => pre.map(|p| read_lvalue(lv, p, attacker)),
        PropExpr::Unary(UnOp::Neg, a) => match eval(a, pre, post, attacker)? {
            Value::Int(v) => Some(Value::Int(-v)),
            _ => None,
        },
        PropExpr::Unary(UnOp::Not, a) => match eval(a, pre, post, attacker)? {
            Value::Bool(b) => Some(Value::Bool(!b)),
            _ => None,
        },
        PropExpr::Implies(a, b) => match eval(a, pre, post, attacker)? {
            Value::Bool(false) => Some(Value::Bool(true)),
            Value::Bool(true) => eval(b, pre, post, attacker),
            _ => None,
        },
        PropExpr::Binary(op, a, b) => {
            let x = eval(a, pre, post, attacker)?;
            let y = eval(b, pre, post, attacker)?;
            match (op, x, y) {
                (BinOp::Add, Value::Int(x), Value::Int(y)) => Some(Value::Int(x + y)),
                (BinOp::Sub, Value::Int(x), Value::Int(y)) => Some(Value::Int(x - y)),
                (BinOp::Mul, Value::Int(x), Value::Int(y)) => Some(Value::Int(x * y)),
                (BinOp::Div, Value::Int(x), Value::Int(y)) => {
                    if y.is_zero() {
                        return None;
                    }
                    // Floor division, written out independently of the
                    // engine's arithmetic helpers.
                    let q = &x / &y;
                    let r = &x - &q * &y;
                    let q = if !r.is_zero() && (r.sign() != y.sign()) { q - 1 } else { q };
                    Some(Value::Int(q))
                }
                (BinOp::And, Value::Bool(x), Value::Bool(y)) => Some(Value::Bool(x && y)),
                (BinOp::Or, Value::Bool(x), Value::Bool(y)) => Some(Value::Bool(x || y)),
                (BinOp::Eq, x, y) => Some(Value::Bool(x == y)),
                (BinOp::Ne, x, y) => Some(Value::Bool(x != y)),
                (BinOp::Lt, Value::Int(x), Value::Int(y)) => Some(Value::Bool(x < y)),
                (BinOp::Le, Value::Int(x), Value::Int(y)) => Some(Value::Bool(x <= y)),
                (BinOp::Gt, Value::Int(x), Value::Int(y)) => Some(Value::Bool(x > y)),
                (BinOp::Ge, Value::Int(x), Value::Int(y)) => Some(Value::Bool(x >= y)),
                _ => None,
            }
        }
    }
}

/// Does the predicate hold over a transition? `pre` feeds the old-terms;
/// an undefined result (division by zero, missing old-state) counts as a
/// violation, matching the instrumented checks.
pub fn pred_holds(
    pred: &PropExpr,
    pre: Option<&GlobalState>,
    post: &GlobalState,
    attacker: &Address,
) -> bool {
    matches!(eval(pred, pre, post, attacker), Some(Value::Bool(true)))
}

/// Evaluate ALWAYS(pred) over a finite trace: the initial state (when the
/// predicate has no old-terms) and every transition's post-state. Returns
/// the index of the first violating state, counting the initial state as 0.
pub fn first_violation(
    property: &TemporalProperty,
    initial: &GlobalState,
    transitions: &[(GlobalState, GlobalState)],
    attacker: &Address,
) -> Option<usize> {
    if !property.has_old() && !pred_holds(&property.pred, None, initial, attacker) {
        return Some(0);
    }
    for (i, (pre, post)) in transitions.iter().enumerate() {
        if !pred_holds(&property.pred, Some(pre), post, attacker) {
            return Some(i + 1);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::frontend::{parse_contract, parse_property};

    fn state(total: i64) -> GlobalState {
        GlobalState {
            valuation: BTreeMap::from([("total".to_string(), Value::Int(BigInt::from(total)))]),
            actor_balances: BTreeMap::new(),
            depth: 0,
        }
    }

    #[test]
    fn state_property_checks_posts() {
        let c = parse_contract("contract T { state total: int; }").unwrap();
        let p = parse_property("always total >= 0", &c).unwrap();
        let attacker = Address::parse("0xa").unwrap();
        let trace = vec![(state(5), state(3)), (state(3), state(-1))];
        assert_eq!(first_violation(&p, &state(5), &trace, &attacker), Some(2));
    }

    #[test]
    fn step_property_uses_pre_state() {
        let c = parse_contract("contract T { state total: int; }").unwrap();
        let p = parse_property("always total >= old(total)", &c).unwrap();
        let attacker = Address::parse("0xa").unwrap();
        // Non-decreasing run holds, a drop violates.
        let good = vec![(state(1), state(2)), (state(2), state(2))];
        assert_eq!(first_violation(&p, &state(1), &good, &attacker), None);
        let bad = vec![(state(1), state(2)), (state(2), state(1))];
        assert_eq!(first_violation(&p, &state(1), &bad, &attacker), Some(2));
    }

    #[test]
    fn initial_state_checked_only_without_old() {
        let c = parse_contract("contract T { state total: int; }").unwrap();
        let attacker = Address::parse("0xa").unwrap();
        let plain = parse_property("always total >= 0", &c).unwrap();
        assert_eq!(first_violation(&plain, &state(-5), &[], &attacker), Some(0));
        let step = parse_property("always total >= old(total)", &c).unwrap();
        assert_eq!(first_violation(&step, &state(-5), &[], &attacker), None);
    }
}
