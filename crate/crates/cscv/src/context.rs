//! Context construction: the smallest evaluation function for a property
//! and the relevance ranking of external write functions.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use thiserror::Error;

use crate::analysis::{access_sets, dependency_closure, shared_variable_count, AccessSets};
use crate::frontend::{
    snap_to_literal, Address, BlockSnapshot, ContractAST, SnapValue, TemporalProperty, VarType,
};
use crate::optimization::HeuristicSet;
use crate::value::Value;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ContextError {
    #[error("no snapshot value or initializer for `{0}` (pass --default-zero to zero-fill)")]
    MissingValue(String),
    #[error("contract declares no external functions")]
    NoExternalFunctions,
}

/// The property-relevant slice of state at one block: values for exactly
/// the dependency closure of the property's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvaluationFunction {
    pub block: u64,
    pub domain: BTreeSet<String>,
    pub valuation: BTreeMap<String, Value>,
}

/// For each external function, the other external functions ranked by
/// shared-variable count; plus the ranking used before the first transition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelevanceFunction {
    pub ranked: BTreeMap<String, Vec<String>>,
    pub initial: Vec<String>,
}

impl RelevanceFunction {
    /// Candidate order out of a state reached via `arrived_by`.
    pub fn order_after(&self, arrived_by: Option<&str>) -> &[String] {
        match arrived_by.and_then(|f| self.ranked.get(f)) {
            Some(list) => list,
            None => &self.initial,
        }
    }
}

/// Everything the engine needs to steer one verification run.
#[derive(Debug, Clone)]
pub struct Context {
    pub evaluation: EvaluationFunction,
    pub relevance: RelevanceFunction,
    pub heuristics: HeuristicSet,
    pub property: TemporalProperty,
}

fn materialize_map(
    entries: Option<&BTreeMap<Address, BigInt>>,
    actors: &[Address],
) -> BTreeMap<Address, BigInt> {
    let mut map = entries.cloned().unwrap_or_default();
    for actor in actors {
        map.entry(actor.clone()).or_insert_with(num_traits::Zero::zero);
    }
    map
}

/// Pull one variable's value from snapshot, then initializer, then the
/// optional zero default.
fn resolve_value(
    name: &str,
    ty: VarType,
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
    default_zero: bool,
) -> Result<Value, ContextError> {
    if ty == VarType::MapAddrInt {
        let entries = match snapshot.state.get(name) {
            Some(SnapValue::Map(m)) => Some(m),
            _ => None,
        };
        return Ok(Value::Map(materialize_map(entries, &snapshot.actors)));
    }
    if let Some(v) = snapshot.state.get(name) {
        if let Some(lit) = snap_to_literal(v) {
            return Ok(Value::from_literal(&lit));
        }
    }
    if let Some(init) = contract.state_var(name).and_then(|v| v.init.as_ref()) {
        return Ok(Value::from_literal(init));
    }
    if default_zero {
        return Ok(Value::zero_of(ty));
    }
    Err(ContextError::MissingValue(name.to_string()))
}

/// Build the smallest evaluation function for the property: its domain is
/// the dependency closure of the property's variables, nothing more.
pub fn build_evaluation_function(
    property: &TemporalProperty,
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
    default_zero: bool,
) -> Result<EvaluationFunction, ContextError> {
    let seed: BTreeSet<String> = property.referenced_vars().into_iter().collect();
    let domain = dependency_closure(&seed, contract);
    let mut valuation = BTreeMap::new();
    for name in &domain {
        let ty = contract.state_var(name).map(|v| v.ty).unwrap_or(VarType::Int);
        valuation.insert(
            name.clone(),
            resolve_value(name, ty, contract, snapshot, default_zero)?,
        );
    }
    Ok(EvaluationFunction { block: snapshot.block, domain, valuation })
}

/// Rank `candidates` by descending count, ties broken lexicographically.
fn rank_by_counts(mut scored: Vec<(String, usize)>) -> Vec<String> {
    scored.sort_by(|(fa, ca), (fb, cb)| cb.cmp(ca).then_with(|| fa.cmp(fb)));
    scored.into_iter().map(|(f, _)| f).collect()
}

fn relevance_from_sets(
    contract: &ContractAST,
    sets: &AccessSets,
    evaluation: &EvaluationFunction,
) -> Result<RelevanceFunction, ContextError> {
    let externals: Vec<String> =
        contract.external_functions().map(|f| f.name.clone()).collect();
    if externals.is_empty() {
        return Err(ContextError::NoExternalFunctions);
    }
    let mut ranked = BTreeMap::new();
    for f in &externals {
        let scored: Vec<(String, usize)> = externals
            .iter()
            .filter(|g| *g != f)
            .map(|g| {
                let count = shared_variable_count(f, g, sets)
                    .expect("distinct validated externals");
                (g.clone(), count)
            })
            .collect();
        ranked.insert(f.clone(), rank_by_counts(scored));
    }
    let initial = rank_by_counts(
        externals
            .iter()
            .map(|f| {
                let overlap = sets.touched(f).intersection(&evaluation.domain).count();
                (f.clone(), overlap)
            })
            .collect(),
    );
    Ok(RelevanceFunction { ranked, initial })
}

/// Build the relevance function from shared-variable counts, with the
/// initial ranking driven by overlap with the evaluation function's domain.
pub fn build_relevance_function(
    contract: &ContractAST,
    evaluation: &EvaluationFunction,
) -> Result<RelevanceFunction, ContextError> {
    relevance_from_sets(contract, &access_sets(contract), evaluation)
}

/// Compose both builders and attach the selected heuristics.
pub fn build_context(
    property: &TemporalProperty,
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
    heuristics: HeuristicSet,
    default_zero: bool,
) -> Result<Context, ContextError> {
    let evaluation = build_evaluation_function(property, contract, snapshot, default_zero)?;
    let relevance = build_relevance_function(contract, &evaluation)?;
    Ok(Context { evaluation, relevance, heuristics, property: property.clone() })
}

/// Degenerate context for contracts without external functions: the
/// transition relation is empty, so verification reduces to checking the
/// initial state.
pub fn build_context_without_externals(
    property: &TemporalProperty,
    contract: &ContractAST,
    snapshot: &BlockSnapshot,
    default_zero: bool,
) -> Result<Context, ContextError> {
    let evaluation = build_evaluation_function(property, contract, snapshot, default_zero)?;
    Ok(Context {
        evaluation,
        relevance: RelevanceFunction { ranked: BTreeMap::new(), initial: Vec::new() },
        heuristics: HeuristicSet::empty(),
        property: property.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::{parse_contract, parse_property, parse_snapshot};

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

    const SNAP: &str = r#"{"block":0,"state":{"total":5,"balances":{"0xA":5}},"actors":["0xA","0xB"],"attacker":"0xA"}"#;

    fn vault_setup() -> (ContractAST, TemporalProperty, BlockSnapshot) {
        let c = parse_contract(VAULT).unwrap();
        let p = parse_property("always total >= 0", &c).unwrap();
        let s = parse_snapshot(SNAP, &c).unwrap();
        (c, p, s)
    }

    #[test]
    fn vault_evaluation_function_covers_closure() {
        let (c, p, s) = vault_setup();
        let ev = build_evaluation_function(&p, &c, &s, false).unwrap();
        let domain: Vec<_> = ev.domain.iter().map(String::as_str).collect();
        assert_eq!(domain, vec!["balances", "total"]);
        assert_eq!(ev.valuation.get("total"), Some(&Value::Int(BigInt::from(5))));
        match ev.valuation.get("balances").unwrap() {
            Value::Map(m) => {
                assert_eq!(m.get(&Address::parse("0xa").unwrap()), Some(&BigInt::from(5)));
                assert_eq!(m.get(&Address::parse("0xb").unwrap()), Some(&BigInt::from(0)));
            }
            other => panic!("wrong shape {other:?}"),
        }
    }

    #[test]
    fn extraneous_snapshot_variables_are_excluded() {
        let c = parse_contract(
            "contract X { state a: int; state noise: int; external fn f(v: int) { a = v; } }",
        )
        .unwrap();
        let p = parse_property("always a >= 0", &c).unwrap();
        let s = parse_snapshot(
            r#"{"block":0,"state":{"a":1,"noise":9},"actors":["0xA"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap();
        let ev = build_evaluation_function(&p, &c, &s, false).unwrap();
        assert_eq!(ev.domain.len(), 1);
        assert!(!ev.valuation.contains_key("noise"));
    }

    #[test]
    fn missing_uninitialized_value_is_an_error() {
        let c = parse_contract("contract X { state flag: bool; external fn f() { flag = true; } }")
            .unwrap();
        let p = parse_property("always flag", &c).unwrap();
        let s = parse_snapshot(r#"{"block":0,"state":{},"actors":["0xA"],"attacker":"0xA"}"#, &c)
            .unwrap();
        assert_eq!(
            build_evaluation_function(&p, &c, &s, false),
            Err(ContextError::MissingValue("flag".into()))
        );
        // The zero default is opt-in.
        let ev = build_evaluation_function(&p, &c, &s, true).unwrap();
        assert_eq!(ev.valuation.get("flag"), Some(&Value::Bool(false)));
    }

    #[test]
    fn vault_relevance_rankings() {
        let (c, p, s) = vault_setup();
        let ev = build_evaluation_function(&p, &c, &s, false).unwrap();
        let rel = build_relevance_function(&c, &ev).unwrap();
        assert_eq!(rel.ranked.get("withdraw").unwrap(), &vec!["deposit".to_string()]);
        assert_eq!(rel.ranked.get("deposit").unwrap(), &vec!["withdraw".to_string()]);
        // Both overlap the domain {balances, total} with count 2; the tie
        // breaks lexicographically.
        assert_eq!(rel.initial, vec!["deposit".to_string(), "withdraw".to_string()]);
    }

    #[test]
    fn singleton_external_has_empty_ranking() {
        let c = parse_contract("contract S { state a: int; external fn only(v: int) { a = v; } }")
            .unwrap();
        let p = parse_property("always a >= 0", &c).unwrap();
        let s = parse_snapshot(r#"{"block":0,"state":{"a":0},"actors":["0xA"],"attacker":"0xA"}"#, &c)
            .unwrap();
        let ev = build_evaluation_function(&p, &c, &s, false).unwrap();
        let rel = build_relevance_function(&c, &ev).unwrap();
        assert_eq!(rel.ranked.get("only").unwrap(), &Vec::<String>::new());
    }

    #[test]
    fn equal_counts_rank_lexicographically() {
        let c = parse_contract(
            "contract T { state a: int;
               external fn cc(v: int) { a = v; }
               external fn aa(v: int) { a = v; }
               external fn bb(v: int) { a = v; } }",
        )
        .unwrap();
        let p = parse_property("always a >= 0", &c).unwrap();
        let s = parse_snapshot(r#"{"block":0,"state":{"a":0},"actors":["0xA"],"attacker":"0xA"}"#, &c)
            .unwrap();
        let ev = build_evaluation_function(&p, &c, &s, false).unwrap();
        let rel = build_relevance_function(&c, &ev).unwrap();
        assert_eq!(rel.ranked.get("aa").unwrap(), &vec!["bb".to_string(), "cc".to_string()]);
        assert_eq!(rel.initial, vec!["aa".to_string(), "bb".to_string(), "cc".to_string()]);
    }

    #[test]
    fn no_externals_is_an_error() {
        let c = parse_contract("contract N { state a: int = 0; }").unwrap();
        let p = parse_property("always a >= 0", &c).unwrap();
        let s = parse_snapshot(r#"{"block":0,"state":{},"actors":["0xA"],"attacker":"0xA"}"#, &c)
            .unwrap();
        assert_eq!(
            build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap_err(),
            ContextError::NoExternalFunctions
        );
    }

    #[test]
    fn context_building_is_deterministic() {
        let (c, p, s) = vault_setup();
        let a = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        let b = build_context(&p, &c, &s, HeuristicSet::empty(), false).unwrap();
        assert_eq!(a.evaluation, b.evaluation);
        assert_eq!(a.relevance, b.relevance);
    }
}
