//! JSON report emission. Key order is fixed by construction so repeated
//! runs produce byte-identical files (timing fields aside).

use num_bigint::BigInt;
use serde_json::{json, Map, Value as Json};

use crate::analysis::{AccessSets, DependencyGraph};
use crate::context::Context;
use crate::engine::{AttackVector, GlobalState, Invocation, Stats, Verdict};
use crate::value::Value;

/// Integers render as JSON numbers when they fit an i64, decimal strings
/// beyond that.
pub fn int_json(v: &BigInt) -> Json {
    match i64::try_from(v.clone()) {
        Ok(n) => json!(n),
        Err(_) => json!(v.to_string()),
    }
}

fn value_json(v: &Value) -> Json {
    match v {
        Value::Int(n) => int_json(n),
        Value::Bool(b) => json!(b),
        Value::Addr(a) => json!(a.as_str()),
        Value::Map(m) => {
            let mut obj = Map::new();
            for (k, n) in m {
                obj.insert(k.as_str().to_string(), int_json(n));
            }
            Json::Object(obj)
        }
    }
}

fn state_json(state: &GlobalState) -> Json {
    let mut vars = Map::new();
    for (name, v) in &state.valuation {
        vars.insert(name.clone(), value_json(v));
    }
    let mut balances = Map::new();
    for (addr, v) in &state.actor_balances {
        balances.insert(addr.as_str().to_string(), int_json(v));
    }
    json!({ "vars": vars, "balances": balances })
}

fn invocation_json(inv: &Invocation) -> Json {
    json!({
        "fn": inv.function,
        "sender": inv.sender.as_str(),
        "value": int_json(&inv.value),
        "args": inv.args.iter().map(value_json).collect::<Vec<_>>(),
        "reentry": inv.reentry.iter().map(invocation_json).collect::<Vec<_>>(),
    })
}

fn vector_json(vector: &AttackVector) -> Json {
    let mut items = Vec::new();
    for (i, state) in vector.states.iter().enumerate() {
        items.push(json!({ "state": state_json(state) }));
        if let Some(inv) = vector.invocations.get(i) {
            items.push(json!({ "call": invocation_json(inv) }));
        }
    }
    Json::Array(items)
}

fn stats_json(stats: &Stats) -> Json {
    json!({
        "transitions": stats.transitions,
        "states": stats.states,
        "solver_calls": stats.solver_calls,
        "elapsed_ms": stats.elapsed_ms,
    })
}

/// The attack-vector report: the machine-readable output of one
/// verification run.
pub fn verdict_report(verdict: &Verdict, property_source: &str) -> Json {
    let (kind, reason, vector, violating_index) = match verdict {
        Verdict::Violated(v, _) => {
            ("violated", Json::Null, vector_json(v), json!(v.violating_index))
        }
        Verdict::Verified(_) => ("verified", Json::Null, json!([]), Json::Null),
        Verdict::Unknown(reason, _) => {
            ("unknown", json!(reason.as_str()), json!([]), Json::Null)
        }
    };
    json!({
        "verdict": kind,
        "reason": reason,
        "property": property_source,
        "vector": vector,
        "violating_index": violating_index,
        "stats": stats_json(verdict.stats()),
    })
}

/// Dump of access sets and dependency edges, lexicographically ordered.
pub fn deps_report(sets: &AccessSets, graph: &DependencyGraph) -> Json {
    let mut reads = Map::new();
    for (f, vars) in &sets.reads {
        reads.insert(f.clone(), json!(vars.iter().collect::<Vec<_>>()));
    }
    let mut writes = Map::new();
    for (f, vars) in &sets.writes {
        writes.insert(f.clone(), json!(vars.iter().collect::<Vec<_>>()));
    }
    let edges: Vec<Json> = graph.edges.iter().map(|(v, w)| json!([v, w])).collect();
    json!({ "reads": reads, "writes": writes, "edges": edges })
}

/// Dump of a built context: domain, valuation, rankings, heuristic ids.
pub fn context_report(context: &Context) -> Json {
    let mut valuation = Map::new();
    for (name, v) in &context.evaluation.valuation {
        valuation.insert(name.clone(), value_json(v));
    }
    let mut relevance = Map::new();
    for (f, ranked) in &context.relevance.ranked {
        relevance.insert(f.clone(), json!(ranked));
    }
    json!({
        "block": context.evaluation.block,
        "domain": context.evaluation.domain.iter().collect::<Vec<_>>(),
        "valuation": valuation,
        "initial_ranking": context.relevance.initial,
        "relevance": relevance,
        "heuristics": context.heuristics.ids(),
    })
}

pub fn write_pretty(json: &Json) -> String {
    let mut text = serde_json::to_string_pretty(json).expect("reports serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn big_integers_become_strings() {
        let small = BigInt::from(42);
        let big = BigInt::from(2).pow(200);
        assert_eq!(int_json(&small), json!(42));
        assert_eq!(int_json(&big), json!(big.to_string()));
    }

    #[test]
    fn verdict_report_field_order_is_stable() {
        let verdict = Verdict::Verified(Stats::default());
        let text = write_pretty(&verdict_report(&verdict, "always x >= 0"));
        let verdict_pos = text.find("\"verdict\"").unwrap();
        let reason_pos = text.find("\"reason\"").unwrap();
        let property_pos = text.find("\"property\"").unwrap();
        let vector_pos = text.find("\"vector\"").unwrap();
        let stats_pos = text.find("\"stats\"").unwrap();
        assert!(verdict_pos < reason_pos);
        assert!(reason_pos < property_pos);
        assert!(property_pos < vector_pos);
        assert!(vector_pos < stats_pos);
    }
}
