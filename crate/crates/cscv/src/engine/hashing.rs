//! Canonical state serialization and hashing for fixpoint detection.

use num_traits::Zero;
use sha2::{Digest, Sha256};

use super::GlobalState;
use crate::frontend::{Address, ContractAST};
use crate::value::Value;

pub type StateDigest = [u8; 32];

/// Canonical text form: state variables in declaration order, map entries
/// and actor balances in lexicographic address order. Zero-valued entries
/// under non-actor keys are dropped so that logically equal maps serialize
/// identically regardless of write history. Depth is path metadata, not
/// state content, and is excluded.
pub fn canonical_serialize(
    state: &GlobalState,
    contract: &ContractAST,
    actors: &[Address],
) -> String {
    let mut out = String::new();
    for decl in &contract.state_vars {
        out.push_str(&decl.name);
        out.push('=');
        match state.valuation.get(&decl.name) {
            Some(Value::Map(entries)) => {
                out.push('{');
                let mut first = true;
                for (addr, v) in entries {
                    if v.is_zero() && !actors.contains(addr) {
                        continue;
                    }
                    if !first {
                        out.push(',');
                    }
                    first = false;
                    out.push_str(addr.as_str());
                    out.push(':');
                    out.push_str(&v.to_string());
                }
                // Actors with no explicit entry read as zero.
                for actor in actors {
                    if !entries.contains_key(actor) {
                        if !first {
                            out.push(',');
                        }
                        first = false;
                        out.push_str(actor.as_str());
                        out.push_str(":0");
                    }
                }
                out.push('}');
            }
            Some(v) => out.push_str(&v.to_string()),
            None => out.push_str("<unset>"),
        }
        out.push(';');
    }
    out.push('|');
    let mut first = true;
    for (addr, v) in &state.actor_balances {
        if v.is_zero() && !actors.contains(addr) {
            continue;
        }
        if !first {
            out.push(',');
        }
        first = false;
        out.push_str(addr.as_str());
        out.push(':');
        out.push_str(&v.to_string());
    }
    for actor in actors {
        if !state.actor_balances.contains_key(actor) {
            if !first {
                out.push(',');
            }
            first = false;
            out.push_str(actor.as_str());
            out.push_str(":0");
        }
    }
    out
}

pub fn canonical_hash(
    state: &GlobalState,
    contract: &ContractAST,
    actors: &[Address],
) -> StateDigest {
    let text = canonical_serialize(state, contract, actors);
    let mut hasher = Sha256::new();
    hasher.update(text.as_bytes());
    hasher.finalize().into()
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use num_bigint::BigInt;

    use super::*;
    use crate::frontend::parse_contract;

    fn contract() -> ContractAST {
        parse_contract("contract H { state m: map<address, int>; state t: int; }").unwrap()
    }

    fn addr(s: &str) -> Address {
        Address::parse(s).unwrap()
    }

    #[test]
    fn insertion_order_does_not_matter() {
        let c = contract();
        let actors = vec![addr("0xa"), addr("0xb")];
        let mut m1 = BTreeMap::new();
        m1.insert(addr("0xa"), BigInt::from(5));
        m1.insert(addr("0xb"), BigInt::from(0));
        let mut m2 = BTreeMap::new();
        m2.insert(addr("0xb"), BigInt::from(0));
        m2.insert(addr("0xa"), BigInt::from(5));
        let s1 = GlobalState {
            valuation: BTreeMap::from([
                ("m".to_string(), Value::Map(m1)),
                ("t".to_string(), Value::Int(BigInt::from(1))),
            ]),
            actor_balances: BTreeMap::new(),
            depth: 0,
        };
        let mut s2 = GlobalState {
            valuation: BTreeMap::from([
                ("m".to_string(), Value::Map(m2)),
                ("t".to_string(), Value::Int(BigInt::from(1))),
            ]),
            actor_balances: BTreeMap::new(),
            depth: 3,
        };
        assert_eq!(canonical_hash(&s1, &c, &actors), canonical_hash(&s2, &c, &actors));
        // Explicit zero entries for actors equal implicit ones.
        if let Some(Value::Map(m)) = s2.valuation.get_mut("m") {
            m.remove(&addr("0xb"));
        }
        assert_eq!(canonical_hash(&s1, &c, &actors), canonical_hash(&s2, &c, &actors));
    }

    #[test]
    fn differing_entry_changes_digest() {
        let c = contract();
        let actors = vec![addr("0xa")];
        let base = GlobalState {
            valuation: BTreeMap::from([
                ("m".to_string(), Value::Map(BTreeMap::new())),
                ("t".to_string(), Value::Int(BigInt::from(1))),
            ]),
            actor_balances: BTreeMap::new(),
            depth: 0,
        };
        let mut other = base.clone();
        if let Some(Value::Map(m)) = other.valuation.get_mut("m") {
            m.insert(addr("0xa"), BigInt::from(7));
        }
        assert_ne!(canonical_hash(&base, &c, &actors), canonical_hash(&other, &c, &actors));
    }
}
