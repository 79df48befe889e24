//! Block snapshots: a typed valuation of state variables at one block,
//! supplied as JSON.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use serde_json::Value as Json;

use super::ast::{Address, ContractAST, Literal, VarType};
use super::FrontendError;

/// Scalar or map snapshot value. Map keys absent from the file default to
/// zero when read.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SnapValue {
    Int(BigInt),
    Bool(bool),
    Addr(Address),
    Map(BTreeMap<Address, BigInt>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockSnapshot {
    pub block: u64,
    pub state: BTreeMap<String, SnapValue>,
    pub actors: Vec<Address>,
    pub attacker: Address,
}

impl BlockSnapshot {
    pub fn scalar(&self, name: &str) -> Option<&SnapValue> {
        self.state.get(name)
    }
}

pub fn parse(source: &str, contract: &ContractAST) -> Result<BlockSnapshot, FrontendError> {
    let json: Json = serde_json::from_str(source)
        .map_err(|e| FrontendError::SnapshotJson(e.to_string()))?;
    let obj = json
        .as_object()
        .ok_or_else(|| FrontendError::SnapshotJson("top level must be an object".into()))?;

    let block = match obj.get("block") {
        Some(Json::Number(n)) if n.as_u64().is_some() => n.as_u64().unwrap(),
        _ => {
            return Err(FrontendError::TypeMismatch {
                name: "block".into(),
                expected: "a non-negative integer".into(),
            })
        }
    };

    let actors_json = obj
        .get("actors")
        .and_then(Json::as_array)
        .ok_or_else(|| FrontendError::SnapshotJson("`actors` must be an array".into()))?;
    let mut actors = Vec::new();
    for a in actors_json {
        actors.push(parse_address(a)?);
    }
    let attacker = parse_address(obj.get("attacker").unwrap_or(&Json::Null))?;
    if !actors.contains(&attacker) {
        return Err(FrontendError::AttackerNotInActors(attacker.to_string()));
    }

    let state_json = obj
        .get("state")
        .and_then(Json::as_object)
        .ok_or_else(|| FrontendError::SnapshotJson("`state` must be an object".into()))?;
    let mut state = BTreeMap::new();
    for (name, value) in state_json {
        let decl = contract
            .state_var(name)
            .ok_or_else(|| FrontendError::UnknownVariable(name.clone()))?;
        let typed = decode_value(name, decl.ty, value)?;
        state.insert(name.clone(), typed);
    }

    Ok(BlockSnapshot { block, state, actors, attacker })
}

fn parse_address(value: &Json) -> Result<Address, FrontendError> {
    let text = value
        .as_str()
        .ok_or_else(|| FrontendError::MalformedAddress(value.to_string()))?;
    Address::parse(text).ok_or_else(|| FrontendError::MalformedAddress(text.to_string()))
}

/// Integers are accepted as JSON numbers or as decimal strings (for values
/// beyond the double-precision range).
fn parse_int(name: &str, value: &Json) -> Result<BigInt, FrontendError> {
    match value {
        Json::Number(n) => {
            if let Some(v) = n.as_i64() {
                return Ok(BigInt::from(v));
            }
            if let Some(v) = n.as_u64() {
                return Ok(BigInt::from(v));
            }
            Err(FrontendError::TypeMismatch {
                name: name.to_string(),
                expected: "an integer (no fractional part)".into(),
            })
        }
        Json::String(s) => s.parse().map_err(|_| FrontendError::TypeMismatch {
            name: name.to_string(),
            expected: "a decimal integer string".into(),
        }),
        _ => Err(FrontendError::TypeMismatch {
            name: name.to_string(),
            expected: "an integer".into(),
        }),
    }
}

fn decode_value(name: &str, ty: VarType, value: &Json) -> Result<SnapValue, FrontendError> {
    match ty {
        VarType::Int => Ok(SnapValue::Int(parse_int(name, value)?)),
        VarType::Bool => match value {
            Json::Bool(b) => Ok(SnapValue::Bool(*b)),
            _ => Err(FrontendError::TypeMismatch {
                name: name.to_string(),
                expected: "a boolean".into(),
            }),
        },
        VarType::Address => Ok(SnapValue::Addr(parse_address(value)?)),
        VarType::MapAddrInt => {
            let obj = value.as_object().ok_or_else(|| FrontendError::TypeMismatch {
                name: name.to_string(),
                expected: "an object mapping addresses to integers".into(),
            })?;
            let mut map = BTreeMap::new();
            for (key, entry) in obj {
                let addr = Address::parse(key)
                    .ok_or_else(|| FrontendError::MalformedAddress(key.clone()))?;
                map.insert(addr, parse_int(&format!("{name}[{key}]"), entry)?);
            }
            Ok(SnapValue::Map(map))
        }
    }
}

/// Convert a snapshot scalar to a literal of the corresponding type.
pub fn snap_to_literal(value: &SnapValue) -> Option<Literal> {
    match value {
        SnapValue::Int(v) => Some(Literal::Int(v.clone())),
        SnapValue::Bool(b) => Some(Literal::Bool(*b)),
        SnapValue::Addr(a) => Some(Literal::Addr(a.clone())),
        SnapValue::Map(_) => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::parse_contract;

    fn vault() -> ContractAST {
        parse_contract(
            "contract Vault { state balances: map<address, int>; state total: int; }",
        )
        .unwrap()
    }

    #[test]
    fn decodes_with_defaulted_map_keys() {
        let c = vault();
        let s = parse(
            r#"{"block":0,"state":{"total":5,"balances":{"0xA":5}},"actors":["0xA","0xB"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap();
        assert_eq!(s.block, 0);
        match s.state.get("total").unwrap() {
            SnapValue::Int(v) => assert_eq!(*v, BigInt::from(5)),
            other => panic!("wrong type: {other:?}"),
        }
        match s.state.get("balances").unwrap() {
            SnapValue::Map(m) => {
                assert_eq!(m.get(&Address::parse("0xa").unwrap()), Some(&BigInt::from(5)));
                // 0xB is simply absent; readers default it to zero.
                assert_eq!(m.get(&Address::parse("0xb").unwrap()), None);
            }
            other => panic!("wrong type: {other:?}"),
        }
    }

    #[test]
    fn type_mismatch_is_reported() {
        let c = vault();
        let err = parse(
            r#"{"block":0,"state":{"total":true},"actors":["0xA"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::TypeMismatch { name, .. } if name == "total"));
    }

    #[test]
    fn attacker_must_be_an_actor() {
        let c = vault();
        let err = parse(
            r#"{"block":0,"state":{},"actors":["0xA"],"attacker":"0xB"}"#,
            &c,
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::AttackerNotInActors(_)));
    }

    #[test]
    fn malformed_address_is_reported() {
        let c = vault();
        let err = parse(
            r#"{"block":0,"state":{},"actors":["0xZZ"],"attacker":"0xZZ"}"#,
            &c,
        )
        .unwrap_err();
        assert!(matches!(err, FrontendError::MalformedAddress(_)));
    }

    #[test]
    fn big_integers_roundtrip_via_strings() {
        let c = parse_contract("contract B { state huge: int; }").unwrap();
        let s = parse(
            r#"{"block":1,"state":{"huge":"115792089237316195423570985008687907853269984665640564039457584007913129639936"},"actors":["0xA"],"attacker":"0xA"}"#,
            &c,
        )
        .unwrap();
        match s.state.get("huge").unwrap() {
            SnapValue::Int(v) => assert_eq!(*v, BigInt::from(2).pow(256)),
            other => panic!("wrong type: {other:?}"),
        }
    }
}
