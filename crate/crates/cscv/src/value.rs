//! Runtime values shared by the context builder, the engine, and the
//! reference interpreter.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::Zero;

use crate::frontend::{Address, Literal, VarType};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Value {
    Int(BigInt),
    Bool(bool),
    Addr(Address),
    /// Map values store explicit entries; readers treat missing keys as 0.
    Map(BTreeMap<Address, BigInt>),
}

impl Value {
    pub fn ty(&self) -> VarType {
        match self {
            Value::Int(_) => VarType::Int,
            Value::Bool(_) => VarType::Bool,
            Value::Addr(_) => VarType::Address,
            Value::Map(_) => VarType::MapAddrInt,
        }
    }

    pub fn zero_of(ty: VarType) -> Value {
        match ty {
            VarType::Int => Value::Int(BigInt::zero()),
            VarType::Bool => Value::Bool(false),
            VarType::Address => Value::Addr(Address::parse("0x0").expect("static address")),
            VarType::MapAddrInt => Value::Map(BTreeMap::new()),
        }
    }

    pub fn from_literal(lit: &Literal) -> Value {
        match lit {
            Literal::Int(v) => Value::Int(v.clone()),
            Literal::Bool(b) => Value::Bool(*b),
            Literal::Addr(a) => Value::Addr(a.clone()),
        }
    }

    pub fn as_int(&self) -> Option<&BigInt> {
        match self {
            Value::Int(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_bool(&self) -> Option<bool> {
        match self {
            Value::Bool(b) => Some(*b),
            _ => None,
        }
    }

    pub fn as_addr(&self) -> Option<&Address> {
        match self {
            Value::Addr(a) => Some(a),
            _ => None,
        }
    }

    /// Map read with the zero default.
    pub fn map_get(&self, key: &Address) -> BigInt {
        match self {
            Value::Map(m) => m.get(key).cloned().unwrap_or_else(BigInt::zero),
            _ => BigInt::zero(),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(v) => write!(f, "{v}"),
            Value::Bool(b) => write!(f, "{b}"),
            Value::Addr(a) => write!(f, "{a}"),
            Value::Map(m) => {
                write!(f, "{{")?;
                for (i, (k, v)) in m.iter().enumerate() {
                    if i > 0 {
                        write!(f, ", ")?;
                    }
                    write!(f, "{k}: {v}")?;
                }
                write!(f, "}}")
            }
        }
    }
}
