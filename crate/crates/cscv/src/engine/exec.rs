//! Concolic execution of one invocation: concrete semantics with symbolic
//! shadows for every attacker-controlled input.

use std::collections::{BTreeMap, HashSet, VecDeque};

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};

use super::{
    BranchKind, BranchRecord, GlobalState, Invocation, SymbolRole, SymbolicTrace, TraceSymbol,
};
use crate::frontend::{
    Address, BinOp, Expr, FnKind, FunctionDecl, LValue, Literal, PropKey, PropLValue, Stmt, UnOp,
    VarType,
};
use crate::optimization::{InstrumentedContract, PostExpr};
use crate::solver::{
    floor_div, floor_mod, AddrTerm, CmpOp, ConstraintTerm, IntTerm, ModelValue, Sort, SymbolDecl,
};
use crate::value::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Ok,
    RequireFailed,
    Trap,
    PostconditionViolated,
}

#[derive(Debug)]
pub struct StepResult {
    pub post: GlobalState,
    pub trace: SymbolicTrace,
    pub outcome: Outcome,
}

#[derive(Debug, Clone)]
pub struct ExecEnv<'a> {
    pub instrumented: &'a InstrumentedContract,
    pub attacker: Address,
    pub actors: Vec<Address>,
    pub reentry_depth: u32,
}

/// Concrete value paired with its symbolic shadow.
#[derive(Debug, Clone)]
enum SymVal {
    Int(BigInt, IntTerm),
    Bool(bool, ConstraintTerm),
    Addr(Address, AddrTerm),
}

/// Symbolic shadow of one state variable.
#[derive(Debug, Clone)]
enum SymSlot {
    Int(IntTerm),
    Bool(ConstraintTerm),
    Addr(AddrTerm),
    Map(BTreeMap<Address, IntTerm>),
}

#[derive(Debug)]
enum Abort {
    RequireFailed,
    Trap,
}

enum Flow {
    Normal,
    Return(Option<SymVal>),
}

// Smart constructors fold literal operands so constant subexpressions never
// reach the solver.

fn ilit(v: &BigInt) -> IntTerm {
    IntTerm::Lit(v.clone())
}

fn iadd(a: IntTerm, b: IntTerm) -> IntTerm {
    match (&a, &b) {
        (IntTerm::Lit(x), IntTerm::Lit(y)) => IntTerm::Lit(x + y),
        _ => IntTerm::Add(Box::new(a), Box::new(b)),
    }
}

fn isub(a: IntTerm, b: IntTerm) -> IntTerm {
    match (&a, &b) {
        (IntTerm::Lit(x), IntTerm::Lit(y)) => IntTerm::Lit(x - y),
        _ => IntTerm::Sub(Box::new(a), Box::new(b)),
    }
}

fn imul(a: IntTerm, b: IntTerm) -> IntTerm {
    match (&a, &b) {
        (IntTerm::Lit(x), IntTerm::Lit(y)) => IntTerm::Lit(x * y),
        _ => IntTerm::Mul(Box::new(a), Box::new(b)),
    }
}

fn idiv(a: IntTerm, b: IntTerm) -> IntTerm {
    match (&a, &b) {
        (IntTerm::Lit(x), IntTerm::Lit(y)) if !y.is_zero() => IntTerm::Lit(floor_div(x, y)),
        _ => IntTerm::FloorDiv(Box::new(a), Box::new(b)),
    }
}

fn imod(a: IntTerm, b: IntTerm) -> IntTerm {
    match (&a, &b) {
        (IntTerm::Lit(x), IntTerm::Lit(y)) if !y.is_zero() => IntTerm::Lit(floor_mod(x, y)),
        _ => IntTerm::Mod(Box::new(a), Box::new(b)),
    }
}

fn cand(a: ConstraintTerm, b: ConstraintTerm) -> ConstraintTerm {
    match (&a, &b) {
        (ConstraintTerm::Lit(true), _) => b,
        (_, ConstraintTerm::Lit(true)) => a,
        (ConstraintTerm::Lit(false), _) | (_, ConstraintTerm::Lit(false)) => {
            ConstraintTerm::Lit(false)
        }
        _ => ConstraintTerm::And(Box::new(a), Box::new(b)),
    }
}

fn cor(a: ConstraintTerm, b: ConstraintTerm) -> ConstraintTerm {
    match (&a, &b) {
        (ConstraintTerm::Lit(false), _) => b,
        (_, ConstraintTerm::Lit(false)) => a,
        (ConstraintTerm::Lit(true), _) | (_, ConstraintTerm::Lit(true)) => {
            ConstraintTerm::Lit(true)
        }
        _ => ConstraintTerm::Or(Box::new(a), Box::new(b)),
    }
}

fn ccmp(op: CmpOp, a: IntTerm, b: IntTerm) -> ConstraintTerm {
    match (&a, &b) {
        (IntTerm::Lit(x), IntTerm::Lit(y)) => ConstraintTerm::Lit(op.apply(x, y)),
        _ => ConstraintTerm::Cmp(op, a, b),
    }
}

fn caddr_eq(a: AddrTerm, b: AddrTerm) -> ConstraintTerm {
    match (&a, &b) {
        (AddrTerm::Lit(x), AddrTerm::Lit(y)) => ConstraintTerm::Lit(x == y),
        _ => ConstraintTerm::AddrEq(a, b),
    }
}

struct Frame {
    params: BTreeMap<String, SymVal>,
    sender: (Address, AddrTerm),
    value: (BigInt, IntTerm),
    reentry: VecDeque<Invocation>,
    consumed: usize,
    nesting: u32,
    path: Vec<usize>,
}

struct Machine<'a> {
    env: &'a ExecEnv<'a>,
    wrap: Option<BigInt>,
    state: GlobalState,
    sym: BTreeMap<String, SymSlot>,
    symbols: Vec<TraceSymbol>,
    constraints: Vec<ConstraintTerm>,
    branch_log: Vec<BranchRecord>,
    pins: HashSet<(usize, Address)>,
}

fn does_body_read_value(f: &FunctionDecl, contract: &crate::frontend::ContractAST) -> bool {
    fn expr_reads(e: &Expr, c: &crate::frontend::ContractAST) -> bool {
        match e {
            Expr::MsgValue => true,
            Expr::Lit(_) | Expr::Ident(_) | Expr::MsgSender => false,
            Expr::MapIndex { key, .. } => expr_reads(key, c),
            Expr::ViewCall(name) => c
                .function(name)
                .map(|g| g.body.iter().any(|s| stmt_reads(s, c)))
                .unwrap_or(false),
            Expr::Unary(_, a) => expr_reads(a, c),
            Expr::Binary(_, a, b) => expr_reads(a, c) || expr_reads(b, c),
        }
    }
    fn stmt_reads(s: &Stmt, c: &crate::frontend::ContractAST) -> bool {
        match s {
            Stmt::Require(e) => expr_reads(e, c),
            Stmt::Assign { target, value } => {
                let key = matches!(target, LValue::MapEntry { key, .. } if expr_reads(key, c));
                key || expr_reads(value, c)
            }
            Stmt::Call { target, amount } => expr_reads(target, c) || expr_reads(amount, c),
            Stmt::If { cond, then_body, else_body } => {
                expr_reads(cond, c)
                    || then_body.iter().any(|s| stmt_reads(s, c))
                    || else_body.iter().any(|s| stmt_reads(s, c))
            }
            Stmt::Return(Some(e)) => expr_reads(e, c),
            Stmt::Return(None) => false,
        }
    }
    f.body.iter().any(|s| stmt_reads(s, contract))
}

pub(crate) fn body_reads_value(f: &FunctionDecl, contract: &crate::frontend::ContractAST) -> bool {
    does_body_read_value(f, contract)
}

impl<'a> Machine<'a> {
    fn new(env: &'a ExecEnv<'a>, state: &GlobalState) -> Self {
        let contract = &env.instrumented.base;
        let wrap = contract.wrap256.then(|| BigInt::one() << 256u32);
        let mut sym = BTreeMap::new();
        for decl in &contract.state_vars {
            let slot = match state.valuation.get(&decl.name) {
                Some(Value::Int(v)) => SymSlot::Int(ilit(v)),
                Some(Value::Bool(b)) => SymSlot::Bool(ConstraintTerm::Lit(*b)),
                Some(Value::Addr(a)) => SymSlot::Addr(AddrTerm::Lit(a.clone())),
                Some(Value::Map(m)) => {
                    SymSlot::Map(m.iter().map(|(k, v)| (k.clone(), ilit(v))).collect())
                }
                None => match decl.ty {
                    VarType::Int => SymSlot::Int(ilit(&BigInt::zero())),
                    VarType::Bool => SymSlot::Bool(ConstraintTerm::Lit(false)),
                    VarType::Address => {
                        SymSlot::Addr(AddrTerm::Lit(Address::parse("0x0").expect("static")))
                    }
                    VarType::MapAddrInt => SymSlot::Map(BTreeMap::new()),
                },
            };
            sym.insert(decl.name.clone(), slot);
        }
        Machine {
            env,
            wrap,
            state: state.clone(),
            sym,
            symbols: Vec::new(),
            constraints: Vec::new(),
            branch_log: Vec::new(),
            pins: HashSet::new(),
        }
    }

    fn wrap_pair(&self, v: BigInt, t: IntTerm) -> (BigInt, IntTerm) {
        match &self.wrap {
            Some(n) => (floor_mod(&v, n), imod(t, ilit(n))),
            None => (v, t),
        }
    }

    fn alloc_symbol(&mut self, base: &str, path: &[usize], sort: Sort, role: SymbolRole, witness: ModelValue) -> usize {
        let mut name = format!("{base}.t");
        for idx in path {
            name.push('_');
            name.push_str(&idx.to_string());
        }
        let id = self.symbols.len();
        self.symbols.push(TraceSymbol { decl: SymbolDecl { name, sort }, role, witness });
        id
    }

    fn record(&mut self, kind: BranchKind, term: ConstraintTerm, taken: bool) {
        let observed = if taken { term } else { term.negated() };
        let index = if observed.has_symbols() {
            self.constraints.push(observed);
            Some(self.constraints.len() - 1)
        } else {
            None
        };
        self.branch_log.push(BranchRecord { kind, taken, constraint_index: index });
    }

    fn pin_addr(&mut self, term: &AddrTerm, concrete: &Address) {
        if let AddrTerm::Sym(id) = term {
            if self.pins.insert((*id, concrete.clone())) {
                self.record(
                    BranchKind::MapKeyPin,
                    caddr_eq(term.clone(), AddrTerm::Lit(concrete.clone())),
                    true,
                );
            }
        }
    }

    fn run_invocation(&mut self, inv: &Invocation, nesting: u32, path: Vec<usize>) -> Result<(), Abort> {
        let contract = &self.env.instrumented.base;
        let Some(function) = contract.function(&inv.function) else {
            return Err(Abort::Trap);
        };
        if function.kind != FnKind::External || inv.args.len() != function.params.len() {
            return Err(Abort::Trap);
        }

        let sender_id = self.alloc_symbol(
            "sender",
            &path,
            Sort::Addr,
            SymbolRole::Sender { path: path.clone() },
            ModelValue::Addr(inv.sender.clone()),
        );
        let sender = (inv.sender.clone(), AddrTerm::Sym(sender_id));

        let value_id = self.alloc_symbol(
            "value",
            &path,
            Sort::Int,
            SymbolRole::AttachedValue { path: path.clone() },
            ModelValue::Int(inv.value.clone()),
        );
        let value_term = IntTerm::Sym(value_id);
        let reads_value = body_reads_value(function, contract);
        if inv.value.is_negative() {
            if reads_value {
                self.record(
                    BranchKind::ValueSign,
                    ccmp(CmpOp::Ge, value_term.clone(), ilit(&BigInt::zero())),
                    false,
                );
            }
            return Err(Abort::Trap);
        }
        if reads_value {
            self.record(
                BranchKind::ValueSign,
                ccmp(CmpOp::Ge, value_term.clone(), ilit(&BigInt::zero())),
                true,
            );
        }
        // The sender pays the attached value into the contract.
        *self.state.actor_balances.entry(inv.sender.clone()).or_default() -= &inv.value;

        let mut params = BTreeMap::new();
        for (i, (param, arg)) in function.params.iter().zip(&inv.args).enumerate() {
            let role = SymbolRole::Arg { path: path.clone(), index: i };
            let sv = match (param.ty, arg) {
                (VarType::Int, Value::Int(v)) => {
                    let id = self.alloc_symbol(
                        &format!("arg_{}", param.name),
                        &path,
                        Sort::Int,
                        role,
                        ModelValue::Int(v.clone()),
                    );
                    SymVal::Int(v.clone(), IntTerm::Sym(id))
                }
                (VarType::Bool, Value::Bool(b)) => {
                    let id = self.alloc_symbol(
                        &format!("arg_{}", param.name),
                        &path,
                        Sort::Int,
                        role,
                        ModelValue::Int(if *b { BigInt::one() } else { BigInt::zero() }),
                    );
                    SymVal::Bool(
                        *b,
                        ccmp(CmpOp::Ne, IntTerm::Sym(id), ilit(&BigInt::zero())),
                    )
                }
                (VarType::Address, Value::Addr(a)) => {
                    let id = self.alloc_symbol(
                        &format!("arg_{}", param.name),
                        &path,
                        Sort::Addr,
                        role,
                        ModelValue::Addr(a.clone()),
                    );
                    SymVal::Addr(a.clone(), AddrTerm::Sym(id))
                }
                _ => return Err(Abort::Trap),
            };
            params.insert(param.name.clone(), sv);
        }

        let mut frame = Frame {
            params,
            sender,
            value: (inv.value.clone(), value_term),
            reentry: inv.reentry.iter().cloned().collect(),
            consumed: 0,
            nesting,
            path,
        };
        self.exec_block(&function.body, &mut frame)?;
        Ok(())
    }

    fn exec_block(&mut self, stmts: &[Stmt], frame: &mut Frame) -> Result<Flow, Abort> {
        for stmt in stmts {
            match stmt {
                Stmt::Require(cond) => {
                    let sv = self.eval(cond, frame)?;
                    let SymVal::Bool(cv, term) = sv else { return Err(Abort::Trap) };
                    self.record(BranchKind::Require, term, cv);
                    if !cv {
                        return Err(Abort::RequireFailed);
                    }
                }
                Stmt::Assign { target, value } => {
                    let rhs = self.eval(value, frame)?;
                    match target {
                        LValue::Var(name) => self.write_var(name, rhs)?,
                        LValue::MapEntry { map, key } => {
                            let kv = self.eval(key, frame)?;
                            let SymVal::Addr(ka, kt) = kv else { return Err(Abort::Trap) };
                            self.pin_addr(&kt, &ka);
                            let SymVal::Int(v, t) = rhs else { return Err(Abort::Trap) };
                            if let Some(Value::Map(m)) = self.state.valuation.get_mut(map) {
                                m.insert(ka.clone(), v);
                            }
                            if let Some(SymSlot::Map(m)) = self.sym.get_mut(map) {
                                m.insert(ka, t);
                            }
                        }
                    }
                }
                Stmt::Call { target, amount } => {
                    let tv = self.eval(target, frame)?;
                    let av = self.eval(amount, frame)?;
                    let SymVal::Addr(taddr, tterm) = tv else { return Err(Abort::Trap) };
                    let SymVal::Int(aval, aterm) = av else { return Err(Abort::Trap) };
                    let nonneg = ccmp(CmpOp::Ge, aterm, ilit(&BigInt::zero()));
                    self.record(BranchKind::CallAmountSign, nonneg, !aval.is_negative());
                    if aval.is_negative() {
                        return Err(Abort::Trap);
                    }
                    self.pin_addr(&tterm, &taddr);
                    *self.state.actor_balances.entry(taddr.clone()).or_default() += &aval;

                    // Calling out to the attacker hands over control: the
                    // next scheduled reentrant invocation runs here, its
                    // effects contained if it aborts.
                    if taddr == self.env.attacker
                        && frame.nesting < self.env.reentry_depth
                        && !frame.reentry.is_empty()
                    {
                        let inner = frame.reentry.pop_front().expect("checked non-empty");
                        let mut inner_path = frame.path.clone();
                        inner_path.push(frame.consumed);
                        frame.consumed += 1;
                        let checkpoint = (self.state.clone(), self.sym.clone());
                        if self.run_invocation(&inner, frame.nesting + 1, inner_path).is_err() {
                            self.state = checkpoint.0;
                            self.sym = checkpoint.1;
                        }
                    }
                }
                Stmt::If { cond, then_body, else_body } => {
                    let sv = self.eval(cond, frame)?;
                    let SymVal::Bool(cv, term) = sv else { return Err(Abort::Trap) };
                    self.record(BranchKind::If, term, cv);
                    let body = if cv { then_body } else { else_body };
                    if let Flow::Return(v) = self.exec_block(body, frame)? {
                        return Ok(Flow::Return(v));
                    }
                }
                Stmt::Return(e) => {
                    let v = match e {
                        Some(e) => Some(self.eval(e, frame)?),
                        None => None,
                    };
                    return Ok(Flow::Return(v));
                }
            }
        }
        Ok(Flow::Normal)
    }

    fn write_var(&mut self, name: &str, rhs: SymVal) -> Result<(), Abort> {
        match rhs {
            SymVal::Int(v, t) => {
                self.state.valuation.insert(name.to_string(), Value::Int(v));
                self.sym.insert(name.to_string(), SymSlot::Int(t));
            }
            SymVal::Bool(v, t) => {
                self.state.valuation.insert(name.to_string(), Value::Bool(v));
                self.sym.insert(name.to_string(), SymSlot::Bool(t));
            }
            SymVal::Addr(v, t) => {
                self.state.valuation.insert(name.to_string(), Value::Addr(v));
                self.sym.insert(name.to_string(), SymSlot::Addr(t));
            }
        }
        Ok(())
    }

    fn read_var(&mut self, name: &str) -> Result<SymVal, Abort> {
        let concrete = self.state.valuation.get(name).cloned().ok_or(Abort::Trap)?;
        let slot = self.sym.get(name).cloned().ok_or(Abort::Trap)?;
        match (concrete, slot) {
            (Value::Int(v), SymSlot::Int(t)) => Ok(SymVal::Int(v, t)),
            (Value::Bool(v), SymSlot::Bool(t)) => Ok(SymVal::Bool(v, t)),
            (Value::Addr(v), SymSlot::Addr(t)) => Ok(SymVal::Addr(v, t)),
            _ => Err(Abort::Trap),
        }
    }

    fn eval(&mut self, e: &Expr, frame: &mut Frame) -> Result<SymVal, Abort> {
        match e {
            Expr::Lit(Literal::Int(v)) => Ok(SymVal::Int(v.clone(), ilit(v))),
            Expr::Lit(Literal::Bool(b)) => Ok(SymVal::Bool(*b, ConstraintTerm::Lit(*b))),
            Expr::Lit(Literal::Addr(a)) => {
                Ok(SymVal::Addr(a.clone(), AddrTerm::Lit(a.clone())))
            }
            Expr::Ident(name) => {
                if let Some(p) = frame.params.get(name) {
                    return Ok(p.clone());
                }
                self.read_var(name)
            }
            Expr::MapIndex { map, key } => {
                let kv = self.eval(key, frame)?;
                let SymVal::Addr(ka, kt) = kv else { return Err(Abort::Trap) };
                self.pin_addr(&kt, &ka);
                let concrete = self
                    .state
                    .valuation
                    .get(map)
                    .map(|m| m.map_get(&ka))
                    .unwrap_or_else(BigInt::zero);
                let term = match self.sym.get(map) {
                    Some(SymSlot::Map(m)) => {
                        m.get(&ka).cloned().unwrap_or_else(|| ilit(&BigInt::zero()))
                    }
                    _ => ilit(&concrete),
                };
                Ok(SymVal::Int(concrete, term))
            }
            Expr::MsgSender => {
                Ok(SymVal::Addr(frame.sender.0.clone(), frame.sender.1.clone()))
            }
            Expr::MsgValue => Ok(SymVal::Int(frame.value.0.clone(), frame.value.1.clone())),
            Expr::ViewCall(name) => {
                let contract = &self.env.instrumented.base;
                let Some(view) = contract.function(name) else { return Err(Abort::Trap) };
                let mut view_frame = Frame {
                    params: BTreeMap::new(),
                    sender: frame.sender.clone(),
                    value: frame.value.clone(),
                    reentry: VecDeque::new(),
                    consumed: 0,
                    nesting: frame.nesting,
                    path: frame.path.clone(),
                };
                match self.exec_block(&view.body, &mut view_frame)? {
                    Flow::Return(Some(v)) => Ok(v),
                    // Falling off the end of a view is a trap.
                    _ => Err(Abort::Trap),
                }
            }
            Expr::Unary(UnOp::Neg, inner) => {
                let sv = self.eval(inner, frame)?;
                let SymVal::Int(v, t) = sv else { return Err(Abort::Trap) };
                let (v, t) = self.wrap_pair(-v, isub(ilit(&BigInt::zero()), t));
                Ok(SymVal::Int(v, t))
            }
            Expr::Unary(UnOp::Not, inner) => {
                let sv = self.eval(inner, frame)?;
                let SymVal::Bool(v, t) = sv else { return Err(Abort::Trap) };
                Ok(SymVal::Bool(!v, t.negated()))
            }
            Expr::Binary(op, a, b) => self.eval_binary(*op, a, b, frame),
        }
    }

    fn eval_binary(
        &mut self,
        op: BinOp,
        a: &Expr,
        b: &Expr,
        frame: &mut Frame,
    ) -> Result<SymVal, Abort> {
        // Boolean connectives short-circuit; an unevaluated right operand
        // contributes nothing to the shadow, which stays faithful to the
        // executed path.
        if op == BinOp::And {
            let left = self.eval(a, frame)?;
            let SymVal::Bool(lv, lt) = left else { return Err(Abort::Trap) };
            if !lv {
                return Ok(SymVal::Bool(false, lt));
            }
            let right = self.eval(b, frame)?;
            let SymVal::Bool(rv, rt) = right else { return Err(Abort::Trap) };
            return Ok(SymVal::Bool(rv, cand(lt, rt)));
        }
        if op == BinOp::Or {
            let left = self.eval(a, frame)?;
            let SymVal::Bool(lv, lt) = left else { return Err(Abort::Trap) };
            if lv {
                return Ok(SymVal::Bool(true, lt));
            }
            let right = self.eval(b, frame)?;
            let SymVal::Bool(rv, rt) = right else { return Err(Abort::Trap) };
            return Ok(SymVal::Bool(rv, cor(lt, rt)));
        }

        let left = self.eval(a, frame)?;
        let right = self.eval(b, frame)?;
        match (op, left, right) {
            (BinOp::Add, SymVal::Int(x, xt), SymVal::Int(y, yt)) => {
                let (v, t) = self.wrap_pair(x + y, iadd(xt, yt));
                Ok(SymVal::Int(v, t))
            }
            (BinOp::Sub, SymVal::Int(x, xt), SymVal::Int(y, yt)) => {
                let (v, t) = self.wrap_pair(x - y, isub(xt, yt));
                Ok(SymVal::Int(v, t))
            }
            (BinOp::Mul, SymVal::Int(x, xt), SymVal::Int(y, yt)) => {
                let (v, t) = self.wrap_pair(x * y, imul(xt, yt));
                Ok(SymVal::Int(v, t))
            }
            (BinOp::Div, SymVal::Int(x, xt), SymVal::Int(y, yt)) => {
                // Division is a branch point: the divisor's sign decides
                // between trap and result.
                if yt.has_symbols() {
                    let cls = if y.is_zero() {
                        ccmp(CmpOp::Eq, yt.clone(), ilit(&BigInt::zero()))
                    } else if y.is_negative() {
                        ccmp(CmpOp::Lt, yt.clone(), ilit(&BigInt::zero()))
                    } else {
                        ccmp(CmpOp::Gt, yt.clone(), ilit(&BigInt::zero()))
                    };
                    self.record(BranchKind::DivisorSign, cls, true);
                }
                if y.is_zero() {
                    return Err(Abort::Trap);
                }
                let (v, t) = self.wrap_pair(floor_div(&x, &y), idiv(xt, yt));
                Ok(SymVal::Int(v, t))
            }
            (op, SymVal::Int(x, xt), SymVal::Int(y, yt)) if op.is_comparison() => {
                let cmp = match op {
                    BinOp::Eq => CmpOp::Eq,
                    BinOp::Ne => CmpOp::Ne,
                    BinOp::Lt => CmpOp::Lt,
                    BinOp::Le => CmpOp::Le,
                    BinOp::Gt => CmpOp::Gt,
                    _ => CmpOp::Ge,
                };
                Ok(SymVal::Bool(cmp.apply(&x, &y), ccmp(cmp, xt, yt)))
            }
            (BinOp::Eq, SymVal::Addr(x, xt), SymVal::Addr(y, yt)) => {
                Ok(SymVal::Bool(x == y, caddr_eq(xt, yt)))
            }
            (BinOp::Ne, SymVal::Addr(x, xt), SymVal::Addr(y, yt)) => {
                Ok(SymVal::Bool(x != y, caddr_eq(xt, yt).negated()))
            }
            (BinOp::Eq, SymVal::Bool(x, xt), SymVal::Bool(y, yt)) => {
                let term = cor(cand(xt.clone(), yt.clone()), cand(xt.negated(), yt.negated()));
                Ok(SymVal::Bool(x == y, term))
            }
            (BinOp::Ne, SymVal::Bool(x, xt), SymVal::Bool(y, yt)) => {
                let term = cor(cand(xt.clone(), yt.negated()), cand(xt.negated(), yt));
                Ok(SymVal::Bool(x != y, term))
            }
            _ => Err(Abort::Trap),
        }
    }

    fn prop_lvalue(&self, lv: &PropLValue) -> (Value, SymVal) {
        match lv {
            PropLValue::Var(name) => {
                let concrete =
                    self.state.valuation.get(name).cloned().unwrap_or(Value::Int(BigInt::zero()));
                let sv = match (&concrete, self.sym.get(name)) {
                    (Value::Int(v), Some(SymSlot::Int(t))) => SymVal::Int(v.clone(), t.clone()),
                    (Value::Bool(b), Some(SymSlot::Bool(t))) => SymVal::Bool(*b, t.clone()),
                    (Value::Addr(a), Some(SymSlot::Addr(t))) => {
                        SymVal::Addr(a.clone(), t.clone())
                    }
                    (Value::Int(v), _) => SymVal::Int(v.clone(), ilit(v)),
                    (Value::Bool(b), _) => SymVal::Bool(*b, ConstraintTerm::Lit(*b)),
                    (Value::Addr(a), _) => SymVal::Addr(a.clone(), AddrTerm::Lit(a.clone())),
                    (Value::Map(_), _) => SymVal::Int(BigInt::zero(), ilit(&BigInt::zero())),
                };
                (concrete, sv)
            }
            PropLValue::MapEntry { map, key } => {
                let addr = match key {
                    PropKey::Addr(a) => a.clone(),
                    PropKey::Attacker => self.env.attacker.clone(),
                };
                let concrete = self
                    .state
                    .valuation
                    .get(map)
                    .map(|m| m.map_get(&addr))
                    .unwrap_or_else(BigInt::zero);
                let term = match self.sym.get(map) {
                    Some(SymSlot::Map(m)) => {
                        m.get(&addr).cloned().unwrap_or_else(|| ilit(&BigInt::zero()))
                    }
                    _ => ilit(&concrete),
                };
                (Value::Int(concrete.clone()), SymVal::Int(concrete, term))
            }
        }
    }
}

/// Evaluate a postcondition concretely against a state and captured
/// pre-values. `None` (division by zero) is treated as a violation by all
/// callers, identically in the runtime monitor.
pub fn eval_post_concrete(
    post: &PostExpr,
    captured: &[Value],
    state: &GlobalState,
    attacker: &Address,
) -> Option<bool> {
    fn eval(
        e: &PostExpr,
        captured: &[Value],
        state: &GlobalState,
        attacker: &Address,
    ) -> Option<Value> {
        match e {
            PostExpr::Lit(l) => Some(Value::from_literal(l)),
            PostExpr::Captured(i) => captured.get(*i).cloned(),
            PostExpr::State(lv) => Some(read_prop_lvalue(lv, state, attacker)),
            PostExpr::Unary(UnOp::Neg, a) => match eval(a, captured, state, attacker)? {
                Value::Int(v) => Some(Value::Int(-v)),
                _ => None,
            },
            PostExpr::Unary(UnOp::Not, a) => match eval(a, captured, state, attacker)? {
                Value::Bool(b) => Some(Value::Bool(!b)),
                _ => None,
            },
            PostExpr::Implies(a, b) => {
                let Value::Bool(x) = eval(a, captured, state, attacker)? else { return None };
                if !x {
                    return Some(Value::Bool(true));
                }
                eval(b, captured, state, attacker)
            }
            PostExpr::Binary(op, a, b) => {
                let va = eval(a, captured, state, attacker)?;
                let vb = eval(b, captured, state, attacker)?;
                match (op, va, vb) {
                    (BinOp::Add, Value::Int(x), Value::Int(y)) => Some(Value::Int(x + y)),
                    (BinOp::Sub, Value::Int(x), Value::Int(y)) => Some(Value::Int(x - y)),
                    (BinOp::Mul, Value::Int(x), Value::Int(y)) => Some(Value::Int(x * y)),
                    (BinOp::Div, Value::Int(x), Value::Int(y)) => {
                        if y.is_zero() {
                            None
                        } else {
                            Some(Value::Int(floor_div(&x, &y)))
                        }
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
    match eval(post, captured, state, attacker)? {
        Value::Bool(b) => Some(b),
        _ => None,
    }
}

pub(crate) fn read_prop_lvalue(lv: &PropLValue, state: &GlobalState, attacker: &Address) -> Value {
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
                state.valuation.get(map).map(|m| m.map_get(&addr)).unwrap_or_else(BigInt::zero),
            )
        }
    }
}

enum PostSym {
    Int(IntTerm),
    Bool(ConstraintTerm),
}

fn eval_post_symbolic(
    post: &PostExpr,
    captured_syms: &[SymVal],
    machine: &Machine<'_>,
) -> Option<PostSym> {
    match post {
        PostExpr::Lit(Literal::Int(v)) => Some(PostSym::Int(ilit(v))),
        PostExpr::Lit(Literal::Bool(b)) => Some(PostSym::Bool(ConstraintTerm::Lit(*b))),
        PostExpr::Lit(Literal::Addr(_)) => None,
        PostExpr::Captured(i) => match captured_syms.get(*i)? {
            SymVal::Int(_, t) => Some(PostSym::Int(t.clone())),
            SymVal::Bool(_, t) => Some(PostSym::Bool(t.clone())),
            SymVal::Addr(..) => None,
        },
        PostExpr::State(lv) => match machine.prop_lvalue(lv).1 {
            SymVal::Int(_, t) => Some(PostSym::Int(t)),
            SymVal::Bool(_, t) => Some(PostSym::Bool(t)),
            SymVal::Addr(..) => None,
        },
        PostExpr::Unary(UnOp::Neg, a) => {
            match eval_post_symbolic(a, captured_syms, machine)? {
                PostSym::Int(t) => Some(PostSym::Int(isub(ilit(&BigInt::zero()), t))),
                PostSym::Bool(_) => None,
            }
        }
        PostExpr::Unary(UnOp::Not, a) => {
            match eval_post_symbolic(a, captured_syms, machine)? {
                PostSym::Bool(t) => Some(PostSym::Bool(t.negated())),
                PostSym::Int(_) => None,
            }
        }
        PostExpr::Implies(a, b) => {
            let PostSym::Bool(x) = eval_post_symbolic(a, captured_syms, machine)? else {
                return None;
            };
            let PostSym::Bool(y) = eval_post_symbolic(b, captured_syms, machine)? else {
                return None;
            };
            Some(PostSym::Bool(cor(x.negated(), y)))
        }
        PostExpr::Binary(op, a, b) => {
            let va = eval_post_symbolic(a, captured_syms, machine)?;
            let vb = eval_post_symbolic(b, captured_syms, machine)?;
            match (op, va, vb) {
                (BinOp::Add, PostSym::Int(x), PostSym::Int(y)) => Some(PostSym::Int(iadd(x, y))),
                (BinOp::Sub, PostSym::Int(x), PostSym::Int(y)) => Some(PostSym::Int(isub(x, y))),
                (BinOp::Mul, PostSym::Int(x), PostSym::Int(y)) => Some(PostSym::Int(imul(x, y))),
                // Division inside a property stays concrete-only; the
                // falsification pass just skips such properties.
                (BinOp::Div, ..) => None,
                (BinOp::And, PostSym::Bool(x), PostSym::Bool(y)) => {
                    Some(PostSym::Bool(cand(x, y)))
                }
                (BinOp::Or, PostSym::Bool(x), PostSym::Bool(y)) => Some(PostSym::Bool(cor(x, y))),
                (BinOp::Eq, PostSym::Int(x), PostSym::Int(y)) => {
                    Some(PostSym::Bool(ccmp(CmpOp::Eq, x, y)))
                }
                (BinOp::Ne, PostSym::Int(x), PostSym::Int(y)) => {
                    Some(PostSym::Bool(ccmp(CmpOp::Ne, x, y)))
                }
                (BinOp::Lt, PostSym::Int(x), PostSym::Int(y)) => {
                    Some(PostSym::Bool(ccmp(CmpOp::Lt, x, y)))
                }
                (BinOp::Le, PostSym::Int(x), PostSym::Int(y)) => {
                    Some(PostSym::Bool(ccmp(CmpOp::Le, x, y)))
                }
                (BinOp::Gt, PostSym::Int(x), PostSym::Int(y)) => {
                    Some(PostSym::Bool(ccmp(CmpOp::Gt, x, y)))
                }
                (BinOp::Ge, PostSym::Int(x), PostSym::Int(y)) => {
                    Some(PostSym::Bool(ccmp(CmpOp::Ge, x, y)))
                }
                _ => None,
            }
        }
    }
}

/// Execute one top-level invocation concolically. Old-values are captured at
/// entry, the postcondition is evaluated at top-level exit, and `require`
/// failures or traps roll the state back.
pub fn step_concolic(state: &GlobalState, inv: &Invocation, env: &ExecEnv<'_>) -> StepResult {
    let mut machine = Machine::new(env, state);

    // Capture pre-state values for the property's old-terms.
    let captures: Vec<(Value, SymVal)> = env
        .instrumented
        .pre_capture
        .iter()
        .map(|lv| machine.prop_lvalue(lv))
        .collect();
    let captured_concrete: Vec<Value> = captures.iter().map(|(v, _)| v.clone()).collect();
    let captured_syms: Vec<SymVal> = captures.into_iter().map(|(_, s)| s).collect();

    let run = machine.run_invocation(inv, 0, Vec::new());

    let (post, outcome, post_sym) = match run {
        Err(Abort::RequireFailed) => (state.clone(), Outcome::RequireFailed, None),
        Err(Abort::Trap) => (state.clone(), Outcome::Trap, None),
        Ok(()) => {
            let mut post_state = machine.state.clone();
            post_state.depth = state.depth + 1;
            let holds = eval_post_concrete(
                &env.instrumented.postcondition,
                &captured_concrete,
                &post_state,
                &env.attacker,
            );
            let post_sym = match eval_post_symbolic(
                &env.instrumented.postcondition,
                &captured_syms,
                &machine,
            ) {
                Some(PostSym::Bool(term)) => Some(term),
                _ => None,
            };
            let outcome = if holds == Some(true) {
                Outcome::Ok
            } else {
                Outcome::PostconditionViolated
            };
            (post_state, outcome, post_sym)
        }
    };

    let trace = SymbolicTrace {
        function: inv.function.clone(),
        invocation: inv.clone(),
        symbols: machine.symbols,
        path_constraints: machine.constraints,
        branch_log: machine.branch_log,
        postcondition_sym: post_sym,
    };
    StepResult { post, trace, outcome }
}
