//! SMT-LIB2 emission, the external-process backend, and a built-in script
//! shim that implements the same wire contract.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::{
    eval_conjunction, AddrTerm, CmpOp, ConstraintTerm, IntTerm, Model, ModelValue, SolverError,
    SolverResult, Sort, SymbolDecl,
};
use crate::frontend::Address;

/// Lowering context: actors take indices `0..n`, literal addresses outside
/// the actor set get fresh indices above them (and are therefore never equal
/// to any address symbol).
struct Lowering<'a> {
    actors: &'a [Address],
    extra: Vec<Address>,
}

impl<'a> Lowering<'a> {
    fn new(actors: &'a [Address]) -> Self {
        Lowering { actors, extra: Vec::new() }
    }

    fn index_of(&mut self, addr: &Address) -> usize {
        if let Some(i) = self.actors.iter().position(|a| a == addr) {
            return i;
        }
        if let Some(i) = self.extra.iter().position(|a| a == addr) {
            return self.actors.len() + i;
        }
        self.extra.push(addr.clone());
        self.actors.len() + self.extra.len() - 1
    }
}

fn lower_int(t: &IntTerm, decls: &[SymbolDecl], out: &mut String) {
    match t {
        IntTerm::Lit(v) => {
            if v.is_negative() {
                out.push_str(&format!("(- {})", v.magnitude()));
            } else {
                out.push_str(&v.to_string());
            }
        }
        IntTerm::Sym(s) => out.push_str(&decls[*s].name),
        IntTerm::Add(a, b) => lower_binop("+", a, b, decls, out),
        IntTerm::Sub(a, b) => lower_binop("-", a, b, decls, out),
        IntTerm::Mul(a, b) => lower_binop("*", a, b, decls, out),
        IntTerm::FloorDiv(a, b) => {
            // SMT-LIB `div` is Euclidean; it coincides with floor division
            // for positive divisors, and floor(a/b) = euclid(-a, -b) for
            // negative ones.
            out.push_str("(ite (> ");
            lower_int(b, decls, out);
            out.push_str(" 0) (div ");
            lower_int(a, decls, out);
            out.push(' ');
            lower_int(b, decls, out);
            out.push_str(") (div (- ");
            lower_int(a, decls, out);
            out.push_str(") (- ");
            lower_int(b, decls, out);
            out.push_str(")))");
        }
        IntTerm::Mod(a, b) => lower_binop("mod", a, b, decls, out),
    }
}

fn lower_binop(op: &str, a: &IntTerm, b: &IntTerm, decls: &[SymbolDecl], out: &mut String) {
    out.push('(');
    out.push_str(op);
    out.push(' ');
    lower_int(a, decls, out);
    out.push(' ');
    lower_int(b, decls, out);
    out.push(')');
}

fn lower_addr(t: &AddrTerm, decls: &[SymbolDecl], low: &mut Lowering, out: &mut String) {
    match t {
        AddrTerm::Lit(a) => out.push_str(&low.index_of(a).to_string()),
        AddrTerm::Sym(s) => out.push_str(&decls[*s].name),
    }
}

fn lower_pred(p: &ConstraintTerm, decls: &[SymbolDecl], low: &mut Lowering, out: &mut String) {
    match p {
        ConstraintTerm::Lit(b) => out.push_str(if *b { "true" } else { "false" }),
        ConstraintTerm::Cmp(op, a, b) => {
            let (sym, negate) = match op {
                CmpOp::Eq => ("=", false),
                CmpOp::Ne => ("=", true),
                CmpOp::Lt => ("<", false),
                CmpOp::Le => ("<=", false),
                CmpOp::Gt => (">", false),
                CmpOp::Ge => (">=", false),
            };
            if negate {
                out.push_str("(not ");
            }
            out.push('(');
            out.push_str(sym);
            out.push(' ');
            lower_int(a, decls, out);
            out.push(' ');
            lower_int(b, decls, out);
            out.push(')');
            if negate {
                out.push(')');
            }
        }
        ConstraintTerm::AddrEq(a, b) => {
            out.push_str("(= ");
            lower_addr(a, decls, low, out);
            out.push(' ');
            lower_addr(b, decls, low, out);
            out.push(')');
        }
        ConstraintTerm::Not(inner) => {
            out.push_str("(not ");
            lower_pred(inner, decls, low, out);
            out.push(')');
        }
        ConstraintTerm::And(a, b) => {
            out.push_str("(and ");
            lower_pred(a, decls, low, out);
            out.push(' ');
            lower_pred(b, decls, low, out);
            out.push(')');
        }
        ConstraintTerm::Or(a, b) => {
            out.push_str("(or ");
            lower_pred(a, decls, low, out);
            out.push(' ');
            lower_pred(b, decls, low, out);
            out.push(')');
        }
    }
}

/// Emit a deterministic SMT-LIB2 script for the conjunction of `terms`.
///
/// Declarations appear in first-use order; address symbols are lowered to
/// bounded integers over actor indices, with their domain asserted.
pub fn emit_smtlib(decls: &[SymbolDecl], actors: &[Address], terms: &[ConstraintTerm]) -> String {
    let mut script = String::from("(set-logic QF_NIA)\n");
    let mut low = Lowering::new(actors);
    let mut seen: Vec<usize> = Vec::new();
    for t in terms {
        for id in t.symbols() {
            if !seen.contains(&id) {
                seen.push(id);
            }
        }
    }
    for id in &seen {
        let d = &decls[*id];
        script.push_str(&format!("(declare-const {} Int)\n", d.name));
        if d.sort == Sort::Addr {
            script.push_str(&format!(
                "(assert (and (>= {} 0) (< {} {})))\n",
                d.name,
                d.name,
                actors.len()
            ));
        }
    }
    for t in terms {
        let mut body = String::new();
        lower_pred(t, decls, &mut low, &mut body);
        script.push_str("(assert ");
        script.push_str(&body);
        script.push_str(")\n");
    }
    script.push_str("(check-sat)\n(get-model)\n");
    script
}

/// Run an external SMT-LIB2 backend on the lowered query.
pub fn solve_external(
    cmd: &str,
    timeout_ms: u64,
    decls: &[SymbolDecl],
    actors: &[Address],
    terms: &[ConstraintTerm],
) -> Result<SolverResult, SolverError> {
    let script = emit_smtlib(decls, actors, terms);
    let output = run_subprocess(cmd, &script, timeout_ms)?;
    let Some(output) = output else {
        return Ok(SolverResult::Unknown("backend timeout".into()));
    };
    let mut lines = output.lines().map(str::trim).filter(|l| !l.is_empty());
    match lines.next() {
        Some("sat") => {}
        Some("unsat") => return Ok(SolverResult::Unsat),
        Some("unknown") | None => return Ok(SolverResult::Unknown("backend answered unknown".into())),
        Some(other) => {
            return Ok(SolverResult::Unknown(format!("unrecognized backend answer `{other}`")))
        }
    }
    let rest: String = output.splitn(2, '\n').nth(1).unwrap_or("").to_string();
    let model = parse_model(&rest, decls, actors, terms)?;
    // Defensive substitution check keeps the Sat invariant independent of
    // backend quirks.
    match eval_conjunction(terms, &model) {
        Some(true) => Ok(SolverResult::Sat(model)),
        _ => Ok(SolverResult::Unknown("backend model failed substitution".into())),
    }
}

fn run_subprocess(
    cmd: &str,
    input: &str,
    timeout_ms: u64,
) -> Result<Option<String>, SolverError> {
    let mut parts = cmd.split_whitespace();
    let program = parts
        .next()
        .ok_or_else(|| SolverError::BackendUnavailable("empty solver command".into()))?;
    let mut child = Command::new(program)
        .args(parts)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| SolverError::BackendUnavailable(format!("{program}: {e}")))?;

    if let Some(mut stdin) = child.stdin.take() {
        let _ = stdin.write_all(input.as_bytes());
    }
    let mut stdout = child.stdout.take().expect("stdout piped");
    let reader = std::thread::spawn(move || {
        let mut buf = String::new();
        let _ = stdout.read_to_string(&mut buf);
        buf
    });

    let deadline = Instant::now() + Duration::from_millis(timeout_ms);
    loop {
        match child.try_wait() {
            Ok(Some(_)) => break,
            Ok(None) => {
                if Instant::now() > deadline {
                    let _ = child.kill();
                    let _ = child.wait();
                    let _ = reader.join();
                    return Ok(None);
                }
                std::thread::sleep(Duration::from_millis(2));
            }
            Err(e) => return Err(SolverError::BackendUnavailable(e.to_string())),
        }
    }
    Ok(Some(reader.join().unwrap_or_default()))
}

// ---- s-expressions ----

#[derive(Debug, Clone, PartialEq, Eq)]
enum SExpr {
    Atom(String),
    List(Vec<SExpr>),
}

fn tokenize_sexpr(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut cur = String::new();
    let mut comment = false;
    for c in text.chars() {
        if comment {
            if c == '\n' {
                comment = false;
            }
            continue;
        }
        match c {
            ';' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                comment = true;
            }
            '(' | ')' => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
                tokens.push(c.to_string());
            }
            c if c.is_whitespace() => {
                if !cur.is_empty() {
                    tokens.push(std::mem::take(&mut cur));
                }
            }
            c => cur.push(c),
        }
    }
    if !cur.is_empty() {
        tokens.push(cur);
    }
    tokens
}

fn parse_sexprs(text: &str) -> Vec<SExpr> {
    let tokens = tokenize_sexpr(text);
    let mut stack: Vec<Vec<SExpr>> = vec![Vec::new()];
    for tok in tokens {
        match tok.as_str() {
            "(" => stack.push(Vec::new()),
            ")" => {
                let list = stack.pop().unwrap_or_default();
                if let Some(top) = stack.last_mut() {
                    top.push(SExpr::List(list));
                } else {
                    stack.push(vec![SExpr::List(list)]);
                }
            }
            atom => {
                if let Some(top) = stack.last_mut() {
                    top.push(SExpr::Atom(atom.to_string()));
                }
            }
        }
    }
    stack.pop().unwrap_or_default()
}

fn sexpr_int(e: &SExpr) -> Option<BigInt> {
    match e {
        SExpr::Atom(a) => a.parse().ok(),
        SExpr::List(items) => match items.as_slice() {
            [SExpr::Atom(minus), inner] if minus == "-" => Some(-sexpr_int(inner)?),
            _ => None,
        },
    }
}

/// Extract `define-fun` bindings from a backend's `(get-model)` answer.
fn parse_model(
    text: &str,
    decls: &[SymbolDecl],
    actors: &[Address],
    terms: &[ConstraintTerm],
) -> Result<Model, SolverError> {
    let mut values: BTreeMap<String, BigInt> = BTreeMap::new();
    let exprs = parse_sexprs(text);
    let mut work: Vec<&SExpr> = exprs.iter().collect();
    while let Some(e) = work.pop() {
        if let SExpr::List(items) = e {
            if items.len() >= 5 {
                if let (SExpr::Atom(kw), SExpr::Atom(name)) = (&items[0], &items[1]) {
                    if kw == "define-fun" {
                        if let Some(v) = sexpr_int(&items[4]) {
                            values.insert(name.clone(), v);
                        }
                        continue;
                    }
                }
            }
            for item in items {
                work.push(item);
            }
        }
    }

    let mut model: Model = BTreeMap::new();
    for id in super::symbols_of(terms) {
        let d = &decls[id];
        let Some(raw) = values.get(&d.name) else {
            // Unconstrained symbols may be omitted; any value works, pick
            // the domain floor.
            match d.sort {
                Sort::Int => {
                    model.insert(id, ModelValue::Int(BigInt::zero()));
                }
                Sort::Addr => {
                    if let Some(a) = actors.first() {
                        model.insert(id, ModelValue::Addr(a.clone()));
                    }
                }
            }
            continue;
        };
        match d.sort {
            Sort::Int => {
                model.insert(id, ModelValue::Int(raw.clone()));
            }
            Sort::Addr => {
                let idx = usize::try_from(raw.clone()).unwrap_or(usize::MAX);
                match actors.get(idx) {
                    Some(a) => {
                        model.insert(id, ModelValue::Addr(a.clone()));
                    }
                    None => {
                        return Ok(BTreeMap::new());
                    }
                }
            }
        }
    }
    Ok(model)
}

// ---- built-in shim backend ----

/// Integer expression under SMT semantics (`div`/`mod` are Euclidean).
#[derive(Debug, Clone)]
enum ShimInt {
    Num(BigInt),
    Var(usize),
    Neg(Box<ShimInt>),
    Add(Vec<ShimInt>),
    Sub(Vec<ShimInt>),
    Mul(Vec<ShimInt>),
    Div(Box<ShimInt>, Box<ShimInt>),
    Mod(Box<ShimInt>, Box<ShimInt>),
    Ite(Box<ShimBool>, Box<ShimInt>, Box<ShimInt>),
}

#[derive(Debug, Clone)]
enum ShimBool {
    Const(bool),
    Cmp(CmpOp, ShimInt, ShimInt),
    Not(Box<ShimBool>),
    And(Vec<ShimBool>),
    Or(Vec<ShimBool>),
}

fn euclid_div(a: &BigInt, b: &BigInt) -> Option<BigInt> {
    if b.is_zero() {
        return None;
    }
    let r = a.mod_floor(&b.abs());
    Some((a - &r) / b)
}

fn euclid_mod(a: &BigInt, b: &BigInt) -> Option<BigInt> {
    if b.is_zero() {
        return None;
    }
    Some(a.mod_floor(&b.abs()))
}

fn shim_eval_int(e: &ShimInt, env: &[BigInt]) -> Option<BigInt> {
    match e {
        ShimInt::Num(v) => Some(v.clone()),
        ShimInt::Var(i) => env.get(*i).cloned(),
        ShimInt::Neg(a) => Some(-shim_eval_int(a, env)?),
        ShimInt::Add(items) => {
            let mut acc = BigInt::zero();
            for item in items {
                acc += shim_eval_int(item, env)?;
            }
            Some(acc)
        }
        ShimInt::Sub(items) => {
            let mut iter = items.iter();
            let mut acc = shim_eval_int(iter.next()?, env)?;
            for item in iter {
                acc -= shim_eval_int(item, env)?;
            }
            Some(acc)
        }
        ShimInt::Mul(items) => {
            let mut acc = BigInt::from(1);
            for item in items {
                acc *= shim_eval_int(item, env)?;
            }
            Some(acc)
        }
        ShimInt::Div(a, b) => euclid_div(&shim_eval_int(a, env)?, &shim_eval_int(b, env)?),
        ShimInt::Mod(a, b) => euclid_mod(&shim_eval_int(a, env)?, &shim_eval_int(b, env)?),
        ShimInt::Ite(c, t, f) => {
            if shim_eval_bool(c, env)? {
                shim_eval_int(t, env)
            } else {
                shim_eval_int(f, env)
            }
        }
    }
}

fn shim_eval_bool(e: &ShimBool, env: &[BigInt]) -> Option<bool> {
    match e {
        ShimBool::Const(b) => Some(*b),
        ShimBool::Cmp(op, a, b) => {
            Some(op.apply(&shim_eval_int(a, env)?, &shim_eval_int(b, env)?))
        }
        ShimBool::Not(a) => Some(!shim_eval_bool(a, env)?),
        ShimBool::And(items) => {
            for item in items {
                if !shim_eval_bool(item, env)? {
                    return Some(false);
                }
            }
            Some(true)
        }
        ShimBool::Or(items) => {
            for item in items {
                if shim_eval_bool(item, env)? {
                    return Some(true);
                }
            }
            Some(false)
        }
    }
}

struct ShimState {
    names: Vec<String>,
    asserts: Vec<ShimBool>,
}

impl ShimState {
    fn var(&mut self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    fn parse_int(&mut self, e: &SExpr) -> Option<ShimInt> {
        match e {
            SExpr::Atom(a) => {
                if let Ok(v) = a.parse::<BigInt>() {
                    return Some(ShimInt::Num(v));
                }
                self.var(a).map(ShimInt::Var)
            }
            SExpr::List(items) => {
                let (head, rest) = items.split_first()?;
                let SExpr::Atom(op) = head else { return None };
                match op.as_str() {
                    "-" if rest.len() == 1 => {
                        Some(ShimInt::Neg(Box::new(self.parse_int(&rest[0])?)))
                    }
                    "-" => Some(ShimInt::Sub(self.parse_int_list(rest)?)),
                    "+" => Some(ShimInt::Add(self.parse_int_list(rest)?)),
                    "*" => Some(ShimInt::Mul(self.parse_int_list(rest)?)),
                    "div" if rest.len() == 2 => Some(ShimInt::Div(
                        Box::new(self.parse_int(&rest[0])?),
                        Box::new(self.parse_int(&rest[1])?),
                    )),
                    "mod" if rest.len() == 2 => Some(ShimInt::Mod(
                        Box::new(self.parse_int(&rest[0])?),
                        Box::new(self.parse_int(&rest[1])?),
                    )),
                    "ite" if rest.len() == 3 => Some(ShimInt::Ite(
                        Box::new(self.parse_bool(&rest[0])?),
                        Box::new(self.parse_int(&rest[1])?),
                        Box::new(self.parse_int(&rest[2])?),
                    )),
                    _ => None,
                }
            }
        }
    }

    fn parse_int_list(&mut self, items: &[SExpr]) -> Option<Vec<ShimInt>> {
        items.iter().map(|i| self.parse_int(i)).collect()
    }

    fn parse_bool(&mut self, e: &SExpr) -> Option<ShimBool> {
        match e {
            SExpr::Atom(a) if a == "true" => Some(ShimBool::Const(true)),
            SExpr::Atom(a) if a == "false" => Some(ShimBool::Const(false)),
            SExpr::Atom(_) => None,
            SExpr::List(items) => {
                let (head, rest) = items.split_first()?;
                let SExpr::Atom(op) = head else { return None };
                let cmp = |op: CmpOp, s: &mut Self, rest: &[SExpr]| -> Option<ShimBool> {
                    if rest.len() != 2 {
                        return None;
                    }
                    Some(ShimBool::Cmp(op, s.parse_int(&rest[0])?, s.parse_int(&rest[1])?))
                };
                match op.as_str() {
                    "=" => cmp(CmpOp::Eq, self, rest),
                    "<" => cmp(CmpOp::Lt, self, rest),
                    "<=" => cmp(CmpOp::Le, self, rest),
                    ">" => cmp(CmpOp::Gt, self, rest),
                    ">=" => cmp(CmpOp::Ge, self, rest),
                    "not" if rest.len() == 1 => {
                        Some(ShimBool::Not(Box::new(self.parse_bool(&rest[0])?)))
                    }
                    "and" => Some(ShimBool::And(
                        rest.iter().map(|i| self.parse_bool(i)).collect::<Option<_>>()?,
                    )),
                    "or" => Some(ShimBool::Or(
                        rest.iter().map(|i| self.parse_bool(i)).collect::<Option<_>>()?,
                    )),
                    _ => None,
                }
            }
        }
    }
}

/// Tighten per-variable bounds from syntactic atoms `(op var lit)` found in
/// the asserted conjuncts.
fn extract_bounds(
    asserts: &[ShimBool],
    n_vars: usize,
    default_lo: &BigInt,
    default_hi: &BigInt,
) -> Vec<(BigInt, BigInt)> {
    let mut bounds: Vec<(BigInt, BigInt)> =
        (0..n_vars).map(|_| (default_lo.clone(), default_hi.clone())).collect();
    let one = BigInt::from(1);
    let mut work: Vec<&ShimBool> = asserts.iter().collect();
    while let Some(b) = work.pop() {
        match b {
            ShimBool::And(items) => work.extend(items.iter()),
            ShimBool::Cmp(op, a, c) => {
                let (var, lit, flipped) = match (a, c) {
                    (ShimInt::Var(v), ShimInt::Num(n)) => (*v, n.clone(), false),
                    (ShimInt::Num(n), ShimInt::Var(v)) => (*v, n.clone(), true),
                    _ => continue,
                };
                let op = if flipped {
                    match op {
                        CmpOp::Lt => CmpOp::Gt,
                        CmpOp::Le => CmpOp::Ge,
                        CmpOp::Gt => CmpOp::Lt,
                        CmpOp::Ge => CmpOp::Le,
                        other => *other,
                    }
                } else {
                    *op
                };
                let (lo, hi) = &mut bounds[var];
                match op {
                    CmpOp::Eq => {
                        if lit > *lo {
                            *lo = lit.clone();
                        }
                        if lit < *hi {
                            *hi = lit;
                        }
                    }
                    CmpOp::Le => {
                        if lit < *hi {
                            *hi = lit;
                        }
                    }
                    CmpOp::Lt => {
                        let v = lit - &one;
                        if v < *hi {
                            *hi = v;
                        }
                    }
                    CmpOp::Ge => {
                        if lit > *lo {
                            *lo = lit;
                        }
                    }
                    CmpOp::Gt => {
                        let v = lit + &one;
                        if v > *lo {
                            *lo = v;
                        }
                    }
                    CmpOp::Ne => {}
                }
            }
            _ => {}
        }
    }
    bounds
}

/// Interpret an SMT-LIB2 script (the subset `emit_smtlib` produces) and
/// answer on stdout like a real backend would. Unparseable asserts and
/// oversized domains answer `unknown`.
pub fn run_shim(input: &str, default_lo: i64, default_hi: i64) -> String {
    let exprs = parse_sexprs(input);
    let mut state = ShimState { names: Vec::new(), asserts: Vec::new() };
    let mut check = false;
    let mut want_model = false;
    for e in &exprs {
        let SExpr::List(items) = e else { continue };
        let Some(SExpr::Atom(cmd)) = items.first() else { continue };
        match cmd.as_str() {
            "set-logic" | "set-option" | "set-info" => {}
            "declare-const" => {
                if let Some(SExpr::Atom(name)) = items.get(1) {
                    state.names.push(name.clone());
                }
            }
            "declare-fun" => {
                // (declare-fun name () Int)
                if let (Some(SExpr::Atom(name)), Some(SExpr::List(args))) =
                    (items.get(1), items.get(2))
                {
                    if args.is_empty() {
                        state.names.push(name.clone());
                    }
                }
            }
            "assert" => {
                let Some(body) = items.get(1) else { return "unknown\n".into() };
                match state.parse_bool(&body.clone()) {
                    Some(b) => state.asserts.push(b),
                    None => return "unknown\n".into(),
                }
            }
            "check-sat" => check = true,
            "get-model" => want_model = true,
            "exit" => break,
            _ => {}
        }
    }
    if !check {
        return String::new();
    }

    let n = state.names.len();
    let bounds =
        extract_bounds(&state.asserts, n, &BigInt::from(default_lo), &BigInt::from(default_hi));
    let mut size = BigInt::from(1);
    for (lo, hi) in &bounds {
        if lo > hi {
            return "unsat\n".into();
        }
        size *= hi - lo + 1;
    }
    if size > BigInt::from(super::DEFAULT_DOMAIN_CAP) {
        return "unknown\n".into();
    }

    let mut current: Vec<BigInt> = bounds.iter().map(|(lo, _)| lo.clone()).collect();
    loop {
        let sat = state
            .asserts
            .iter()
            .all(|a| shim_eval_bool(a, &current) == Some(true));
        if sat {
            let mut out = String::from("sat\n");
            if want_model {
                out.push_str("(model\n");
                for (name, value) in state.names.iter().zip(&current) {
                    if value.is_negative() {
                        out.push_str(&format!(
                            "  (define-fun {name} () Int (- {}))\n",
                            value.magnitude()
                        ));
                    } else {
                        out.push_str(&format!("  (define-fun {name} () Int {value})\n"));
                    }
                }
                out.push_str(")\n");
            }
            return out;
        }
        let mut pos = n;
        loop {
            if pos == 0 {
                return "unsat\n".into();
            }
            pos -= 1;
            if current[pos] < bounds[pos].1 {
                current[pos] += 1;
                for later in pos + 1..n {
                    current[later] = bounds[later].0.clone();
                }
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn decls(names: &[&str]) -> Vec<SymbolDecl> {
        names.iter().map(|n| SymbolDecl { name: n.to_string(), sort: Sort::Int }).collect()
    }

    #[test]
    fn script_contains_declaration_and_assert() {
        let terms = vec![ConstraintTerm::Cmp(
            CmpOp::Gt,
            IntTerm::Sym(0),
            IntTerm::Lit(BigInt::from(5)),
        )];
        let script = emit_smtlib(&decls(&["x"]), &[], &terms);
        assert!(script.contains("(declare-const x Int)"));
        assert!(script.contains("(assert (> x 5))"));
        assert!(script.contains("(check-sat)"));
    }

    #[test]
    fn empty_conjunction_still_checks_sat() {
        let script = emit_smtlib(&[], &[], &[]);
        assert!(script.contains("(check-sat)"));
        assert!(!script.contains("declare-const"));
        let answer = run_shim(&script, -64, 64);
        assert!(answer.starts_with("sat"));
    }

    #[test]
    fn duplicate_symbol_is_declared_once() {
        let terms = vec![
            ConstraintTerm::Cmp(CmpOp::Gt, IntTerm::Sym(0), IntTerm::Lit(BigInt::from(5))),
            ConstraintTerm::Cmp(CmpOp::Lt, IntTerm::Sym(0), IntTerm::Lit(BigInt::from(9))),
        ];
        let script = emit_smtlib(&decls(&["x"]), &[], &terms);
        assert_eq!(script.matches("declare-const x").count(), 1);
    }

    #[test]
    fn emission_is_deterministic() {
        let terms = vec![ConstraintTerm::Cmp(CmpOp::Ge, IntTerm::Sym(1), IntTerm::Sym(0))];
        let d = decls(&["x", "y"]);
        assert_eq!(emit_smtlib(&d, &[], &terms), emit_smtlib(&d, &[], &terms));
    }

    #[test]
    fn shim_answers_sat_with_model() {
        let terms = vec![ConstraintTerm::Cmp(
            CmpOp::Gt,
            IntTerm::Sym(0),
            IntTerm::Lit(BigInt::from(5)),
        )];
        let d = decls(&["x"]);
        let script = emit_smtlib(&d, &[], &terms);
        let answer = run_shim(&script, 0, 8);
        assert!(answer.starts_with("sat"), "got: {answer}");
        assert!(answer.contains("(define-fun x () Int 6)"), "got: {answer}");
    }

    #[test]
    fn shim_answers_unsat() {
        let terms = vec![
            ConstraintTerm::Cmp(CmpOp::Gt, IntTerm::Sym(0), IntTerm::Lit(BigInt::from(5))),
            ConstraintTerm::Cmp(CmpOp::Lt, IntTerm::Sym(0), IntTerm::Lit(BigInt::from(3))),
        ];
        let d = decls(&["x"]);
        let script = emit_smtlib(&d, &[], &terms);
        assert_eq!(run_shim(&script, 0, 8), "unsat\n");
    }

    #[test]
    fn shim_handles_floor_div_lowering() {
        // x / -2 == 3 has floor-division solutions x in {-7, -8}.
        let terms = vec![ConstraintTerm::Cmp(
            CmpOp::Eq,
            IntTerm::FloorDiv(Box::new(IntTerm::Sym(0)), Box::new(IntTerm::Lit(BigInt::from(-2)))),
            IntTerm::Lit(BigInt::from(3)),
        )];
        let d = decls(&["x"]);
        let script = emit_smtlib(&d, &[], &terms);
        let answer = run_shim(&script, -10, 10);
        assert!(answer.starts_with("sat"), "got: {answer}");
        let model_ok = answer.contains("(- 7)") || answer.contains("(- 8)");
        assert!(model_ok, "got: {answer}");
    }

    #[test]
    fn model_parsing_reads_negative_values() {
        let text = "(model (define-fun x () Int (- 7)))";
        let d = decls(&["x"]);
        let terms = vec![ConstraintTerm::Cmp(
            CmpOp::Lt,
            IntTerm::Sym(0),
            IntTerm::Lit(BigInt::zero()),
        )];
        let model = parse_model(text, &d, &[], &terms).unwrap();
        assert_eq!(model.get(&0), Some(&ModelValue::Int(BigInt::from(-7))));
    }
}
