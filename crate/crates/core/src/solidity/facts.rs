//! Ordered per-function facts: external calls, state writes, guard reads.
//!
//! Facts are indexed by the position of the enclosing top-level statement in
//! the function body. Statements nested in `if` branches or blocks share the
//! index of the statement that contains them.

use std::collections::{BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::ast::*;
use super::render::render_expr;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CallKind {
    LowLevelCall,
    Delegatecall,
    Send,
    Transfer,
    InterfaceCall,
}

impl CallKind {
    /// `transfer`/`send` member calls and `call` with a value option.
    pub fn is_value_transfer_member(self) -> bool {
        matches!(self, CallKind::Send | CallKind::Transfer)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExternalCall {
    pub callee_kind: CallKind,
    pub value_arg: Option<String>,
    pub target: String,
    /// Explicit gas limit (`{gas: n}` or legacy `.gas(n)`).
    pub gas_arg: Option<String>,
    /// Called method for interface calls.
    pub method: Option<String>,
}

impl ExternalCall {
    /// Explicit gas limit small enough that the callee cannot write storage.
    /// The implicit `transfer`/`send` stipend does not count: gas repricing
    /// has made it an unreliable guard.
    pub fn is_gas_limited(&self) -> bool {
        self.gas_arg
            .as_deref()
            .and_then(|g| g.replace('_', "").parse::<u64>().ok())
            .is_some_and(|g| g <= 2300)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateWrite {
    pub index: usize,
    /// Written expression as text, e.g. `balances[msg.sender]`.
    pub target_path: String,
    /// State variable the write is attributed to.
    pub state_var: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fact {
    /// State variables read by a `require`/`assert` or branch condition.
    Guard { index: usize, vars: BTreeSet<String>, expr: String },
    Call { index: usize, call: ExternalCall },
    Write(StateWrite),
    Opaque { index: usize, text: String },
    /// `_;` in a modifier body.
    Placeholder { index: usize },
}

impl Fact {
    pub fn index(&self) -> usize {
        match self {
            Fact::Guard { index, .. } | Fact::Call { index, .. } | Fact::Opaque { index, .. } | Fact::Placeholder { index } => *index,
            Fact::Write(w) => w.index,
        }
    }
}

/// Statement classification used by analyses and reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatementKind {
    RequireGuard,
    Assignment,
    ExternalCallStmt,
    LocalDecl,
    IfBlock,
    Emit,
    ReturnStmt,
    Expression,
}

/// Names and types visible to a contract's functions.
#[derive(Debug, Clone, Default)]
pub struct ContractScope {
    /// State variable name to type text, including variables inherited from
    /// bases defined in the same source unit.
    pub state_vars: HashMap<String, String>,
    /// Struct and enum names; these are capitalized but are not contracts.
    pub value_types: BTreeSet<String>,
}

impl ContractScope {
    pub fn new(unit: &SourceUnit, contract: &ContractDef) -> Self {
        let mut scope = Self::default();
        let mut seen = BTreeSet::new();
        scope.absorb(unit, contract, &mut seen);
        for item in &unit.free_items {
            let mut words = item.split_whitespace();
            if let (Some("struct" | "enum"), Some(name)) = (words.next(), words.next()) {
                scope.value_types.insert(name.to_string());
            }
        }
        scope
    }

    /// Scope built from the contract alone, ignoring inheritance.
    pub fn standalone(contract: &ContractDef) -> Self {
        let mut scope = Self::default();
        for v in contract.state_vars() {
            scope.state_vars.insert(v.name.clone(), v.ty.clone());
        }
        scope.value_types.extend(contract.declared_type_names());
        scope
    }

    fn absorb(&mut self, unit: &SourceUnit, contract: &ContractDef, seen: &mut BTreeSet<String>) {
        if !seen.insert(contract.name.clone()) {
            return;
        }
        for base in &contract.bases {
            if let Some(b) = unit.contract(&base.name) {
                self.absorb(unit, b, seen);
            }
        }
        for v in contract.state_vars() {
            self.state_vars.insert(v.name.clone(), v.ty.clone());
        }
        self.value_types.extend(contract.declared_type_names());
    }

    pub fn is_state_var(&self, name: &str) -> bool {
        self.state_vars.contains_key(name)
    }

    fn is_contract_type(&self, ty: &str) -> bool {
        let base = ty.trim_end_matches("[]");
        base.chars().next().is_some_and(|c| c.is_ascii_uppercase()) && !self.value_types.contains(base) && !base.contains('.')
    }
}

#[derive(Debug, Clone, Default)]
struct Local {
    ty: String,
    /// State variable a `storage` pointer refers to.
    storage_alias: Option<String>,
    /// State variables whose values flowed into this local.
    taint: BTreeSet<String>,
}

/// Computes the ordered fact list for a function or modifier body.
pub struct FactWalker<'s> {
    scope: &'s ContractScope,
    locals: HashMap<String, Local>,
    facts: Vec<Fact>,
}

impl<'s> FactWalker<'s> {
    pub fn new(scope: &'s ContractScope, params: &[Param]) -> Self {
        let mut w = Self {
            scope,
            locals: HashMap::new(),
            facts: Vec::new(),
        };
        for p in params {
            if let Some(n) = &p.name {
                w.locals.insert(n.clone(), Local { ty: p.ty.clone(), ..Local::default() });
            }
        }
        w
    }

    pub fn walk(mut self, body: &[Statement]) -> Vec<Fact> {
        for (i, s) in body.iter().enumerate() {
            self.statement(i, s);
        }
        self.facts
    }

    fn statement(&mut self, index: usize, s: &Statement) {
        match s {
            Statement::Require { condition, message, .. } => {
                let calls = self.calls_in(condition);
                if calls.is_empty() {
                    let vars = self.reads(condition);
                    self.facts.push(Fact::Guard { index, vars, expr: render_expr(condition) });
                } else {
                    self.push_calls(index, calls);
                }
                if let Some(m) = message {
                    self.expr_effects(index, m);
                }
                self.nested_writes(index, condition);
            }
            Statement::If { condition, then_body, else_body } => {
                let calls = self.calls_in(condition);
                if calls.is_empty() {
                    let vars = self.reads(condition);
                    self.facts.push(Fact::Guard { index, vars, expr: render_expr(condition) });
                } else {
                    self.push_calls(index, calls);
                }
                self.nested_writes(index, condition);
                for st in then_body {
                    self.statement(index, st);
                }
                for st in else_body.iter().flatten() {
                    self.statement(index, st);
                }
            }
            Statement::Assign { target, op, value } => {
                let calls = self.calls_in(value);
                self.push_calls(index, calls);
                self.nested_writes(index, value);
                let mut taint = self.reads(value);
                if op != "=" {
                    taint.extend(self.reads(target));
                }
                self.write_target(index, target, taint);
            }
            Statement::LocalDecl { vars, value, .. } => {
                let mut taint = BTreeSet::new();
                if let Some(v) = value {
                    let calls = self.calls_in(v);
                    self.push_calls(index, calls);
                    self.nested_writes(index, v);
                    taint = self.reads(v);
                }
                let alias = value.as_ref().and_then(|v| self.storage_root(v));
                for p in vars.iter().flatten() {
                    if let Some(n) = &p.name {
                        let storage_alias = if p.location.as_deref() == Some("storage") { alias.clone() } else { None };
                        self.locals.insert(
                            n.clone(),
                            Local {
                                ty: p.ty.clone(),
                                storage_alias,
                                taint: taint.clone(),
                            },
                        );
                    }
                }
            }
            Statement::Emit(e) | Statement::Expression(e) | Statement::Return(Some(e)) => self.expr_effects(index, e),
            Statement::Return(None) => {}
            Statement::Block { body, .. } => {
                for st in body {
                    self.statement(index, st);
                }
            }
            Statement::Placeholder => self.facts.push(Fact::Placeholder { index }),
            Statement::Opaque(text) => self.facts.push(Fact::Opaque { index, text: text.clone() }),
        }
    }

    fn expr_effects(&mut self, index: usize, e: &Expr) {
        let calls = self.calls_in(e);
        self.push_calls(index, calls);
        self.nested_writes(index, e);
    }

    fn push_calls(&mut self, index: usize, calls: Vec<ExternalCall>) {
        self.facts.extend(calls.into_iter().map(|call| Fact::Call { index, call }));
    }

    /// Writes performed inside an expression: `++`, `--`, `delete` and
    /// embedded assignments.
    fn nested_writes(&mut self, index: usize, e: &Expr) {
        let mut targets = Vec::new();
        e.walk(&mut |node| match node {
            Expr::Unary { op, operand, .. } if op == "++" || op == "--" || op == "delete" => targets.push(operand.as_ref().clone()),
            Expr::Assign { target, .. } => targets.push(target.as_ref().clone()),
            _ => {}
        });
        for t in targets {
            self.write_target(index, &t, BTreeSet::new());
        }
    }

    fn write_target(&mut self, index: usize, target: &Expr, taint: BTreeSet<String>) {
        if let Expr::Tuple(items) = target {
            for item in items.iter().flatten() {
                self.write_target(index, item, taint.clone());
            }
            return;
        }
        let Some(root) = target.root_ident() else { return };
        if let Some(local) = self.locals.get_mut(root) {
            if let Some(alias) = local.storage_alias.clone() {
                self.facts.push(Fact::Write(StateWrite {
                    index,
                    target_path: render_expr(target),
                    state_var: alias,
                }));
            } else if matches!(target, Expr::Ident(_)) {
                local.taint = taint;
            }
            return;
        }
        if self.scope.is_state_var(root) {
            self.facts.push(Fact::Write(StateWrite {
                index,
                target_path: render_expr(target),
                state_var: root.to_string(),
            }));
        }
    }

    fn storage_root(&self, e: &Expr) -> Option<String> {
        let root = e.root_ident()?;
        if let Some(l) = self.locals.get(root) {
            return l.storage_alias.clone();
        }
        self.scope.is_state_var(root).then(|| root.to_string())
    }

    /// State variables read by an expression, following local taint.
    fn reads(&self, e: &Expr) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        e.walk(&mut |node| {
            if let Expr::Ident(name) = node {
                if let Some(l) = self.locals.get(name) {
                    out.extend(l.taint.iter().cloned());
                    out.extend(l.storage_alias.iter().cloned());
                } else if self.scope.is_state_var(name) {
                    out.insert(name.clone());
                }
            }
        });
        out
    }

    fn calls_in(&self, e: &Expr) -> Vec<ExternalCall> {
        let mut out = Vec::new();
        post_order(e, &mut |node| {
            if let Some(c) = self.classify(node) {
                out.push(c);
            }
        });
        out
    }

    fn var_type(&self, name: &str) -> Option<&str> {
        if let Some(l) = self.locals.get(name) {
            return Some(&l.ty);
        }
        self.scope.state_vars.get(name).map(String::as_str)
    }

    fn is_contract_typed(&self, base: &Expr) -> bool {
        match base {
            Expr::Ident(name) => self.var_type(name).is_some_and(|t| self.scope.is_contract_type(t)),
            Expr::Call { callee, args, options } if options.is_empty() && args.len() == 1 => {
                matches!(callee.as_ref(), Expr::Ident(t) if self.scope.is_contract_type(t))
            }
            Expr::Paren(inner) => self.is_contract_typed(inner),
            _ => false,
        }
    }

    /// Recognizes an external call at a `Call` node.
    pub fn classify(&self, node: &Expr) -> Option<ExternalCall> {
        let Expr::Call { callee, options, args } = node else { return None };
        let option = |key: &str| options.iter().find(|(k, _)| k == key).map(|(_, v)| render_expr(v));

        // Legacy `x.call.value(v).gas(g)(...)` chains.
        if options.is_empty() {
            let mut value = None;
            let mut gas = None;
            let mut cur = callee.as_ref();
            let mut chained = false;
            while let Expr::Call { callee: inner, args: a, options: o } = cur {
                let Expr::Member { base, member } = inner.as_ref() else { break };
                if !o.is_empty() || a.len() != 1 || !(member == "value" || member == "gas") {
                    break;
                }
                let arg = render_expr(&a.positional()[0]);
                if member == "value" {
                    value = Some(arg);
                } else {
                    gas = Some(arg);
                }
                cur = base.as_ref();
                chained = true;
            }
            if chained {
                if let Expr::Member { base, member } = cur {
                    let kind = match member.as_str() {
                        "call" => Some(CallKind::LowLevelCall),
                        "delegatecall" => Some(CallKind::Delegatecall),
                        _ => None,
                    };
                    if let Some(callee_kind) = kind {
                        return Some(ExternalCall {
                            callee_kind,
                            value_arg: value,
                            target: render_expr(base),
                            gas_arg: gas,
                            method: None,
                        });
                    }
                }
            }
        }

        let Expr::Member { base, member } = callee.as_ref() else { return None };
        match member.as_str() {
            "call" | "delegatecall" => {
                let callee_kind = if member == "call" { CallKind::LowLevelCall } else { CallKind::Delegatecall };
                return Some(ExternalCall {
                    callee_kind,
                    value_arg: option("value"),
                    target: render_expr(base),
                    gas_arg: option("gas"),
                    method: None,
                });
            }
            "staticcall" => return None,
            _ => {}
        }
        if self.is_contract_typed(base) {
            return Some(ExternalCall {
                callee_kind: CallKind::InterfaceCall,
                value_arg: option("value"),
                target: render_expr(base),
                gas_arg: option("gas"),
                method: Some(member.clone()),
            });
        }
        if (member == "transfer" || member == "send") && args.len() == 1 && options.is_empty() {
            if let CallArgs::Positional(a) = args {
                let callee_kind = if member == "send" { CallKind::Send } else { CallKind::Transfer };
                return Some(ExternalCall {
                    callee_kind,
                    value_arg: Some(render_expr(&a[0])),
                    target: render_expr(base),
                    gas_arg: None,
                    method: None,
                });
            }
        }
        None
    }
}

fn post_order<'a>(e: &'a Expr, f: &mut dyn FnMut(&'a Expr)) {
    match e {
        Expr::Ident(_) | Expr::Literal(_) | Expr::New(_) => {}
        Expr::Member { base, .. } => post_order(base, f),
        Expr::Index { base, index } => {
            post_order(base, f);
            if let Some(i) = index {
                post_order(i, f);
            }
        }
        Expr::Call { callee, options, args } => {
            post_order(callee, f);
            for (_, v) in options {
                post_order(v, f);
            }
            match args {
                CallArgs::Positional(v) => v.iter().for_each(|a| post_order(a, f)),
                CallArgs::Named(v) => v.iter().for_each(|(_, a)| post_order(a, f)),
            }
        }
        Expr::Unary { operand, .. } => post_order(operand, f),
        Expr::Binary { lhs, rhs, .. } => {
            post_order(lhs, f);
            post_order(rhs, f);
        }
        Expr::Ternary { condition, then, otherwise } => {
            post_order(condition, f);
            post_order(then, f);
            post_order(otherwise, f);
        }
        Expr::Assign { target, value, .. } => {
            post_order(value, f);
            post_order(target, f);
        }
        Expr::Tuple(items) => items.iter().flatten().for_each(|i| post_order(i, f)),
        Expr::Paren(inner) => post_order(inner, f),
        Expr::ArrayLit(items) => items.iter().for_each(|i| post_order(i, f)),
    }
    f(e);
}

/// Ordered facts of a function body.
pub fn function_facts(scope: &ContractScope, f: &FunctionDef) -> Vec<Fact> {
    FactWalker::new(scope, &f.params).walk(f.statements())
}

/// Ordered facts of a modifier body.
pub fn modifier_facts(scope: &ContractScope, m: &ModifierDef) -> Vec<Fact> {
    FactWalker::new(scope, &m.params).walk(&m.body)
}

/// External calls of `f`, ordered by statement index.
pub fn call_sites(scope: &ContractScope, f: &FunctionDef) -> Vec<(usize, ExternalCall)> {
    function_facts(scope, f)
        .into_iter()
        .filter_map(|fact| match fact {
            Fact::Call { index, call } => Some((index, call)),
            _ => None,
        })
        .collect()
}

/// Writes to state variables in `f`, ordered by statement index. Writes to
/// locals are excluded; mapping element writes are attributed to the mapping.
pub fn state_writes(scope: &ContractScope, f: &FunctionDef) -> Vec<StateWrite> {
    function_facts(scope, f)
        .into_iter()
        .filter_map(|fact| match fact {
            Fact::Write(w) => Some(w),
            _ => None,
        })
        .collect()
}

/// Guard conditions of `f` with the state variables each one reads.
pub fn guard_reads(scope: &ContractScope, f: &FunctionDef) -> Vec<(usize, BTreeSet<String>)> {
    function_facts(scope, f)
        .into_iter()
        .filter_map(|fact| match fact {
            Fact::Guard { index, vars, .. } => Some((index, vars)),
            _ => None,
        })
        .collect()
}

/// State variables read anywhere in `f`.
pub fn state_reads(scope: &ContractScope, f: &FunctionDef) -> BTreeSet<String> {
    let walker = FactWalker::new(scope, &f.params);
    let mut out = BTreeSet::new();
    visit_exprs(f.statements(), &mut |e| out.extend(walker.reads(e)));
    out
}

/// Visits every expression held by `body`, including nested bodies.
pub fn visit_exprs<'a>(body: &'a [Statement], f: &mut dyn FnMut(&'a Expr)) {
    for s in body {
        for e in s.own_exprs() {
            f(e);
        }
        for nested in s.nested() {
            visit_exprs(nested, f);
        }
    }
}

/// Classification of a statement within `f`.
pub fn statement_kind(scope: &ContractScope, f: &FunctionDef, s: &Statement) -> StatementKind {
    let walker = FactWalker::new(scope, &f.params);
    let has_call = s.own_exprs().iter().any(|e| !walker.calls_in(e).is_empty());
    match s {
        Statement::Require { .. } => StatementKind::RequireGuard,
        Statement::If { .. } => StatementKind::IfBlock,
        _ if has_call => StatementKind::ExternalCallStmt,
        Statement::Assign { .. } => StatementKind::Assignment,
        Statement::LocalDecl { .. } => StatementKind::LocalDecl,
        Statement::Emit(_) => StatementKind::Emit,
        Statement::Return(_) => StatementKind::ReturnStmt,
        _ => StatementKind::Expression,
    }
}
