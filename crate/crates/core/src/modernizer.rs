//! Source-to-source modernization of legacy (pre-0.8) contracts.
//!
//! Rewrites are done on the syntax tree and re-rendered. Inputs that need no
//! rewrite come back byte-for-byte, so already-modern sources are fixpoints.
//! Constructs the rewriter cannot handle safely are reported instead of being
//! altered.

use std::collections::{BTreeSet, HashSet};
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{self, Classification};
use crate::solidity::{
    self, CallArgs, ContractDef, ContractKind, Expr, FunctionKind, Member, Param, ParseError, SourceUnit, Statement,
    Visibility,
};

pub const TARGET_PRAGMA: &str = "^0.8.19";
const TRANSFER_FAILED: &str = "\"Transfer failed\"";
const SAFEMATH: &str = "SafeMath";
const SAFEMATH_OPS: &[(&str, &str)] = &[("add", "+"), ("sub", "-"), ("mul", "*"), ("div", "/"), ("mod", "%")];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transform {
    PragmaRewrite,
    TransferToCall,
    SendToCall,
    /// Legacy `x.call.value(v)()` chains to `x.call{value: v}("")`.
    CallOptions,
    VisibilityAdded,
    SafemathStripped,
    ConstructorKeyword,
    /// Unnamed `function ()` to `fallback() external`.
    FallbackKeyword,
}

#[derive(Debug, thiserror::Error)]
pub enum ModernizeError {
    #[error("parse error at {0}")]
    Parse(#[from] ParseError),
    #[error("unsupported construct in {context}: {detail}")]
    UnsupportedConstruct { context: String, detail: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModernizationResult {
    pub source: String,
    pub transforms_applied: Vec<Transform>,
    /// Detector classification is the same before and after.
    pub label_preserved: bool,
    pub verdict_before: Classification,
    pub verdict_after: Classification,
}

/// True when the version constraint admits compilers below 0.8 (or is absent).
pub fn is_legacy_pragma(req: &str) -> bool {
    let first = req
        .split(|c: char| !(c.is_ascii_digit() || c == '.'))
        .find(|s| s.split('.').filter(|p| !p.is_empty()).count() >= 2);
    match first {
        None => true,
        Some(v) => {
            let mut parts = v.split('.').map(|p| p.parse::<u32>().unwrap_or(0));
            let major = parts.next().unwrap_or(0);
            let minor = parts.next().unwrap_or(0);
            major == 0 && minor < 8
        }
    }
}

pub fn modernize(source: &str) -> Result<ModernizationResult, ModernizeError> {
    let unit = solidity::parse(source)?;
    let before = detector::analyze(&unit).classification;
    let mut applied = BTreeSet::new();
    let out = rewrite_unit(unit, &mut applied)?;
    if applied.is_empty() {
        return Ok(ModernizationResult {
            source: source.to_string(),
            transforms_applied: Vec::new(),
            label_preserved: true,
            verdict_before: before,
            verdict_after: before,
        });
    }
    let text = solidity::render(&out);
    let reparsed = solidity::parse(&text)?;
    let after = detector::analyze(&reparsed).classification;
    Ok(ModernizationResult {
        source: text,
        transforms_applied: applied.into_iter().collect(),
        label_preserved: before == after,
        verdict_before: before,
        verdict_after: after,
    })
}

fn unsupported(context: &str, detail: impl Into<String>) -> ModernizeError {
    ModernizeError::UnsupportedConstruct {
        context: context.to_string(),
        detail: detail.into(),
    }
}

fn rewrite_unit(mut unit: SourceUnit, applied: &mut BTreeSet<Transform>) -> Result<SourceUnit, ModernizeError> {
    let legacy = is_legacy_pragma(&unit.pragma_req);
    if legacy {
        unit.pragma_req = TARGET_PRAGMA.to_string();
        applied.insert(Transform::PragmaRewrite);
    }

    let safemath = unit.imports.iter().any(|i| i.path.ends_with("SafeMath.sol"))
        || unit.contracts.iter().any(|c| {
            c.name == SAFEMATH || c.members.iter().any(|m| matches!(m, Member::Using { library, .. } if library == SAFEMATH))
        });
    if safemath {
        unit.imports.retain(|i| !i.path.ends_with("SafeMath.sol"));
        unit.contracts.retain(|c| !(c.kind == ContractKind::Library && c.name == SAFEMATH));
        if unit.contracts.is_empty() {
            return Err(unsupported("unit", "nothing left after removing the SafeMath library"));
        }
        applied.insert(Transform::SafemathStripped);
    }

    let contracts = std::mem::take(&mut unit.contracts);
    for c in contracts {
        let c = rewrite_contract(c, legacy, safemath, applied)?;
        unit.contracts.push(c);
    }
    Ok(unit)
}

fn rewrite_contract(
    mut c: ContractDef,
    legacy: bool,
    safemath: bool,
    applied: &mut BTreeSet<Transform>,
) -> Result<ContractDef, ModernizeError> {
    let contract_name = c.name.clone();
    let members = std::mem::take(&mut c.members);
    for m in members {
        match m {
            Member::Using { ref library, .. } if safemath && library == SAFEMATH => {}
            Member::StateVar(mut v) => {
                if v.visibility == Visibility::Unspecified {
                    v.visibility = Visibility::Internal;
                    applied.insert(Transform::VisibilityAdded);
                }
                if let Some(init) = v.init.take() {
                    let mut rw = Rewriter::new(legacy, safemath, applied, format!("{contract_name}.{}", v.name), &[]);
                    v.init = Some(rw.pure_expr(init)?);
                }
                c.members.push(Member::StateVar(v));
            }
            Member::Function(mut f) => {
                if f.kind == FunctionKind::Function && f.name == contract_name {
                    f.kind = FunctionKind::Constructor;
                    f.name = "constructor".into();
                    f.visibility = Visibility::Unspecified;
                    applied.insert(Transform::ConstructorKeyword);
                }
                if f.kind == FunctionKind::LegacyFallback {
                    f.kind = FunctionKind::Fallback;
                    f.name = "fallback".into();
                    f.visibility = Visibility::External;
                    applied.insert(Transform::FallbackKeyword);
                }
                if f.kind == FunctionKind::Function && f.visibility == Visibility::Unspecified {
                    f.visibility = if c.kind == ContractKind::Interface { Visibility::External } else { Visibility::Public };
                    applied.insert(Transform::VisibilityAdded);
                }
                let context = format!("{contract_name}.{}", f.name);
                let mut rw = Rewriter::new(legacy, safemath, applied, context, &f.params);
                for m in &mut f.modifiers {
                    if let Some(args) = m.args.take() {
                        m.args = Some(args.into_iter().map(|a| rw.pure_expr(a)).collect::<Result<_, _>>()?);
                    }
                }
                if let Some(body) = f.body.take() {
                    rw.reserve_names(&body);
                    f.body = Some(rw.body(body)?);
                }
                c.members.push(Member::Function(f));
            }
            Member::Modifier(mut d) => {
                let mut rw = Rewriter::new(legacy, safemath, applied, format!("{contract_name}.{}", d.name), &d.params);
                let body = std::mem::take(&mut d.body);
                rw.reserve_names(&body);
                d.body = rw.body(body)?;
                c.members.push(Member::Modifier(d));
            }
            Member::Opaque(text) => {
                check_opaque(&text, legacy, safemath, &contract_name)?;
                c.members.push(Member::Opaque(text));
            }
            other => c.members.push(other),
        }
    }
    let bases = std::mem::take(&mut c.bases);
    let mut rw = Rewriter::new(legacy, safemath, applied, contract_name, &[]);
    for mut b in bases {
        if let Some(args) = b.args.take() {
            b.args = Some(args.into_iter().map(|a| rw.pure_expr(a)).collect::<Result<_, _>>()?);
        }
        c.bases.push(b);
    }
    Ok(c)
}

fn squash(text: &str) -> String {
    text.chars().filter(|c| !c.is_whitespace()).collect()
}

/// Opaque text is never rewritten; it is rejected when it holds something
/// that would need to be.
fn check_opaque(text: &str, legacy: bool, safemath: bool, context: &str) -> Result<(), ModernizeError> {
    let flat = squash(text);
    if legacy {
        for needle in [".transfer(", ".send(", ".value(", ".gas("] {
            if flat.contains(needle) {
                return Err(unsupported(context, format!("`{needle}` inside unparsed construct `{text}`")));
            }
        }
        if text.split(|c: char| !(c.is_alphanumeric() || c == '_')).any(|w| w == "throw") {
            return Err(unsupported(context, format!("`throw` in `{text}`")));
        }
    }
    if safemath {
        for (name, _) in SAFEMATH_OPS {
            if flat.contains(&format!(".{name}(")) {
                return Err(unsupported(context, format!("SafeMath call inside unparsed construct `{text}`")));
            }
        }
    }
    Ok(())
}

struct Rewriter<'a> {
    legacy: bool,
    safemath: bool,
    applied: &'a mut BTreeSet<Transform>,
    context: String,
    used: HashSet<String>,
    next_fresh: usize,
}

impl<'a> Rewriter<'a> {
    fn new(legacy: bool, safemath: bool, applied: &'a mut BTreeSet<Transform>, context: String, params: &[Param]) -> Self {
        Self {
            legacy,
            safemath,
            applied,
            context,
            used: params.iter().filter_map(|p| p.name.clone()).collect(),
            next_fresh: 0,
        }
    }

    fn reserve_names(&mut self, body: &[Statement]) {
        for s in body {
            if let Statement::LocalDecl { vars, .. } = s {
                self.used.extend(vars.iter().flatten().filter_map(|p| p.name.clone()));
            }
            for e in s.own_exprs() {
                e.walk(&mut |x| {
                    if let Expr::Ident(n) = x {
                        self.used.insert(n.clone());
                    }
                });
            }
            for nested in s.nested() {
                self.reserve_names(nested);
            }
        }
    }

    fn fresh(&mut self) -> String {
        loop {
            self.next_fresh += 1;
            let name = if self.next_fresh == 1 { "success".to_string() } else { format!("success{}", self.next_fresh) };
            if self.used.insert(name.clone()) {
                return name;
            }
        }
    }

    fn body(&mut self, body: Vec<Statement>) -> Result<Vec<Statement>, ModernizeError> {
        let mut out = Vec::with_capacity(body.len());
        for s in body {
            out.extend(self.statement(s)?);
        }
        Ok(out)
    }

    fn statement(&mut self, s: Statement) -> Result<Vec<Statement>, ModernizeError> {
        let mut pre = Vec::new();
        let stmt = match s {
            Statement::Opaque(text) => {
                check_opaque(&text, self.legacy, self.safemath, &self.context)?;
                Statement::Opaque(text)
            }
            Statement::Expression(e) if self.legacy && value_member(&e, "transfer").is_some() => {
                let (target, amount) = value_member(&e, "transfer").unwrap();
                let (target, amount) = (self.pure_expr(target.clone())?, self.pure_expr(amount.clone())?);
                let name = self.fresh();
                self.applied.insert(Transform::TransferToCall);
                return Ok(vec![
                    success_decl(&name, value_call(target, Some(amount), None, Vec::new())),
                    Statement::Require {
                        func: "require".into(),
                        condition: Expr::ident(&name),
                        message: Some(Expr::Literal(TRANSFER_FAILED.into())),
                    },
                ]);
            }
            Statement::Expression(e) => {
                let e = self.expr(e, &mut pre, false)?;
                // A bare send or legacy call leaves only its hoisted declaration.
                if matches!(&e, Expr::Ident(n) if pre.iter().any(|s| declares(s, n))) {
                    return Ok(pre);
                }
                Statement::Expression(e)
            }
            Statement::Require { func, condition, message } => Statement::Require {
                func,
                condition: self.expr(condition, &mut pre, false)?,
                message: message.map(|m| self.expr(m, &mut pre, false)).transpose()?,
            },
            Statement::LocalDecl { vars, tuple: true, value: Some(value) } if self.legacy && is_legacy_call(&value) => {
                Statement::LocalDecl {
                    vars,
                    tuple: true,
                    value: Some(self.call_in_place(value, &mut pre)?),
                }
            }
            Statement::Assign { target: target @ Expr::Tuple(_), op, value } if self.legacy && is_legacy_call(&value) => {
                Statement::Assign {
                    target: self.expr(target, &mut pre, false)?,
                    op,
                    value: self.call_in_place(value, &mut pre)?,
                }
            }
            Statement::Assign { target, op, value } => {
                let value = self.expr(value, &mut pre, false)?;
                Statement::Assign {
                    target: self.expr(target, &mut pre, false)?,
                    op,
                    value,
                }
            }
            Statement::LocalDecl { vars, tuple, value } => Statement::LocalDecl {
                vars,
                tuple,
                value: value.map(|v| self.expr(v, &mut pre, false)).transpose()?,
            },
            Statement::If { condition, then_body, else_body } => Statement::If {
                condition: self.expr(condition, &mut pre, false)?,
                then_body: self.body(then_body)?,
                else_body: else_body.map(|b| self.body(b)).transpose()?,
            },
            Statement::Emit(e) => Statement::Emit(self.expr(e, &mut pre, false)?),
            Statement::Return(e) => Statement::Return(e.map(|e| self.expr(e, &mut pre, false)).transpose()?),
            Statement::Block { unchecked, body } => Statement::Block {
                unchecked,
                body: self.body(body)?,
            },
            Statement::Placeholder => Statement::Placeholder,
        };
        pre.push(stmt);
        Ok(pre)
    }

    /// Converts a legacy call chain whose result is already destructured.
    fn call_in_place(&mut self, e: Expr, pre: &mut Vec<Statement>) -> Result<Expr, ModernizeError> {
        let Expr::Call { callee, args, .. } = e else { unreachable!() };
        let (target, value, gas) = legacy_chain(&callee).expect("checked by is_legacy_call");
        let target = self.expr(target, pre, false)?;
        let value = value.map(|v| self.expr(v, pre, false)).transpose()?;
        let gas = gas.map(|g| self.expr(g, pre, false)).transpose()?;
        let args = self.exprs(args.positional().to_vec(), pre, false)?;
        self.applied.insert(Transform::CallOptions);
        Ok(value_call(target, value, gas, args))
    }

    /// Rewrites an expression that has no statement to hoist into.
    fn pure_expr(&mut self, e: Expr) -> Result<Expr, ModernizeError> {
        let mut pre = Vec::new();
        let out = self.expr(e, &mut pre, true)?;
        debug_assert!(pre.is_empty());
        Ok(out)
    }

    fn hoist(&mut self, call: Expr, pre: &mut Vec<Statement>, conditional: bool) -> Result<Expr, ModernizeError> {
        if conditional {
            return Err(unsupported(
                &self.context,
                format!("value call `{}` in a position that may not be evaluated", solidity::render_expr(&call)),
            ));
        }
        let name = self.fresh();
        pre.push(success_decl(&name, call));
        Ok(Expr::ident(name))
    }

    fn exprs(&mut self, v: Vec<Expr>, pre: &mut Vec<Statement>, conditional: bool) -> Result<Vec<Expr>, ModernizeError> {
        v.into_iter().map(|e| self.expr(e, pre, conditional)).collect()
    }

    fn expr(&mut self, e: Expr, pre: &mut Vec<Statement>, conditional: bool) -> Result<Expr, ModernizeError> {
        Ok(match e {
            Expr::Call { callee, options, args } => {
                if self.legacy && options.is_empty() {
                    if let Some((target, value, gas)) = legacy_chain(&callee) {
                        let target = self.expr(target, pre, conditional)?;
                        let value = value.map(|v| self.expr(v, pre, conditional)).transpose()?;
                        let gas = gas.map(|g| self.expr(g, pre, conditional)).transpose()?;
                        let args = self.exprs(args.positional().to_vec(), pre, conditional)?;
                        self.applied.insert(Transform::CallOptions);
                        return self.hoist(value_call(target, value, gas, args), pre, conditional);
                    }
                    let whole = Expr::Call { callee, options, args };
                    if let Some((target, amount)) = value_member(&whole, "send") {
                        let target = self.expr(target.clone(), pre, conditional)?;
                        let amount = self.expr(amount.clone(), pre, conditional)?;
                        self.applied.insert(Transform::SendToCall);
                        return self.hoist(value_call(target, Some(amount), None, Vec::new()), pre, conditional);
                    }
                    if value_member(&whole, "transfer").is_some() {
                        return Err(unsupported(&self.context, "`transfer` used inside an expression"));
                    }
                    let Expr::Call { callee, options, args } = whole else { unreachable!() };
                    return self.plain_call(*callee, options, args, pre, conditional);
                }
                self.plain_call(*callee, options, args, pre, conditional)?
            }
            Expr::Binary { op, lhs, rhs } => {
                let short = op == "&&" || op == "||";
                let lhs = self.expr(*lhs, pre, conditional)?;
                let rhs = self.expr(*rhs, pre, conditional || short)?;
                Expr::binary(op, lhs, rhs)
            }
            Expr::Ternary { condition, then, otherwise } => Expr::Ternary {
                condition: Box::new(self.expr(*condition, pre, conditional)?),
                then: Box::new(self.expr(*then, pre, true)?),
                otherwise: Box::new(self.expr(*otherwise, pre, true)?),
            },
            Expr::Member { base, member } => Expr::member(self.expr(*base, pre, conditional)?, member),
            Expr::Index { base, index } => Expr::Index {
                base: Box::new(self.expr(*base, pre, conditional)?),
                index: index.map(|i| self.expr(*i, pre, conditional).map(Box::new)).transpose()?,
            },
            Expr::Unary { op, operand, postfix } => Expr::Unary {
                op,
                operand: Box::new(self.expr(*operand, pre, conditional)?),
                postfix,
            },
            Expr::Assign { op, target, value } => {
                let value = self.expr(*value, pre, conditional)?;
                Expr::Assign {
                    op,
                    target: Box::new(self.expr(*target, pre, conditional)?),
                    value: Box::new(value),
                }
            }
            Expr::Tuple(items) => Expr::Tuple(
                items
                    .into_iter()
                    .map(|i| i.map(|e| self.expr(e, pre, conditional)).transpose())
                    .collect::<Result<_, _>>()?,
            ),
            Expr::Paren(inner) => Expr::Paren(Box::new(self.expr(*inner, pre, conditional)?)),
            Expr::ArrayLit(items) => Expr::ArrayLit(self.exprs(items, pre, conditional)?),
            leaf @ (Expr::Ident(_) | Expr::Literal(_) | Expr::New(_)) => leaf,
        })
    }

    fn plain_call(
        &mut self,
        callee: Expr,
        options: Vec<(String, Expr)>,
        args: CallArgs,
        pre: &mut Vec<Statement>,
        conditional: bool,
    ) -> Result<Expr, ModernizeError> {
        if self.safemath && options.is_empty() {
            if let (Expr::Member { base, member }, CallArgs::Positional(a)) = (&callee, &args) {
                if let Some((_, op)) = SAFEMATH_OPS.iter().find(|(name, _)| name == member) {
                    let is_static = matches!(base.as_ref(), Expr::Ident(n) if n == SAFEMATH);
                    let operands = match (is_static, a.len()) {
                        (true, 2) => Some((a[0].clone(), a[1].clone())),
                        (false, 1) => Some((base.as_ref().clone(), a[0].clone())),
                        _ => None,
                    };
                    let Some((l, r)) = operands else {
                        return Err(unsupported(
                            &self.context,
                            format!("SafeMath `{member}` with {} argument(s)", a.len()),
                        ));
                    };
                    let l = self.expr(l, pre, conditional)?;
                    let r = self.expr(r, pre, conditional)?;
                    self.applied.insert(Transform::SafemathStripped);
                    return Ok(Expr::binary(*op, wrap(l), wrap(r)));
                }
            }
        }
        let callee = self.expr(callee, pre, conditional)?;
        let options = options
            .into_iter()
            .map(|(k, v)| self.expr(v, pre, conditional).map(|v| (k, v)))
            .collect::<Result<_, _>>()?;
        let args = match args {
            CallArgs::Positional(v) => CallArgs::Positional(self.exprs(v, pre, conditional)?),
            CallArgs::Named(v) => CallArgs::Named(
                v.into_iter()
                    .map(|(k, e)| self.expr(e, pre, conditional).map(|e| (k, e)))
                    .collect::<Result<_, _>>()?,
            ),
        };
        Ok(Expr::Call {
            callee: Box::new(callee),
            options,
            args,
        })
    }
}

fn wrap(e: Expr) -> Expr {
    match e {
        Expr::Binary { .. } | Expr::Ternary { .. } | Expr::Assign { .. } => Expr::Paren(Box::new(e)),
        other => other,
    }
}

fn declares(s: &Statement, name: &str) -> bool {
    matches!(s, Statement::LocalDecl { vars, .. } if vars.iter().flatten().any(|p| p.name.as_deref() == Some(name)))
}

/// `(bool name,) = call;`
fn success_decl(name: &str, call: Expr) -> Statement {
    Statement::LocalDecl {
        vars: vec![Some(Param::new("bool", name)), None],
        tuple: true,
        value: Some(call),
    }
}

fn value_call(target: Expr, value: Option<Expr>, gas: Option<Expr>, args: Vec<Expr>) -> Expr {
    let mut options = Vec::new();
    if let Some(v) = value {
        options.push(("value".to_string(), v));
    }
    if let Some(g) = gas {
        options.push(("gas".to_string(), g));
    }
    let args = if args.is_empty() { vec![Expr::Literal("\"\"".into())] } else { args };
    Expr::Call {
        callee: Box::new(Expr::member(target, "call")),
        options,
        args: CallArgs::Positional(args),
    }
}

/// `target.<member>(amount)` with a single positional argument.
fn value_member<'e>(e: &'e Expr, member: &str) -> Option<(&'e Expr, &'e Expr)> {
    let Expr::Call { callee, options, args: CallArgs::Positional(a) } = e else { return None };
    let Expr::Member { base, member: m } = callee.as_ref() else { return None };
    (m == member && options.is_empty() && a.len() == 1).then(|| (base.as_ref(), &a[0]))
}

fn is_legacy_call(e: &Expr) -> bool {
    matches!(e, Expr::Call { callee, options, .. } if options.is_empty() && legacy_chain(callee).is_some())
}

/// Splits `x.call.value(v).gas(g)` into `(x, v, g)`.
fn legacy_chain(callee: &Expr) -> Option<(Expr, Option<Expr>, Option<Expr>)> {
    let mut value = None;
    let mut gas = None;
    let mut cur = callee;
    let mut chained = false;
    while let Expr::Call { callee: inner, options, args: CallArgs::Positional(a) } = cur {
        let Expr::Member { base, member } = inner.as_ref() else { return None };
        if !options.is_empty() || a.len() != 1 {
            return None;
        }
        match member.as_str() {
            "value" if value.is_none() => value = Some(a[0].clone()),
            "gas" if gas.is_none() => gas = Some(a[0].clone()),
            _ => return None,
        }
        cur = base;
        chained = true;
    }
    match cur {
        Expr::Member { base, member } if chained && member == "call" => Some((base.as_ref().clone(), value, gas)),
        _ => None,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub ok: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchEntry {
    pub file: String,
    #[serde(flatten)]
    pub outcome: BatchOutcome,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum BatchOutcome {
    Ok {
        transforms_applied: Vec<Transform>,
        label_preserved: bool,
        verdict_before: Classification,
        verdict_after: Classification,
    },
    Error {
        error: String,
    },
}

/// Modernizes every `.sol` file in `dir_in` (sorted by name) into `dir_out`.
/// Per-file failures are logged and counted; the batch keeps going.
pub fn modernize_batch(dir_in: &Path, dir_out: &Path, log: Option<&Path>) -> io::Result<(BatchSummary, Vec<BatchEntry>)> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir_in)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file() && p.extension().is_some_and(|x| x == "sol"))
        .collect();
    files.sort();
    fs::create_dir_all(dir_out)?;

    let results: Vec<(BatchEntry, Option<String>)> = files
        .par_iter()
        .map(|path| {
            let file = path.file_name().unwrap().to_string_lossy().into_owned();
            let outcome = fs::read_to_string(path)
                .map_err(|e| e.to_string())
                .and_then(|src| modernize(&src).map_err(|e| e.to_string()));
            match outcome {
                Ok(r) => (
                    BatchEntry {
                        file,
                        outcome: BatchOutcome::Ok {
                            transforms_applied: r.transforms_applied,
                            label_preserved: r.label_preserved,
                            verdict_before: r.verdict_before,
                            verdict_after: r.verdict_after,
                        },
                    },
                    Some(r.source),
                ),
                Err(error) => (
                    BatchEntry {
                        file,
                        outcome: BatchOutcome::Error { error },
                    },
                    None,
                ),
            }
        })
        .collect();

    let mut summary = BatchSummary::default();
    let mut entries = Vec::with_capacity(results.len());
    for (entry, source) in results {
        match source {
            Some(src) => {
                fs::write(dir_out.join(&entry.file), src)?;
                summary.ok += 1;
            }
            None => summary.failed += 1,
        }
        entries.push(entry);
    }
    if let Some(log) = log {
        let mut w = io::BufWriter::new(fs::File::create(log)?);
        for e in &entries {
            serde_json::to_writer(&mut w, e)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    Ok((summary, entries))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legacy_pragma_detection() {
        assert!(is_legacy_pragma("^0.4.24"));
        assert!(is_legacy_pragma(">=0.4.22 <0.6.0"));
        assert!(is_legacy_pragma(">=0.7.0 <0.9.0"));
        assert!(is_legacy_pragma(""));
        assert!(!is_legacy_pragma("^0.8.0"));
        assert!(!is_legacy_pragma(">=0.8.0 <0.9.0"));
    }

    #[test]
    fn transfer_becomes_checked_call() {
        let src = "pragma solidity ^0.4.24;\ncontract A {\n    function f(uint amount) public {\n        msg.sender.transfer(amount);\n    }\n}\n";
        let r = modernize(src).unwrap();
        assert!(r.source.contains("(bool success,) = msg.sender.call{value: amount}(\"\");"), "{}", r.source);
        assert!(r.source.contains("require(success, \"Transfer failed\");"));
        assert_eq!(r.transforms_applied, [Transform::PragmaRewrite, Transform::TransferToCall]);
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let src = "pragma solidity ^0.4.24;\ncontract A {\n    function f(uint success) public {\n        msg.sender.transfer(success);\n        msg.sender.transfer(1);\n    }\n}\n";
        let r = modernize(src).unwrap();
        assert!(r.source.contains("(bool success2,)"));
        assert!(r.source.contains("(bool success3,)"));
    }

    #[test]
    fn send_inside_short_circuit_is_rejected() {
        let src = "pragma solidity ^0.4.24;\ncontract A {\n    function f(bool a) public {\n        require(a || msg.sender.send(1));\n    }\n}\n";
        assert!(matches!(modernize(src), Err(ModernizeError::UnsupportedConstruct { .. })));
    }

    #[test]
    fn safemath_three_args_rejected() {
        let src = "pragma solidity ^0.6.0;\ncontract A {\n    using SafeMath for uint256;\n    uint256 x;\n    function f(uint256 a) public {\n        x = x.sub(a, \"low\");\n    }\n}\n";
        assert!(matches!(modernize(src), Err(ModernizeError::UnsupportedConstruct { .. })));
    }
}
