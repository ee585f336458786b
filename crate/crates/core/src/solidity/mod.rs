//! Parser, renderer and fact extraction for the Solidity subset used by the
//! corpus: pragmas, imports, contracts with inheritance, state variables
//! (including nested mappings), functions, modifiers, `require`,
//! assignments, low-level and member value transfers, `if`, `emit` and
//! `return`. Anything else that is balanced is kept as an opaque statement.

pub mod ast;
pub mod facts;
mod lexer;
mod parser;
mod render;

pub use ast::*;
pub use facts::{
    call_sites, function_facts, guard_reads, modifier_facts, state_reads, state_writes, statement_kind, CallKind,
    ContractScope, ExternalCall, Fact, StateWrite, StatementKind,
};
pub use parser::parse;
pub use render::{render, render_expr, render_function_header, render_simple_statement, render_state_var};

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl ParseError {
    pub fn new(line: usize, column: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            column,
            message: message.into(),
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}", self.line, self.column, self.message)
    }
}

/// Modifiers that are provided by well-known imported base contracts.
pub const KNOWN_IMPORTED_MODIFIERS: &[&str] = &["nonReentrant", "onlyOwner", "whenNotPaused", "whenPaused"];

/// Modifier invocations in `unit` that resolve neither to a modifier declared
/// in the contract (or a base in the same unit), a base-constructor call,
/// nor a known imported modifier. Returns `(contract, function, modifier)`.
pub fn unresolved_modifiers(unit: &SourceUnit) -> Vec<(String, String, String)> {
    fn declared(unit: &SourceUnit, c: &ContractDef, name: &str, depth: usize) -> bool {
        if depth > 32 {
            return false;
        }
        c.modifier(name).is_some()
            || c.base_names().any(|b| b == name)
            || c.bases.iter().any(|b| unit.contract(&b.name).is_some_and(|bc| declared(unit, bc, name, depth + 1)))
    }
    let mut out = Vec::new();
    for c in &unit.contracts {
        for f in c.functions() {
            for m in &f.modifiers {
                if !declared(unit, c, &m.name, 0) && !KNOWN_IMPORTED_MODIFIERS.contains(&m.name.as_str()) {
                    out.push((c.name.clone(), f.name.clone(), m.name.clone()));
                }
            }
        }
    }
    out
}

/// Function names declared more than once in a contract (overloads).
pub fn duplicate_function_names(contract: &ContractDef) -> Vec<String> {
    let mut seen = std::collections::BTreeSet::new();
    let mut dups = Vec::new();
    for f in contract.functions() {
        if f.kind == FunctionKind::Function && !seen.insert(f.name.as_str()) {
            dups.push(f.name.clone());
        }
    }
    dups
}
