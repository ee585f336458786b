//! Syntax tree for the supported Solidity subset.
//!
//! Nodes carry no source positions, so two trees compare equal exactly when
//! they are structurally the same. That is what the parse/render round trip
//! relies on.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SourceUnit {
    /// Version constraint of `pragma solidity`, whitespace-normalized. Empty
    /// for pragma-less legacy files.
    pub pragma_req: String,
    /// Any other pragma (e.g. `experimental ABIEncoderV2`), text after `pragma`.
    pub extra_pragmas: Vec<String>,
    pub imports: Vec<Import>,
    /// Top-level items outside any contract, kept as normalized token text.
    pub free_items: Vec<String>,
    pub contracts: Vec<ContractDef>,
}

impl SourceUnit {
    pub fn contract(&self, name: &str) -> Option<&ContractDef> {
        self.contracts.iter().find(|c| c.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Import {
    /// Literal path, without quotes.
    pub path: String,
    /// Symbol clause such as `{ReentrancyGuard}` or `*as X`; `None` for plain imports.
    pub symbols: Option<String>,
    pub alias: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractKind {
    Contract,
    AbstractContract,
    Interface,
    Library,
}

impl ContractKind {
    pub fn keyword(self) -> &'static str {
        match self {
            ContractKind::Contract => "contract",
            ContractKind::AbstractContract => "abstract contract",
            ContractKind::Interface => "interface",
            ContractKind::Library => "library",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BaseSpec {
    pub name: String,
    pub args: Option<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractDef {
    pub kind: ContractKind,
    pub name: String,
    pub bases: Vec<BaseSpec>,
    /// Members in source order.
    pub members: Vec<Member>,
}

impl ContractDef {
    pub fn new(kind: ContractKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            bases: Vec::new(),
            members: Vec::new(),
        }
    }

    pub fn state_vars(&self) -> impl Iterator<Item = &StateVarDef> {
        self.members.iter().filter_map(|m| match m {
            Member::StateVar(v) => Some(v),
            _ => None,
        })
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionDef> {
        self.members.iter().filter_map(|m| match m {
            Member::Function(f) => Some(f),
            _ => None,
        })
    }

    pub fn modifiers(&self) -> impl Iterator<Item = &ModifierDef> {
        self.members.iter().filter_map(|m| match m {
            Member::Modifier(d) => Some(d),
            _ => None,
        })
    }

    pub fn function(&self, name: &str) -> Option<&FunctionDef> {
        self.functions().find(|f| f.name == name)
    }

    pub fn modifier(&self, name: &str) -> Option<&ModifierDef> {
        self.modifiers().find(|m| m.name == name)
    }

    pub fn state_var(&self, name: &str) -> Option<&StateVarDef> {
        self.state_vars().find(|v| v.name == name)
    }

    pub fn base_names(&self) -> impl Iterator<Item = &str> {
        self.bases.iter().map(|b| b.name.as_str())
    }

    /// Names of structs and enums declared in this contract.
    pub fn declared_type_names(&self) -> Vec<String> {
        self.members
            .iter()
            .filter_map(|m| match m {
                Member::Opaque(text) => {
                    let mut words = text.split_whitespace();
                    match words.next() {
                        Some("struct") | Some("enum") => words.next().map(str::to_string),
                        _ => None,
                    }
                }
                _ => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Member {
    StateVar(StateVarDef),
    Function(FunctionDef),
    Modifier(ModifierDef),
    Using { library: String, target: String },
    /// Events, structs, enums, errors and anything else kept as token text.
    Opaque(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Visibility {
    Public,
    External,
    Internal,
    Private,
    Unspecified,
}

impl Visibility {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Visibility::Public => Some("public"),
            Visibility::External => Some("external"),
            Visibility::Internal => Some("internal"),
            Visibility::Private => Some("private"),
            Visibility::Unspecified => None,
        }
    }

    pub fn from_keyword(word: &str) -> Option<Self> {
        Some(match word {
            "public" => Visibility::Public,
            "external" => Visibility::External,
            "internal" => Visibility::Internal,
            "private" => Visibility::Private,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mutability {
    Payable,
    View,
    Pure,
    Nonpayable,
}

impl Mutability {
    pub fn keyword(self) -> Option<&'static str> {
        match self {
            Mutability::Payable => Some("payable"),
            Mutability::View => Some("view"),
            Mutability::Pure => Some("pure"),
            Mutability::Nonpayable => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StateVarDef {
    /// Type text, e.g. `mapping(address => uint256)`.
    pub ty: String,
    pub visibility: Visibility,
    pub constant: bool,
    pub immutable: bool,
    pub name: String,
    pub init: Option<Expr>,
}

impl StateVarDef {
    pub fn new(ty: impl Into<String>, visibility: Visibility, name: impl Into<String>) -> Self {
        Self {
            ty: ty.into(),
            visibility,
            constant: false,
            immutable: false,
            name: name.into(),
            init: None,
        }
    }

    pub fn is_mapping(&self) -> bool {
        self.ty.starts_with("mapping")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub ty: String,
    /// `memory`, `storage` or `calldata`.
    pub location: Option<String>,
    pub name: Option<String>,
}

impl Param {
    pub fn new(ty: impl Into<String>, name: impl Into<String>) -> Self {
        Self {
            ty: ty.into(),
            location: None,
            name: Some(name.into()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FunctionKind {
    Function,
    Constructor,
    Fallback,
    Receive,
    /// Pre-0.6 unnamed `function () { ... }`.
    LegacyFallback,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierInvocation {
    pub name: String,
    pub args: Option<Vec<Expr>>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionDef {
    pub kind: FunctionKind,
    pub name: String,
    pub params: Vec<Param>,
    pub visibility: Visibility,
    pub mutability: Mutability,
    pub modifiers: Vec<ModifierInvocation>,
    pub is_virtual: bool,
    /// `override` specifier text (`override` or `override(A, B)`).
    pub overrides: Option<String>,
    pub returns: Vec<Param>,
    /// `None` for declarations without a body (interfaces, abstract functions).
    pub body: Option<Vec<Statement>>,
}

impl FunctionDef {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            kind: FunctionKind::Function,
            name: name.into(),
            params: Vec::new(),
            visibility: Visibility::Unspecified,
            mutability: Mutability::Nonpayable,
            modifiers: Vec::new(),
            is_virtual: false,
            overrides: None,
            returns: Vec::new(),
            body: Some(Vec::new()),
        }
    }

    pub fn statements(&self) -> &[Statement] {
        self.body.as_deref().unwrap_or(&[])
    }

    pub fn has_modifier(&self, name: &str) -> bool {
        self.modifiers.iter().any(|m| m.name == name)
    }

    /// Callable from outside the contract.
    pub fn is_externally_callable(&self) -> bool {
        matches!(self.kind, FunctionKind::Function | FunctionKind::Fallback | FunctionKind::Receive | FunctionKind::LegacyFallback)
            && matches!(self.visibility, Visibility::Public | Visibility::External | Visibility::Unspecified)
    }

    pub fn is_read_only(&self) -> bool {
        matches!(self.mutability, Mutability::View | Mutability::Pure)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModifierDef {
    pub name: String,
    pub params: Vec<Param>,
    pub is_virtual: bool,
    pub body: Vec<Statement>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// `require(...)` or `assert(...)`.
    Require { func: String, condition: Expr, message: Option<Expr> },
    Assign { target: Expr, op: String, value: Expr },
    LocalDecl { vars: Vec<Option<Param>>, tuple: bool, value: Option<Expr> },
    If { condition: Expr, then_body: Vec<Statement>, else_body: Option<Vec<Statement>> },
    Emit(Expr),
    Return(Option<Expr>),
    Expression(Expr),
    Block { unchecked: bool, body: Vec<Statement> },
    /// `_;` inside a modifier body.
    Placeholder,
    /// Balanced construct outside the subset, kept as normalized token text.
    Opaque(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CallArgs {
    Positional(Vec<Expr>),
    Named(Vec<(String, Expr)>),
}

impl CallArgs {
    pub fn positional(&self) -> &[Expr] {
        match self {
            CallArgs::Positional(v) => v,
            CallArgs::Named(_) => &[],
        }
    }

    pub fn len(&self) -> usize {
        match self {
            CallArgs::Positional(v) => v.len(),
            CallArgs::Named(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Ident(String),
    /// Numbers (with an optional unit), strings and booleans, as written.
    Literal(String),
    Member { base: Box<Expr>, member: String },
    Index { base: Box<Expr>, index: Option<Box<Expr>> },
    Call { callee: Box<Expr>, options: Vec<(String, Expr)>, args: CallArgs },
    Unary { op: String, operand: Box<Expr>, postfix: bool },
    Binary { op: String, lhs: Box<Expr>, rhs: Box<Expr> },
    Ternary { condition: Box<Expr>, then: Box<Expr>, otherwise: Box<Expr> },
    Assign { op: String, target: Box<Expr>, value: Box<Expr> },
    Tuple(Vec<Option<Expr>>),
    Paren(Box<Expr>),
    /// `new T`, with `T` as type text.
    New(String),
    ArrayLit(Vec<Expr>),
}

impl Expr {
    pub fn ident(name: impl Into<String>) -> Self {
        Expr::Ident(name.into())
    }

    pub fn member(base: Expr, member: impl Into<String>) -> Self {
        Expr::Member {
            base: Box::new(base),
            member: member.into(),
        }
    }

    pub fn call(callee: Expr, args: Vec<Expr>) -> Self {
        Expr::Call {
            callee: Box::new(callee),
            options: Vec::new(),
            args: CallArgs::Positional(args),
        }
    }

    pub fn binary(op: impl Into<String>, lhs: Expr, rhs: Expr) -> Self {
        Expr::Binary {
            op: op.into(),
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// Innermost identifier of a member/index chain (`a` in `a.b[c].d`).
    pub fn root_ident(&self) -> Option<&str> {
        match self {
            Expr::Ident(name) => Some(name),
            Expr::Member { base, .. } | Expr::Index { base, .. } => base.root_ident(),
            Expr::Paren(inner) => inner.root_ident(),
            _ => None,
        }
    }

    /// Pre-order traversal over this expression and all sub-expressions.
    pub fn walk<'a>(&'a self, f: &mut dyn FnMut(&'a Expr)) {
        f(self);
        match self {
            Expr::Ident(_) | Expr::Literal(_) | Expr::New(_) => {}
            Expr::Member { base, .. } => base.walk(f),
            Expr::Index { base, index } => {
                base.walk(f);
                if let Some(i) = index {
                    i.walk(f);
                }
            }
            Expr::Call { callee, options, args } => {
                callee.walk(f);
                for (_, v) in options {
                    v.walk(f);
                }
                match args {
                    CallArgs::Positional(v) => v.iter().for_each(|a| a.walk(f)),
                    CallArgs::Named(v) => v.iter().for_each(|(_, a)| a.walk(f)),
                }
            }
            Expr::Unary { operand, .. } => operand.walk(f),
            Expr::Binary { lhs, rhs, .. } => {
                lhs.walk(f);
                rhs.walk(f);
            }
            Expr::Ternary { condition, then, otherwise } => {
                condition.walk(f);
                then.walk(f);
                otherwise.walk(f);
            }
            Expr::Assign { target, value, .. } => {
                target.walk(f);
                value.walk(f);
            }
            Expr::Tuple(items) => items.iter().flatten().for_each(|e| e.walk(f)),
            Expr::Paren(inner) => inner.walk(f),
            Expr::ArrayLit(items) => items.iter().for_each(|e| e.walk(f)),
        }
    }
}

impl Statement {
    /// Expressions held directly by this statement (not by nested bodies).
    pub fn own_exprs(&self) -> Vec<&Expr> {
        match self {
            Statement::Require { condition, message, .. } => {
                let mut v = vec![condition];
                v.extend(message.iter());
                v
            }
            Statement::Assign { target, value, .. } => vec![target, value],
            Statement::LocalDecl { value, .. } => value.iter().collect(),
            Statement::If { condition, .. } => vec![condition],
            Statement::Emit(e) | Statement::Expression(e) => vec![e],
            Statement::Return(e) => e.iter().collect(),
            Statement::Block { .. } | Statement::Placeholder | Statement::Opaque(_) => Vec::new(),
        }
    }

    /// Nested statement lists (if branches, blocks).
    pub fn nested(&self) -> Vec<&[Statement]> {
        match self {
            Statement::If { then_body, else_body, .. } => {
                let mut v: Vec<&[Statement]> = vec![then_body];
                if let Some(e) = else_body {
                    v.push(e);
                }
                v
            }
            Statement::Block { body, .. } => vec![body],
            _ => Vec::new(),
        }
    }
}
