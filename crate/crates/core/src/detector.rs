//! Rule-based static reentrancy analyzer.
//!
//! The analysis is order-based: a function is flagged when an external call
//! precedes a write to state that guards the call (single function), that
//! guards another entry point (cross function), that another contract in the
//! unit reads through the victim (cross contract), or that a view function
//! consumed by another contract exposes (read-only). Defenses found along the
//! way either cover a call or are only reported.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::solidity::{
    function_facts, modifier_facts, state_reads, CallKind, ContractDef, ContractKind, ContractScope, ExternalCall,
    Fact, FunctionDef, FunctionKind, ModifierDef, ParseError, SourceUnit, Visibility,
};
use crate::taxonomy::{Label, Subtype};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Classification {
    Vulnerable,
    Secure,
    Inconclusive,
}

impl Classification {
    pub fn as_label(self) -> Option<Label> {
        match self {
            Classification::Vulnerable => Some(Label::Vulnerable),
            Classification::Secure => Some(Label::Secure),
            Classification::Inconclusive => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Defense {
    NonreentrantModifier,
    MutexFlag,
    CeiOrder,
    PullPayment,
    BlockLimit,
    GasGuard,
    TimestampThrottle,
    DelegationCheck,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub contract: String,
    pub function: String,
    pub subtype: Subtype,
    pub call_index: usize,
    pub write_index: usize,
    pub state_var: String,
    /// Second function of a cross-function pair, or the consumer function
    /// for cross-contract and read-only findings.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub related_function: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub related_contract: Option<String>,
    /// The flagged function holds a lock that the re-entry path avoids.
    pub guard_bypassed: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Verdict {
    pub classification: Classification,
    pub findings: Vec<Finding>,
    pub defenses_seen: Vec<Defense>,
    /// Reasons for an inconclusive classification.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl Verdict {
    /// Highest-priority subtype among the findings.
    pub fn primary_subtype(&self) -> Option<Subtype> {
        self.findings.iter().map(|f| f.subtype).min()
    }

    pub fn has_defense(&self, d: Defense) -> bool {
        self.defenses_seen.contains(&d)
    }
}

/// Parses and analyzes `source`.
pub fn analyze_source(source: &str) -> Result<Verdict, ParseError> {
    crate::solidity::parse(source).map(|u| analyze(&u))
}

pub fn analyze(unit: &SourceUnit) -> Verdict {
    let mut acc = Accumulator::default();
    let analyses: Vec<ContractAnalysis> = unit
        .contracts
        .iter()
        .filter(|c| matches!(c.kind, ContractKind::Contract | ContractKind::AbstractContract))
        .map(|c| ContractAnalysis::new(unit, c))
        .collect();

    for a in &analyses {
        a.intra_contract(&mut acc);
    }
    for a in &analyses {
        a.inter_contract(unit, &analyses, &mut acc);
    }

    let mut findings = acc.findings;
    findings.sort_by(|a, b| {
        (a.subtype, &a.contract, &a.function, a.call_index, a.write_index).cmp(&(b.subtype, &b.contract, &b.function, b.call_index, b.write_index))
    });
    let classification = if !findings.is_empty() {
        Classification::Vulnerable
    } else if !acc.notes.is_empty() {
        Classification::Inconclusive
    } else {
        Classification::Secure
    };
    Verdict {
        classification,
        findings,
        defenses_seen: acc.defenses.into_iter().collect(),
        notes: acc.notes,
    }
}

#[derive(Default)]
struct Accumulator {
    findings: Vec<Finding>,
    defenses: BTreeSet<Defense>,
    notes: Vec<String>,
}

/// What a modifier does around its `_;`.
#[derive(Debug, Clone, PartialEq, Eq)]
enum ModifierRole {
    Lock(String),
    BlockLimit,
    Throttle,
    Delegation,
    Other,
}

fn mentions_block_number(expr: &str) -> bool {
    expr.contains("block.number")
}

fn mentions_timestamp(expr: &str) -> bool {
    expr.contains("block.timestamp") || expr.split(|c: char| !c.is_alphanumeric() && c != '_').any(|w| w == "now")
}

fn mentions_self_address(expr: &str) -> bool {
    expr.contains("address(this)")
}

fn modifier_role(scope: &ContractScope, m: &ModifierDef) -> ModifierRole {
    let facts = modifier_facts(scope, m);
    let Some(split) = facts.iter().position(|f| matches!(f, Fact::Placeholder { .. })) else {
        return ModifierRole::Other;
    };
    let (before, after) = facts.split_at(split);

    // require(flag) -> set flag -> _ -> reset flag
    for (gi, g) in before.iter().enumerate() {
        let Fact::Guard { vars, expr, .. } = g else { continue };
        let written_before = |v: &str| before[gi..].iter().any(|f| matches!(f, Fact::Write(w) if w.state_var == v));
        for v in vars {
            if !written_before(v) {
                continue;
            }
            if mentions_block_number(expr) {
                return ModifierRole::BlockLimit;
            }
            if mentions_timestamp(expr) {
                return ModifierRole::Throttle;
            }
            if after.iter().any(|f| matches!(f, Fact::Write(w) if &w.state_var == v)) {
                return ModifierRole::Lock(v.clone());
            }
        }
    }
    if before.iter().any(|f| matches!(f, Fact::Guard { expr, .. } if mentions_self_address(expr))) {
        return ModifierRole::Delegation;
    }
    ModifierRole::Other
}

fn find_modifier<'a>(unit: &'a SourceUnit, contract: &'a ContractDef, name: &str, depth: usize) -> Option<&'a ModifierDef> {
    if depth > 32 {
        return None;
    }
    contract.modifier(name).or_else(|| {
        contract
            .bases
            .iter()
            .filter_map(|b| unit.contract(&b.name))
            .find_map(|b| find_modifier(unit, b, name, depth + 1))
    })
}

/// Per-function summary used by the rules.
struct FnInfo<'a> {
    def: &'a FunctionDef,
    facts: Vec<Fact>,
    /// Lock identities held for the whole body (modifier or in-body mutex).
    locks: BTreeSet<String>,
    /// Defenses from modifiers that cover every call in the body.
    modifier_cover: BTreeSet<Defense>,
    modifier_seen: BTreeSet<Defense>,
    guard_vars: BTreeSet<String>,
}

impl FnInfo<'_> {
    fn is_entry(&self) -> bool {
        self.def.is_externally_callable() && !self.def.is_read_only() && self.def.body.is_some()
    }

    fn is_explicit_view(&self) -> bool {
        self.def.kind == FunctionKind::Function
            && self.def.is_read_only()
            && matches!(self.def.visibility, Visibility::Public | Visibility::External)
            && self.def.body.is_some()
    }

    fn writes(&self, var: &str) -> bool {
        self.facts.iter().any(|f| matches!(f, Fact::Write(w) if w.state_var == var))
    }

    fn moves_value(&self, var: &str) -> bool {
        self.writes(var)
            || self.facts.iter().any(|f| {
                matches!(f, Fact::Call { call, .. } if call.value_arg.is_some() || call.callee_kind.is_value_transfer_member())
            })
    }
}

/// A call together with the guards in force when it executes.
struct CallSite<'f> {
    position: usize,
    index: usize,
    call: &'f ExternalCall,
    guards: BTreeSet<String>,
    /// Covering defenses established in the body before the call.
    body_cover: BTreeSet<Defense>,
}

fn call_sites_with_context<'f>(scope: &ContractScope, facts: &'f [Fact]) -> Vec<CallSite<'f>> {
    let mut out = Vec::new();
    let mut guards = BTreeSet::new();
    for (pos, fact) in facts.iter().enumerate() {
        match fact {
            Fact::Guard { vars, .. } => guards.extend(vars.iter().cloned()),
            Fact::Call { index, call } => {
                let body_cover = body_defenses_before(scope, &facts[..pos]).into_iter().map(|(d, _)| d).collect();
                out.push(CallSite {
                    position: pos,
                    index: *index,
                    call,
                    guards: guards.clone(),
                    body_cover,
                });
            }
            _ => {}
        }
    }
    out
}

/// Guard-then-set patterns in `prefix` that make a nested entry fail, with
/// the lock identity for mutex flags.
fn body_defenses_before(scope: &ContractScope, prefix: &[Fact]) -> Vec<(Defense, Option<String>)> {
    let mut out = Vec::new();
    for (gi, g) in prefix.iter().enumerate() {
        let Fact::Guard { vars, expr, .. } = g else { continue };
        for v in vars {
            let set_after = prefix[gi + 1..].iter().any(|f| matches!(f, Fact::Write(w) if &w.state_var == v));
            if !set_after {
                continue;
            }
            if mentions_block_number(expr) {
                out.push((Defense::BlockLimit, None));
            } else if mentions_timestamp(expr) {
                out.push((Defense::TimestampThrottle, None));
            } else if is_flag(scope, v) {
                out.push((Defense::MutexFlag, Some(v.clone())));
            }
        }
    }
    out
}

fn is_flag(scope: &ContractScope, var: &str) -> bool {
    let lower = var.to_ascii_lowercase();
    scope.state_vars.get(var).is_some_and(|t| t == "bool")
        || lower.contains("lock")
        || lower.contains("entered")
        || lower.contains("status")
        || lower.contains("mutex")
}

struct ContractAnalysis<'a> {
    contract: &'a ContractDef,
    scope: ContractScope,
    functions: Vec<FnInfo<'a>>,
}

impl<'a> ContractAnalysis<'a> {
    fn new(unit: &'a SourceUnit, contract: &'a ContractDef) -> Self {
        let scope = ContractScope::new(unit, contract);
        let functions = contract
            .functions()
            .filter(|f| f.body.is_some())
            .map(|def| {
                let facts = function_facts(&scope, def);
                let mut locks = BTreeSet::new();
                let mut modifier_cover = BTreeSet::new();
                let mut modifier_seen = BTreeSet::new();
                for inv in &def.modifiers {
                    let role = match find_modifier(unit, contract, &inv.name, 0) {
                        Some(m) => modifier_role(&scope, m),
                        None if inv.name == "nonReentrant" => ModifierRole::Lock("nonReentrant".into()),
                        None => ModifierRole::Other,
                    };
                    match role {
                        ModifierRole::Lock(id) => {
                            locks.insert(id);
                            modifier_cover.insert(Defense::NonreentrantModifier);
                        }
                        ModifierRole::BlockLimit => {
                            modifier_cover.insert(Defense::BlockLimit);
                        }
                        ModifierRole::Throttle => {
                            modifier_cover.insert(Defense::TimestampThrottle);
                        }
                        ModifierRole::Delegation => {
                            modifier_seen.insert(Defense::DelegationCheck);
                        }
                        ModifierRole::Other => {}
                    }
                }
                // An in-body mutex taken before the first call holds for the
                // whole function as far as other entry points are concerned.
                let first_call = facts.iter().position(|f| matches!(f, Fact::Call { .. })).unwrap_or(facts.len());
                for (d, id) in body_defenses_before(&scope, &facts[..first_call]) {
                    if d == Defense::MutexFlag {
                        locks.extend(id);
                    }
                }
                let guard_vars = facts
                    .iter()
                    .filter_map(|f| match f {
                        Fact::Guard { vars, .. } => Some(vars.iter().cloned()),
                        _ => None,
                    })
                    .flatten()
                    .collect();
                FnInfo {
                    def,
                    facts,
                    locks,
                    modifier_cover,
                    modifier_seen,
                    guard_vars,
                }
            })
            .collect();
        Self { contract, scope, functions }
    }

    fn finding(&self, f: &FnInfo<'_>, subtype: Subtype, site: &CallSite<'_>, write_index: usize, var: &str) -> Finding {
        Finding {
            contract: self.contract.name.clone(),
            function: f.def.name.clone(),
            subtype,
            call_index: site.index,
            write_index,
            state_var: var.to_string(),
            related_function: None,
            related_contract: None,
            guard_bypassed: false,
        }
    }

    /// State writes after a call, strictly later statement index, first per variable.
    fn writes_after(f: &FnInfo<'_>, site: &CallSite<'_>) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for fact in &f.facts[site.position + 1..] {
            if let Fact::Write(w) = fact {
                if w.index > site.index {
                    out.entry(w.state_var.clone()).or_insert(w.index);
                }
            }
        }
        out
    }

    fn intra_contract(&self, acc: &mut Accumulator) {
        self.defenses_seen(acc);
        for f in self.functions.iter().filter(|f| f.is_entry()) {
            let sites = call_sites_with_context(&self.scope, &f.facts);
            let mut flagged: BTreeSet<(usize, String)> = BTreeSet::new();
            let mut ambiguous = false;
            for site in &sites {
                if site.call.is_gas_limited() {
                    acc.defenses.insert(Defense::GasGuard);
                    continue;
                }
                let cover: BTreeSet<Defense> = f.modifier_cover.union(&site.body_cover).copied().collect();
                acc.defenses.extend(cover.iter().copied());
                let writes = Self::writes_after(f, site);

                if cover.is_empty() {
                    for (var, &j) in &writes {
                        if site.guards.contains(var) {
                            acc.findings.push(self.finding(f, Subtype::SingleFunction, site, j, var));
                            flagged.insert((site.index, var.clone()));
                        }
                    }
                    let opaque_after = f.facts[site.position + 1..].iter().any(|x| matches!(x, Fact::Opaque { .. }));
                    if opaque_after && !site.guards.is_empty() && flagged.is_empty() {
                        ambiguous = true;
                    }
                }

                for (var, &j) in &writes {
                    if flagged.contains(&(site.index, var.clone())) {
                        continue;
                    }
                    for g in self.functions.iter().filter(|g| g.is_entry() && g.def.name != f.def.name) {
                        if !g.guard_vars.contains(var) || !g.moves_value(var) {
                            continue;
                        }
                        if !f.locks.is_disjoint(&g.locks) {
                            continue;
                        }
                        let mut finding = self.finding(f, Subtype::CrossFunction, site, j, var);
                        finding.related_function = Some(g.def.name.clone());
                        finding.guard_bypassed = !f.locks.is_empty();
                        acc.findings.push(finding);
                        flagged.insert((site.index, var.clone()));
                        break;
                    }
                }
            }
            if ambiguous {
                acc.notes.push(format!(
                    "{}.{}: opaque statement after an external call may write guarded state",
                    self.contract.name, f.def.name
                ));
            }
        }
    }

    fn defenses_seen(&self, acc: &mut Accumulator) {
        for f in &self.functions {
            acc.defenses.extend(f.modifier_cover.iter().copied());
            acc.defenses.extend(f.modifier_seen.iter().copied());
            if f.facts.iter().any(|x| matches!(x, Fact::Guard { expr, .. } if mentions_self_address(expr))) {
                acc.defenses.insert(Defense::DelegationCheck);
            }
            // Effects before interactions: a guarded variable is updated
            // before the first call that follows its guard.
            let mut guards = BTreeSet::new();
            let mut updated = BTreeSet::new();
            for fact in &f.facts {
                match fact {
                    Fact::Guard { vars, .. } => guards.extend(vars.iter().cloned()),
                    Fact::Write(w) if guards.contains(&w.state_var) && !is_flag(&self.scope, &w.state_var) => {
                        updated.insert(w.state_var.clone());
                    }
                    Fact::Call { .. } if !updated.is_empty() => {
                        acc.defenses.insert(Defense::CeiOrder);
                        break;
                    }
                    _ => {}
                }
            }
        }
        // Pull payment: one call-free function credits a ledger for someone
        // other than the caller; another debits the caller's entry before paying.
        let credited: BTreeSet<&str> = self
            .functions
            .iter()
            .filter(|f| !f.facts.iter().any(|x| matches!(x, Fact::Call { .. })))
            .flat_map(|f| f.facts.iter())
            .filter_map(|x| match x {
                Fact::Write(w) if !w.target_path.contains("msg.sender") && w.target_path.contains('[') => Some(w.state_var.as_str()),
                _ => None,
            })
            .collect();
        for f in &self.functions {
            let first_call = f.facts.iter().position(|x| matches!(x, Fact::Call { call, .. } if call.value_arg.is_some()));
            if let Some(fc) = first_call {
                let debits = f.facts[..fc]
                    .iter()
                    .any(|x| matches!(x, Fact::Write(w) if credited.contains(w.state_var.as_str()) && w.target_path.contains("msg.sender")));
                if debits {
                    acc.defenses.insert(Defense::PullPayment);
                }
            }
        }
    }

    /// Calls into this contract made by `other`, as (calling function, method).
    fn inbound_calls(&self, other: &ContractAnalysis<'_>) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for g in &other.functions {
            for fact in &g.facts {
                if let Fact::Call { call, .. } = fact {
                    if call.callee_kind == CallKind::InterfaceCall {
                        if let Some(m) = &call.method {
                            out.push((g.def.name.clone(), m.clone()));
                        }
                    }
                }
            }
        }
        out
    }

    fn inter_contract(&self, unit: &SourceUnit, all: &[ContractAnalysis<'_>], acc: &mut Accumulator) {
        let consumers: Vec<&ContractAnalysis<'_>> = all
            .iter()
            .filter(|o| o.contract.name != self.contract.name && !related_by_inheritance(unit, self.contract, o.contract))
            .collect();
        let already: BTreeSet<(String, usize, String)> = acc
            .findings
            .iter()
            .filter(|x| x.contract == self.contract.name)
            .map(|x| (x.function.clone(), x.call_index, x.state_var.clone()))
            .collect();
        let views: Vec<(&FnInfo<'_>, BTreeSet<String>)> = self
            .functions
            .iter()
            .filter(|v| v.is_explicit_view())
            .map(|v| (v, state_reads(&self.scope, v.def)))
            .collect();

        for f in self.functions.iter().filter(|f| f.is_entry()) {
            for site in call_sites_with_context(&self.scope, &f.facts) {
                if site.call.is_gas_limited() {
                    continue;
                }
                for (var, j) in Self::writes_after(f, &site) {
                    if already.contains(&(f.def.name.clone(), site.index, var.clone())) {
                        continue;
                    }
                    let public_getter = self.contract.state_var(&var).is_some_and(|s| s.visibility == Visibility::Public);
                    let dependent_entry = |m: &str| {
                        self.functions
                            .iter()
                            .any(|g| g.def.name == m && g.is_entry() && g.guard_vars.contains(&var) && f.locks.is_disjoint(&g.locks))
                    };
                    let exposing_views: Vec<&str> =
                        views.iter().filter(|(_, reads)| reads.contains(&var)).map(|(v, _)| v.def.name.as_str()).collect();

                    let mut matched = false;
                    for other in &consumers {
                        for (caller, method) in self.inbound_calls(other) {
                            let subtype = if (public_getter && method == var) || dependent_entry(&method) {
                                Subtype::CrossContract
                            } else if exposing_views.contains(&method.as_str()) {
                                Subtype::ReadOnly
                            } else {
                                continue;
                            };
                            let mut finding = self.finding(f, subtype, &site, j, &var);
                            finding.related_function = Some(caller);
                            finding.related_contract = Some(other.contract.name.clone());
                            finding.guard_bypassed = !f.locks.is_empty();
                            acc.findings.push(finding);
                            matched = true;
                            break;
                        }
                        if matched {
                            break;
                        }
                    }
                    if !matched && !exposing_views.is_empty() {
                        acc.notes.push(format!(
                            "{}.{}: view {} exposes `{var}` written after an external call; no consumer in unit",
                            self.contract.name,
                            f.def.name,
                            exposing_views.join(", ")
                        ));
                    }
                }
            }
        }
    }
}

fn related_by_inheritance(unit: &SourceUnit, a: &ContractDef, b: &ContractDef) -> bool {
    fn inherits(unit: &SourceUnit, c: &ContractDef, target: &str, depth: usize) -> bool {
        depth < 32
            && c
                .bases
                .iter()
                .any(|base| base.name == target || unit.contract(&base.name).is_some_and(|bc| inherits(unit, bc, target, depth + 1)))
    }
    inherits(unit, a, &b.name, 0) || inherits(unit, b, &a.name, 0)
}
