use std::fmt::Write;

use super::ast::*;

const INDENT: &str = "    ";

/// Renders a source unit as Solidity text.
pub fn render(unit: &SourceUnit) -> String {
    let mut out = String::new();
    if !unit.pragma_req.is_empty() {
        writeln!(out, "pragma solidity {};", unit.pragma_req).unwrap();
    }
    for p in &unit.extra_pragmas {
        writeln!(out, "pragma {p};").unwrap();
    }
    for i in &unit.imports {
        out.push_str(&render_import(i));
        out.push('\n');
    }
    for item in &unit.free_items {
        if !out.is_empty() {
            out.push('\n');
        }
        out.push_str(item);
        out.push('\n');
    }
    for c in &unit.contracts {
        if !out.is_empty() {
            out.push('\n');
        }
        render_contract(&mut out, c);
    }
    out
}

fn render_import(i: &Import) -> String {
    let mut s = match &i.symbols {
        Some(sym) => format!("import {sym} from \"{}\"", i.path),
        None => format!("import \"{}\"", i.path),
    };
    if let Some(a) = &i.alias {
        write!(s, " as {a}").unwrap();
    }
    s.push(';');
    s
}

fn render_contract(out: &mut String, c: &ContractDef) {
    write!(out, "{} {}", c.kind.keyword(), c.name).unwrap();
    if !c.bases.is_empty() {
        let bases: Vec<String> = c
            .bases
            .iter()
            .map(|b| match &b.args {
                Some(args) => format!("{}({})", b.name, render_exprs(args)),
                None => b.name.clone(),
            })
            .collect();
        write!(out, " is {}", bases.join(", ")).unwrap();
    }
    out.push_str(" {\n");
    let mut prev_block = None;
    for m in &c.members {
        let is_block = matches!(m, Member::Function(_) | Member::Modifier(_));
        if let Some(prev) = prev_block {
            if prev || is_block {
                out.push('\n');
            }
        }
        prev_block = Some(is_block);
        match m {
            Member::StateVar(v) => {
                out.push_str(INDENT);
                out.push_str(&render_state_var(v));
                out.push('\n');
            }
            Member::Using { library, target } => {
                writeln!(out, "{INDENT}using {library} for {target};").unwrap();
            }
            Member::Opaque(text) => {
                writeln!(out, "{INDENT}{text}").unwrap();
            }
            Member::Modifier(m) => render_modifier(out, m),
            Member::Function(f) => render_function(out, f),
        }
    }
    out.push_str("}\n");
}

pub fn render_state_var(v: &StateVarDef) -> String {
    let mut s = v.ty.clone();
    if let Some(kw) = v.visibility.keyword() {
        s.push(' ');
        s.push_str(kw);
    }
    if v.constant {
        s.push_str(" constant");
    }
    if v.immutable {
        s.push_str(" immutable");
    }
    s.push(' ');
    s.push_str(&v.name);
    if let Some(init) = &v.init {
        s.push_str(" = ");
        s.push_str(&render_expr(init));
    }
    s.push(';');
    s
}

fn render_params(params: &[Param]) -> String {
    params.iter().map(render_param).collect::<Vec<_>>().join(", ")
}

fn render_param(p: &Param) -> String {
    let mut s = p.ty.clone();
    if let Some(loc) = &p.location {
        s.push(' ');
        s.push_str(loc);
    }
    if let Some(n) = &p.name {
        s.push(' ');
        s.push_str(n);
    }
    s
}

fn render_modifier(out: &mut String, m: &ModifierDef) {
    write!(out, "{INDENT}modifier {}", m.name).unwrap();
    if !m.params.is_empty() {
        write!(out, "({})", render_params(&m.params)).unwrap();
    }
    if m.is_virtual {
        out.push_str(" virtual");
    }
    out.push_str(" {\n");
    render_body(out, &m.body, 2);
    writeln!(out, "{INDENT}}}").unwrap();
}

/// Function header up to (not including) the body.
pub fn render_function_header(f: &FunctionDef) -> String {
    let mut s = match f.kind {
        FunctionKind::Function => format!("function {}", f.name),
        FunctionKind::LegacyFallback => "function ".to_string(),
        FunctionKind::Constructor => "constructor".to_string(),
        FunctionKind::Fallback => "fallback".to_string(),
        FunctionKind::Receive => "receive".to_string(),
    };
    write!(s, "({})", render_params(&f.params)).unwrap();
    if let Some(kw) = f.visibility.keyword() {
        write!(s, " {kw}").unwrap();
    }
    if let Some(kw) = f.mutability.keyword() {
        write!(s, " {kw}").unwrap();
    }
    if f.is_virtual {
        s.push_str(" virtual");
    }
    if let Some(o) = &f.overrides {
        write!(s, " {o}").unwrap();
    }
    for m in &f.modifiers {
        write!(s, " {}", m.name).unwrap();
        if let Some(args) = &m.args {
            write!(s, "({})", render_exprs(args)).unwrap();
        }
    }
    if !f.returns.is_empty() {
        write!(s, " returns ({})", render_params(&f.returns)).unwrap();
    }
    s
}

fn render_function(out: &mut String, f: &FunctionDef) {
    out.push_str(INDENT);
    out.push_str(&render_function_header(f));
    match &f.body {
        None => out.push_str(";\n"),
        Some(body) => {
            out.push_str(" {\n");
            render_body(out, body, 2);
            writeln!(out, "{INDENT}}}").unwrap();
        }
    }
}

fn render_body(out: &mut String, body: &[Statement], depth: usize) {
    for s in body {
        render_statement(out, s, depth);
    }
}

fn pad(depth: usize) -> String {
    INDENT.repeat(depth)
}

fn render_statement(out: &mut String, s: &Statement, depth: usize) {
    let ind = pad(depth);
    match s {
        Statement::If { .. } => {
            out.push_str(&ind);
            render_if(out, s, depth);
            out.push('\n');
        }
        Statement::Block { unchecked, body } => {
            out.push_str(&ind);
            if *unchecked {
                out.push_str("unchecked ");
            }
            out.push_str("{\n");
            render_body(out, body, depth + 1);
            writeln!(out, "{ind}}}").unwrap();
        }
        other => writeln!(out, "{ind}{}", render_simple_statement(other)).unwrap(),
    }
}

fn render_if(out: &mut String, s: &Statement, depth: usize) {
    let Statement::If { condition, then_body, else_body } = s else { unreachable!() };
    let ind = pad(depth);
    writeln!(out, "if ({}) {{", render_expr(condition)).unwrap();
    render_body(out, then_body, depth + 1);
    write!(out, "{ind}}}").unwrap();
    if let Some(else_body) = else_body {
        if let [nested @ Statement::If { .. }] = else_body.as_slice() {
            out.push_str(" else ");
            render_if(out, nested, depth);
        } else {
            out.push_str(" else {\n");
            render_body(out, else_body, depth + 1);
            write!(out, "{ind}}}").unwrap();
        }
    }
}

/// Single-line rendering of a statement; nested bodies are rendered inline.
pub fn render_simple_statement(s: &Statement) -> String {
    match s {
        Statement::Require { func, condition, message } => match message {
            Some(m) => format!("{func}({}, {});", render_expr(condition), render_expr(m)),
            None => format!("{func}({});", render_expr(condition)),
        },
        Statement::Assign { target, op, value } => format!("{} {op} {};", render_expr(target), render_expr(value)),
        Statement::LocalDecl { vars, tuple, value } => {
            let mut s = if *tuple {
                let mut t = String::from("(");
                for (i, v) in vars.iter().enumerate() {
                    if i > 0 {
                        t.push(',');
                        if v.is_some() {
                            t.push(' ');
                        }
                    }
                    if let Some(p) = v {
                        t.push_str(&render_param(p));
                    }
                }
                t.push(')');
                t
            } else {
                vars.first().and_then(|v| v.as_ref()).map(render_param).unwrap_or_default()
            };
            if let Some(v) = value {
                write!(s, " = {}", render_expr(v)).unwrap();
            }
            s.push(';');
            s
        }
        Statement::Emit(e) => format!("emit {};", render_expr(e)),
        Statement::Return(None) => "return;".into(),
        Statement::Return(Some(e)) => format!("return {};", render_expr(e)),
        Statement::Expression(e) => format!("{};", render_expr(e)),
        Statement::Placeholder => "_;".into(),
        Statement::Opaque(t) => t.clone(),
        Statement::If { .. } | Statement::Block { .. } => {
            let mut out = String::new();
            render_statement(&mut out, s, 0);
            out.split_whitespace().collect::<Vec<_>>().join(" ")
        }
    }
}

fn render_exprs(args: &[Expr]) -> String {
    args.iter().map(render_expr).collect::<Vec<_>>().join(", ")
}

/// Renders an expression. Grouping comes only from explicit `Paren` nodes,
/// which the parser keeps.
pub fn render_expr(e: &Expr) -> String {
    match e {
        Expr::Ident(n) | Expr::Literal(n) => n.clone(),
        Expr::Member { base, member } => format!("{}.{member}", render_expr(base)),
        Expr::Index { base, index } => match index {
            Some(i) => format!("{}[{}]", render_expr(base), render_expr(i)),
            None => format!("{}[]", render_expr(base)),
        },
        Expr::Call { callee, options, args } => {
            let mut s = render_expr(callee);
            if !options.is_empty() {
                let opts: Vec<String> = options.iter().map(|(k, v)| format!("{k}: {}", render_expr(v))).collect();
                write!(s, "{{{}}}", opts.join(", ")).unwrap();
            }
            match args {
                CallArgs::Positional(a) => write!(s, "({})", render_exprs(a)).unwrap(),
                CallArgs::Named(a) => {
                    let named: Vec<String> = a.iter().map(|(k, v)| format!("{k}: {}", render_expr(v))).collect();
                    write!(s, "({{{}}})", named.join(", ")).unwrap();
                }
            }
            s
        }
        Expr::Unary { op, operand, postfix } => {
            if *postfix {
                format!("{}{op}", render_expr(operand))
            } else if op == "delete" {
                format!("delete {}", render_expr(operand))
            } else if matches!(operand.as_ref(), Expr::Unary { op: inner, postfix: false, .. } if inner == op || (op == "-" && inner == "--")) {
                // Keep `- -x` from re-lexing as `--x`.
                format!("{op} {}", render_expr(operand))
            } else {
                format!("{op}{}", render_expr(operand))
            }
        }
        Expr::Binary { op, lhs, rhs } => format!("{} {op} {}", render_expr(lhs), render_expr(rhs)),
        Expr::Ternary { condition, then, otherwise } => {
            format!("{} ? {} : {}", render_expr(condition), render_expr(then), render_expr(otherwise))
        }
        Expr::Assign { op, target, value } => format!("{} {op} {}", render_expr(target), render_expr(value)),
        Expr::Tuple(items) => {
            let parts: Vec<String> = items.iter().map(|i| i.as_ref().map(render_expr).unwrap_or_default()).collect();
            format!("({})", parts.join(", "))
        }
        Expr::Paren(inner) => format!("({})", render_expr(inner)),
        Expr::New(ty) => format!("new {ty}"),
        Expr::ArrayLit(items) => format!("[{}]", render_exprs(items)),
    }
}
