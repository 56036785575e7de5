//! Canonical text rendering of a specification AST.
//!
//! The printer emits the same surface syntax the parser accepts, so
//! `parse_spec(&print_spec(&s))` reproduces `s`. Rewritten specifications
//! (for example after trace instrumentation) are persisted through this
//! path.

use std::fmt::Write;

use super::{CompositionRule, CompositionSpec, Expr, ExprKind, Param, RuleKind, Statement};
use crate::model::PrimValue;

/// Render a specification as canonical `.mcomp` text.
pub fn print_spec(spec: &CompositionSpec) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "composition {}", spec.name);
    out.push('\n');
    let _ = writeln!(out, "left {} : {}", spec.left.alias, spec.left.metamodel);
    let _ = writeln!(out, "right {} : {}", spec.right.alias, spec.right.metamodel);
    for target in &spec.targets {
        let _ = writeln!(out, "target {} : {}", target.alias, target.metamodel);
    }
    for rule in &spec.rules {
        out.push('\n');
        print_rule(&mut out, rule);
    }
    out
}

fn print_rule(out: &mut String, rule: &CompositionRule) {
    match rule.kind {
        RuleKind::Match => {
            let _ = writeln!(
                out,
                "rule {} match {} with {} compare {{",
                rule.name,
                param(&rule.in_left[0]),
                param(&rule.in_right[0]),
            );
            let _ = writeln!(out, "  {}", print_expr(rule.guard.as_ref().expect("match rule has a compare expression")));
            out.push_str("}\n");
        }
        RuleKind::Merge => {
            let _ = writeln!(
                out,
                "rule {} merge {} with {} into {} {{",
                rule.name,
                param(&rule.in_left[0]),
                param(&rule.in_right[0]),
                params(&rule.out),
            );
            print_body(out, &rule.body);
            out.push_str("}\n");
        }
        RuleKind::Transform => {
            let _ = write!(out, "rule {} transform {}", rule.name, params(&rule.in_left));
            if !rule.in_right.is_empty() {
                let _ = write!(out, " with {}", params(&rule.in_right));
            }
            let _ = write!(out, " to {}", params(&rule.out));
            if let Some(guard) = &rule.guard {
                let _ = write!(out, " when {{\n  {}\n}}", print_expr(guard));
            }
            out.push_str(" {\n");
            print_body(out, &rule.body);
            out.push_str("}\n");
        }
    }
}

fn print_body(out: &mut String, body: &[Statement]) {
    for stmt in body {
        let _ = writeln!(out, "  {}", print_stmt(stmt));
    }
}

fn param(p: &Param) -> String {
    format!("{} : {}!{}", p.name, p.alias, p.type_name)
}

fn params(ps: &[Param]) -> String {
    ps.iter().map(param).collect::<Vec<_>>().join(", ")
}

fn print_stmt(stmt: &Statement) -> String {
    match stmt {
        Statement::SetAttr { target, value, .. } => {
            format!("{}.{} = {};", target.param, target.member, print_expr(value))
        }
        Statement::SetResolve { target, source, nest, .. } => {
            let suffix = nest.as_ref().map(|p| format!(" nest {p}")).unwrap_or_default();
            format!("{}.{} = equivalent({}){suffix};", target.param, target.member, print_expr(source))
        }
        Statement::Call { callee, args, assign, nest, .. } => {
            let args = args.iter().map(print_expr).collect::<Vec<_>>().join(", ");
            let suffix = nest.as_ref().map(|p| format!(" nest {p}")).unwrap_or_default();
            match assign {
                Some(t) => format!("{}.{} = call {callee}({args}){suffix};", t.param, t.member),
                None => format!("call {callee}({args}){suffix};"),
            }
        }
    }
}

/// Render an expression with minimal parentheses.
pub fn print_expr(expr: &Expr) -> String {
    render(expr, 0)
}

// Binding strength, loosest first. A subexpression is parenthesized when
// its own level is below what its position requires.
fn level(expr: &Expr) -> u8 {
    match &expr.kind {
        ExprKind::Or(..) => 1,
        ExprKind::And(..) => 2,
        ExprKind::Not(..) => 3,
        ExprKind::Eq(..) => 4,
        ExprKind::Access { .. } | ExprKind::Exists { .. } => 5,
        ExprKind::Literal(_) | ExprKind::ParamRef(_) | ExprKind::HasMatch(_) | ExprKind::IdOf(_) => 6,
    }
}

fn render(expr: &Expr, min_level: u8) -> String {
    let own = level(expr);
    let body = match &expr.kind {
        ExprKind::Literal(v) => literal(v),
        ExprKind::ParamRef(name) => name.clone(),
        ExprKind::Access { base, member } => format!("{}.{member}", render(base, 5)),
        ExprKind::Eq(lhs, rhs) => format!("{} = {}", render(lhs, 5), render(rhs, 5)),
        ExprKind::And(lhs, rhs) => format!("{} and {}", render(lhs, 2), render(rhs, 3)),
        ExprKind::Or(lhs, rhs) => format!("{} or {}", render(lhs, 1), render(rhs, 2)),
        ExprKind::Not(inner) => format!("not {}", render(inner, 3)),
        ExprKind::Exists { base, var, pred } => {
            format!("{}.exists({var} | {})", render(base, 5), render(pred, 0))
        }
        ExprKind::HasMatch(p) => format!("has_match({p})"),
        ExprKind::IdOf(args) => {
            let args = args.iter().map(|a| render(a, 0)).collect::<Vec<_>>().join(", ");
            format!("id({args})")
        }
    };
    if own < min_level {
        format!("({body})")
    } else {
        body
    }
}

fn literal(v: &PrimValue) -> String {
    match v {
        PrimValue::String(s) => {
            let escaped = s.replace('\\', "\\\\").replace('"', "\\\"").replace('\n', "\\n");
            format!("\"{escaped}\"")
        }
        PrimValue::Boolean(b) => b.to_string(),
        PrimValue::Integer(i) => i.to_string(),
    }
}
