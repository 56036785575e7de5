//! Semantic validation of a parsed specification against the metamodels
//! it names.
//!
//! The checker resolves every parameter to a metatype, types every
//! expression, and verifies statement shapes (attribute vs reference
//! assignment, call signatures, nesting targets). All findings are
//! collected; an empty result means the specification is executable.

use std::collections::HashMap;

use super::{
    AssignTarget, CompositionRule, CompositionSpec, Expr, ExprKind, ModelDecl, Param, RuleKind,
    Span, SpecDiagnostic, Statement,
};
use crate::model::{
    MetaType, Metamodel, MetamodelRegistry, PrimKind, MERGING_LINK_TYPE, TRACE_MM_NAME,
    TRANSFORMATION_LINK_TYPE,
};

/// Validate a specification against the registered metamodels.
pub fn check_spec(spec: &CompositionSpec, registry: &MetamodelRegistry) -> Vec<SpecDiagnostic> {
    let mut checker = Checker { spec, registry, diags: Vec::new() };
    checker.run();
    checker.diags
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Side {
    Left,
    Right,
    Target,
}

impl Side {
    fn describe(self) -> &'static str {
        match self {
            Side::Left => "the left model",
            Side::Right => "the right model",
            Side::Target => "a target model",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum ExprType<'a> {
    Str,
    Bool,
    Int,
    Element { mm: &'a Metamodel, ty: &'a MetaType, side: Side },
    Collection { mm: &'a Metamodel, ty: &'a MetaType, side: Side },
    /// A subexpression already reported a problem; suppress follow-ups.
    Unknown,
}

impl ExprType<'_> {
    fn describe(&self) -> String {
        match self {
            ExprType::Str => "a string".into(),
            ExprType::Bool => "a boolean".into(),
            ExprType::Int => "an integer".into(),
            ExprType::Element { ty, .. } => format!("an element of type '{}'", ty.name),
            ExprType::Collection { ty, .. } => format!("a collection of '{}'", ty.name),
            ExprType::Unknown => "an unknown value".into(),
        }
    }

    fn matches_kind(&self, kind: PrimKind) -> bool {
        matches!(
            (self, kind),
            (ExprType::Str, PrimKind::String)
                | (ExprType::Bool, PrimKind::Boolean)
                | (ExprType::Int, PrimKind::Integer)
                | (ExprType::Unknown, _)
        )
    }
}

#[derive(Clone, Copy)]
struct Binding<'a> {
    side: Side,
    mm: Option<&'a Metamodel>,
    ty: Option<&'a MetaType>,
}

type Scope<'a> = HashMap<&'a str, Binding<'a>>;

struct Checker<'a> {
    spec: &'a CompositionSpec,
    registry: &'a MetamodelRegistry,
    diags: Vec<SpecDiagnostic>,
}

impl<'a> Checker<'a> {
    fn error(&mut self, span: Span, message: impl Into<String>) {
        self.diags.push(SpecDiagnostic::error(span, message));
    }

    fn run(&mut self) {
        self.check_model_decls();
        for rule in &self.spec.rules {
            self.check_rule(rule);
        }
    }

    fn check_model_decls(&mut self) {
        let decls: Vec<&ModelDecl> = [&self.spec.left, &self.spec.right]
            .into_iter()
            .chain(self.spec.targets.iter())
            .collect();
        for (i, decl) in decls.iter().enumerate() {
            if decls[..i].iter().any(|d| d.alias == decl.alias) {
                self.error(decl.span, format!("model alias '{}' is declared twice", decl.alias));
            }
            if self.registry.get(&decl.metamodel).is_none() {
                self.error(
                    decl.span,
                    format!("unknown metamodel '{}' for model '{}'", decl.metamodel, decl.alias),
                );
            }
        }
    }

    /// The declaration a parameter's alias refers to, and which side of
    /// the composition it sits on.
    fn decl_for_alias(&self, alias: &str) -> Option<(&'a ModelDecl, Side)> {
        if self.spec.left.alias == alias {
            return Some((&self.spec.left, Side::Left));
        }
        if self.spec.right.alias == alias {
            return Some((&self.spec.right, Side::Right));
        }
        self.spec.targets.iter().find(|d| d.alias == alias).map(|d| (d, Side::Target))
    }

    fn bind_param(&mut self, rule: &CompositionRule, param: &'a Param, expected: Side) -> Binding<'a> {
        let Some((decl, side)) = self.decl_for_alias(&param.alias) else {
            self.error(
                param.span,
                format!(
                    "parameter '{}' in rule '{}' refers to undeclared model '{}'",
                    param.name, rule.name, param.alias
                ),
            );
            return Binding { side: expected, mm: None, ty: None };
        };
        if side != expected {
            self.error(
                param.span,
                format!(
                    "parameter '{}' in rule '{}' must come from {} but '{}' is {}",
                    param.name,
                    rule.name,
                    expected.describe(),
                    param.alias,
                    side.describe()
                ),
            );
        }
        let mm = self.registry.get(&decl.metamodel);
        let ty = mm.and_then(|m| m.get_type(&param.type_name));
        if let Some(m) = mm {
            if ty.is_none() {
                self.error(
                    param.span,
                    format!(
                        "metamodel '{}' declares no type '{}' (parameter '{}' in rule '{}')",
                        m.name, param.type_name, param.name, rule.name
                    ),
                );
            }
        }
        Binding { side, mm, ty }
    }

    fn check_rule(&mut self, rule: &'a CompositionRule) {
        let mut scope: Scope<'a> = HashMap::new();
        for p in &rule.in_left {
            let b = self.bind_param(rule, p, Side::Left);
            scope.insert(&p.name, b);
        }
        for p in &rule.in_right {
            let b = self.bind_param(rule, p, Side::Right);
            scope.insert(&p.name, b);
        }
        let inputs_only = scope.clone();
        for p in &rule.out {
            let b = self.bind_param(rule, p, Side::Target);
            scope.insert(&p.name, b);
        }
        if let Some(guard) = &rule.guard {
            let ty = self.expr_type(guard, &inputs_only, rule);
            self.require_bool(&ty, guard.span, "a guard");
        }
        for stmt in &rule.body {
            self.check_statement(rule, stmt, &scope);
        }
    }

    fn require_bool(&mut self, ty: &ExprType, span: Span, what: &str) {
        if !matches!(ty, ExprType::Bool | ExprType::Unknown) {
            self.error(span, format!("{what} must be a boolean but this is {}", ty.describe()));
        }
    }

    fn check_statement(&mut self, rule: &'a CompositionRule, stmt: &'a Statement, scope: &Scope<'a>) {
        match stmt {
            Statement::SetAttr { target, value, span } => {
                let Some(ty) = self.assign_base(rule, &target.param, *span, scope) else {
                    self.expr_type(value, scope, rule);
                    return;
                };
                if let Some(attr) = ty.attribute(&target.member) {
                    let vty = self.expr_type(value, scope, rule);
                    if matches!(vty, ExprType::Element { .. } | ExprType::Collection { .. }) {
                        self.error(
                            value.span,
                            format!(
                                "'{}.{}' is an attribute; model elements can only be wired into references",
                                target.param, target.member
                            ),
                        );
                    } else if !vty.matches_kind(attr.kind) {
                        self.error(
                            value.span,
                            format!(
                                "attribute '{}.{}' holds {} but this is {}",
                                target.param,
                                target.member,
                                kind_name(attr.kind),
                                vty.describe()
                            ),
                        );
                    }
                } else if ty.reference(&target.member).is_some() {
                    self.error(
                        *span,
                        format!(
                            "'{}.{}' is a reference; wire it with equivalent(...) or call ...",
                            target.param, target.member
                        ),
                    );
                    self.expr_type(value, scope, rule);
                } else {
                    self.unknown_member(*span, ty, &target.param, &target.member);
                }
            }
            Statement::SetResolve { target, source, nest, span } => {
                if let Some(ty) = self.assign_base(rule, &target.param, *span, scope) {
                    if ty.attribute(&target.member).is_some() {
                        self.error(
                            *span,
                            format!(
                                "'{}.{}' is an attribute; equivalent(...) produces elements for a reference",
                                target.param, target.member
                            ),
                        );
                    } else if ty.reference(&target.member).is_none() {
                        self.unknown_member(*span, ty, &target.param, &target.member);
                    }
                }
                let sty = self.expr_type(source, scope, rule);
                match sty {
                    ExprType::Element { side: Side::Left | Side::Right, .. }
                    | ExprType::Collection { side: Side::Left | Side::Right, .. }
                    | ExprType::Unknown => {}
                    other => self.error(
                        source.span,
                        format!(
                            "equivalent(...) resolves source model elements but this is {}",
                            other.describe()
                        ),
                    ),
                }
                self.check_nest(rule, nest.as_deref(), *span);
            }
            Statement::Call { callee, args, assign, nest, span } => {
                self.check_call(rule, callee, args, assign.as_ref(), *span, scope);
                self.check_nest(rule, nest.as_deref(), *span);
            }
        }
    }

    /// Resolve the parameter on the left of an assignment; it must be an
    /// output of the current rule.
    fn assign_base(
        &mut self,
        rule: &CompositionRule,
        param: &str,
        span: Span,
        scope: &Scope<'a>,
    ) -> Option<&'a MetaType> {
        let Some(binding) = scope.get(param) else {
            self.error(span, format!("unknown parameter '{param}' in rule '{}'", rule.name));
            return None;
        };
        if binding.side != Side::Target {
            self.error(
                span,
                format!("'{param}' is an input of rule '{}' and cannot be assigned", rule.name),
            );
            return None;
        }
        binding.ty
    }

    fn unknown_member(&mut self, span: Span, ty: &MetaType, param: &str, member: &str) {
        self.error(
            span,
            format!("type '{}' has no attribute or reference '{member}' (on '{param}')", ty.name),
        );
    }

    fn check_call(
        &mut self,
        rule: &'a CompositionRule,
        callee: &str,
        args: &'a [Expr],
        assign: Option<&AssignTarget>,
        span: Span,
        scope: &Scope<'a>,
    ) {
        let Some(target_rule) = self.spec.rule(callee) else {
            self.error(span, format!("call to unknown rule '{callee}'"));
            for arg in args {
                self.expr_type(arg, scope, rule);
            }
            return;
        };
        if target_rule.kind == RuleKind::Match {
            self.error(span, format!("'{callee}' is a match rule and cannot be called"));
        }
        let params: Vec<&Param> = target_rule.inputs().collect();
        if args.len() != params.len() {
            self.error(
                span,
                format!(
                    "rule '{callee}' takes {} argument(s) but {} were supplied",
                    params.len(),
                    args.len()
                ),
            );
        }
        for (arg, param) in args.iter().zip(&params) {
            let expected_side = if target_rule.in_left.iter().any(|p| p.name == param.name) {
                Side::Left
            } else {
                Side::Right
            };
            let aty = self.expr_type(arg, scope, rule);
            match aty {
                ExprType::Element { ty, side, .. } | ExprType::Collection { ty, side, .. } => {
                    if side != expected_side {
                        self.error(
                            arg.span,
                            format!(
                                "argument for '{}' of rule '{callee}' must come from {}",
                                param.name,
                                expected_side.describe()
                            ),
                        );
                    } else if ty.name != param.type_name {
                        self.error(
                            arg.span,
                            format!(
                                "argument for '{}' of rule '{callee}' must be of type '{}' but this is {}",
                                param.name,
                                param.type_name,
                                aty.describe()
                            ),
                        );
                    }
                }
                ExprType::Unknown => {}
                other => self.error(
                    arg.span,
                    format!(
                        "argument for '{}' of rule '{callee}' must be model elements but this is {}",
                        param.name,
                        other.describe()
                    ),
                ),
            }
        }
        if let Some(target) = assign {
            let Some(base) = self.assign_base(rule, &target.param, span, scope) else {
                return;
            };
            let Some(reference) = base.reference(&target.member) else {
                if base.attribute(&target.member).is_some() {
                    self.error(
                        span,
                        format!(
                            "'{}.{}' is an attribute; call results are elements and wire into references",
                            target.param, target.member
                        ),
                    );
                } else {
                    self.unknown_member(span, base, &target.param, &target.member);
                }
                return;
            };
            let assign_alias = rule
                .out
                .iter()
                .find(|p| p.name == target.param)
                .map(|p| p.alias.as_str())
                .unwrap_or_default();
            let wirable = target_rule
                .out
                .iter()
                .any(|p| p.alias == assign_alias && p.type_name == reference.target);
            if !wirable {
                self.error(
                    span,
                    format!(
                        "no output of rule '{callee}' produces a '{}' in model '{assign_alias}' for '{}.{}'",
                        reference.target, target.param, target.member
                    ),
                );
            }
        }
    }

    fn check_nest(&mut self, rule: &'a CompositionRule, nest: Option<&str>, span: Span) {
        let Some(name) = nest else { return };
        let Some(param) = rule.out.iter().find(|p| p.name == name) else {
            self.error(
                span,
                format!("nest target '{name}' is not an output parameter of rule '{}'", rule.name),
            );
            return;
        };
        let is_link = self
            .decl_for_alias(&param.alias)
            .map(|(decl, _)| decl.metamodel == TRACE_MM_NAME)
            .unwrap_or(false)
            && (param.type_name == MERGING_LINK_TYPE || param.type_name == TRANSFORMATION_LINK_TYPE);
        if !is_link {
            self.error(
                span,
                format!(
                    "nest target '{name}' must be a '{MERGING_LINK_TYPE}' or '{TRANSFORMATION_LINK_TYPE}' output"
                ),
            );
        }
    }

    fn expr_type(&mut self, expr: &'a Expr, scope: &Scope<'a>, rule: &'a CompositionRule) -> ExprType<'a> {
        match &expr.kind {
            ExprKind::Literal(v) => match v {
                crate::model::PrimValue::String(_) => ExprType::Str,
                crate::model::PrimValue::Boolean(_) => ExprType::Bool,
                crate::model::PrimValue::Integer(_) => ExprType::Int,
            },
            ExprKind::ParamRef(name) => match scope.get(name.as_str()) {
                Some(binding) => match (binding.mm, binding.ty) {
                    (Some(mm), Some(ty)) => ExprType::Element { mm, ty, side: binding.side },
                    _ => ExprType::Unknown,
                },
                None => {
                    self.error(expr.span, format!("unknown name '{name}' in rule '{}'", rule.name));
                    ExprType::Unknown
                }
            },
            ExprKind::Access { base, member } => {
                let bty = self.expr_type(base, scope, rule);
                match bty {
                    ExprType::Element { mm, ty, side } => {
                        if let Some(attr) = ty.attribute(member) {
                            match attr.kind {
                                PrimKind::String => ExprType::Str,
                                PrimKind::Boolean => ExprType::Bool,
                                PrimKind::Integer => ExprType::Int,
                            }
                        } else if let Some(reference) = ty.reference(member) {
                            match mm.get_type(&reference.target) {
                                Some(target_ty) if reference.many => {
                                    ExprType::Collection { mm, ty: target_ty, side }
                                }
                                Some(target_ty) => ExprType::Element { mm, ty: target_ty, side },
                                None => {
                                    self.error(
                                        expr.span,
                                        format!(
                                            "reference '{}.{member}' targets unknown type '{}'",
                                            ty.name, reference.target
                                        ),
                                    );
                                    ExprType::Unknown
                                }
                            }
                        } else {
                            self.error(
                                expr.span,
                                format!("type '{}' has no attribute or reference '{member}'", ty.name),
                            );
                            ExprType::Unknown
                        }
                    }
                    ExprType::Collection { .. } => {
                        self.error(
                            expr.span,
                            format!(
                                "cannot navigate '.{member}' on a collection; bind an element with exists(..)"
                            ),
                        );
                        ExprType::Unknown
                    }
                    ExprType::Unknown => ExprType::Unknown,
                    other => {
                        self.error(
                            expr.span,
                            format!("cannot navigate '.{member}' on {}", other.describe()),
                        );
                        ExprType::Unknown
                    }
                }
            }
            ExprKind::Eq(lhs, rhs) => {
                let lty = self.expr_type(lhs, scope, rule);
                let rty = self.expr_type(rhs, scope, rule);
                let prim = |t: &ExprType| matches!(t, ExprType::Str | ExprType::Bool | ExprType::Int);
                match (&lty, &rty) {
                    (ExprType::Unknown, _) | (_, ExprType::Unknown) => {}
                    (l, r) if prim(l) && prim(r) => {
                        if std::mem::discriminant(l) != std::mem::discriminant(r) {
                            self.error(
                                expr.span,
                                format!("cannot compare {} with {}", l.describe(), r.describe()),
                            );
                        }
                    }
                    (l, r) => {
                        let offender = if prim(l) { r } else { l };
                        self.error(
                            expr.span,
                            format!(
                                "'=' compares attribute values but this is {}",
                                offender.describe()
                            ),
                        );
                    }
                }
                ExprType::Bool
            }
            ExprKind::And(lhs, rhs) | ExprKind::Or(lhs, rhs) => {
                let lty = self.expr_type(lhs, scope, rule);
                let rty = self.expr_type(rhs, scope, rule);
                self.require_bool(&lty, lhs.span, "an operand of and/or");
                self.require_bool(&rty, rhs.span, "an operand of and/or");
                ExprType::Bool
            }
            ExprKind::Not(inner) => {
                let ity = self.expr_type(inner, scope, rule);
                self.require_bool(&ity, inner.span, "the operand of not");
                ExprType::Bool
            }
            ExprKind::Exists { base, var, pred } => {
                let bty = self.expr_type(base, scope, rule);
                let mut inner_scope = scope.clone();
                match bty {
                    ExprType::Collection { mm, ty, side } => {
                        inner_scope
                            .insert(var.as_str(), Binding { side, mm: Some(mm), ty: Some(ty) });
                    }
                    ExprType::Unknown => {
                        inner_scope.insert(var.as_str(), Binding { side: Side::Left, mm: None, ty: None });
                    }
                    other => {
                        self.error(
                            expr.span,
                            format!("exists(..) iterates a collection but this is {}", other.describe()),
                        );
                        inner_scope.insert(var.as_str(), Binding { side: Side::Left, mm: None, ty: None });
                    }
                }
                let pty = self.expr_type(pred, &inner_scope, rule);
                self.require_bool(&pty, pred.span, "an exists(..) predicate");
                ExprType::Bool
            }
            ExprKind::HasMatch(name) => {
                if rule.kind == RuleKind::Match {
                    self.error(
                        expr.span,
                        "has_match is not available in compare expressions; matches do not exist yet",
                    );
                }
                if !rule.inputs().any(|p| p.name == *name) {
                    self.error(
                        expr.span,
                        format!("has_match takes an input parameter of rule '{}'", rule.name),
                    );
                }
                ExprType::Bool
            }
            ExprKind::IdOf(args) => {
                for arg in args {
                    let aty = self.expr_type(arg, scope, rule);
                    if !matches!(
                        aty,
                        ExprType::Element { .. } | ExprType::Collection { .. } | ExprType::Unknown
                    ) {
                        self.error(
                            arg.span,
                            format!("id(..) takes model elements but this is {}", aty.describe()),
                        );
                    }
                }
                ExprType::Str
            }
        }
    }
}

fn kind_name(kind: PrimKind) -> &'static str {
    match kind {
        PrimKind::String => "a string",
        PrimKind::Boolean => "a boolean",
        PrimKind::Integer => "an integer",
    }
}

#[cfg(test)]
mod tests {
    use super::super::parse_spec;
    use super::*;
    use crate::model::{AttributeDef, ReferenceDef};

    fn entities_mm() -> Metamodel {
        Metamodel {
            name: "entities".into(),
            types: vec![
                MetaType {
                    name: "System".into(),
                    attributes: vec![AttributeDef { name: "name".into(), kind: PrimKind::String }],
                    references: vec![ReferenceDef {
                        name: "entity".into(),
                        target: "Entity".into(),
                        many: true,
                        containment: true,
                    }],
                },
                MetaType {
                    name: "Entity".into(),
                    attributes: vec![
                        AttributeDef { name: "name".into(), kind: PrimKind::String },
                        AttributeDef { name: "inDomain".into(), kind: PrimKind::Boolean },
                    ],
                    references: vec![],
                },
            ],
        }
    }

    fn vocabulary_mm() -> Metamodel {
        Metamodel {
            name: "vocabulary".into(),
            types: vec![
                MetaType {
                    name: "Vocabulary".into(),
                    attributes: vec![AttributeDef { name: "name".into(), kind: PrimKind::String }],
                    references: vec![ReferenceDef {
                        name: "term".into(),
                        target: "Term".into(),
                        many: true,
                        containment: true,
                    }],
                },
                MetaType {
                    name: "Term".into(),
                    attributes: vec![AttributeDef { name: "name".into(), kind: PrimKind::String }],
                    references: vec![ReferenceDef {
                        name: "alias".into(),
                        target: "Alias".into(),
                        many: true,
                        containment: true,
                    }],
                },
                MetaType {
                    name: "Alias".into(),
                    attributes: vec![AttributeDef { name: "name".into(), kind: PrimKind::String }],
                    references: vec![],
                },
            ],
        }
    }

    fn registry() -> MetamodelRegistry {
        let mut r = MetamodelRegistry::new();
        r.add(entities_mm()).unwrap();
        r.add(vocabulary_mm()).unwrap();
        r
    }

    fn check(text: &str) -> Vec<SpecDiagnostic> {
        let spec = parse_spec(text).unwrap_or_else(|d| panic!("parse failed: {d:?}"));
        check_spec(&spec, &registry())
    }

    fn assert_single(diags: &[SpecDiagnostic], needle: &str) {
        assert_eq!(diags.len(), 1, "expected one diagnostic, got {diags:#?}");
        assert!(
            diags[0].message.contains(needle),
            "expected '{needle}' in: {}",
            diags[0].message
        );
    }

    const HEADER: &str = "composition C\nleft Source : entities\nright Vocabulary : vocabulary\ntarget Target : entities\n";

    #[test]
    fn domain_spec_checks_clean() {
        let text = format!(
            "{HEADER}\
             rule MatchSystemWithVocabulary match s : Source!System with v : Vocabulary!Vocabulary compare {{ true }}\n\
             rule MatchEntityWithTerm match s : Source!Entity with t : Vocabulary!Term compare {{ s.name = t.name or t.alias.exists(a | a.name = s.name) }}\n\
             rule MergeSystemWithVocabulary merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.name = s.name; t.entity = equivalent(s.entity); }}\n\
             rule MergeEntityWithTerm merge s : Source!Entity with t : Vocabulary!Term into m : Target!Entity {{ m.name = t.name; m.inDomain = true; }}\n\
             rule TransformEntity transform s : Source!Entity to t : Target!Entity when {{ not has_match(s) }} {{ t.name = s.name; t.inDomain = false; }}",
        );
        assert_eq!(check(&text), vec![]);
    }

    #[test]
    fn call_wiring_checks_clean() {
        let text = format!(
            "{HEADER}\
             rule MergeSystemWithVocabulary merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.entity = call TransformEntity(s.entity); }}\n\
             rule TransformEntity transform s : Source!Entity to t : Target!Entity {{ t.name = s.name; }}",
        );
        assert_eq!(check(&text), vec![]);
    }

    #[test]
    fn instrumented_spec_checks_clean() {
        let text = format!(
            "{HEADER}target tr : trace-mm\n\
             rule MergeSystemWithVocabulary merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System, lnk : tr!MergingLink {{\n\
               lnk.left = id(s); lnk.right = id(v); lnk.targets = id(t);\n\
               t.entity = equivalent(s.entity) nest lnk;\n\
             }}",
        );
        assert_eq!(check(&text), vec![]);
    }

    #[test]
    fn undeclared_metamodel_reported() {
        let diags = check("composition C\nleft a : nope\nright b : vocabulary\ntarget c : entities\n");
        assert_single(&diags, "unknown metamodel 'nope'");
    }

    #[test]
    fn duplicate_alias_reported() {
        let diags = check("composition C\nleft a : entities\nright a : vocabulary\ntarget c : entities\n");
        assert_single(&diags, "alias 'a' is declared twice");
    }

    #[test]
    fn unknown_type_in_param_reported() {
        let diags = check(&format!(
            "{HEADER}rule M match s : Source!Widget with t : Vocabulary!Term compare {{ true }}"
        ));
        assert_single(&diags, "no type 'Widget'");
    }

    #[test]
    fn param_must_match_declared_side() {
        let diags = check(&format!(
            "{HEADER}rule M match s : Vocabulary!Term with t : Vocabulary!Term compare {{ true }}"
        ));
        assert_single(&diags, "must come from the left model");
    }

    #[test]
    fn has_match_rejected_in_compare() {
        let diags = check(&format!(
            "{HEADER}rule M match s : Source!Entity with t : Vocabulary!Term compare {{ has_match(s) }}"
        ));
        assert_single(&diags, "not available in compare");
    }

    #[test]
    fn attribute_type_mismatch_reported() {
        let diags = check(&format!(
            "{HEADER}rule T transform s : Source!Entity to t : Target!Entity {{ t.inDomain = \"yes\"; }}"
        ));
        assert_single(&diags, "holds a boolean but this is a string");
    }

    #[test]
    fn reference_assignment_needs_wiring_form() {
        let diags = check(&format!(
            "{HEADER}rule T transform s : Source!System to t : Target!System {{ t.entity = s.entity; }}"
        ));
        assert_single(&diags, "wire it with equivalent");
    }

    #[test]
    fn equivalent_rejects_target_elements() {
        let diags = check(&format!(
            "{HEADER}rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.entity = equivalent(t); }}"
        ));
        assert_single(&diags, "resolves source model elements");
    }

    #[test]
    fn equivalent_rejects_attribute_member() {
        let diags = check(&format!(
            "{HEADER}rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.name = equivalent(s.entity); }}"
        ));
        assert_single(&diags, "'t.name' is an attribute");
    }

    #[test]
    fn navigation_on_collection_reported() {
        let diags = check(&format!(
            "{HEADER}rule M match s : Source!System with v : Vocabulary!Vocabulary compare {{ s.entity.name = \"x\" }}"
        ));
        assert_single(&diags, "bind an element with exists");
    }

    #[test]
    fn comparison_type_mismatch_reported() {
        let diags = check(&format!(
            "{HEADER}rule M match s : Source!Entity with t : Vocabulary!Term compare {{ s.name = s.inDomain }}"
        ));
        assert_single(&diags, "cannot compare a string with a boolean");
    }

    #[test]
    fn guard_must_be_boolean() {
        let diags = check(&format!(
            "{HEADER}rule T transform s : Source!Entity to t : Target!Entity when {{ s.name }} {{ }}"
        ));
        assert_single(&diags, "guard must be a boolean");
    }

    #[test]
    fn assignment_to_input_rejected() {
        let diags = check(&format!(
            "{HEADER}rule T transform s : Source!Entity to t : Target!Entity {{ s.name = \"x\"; }}"
        ));
        assert_single(&diags, "cannot be assigned");
    }

    #[test]
    fn call_to_unknown_rule_reported() {
        let diags = check(&format!(
            "{HEADER}rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ call Nope(s); }}"
        ));
        assert_single(&diags, "unknown rule 'Nope'");
    }

    #[test]
    fn call_to_match_rule_rejected() {
        let diags = check(&format!(
            "{HEADER}\
             rule MA match s : Source!Entity with t : Vocabulary!Term compare {{ true }}\n\
             rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ call MA(s, v); }}"
        ));
        // the argument types also fail to line up; the headline finding is the callable kind
        assert!(diags.iter().any(|d| d.message.contains("match rule and cannot be called")));
    }

    #[test]
    fn call_arity_checked() {
        let diags = check(&format!(
            "{HEADER}\
             rule TE transform s : Source!Entity to t : Target!Entity {{ }}\n\
             rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ call TE(s.entity, v); }}"
        ));
        assert_single(&diags, "takes 1 argument(s) but 2 were supplied");
    }

    #[test]
    fn call_argument_side_checked() {
        let diags = check(&format!(
            "{HEADER}\
             rule TE transform s : Source!Entity to t : Target!Entity {{ }}\n\
             rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ call TE(v.term); }}"
        ));
        assert_single(&diags, "must come from the left model");
    }

    #[test]
    fn call_argument_type_checked() {
        let diags = check(&format!(
            "{HEADER}\
             rule TE transform s : Source!Entity to t : Target!Entity {{ }}\n\
             rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ call TE(s); }}"
        ));
        assert_single(&diags, "must be of type 'Entity'");
    }

    #[test]
    fn call_assignment_requires_compatible_output() {
        let diags = check(&format!(
            "{HEADER}\
             rule TS transform s : Source!System to t : Target!System {{ }}\n\
             rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.entity = call TS(s); }}"
        ));
        assert_single(&diags, "no output of rule 'TS' produces a 'Entity'");
    }

    #[test]
    fn nest_requires_link_output() {
        let diags = check(&format!(
            "{HEADER}rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.entity = equivalent(s.entity) nest t; }}"
        ));
        assert_single(&diags, "must be a 'MergingLink' or 'TransformationLink' output");
    }

    #[test]
    fn nest_requires_output_of_same_rule() {
        let diags = check(&format!(
            "{HEADER}rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.entity = equivalent(s.entity) nest lnk; }}"
        ));
        assert_single(&diags, "is not an output parameter");
    }

    #[test]
    fn id_rejects_primitive_arguments() {
        let text = format!(
            "{HEADER}target tr : trace-mm\n\
             rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System, lnk : tr!MergingLink {{ lnk.left = id(s.name); }}"
        );
        let diags = check(&text);
        assert_single(&diags, "id(..) takes model elements");
    }

    #[test]
    fn all_findings_collected_in_one_pass() {
        let diags = check(&format!(
            "{HEADER}rule T transform s : Source!Entity to t : Target!Entity {{ t.inDomain = \"yes\"; t.nope = 1; s.name = \"x\"; }}"
        ));
        assert_eq!(diags.len(), 3, "expected three findings, got {diags:#?}");
    }
}
