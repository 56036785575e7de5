//! Recursive-descent parser for `.mcomp` specification text.

use super::lexer::{lex, Tok, Token};
use super::{
    AssignTarget, CompositionRule, CompositionSpec, Expr, ExprKind, ModelDecl, Param, RuleKind,
    Span, SpecDiagnostic, Statement,
};
use crate::model::PrimValue;

const KEYWORDS: &[&str] = &[
    "composition", "left", "right", "target", "rule", "match", "with", "compare", "merge",
    "into", "transform", "to", "when", "call", "equivalent", "nest", "id", "has_match",
    "exists", "true", "false", "and", "or", "not",
];

/// Parse specification text into an AST.
///
/// Syntax errors stop at the first offense; structural rule violations
/// (duplicate rule names, output arity) are collected together so one
/// pass reports them all.
pub fn parse_spec(text: &str) -> Result<CompositionSpec, Vec<SpecDiagnostic>> {
    let tokens = lex(text).map_err(|d| vec![d])?;
    let mut parser = Parser { tokens, pos: 0 };
    let spec = parser.spec().map_err(|d| vec![d])?;
    let diags = validate_structure(&spec);
    if diags.is_empty() {
        Ok(spec)
    } else {
        Err(diags)
    }
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
}

type PResult<T> = Result<T, SpecDiagnostic>;

impl Parser {
    fn peek(&self) -> &Token {
        &self.tokens[self.pos.min(self.tokens.len() - 1)]
    }

    fn peek_tok(&self) -> &Tok {
        &self.peek().tok
    }

    fn span(&self) -> Span {
        self.peek().span
    }

    fn advance(&mut self) -> Token {
        let t = self.tokens[self.pos.min(self.tokens.len() - 1)].clone();
        if self.pos < self.tokens.len() - 1 {
            self.pos += 1;
        }
        t
    }

    fn expect(&mut self, tok: Tok) -> PResult<Token> {
        if *self.peek_tok() == tok {
            Ok(self.advance())
        } else {
            Err(SpecDiagnostic::error(
                self.span(),
                format!("expected {} but found {}", tok.describe(), self.peek_tok().describe()),
            ))
        }
    }

    /// Consume the given keyword.
    fn keyword(&mut self, kw: &str) -> PResult<Token> {
        match self.peek_tok() {
            Tok::Ident(s) if s == kw => Ok(self.advance()),
            other => Err(SpecDiagnostic::error(
                self.span(),
                format!("expected '{kw}' but found {}", other.describe()),
            )),
        }
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(self.peek_tok(), Tok::Ident(s) if s == kw)
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.at_keyword(kw) {
            self.advance();
            true
        } else {
            false
        }
    }

    /// A member position (after a dot). Reserved words are allowed here
    /// because a leading dot already disambiguates them.
    fn member_ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek_tok().clone() {
            Tok::Ident(s) => {
                let t = self.advance();
                Ok((s, t.span))
            }
            other => Err(SpecDiagnostic::error(
                self.span(),
                format!("expected {what} but found {}", other.describe()),
            )),
        }
    }

    /// A name position: any identifier that is not a reserved word.
    fn ident(&mut self, what: &str) -> PResult<(String, Span)> {
        match self.peek_tok().clone() {
            Tok::Ident(s) if !KEYWORDS.contains(&s.as_str()) => {
                let t = self.advance();
                Ok((s, t.span))
            }
            Tok::Ident(s) => Err(SpecDiagnostic::error(
                self.span(),
                format!("'{s}' is a reserved word and cannot be used as {what}"),
            )),
            other => Err(SpecDiagnostic::error(
                self.span(),
                format!("expected {what} but found {}", other.describe()),
            )),
        }
    }

    fn spec(&mut self) -> PResult<CompositionSpec> {
        self.keyword("composition")?;
        let (name, _) = self.ident("a specification name")?;
        self.keyword("left")?;
        let left = self.model_decl()?;
        self.keyword("right")?;
        let right = self.model_decl()?;
        let mut targets = Vec::new();
        while self.at_keyword("target") {
            let t = self.advance();
            if targets.len() == 2 {
                return Err(SpecDiagnostic::error(
                    t.span,
                    "a specification declares at most two target models",
                ));
            }
            targets.push(self.model_decl()?);
        }
        if targets.is_empty() {
            return Err(SpecDiagnostic::error(
                self.span(),
                "a specification declares at least one target model",
            ));
        }
        let mut rules = Vec::new();
        while self.at_keyword("rule") {
            rules.push(self.rule()?);
        }
        self.expect(Tok::Eof)?;
        Ok(CompositionSpec { name, left, right, targets, rules })
    }

    fn model_decl(&mut self) -> PResult<ModelDecl> {
        let (alias, span) = self.ident("a model alias")?;
        self.expect(Tok::Colon)?;
        let (metamodel, _) = self.ident("a metamodel name")?;
        Ok(ModelDecl { alias, metamodel, span })
    }

    fn rule(&mut self) -> PResult<CompositionRule> {
        let head = self.keyword("rule")?;
        let (name, _) = self.ident("a rule name")?;
        if self.eat_keyword("match") {
            let left = self.param()?;
            self.keyword("with")?;
            let right = self.param()?;
            self.keyword("compare")?;
            self.expect(Tok::LBrace)?;
            let guard = self.expr()?;
            self.expect(Tok::RBrace)?;
            Ok(CompositionRule {
                name,
                kind: RuleKind::Match,
                in_left: vec![left],
                in_right: vec![right],
                out: vec![],
                guard: Some(guard),
                body: vec![],
                span: head.span,
            })
        } else if self.eat_keyword("merge") {
            let left = self.param()?;
            self.keyword("with")?;
            let right = self.param()?;
            self.keyword("into")?;
            let out = self.param_list()?;
            let body = self.body()?;
            Ok(CompositionRule {
                name,
                kind: RuleKind::Merge,
                in_left: vec![left],
                in_right: vec![right],
                out,
                guard: None,
                body,
                span: head.span,
            })
        } else if self.eat_keyword("transform") {
            let in_left = self.param_list()?;
            let in_right = if self.eat_keyword("with") { self.param_list()? } else { vec![] };
            self.keyword("to")?;
            let out = self.param_list()?;
            let guard = if self.eat_keyword("when") {
                self.expect(Tok::LBrace)?;
                let g = self.expr()?;
                self.expect(Tok::RBrace)?;
                Some(g)
            } else {
                None
            };
            let body = self.body()?;
            Ok(CompositionRule {
                name,
                kind: RuleKind::Transform,
                in_left,
                in_right,
                out,
                guard,
                body,
                span: head.span,
            })
        } else {
            Err(SpecDiagnostic::error(
                self.span(),
                format!(
                    "expected 'match', 'merge' or 'transform' but found {}",
                    self.peek_tok().describe()
                ),
            ))
        }
    }

    fn param(&mut self) -> PResult<Param> {
        let (name, span) = self.ident("a parameter name")?;
        self.expect(Tok::Colon)?;
        let (alias, _) = self.ident("a model alias")?;
        self.expect(Tok::Bang)?;
        let (type_name, _) = self.ident("a type name")?;
        Ok(Param { name, alias, type_name, span })
    }

    fn param_list(&mut self) -> PResult<Vec<Param>> {
        let mut params = vec![self.param()?];
        while *self.peek_tok() == Tok::Comma {
            self.advance();
            params.push(self.param()?);
        }
        Ok(params)
    }

    fn body(&mut self) -> PResult<Vec<Statement>> {
        self.expect(Tok::LBrace)?;
        let mut stmts = Vec::new();
        while *self.peek_tok() != Tok::RBrace {
            stmts.push(self.statement()?);
        }
        self.expect(Tok::RBrace)?;
        Ok(stmts)
    }

    fn statement(&mut self) -> PResult<Statement> {
        let span = self.span();
        if self.eat_keyword("call") {
            let (callee, args) = self.call_tail()?;
            let nest = self.nest_suffix()?;
            self.expect(Tok::Semi)?;
            return Ok(Statement::Call { callee, args, assign: None, nest, span });
        }
        let (param, _) = self.ident("a parameter name")?;
        self.expect(Tok::Dot)?;
        let (member, _) = self.member_ident("an attribute or reference name")?;
        self.expect(Tok::Eq)?;
        let target = AssignTarget { param, member };
        if self.eat_keyword("equivalent") {
            self.expect(Tok::LParen)?;
            let source = self.expr()?;
            self.expect(Tok::RParen)?;
            let nest = self.nest_suffix()?;
            self.expect(Tok::Semi)?;
            Ok(Statement::SetResolve { target, source, nest, span })
        } else if self.eat_keyword("call") {
            let (callee, args) = self.call_tail()?;
            let nest = self.nest_suffix()?;
            self.expect(Tok::Semi)?;
            Ok(Statement::Call { callee, args, assign: Some(target), nest, span })
        } else {
            let value = self.expr()?;
            self.expect(Tok::Semi)?;
            Ok(Statement::SetAttr { target, value, span })
        }
    }

    fn call_tail(&mut self) -> PResult<(String, Vec<Expr>)> {
        let (callee, _) = self.ident("a rule name")?;
        self.expect(Tok::LParen)?;
        let mut args = Vec::new();
        if *self.peek_tok() != Tok::RParen {
            args.push(self.expr()?);
            while *self.peek_tok() == Tok::Comma {
                self.advance();
                args.push(self.expr()?);
            }
        }
        self.expect(Tok::RParen)?;
        Ok((callee, args))
    }

    fn nest_suffix(&mut self) -> PResult<Option<String>> {
        if self.eat_keyword("nest") {
            let (p, _) = self.ident("a link parameter name")?;
            Ok(Some(p))
        } else {
            Ok(None)
        }
    }

    // expression precedence, loosest first: or, and, not, =, postfix
    fn expr(&mut self) -> PResult<Expr> {
        self.or_expr()
    }

    fn or_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.and_expr()?;
        while self.at_keyword("or") {
            let span = self.advance().span;
            let rhs = self.and_expr()?;
            lhs = Expr::new(ExprKind::Or(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self) -> PResult<Expr> {
        let mut lhs = self.not_expr()?;
        while self.at_keyword("and") {
            let span = self.advance().span;
            let rhs = self.not_expr()?;
            lhs = Expr::new(ExprKind::And(Box::new(lhs), Box::new(rhs)), span);
        }
        Ok(lhs)
    }

    fn not_expr(&mut self) -> PResult<Expr> {
        if self.at_keyword("not") {
            let span = self.advance().span;
            let inner = self.not_expr()?;
            Ok(Expr::new(ExprKind::Not(Box::new(inner)), span))
        } else {
            self.cmp_expr()
        }
    }

    fn cmp_expr(&mut self) -> PResult<Expr> {
        let lhs = self.postfix_expr()?;
        if *self.peek_tok() == Tok::Eq {
            let span = self.advance().span;
            let rhs = self.postfix_expr()?;
            Ok(Expr::new(ExprKind::Eq(Box::new(lhs), Box::new(rhs)), span))
        } else {
            Ok(lhs)
        }
    }

    fn postfix_expr(&mut self) -> PResult<Expr> {
        let mut e = self.primary()?;
        while *self.peek_tok() == Tok::Dot {
            let span = self.advance().span;
            if self.eat_keyword("exists") {
                self.expect(Tok::LParen)?;
                let (var, _) = self.ident("a bound variable name")?;
                self.expect(Tok::Pipe)?;
                let pred = self.expr()?;
                self.expect(Tok::RParen)?;
                e = Expr::new(
                    ExprKind::Exists { base: Box::new(e), var, pred: Box::new(pred) },
                    span,
                );
            } else {
                let (member, _) = self.member_ident("an attribute or reference name")?;
                e = Expr::new(ExprKind::Access { base: Box::new(e), member }, span);
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> PResult<Expr> {
        let span = self.span();
        match self.peek_tok().clone() {
            Tok::Int(v) => {
                self.advance();
                Ok(Expr::new(ExprKind::Literal(PrimValue::Integer(v)), span))
            }
            Tok::Str(s) => {
                self.advance();
                Ok(Expr::new(ExprKind::Literal(PrimValue::String(s)), span))
            }
            Tok::LParen => {
                self.advance();
                let e = self.expr()?;
                self.expect(Tok::RParen)?;
                Ok(e)
            }
            Tok::Ident(s) => match s.as_str() {
                "true" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Literal(PrimValue::Boolean(true)), span))
                }
                "false" => {
                    self.advance();
                    Ok(Expr::new(ExprKind::Literal(PrimValue::Boolean(false)), span))
                }
                "has_match" => {
                    self.advance();
                    self.expect(Tok::LParen)?;
                    let (p, _) = self.ident("a parameter name")?;
                    self.expect(Tok::RParen)?;
                    Ok(Expr::new(ExprKind::HasMatch(p), span))
                }
                "id" => {
                    self.advance();
                    self.expect(Tok::LParen)?;
                    let mut args = Vec::new();
                    if *self.peek_tok() != Tok::RParen {
                        args.push(self.expr()?);
                        while *self.peek_tok() == Tok::Comma {
                            self.advance();
                            args.push(self.expr()?);
                        }
                    }
                    self.expect(Tok::RParen)?;
                    Ok(Expr::new(ExprKind::IdOf(args), span))
                }
                _ => {
                    let (name, _) = self.ident("an expression")?;
                    Ok(Expr::new(ExprKind::ParamRef(name), span))
                }
            },
            other => Err(SpecDiagnostic::error(
                span,
                format!("expected an expression but found {}", other.describe()),
            )),
        }
    }
}

/// Name-level invariants checked after a structurally successful parse:
/// unique rule names, unique parameter names per rule, and merge output
/// arity (one output per target model).
fn validate_structure(spec: &CompositionSpec) -> Vec<SpecDiagnostic> {
    let mut diags = Vec::new();
    for (i, rule) in spec.rules.iter().enumerate() {
        if spec.rules[..i].iter().any(|r| r.name == rule.name) {
            diags.push(SpecDiagnostic::error(
                rule.span,
                format!("rule name '{}' is declared twice", rule.name),
            ));
        }
        let params: Vec<&Param> = rule.inputs().chain(rule.out.iter()).collect();
        for (j, p) in params.iter().enumerate() {
            if params[..j].iter().any(|q| q.name == p.name) {
                diags.push(SpecDiagnostic::error(
                    p.span,
                    format!("parameter '{}' is declared twice in rule '{}'", p.name, rule.name),
                ));
            }
        }
        if rule.kind == RuleKind::Merge {
            for (j, p) in rule.out.iter().enumerate() {
                if rule.out[..j].iter().any(|q| q.alias == p.alias) {
                    diags.push(SpecDiagnostic::error(
                        p.span,
                        format!(
                            "merge rule '{}' declares more than one output into target '{}'",
                            rule.name, p.alias
                        ),
                    ));
                }
            }
        }
    }
    diags
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "composition C\nleft Source : entities\nright Vocabulary : vocabulary\ntarget Target : entities\n";

    #[test]
    fn parses_header_only_spec() {
        let spec = parse_spec(HEADER).unwrap();
        assert_eq!(spec.name, "C");
        assert!(spec.rules.is_empty());
        assert_eq!(spec.left.alias, "Source");
        assert_eq!(spec.targets.len(), 1);
    }

    #[test]
    fn parses_match_rule_with_compare() {
        let text = format!(
            "{HEADER}rule M match s : Source!Entity with t : Vocabulary!Term compare {{ s.name = t.name or t.alias.exists(a | a.name = s.name) }}"
        );
        let spec = parse_spec(&text).unwrap();
        let rule = &spec.rules[0];
        assert_eq!(rule.kind, RuleKind::Match);
        assert!(rule.guard.is_some());
        assert!(rule.body.is_empty());
        match &rule.guard.as_ref().unwrap().kind {
            ExprKind::Or(lhs, rhs) => {
                assert!(matches!(lhs.kind, ExprKind::Eq(_, _)));
                assert!(matches!(rhs.kind, ExprKind::Exists { .. }));
            }
            other => panic!("expected or, got {other:?}"),
        }
    }

    #[test]
    fn parses_merge_rule_body() {
        let text = format!(
            "{HEADER}rule M merge s : Source!Entity with t : Vocabulary!Term into m : Target!Entity {{ m.name = t.name; m.inDomain = true; }}"
        );
        let spec = parse_spec(&text).unwrap();
        let rule = &spec.rules[0];
        assert_eq!(rule.kind, RuleKind::Merge);
        assert_eq!(rule.body.len(), 2);
    }

    #[test]
    fn parses_transform_with_guard_and_resolve() {
        let text = format!(
            "{HEADER}rule T transform s : Source!System to t : Target!System when {{ not has_match(s) }} {{ t.entity = equivalent(s.entity); }}"
        );
        let spec = parse_spec(&text).unwrap();
        let rule = &spec.rules[0];
        assert_eq!(rule.kind, RuleKind::Transform);
        assert!(rule.guard.is_some());
        assert!(matches!(rule.body[0], Statement::SetResolve { .. }));
    }

    #[test]
    fn parses_call_statements_and_nest() {
        let text = format!(
            "{HEADER}rule M merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {{ t.entity = call R(s.entity) nest lnk; call R(s.entity); }}"
        );
        let spec = parse_spec(&text).unwrap();
        let rule = &spec.rules[0];
        match &rule.body[0] {
            Statement::Call { callee, assign, nest, .. } => {
                assert_eq!(callee, "R");
                assert!(assign.is_some());
                assert_eq!(nest.as_deref(), Some("lnk"));
            }
            other => panic!("unexpected statement {other:?}"),
        }
        match &rule.body[1] {
            Statement::Call { assign, nest, .. } => {
                assert!(assign.is_none());
                assert!(nest.is_none());
            }
            other => panic!("unexpected statement {other:?}"),
        }
    }

    #[test]
    fn merge_with_two_outputs_into_same_target_is_arity_error() {
        let text = format!(
            "{HEADER}rule M merge s : Source!Entity with t : Vocabulary!Term into m : Target!Entity, n : Target!Entity {{ }}"
        );
        let diags = parse_spec(&text).unwrap_err();
        assert_eq!(diags.len(), 1);
        assert!(diags[0].message.contains("more than one output"));
    }

    #[test]
    fn merge_with_outputs_into_distinct_targets_is_allowed() {
        let text = format!(
            "composition C\nleft Source : entities\nright Vocabulary : vocabulary\ntarget Target : entities\ntarget tr : trace-mm\nrule M merge s : Source!Entity with t : Vocabulary!Term into m : Target!Entity, lnk : tr!MergingLink {{ }}"
        );
        let spec = parse_spec(&text).unwrap();
        assert_eq!(spec.rules[0].out.len(), 2);
    }

    #[test]
    fn third_target_rejected() {
        let text = "composition C\nleft a : m\nright b : m\ntarget c : m\ntarget d : m\ntarget e : m\n";
        let diags = parse_spec(text).unwrap_err();
        assert!(diags[0].message.contains("at most two"));
    }

    #[test]
    fn duplicate_rule_names_rejected() {
        let text = format!(
            "{HEADER}rule M match s : Source!Entity with t : Vocabulary!Term compare {{ true }}\nrule M match s : Source!Entity with t : Vocabulary!Term compare {{ true }}"
        );
        let diags = parse_spec(&text).unwrap_err();
        assert!(diags[0].message.contains("declared twice"));
    }

    #[test]
    fn syntax_error_reports_location() {
        let diags = parse_spec("composition C left a b").unwrap_err();
        assert_eq!(diags[0].location.line, 1);
        assert!(diags[0].message.contains("expected ':'"));
    }

    #[test]
    fn precedence_not_binds_looser_than_eq() {
        let text = format!(
            "{HEADER}rule T transform s : Source!Entity to t : Target!Entity when {{ not s.name = t.name }} {{ }}"
        );
        // `t` is not in scope of the guard; parsing is all that matters here.
        let spec = parse_spec(&text).unwrap();
        match &spec.rules[0].guard.as_ref().unwrap().kind {
            ExprKind::Not(inner) => assert!(matches!(inner.kind, ExprKind::Eq(_, _))),
            other => panic!("expected not(eq), got {other:?}"),
        }
    }
}
