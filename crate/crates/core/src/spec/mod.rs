//! The composition specification language: AST, parser, type checker,
//! and printer.
//!
//! A specification declares a left and a right source model, one or two
//! target models, and an ordered set of rules. Match rules establish
//! correspondences, merge rules combine one left with one right element
//! into target elements, and transform rules transcribe source tuples.
//! The full grammar lives in `docs/dsl.md`.

mod checker;
mod lexer;
mod parser;
mod printer;

pub use checker::check_spec;
pub use parser::parse_spec;
pub use printer::print_spec;

use crate::model::PrimValue;
use serde::Serialize;
use std::fmt;

/// Source position (1-based line and column).
///
/// Spans are carried for diagnostics only and are transparent to
/// equality, so a parsed spec compares equal to its reprinted self.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct Span {
    pub line: u32,
    pub col: u32,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for Span {}

impl fmt::Display for Span {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
}

/// A parse or type-check finding, anchored into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpecDiagnostic {
    pub severity: Severity,
    pub location: Span,
    pub message: String,
}

impl SpecDiagnostic {
    pub fn error(location: Span, message: impl Into<String>) -> Self {
        SpecDiagnostic { severity: Severity::Error, location, message: message.into() }
    }
}

impl fmt::Display for SpecDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "error at {}: {}", self.location, self.message)
    }
}

/// Binding of a model alias to a metamodel name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModelDecl {
    pub alias: String,
    pub metamodel: String,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleKind {
    Match,
    Merge,
    Transform,
}

impl fmt::Display for RuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RuleKind::Match => write!(f, "match"),
            RuleKind::Merge => write!(f, "merge"),
            RuleKind::Transform => write!(f, "transform"),
        }
    }
}

/// A rule parameter: `name : alias!Type`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: String,
    pub alias: String,
    pub type_name: String,
    pub span: Span,
}

/// A composition rule. Match rules carry only a guard (the compare
/// predicate); merge and transform rules carry output parameters and a
/// statement body, and transform rules may carry a `when` filter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionRule {
    pub name: String,
    pub kind: RuleKind,
    pub in_left: Vec<Param>,
    pub in_right: Vec<Param>,
    pub out: Vec<Param>,
    pub guard: Option<Expr>,
    pub body: Vec<Statement>,
    pub span: Span,
}

impl CompositionRule {
    /// Input parameters in declaration order, left side first.
    pub fn inputs(&self) -> impl Iterator<Item = &Param> {
        self.in_left.iter().chain(self.in_right.iter())
    }
}

/// A parsed composition specification.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompositionSpec {
    pub name: String,
    pub left: ModelDecl,
    pub right: ModelDecl,
    pub targets: Vec<ModelDecl>,
    pub rules: Vec<CompositionRule>,
}

impl CompositionSpec {
    pub fn rule(&self, name: &str) -> Option<&CompositionRule> {
        self.rules.iter().find(|r| r.name == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Expr {
    pub kind: ExprKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExprKind {
    Literal(PrimValue),
    ParamRef(String),
    /// Attribute or reference navigation; which one is resolved by the
    /// checker against the base expression's metatype.
    Access { base: Box<Expr>, member: String },
    Eq(Box<Expr>, Box<Expr>),
    And(Box<Expr>, Box<Expr>),
    Or(Box<Expr>, Box<Expr>),
    Not(Box<Expr>),
    /// `collection.exists(var | predicate)`
    Exists { base: Box<Expr>, var: String, pred: Box<Expr> },
    /// True iff the element bound to the parameter participates in a
    /// correspondence established by the match phase.
    HasMatch(String),
    /// Whitespace-joined element ids of the argument values; the string
    /// form trace link properties are written in.
    IdOf(Vec<Expr>),
}

impl Expr {
    pub fn new(kind: ExprKind, span: Span) -> Self {
        Expr { kind, span }
    }
}

/// Reference assignment target: `param.member`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssignTarget {
    pub param: String,
    pub member: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Statement {
    /// `out.attr = expr;`
    SetAttr { target: AssignTarget, value: Expr, span: Span },
    /// `out.ref = equivalent(expr) [nest lnk];` — resolve the source
    /// elements of `expr` through the activation log and wire their
    /// target equivalents.
    SetResolve { target: AssignTarget, source: Expr, nest: Option<String>, span: Span },
    /// `call Rule(args) [nest lnk];`, optionally wiring returned targets
    /// into `out.ref`.
    Call {
        callee: String,
        args: Vec<Expr>,
        assign: Option<AssignTarget>,
        nest: Option<String>,
        span: Span,
    },
}

impl Statement {
    pub fn span(&self) -> Span {
        match self {
            Statement::SetAttr { span, .. }
            | Statement::SetResolve { span, .. }
            | Statement::Call { span, .. } => *span,
        }
    }

    pub fn nest_param(&self) -> Option<&str> {
        match self {
            Statement::SetAttr { .. } => None,
            Statement::SetResolve { nest, .. } | Statement::Call { nest, .. } => nest.as_deref(),
        }
    }
}
