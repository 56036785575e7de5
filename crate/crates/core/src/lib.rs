//! Rule-based model composition with traceability.
//!
//! This crate composes two source models into one or two target models,
//! driven by a declarative specification of match, merge, and transform
//! rules. Every run records which rules fired on which elements, and
//! that record becomes a queryable trace model: one link per created
//! element group, nested by the rule-call structure that produced it.
//!
//! The same trace can be obtained a second way: [`weaver`] rewrites a
//! specification so that it builds its own trace model as an ordinary
//! second composition target, and [`weaver::check_equivalence`] shows
//! both roads agree.
//!
//! Modules, in dependency order:
//!
//! - [`model`]: metamodels, models, conformance checking, JSON formats.
//! - [`spec`]: the rule language — AST, parser, checker, printer.
//! - [`engine`]: rule scheduling and execution.
//! - [`trace`]: trace construction, queries, and DOT export.
//! - [`weaver`]: specification rewriting for self-tracing runs.
//! - [`testgen`]: seeded generation of runnable composition setups.

pub mod engine;
pub mod model;
pub mod spec;
pub mod testgen;
pub mod trace;
pub mod weaver;

#[cfg(test)]
pub(crate) mod testutil;
