//! Rewrites a single-target composition so that an ordinary run of the
//! rewritten text also emits its own trace as a second target model.
//!
//! The rewriting has three steps, applied in order: declare the trace
//! model as an additional target, give every merge and transform rule an
//! output parameter of the matching link type (initializing its `left`,
//! `right`, and `targets` properties from the rule's own parameters),
//! and mark every `equivalent(..)` and `call` site so it records a
//! nesting relationship under the enclosing rule's link. The result is
//! plain specification text; no engine support beyond normal execution
//! is needed to obtain the trace.

use serde::Serialize;
use std::collections::HashMap;
use thiserror::Error;

use crate::model::{
    Model, PrimValue, MERGING_LINK_TYPE, TRACE_MM_NAME, TRACE_RELATIONSHIP_TYPE,
    TRANSFORMATION_LINK_TYPE,
};
use crate::spec::{
    AssignTarget, CompositionSpec, Expr, ExprKind, ModelDecl, Param, RuleKind, Span, Statement,
};
use crate::trace::{CallOrigin, LinkContext, LinkKind, TraceError, TraceLink, TraceModel, TraceRelation};

#[derive(Debug, Error)]
pub enum WeaveError {
    /// The composition must have exactly one target so the trace model
    /// can take the second slot.
    #[error(
        "weaving requires a composition with exactly one target model, but this one has {0}"
    )]
    TargetCount(usize),
}

/// The target declaration the weaver added.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AddedTarget {
    pub alias: String,
    pub metamodel: String,
}

/// One rule the weaver instrumented and the link parameter it gained.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct InstrumentedRule {
    pub rule: String,
    pub param: String,
}

/// One `equivalent(..)` or `call` site that now records a nesting
/// relationship; `statement` is the statement's index in the rule body.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct NestingSite {
    pub rule: String,
    pub statement: usize,
    pub origin: CallOrigin,
}

/// What the weaver did, mirroring its three rewriting steps.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WeaveReport {
    pub added_target: AddedTarget,
    pub instrumented_rules: Vec<InstrumentedRule>,
    pub nesting_sites: Vec<NestingSite>,
}

fn fresh_alias(spec: &CompositionSpec) -> String {
    let taken: Vec<&str> = std::iter::once(spec.left.alias.as_str())
        .chain(std::iter::once(spec.right.alias.as_str()))
        .chain(spec.targets.iter().map(|t| t.alias.as_str()))
        .collect();
    fresh_name("trace", &taken)
}

fn fresh_name(stem: &str, taken: &[&str]) -> String {
    if !taken.contains(&stem) {
        return stem.to_owned();
    }
    (2..)
        .map(|n| format!("{stem}{n}"))
        .find(|c| !taken.contains(&c.as_str()))
        .expect("some numbered name is free")
}

/// Rewrite a checked composition so its execution produces the trace
/// model as a second target. Returns the rewritten specification and a
/// report of the instrumentation.
pub fn weave_traceability(
    spec: &CompositionSpec,
) -> Result<(CompositionSpec, WeaveReport), WeaveError> {
    if spec.targets.len() != 1 {
        return Err(WeaveError::TargetCount(spec.targets.len()));
    }
    let mut woven = spec.clone();
    let trace_alias = fresh_alias(spec);
    woven.targets.push(ModelDecl {
        alias: trace_alias.clone(),
        metamodel: TRACE_MM_NAME.to_owned(),
        span: Span::default(),
    });

    let mut instrumented_rules = Vec::new();
    let mut nesting_sites = Vec::new();
    for rule in &mut woven.rules {
        let link_type = match rule.kind {
            RuleKind::Match => continue,
            RuleKind::Merge => MERGING_LINK_TYPE,
            RuleKind::Transform => TRANSFORMATION_LINK_TYPE,
        };
        let taken: Vec<&str> = rule.inputs().chain(rule.out.iter()).map(|p| p.name.as_str()).collect();
        let link_param = fresh_name("lnk", &taken);

        for (index, stmt) in rule.body.iter_mut().enumerate() {
            let origin = match stmt {
                Statement::SetAttr { .. } => continue,
                Statement::SetResolve { nest, .. } => {
                    *nest = Some(link_param.clone());
                    CallOrigin::Implicit
                }
                Statement::Call { nest, .. } => {
                    *nest = Some(link_param.clone());
                    CallOrigin::Explicit
                }
            };
            nesting_sites.push(NestingSite { rule: rule.name.clone(), statement: index, origin });
        }

        let ids_of = |params: &[Param]| {
            Expr::new(
                ExprKind::IdOf(
                    params
                        .iter()
                        .map(|p| Expr::new(ExprKind::ParamRef(p.name.clone()), Span::default()))
                        .collect(),
                ),
                Span::default(),
            )
        };
        let set_link_attr = |member: &str, value: Expr| Statement::SetAttr {
            target: AssignTarget { param: link_param.clone(), member: member.to_owned() },
            value,
            span: Span::default(),
        };
        rule.body.push(set_link_attr("left", ids_of(&rule.in_left)));
        if !rule.in_right.is_empty() {
            rule.body.push(set_link_attr("right", ids_of(&rule.in_right)));
        }
        rule.body.push(set_link_attr("targets", ids_of(&rule.out)));

        rule.out.push(Param {
            name: link_param.clone(),
            alias: trace_alias.clone(),
            type_name: link_type.to_owned(),
            span: Span::default(),
        });
        instrumented_rules.push(InstrumentedRule { rule: rule.name.clone(), param: link_param });
    }

    let report = WeaveReport {
        added_target: AddedTarget { alias: trace_alias, metamodel: TRACE_MM_NAME.to_owned() },
        instrumented_rules,
        nesting_sites,
    };
    Ok((woven, report))
}

fn string_attr(model: &Model, element_id: &str, name: &str) -> Option<String> {
    model.element(element_id).and_then(|e| e.attrs.get(name)).map(PrimValue::to_string)
}

/// Read the trace encoded in a woven run's second target back into
/// trace form. Link ids are assigned in element order; each link keeps
/// its position as an `activation` context attribute.
pub fn trace_from_woven_target(model: &Model) -> Result<TraceModel, TraceError> {
    let mut links = Vec::new();
    let mut link_ids: HashMap<&str, String> = HashMap::new();
    for element in &model.elements {
        let kind = match element.type_name.as_str() {
            MERGING_LINK_TYPE => LinkKind::Merging,
            TRANSFORMATION_LINK_TYPE => LinkKind::Transformation,
            _ => continue,
        };
        let id = format!("l{}", links.len() + 1);
        link_ids.insert(&element.id, id.clone());
        let ids_in = |name: &str| -> Vec<String> {
            element
                .attrs
                .get(name)
                .map(|v| v.to_string().split_whitespace().map(str::to_owned).collect())
                .unwrap_or_default()
        };
        let mut context = LinkContext::new();
        context.insert("activation".to_owned(), links.len().to_string());
        links.push(TraceLink {
            id,
            kind,
            left: ids_in("left"),
            right: ids_in("right"),
            targets: ids_in("targets"),
            context,
        });
    }
    // Renumber after the loop so positions are 1-based.
    for (index, link) in links.iter_mut().enumerate() {
        link.context.insert("activation".to_owned(), (index + 1).to_string());
    }
    let mut relationships = Vec::new();
    for element in model.elements.iter().filter(|e| e.type_name == TRACE_RELATIONSHIP_TYPE) {
        let end = |attr: &str| -> Result<String, TraceError> {
            let raw = string_attr(model, &element.id, attr).ok_or_else(|| {
                TraceError::Integrity(format!(
                    "relationship element '{}' has no {attr} value",
                    element.id
                ))
            })?;
            link_ids.get(raw.as_str()).cloned().ok_or_else(|| {
                TraceError::Integrity(format!(
                    "relationship element '{}' references '{raw}', which is not a link element",
                    element.id
                ))
            })
        };
        let parent = end("parent")?;
        let child = end("child")?;
        let origin = match string_attr(model, &element.id, "origin").as_deref() {
            Some("explicit") => CallOrigin::Explicit,
            Some("implicit") => CallOrigin::Implicit,
            other => {
                return Err(TraceError::Integrity(format!(
                    "relationship element '{}' has origin {:?}; expected explicit or implicit",
                    element.id, other
                )))
            }
        };
        relationships.push(TraceRelation { parent, child, origin });
    }
    let trace = TraceModel { links, relationships };
    trace.validate()?;
    Ok(trace)
}

/// Outcome of comparing a natively built trace against the trace a
/// woven run encoded in its second target model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EquivalenceReport {
    pub equivalent: bool,
    pub mismatches: Vec<String>,
}

fn link_key(link: &TraceLink) -> (LinkKind, String, String) {
    (link.kind, link.left.join(" "), link.right.join(" "))
}

fn describe_key(key: &(LinkKind, String, String)) -> String {
    format!("{} link over left [{}] right [{}]", key.0, key.1, key.2)
}

/// Compare the two trace encodings of one composition. The traces are
/// equivalent when the links correspond one-to-one on (kind, left,
/// right), corresponding links name the same number of targets through
/// a consistent target-id mapping, and the nesting relationship sets
/// agree under the induced link correspondence. Mismatches are reported
/// as data; target element ids may differ between the two runs, so they
/// are compared through the induced mapping rather than literally.
pub fn check_equivalence(native: &TraceModel, woven_output: &Model) -> EquivalenceReport {
    let mut mismatches = Vec::new();
    let woven = match trace_from_woven_target(woven_output) {
        Ok(trace) => trace,
        Err(err) => {
            return EquivalenceReport {
                equivalent: false,
                mismatches: vec![format!("woven target is not a readable trace: {err}")],
            }
        }
    };

    let mut pairs: Vec<(&TraceLink, &TraceLink)> = Vec::new();
    let mut woven_by_key: HashMap<(LinkKind, String, String), &TraceLink> = HashMap::new();
    for link in &woven.links {
        if woven_by_key.insert(link_key(link), link).is_some() {
            mismatches.push(format!("woven trace repeats the {}", describe_key(&link_key(link))));
        }
    }
    let mut native_keys: Vec<(LinkKind, String, String)> = Vec::new();
    for link in &native.links {
        let key = link_key(link);
        if native_keys.contains(&key) {
            mismatches.push(format!("native trace repeats the {}", describe_key(&key)));
            continue;
        }
        native_keys.push(key.clone());
        match woven_by_key.remove(&key) {
            Some(counterpart) => pairs.push((link, counterpart)),
            None => mismatches.push(format!("woven trace is missing the {}", describe_key(&key))),
        }
    }
    for (key, _) in &woven_by_key {
        mismatches.push(format!("woven trace has an extra {}", describe_key(key)));
    }

    // Corresponding links must map target ids consistently.
    let mut target_map: HashMap<&str, &str> = HashMap::new();
    let mut reverse_map: HashMap<&str, &str> = HashMap::new();
    for (native_link, woven_link) in &pairs {
        if native_link.targets.len() != woven_link.targets.len() {
            mismatches.push(format!(
                "{} names {} targets natively but {} in the woven run",
                describe_key(&link_key(native_link)),
                native_link.targets.len(),
                woven_link.targets.len()
            ));
            continue;
        }
        for (a, b) in native_link.targets.iter().zip(&woven_link.targets) {
            if let Some(&prior) = target_map.get(a.as_str()) {
                if prior != b {
                    mismatches.push(format!(
                        "target '{a}' corresponds to both '{prior}' and '{b}' in the woven run"
                    ));
                }
            } else {
                target_map.insert(a, b);
            }
            if let Some(&prior) = reverse_map.get(b.as_str()) {
                if prior != a {
                    mismatches.push(format!(
                        "woven target '{b}' corresponds to both '{prior}' and '{a}' natively"
                    ));
                }
            } else {
                reverse_map.insert(b, a);
            }
        }
    }

    // Relationships, carried across the link correspondence.
    let link_map: HashMap<&str, &str> = pairs
        .iter()
        .map(|(n, w)| (n.id.as_str(), w.id.as_str()))
        .collect();
    let translate = |rel: &TraceRelation| -> Option<(String, String, CallOrigin)> {
        Some((
            (*link_map.get(rel.parent.as_str())?).to_owned(),
            (*link_map.get(rel.child.as_str())?).to_owned(),
            rel.origin,
        ))
    };
    let woven_rels: Vec<(String, String, CallOrigin)> = woven
        .relationships
        .iter()
        .map(|r| (r.parent.clone(), r.child.clone(), r.origin))
        .collect();
    let mut matched: Vec<&(String, String, CallOrigin)> = Vec::new();
    for rel in &native.relationships {
        match translate(rel) {
            Some(expected) => {
                if let Some(found) = woven_rels.iter().find(|r| **r == expected) {
                    matched.push(found);
                } else {
                    mismatches.push(format!(
                        "woven trace is missing the {} nesting of '{}' under '{}'",
                        rel.origin, rel.child, rel.parent
                    ));
                }
            }
            None => mismatches.push(format!(
                "nesting of '{}' under '{}' involves links with no woven counterpart",
                rel.child, rel.parent
            )),
        }
    }
    for rel in &woven_rels {
        if !matched.iter().any(|m| *m == rel) {
            mismatches.push(format!(
                "woven trace has an extra {} nesting of '{}' under '{}'",
                rel.2, rel.1, rel.0
            ));
        }
    }

    EquivalenceReport { equivalent: mismatches.is_empty(), mismatches }
}

/// Compare the composed model of an unwoven run with the first target
/// of the corresponding woven run. Generated element ids differ between
/// the runs, so elements are paired by creation order and references
/// are compared through that pairing. Returns the list of differences;
/// empty means the weaving preserved the composition.
pub fn check_composed_match(native: &Model, woven_main: &Model) -> Vec<String> {
    let mut mismatches = Vec::new();
    if native.elements.len() != woven_main.elements.len() {
        mismatches.push(format!(
            "composed models differ in size: {} elements natively, {} woven",
            native.elements.len(),
            woven_main.elements.len()
        ));
        return mismatches;
    }
    let id_map: HashMap<&str, &str> = woven_main
        .elements
        .iter()
        .zip(&native.elements)
        .map(|(w, n)| (w.id.as_str(), n.id.as_str()))
        .collect();
    for (native_el, woven_el) in native.elements.iter().zip(&woven_main.elements) {
        if native_el.type_name != woven_el.type_name {
            mismatches.push(format!(
                "element '{}' is a {} natively but a {} in the woven run",
                native_el.id, native_el.type_name, woven_el.type_name
            ));
            continue;
        }
        if native_el.attrs != woven_el.attrs {
            mismatches.push(format!(
                "element '{}' differs in attribute values between the runs",
                native_el.id
            ));
        }
        let woven_refs_mapped: Vec<(&String, Vec<&str>)> = woven_el
            .refs
            .iter()
            .map(|(name, ids)| {
                (
                    name,
                    ids.iter()
                        .map(|id| id_map.get(id.as_str()).copied().unwrap_or(id.as_str()))
                        .collect(),
                )
            })
            .collect();
        let native_refs: Vec<(&String, Vec<&str>)> = native_el
            .refs
            .iter()
            .map(|(name, ids)| (name, ids.iter().map(String::as_str).collect()))
            .collect();
        if native_refs != woven_refs_mapped {
            mismatches.push(format!(
                "element '{}' differs in references between the runs",
                native_el.id
            ));
        }
    }
    mismatches
}
