//! The composition trace: links between source elements and the target
//! elements made from them, nested by the call structure of the run.
//!
//! A trace has one link per merge or transform activation. Merging links
//! connect exactly one left and one right element to exactly one target
//! element; transformation links connect a source tuple to its targets.
//! Relationships nest links: whenever a rule body pulled in another
//! activation's results — explicitly through `call`, implicitly through
//! `equivalent(..)` — the caller's link becomes the parent of the
//! callee's link. Comparisons (match rules) leave no links; they create
//! no elements.

mod dot;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{ExecutionResult, SourceSide};
use crate::model::to_json_string;
use crate::spec::RuleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LinkKind {
    Merging,
    Transformation,
}

impl std::fmt::Display for LinkKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            LinkKind::Merging => write!(f, "merging"),
            LinkKind::Transformation => write!(f, "transformation"),
        }
    }
}

/// Free-form metadata attached to a link: ordered name/value pairs with
/// unique names. Natively built traces record the rule name and the
/// activation number here.
pub type LinkContext = IndexMap<String, String>;

/// One trace link: the triplet of left elements, right elements, and the
/// target elements produced from them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceLink {
    pub id: String,
    pub kind: LinkKind,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "LinkContext::is_empty")]
    pub context: LinkContext,
}

impl TraceLink {
    /// The rule recorded in the link context, when present.
    pub fn rule(&self) -> Option<&str> {
        self.context.get("rule").map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CallOrigin {
    Explicit,
    Implicit,
}

impl std::fmt::Display for CallOrigin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CallOrigin::Explicit => write!(f, "explicit"),
            CallOrigin::Implicit => write!(f, "implicit"),
        }
    }
}

/// A nesting between two links: the parent's rule pulled in the child's
/// results.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRelation {
    pub parent: String,
    pub child: String,
    pub origin: CallOrigin,
}

/// A complete trace: links plus the nesting relationships between them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceModel {
    pub links: Vec<TraceLink>,
    pub relationships: Vec<TraceRelation>,
}

/// Which side of the composition an element id is looked up on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementSide {
    Left,
    Right,
    Target,
}

#[derive(Debug, Error)]
pub enum TraceError {
    /// The trace violates a structural invariant.
    #[error("trace integrity: {0}")]
    Integrity(String),
    /// A query named a link that is not in the trace.
    #[error("unknown link '{0}'")]
    UnknownLink(String),
    #[error("trace parse error: {0}")]
    Parse(#[from] serde_json::Error),
}

fn link_id_for(seq: usize, count: usize) -> Result<String, TraceError> {
    if seq == 0 || seq > count {
        return Err(TraceError::Integrity(format!(
            "call record names activation {seq}, which has no link"
        )));
    }
    Ok(format!("l{seq}"))
}

/// Build the links of a trace: one per activation, in scheduling order,
/// with the link kind mapped from the rule kind. The result carries no
/// relationships yet; [`nest_links`] adds them.
pub fn build_trace(result: &ExecutionResult) -> Result<TraceModel, TraceError> {
    let mut links = Vec::with_capacity(result.activations.len());
    for act in &result.activations {
        let kind = match act.kind {
            RuleKind::Merge => LinkKind::Merging,
            RuleKind::Transform => LinkKind::Transformation,
            RuleKind::Match => {
                return Err(TraceError::Integrity(format!(
                    "activation {} records a match rule; comparisons are not traced",
                    act.seq
                )))
            }
        };
        let targets: Vec<String> = act.targets.iter().map(|t| t.id.clone()).collect();
        if kind == LinkKind::Merging
            && (act.left.len() != 1 || act.right.len() != 1 || targets.len() != 1)
        {
            return Err(TraceError::Integrity(format!(
                "merging link for activation {} must connect exactly one element per side \
                 (got {} left, {} right, {} targets)",
                act.seq,
                act.left.len(),
                act.right.len(),
                targets.len()
            )));
        }
        let mut context = LinkContext::new();
        context.insert("rule".to_owned(), act.rule.clone());
        context.insert("activation".to_owned(), act.seq.to_string());
        links.push(TraceLink {
            id: format!("l{}", act.seq),
            kind,
            left: act.left.clone(),
            right: act.right.clone(),
            targets,
            context,
        });
    }
    Ok(TraceModel { links, relationships: Vec::new() })
}

/// Add the nesting relationships to a built trace. Each explicit call
/// record nests the callee's link under the caller's; each resolution
/// record nests the links of the activations that produced the resolved
/// elements. Duplicate (parent, child, origin) triples are recorded
/// once, and a link is never nested under itself.
pub fn nest_links(
    mut trace: TraceModel,
    result: &ExecutionResult,
) -> Result<TraceModel, TraceError> {
    let count = trace.links.len();
    let push = |relationships: &mut Vec<TraceRelation>, rel: TraceRelation| {
        if rel.parent != rel.child && !relationships.contains(&rel) {
            relationships.push(rel);
        }
    };
    for call in &result.explicit_calls {
        push(
            &mut trace.relationships,
            TraceRelation {
                parent: link_id_for(call.caller, count)?,
                child: link_id_for(call.callee, count)?,
                origin: CallOrigin::Explicit,
            },
        );
    }
    for call in &result.implicit_calls {
        let parent = link_id_for(call.caller, count)?;
        let sides = [
            (SourceSide::Left, &call.resolved_left),
            (SourceSide::Right, &call.resolved_right),
        ];
        for (side, ids) in sides {
            for id in ids {
                for producer in result.producers(side, id) {
                    push(
                        &mut trace.relationships,
                        TraceRelation {
                            parent: parent.clone(),
                            child: link_id_for(producer.seq, count)?,
                            origin: CallOrigin::Implicit,
                        },
                    );
                }
            }
        }
    }
    Ok(trace)
}

/// Build and nest in one step: the full trace of a run.
pub fn trace_execution(result: &ExecutionResult) -> Result<TraceModel, TraceError> {
    nest_links(build_trace(result)?, result)
}

impl TraceModel {
    pub fn link(&self, id: &str) -> Option<&TraceLink> {
        self.links.iter().find(|l| l.id == id)
    }

    fn require(&self, id: &str) -> Result<&TraceLink, TraceError> {
        self.link(id).ok_or_else(|| TraceError::UnknownLink(id.to_owned()))
    }

    /// Links nested under the given link, in relationship order.
    pub fn children(&self, id: &str) -> Result<Vec<&TraceLink>, TraceError> {
        self.require(id)?;
        let mut out: Vec<&TraceLink> = Vec::new();
        for rel in self.relationships.iter().filter(|r| r.parent == id) {
            if let Some(child) = self.link(&rel.child) {
                if !out.iter().any(|l| l.id == child.id) {
                    out.push(child);
                }
            }
        }
        Ok(out)
    }

    /// Links the given link is nested under, in relationship order.
    pub fn parents(&self, id: &str) -> Result<Vec<&TraceLink>, TraceError> {
        self.require(id)?;
        let mut out: Vec<&TraceLink> = Vec::new();
        for rel in self.relationships.iter().filter(|r| r.child == id) {
            if let Some(parent) = self.link(&rel.parent) {
                if !out.iter().any(|l| l.id == parent.id) {
                    out.push(parent);
                }
            }
        }
        Ok(out)
    }

    /// Every link that involves the given element on the given side.
    /// Unknown elements simply have no links.
    pub fn links_for_element(&self, side: ElementSide, id: &str) -> Vec<&TraceLink> {
        self.links
            .iter()
            .filter(|l| {
                let pool = match side {
                    ElementSide::Left => &l.left,
                    ElementSide::Right => &l.right,
                    ElementSide::Target => &l.targets,
                };
                pool.iter().any(|x| x == id)
            })
            .collect()
    }

    /// Check the structural invariants: unique link ids, merging-link
    /// cardinality, relationships over existing distinct links.
    pub fn validate(&self) -> Result<(), TraceError> {
        let mut seen: Vec<&str> = Vec::new();
        for link in &self.links {
            if seen.contains(&link.id.as_str()) {
                return Err(TraceError::Integrity(format!("duplicate link id '{}'", link.id)));
            }
            seen.push(&link.id);
            if link.kind == LinkKind::Merging
                && (link.left.len() != 1 || link.right.len() != 1 || link.targets.len() != 1)
            {
                return Err(TraceError::Integrity(format!(
                    "merging link '{}' must connect exactly one element per side",
                    link.id
                )));
            }
        }
        for rel in &self.relationships {
            for end in [&rel.parent, &rel.child] {
                if !seen.contains(&end.as_str()) {
                    return Err(TraceError::Integrity(format!(
                        "relationship references unknown link '{end}'"
                    )));
                }
            }
            if rel.parent == rel.child {
                return Err(TraceError::Integrity(format!(
                    "link '{}' is nested under itself",
                    rel.parent
                )));
            }
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        to_json_string(self)
    }

    /// Parse a trace from JSON and check its invariants.
    pub fn from_json(text: &str) -> Result<Self, TraceError> {
        let trace: TraceModel = serde_json::from_str(text)?;
        trace.validate()?;
        Ok(trace)
    }
}

pub use dot::export_dot;
