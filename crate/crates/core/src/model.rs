//! Typed attributed-graph representation of metamodels and models.
//!
//! A [`Metamodel`] declares element types with primitive attributes and
//! typed references; a [`Model`] is a flat table of identified elements
//! conforming to one metamodel. Containment is a flagged reference, and
//! all ordering (types, elements, reference values) is document order so
//! that emitted files are byte-stable.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Primitive attribute kinds supported by the metamodel language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrimKind {
    String,
    Boolean,
    Integer,
}

impl fmt::Display for PrimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimKind::String => write!(f, "string"),
            PrimKind::Boolean => write!(f, "boolean"),
            PrimKind::Integer => write!(f, "integer"),
        }
    }
}

/// A primitive attribute value.
///
/// Serialized untagged, so attribute maps read and write as plain JSON
/// scalars.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PrimValue {
    Boolean(bool),
    Integer(i64),
    String(String),
}

impl PrimValue {
    pub fn kind(&self) -> PrimKind {
        match self {
            PrimValue::String(_) => PrimKind::String,
            PrimValue::Boolean(_) => PrimKind::Boolean,
            PrimValue::Integer(_) => PrimKind::Integer,
        }
    }
}

impl fmt::Display for PrimValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PrimValue::String(s) => write!(f, "{s}"),
            PrimValue::Boolean(b) => write!(f, "{b}"),
            PrimValue::Integer(i) => write!(f, "{i}"),
        }
    }
}

/// Declaration of a primitive attribute on a metatype.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeDef {
    pub name: String,
    pub kind: PrimKind,
}

/// Declaration of a reference on a metatype.
///
/// `target` names another metatype of the same metamodel. A reference
/// with `many = false` holds at most one element id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceDef {
    pub name: String,
    pub target: String,
    pub many: bool,
    pub containment: bool,
}

/// An element type: named attribute and reference declarations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetaType {
    pub name: String,
    #[serde(default)]
    pub attributes: Vec<AttributeDef>,
    #[serde(default)]
    pub references: Vec<ReferenceDef>,
}

impl MetaType {
    pub fn attribute(&self, name: &str) -> Option<&AttributeDef> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn reference(&self, name: &str) -> Option<&ReferenceDef> {
        self.references.iter().find(|r| r.name == name)
    }
}

/// A named set of metatypes; the type system models conform to.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metamodel {
    pub name: String,
    #[serde(default)]
    pub types: Vec<MetaType>,
}

impl Metamodel {
    pub fn get_type(&self, name: &str) -> Option<&MetaType> {
        self.types.iter().find(|t| t.name == name)
    }

    /// Structural validity: unique type names, unique attribute and
    /// reference names per type, and every reference target declared.
    pub fn validate(&self) -> Result<(), ModelError> {
        for (i, ty) in self.types.iter().enumerate() {
            if self.types[..i].iter().any(|t| t.name == ty.name) {
                return Err(ModelError::Validation(format!(
                    "duplicate type name '{}' in metamodel '{}'",
                    ty.name, self.name
                )));
            }
            let mut seen = Vec::new();
            for a in &ty.attributes {
                if seen.contains(&a.name.as_str()) {
                    return Err(ModelError::Validation(format!(
                        "duplicate attribute or reference name '{}' on type '{}'",
                        a.name, ty.name
                    )));
                }
                seen.push(&a.name);
            }
            for r in &ty.references {
                if seen.contains(&r.name.as_str()) {
                    return Err(ModelError::Validation(format!(
                        "duplicate attribute or reference name '{}' on type '{}'",
                        r.name, ty.name
                    )));
                }
                seen.push(&r.name);
                if self.get_type(&r.target).is_none() {
                    return Err(ModelError::Validation(format!(
                        "reference '{}.{}' targets undeclared type '{}'",
                        ty.name, r.name, r.target
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Role a model plays in a composition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelRole {
    Left,
    Right,
    Composed,
    Trace,
}

impl fmt::Display for ModelRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelRole::Left => write!(f, "left"),
            ModelRole::Right => write!(f, "right"),
            ModelRole::Composed => write!(f, "composed"),
            ModelRole::Trace => write!(f, "trace"),
        }
    }
}

/// One identified, typed, attributed element.
///
/// Reference values are ordered lists of element ids within the same
/// model. Attribute and reference maps keep insertion order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelElement {
    pub id: String,
    #[serde(rename = "type")]
    pub type_name: String,
    #[serde(default)]
    pub attrs: IndexMap<String, PrimValue>,
    #[serde(default)]
    pub refs: IndexMap<String, Vec<String>>,
}

impl ModelElement {
    pub fn new(id: impl Into<String>, type_name: impl Into<String>) -> Self {
        ModelElement {
            id: id.into(),
            type_name: type_name.into(),
            attrs: IndexMap::new(),
            refs: IndexMap::new(),
        }
    }
}

/// A model: ordered elements conforming to a named metamodel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Model {
    pub id: String,
    pub metamodel: String,
    pub role: ModelRole,
    #[serde(default)]
    pub elements: Vec<ModelElement>,
}

impl Model {
    pub fn new(id: impl Into<String>, metamodel: impl Into<String>, role: ModelRole) -> Self {
        Model {
            id: id.into(),
            metamodel: metamodel.into(),
            role,
            elements: Vec::new(),
        }
    }

    pub fn element(&self, id: &str) -> Option<&ModelElement> {
        self.elements.iter().find(|e| e.id == id)
    }

    pub fn element_mut(&mut self, id: &str) -> Option<&mut ModelElement> {
        self.elements.iter_mut().find(|e| e.id == id)
    }

    /// Elements of the given type, in document order.
    pub fn elements_of_type<'a>(&'a self, ty: &'a str) -> impl Iterator<Item = &'a ModelElement> {
        self.elements.iter().filter(move |e| e.type_name == ty)
    }
}

/// A single conformance violation. Violations are data, not failures:
/// [`conforms`] reports every one it finds and never aborts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub element: Option<String>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.element {
            Some(id) => write!(f, "element '{}': {}", id, self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("parse error: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("conformance error: {}", format_violations(.0))]
    Conformance(Vec<Violation>),
}

fn format_violations(vs: &[Violation]) -> String {
    vs.iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// Parse a metamodel document and validate its structure.
pub fn load_metamodel(doc: &str) -> Result<Metamodel, ModelError> {
    let mm: Metamodel = serde_json::from_str(doc)?;
    mm.validate()?;
    Ok(mm)
}

/// Parse a model document and check conformance against `mm`.
pub fn load_model(doc: &str, mm: &Metamodel) -> Result<Model, ModelError> {
    let model: Model = serde_json::from_str(doc)?;
    let violations = conforms(&model, mm);
    if violations.is_empty() {
        Ok(model)
    } else {
        Err(ModelError::Conformance(violations))
    }
}

/// Check every model invariant against `mm` and report all violations.
///
/// Total over malformed-but-parseable input: an element with an unknown
/// type yields a violation for the type and skips the per-feature checks
/// that depend on it.
pub fn conforms(model: &Model, mm: &Metamodel) -> Vec<Violation> {
    let mut out = Vec::new();
    if model.metamodel != mm.name {
        out.push(Violation {
            element: None,
            message: format!(
                "model declares metamodel '{}' but was checked against '{}'",
                model.metamodel, mm.name
            ),
        });
    }
    for (i, el) in model.elements.iter().enumerate() {
        if model.elements[..i].iter().any(|e| e.id == el.id) {
            out.push(Violation {
                element: Some(el.id.clone()),
                message: "duplicate element id".into(),
            });
        }
        let ty = match mm.get_type(&el.type_name) {
            Some(ty) => ty,
            None => {
                out.push(Violation {
                    element: Some(el.id.clone()),
                    message: format!("type '{}' is not declared in metamodel '{}'", el.type_name, mm.name),
                });
                continue;
            }
        };
        for (name, value) in &el.attrs {
            match ty.attribute(name) {
                Some(def) => {
                    if value.kind() != def.kind {
                        out.push(Violation {
                            element: Some(el.id.clone()),
                            message: format!(
                                "attribute '{}' expects {} but holds {}",
                                name,
                                def.kind,
                                value.kind()
                            ),
                        });
                    }
                }
                None => out.push(Violation {
                    element: Some(el.id.clone()),
                    message: format!("attribute '{}' is not declared on type '{}'", name, ty.name),
                }),
            }
        }
        for (name, targets) in &el.refs {
            match ty.reference(name) {
                Some(def) => {
                    if !def.many && targets.len() > 1 {
                        out.push(Violation {
                            element: Some(el.id.clone()),
                            message: format!(
                                "reference '{}' has multiplicity one but holds {} ids",
                                name,
                                targets.len()
                            ),
                        });
                    }
                    for t in targets {
                        if model.element(t).is_none() {
                            out.push(Violation {
                                element: Some(el.id.clone()),
                                message: format!("reference '{}' points at missing element '{}'", name, t),
                            });
                        }
                    }
                }
                None => out.push(Violation {
                    element: Some(el.id.clone()),
                    message: format!("reference '{}' is not declared on type '{}'", name, ty.name),
                }),
            }
        }
    }
    out
}

/// Pretty JSON with a trailing newline; the emission format for every
/// file the engine writes.
pub fn to_json_string<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

/// The reserved metamodel name for built-in trace types.
pub const TRACE_MM_NAME: &str = "trace-mm";

/// Trace type recording the merge of a matched element pair.
pub const MERGING_LINK_TYPE: &str = "MergingLink";
/// Trace type recording a plain transformation of input elements.
pub const TRANSFORMATION_LINK_TYPE: &str = "TransformationLink";
/// Trace type recording a parent/child nesting between two links.
pub const TRACE_RELATIONSHIP_TYPE: &str = "TraceRelationship";

/// The built-in metamodel woven specifications produce their trace model
/// against. Link elements carry their endpoints as whitespace-joined id
/// strings because references may not cross models.
pub fn trace_metamodel() -> Metamodel {
    let link_attrs = vec![
        AttributeDef { name: "left".into(), kind: PrimKind::String },
        AttributeDef { name: "right".into(), kind: PrimKind::String },
        AttributeDef { name: "targets".into(), kind: PrimKind::String },
    ];
    Metamodel {
        name: TRACE_MM_NAME.into(),
        types: vec![
            MetaType {
                name: MERGING_LINK_TYPE.into(),
                attributes: link_attrs.clone(),
                references: vec![],
            },
            MetaType {
                name: TRANSFORMATION_LINK_TYPE.into(),
                attributes: link_attrs,
                references: vec![],
            },
            MetaType {
                name: TRACE_RELATIONSHIP_TYPE.into(),
                attributes: vec![
                    AttributeDef { name: "parent".into(), kind: PrimKind::String },
                    AttributeDef { name: "child".into(), kind: PrimKind::String },
                    AttributeDef { name: "origin".into(), kind: PrimKind::String },
                ],
                references: vec![],
            },
        ],
    }
}

/// Metamodels available to a composition run, keyed by name. The trace
/// metamodel is always present under its reserved name.
#[derive(Debug, Clone)]
pub struct MetamodelRegistry {
    mms: Vec<Metamodel>,
}

impl Default for MetamodelRegistry {
    fn default() -> Self {
        Self::new()
    }
}

impl MetamodelRegistry {
    pub fn new() -> Self {
        MetamodelRegistry { mms: vec![trace_metamodel()] }
    }

    pub fn add(&mut self, mm: Metamodel) -> Result<(), ModelError> {
        if mm.name == TRACE_MM_NAME {
            return Err(ModelError::Validation(format!(
                "metamodel name '{TRACE_MM_NAME}' is reserved"
            )));
        }
        if self.get(&mm.name).is_some() {
            return Err(ModelError::Validation(format!(
                "metamodel '{}' registered twice",
                mm.name
            )));
        }
        self.mms.push(mm);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Option<&Metamodel> {
        self.mms.iter().find(|m| m.name == name)
    }
}
