//! Shared fixtures for unit tests: a small domain-model composition
//! setup used across the engine, trace, and weaver tests.
//!
//! The setup merges a system model (a library with Author, Publisher,
//! Book, and Chapter entities) with a vocabulary model (terms for
//! Author, Publisher, and Book; the Author term also carries a "Writer"
//! alias). Three entities match terms and merge; Chapter matches
//! nothing and is transformed as-is.

use crate::model::{
    AttributeDef, Metamodel, MetamodelRegistry, MetaType, Model, ModelElement, ModelRole,
    PrimKind, PrimValue, ReferenceDef,
};
use crate::spec::{check_spec, parse_spec, CompositionSpec};

pub fn entities_mm() -> Metamodel {
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

pub fn vocabulary_mm() -> Metamodel {
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

pub fn registry() -> MetamodelRegistry {
    let mut r = MetamodelRegistry::new();
    r.add(entities_mm()).unwrap();
    r.add(vocabulary_mm()).unwrap();
    r
}

fn named(id: &str, ty: &str, name: &str) -> ModelElement {
    let mut el = ModelElement::new(id, ty);
    el.attrs.insert("name".into(), PrimValue::String(name.into()));
    el
}

pub fn left_model() -> Model {
    let mut m = Model::new("library-system", "entities", ModelRole::Left);
    let mut sys = named("sys1", "System", "Library");
    sys.refs.insert(
        "entity".into(),
        vec!["ent-author".into(), "ent-publisher".into(), "ent-book".into(), "ent-chapter".into()],
    );
    m.elements.push(sys);
    m.elements.push(named("ent-author", "Entity", "Author"));
    m.elements.push(named("ent-publisher", "Entity", "Publisher"));
    m.elements.push(named("ent-book", "Entity", "Book"));
    m.elements.push(named("ent-chapter", "Entity", "Chapter"));
    m
}

pub fn right_model() -> Model {
    let mut m = Model::new("publishing-vocabulary", "vocabulary", ModelRole::Right);
    let mut voc = named("voc1", "Vocabulary", "Publishing");
    voc.refs.insert(
        "term".into(),
        vec!["term-author".into(), "term-publisher".into(), "term-book".into()],
    );
    m.elements.push(voc);
    let mut author = named("term-author", "Term", "Author");
    author.refs.insert("alias".into(), vec!["alias-writer".into()]);
    m.elements.push(author);
    m.elements.push(named("alias-writer", "Alias", "Writer"));
    m.elements.push(named("term-publisher", "Term", "Publisher"));
    m.elements.push(named("term-book", "Term", "Book"));
    m
}

/// The composition wiring the composed system through `equivalent(..)`.
pub const SPEC_TEXT: &str = "\
composition ComposeDomainModel

left Source : entities
right Vocabulary : vocabulary
target Target : entities

rule MatchSystemWithVocabulary match s : Source!System with v : Vocabulary!Vocabulary compare {
  true
}

rule MatchEntityWithTerm match s : Source!Entity with t : Vocabulary!Term compare {
  s.name = t.name or t.alias.exists(a | a.name = s.name)
}

rule MergeSystemWithVocabulary merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {
  t.name = s.name;
  t.entity = equivalent(s.entity);
}

rule MergeEntityWithTerm merge s : Source!Entity with t : Vocabulary!Term into m : Target!Entity {
  m.name = t.name;
  m.inDomain = true;
}

rule TransformEntity transform s : Source!Entity to t : Target!Entity when {
  not has_match(s)
} {
  t.name = s.name;
  t.inDomain = false;
}
";

/// Same composition, but wiring the composed system through explicit
/// calls instead of `equivalent(..)`.
pub const SPEC_TEXT_CALLS: &str = "\
composition ComposeDomainModelWithCalls

left Source : entities
right Vocabulary : vocabulary
target Target : entities

rule MatchSystemWithVocabulary match s : Source!System with v : Vocabulary!Vocabulary compare {
  true
}

rule MatchEntityWithTerm match s : Source!Entity with t : Vocabulary!Term compare {
  s.name = t.name or t.alias.exists(a | a.name = s.name)
}

rule MergeSystemWithVocabulary merge s : Source!System with v : Vocabulary!Vocabulary into t : Target!System {
  t.name = s.name;
  t.entity = call MergeEntityWithTerm(s.entity, v.term);
  t.entity = call TransformEntity(s.entity);
}

rule MergeEntityWithTerm merge s : Source!Entity with t : Vocabulary!Term into m : Target!Entity {
  m.name = t.name;
  m.inDomain = true;
}

rule TransformEntity transform s : Source!Entity to t : Target!Entity when {
  not has_match(s)
} {
  t.name = s.name;
  t.inDomain = false;
}
";

/// Parse and check a specification against the fixture registry,
/// panicking on any finding.
pub fn checked_spec(text: &str) -> CompositionSpec {
    let spec = parse_spec(text).unwrap_or_else(|d| panic!("fixture spec does not parse: {d:?}"));
    let diags = check_spec(&spec, &registry());
    assert!(diags.is_empty(), "fixture spec does not check: {diags:#?}");
    spec
}

pub fn scenario_spec() -> CompositionSpec {
    checked_spec(SPEC_TEXT)
}
