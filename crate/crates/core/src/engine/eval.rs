//! Expression evaluation over bound model elements.

use std::collections::{HashMap, HashSet};

use crate::model::{Metamodel, Model, ModelElement, PrimValue};
use crate::spec::{Expr, ExprKind};

use super::{EngineError, SourceSide};

/// A reference to an element of one of the models in play: a source
/// element by side and id, or a target element by model index and id.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub(crate) enum ElemRef {
    Source(SourceSide, String),
    Target(usize, String),
}

/// An evaluated value. `Absent` stands for both an unset attribute and
/// an empty element collection: it compares unequal to everything,
/// quantifies to false, contributes nothing to id(..) or wiring, and is
/// an error as a condition or an assigned value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Value {
    Prim(PrimValue),
    /// Always non-empty; empty collections normalize to `Absent`.
    Elements(Vec<ElemRef>),
    Absent,
}

pub(crate) fn elements(list: Vec<ElemRef>) -> Value {
    if list.is_empty() {
        Value::Absent
    } else {
        Value::Elements(list)
    }
}

/// Everything an expression can observe: the two source models, the
/// target models as built so far, the match results, and the parameter
/// bindings of the enclosing rule activation.
pub(crate) struct EvalCtx<'a> {
    pub left: &'a Model,
    pub right: &'a Model,
    pub left_mm: &'a Metamodel,
    pub right_mm: &'a Metamodel,
    pub targets: &'a [Model],
    pub target_mms: &'a [&'a Metamodel],
    pub left_matched: &'a HashSet<String>,
    pub right_matched: &'a HashSet<String>,
    pub bindings: &'a HashMap<String, ElemRef>,
    pub rule: &'a str,
}

impl<'a> EvalCtx<'a> {
    fn err(&self, message: impl Into<String>) -> EngineError {
        EngineError::Eval { rule: self.rule.to_owned(), message: message.into() }
    }

    fn model_of(&self, r: &ElemRef) -> (&'a Model, &'a Metamodel) {
        match r {
            ElemRef::Source(SourceSide::Left, _) => (self.left, self.left_mm),
            ElemRef::Source(SourceSide::Right, _) => (self.right, self.right_mm),
            ElemRef::Target(idx, _) => (&self.targets[*idx], self.target_mms[*idx]),
        }
    }

    fn element(&self, r: &ElemRef) -> Result<&'a ModelElement, EngineError> {
        let (model, _) = self.model_of(r);
        let id = match r {
            ElemRef::Source(_, id) | ElemRef::Target(_, id) => id,
        };
        model
            .element(id)
            .ok_or_else(|| self.err(format!("element '{id}' vanished from model '{}'", model.id)))
    }

    pub fn eval(&self, expr: &Expr) -> Result<Value, EngineError> {
        let mut locals = Vec::new();
        self.eval_inner(expr, &mut locals)
    }

    /// Interpret a value in condition position.
    pub fn truthy(&self, v: Value) -> Result<bool, EngineError> {
        match v {
            Value::Prim(PrimValue::Boolean(b)) => Ok(b),
            Value::Prim(p) => {
                Err(self.err(format!("condition evaluated to '{p}', not a boolean")))
            }
            Value::Absent => Err(self.err("condition reads an unset attribute")),
            Value::Elements(_) => Err(self.err("condition evaluated to model elements")),
        }
    }

    fn lookup(&self, name: &str, locals: &[(String, ElemRef)]) -> Result<ElemRef, EngineError> {
        if let Some((_, r)) = locals.iter().rev().find(|(n, _)| n == name) {
            return Ok(r.clone());
        }
        self.bindings
            .get(name)
            .cloned()
            .ok_or_else(|| self.err(format!("parameter '{name}' is not bound")))
    }

    fn eval_inner(
        &self,
        expr: &Expr,
        locals: &mut Vec<(String, ElemRef)>,
    ) -> Result<Value, EngineError> {
        match &expr.kind {
            ExprKind::Literal(v) => Ok(Value::Prim(v.clone())),
            ExprKind::ParamRef(name) => {
                Ok(Value::Elements(vec![self.lookup(name, locals)?]))
            }
            ExprKind::Access { base, member } => {
                let base_val = self.eval_inner(base, locals)?;
                self.access(base_val, member)
            }
            ExprKind::Eq(lhs, rhs) => {
                let l = self.eval_inner(lhs, locals)?;
                let r = self.eval_inner(rhs, locals)?;
                match (l, r) {
                    (Value::Absent, _) | (_, Value::Absent) => {
                        Ok(Value::Prim(PrimValue::Boolean(false)))
                    }
                    (Value::Prim(a), Value::Prim(b)) => {
                        if a.kind() != b.kind() {
                            return Err(self.err(format!(
                                "cannot compare a {} with a {}",
                                a.kind(),
                                b.kind()
                            )));
                        }
                        Ok(Value::Prim(PrimValue::Boolean(a == b)))
                    }
                    _ => Err(self.err("model elements cannot be compared with '='")),
                }
            }
            ExprKind::And(lhs, rhs) => {
                let l = self.eval_inner(lhs, locals)?;
                if !self.truthy(l)? {
                    return Ok(Value::Prim(PrimValue::Boolean(false)));
                }
                let r = self.eval_inner(rhs, locals)?;
                Ok(Value::Prim(PrimValue::Boolean(self.truthy(r)?)))
            }
            ExprKind::Or(lhs, rhs) => {
                let l = self.eval_inner(lhs, locals)?;
                if self.truthy(l)? {
                    return Ok(Value::Prim(PrimValue::Boolean(true)));
                }
                let r = self.eval_inner(rhs, locals)?;
                Ok(Value::Prim(PrimValue::Boolean(self.truthy(r)?)))
            }
            ExprKind::Not(inner) => {
                let v = self.eval_inner(inner, locals)?;
                Ok(Value::Prim(PrimValue::Boolean(!self.truthy(v)?)))
            }
            ExprKind::Exists { base, var, pred } => {
                let base_val = self.eval_inner(base, locals)?;
                let list = match base_val {
                    Value::Elements(list) => list,
                    Value::Absent => return Ok(Value::Prim(PrimValue::Boolean(false))),
                    Value::Prim(_) => {
                        return Err(self.err("exists(..) iterates elements, not attribute values"))
                    }
                };
                for r in list {
                    locals.push((var.clone(), r));
                    let p = self.eval_inner(pred, locals)?;
                    let holds = self.truthy(p)?;
                    locals.pop();
                    if holds {
                        return Ok(Value::Prim(PrimValue::Boolean(true)));
                    }
                }
                Ok(Value::Prim(PrimValue::Boolean(false)))
            }
            ExprKind::HasMatch(name) => match self.lookup(name, locals)? {
                ElemRef::Source(SourceSide::Left, id) => {
                    Ok(Value::Prim(PrimValue::Boolean(self.left_matched.contains(&id))))
                }
                ElemRef::Source(SourceSide::Right, id) => {
                    Ok(Value::Prim(PrimValue::Boolean(self.right_matched.contains(&id))))
                }
                ElemRef::Target(..) => {
                    Err(self.err("has_match applies to source elements only"))
                }
            },
            ExprKind::IdOf(args) => {
                let mut ids = Vec::new();
                for arg in args {
                    match self.eval_inner(arg, locals)? {
                        Value::Elements(list) => {
                            for r in &list {
                                match r {
                                    ElemRef::Source(_, id) | ElemRef::Target(_, id) => {
                                        ids.push(id.clone())
                                    }
                                }
                            }
                        }
                        Value::Absent => {}
                        Value::Prim(_) => {
                            return Err(self.err("id(..) takes model elements"))
                        }
                    }
                }
                Ok(Value::Prim(PrimValue::String(ids.join(" "))))
            }
        }
    }

    /// Navigate `member` from a base value. Attribute reads require a
    /// single element; reference reads concatenate over all base
    /// elements in order.
    fn access(&self, base: Value, member: &str) -> Result<Value, EngineError> {
        let list = match base {
            Value::Elements(list) => list,
            Value::Absent => return Ok(Value::Absent),
            Value::Prim(p) => {
                return Err(self.err(format!("cannot navigate '.{member}' on the value '{p}'")))
            }
        };
        let (_, mm) = self.model_of(&list[0]);
        let first = self.element(&list[0])?;
        let meta = mm.get_type(&first.type_name).ok_or_else(|| {
            self.err(format!("element '{}' has unknown type '{}'", first.id, first.type_name))
        })?;
        if meta.attribute(member).is_some() {
            if list.len() > 1 {
                return Err(self.err(format!(
                    "attribute '{member}' read on {} elements at once",
                    list.len()
                )));
            }
            return Ok(match first.attrs.get(member) {
                Some(v) => Value::Prim(v.clone()),
                None => Value::Absent,
            });
        }
        if meta.reference(member).is_some() {
            let mut out = Vec::new();
            for r in &list {
                let el = self.element(r)?;
                if let Some(ids) = el.refs.get(member) {
                    for id in ids {
                        out.push(match r {
                            ElemRef::Source(side, _) => ElemRef::Source(*side, id.clone()),
                            ElemRef::Target(idx, _) => ElemRef::Target(*idx, id.clone()),
                        });
                    }
                }
            }
            return Ok(elements(out));
        }
        Err(self.err(format!(
            "type '{}' has no attribute or reference '{member}'",
            meta.name
        )))
    }
}
