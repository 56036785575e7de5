//! Rule scheduling and execution.
//!
//! A run has three phases. The match phase evaluates every match rule
//! over the cross product of its input types and records the resulting
//! correspondences. The planning phase turns correspondences into merge
//! activations (one per matched pair, via the unique applicable merge
//! rule) and enumerates transform activations (one per input tuple whose
//! guard holds), allocating every target element up front with a fresh
//! id. The init phase then runs rule bodies in activation order, so a
//! body can wire references to any target element regardless of which
//! rule produces it.
//!
//! `call` statements and `equivalent(..)` never create activations; they
//! relate existing ones. Both are recorded — explicit and implicit call
//! logs are what the trace model's nesting is built from.

mod eval;

use std::collections::{HashMap, HashSet};

use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::model::{
    conforms, Metamodel, MetamodelRegistry, Model, ModelElement, ModelRole, PrimValue,
    MERGING_LINK_TYPE, TRACE_MM_NAME, TRANSFORMATION_LINK_TYPE, TRACE_RELATIONSHIP_TYPE,
};
use crate::spec::{
    check_spec, AssignTarget, CompositionRule, CompositionSpec, Expr, RuleKind, Statement,
};

use eval::{ElemRef, EvalCtx, Value};

/// Which source model an element belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceSide {
    Left,
    Right,
}

/// One entry of the match trace: a pair of elements a match rule
/// accepted.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Correspondence {
    pub rule: String,
    pub left: String,
    pub right: String,
}

/// A target element created by an activation, addressed by target model
/// index and element id.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetRef {
    pub model: usize,
    pub id: String,
}

/// One scheduled firing of a merge or transform rule on a concrete
/// element tuple. `seq` numbers activations from 1 in scheduling order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Activation {
    pub seq: usize,
    pub rule: String,
    pub kind: RuleKind,
    pub left: Vec<String>,
    pub right: Vec<String>,
    pub targets: Vec<TargetRef>,
}

/// A recorded `call` statement: the calling activation invoked the
/// callee activation on the given source elements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ExplicitCall {
    pub caller: usize,
    pub callee: usize,
    pub left: Vec<String>,
    pub right: Vec<String>,
}

/// A recorded `equivalent(..)` resolution: the calling activation looked
/// up the targets produced for the given source elements. `targets`
/// lists everything the resolved activations produced, before the
/// assigned reference filtered by model and type.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ImplicitCall {
    pub caller: usize,
    pub resolved_left: Vec<String>,
    pub resolved_right: Vec<String>,
    pub targets: Vec<String>,
}

#[derive(Debug, Error)]
pub enum EngineError {
    /// The inputs don't fit the specification (metamodel mismatch,
    /// conformance violations, failed spec check).
    #[error("setup error: {0}")]
    Setup(String),
    /// More than one rule claims the same elements.
    #[error("ambiguity: {0}")]
    Ambiguity(String),
    /// A rule body or guard failed to evaluate.
    #[error("in rule '{rule}': {message}")]
    Eval { rule: String, message: String },
    /// `equivalent(..)` met a source element no rule produced a target
    /// for.
    #[error("in rule '{rule}': {message}")]
    Unresolved { rule: String, message: String },
    /// A `call` statement could not be carried out.
    #[error("in rule '{rule}': {message}")]
    Call { rule: String, message: String },
}

/// The outcome of a run: the target models plus the full execution
/// record the trace is built from.
#[derive(Debug, Clone)]
pub struct ExecutionResult {
    /// Target models in declaration order; the first is the composed
    /// model.
    pub targets: Vec<Model>,
    pub match_trace: Vec<Correspondence>,
    pub activations: Vec<Activation>,
    pub explicit_calls: Vec<ExplicitCall>,
    pub implicit_calls: Vec<ImplicitCall>,
}

impl ExecutionResult {
    pub fn composed(&self) -> &Model {
        &self.targets[0]
    }

    pub fn activation(&self, seq: usize) -> Option<&Activation> {
        self.activations.get(seq.checked_sub(1)?)
    }

    /// Activations that consumed the given source element, in scheduling
    /// order.
    pub fn producers<'a>(
        &'a self,
        side: SourceSide,
        id: &'a str,
    ) -> impl Iterator<Item = &'a Activation> {
        self.activations.iter().filter(move |a| match side {
            SourceSide::Left => a.left.iter().any(|x| x == id),
            SourceSide::Right => a.right.iter().any(|x| x == id),
        })
    }

    /// Target ids produced for a single source element, in scheduling
    /// order.
    pub fn resolve(&self, side: SourceSide, id: &str) -> Vec<String> {
        self.producers(side, id)
            .flat_map(|a| a.targets.iter().map(|t| t.id.clone()))
            .collect()
    }

    /// Target ids of activations whose source element sets equal the
    /// given sets exactly (order-insensitive).
    pub fn resolve_exact(&self, left: &[&str], right: &[&str]) -> Vec<String> {
        let norm = |ids: &[&str]| {
            let mut v: Vec<String> = ids.iter().map(|s| s.to_string()).collect();
            v.sort();
            v
        };
        let (l, r) = (norm(left), norm(right));
        self.activations
            .iter()
            .filter(|a| {
                let mut al = a.left.clone();
                let mut ar = a.right.clone();
                al.sort();
                ar.sort();
                al == l && ar == r
            })
            .flat_map(|a| a.targets.iter().map(|t| t.id.clone()))
            .collect()
    }

    /// The run record as JSON: the composed model (and second target, if
    /// any), the match trace, and the activation and call logs.
    pub fn log_json(&self) -> serde_json::Value {
        let activations: Vec<serde_json::Value> = self
            .activations
            .iter()
            .map(|a| {
                json!({
                    "seq": a.seq,
                    "rule": a.rule,
                    "kind": a.kind,
                    "left": a.left,
                    "right": a.right,
                    "targets": a.targets.iter().map(|t| t.id.clone()).collect::<Vec<_>>(),
                })
            })
            .collect();
        let mut log = json!({
            "composed": self.targets[0],
            "matchTrace": self.match_trace,
            "activations": activations,
            "explicitCalls": self.explicit_calls,
            "implicitCalls": self.implicit_calls,
        });
        if let Some(second) = self.targets.get(1) {
            log["secondTarget"] = json!(second);
        }
        log
    }
}

/// Compose `left` and `right` as directed by the specification. Target
/// element ids count up from `t1`.
pub fn execute(
    spec: &CompositionSpec,
    left: &Model,
    right: &Model,
    registry: &MetamodelRegistry,
) -> Result<ExecutionResult, EngineError> {
    execute_seeded(spec, left, right, registry, 1)
}

/// Like [`execute`], but generated ids count up from `t{first_id}`.
pub fn execute_seeded(
    spec: &CompositionSpec,
    left: &Model,
    right: &Model,
    registry: &MetamodelRegistry,
    first_id: u64,
) -> Result<ExecutionResult, EngineError> {
    let mut runner = Runner::new(spec, left, right, registry, first_id)?;
    runner.match_phase()?;
    runner.plan_merges()?;
    runner.plan_transforms()?;
    for i in 0..runner.activations.len() {
        runner.run_body(i)?;
    }
    Ok(ExecutionResult {
        targets: runner.targets,
        match_trace: runner.match_trace,
        activations: runner.activations,
        explicit_calls: runner.explicit_calls,
        implicit_calls: runner.implicit_calls,
    })
}

type Bindings = HashMap<String, ElemRef>;

struct Runner<'a> {
    spec: &'a CompositionSpec,
    left: &'a Model,
    right: &'a Model,
    left_mm: &'a Metamodel,
    right_mm: &'a Metamodel,
    target_mms: Vec<&'a Metamodel>,
    targets: Vec<Model>,
    match_trace: Vec<Correspondence>,
    left_matched: HashSet<String>,
    right_matched: HashSet<String>,
    pair_matched: HashSet<(String, String)>,
    activations: Vec<Activation>,
    /// (rule, left ids, right ids) -> activation seq; the lookup table
    /// both `call` and `equivalent` resolution rest on.
    planned: HashMap<(String, Vec<String>, Vec<String>), usize>,
    producers: HashMap<(SourceSide, String), Vec<usize>>,
    explicit_calls: Vec<ExplicitCall>,
    implicit_calls: Vec<ImplicitCall>,
    /// (parent element, child element, origin) triples already recorded,
    /// so repeated nesting does not duplicate relationship elements.
    nested: HashSet<(String, String, String)>,
    next_id: u64,
}

impl<'a> Runner<'a> {
    fn new(
        spec: &'a CompositionSpec,
        left: &'a Model,
        right: &'a Model,
        registry: &'a MetamodelRegistry,
        first_id: u64,
    ) -> Result<Self, EngineError> {
        let diags = check_spec(spec, registry);
        if !diags.is_empty() {
            let mut msg: Vec<String> = diags.iter().take(3).map(|d| d.to_string()).collect();
            if diags.len() > 3 {
                msg.push(format!("... and {} more", diags.len() - 3));
            }
            return Err(EngineError::Setup(format!(
                "specification '{}' does not check: {}",
                spec.name,
                msg.join("; ")
            )));
        }
        let left_mm = Self::source_mm(registry, &spec.left.metamodel, left, "left")?;
        let right_mm = Self::source_mm(registry, &spec.right.metamodel, right, "right")?;
        let mut target_mms = Vec::new();
        let mut targets = Vec::new();
        for decl in &spec.targets {
            let mm = registry
                .get(&decl.metamodel)
                .ok_or_else(|| EngineError::Setup(format!("unknown metamodel '{}'", decl.metamodel)))?;
            target_mms.push(mm);
            let role = if decl.metamodel == TRACE_MM_NAME {
                ModelRole::Trace
            } else {
                ModelRole::Composed
            };
            targets.push(Model::new(decl.alias.clone(), decl.metamodel.clone(), role));
        }
        Ok(Runner {
            spec,
            left,
            right,
            left_mm,
            right_mm,
            target_mms,
            targets,
            match_trace: Vec::new(),
            left_matched: HashSet::new(),
            right_matched: HashSet::new(),
            pair_matched: HashSet::new(),
            activations: Vec::new(),
            planned: HashMap::new(),
            producers: HashMap::new(),
            explicit_calls: Vec::new(),
            implicit_calls: Vec::new(),
            nested: HashSet::new(),
            next_id: first_id,
        })
    }

    fn source_mm(
        registry: &'a MetamodelRegistry,
        expected: &str,
        model: &Model,
        side: &str,
    ) -> Result<&'a Metamodel, EngineError> {
        if model.metamodel != expected {
            return Err(EngineError::Setup(format!(
                "the {side} model '{}' conforms to '{}' but the specification expects '{expected}'",
                model.id, model.metamodel
            )));
        }
        let mm = registry
            .get(expected)
            .ok_or_else(|| EngineError::Setup(format!("unknown metamodel '{expected}'")))?;
        let violations = conforms(model, mm);
        if !violations.is_empty() {
            let mut msg: Vec<String> =
                violations.iter().take(3).map(|v| v.to_string()).collect();
            if violations.len() > 3 {
                msg.push(format!("... and {} more", violations.len() - 3));
            }
            return Err(EngineError::Setup(format!(
                "the {side} model '{}' does not conform to '{expected}': {}",
                model.id,
                msg.join("; ")
            )));
        }
        Ok(mm)
    }

    fn fresh_id(&mut self) -> String {
        let id = format!("t{}", self.next_id);
        self.next_id += 1;
        id
    }

    fn eval_value(
        &self,
        bindings: &Bindings,
        rule: &str,
        expr: &Expr,
    ) -> Result<Value, EngineError> {
        self.ctx(bindings, rule).eval(expr)
    }

    fn eval_bool(
        &self,
        bindings: &Bindings,
        rule: &str,
        expr: &Expr,
    ) -> Result<bool, EngineError> {
        let ctx = self.ctx(bindings, rule);
        let v = ctx.eval(expr)?;
        ctx.truthy(v)
    }

    fn ctx<'b>(&'b self, bindings: &'b Bindings, rule: &'b str) -> EvalCtx<'b> {
        EvalCtx {
            left: self.left,
            right: self.right,
            left_mm: self.left_mm,
            right_mm: self.right_mm,
            targets: &self.targets,
            target_mms: &self.target_mms,
            left_matched: &self.left_matched,
            right_matched: &self.right_matched,
            bindings,
            rule,
        }
    }

    fn match_phase(&mut self) -> Result<(), EngineError> {
        for rule in self.spec.rules.iter().filter(|r| r.kind == RuleKind::Match) {
            let lp = &rule.in_left[0];
            let rp = &rule.in_right[0];
            let compare = rule.guard.as_ref().expect("match rule has a compare expression");
            let lefts: Vec<&str> =
                self.left.elements_of_type(&lp.type_name).map(|e| e.id.as_str()).collect();
            let rights: Vec<&str> =
                self.right.elements_of_type(&rp.type_name).map(|e| e.id.as_str()).collect();
            for le in &lefts {
                for re in &rights {
                    let mut bindings = Bindings::new();
                    bindings
                        .insert(lp.name.clone(), ElemRef::Source(SourceSide::Left, le.to_string()));
                    bindings
                        .insert(rp.name.clone(), ElemRef::Source(SourceSide::Right, re.to_string()));
                    if self.eval_bool(&bindings, &rule.name, compare)? {
                        self.match_trace.push(Correspondence {
                            rule: rule.name.clone(),
                            left: le.to_string(),
                            right: re.to_string(),
                        });
                        self.left_matched.insert(le.to_string());
                        self.right_matched.insert(re.to_string());
                        self.pair_matched.insert((le.to_string(), re.to_string()));
                    }
                }
            }
        }
        Ok(())
    }

    /// One merge activation per matched pair, through the single merge
    /// rule whose input types fit. Two fitting rules are an error; none
    /// means the pair stays unmerged.
    fn plan_merges(&mut self) -> Result<(), EngineError> {
        let mut planned_pairs: HashSet<(String, String)> = HashSet::new();
        for i in 0..self.match_trace.len() {
            let (lid, rid) = {
                let c = &self.match_trace[i];
                (c.left.clone(), c.right.clone())
            };
            if !planned_pairs.insert((lid.clone(), rid.clone())) {
                continue;
            }
            let lty = &self.left.element(&lid).expect("matched element exists").type_name;
            let rty = &self.right.element(&rid).expect("matched element exists").type_name;
            let applicable: Vec<&CompositionRule> = self
                .spec
                .rules
                .iter()
                .filter(|r| {
                    r.kind == RuleKind::Merge
                        && r.in_left[0].type_name == *lty
                        && r.in_right[0].type_name == *rty
                })
                .collect();
            match applicable[..] {
                [] => {}
                [rule] => {
                    self.add_activation(rule, vec![lid], vec![rid]);
                }
                [a, b, ..] => {
                    return Err(EngineError::Ambiguity(format!(
                        "merge rules '{}' and '{}' both apply to the matched pair ('{lid}', '{rid}')",
                        a.name, b.name
                    )))
                }
            }
        }
        Ok(())
    }

    /// One transform activation per input tuple whose guard holds,
    /// enumerating tuples in document order (leftmost parameter
    /// outermost). Two transform rules claiming the same tuple are an
    /// error.
    fn plan_transforms(&mut self) -> Result<(), EngineError> {
        let mut claimed: HashMap<(Vec<String>, Vec<String>), String> = HashMap::new();
        let rules: Vec<&CompositionRule> =
            self.spec.rules.iter().filter(|r| r.kind == RuleKind::Transform).collect();
        for rule in rules {
            let mut pools: Vec<Vec<String>> = Vec::new();
            for p in &rule.in_left {
                pools.push(
                    self.left.elements_of_type(&p.type_name).map(|e| e.id.clone()).collect(),
                );
            }
            for p in &rule.in_right {
                pools.push(
                    self.right.elements_of_type(&p.type_name).map(|e| e.id.clone()).collect(),
                );
            }
            for combo in Combos::new(&pools) {
                let (lids, rids) = combo.split_at(rule.in_left.len());
                let (lids, rids) = (lids.to_vec(), rids.to_vec());
                if let Some(guard) = &rule.guard {
                    let bindings = Self::input_bindings(rule, &lids, &rids);
                    if !self.eval_bool(&bindings, &rule.name, guard)? {
                        continue;
                    }
                }
                let key = (lids.clone(), rids.clone());
                if let Some(other) = claimed.get(&key) {
                    return Err(EngineError::Ambiguity(format!(
                        "transform rules '{other}' and '{}' both apply to ({})",
                        rule.name,
                        lids.iter().chain(rids.iter()).cloned().collect::<Vec<_>>().join(", ")
                    )));
                }
                claimed.insert(key, rule.name.clone());
                self.add_activation(rule, lids, rids);
            }
        }
        Ok(())
    }

    fn input_bindings(rule: &CompositionRule, lids: &[String], rids: &[String]) -> Bindings {
        let mut bindings = Bindings::new();
        for (p, id) in rule.in_left.iter().zip(lids) {
            bindings.insert(p.name.clone(), ElemRef::Source(SourceSide::Left, id.clone()));
        }
        for (p, id) in rule.in_right.iter().zip(rids) {
            bindings.insert(p.name.clone(), ElemRef::Source(SourceSide::Right, id.clone()));
        }
        bindings
    }

    fn target_index(&self, alias: &str) -> usize {
        self.spec
            .targets
            .iter()
            .position(|d| d.alias == alias)
            .expect("checked spec binds outputs to declared targets")
    }

    fn add_activation(
        &mut self,
        rule: &CompositionRule,
        left: Vec<String>,
        right: Vec<String>,
    ) -> usize {
        let seq = self.activations.len() + 1;
        let mut targets = Vec::new();
        for p in &rule.out {
            let idx = self.target_index(&p.alias);
            let id = self.fresh_id();
            self.targets[idx].elements.push(ModelElement::new(id.clone(), p.type_name.clone()));
            targets.push(TargetRef { model: idx, id });
        }
        for id in &left {
            self.producers.entry((SourceSide::Left, id.clone())).or_default().push(seq);
        }
        for id in &right {
            self.producers.entry((SourceSide::Right, id.clone())).or_default().push(seq);
        }
        self.planned.insert((rule.name.clone(), left.clone(), right.clone()), seq);
        self.activations.push(Activation {
            seq,
            rule: rule.name.clone(),
            kind: rule.kind,
            left,
            right,
            targets,
        });
        seq
    }

    fn run_body(&mut self, index: usize) -> Result<(), EngineError> {
        let act = self.activations[index].clone();
        let rule = self.spec.rule(&act.rule).expect("activation refers to a spec rule");
        let mut bindings = Self::input_bindings(rule, &act.left, &act.right);
        for (p, t) in rule.out.iter().zip(&act.targets) {
            bindings.insert(p.name.clone(), ElemRef::Target(t.model, t.id.clone()));
        }
        for stmt in &rule.body {
            self.run_statement(&act, rule, &bindings, stmt)?;
        }
        Ok(())
    }

    fn run_statement(
        &mut self,
        act: &Activation,
        rule: &'a CompositionRule,
        bindings: &Bindings,
        stmt: &'a Statement,
    ) -> Result<(), EngineError> {
        match stmt {
            Statement::SetAttr { target, value, .. } => {
                let v = self.eval_value(bindings, &rule.name, value)?;
                let prim = match v {
                    Value::Prim(p) => p,
                    Value::Absent => {
                        return Err(EngineError::Eval {
                            rule: rule.name.clone(),
                            message: format!(
                                "the value assigned to '{}.{}' is unset",
                                target.param, target.member
                            ),
                        })
                    }
                    Value::Elements(_) => {
                        return Err(EngineError::Eval {
                            rule: rule.name.clone(),
                            message: format!(
                                "model elements cannot be assigned to attribute '{}.{}'",
                                target.param, target.member
                            ),
                        })
                    }
                };
                let (idx, id) = self.target_binding(bindings, rule, &target.param)?;
                self.targets[idx]
                    .element_mut(&id)
                    .expect("allocated target element")
                    .attrs
                    .insert(target.member.clone(), prim);
                Ok(())
            }
            Statement::SetResolve { target, source, nest, .. } => {
                self.run_resolve(act, rule, bindings, target, source, nest.as_deref())
            }
            Statement::Call { callee, args, assign, nest, .. } => {
                self.run_call(act, rule, bindings, callee, args, assign.as_ref(), nest.as_deref())
            }
        }
    }

    fn target_binding(
        &self,
        bindings: &Bindings,
        rule: &CompositionRule,
        param: &str,
    ) -> Result<(usize, String), EngineError> {
        match bindings.get(param) {
            Some(ElemRef::Target(idx, id)) => Ok((*idx, id.clone())),
            _ => Err(EngineError::Eval {
                rule: rule.name.clone(),
                message: format!("'{param}' is not an output parameter"),
            }),
        }
    }

    /// Append target element ids to a reference, skipping ids already
    /// present and enforcing multiplicity.
    fn append_ref(
        &mut self,
        rule: &CompositionRule,
        idx: usize,
        el_id: &str,
        member: &str,
        ids: Vec<String>,
    ) -> Result<(), EngineError> {
        if ids.is_empty() {
            return Ok(());
        }
        let el_ty = self.targets[idx]
            .element(el_id)
            .expect("allocated target element")
            .type_name
            .clone();
        let many = self.target_mms[idx]
            .get_type(&el_ty)
            .and_then(|t| t.reference(member))
            .map(|r| r.many)
            .unwrap_or(true);
        let el = self.targets[idx].element_mut(el_id).expect("allocated target element");
        let slot = el.refs.entry(member.to_string()).or_default();
        for id in ids {
            if !slot.contains(&id) {
                slot.push(id);
            }
        }
        if !many && slot.len() > 1 {
            return Err(EngineError::Eval {
                rule: rule.name.clone(),
                message: format!(
                    "reference '{el_id}.{member}' holds at most one element but {} were wired",
                    slot.len()
                ),
            });
        }
        Ok(())
    }

    fn run_resolve(
        &mut self,
        act: &Activation,
        rule: &CompositionRule,
        bindings: &Bindings,
        target: &AssignTarget,
        source: &Expr,
        nest: Option<&str>,
    ) -> Result<(), EngineError> {
        let v = self.eval_value(bindings, &rule.name, source)?;
        let sources: Vec<(SourceSide, String)> = match v {
            Value::Absent => return Ok(()),
            Value::Elements(list) => list
                .into_iter()
                .map(|r| match r {
                    ElemRef::Source(side, id) => Ok((side, id)),
                    ElemRef::Target(..) => Err(EngineError::Eval {
                        rule: rule.name.clone(),
                        message: "equivalent(..) resolves source model elements".into(),
                    }),
                })
                .collect::<Result<_, _>>()?,
            Value::Prim(_) => {
                return Err(EngineError::Eval {
                    rule: rule.name.clone(),
                    message: "equivalent(..) takes model elements".into(),
                })
            }
        };
        // Per source element in collection order, gather the activations
        // that consumed it, in scheduling order.
        let mut resolved_seqs: Vec<usize> = Vec::new();
        for (side, id) in &sources {
            let seqs = self
                .producers
                .get(&(*side, id.clone()))
                .filter(|v| !v.is_empty())
                .ok_or_else(|| EngineError::Unresolved {
                    rule: rule.name.clone(),
                    message: format!("no rule produced a target for element '{id}'"),
                })?;
            for seq in seqs {
                if !resolved_seqs.contains(seq) {
                    resolved_seqs.push(*seq);
                }
            }
        }
        let (idx, el_id) = self.target_binding(bindings, rule, &target.param)?;
        let ref_target = self.reference_target(rule, idx, &el_id, &target.member)?;
        let mut wired: Vec<String> = Vec::new();
        let mut all_targets: Vec<String> = Vec::new();
        for seq in &resolved_seqs {
            for t in &self.activations[seq - 1].targets {
                if !all_targets.contains(&t.id) {
                    all_targets.push(t.id.clone());
                }
                let fits = t.model == idx
                    && self.targets[t.model]
                        .element(&t.id)
                        .map(|e| e.type_name == ref_target)
                        .unwrap_or(false);
                if fits && !wired.contains(&t.id) {
                    wired.push(t.id.clone());
                }
            }
        }
        self.append_ref(rule, idx, &el_id, &target.member, wired)?;
        let mut resolved_left: Vec<String> = Vec::new();
        let mut resolved_right: Vec<String> = Vec::new();
        for (side, id) in &sources {
            let bucket = match side {
                SourceSide::Left => &mut resolved_left,
                SourceSide::Right => &mut resolved_right,
            };
            if !bucket.contains(id) {
                bucket.push(id.clone());
            }
        }
        self.implicit_calls.push(ImplicitCall {
            caller: act.seq,
            resolved_left,
            resolved_right,
            targets: all_targets,
        });
        if let Some(link_param) = nest {
            self.nest_under(act, rule, bindings, link_param, &resolved_seqs, "implicit")?;
        }
        Ok(())
    }

    fn reference_target(
        &self,
        rule: &CompositionRule,
        idx: usize,
        el_id: &str,
        member: &str,
    ) -> Result<String, EngineError> {
        let el_ty = &self.targets[idx].element(el_id).expect("allocated target element").type_name;
        self.target_mms[idx]
            .get_type(el_ty)
            .and_then(|t| t.reference(member))
            .map(|r| r.target.clone())
            .ok_or_else(|| EngineError::Eval {
                rule: rule.name.clone(),
                message: format!("type '{el_ty}' has no reference '{member}'"),
            })
    }

    fn run_call(
        &mut self,
        act: &Activation,
        rule: &'a CompositionRule,
        bindings: &Bindings,
        callee: &str,
        args: &'a [Expr],
        assign: Option<&AssignTarget>,
        nest: Option<&str>,
    ) -> Result<(), EngineError> {
        let callee_rule = self.spec.rule(callee).ok_or_else(|| EngineError::Call {
            rule: rule.name.clone(),
            message: format!("call to unknown rule '{callee}'"),
        })?;
        if callee_rule.kind == RuleKind::Match {
            return Err(EngineError::Call {
                rule: rule.name.clone(),
                message: format!("'{callee}' is a match rule and cannot be called"),
            });
        }
        let params: Vec<_> = callee_rule.inputs().collect();
        if args.len() != params.len() {
            return Err(EngineError::Call {
                rule: rule.name.clone(),
                message: format!(
                    "rule '{callee}' takes {} argument(s) but {} were supplied",
                    params.len(),
                    args.len()
                ),
            });
        }
        // Evaluate argument pools and check each element against the
        // callee's parameter side and type.
        let mut pools: Vec<Vec<(SourceSide, String)>> = Vec::new();
        for (arg, param) in args.iter().zip(&params) {
            let expected_side = if callee_rule.in_left.iter().any(|p| p.name == param.name) {
                SourceSide::Left
            } else {
                SourceSide::Right
            };
            let pool: Vec<(SourceSide, String)> = match self
                .eval_value(bindings, &rule.name, arg)?
            {
                Value::Absent => Vec::new(),
                Value::Elements(list) => list
                    .into_iter()
                    .map(|r| match r {
                        ElemRef::Source(side, id) => Ok((side, id)),
                        ElemRef::Target(..) => Err(EngineError::Call {
                            rule: rule.name.clone(),
                            message: format!(
                                "arguments of '{callee}' must be source model elements"
                            ),
                        }),
                    })
                    .collect::<Result<_, _>>()?,
                Value::Prim(_) => {
                    return Err(EngineError::Call {
                        rule: rule.name.clone(),
                        message: format!("arguments of '{callee}' must be model elements"),
                    })
                }
            };
            for (side, id) in &pool {
                if *side != expected_side {
                    return Err(EngineError::Call {
                        rule: rule.name.clone(),
                        message: format!(
                            "argument for '{}' of rule '{callee}' is from the wrong source model",
                            param.name
                        ),
                    });
                }
                let model = match side {
                    SourceSide::Left => self.left,
                    SourceSide::Right => self.right,
                };
                let ty = &model.element(id).expect("evaluated element exists").type_name;
                if *ty != param.type_name {
                    return Err(EngineError::Call {
                        rule: rule.name.clone(),
                        message: format!(
                            "argument for '{}' of rule '{callee}' must be a '{}' but '{id}' is a '{ty}'",
                            param.name, param.type_name
                        ),
                    });
                }
            }
            pools.push(pool);
        }
        let id_pools: Vec<Vec<String>> =
            pools.iter().map(|p| p.iter().map(|(_, id)| id.clone()).collect()).collect();
        let split = callee_rule.in_left.len();
        for combo in Combos::new(&id_pools) {
            let (lids, rids) = combo.split_at(split);
            let (lids, rids) = (lids.to_vec(), rids.to_vec());
            let applicable = match callee_rule.kind {
                RuleKind::Merge => {
                    self.pair_matched.contains(&(lids[0].clone(), rids[0].clone()))
                }
                RuleKind::Transform => match &callee_rule.guard {
                    Some(guard) => {
                        let callee_bindings = Self::input_bindings(callee_rule, &lids, &rids);
                        self.eval_bool(&callee_bindings, &callee_rule.name, guard)?
                    }
                    None => true,
                },
                RuleKind::Match => unreachable!("rejected above"),
            };
            if !applicable {
                continue;
            }
            let seq = *self
                .planned
                .get(&(callee_rule.name.clone(), lids.clone(), rids.clone()))
                .expect("every applicable tuple was planned");
            self.explicit_calls.push(ExplicitCall {
                caller: act.seq,
                callee: seq,
                left: lids,
                right: rids,
            });
            if let Some(target) = assign {
                let (idx, el_id) = self.target_binding(bindings, rule, &target.param)?;
                let ref_target = self.reference_target(rule, idx, &el_id, &target.member)?;
                let wired: Vec<String> = self.activations[seq - 1]
                    .targets
                    .iter()
                    .filter(|t| {
                        t.model == idx
                            && self.targets[t.model]
                                .element(&t.id)
                                .map(|e| e.type_name == ref_target)
                                .unwrap_or(false)
                    })
                    .map(|t| t.id.clone())
                    .collect();
                self.append_ref(rule, idx, &el_id, &target.member, wired)?;
            }
            if let Some(link_param) = nest {
                self.nest_under(act, rule, bindings, link_param, &[seq], "explicit")?;
            }
        }
        Ok(())
    }

    /// Record parent/child relationships between the caller's link
    /// element and the link element of each given activation, as
    /// elements of the trace target model.
    fn nest_under(
        &mut self,
        _act: &Activation,
        rule: &CompositionRule,
        bindings: &Bindings,
        link_param: &str,
        child_seqs: &[usize],
        origin: &str,
    ) -> Result<(), EngineError> {
        let (parent_idx, parent_id) = self.target_binding(bindings, rule, link_param)?;
        for seq in child_seqs {
            let child_act = &self.activations[seq - 1];
            let child_link = child_act.targets.iter().find(|t| {
                self.targets[t.model]
                    .element(&t.id)
                    .map(|e| {
                        e.type_name == MERGING_LINK_TYPE || e.type_name == TRANSFORMATION_LINK_TYPE
                    })
                    .unwrap_or(false)
            });
            let Some(child_link) = child_link else {
                return Err(EngineError::Eval {
                    rule: rule.name.clone(),
                    message: format!(
                        "cannot nest under '{link_param}': rule '{}' produces no trace link",
                        child_act.rule
                    ),
                });
            };
            let child_id = child_link.id.clone();
            let key = (parent_id.clone(), child_id.clone(), origin.to_string());
            if !self.nested.insert(key) {
                continue;
            }
            let rel_id = self.fresh_id();
            let mut el = ModelElement::new(rel_id, TRACE_RELATIONSHIP_TYPE);
            el.attrs.insert("parent".into(), PrimValue::String(parent_id.clone()));
            el.attrs.insert("child".into(), PrimValue::String(child_id));
            el.attrs.insert("origin".into(), PrimValue::String(origin.to_string()));
            self.targets[parent_idx].elements.push(el);
        }
        Ok(())
    }
}

/// Cartesian product over id pools, leftmost pool outermost. An empty
/// pool yields no combinations.
struct Combos<'p, T> {
    pools: &'p [Vec<T>],
    indices: Vec<usize>,
    done: bool,
}

impl<'p, T: Clone> Combos<'p, T> {
    fn new(pools: &'p [Vec<T>]) -> Self {
        let done = pools.iter().any(|p| p.is_empty());
        Combos { pools, indices: vec![0; pools.len()], done }
    }
}

impl<T: Clone> Iterator for Combos<'_, T> {
    type Item = Vec<T>;

    fn next(&mut self) -> Option<Vec<T>> {
        if self.done {
            return None;
        }
        let combo: Vec<T> = self
            .pools
            .iter()
            .zip(&self.indices)
            .map(|(pool, &i)| pool[i].clone())
            .collect();
        // Advance the rightmost position; carry leftward on overflow.
        self.done = true;
        for i in (0..self.indices.len()).rev() {
            self.indices[i] += 1;
            if self.indices[i] < self.pools[i].len() {
                self.done = false;
                break;
            }
            self.indices[i] = 0;
        }
        if self.indices.is_empty() {
            // A zero-pool product has exactly one (empty) combination.
            self.done = true;
        }
        Some(combo)
    }
}
