//! Graphviz rendering of a trace: links as boxes, elements as plain
//! nodes, nesting as solid edges, and link endpoints as dashed edges
//! colored by side.

use crate::model::Model;

use super::{TraceLink, TraceModel};

fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('\\', "\\\\").replace('"', "\\\""))
}

/// `Type:name` if the element has a name attribute, `Type:id` otherwise.
fn element_label(models: &[&Model], id: &str) -> String {
    for model in models {
        if let Some(el) = model.element(id) {
            let shown = el
                .attrs
                .get("name")
                .map(|v| v.to_string())
                .unwrap_or_else(|| id.to_owned());
            return format!("{}:{}", el.type_name, shown);
        }
    }
    id.to_owned()
}

/// Render the trace as a Graphviz digraph. The source and target models
/// supply element types and names for the node labels; endpoint edges
/// are dashed and colored blue (left), green (right), and red (target).
pub fn export_dot(
    trace: &TraceModel,
    left: &Model,
    right: &Model,
    targets: &[&Model],
) -> String {
    let mut out = String::from("digraph trace {\n  rankdir=TB;\n");
    for link in &trace.links {
        out.push_str(&format!(
            "  {} [shape=box, label={}];\n",
            quote(&link.id),
            quote(&format!("{}:{}", link.kind, link.id))
        ));
    }
    let mut element_nodes: Vec<String> = Vec::new();
    let mut declare = |out: &mut String, node: String, label: String| {
        if !element_nodes.contains(&node) {
            out.push_str(&format!("  {} [label={}];\n", quote(&node), quote(&label)));
            element_nodes.push(node);
        }
    };
    let sides =
        |link: &TraceLink| -> [(&'static str, Vec<String>, Vec<&Model>); 3] {
            [
                ("left", link.left.clone(), vec![left]),
                ("right", link.right.clone(), vec![right]),
                ("comp", link.targets.clone(), targets.to_vec()),
            ]
        };
    for link in &trace.links {
        for (ns, ids, models) in sides(link) {
            for id in ids {
                declare(&mut out, format!("{ns}:{id}"), element_label(&models, &id));
            }
        }
    }
    for rel in &trace.relationships {
        out.push_str(&format!("  {} -> {};\n", quote(&rel.parent), quote(&rel.child)));
    }
    for link in &trace.links {
        for id in &link.left {
            out.push_str(&format!(
                "  {} -> {} [style=dashed, color=blue];\n",
                quote(&format!("left:{id}")),
                quote(&link.id)
            ));
        }
        for id in &link.right {
            out.push_str(&format!(
                "  {} -> {} [style=dashed, color=green];\n",
                quote(&format!("right:{id}")),
                quote(&link.id)
            ));
        }
        for id in &link.targets {
            out.push_str(&format!(
                "  {} -> {} [style=dashed, color=red];\n",
                quote(&link.id),
                quote(&format!("comp:{id}"))
            ));
        }
    }
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::execute;
    use crate::testutil::{left_model, registry, right_model, scenario_spec};
    use crate::trace::trace_execution;

    fn scenario_dot() -> String {
        let left = left_model();
        let right = right_model();
        let result = execute(&scenario_spec(), &left, &right, &registry()).unwrap();
        let trace = trace_execution(&result).unwrap();
        let composed = result.composed();
        export_dot(&trace, &left, &right, &[composed])
    }

    #[test]
    fn dot_output_counts_nodes_and_edges() {
        let dot = scenario_dot();
        assert_eq!(dot.matches("shape=box").count(), 5);
        assert_eq!(dot.matches("style=dashed").count(), 14);
        assert_eq!(dot.matches("color=blue").count(), 5);
        assert_eq!(dot.matches("color=green").count(), 4);
        assert_eq!(dot.matches("color=red").count(), 5);
        // Solid nesting edges carry no attribute list.
        let solid = dot.lines().filter(|l| l.contains("->") && !l.contains('[')).count();
        assert_eq!(solid, 4);
        // One node per distinct element, namespaced by side.
        let element_nodes = dot
            .lines()
            .filter(|l| l.contains("[label=") && !l.contains("shape=box"))
            .count();
        assert_eq!(element_nodes, 14);
    }

    #[test]
    fn dot_labels_show_type_and_name() {
        let dot = scenario_dot();
        assert!(dot.contains("\"l1\" [shape=box, label=\"merging:l1\"];"));
        assert!(dot.contains("\"l5\" [shape=box, label=\"transformation:l5\"];"));
        assert!(dot.contains("\"left:sys1\" [label=\"System:Library\"];"));
        assert!(dot.contains("\"right:term-author\" [label=\"Term:Author\"];"));
        assert!(dot.contains("\"comp:t1\" [label=\"System:Library\"];"));
        assert!(dot.contains("\"l1\" -> \"l2\";"));
        assert!(dot.contains("\"left:ent-chapter\" -> \"l5\" [style=dashed, color=blue];"));
        assert!(dot.contains("\"l1\" -> \"comp:t1\" [style=dashed, color=red];"));
        assert!(dot.starts_with("digraph trace {\n  rankdir=TB;\n"));
        assert!(dot.ends_with("}\n"));
    }

    #[test]
    fn dot_export_is_deterministic() {
        assert_eq!(scenario_dot(), scenario_dot());
    }

    #[test]
    fn empty_trace_renders_an_empty_graph_body() {
        let trace = crate::trace::TraceModel { links: vec![], relationships: vec![] };
        let left = left_model();
        let right = right_model();
        let dot = export_dot(&trace, &left, &right, &[]);
        assert_eq!(dot, "digraph trace {\n  rankdir=TB;\n}\n");
    }
}
