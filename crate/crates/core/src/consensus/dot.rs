//! Graphviz rendering of importance orders.
//!
//! Output is deterministic: nodes appear in class-construction order (which
//! follows player order), edges sorted by (source, target), and no floats
//! are printed. Rerunning on the same model and instance yields identical
//! bytes, which the golden tests rely on.

use super::PartialOrder;

/// Renders the order as a `digraph`: one box per node (tied players share a
/// box, joined by `=`), one arrow per covering relation, pointing from the
/// more important node to the less important one.
pub fn render(order: &PartialOrder) -> String {
    let mut out = String::new();
    out.push_str("digraph importance {\n");
    out.push_str("    rankdir=TB;\n");
    out.push_str("    node [shape=box];\n");
    for (id, class) in order.nodes.iter().enumerate() {
        let label = class
            .iter()
            .map(|&mi| {
                let m = &order.members[mi];
                format!("{} ({})", escape(&m.name), m.sign.glyph())
            })
            .collect::<Vec<_>>()
            .join(" = ");
        out.push_str(&format!("    n{id} [label=\"{label}\"];\n"));
    }
    for (more, less) in order.hasse_edges() {
        out.push_str(&format!("    n{more} -> n{less};\n"));
    }
    out.push_str("}\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('\\', "\\\\").replace('"', "\\\"")
}
