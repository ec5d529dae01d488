//! Plain-text node tables: one row per node, `id: left => right` followed by
//! the rule applied and the premises it produced.

use std::fmt::Write;

use crate::cyclic::{NodeState, ProofGraph};
use crate::sequent::LFormula;

fn side(fs: &[LFormula]) -> String {
    fs.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(", ")
}

pub fn render_text(g: &ProofGraph) -> String {
    let mut out = String::new();
    let width = g.len().to_string().len();
    for n in g.nodes() {
        let left = side(&n.sequent.left);
        let right = side(&n.sequent.right);
        let _ = write!(out, "{:>width$}: {left} => {right}", n.id);
        match &n.state {
            NodeState::Open => out.push_str("    [open]"),
            NodeState::Bud(b) => {
                let _ = write!(out, "    [back-link to {}", b.companion);
                if !b.subst.is_identity() {
                    let _ = write!(out, " via {}", b.subst);
                }
                out.push(']');
            }
            NodeState::Rule(app) => {
                let _ = write!(out, "    [{}", app.rule.id().name());
                if !n.children.is_empty() {
                    let kids: Vec<String> = n.children.iter().map(|c| c.to_string()).collect();
                    let _ = write!(out, " -> {}", kids.join(", "));
                }
                if app.is_progressive() {
                    out.push_str(", progressive");
                }
                out.push(']');
            }
        }
        out.push('\n');
    }
    out
}
