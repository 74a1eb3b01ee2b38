//! Predicate dependency graph and component schedule.
//!
//! Function predicates behave like built-ins: they contribute no nodes
//! and no arcs. Negation and aggregates must point into strictly earlier
//! components; disjunctive heads are fine.

use indexmap::{IndexMap, IndexSet};
use petgraph::algo::kosaraju_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use crate::flat::{FlatLiteral, FlatProgram};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EdgeKind {
    Pos,
    Neg,
    Agg,
}

impl EdgeKind {
    pub fn label(self) -> &'static str {
        match self {
            EdgeKind::Pos => "+",
            EdgeKind::Neg => "-",
            EdgeKind::Agg => "#",
        }
    }
}

/// Arcs run from body predicates to head predicates.
#[derive(Debug, Clone, Default)]
pub struct DependencyGraph {
    pub nodes: IndexSet<String>,
    pub edges: IndexSet<(String, String, EdgeKind)>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("program is not stratified: {kind} dependency inside the component {{{}}}", cycle.join(", "))]
pub struct StratificationError {
    pub cycle: Vec<String>,
    pub kind: String,
}

pub fn build_dependency_graph(p: &FlatProgram) -> DependencyGraph {
    let mut g = DependencyGraph::default();
    for (pred, _) in p.tables.iter() {
        g.nodes.insert(pred.to_string());
    }
    for rule in &p.rules {
        for head in &rule.head {
            g.nodes.insert(head.predicate.clone());
            for lit in &rule.body {
                match lit {
                    FlatLiteral::Pos(a) => {
                        g.nodes.insert(a.predicate.clone());
                        g.edges.insert((a.predicate.clone(), head.predicate.clone(), EdgeKind::Pos));
                    }
                    FlatLiteral::Neg(a) => {
                        g.nodes.insert(a.predicate.clone());
                        g.edges.insert((a.predicate.clone(), head.predicate.clone(), EdgeKind::Neg));
                    }
                    FlatLiteral::Aggregate(agg) => {
                        g.nodes.insert(agg.atom.predicate.clone());
                        g.edges.insert((
                            agg.atom.predicate.clone(),
                            head.predicate.clone(),
                            EdgeKind::Agg,
                        ));
                    }
                    FlatLiteral::Function(_) => {}
                }
            }
        }
        // Constraint bodies still contribute nodes.
        for lit in &rule.body {
            match lit {
                FlatLiteral::Pos(a) | FlatLiteral::Neg(a) => {
                    g.nodes.insert(a.predicate.clone());
                }
                FlatLiteral::Aggregate(agg) => {
                    g.nodes.insert(agg.atom.predicate.clone());
                }
                FlatLiteral::Function(_) => {}
            }
        }
    }
    g
}

/// Strongly connected components in evaluation order (dependencies
/// first). Fails when a negative or aggregate arc stays inside one
/// component.
pub fn evaluation_order(g: &DependencyGraph) -> Result<Vec<Vec<String>>, StratificationError> {
    let mut graph: DiGraph<&str, EdgeKind> = DiGraph::new();
    let mut idx: IndexMap<&str, NodeIndex> = IndexMap::new();
    for n in &g.nodes {
        let i = graph.add_node(n.as_str());
        idx.insert(n.as_str(), i);
    }
    for (from, to, kind) in &g.edges {
        graph.add_edge(idx[from.as_str()], idx[to.as_str()], *kind);
    }

    // kosaraju_scc yields components in reverse topological order of the
    // condensation (successors first); evaluation wants dependencies
    // first, so flip it.
    let mut sccs = kosaraju_scc(&graph);
    sccs.reverse();

    let mut component_of: IndexMap<&str, usize> = IndexMap::new();
    for (i, scc) in sccs.iter().enumerate() {
        for &n in scc {
            component_of.insert(graph[n], i);
        }
    }
    for (from, to, kind) in &g.edges {
        if *kind != EdgeKind::Pos && component_of[from.as_str()] == component_of[to.as_str()] {
            let c = component_of[from.as_str()];
            let mut cycle: Vec<String> =
                sccs[c].iter().map(|&n| graph[n].to_string()).collect();
            cycle.sort();
            return Err(StratificationError {
                cycle,
                kind: match kind {
                    EdgeKind::Neg => "negative".to_string(),
                    EdgeKind::Agg => "aggregate".to_string(),
                    EdgeKind::Pos => unreachable!(),
                },
            });
        }
    }

    Ok(sccs
        .into_iter()
        .map(|scc| {
            let mut names: Vec<String> = scc.into_iter().map(|n| graph[n].to_string()).collect();
            names.sort();
            names
        })
        .collect())
}

/// DOT text of the graph: nodes first, then labeled arcs.
pub fn to_dot(g: &DependencyGraph) -> String {
    let mut out = String::from("digraph dependencies {\n");
    for n in &g.nodes {
        out.push_str(&format!("  \"{n}\";\n"));
    }
    for (from, to, kind) in &g.edges {
        out.push_str(&format!("  \"{from}\" -> \"{to}\" [label=\"{}\"];\n", kind.label()));
    }
    out.push_str("}\n");
    out
}
