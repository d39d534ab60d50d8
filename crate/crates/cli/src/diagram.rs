//! Network diagrams in DOT. Significant input nodes (multiple-parameter
//! test) and edges (single-parameter test) are black, the rest gray.
//! Intercepts are not drawn.

use std::fmt::Write as _;

use fnnstat_core::inference::InferenceReport;
use fnnstat_core::simgen::ALPHA;

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramNode {
    pub id: String,
    pub label: String,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramEdge {
    pub from: String,
    pub to: String,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagramSpec {
    pub inputs: Vec<DiagramNode>,
    pub hidden: Vec<DiagramNode>,
    pub output: DiagramNode,
    pub edges: Vec<DiagramEdge>,
}

fn below(p: Option<f64>) -> bool {
    p.is_some_and(|p| p < ALPHA)
}

impl DiagramSpec {
    pub fn from_report(report: &InferenceReport, response: &str) -> Self {
        let inputs: Vec<DiagramNode> = report
            .covariates
            .iter()
            .map(|c| DiagramNode {
                id: format!("x{}", c.index),
                label: c.name.clone(),
                significant: below(c.wald.map(|w| w.p_value)),
            })
            .collect();
        let hidden: Vec<DiagramNode> = (1..=report.q)
            .map(|k| DiagramNode {
                id: format!("h{k}"),
                label: format!("h{k}"),
                significant: true,
            })
            .collect();
        let output = DiagramNode {
            id: "y".into(),
            label: response.into(),
            significant: true,
        };
        let mut edges = Vec::new();
        for c in &report.covariates {
            for (k, &i) in c.weight_indices.iter().enumerate() {
                edges.push(DiagramEdge {
                    from: format!("x{}", c.index),
                    to: format!("h{}", k + 1),
                    significant: below(report.parameters[i].wald.map(|w| w.p_value)),
                });
            }
        }
        let g0 = (report.p + 1) * report.q;
        for k in 1..=report.q {
            edges.push(DiagramEdge {
                from: format!("h{k}"),
                to: "y".into(),
                significant: below(report.parameters[g0 + k].wald.map(|w| w.p_value)),
            });
        }
        Self {
            inputs,
            hidden,
            output,
            edges,
        }
    }
}

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('\\', "\\\\").replace('"', "\\\""))
}

fn color(significant: bool) -> &'static str {
    if significant {
        "black"
    } else {
        "gray"
    }
}

fn node_line(out: &mut String, n: &DiagramNode) {
    let c = color(n.significant);
    let _ = writeln!(out, "    {} [label={}, color={c}, fontcolor={c}];", n.id, quote(&n.label));
}

pub fn to_dot(spec: &DiagramSpec) -> String {
    let mut out = String::from("digraph fnn {\n    rankdir=LR;\n    node [shape=circle];\n");
    out.push_str("    subgraph inputs {\n        rank=same;\n");
    for n in &spec.inputs {
        out.push_str("    ");
        node_line(&mut out, n);
    }
    out.push_str("    }\n    subgraph hidden {\n        rank=same;\n");
    for n in &spec.hidden {
        out.push_str("    ");
        node_line(&mut out, n);
    }
    out.push_str("    }\n");
    node_line(&mut out, &spec.output);
    for e in &spec.edges {
        let _ = writeln!(out, "    {} -> {} [color={}];", e.from, e.to, color(e.significant));
    }
    out.push_str("}\n");
    out
}
