// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::dataflow::{control_dependences, data_dependences, DataDep};
use super::stmt::{parse_statements, UnitTree};
use super::CpgError;
use crate::ingest::LineRange;

/// Version tag of nodes and edges. Single-version graphs only use
/// `Previous` and `Current`; merged graphs add `Unchanged`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Version {
    Previous,
    Current,
    Unchanged,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    #[serde(rename = "AST")]
    Ast,
    #[serde(rename = "CDG")]
    Cdg,
    #[serde(rename = "DDG")]
    Ddg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpgNode {
    pub id: usize,
    pub func_name: String,
    pub file_name: String,
    pub version: Version,
    pub code: String,
    pub line_span: LineRange,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CpgEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
    pub version: Version,
}

/// Statement-level code property graph of one unit in one version.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cpg {
    pub unit: String,
    pub file_name: String,
    pub nodes: Vec<CpgNode>,
    /// Sorted by (kind, src, dst); one DDG edge per statement pair.
    pub edges: Vec<CpgEdge>,
    /// Variables behind each DDG edge.
    pub data_deps: Vec<DataDep>,
}

impl Cpg {
    pub fn edges_of(&self, kind: EdgeKind) -> impl Iterator<Item = &CpgEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }

    pub fn to_document(&self) -> GraphDocument {
        GraphDocument::new(&self.nodes, &self.edges, None)
    }
}

/// Builds the CPG of an already extracted unit tree.
pub fn cpg_from_tree(tree: &UnitTree, file_name: &str, version: Version) -> Cpg {
    let nodes = tree
        .nodes
        .iter()
        .map(|s| CpgNode {
            id: s.id,
            func_name: tree.name.clone(),
            file_name: file_name.to_string(),
            version,
            code: s.code.clone(),
            line_span: s.span,
        })
        .collect();
    let mut edges = BTreeSet::new();
    for s in &tree.nodes {
        for &c in &s.children {
            edges.insert(CpgEdge {
                src: s.id,
                dst: c,
                kind: EdgeKind::Ast,
                version,
            });
        }
    }
    for (src, dst) in control_dependences(tree) {
        edges.insert(CpgEdge {
            src,
            dst,
            kind: EdgeKind::Cdg,
            version,
        });
    }
    let data_deps = data_dependences(tree);
    for d in &data_deps {
        edges.insert(CpgEdge {
            src: d.src,
            dst: d.dst,
            kind: EdgeKind::Ddg,
            version,
        });
    }
    let mut edges: Vec<CpgEdge> = edges.into_iter().collect();
    edges.sort_by_key(|e| (e.kind, e.src, e.dst));
    Cpg {
        unit: tree.name.clone(),
        file_name: file_name.to_string(),
        nodes,
        edges,
        data_deps,
    }
}

/// Parses `source` and builds the CPG of `unit`.
pub fn build_cpg(source: &str, unit: &str, file_name: &str, version: Version) -> Result<Cpg, CpgError> {
    let tree = parse_statements(source, unit)?;
    Ok(cpg_from_tree(&tree, file_name, version))
}

pub const GRAPH_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeDoc {
    pub id: usize,
    pub func: String,
    pub file: String,
    pub version: Version,
    pub code: String,
    pub span: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDoc {
    pub src: usize,
    pub dst: usize,
    #[serde(rename = "type")]
    pub kind: EdgeKind,
    pub version: Version,
}

/// Node ids that seeded a slice.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceCriteria {
    pub deleted: Vec<usize>,
    pub added: Vec<usize>,
}

/// Versioned JSON form of a graph. Nodes appear in id order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDocument {
    pub format_version: u32,
    pub nodes: Vec<NodeDoc>,
    pub edges: Vec<EdgeDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice_criteria: Option<SliceCriteria>,
}

impl GraphDocument {
    pub fn new(nodes: &[CpgNode], edges: &[CpgEdge], slice_criteria: Option<SliceCriteria>) -> Self {
        let mut nodes: Vec<NodeDoc> = nodes
            .iter()
            .map(|n| NodeDoc {
                id: n.id,
                func: n.func_name.clone(),
                file: n.file_name.clone(),
                version: n.version,
                code: n.code.clone(),
                span: (n.line_span.start, n.line_span.end),
            })
            .collect();
        nodes.sort_by_key(|n| n.id);
        GraphDocument {
            format_version: GRAPH_FORMAT_VERSION,
            nodes,
            edges: edges
                .iter()
                .map(|e| EdgeDoc {
                    src: e.src,
                    dst: e.dst,
                    kind: e.kind,
                    version: e.version,
                })
                .collect(),
            slice_criteria,
        }
    }

    pub fn nodes(&self) -> Vec<CpgNode> {
        self.nodes
            .iter()
            .map(|n| CpgNode {
                id: n.id,
                func_name: n.func.clone(),
                file_name: n.file.clone(),
                version: n.version,
                code: n.code.clone(),
                line_span: LineRange::new(n.span.0, n.span.1),
            })
            .collect()
    }

    pub fn edges(&self) -> Vec<CpgEdge> {
        self.edges
            .iter()
            .map(|e| CpgEdge {
                src: e.src,
                dst: e.dst,
                kind: e.kind,
                version: e.version,
            })
            .collect()
    }
}
