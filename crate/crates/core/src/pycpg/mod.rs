// SPDX-License-Identifier: Apache-2.0

//! Statement-level code property graphs for Python units: AST, control
//! dependence and data dependence edges over statement nodes.

pub mod cfg;
pub mod dataflow;
pub mod defuse;
mod graph;
pub mod lexer;
pub mod stmt;

pub use dataflow::{control_dependences, data_dependences, DataDep};
pub use graph::{
    build_cpg, cpg_from_tree, Cpg, CpgEdge, CpgNode, EdgeDoc, EdgeKind, GraphDocument, NodeDoc, SliceCriteria,
    Version, GRAPH_FORMAT_VERSION,
};
pub use stmt::{parse_module, parse_statements, Module, Stmt, StmtKind, UnitInfo, UnitKind, UnitTree};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("syntax error at {line}:{column}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CpgError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("no unit named {0}")]
    UnknownUnit(String),
}
