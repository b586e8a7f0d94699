// SPDX-License-Identifier: Apache-2.0

//! Two-version commit graphs: alignment of unchanged statements, merge
//! into one version-annotated graph, and bidirectional slicing around the
//! change.

mod build;
mod merge;
mod slice;

pub use build::{build_commit_cpg, build_file_graphs, CommitGraph, CommitGraphDocument, UnitGraph, UnitSummary};
pub use merge::{align, merge, MergedCpg};
pub use slice::{slice, union, CommitCpg, SliceOptions};

use thiserror::Error;

use crate::pycpg::{SyntaxError, Version};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CommitCpgError {
    #[error("node aligned twice (pre {pre}, post {post})")]
    AlignmentConflict { pre: usize, post: usize },
    #[error("no changed statement in the analyzed units")]
    NoChange,
    #[error("{path} ({version:?}) does not parse: {source}")]
    Unparseable {
        path: String,
        version: Version,
        #[source]
        source: SyntaxError,
    },
    #[error("invalid source filter: {0}")]
    InvalidFilter(String),
}

impl CommitCpgError {
    pub fn code(&self) -> &'static str {
        match self {
            CommitCpgError::AlignmentConflict { .. } => "AlignmentConflict",
            CommitCpgError::NoChange => "NoChange",
            CommitCpgError::Unparseable { .. } => "SyntaxError",
            CommitCpgError::InvalidFilter(_) => "InvalidFilter",
        }
    }
}
