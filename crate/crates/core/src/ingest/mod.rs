// SPDX-License-Identifier: Apache-2.0

//! Commit ingestion: diffs, bundles, relevant-unit selection and commit
//! sources.

mod bundle;
mod cve;
pub mod diff;
mod filter;
mod source;
mod units;

pub use bundle::{changed_lines, BundleOrigin, CommitBundle, FileChange};
pub use cve::{parse_cve_reference, CommitRef};
pub use diff::{apply_hunks, parse_unified_diff, ChangedLines, FilePatch, Hunk, HunkLine, LineMarker};
pub use filter::SourceFilter;
pub use source::{CommitSource, FixtureSource, HttpSource, COMMIT_API_ENV};
pub use units::{select_relevant_units, LineRange, RelevantUnit, UnitSpans, MODULE_UNIT};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("malformed diff: {0}")]
    MalformedDiff(String),
    #[error("not a commit URL: {0}")]
    NotACommitUrl(String),
    #[error("commit not found: {0}")]
    NotFound(String),
    #[error("transport error: {0}")]
    TransportError(String),
    #[error("invalid bundle: {0}")]
    InvalidBundle(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IngestError {
    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        IngestError::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Short machine-readable reason code.
    pub fn code(&self) -> &'static str {
        match self {
            IngestError::MalformedDiff(_) => "MalformedDiff",
            IngestError::NotACommitUrl(_) => "NotACommitUrl",
            IngestError::NotFound(_) => "NotFound",
            IngestError::TransportError(_) => "TransportError",
            IngestError::InvalidBundle(_) => "InvalidBundle",
            IngestError::Io { .. } => "Io",
        }
    }
}
