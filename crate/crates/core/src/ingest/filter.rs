// SPDX-License-Identifier: Apache-2.0

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

use super::{CommitBundle, IngestError};

/// Decides which changed files reach graph construction: an extension
/// allowlist plus optional path-glob exclusions (changelogs, tests, ...).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFilter {
    pub extensions: Vec<String>,
    #[serde(default)]
    pub exclude: Vec<String>,
}

impl Default for SourceFilter {
    fn default() -> Self {
        SourceFilter {
            extensions: vec![".py".to_string()],
            exclude: Vec::new(),
        }
    }
}

impl SourceFilter {
    fn globs(&self) -> Result<GlobSet, IngestError> {
        let mut b = GlobSetBuilder::new();
        for pat in &self.exclude {
            let g = Glob::new(pat)
                .map_err(|e| IngestError::InvalidBundle(format!("bad exclusion pattern {pat}: {e}")))?;
            b.add(g);
        }
        b.build()
            .map_err(|e| IngestError::InvalidBundle(format!("bad exclusion set: {e}")))
    }

    pub fn keeps(&self, path: &str) -> Result<bool, IngestError> {
        let ext_ok = self.extensions.iter().any(|e| path.ends_with(e.as_str()));
        Ok(ext_ok && !self.globs()?.is_match(path))
    }

    /// Returns the bundle restricted to source files that pass the filter.
    pub fn apply(&self, bundle: &CommitBundle) -> Result<CommitBundle, IngestError> {
        let globs = self.globs()?;
        let mut out = bundle.clone();
        out.files.retain(|f| {
            self.extensions.iter().any(|e| f.path.ends_with(e.as_str())) && !globs.is_match(&f.path)
        });
        Ok(out)
    }
}
