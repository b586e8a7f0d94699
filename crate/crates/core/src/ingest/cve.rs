// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitRef {
    pub owner: String,
    pub repo: String,
    pub hash: String,
}

impl CommitRef {
    pub fn repo_id(&self) -> String {
        format!("{}/{}", self.owner, self.repo)
    }
}

fn is_hash(s: &str) -> bool {
    (7..=40).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_hexdigit())
}

/// Extracts `(owner, repo, hash)` from a GitHub commit reference of the form
/// `https://github.com/{owner}/{repo}/commit/{hash}`.
///
/// Accepted variants seen in vulnerability reference lists: `http://`,
/// `www.`, a `.patch`/`.diff` suffix, a trailing slash, query strings and
/// fragments, and `/pull/{n}/commits/{hash}`.
pub fn parse_cve_reference(url: &str) -> Result<CommitRef, IngestError> {
    let reject = || IngestError::NotACommitUrl(url.to_string());
    let trimmed = url.trim();
    let rest = trimmed
        .strip_prefix("https://")
        .or_else(|| trimmed.strip_prefix("http://"))
        .ok_or_else(reject)?;
    let rest = rest.strip_prefix("www.").unwrap_or(rest);
    let rest = rest.strip_prefix("github.com/").ok_or_else(reject)?;
    let rest = rest.split(['?', '#']).next().unwrap_or(rest);
    let segments: Vec<&str> = rest.trim_end_matches('/').split('/').collect();
    let raw_hash = match segments.as_slice() {
        [_, _, "commit", h] => *h,
        [_, _, "pull", n, "commits", h] if n.bytes().all(|b| b.is_ascii_digit()) => *h,
        _ => return Err(reject()),
    };
    let hash = raw_hash
        .strip_suffix(".patch")
        .or_else(|| raw_hash.strip_suffix(".diff"))
        .unwrap_or(raw_hash);
    let (owner, repo) = (segments[0], segments[1]);
    if owner.is_empty() || repo.is_empty() || !is_hash(hash) {
        return Err(reject());
    }
    Ok(CommitRef {
        owner: owner.to_string(),
        repo: repo.to_string(),
        hash: hash.to_ascii_lowercase(),
    })
}
