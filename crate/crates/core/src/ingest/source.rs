// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::{parse_unified_diff, BundleOrigin, CommitBundle, CommitRef, FileChange, IngestError};

/// Environment variable naming the base URL of a remote commit service.
pub const COMMIT_API_ENV: &str = "SCOPY_COMMIT_API_BASE";

/// Where commits come from. Implementations are shared across worker
/// threads, one commit per worker.
pub trait CommitSource: Send + Sync {
    fn fetch_commit(&self, owner: &str, repo: &str, hash: &str) -> Result<CommitBundle, IngestError>;
}

/// Reads commits laid out as
/// `<root>/<owner>__<repo>/<hash>/{message.txt, pre/<path>, post/<path>, diff.patch}`.
#[derive(Debug, Clone)]
pub struct FixtureSource {
    root: PathBuf,
}

impl FixtureSource {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        FixtureSource { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Every commit directory under the root, sorted.
    pub fn list(&self) -> Result<Vec<CommitRef>, IngestError> {
        let mut out = Vec::new();
        if !self.root.is_dir() {
            return Err(IngestError::NotFound(self.root.display().to_string()));
        }
        for repo_entry in read_dir_sorted(&self.root)? {
            if !repo_entry.is_dir() {
                continue;
            }
            let name = file_name(&repo_entry);
            let Some((owner, repo)) = name.split_once("__") else {
                continue;
            };
            for commit_entry in read_dir_sorted(&repo_entry)? {
                if commit_entry.is_dir() {
                    out.push(CommitRef {
                        owner: owner.to_string(),
                        repo: repo.to_string(),
                        hash: file_name(&commit_entry),
                    });
                }
            }
        }
        Ok(out)
    }

    fn commit_dir(&self, owner: &str, repo: &str, hash: &str) -> Result<PathBuf, IngestError> {
        let repo_dir = self.root.join(format!("{owner}__{repo}"));
        let exact = repo_dir.join(hash);
        if exact.is_dir() {
            return Ok(exact);
        }
        // Abbreviated hashes resolve when the prefix is unique.
        if repo_dir.is_dir() && !hash.is_empty() {
            let matches: Vec<PathBuf> = read_dir_sorted(&repo_dir)?
                .into_iter()
                .filter(|p| p.is_dir() && file_name(p).starts_with(hash))
                .collect();
            if let [only] = matches.as_slice() {
                return Ok(only.clone());
            }
        }
        Err(IngestError::NotFound(format!("{owner}/{repo}@{hash}")))
    }
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

fn read_dir_sorted(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut v: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| IngestError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    v.sort();
    Ok(v)
}

fn read_optional(path: &Path) -> Result<Option<String>, IngestError> {
    match fs::read(path) {
        Ok(bytes) => String::from_utf8(bytes)
            .map(Some)
            .map_err(|_| IngestError::MalformedDiff(format!("{} is not UTF-8 text", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
        Err(e) => Err(IngestError::io(path, e)),
    }
}

fn tree_files(dir: &Path) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    if !dir.is_dir() {
        return out;
    }
    for entry in WalkDir::new(dir).sort_by_file_name().into_iter().flatten() {
        if entry.file_type().is_file() {
            if let Ok(rel) = entry.path().strip_prefix(dir) {
                out.insert(rel.to_string_lossy().replace('\\', "/"));
            }
        }
    }
    out
}

impl CommitSource for FixtureSource {
    fn fetch_commit(&self, owner: &str, repo: &str, hash: &str) -> Result<CommitBundle, IngestError> {
        let dir = self.commit_dir(owner, repo, hash)?;
        let message = read_optional(&dir.join("message.txt"))?
            .unwrap_or_default()
            .trim_end()
            .to_string();
        let pre_dir = dir.join("pre");
        let post_dir = dir.join("post");
        let mut files = Vec::new();
        if let Some(diff_text) = read_optional(&dir.join("diff.patch"))? {
            for patch in parse_unified_diff(&diff_text)? {
                let pre_path = patch.old_path.clone().unwrap_or_else(|| patch.path.clone());
                let pre = if patch.is_new {
                    String::new()
                } else {
                    read_optional(&pre_dir.join(&pre_path))?.unwrap_or_default()
                };
                let fc = FileChange::from_patch(patch, pre)?;
                if let Some(post) = read_optional(&post_dir.join(&fc.path))? {
                    if post != fc.post_content {
                        return Err(IngestError::MalformedDiff(format!(
                            "diff.patch disagrees with post/{}",
                            fc.path
                        )));
                    }
                }
                files.push(fc);
            }
        } else {
            let mut paths = tree_files(&pre_dir);
            paths.extend(tree_files(&post_dir));
            for path in paths {
                let pre = read_optional(&pre_dir.join(&path))?.unwrap_or_default();
                let post = read_optional(&post_dir.join(&path))?.unwrap_or_default();
                if pre != post {
                    files.push(FileChange::from_contents(path, pre, post));
                }
            }
        }
        files.sort_by(|a, b| a.path.cmp(&b.path));
        let bundle = CommitBundle {
            repo_id: format!("{owner}/{repo}"),
            commit_hash: file_name(&dir),
            message,
            files,
            origin: BundleOrigin::Manual,
        };
        bundle.validate()?;
        Ok(bundle)
    }
}

/// Fetches bundles as JSON from `{base}/{owner}/{repo}/commit/{hash}`.
#[derive(Debug, Clone)]
pub struct HttpSource {
    base: String,
    client: reqwest::blocking::Client,
}

impl HttpSource {
    pub fn new(base: impl Into<String>) -> Self {
        HttpSource {
            base: base.into().trim_end_matches('/').to_string(),
            client: reqwest::blocking::Client::new(),
        }
    }

    pub fn from_env() -> Option<Self> {
        std::env::var(COMMIT_API_ENV).ok().filter(|s| !s.is_empty()).map(HttpSource::new)
    }

    pub fn url_for(&self, owner: &str, repo: &str, hash: &str) -> String {
        format!("{}/{owner}/{repo}/commit/{hash}", self.base)
    }
}

impl CommitSource for HttpSource {
    fn fetch_commit(&self, owner: &str, repo: &str, hash: &str) -> Result<CommitBundle, IngestError> {
        let url = self.url_for(owner, repo, hash);
        let resp = self
            .client
            .get(&url)
            .send()
            .map_err(|e| IngestError::TransportError(e.to_string()))?;
        if resp.status() == reqwest::StatusCode::NOT_FOUND {
            return Err(IngestError::NotFound(format!("{owner}/{repo}@{hash}")));
        }
        if !resp.status().is_success() {
            return Err(IngestError::TransportError(format!("{url}: HTTP {}", resp.status())));
        }
        let bundle: CommitBundle = resp
            .json()
            .map_err(|e| IngestError::TransportError(format!("{url}: {e}")))?;
        bundle.validate()?;
        for f in &bundle.files {
            f.validate()?;
        }
        Ok(bundle)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(p: &Path, s: &str) {
        fs::create_dir_all(p.parent().unwrap()).unwrap();
        fs::write(p, s).unwrap();
    }

    #[test]
    fn missing_commit_is_not_found() {
        let tmp = tempfile::tempdir().unwrap();
        let src = FixtureSource::new(tmp.path());
        assert!(matches!(src.fetch_commit("o", "r", "deadbeef"), Err(IngestError::NotFound(_))));
    }

    #[test]
    fn two_files_are_path_sorted() {
        let tmp = tempfile::tempdir().unwrap();
        let c = tmp.path().join("o__r/abc1234");
        write(&c.join("message.txt"), "two files\n");
        write(&c.join("pre/z.py"), "a = 1\n");
        write(&c.join("post/z.py"), "a = 2\n");
        write(&c.join("pre/pkg/a.py"), "b = 1\n");
        write(&c.join("post/pkg/a.py"), "b = 3\n");
        write(&c.join("pre/same.py"), "c = 1\n");
        write(&c.join("post/same.py"), "c = 1\n");
        let b = FixtureSource::new(tmp.path()).fetch_commit("o", "r", "abc1234").unwrap();
        let paths: Vec<_> = b.files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["pkg/a.py", "z.py"]);
        assert_eq!(b.message, "two files");
        assert_eq!(b.repo_id, "o/r");
    }

    #[test]
    fn diff_patch_must_agree_with_post() {
        let tmp = tempfile::tempdir().unwrap();
        let c = tmp.path().join("o__r/abc1234");
        write(&c.join("pre/a.py"), "x = 1\n");
        write(&c.join("post/a.py"), "x = 3\n");
        write(&c.join("diff.patch"), "--- a/a.py\n+++ b/a.py\n@@ -1 +1 @@\n-x = 1\n+x = 2\n");
        let err = FixtureSource::new(tmp.path()).fetch_commit("o", "r", "abc1234").unwrap_err();
        assert!(matches!(err, IngestError::MalformedDiff(_)));
    }

    #[test]
    fn prefix_hash_and_listing() {
        let tmp = tempfile::tempdir().unwrap();
        write(&tmp.path().join("o__r/abcdef0/post/a.py"), "x\n");
        write(&tmp.path().join("o__r/1234567/post/b.py"), "y\n");
        let src = FixtureSource::new(tmp.path());
        assert_eq!(src.fetch_commit("o", "r", "abc").unwrap().commit_hash, "abcdef0");
        let hashes: Vec<_> = src.list().unwrap().into_iter().map(|r| r.hash).collect();
        assert_eq!(hashes, ["1234567", "abcdef0"]);
    }

    #[test]
    fn http_source_url_layout() {
        let s = HttpSource::new("http://127.0.0.1:9/api/");
        assert_eq!(s.url_for("a", "b", "c"), "http://127.0.0.1:9/api/a/b/commit/c");
        assert!(matches!(s.fetch_commit("a", "b", "c"), Err(IngestError::TransportError(_))));
    }
}
