// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use similar::{capture_diff_slices, group_diff_ops, Algorithm, DiffOp};

use super::diff::{self, apply_hunks, split_lines, ChangedLines, FilePatch, Hunk, HunkLine, LineMarker};
use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BundleOrigin {
    CveLinked,
    KeywordCandidate,
    ModelCandidate,
    #[default]
    Manual,
}

/// One changed file with both snapshots and the hunks that connect them.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileChange {
    pub path: String,
    #[serde(default)]
    pub pre_content: String,
    #[serde(default)]
    pub post_content: String,
    pub hunks: Vec<Hunk>,
}

impl FileChange {
    /// Binds a parsed patch to its pre-image, deriving the post-image.
    pub fn from_patch(patch: FilePatch, pre_content: String) -> Result<Self, IngestError> {
        let post_content = apply_hunks(&pre_content, &patch.hunks)?;
        Ok(FileChange {
            path: patch.path,
            pre_content,
            post_content,
            hunks: patch.hunks,
        })
    }

    /// Diffs two snapshots (Myers, three lines of context).
    pub fn from_contents(
        path: impl Into<String>,
        pre_content: impl Into<String>,
        post_content: impl Into<String>,
    ) -> Self {
        let pre_content = pre_content.into();
        let post_content = post_content.into();
        let hunks = compute_hunks(&pre_content, &post_content, 3);
        FileChange {
            path: path.into(),
            pre_content,
            post_content,
            hunks,
        }
    }

    /// Re-applies the hunks and checks the result against `post_content`.
    pub fn validate(&self) -> Result<(), IngestError> {
        let rebuilt = apply_hunks(&self.pre_content, &self.hunks)?;
        if rebuilt != self.post_content {
            return Err(IngestError::MalformedDiff(format!(
                "{}: hunks do not reproduce the post-image",
                self.path
            )));
        }
        Ok(())
    }

    pub fn changed_lines(&self) -> ChangedLines {
        let (lines, _) = split_lines(&self.pre_content);
        diff::changed_lines_from(&self.hunks, lines.len())
    }

    pub fn patch(&self) -> FilePatch {
        FilePatch {
            path: self.path.clone(),
            old_path: None,
            is_new: self.pre_content.is_empty() && !self.post_content.is_empty(),
            is_deleted: self.post_content.is_empty() && !self.pre_content.is_empty(),
            hunks: self.hunks.clone(),
        }
    }

    pub fn is_unchanged(&self) -> bool {
        self.hunks.is_empty()
    }
}

/// Line-level changes of a file: (deleted pre lines, added post lines) plus
/// the context bijections.
pub fn changed_lines(fc: &FileChange) -> ChangedLines {
    fc.changed_lines()
}

fn compute_hunks(pre: &str, post: &str, context: usize) -> Vec<Hunk> {
    let tokens = |s: &str| -> Vec<(String, bool)> {
        let (lines, terminated) = split_lines(s);
        let n = lines.len();
        lines
            .into_iter()
            .enumerate()
            .map(|(i, l)| (l.to_string(), i + 1 < n || terminated))
            .collect()
    };
    let old = tokens(pre);
    let new = tokens(post);
    let ops = reindex_ops(capture_diff_slices(Algorithm::Myers, &old, &new));
    let mut hunks = Vec::new();
    for group in group_diff_ops(ops, context) {
        let (Some(first), Some(last)) = (group.first(), group.last()) else {
            continue;
        };
        let old_start = first.old_range().start;
        let new_start = first.new_range().start;
        let old_len = last.old_range().end - old_start;
        let new_len = last.new_range().end - new_start;
        let mut lines = Vec::new();
        let push = |lines: &mut Vec<HunkLine>, marker, tok: &(String, bool)| {
            lines.push(HunkLine {
                marker,
                text: tok.0.clone(),
                no_newline: !tok.1,
            })
        };
        for op in &group {
            match *op {
                DiffOp::Equal { old_index, len, .. } => {
                    for t in &old[old_index..old_index + len] {
                        push(&mut lines, LineMarker::Context, t);
                    }
                }
                DiffOp::Delete { old_index, old_len, .. } => {
                    for t in &old[old_index..old_index + old_len] {
                        push(&mut lines, LineMarker::Deleted, t);
                    }
                }
                DiffOp::Insert { new_index, new_len, .. } => {
                    for t in &new[new_index..new_index + new_len] {
                        push(&mut lines, LineMarker::Added, t);
                    }
                }
                DiffOp::Replace {
                    old_index,
                    old_len,
                    new_index,
                    new_len,
                } => {
                    for t in &old[old_index..old_index + old_len] {
                        push(&mut lines, LineMarker::Deleted, t);
                    }
                    for t in &new[new_index..new_index + new_len] {
                        push(&mut lines, LineMarker::Added, t);
                    }
                }
            }
        }
        hunks.push(Hunk {
            pre_start: if old_len == 0 { old_start } else { old_start + 1 },
            pre_len: old_len,
            post_start: if new_len == 0 { new_start } else { new_start + 1 },
            post_len: new_len,
            section: String::new(),
            lines,
        });
    }
    hunks
}

/// Recomputes op offsets from their lengths. The Myers backend can emit a
/// leading delete whose `new_index` is off by the length of a later insert;
/// lengths are always consistent, so walking them yields correct offsets.
fn reindex_ops(ops: Vec<DiffOp>) -> Vec<DiffOp> {
    let (mut o, mut n) = (0, 0);
    ops.into_iter()
        .map(|op| {
            let fixed = match op {
                DiffOp::Equal { len, .. } => DiffOp::Equal {
                    old_index: o,
                    new_index: n,
                    len,
                },
                DiffOp::Delete { old_len, .. } => DiffOp::Delete {
                    old_index: o,
                    old_len,
                    new_index: n,
                },
                DiffOp::Insert { new_len, .. } => DiffOp::Insert {
                    old_index: o,
                    new_index: n,
                    new_len,
                },
                DiffOp::Replace { old_len, new_len, .. } => DiffOp::Replace {
                    old_index: o,
                    old_len,
                    new_index: n,
                    new_len,
                },
            };
            o = fixed.old_range().end;
            n = fixed.new_range().end;
            fixed
        })
        .collect()
}

/// One commit: message plus per-file changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitBundle {
    /// `owner/repo`.
    pub repo_id: String,
    /// 40 hex chars, or `local` for changes without a known hash.
    pub commit_hash: String,
    pub message: String,
    pub files: Vec<FileChange>,
    #[serde(default)]
    pub origin: BundleOrigin,
}

impl CommitBundle {
    pub fn validate(&self) -> Result<(), IngestError> {
        if self.commit_hash.trim().is_empty() {
            return Err(IngestError::InvalidBundle("empty commit hash".into()));
        }
        let mut seen = BTreeSet::new();
        for f in &self.files {
            if !seen.insert(f.path.as_str()) {
                return Err(IngestError::InvalidBundle(format!(
                    "duplicate file path {}",
                    f.path
                )));
            }
        }
        Ok(())
    }

    /// Stable identifier used as the store key: `owner__repo@hash`.
    pub fn commit_id(&self) -> String {
        let repo = self.repo_id.replace('/', "__");
        if self.commit_hash == "local" {
            let mut h = Sha256::new();
            h.update(self.message.as_bytes());
            for f in &self.files {
                h.update(f.path.as_bytes());
                h.update([0]);
                h.update(f.pre_content.as_bytes());
                h.update([0]);
                h.update(f.post_content.as_bytes());
            }
            let digest = hex::encode(h.finalize());
            format!("{repo}@local-{}", &digest[..12])
        } else {
            format!("{repo}@{}", self.commit_hash)
        }
    }

    /// Concatenated patch text of every file.
    pub fn render_diff(&self) -> String {
        self.files.iter().map(|f| f.patch().render()).collect()
    }

    pub fn owner_and_repo(&self) -> (&str, &str) {
        self.repo_id.split_once('/').unwrap_or(("", &self.repo_id))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::parse_unified_diff;
    use proptest::prelude::*;

    #[test]
    fn from_contents_round_trips() {
        let fc = FileChange::from_contents("a.py", "a\nb\nc\n", "a\nB\nc\nd\n");
        fc.validate().unwrap();
        let cl = fc.changed_lines();
        assert_eq!(cl.deleted, BTreeSet::from([2]));
        assert_eq!(cl.added, BTreeSet::from([2, 4]));
    }

    #[test]
    fn leading_delete_before_replace() {
        let fc = FileChange::from_contents("a.py", "b\na\nb", "a\na\na");
        fc.validate().unwrap();
        assert_eq!(fc.hunks[0].post_start, 1);
    }

    #[test]
    fn trailing_newline_change_is_a_change() {
        let fc = FileChange::from_contents("a.py", "x = 1", "x = 1\n");
        assert!(!fc.is_unchanged());
        fc.validate().unwrap();
    }

    #[test]
    fn no_hunks_means_nothing_changed() {
        let fc = FileChange::from_contents("a.py", "x\n", "x\n");
        let cl = fc.changed_lines();
        assert!(cl.deleted.is_empty() && cl.added.is_empty());
    }

    #[test]
    fn duplicate_paths_rejected() {
        let f = FileChange::from_contents("a.py", "", "x\n");
        let b = CommitBundle {
            repo_id: "o/r".into(),
            commit_hash: "abc".into(),
            message: "m".into(),
            files: vec![f.clone(), f],
            origin: BundleOrigin::Manual,
        };
        assert!(b.validate().is_err());
    }

    #[test]
    fn local_ids_are_content_addressed() {
        let b = CommitBundle {
            repo_id: "o/r".into(),
            commit_hash: "local".into(),
            message: "m".into(),
            files: vec![FileChange::from_contents("a.py", "", "x\n")],
            origin: BundleOrigin::Manual,
        };
        let id = b.commit_id();
        assert!(id.starts_with("o__r@local-"));
        assert_eq!(id, b.clone().commit_id());
    }

    fn arb_lines() -> impl Strategy<Value = Vec<String>> {
        prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "d", "", "  x = 1"]), 0..12)
            .prop_map(|v| v.into_iter().map(String::from).collect())
    }

    proptest! {
        // render(parse(d)) applied to pre reproduces post, and each hunk's
        // deleted+context count matches its pre length.
        #[test]
        fn rendered_diff_reapplies(pre in arb_lines(), post in arb_lines(), pre_nl in any::<bool>(), post_nl in any::<bool>()) {
            let join = |v: &Vec<String>, nl: bool| {
                let mut s = v.join("\n");
                if !v.is_empty() && nl { s.push('\n'); }
                s
            };
            let pre = join(&pre, pre_nl);
            let post = join(&post, post_nl);
            let fc = FileChange::from_contents("f.py", pre.clone(), post.clone());
            let text = fc.patch().render();
            let parsed = parse_unified_diff(&text).unwrap();
            let hunks = parsed.first().map(|p| p.hunks.clone()).unwrap_or_default();
            prop_assert_eq!(apply_hunks(&pre, &hunks).unwrap(), post);
            for h in &hunks {
                let cl = diff::changed_lines_from(std::slice::from_ref(h), 0);
                prop_assert_eq!(cl.deleted.len() + cl.context.len(), h.pre_len);
                prop_assert_eq!(cl.added.len() + cl.context.len(), h.post_len);
            }
        }
    }
}
