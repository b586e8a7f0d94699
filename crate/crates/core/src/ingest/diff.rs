// SPDX-License-Identifier: Apache-2.0

//! Unified diff parsing and hunk application.
//!
//! Lines are split on `\n` only, so a trailing `\r` stays part of the line
//! text and reconstruction is byte-exact for CRLF files as well.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::IngestError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LineMarker {
    Context,
    Deleted,
    Added,
}

impl LineMarker {
    fn prefix(self) -> char {
        match self {
            LineMarker::Context => ' ',
            LineMarker::Deleted => '-',
            LineMarker::Added => '+',
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HunkLine {
    pub marker: LineMarker,
    pub text: String,
    /// Set when the line was followed by `\ No newline at end of file`.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub no_newline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Hunk {
    pub pre_start: usize,
    pub pre_len: usize,
    pub post_start: usize,
    pub post_len: usize,
    /// Trailing text of the `@@` header (usually the enclosing def line).
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub section: String,
    pub lines: Vec<HunkLine>,
}

impl Hunk {
    /// Checks the line-count invariants against the header.
    pub fn validate(&self) -> Result<(), IngestError> {
        let pre = self
            .lines
            .iter()
            .filter(|l| l.marker != LineMarker::Added)
            .count();
        let post = self
            .lines
            .iter()
            .filter(|l| l.marker != LineMarker::Deleted)
            .count();
        if pre != self.pre_len || post != self.post_len {
            return Err(IngestError::MalformedDiff(format!(
                "hunk @@ -{},{} +{},{} @@ carries {} pre and {} post lines",
                self.pre_start, self.pre_len, self.post_start, self.post_len, pre, post
            )));
        }
        Ok(())
    }

    /// First pre-version line touched by this hunk, 1-based.
    fn pre_first_line(&self) -> usize {
        if self.pre_len == 0 {
            // Pure insertion after line `pre_start`.
            self.pre_start + 1
        } else {
            self.pre_start
        }
    }

    fn post_first_line(&self) -> usize {
        if self.post_len == 0 {
            self.post_start + 1
        } else {
            self.post_start
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!(
            "@@ -{} +{} @@",
            render_range(self.pre_start, self.pre_len),
            render_range(self.post_start, self.post_len)
        );
        if !self.section.is_empty() {
            out.push(' ');
            out.push_str(&self.section);
        }
        out.push('\n');
        for line in &self.lines {
            out.push(line.marker.prefix());
            out.push_str(&line.text);
            out.push('\n');
            if line.no_newline {
                out.push_str("\\ No newline at end of file\n");
            }
        }
        out
    }
}

fn render_range(start: usize, len: usize) -> String {
    if len == 1 {
        start.to_string()
    } else {
        format!("{start},{len}")
    }
}

/// One file's section of a unified diff, before it is bound to file contents.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilePatch {
    pub path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub old_path: Option<String>,
    #[serde(default)]
    pub is_new: bool,
    #[serde(default)]
    pub is_deleted: bool,
    pub hunks: Vec<Hunk>,
}

impl FilePatch {
    pub fn render(&self) -> String {
        let old = self.old_path.as_deref().unwrap_or(&self.path);
        let mut out = format!("diff --git a/{} b/{}\n", old, self.path);
        if self.is_new {
            out.push_str("--- /dev/null\n");
        } else {
            out.push_str(&format!("--- a/{old}\n"));
        }
        if self.is_deleted {
            out.push_str("+++ /dev/null\n");
        } else {
            out.push_str(&format!("+++ b/{}\n", self.path));
        }
        for h in &self.hunks {
            out.push_str(&h.render());
        }
        out
    }

    /// Rebuilds the touched regions of both versions, leaving untouched lines
    /// blank. Used when only the diff (and no file snapshot) is available.
    pub fn sparse_contents(&self) -> (String, String) {
        let mut pre: BTreeMap<usize, &str> = BTreeMap::new();
        let mut post: BTreeMap<usize, &str> = BTreeMap::new();
        for h in &self.hunks {
            let (mut p, mut q) = (h.pre_first_line(), h.post_first_line());
            for line in &h.lines {
                match line.marker {
                    LineMarker::Context => {
                        pre.insert(p, &line.text);
                        post.insert(q, &line.text);
                        p += 1;
                        q += 1;
                    }
                    LineMarker::Deleted => {
                        pre.insert(p, &line.text);
                        p += 1;
                    }
                    LineMarker::Added => {
                        post.insert(q, &line.text);
                        q += 1;
                    }
                }
            }
        }
        (fill_lines(&pre), fill_lines(&post))
    }
}

fn fill_lines(lines: &BTreeMap<usize, &str>) -> String {
    let Some((&last, _)) = lines.iter().next_back() else {
        return String::new();
    };
    let mut out = String::new();
    for n in 1..=last {
        out.push_str(lines.get(&n).copied().unwrap_or(""));
        out.push('\n');
    }
    out
}

fn malformed(line_no: usize, what: impl std::fmt::Display) -> IngestError {
    IngestError::MalformedDiff(format!("line {line_no}: {what}"))
}

fn parse_range(text: &str, line_no: usize) -> Result<(usize, usize), IngestError> {
    let (start, len) = match text.split_once(',') {
        Some((s, l)) => (s, Some(l)),
        None => (text, None),
    };
    let start = start
        .parse::<usize>()
        .map_err(|_| malformed(line_no, format!("bad hunk range `{text}`")))?;
    let len = match len {
        Some(l) => l
            .parse::<usize>()
            .map_err(|_| malformed(line_no, format!("bad hunk range `{text}`")))?,
        None => 1,
    };
    Ok((start, len))
}

fn parse_hunk_header(line: &str, line_no: usize) -> Result<Hunk, IngestError> {
    let rest = line
        .strip_prefix("@@ -")
        .ok_or_else(|| malformed(line_no, "bad hunk header"))?;
    let (ranges, section) = rest
        .split_once(" @@")
        .ok_or_else(|| malformed(line_no, "unterminated hunk header"))?;
    let (pre, post) = ranges
        .split_once(" +")
        .ok_or_else(|| malformed(line_no, "hunk header missing post range"))?;
    let (pre_start, pre_len) = parse_range(pre, line_no)?;
    let (post_start, post_len) = parse_range(post, line_no)?;
    Ok(Hunk {
        pre_start,
        pre_len,
        post_start,
        post_len,
        section: section.trim().to_string(),
        lines: Vec::new(),
    })
}

fn strip_diff_path(raw: &str) -> Option<String> {
    let raw = raw.split('\t').next().unwrap_or(raw).trim_end_matches('\r');
    if raw == "/dev/null" {
        return None;
    }
    let p = raw
        .strip_prefix("a/")
        .or_else(|| raw.strip_prefix("b/"))
        .unwrap_or(raw);
    Some(p.to_string())
}

/// Parses a (possibly multi-file) unified diff in `git diff` or `diff -u`
/// form. Text before the first file header is ignored, so `git
/// format-patch` output is accepted as-is.
pub fn parse_unified_diff(text: &str) -> Result<Vec<FilePatch>, IngestError> {
    let mut files: Vec<FilePatch> = Vec::new();
    let mut current: Option<FilePatch> = None;
    let lines: Vec<&str> = if text.is_empty() {
        Vec::new()
    } else {
        let mut v: Vec<&str> = text.split('\n').collect();
        if text.ends_with('\n') {
            v.pop();
        }
        v
    };

    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let line_no = i + 1;
        if let Some(rest) = line.strip_prefix("diff --git ") {
            if let Some(done) = current.take() {
                files.push(done);
            }
            let path = rest
                .rsplit_once(" b/")
                .map(|(_, b)| b.trim_end_matches('\r').to_string())
                .unwrap_or_default();
            current = Some(FilePatch {
                path,
                old_path: None,
                is_new: false,
                is_deleted: false,
                hunks: Vec::new(),
            });
            i += 1;
            continue;
        }
        if line.starts_with("Binary files ") || line.starts_with("GIT binary patch") {
            return Err(malformed(line_no, "binary file changes are not supported"));
        }
        if let Some(rest) = line.strip_prefix("--- ") {
            // A `---` header outside a hunk starts (or continues) a file block.
            let next = lines.get(i + 1).copied().unwrap_or("");
            if let Some(post_raw) = next.strip_prefix("+++ ") {
                let starts_new_block = match &current {
                    None => true,
                    Some(f) => !f.hunks.is_empty(),
                };
                if starts_new_block {
                    if let Some(done) = current.take() {
                        files.push(done);
                    }
                    current = Some(FilePatch {
                        path: String::new(),
                        old_path: None,
                        is_new: false,
                        is_deleted: false,
                        hunks: Vec::new(),
                    });
                }
                let file = current.as_mut().expect("file block just ensured");
                let old = strip_diff_path(rest);
                let new = strip_diff_path(post_raw);
                file.is_new = old.is_none();
                file.is_deleted = new.is_none();
                match (old, new) {
                    (Some(o), Some(n)) => {
                        if o != n {
                            file.old_path = Some(o);
                        }
                        file.path = n;
                    }
                    (None, Some(n)) => file.path = n,
                    (Some(o), None) => file.path = o,
                    (None, None) => {
                        return Err(malformed(line_no, "both sides are /dev/null"));
                    }
                }
                i += 2;
                continue;
            }
        }
        if line.starts_with("@@ ") {
            let Some(file) = current.as_mut() else {
                return Err(malformed(line_no, "hunk before any file header"));
            };
            if file.path.is_empty() {
                return Err(malformed(line_no, "hunk before ---/+++ headers"));
            }
            let mut hunk = parse_hunk_header(line, line_no)?;
            let (mut pre_seen, mut post_seen) = (0usize, 0usize);
            i += 1;
            while pre_seen < hunk.pre_len || post_seen < hunk.post_len {
                let Some(&body) = lines.get(i) else {
                    return Err(malformed(line_no, "hunk truncated before its line counts"));
                };
                let (marker, text) = match body.chars().next() {
                    Some(' ') => (LineMarker::Context, &body[1..]),
                    Some('-') => (LineMarker::Deleted, &body[1..]),
                    Some('+') => (LineMarker::Added, &body[1..]),
                    Some('\\') => {
                        if let Some(last) = hunk.lines.last_mut() {
                            last.no_newline = true;
                        }
                        i += 1;
                        continue;
                    }
                    // Some tools strip the single space of empty context lines.
                    None => (LineMarker::Context, ""),
                    Some(_) => {
                        return Err(malformed(
                            i + 1,
                            format!(
                                "unexpected line inside hunk (saw {pre_seen}/{} pre, {post_seen}/{} post)",
                                hunk.pre_len, hunk.post_len
                            ),
                        ));
                    }
                };
                match marker {
                    LineMarker::Context => {
                        pre_seen += 1;
                        post_seen += 1;
                    }
                    LineMarker::Deleted => pre_seen += 1,
                    LineMarker::Added => post_seen += 1,
                }
                if pre_seen > hunk.pre_len || post_seen > hunk.post_len {
                    return Err(malformed(
                        i + 1,
                        format!(
                            "hunk lines exceed header counts -{},{} +{},{}",
                            hunk.pre_start, hunk.pre_len, hunk.post_start, hunk.post_len
                        ),
                    ));
                }
                hunk.lines.push(HunkLine {
                    marker,
                    text: text.to_string(),
                    no_newline: false,
                });
                i += 1;
            }
            if let Some(&next) = lines.get(i) {
                if next.starts_with('\\') {
                    if let Some(last) = hunk.lines.last_mut() {
                        last.no_newline = true;
                    }
                    i += 1;
                }
            }
            hunk.validate()?;
            file.hunks.push(hunk);
            continue;
        }
        // Metadata (index, mode, similarity) and commit preamble.
        if let Some(f) = current.as_mut() {
            if line.starts_with("new file mode") {
                f.is_new = true;
            } else if line.starts_with("deleted file mode") {
                f.is_deleted = true;
            }
        }
        i += 1;
    }
    if let Some(done) = current.take() {
        files.push(done);
    }
    for f in &files {
        if f.path.is_empty() {
            return Err(IngestError::MalformedDiff("file block without a path".into()));
        }
        check_hunk_order(f)?;
    }
    Ok(files)
}

fn check_hunk_order(f: &FilePatch) -> Result<(), IngestError> {
    let mut next_free = 1usize;
    for h in &f.hunks {
        let first = h.pre_first_line();
        if first < next_free {
            return Err(IngestError::MalformedDiff(format!(
                "{}: hunks overlap or are out of order",
                f.path
            )));
        }
        next_free = first + h.pre_len;
    }
    Ok(())
}

/// Splits content into lines on `\n`, reporting whether the final line was
/// newline-terminated.
pub(crate) fn split_lines(content: &str) -> (Vec<&str>, bool) {
    if content.is_empty() {
        return (Vec::new(), true);
    }
    let mut v: Vec<&str> = content.split('\n').collect();
    let terminated = content.ends_with('\n');
    if terminated {
        v.pop();
    }
    (v, terminated)
}

/// Applies hunks to `pre`, checking that every context and deleted line
/// matches the pre-image exactly.
pub fn apply_hunks(pre: &str, hunks: &[Hunk]) -> Result<String, IngestError> {
    let (pre_lines, pre_terminated) = split_lines(pre);
    let mut out: Vec<&str> = Vec::with_capacity(pre_lines.len());
    let mut cursor = 0usize; // 0-based index of next unconsumed pre line
    let mut last_terminated = pre_terminated;
    for h in hunks {
        h.validate()?;
        let start = h.pre_first_line() - 1;
        if start < cursor || start > pre_lines.len() {
            return Err(IngestError::MalformedDiff(format!(
                "hunk at pre line {} does not fit a {}-line file",
                h.pre_start,
                pre_lines.len()
            )));
        }
        out.extend_from_slice(&pre_lines[cursor..start]);
        cursor = start;
        for line in &h.lines {
            match line.marker {
                LineMarker::Context | LineMarker::Deleted => {
                    let actual = pre_lines.get(cursor).ok_or_else(|| {
                        IngestError::MalformedDiff(format!(
                            "hunk reads past end of pre-image at line {}",
                            cursor + 1
                        ))
                    })?;
                    if *actual != line.text {
                        return Err(IngestError::MalformedDiff(format!(
                            "pre-image mismatch at line {}: expected {:?}, found {:?}",
                            cursor + 1,
                            line.text,
                            actual
                        )));
                    }
                    cursor += 1;
                    if line.marker == LineMarker::Context {
                        out.push(actual);
                    }
                }
                LineMarker::Added => out.push(&line.text),
            }
        }
        // Newline state of the post-image tail if this hunk reaches EOF.
        let post_tail = h.lines.iter().rev().find(|l| l.marker != LineMarker::Deleted);
        if cursor == pre_lines.len() {
            if let Some(l) = post_tail {
                last_terminated = !l.no_newline;
            }
        }
    }
    out.extend_from_slice(&pre_lines[cursor..]);
    if cursor < pre_lines.len() {
        last_terminated = pre_terminated;
    }
    let mut result = out.join("\n");
    if !out.is_empty() && last_terminated {
        result.push('\n');
    }
    Ok(result)
}

/// Line-level view of one file's change.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ChangedLines {
    /// Pre-version line numbers removed by the change.
    pub deleted: BTreeSet<usize>,
    /// Post-version line numbers introduced by the change.
    pub added: BTreeSet<usize>,
    /// Pre→post map of the context lines shown inside hunks.
    pub context: BTreeMap<usize, usize>,
    /// Pre→post map of every unchanged line in the file, hunk context and
    /// untouched regions alike.
    pub unchanged: BTreeMap<usize, usize>,
}

impl ChangedLines {
    pub fn is_empty(&self) -> bool {
        self.deleted.is_empty() && self.added.is_empty()
    }
}

pub(crate) fn changed_lines_from(hunks: &[Hunk], pre_line_count: usize) -> ChangedLines {
    let mut out = ChangedLines::default();
    // Offset between post and pre numbering outside of hunks.
    let mut pre_next = 1usize;
    let mut shift: isize = 0;
    for h in hunks {
        let mut p = h.pre_first_line();
        let mut q = h.post_first_line();
        while pre_next < p {
            out.unchanged
                .insert(pre_next, (pre_next as isize + shift) as usize);
            pre_next += 1;
        }
        for line in &h.lines {
            match line.marker {
                LineMarker::Context => {
                    out.context.insert(p, q);
                    out.unchanged.insert(p, q);
                    p += 1;
                    q += 1;
                }
                LineMarker::Deleted => {
                    out.deleted.insert(p);
                    p += 1;
                }
                LineMarker::Added => {
                    out.added.insert(q);
                    q += 1;
                }
            }
        }
        pre_next = p;
        shift = q as isize - p as isize;
    }
    while pre_next <= pre_line_count {
        out.unchanged
            .insert(pre_next, (pre_next as isize + shift) as usize);
        pre_next += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hunk_text(header: &str, body: &[&str]) -> String {
        let mut s = String::from("--- a/f.py\n+++ b/f.py\n");
        s.push_str(header);
        s.push('\n');
        for l in body {
            s.push_str(l);
            s.push('\n');
        }
        s
    }

    #[test]
    fn empty_input_yields_no_files() {
        assert!(parse_unified_diff("").unwrap().is_empty());
    }

    #[test]
    fn insertion_hunk_arithmetic() {
        let text = hunk_text("@@ -3,2 +3,3 @@", &[" a", " b", "+c"]);
        let files = parse_unified_diff(&text).unwrap();
        let h = &files[0].hunks[0];
        let cl = changed_lines_from(&files[0].hunks, 4);
        assert_eq!(h.lines.len(), 3);
        assert!(cl.deleted.is_empty());
        assert_eq!(cl.added, BTreeSet::from([5]));
        assert_eq!(cl.context, BTreeMap::from([(3, 3), (4, 4)]));
    }

    #[test]
    fn count_mismatch_is_rejected() {
        let text = hunk_text("@@ -10,2 +10,3 @@", &[" x", "-y", "+z", " w"]);
        assert!(matches!(
            parse_unified_diff(&text),
            Err(IngestError::MalformedDiff(_))
        ));
    }

    #[test]
    fn truncated_hunk_is_rejected() {
        let text = hunk_text("@@ -1,4 +1,4 @@", &[" a", "-b", "+c"]);
        assert!(parse_unified_diff(&text).is_err());
    }

    #[test]
    fn bad_header_is_rejected() {
        let text = hunk_text("@@ -x,2 +1,2 @@", &[" a", " b"]);
        assert!(parse_unified_diff(&text).is_err());
    }

    #[test]
    fn binary_is_rejected() {
        let text = "diff --git a/img.png b/img.png\nindex 1..2 100644\nBinary files a/img.png and b/img.png differ\n";
        assert!(parse_unified_diff(text).is_err());
    }

    #[test]
    fn new_file_and_no_newline_marker() {
        let text = "diff --git a/n.py b/n.py\nnew file mode 100644\n--- /dev/null\n+++ b/n.py\n@@ -0,0 +1,2 @@\n+x = 1\n+y = 2\n\\ No newline at end of file\n";
        let files = parse_unified_diff(text).unwrap();
        assert!(files[0].is_new);
        let post = apply_hunks("", &files[0].hunks).unwrap();
        assert_eq!(post, "x = 1\ny = 2");
    }

    #[test]
    fn apply_rejects_context_mismatch() {
        let text = hunk_text("@@ -1,2 +1,2 @@", &[" a", "-b", "+c"]);
        let files = parse_unified_diff(&text).unwrap();
        let hunks = &files[0].hunks;
        assert_eq!(apply_hunks("a\nb\n", hunks).unwrap(), "a\nc\n");
        assert!(apply_hunks("a\nX\n", hunks).is_err());
    }

    #[test]
    fn multi_file_order_is_preserved() {
        let text = "diff --git a/z.py b/z.py\n--- a/z.py\n+++ b/z.py\n@@ -1 +1 @@\n-a\n+b\ndiff --git a/a.py b/a.py\n--- a/a.py\n+++ b/a.py\n@@ -1 +1 @@\n-c\n+d\n";
        let files = parse_unified_diff(text).unwrap();
        let paths: Vec<_> = files.iter().map(|f| f.path.as_str()).collect();
        assert_eq!(paths, ["z.py", "a.py"]);
    }

    #[test]
    fn plain_diff_u_without_git_header() {
        let text = "--- f.py\t2020-01-01\n+++ f.py\t2020-01-02\n@@ -1 +1 @@\n-a\n+b\n--- g.py\n+++ g.py\n@@ -1 +1 @@\n-c\n+d\n";
        let files = parse_unified_diff(text).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(files[1].path, "g.py");
    }

    #[test]
    fn unchanged_map_spans_untouched_regions() {
        // 6-line file, line 3 replaced by two lines.
        let h = Hunk {
            pre_start: 2,
            pre_len: 3,
            post_start: 2,
            post_len: 4,
            section: String::new(),
            lines: vec![
                HunkLine { marker: LineMarker::Context, text: "b".into(), no_newline: false },
                HunkLine { marker: LineMarker::Deleted, text: "c".into(), no_newline: false },
                HunkLine { marker: LineMarker::Added, text: "c1".into(), no_newline: false },
                HunkLine { marker: LineMarker::Added, text: "c2".into(), no_newline: false },
                HunkLine { marker: LineMarker::Context, text: "d".into(), no_newline: false },
            ],
        };
        let cl = changed_lines_from(&[h], 6);
        assert_eq!(
            cl.unchanged,
            BTreeMap::from([(1, 1), (2, 2), (4, 5), (5, 6), (6, 7)])
        );
        assert_eq!(cl.deleted, BTreeSet::from([3]));
        assert_eq!(cl.added, BTreeSet::from([3, 4]));
    }

    #[test]
    fn sparse_contents_place_lines_by_number() {
        let text = hunk_text("@@ -3,2 +3,1 @@", &[" a", "-b"]);
        let files = parse_unified_diff(&text).unwrap();
        let (pre, post) = files[0].sparse_contents();
        assert_eq!(pre, "\n\na\nb\n");
        assert_eq!(post, "\n\na\n");
        assert_eq!(apply_hunks(&pre, &files[0].hunks).unwrap(), post);
    }
}
