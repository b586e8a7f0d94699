// SPDX-License-Identifier: Apache-2.0

//! Line-level view of a diff for the pattern rules: runs of deleted and
//! added lines with their surrounding context.

use std::collections::BTreeMap;

use similar::TextDiff;

use crate::ingest::{FileChange, LineMarker};
use crate::pycpg::lexer::{tokenize_fragment, Token, TokenKind};

#[derive(Debug, Clone)]
pub(crate) struct CodeLine {
    /// Post-image line for added and context lines, pre-image line for
    /// deleted ones.
    pub no: usize,
    pub text: String,
    pub toks: Vec<Token>,
}

impl CodeLine {
    fn new(no: usize, text: &str) -> Self {
        CodeLine {
            no,
            text: text.to_string(),
            toks: tokenize_fragment(text),
        }
    }

    /// Blank and comment-only lines carry no code.
    pub fn is_code(&self) -> bool {
        !self.toks.is_empty()
    }

    pub fn starts_with_name(&self, names: &[&str]) -> bool {
        let first = match self.toks.first() {
            Some(t) if t.is_name("async") => self.toks.get(1),
            t => t,
        };
        first.is_some_and(|t| t.kind == TokenKind::Name && names.contains(&t.text.as_str()))
    }

    pub fn literals(&self) -> Vec<&str> {
        let mut v: Vec<&str> = self.toks.iter().filter(|t| t.kind == TokenKind::Str).map(|t| t.text.as_str()).collect();
        v.sort_unstable();
        v
    }
}

/// Consecutive changed lines with the context lines on either side.
#[derive(Debug, Clone, Default)]
pub(crate) struct Block {
    pub deleted: Vec<CodeLine>,
    pub added: Vec<CodeLine>,
    /// Lines of the hunk after the block, context and changed, in order.
    pub following: Vec<(LineMarker, CodeLine)>,
    pub before: Option<CodeLine>,
}

impl Block {
    pub fn added_code(&self) -> impl Iterator<Item = &CodeLine> {
        self.added.iter().filter(|l| l.is_code())
    }

    /// Deleted line most similar to `added` (character ratio ≥ 0.5).
    pub fn counterpart(&self, added: &CodeLine) -> Option<&CodeLine> {
        self.deleted
            .iter()
            .filter(|d| d.is_code())
            .map(|d| (TextDiff::from_chars(d.text.trim(), added.text.trim()).ratio(), d))
            .filter(|(r, _)| *r >= 0.5)
            .max_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(_, d)| d)
    }

    /// First context line after the block.
    pub fn after(&self) -> Option<&CodeLine> {
        self.following.iter().find(|(m, _)| *m == LineMarker::Context).map(|(_, l)| l)
    }
}

/// One changed file as blocks, plus every visible line for lookups.
#[derive(Debug, Clone)]
pub(crate) struct FileView {
    pub path: String,
    pub blocks: Vec<Block>,
    /// Lines of the post image (full file when available).
    pub post_lines: Vec<CodeLine>,
    /// Local name → dotted module path, from imports in the post image.
    pub aliases: BTreeMap<String, String>,
}

impl FileView {
    pub fn new(fc: &FileChange) -> Self {
        let mut blocks = Vec::new();
        for h in &fc.hunks {
            let (mut pre, mut post) = (h.pre_start, h.post_start);
            let mut lines: Vec<(LineMarker, CodeLine)> = Vec::with_capacity(h.lines.len());
            for l in &h.lines {
                let no = match l.marker {
                    LineMarker::Deleted => pre,
                    _ => post,
                };
                lines.push((l.marker, CodeLine::new(no, &l.text)));
                match l.marker {
                    LineMarker::Context => {
                        pre += 1;
                        post += 1;
                    }
                    LineMarker::Deleted => pre += 1,
                    LineMarker::Added => post += 1,
                }
            }
            let mut i = 0;
            while i < lines.len() {
                if lines[i].0 == LineMarker::Context {
                    i += 1;
                    continue;
                }
                let mut b = Block {
                    before: lines[..i].iter().rev().find(|(m, _)| *m == LineMarker::Context).map(|(_, l)| l.clone()),
                    ..Block::default()
                };
                while i < lines.len() && lines[i].0 != LineMarker::Context {
                    let (m, l) = &lines[i];
                    if *m == LineMarker::Deleted {
                        b.deleted.push(l.clone());
                    } else {
                        b.added.push(l.clone());
                    }
                    i += 1;
                }
                b.following = lines[i..].to_vec();
                blocks.push(b);
            }
        }
        let post_lines: Vec<CodeLine> = if fc.post_content.is_empty() {
            blocks
                .iter()
                .flat_map(|b| b.added.iter().cloned().chain(b.following.iter().map(|(_, l)| l.clone())))
                .collect()
        } else {
            fc.post_content.lines().enumerate().map(|(i, t)| CodeLine::new(i + 1, t)).collect()
        };
        let mut aliases = BTreeMap::new();
        for l in &post_lines {
            collect_aliases(&l.toks, &mut aliases);
        }
        FileView {
            path: fc.path.clone(),
            blocks,
            post_lines,
            aliases,
        }
    }
}

/// Reads a dotted name starting at `i`; returns it and the index after.
pub(crate) fn dotted_at(toks: &[Token], mut i: usize) -> Option<(String, usize)> {
    let first = toks.get(i).filter(|t| t.kind == TokenKind::Name)?;
    let mut name = first.text.clone();
    i += 1;
    while toks.get(i).is_some_and(|t| t.is_op(".")) && toks.get(i + 1).is_some_and(|t| t.kind == TokenKind::Name) {
        name.push('.');
        name.push_str(&toks[i + 1].text);
        i += 2;
    }
    Some((name, i))
}

/// Dotted names a line imports, fully qualified (`from a import b` → `a.b`).
pub(crate) fn imported_names(toks: &[Token]) -> Vec<String> {
    let mut out = Vec::new();
    match toks.first() {
        Some(t) if t.is_name("import") => {
            let mut i = 1;
            while let Some((name, next)) = dotted_at(toks, i) {
                out.push(name);
                i = next;
                if toks.get(i).is_some_and(|t| t.is_name("as")) {
                    i += 2;
                }
                if !toks.get(i).is_some_and(|t| t.is_op(",")) {
                    break;
                }
                i += 1;
            }
        }
        Some(t) if t.is_name("from") => {
            let Some((module, mut i)) = dotted_at(toks, 1) else {
                return out;
            };
            if !toks.get(i).is_some_and(|t| t.is_name("import")) {
                return out;
            }
            i += 1;
            let mut after_as = false;
            for t in &toks[i..] {
                if t.is_name("as") {
                    after_as = true;
                } else if t.kind == TokenKind::Name {
                    if !after_as {
                        out.push(format!("{module}.{}", t.text));
                    }
                    after_as = false;
                }
            }
        }
        _ => {}
    }
    out
}

fn collect_aliases(toks: &[Token], aliases: &mut BTreeMap<String, String>) {
    match toks.first() {
        Some(t) if t.is_name("import") => {
            let mut i = 1;
            while let Some((name, next)) = dotted_at(toks, i) {
                i = next;
                if toks.get(i).is_some_and(|t| t.is_name("as")) {
                    if let Some(a) = toks.get(i + 1) {
                        aliases.insert(a.text.clone(), name.clone());
                    }
                    i += 2;
                }
                if !toks.get(i).is_some_and(|t| t.is_op(",")) {
                    break;
                }
                i += 1;
            }
        }
        Some(t) if t.is_name("from") => {
            let Some((module, i)) = dotted_at(toks, 1) else {
                return;
            };
            if !toks.get(i).is_some_and(|t| t.is_name("import")) {
                return;
            }
            let names: Vec<&Token> = toks[i + 1..].iter().filter(|t| t.kind == TokenKind::Name).collect();
            let mut k = 0;
            while k < names.len() {
                let original = &names[k].text;
                if names.get(k + 1).is_some_and(|t| t.text == "as") {
                    if let Some(alias) = names.get(k + 2) {
                        aliases.insert(alias.text.clone(), format!("{module}.{original}"));
                    }
                    k += 3;
                } else {
                    aliases.insert(original.clone(), format!("{module}.{original}"));
                    k += 1;
                }
            }
        }
        _ => {}
    }
}

/// Dotted names used in call position (`a.b(`), with the first component
/// resolved through `aliases`.
pub(crate) fn called_names(toks: &[Token], aliases: &BTreeMap<String, String>) -> Vec<String> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < toks.len() {
        let preceded_by_dot = i > 0 && toks[i - 1].is_op(".");
        if toks[i].kind == TokenKind::Name && !preceded_by_dot {
            if let Some((name, next)) = dotted_at(toks, i) {
                if toks.get(next).is_some_and(|t| t.is_op("(")) {
                    out.push(resolve(&name, aliases));
                }
                i = next;
                continue;
            }
        }
        i += 1;
    }
    out
}

pub(crate) fn resolve(name: &str, aliases: &BTreeMap<String, String>) -> String {
    let (head, rest) = match name.split_once('.') {
        Some((h, r)) => (h, Some(r)),
        None => (name, None),
    };
    match (aliases.get(head), rest) {
        (Some(full), Some(r)) => format!("{full}.{r}"),
        (Some(full), None) => full.clone(),
        (None, _) => name.to_string(),
    }
}
