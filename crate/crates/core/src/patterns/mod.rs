// SPDX-License-Identifier: Apache-2.0

//! Rule-based assignment of security fixes to fix-pattern categories.
//!
//! Rules run in a fixed priority order and the first category with any
//! hit wins:
//!
//! | id  | category         | fires on |
//! |-----|------------------|----------|
//! | R1a | SanityCheck      | added `if`/`elif`/`while`/`assert` line |
//! | R1b | SanityCheck      | rewritten condition of a header or `x if c else y` |
//! | R2  | ApiUsage         | added call/import of a secure API the old line lacked |
//! | R3a | RegexUpdate      | changed literal fed to a match or substitute call |
//! | R3b | RegexUpdate      | new `replace`/`sub` of a quote or backslash |
//! | R4a | SecurityProperty | `True`/`False` swapped |
//! | R4b | SecurityProperty | argument or collection element added |
//! | R4c | SecurityProperty | decorator added above an unchanged `def` |

mod changes;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{CommitBundle, LineMarker};
use crate::pycpg::lexer::{Token, TokenKind};
use changes::{called_names, imported_names, Block, CodeLine, FileView};

#[derive(Debug, Error)]
pub enum PatternError {
    #[error("no tagged commits to report on")]
    EmptyCorpus,
    #[error("unknown pattern category {0:?}")]
    UnknownCategory(String),
    #[error("API table line {line}: {message}")]
    BadApiTable { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PatternError {
    pub fn code(&self) -> &'static str {
        match self {
            PatternError::EmptyCorpus => "EmptyCorpus",
            PatternError::UnknownCategory(_) => "UnknownCategory",
            PatternError::BadApiTable { .. } => "BadApiTable",
            PatternError::Io(_) => "Io",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternCategory {
    SanityCheck,
    ApiUsage,
    RegexUpdate,
    SecurityProperty,
    Other,
}

impl PatternCategory {
    /// Every category in rule priority order.
    pub const ALL: [PatternCategory; 5] = [
        PatternCategory::SanityCheck,
        PatternCategory::ApiUsage,
        PatternCategory::RegexUpdate,
        PatternCategory::SecurityProperty,
        PatternCategory::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            PatternCategory::SanityCheck => "SanityCheck",
            PatternCategory::ApiUsage => "ApiUsage",
            PatternCategory::RegexUpdate => "RegexUpdate",
            PatternCategory::SecurityProperty => "SecurityProperty",
            PatternCategory::Other => "Other",
        }
    }
}

impl fmt::Display for PatternCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PatternCategory {
    type Err = PatternError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        PatternCategory::ALL
            .into_iter()
            .find(|c| c.as_str() == s.trim())
            .ok_or_else(|| PatternError::UnknownCategory(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Evidence {
    pub file: String,
    pub line: usize,
    pub rule_id: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternLabel {
    pub category: PatternCategory,
    pub evidence: Vec<Evidence>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecureApi {
    pub name: String,
    pub note: String,
}

/// Dotted API names that count as adopting a secure API. A module name
/// (`subprocess`) also covers everything under it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SecureApiTable {
    pub entries: Vec<SecureApi>,
}

const DEFAULT_APIS: &[(&str, &str)] = &[
    ("re.escape", "regular expression escaping"),
    ("shlex.quote", "shell argument quoting"),
    ("subprocess", "command execution without a shell"),
    ("yaml.safe_load", "YAML loading without object construction"),
    ("werkzeug.utils.safe_join", "path joining inside a base directory"),
    ("werkzeug.utils.secure_filename", "file name sanitizing"),
    ("django.utils.html.escape", "HTML escaping"),
    ("html.unescape", "HTML entity handling"),
    ("parser.quote", "URL quoting"),
    ("request.server.escape", "HTML escaping"),
];

impl Default for SecureApiTable {
    fn default() -> Self {
        SecureApiTable {
            entries: DEFAULT_APIS
                .iter()
                .map(|(n, note)| SecureApi {
                    name: n.to_string(),
                    note: note.to_string(),
                })
                .collect(),
        }
    }
}

impl SecureApiTable {
    /// One `name<TAB>note` line per entry (note optional); `#` comments.
    pub fn parse(text: &str) -> Result<Self, PatternError> {
        let mut entries: Vec<SecureApi> = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            let (name, note) = line.split_once('\t').unwrap_or((line, ""));
            let name = name.trim();
            let valid = name.split('.').all(|p| !p.is_empty() && p.chars().all(|c| c.is_alphanumeric() || c == '_'));
            if !valid {
                return Err(PatternError::BadApiTable {
                    line: i + 1,
                    message: format!("{name:?} is not a dotted name"),
                });
            }
            if entries.iter().any(|e| e.name == name) {
                return Err(PatternError::BadApiTable {
                    line: i + 1,
                    message: format!("duplicate entry {name}"),
                });
            }
            entries.push(SecureApi {
                name: name.to_string(),
                note: note.trim().to_string(),
            });
        }
        Ok(SecureApiTable { entries })
    }

    pub fn load(path: &Path) -> Result<Self, PatternError> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn to_text(&self) -> String {
        self.entries.iter().map(|e| format!("{}\t{}\n", e.name, e.note)).collect()
    }

    /// Entry covering a fully qualified name.
    pub fn lookup(&self, dotted: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| dotted == e.name || dotted.strip_prefix(e.name.as_str()).is_some_and(|r| r.starts_with('.')))
            .map(|e| e.name.as_str())
    }
}

fn condition_text(toks: &[Token]) -> Option<String> {
    let join = |ts: &[Token]| ts.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
    let first = toks.first()?;
    if ["if", "elif", "while", "assert"].iter().any(|k| first.is_name(k)) {
        let end = toks.iter().rposition(|t| t.is_op(":")).unwrap_or(toks.len());
        return Some(join(&toks[1..end.max(1)]));
    }
    None
}

/// Condition of an inline `a if c else b`.
fn ternary_condition(toks: &[Token]) -> Option<String> {
    let i = toks.iter().skip(1).position(|t| t.is_name("if"))? + 1;
    let j = toks[i..].iter().position(|t| t.is_name("else"))? + i;
    Some(toks[i + 1..j].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" "))
}

const MATCH_FUNCTIONS: &[&str] = &["re.match", "re.search", "re.sub", "re.subn", "re.compile", "re.fullmatch", "re.findall", "re.finditer", "re.split"];
const MATCH_METHODS: &[&str] = &["sub", "subn", "match", "search", "fullmatch", "findall", "finditer", "replace", "translate"];

/// Argument token ranges of match/substitute calls on a line.
fn match_call_args(toks: &[Token]) -> Vec<&[Token]> {
    let mut out = Vec::new();
    for i in 0..toks.len() {
        let is_method = i > 0
            && toks[i - 1].is_op(".")
            && toks[i].kind == TokenKind::Name
            && MATCH_METHODS.contains(&toks[i].text.as_str());
        let is_function = toks[i].is_name("re")
            && toks.get(i + 1).is_some_and(|t| t.is_op("."))
            && toks.get(i + 2).is_some_and(|t| MATCH_FUNCTIONS.contains(&format!("re.{}", t.text).as_str()));
        let open = if is_method {
            i + 1
        } else if is_function {
            i + 3
        } else {
            continue;
        };
        if !toks.get(open).is_some_and(|t| t.is_op("(")) {
            continue;
        }
        let mut depth = 0;
        for (k, t) in toks.iter().enumerate().skip(open) {
            match t.text.as_str() {
                "(" | "[" | "{" if t.kind == TokenKind::Op => depth += 1,
                ")" | "]" | "}" if t.kind == TokenKind::Op => {
                    depth -= 1;
                    if depth == 0 {
                        out.push(&toks[open + 1..k]);
                        break;
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// Target of `name = <expr>`.
fn assigned_name(toks: &[Token]) -> Option<&str> {
    match toks {
        [n, eq, ..] if n.kind == TokenKind::Name && eq.is_op("=") => Some(n.text.as_str()),
        _ => None,
    }
}

fn is_literal(t: &Token) -> bool {
    matches!(t.kind, TokenKind::Str | TokenKind::Number) || ["True", "False", "None"].iter().any(|k| t.is_name(k))
}

/// `(method, first literal)` of substitutions whose first argument holds
/// a quote or backslash.
fn quote_substitutions(toks: &[Token]) -> Vec<String> {
    match_call_args(toks)
        .into_iter()
        .filter_map(|args| {
            let first = args.first().filter(|t| t.kind == TokenKind::Str)?;
            let body = first.str_body();
            (body.contains('\'') || body.contains('"') || body.contains('\\')).then(|| first.text.clone())
        })
        .collect()
}

struct Tagger<'a> {
    table: &'a SecureApiTable,
    hits: Vec<(PatternCategory, Evidence)>,
}

impl Tagger<'_> {
    fn hit(&mut self, cat: PatternCategory, file: &str, line: usize, rule: &str) {
        self.hits.push((
            cat,
            Evidence {
                file: file.to_string(),
                line,
                rule_id: rule.to_string(),
            },
        ));
    }

    fn sanity(&mut self, f: &FileView, b: &Block) {
        for a in b.added_code() {
            let old = b.counterpart(a);
            if let Some(cond) = condition_text(&a.toks) {
                match old.and_then(|o| condition_text(&o.toks)) {
                    Some(prev) if prev != cond => self.hit(PatternCategory::SanityCheck, &f.path, a.no, "R1b"),
                    Some(_) => {}
                    None => self.hit(PatternCategory::SanityCheck, &f.path, a.no, "R1a"),
                }
            } else if let (Some(cond), Some(prev)) = (ternary_condition(&a.toks), old.and_then(|o| ternary_condition(&o.toks))) {
                if cond != prev {
                    self.hit(PatternCategory::SanityCheck, &f.path, a.no, "R1b");
                }
            }
        }
    }

    fn secure_apis(&self, f: &FileView, line: &CodeLine) -> Vec<String> {
        let mut names = called_names(&line.toks, &f.aliases);
        names.extend(imported_names(&line.toks));
        let mut apis: Vec<String> = names.iter().filter_map(|n| self.table.lookup(n)).map(str::to_string).collect();
        apis.sort();
        apis.dedup();
        apis
    }

    fn api_usage(&mut self, f: &FileView, b: &Block) {
        for a in b.added_code() {
            let apis = self.secure_apis(f, a);
            if apis.is_empty() {
                continue;
            }
            let before: Vec<String> = match b.counterpart(a) {
                Some(o) => self.secure_apis(f, o),
                None => b.deleted.iter().flat_map(|d| self.secure_apis(f, d)).collect(),
            };
            if apis.iter().any(|api| !before.contains(api)) {
                self.hit(PatternCategory::ApiUsage, &f.path, a.no, "R2");
            }
        }
    }

    fn regex_update(&mut self, f: &FileView, b: &Block) {
        for a in b.added_code() {
            let old = b.counterpart(a);
            if let Some(o) = old {
                if o.literals() != a.literals() && self.literal_feeds_matcher(f, a) {
                    self.hit(PatternCategory::RegexUpdate, &f.path, a.no, "R3a");
                    continue;
                }
            }
            let subs = quote_substitutions(&a.toks);
            let seen: Vec<String> = b.deleted.iter().flat_map(|d| quote_substitutions(&d.toks)).collect();
            if subs.iter().any(|s| !seen.contains(s)) {
                self.hit(PatternCategory::RegexUpdate, &f.path, a.no, "R3b");
            }
        }
    }

    /// The line passes a string literal to a match/substitute call, or
    /// assigns one to a name later passed to such a call.
    fn literal_feeds_matcher(&self, f: &FileView, line: &CodeLine) -> bool {
        if match_call_args(&line.toks).iter().any(|args| args.iter().any(|t| t.kind == TokenKind::Str)) {
            return true;
        }
        let Some(name) = assigned_name(&line.toks) else {
            return false;
        };
        if !line.toks.iter().any(|t| t.kind == TokenKind::Str) {
            return false;
        }
        f.post_lines
            .iter()
            .any(|l| match_call_args(&l.toks).iter().any(|args| args.iter().any(|t| t.is_name(name))))
    }

    fn security_property(&mut self, f: &FileView, b: &Block) {
        for a in b.added_code() {
            let old = b.counterpart(a);
            if let Some(o) = old {
                if flag_flipped(&o.toks, &a.toks) {
                    self.hit(PatternCategory::SecurityProperty, &f.path, a.no, "R4a");
                    continue;
                }
                if argument_added(&o.toks, &a.toks) {
                    self.hit(PatternCategory::SecurityProperty, &f.path, a.no, "R4b");
                    continue;
                }
            }
            if a.toks.first().is_some_and(|t| t.is_op("@")) && decorates_unchanged_def(b, a) {
                self.hit(PatternCategory::SecurityProperty, &f.path, a.no, "R4c");
                continue;
            }
            if old.is_none() && is_element_line(&a.toks) && inside_collection(b) {
                self.hit(PatternCategory::SecurityProperty, &f.path, a.no, "R4b");
            }
        }
    }
}

fn flag_flipped(old: &[Token], new: &[Token]) -> bool {
    if old.len() != new.len() {
        return false;
    }
    let mut flips = 0;
    for (o, n) in old.iter().zip(new) {
        if o.text == n.text {
            continue;
        }
        let pair = (o.text.as_str(), n.text.as_str());
        if o.kind == TokenKind::Name && matches!(pair, ("True", "False") | ("False", "True")) {
            flips += 1;
        } else {
            return false;
        }
    }
    flips > 0
}

/// `new` is `old` with extra comma-separated items inside brackets.
fn argument_added(old: &[Token], new: &[Token]) -> bool {
    if new.len() <= old.len() {
        return false;
    }
    let mut k = 0;
    let mut depth = 0i32;
    let mut extra_comma_inside = false;
    for t in new {
        let matched = k < old.len() && old[k].text == t.text;
        if matched {
            k += 1;
        } else if t.is_op(",") && depth > 0 {
            extra_comma_inside = true;
        }
        if t.kind == TokenKind::Op {
            match t.text.as_str() {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
        }
    }
    k == old.len() && extra_comma_inside
}

fn decorates_unchanged_def(b: &Block, deco: &CodeLine) -> bool {
    let later_added = b.added.iter().skip_while(|l| l.no != deco.no).skip(1);
    for l in later_added.filter(|l| l.is_code()) {
        if !l.toks.first().is_some_and(|t| t.is_op("@")) {
            return false;
        }
    }
    b.following
        .iter()
        .filter(|(_, l)| l.is_code())
        .find(|(_, l)| !l.toks.first().is_some_and(|t| t.is_op("@")))
        .is_some_and(|(m, l)| *m == LineMarker::Context && l.starts_with_name(&["def"]))
}

/// A line holding only literal items or `name=literal` keyword items.
fn is_element_line(toks: &[Token]) -> bool {
    let items: Vec<&[Token]> = toks.split(|t| t.is_op(",")).filter(|s| !s.is_empty()).collect();
    !items.is_empty()
        && items.iter().all(|item| match item {
            [lit] => is_literal(lit),
            [name, eq, lit] => name.kind == TokenKind::Name && eq.is_op("=") && is_literal(lit),
            _ => false,
        })
}

fn inside_collection(b: &Block) -> bool {
    let continues = b.before.as_ref().is_some_and(|l| l.toks.last().is_some_and(|t| t.is_op(",") || t.is_op("(") || t.is_op("[") || t.is_op("{")));
    let closes = b.after().is_some_and(|l| l.toks.first().is_some_and(|t| t.is_op(")") || t.is_op("]") || t.is_op("}")));
    continues || closes
}

/// Category of a commit: the first rule group, in priority order, with a
/// hit in any changed file. Evidence lists every hit of that group.
pub fn tag(bundle: &CommitBundle, table: &SecureApiTable) -> PatternLabel {
    let views: Vec<FileView> = bundle.files.iter().map(FileView::new).collect();
    let mut t = Tagger { table, hits: Vec::new() };
    for category in &PatternCategory::ALL[..4] {
        for f in &views {
            for b in &f.blocks {
                match category {
                    PatternCategory::SanityCheck => t.sanity(f, b),
                    PatternCategory::ApiUsage => t.api_usage(f, b),
                    PatternCategory::RegexUpdate => t.regex_update(f, b),
                    _ => t.security_property(f, b),
                }
            }
        }
        if !t.hits.is_empty() {
            return PatternLabel {
                category: *category,
                evidence: t.hits.into_iter().map(|(_, e)| e).collect(),
            };
        }
    }
    PatternLabel {
        category: PatternCategory::Other,
        evidence: Vec::new(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub category: PatternCategory,
    pub count: u64,
    /// Percentage of the total.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternReport {
    pub total: u64,
    pub rows: Vec<ReportRow>,
}

impl PatternReport {
    /// Rows in the given order; proportions are percentages of the sum.
    pub fn from_counts(counts: &[(PatternCategory, u64)]) -> Result<Self, PatternError> {
        let total: u64 = counts.iter().map(|(_, c)| c).sum();
        if total == 0 {
            return Err(PatternError::EmptyCorpus);
        }
        Ok(PatternReport {
            total,
            rows: counts
                .iter()
                .map(|&(category, count)| ReportRow {
                    category,
                    count,
                    proportion: 100.0 * count as f64 / total as f64,
                })
                .collect(),
        })
    }

    /// `category<TAB>count<TAB>proportion` with a header row; proportions
    /// to two decimals.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("category\tcount\tproportion\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{}\t{:.2}\n", r.category, r.count, r.proportion));
        }
        s
    }
}

/// Distribution over all five categories, in priority order.
pub fn report(labels: &[PatternCategory]) -> Result<PatternReport, PatternError> {
    let counts: Vec<(PatternCategory, u64)> = PatternCategory::ALL
        .iter()
        .map(|&c| (c, labels.iter().filter(|&&l| l == c).count() as u64))
        .collect();
    PatternReport::from_counts(&counts)
}
