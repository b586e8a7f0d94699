// SPDX-License-Identifier: Apache-2.0

//! Statement trees: one node per simple statement or compound header.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::lexer::{logical_lines, LogicalLine, Token, TokenKind};
use super::{CpgError, SyntaxError};
use crate::ingest::{LineRange, MODULE_UNIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StmtKind {
    /// Virtual root of the module-level unit.
    Module,
    Simple,
    If,
    Elif,
    Else,
    While,
    For,
    Try,
    Except,
    Finally,
    With,
    Def,
    Class,
    Match,
    Case,
}

impl StmtKind {
    pub fn is_clause(self) -> bool {
        matches!(self, StmtKind::Elif | StmtKind::Else | StmtKind::Except | StmtKind::Finally)
    }

    /// Headers whose body runs conditionally, repeatedly or under a handler.
    pub fn is_controlling(self) -> bool {
        matches!(
            self,
            StmtKind::If
                | StmtKind::Elif
                | StmtKind::Else
                | StmtKind::While
                | StmtKind::For
                | StmtKind::Try
                | StmtKind::Except
                | StmtKind::Finally
                | StmtKind::Match
                | StmtKind::Case
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stmt {
    pub id: usize,
    pub kind: StmtKind,
    pub parent: Option<usize>,
    pub children: Vec<usize>,
    pub depth: usize,
    pub span: LineRange,
    /// Exact source text; headers end at their colon.
    pub code: String,
    /// Statement tokens; for headers, everything before the colon.
    pub tokens: Vec<Token>,
    /// Decorator expressions (without `@`) of a def/class header.
    pub decorators: Vec<Vec<Token>>,
}

impl Stmt {
    /// `async def` / `async for` / `async with` report the inner keyword.
    pub fn keyword_offset(&self) -> usize {
        usize::from(self.tokens.first().is_some_and(|t| t.is_name("async")))
    }

    /// Name declared by a def/class header.
    pub fn declared_name(&self) -> Option<&str> {
        match self.kind {
            StmtKind::Def | StmtKind::Class => self
                .tokens
                .get(self.keyword_offset() + 1)
                .filter(|t| t.kind == TokenKind::Name)
                .map(|t| t.text.as_str()),
            _ => None,
        }
    }

    /// A bare string literal used as a statement (docstring).
    pub fn is_docstring(&self) -> bool {
        self.kind == StmtKind::Simple && !self.tokens.is_empty() && self.tokens.iter().all(|t| t.kind == TokenKind::Str)
    }
}

/// A parsed source file.
#[derive(Debug, Clone)]
pub struct Module {
    pub stmts: Vec<Stmt>,
    pub top: Vec<usize>,
    pub line_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UnitKind {
    Function,
    Module,
}

/// A code unit: a function or method, or the collection of module-level
/// statements outside any function.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitInfo {
    pub name: String,
    pub kind: UnitKind,
    /// Statement ids (into `Module::stmts`) in source order.
    pub members: Vec<usize>,
    /// Lines attributed to the unit, used to decide whether a change touches it.
    pub ranges: Vec<LineRange>,
}

/// The statements of a single unit, renumbered from 0 in source order.
/// Node 0 is the unit root: the def header, or a virtual module node.
#[derive(Debug, Clone)]
pub struct UnitTree {
    pub name: String,
    pub nodes: Vec<Stmt>,
}

impl UnitTree {
    pub fn root(&self) -> &Stmt {
        &self.nodes[0]
    }
}

fn colon_index(tokens: &[Token]) -> Option<usize> {
    let mut depth = 0i32;
    let mut lambdas = 0;
    for (i, t) in tokens.iter().enumerate() {
        if t.kind != TokenKind::Op {
            if depth == 0 && t.is_name("lambda") {
                lambdas += 1;
            }
            continue;
        }
        match t.text.as_str() {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            ":" if depth == 0 => {
                if lambdas > 0 {
                    lambdas -= 1;
                } else {
                    return Some(i);
                }
            }
            _ => {}
        }
    }
    None
}

fn header_kind(tokens: &[Token], in_match: bool) -> Option<StmtKind> {
    let first = tokens.first()?;
    if first.kind != TokenKind::Name {
        return None;
    }
    let kind = match first.text.as_str() {
        "if" => StmtKind::If,
        "elif" => StmtKind::Elif,
        "else" => StmtKind::Else,
        "while" => StmtKind::While,
        "for" => StmtKind::For,
        "try" => StmtKind::Try,
        "except" => StmtKind::Except,
        "finally" => StmtKind::Finally,
        "with" => StmtKind::With,
        "def" => StmtKind::Def,
        "class" => StmtKind::Class,
        "async" => match tokens.get(1).map(|t| t.text.as_str()) {
            Some("def") => StmtKind::Def,
            Some("for") => StmtKind::For,
            Some("with") => StmtKind::With,
            _ => return None,
        },
        "match" | "case" => {
            let opens_pattern = |t: &Token| {
                t.kind != TokenKind::Op || matches!(t.text.as_str(), "(" | "[" | "{" | "-" | "*")
            };
            let soft_ok = tokens.len() > 2
                && opens_pattern(&tokens[1])
                && colon_index(tokens) == Some(tokens.len() - 1);
            if !soft_ok {
                return None;
            }
            if first.text == "match" {
                StmtKind::Match
            } else if in_match {
                StmtKind::Case
            } else {
                return None;
            }
        }
        _ => return None,
    };
    Some(kind)
}

fn split_semicolons(tokens: &[Token]) -> Vec<&[Token]> {
    tokens
        .split(|t| t.is_op(";"))
        .filter(|s| !s.is_empty())
        .collect()
}

struct Parser<'a> {
    src: &'a str,
    lines: Vec<LogicalLine>,
    pos: usize,
    stmts: Vec<Stmt>,
}

impl<'a> Parser<'a> {
    fn error(&self, tok: &Token, msg: &str) -> SyntaxError {
        SyntaxError {
            line: tok.line,
            column: tok.col,
            message: msg.to_string(),
        }
    }

    fn push(&mut self, mut stmt: Stmt) -> usize {
        let id = self.stmts.len();
        stmt.id = id;
        if let Some(p) = stmt.parent {
            self.stmts[p].children.push(id);
        }
        self.stmts.push(stmt);
        id
    }

    fn simple(&mut self, tokens: &[Token], parent: Option<usize>, depth: usize) -> usize {
        let (first, last) = (&tokens[0], &tokens[tokens.len() - 1]);
        self.push(Stmt {
            id: 0,
            kind: StmtKind::Simple,
            parent,
            children: Vec::new(),
            depth,
            span: LineRange::new(first.line, last.end_line),
            code: self.src[first.start..last.end].to_string(),
            tokens: tokens.to_vec(),
            decorators: Vec::new(),
        })
    }

    fn parse_block(
        &mut self,
        indent: usize,
        parent: Option<usize>,
        depth: usize,
        in_match: bool,
    ) -> Result<Vec<usize>, SyntaxError> {
        let mut out = Vec::new();
        let mut last_compound: Option<usize> = None;
        while self.pos < self.lines.len() {
            let line = &self.lines[self.pos];
            if line.indent < indent {
                break;
            }
            if line.indent > indent {
                return Err(self.error(&line.tokens[0], "unexpected indent"));
            }
            let mut decorators = Vec::new();
            let mut deco_start: Option<Token> = None;
            while self.lines[self.pos].tokens[0].is_op("@") {
                let toks = self.lines[self.pos].tokens.clone();
                deco_start.get_or_insert_with(|| toks[0].clone());
                decorators.push(toks[1..].to_vec());
                self.pos += 1;
                let next = self.lines.get(self.pos);
                match next {
                    Some(l) if l.indent == indent => {}
                    _ => return Err(self.error(&toks[0], "decorator must precede a def or class")),
                }
            }
            let tokens = self.lines[self.pos].tokens.clone();
            self.pos += 1;
            let kind = header_kind(&tokens, in_match);
            if !decorators.is_empty() && !matches!(kind, Some(StmtKind::Def | StmtKind::Class)) {
                return Err(self.error(&tokens[0], "decorator must precede a def or class"));
            }
            let Some(kind) = kind else {
                for part in split_semicolons(&tokens) {
                    out.push(self.simple(part, parent, depth));
                }
                last_compound = None;
                continue;
            };
            let colon = colon_index(&tokens).ok_or_else(|| self.error(tokens.last().unwrap(), "expected ':'"))?;
            let (node_parent, node_depth) = if kind.is_clause() {
                let owner = last_compound
                    .filter(|&c| self.clause_allowed(c, kind))
                    .ok_or_else(|| self.error(&tokens[0], "invalid syntax: clause without matching statement"))?;
                (Some(owner), self.stmts[owner].depth + 1)
            } else {
                (parent, depth)
            };
            let start_tok = deco_start.as_ref().unwrap_or(&tokens[0]);
            let colon_tok = &tokens[colon];
            let id = self.push(Stmt {
                id: 0,
                kind,
                parent: node_parent,
                children: Vec::new(),
                depth: node_depth,
                span: LineRange::new(start_tok.line, colon_tok.end_line),
                code: self.src[start_tok.start..colon_tok.end].to_string(),
                tokens: tokens[..colon].to_vec(),
                decorators,
            });
            if !kind.is_clause() {
                out.push(id);
            }
            let inline = &tokens[colon + 1..];
            if !inline.is_empty() {
                for part in split_semicolons(inline) {
                    self.simple(part, Some(id), node_depth + 1);
                }
            } else {
                match self.lines.get(self.pos) {
                    Some(next) if next.indent > indent => {
                        let body_indent = next.indent;
                        self.parse_block(body_indent, Some(id), node_depth + 1, kind == StmtKind::Match)?;
                    }
                    _ => return Err(self.error(colon_tok, "expected an indented block")),
                }
            }
            if !kind.is_clause() {
                last_compound = matches!(kind, StmtKind::If | StmtKind::For | StmtKind::While | StmtKind::Try).then_some(id);
            }
        }
        Ok(out)
    }

    fn clause_allowed(&self, owner: usize, clause: StmtKind) -> bool {
        let o = &self.stmts[owner];
        let has = |k: StmtKind| o.children.iter().any(|&c| self.stmts[c].kind == k);
        match (o.kind, clause) {
            (StmtKind::If, StmtKind::Elif) => !has(StmtKind::Else),
            (StmtKind::If | StmtKind::For | StmtKind::While, StmtKind::Else) => !has(StmtKind::Else),
            (StmtKind::Try, StmtKind::Else) => has(StmtKind::Except) && !has(StmtKind::Else) && !has(StmtKind::Finally),
            (StmtKind::Try, StmtKind::Except) => !has(StmtKind::Else) && !has(StmtKind::Finally),
            (StmtKind::Try, StmtKind::Finally) => !has(StmtKind::Finally),
            _ => false,
        }
    }
}

/// Parses a whole source file into a statement tree.
pub fn parse_module(src: &str) -> Result<Module, SyntaxError> {
    let lines = logical_lines(src)?;
    if let Some(first) = lines.first() {
        if first.indent != 0 {
            return Err(SyntaxError {
                line: first.first_line(),
                column: 1,
                message: "unexpected indent".into(),
            });
        }
    }
    let mut p = Parser {
        src,
        lines,
        pos: 0,
        stmts: Vec::new(),
    };
    let top = p.parse_block(0, None, 0, false)?;
    for s in &p.stmts {
        if s.kind == StmtKind::Try
            && !s
                .children
                .iter()
                .any(|&c| matches!(p.stmts[c].kind, StmtKind::Except | StmtKind::Finally))
        {
            return Err(SyntaxError {
                line: s.span.start,
                column: 1,
                message: "expected 'except' or 'finally' block".into(),
            });
        }
    }
    let line_count = if src.is_empty() {
        0
    } else {
        src.split('\n').count() - usize::from(src.ends_with('\n'))
    };
    Ok(Module {
        stmts: p.stmts,
        top,
        line_count,
    })
}

impl Module {
    /// Last line covered by a statement and everything nested in it.
    pub fn subtree_end(&self, id: usize) -> usize {
        let s = &self.stmts[id];
        s.children
            .iter()
            .map(|&c| self.subtree_end(c))
            .max()
            .unwrap_or(s.span.end)
            .max(s.span.end)
    }

    fn descendants(&self, id: usize, out: &mut Vec<usize>) {
        out.push(id);
        for &c in &self.stmts[id].children {
            self.descendants(c, out);
        }
    }

    /// Functions and methods (qualified `Class.method`), then the module unit.
    /// Repeated names get a `#k` suffix in order of appearance.
    pub fn units(&self) -> Vec<UnitInfo> {
        let mut functions = Vec::new();
        let mut module_members = Vec::new();
        self.collect_units(&self.top, "", &mut functions, &mut module_members);
        let mut seen: HashMap<String, usize> = HashMap::new();
        for f in &mut functions {
            let n = seen.entry(f.name.clone()).or_insert(0);
            *n += 1;
            if *n > 1 {
                f.name = format!("{}#{}", f.name, n);
            }
        }
        if !module_members.is_empty() {
            module_members.sort_unstable();
            let ranges = module_members
                .iter()
                .map(|&i| &self.stmts[i])
                .filter(|s| !s.is_docstring())
                .map(|s| s.span)
                .collect();
            functions.push(UnitInfo {
                name: MODULE_UNIT.to_string(),
                kind: UnitKind::Module,
                members: module_members,
                ranges,
            });
        }
        functions
    }

    fn collect_units(&self, ids: &[usize], prefix: &str, functions: &mut Vec<UnitInfo>, module: &mut Vec<usize>) {
        for &id in ids {
            let s = &self.stmts[id];
            match s.kind {
                StmtKind::Def => {
                    let mut members = Vec::new();
                    self.descendants(id, &mut members);
                    functions.push(UnitInfo {
                        name: format!("{prefix}{}", s.declared_name().unwrap_or("<anonymous>")),
                        kind: UnitKind::Function,
                        members,
                        ranges: vec![LineRange::new(s.span.start, self.subtree_end(id))],
                    });
                }
                StmtKind::Class => {
                    module.push(id);
                    let inner = format!("{prefix}{}.", s.declared_name().unwrap_or("<anonymous>"));
                    self.collect_units(&s.children, &inner, functions, module);
                }
                _ => self.descendants(id, module),
            }
        }
    }

    /// Extracts one unit as a renumbered tree.
    pub fn unit_tree(&self, unit: &UnitInfo) -> UnitTree {
        let mut nodes = Vec::new();
        let mut map = HashMap::new();
        if unit.kind == UnitKind::Module {
            nodes.push(Stmt {
                id: 0,
                kind: StmtKind::Module,
                parent: None,
                children: Vec::new(),
                depth: 0,
                span: LineRange::new(1, self.line_count.max(1)),
                code: MODULE_UNIT.to_string(),
                tokens: Vec::new(),
                decorators: Vec::new(),
            });
        }
        for &sid in &unit.members {
            let s = &self.stmts[sid];
            let local = nodes.len();
            map.insert(sid, local);
            let parent = match s.parent.and_then(|p| map.get(&p).copied()) {
                Some(p) => Some(p),
                None if unit.kind == UnitKind::Module => Some(0),
                None => None,
            };
            let depth = parent.map(|p: usize| nodes[p].depth + 1).unwrap_or(0);
            let mut n = s.clone();
            n.id = local;
            n.parent = parent;
            n.children = Vec::new();
            n.depth = depth;
            if let Some(p) = parent {
                let pn: &mut Stmt = &mut nodes[p];
                pn.children.push(local);
            }
            nodes.push(n);
        }
        UnitTree {
            name: unit.name.clone(),
            nodes,
        }
    }
}

/// Parses `source` and returns the statement tree of the named unit.
pub fn parse_statements(source: &str, unit: &str) -> Result<UnitTree, CpgError> {
    let module = parse_module(source)?;
    let info = module
        .units()
        .into_iter()
        .find(|u| u.name == unit)
        .ok_or_else(|| CpgError::UnknownUnit(unit.to_string()))?;
    Ok(module.unit_tree(&info))
}
