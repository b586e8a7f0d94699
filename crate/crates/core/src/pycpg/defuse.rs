// SPDX-License-Identifier: Apache-2.0

//! Variable definitions and reads per statement.

use std::collections::BTreeSet;

use super::lexer::{fstring_fields, tokenize_fragment, Token, TokenKind};
use super::stmt::{Stmt, StmtKind};

const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue", "def", "del",
    "elif", "else", "except", "finally", "for", "from", "global", "if", "import", "in", "is", "lambda",
    "nonlocal", "not", "or", "pass", "raise", "return", "try", "while", "with", "yield",
];

const AUG_OPS: &[&str] = &[
    "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
];

/// What one statement defines and reads. For loop headers, `defs` is
/// empty and the loop targets live in `loop_defs`, bound on each iteration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Facts {
    pub defs: BTreeSet<String>,
    pub uses: BTreeSet<String>,
    pub loop_defs: BTreeSet<String>,
}

fn is_open(t: &Token) -> bool {
    t.kind == TokenKind::Op && matches!(t.text.as_str(), "(" | "[" | "{")
}

fn is_close(t: &Token) -> bool {
    t.kind == TokenKind::Op && matches!(t.text.as_str(), ")" | "]" | "}")
}

/// Index of the bracket closing the one opened at `open`.
fn matching(tokens: &[Token], open: usize) -> usize {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
            if depth == 0 {
                return i;
            }
        }
    }
    tokens.len().saturating_sub(1)
}

/// Splits at top-level tokens satisfying `pred`.
fn split_top(tokens: &[Token], pred: impl Fn(&Token) -> bool) -> Vec<&[Token]> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, t) in tokens.iter().enumerate() {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
        } else if depth == 0 && pred(t) {
            out.push(&tokens[start..i]);
            start = i + 1;
        }
    }
    out.push(&tokens[start..]);
    out
}

fn find_top(tokens: &[Token], pred: impl Fn(&Token) -> bool) -> Option<usize> {
    let mut depth = 0i32;
    for (i, t) in tokens.iter().enumerate() {
        if is_open(t) {
            depth += 1;
        } else if is_close(t) {
            depth -= 1;
        } else if depth == 0 && pred(t) {
            return Some(i);
        }
    }
    None
}

/// Names an expression reads. Attribute names, keyword-argument names,
/// lambda parameters and comprehension targets are not reads; walrus
/// targets are reported as definitions. Names inside f-string replacement
/// fields are reads.
pub fn expr_reads(tokens: &[Token], defs: &mut BTreeSet<String>, uses: &mut BTreeSet<String>) {
    let mut bound: BTreeSet<String> = BTreeSet::new();
    // Lambda parameters and comprehension targets.
    let mut i = 0;
    while i < tokens.len() {
        if tokens[i].is_name("lambda") {
            let mut j = i + 1;
            while j < tokens.len() && !tokens[j].is_op(":") {
                if tokens[j].kind == TokenKind::Name && !tokens.get(j.wrapping_sub(1)).is_some_and(|p| p.is_op("=")) {
                    bound.insert(tokens[j].text.clone());
                }
                j += 1;
            }
            i = j;
        } else if tokens[i].is_name("for") {
            let mut j = i + 1;
            while j < tokens.len() && !tokens[j].is_name("in") {
                if tokens[j].kind == TokenKind::Name {
                    bound.insert(tokens[j].text.clone());
                }
                j += 1;
            }
            i = j;
        } else {
            i += 1;
        }
    }
    let mut depth_stack: Vec<&str> = Vec::new();
    let mut skip_lambda_params = false;
    for (i, t) in tokens.iter().enumerate() {
        match t.kind {
            TokenKind::Op => {
                if is_open(t) {
                    depth_stack.push(t.text.as_str());
                } else if is_close(t) {
                    depth_stack.pop();
                } else if t.is_op(":") {
                    skip_lambda_params = false;
                }
            }
            TokenKind::Str => {
                if t.is_fstring() {
                    for field in fstring_fields(t.str_body()) {
                        expr_reads(&tokenize_fragment(&field), defs, uses);
                    }
                }
            }
            TokenKind::Number => {}
            TokenKind::Name => {
                if t.text == "lambda" {
                    skip_lambda_params = true;
                    continue;
                }
                if skip_lambda_params || KEYWORDS.contains(&t.text.as_str()) || bound.contains(&t.text) {
                    continue;
                }
                if i > 0 && tokens[i - 1].is_op(".") {
                    continue;
                }
                let next = tokens.get(i + 1);
                if next.is_some_and(|n| n.is_op(":=")) {
                    defs.insert(t.text.clone());
                    continue;
                }
                let in_call = depth_stack.last() == Some(&"(");
                if in_call && next.is_some_and(|n| n.is_op("=")) {
                    continue;
                }
                uses.insert(t.text.clone());
            }
        }
    }
}

/// Definitions (and base reads) of an assignment target list.
fn target_facts(tokens: &[Token], defs: &mut BTreeSet<String>, uses: &mut BTreeSet<String>) {
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if is_open(t) {
            let close = matching(tokens, i);
            target_facts(&tokens[i + 1..close], defs, uses);
            i = close + 1;
        } else if t.kind == TokenKind::Name && !KEYWORDS.contains(&t.text.as_str()) {
            let mut j = i + 1;
            let mut trailer = false;
            while j < tokens.len() {
                if tokens[j].is_op(".") {
                    j += 2;
                    trailer = true;
                } else if tokens[j].is_op("[") || tokens[j].is_op("(") {
                    let close = matching(tokens, j);
                    expr_reads(&tokens[j + 1..close], defs, uses);
                    j = close + 1;
                    trailer = true;
                } else {
                    break;
                }
            }
            defs.insert(t.text.clone());
            if trailer {
                uses.insert(t.text.clone());
            }
            i = j;
        } else {
            i += 1;
        }
    }
}

/// `name(.attr | [..])* .method(..)` spanning the whole statement: a
/// method call on a local that is assumed to mutate it.
fn mutated_base(tokens: &[Token]) -> Option<&str> {
    let first = tokens.first().filter(|t| t.kind == TokenKind::Name && !KEYWORDS.contains(&t.text.as_str()))?;
    let mut j = 1;
    let mut saw_attr = false;
    let mut last_was_call_after_attr = false;
    while j < tokens.len() {
        if tokens[j].is_op(".") && tokens.get(j + 1).is_some_and(|t| t.kind == TokenKind::Name) {
            saw_attr = true;
            last_was_call_after_attr = false;
            j += 2;
        } else if tokens[j].is_op("(") || tokens[j].is_op("[") {
            let is_call = tokens[j].is_op("(");
            let prev_is_attr_name = j >= 2 && tokens[j - 2].is_op(".");
            j = matching(tokens, j) + 1;
            last_was_call_after_attr = is_call && prev_is_attr_name;
        } else {
            return None;
        }
    }
    (saw_attr && last_was_call_after_attr).then_some(first.text.as_str())
}

fn param_facts(params: &[Token], facts: &mut Facts) {
    for p in split_top(params, |t| t.is_op(",")) {
        let p: Vec<Token> = p.iter().skip_while(|t| t.is_op("*") || t.is_op("**")).cloned().collect();
        let Some(name) = p.first().filter(|t| t.kind == TokenKind::Name) else { continue };
        facts.defs.insert(name.text.clone());
        // Annotation and default value are evaluated at definition time.
        let rest = &p[1..];
        expr_reads(rest, &mut facts.defs, &mut facts.uses);
    }
}

fn def_facts(stmt: &Stmt, is_root: bool, facts: &mut Facts) {
    let toks = &stmt.tokens[stmt.keyword_offset()..];
    if !is_root {
        if let Some(name) = stmt.declared_name() {
            facts.defs.insert(name.to_string());
        }
    }
    for d in &stmt.decorators {
        expr_reads(d, &mut facts.defs, &mut facts.uses);
    }
    let Some(open) = toks.iter().position(|t| t.is_op("(")) else { return };
    let close = matching(toks, open);
    if stmt.kind == StmtKind::Def {
        param_facts(&toks[open + 1..close], facts);
        if let Some(arrow) = toks[close..].iter().position(|t| t.is_op("->")) {
            expr_reads(&toks[close + arrow + 1..], &mut facts.defs, &mut facts.uses);
        }
    } else {
        expr_reads(&toks[open + 1..close], &mut facts.defs, &mut facts.uses);
    }
}

fn import_facts(toks: &[Token], facts: &mut Facts) {
    let names_part: &[Token] = if toks[0].is_name("from") {
        match toks.iter().position(|t| t.is_name("import")) {
            Some(i) => &toks[i + 1..],
            None => return,
        }
    } else {
        &toks[1..]
    };
    let names_part: Vec<Token> = names_part.iter().filter(|t| !t.is_op("(") && !t.is_op(")")).cloned().collect();
    for item in split_top(&names_part, |t| t.is_op(",")) {
        if let Some(as_pos) = item.iter().position(|t| t.is_name("as")) {
            if let Some(alias) = item.get(as_pos + 1) {
                facts.defs.insert(alias.text.clone());
            }
        } else if let Some(first) = item.first().filter(|t| t.kind == TokenKind::Name) {
            facts.defs.insert(first.text.clone());
        }
    }
}

fn simple_facts(toks: &[Token], facts: &mut Facts) {
    let Some(first) = toks.first() else { return };
    let (defs, uses) = (&mut facts.defs, &mut facts.uses);
    match first.text.as_str() {
        _ if first.kind != TokenKind::Name => {}
        "pass" | "break" | "continue" | "global" | "nonlocal" => return,
        "import" | "from" if first.kind == TokenKind::Name => return import_facts(toks, facts),
        "del" => {
            let mut d = BTreeSet::new();
            target_facts(&toks[1..], &mut d, uses);
            uses.extend(d.iter().cloned());
            defs.extend(d);
            return;
        }
        "return" | "raise" | "assert" | "yield" | "await" => {
            expr_reads(&toks[1..], defs, uses);
            return;
        }
        _ => {}
    }
    if let Some(op) = find_top(toks, |t| t.kind == TokenKind::Op && AUG_OPS.contains(&t.text.as_str())) {
        let mut d = BTreeSet::new();
        target_facts(&toks[..op], &mut d, uses);
        uses.extend(d.iter().cloned());
        defs.extend(d);
        expr_reads(&toks[op + 1..], defs, uses);
        return;
    }
    let parts = split_top(toks, |t| t.is_op("="));
    if parts.len() > 1 {
        let (targets, value) = parts.split_at(parts.len() - 1);
        expr_reads(value[0], defs, uses);
        for target in targets {
            match find_top(target, |t| t.is_op(":")) {
                Some(colon) => {
                    target_facts(&target[..colon], defs, uses);
                    expr_reads(&target[colon + 1..], defs, uses);
                }
                None => target_facts(target, defs, uses),
            }
        }
        return;
    }
    if let Some(colon) = find_top(toks, |t| t.is_op(":")) {
        // Bare annotation `x: int` declares without binding a value.
        expr_reads(&toks[colon + 1..], defs, uses);
        return;
    }
    expr_reads(toks, defs, uses);
    if let Some(base) = mutated_base(toks) {
        defs.insert(base.to_string());
    }
}

/// Computes the facts of statement `stmt`. `is_root` marks the def header
/// that roots its own unit: it binds the parameters, not its own name.
pub fn statement_facts(stmt: &Stmt, is_root: bool) -> Facts {
    let mut facts = Facts::default();
    let toks = &stmt.tokens[stmt.keyword_offset().min(stmt.tokens.len())..];
    match stmt.kind {
        StmtKind::Module | StmtKind::Else | StmtKind::Try | StmtKind::Finally => {}
        StmtKind::Simple => simple_facts(toks, &mut facts),
        StmtKind::If | StmtKind::Elif | StmtKind::While | StmtKind::Match => {
            expr_reads(&toks[1..], &mut facts.defs, &mut facts.uses)
        }
        StmtKind::For => {
            let body = &toks[1..];
            match find_top(body, |t| t.is_name("in")) {
                Some(i) => {
                    let mut d = BTreeSet::new();
                    target_facts(&body[..i], &mut d, &mut facts.uses);
                    facts.loop_defs = d;
                    expr_reads(&body[i + 1..], &mut facts.defs, &mut facts.uses);
                }
                None => expr_reads(body, &mut facts.defs, &mut facts.uses),
            }
        }
        StmtKind::With => {
            let mut items = &toks[1..];
            if items.first().is_some_and(|t| t.is_op("(")) && matching(items, 0) == items.len() - 1 {
                items = &items[1..items.len() - 1];
            }
            for item in split_top(items, |t| t.is_op(",")) {
                match find_top(item, |t| t.is_name("as")) {
                    Some(a) => {
                        expr_reads(&item[..a], &mut facts.defs, &mut facts.uses);
                        target_facts(&item[a + 1..], &mut facts.defs, &mut facts.uses);
                    }
                    None => expr_reads(item, &mut facts.defs, &mut facts.uses),
                }
            }
        }
        StmtKind::Except => {
            let body: Vec<Token> = toks[1..].iter().filter(|t| !t.is_op("*")).cloned().collect();
            match find_top(&body, |t| t.is_name("as")) {
                Some(a) => {
                    expr_reads(&body[..a], &mut facts.defs, &mut facts.uses);
                    if let Some(n) = body.get(a + 1) {
                        facts.defs.insert(n.text.clone());
                    }
                }
                None => expr_reads(&body, &mut facts.defs, &mut facts.uses),
            }
        }
        StmtKind::Def | StmtKind::Class => def_facts(stmt, is_root, &mut facts),
        StmtKind::Case => {
            let body = &toks[1..];
            let (pattern, guard) = match find_top(body, |t| t.is_name("if")) {
                Some(g) => (&body[..g], Some(&body[g + 1..])),
                None => (body, None),
            };
            for (i, t) in pattern.iter().enumerate() {
                if t.kind != TokenKind::Name || KEYWORDS.contains(&t.text.as_str()) || t.text == "_" {
                    continue;
                }
                let dotted = pattern.get(i + 1).is_some_and(|n| n.is_op(".") || n.is_op("("))
                    || (i > 0 && pattern[i - 1].is_op("."));
                let kwarg = pattern.get(i + 1).is_some_and(|n| n.is_op("="));
                if kwarg {
                    continue;
                }
                if dotted {
                    if !(i > 0 && pattern[i - 1].is_op(".")) {
                        facts.uses.insert(t.text.clone());
                    }
                } else {
                    facts.defs.insert(t.text.clone());
                }
            }
            if let Some(g) = guard {
                expr_reads(g, &mut facts.defs, &mut facts.uses);
            }
        }
    }
    facts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pycpg::stmt::parse_module;

    fn facts_of(src: &str) -> Facts {
        let m = parse_module(src).unwrap();
        statement_facts(&m.stmts[0], false)
    }

    fn set(v: &[&str]) -> BTreeSet<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn plain_and_tuple_assignment() {
        let f = facts_of("a, (b, *c) = x + y.z\n");
        assert_eq!(f.defs, set(&["a", "b", "c"]));
        assert_eq!(f.uses, set(&["x", "y"]));
    }

    #[test]
    fn attribute_and_subscript_targets_mutate_base() {
        let f = facts_of("self.d[k] = v\n");
        assert_eq!(f.defs, set(&["self"]));
        assert_eq!(f.uses, set(&["k", "self", "v"]));
    }

    #[test]
    fn augmented_and_annotated() {
        let f = facts_of("n += step\n");
        assert_eq!((f.defs, f.uses), (set(&["n"]), set(&["n", "step"])));
        let f = facts_of("x: Dict[str, int] = build()\n");
        assert_eq!((f.defs, f.uses), (set(&["x"]), set(&["Dict", "build", "int", "str"])));
    }

    #[test]
    fn keyword_arguments_and_attributes_are_not_reads() {
        let f = facts_of("r = requests.get(url, timeout=t, verify=False)\n");
        assert_eq!(f.uses, set(&["requests", "t", "url"]));
    }

    #[test]
    fn method_call_statement_mutates_receiver() {
        let f = facts_of("yamlconfig.update(yaml.load(open(includes)))\n");
        assert_eq!(f.defs, set(&["yamlconfig"]));
        assert_eq!(f.uses, set(&["includes", "open", "yaml", "yamlconfig"]));
        assert!(facts_of("print(x)\n").defs.is_empty());
        assert!(facts_of("a.b.c\n").defs.is_empty());
        assert_eq!(facts_of("self.items[i].append(v)\n").defs, set(&["self"]));
    }

    #[test]
    fn for_header_splits_iterable_and_targets() {
        let f = facts_of("for k, v in d.items():\n    pass\n");
        assert!(f.defs.is_empty());
        assert_eq!(f.loop_defs, set(&["k", "v"]));
        assert_eq!(f.uses, set(&["d"]));
    }

    #[test]
    fn with_and_except_bindings() {
        let f = facts_of("with open(p) as fh, lock:\n    pass\n");
        assert_eq!((f.defs, f.uses), (set(&["fh"]), set(&["lock", "open", "p"])));
        let m = parse_module("try:\n    pass\nexcept (IOError, OSError) as e:\n    pass\n").unwrap();
        let f = statement_facts(&m.stmts[2], false);
        assert_eq!((f.defs, f.uses), (set(&["e"]), set(&["IOError", "OSError"])));
    }

    #[test]
    fn def_header_root_binds_params() {
        let m = parse_module("@cache(size=n)\ndef f(self, a: int = d, *args, b, **kw) -> R:\n    pass\n").unwrap();
        let root = statement_facts(&m.stmts[0], true);
        assert_eq!(root.defs, set(&["a", "args", "b", "kw", "self"]));
        assert_eq!(root.uses, set(&["R", "cache", "d", "int", "n"]));
        let nested = statement_facts(&m.stmts[0], false);
        assert!(nested.defs.contains("f"));
    }

    #[test]
    fn imports() {
        assert_eq!(facts_of("import os.path, sys as s\n").defs, set(&["os", "s"]));
        assert_eq!(facts_of("from a.b import (c, d as e)\n").defs, set(&["c", "e"]));
        assert!(facts_of("from m import *\n").defs.is_empty());
    }

    #[test]
    fn lambdas_comprehensions_fstrings_walrus() {
        let f = facts_of("out = [g(v) for v in items if v] + list(map(lambda q: q * k, xs))\n");
        assert_eq!(f.uses, set(&["g", "items", "k", "list", "map", "xs"]));
        let f = facts_of("msg = f\"{user.name!r} {count:>{width}}\"\n");
        assert_eq!(f.uses, set(&["count", "user", "width"]));
        let f = facts_of("if (n := len(a)) > 10:\n    pass\n");
        assert_eq!((f.defs, f.uses), (set(&["n"]), set(&["a", "len"])));
    }

    #[test]
    fn del_and_return() {
        let f = facts_of("del cache[key], tmp\n");
        assert_eq!(f.defs, set(&["cache", "tmp"]));
        assert!(f.uses.contains("key"));
        assert_eq!(facts_of("return a if b else None\n").uses, set(&["a", "b"]));
    }

    #[test]
    fn case_patterns() {
        let m = parse_module("match p:\n    case Point(x=0, y=yy) if yy > lim:\n        pass\n").unwrap();
        let f = statement_facts(&m.stmts[1], false);
        assert_eq!(f.defs, set(&["yy"]));
        assert_eq!(f.uses, set(&["Point", "lim", "yy"]));
    }
}
