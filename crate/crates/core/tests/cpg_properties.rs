// SPDX-License-Identifier: Apache-2.0

//! Graph invariants over generated programs, checked against oracles that
//! work on raw source text rather than on the parser's tree.

use std::collections::{BTreeSet, HashMap};

use proptest::prelude::*;
use scopy::pycpg::{build_cpg, lexer::tokenize_fragment, lexer::TokenKind, EdgeKind, Version};

#[derive(Debug, Clone)]
enum Block {
    Stmt(u8),
    If(Vec<Block>, Option<Vec<Block>>),
    For(Vec<Block>),
    While(Vec<Block>),
    Try(Vec<Block>, Vec<Block>),
    With(Vec<Block>),
}

const SIMPLE: &[&str] = &[
    "a = b + 1",
    "b = a * 2",
    "c.append(a)",
    "print(c, b)",
    "a += c[0]",
    "d = {k: a for k in b}",
    "return a",
    "x, y = b, c",
];

fn arb_block() -> impl Strategy<Value = Block> {
    let leaf = (0u8..SIMPLE.len() as u8).prop_map(Block::Stmt);
    leaf.prop_recursive(3, 24, 4, |inner| {
        let body = prop::collection::vec(inner, 1..4);
        prop_oneof![
            (body.clone(), prop::option::of(body.clone())).prop_map(|(a, b)| Block::If(a, b)),
            body.clone().prop_map(Block::For),
            body.clone().prop_map(Block::While),
            (body.clone(), body.clone()).prop_map(|(a, b)| Block::Try(a, b)),
            body.prop_map(Block::With),
        ]
    })
}

fn render(blocks: &[Block], indent: usize, out: &mut String) {
    let pad = " ".repeat(indent);
    for b in blocks {
        match b {
            Block::Stmt(k) => out.push_str(&format!("{pad}{}\n", SIMPLE[*k as usize])),
            Block::If(a, e) => {
                out.push_str(&format!("{pad}if a > b:\n"));
                render(a, indent + 4, out);
                if let Some(e) = e {
                    out.push_str(&format!("{pad}else:\n"));
                    render(e, indent + 4, out);
                }
            }
            Block::For(a) => {
                out.push_str(&format!("{pad}for i in c:\n"));
                render(a, indent + 4, out);
            }
            Block::While(a) => {
                out.push_str(&format!("{pad}while b:\n"));
                render(a, indent + 4, out);
            }
            Block::Try(a, h) => {
                out.push_str(&format!("{pad}try:\n"));
                render(a, indent + 4, out);
                out.push_str(&format!("{pad}except ValueError as err:\n"));
                render(h, indent + 4, out);
            }
            Block::With(a) => {
                out.push_str(&format!("{pad}with open(b) as fh:\n"));
                render(a, indent + 4, out);
            }
        }
    }
}

fn program(blocks: &[Block]) -> String {
    let mut s = String::from("def f(a, b, c):\n");
    render(blocks, 4, &mut s);
    s
}

fn indent_of(line: &str) -> usize {
    line.len() - line.trim_start().len()
}

/// Nearest controlling header of `line`, found by scanning the text upward.
fn text_controller(lines: &[&str], line: usize) -> Option<usize> {
    let text = lines[line - 1];
    let mut want = indent_of(text);
    let trimmed = text.trim_start();
    // A clause header is controlled by the statement it continues.
    if trimmed.starts_with("else:") || trimmed.starts_with("except") {
        for l in (1..line).rev() {
            let t = lines[l - 1];
            if indent_of(t) == want && (t.trim_start().starts_with("if ") || t.trim_start().starts_with("try:")) {
                return Some(l);
            }
        }
        return None;
    }
    for l in (1..line).rev() {
        let t = lines[l - 1];
        if t.trim().is_empty() || indent_of(t) >= want {
            continue;
        }
        let head = t.trim_start();
        if head.starts_with("def ") {
            return None;
        }
        if head.starts_with("with ") {
            want = indent_of(t);
            continue;
        }
        return Some(l);
    }
    None
}

fn names(code: &str) -> BTreeSet<String> {
    tokenize_fragment(code)
        .into_iter()
        .filter(|t| t.kind == TokenKind::Name)
        .map(|t| t.text)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn cpg_invariants(blocks in prop::collection::vec(arb_block(), 1..6)) {
        let src = program(&blocks);
        let g = build_cpg(&src, "f", "gen.py", Version::Previous).unwrap();
        let again = build_cpg(&src, "f", "gen.py", Version::Previous).unwrap();
        prop_assert_eq!(&g, &again);

        // AST: a tree over all nodes.
        let ast: Vec<_> = g.edges_of(EdgeKind::Ast).collect();
        prop_assert_eq!(ast.len(), g.nodes.len() - 1);
        let mut parents: HashMap<usize, usize> = HashMap::new();
        for e in &ast {
            prop_assert!(parents.insert(e.dst, e.src).is_none());
        }
        let depth = |mut n: usize| { let mut d = 0; while let Some(&p) = parents.get(&n) { n = p; d += 1; } d };

        // CDG: matches the text scan and goes strictly deeper.
        let lines: Vec<&str> = src.lines().collect();
        let by_line: HashMap<usize, usize> = g.nodes.iter().map(|n| (n.line_span.start, n.id)).collect();
        let mut expected = BTreeSet::new();
        for n in &g.nodes {
            if let Some(h) = text_controller(&lines, n.line_span.start) {
                expected.insert((by_line[&h], n.id));
            }
        }
        let got: BTreeSet<(usize, usize)> = g.edges_of(EdgeKind::Cdg).map(|e| (e.src, e.dst)).collect();
        prop_assert_eq!(&got, &expected, "{}", src);
        for (a, b) in &got {
            prop_assert!(depth(*a) < depth(*b));
        }

        // DDG: the variable is spelled at both ends.
        for d in &g.data_deps {
            prop_assert!(names(&g.nodes[d.src].code).contains(&d.var), "{} @ {}", d.var, g.nodes[d.src].code);
            prop_assert!(names(&g.nodes[d.dst].code).contains(&d.var), "{} @ {}", d.var, g.nodes[d.dst].code);
            prop_assert!(d.src != d.dst);
        }
        let ddg: BTreeSet<(usize, usize)> = g.edges_of(EdgeKind::Ddg).map(|e| (e.src, e.dst)).collect();
        let from_deps: BTreeSet<(usize, usize)> = g.data_deps.iter().map(|d| (d.src, d.dst)).collect();
        prop_assert_eq!(ddg, from_deps);
    }
}

#[test]
fn straight_line_chain_of_fifty() {
    let mut src = String::from("def chain():\n    v0 = 0\n");
    for i in 1..50 {
        src.push_str(&format!("    v{i} = v{} + 1\n", i - 1));
    }
    let g = build_cpg(&src, "chain", "c.py", Version::Current).unwrap();
    // Each statement reads exactly its predecessor's variable.
    assert_eq!(g.edges_of(EdgeKind::Ddg).count(), 49);
    assert_eq!(g.edges_of(EdgeKind::Cdg).count(), 0);
    assert_eq!(g.nodes.len(), 51);
}
