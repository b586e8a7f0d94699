// SPDX-License-Identifier: Apache-2.0

//! Intra-unit control flow over statement nodes.
//!
//! Points `0..n` are the statements themselves. A `for` header `i` has a
//! second point `n + i` where the loop variables are bound on each
//! iteration: the header point evaluates the iterable once and flows into
//! it, and the loop body returns to it. Two extra points mark unit entry
//! and exit.
//!
//! Exceptions: the `try` header and every statement lowered inside a `try`
//! body (nested ones included) get an edge to each `except` header of that
//! `try`, or to its `finally` header when there are no handlers. A `raise`
//! flows to the innermost handlers and to the unit exit. Nested function
//! bodies are entered from their header and end at the unit exit; the
//! header itself falls through to the next statement. Class bodies run
//! inline.

use std::collections::BTreeSet;

use super::stmt::{StmtKind, UnitTree};

#[derive(Debug, Clone)]
pub struct Cfg {
    pub n: usize,
    pub succ: Vec<BTreeSet<usize>>,
}

impl Cfg {
    pub fn entry(&self) -> usize {
        2 * self.n
    }

    pub fn exit(&self) -> usize {
        2 * self.n + 1
    }

    pub fn point_count(&self) -> usize {
        2 * self.n + 2
    }

    /// Statement owning a point, if any.
    pub fn stmt_of(&self, point: usize) -> Option<usize> {
        if point < self.n {
            Some(point)
        } else if point < 2 * self.n {
            Some(point - self.n)
        } else {
            None
        }
    }

    pub fn loop_point(&self, stmt: usize) -> usize {
        self.n + stmt
    }

    pub fn preds(&self) -> Vec<Vec<usize>> {
        let mut p = vec![Vec::new(); self.point_count()];
        for (from, tos) in self.succ.iter().enumerate() {
            for &to in tos {
                p[to].push(from);
            }
        }
        p
    }
}

struct LoopCtx {
    cont: usize,
    breaks: Vec<usize>,
}

struct Builder<'a> {
    tree: &'a UnitTree,
    cfg: Cfg,
    loops: Vec<LoopCtx>,
    handlers: Vec<Vec<usize>>,
}

impl Builder<'_> {
    fn edge(&mut self, a: usize, b: usize) {
        self.cfg.succ[a].insert(b);
    }

    fn connect(&mut self, preds: &[usize], to: usize) {
        for &p in preds {
            self.edge(p, to);
        }
    }

    fn body(&self, id: usize) -> Vec<usize> {
        self.tree.nodes[id]
            .children
            .iter()
            .copied()
            .filter(|&c| !self.tree.nodes[c].kind.is_clause())
            .collect()
    }

    fn clauses(&self, id: usize, kind: StmtKind) -> Vec<usize> {
        self.tree.nodes[id]
            .children
            .iter()
            .copied()
            .filter(|&c| self.tree.nodes[c].kind == kind)
            .collect()
    }

    fn seq(&mut self, stmts: &[usize], mut preds: Vec<usize>) -> Vec<usize> {
        for &s in stmts {
            preds = self.stmt(s, preds);
        }
        preds
    }

    fn raise_edges(&mut self, s: usize) {
        if let Some(hs) = self.handlers.last().cloned() {
            for h in hs {
                self.edge(s, h);
            }
        }
    }

    fn stmt(&mut self, s: usize, preds: Vec<usize>) -> Vec<usize> {
        self.connect(&preds, s);
        self.raise_edges(s);
        let node = &self.tree.nodes[s];
        let first = node.tokens.get(node.keyword_offset()).map(|t| t.text.as_str()).unwrap_or("");
        match node.kind {
            StmtKind::Simple => match first {
                "return" | "raise" => {
                    let exit = self.cfg.exit();
                    self.edge(s, exit);
                    vec![]
                }
                "break" if !self.loops.is_empty() => {
                    self.loops.last_mut().unwrap().breaks.push(s);
                    vec![]
                }
                "continue" if !self.loops.is_empty() => {
                    let c = self.loops.last().unwrap().cont;
                    self.edge(s, c);
                    vec![]
                }
                _ => vec![s],
            },
            StmtKind::If => {
                let body = self.body(s);
                let mut exits = self.seq(&body, vec![s]);
                let mut cond = s;
                let mut has_else = false;
                for &c in &self.tree.nodes[s].children.clone() {
                    match self.tree.nodes[c].kind {
                        StmtKind::Elif => {
                            self.edge(cond, c);
                            self.raise_edges(c);
                            let b = self.body(c);
                            exits.extend(self.seq(&b, vec![c]));
                            cond = c;
                        }
                        StmtKind::Else => {
                            self.edge(cond, c);
                            let b = self.body(c);
                            exits.extend(self.seq(&b, vec![c]));
                            has_else = true;
                        }
                        _ => {}
                    }
                }
                if !has_else {
                    exits.push(cond);
                }
                exits
            }
            StmtKind::While | StmtKind::For => {
                let head = if node.kind == StmtKind::For {
                    let lp = self.cfg.loop_point(s);
                    self.edge(s, lp);
                    lp
                } else {
                    s
                };
                self.loops.push(LoopCtx {
                    cont: head,
                    breaks: Vec::new(),
                });
                let body = self.body(s);
                let body_exits = self.seq(&body, vec![head]);
                self.connect(&body_exits, head);
                let ctx = self.loops.pop().unwrap();
                let mut exits = ctx.breaks;
                match self.clauses(s, StmtKind::Else).first() {
                    Some(&e) => {
                        self.edge(head, e);
                        let b = self.body(e);
                        exits.extend(self.seq(&b, vec![e]));
                    }
                    None => exits.push(head),
                }
                exits
            }
            StmtKind::Try => {
                let excepts = self.clauses(s, StmtKind::Except);
                let finally = self.clauses(s, StmtKind::Finally).first().copied();
                let targets = if excepts.is_empty() {
                    finally.into_iter().collect()
                } else {
                    excepts.clone()
                };
                for &t in &targets {
                    self.edge(s, t);
                }
                self.handlers.push(targets);
                let body = self.body(s);
                let mut normal = self.seq(&body, vec![s]);
                self.handlers.pop();
                if let Some(&e) = self.clauses(s, StmtKind::Else).first() {
                    self.connect(&normal, e);
                    let b = self.body(e);
                    normal = self.seq(&b, vec![e]);
                }
                for &h in &excepts {
                    let b = self.body(h);
                    normal.extend(self.seq(&b, vec![h]));
                }
                match finally {
                    Some(f) => {
                        self.connect(&normal, f);
                        let b = self.body(f);
                        self.seq(&b, vec![f])
                    }
                    None => normal,
                }
            }
            StmtKind::Def => {
                let saved_loops = std::mem::take(&mut self.loops);
                let saved_handlers = std::mem::take(&mut self.handlers);
                let body = self.body(s);
                let ends = self.seq(&body, vec![s]);
                let exit = self.cfg.exit();
                self.connect(&ends, exit);
                self.loops = saved_loops;
                self.handlers = saved_handlers;
                vec![s]
            }
            StmtKind::Match => {
                let cases = self.body(s);
                let mut exits = Vec::new();
                let mut prev = s;
                for &c in &cases {
                    self.edge(prev, c);
                    let b = self.body(c);
                    exits.extend(self.seq(&b, vec![c]));
                    prev = c;
                }
                exits.push(prev);
                exits
            }
            // With, Class, Case, Module: body runs inline after the header.
            _ => {
                let body = self.body(s);
                self.seq(&body, vec![s])
            }
        }
    }
}

/// Builds the control-flow graph of a unit.
pub fn build_cfg(tree: &UnitTree) -> Cfg {
    let n = tree.nodes.len();
    let mut b = Builder {
        tree,
        cfg: Cfg {
            n,
            succ: vec![BTreeSet::new(); 2 * n + 2],
        },
        loops: Vec::new(),
        handlers: Vec::new(),
    };
    let entry = b.cfg.entry();
    let exit = b.cfg.exit();
    b.edge(entry, 0);
    let body = b.body(0);
    let ends = b.seq(&body, vec![0]);
    b.connect(&ends, exit);
    b.cfg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pycpg::stmt::parse_statements;

    fn cfg_of(src: &str) -> (UnitTree, Cfg) {
        let t = parse_statements(src, "f").unwrap();
        let c = build_cfg(&t);
        (t, c)
    }

    fn has(c: &Cfg, a: usize, b: usize) -> bool {
        c.succ[a].contains(&b)
    }

    #[test]
    fn straight_line() {
        let (_, c) = cfg_of("def f():\n    a = 1\n    b = a\n");
        assert!(has(&c, c.entry(), 0) && has(&c, 0, 1) && has(&c, 1, 2) && has(&c, 2, c.exit()));
    }

    #[test]
    fn if_elif_else() {
        // 0 def, 1 if, 2 a, 3 elif, 4 b, 5 else, 6 c, 7 d
        let (_, c) = cfg_of("def f():\n    if x:\n        a\n    elif y:\n        b\n    else:\n        c\n    d\n");
        assert!(has(&c, 1, 2) && has(&c, 1, 3) && has(&c, 3, 4) && has(&c, 3, 5) && has(&c, 5, 6));
        assert!(has(&c, 2, 7) && has(&c, 4, 7) && has(&c, 6, 7));
        assert!(!has(&c, 3, 7) && !has(&c, 1, 7));
    }

    #[test]
    fn for_loop_binds_on_second_point() {
        // 0 def, 1 for, 2 body, 3 after
        let (_, c) = cfg_of("def f():\n    for i in xs:\n        use(i)\n    done()\n");
        let lp = c.loop_point(1);
        assert!(has(&c, 1, lp) && has(&c, lp, 2) && has(&c, 2, lp) && has(&c, lp, 3));
        assert!(!has(&c, 2, 1));
    }

    #[test]
    fn while_break_continue() {
        // 0 def, 1 while, 2 if, 3 break, 4 continue, 5 after
        let (_, c) = cfg_of("def f():\n    while x:\n        if y:\n            break\n        continue\n    z\n");
        assert!(has(&c, 3, 5) && has(&c, 4, 1) && has(&c, 1, 5));
        assert!(!has(&c, 3, 4));
    }

    #[test]
    fn try_except_finally() {
        // 0 def, 1 try, 2 a, 3 except, 4 b, 5 finally, 6 c, 7 after
        let (_, c) = cfg_of("def f():\n    try:\n        a\n    except E:\n        b\n    finally:\n        c\n    d\n");
        assert!(has(&c, 1, 3) && has(&c, 2, 3) && has(&c, 2, 5) && has(&c, 4, 5) && has(&c, 6, 7));
        assert!(!has(&c, 1, 5));
    }

    #[test]
    fn return_and_raise_reach_exit() {
        let (_, c) = cfg_of("def f():\n    if a:\n        return 1\n    raise V\n    dead\n");
        assert!(has(&c, 2, c.exit()) && has(&c, 3, c.exit()));
        assert!(!has(&c, 2, 3) && !has(&c, 3, 4));
    }

    #[test]
    fn nested_def_body_is_separate() {
        // 0 def f, 1 def g, 2 g body, 3 after
        let (_, c) = cfg_of("def f():\n    def g():\n        inner\n    after\n");
        assert!(has(&c, 1, 2) && has(&c, 1, 3) && has(&c, 2, c.exit()));
        assert!(!has(&c, 2, 3));
    }
}
