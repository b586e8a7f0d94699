// SPDX-License-Identifier: Apache-2.0

//! Control and data dependences of a unit.

use std::collections::{BTreeSet, VecDeque};

use fixedbitset::FixedBitSet;
use serde::{Deserialize, Serialize};

use super::cfg::{build_cfg, Cfg};
use super::defuse::{statement_facts, Facts};
use super::stmt::UnitTree;

/// A def→use dependence on one variable.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DataDep {
    pub src: usize,
    pub dst: usize,
    pub var: String,
}

/// Control dependences: each statement depends on its nearest enclosing
/// controlling header (conditional, loop, try/except/finally, match/case).
/// `with` and `class` are transparent; the search stops at a def header.
pub fn control_dependences(tree: &UnitTree) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    for node in &tree.nodes {
        let mut cur = node.parent;
        while let Some(p) = cur {
            let pn = &tree.nodes[p];
            if pn.kind.is_controlling() {
                out.push((p, node.id));
                break;
            }
            if pn.kind == super::stmt::StmtKind::Def {
                break;
            }
            cur = pn.parent;
        }
    }
    out
}

/// Per-point definitions and uses derived from statement facts.
pub(crate) fn point_facts(tree: &UnitTree, cfg: &Cfg) -> (Vec<BTreeSet<String>>, Vec<BTreeSet<String>>) {
    let mut defs = vec![BTreeSet::new(); cfg.point_count()];
    let mut uses = vec![BTreeSet::new(); cfg.point_count()];
    for node in &tree.nodes {
        let Facts {
            defs: d,
            uses: u,
            loop_defs,
        } = statement_facts(node, node.id == 0);
        defs[node.id] = d;
        uses[node.id] = u;
        if !loop_defs.is_empty() {
            defs[cfg.loop_point(node.id)] = loop_defs;
        }
    }
    (defs, uses)
}

/// Reaching definitions over the unit CFG, reported as statement-level
/// def→use edges. Self-dependences (a statement reading a value it wrote on
/// an earlier loop iteration) are dropped.
pub fn data_dependences(tree: &UnitTree) -> Vec<DataDep> {
    let cfg = build_cfg(tree);
    let (defs, uses) = point_facts(tree, &cfg);
    // Enumerate definitions as (point, var).
    let mut all: Vec<(usize, &str)> = Vec::new();
    for (p, ds) in defs.iter().enumerate() {
        for v in ds {
            all.push((p, v.as_str()));
        }
    }
    let nd = all.len();
    let points = cfg.point_count();
    let mut gen = vec![FixedBitSet::with_capacity(nd); points];
    let mut kill = vec![FixedBitSet::with_capacity(nd); points];
    for (i, &(p, v)) in all.iter().enumerate() {
        gen[p].insert(i);
        for (j, &(q, w)) in all.iter().enumerate() {
            if w == v && q != p {
                kill[p].insert(j);
            }
        }
    }
    let preds = cfg.preds();
    let mut inn = vec![FixedBitSet::with_capacity(nd); points];
    let mut out = vec![FixedBitSet::with_capacity(nd); points];
    let mut work: VecDeque<usize> = (0..points).collect();
    let mut queued = vec![true; points];
    while let Some(p) = work.pop_front() {
        queued[p] = false;
        let mut new_in = FixedBitSet::with_capacity(nd);
        for &q in &preds[p] {
            new_in.union_with(&out[q]);
        }
        let mut new_out = new_in.clone();
        new_out.difference_with(&kill[p]);
        new_out.union_with(&gen[p]);
        inn[p] = new_in;
        if new_out != out[p] {
            out[p] = new_out;
            for &s in &cfg.succ[p] {
                if !queued[s] {
                    queued[s] = true;
                    work.push_back(s);
                }
            }
        }
    }
    let mut deps = BTreeSet::new();
    for (p, us) in uses.iter().enumerate() {
        let Some(dst) = cfg.stmt_of(p) else { continue };
        for d in inn[p].ones() {
            let (dp, var) = all[d];
            let src = cfg.stmt_of(dp).expect("definitions live on statement points");
            if src != dst && us.contains(var) {
                deps.insert(DataDep {
                    src,
                    dst,
                    var: var.to_string(),
                });
            }
        }
    }
    deps.into_iter().collect()
}
