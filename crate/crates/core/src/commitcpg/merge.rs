// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::CommitCpgError;
use crate::ingest::MODULE_UNIT;
use crate::pycpg::{Cpg, CpgEdge, CpgNode, GraphDocument, Version};

/// Both versions of a unit fused into one version-annotated graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedCpg {
    pub nodes: Vec<CpgNode>,
    pub edges: Vec<CpgEdge>,
}

impl MergedCpg {
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument::new(&self.nodes, &self.edges, None)
    }
}

fn is_virtual_root(n: &CpgNode) -> bool {
    n.id == 0 && n.code == MODULE_UNIT
}

/// Pairs pre and post nodes whose spans consist of unchanged lines that
/// the map sends exactly onto each other. Nodes sharing a span (one-line
/// compound statements, `;`-separated statements) are paired by code text
/// in source order. The virtual module roots always pair.
pub fn align(pre: &Cpg, post: &Cpg, unchanged: &BTreeMap<usize, usize>) -> Vec<(usize, usize)> {
    let mut by_span: HashMap<(usize, usize), Vec<&CpgNode>> = HashMap::new();
    for n in &post.nodes {
        if !is_virtual_root(n) {
            by_span.entry((n.line_span.start, n.line_span.end)).or_default().push(n);
        }
    }
    let mut taken: BTreeSet<usize> = BTreeSet::new();
    let mut out = Vec::new();
    if let (Some(a), Some(b)) = (pre.nodes.first(), post.nodes.first()) {
        if is_virtual_root(a) && is_virtual_root(b) {
            out.push((a.id, b.id));
            taken.insert(b.id);
        }
    }
    for n in &pre.nodes {
        if is_virtual_root(n) {
            continue;
        }
        let span = n.line_span;
        let Some(&start) = unchanged.get(&span.start) else { continue };
        let contiguous = (span.start..=span.end)
            .all(|l| unchanged.get(&l) == Some(&(start + (l - span.start))));
        if !contiguous {
            continue;
        }
        let target = (start, start + (span.end - span.start));
        let Some(cands) = by_span.get(&target) else { continue };
        if let Some(m) = cands.iter().find(|c| c.code == n.code && !taken.contains(&c.id)) {
            taken.insert(m.id);
            out.push((n.id, m.id));
        }
    }
    out
}

/// Fuses both graphs. Pre nodes come first (aligned ones become
/// `Unchanged`, the rest `Previous`), followed by unaligned post nodes
/// (`Current`). Edges are re-pointed and deduplicated; an edge is
/// `Unchanged` iff both endpoints are.
pub fn merge(pre: &Cpg, post: &Cpg, alignment: &[(usize, usize)]) -> Result<MergedCpg, CommitCpgError> {
    let mut pre_to_post = BTreeMap::new();
    let mut post_to_pre = BTreeMap::new();
    for &(a, b) in alignment {
        if pre_to_post.insert(a, b).is_some() || post_to_pre.insert(b, a).is_some() {
            return Err(CommitCpgError::AlignmentConflict { pre: a, post: b });
        }
    }
    let mut nodes = Vec::new();
    let mut pre_map = HashMap::new();
    let mut post_map = HashMap::new();
    for n in &pre.nodes {
        let id = nodes.len();
        pre_map.insert(n.id, id);
        let version = if let Some(&p) = pre_to_post.get(&n.id) {
            post_map.insert(p, id);
            Version::Unchanged
        } else {
            Version::Previous
        };
        nodes.push(CpgNode {
            id,
            version,
            ..n.clone()
        });
    }
    for n in &post.nodes {
        if post_to_pre.contains_key(&n.id) {
            continue;
        }
        let id = nodes.len();
        post_map.insert(n.id, id);
        nodes.push(CpgNode {
            id,
            version: Version::Current,
            ..n.clone()
        });
    }
    let mut seen = BTreeSet::new();
    let mut edges = Vec::new();
    for (graph, map, side) in [(pre, &pre_map, Version::Previous), (post, &post_map, Version::Current)] {
        for e in &graph.edges {
            let (src, dst) = (map[&e.src], map[&e.dst]);
            if !seen.insert((src, dst, e.kind)) {
                continue;
            }
            let both = nodes[src].version == Version::Unchanged && nodes[dst].version == Version::Unchanged;
            edges.push(CpgEdge {
                src,
                dst,
                kind: e.kind,
                version: if both { Version::Unchanged } else { side },
            });
        }
    }
    edges.sort_by_key(|e| (e.kind, e.src, e.dst));
    Ok(MergedCpg { nodes, edges })
}
