// SPDX-License-Identifier: Apache-2.0

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{CommitCpgError, MergedCpg};
use crate::pycpg::{CpgEdge, CpgNode, EdgeKind, GraphDocument, SliceCriteria, Version};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceOptions {
    /// Also slice forward from the data-dependence successors of deleted
    /// statements. Off by default.
    #[serde(default)]
    pub forward_from_deleted_defs: bool,
}

/// A merged graph cut down to the changed statements and everything they
/// depend on (deleted side) or affect (added side).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitCpg {
    pub nodes: Vec<CpgNode>,
    pub edges: Vec<CpgEdge>,
    pub slice_criteria: SliceCriteria,
    /// Nodes reached by the backward slice, excluding deleted nodes.
    pub backward: Vec<usize>,
    /// Nodes reached by the forward slice, excluding added nodes.
    pub forward: Vec<usize>,
}

impl CommitCpg {
    pub fn to_document(&self) -> GraphDocument {
        GraphDocument::new(&self.nodes, &self.edges, Some(self.slice_criteria.clone()))
    }

    pub fn as_merged(&self) -> MergedCpg {
        MergedCpg {
            nodes: self.nodes.clone(),
            edges: self.edges.clone(),
        }
    }

    pub fn empty() -> Self {
        CommitCpg {
            nodes: Vec::new(),
            edges: Vec::new(),
            slice_criteria: SliceCriteria::default(),
            backward: Vec::new(),
            forward: Vec::new(),
        }
    }
}

fn closure(adj: &[Vec<usize>], seeds: impl IntoIterator<Item = usize>) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = BTreeSet::new();
    let mut queue: VecDeque<usize> = VecDeque::new();
    for s in seeds {
        if seen.insert(s) {
            queue.push_back(s);
        }
    }
    while let Some(n) = queue.pop_front() {
        for &m in &adj[n] {
            if seen.insert(m) {
                queue.push_back(m);
            }
        }
    }
    seen
}

/// Bidirectional slice: backward over control and data dependences from
/// every deleted node, forward from every added node. Retains changed and
/// sliced nodes plus every edge (AST included) between retained nodes,
/// renumbered compactly in the original order.
pub fn slice(g: &MergedCpg, opts: &SliceOptions) -> Result<CommitCpg, CommitCpgError> {
    let n = g.nodes.len();
    let deleted: Vec<usize> = g.nodes.iter().filter(|x| x.version == Version::Previous).map(|x| x.id).collect();
    let added: Vec<usize> = g.nodes.iter().filter(|x| x.version == Version::Current).map(|x| x.id).collect();
    if deleted.is_empty() && added.is_empty() {
        return Err(CommitCpgError::NoChange);
    }
    let mut fwd = vec![Vec::new(); n];
    let mut bwd = vec![Vec::new(); n];
    for e in &g.edges {
        if matches!(e.kind, EdgeKind::Cdg | EdgeKind::Ddg) {
            fwd[e.src].push(e.dst);
            bwd[e.dst].push(e.src);
        }
    }
    let back = closure(&bwd, deleted.iter().copied());
    let mut forward_seeds: Vec<usize> = added.clone();
    if opts.forward_from_deleted_defs {
        for e in &g.edges {
            if e.kind == EdgeKind::Ddg && g.nodes[e.src].version == Version::Previous {
                forward_seeds.push(e.dst);
            }
        }
    }
    let fore = closure(&fwd, forward_seeds);
    let retained: BTreeSet<usize> = back.iter().chain(fore.iter()).chain(added.iter()).copied().collect();
    let mut remap = vec![usize::MAX; n];
    let mut nodes = Vec::with_capacity(retained.len());
    for &old in &retained {
        remap[old] = nodes.len();
        nodes.push(CpgNode {
            id: nodes.len(),
            ..g.nodes[old].clone()
        });
    }
    let edges = g
        .edges
        .iter()
        .filter(|e| remap[e.src] != usize::MAX && remap[e.dst] != usize::MAX)
        .map(|e| CpgEdge {
            src: remap[e.src],
            dst: remap[e.dst],
            ..*e
        })
        .collect();
    let deleted_set: BTreeSet<usize> = deleted.iter().copied().collect();
    let added_set: BTreeSet<usize> = added.iter().copied().collect();
    Ok(CommitCpg {
        nodes,
        edges,
        slice_criteria: SliceCriteria {
            deleted: deleted.iter().map(|&i| remap[i]).collect(),
            added: added.iter().map(|&i| remap[i]).collect(),
        },
        backward: back.difference(&deleted_set).map(|&i| remap[i]).collect(),
        forward: fore.difference(&added_set).map(|&i| remap[i]).collect(),
    })
}

/// Disjoint union: ids of each later graph are offset past the earlier ones.
pub fn union(graphs: &[CommitCpg]) -> CommitCpg {
    let mut out = CommitCpg::empty();
    for g in graphs {
        let off = out.nodes.len();
        out.nodes.extend(g.nodes.iter().map(|x| CpgNode {
            id: x.id + off,
            ..x.clone()
        }));
        out.edges.extend(g.edges.iter().map(|e| CpgEdge {
            src: e.src + off,
            dst: e.dst + off,
            ..*e
        }));
        out.slice_criteria.deleted.extend(g.slice_criteria.deleted.iter().map(|i| i + off));
        out.slice_criteria.added.extend(g.slice_criteria.added.iter().map(|i| i + off));
        out.backward.extend(g.backward.iter().map(|i| i + off));
        out.forward.extend(g.forward.iter().map(|i| i + off));
    }
    out
}
