// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{align, merge, slice, union, CommitCpg, CommitCpgError, SliceOptions};
use crate::ingest::{select_relevant_units, CommitBundle, FileChange, SourceFilter, UnitSpans};
use crate::pycpg::{cpg_from_tree, parse_module, Cpg, GraphDocument, Module, UnitInfo, Version};

/// The sliced graph of one changed unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitGraph {
    pub file: String,
    pub unit: String,
    pub graph: CommitCpg,
}

/// All changed units of a commit and their disjoint union.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommitGraph {
    pub commit_id: String,
    pub units: Vec<UnitGraph>,
    pub graph: CommitCpg,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSummary {
    pub file: String,
    pub unit: String,
    pub node_offset: usize,
    pub node_count: usize,
}

/// JSON form of a commit graph: the union graph document plus the commit
/// id and where each unit's nodes sit in it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommitGraphDocument {
    pub commit_id: String,
    pub units: Vec<UnitSummary>,
    #[serde(flatten)]
    pub graph: GraphDocument,
}

impl CommitGraph {
    pub fn to_document(&self) -> CommitGraphDocument {
        let mut offset = 0;
        let units = self
            .units
            .iter()
            .map(|u| {
                let s = UnitSummary {
                    file: u.file.clone(),
                    unit: u.unit.clone(),
                    node_offset: offset,
                    node_count: u.graph.nodes.len(),
                };
                offset += u.graph.nodes.len();
                s
            })
            .collect();
        CommitGraphDocument {
            commit_id: self.commit_id.clone(),
            units,
            graph: self.graph.to_document(),
        }
    }
}

fn parse_side(fc: &FileChange, version: Version) -> Result<Option<Module>, CommitCpgError> {
    let text = match version {
        Version::Current => &fc.post_content,
        _ => &fc.pre_content,
    };
    if text.is_empty() {
        return Ok(None);
    }
    parse_module(text).map(Some).map_err(|source| CommitCpgError::Unparseable {
        path: fc.path.clone(),
        version,
        source,
    })
}

fn unit_cpg(module: Option<&Module>, units: &[UnitInfo], name: &str, file: &str, version: Version) -> Cpg {
    match (module, units.iter().find(|u| u.name == name)) {
        (Some(m), Some(info)) => cpg_from_tree(&m.unit_tree(info), file, version),
        _ => Cpg {
            unit: name.to_string(),
            file_name: file.to_string(),
            nodes: Vec::new(),
            edges: Vec::new(),
            data_deps: Vec::new(),
        },
    }
}

/// Slices every unit of one file touched by the change. Units whose
/// change leaves every statement aligned (comment or blank-line edits)
/// are skipped.
pub fn build_file_graphs(fc: &FileChange, opts: &SliceOptions) -> Result<Vec<UnitGraph>, CommitCpgError> {
    let pre = parse_side(fc, Version::Previous)?;
    let post = parse_side(fc, Version::Current)?;
    let pre_units = pre.as_ref().map(Module::units).unwrap_or_default();
    let post_units = post.as_ref().map(Module::units).unwrap_or_default();
    let mut spans: Vec<UnitSpans> = Vec::new();
    let mut index: BTreeMap<String, usize> = BTreeMap::new();
    for (units, is_pre) in [(&pre_units, true), (&post_units, false)] {
        for u in units {
            let i = *index.entry(u.name.clone()).or_insert_with(|| {
                spans.push(UnitSpans {
                    name: u.name.clone(),
                    pre: Vec::new(),
                    post: Vec::new(),
                });
                spans.len() - 1
            });
            if is_pre {
                spans[i].pre = u.ranges.clone();
            } else {
                spans[i].post = u.ranges.clone();
            }
        }
    }
    let changed = fc.changed_lines();
    let mut out = Vec::new();
    for rel in select_relevant_units(fc, &spans) {
        let a = unit_cpg(pre.as_ref(), &pre_units, &rel.unit_name, &fc.path, Version::Previous);
        let b = unit_cpg(post.as_ref(), &post_units, &rel.unit_name, &fc.path, Version::Current);
        let pairs = align(&a, &b, &changed.unchanged);
        let merged = merge(&a, &b, &pairs)?;
        match slice(&merged, opts) {
            Ok(graph) => out.push(UnitGraph {
                file: fc.path.clone(),
                unit: rel.unit_name,
                graph,
            }),
            Err(CommitCpgError::NoChange) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Builds the commit graph over the source files kept by `filter`.
pub fn build_commit_cpg(
    bundle: &CommitBundle,
    filter: &SourceFilter,
    opts: &SliceOptions,
) -> Result<CommitGraph, CommitCpgError> {
    let mut units = Vec::new();
    for fc in &bundle.files {
        let keep = filter
            .keeps(&fc.path)
            .map_err(|e| CommitCpgError::InvalidFilter(e.to_string()))?;
        if !keep || fc.is_unchanged() {
            continue;
        }
        units.extend(build_file_graphs(fc, opts)?);
    }
    if units.is_empty() {
        return Err(CommitCpgError::NoChange);
    }
    let graph = union(&units.iter().map(|u| u.graph.clone()).collect::<Vec<_>>());
    Ok(CommitGraph {
        commit_id: bundle.commit_id(),
        units,
        graph,
    })
}
