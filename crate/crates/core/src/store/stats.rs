// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CandidateSource, Consensus, LabelRecord, Origin};
use crate::patterns::PatternCategory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionRow {
    pub origin: Origin,
    pub candidates: u64,
    pub security: u64,
    pub non_security: u64,
    pub undecided: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyRow {
    pub source: CandidateSource,
    pub candidates: u64,
    pub verified: u64,
    /// `verified / candidates`, 0 when there are no candidates.
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternRow {
    pub category: PatternCategory,
    pub count: u64,
    /// Percentage of tagged security commits.
    pub proportion: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountRow {
    pub key: String,
    pub count: u64,
}

/// Summary tables over the security-labeled part of a store.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub composition: Vec<CompositionRow>,
    pub efficiency: Vec<EfficiencyRow>,
    pub patterns: Vec<PatternRow>,
    /// Most frequent repositories among security commits.
    pub repos: Vec<CountRow>,
    pub cwe: Vec<CountRow>,
}

/// Share of candidates confirmed as security fixes.
pub fn efficiency_ratio(verified: u64, candidates: u64) -> f64 {
    if candidates == 0 {
        0.0
    } else {
        verified as f64 / candidates as f64
    }
}

/// Descending by count, then ascending by key.
fn ranked(counts: BTreeMap<String, u64>, limit: Option<usize>) -> Vec<CountRow> {
    let mut rows: Vec<CountRow> = counts.into_iter().map(|(key, count)| CountRow { key, count }).collect();
    rows.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.key.cmp(&b.key)));
    if let Some(n) = limit {
        rows.truncate(n);
    }
    rows
}

impl DatasetStats {
    pub fn compute(records: &[LabelRecord], top_repos: usize) -> Self {
        let composition = Origin::ALL
            .iter()
            .map(|&origin| {
                let rs: Vec<&LabelRecord> = records.iter().filter(|r| r.origin == origin).collect();
                let count = |c: Option<Consensus>| rs.iter().filter(|r| r.consensus == c).count() as u64;
                CompositionRow {
                    origin,
                    candidates: rs.len() as u64,
                    security: count(Some(Consensus::Security)),
                    non_security: count(Some(Consensus::NonSecurity)),
                    undecided: count(None),
                }
            })
            .collect::<Vec<_>>();
        let efficiency = composition
            .iter()
            .map(|c| EfficiencyRow {
                source: c.origin.source(),
                candidates: c.candidates,
                verified: c.security,
                ratio: efficiency_ratio(c.security, c.candidates),
            })
            .collect();

        let security: Vec<&LabelRecord> = records.iter().filter(|r| r.consensus == Some(Consensus::Security)).collect();
        let tagged: Vec<PatternCategory> = security.iter().filter_map(|r| r.pattern.as_ref().map(|p| p.category)).collect();
        let patterns = PatternCategory::ALL
            .iter()
            .map(|&category| {
                let count = tagged.iter().filter(|&&c| c == category).count() as u64;
                PatternRow {
                    category,
                    count,
                    proportion: if tagged.is_empty() { 0.0 } else { 100.0 * count as f64 / tagged.len() as f64 },
                }
            })
            .collect();

        let mut repos = BTreeMap::new();
        let mut cwe = BTreeMap::new();
        for r in &security {
            *repos.entry(r.repo()).or_insert(0) += 1;
            if let Some(c) = &r.cwe {
                *cwe.entry(c.clone()).or_insert(0) += 1;
            }
        }
        DatasetStats {
            composition,
            efficiency,
            patterns,
            repos: ranked(repos, Some(top_repos)),
            cwe: ranked(cwe, None),
        }
    }
}
