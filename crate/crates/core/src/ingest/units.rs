// SPDX-License-Identifier: Apache-2.0

use serde::{Deserialize, Serialize};

use super::FileChange;

/// Name under which modified top-level statements are reported.
pub const MODULE_UNIT: &str = "<module>";

/// Inclusive 1-based line range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LineRange {
    pub start: usize,
    pub end: usize,
}

impl LineRange {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end);
        LineRange { start, end }
    }

    pub fn contains(&self, line: usize) -> bool {
        self.start <= line && line <= self.end
    }

    pub fn hull(a: Option<Self>, b: Self) -> Self {
        match a {
            None => b,
            Some(a) => LineRange::new(a.start.min(b.start), a.end.max(b.end)),
        }
    }
}

/// Where a code unit lives in each version. Functions have one range per
/// version; the module unit lists each of its top-level statements.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitSpans {
    pub name: String,
    pub pre: Vec<LineRange>,
    pub post: Vec<LineRange>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelevantUnit {
    pub file: String,
    pub unit_name: String,
    /// Hull of the overlapping pre-version ranges, if the unit exists there.
    pub pre_span: Option<LineRange>,
    pub post_span: Option<LineRange>,
}

/// Keeps the units whose extent overlaps a deleted (pre) or added (post)
/// line. Output follows the order of `units`.
pub fn select_relevant_units(fc: &FileChange, units: &[UnitSpans]) -> Vec<RelevantUnit> {
    let changed = fc.changed_lines();
    let mut out = Vec::new();
    for unit in units {
        let pre_hit = unit
            .pre
            .iter()
            .any(|r| changed.deleted.iter().any(|&l| r.contains(l)));
        let post_hit = unit
            .post
            .iter()
            .any(|r| changed.added.iter().any(|&l| r.contains(l)));
        if !(pre_hit || post_hit) {
            continue;
        }
        let hull = |rs: &[LineRange]| rs.iter().fold(None, |acc, r| Some(LineRange::hull(acc, *r)));
        out.push(RelevantUnit {
            file: fc.path.clone(),
            unit_name: unit.name.clone(),
            pre_span: hull(&unit.pre),
            post_span: hull(&unit.post),
        });
    }
    out
}
