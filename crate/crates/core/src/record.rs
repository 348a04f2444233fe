//! Serializable run records and record comparison.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gridmap::Cell;
use crate::oracle::OracleOutcome;
use crate::pruning::Criterion;
use crate::tree::PlanOutcome;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordPath {
    pub length_m: f64,
    pub signature: String,
    /// Cells as `[row, col]`.
    pub path: Vec<[usize; 2]>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RecordStats {
    pub expansions: usize,
    /// Pruned leaves per criterion label.
    pub pruned: BTreeMap<String, usize>,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    /// `tree`, `tree-no-prune` or `oracle`.
    pub planner: String,
    /// Map file name or generator descriptor.
    pub map: String,
    pub start: [usize; 2],
    pub goal: [usize; 2],
    pub k: usize,
    pub results: Vec<RecordPath>,
    pub stats: RecordStats,
    pub no_path: bool,
    pub classes_exhausted: bool,
    /// Set when the expansion cap stopped the run.
    #[serde(default)]
    pub incomplete: bool,
}

fn rc(c: Cell) -> [usize; 2] {
    [c.row, c.col]
}

impl RunRecord {
    pub fn from_tree(map: &str, start: Cell, goal: Cell, k: usize, prune: bool, out: &PlanOutcome) -> Self {
        let pruned = out.stats.pruned.iter().map(|(c, n)| (c.label().to_string(), *n)).collect();
        Self {
            planner: if prune { "tree" } else { "tree-no-prune" }.to_string(),
            map: map.to_string(),
            start: rc(start),
            goal: rc(goal),
            k,
            results: out
                .results
                .iter()
                .map(|r| RecordPath {
                    length_m: r.length_m,
                    signature: r.signature.to_string(),
                    path: r.cells.iter().map(|&c| rc(c)).collect(),
                })
                .collect(),
            stats: RecordStats { expansions: out.stats.expansions, pruned, wall_ms: out.stats.wall_ms },
            no_path: out.no_path,
            classes_exhausted: out.classes_exhausted,
            incomplete: out.incomplete,
        }
    }

    pub fn from_oracle(map: &str, start: Cell, goal: Cell, k: usize, cell_size: f64, out: &OracleOutcome) -> Self {
        Self {
            planner: "oracle".to_string(),
            map: map.to_string(),
            start: rc(start),
            goal: rc(goal),
            k,
            results: out
                .results
                .iter()
                .map(|r| RecordPath {
                    length_m: r.length.meters(cell_size),
                    signature: r.signature.to_string(),
                    path: r.cells.iter().map(|&c| rc(c)).collect(),
                })
                .collect(),
            stats: RecordStats { expansions: out.expansions, pruned: BTreeMap::new(), wall_ms: out.wall_ms },
            no_path: out.no_path,
            classes_exhausted: out.classes_exhausted,
            incomplete: false,
        }
    }

    pub fn pruned_total(&self) -> usize {
        self.stats.pruned.values().sum()
    }

    /// Pruned count for one criterion.
    pub fn pruned_by(&self, c: Criterion) -> usize {
        self.stats.pruned.get(c.label()).copied().unwrap_or(0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CompareError {
    #[error("records disagree on {field}: {a} vs {b}")]
    Incompatible { field: &'static str, a: String, b: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiffRow {
    pub signature: String,
    pub a: Option<f64>,
    pub b: Option<f64>,
    pub ok: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Comparison {
    pub matched: bool,
    pub rows: Vec<DiffRow>,
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        writeln!(f, "{:<20} {:>12} {:>12}  status", "signature", "a", "b")?;
        for r in &self.rows {
            let sig = if r.signature.is_empty() { "(empty)" } else { &r.signature };
            writeln!(f, "{:<20} {:>12} {:>12}  {}", sig, show(r.a), show(r.b), if r.ok { "ok" } else { "DIFF" })?;
        }
        write!(f, "{}", if self.matched { "MATCH" } else { "MISMATCH" })
    }
}

/// MATCH iff both records hold the same signature multiset and each
/// signature's lengths differ by at most `tol` meters.
pub fn compare(a: &RunRecord, b: &RunRecord, tol: f64) -> Result<Comparison, CompareError> {
    let check = |field: &'static str, x: String, y: String| {
        if x == y {
            Ok(())
        } else {
            Err(CompareError::Incompatible { field, a: x, b: y })
        }
    };
    check("map", a.map.clone(), b.map.clone())?;
    check("start", format!("{:?}", a.start), format!("{:?}", b.start))?;
    check("goal", format!("{:?}", a.goal), format!("{:?}", b.goal))?;
    check("k", a.k.to_string(), b.k.to_string())?;

    let group = |r: &RunRecord| {
        let mut m: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for p in &r.results {
            m.entry(p.signature.clone()).or_default().push(p.length_m);
        }
        m
    };
    let (ga, gb) = (group(a), group(b));
    let mut keys: Vec<&String> = ga.keys().chain(gb.keys()).collect();
    keys.sort();
    keys.dedup();
    let mut rows = Vec::new();
    for key in keys {
        let la = ga.get(key).map_or(&[][..], |v| v.as_slice());
        let lb = gb.get(key).map_or(&[][..], |v| v.as_slice());
        for i in 0..la.len().max(lb.len()) {
            let (x, y) = (la.get(i).copied(), lb.get(i).copied());
            let ok = matches!((x, y), (Some(x), Some(y)) if (x - y).abs() <= tol);
            rows.push(DiffRow { signature: key.clone(), a: x, b: y, ok });
        }
    }
    Ok(Comparison { matched: rows.iter().all(|r| r.ok), rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(results: &[(&str, f64)]) -> RunRecord {
        RunRecord {
            planner: "tree".into(),
            map: "m".into(),
            start: [1, 1],
            goal: [2, 2],
            k: 2,
            results: results
                .iter()
                .map(|&(s, l)| RecordPath { length_m: l, signature: s.into(), path: vec![] })
                .collect(),
            stats: RecordStats::default(),
            no_path: false,
            classes_exhausted: false,
            incomplete: false,
        }
    }

    #[test]
    fn order_of_results_does_not_matter() {
        let a = rec(&[("", 3.0), ("1", 4.0)]);
        let b = rec(&[("1", 4.5), ("", 3.0)]);
        assert!(compare(&a, &b, 0.5).unwrap().matched);
        assert!(!compare(&a, &b, 0.4).unwrap().matched);
    }

    #[test]
    fn missing_class_is_a_mismatch() {
        let a = rec(&[("", 3.0), ("1", 4.0)]);
        let b = rec(&[("", 3.0), ("1~", 4.0)]);
        let c = compare(&a, &b, 1.0).unwrap();
        assert!(!c.matched);
        assert_eq!(c.rows.len(), 3);
    }

    #[test]
    fn different_k_is_an_error() {
        let a = rec(&[]);
        let mut b = rec(&[]);
        b.k = 3;
        assert!(matches!(compare(&a, &b, 0.0), Err(CompareError::Incompatible { field: "k", .. })));
    }
}
