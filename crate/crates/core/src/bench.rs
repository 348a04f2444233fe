//! Timing comparison between the tree planner and the oracle.

use std::fmt::Write;
use std::time::Instant;

use crate::gridmap::{Cell, GridMap};
use crate::oracle::{anchors, default_lmax, oracle_k_snpp};
use crate::record::{compare, RunRecord};
use crate::tree::{k_snpp, PlanError, PlannerOptions};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub map: String,
    pub start: Cell,
    pub goal: Cell,
    pub k: usize,
    /// Mean wall time over the trials.
    pub tree_ms: f64,
    pub oracle_ms: f64,
    pub ratio_pct: f64,
    /// Whether the two planners agreed on the classes (1.5 cell tolerance).
    pub matched: bool,
    /// Set on maps without internal obstacles, where nothing can be pruned.
    pub flagged: bool,
}

/// Word-length bound used for benchmarking. Paths through cluttered maps
/// cross many cuts, so the bound grows with the obstacle count.
pub fn bench_lmax(map: &GridMap, k: usize) -> usize {
    default_lmax(k) + anchors(map).len()
}

/// Times `trials` runs of each planner on one query.
pub fn bench_case(
    map: &GridMap,
    name: &str,
    start: Cell,
    goal: Cell,
    k: usize,
    trials: usize,
) -> Result<BenchRow, PlanError> {
    let lmax = bench_lmax(map, k);
    let (mut tree_ms, mut oracle_ms) = (0.0, 0.0);
    let mut last = None;
    for _ in 0..trials.max(1) {
        let t0 = Instant::now();
        let t = k_snpp(map, start, goal, PlannerOptions::new(k))?;
        tree_ms += t0.elapsed().as_secs_f64() * 1e3;
        let t0 = Instant::now();
        let o = oracle_k_snpp(map, start, goal, k, lmax);
        oracle_ms += t0.elapsed().as_secs_f64() * 1e3;
        last = Some((t, o));
    }
    let n = trials.max(1) as f64;
    let (tree_ms, oracle_ms) = (tree_ms / n, oracle_ms / n);
    let (t, o) = last.expect("at least one trial");
    let a = RunRecord::from_tree(name, start, goal, k, true, &t);
    let b = RunRecord::from_oracle(name, start, goal, k, map.cell_size(), &o);
    let matched = compare(&a, &b, 1.5 * map.cell_size()).is_ok_and(|c| c.matched);
    Ok(BenchRow {
        map: name.to_string(),
        start,
        goal,
        k,
        tree_ms,
        oracle_ms,
        ratio_pct: if oracle_ms > 0.0 { 100.0 * tree_ms / oracle_ms } else { f64::INFINITY },
        matched,
        flagged: anchors(map).is_empty(),
    })
}

pub fn to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("map,goal,k,tree_ms,oracle_ms,ratio_pct\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},\"{},{}\",{},{:.3},{:.3},{:.2}",
            r.map, r.goal.row, r.goal.col, r.k, r.tree_ms, r.oracle_ms, r.ratio_pct
        );
    }
    out
}

/// Human-readable table with match and flag columns.
pub fn to_table(rows: &[BenchRow]) -> String {
    let mut out = format!(
        "{:<24} {:>10} {:>3} {:>10} {:>11} {:>8}  note\n",
        "map", "goal", "k", "tree_ms", "oracle_ms", "ratio%"
    );
    for r in rows {
        let mut note = Vec::new();
        if !r.matched {
            note.push("MISMATCH");
        }
        if r.flagged {
            note.push("no obstacles");
        }
        let _ = writeln!(
            out,
            "{:<24} {:>10} {:>3} {:>10.2} {:>11.2} {:>8.2}  {}",
            r.map,
            r.goal.to_string(),
            r.k,
            r.tree_ms,
            r.oracle_ms,
            r.ratio_pct,
            note.join(", ")
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    #[test]
    fn ring_row_matches_and_csv_has_header() {
        let f = fixtures::ring21();
        let row = bench_case(&f.map, "ring21", f.start, f.goal, 2, 1).unwrap();
        assert!(row.matched);
        assert!(!row.flagged);
        let csv = to_csv(&[row]);
        assert!(csv.starts_with("map,goal,k,tree_ms,oracle_ms,ratio_pct\n"));
        assert_eq!(csv.lines().count(), 2);
    }

    #[test]
    fn empty_room_is_flagged() {
        let f = fixtures::empty21();
        let row = bench_case(&f.map, "empty21", f.start, f.goal, 1, 1).unwrap();
        assert!(row.flagged);
    }
}
