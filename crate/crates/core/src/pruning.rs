//! Relative optimality between branches of the tree.
//!
//! A relation `better ≺ worse` says that the best path through the `worse`
//! branch is beaten by some path through `better`. Each relation carries a
//! witness. For a result bound it is the class of the result. For a geometric
//! relation it is the class of the closed loop that runs out along the better
//! prefix to the intersection and back along the worse one: swapping the
//! prefix turns a worse path `w` into the shorter path `loop · w`. Distinct
//! nontrivial loops therefore give distinct shorter classes, which is what
//! the `k`-count needs; distinct branches alone do not. A relation whose
//! loop depends on the route of the worse path has no witness and proves only
//! that one shorter class exists.
//!
//! Every inequality carries a `margin`. Intersection points are continuous
//! while paths live on the lattice; the margin absorbs the cost of snapping
//! a detour through `q` onto grid cells.

use std::collections::BTreeMap;
use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::geometry::{segment_intersection, Point2, Scalar};
use crate::oracle::HSignature;
use crate::Point;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Criterion {
    ResultBound,
    SweeperSweeper,
    GoalDependent,
    SweeperEdge,
    EdgeSweeper,
    EdgeEdge,
    Inherited,
}

impl Criterion {
    pub const ALL: [Criterion; 7] = [
        Criterion::ResultBound,
        Criterion::SweeperSweeper,
        Criterion::GoalDependent,
        Criterion::SweeperEdge,
        Criterion::EdgeSweeper,
        Criterion::EdgeEdge,
        Criterion::Inherited,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Criterion::ResultBound => "result-bound",
            Criterion::SweeperSweeper => "L-sweeper-sweeper",
            Criterion::GoalDependent => "P-goal-dependent",
            Criterion::SweeperEdge => "L-sweeper-edge",
            Criterion::EdgeSweeper => "C-edge-sweeper",
            Criterion::EdgeEdge => "L-edge-edge",
            Criterion::Inherited => "inherited",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Leaf with heuristic cost `f` is beaten by a result of length `l`.
pub fn crit_result_bound<T: Scalar>(f: T, l: T) -> bool {
    f > l
}

/// Two sweepers cross at `q`: `[c_l] ≺ [c_k]` when reaching `c_k` through
/// `c_l` and `q` is cheaper than `c_k`'s own cost.
pub fn crit_sweeper_sweeper<T: Scalar>(g_k: T, g_l: T, d_lq: T, d_qk: T, margin: T) -> bool {
    g_k > g_l + d_lq + d_qk + margin
}

/// Goal-dependent variant: the region closed by both tree paths to `q`
/// excludes the goal and both leaves expand into it.
pub fn crit_goal_dependent<T: Scalar>(
    g_k: T,
    d_kq: T,
    g_l: T,
    d_lq: T,
    goal_outside: bool,
    both_inside: bool,
    margin: T,
) -> bool {
    goal_outside && both_inside && g_k + d_kq > g_l + d_lq + margin
}

/// Edge `α_k^i` crosses sweeper `Δ_l^j` at `q`: `[c_l^j] ≺ [c_k^i]` when the
/// edge reaches `q` at higher cost than the sweeper does.
pub fn crit_sweeper_edge<T: Scalar>(g_edge_q: T, g_sweeper_q: T, margin: T) -> bool {
    g_edge_q > g_sweeper_q + margin
}

/// Same crossing, other direction: `[p^i] ≺ [c_l^j]` when `c_l` is costlier
/// than reaching it from `p^i` along the edge to `q` and back down the sweeper.
pub fn crit_edge_sweeper<T: Scalar>(g_l: T, g_edge_q_then_back: T, margin: T) -> bool {
    g_l > g_edge_q_then_back + margin
}

/// Two edges cross: the one reaching the crossing at higher cost is beaten.
/// Returns `Some(true)` if the first is worse, `Some(false)` if the second is.
pub fn crit_edge_edge<T: Scalar>(g_first_q: T, g_second_q: T, margin: T) -> Option<bool> {
    if g_first_q > g_second_q + margin {
        Some(true)
    } else if g_second_q > g_first_q + margin {
        Some(false)
    } else {
        None
    }
}

/// Leaf is dropped when `k` non-nested branches beat it, or when `k` results
/// are known and its heuristic exceeds the `k`-th length.
pub fn should_prune<T: Scalar>(better_count: usize, k: usize, results: usize, f: T, l_k: Option<T>) -> bool {
    better_count >= k || (results >= k && l_k.is_some_and(|l| f > l))
}

/// Interior intersections between two polylines, as `(q, arc_a, arc_b)`.
///
/// Touches within `tol` of either polyline's endpoints are ignored, as are
/// collinear overlaps.
pub fn collect_intersections<T: Scalar>(a: &[Point2<T>], b: &[Point2<T>], tol: T) -> Vec<(Point2<T>, T, T)> {
    let arc = |pl: &[Point2<T>]| {
        let mut s = vec![T::zero(); pl.len()];
        for i in 1..pl.len() {
            s[i] = s[i - 1] + pl[i - 1].distance(pl[i]);
        }
        s
    };
    let sa = arc(a);
    let sb = arc(b);
    let (ta, tb) = (*sa.last().unwrap_or(&T::zero()), *sb.last().unwrap_or(&T::zero()));
    let mut out: Vec<(Point2<T>, T, T)> = Vec::new();
    for i in 1..a.len() {
        for j in 1..b.len() {
            if let Some((q, t, u)) = segment_intersection(a[i - 1], a[i], b[j - 1], b[j]) {
                let s1 = sa[i - 1] + (sa[i] - sa[i - 1]) * t;
                let s2 = sb[j - 1] + (sb[j] - sb[j - 1]) * u;
                if s1 <= tol || s1 >= ta - tol || s2 <= tol || s2 >= tb - tol {
                    continue;
                }
                if out.iter().any(|o| o.0.distance(q) <= tol) {
                    continue;
                }
                out.push((q, s1, s2));
            }
        }
    }
    out
}

/// Identifies the branch below leaf `child` of node `node`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BranchId {
    pub node: u32,
    pub child: u32,
}

impl BranchId {
    /// The whole tree (paths found in the root region).
    pub const ROOT: BranchId = BranchId { node: u32::MAX, child: u32::MAX };

    pub fn new(node: usize, child: usize) -> Self {
        Self { node: node as u32, child: child as u32 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StructureKind {
    Edge,
    Sweeper,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct StructureRef {
    pub branch: BranchId,
    pub kind: StructureKind,
}

#[derive(Clone, Debug)]
struct IndexedSegment {
    owner: StructureRef,
    a: Point,
    b: Point,
    arc0: f64,
    total: f64,
}

/// Crossing found between a queried structure and a stored one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Crossing {
    pub other: StructureRef,
    pub q: Point,
    /// Arc length along the queried structure.
    pub arc_query: f64,
    /// Arc length along the stored structure.
    pub arc_other: f64,
}

/// Bucketed store of edge and sweeper segments for crossing queries.
#[derive(Clone, Debug)]
pub struct SegmentIndex {
    bucket: f64,
    grid: FxHashMap<(i32, i32), Vec<u32>>,
    segs: Vec<IndexedSegment>,
    tol: f64,
}

impl SegmentIndex {
    pub fn new(bucket: f64, tol: f64) -> Self {
        Self { bucket, grid: FxHashMap::default(), segs: Vec::new(), tol }
    }

    fn cells_of(&self, a: Point, b: Point) -> impl Iterator<Item = (i32, i32)> {
        let x0 = (a.x.min(b.x) / self.bucket).floor() as i32;
        let x1 = (a.x.max(b.x) / self.bucket).floor() as i32;
        let y0 = (a.y.min(b.y) / self.bucket).floor() as i32;
        let y1 = (a.y.max(b.y) / self.bucket).floor() as i32;
        (x0..=x1).flat_map(move |x| (y0..=y1).map(move |y| (x, y)))
    }

    pub fn insert(&mut self, owner: StructureRef, polyline: &[Point]) {
        let total: f64 = crate::geometry::polyline_length(polyline);
        let mut arc = 0.0;
        for w in polyline.windows(2) {
            let id = self.segs.len() as u32;
            self.segs.push(IndexedSegment { owner, a: w[0], b: w[1], arc0: arc, total });
            let cells: Vec<_> = self.cells_of(w[0], w[1]).collect();
            for c in cells {
                self.grid.entry(c).or_default().push(id);
            }
            arc += w[0].distance(w[1]);
        }
    }

    /// Interior crossings of `polyline` with every stored structure.
    pub fn query(&self, polyline: &[Point]) -> Vec<Crossing> {
        let total: f64 = crate::geometry::polyline_length(polyline);
        let mut out: Vec<Crossing> = Vec::new();
        let mut seen: Vec<u32> = Vec::new();
        let mut arc = 0.0;
        for w in polyline.windows(2) {
            seen.clear();
            for c in self.cells_of(w[0], w[1]) {
                if let Some(ids) = self.grid.get(&c) {
                    seen.extend_from_slice(ids);
                }
            }
            seen.sort_unstable();
            seen.dedup();
            let len = w[0].distance(w[1]);
            for &id in &seen {
                let s = &self.segs[id as usize];
                let Some((q, t, u)) = segment_intersection(w[0], w[1], s.a, s.b) else { continue };
                let s1 = arc + len * t;
                let s2 = s.arc0 + s.a.distance(s.b) * u;
                if s1 <= self.tol || s1 >= total - self.tol || s2 <= self.tol || s2 >= s.total - self.tol {
                    continue;
                }
                if out.iter().any(|o| o.other == s.owner && o.q.distance(q) <= self.tol) {
                    continue;
                }
                out.push(Crossing { other: s.owner, q, arc_query: s1, arc_other: s2 });
            }
            arc += len;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Relation {
    pub better: BranchId,
    pub worse: BranchId,
    pub criterion: Criterion,
    pub witness: Option<HSignature>,
}

/// One entry of a branch's better-set.
#[derive(Clone, Debug, PartialEq)]
pub struct Beat {
    pub better: BranchId,
    pub criterion: Criterion,
    pub witness: Option<HSignature>,
}

/// All relations found so far, indexed by the beaten branch.
#[derive(Clone, Debug, Default)]
pub struct RelationStore {
    by_worse: FxHashMap<BranchId, Vec<Beat>>,
    counts: BTreeMap<Criterion, usize>,
}

impl RelationStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records `better ≺ worse`; duplicates are ignored. Returns whether it was new.
    pub fn add(&mut self, rel: Relation) -> bool {
        let counted_as = rel.criterion;
        self.add_counted(rel.worse, Beat { better: rel.better, criterion: rel.criterion, witness: rel.witness }, counted_as)
    }

    fn add_counted(&mut self, worse: BranchId, beat: Beat, counted_as: Criterion) -> bool {
        if beat.better == worse {
            return false;
        }
        let v = self.by_worse.entry(worse).or_default();
        if v.iter().any(|b| b.better == beat.better && b.witness == beat.witness) {
            return false;
        }
        v.push(beat);
        *self.counts.entry(counted_as).or_default() += 1;
        true
    }

    pub fn better_than(&self, worse: BranchId) -> &[Beat] {
        self.by_worse.get(&worse).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Copies every relation against `parent` onto `child`, keeping its
    /// criterion and witness; the copies are tallied as inherited.
    pub fn inherit(&mut self, parent: BranchId, child: BranchId) -> usize {
        let inherited: Vec<Beat> = self.better_than(parent).to_vec();
        inherited.into_iter().filter(|b| self.add_counted(child, b.clone(), Criterion::Inherited)).count()
    }

    pub fn counts(&self) -> &BTreeMap<Criterion, usize> {
        &self.counts
    }

    /// Every stored relation as `(worse, beat)`, in no particular order.
    pub fn iter(&self) -> impl Iterator<Item = (BranchId, &Beat)> {
        self.by_worse.iter().flat_map(|(w, v)| v.iter().map(move |b| (*w, b)))
    }
}

/// Number of distinct classes that `beats` prove shorter than the worse branch.
///
/// Result classes and loop witnesses are never added together: a loop's class
/// depends on the unknown best worse path and may coincide with a result. A
/// trivial loop proves nothing.
pub fn proven_shorter<'a>(beats: impl IntoIterator<Item = &'a Beat>) -> usize {
    let mut results: Vec<&HSignature> = Vec::new();
    let mut loops: Vec<&HSignature> = Vec::new();
    let mut unknown = false;
    for b in beats {
        match &b.witness {
            None => unknown = true,
            Some(w) if b.criterion == Criterion::ResultBound => {
                if !results.contains(&w) {
                    results.push(w);
                }
            }
            Some(w) if w.is_empty() => {}
            Some(w) => {
                if !loops.contains(&w) {
                    loops.push(w);
                }
            }
        }
    }
    results.len().max(loops.len()).max(unknown as usize)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn criteria_at_f32_and_f64() {
        assert!(crit_sweeper_sweeper(10.0f32, 3.0, 2.0, 2.0, 0.0));
        assert!(!crit_sweeper_sweeper(6.0f64, 3.0, 2.0, 2.0, 0.0));
        assert!(crit_edge_edge(7.0f32, 5.0, 0.0) == Some(true));
        assert!(crit_edge_edge(5.0f64, 5.0, 0.0).is_none());
    }

    #[test]
    fn shorter_classes_count_distinct_nontrivial_loops() {
        let sig = |s: &str| s.parse::<HSignature>().unwrap();
        let beat = |n, c, w: &str| Beat { better: BranchId::new(n, 0), criterion: c, witness: Some(sig(w)) };
        let beats = [
            beat(1, Criterion::SweeperEdge, "1"),
            beat(2, Criterion::SweeperSweeper, "1"),
            beat(3, Criterion::EdgeEdge, ""),
            beat(4, Criterion::EdgeSweeper, "2~"),
            beat(5, Criterion::ResultBound, "1"),
        ];
        assert_eq!(proven_shorter(&beats), 2);
        let unknown = Beat { better: BranchId::new(6, 0), criterion: Criterion::GoalDependent, witness: None };
        assert_eq!(proven_shorter([&unknown]), 1);
        assert_eq!(proven_shorter(beats[..1].iter().chain([&unknown])), 1);
    }
}
