//! Hierarchical topological tree and the k-SNPP search over it.
//!
//! Each node owns a source cell and a fan of rays. Every gap of the fan
//! yields a leaf: a critical cell reached by a corridor edge, plus a sweeper
//! that walls the gap's shadow off from the node's own region. Expanding a
//! leaf builds a child node at its critical cell whose region is the wedge
//! between the spawning sweeper and the gap's jamb. Regions of different
//! nodes may overlap in the plane; they live on different sheets of the
//! covering space, which is how paths wrapping around obstacles arise.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};
use std::f64::consts::TAU;
use std::time::Instant;

use log::{debug, info, warn};
use rustc_hash::FxHashSet;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expansion::{expand_node, simplify, ChildSpec, ExpansionError, ExpansionParams, GapSweeper, NodeGeometry};
use crate::geometry::{normalize_angle, winding_number, OctileLength};
use crate::gridmap::{Cell, GridMap};
use crate::oracle::{CutTable, HSignature};
use crate::pruning::{
    crit_edge_edge, crit_edge_sweeper, crit_goal_dependent, crit_sweeper_edge, crit_sweeper_sweeper,
    should_prune, BranchId, Criterion, Crossing, Relation, RelationStore, SegmentIndex, StructureKind, StructureRef,
    proven_shorter,
};
use crate::search::{self, SearchScratch};
use crate::Point;

/// Bounds within this many meters of the k-th result length count as ties.
const LENGTH_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum PlanError {
    #[error("start cell {0} is not free")]
    StartBlocked(Cell),
    #[error("goal cell {0} is not free")]
    GoalBlocked(Cell),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("root expansion failed: {0}")]
    Root(#[from] ExpansionError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExpansionOrder {
    /// Lowest `f = g + h` first.
    BestFirst,
    /// Leaves in creation order; used to check order independence.
    Fifo,
}

#[derive(Clone, Debug)]
pub struct PlannerOptions {
    pub k: usize,
    pub prune: bool,
    pub expansion_cap: usize,
    pub order: ExpansionOrder,
    /// Slack added to every pruning inequality, in cells.
    pub margin_cells: f64,
    /// Report no path at once when the goal is outside the start's free component.
    pub precheck_reachability: bool,
    pub params: Option<ExpansionParams>,
}

impl PlannerOptions {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            prune: true,
            expansion_cap: 100_000,
            order: ExpansionOrder::BestFirst,
            margin_cells: 1.5,
            precheck_reachability: true,
            params: None,
        }
    }

    pub fn without_pruning(mut self) -> Self {
        self.prune = false;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LeafState {
    Open,
    Expanded(usize),
    Pruned(Criterion),
    /// Child construction failed; the leaf is dropped with a warning.
    Failed,
}

#[derive(Clone, Debug)]
pub struct TreeNode {
    pub id: usize,
    /// Leaf this node was expanded from; `None` for the root.
    pub origin: Option<BranchId>,
    pub source_cell: Cell,
    pub source: Point,
    /// Lattice cost from the start to the source.
    pub g: OctileLength,
    pub depth: usize,
    pub geometry: NodeGeometry,
    pub leaves: Vec<LeafState>,
    pub leaf_f: Vec<f64>,
    /// Whether the goal was reached inside this node's region.
    pub goal_in_region: bool,
}

impl TreeNode {
    pub fn children(&self) -> &[ChildSpec] {
        &self.geometry.children
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    pub cells: Vec<Cell>,
    pub length: OctileLength,
    pub length_m: f64,
    pub signature: HSignature,
    pub branch: BranchId,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanStats {
    /// Nodes constructed, root included.
    pub expansions: usize,
    pub leaves: usize,
    /// Leaves dropped, keyed by the criterion that completed the count.
    pub pruned: BTreeMap<Criterion, usize>,
    /// Relations recorded per criterion.
    pub relations: BTreeMap<Criterion, usize>,
    pub failed_expansions: usize,
    pub repairs: usize,
    pub duplicate_classes: usize,
    /// Expansions performed when the first result was emitted.
    pub first_result_expansions: Option<usize>,
    pub pruned_before_first_result: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PlanOutcome {
    pub results: Vec<PlannedPath>,
    pub stats: PlanStats,
    pub no_path: bool,
    pub classes_exhausted: bool,
    pub incomplete: bool,
}

#[derive(Clone, Debug)]
struct Candidate {
    cells: Vec<Cell>,
    length: OctileLength,
    branch: BranchId,
}

#[derive(Clone, Copy, Debug)]
enum Item {
    Result(usize),
    Leaf(usize, usize),
}

#[derive(Clone, Copy, Debug)]
struct OpenItem {
    key: f64,
    exact: Option<OctileLength>,
    g: f64,
    node: usize,
    item: Item,
}

impl OpenItem {
    fn rank(&self) -> u8 {
        match self.item {
            Item::Result(_) => 0,
            Item::Leaf(..) => 1,
        }
    }
}

impl PartialEq for OpenItem {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for OpenItem {}
impl PartialOrd for OpenItem {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for OpenItem {
    // Reversed: BinaryHeap pops the maximum.
    fn cmp(&self, o: &Self) -> Ordering {
        let key = match (self.exact, o.exact) {
            (Some(a), Some(b)) => a.cmp(&b),
            _ => self.key.total_cmp(&o.key),
        };
        key.then(self.rank().cmp(&o.rank()))
            .then(self.g.total_cmp(&o.g))
            .then(self.node.cmp(&o.node))
            .then_with(|| match (self.item, o.item) {
                (Item::Leaf(_, a), Item::Leaf(_, b)) => a.cmp(&b),
                (Item::Result(a), Item::Result(b)) => a.cmp(&b),
                _ => Ordering::Equal,
            })
            .reverse()
    }
}

/// Band beside a sweeper that a region may not enter.
struct Strip {
    origin: Point,
    dir: Point,
    len: f64,
    /// Sign of `dir × (x − origin)` on the excluded side.
    side: f64,
    width: f64,
}

impl Strip {
    /// `toward_jamb` excludes the jamb side (a node walling off its child);
    /// otherwise the far side (a child walling off its parent).
    fn new(sw: &GapSweeper, jamb: Point, toward_jamb: bool, cell: f64) -> Self {
        let dir = sw.direction.unit();
        let jamb_side = dir.cross(jamb - sw.start).signum();
        Self {
            origin: sw.start,
            dir,
            len: (sw.end - sw.start).dot(dir) + 1.5 * cell,
            side: if toward_jamb { jamb_side } else { -jamb_side },
            width: 2.0 * cell,
        }
    }

    fn excludes(&self, x: Point) -> bool {
        let d = x - self.origin;
        let t = d.dot(self.dir);
        let n = self.dir.cross(d) * self.side;
        t > 0.0 && t <= self.len && n > 1e-9 && n <= self.width
    }

    /// Loose test: can `x` lie in the child's region at all?
    fn cone_may_contain(spec: &ChildSpec, x: Point, slack: f64) -> bool {
        let d = x - spec.critical();
        if d.norm() <= slack || angle_in(d.angle(), spec.theta_min, spec.theta_max) {
            return true;
        }
        // Distance to either bounding ray.
        [spec.theta_min, spec.theta_max].iter().any(|&th| {
            let u = Point::from_angle(th);
            let t = d.dot(u);
            t > 0.0 && u.cross(d).abs() <= slack
        })
    }
}

/// Appends `more` to `cells`, bridging any gap with king moves and
/// skipping repeats.
fn join(cells: &mut Vec<Cell>, more: impl IntoIterator<Item = Cell>) {
    for next in more {
        while let Some(&last) = cells.last() {
            if last == next {
                break;
            }
            let step = |a: usize, b: usize| if b > a { a + 1 } else if b < a { a - 1 } else { a };
            cells.push(Cell::new(step(last.row, next.row), step(last.col, next.col)));
        }
        if cells.is_empty() {
            cells.push(next);
        }
    }
}

fn angle_in(a: f64, lo: f64, hi: f64) -> bool {
    normalize_angle(a - lo) <= hi - lo + 1e-9
}

/// Mutable search state over the tree.
pub struct Planner<'m> {
    map: &'m GridMap,
    start: Cell,
    goal: Cell,
    opts: PlannerOptions,
    params: ExpansionParams,
    nodes: Vec<TreeNode>,
    heap: BinaryHeap<OpenItem>,
    fifo: VecDeque<OpenItem>,
    relations: RelationStore,
    index: SegmentIndex,
    candidates: Vec<Candidate>,
    emitted: Vec<usize>,
    seen_signatures: FxHashSet<HSignature>,
    cuts: CutTable,
    scratch: SearchScratch,
    stats: PlanStats,
    threshold: Option<OctileLength>,
    incomplete: bool,
    /// Branches that gained relations since the last prune pass.
    touched: FxHashSet<BranchId>,
    /// Leaf states captured when the first result was emitted.
    first_result_snapshot: Option<Vec<(BranchId, LeafState)>>,
}

impl<'m> Planner<'m> {
    pub fn new(map: &'m GridMap, start: Cell, goal: Cell, opts: PlannerOptions) -> Result<Self, PlanError> {
        if opts.k == 0 {
            return Err(PlanError::InvalidK);
        }
        if !map.is_free(start) {
            return Err(PlanError::StartBlocked(start));
        }
        if !map.is_free(goal) {
            return Err(PlanError::GoalBlocked(goal));
        }
        let params = opts.params.unwrap_or_else(|| ExpansionParams::for_map(map));
        let s = map.cell_size();
        Ok(Self {
            map,
            start,
            goal,
            params,
            nodes: Vec::new(),
            heap: BinaryHeap::new(),
            fifo: VecDeque::new(),
            relations: RelationStore::new(),
            index: SegmentIndex::new(8.0 * s, 0.05 * s),
            candidates: Vec::new(),
            emitted: Vec::new(),
            seen_signatures: FxHashSet::default(),
            cuts: CutTable::new(map),
            scratch: SearchScratch::new(map),
            stats: PlanStats::default(),
            threshold: None,
            incomplete: false,
            touched: FxHashSet::default(),
            first_result_snapshot: None,
            opts,
        })
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn relations(&self) -> &RelationStore {
        &self.relations
    }

    pub fn first_result_snapshot(&self) -> Option<&[(BranchId, LeafState)]> {
        self.first_result_snapshot.as_deref()
    }

    fn margin(&self) -> f64 {
        self.opts.margin_cells * self.map.cell_size()
    }

    fn meters(&self, l: OctileLength) -> f64 {
        l.meters(self.map.cell_size())
    }

    /// Branch a node was expanded from (the root's is `ROOT`).
    pub fn origin_branch(&self, node: usize) -> BranchId {
        self.nodes[node].origin.unwrap_or(BranchId::ROOT)
    }

    /// `b` and every branch above it, up to the root.
    pub fn chain(&self, b: BranchId) -> Vec<BranchId> {
        let mut out = vec![b];
        let mut cur = b;
        while cur != BranchId::ROOT {
            cur = self.origin_branch(cur.node as usize);
            out.push(cur);
        }
        out
    }

    /// Whether `a` is a strict ancestor of `b`.
    pub fn is_ancestor(&self, a: BranchId, b: BranchId) -> bool {
        a != b && self.chain(b).contains(&a)
    }

    /// Lattice path from the start to the critical cell of leaf `b`.
    pub fn tree_path_cells(&self, b: BranchId) -> Vec<Cell> {
        let mut segs: Vec<&[Cell]> = Vec::new();
        let mut cur = b;
        while cur != BranchId::ROOT {
            let node = &self.nodes[cur.node as usize];
            segs.push(&node.children()[cur.child as usize].edge.cells);
            cur = self.origin_branch(cur.node as usize);
        }
        let mut cells = vec![self.start];
        for s in segs.into_iter().rev() {
            cells.extend_from_slice(&s[1..]);
        }
        cells
    }

    fn tree_path_polyline(&self, b: BranchId) -> Vec<Point> {
        simplify(self.map, &self.tree_path_cells(b))
    }

    fn goal_covered(&self, b: BranchId) -> bool {
        if b == BranchId::ROOT {
            return self.nodes[0].goal_in_region;
        }
        let mut n = Some(b.node as usize);
        while let Some(i) = n {
            if self.nodes[i].goal_in_region {
                return true;
            }
            n = self.nodes[i].origin.map(|o| o.node as usize);
        }
        false
    }

    fn leaf_g(&self, b: BranchId) -> OctileLength {
        let node = &self.nodes[b.node as usize];
        node.g + node.children()[b.child as usize].edge.length
    }

    fn push(&mut self, item: OpenItem) {
        match self.opts.order {
            ExpansionOrder::BestFirst => self.heap.push(item),
            ExpansionOrder::Fifo => self.fifo.push_back(item),
        }
    }

    fn pop(&mut self) -> Option<OpenItem> {
        match self.opts.order {
            ExpansionOrder::BestFirst => self.heap.pop(),
            ExpansionOrder::Fifo => {
                // Results still come out by length so emission stays canonical.
                self.fifo.pop_front()
            }
        }
    }

    /// Runs the search to completion.
    pub fn run(&mut self) -> Result<PlanOutcome, PlanError> {
        let t0 = Instant::now();
        if self.opts.precheck_reachability && !self.map.free_component(self.start)[self.map.index(self.goal)] {
            info!("goal is outside the start's free component");
            self.stats.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
            return Ok(PlanOutcome { stats: self.stats.clone(), no_path: true, ..Default::default() });
        }
        let geometry = expand_node(self.map, &mut self.scratch, self.start, 0.0, TAU, true, &self.params)?;
        self.add_node(None, geometry);
        self.prune_touched();

        while let Some(top) = self.pop() {
            if let Some(l) = self.threshold {
                let beyond = match top.exact {
                    Some(e) => e > l,
                    None => top.key > self.meters(l) + LENGTH_TOL,
                };
                // The bound on the k-th result is itself a pruning rule; the
                // unpruned tree keeps going until the open list or the cap runs out.
                if beyond && self.opts.prune && self.opts.order == ExpansionOrder::BestFirst {
                    break;
                }
            }
            match top.item {
                Item::Result(idx) => self.emit(idx),
                Item::Leaf(n, c) => {
                    if self.nodes[n].leaves[c] != LeafState::Open {
                        continue;
                    }
                    if self.opts.prune {
                        if let Some(reason) = self.prune_reason(BranchId::new(n, c), top.key) {
                            self.mark_pruned(n, c, reason);
                            continue;
                        }
                    }
                    if self.stats.expansions >= self.opts.expansion_cap {
                        warn!("expansion cap {} reached", self.opts.expansion_cap);
                        self.incomplete = true;
                        break;
                    }
                    self.expand_leaf(n, c);
                }
            }
        }

        let mut results: Vec<PlannedPath> = self
            .emitted
            .iter()
            .map(|&i| {
                let c = &self.candidates[i];
                PlannedPath {
                    cells: c.cells.clone(),
                    length: c.length,
                    length_m: self.meters(c.length),
                    signature: self.cuts.signature(&c.cells),
                    branch: c.branch,
                }
            })
            .collect();
        results.sort_by(|a, b| a.length.cmp(&b.length).then_with(|| a.signature.to_string().cmp(&b.signature.to_string())));
        results.truncate(self.opts.k);
        self.stats.relations = self.relations.counts().clone();
        self.stats.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        let no_path = results.is_empty() && !self.incomplete;
        Ok(PlanOutcome {
            classes_exhausted: !self.incomplete && !no_path && results.len() < self.opts.k,
            no_path,
            incomplete: self.incomplete,
            results,
            stats: self.stats.clone(),
        })
    }

    fn emit(&mut self, idx: usize) {
        let sig = self.cuts.signature(&self.candidates[idx].cells);
        if !self.seen_signatures.insert(sig) {
            self.stats.duplicate_classes += 1;
            debug!("duplicate class from branch {:?}", self.candidates[idx].branch);
            return;
        }
        if self.emitted.is_empty() {
            self.stats.first_result_expansions = Some(self.stats.expansions);
            self.first_result_snapshot = Some(
                self.nodes
                    .iter()
                    .flat_map(|n| n.leaves.iter().enumerate().map(move |(c, s)| (BranchId::new(n.id, c), *s)))
                    .collect(),
            );
        }
        self.emitted.push(idx);
        let len = self.candidates[idx].length;
        if self.emitted.len() == self.opts.k && self.threshold.is_none() {
            self.threshold = Some(len);
        }
        if self.opts.prune {
            let l = self.meters(len);
            let better = self.candidates[idx].branch;
            let witness = self.cuts.signature(&self.candidates[idx].cells);
            for n in 0..self.nodes.len() {
                for c in 0..self.nodes[n].leaves.len() {
                    if self.nodes[n].leaves[c] == LeafState::Open && self.nodes[n].leaf_f[c] > l + LENGTH_TOL {
                        let worse = BranchId::new(n, c);
                        let rel = Relation { better, worse, criterion: Criterion::ResultBound, witness: Some(witness.clone()) };
                        if self.relations.add(rel) {
                            self.touched.insert(worse);
                        }
                    }
                }
            }
            self.prune_touched();
        }
    }

    fn mark_pruned(&mut self, n: usize, c: usize, reason: Criterion) {
        self.nodes[n].leaves[c] = LeafState::Pruned(reason);
        *self.stats.pruned.entry(reason).or_default() += 1;
        if self.emitted.is_empty() {
            self.stats.pruned_before_first_result += 1;
        }
    }

    /// Drops open leaves as soon as new relations make them prunable, rather
    /// than waiting for them to reach the front of the queue.
    fn prune_touched(&mut self) {
        if !self.opts.prune || self.touched.is_empty() {
            self.touched.clear();
            return;
        }
        let touched = std::mem::take(&mut self.touched);
        for n in 0..self.nodes.len() {
            for c in 0..self.nodes[n].leaves.len() {
                if self.nodes[n].leaves[c] != LeafState::Open {
                    continue;
                }
                let b = BranchId::new(n, c);
                if !self.chain(b).iter().any(|x| touched.contains(x)) {
                    continue;
                }
                if let Some(reason) = self.prune_reason(b, self.nodes[n].leaf_f[c]) {
                    self.mark_pruned(n, c, reason);
                }
            }
        }
    }

    /// Criterion that completes the prune count for a leaf, if it is prunable.
    fn prune_reason(&self, leaf: BranchId, f: f64) -> Option<Criterion> {
        let chain = self.chain(leaf);
        let mut beats = chain.iter().flat_map(|&b| self.relations.better_than(b));
        let lk = self.threshold.map(|l| self.meters(l) + LENGTH_TOL);
        if !should_prune(proven_shorter(beats.clone()), self.opts.k, self.emitted.len(), f, lk) {
            return None;
        }
        let geometric = proven_shorter(beats.clone().filter(|b| b.criterion != Criterion::ResultBound));
        if geometric >= self.opts.k {
            let last = beats.rfind(|b| b.criterion != Criterion::ResultBound && b.witness.as_ref().is_none_or(|w| !w.is_empty()));
            return last.map(|b| b.criterion);
        }
        Some(Criterion::ResultBound)
    }

    fn expand_leaf(&mut self, n: usize, c: usize) {
        let spec = self.nodes[n].children()[c].clone();
        match expand_node(self.map, &mut self.scratch, spec.critical_cell, spec.theta_min, spec.theta_max, false, &self.params) {
            Ok(g) => {
                let id = self.add_node(Some(BranchId::new(n, c)), g);
                self.nodes[n].leaves[c] = LeafState::Expanded(id);
                self.prune_touched();
            }
            Err(e) => {
                warn!("expanding leaf ({n},{c}) failed: {e}");
                self.nodes[n].leaves[c] = LeafState::Failed;
                self.stats.failed_expansions += 1;
            }
        }
    }

    fn add_node(&mut self, origin: Option<BranchId>, geometry: NodeGeometry) -> usize {
        let id = self.nodes.len();
        let (source_cell, g, depth) = match origin {
            None => (self.start, OctileLength::ZERO, 0),
            Some(b) => {
                let parent = &self.nodes[b.node as usize];
                let spec = &parent.children()[b.child as usize];
                (spec.critical_cell, parent.g + spec.edge.length, parent.depth + 1)
            }
        };
        self.stats.expansions += 1;
        self.stats.repairs += geometry.repairs;
        let nchild = geometry.children.len();
        self.nodes.push(TreeNode {
            id,
            origin,
            source_cell,
            source: self.map.center(source_cell),
            g,
            depth,
            geometry,
            leaves: vec![LeafState::Open; nchild],
            leaf_f: vec![0.0; nchild],
            goal_in_region: false,
        });

        // Goal inside this node's region?
        if let Some(path) = self.region_path(id) {
            self.nodes[id].goal_in_region = true;
            let mut cells = match origin {
                None => vec![self.start],
                Some(b) => self.tree_path_cells(b),
            };
            cells.extend_from_slice(&path.cells[1..]);
            debug_assert!(search::is_valid_path(self.map, &cells));
            let length = g + path.length;
            let idx = self.candidates.len();
            self.candidates.push(Candidate { cells, length, branch: origin.unwrap_or(BranchId::ROOT) });
            let key = self.meters(length);
            self.push(OpenItem { key, exact: Some(length), g: key, node: id, item: Item::Result(idx) });
        }

        // Leaves.
        let goal_pt = self.map.center(self.goal);
        for c in 0..nchild {
            let spec = &self.nodes[id].children()[c];
            let gl = g + spec.edge.length;
            let h = (goal_pt - self.map.center(spec.critical_cell)).octile_norm();
            let f = self.meters(gl) + h;
            self.nodes[id].leaf_f[c] = f;
            self.stats.leaves += 1;
            self.push(OpenItem { key: f, exact: None, g: self.meters(gl), node: id, item: Item::Leaf(id, c) });
        }

        if self.opts.prune {
            if let Some(o) = origin {
                for c in 0..nchild {
                    if self.relations.inherit(o, BranchId::new(id, c)) > 0 {
                        self.touched.insert(BranchId::new(id, c));
                    }
                }
            }
            for c in 0..nchild {
                self.register_structures(id, c);
            }
        }
        id
    }

    /// Lattice path from a node's source to the goal inside the node's region.
    ///
    /// The region is what the node's fan encloses: a flood from the source
    /// bounded by obstacles, the node's own sweepers, and for a child node
    /// its spawning sweeper. Sweeper cells may be walked along; a strip on
    /// the forbidden side of each sweeper keeps paths from crossing it, and
    /// the cells around the source outside the node's sector are closed off.
    fn region_path(&mut self, id: usize) -> Option<search::GridPath> {
        let map = self.map;
        let s = map.cell_size();
        let node = &self.nodes[id];
        let mut strips: Vec<Strip> = Vec::new();
        let mut on_sweeper: FxHashSet<usize> = FxHashSet::default();
        for ch in node.children() {
            strips.push(Strip::new(&ch.sweeper, ch.wedge.jamb, true, s));
            on_sweeper.extend(ch.sweeper.cells.iter().map(|&c| map.index(c)));
        }
        let mut sector = None;
        if let Some(b) = node.origin {
            let spec = &self.nodes[b.node as usize].children()[b.child as usize];
            strips.push(Strip::new(&spec.sweeper, spec.wedge.jamb, false, s));
            on_sweeper.extend(spec.sweeper.cells.iter().map(|&c| map.index(c)));
            if !Strip::cone_may_contain(spec, map.center(self.goal), 2.0 * s) {
                return None;
            }
            sector = Some((node.source, spec.theta_min, spec.theta_max));
        }
        let src = map.index(node.source_cell);
        let w = map.width();
        let inside = |i: usize| {
            if !map.is_free_idx(i) {
                return false;
            }
            if i == src || on_sweeper.contains(&i) {
                return true;
            }
            let p = map.center(Cell::new(i / w, i % w));
            if let Some((apex, lo, hi)) = sector {
                let d = p - apex;
                if d.norm() <= 2.0 * s && !angle_in(d.angle(), lo, hi) {
                    return false;
                }
            }
            !strips.iter().any(|st| st.excludes(p))
        };
        search::astar(map, &mut self.scratch, node.source_cell, self.goal, inside, |i| map.is_free_idx(i))
    }

    /// Finds crossings of a new leaf's edge and sweeper with stored structures,
    /// records the resulting relations, then stores both structures.
    fn register_structures(&mut self, node: usize, child: usize) {
        let branch = BranchId::new(node, child);
        let spec = self.nodes[node].children()[child].clone();
        let sweeper_line = [spec.sweeper.start, spec.sweeper.end];
        let edge_hits = self.index.query(&spec.edge.polyline);
        let sweep_hits = if spec.sweeper.start.distance(spec.sweeper.end) > 0.0 {
            self.index.query(&sweeper_line)
        } else {
            Vec::new()
        };
        for hit in edge_hits {
            self.relate(StructureRef { branch, kind: StructureKind::Edge }, &hit);
        }
        for hit in sweep_hits {
            self.relate(StructureRef { branch, kind: StructureKind::Sweeper }, &hit);
        }
        self.index.insert(StructureRef { branch, kind: StructureKind::Edge }, &spec.edge.polyline);
        if spec.sweeper.start.distance(spec.sweeper.end) > 0.0 {
            self.index.insert(StructureRef { branch, kind: StructureKind::Sweeper }, &sweeper_line);
        }
    }

    /// Records `better ≺ worse`. `via` holds the two lattice prefixes from
    /// the start to the intersection, better first, when the witness loop
    /// does not depend on the route of the worse path.
    fn add_relation(&mut self, better: BranchId, worse: BranchId, criterion: Criterion, via: Option<(Vec<Cell>, Vec<Cell>)>) {
        if worse == BranchId::ROOT || better == worse || self.is_ancestor(worse, better) {
            return;
        }
        if self.goal_covered(worse) {
            return;
        }
        let witness = via.map(|(mut cells, back)| {
            join(&mut cells, back.iter().rev().copied());
            self.cuts.signature(&cells)
        });
        if witness.as_ref().is_some_and(HSignature::is_empty) {
            return;
        }
        debug!("{better:?} beats {worse:?} by {criterion}, loop {witness:?}");
        if self.relations.add(Relation { better, worse, criterion, witness }) {
            self.touched.insert(worse);
        }
    }

    /// Tree path of leaf `s` continued along its sweeper to `q`.
    fn via_sweeper(&self, s: BranchId, q: Point) -> Vec<Cell> {
        let mut cells = self.tree_path_cells(s);
        let sw = &self.nodes[s.node as usize].children()[s.child as usize].sweeper.cells;
        join(&mut cells, sw[..=self.nearest(sw, q)].iter().copied());
        cells
    }

    /// Tree path to the node owning edge `e`, continued along the edge to `q`.
    fn via_edge(&self, e: BranchId, q: Point) -> Vec<Cell> {
        let mut cells = self.tree_path_cells(self.origin_branch(e.node as usize));
        let ec = &self.nodes[e.node as usize].children()[e.child as usize].edge.cells;
        join(&mut cells, ec[..=self.nearest(ec, q)].iter().copied());
        cells
    }

    fn nearest(&self, cells: &[Cell], q: Point) -> usize {
        let d = |c: &Cell| (self.map.center(*c) - q).norm_sq();
        (0..cells.len()).min_by(|&a, &b| d(&cells[a]).total_cmp(&d(&cells[b]))).unwrap_or(0)
    }

    fn relate(&mut self, new: StructureRef, hit: &Crossing) {
        let m = self.margin();
        let q = hit.q;
        let old = hit.other;
        match (new.kind, old.kind) {
            (StructureKind::Sweeper, StructureKind::Sweeper) => {
                let (k, l) = (new.branch, old.branch);
                let ck = self.critical(k);
                let cl = self.critical(l);
                let gk = self.meters(self.leaf_g(k));
                let gl = self.meters(self.leaf_g(l));
                let dkq = (q - ck).octile_norm();
                let dlq = (q - cl).octile_norm();
                if crit_sweeper_sweeper(gk, gl, dlq, dkq, m) {
                    self.add_relation(l, k, Criterion::SweeperSweeper, Some((self.via_sweeper(l, q), self.via_sweeper(k, q))));
                } else if crit_sweeper_sweeper(gl, gk, dkq, dlq, m) {
                    self.add_relation(k, l, Criterion::SweeperSweeper, Some((self.via_sweeper(k, q), self.via_sweeper(l, q))));
                } else {
                    self.goal_dependent(k, l, q);
                }
            }
            (StructureKind::Edge, StructureKind::Sweeper) => self.edge_sweeper(new.branch, hit.arc_query, old.branch, q),
            (StructureKind::Sweeper, StructureKind::Edge) => self.edge_sweeper(old.branch, hit.arc_other, new.branch, q),
            (StructureKind::Edge, StructureKind::Edge) => {
                let gi = self.meters(self.nodes[new.branch.node as usize].g) + hit.arc_query;
                let gj = self.meters(self.nodes[old.branch.node as usize].g) + hit.arc_other;
                match crit_edge_edge(gi, gj, m) {
                    Some(true) => {
                        let better = self.origin_branch(old.branch.node as usize);
                        let (vb, vw) = (self.via_edge(old.branch, q), self.via_edge(new.branch, q));
                        self.add_relation(better, new.branch, Criterion::EdgeEdge, Some((vb, vw)));
                    }
                    Some(false) => {
                        let better = self.origin_branch(new.branch.node as usize);
                        let (vb, vw) = (self.via_edge(new.branch, q), self.via_edge(old.branch, q));
                        self.add_relation(better, old.branch, Criterion::EdgeEdge, Some((vb, vw)));
                    }
                    None => {}
                }
            }
        }
    }

    fn critical(&self, b: BranchId) -> Point {
        self.nodes[b.node as usize].children()[b.child as usize].critical()
    }

    /// Edge of leaf `e` crosses the sweeper of leaf `s` at `q`.
    fn edge_sweeper(&mut self, e: BranchId, arc: f64, s: BranchId, q: Point) {
        let m = self.margin();
        let g_edge_q = self.meters(self.nodes[e.node as usize].g) + arc;
        let cl = self.critical(s);
        let gl = self.meters(self.leaf_g(s));
        let dlq = (q - cl).octile_norm();
        if crit_sweeper_edge(g_edge_q, gl + dlq, m) {
            self.add_relation(s, e, Criterion::SweeperEdge, Some((self.via_sweeper(s, q), self.via_edge(e, q))));
        } else if crit_edge_sweeper(gl, g_edge_q + dlq, m) {
            let better = self.origin_branch(e.node as usize);
            self.add_relation(better, s, Criterion::EdgeSweeper, Some((self.via_edge(e, q), self.via_sweeper(s, q))));
        }
    }

    fn goal_dependent(&mut self, k: BranchId, l: BranchId, q: Point) {
        let open = |b: BranchId| self.nodes[b.node as usize].leaves[b.child as usize] == LeafState::Open;
        if !open(k) || !open(l) {
            return;
        }
        let mut poly = self.tree_path_polyline(k);
        poly.push(q);
        let mut back = self.tree_path_polyline(l);
        back.push(q);
        back.pop();
        poly.extend(back.into_iter().rev());
        let goal_outside = winding_number(&poly, self.map.center(self.goal)) == 0;
        if !goal_outside {
            return;
        }
        let probe = |b: BranchId| {
            let spec = &self.nodes[b.node as usize].children()[b.child as usize];
            let mid = 0.5 * (spec.theta_min + spec.theta_max);
            spec.critical() + Point::from_angle(mid) * (0.5 * self.map.cell_size())
        };
        let both_inside = winding_number(&poly, probe(k)) != 0 && winding_number(&poly, probe(l)) != 0;
        let m = self.margin();
        let gk = self.meters(self.leaf_g(k));
        let gl = self.meters(self.leaf_g(l));
        let dkq = (q - self.critical(k)).octile_norm();
        let dlq = (q - self.critical(l)).octile_norm();
        if crit_goal_dependent(gk, dkq, gl, dlq, goal_outside, both_inside, m) {
            // The worse path may wind inside Θ before it leaves, so no fixed loop.
            self.add_relation(l, k, Criterion::GoalDependent, None);
        } else if crit_goal_dependent(gl, dlq, gk, dkq, goal_outside, both_inside, m) {
            self.add_relation(k, l, Criterion::GoalDependent, None);
        }
    }
}

/// Convenience wrapper: builds a planner and runs it.
pub fn k_snpp(map: &GridMap, start: Cell, goal: Cell, opts: PlannerOptions) -> Result<PlanOutcome, PlanError> {
    Planner::new(map, start, goal, opts)?.run()
}
