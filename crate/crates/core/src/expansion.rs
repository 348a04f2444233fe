//! Construction of a single tree node: sparse raycasting from a source,
//! gap detection, corridor-restricted edges to critical points, gap
//! sweepers, and repair when the sparse fan missed an obstacle.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use log::{debug, warn};
use rustc_hash::FxHashSet;
use thiserror::Error;

use crate::geometry::{normalize_angle, OctileLength};
use crate::gridmap::{Cell, GridMap, RayHit};
use crate::search::{self, SearchScratch};
use crate::Point;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ExpansionError {
    #[error("source cell {0} is not free")]
    SourceNotFree(Cell),
    #[error("raycast refinement exceeded depth cap between angles {lo:.9} and {hi:.9}")]
    DepthCap { lo: f64, hi: f64 },
    #[error("ray repair did not settle after {0} rounds")]
    RepairLimit(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExpansionParams {
    /// Clearance used by the closure test and the corridor half-width (meters).
    pub clearance: f64,
    /// Tolerance of the near/far alignment test (meters).
    pub eps: f64,
    /// Maximum bisection depth between two initial rays.
    pub depth_cap: usize,
    /// Maximum number of repair rounds per node.
    pub max_repairs: usize,
}

impl ExpansionParams {
    pub fn for_map(map: &GridMap) -> Self {
        let s = map.cell_size();
        Self { clearance: s, eps: 0.1 * s, depth_cap: 64, max_repairs: 64 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub theta: f64,
    pub hit: RayHit,
}

impl Ray {
    /// Where the ray enters the first inflated cell.
    pub fn endpoint(&self) -> Point {
        self.hit.entry
    }

    /// Distance from the source to the endpoint.
    pub fn length(&self) -> f64 {
        self.hit.entry_distance
    }

    pub fn cell(&self) -> Cell {
        self.hit.cell
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Gap {
    /// Ray with the smaller angle.
    pub lower: Ray,
    /// Ray with the larger angle.
    pub upper: Ray,
}

impl Gap {
    pub fn near_is_lower(&self) -> bool {
        self.lower.length() < self.upper.length()
    }

    pub fn near(&self) -> Ray {
        if self.near_is_lower() {
            self.lower
        } else {
            self.upper
        }
    }

    pub fn far(&self) -> Ray {
        if self.near_is_lower() {
            self.upper
        } else {
            self.lower
        }
    }

    fn key(&self) -> (u64, u64) {
        (self.lower.theta.to_bits(), self.upper.theta.to_bits())
    }
}

/// Rays cast from one source, sorted by angle.
#[derive(Clone, Debug, PartialEq)]
pub struct RayFan {
    pub source: Point,
    pub theta_min: f64,
    pub theta_max: f64,
    pub full_circle: bool,
    pub rays: Vec<Ray>,
}

fn cast(map: &GridMap, source: Point, theta: f64) -> Ray {
    let hit = map.raycast(source, theta).expect("source checked free");
    Ray { theta, hit }
}

/// Perpendicular distance of the near endpoint to the far ray is below `eps`.
fn aligned(source: Point, a: &Ray, b: &Ray, p: &ExpansionParams) -> bool {
    let (near, far) = if a.length() < b.length() { (a, b) } else { (b, a) };
    let dir = Point::from_angle(far.theta);
    (near.endpoint() - source).cross(dir).abs() < p.eps
}

/// Both rays end on one unbroken obstacle face: the lattice line between the
/// two hit cells never leaves the inflated obstacles. Such a pair is a
/// grazing view of a wall, not an occlusion.
fn same_face(map: &GridMap, a: &Ray, b: &Ray) -> bool {
    let (ca, cb) = (a.cell(), b.cell());
    let d = map.center(cb) - map.center(ca);
    let steps = ca.chebyshev(cb);
    let (cells, free_hit) = search::walk_line(ca, d.x, d.y, steps, |r, c| !map.is_free_rc(r, c));
    free_hit.is_none() && cells.last() == Some(&cb)
}

impl RayFan {
    /// Casts the initial rays and refines until every neighboring pair is
    /// either closed or a gap.
    pub fn cast(
        map: &GridMap,
        source: Point,
        theta_min: f64,
        theta_max: f64,
        full_circle: bool,
        params: &ExpansionParams,
    ) -> Result<Self, ExpansionError> {
        let cell = map.cell_of(source).unwrap_or(Cell::new(usize::MAX, usize::MAX));
        if !map.is_free(cell) {
            return Err(ExpansionError::SourceNotFree(cell));
        }
        let angles: Vec<f64> = if full_circle {
            vec![0.0, FRAC_PI_2, PI, 1.5 * PI, TAU]
        } else {
            vec![theta_min, theta_max]
        };
        let rays = angles.into_iter().map(|t| cast(map, source, t)).collect();
        let (theta_min, theta_max) = if full_circle { (0.0, TAU) } else { (theta_min, theta_max) };
        let mut fan = Self { source, theta_min, theta_max, full_circle, rays };
        fan.refine(map, params)?;
        Ok(fan)
    }

    /// Bisects every open, misaligned neighbor pair.
    pub fn refine(&mut self, map: &GridMap, params: &ExpansionParams) -> Result<(), ExpansionError> {
        let mut out = Vec::with_capacity(self.rays.len() * 2);
        out.push(self.rays[0]);
        for i in 1..self.rays.len() {
            let a = self.rays[i - 1];
            let b = self.rays[i];
            self.refine_pair(map, a, b, 0, params, &mut out)?;
            out.push(b);
        }
        self.rays = out;
        Ok(())
    }

    fn refine_pair(
        &self,
        map: &GridMap,
        a: Ray,
        b: Ray,
        depth: usize,
        params: &ExpansionParams,
        out: &mut Vec<Ray>,
    ) -> Result<(), ExpansionError> {
        if self.is_closed(map, &a, &b, params) || (aligned(self.source, &a, &b, params) && !same_face(map, &a, &b)) {
            return Ok(());
        }
        let mid = 0.5 * (a.theta + b.theta);
        if depth >= params.depth_cap || mid <= a.theta || mid >= b.theta {
            return Err(ExpansionError::DepthCap { lo: a.theta, hi: b.theta });
        }
        let m = cast(map, self.source, mid);
        self.refine_pair(map, a, m, depth + 1, params, out)?;
        out.push(m);
        self.refine_pair(map, m, b, depth + 1, params, out)
    }

    fn is_closed(&self, map: &GridMap, a: &Ray, b: &Ray, params: &ExpansionParams) -> bool {
        map.center(a.cell()).distance(map.center(b.cell())) < 2.0 * params.clearance - 1e-9
    }

    /// Neighbor pairs whose endpoints are at least `2·clearance` apart.
    pub fn gaps(&self, map: &GridMap, params: &ExpansionParams) -> Vec<Gap> {
        self.rays
            .windows(2)
            .filter(|w| !self.is_closed(map, &w[0], &w[1], params))
            .map(|w| Gap { lower: w[0], upper: w[1] })
            .collect()
    }

    /// Whether `theta` lies in the fan's angular range; returns it shifted into that range.
    fn in_range(&self, theta: f64) -> Option<f64> {
        if self.full_circle {
            return Some(normalize_angle(theta));
        }
        let t = self.theta_min + normalize_angle(theta - self.theta_min);
        (t <= self.theta_max).then_some(t)
    }
}

/// Rectangle `φ ∈ [0, Φ_near]`, `ψ ∈ [-R, R]` in the frame `(ā, b̄)` anchored at the source.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Corridor {
    pub source: Point,
    pub a: Point,
    pub b: Point,
    pub phi_near: f64,
    pub radius: f64,
    /// `p + Φ_near ā + R b̄`.
    pub critical: Point,
}

/// Corridor along the far ray; `b̄` points away from the near ray.
pub fn build_corridor(source: Point, theta_far: f64, phi_near: f64, radius: f64, near_is_lower: bool) -> Corridor {
    let a = Point::from_angle(theta_far);
    let b = if near_is_lower {
        Point::from_angle(theta_far + FRAC_PI_2)
    } else {
        -Point::from_angle(theta_far + FRAC_PI_2)
    };
    Corridor { source, a, b, phi_near, radius, critical: source + a * phi_near + b * radius }
}

impl Corridor {
    /// Coordinates `(φ, ψ)` of a point in the corridor frame.
    pub fn local(&self, x: Point) -> (f64, f64) {
        let d = x - self.source;
        (d.dot(self.a), d.dot(self.b))
    }
}

/// Lattice path from a node source to one of its critical points.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub cells: Vec<Cell>,
    /// Cell centers with collinear runs merged.
    pub polyline: Vec<Point>,
    pub length: OctileLength,
}

impl Edge {
    pub fn from_cells(map: &GridMap, cells: Vec<Cell>) -> Self {
        let length = search::path_length(&cells).expect("edge cells are lattice neighbors");
        let polyline = simplify(map, &cells);
        Self { cells, polyline, length }
    }
}

/// Cell centers of a lattice path with interior points of straight runs dropped.
pub fn simplify(map: &GridMap, cells: &[Cell]) -> Vec<Point> {
    let mut out: Vec<Point> = Vec::new();
    let mut last_dir: Option<(isize, isize)> = None;
    for (i, c) in cells.iter().enumerate() {
        if i > 0 {
            let p = cells[i - 1];
            let d = (c.row as isize - p.row as isize, c.col as isize - p.col as isize);
            if d == (0, 0) {
                continue;
            }
            if Some(d) == last_dir {
                out.pop();
            }
            last_dir = Some(d);
        }
        out.push(map.center(*c));
    }
    out
}

/// Blocked cells in a region that no ray of the fan ends on (or next to).
fn unexplained(fan: &RayFan, cells: impl Iterator<Item = Cell>) -> Vec<Cell> {
    cells
        .filter(|c| !fan.rays.iter().any(|r| r.cell().chebyshev(*c) <= 1))
        .collect()
}

/// Grid-optimal path from `start` to `goal` restricted to the corridor band.
///
/// On failure, returns the centers of inflated cells inside the band that
/// the fan does not account for.
pub fn plan_in_corridor(
    map: &GridMap,
    scratch: &mut SearchScratch,
    corridor: &Corridor,
    start: Cell,
    goal: Cell,
    fan: Option<&RayFan>,
) -> Result<Edge, Vec<Point>> {
    let s = map.cell_size();
    let (phi_goal, _) = corridor.local(map.center(goal));
    let phi_max = corridor.phi_near.max(phi_goal) + 0.5 * s;
    let half = corridor.radius + 0.5 * s;
    let inside_rect = |c: Cell| {
        let (phi, psi) = corridor.local(map.center(c));
        phi >= -0.5 * s && phi <= phi_max && psi.abs() <= half
    };
    if !map.is_free(goal) {
        return Err(vec![map.center(goal)]);
    }
    let w = map.width();
    let path = search::astar(
        map,
        scratch,
        start,
        goal,
        |i| {
            let c = Cell::new(i / w, i % w);
            map.is_free_idx(i) && (c == start || c == goal || inside_rect(c))
        },
        |i| map.is_free_idx(i),
    );
    match path {
        Some(p) => Ok(Edge::from_cells(map, p.cells)),
        None => {
            // Bounding box of the band, then keep blocked cells inside it.
            let corners = [
                corridor.source + corridor.b * half,
                corridor.source - corridor.b * half,
                corridor.source + corridor.a * phi_max + corridor.b * half,
                corridor.source + corridor.a * phi_max - corridor.b * half,
            ];
            let r0 = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) / s;
            let r1 = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) / s;
            let c0 = corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) / s;
            let c1 = corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) / s;
            let mut blocked = Vec::new();
            for r in (r0.floor().max(0.0) as usize)..=(r1.ceil() as usize).min(map.height() - 1) {
                for c in (c0.floor().max(0.0) as usize)..=(c1.ceil() as usize).min(map.width() - 1) {
                    let cell = Cell::new(r, c);
                    if !map.is_free(cell) && inside_rect(cell) {
                        blocked.push(cell);
                    }
                }
            }
            let cells = match fan {
                Some(f) => unexplained(f, blocked.into_iter()),
                None => blocked,
            };
            Err(cells.into_iter().map(|c| map.center(c)).collect())
        }
    }
}

/// Straight wall from a critical point along the far ray, up to the first obstacle.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSweeper {
    /// Critical point (center of the critical cell).
    pub start: Point,
    /// Center of the last free cell on the sweep (`o`).
    pub end: Point,
    pub cells: Vec<Cell>,
    /// Obstacle cell that stopped the sweep (`e_f`).
    pub blocking: Cell,
    pub direction: Point,
}

impl GapSweeper {
    pub fn segment(&self) -> (Point, Point) {
        (self.start, self.end)
    }

    /// Lattice cost from the critical cell to the sweeper cell nearest `q`.
    pub fn cost_to(&self, q: Point) -> f64 {
        (q - self.start).octile_norm()
    }
}

/// Sweeps from the critical cell along `dir` until the first inflated cell.
///
/// Fails with the stopping obstacle if no ray of the fan accounts for it and
/// the sweep stopped well short of the far endpoint.
pub fn sweep_gap(map: &GridMap, fan: &RayFan, gap: &Gap, critical: Cell, dir: Point, clearance: f64) -> Result<GapSweeper, Vec<Point>> {
    let max_steps = map.width() + map.height();
    let (cells, block) = search::walk_line(critical, dir.x, dir.y, max_steps, |r, c| map.is_free_rc(r, c));
    let (br, bc) = block.expect("sealed map stops every sweep");
    let blocking = Cell::new(br.max(0) as usize, bc.max(0) as usize);
    let known = fan.rays.iter().any(|r| r.cell().chebyshev(blocking) <= 1);
    let phi_block = (map.center(blocking) - fan.source).dot(Point::from_angle(gap.far().theta));
    if !known && phi_block < gap.far().length() - 2.0 * clearance {
        return Err(vec![map.center(blocking)]);
    }
    let end = map.center(*cells.last().expect("walk includes the start cell"));
    Ok(GapSweeper { start: map.center(critical), end, cells, blocking, direction: dir })
}

/// Inserts rays toward newly found obstacles and drops rays they make redundant.
///
/// Obstacles outside the fan's angular range or not directly visible from the
/// source are skipped with a warning. Returns how many rays were inserted.
pub fn repair_rays(
    map: &GridMap,
    fan: &mut RayFan,
    obstacles: &[Point],
    params: &ExpansionParams,
    tried: &mut FxHashSet<Cell>,
) -> Result<usize, ExpansionError> {
    let mut inserted = 0;
    for &x in obstacles {
        let Some(target) = map.cell_of(x) else { continue };
        if !tried.insert(target) {
            continue;
        }
        let Some(theta) = fan.in_range((x - fan.source).angle()) else {
            warn!("repair target {target} lies outside the fan's angular range; skipped");
            continue;
        };
        let ray = cast(map, fan.source, theta);
        if ray.cell().chebyshev(target) > 1 {
            warn!("repair target {target} is not visible from the source; skipped");
            continue;
        }
        let pos = fan.rays.partition_point(|r| r.theta < theta);
        if fan.rays.get(pos).is_some_and(|r| r.theta == theta) {
            continue;
        }
        fan.rays.insert(pos, ray);
        inserted += 1;
        drop_shadowed(map, fan, pos, params);
    }
    if inserted > 0 {
        fan.refine(map, params)?;
    }
    Ok(inserted)
}

/// Removes rays that pass behind a closed pair formed with the new ray at `pos`.
fn drop_shadowed(map: &GridMap, fan: &mut RayFan, pos: usize, params: &ExpansionParams) {
    let new = fan.rays[pos];
    let close = |r: &Ray| map.center(r.cell()).distance(map.center(new.cell())) < 2.0 * params.clearance - 1e-9;
    // Forward side.
    let mut j = pos + 1;
    while j < fan.rays.len() && fan.rays[j].length() > new.length() && !close(&fan.rays[j]) {
        j += 1;
    }
    if j < fan.rays.len() && j > pos + 1 && close(&fan.rays[j]) {
        let bound = new.length().max(fan.rays[j].length());
        if fan.rays[pos + 1..j].iter().all(|r| r.length() > bound) {
            fan.rays.drain(pos + 1..j);
        }
    }
    // Backward side.
    let mut j = pos;
    while j > 0 && fan.rays[j - 1].length() > new.length() && !close(&fan.rays[j - 1]) {
        j -= 1;
    }
    if j > 0 && j < pos && close(&fan.rays[j - 1]) {
        let bound = new.length().max(fan.rays[j - 1].length());
        if fan.rays[j..pos].iter().all(|r| r.length() > bound) {
            fan.rays.drain(j..pos);
        }
    }
}

/// Region of a child node: the wedge between its spawning sweeper and its jamb.
#[derive(Clone, Debug, PartialEq)]
pub struct Wedge {
    pub apex: Point,
    pub sweep_dir: Point,
    pub jamb: Point,
}

impl Wedge {
    /// Strictly inside the wedge (the sweeper line and the jamb line excluded).
    pub fn contains(&self, x: Point) -> bool {
        let d = x - self.apex;
        let j = self.jamb - self.apex;
        let side_j = self.sweep_dir.cross(j).signum();
        let side_s = j.cross(self.sweep_dir).signum();
        self.sweep_dir.cross(d) * side_j > 1e-9 && j.cross(d) * side_s > 1e-9
    }
}

/// Everything a node hands to one child.
#[derive(Clone, Debug, PartialEq)]
pub struct ChildSpec {
    pub gap: Gap,
    pub corridor: Corridor,
    pub critical_cell: Cell,
    pub edge: Edge,
    pub sweeper: GapSweeper,
    pub theta_min: f64,
    pub theta_max: f64,
    pub wedge: Wedge,
}

impl ChildSpec {
    pub fn critical(&self) -> Point {
        self.sweeper.start
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NodeGeometry {
    pub fan: RayFan,
    pub children: Vec<ChildSpec>,
    pub repairs: usize,
    /// Gaps dropped because no valid critical cell or corridor edge exists.
    pub discarded: usize,
}

/// Cell diagonal to the near hit cell at its corner facing the far ray.
fn critical_cell(map: &GridMap, source: Point, gap: &Gap, corridor: &Corridor) -> Option<Cell> {
    let s = map.cell_size();
    let j = gap.near().cell();
    let jc = map.center(j);
    let mut best: Option<(f64, f64, Point)> = None;
    for (dx, dy) in [(-0.5, -0.5), (0.5, -0.5), (-0.5, 0.5), (0.5, 0.5)] {
        let k = jc + Point::new(dx * s, dy * s);
        let (phi, psi) = corridor.local(k);
        let better = match best {
            None => true,
            Some((bpsi, bphi, _)) => psi > bpsi + 1e-9 || ((psi - bpsi).abs() <= 1e-9 && phi < bphi),
        };
        if better {
            best = Some((psi, phi, k));
        }
    }
    let k = best?.2;
    let dr = (k.y - jc.y).signum() as isize;
    let dc = (k.x - jc.x).signum() as isize;
    let d = j.offset(dr, dc)?;
    let src = map.cell_of(source)?;
    (map.is_free(d) && d != src).then_some(d)
}

/// Builds the fan, gaps, edges and sweepers for a node at `source_cell`.
pub fn expand_node(
    map: &GridMap,
    scratch: &mut SearchScratch,
    source_cell: Cell,
    theta_min: f64,
    theta_max: f64,
    full_circle: bool,
    params: &ExpansionParams,
) -> Result<NodeGeometry, ExpansionError> {
    if !map.is_free(source_cell) {
        return Err(ExpansionError::SourceNotFree(source_cell));
    }
    let source = map.center(source_cell);
    let mut fan = RayFan::cast(map, source, theta_min, theta_max, full_circle, params)?;
    let mut tried = FxHashSet::default();
    let mut repairs = 0;
    loop {
        let gaps = fan.gaps(map, params);
        let mut children = Vec::with_capacity(gaps.len());
        let mut discarded = 0;
        let mut pending: Option<Vec<Point>> = None;
        for gap in &gaps {
            let near = gap.near();
            let far = gap.far();
            let corridor = build_corridor(source, far.theta, near.length(), params.clearance, gap.near_is_lower());
            let Some(crit) = critical_cell(map, source, gap, &corridor) else {
                debug!("gap {:?} has no usable critical cell", gap.key());
                discarded += 1;
                continue;
            };
            let edge = match plan_in_corridor(map, scratch, &corridor, source_cell, crit, Some(&fan)) {
                Ok(e) => e,
                Err(obs) => {
                    if !obs.is_empty() && pending.is_none() {
                        pending = Some(obs);
                    }
                    discarded += 1;
                    continue;
                }
            };
            let dir = corridor.a;
            let sweeper = match sweep_gap(map, &fan, gap, crit, dir, params.clearance) {
                Ok(sw) => sw,
                Err(obs) => {
                    if pending.is_none() {
                        pending = Some(obs);
                    }
                    // Keep the sweep as found if the repair cannot improve the fan.
                    let max_steps = map.width() + map.height();
                    let (cells, block) = search::walk_line(crit, dir.x, dir.y, max_steps, |r, c| map.is_free_rc(r, c));
                    let (br, bc) = block.expect("sealed map");
                    GapSweeper {
                        start: map.center(crit),
                        end: map.center(*cells.last().unwrap()),
                        cells,
                        blocking: Cell::new(br as usize, bc as usize),
                        direction: dir,
                    }
                }
            };
            let c = map.center(crit);
            let jamb = map.center(near.cell());
            let theta_n = (jamb - c).angle();
            let theta_f = (map.center(sweeper.blocking) - c).angle();
            let (lo, hi) = if gap.near_is_lower() { (theta_n, theta_f) } else { (theta_f, theta_n) };
            let tmin = normalize_angle(lo);
            let span = normalize_angle(hi - lo);
            if span <= 0.0 {
                discarded += 1;
                continue;
            }
            children.push(ChildSpec {
                gap: *gap,
                corridor,
                critical_cell: crit,
                edge,
                sweeper,
                theta_min: tmin,
                theta_max: tmin + span,
                wedge: Wedge { apex: c, sweep_dir: dir, jamb },
            });
        }
        if let Some(obs) = pending {
            if repairs < params.max_repairs && repair_rays(map, &mut fan, &obs, params, &mut tried)? > 0 {
                repairs += 1;
                continue;
            }
        }
        return Ok(NodeGeometry { fan, children, repairs, discarded });
    }
}
