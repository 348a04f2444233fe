//! Lattice search shared by the planner and the oracle.
//!
//! Moves are 8-connected; a diagonal move needs both orthogonal side cells
//! passable, so paths never squeeze between touching obstacles.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::geometry::OctileLength;
use crate::gridmap::{Cell, GridMap};

const DIRS: [(isize, isize); 8] = [
    (0, 1),
    (1, 0),
    (0, -1),
    (-1, 0),
    (1, 1),
    (1, -1),
    (-1, 1),
    (-1, -1),
];

/// Neighbors of `idx` as `(index, is_diagonal)`.
pub fn neighbors<F: Fn(usize) -> bool>(
    map: &GridMap,
    idx: usize,
    passable: F,
) -> impl Iterator<Item = (usize, bool)> {
    let w = map.width() as isize;
    let h = map.height() as isize;
    let r = (idx as isize) / w;
    let c = (idx as isize) % w;
    let mut out = [(0usize, false); 8];
    let mut n = 0;
    let ok = |rr: isize, cc: isize| rr >= 0 && cc >= 0 && rr < h && cc < w && passable((rr * w + cc) as usize);
    for &(dr, dc) in &DIRS {
        let rr = r + dr;
        let cc = c + dc;
        if !ok(rr, cc) {
            continue;
        }
        let diag = dr != 0 && dc != 0;
        if diag && !(ok(r + dr, c) && ok(r, c + dc)) {
            continue;
        }
        out[n] = ((rr * w + cc) as usize, diag);
        n += 1;
    }
    out.into_iter().take(n)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridPath {
    pub cells: Vec<Cell>,
    pub length: OctileLength,
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    f: f64,
    g: f64,
    idx: usize,
}

impl PartialEq for Entry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Entry {}
impl PartialOrd for Entry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Entry {
    fn cmp(&self, o: &Self) -> Ordering {
        // Min-heap on f, then prefer larger g, then lower index.
        o.f.total_cmp(&self.f)
            .then(self.g.total_cmp(&o.g))
            .then(o.idx.cmp(&self.idx))
    }
}

/// Reusable buffers for repeated searches on the same map.
#[derive(Clone, Debug, Default)]
pub struct SearchScratch {
    stamp: Vec<u32>,
    closed: Vec<u32>,
    g: Vec<OctileLength>,
    parent: Vec<u32>,
    generation: u32,
}

impl SearchScratch {
    pub fn new(map: &GridMap) -> Self {
        let n = map.len();
        Self {
            stamp: vec![0; n],
            closed: vec![0; n],
            g: vec![OctileLength::ZERO; n],
            parent: vec![u32::MAX; n],
            generation: 0,
        }
    }

    fn begin(&mut self, n: usize) {
        if self.stamp.len() != n {
            *self = Self {
                stamp: vec![0; n],
                closed: vec![0; n],
                g: vec![OctileLength::ZERO; n],
                parent: vec![u32::MAX; n],
                generation: 0,
            };
        }
        self.generation = self.generation.wrapping_add(1);
        if self.generation == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.closed.iter_mut().for_each(|s| *s = 0);
            self.generation = 1;
        }
    }
}

/// Shortest lattice path from `start` to `goal` through cells accepted by `inside`.
///
/// `passable` decides the corner-cutting test for diagonal moves and should
/// accept every cell `inside` accepts.
pub fn astar<I, P>(
    map: &GridMap,
    scratch: &mut SearchScratch,
    start: Cell,
    goal: Cell,
    inside: I,
    passable: P,
) -> Option<GridPath>
where
    I: Fn(usize) -> bool,
    P: Fn(usize) -> bool,
{
    astar_walled(map, scratch, start, goal, inside, passable, |_| 0)
}

/// Like [`astar`], with one-cell-thick walls that paths may brush past but
/// not cross. `wall` labels each cell with a bitmask of the walls it belongs
/// to; a diagonal move is refused when both side cells share a wall.
pub fn astar_walled<I, P, W>(
    map: &GridMap,
    scratch: &mut SearchScratch,
    start: Cell,
    goal: Cell,
    inside: I,
    passable: P,
    wall: W,
) -> Option<GridPath>
where
    I: Fn(usize) -> bool,
    P: Fn(usize) -> bool,
    W: Fn(usize) -> u64,
{
    if !map.contains(start) || !map.contains(goal) {
        return None;
    }
    let s = map.index(start);
    let t = map.index(goal);
    if !inside(s) || !inside(t) {
        return None;
    }
    scratch.begin(map.len());
    let gen = scratch.generation;
    let w = map.width();
    let h = |i: usize| OctileLength::between((i / w) as i64 - goal.row as i64, (i % w) as i64 - goal.col as i64).cells::<f64>();
    let mut heap = BinaryHeap::new();
    scratch.stamp[s] = gen;
    scratch.g[s] = OctileLength::ZERO;
    scratch.parent[s] = u32::MAX;
    heap.push(Entry { f: h(s), g: 0.0, idx: s });
    while let Some(e) = heap.pop() {
        if scratch.closed[e.idx] == gen {
            continue;
        }
        scratch.closed[e.idx] = gen;
        if e.idx == t {
            let mut cells = vec![map.cell_at(t)];
            let mut cur = t;
            while scratch.parent[cur] != u32::MAX {
                cur = scratch.parent[cur] as usize;
                cells.push(map.cell_at(cur));
            }
            cells.reverse();
            return Some(GridPath { cells, length: scratch.g[t] });
        }
        let g0 = scratch.g[e.idx];
        for (n, diag) in neighbors(map, e.idx, &passable) {
            if scratch.closed[n] == gen || !inside(n) {
                continue;
            }
            if diag && wall((e.idx / w) * w + n % w) & wall((n / w) * w + e.idx % w) != 0 {
                continue;
            }
            let g1 = g0 + OctileLength::step(diag);
            if scratch.stamp[n] != gen || g1 < scratch.g[n] {
                scratch.stamp[n] = gen;
                scratch.g[n] = g1;
                scratch.parent[n] = e.idx as u32;
                let gf = g1.cells::<f64>();
                heap.push(Entry { f: gf + h(n), g: gf, idx: n });
            }
        }
    }
    None
}

/// Exact lattice length of a cell sequence, or `None` if a step is not a single move.
pub fn path_length(cells: &[Cell]) -> Option<OctileLength> {
    let mut len = OctileLength::ZERO;
    for w in cells.windows(2) {
        match w[0].chebyshev(w[1]) {
            0 => {}
            1 => len += OctileLength::step(w[0].row != w[1].row && w[0].col != w[1].col),
            _ => return None,
        }
    }
    Some(len)
}

/// Checks that consecutive cells are lattice neighbors and that every move is legal.
pub fn is_valid_path(map: &GridMap, cells: &[Cell]) -> bool {
    if cells.iter().any(|&c| !map.is_free(c)) {
        return false;
    }
    cells.windows(2).all(|w| {
        let (a, b) = (w[0], w[1]);
        match a.chebyshev(b) {
            0 => true,
            1 => {
                if a.row != b.row && a.col != b.col {
                    map.is_free(Cell::new(a.row, b.col)) && map.is_free(Cell::new(b.row, a.col))
                } else {
                    true
                }
            }
            _ => false,
        }
    })
}

/// Rasterizes a straight walk from `from` heading `dir` (unit, cell units) into
/// an 8-connected cell sequence, stopping before the first cell rejected by
/// `free` or before a diagonal move that would cut a blocked corner.
///
/// Returns the walked cells (starting with `from`) and the blocking cell.
pub fn walk_line<F: Fn(isize, isize) -> bool>(from: Cell, dx: f64, dy: f64, max_steps: usize, free: F) -> (Vec<Cell>, Option<(isize, isize)>) {
    let mut cells = vec![from];
    let (major_x, len) = if dx.abs() >= dy.abs() { (true, dx.abs()) } else { (false, dy.abs()) };
    if len == 0.0 {
        return (cells, None);
    }
    let step_major: isize = if major_x { if dx > 0.0 { 1 } else { -1 } } else if dy > 0.0 { 1 } else { -1 };
    let slope = if major_x { dy / dx.abs() } else { dx / dy.abs() };
    let r0 = from.row as isize;
    let c0 = from.col as isize;
    let (mut pr, mut pc) = (r0, c0);
    for i in 1..=max_steps as isize {
        let minor = (slope * i as f64).round() as isize;
        let (r, c) = if major_x { (r0 + minor, c0 + step_major * i) } else { (r0 + step_major * i, c0 + minor) };
        if !free(r, c) {
            return (cells, Some((r, c)));
        }
        if r != pr && c != pc {
            if !free(pr, c) {
                return (cells, Some((pr, c)));
            }
            if !free(r, pc) {
                return (cells, Some((r, pc)));
            }
        }
        cells.push(Cell::new(r as usize, c as usize));
        pr = r;
        pc = c;
    }
    (cells, None)
}
