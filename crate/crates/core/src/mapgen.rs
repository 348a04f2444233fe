//! Seeded random maps for experiments.
//!
//! Obstacles are unions of one or two overlapping rectangles, kept at least
//! four robot radii from each other and from the border so that each stays a
//! separate component after inflation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::fixtures::Canvas;
use crate::gridmap::{Cell, GridMap};
use crate::oracle::anchors;

#[derive(Debug, Error, PartialEq)]
pub enum GenError {
    #[error("cannot fit {wanted} obstacles with the required spacing (placed at most {placed})")]
    Infeasible { wanted: usize, placed: usize },
    #[error("map must be at least {0} cells on each side")]
    TooSmall(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GenParams {
    pub width: usize,
    pub height: usize,
    pub obstacles: usize,
    pub seed: u64,
    pub cell_size: f64,
    pub robot_radius: f64,
    /// Obstacle side lengths in cells; defaults scale with the map.
    pub min_side: Option<usize>,
    pub max_side: Option<usize>,
}

impl GenParams {
    pub fn new(width: usize, height: usize, obstacles: usize, seed: u64) -> Self {
        Self { width, height, obstacles, seed, cell_size: 1.0, robot_radius: 1.0, min_side: None, max_side: None }
    }

    fn spacing(&self) -> usize {
        (4.0 * self.robot_radius / self.cell_size).ceil() as usize
    }

    fn sides(&self) -> (usize, usize) {
        let short = self.width.min(self.height);
        let lo = self.min_side.unwrap_or((short / 20).max(2));
        let hi = self.max_side.unwrap_or((short / 5).max(lo + 1));
        (lo, hi.max(lo))
    }
}

#[derive(Clone, Copy, Debug)]
struct Rect {
    r0: usize,
    c0: usize,
    r1: usize,
    c1: usize,
}

impl Rect {
    fn gap_to(&self, o: &Rect) -> usize {
        let dr = if self.r1 < o.r0 { o.r0 - self.r1 - 1 } else if o.r1 < self.r0 { self.r0 - o.r1 - 1 } else { 0 };
        let dc = if self.c1 < o.c0 { o.c0 - self.c1 - 1 } else if o.c1 < self.c0 { self.c0 - o.c1 - 1 } else { 0 };
        dr.max(dc)
    }

    fn union_bbox(&self, o: &Rect) -> Rect {
        Rect { r0: self.r0.min(o.r0), c0: self.c0.min(o.c0), r1: self.r1.max(o.r1), c1: self.c1.max(o.c1) }
    }
}

const PLACEMENT_TRIES: usize = 2000;
const LAYOUT_TRIES: usize = 50;

/// Generates a sealed map with exactly `obstacles` internal obstacle components.
pub fn generate(p: &GenParams) -> Result<GridMap, GenError> {
    let sp = p.spacing();
    let min_extent = 2 * sp + 3;
    if p.width < min_extent || p.height < min_extent {
        return Err(GenError::TooSmall(min_extent));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let mut best_placed = 0;
    for _ in 0..LAYOUT_TRIES {
        let shapes = place(p, &mut rng);
        best_placed = best_placed.max(shapes.len());
        if shapes.len() < p.obstacles {
            continue;
        }
        let mut canvas = Canvas::new(p.width, p.height);
        for parts in &shapes {
            for r in parts {
                canvas.rect(r.r0, r.c0, r.r1, r.c1);
            }
        }
        let map = match GridMap::from_occupancy(p.width, p.height, p.cell_size, canvas.occupied, p.robot_radius) {
            Ok(m) => m,
            Err(_) => continue,
        };
        if anchors(&map).len() == p.obstacles {
            return Ok(map);
        }
    }
    Err(GenError::Infeasible { wanted: p.obstacles, placed: best_placed })
}

fn place(p: &GenParams, rng: &mut ChaCha8Rng) -> Vec<Vec<Rect>> {
    let sp = p.spacing();
    let (lo, hi) = p.sides();
    // Keep the border wall (one cell) plus the spacing clear.
    let margin = sp + 1;
    let mut shapes: Vec<Vec<Rect>> = Vec::new();
    let mut boxes: Vec<Rect> = Vec::new();
    let mut tries = 0;
    while shapes.len() < p.obstacles && tries < PLACEMENT_TRIES {
        tries += 1;
        let Some(first) = random_rect(p, rng, lo, hi, margin) else { break };
        let mut parts = vec![first];
        if rng.gen_bool(0.5) {
            // Second rectangle sharing a corner region with the first.
            if let Some(second) = random_rect(p, rng, lo, hi, margin) {
                let r = rng.gen_range(first.r0..=first.r1);
                let c = rng.gen_range(first.c0..=first.c1);
                let h = second.r1 - second.r0;
                let w = second.c1 - second.c0;
                let r0 = r.saturating_sub(rng.gen_range(0..=h)).max(margin);
                let c0 = c.saturating_sub(rng.gen_range(0..=w)).max(margin);
                let moved = Rect { r0, c0, r1: (r0 + h).min(p.height - 1 - margin), c1: (c0 + w).min(p.width - 1 - margin) };
                if moved.gap_to(&first) == 0 {
                    parts.push(moved);
                }
            }
        }
        let bbox = parts.iter().skip(1).fold(parts[0], |b, r| b.union_bbox(r));
        if boxes.iter().all(|b| b.gap_to(&bbox) >= sp) {
            boxes.push(bbox);
            shapes.push(parts);
        }
    }
    shapes
}

fn random_rect(p: &GenParams, rng: &mut ChaCha8Rng, lo: usize, hi: usize, margin: usize) -> Option<Rect> {
    let max_r = p.height.checked_sub(2 * margin)?;
    let max_c = p.width.checked_sub(2 * margin)?;
    if max_r == 0 || max_c == 0 {
        return None;
    }
    let h = rng.gen_range(lo..=hi).min(max_r);
    let w = rng.gen_range(lo..=hi).min(max_c);
    let r0 = rng.gen_range(margin..=p.height - margin - h);
    let c0 = rng.gen_range(margin..=p.width - margin - w);
    Some(Rect { r0, c0, r1: r0 + h - 1, c1: c0 + w - 1 })
}

/// Seeded start/goal pair: free cells in one component, at least half the
/// map's shorter side apart when possible.
pub fn random_query(map: &GridMap, seed: u64) -> Option<(Cell, Cell)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let free: Vec<Cell> = (0..map.len()).filter(|&i| map.is_free_idx(i)).map(|i| map.cell_at(i)).collect();
    if free.is_empty() {
        return None;
    }
    let want = map.width().min(map.height()) / 2;
    let mut fallback = None;
    for attempt in 0..200 {
        let s = free[rng.gen_range(0..free.len())];
        let g = free[rng.gen_range(0..free.len())];
        if s == g {
            continue;
        }
        let comp = map.free_component(s);
        if !comp[map.index(g)] {
            continue;
        }
        if s.chebyshev(g) >= want {
            return Some((s, g));
        }
        if fallback.is_none() || attempt % 50 == 0 {
            fallback = Some((s, g));
        }
    }
    fallback
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rect_gap() {
        let a = Rect { r0: 0, c0: 0, r1: 2, c1: 2 };
        let b = Rect { r0: 0, c0: 6, r1: 2, c1: 7 };
        assert_eq!(a.gap_to(&b), 3);
        assert_eq!(a.gap_to(&a), 0);
    }

    #[test]
    fn zero_obstacles_is_empty_room() {
        let m = generate(&GenParams::new(32, 32, 0, 3)).unwrap();
        assert!(anchors(&m).is_empty());
    }
}
