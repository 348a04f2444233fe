//! Small named maps used by tests, the CLI, and the benchmark.

use crate::gridmap::{Cell, GridMap};

/// Raw occupancy builder with rectangle helpers.
#[derive(Clone, Debug)]
pub struct Canvas {
    pub width: usize,
    pub height: usize,
    pub occupied: Vec<bool>,
}

impl Canvas {
    pub fn new(width: usize, height: usize) -> Self {
        Self { width, height, occupied: vec![false; width * height] }
    }

    /// Fills rows `r0..=r1`, columns `c0..=c1`.
    pub fn rect(&mut self, r0: usize, c0: usize, r1: usize, c1: usize) -> &mut Self {
        self.set_rect(r0, c0, r1, c1, true)
    }

    pub fn clear(&mut self, r0: usize, c0: usize, r1: usize, c1: usize) -> &mut Self {
        self.set_rect(r0, c0, r1, c1, false)
    }

    fn set_rect(&mut self, r0: usize, c0: usize, r1: usize, c1: usize, v: bool) -> &mut Self {
        for r in r0..=r1.min(self.height - 1) {
            for c in c0..=c1.min(self.width - 1) {
                self.occupied[r * self.width + c] = v;
            }
        }
        self
    }

    pub fn build(&self, cell_size: f64, robot_radius: f64) -> GridMap {
        GridMap::from_occupancy(self.width, self.height, cell_size, self.occupied.clone(), robot_radius)
            .expect("fixture map is valid")
    }
}

/// A fixture map with its canonical query.
#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub map: GridMap,
    pub start: Cell,
    pub goal: Cell,
}

/// 21×21 sealed room with a central 5×5 block, unit cells, robot radius one cell.
pub fn ring21() -> Fixture {
    let mut c = Canvas::new(21, 21);
    c.rect(8, 8, 12, 12);
    Fixture { name: "ring21", map: c.build(1.0, 1.0), start: Cell::new(10, 3), goal: Cell::new(10, 17) }
}

/// 21×21 sealed room with nothing inside.
pub fn empty21() -> Fixture {
    let c = Canvas::new(21, 21);
    Fixture { name: "empty21", map: c.build(1.0, 1.0), start: Cell::new(10, 3), goal: Cell::new(10, 17) }
}

/// Two rooms split by a wall with a single doorway four robot radii wide.
pub fn doorway() -> Fixture {
    let mut c = Canvas::new(25, 21);
    c.rect(0, 12, 20, 12).clear(8, 12, 12, 12);
    Fixture { name: "doorway", map: c.build(1.0, 1.0), start: Cell::new(10, 5), goal: Cell::new(4, 19) }
}

/// Wall with two doorways; the goal sits behind the lower one.
pub fn two_doorways() -> Fixture {
    let mut c = Canvas::new(31, 25);
    c.rect(0, 15, 24, 15).clear(4, 15, 8, 15).clear(16, 15, 20, 15);
    Fixture { name: "two_doorways", map: c.build(1.0, 1.0), start: Cell::new(12, 5), goal: Cell::new(22, 26) }
}

/// A chamber walled off from the rest of the room; the goal is inside it.
///
/// The chamber walls touch the border, so the start's free space is simply
/// connected.
pub fn sealed_chamber() -> Fixture {
    let mut c = Canvas::new(25, 25);
    c.rect(0, 14, 11, 14).rect(11, 14, 11, 24);
    Fixture { name: "sealed_chamber", map: c.build(1.0, 1.0), start: Cell::new(20, 3), goal: Cell::new(5, 20) }
}

/// Two separate blocks side by side.
pub fn two_blocks() -> Fixture {
    let mut c = Canvas::new(31, 21);
    c.rect(8, 7, 12, 11).rect(8, 19, 12, 23);
    Fixture { name: "two_blocks", map: c.build(1.0, 1.0), start: Cell::new(10, 3), goal: Cell::new(10, 27) }
}

/// Ring-shaped corridor around a central obstacle, with two bumps on the
/// outer wall of the east corridor next to the goal.
///
/// The start sits in the north-west corner of the ring and the goal in the
/// south-east, so the two ways round have nearly the same length.
pub fn two_bump_ring() -> Fixture {
    let mut c = Canvas::new(45, 45);
    // Outer wall of the ring, one cell thick inside the border.
    c.rect(0, 0, 4, 44).rect(40, 0, 44, 44).rect(0, 0, 44, 4).rect(0, 40, 44, 44);
    c.rect(14, 14, 30, 30);
    c.rect(26, 36, 30, 39).rect(29, 38, 31, 39);
    Fixture { name: "two_bump_ring", map: c.build(1.0, 1.0), start: Cell::new(11, 8), goal: Cell::new(33, 37) }
}

/// Every named fixture.
pub fn all() -> Vec<Fixture> {
    vec![ring21(), empty21(), doorway(), two_doorways(), sealed_chamber(), two_blocks(), two_bump_ring()]
}

pub fn by_name(name: &str) -> Option<Fixture> {
    all().into_iter().find(|f| f.name == name)
}
