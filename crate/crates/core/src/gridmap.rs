use std::io::{BufRead, BufReader, Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point;

#[derive(Debug, Error)]
pub enum MapError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("degenerate map: {0}")]
    Degenerate(String),
    #[error("cell ({row},{col}) is not free")]
    NotFree { row: usize, col: usize },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl Cell {
    pub fn new(row: usize, col: usize) -> Self {
        Self { row, col }
    }

    pub fn offset(self, dr: isize, dc: isize) -> Option<Cell> {
        let r = self.row.checked_add_signed(dr)?;
        let c = self.col.checked_add_signed(dc)?;
        Some(Cell::new(r, c))
    }

    /// Chebyshev distance in cells.
    pub fn chebyshev(self, o: Cell) -> usize {
        self.row.abs_diff(o.row).max(self.col.abs_diff(o.col))
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{},{}", self.row, self.col)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MapFormat {
    Ascii,
    Pgm,
}

impl MapFormat {
    /// Guesses the format from a file extension, defaulting to ASCII.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("pgm") => MapFormat::Pgm,
            _ => MapFormat::Ascii,
        }
    }
}

/// Result of casting a ray through the inflated map.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RayHit {
    /// First inflated cell on the ray.
    pub cell: Cell,
    /// Distance from the origin to the center of `cell`.
    pub distance: f64,
    /// Point where the ray enters `cell`.
    pub entry: Point,
    pub entry_distance: f64,
}

/// Occupancy grid with the robot footprint already applied.
///
/// World coordinates put `x` along columns and `y` along rows, so cell
/// `(r, c)` covers `[c·s, (c+1)·s) × [r·s, (r+1)·s)` for cell size `s`.
#[derive(Clone, Debug)]
pub struct GridMap {
    width: usize,
    height: usize,
    cell_size: f64,
    robot_radius: f64,
    occupied: Vec<bool>,
    inflated: Vec<bool>,
}

/// Marks every cell whose center lies within `radius_cells` of an occupied cell center.
pub fn inflate_occupancy(occupied: &[bool], width: usize, height: usize, radius_cells: f64) -> Vec<bool> {
    let reach = radius_cells.floor() as isize;
    let mut offsets = Vec::new();
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if ((dr * dr + dc * dc) as f64) <= radius_cells * radius_cells + 1e-9 {
                offsets.push((dr, dc));
            }
        }
    }
    let mut out = occupied.to_vec();
    for r in 0..height {
        for c in 0..width {
            if !occupied[r * width + c] {
                continue;
            }
            for &(dr, dc) in &offsets {
                let rr = r as isize + dr;
                let cc = c as isize + dc;
                if rr >= 0 && cc >= 0 && (rr as usize) < height && (cc as usize) < width {
                    out[rr as usize * width + cc as usize] = true;
                }
            }
        }
    }
    out
}

impl GridMap {
    /// Builds a map from raw occupancy. The outer ring is forced occupied and
    /// obstacles are inflated by `robot_radius` (meters).
    pub fn from_occupancy(
        width: usize,
        height: usize,
        cell_size: f64,
        mut occupied: Vec<bool>,
        robot_radius: f64,
    ) -> Result<Self, MapError> {
        if width < 3 || height < 3 {
            return Err(MapError::Degenerate(format!("{width}x{height} is too small")));
        }
        if !(cell_size > 0.0) {
            return Err(MapError::Degenerate(format!("cell size {cell_size} must be positive")));
        }
        if robot_radius < 0.0 {
            return Err(MapError::Degenerate("negative robot radius".into()));
        }
        let half = 0.5 * width.min(height) as f64 * cell_size;
        if robot_radius > half {
            return Err(MapError::Degenerate(format!(
                "robot radius {robot_radius} exceeds half the map extent {half}"
            )));
        }
        assert_eq!(occupied.len(), width * height, "occupancy size mismatch");
        for c in 0..width {
            occupied[c] = true;
            occupied[(height - 1) * width + c] = true;
        }
        for r in 0..height {
            occupied[r * width] = true;
            occupied[r * width + width - 1] = true;
        }
        let inflated = inflate_occupancy(&occupied, width, height, robot_radius / cell_size);
        Ok(Self {
            width,
            height,
            cell_size,
            robot_radius,
            occupied,
            inflated,
        })
    }

    /// Parses the ASCII format: a `<width> <height> <cell_size_m>` header,
    /// then `height` rows of `#` (occupied) and `.` (free), row 0 first.
    pub fn from_ascii(src: impl Read, robot_radius: f64) -> Result<Self, MapError> {
        let reader = BufReader::new(src);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| MapError::Parse { line: 1, message: "missing header".into() })??;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(MapError::Parse {
                line: 1,
                message: format!("expected `<width> <height> <cell_size>`, got `{header}`"),
            });
        }
        let bad = |what: &str| MapError::Parse { line: 1, message: format!("invalid {what}") };
        let width: usize = parts[0].parse().map_err(|_| bad("width"))?;
        let height: usize = parts[1].parse().map_err(|_| bad("height"))?;
        let cell_size: f64 = parts[2].parse().map_err(|_| bad("cell size"))?;
        let mut occupied = Vec::with_capacity(width * height);
        for r in 0..height {
            let line_no = r + 2;
            let line = lines.next().ok_or_else(|| MapError::Parse {
                line: line_no,
                message: format!("expected {height} map rows, found {r}"),
            })??;
            let row = line.trim_end_matches('\r');
            if row.chars().count() != width {
                return Err(MapError::Parse {
                    line: line_no,
                    message: format!("expected {width} characters, found {}", row.chars().count()),
                });
            }
            for ch in row.chars() {
                match ch {
                    '#' => occupied.push(true),
                    '.' => occupied.push(false),
                    other => {
                        return Err(MapError::Parse {
                            line: line_no,
                            message: format!("unexpected character `{other}`"),
                        })
                    }
                }
            }
        }
        Self::from_occupancy(width, height, cell_size, occupied, robot_radius)
    }

    pub fn from_ascii_str(s: &str, robot_radius: f64) -> Result<Self, MapError> {
        Self::from_ascii(s.as_bytes(), robot_radius)
    }

    /// Parses binary PGM (P5, maxval 255). Pixels darker than 127 are occupied.
    pub fn from_pgm(mut src: impl Read, cell_size: f64, robot_radius: f64) -> Result<Self, MapError> {
        let mut bytes = Vec::new();
        src.read_to_end(&mut bytes)?;
        let mut pos = 0;
        let mut line = 1;
        let token = |bytes: &[u8], pos: &mut usize, line: &mut usize| -> Result<String, MapError> {
            loop {
                while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
                    if bytes[*pos] == b'\n' {
                        *line += 1;
                    }
                    *pos += 1;
                }
                if *pos < bytes.len() && bytes[*pos] == b'#' {
                    while *pos < bytes.len() && bytes[*pos] != b'\n' {
                        *pos += 1;
                    }
                    continue;
                }
                break;
            }
            let start = *pos;
            while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
                *pos += 1;
            }
            if start == *pos {
                return Err(MapError::Parse { line: *line, message: "truncated PGM header".into() });
            }
            Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
        };
        let magic = token(&bytes, &mut pos, &mut line)?;
        if magic != "P5" {
            return Err(MapError::Parse { line, message: format!("expected P5, got `{magic}`") });
        }
        let num = |name: &str, pos: &mut usize, line: &mut usize| -> Result<usize, MapError> {
            let t = token(&bytes, pos, line)?;
            t.parse().map_err(|_| MapError::Parse { line: *line, message: format!("invalid {name} `{t}`") })
        };
        let width = num("width", &mut pos, &mut line)?;
        let height = num("height", &mut pos, &mut line)?;
        let maxval = num("maxval", &mut pos, &mut line)?;
        if maxval != 255 {
            return Err(MapError::Parse { line, message: format!("maxval must be 255, got {maxval}") });
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let data = bytes.get(pos..pos + width * height).ok_or_else(|| MapError::Parse {
            line,
            message: format!("expected {} raster bytes", width * height),
        })?;
        let occupied = data.iter().map(|&v| v < 127).collect();
        Self::from_occupancy(width, height, cell_size, occupied, robot_radius)
    }

    pub fn load(
        src: impl Read,
        format: MapFormat,
        cell_size: f64,
        robot_radius: f64,
    ) -> Result<Self, MapError> {
        match format {
            MapFormat::Ascii => Self::from_ascii(src, robot_radius),
            MapFormat::Pgm => Self::from_pgm(src, cell_size, robot_radius),
        }
    }

    pub fn load_path(
        path: &std::path::Path,
        cell_size: f64,
        robot_radius: f64,
    ) -> Result<Self, MapError> {
        let f = std::fs::File::open(path)?;
        Self::load(f, MapFormat::from_path(path), cell_size, robot_radius)
    }

    /// Writes the raw (uninflated) occupancy in the ASCII format.
    pub fn write_ascii(&self, mut out: impl Write) -> std::io::Result<()> {
        writeln!(out, "{} {} {}", self.width, self.height, self.cell_size)?;
        for r in 0..self.height {
            let row: String = (0..self.width)
                .map(|c| if self.occupied[r * self.width + c] { '#' } else { '.' })
                .collect();
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    pub fn to_ascii(&self) -> String {
        let mut buf = Vec::new();
        self.write_ascii(&mut buf).expect("write to vec");
        String::from_utf8(buf).expect("ascii")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn robot_radius(&self) -> f64 {
        self.robot_radius
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, cell: Cell) -> usize {
        cell.row * self.width + cell.col
    }

    #[inline]
    pub fn cell_at(&self, idx: usize) -> Cell {
        Cell::new(idx / self.width, idx % self.width)
    }

    pub fn contains(&self, cell: Cell) -> bool {
        cell.row < self.height && cell.col < self.width
    }

    /// Free in the inflated map. Out-of-bounds cells are occupied.
    #[inline]
    pub fn is_free(&self, cell: Cell) -> bool {
        self.contains(cell) && !self.inflated[self.index(cell)]
    }

    #[inline]
    pub fn is_free_rc(&self, row: isize, col: isize) -> bool {
        row >= 0
            && col >= 0
            && (row as usize) < self.height
            && (col as usize) < self.width
            && !self.inflated[row as usize * self.width + col as usize]
    }

    #[inline]
    pub fn is_free_idx(&self, idx: usize) -> bool {
        !self.inflated[idx]
    }

    /// Raw occupancy before inflation (border included).
    pub fn is_occupied_raw(&self, cell: Cell) -> bool {
        !self.contains(cell) || self.occupied[self.index(cell)]
    }

    pub fn raw_occupancy(&self) -> &[bool] {
        &self.occupied
    }

    pub fn inflated(&self) -> &[bool] {
        &self.inflated
    }

    pub fn center(&self, cell: Cell) -> Point {
        Point::new(
            (cell.col as f64 + 0.5) * self.cell_size,
            (cell.row as f64 + 0.5) * self.cell_size,
        )
    }

    /// Cell containing a world point, if inside the map.
    pub fn cell_of(&self, p: Point) -> Option<Cell> {
        let c = (p.x / self.cell_size).floor();
        let r = (p.y / self.cell_size).floor();
        if c < 0.0 || r < 0.0 {
            return None;
        }
        let cell = Cell::new(r as usize, c as usize);
        self.contains(cell).then_some(cell)
    }

    /// Walks the grid from `origin` along `theta` and reports the first inflated cell.
    ///
    /// When the ray passes exactly through a lattice corner, it is stopped by
    /// either of the two side cells, so rays never slip diagonally between
    /// touching obstacles.
    pub fn raycast(&self, origin: Point, theta: f64) -> Result<RayHit, MapError> {
        let start = self
            .cell_of(origin)
            .ok_or(MapError::NotFree { row: usize::MAX, col: usize::MAX })?;
        if !self.is_free(start) {
            return Err(MapError::NotFree { row: start.row, col: start.col });
        }
        let s = self.cell_size;
        let ox = origin.x / s;
        let oy = origin.y / s;
        let mut dx = theta.cos();
        let mut dy = theta.sin();
        if dx.abs() < 1e-12 {
            dx = 0.0;
        }
        if dy.abs() < 1e-12 {
            dy = 0.0;
        }
        let mut cx = start.col as isize;
        let mut cy = start.row as isize;
        let sx: isize = if dx > 0.0 { 1 } else { -1 };
        let sy: isize = if dy > 0.0 { 1 } else { -1 };
        let mut tmx = if dx > 0.0 {
            (cx as f64 + 1.0 - ox) / dx
        } else if dx < 0.0 {
            (cx as f64 - ox) / dx
        } else {
            f64::INFINITY
        };
        let mut tmy = if dy > 0.0 {
            (cy as f64 + 1.0 - oy) / dy
        } else if dy < 0.0 {
            (cy as f64 - oy) / dy
        } else {
            f64::INFINITY
        };
        let tdx = if dx != 0.0 { 1.0 / dx.abs() } else { f64::INFINITY };
        let tdy = if dy != 0.0 { 1.0 / dy.abs() } else { f64::INFINITY };
        let hit = |cx: isize, cy: isize, t: f64| {
            let cell = Cell::new(cy.max(0) as usize, cx.max(0) as usize);
            let center = Point::new((cx as f64 + 0.5) * s, (cy as f64 + 0.5) * s);
            let entry = Point::new((ox + dx * t) * s, (oy + dy * t) * s);
            RayHit {
                cell,
                distance: center.distance(origin),
                entry,
                entry_distance: t * s,
            }
        };
        let limit = 2 * (self.width + self.height) + 8;
        for _ in 0..limit {
            let t;
            if tmx.is_finite() && tmy.is_finite() && (tmx - tmy).abs() <= 1e-9 * tmx.max(1.0) {
                t = tmx;
                let a_free = self.is_free_rc(cy, cx + sx);
                let b_free = self.is_free_rc(cy + sy, cx);
                if !a_free {
                    return Ok(hit(cx + sx, cy, t));
                }
                if !b_free {
                    return Ok(hit(cx, cy + sy, t));
                }
                cx += sx;
                cy += sy;
                tmx += tdx;
                tmy += tdy;
            } else if tmx < tmy {
                t = tmx;
                cx += sx;
                tmx += tdx;
            } else {
                t = tmy;
                cy += sy;
                tmy += tdy;
            }
            if !self.is_free_rc(cy, cx) {
                return Ok(hit(cx, cy, t));
            }
        }
        unreachable!("ray escaped a sealed map")
    }

    /// Free cells reachable from `cell` (8-connected, no corner cutting).
    pub fn free_component(&self, cell: Cell) -> Vec<bool> {
        let mut seen = vec![false; self.len()];
        if !self.is_free(cell) {
            return seen;
        }
        let mut stack = vec![self.index(cell)];
        seen[self.index(cell)] = true;
        while let Some(i) = stack.pop() {
            for n in crate::search::neighbors(self, i, |j| self.is_free_idx(j)) {
                if !seen[n.0] {
                    seen[n.0] = true;
                    stack.push(n.0);
                }
            }
        }
        seen
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sealed(n: usize) -> GridMap {
        GridMap::from_occupancy(n, n, 1.0, vec![false; n * n], 0.0).unwrap()
    }

    #[test]
    fn center_obstacle_inflates_to_a_plus() {
        let mut occ = vec![false; 25];
        occ[12] = true;
        let inf = inflate_occupancy(&occ, 5, 5, 1.0);
        let marked: Vec<usize> = (0..25).filter(|&i| inf[i]).collect();
        assert_eq!(marked, vec![7, 11, 12, 13, 17]);
    }

    #[test]
    fn border_is_sealed_and_out_of_bounds_is_occupied() {
        let m = sealed(6);
        assert!(!m.is_free(Cell::new(0, 3)));
        assert!(!m.is_free(Cell::new(3, 5)));
        assert!(m.is_free(Cell::new(2, 2)));
        assert!(!m.is_free_rc(-1, 2));
        assert!(!m.is_free(Cell::new(9, 9)));
    }

    #[test]
    fn raycast_to_border() {
        let m = sealed(11);
        let o = m.center(Cell::new(5, 5));
        let h = m.raycast(o, 0.0).unwrap();
        assert_eq!(h.cell, Cell::new(5, 10));
        assert!((h.distance - 5.0).abs() < 1e-12);
        let h = m.raycast(o, std::f64::consts::FRAC_PI_2).unwrap();
        assert!((h.distance - 5.0).abs() < 1e-12);
        assert!((h.entry_distance - 4.5).abs() < 1e-12);
    }

    #[test]
    fn raycast_adjacent_obstacle() {
        let mut occ = vec![false; 121];
        occ[5 * 11 + 6] = true;
        let m = GridMap::from_occupancy(11, 11, 1.0, occ, 0.0).unwrap();
        let h = m.raycast(m.center(Cell::new(5, 5)), 0.0).unwrap();
        assert!((h.distance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn raycast_from_occupied_cell_fails() {
        let m = sealed(5);
        assert!(m.raycast(m.center(Cell::new(0, 0)), 0.0).is_err());
    }

    #[test]
    fn diagonal_ray_stops_at_touching_corner() {
        let mut occ = vec![false; 100];
        occ[3 * 10 + 4] = true;
        occ[4 * 10 + 3] = true;
        let m = GridMap::from_occupancy(10, 10, 1.0, occ, 0.0).unwrap();
        let h = m.raycast(m.center(Cell::new(3, 3)), std::f64::consts::FRAC_PI_4).unwrap();
        assert_eq!(h.cell.chebyshev(Cell::new(3, 3)), 1);
    }

    #[test]
    fn ascii_errors_carry_line_numbers() {
        let err = GridMap::from_ascii_str("3 3 1\n...\n.x.\n...\n", 0.0).unwrap_err();
        assert!(matches!(err, MapError::Parse { line: 3, .. }), "{err}");
        let err = GridMap::from_ascii_str("3 3 1\n...\n..\n...\n", 0.0).unwrap_err();
        assert!(matches!(err, MapError::Parse { line: 3, .. }));
        let err = GridMap::from_ascii_str("5 5 1\n.....\n.....\n.....\n.....\n.....\n", 3.0).unwrap_err();
        assert!(matches!(err, MapError::Degenerate(_)));
    }

    #[test]
    fn pgm_threshold() {
        let mut bytes = b"P5\n# c\n4 3\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 255, 255, 255, 255, 126, 127, 255, 255, 255, 255, 255]);
        let m = GridMap::from_pgm(&bytes[..], 0.5, 0.0).unwrap();
        assert!(m.is_occupied_raw(Cell::new(1, 1)));
        assert!(!m.is_occupied_raw(Cell::new(1, 2)));
        assert_eq!(m.cell_size(), 0.5);
    }
}
