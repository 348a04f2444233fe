//! SVG rendering of a map, the tree's edges and sweepers, and result paths.

use std::fmt::Write;

use crate::gridmap::{Cell, GridMap};
use crate::tree::TreeNode;
use crate::Point;

const RESULT_COLORS: [&str; 4] = ["#1f4fd8", "#3b82f6", "#1e3a8a", "#60a5fa"];

/// Draws layers in order: map raster, sweepers (cyan), edges (red), results
/// (blue), then start and goal markers. Coordinates are world meters.
pub fn render(map: &GridMap, nodes: &[TreeNode], results: &[Vec<Cell>], start: Cell, goal: Cell) -> String {
    let s = map.cell_size();
    let (w, h) = (map.width() as f64 * s, map.height() as f64 * s);
    let px = (900.0 / map.width().max(map.height()) as f64).max(1.0);
    let stroke = 0.25 * s;
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {w} {h}" width="{}" height="{}">"#,
        (map.width() as f64 * px).round(),
        (map.height() as f64 * px).round()
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);

    out.push_str("<g id=\"map\">\n");
    raster(&mut out, map, |c| map.is_occupied_raw(c), "black", s);
    raster(&mut out, map, |c| !map.is_free(c) && !map.is_occupied_raw(c), "#b0b0b0", s);
    out.push_str("</g>\n");

    let _ = writeln!(out, r#"<g id="sweepers" stroke="cyan" stroke-width="{stroke}" fill="none">"#);
    for n in nodes {
        for ch in n.children() {
            line(&mut out, ch.sweeper.start, ch.sweeper.end);
        }
    }
    out.push_str("</g>\n");

    let _ = writeln!(out, r#"<g id="edges" stroke="red" stroke-width="{stroke}" fill="none">"#);
    for n in nodes {
        for ch in n.children() {
            polyline(&mut out, &ch.edge.polyline, None);
        }
    }
    out.push_str("</g>\n");

    let _ = writeln!(out, r#"<g id="results" stroke-width="{}" fill="none">"#, 2.0 * stroke);
    for (i, cells) in results.iter().enumerate() {
        let pts: Vec<Point> = cells.iter().map(|&c| map.center(c)).collect();
        polyline(&mut out, &pts, Some(RESULT_COLORS[i % RESULT_COLORS.len()]));
    }
    out.push_str("</g>\n");

    for (c, color) in [(start, "green"), (goal, "orange")] {
        let p = map.center(c);
        let _ = writeln!(out, r#"<circle cx="{}" cy="{}" r="{}" fill="{color}"/>"#, p.x, p.y, 0.8 * s);
    }
    out.push_str("</svg>\n");
    out
}

/// One rect per horizontal run of matching cells.
fn raster(out: &mut String, map: &GridMap, on: impl Fn(Cell) -> bool, fill: &str, s: f64) {
    for r in 0..map.height() {
        let mut c = 0;
        while c < map.width() {
            if !on(Cell::new(r, c)) {
                c += 1;
                continue;
            }
            let c0 = c;
            while c < map.width() && on(Cell::new(r, c)) {
                c += 1;
            }
            let _ = writeln!(
                out,
                r#"<rect x="{}" y="{}" width="{}" height="{s}" fill="{fill}"/>"#,
                c0 as f64 * s,
                r as f64 * s,
                (c - c0) as f64 * s
            );
        }
    }
}

fn line(out: &mut String, a: Point, b: Point) {
    let _ = writeln!(out, r#"<line x1="{}" y1="{}" x2="{}" y2="{}"/>"#, a.x, a.y, b.x, b.y);
}

fn polyline(out: &mut String, pts: &[Point], color: Option<&str>) {
    let coords: Vec<String> = pts.iter().map(|p| format!("{},{}", p.x, p.y)).collect();
    match color {
        Some(c) => {
            let _ = writeln!(out, r#"<polyline stroke="{c}" points="{}"/>"#, coords.join(" "));
        }
        None => {
            let _ = writeln!(out, r#"<polyline points="{}"/>"#, coords.join(" "));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::tree::{Planner, PlannerOptions};

    #[test]
    fn layers_appear_in_order() {
        let f = fixtures::ring21();
        let mut p = Planner::new(&f.map, f.start, f.goal, PlannerOptions::new(2)).unwrap();
        let out = p.run().unwrap();
        let paths: Vec<Vec<Cell>> = out.results.iter().map(|r| r.cells.clone()).collect();
        let svg = render(&f.map, p.nodes(), &paths, f.start, f.goal);
        let pos = |id: &str| svg.find(&format!("id=\"{id}\"")).unwrap();
        assert!(pos("map") < pos("sweepers"));
        assert!(pos("sweepers") < pos("edges"));
        assert!(pos("edges") < pos("results"));
        assert_eq!(svg.matches("<polyline stroke=").count(), 2);
    }
}
