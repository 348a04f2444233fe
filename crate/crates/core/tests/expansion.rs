use approx::assert_relative_eq;
use ksnpp::expansion::{build_corridor, expand_node, plan_in_corridor, ExpansionParams, RayFan};
use ksnpp::fixtures::{self, Canvas};
use ksnpp::search::SearchScratch;
use ksnpp::{Cell, OctileLength, Point};
use std::f64::consts::{FRAC_PI_2, TAU};

fn root_gaps(f: &fixtures::Fixture) -> usize {
    let params = ExpansionParams::for_map(&f.map);
    let fan = RayFan::cast(&f.map, f.map.center(f.start), 0.0, TAU, true, &params).unwrap();
    fan.gaps(&f.map, &params).len()
}

#[test]
fn corridor_frames() {
    let c = build_corridor(Point::new(0.0, 0.0), 0.0, 6.0, 2.0, true);
    assert_relative_eq!(c.a.x, 1.0);
    assert_relative_eq!(c.b.y, 1.0);
    assert_relative_eq!(c.critical.x, 6.0);
    assert_relative_eq!(c.critical.y, 2.0);
    let c = build_corridor(Point::new(0.0, 0.0), FRAC_PI_2, 6.0, 2.0, true);
    assert_relative_eq!(c.a.y, 1.0);
    assert_relative_eq!(c.b.x, -1.0, epsilon = 1e-12);
    assert_relative_eq!(c.critical.x, -2.0, epsilon = 1e-12);
    assert_relative_eq!(c.critical.y, 6.0);
    let c = build_corridor(Point::new(0.0, 0.0), 0.0, 6.0, 2.0, false);
    assert_relative_eq!(c.critical.y, -2.0);
}

#[test]
fn corridor_paths() {
    let mut canvas = Canvas::new(20, 14);
    let open = canvas.build(1.0, 0.0);
    let p = Cell::new(5, 5);
    let corridor = build_corridor(open.center(p), 0.0, 6.0, 2.0, true);
    let goal = open.cell_of(corridor.critical).unwrap();
    let mut scratch = SearchScratch::new(&open);
    let e = plan_in_corridor(&open, &mut scratch, &corridor, p, goal, None).unwrap();
    assert_eq!(e.length, OctileLength::new(4, 2));
    assert_relative_eq!(e.length.cells::<f64>(), 4.0 + 2.0 * 2f64.sqrt());

    canvas.rect(0, 8, 13, 8);
    let walled = canvas.build(1.0, 0.0);
    let err = plan_in_corridor(&walled, &mut scratch, &corridor, p, goal, None).unwrap_err();
    assert!(!err.is_empty());

    let mut canvas = Canvas::new(20, 14);
    // Wall across most of the band; only the top row stays open.
    canvas.rect(4, 8, 7, 8);
    let bumped = canvas.build(1.0, 0.0);
    let e2 = plan_in_corridor(&bumped, &mut scratch, &corridor, p, goal, None).unwrap();
    assert!(e2.length > e.length);
}

#[test]
fn root_gap_counts() {
    assert_eq!(root_gaps(&fixtures::empty21()), 0);
    assert_eq!(root_gaps(&fixtures::ring21()), 2);
    assert_eq!(root_gaps(&fixtures::doorway()), 2);
}

#[test]
fn adjacent_endpoints_need_no_bisection() {
    let f = fixtures::empty21();
    let params = ExpansionParams::for_map(&f.map);
    // Two rays that both end on the east wall in neighboring cells.
    let src = f.map.center(Cell::new(10, 10));
    let fan = RayFan::cast(&f.map, src, 0.0, 0.1, false, &params).unwrap();
    assert_eq!(fan.rays.len(), 2);
}

#[test]
fn closed_endpoints_after_refinement() {
    let f = fixtures::empty21();
    let params = ExpansionParams::for_map(&f.map);
    let fan = RayFan::cast(&f.map, f.map.center(f.start), 0.0, TAU, true, &params).unwrap();
    for w in fan.rays.windows(2) {
        assert!(w[0].cell().chebyshev(w[1].cell()) <= 1);
    }
}

#[test]
fn ring21_root_children() {
    let f = fixtures::ring21();
    let params = ExpansionParams::for_map(&f.map);
    let mut scratch = SearchScratch::new(&f.map);
    let g = expand_node(&f.map, &mut scratch, f.start, 0.0, TAU, true, &params).unwrap();
    assert_eq!(g.children.len(), 2);
    for c in &g.children {
        assert!(f.map.is_free(c.critical_cell));
        assert!(c.theta_max > c.theta_min && c.theta_max < c.theta_min + TAU);
    }
}
