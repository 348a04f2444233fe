use ksnpp::oracle::HSignature;
use ksnpp::pruning::*;
use ksnpp::Point;

fn p(x: f64, y: f64) -> Point {
    Point::new(x, y)
}

#[test]
fn crossing_segments_meet_at_one_point() {
    let hits = collect_intersections(&[p(0.0, 0.0), p(4.0, 0.0)], &[p(2.0, -2.0), p(2.0, 2.0)], 1e-9);
    assert_eq!(hits.len(), 1);
    let (q, a, b) = hits[0];
    assert!((q.x - 2.0).abs() < 1e-12 && q.y.abs() < 1e-12);
    assert!((a - 2.0).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
}

#[test]
fn parallel_segments_do_not_meet() {
    assert!(collect_intersections(&[p(0.0, 0.0), p(4.0, 0.0)], &[p(0.0, 1.0), p(4.0, 1.0)], 1e-9).is_empty());
}

#[test]
fn polyline_crossing_twice_reports_both() {
    let edge = [p(0.0, -1.0), p(1.0, 1.0), p(2.0, -1.0)];
    let sweeper = [p(-1.0, 0.0), p(3.0, 0.0)];
    assert_eq!(collect_intersections(&edge, &sweeper, 1e-9).len(), 2);
}

#[test]
fn sweeper_sweeper_examples() {
    assert!(crit_sweeper_sweeper(10.0, 3.0, 2.0, 2.0, 0.0));
    assert!(!crit_sweeper_sweeper(6.0, 3.0, 2.0, 2.0, 0.0));
    // Symmetric values: neither direction.
    assert!(!crit_sweeper_sweeper(5.0, 5.0, 2.0, 2.0, 0.0));
}

#[test]
fn goal_dependent_examples() {
    assert!(crit_goal_dependent(8.0, 4.0, 3.0, 2.0, true, true, 0.0));
    assert!(!crit_sweeper_sweeper(8.0, 3.0, 2.0, 4.0, 0.0));
    assert!(!crit_goal_dependent(8.0, 4.0, 3.0, 2.0, false, true, 0.0));
    assert!(!crit_goal_dependent(8.0, 4.0, 3.0, 2.0, true, false, 0.0));
}

#[test]
fn sweeper_edge_examples() {
    assert!(crit_sweeper_edge(10.0, 6.0, 0.0));
    assert!(crit_edge_sweeper(12.0, 9.0, 0.0));
    assert!(!crit_sweeper_edge(6.0, 6.0, 0.0));
    assert!(!crit_edge_sweeper(6.0, 6.0, 0.0));
}

#[test]
fn edge_edge_examples() {
    assert_eq!(crit_edge_edge(7.0, 5.0, 0.0), Some(true));
    assert_eq!(crit_edge_edge(5.0, 7.0, 0.0), Some(false));
    assert_eq!(crit_edge_edge(5.0, 5.0, 0.0), None);
}

#[test]
fn result_bound_is_strict() {
    assert!(crit_result_bound(12.0, 10.0));
    assert!(!crit_result_bound(10.0, 10.0));
    assert!(!crit_result_bound(9.5, 10.0));
}

fn rel(better: usize, worse: BranchId, witness: &str) -> Relation {
    Relation {
        better: BranchId::new(better, 0),
        worse,
        criterion: Criterion::SweeperSweeper,
        witness: Some(witness.parse::<HSignature>().unwrap()),
    }
}

#[test]
fn inheritance_copies_to_every_child() {
    let parent = BranchId::new(1, 0);
    let (c1, c2) = (BranchId::new(5, 0), BranchId::new(5, 1));
    let mut store = RelationStore::new();
    assert_eq!(store.inherit(parent, c1), 0);
    store.add(rel(2, parent, "1"));
    store.add(rel(3, parent, "2"));
    for c in [c1, c2] {
        assert_eq!(store.inherit(parent, c), 2);
        let better: Vec<_> = store.better_than(c).iter().map(|b| b.better).collect();
        assert!(better.contains(&BranchId::new(2, 0)) && better.contains(&BranchId::new(3, 0)));
    }
    assert_eq!(store.counts()[&Criterion::Inherited], 4);
}

#[test]
fn should_prune_examples() {
    assert!(should_prune(1, 1, 0, 5.0, None));
    assert!(!should_prune(2, 3, 0, 5.0, None));
    assert!(should_prune(3, 3, 0, 5.0, None));
    assert!(should_prune(0, 2, 2, 12.0, Some(10.0)));
    assert!(!should_prune(0, 2, 2, 10.0, Some(10.0)));
}
