use ksnpp::fixtures;
use ksnpp::oracle::{default_lmax, oracle_k_snpp, shortest_in_class};
use ksnpp::pruning::{BranchId, Criterion};
use ksnpp::search::{self, SearchScratch};
use ksnpp::tree::{k_snpp, ExpansionOrder, LeafState, Planner, PlannerOptions};
use ksnpp::{mapgen, Cell, GridMap};
use std::collections::HashMap;

fn sigs(out: &ksnpp::tree::PlanOutcome) -> Vec<String> {
    out.results.iter().map(|r| r.signature.to_string()).collect()
}

#[test]
fn ring21_two_paths_tie() {
    let f = fixtures::ring21();
    let out = k_snpp(&f.map, f.start, f.goal, PlannerOptions::new(2)).unwrap();
    assert_eq!(out.results.len(), 2);
    assert!((out.results[0].length_m - out.results[1].length_m).abs() <= 1e-9);
    let mut s = sigs(&out);
    s.sort();
    assert_eq!(s, ["", "1"]);
}

#[test]
fn ring21_third_path_matches_oracle() {
    let f = fixtures::ring21();
    let out = k_snpp(&f.map, f.start, f.goal, PlannerOptions::new(3)).unwrap();
    let o = oracle_k_snpp(&f.map, f.start, f.goal, 3, default_lmax(3));
    assert_eq!(out.results.len(), 3);
    assert!(out.results[2].length > out.results[1].length);
    for (t, o) in out.results.iter().zip(&o.results) {
        assert_eq!(t.signature, o.signature);
        assert_eq!(t.length, o.length);
    }
}

#[test]
fn empty_room_has_one_class() {
    let f = fixtures::empty21();
    let out = k_snpp(&f.map, f.start, f.goal, PlannerOptions::new(3)).unwrap();
    assert_eq!(out.results.len(), 1);
    assert!(out.classes_exhausted);
    assert!(!out.no_path);
}

#[test]
fn empty_room_root_has_no_leaves() {
    let f = fixtures::empty21();
    let mut p = Planner::new(&f.map, f.start, f.goal, PlannerOptions::new(1)).unwrap();
    p.run().unwrap();
    assert_eq!(p.nodes().len(), 1);
    assert!(p.nodes()[0].children().is_empty());
}

#[test]
fn doorway_root_has_two_leaves() {
    let f = fixtures::doorway();
    let mut p = Planner::new(&f.map, f.start, f.goal, PlannerOptions::new(1)).unwrap();
    p.run().unwrap();
    assert_eq!(p.nodes()[0].children().len(), 2);
}

fn unreachable_on_raw_map(map: &GridMap, s: Cell, g: Cell) -> bool {
    let mut scratch = SearchScratch::new(map);
    search::astar(map, &mut scratch, s, g, |i| map.is_free_idx(i), |i| map.is_free_idx(i)).is_none()
}

#[test]
fn sealed_chamber_is_proven_unreachable() {
    let f = fixtures::sealed_chamber();
    for precheck in [true, false] {
        let mut opts = PlannerOptions::new(2);
        opts.precheck_reachability = precheck;
        let out = k_snpp(&f.map, f.start, f.goal, opts).unwrap();
        assert!(out.no_path, "precheck={precheck}");
        assert!(out.results.is_empty());
        assert!(!out.incomplete);
    }
    assert!(unreachable_on_raw_map(&f.map, f.start, f.goal));
}

#[test]
fn blocked_endpoints_are_errors() {
    let f = fixtures::ring21();
    assert!(k_snpp(&f.map, Cell::new(0, 0), f.goal, PlannerOptions::new(1)).is_err());
    assert!(k_snpp(&f.map, f.start, Cell::new(10, 10), PlannerOptions::new(1)).is_err());
    assert!(k_snpp(&f.map, f.start, f.goal, PlannerOptions::new(0)).is_err());
}

/// Node geometry keyed by the sequence of source cells from the root.
fn geometry_by_path(p: &Planner) -> HashMap<Vec<Cell>, ksnpp::expansion::NodeGeometry> {
    let mut out = HashMap::new();
    for n in p.nodes() {
        let mut key = vec![n.source_cell];
        let mut cur = n.origin;
        while let Some(b) = cur {
            let parent = &p.nodes()[b.node as usize];
            key.push(parent.source_cell);
            cur = parent.origin;
        }
        key.reverse();
        out.insert(key, n.geometry.clone());
    }
    out
}

#[test]
fn fifo_and_best_first_build_identical_nodes() {
    for f in fixtures::all() {
        let run = |order| {
            let mut opts = PlannerOptions::new(3).without_pruning();
            opts.order = order;
            opts.expansion_cap = 60;
            opts.precheck_reachability = false;
            let mut p = Planner::new(&f.map, f.start, f.goal, opts).unwrap();
            p.run().unwrap();
            geometry_by_path(&p)
        };
        let a = run(ExpansionOrder::BestFirst);
        let b = run(ExpansionOrder::Fifo);
        let common: Vec<_> = a.keys().filter(|k| b.contains_key(*k)).collect();
        assert!(!common.is_empty(), "{}", f.name);
        for k in common {
            assert_eq!(a[k], b[k], "{}: node at {:?}", f.name, k.last());
        }
    }
}

fn corpus_cases(n: u64) -> Vec<(GridMap, Cell, Cell)> {
    (0..n)
        .map(|seed| {
            let map = mapgen::generate(&mapgen::GenParams::new(48, 48, 1 + (seed % 3) as usize, seed)).unwrap();
            let (s, g) = mapgen::random_query(&map, seed).unwrap();
            (map, s, g)
        })
        .collect()
}

#[test]
fn results_are_monotone_distinct_and_locally_shortest() {
    for (map, s, g) in corpus_cases(12) {
        let out = k_snpp(&map, s, g, PlannerOptions::new(3)).unwrap();
        for w in out.results.windows(2) {
            assert!(w[0].length <= w[1].length);
        }
        let mut seen = sigs(&out);
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), out.results.len());
        for r in &out.results {
            assert!(search::is_valid_path(&map, &r.cells));
            let best = shortest_in_class(&map, s, g, &r.signature).unwrap();
            assert!((r.length_m - best.length.meters(1.0)).abs() <= 1.5);
        }
    }
}

#[test]
fn relations_never_form_a_cycle() {
    for (map, s, g) in corpus_cases(20) {
        let mut p = Planner::new(&map, s, g, PlannerOptions::new(3)).unwrap();
        p.run().unwrap();
        let mut edges: HashMap<BranchId, Vec<BranchId>> = HashMap::new();
        for (worse, beat) in p.relations().iter() {
            if beat.criterion != Criterion::Inherited {
                edges.entry(beat.better).or_default().push(worse);
            }
        }
        // Depth-first search for a back edge.
        let mut state: HashMap<BranchId, u8> = HashMap::new();
        fn visit(b: BranchId, e: &HashMap<BranchId, Vec<BranchId>>, st: &mut HashMap<BranchId, u8>) -> bool {
            match st.get(&b) {
                Some(1) => return false,
                Some(2) => return true,
                _ => {}
            }
            st.insert(b, 1);
            for &n in e.get(&b).map_or(&[][..], |v| v.as_slice()) {
                if !visit(n, e, st) {
                    return false;
                }
            }
            st.insert(b, 2);
            true
        }
        for &b in edges.keys() {
            assert!(visit(b, &edges, &mut state), "cycle through {b:?}");
        }
    }
}

#[test]
fn pruned_leaves_stay_pruned_and_results_match_unpruned() {
    for (map, s, g) in corpus_cases(12) {
        let mut p = Planner::new(&map, s, g, PlannerOptions::new(2)).unwrap();
        let a = p.run().unwrap();
        let mut opts = PlannerOptions::new(2).without_pruning();
        opts.expansion_cap = 400;
        let b = k_snpp(&map, s, g, opts).unwrap();
        assert_eq!(sigs(&a), sigs(&b));
        assert!(a.stats.expansions <= b.stats.expansions);
        let pruned = p.nodes().iter().flat_map(|n| &n.leaves).filter(|l| matches!(l, LeafState::Pruned(_))).count();
        assert_eq!(pruned, a.stats.pruned.values().sum::<usize>());
    }
}

/// Two classes tie up to rounding in the last digit of the leaf bound; the
/// leaf must not be dropped by the k-th result bound.
#[test]
fn rounding_tie_is_not_pruned() {
    let map = mapgen::generate(&mapgen::GenParams::new(40, 40, 1, 600)).unwrap();
    let (s, g) = mapgen::random_query(&map, 600).unwrap();
    let a = k_snpp(&map, s, g, PlannerOptions::new(1)).unwrap();
    let o = oracle_k_snpp(&map, s, g, 1, default_lmax(1));
    let want: Vec<String> = o.results.iter().map(|r| r.signature.to_string()).collect();
    assert_eq!(sigs(&a), want);
}
