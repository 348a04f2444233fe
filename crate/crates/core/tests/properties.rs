use ksnpp::gridmap::inflate_occupancy;
use ksnpp::oracle::{default_lmax, oracle_k_snpp, CutTable, HSignature};
use ksnpp::pruning::{crit_sweeper_sweeper, Criterion};
use ksnpp::record::{RecordPath, RecordStats, RunRecord};
use ksnpp::search::{self, SearchScratch};
use ksnpp::tree::{k_snpp, Planner, PlannerOptions};
use ksnpp::{mapgen, Cell, GridMap, Point};
use proptest::prelude::*;
use std::collections::BTreeSet;

fn small_map(seed: u64) -> GridMap {
    mapgen::generate(&mapgen::GenParams::new(40, 40, 1 + (seed % 3) as usize, seed)).unwrap()
}

fn free_cell(map: &GridMap, pick: usize) -> Cell {
    let free: Vec<usize> = (0..map.len()).filter(|&i| map.is_free_idx(i)).collect();
    map.cell_at(free[pick % free.len()])
}

proptest! {
    #[test]
    fn inflation_is_monotone_in_radius(
        occ in proptest::collection::vec(prop::bool::weighted(0.1), 15 * 12),
        r1 in 0.0f64..3.0,
        dr in 0.0f64..2.0,
    ) {
        let a = inflate_occupancy(&occ, 15, 12, r1);
        let b = inflate_occupancy(&occ, 15, 12, r1 + dr);
        for i in 0..a.len() {
            prop_assert!(!a[i] || b[i]);
        }
    }

    #[test]
    fn rays_pass_only_free_cells(seed in 0u64..40, pick in 0usize..10_000, theta in 0.0f64..std::f64::consts::TAU) {
        let map = small_map(seed);
        let c = free_cell(&map, pick);
        let o = map.center(c);
        let hit = map.raycast(o, theta).unwrap();
        prop_assert!(!map.is_free(hit.cell));
        let dir = Point::new(theta.cos(), theta.sin());
        let mut t = 0.0;
        while t < hit.entry_distance - 1e-6 {
            let cell = map.cell_of(o + dir * t).unwrap();
            prop_assert!(map.is_free(cell), "occupied {cell} before hit {}", hit.cell);
            t += 0.05;
        }
    }

    #[test]
    fn signature_survives_square_moves(seed in 0u64..40, a in 0usize..10_000, b in 0usize..10_000, at in 0usize..1000) {
        let map = small_map(seed);
        let (s, g) = (free_cell(&map, a), free_cell(&map, b));
        let mut scratch = SearchScratch::new(&map);
        let free = |i: usize| map.is_free_idx(i);
        let Some(path) = search::astar(&map, &mut scratch, s, g, free, free) else { return Ok(()) };
        prop_assume!(path.cells.len() >= 2);
        let table = CutTable::new(&map);
        let base = table.signature(&path.cells);
        let i = at % (path.cells.len() - 1);
        let (u, v) = (path.cells[i], path.cells[i + 1]);
        for dr in -1isize..=1 {
            for dc in -1isize..=1 {
                let Some(w) = u.offset(dr, dc) else { continue };
                if w == u || w == v || w.chebyshev(v) != 1 || !map.is_free(w) {
                    continue;
                }
                let (r0, r1) = (u.row.min(v.row).min(w.row), u.row.max(v.row).max(w.row));
                let (c0, c1) = (u.col.min(v.col).min(w.col), u.col.max(v.col).max(w.col));
                if !(r0..=r1).all(|r| (c0..=c1).all(|c| map.is_free(Cell::new(r, c)))) {
                    continue;
                }
                let mut moved = path.cells.clone();
                moved.insert(i + 1, w);
                if search::is_valid_path(&map, &moved) {
                    prop_assert_eq!(table.signature(&moved), base.clone());
                }
            }
        }
    }

    #[test]
    fn signature_text_round_trips(word in proptest::collection::vec((1i16..6, any::<bool>()), 0..8)) {
        let mut sig = HSignature::empty();
        for (id, inv) in word {
            sig.push(if inv { -id } else { id });
        }
        let back: HSignature = sig.to_string().parse().unwrap();
        prop_assert_eq!(back, sig);
    }

    #[test]
    fn run_record_json_round_trips(
        k in 1usize..5,
        lens in proptest::collection::vec(0.0f64..1e4, 0..4),
        cells in proptest::collection::vec((0usize..600, 0usize..600), 0..20),
        flags in (any::<bool>(), any::<bool>(), any::<bool>()),
        pruned in proptest::collection::btree_map(prop::sample::select(Criterion::ALL.to_vec()), 0usize..100, 0..4),
    ) {
        let rec = RunRecord {
            planner: "tree".into(),
            map: "gen-64-2-7".into(),
            start: [1, 2],
            goal: [3, 4],
            k,
            results: lens
                .iter()
                .enumerate()
                .map(|(i, &l)| RecordPath {
                    length_m: l,
                    signature: if i == 0 { String::new() } else { format!("{i}~") },
                    path: cells.iter().map(|&(r, c)| [r, c]).collect(),
                })
                .collect(),
            stats: RecordStats {
                expansions: 17,
                pruned: pruned.into_iter().map(|(c, n)| (c.label().to_string(), n)).collect(),
                wall_ms: 1.25,
            },
            no_path: flags.0,
            classes_exhausted: flags.1,
            incomplete: flags.2,
        };
        let text = serde_json::to_string(&rec).unwrap();
        let back: RunRecord = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, rec);
    }

    #[test]
    fn sweeper_criterion_fires_one_way_at_most(g1 in 0.0f64..50.0, g2 in 0.0f64..50.0, d1 in 0.0f64..20.0, d2 in 0.0f64..20.0) {
        prop_assert!(!(crit_sweeper_sweeper(g1, g2, d2, d1, 0.0) && crit_sweeper_sweeper(g2, g1, d1, d2, 0.0)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn pruning_keeps_results_and_saves_work(seed in 0u64..1000, k in 1usize..4) {
        let map = small_map(seed);
        let (s, g) = mapgen::random_query(&map, seed).unwrap();
        let a = k_snpp(&map, s, g, PlannerOptions::new(k)).unwrap();
        let mut opts = PlannerOptions::new(k).without_pruning();
        opts.expansion_cap = 600;
        let b = k_snpp(&map, s, g, opts).unwrap();
        let sig = |o: &ksnpp::tree::PlanOutcome| o.results.iter().map(|r| (r.signature.to_string(), r.length)).collect::<Vec<_>>();
        prop_assert_eq!(sig(&a), sig(&b));
        prop_assert!(a.stats.expansions <= b.stats.expansions);
    }

    #[test]
    fn better_sets_grow_down_branches(seed in 0u64..1000) {
        let map = small_map(seed);
        let (s, g) = mapgen::random_query(&map, seed).unwrap();
        let mut p = Planner::new(&map, s, g, PlannerOptions::new(3)).unwrap();
        p.run().unwrap();
        let set = |b| -> BTreeSet<(u32, u32)> {
            p.chain(b).iter().flat_map(|&x| p.relations().better_than(x)).map(|bt| (bt.better.node, bt.better.child)).collect()
        };
        for n in p.nodes().iter().skip(1) {
            let parent = set(n.origin.unwrap());
            for c in 0..n.children().len() {
                let child = set(ksnpp::pruning::BranchId::new(n.id, c));
                prop_assert!(child.is_superset(&parent));
            }
        }
    }

    #[test]
    fn oracle_first_path_is_plain_shortest(seed in 0u64..1000) {
        let map = small_map(seed);
        let (s, g) = mapgen::random_query(&map, seed).unwrap();
        let o = oracle_k_snpp(&map, s, g, 1, default_lmax(1));
        let mut scratch = SearchScratch::new(&map);
        let free = |i: usize| map.is_free_idx(i);
        let plain = search::astar(&map, &mut scratch, s, g, free, free).unwrap();
        prop_assert_eq!(o.results[0].length, plain.length);
    }
}
