use ksnpp::fixtures;
use ksnpp::oracle::{anchors, oracle_k_snpp, shortest_in_class, CutTable, HSignature};
use ksnpp::Cell;

#[test]
fn anchor_counts() {
    assert_eq!(anchors(&fixtures::ring21().map).len(), 1);
    assert_eq!(anchors(&fixtures::empty21().map).len(), 0);
    assert_eq!(anchors(&fixtures::two_blocks().map).len(), 2);
}

#[test]
fn ring21_two_classes_have_equal_length() {
    let f = fixtures::ring21();
    let out = oracle_k_snpp(&f.map, f.start, f.goal, 2, 6);
    let sigs: Vec<String> = out.results.iter().map(|r| r.signature.to_string()).collect();
    // The route under the block never crosses the upward cut.
    assert_eq!(sigs, vec!["", "1"]);
    assert_eq!(out.results[0].length, out.results[1].length);
}

#[test]
fn ring21_third_class_wraps_once() {
    let f = fixtures::ring21();
    let out = oracle_k_snpp(&f.map, f.start, f.goal, 3, 8);
    assert_eq!(out.results.len(), 3);
    // Wrapping once over the top ties with wrapping once underneath; the
    // canonical tie-break picks the two-letter word.
    assert_eq!(out.results[2].signature.to_string(), "1.1");
    assert!(out.results[2].length > out.results[1].length);
}

#[test]
fn empty_room_has_one_class() {
    let f = fixtures::empty21();
    let out = oracle_k_snpp(&f.map, f.start, f.goal, 2, 6);
    assert_eq!(out.results.len(), 1);
    assert!(out.results[0].signature.is_empty());
    assert!(out.classes_exhausted);
}

#[test]
fn sealed_chamber_has_no_path() {
    let f = fixtures::sealed_chamber();
    let out = oracle_k_snpp(&f.map, f.start, f.goal, 1, 4);
    assert!(out.no_path);
    assert!(out.results.is_empty());
}

#[test]
fn straight_crossing_above_anchor() {
    let f = fixtures::ring21();
    let t = CutTable::new(&f.map);
    let a = t.anchors()[0].cell;
    let sig = t.signature(&[Cell::new(a.row - 2, a.col - 1), Cell::new(a.row - 2, a.col)]);
    assert_eq!(sig.to_string(), "1");
    let sig = t.signature(&[Cell::new(a.row - 2, a.col), Cell::new(a.row - 2, a.col - 1)]);
    assert_eq!(sig.to_string(), "1~");
    // Crossing below the anchor row is not a crossing of the cut.
    let sig = t.signature(&[Cell::new(a.row + 20, a.col - 1), Cell::new(a.row + 20, a.col)]);
    assert!(sig.is_empty());
}

#[test]
fn class_constrained_search_matches_k_search() {
    let f = fixtures::ring21();
    let out = oracle_k_snpp(&f.map, f.start, f.goal, 3, 8);
    for r in &out.results {
        let c = shortest_in_class(&f.map, f.start, f.goal, &r.signature).unwrap();
        assert_eq!(c.length, r.length);
        let s: HSignature = r.signature.to_string().parse().unwrap();
        assert_eq!(s, c.signature);
    }
}
