//! Homotopy-augmented Dijkstra used as the correctness baseline.
//!
//! Every internal obstacle (an 8-connected component of inflated cells that
//! does not touch the border) gets an anchor at its top-left-most cell and a
//! cut running from the anchor's top-left corner straight up to the border.
//! A path's signature is the freely reduced word of signed cut crossings:
//! crossing cut `i` with increasing column appends `i`, decreasing appends
//! `i~`. Two paths with the same endpoints are homotopic exactly when their
//! reduced words agree.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::geometry::OctileLength;
use crate::gridmap::{Cell, GridMap};
use crate::search;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Anchor {
    /// 1-based obstacle id.
    pub id: u16,
    pub cell: Cell,
}

/// Labels internal obstacles and assigns their anchors, ordered by `(row, col)`.
pub fn anchors(map: &GridMap) -> Vec<Anchor> {
    let w = map.width() as isize;
    let h = map.height() as isize;
    let n = map.len();
    let mut label = vec![u32::MAX; n];
    let mut found = Vec::new();
    let mut stack = Vec::new();
    let mut next = 0u32;
    for start in 0..n {
        if map.is_free_idx(start) || label[start] != u32::MAX {
            continue;
        }
        let mut touches_border = false;
        label[start] = next;
        stack.push(start);
        while let Some(i) = stack.pop() {
            let r = i as isize / w;
            let c = i as isize % w;
            if r == 0 || c == 0 || r == h - 1 || c == w - 1 {
                touches_border = true;
            }
            for dr in -1..=1 {
                for dc in -1..=1 {
                    let rr = r + dr;
                    let cc = c + dc;
                    if rr < 0 || cc < 0 || rr >= h || cc >= w {
                        continue;
                    }
                    let j = (rr * w + cc) as usize;
                    if !map.is_free_idx(j) && label[j] == u32::MAX {
                        label[j] = next;
                        stack.push(j);
                    }
                }
            }
        }
        if !touches_border {
            // Row-major scan order makes `start` the component's smallest (row, col).
            found.push(map.cell_at(start));
        }
        next += 1;
    }
    found
        .into_iter()
        .enumerate()
        .map(|(i, cell)| Anchor { id: i as u16 + 1, cell })
        .collect()
}

/// Reduced word over signed obstacle ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct HSignature(pub Vec<i16>);

impl HSignature {
    pub fn empty() -> Self {
        Self(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Appends one letter with free reduction.
    pub fn push(&mut self, letter: i16) {
        if self.0.last() == Some(&-letter) {
            self.0.pop();
        } else {
            self.0.push(letter);
        }
    }
}

impl fmt::Display for HSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, l) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(".")?;
            }
            if *l < 0 {
                write!(f, "{}~", -l)?;
            } else {
                write!(f, "{l}")?;
            }
        }
        Ok(())
    }
}

impl FromStr for HSignature {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        let mut sig = HSignature::empty();
        if s.is_empty() {
            return Ok(sig);
        }
        for tok in s.split('.') {
            let (num, inv) = match tok.strip_suffix('~') {
                Some(n) => (n, true),
                None => (tok, false),
            };
            let id: i16 = num.parse().map_err(|_| format!("bad signature letter `{tok}`"))?;
            if id <= 0 {
                return Err(format!("bad signature letter `{tok}`"));
            }
            sig.push(if inv { -id } else { id });
        }
        Ok(sig)
    }
}

impl From<HSignature> for String {
    fn from(s: HSignature) -> String {
        s.to_string()
    }
}

impl TryFrom<String> for HSignature {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

/// Cut-crossing table for fast per-move letter lookup.
#[derive(Clone, Debug)]
pub struct CutTable {
    anchors: Vec<Anchor>,
    /// For each column boundary `c` (between columns `c-1` and `c`), anchors
    /// in that column as `(row, id)`, sorted by descending row.
    by_col: Vec<Vec<(usize, i16)>>,
}

impl CutTable {
    pub fn new(map: &GridMap) -> Self {
        Self::from_anchors(map.width(), anchors(map))
    }

    pub fn from_anchors(width: usize, anchors: Vec<Anchor>) -> Self {
        let mut by_col = vec![Vec::new(); width + 1];
        for a in &anchors {
            by_col[a.cell.col].push((a.cell.row, a.id as i16));
        }
        for v in &mut by_col {
            v.sort_by(|a, b| b.0.cmp(&a.0));
        }
        Self { anchors, by_col }
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    /// Calls `f` with each letter crossed by the single move `from -> to`, in crossing order.
    ///
    /// Cuts sharing a column are ordered as if each sat slightly further
    /// left the lower its anchor is.
    #[inline]
    pub fn for_each_letter(&self, from: Cell, to: Cell, mut f: impl FnMut(i16)) {
        if from.col == to.col {
            return;
        }
        let rightward = to.col > from.col;
        let boundary = from.col.max(to.col);
        let cuts = &self.by_col[boundary];
        if cuts.is_empty() {
            return;
        }
        let top = from.row.max(to.row);
        if rightward {
            for &(row, id) in cuts {
                if row > top {
                    f(id);
                }
            }
        } else {
            for &(row, id) in cuts.iter().rev() {
                if row > top {
                    f(-id);
                }
            }
        }
    }

    /// Reduced signature of a lattice path.
    pub fn signature(&self, cells: &[Cell]) -> HSignature {
        let mut sig = HSignature::empty();
        for w in cells.windows(2) {
            self.for_each_letter(w[0], w[1], |l| sig.push(l));
        }
        sig
    }
}

/// Extends a signature by one move.
pub fn signature_extend(table: &CutTable, sig: &HSignature, from: Cell, to: Cell) -> HSignature {
    let mut out = sig.clone();
    table.for_each_letter(from, to, |l| out.push(l));
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClassPath {
    pub signature: HSignature,
    pub length: OctileLength,
    pub cells: Vec<Cell>,
}

#[derive(Clone, Debug, Default)]
pub struct OracleOutcome {
    pub results: Vec<ClassPath>,
    pub no_path: bool,
    pub classes_exhausted: bool,
    /// Number of `(cell, word)` states settled.
    pub expansions: usize,
    pub wall_ms: f64,
}

#[derive(Clone, Copy, Debug)]
struct QEntry {
    len: OctileLength,
    state: u32,
}

impl PartialEq for QEntry {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for QEntry {}
impl PartialOrd for QEntry {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for QEntry {
    fn cmp(&self, o: &Self) -> Ordering {
        o.len.cmp(&self.len).then(o.state.cmp(&self.state))
    }
}

/// Interned reduced words with a transition cache.
struct WordTable {
    words: Vec<Vec<i16>>,
    ids: FxHashMap<Vec<i16>, u32>,
    step: FxHashMap<(u32, i16), u32>,
}

impl WordTable {
    fn new() -> Self {
        let mut ids = FxHashMap::default();
        ids.insert(Vec::new(), 0);
        Self { words: vec![Vec::new()], ids, step: FxHashMap::default() }
    }

    fn apply(&mut self, word: u32, letter: i16) -> u32 {
        if let Some(&w) = self.step.get(&(word, letter)) {
            return w;
        }
        let mut next = self.words[word as usize].clone();
        if next.last() == Some(&-letter) {
            next.pop();
        } else {
            next.push(letter);
        }
        let id = match self.ids.get(&next) {
            Some(&id) => id,
            None => {
                let id = self.words.len() as u32;
                self.ids.insert(next.clone(), id);
                self.words.push(next);
                id
            }
        };
        self.step.insert((word, letter), id);
        id
    }

    fn len(&self, word: u32) -> usize {
        self.words[word as usize].len()
    }
}

enum Stop<'a> {
    FirstK(usize),
    Class(&'a HSignature),
}

fn augmented_dijkstra(
    map: &GridMap,
    table: &CutTable,
    start: Cell,
    goal: Cell,
    lmax: usize,
    stop: Stop<'_>,
) -> (Vec<ClassPath>, usize) {
    let mut words = WordTable::new();
    let mut state_of: FxHashMap<u64, u32> = FxHashMap::default();
    let mut states: Vec<(u32, u32)> = Vec::new();
    let mut dist: Vec<OctileLength> = Vec::new();
    let mut parent: Vec<u32> = Vec::new();
    let mut done: Vec<bool> = Vec::new();
    let mut heap = BinaryHeap::new();
    let key = |cell: u32, word: u32| ((word as u64) << 32) | cell as u64;

    let s0 = map.index(start) as u32;
    state_of.insert(key(s0, 0), 0);
    states.push((s0, 0));
    dist.push(OctileLength::ZERO);
    parent.push(u32::MAX);
    done.push(false);
    heap.push(QEntry { len: OctileLength::ZERO, state: 0 });

    let goal_idx = map.index(goal) as u32;
    let mut found: Vec<(u32, OctileLength)> = Vec::new();
    let mut bound: Option<OctileLength> = None;
    let mut settled = 0usize;

    while let Some(e) = heap.pop() {
        let st = e.state as usize;
        if done[st] {
            continue;
        }
        if let Some(b) = bound {
            if e.len > b {
                break;
            }
        }
        done[st] = true;
        settled += 1;
        let (cell, word) = states[st];
        if cell == goal_idx {
            match stop {
                Stop::FirstK(k) => {
                    found.push((e.state, e.len));
                    if found.len() == k && bound.is_none() {
                        bound = Some(e.len);
                    }
                }
                Stop::Class(target) => {
                    if words.words[word as usize] == target.0 {
                        found.push((e.state, e.len));
                        break;
                    }
                }
            }
        }
        let from = map.cell_at(cell as usize);
        for (n, diag) in search::neighbors(map, cell as usize, |j| map.is_free_idx(j)) {
            let to = map.cell_at(n);
            let mut w = word;
            table.for_each_letter(from, to, |l| w = words.apply(w, l));
            if words.len(w) > lmax {
                continue;
            }
            let nl = e.len + OctileLength::step(diag);
            let k = key(n as u32, w);
            let id = match state_of.get(&k) {
                Some(&id) => {
                    if done[id as usize] || dist[id as usize] <= nl {
                        continue;
                    }
                    id
                }
                None => {
                    let id = states.len() as u32;
                    state_of.insert(k, id);
                    states.push((n as u32, w));
                    dist.push(nl);
                    parent.push(u32::MAX);
                    done.push(false);
                    id
                }
            };
            dist[id as usize] = nl;
            parent[id as usize] = e.state;
            heap.push(QEntry { len: nl, state: id });
        }
    }

    let results = found
        .into_iter()
        .map(|(st, len)| {
            let mut cells = Vec::new();
            let mut cur = st;
            while cur != u32::MAX {
                cells.push(map.cell_at(states[cur as usize].0 as usize));
                cur = parent[cur as usize];
            }
            cells.reverse();
            let word = states[st as usize].1;
            ClassPath {
                signature: HSignature(words.words[word as usize].clone()),
                length: len,
                cells,
            }
        })
        .collect();
    (results, settled)
}

/// Default word-length bound for `k` requested classes.
pub fn default_lmax(k: usize) -> usize {
    2 * k + 2
}

/// Orders results canonically: by exact length, then by signature text.
pub fn canonical_sort(results: &mut [ClassPath]) {
    results.sort_by(|a, b| {
        a.length
            .cmp(&b.length)
            .then_with(|| a.signature.to_string().cmp(&b.signature.to_string()))
    });
}

/// The `k` shortest pairwise non-homotopic paths by exhaustive search.
///
/// Classes tied in length with the `k`-th are resolved by signature text.
pub fn oracle_k_snpp(map: &GridMap, start: Cell, goal: Cell, k: usize, lmax: usize) -> OracleOutcome {
    let t0 = Instant::now();
    let mut out = OracleOutcome::default();
    if !map.is_free(start) || !map.is_free(goal) || !map.free_component(start)[map.index(goal)] {
        out.no_path = true;
        out.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
        return out;
    }
    let table = CutTable::new(map);
    let (mut results, settled) = augmented_dijkstra(map, &table, start, goal, lmax, Stop::FirstK(k));
    canonical_sort(&mut results);
    results.truncate(k);
    out.classes_exhausted = results.len() < k;
    out.results = results;
    out.expansions = settled;
    out.wall_ms = t0.elapsed().as_secs_f64() * 1e3;
    out
}

/// Shortest path from `start` to `goal` whose reduced signature equals `target`.
pub fn shortest_in_class(map: &GridMap, start: Cell, goal: Cell, target: &HSignature) -> Option<ClassPath> {
    if !map.is_free(start) || !map.is_free(goal) {
        return None;
    }
    let table = CutTable::new(map);
    let lmax = target.len() + 4;
    let (results, _) = augmented_dijkstra(map, &table, start, goal, lmax, Stop::Class(target));
    results.into_iter().next()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signature_text_round_trips() {
        for s in ["", "1", "1~", "2.1~.3"] {
            let sig: HSignature = s.parse().unwrap();
            assert_eq!(sig.to_string(), s);
        }
        let sig: HSignature = "1.1~".parse().unwrap();
        assert!(sig.is_empty());
    }

    #[test]
    fn push_reduces() {
        let mut s = HSignature::empty();
        s.push(2);
        s.push(1);
        s.push(-1);
        assert_eq!(s.0, vec![2]);
    }
}
