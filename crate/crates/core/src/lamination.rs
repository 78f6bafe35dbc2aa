//! Finite-scale probes of attracting laminations: leaf segments, catalogs
//! of their short subpaths, weak convergence, quasi-periodicity, and a
//! one-sided independence test.
//!
//! Leaves are unoriented, so catalogs hold every window together with its
//! reverse. Measure is counted over vertex positions with unit edge lengths.

use std::collections::{HashMap, HashSet};

use num_rational::Ratio;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DirEdge, EdgePath};
use crate::graphmap::{GraphMap, TrainTrackVerdict};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeafSegment {
    pub path: EdgePath,
    pub seed: usize,
    pub iterations: usize,
}

fn require_train_track(f: &GraphMap) -> Result<()> {
    if !f.is_self_map() {
        return Err(Error::DifferentGraphs);
    }
    match f.verify_train_track(4 * f.graph().edge_count().pow(2) + 8) {
        TrainTrackVerdict::IllegalTurnFound { turn, .. } => Err(Error::IllegalTurns {
            vertex: f.graph().src(turn.first),
        }),
        _ => Ok(()),
    }
}

/// `f^k(seed)`, tightened.
pub fn leaf_segment(f: &GraphMap, seed: usize, k: usize) -> Result<LeafSegment> {
    require_train_track(f)?;
    if seed >= f.graph().edge_count() {
        return Err(Error::InvalidArgument(format!("no edge {seed}")));
    }
    let mut path = edge_path(f, seed);
    for _ in 0..k {
        path = f.apply(&path);
    }
    Ok(LeafSegment {
        path,
        seed,
        iterations: k,
    })
}

fn edge_path(f: &GraphMap, e: usize) -> EdgePath {
    EdgePath {
        start: f.graph().ends()[e].0,
        edges: vec![DirEdge::forward(e)],
    }
}

type Window = Vec<u32>;

fn window(edges: &[DirEdge]) -> Window {
    edges.iter().map(|d| d.index() as u32).collect()
}

fn reversed(w: &[u32]) -> Window {
    w.iter().rev().map(|&d| d ^ 1).collect()
}

/// All subpaths of length at most `scale` of the leaf segments `f^j(e)`,
/// `j ≤ depth`, and their reverses.
#[derive(Clone, Debug)]
pub struct LeafCatalog {
    scale: usize,
    depth: usize,
    windows: HashSet<Window>,
}

impl LeafCatalog {
    pub fn new(f: &GraphMap, depth: usize, scale: usize) -> Result<LeafCatalog> {
        require_train_track(f)?;
        let mut windows = HashSet::new();
        for e in 0..f.graph().edge_count() {
            let mut seg = edge_path(f, e);
            for j in 0..=depth {
                if j > 0 {
                    seg = f.apply(&seg);
                }
                for len in 1..=scale.min(seg.len()) {
                    for w in seg.edges.windows(len) {
                        let w = window(w);
                        windows.insert(reversed(&w));
                        windows.insert(w);
                    }
                }
            }
        }
        Ok(LeafCatalog {
            scale,
            depth,
            windows,
        })
    }

    pub fn scale(&self) -> usize {
        self.scale
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn contains(&self, edges: &[DirEdge]) -> bool {
        self.windows.contains(&window(edges))
    }

    /// Windows of exactly `len` edges.
    pub fn windows_of_length(&self, len: usize) -> HashSet<&Window> {
        self.windows.iter().filter(|w| w.len() == len).collect()
    }
}

/// Fraction of the vertex positions of a closed loop whose `L`-neighbourhood
/// (the `2L` edges centred there) is a leaf segment. Neighbourhoods wrap
/// around the loop, so a loop shorter than `2L` is read periodically.
pub fn weak_convergence_fraction(l: &EdgePath, catalog: &LeafCatalog, radius: usize) -> Result<Ratio<u64>> {
    if radius == 0 {
        return Err(Error::InvalidArgument("radius must be at least 1".into()));
    }
    if catalog.scale < 2 * radius {
        return Err(Error::CatalogScale {
            scale: catalog.scale,
            requested: 2 * radius,
        });
    }
    let n = l.edges.len();
    if n == 0 {
        return Err(Error::InvalidArgument("loop is empty".into()));
    }
    let mut good = 0u64;
    let mut buf = Vec::with_capacity(2 * radius);
    for p in 0..n {
        buf.clear();
        for i in 0..2 * radius {
            let idx = (p + n * (radius + 1) + i - radius) % n;
            buf.push(l.edges[idx]);
        }
        if catalog.contains(&buf) {
            good += 1;
        }
    }
    Ok(Ratio::new(good, n as u64))
}

/// Smallest `L' ≤ cap` such that every subpath of length `L` of the leaf
/// occurs in every window of length `L'` of it.
pub fn quasi_periodicity_probe(leaf: &LeafSegment, len: usize, cap: usize) -> Option<usize> {
    let edges = &leaf.path.edges;
    let n = edges.len();
    if len == 0 || len > n {
        return None;
    }
    // Dense ids for the length-`len` subpaths, by start position.
    let mut ids: HashMap<&[DirEdge], usize> = HashMap::new();
    let pos: Vec<usize> = edges
        .windows(len)
        .map(|w| {
            let k = ids.len();
            *ids.entry(w).or_insert(k)
        })
        .collect();
    let distinct = ids.len();
    let works = |big: usize| -> bool {
        if big > n {
            return false;
        }
        let span = big - len + 1;
        let mut count = vec![0usize; distinct];
        let mut present = 0;
        for (i, &id) in pos.iter().enumerate() {
            if count[id] == 0 {
                present += 1;
            }
            count[id] += 1;
            if i >= span {
                let old = pos[i - span];
                count[old] -= 1;
                if count[old] == 0 {
                    present -= 1;
                }
            }
            if i + 1 >= span && present < distinct {
                return false;
            }
        }
        true
    };
    let hi = cap.min(n);
    if hi < len || !works(hi) {
        return None;
    }
    let (mut lo, mut hi) = (len, hi);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if works(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Some(lo)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "verdict", rename_all = "snake_case")]
pub enum IndependenceVerdict {
    /// A leaf segment of one lamination of this length is missing from the
    /// other's catalog; the laminations differ.
    DistinctAtScale { scale: usize, witness: Vec<DirEdge>, from_first: bool },
    /// No difference at this scale. Not a proof of equality.
    IndistinguishableAtScale { scale: usize },
}

/// Compares the length-`L` leaf segments of depth at most `k` of two maps.
pub fn independence_probe(f: &GraphMap, g: &GraphMap, len: usize, k: usize) -> Result<IndependenceVerdict> {
    if f.graph() != g.graph() {
        return Err(Error::DifferentGraphs);
    }
    let cf = LeafCatalog::new(f, k, len)?;
    let cg = LeafCatalog::new(g, k, len)?;
    let (wf, wg) = (cf.windows_of_length(len), cg.windows_of_length(len));
    let to_path = |w: &Window| w.iter().map(|&d| DirEdge::from_index(d as usize)).collect();
    let mut only_f: Vec<&&Window> = wf.difference(&wg).collect();
    let mut only_g: Vec<&&Window> = wg.difference(&wf).collect();
    only_f.sort();
    only_g.sort();
    if let Some(w) = only_f.first() {
        return Ok(IndependenceVerdict::DistinctAtScale {
            scale: len,
            witness: to_path(w),
            from_first: true,
        });
    }
    if let Some(w) = only_g.first() {
        return Ok(IndependenceVerdict::DistinctAtScale {
            scale: len,
            witness: to_path(w),
            from_first: false,
        });
    }
    Ok(IndependenceVerdict::IndistinguishableAtScale { scale: len })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::words::{Endomorphism, Word};

    fn map(images: &[&str]) -> GraphMap {
        GraphMap::from_endomorphism(&Endomorphism::parse(images).unwrap())
    }

    fn word_of(f: &GraphMap, p: &EdgePath) -> Word {
        f.domain().read(p)
    }

    #[test]
    fn segments() {
        let fib = map(&["ab", "a"]);
        let w = |e, k| word_of(&fib, &leaf_segment(&fib, e, k).unwrap().path).to_string();
        assert_eq!(w(0, 0), "a");
        assert_eq!(w(0, 2), "aba");
        assert_eq!(w(1, 3), "aba");
        let a = fib.transition_matrix().pow(5);
        assert_eq!(leaf_segment(&fib, 1, 5).unwrap().path.len() as u64, a.column_sums()[1]);
    }

    #[test]
    fn convergence_fraction() {
        let fib = map(&["ab", "a"]);
        let cat = LeafCatalog::new(&fib, 8, 8).unwrap();
        let b_loop = fib.domain().free_loop_of_word(&Word::parse("b", 2).unwrap()).unwrap();
        assert_eq!(weak_convergence_fraction(&b_loop, &cat, 1).unwrap(), Ratio::new(0, 1));
        let ab = fib.domain().free_loop_of_word(&Word::parse("ab", 2).unwrap()).unwrap();
        assert_eq!(weak_convergence_fraction(&ab, &cat, 1).unwrap(), Ratio::new(1, 1));
        assert!(matches!(
            weak_convergence_fraction(&ab, &cat, 5),
            Err(Error::CatalogScale { .. })
        ));
    }

    #[test]
    fn quasi_periodicity() {
        let rot = map(&["a", "b"]);
        let leaf = leaf_segment(&rot, 0, 3).unwrap();
        assert_eq!(quasi_periodicity_probe(&leaf, 1, 4), Some(1));
        assert_eq!(quasi_periodicity_probe(&leaf, 2, 4), None);
        let fib = map(&["ab", "a"]);
        let leaf = leaf_segment(&fib, 0, 14).unwrap();
        let lp = quasi_periodicity_probe(&leaf, 2, 64).unwrap();
        assert!(lp >= 2);
    }

    #[test]
    fn independence() {
        let fib = map(&["ab", "a"]);
        assert_eq!(
            independence_probe(&fib, &fib, 4, 6).unwrap(),
            IndependenceVerdict::IndistinguishableAtScale { scale: 4 }
        );
        let sq = fib.power(2).unwrap();
        assert_eq!(
            independence_probe(&fib, &sq, 4, 8).unwrap(),
            IndependenceVerdict::IndistinguishableAtScale { scale: 4 }
        );
    }
}
