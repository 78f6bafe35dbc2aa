//! Labeled graphs over a rose and Stallings folding.
//!
//! A [`LabeledGraph`] stores each edge once, with a positive label `l`;
//! traversing it backwards reads `-l`. Labels range over `1..=alphabet`.
//! For subgroup graphs the alphabet is the generating set of `F_n`, but the
//! same structure is reused for graphs labeled by the oriented edges of an
//! arbitrary graph.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::words::{letter_key, push_reduced, Letter, Word};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledEdge {
    pub src: usize,
    pub dst: usize,
    pub label: Letter,
}

/// An outgoing half-edge: traversing `edge` forwards (`label > 0`) or
/// backwards (`label < 0`) from some vertex to `target`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HalfEdge {
    pub label: Letter,
    pub target: usize,
    pub edge: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledGraph {
    alphabet: usize,
    vertex_count: usize,
    edges: Vec<LabeledEdge>,
    basepoint: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct FoldStats {
    /// Edge identifications performed; each removes one edge.
    pub steps: usize,
}

struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> UnionFind {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }
}

impl LabeledGraph {
    pub fn new(
        alphabet: usize,
        vertex_count: usize,
        edges: Vec<LabeledEdge>,
        basepoint: Option<usize>,
    ) -> Result<LabeledGraph> {
        for e in &edges {
            if e.src >= vertex_count || e.dst >= vertex_count {
                return Err(Error::InvalidGraph("edge endpoint out of range".into()));
            }
            if e.label <= 0 || e.label as usize > alphabet {
                return Err(Error::LetterOutOfRange {
                    letter: e.label,
                    rank: alphabet,
                });
            }
        }
        if basepoint.is_some_and(|b| b >= vertex_count) {
            return Err(Error::InvalidGraph("basepoint out of range".into()));
        }
        Ok(LabeledGraph {
            alphabet,
            vertex_count,
            edges,
            basepoint,
        })
    }

    /// Single based vertex, no edges.
    pub fn point(alphabet: usize) -> LabeledGraph {
        LabeledGraph {
            alphabet,
            vertex_count: 1,
            edges: Vec::new(),
            basepoint: Some(0),
        }
    }

    pub fn rose(n: usize) -> LabeledGraph {
        LabeledGraph {
            alphabet: n,
            vertex_count: 1,
            edges: (1..=n as Letter)
                .map(|l| LabeledEdge {
                    src: 0,
                    dst: 0,
                    label: l,
                })
                .collect(),
            basepoint: Some(0),
        }
    }

    /// Wedge of one labeled loop per nonempty word at a common basepoint.
    /// Nothing is folded.
    pub fn wedge(words: &[Word], alphabet: usize) -> Result<LabeledGraph> {
        let mut g = LabeledGraph::point(alphabet);
        for w in words {
            if w.rank() != alphabet {
                return Err(Error::RankMismatch {
                    expected: alphabet,
                    found: w.rank(),
                });
            }
            if !w.is_empty() {
                g.add_path(0, 0, w.letters());
            }
        }
        Ok(g)
    }

    /// Adds a path reading `letters` from `from` to `to` with fresh interior
    /// vertices. Returns the ids of the new edges.
    pub fn add_path(&mut self, from: usize, to: usize, letters: &[Letter]) -> Vec<usize> {
        let mut ids = Vec::with_capacity(letters.len());
        let mut cur = from;
        for (i, &l) in letters.iter().enumerate() {
            let next = if i + 1 == letters.len() {
                to
            } else {
                self.vertex_count += 1;
                self.vertex_count - 1
            };
            ids.push(self.edges.len());
            self.edges.push(if l > 0 {
                LabeledEdge {
                    src: cur,
                    dst: next,
                    label: l,
                }
            } else {
                LabeledEdge {
                    src: next,
                    dst: cur,
                    label: -l,
                }
            });
            cur = next;
        }
        ids
    }

    pub fn add_vertex(&mut self) -> usize {
        self.vertex_count += 1;
        self.vertex_count - 1
    }

    pub fn alphabet(&self) -> usize {
        self.alphabet
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[LabeledEdge] {
        &self.edges
    }

    pub fn basepoint(&self) -> Option<usize> {
        self.basepoint
    }

    pub fn with_basepoint(mut self, basepoint: Option<usize>) -> LabeledGraph {
        assert!(basepoint.is_none_or(|b| b < self.vertex_count));
        self.basepoint = basepoint;
        self
    }

    /// Outgoing half-edges of every vertex, sorted by label key.
    pub fn adjacency(&self) -> Vec<Vec<HalfEdge>> {
        let mut adj = vec![Vec::new(); self.vertex_count];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.src].push(HalfEdge {
                label: e.label,
                target: e.dst,
                edge: i,
            });
            adj[e.dst].push(HalfEdge {
                label: -e.label,
                target: e.src,
                edge: i,
            });
        }
        for a in &mut adj {
            a.sort_by_key(|h| (letter_key(h.label), h.target, h.edge));
        }
        adj
    }

    pub fn valences(&self) -> Vec<usize> {
        let mut val = vec![0; self.vertex_count];
        for e in &self.edges {
            val[e.src] += 1;
            val[e.dst] += 1;
        }
        val
    }

    /// True when no vertex has two outgoing half-edges with the same label.
    pub fn is_folded(&self) -> bool {
        self.adjacency()
            .iter()
            .all(|a| a.windows(2).all(|w| w[0].label != w[1].label))
    }

    pub fn fold(&self) -> LabeledGraph {
        self.fold_with_stats().0
    }

    /// Folds with a union-find over vertices. Each vertex keeps a
    /// label → target table; merging two vertices merges their tables and
    /// any clash schedules a further merge.
    pub fn fold_with_stats(&self) -> (LabeledGraph, FoldStats) {
        let n = self.vertex_count;
        let mut uf = UnionFind::new(n);
        let mut table: Vec<HashMap<Letter, usize>> = vec![HashMap::new(); n];
        let mut pending: Vec<(usize, usize)> = Vec::new();
        let mut stats = FoldStats::default();

        fn insert(
            uf: &mut UnionFind,
            table: &mut [HashMap<Letter, usize>],
            pending: &mut Vec<(usize, usize)>,
            v: usize,
            label: Letter,
            target: usize,
        ) {
            let v = uf.find(v);
            match table[v].get(&label) {
                Some(&old) => {
                    if uf.find(old) != uf.find(target) {
                        pending.push((old, target));
                    }
                }
                None => {
                    table[v].insert(label, target);
                }
            }
        }

        for e in &self.edges {
            insert(&mut uf, &mut table, &mut pending, e.src, e.label, e.dst);
            insert(&mut uf, &mut table, &mut pending, e.dst, -e.label, e.src);
            while let Some((a, b)) = pending.pop() {
                let (mut a, mut b) = (uf.find(a), uf.find(b));
                if a == b {
                    continue;
                }
                if uf.size[a] < uf.size[b] {
                    std::mem::swap(&mut a, &mut b);
                }
                uf.parent[b] = a;
                uf.size[a] += uf.size[b];
                let moved = std::mem::take(&mut table[b]);
                for (label, target) in moved {
                    insert(&mut uf, &mut table, &mut pending, a, label, target);
                }
            }
        }

        let mut new_id = vec![usize::MAX; n];
        let mut count = 0;
        for v in 0..n {
            let r = uf.find(v);
            if new_id[r] == usize::MAX {
                new_id[r] = count;
                count += 1;
            }
        }
        let mut edges = Vec::new();
        for v in 0..n {
            if uf.find(v) != v {
                continue;
            }
            let mut out: Vec<_> = table[v].iter().filter(|(l, _)| **l > 0).collect();
            out.sort();
            for (&label, &t) in out {
                edges.push(LabeledEdge {
                    src: new_id[v],
                    dst: new_id[uf.find(t)],
                    label,
                });
            }
        }
        edges.sort();
        stats.steps = self.edges.len() - edges.len();
        let basepoint = self.basepoint.map(|b| new_id[uf.find(b)]);
        (
            LabeledGraph {
                alphabet: self.alphabet,
                vertex_count: count,
                edges,
                basepoint,
            },
            stats,
        )
    }

    /// Follows `w` from the basepoint in a folded graph; the end vertex if
    /// the whole word is readable.
    pub fn read(&self, w: &Word) -> Option<usize> {
        let start = self.basepoint?;
        let adj = self.adjacency();
        let mut cur = start;
        for &l in w.letters() {
            cur = adj[cur].iter().find(|h| h.label == l)?.target;
        }
        Some(cur)
    }

    /// Whether the reduced word `w` is readable as a closed loop at the
    /// basepoint. The graph must be folded and based.
    pub fn membership(&self, w: &Word) -> bool {
        self.read(w) == self.basepoint && self.basepoint.is_some()
    }

    /// First Betti number: `E - V + #components`.
    pub fn rank(&self) -> usize {
        let (_, c) = self.components();
        self.edges.len() + c - self.vertex_count
    }

    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut uf = UnionFind::new(self.vertex_count);
        for e in &self.edges {
            let (a, b) = (uf.find(e.src), uf.find(e.dst));
            if a != b {
                uf.parent[a] = b;
            }
        }
        let mut id = vec![usize::MAX; self.vertex_count];
        let mut comp = vec![0; self.vertex_count];
        let mut count = 0;
        for v in 0..self.vertex_count {
            let r = uf.find(v);
            if id[r] == usize::MAX {
                id[r] = count;
                count += 1;
            }
            comp[v] = id[r];
        }
        (comp, count)
    }

    /// Repeatedly removes vertices of valence at most one (the basepoint
    /// survives when `keep_basepoint`). Also returns old → new vertex ids.
    pub fn core_with_map(&self, keep_basepoint: bool) -> (LabeledGraph, Vec<Option<usize>>) {
        let n = self.vertex_count;
        let mut val = self.valences();
        let mut alive_v = vec![true; n];
        let mut alive_e = vec![true; self.edges.len()];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); n];
        for (i, e) in self.edges.iter().enumerate() {
            incident[e.src].push(i);
            if e.dst != e.src {
                incident[e.dst].push(i);
            }
        }
        let keep = if keep_basepoint { self.basepoint } else { None };
        let mut queue: VecDeque<usize> = (0..n).filter(|&v| val[v] <= 1).collect();
        while let Some(v) = queue.pop_front() {
            if !alive_v[v] || Some(v) == keep || val[v] > 1 {
                continue;
            }
            alive_v[v] = false;
            for &i in &incident[v] {
                if !alive_e[i] {
                    continue;
                }
                alive_e[i] = false;
                let e = self.edges[i];
                let w = if e.src == v { e.dst } else { e.src };
                val[w] -= 1;
                if val[w] <= 1 {
                    queue.push_back(w);
                }
            }
        }
        let mut map = vec![None; n];
        let mut count = 0;
        for v in 0..n {
            if alive_v[v] {
                map[v] = Some(count);
                count += 1;
            }
        }
        let edges = self
            .edges
            .iter()
            .zip(&alive_e)
            .filter(|(_, &a)| a)
            .map(|(e, _)| LabeledEdge {
                src: map[e.src].unwrap(),
                dst: map[e.dst].unwrap(),
                label: e.label,
            })
            .collect();
        let basepoint = keep.and_then(|b| map[b]);
        (
            LabeledGraph {
                alphabet: self.alphabet,
                vertex_count: count,
                edges,
                basepoint,
            },
            map,
        )
    }

    pub fn core(&self, keep_basepoint: bool) -> LabeledGraph {
        self.core_with_map(keep_basepoint).0
    }

    /// Canonical code of a folded based graph: a breadth-first numbering
    /// from the basepoint visiting labels in `a < A < b < B` order, then the
    /// edge list in that numbering. Unreachable vertices are ignored.
    /// Two folded based graphs have equal codes iff they are isomorphic by
    /// a label-preserving map fixing the basepoint.
    pub fn canonical_code(&self) -> Option<Vec<u64>> {
        let base = self.basepoint?;
        let adj = self.adjacency();
        let mut num = vec![usize::MAX; self.vertex_count];
        num[base] = 0;
        let mut order = vec![base];
        let mut head = 0;
        while head < order.len() {
            let v = order[head];
            head += 1;
            for h in &adj[v] {
                if num[h.target] == usize::MAX {
                    num[h.target] = order.len();
                    order.push(h.target);
                }
            }
        }
        let mut code = vec![order.len() as u64];
        for &v in &order {
            code.push(u64::MAX);
            for h in &adj[v] {
                code.push(letter_key(h.label) as u64);
                code.push(num[h.target] as u64);
            }
        }
        Some(code)
    }

    pub fn is_isomorphic_based(&self, other: &LabeledGraph) -> bool {
        self.alphabet == other.alphabet
            && self.vertex_count == other.vertex_count
            && self.edges.len() == other.edges.len()
            && self.canonical_code().is_some()
            && self.canonical_code() == other.canonical_code()
    }

    /// Word read along a sequence of half-edge labels.
    pub fn reading(&self, labels: &[Letter]) -> Word {
        let mut buf = Vec::with_capacity(labels.len());
        for &l in labels {
            push_reduced(&mut buf, l);
        }
        Word::from_reduced_unchecked(buf, self.alphabet)
    }
}

/// The folded based graph recognizing the subgroup generated by `generators`.
pub fn subgroup_graph(generators: &[Word], rank: usize) -> Result<LabeledGraph> {
    Ok(LabeledGraph::wedge(generators, rank)?.fold())
}

pub fn fold(g: &LabeledGraph) -> LabeledGraph {
    g.fold()
}

pub fn membership(g: &LabeledGraph, w: &Word) -> bool {
    g.membership(w)
}

pub fn core(g: &LabeledGraph, keep_basepoint: bool) -> LabeledGraph {
    g.core(keep_basepoint)
}

pub fn graph_rank(g: &LabeledGraph) -> usize {
    g.rank()
}

/// An edge of an [`AnnotatedGraph`]: a labeled edge carrying a word of the
/// source group.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AnnotatedEdge {
    pub src: usize,
    pub dst: usize,
    pub label: Letter,
    pub annotation: Word,
}

/// A based labeled graph whose edges also carry words of a source group
/// `F_m`, for a homomorphism `ψ: F_m → F_alphabet`. The invariant kept by
/// folding: every vertex `v` has a hidden element `c_v` (trivial at the
/// basepoint) such that each path `p` from the basepoint to `v` reads
/// `ψ(annotation(p)) · c_v`. In particular, closed basepoint loops read
/// exactly the image of their annotation.
#[derive(Clone, Debug)]
pub struct AnnotatedGraph {
    alphabet: usize,
    source_rank: usize,
    vertex_count: usize,
    basepoint: usize,
    edges: Vec<AnnotatedEdge>,
    /// Nontrivial elements of `ker ψ` met while folding.
    kernel: Vec<Word>,
}

impl AnnotatedGraph {
    /// Wedge of loops, loop `i` reading `images[i]` and annotated by the
    /// `i`-th source generator on its first edge.
    pub fn wedge(images: &[Word], alphabet: usize) -> AnnotatedGraph {
        let source_rank = images.len();
        let mut g = AnnotatedGraph {
            alphabet,
            source_rank,
            vertex_count: 1,
            basepoint: 0,
            edges: Vec::new(),
            kernel: Vec::new(),
        };
        for (i, w) in images.iter().enumerate() {
            let gen = Word::generator(i as Letter + 1, source_rank).expect("in range");
            if w.is_empty() {
                g.kernel.push(gen);
                continue;
            }
            g.add_path(0, 0, w.letters(), &gen);
        }
        g
    }

    /// Empty graph with a single basepoint.
    pub fn point(alphabet: usize, source_rank: usize) -> AnnotatedGraph {
        AnnotatedGraph {
            alphabet,
            source_rank,
            vertex_count: 1,
            basepoint: 0,
            edges: Vec::new(),
            kernel: Vec::new(),
        }
    }

    pub fn add_vertex(&mut self) -> usize {
        self.vertex_count += 1;
        self.vertex_count - 1
    }

    /// Adds a path reading `letters`; `annotation` goes on its first edge.
    pub fn add_path(&mut self, from: usize, to: usize, letters: &[Letter], annotation: &Word) {
        let mut cur = from;
        for (i, &l) in letters.iter().enumerate() {
            let next = if i + 1 == letters.len() {
                to
            } else {
                self.add_vertex()
            };
            let ann = if i == 0 {
                annotation.clone()
            } else {
                Word::empty(self.source_rank)
            };
            self.edges.push(if l > 0 {
                AnnotatedEdge {
                    src: cur,
                    dst: next,
                    label: l,
                    annotation: ann,
                }
            } else {
                AnnotatedEdge {
                    src: next,
                    dst: cur,
                    label: -l,
                    annotation: ann.inverse(),
                }
            });
            cur = next;
        }
    }

    pub fn basepoint(&self) -> usize {
        self.basepoint
    }

    pub fn edges(&self) -> &[AnnotatedEdge] {
        &self.edges
    }

    pub fn kernel(&self) -> &[Word] {
        &self.kernel
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    /// Folds while threading annotations through gauge changes. When two
    /// half-edges with equal label leave `v` towards `t1` and `t2`, the
    /// non-base endpoint is re-gauged so both carry the same annotation and
    /// then identified with the other.
    pub fn fold(mut self) -> AnnotatedGraph {
        let mut alive = vec![true; self.edges.len()];
        let mut incident: Vec<Vec<usize>> = vec![Vec::new(); self.vertex_count];
        for (i, e) in self.edges.iter().enumerate() {
            incident[e.src].push(i);
            if e.dst != e.src {
                incident[e.dst].push(i);
            }
        }
        let mut merged_into: Vec<Option<usize>> = vec![None; self.vertex_count];
        let mut work: Vec<usize> = (0..self.vertex_count).collect();

        // (edge, forward?) half-edges leaving v.
        let half_edges = |edges: &[AnnotatedEdge], alive: &[bool], inc: &[usize], v: usize| {
            let mut out = Vec::new();
            for &i in inc {
                if !alive[i] {
                    continue;
                }
                let e = &edges[i];
                if e.src == v {
                    out.push((e.label, i, true));
                }
                if e.dst == v {
                    out.push((-e.label, i, false));
                }
            }
            out
        };

        while let Some(v) = work.pop() {
            if merged_into[v].is_some() {
                continue;
            }
            loop {
                let mut out = half_edges(&self.edges, &alive, &incident[v], v);
                out.sort_by_key(|&(l, i, f)| (l, i, f));
                let Some(pos) = out.windows(2).position(|w| w[0].0 == w[1].0) else {
                    break;
                };
                let (o1, o2) = (out[pos], out[pos + 1]);
                let target = |e: &AnnotatedEdge, fwd: bool| if fwd { e.dst } else { e.src };
                let read = |e: &AnnotatedEdge, fwd: bool| {
                    if fwd {
                        e.annotation.clone()
                    } else {
                        e.annotation.inverse()
                    }
                };
                let (mut o1, mut o2) = (o1, o2);
                let (mut t1, mut t2) = (
                    target(&self.edges[o1.1], o1.2),
                    target(&self.edges[o2.1], o2.2),
                );
                if t1 != t2 && t2 == self.basepoint {
                    std::mem::swap(&mut o1, &mut o2);
                    std::mem::swap(&mut t1, &mut t2);
                }
                if t1 == t2 {
                    let p = read(&self.edges[o1.1], o1.2);
                    let q = read(&self.edges[o2.1], o2.2);
                    if p != q {
                        self.kernel.push(&p * &q.inverse());
                    }
                    alive[o2.1] = false;
                    continue;
                }
                // Gauge t2 by c = q⁻¹p so that o2 reads p, then identify.
                let p = read(&self.edges[o1.1], o1.2);
                let q = read(&self.edges[o2.1], o2.2);
                let c = &q.inverse() * &p;
                let c_inv = c.inverse();
                for &i in &incident[t2] {
                    if !alive[i] {
                        continue;
                    }
                    let e = &mut self.edges[i];
                    let mut a = e.annotation.clone();
                    if e.src == t2 {
                        a = &c_inv * &a;
                    }
                    if e.dst == t2 {
                        a = &a * &c;
                    }
                    e.annotation = a;
                }
                let moved = std::mem::take(&mut incident[t2]);
                for &i in &moved {
                    let e = &mut self.edges[i];
                    // Edges between t1 and t2 are already listed at t1.
                    let listed = e.src == t1 || e.dst == t1;
                    if e.src == t2 {
                        e.src = t1;
                    }
                    if e.dst == t2 {
                        e.dst = t1;
                    }
                    if !listed {
                        incident[t1].push(i);
                    }
                }
                merged_into[t2] = Some(t1);
                // o2 now duplicates o1 exactly.
                alive[o2.1] = false;
                work.push(t1);
            }
        }

        // Compact.
        let mut new_id = vec![usize::MAX; self.vertex_count];
        let mut count = 0;
        for v in 0..self.vertex_count {
            if merged_into[v].is_none() {
                new_id[v] = count;
                count += 1;
            }
        }
        let edges = self
            .edges
            .into_iter()
            .zip(alive)
            .filter(|(_, a)| *a)
            .map(|(e, _)| AnnotatedEdge {
                src: new_id[e.src],
                dst: new_id[e.dst],
                ..e
            })
            .collect();
        AnnotatedGraph {
            alphabet: self.alphabet,
            source_rank: self.source_rank,
            vertex_count: count,
            basepoint: new_id[self.basepoint],
            edges,
            kernel: self.kernel,
        }
    }

    /// Reads `w` from the basepoint of a folded graph. Returns the end vertex
    /// and the product of annotations along the way.
    pub fn read(&self, w: &Word) -> Option<(usize, Word)> {
        let mut adj: Vec<Vec<(Letter, usize, usize)>> = vec![Vec::new(); self.vertex_count];
        for (i, e) in self.edges.iter().enumerate() {
            adj[e.src].push((e.label, e.dst, i));
            adj[e.dst].push((-e.label, e.src, i));
        }
        let mut cur = self.basepoint;
        let mut ann = Vec::new();
        for &l in w.letters() {
            let &(_, t, i) = adj[cur].iter().find(|h| h.0 == l)?;
            let a = &self.edges[i].annotation;
            if l > 0 {
                for &x in a.letters() {
                    push_reduced(&mut ann, x);
                }
            } else {
                for &x in a.letters().iter().rev() {
                    push_reduced(&mut ann, -x);
                }
            }
            cur = t;
        }
        Some((cur, Word::from_reduced_unchecked(ann, self.source_rank)))
    }

    /// Preimage of `w` under `ψ` when `w` lies in the image subgroup.
    pub fn preimage(&self, w: &Word) -> Option<Word> {
        match self.read(w) {
            Some((end, ann)) if end == self.basepoint => Some(ann),
            _ => None,
        }
    }

    pub fn to_labeled(&self) -> LabeledGraph {
        LabeledGraph {
            alphabet: self.alphabet,
            vertex_count: self.vertex_count,
            edges: self
                .edges
                .iter()
                .map(|e| LabeledEdge {
                    src: e.src,
                    dst: e.dst,
                    label: e.label,
                })
                .collect(),
            basepoint: Some(self.basepoint),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(s: &str) -> Word {
        Word::parse(s, 2).unwrap()
    }

    #[test]
    fn whole_group_is_rose() {
        let g = subgroup_graph(&[w("a"), w("b")], 2).unwrap();
        assert!(g.is_isomorphic_based(&LabeledGraph::rose(2)));
        assert_eq!(g.rank(), 2);
    }

    #[test]
    fn conjugate_of_b() {
        let g = subgroup_graph(&[w("abA")], 2).unwrap();
        assert_eq!(g.vertex_count(), 2);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.rank(), 1);
        assert!(g.core(true).is_isomorphic_based(&g));
        let free = g.core(false);
        assert_eq!(free.vertex_count(), 1);
        assert_eq!(free.edges(), &[LabeledEdge { src: 0, dst: 0, label: 2 }]);
    }

    #[test]
    fn thue_morse_image() {
        let g = subgroup_graph(&[w("ab"), w("ba")], 2).unwrap();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.edge_count(), 4);
        assert_eq!(g.rank(), 2);
        assert!(g.membership(&w("abba")));
        assert!(g.membership(&w("BA")));
        assert!(!g.membership(&w("a")));
        assert!(!g.membership(&w("aa")));
    }

    #[test]
    fn fold_examples() {
        let two_a = LabeledGraph::wedge(&[w("a"), w("a")], 2).unwrap();
        let (f, stats) = two_a.fold_with_stats();
        assert_eq!(f.edge_count(), 1);
        assert_eq!(stats.steps, 1);

        let twice = LabeledGraph::wedge(&[w("ab"), w("ab")], 2).unwrap();
        let f = twice.fold();
        assert_eq!((f.vertex_count(), f.edge_count()), (2, 2));

        let g = subgroup_graph(&[w("ab"), w("ba")], 2).unwrap();
        assert!(g.fold().is_isomorphic_based(&g));
    }

    #[test]
    fn membership_powers() {
        let g = subgroup_graph(&[w("a")], 2).unwrap();
        assert!(g.membership(&Word::parse("aaaaa", 2).unwrap()));
        assert!(!g.membership(&w("b")));
        assert!(g.membership(&Word::empty(2)));
    }

    #[test]
    fn core_of_tree_is_empty() {
        let mut g = LabeledGraph::point(2);
        g.add_path(0, 3, &[1, 2, 1]);
        let g = LabeledGraph::new(2, 4, g.edges().to_vec(), None).unwrap();
        let c = g.core(false);
        assert_eq!(c.vertex_count(), 0);
        assert_eq!(c.edge_count(), 0);
        assert_eq!(LabeledGraph::rose(2).core(false).edge_count(), 2);
        assert_eq!(LabeledGraph::point(2).rank(), 0);
    }

    #[test]
    fn annotated_fold_preimages() {
        // ψ: x ↦ ab, y ↦ ba, z ↦ abba.
        let g = AnnotatedGraph::wedge(&[w("ab"), w("ba"), w("abba")], 2).fold();
        assert_eq!(g.vertex_count(), 3);
        assert_eq!(g.kernel().len(), 1);
        let k = &g.kernel()[0];
        let images = [w("ab"), w("ba"), w("abba")];
        let apply = |u: &Word| {
            let mut buf = Vec::new();
            for &l in u.letters() {
                let img = &images[l.unsigned_abs() as usize - 1];
                let img = if l > 0 { img.clone() } else { img.inverse() };
                for &x in img.letters() {
                    push_reduced(&mut buf, x);
                }
            }
            Word::from_reduced_unchecked(buf, 2)
        };
        assert!(apply(k).is_empty());
        for target in ["abba", "baab", "BAab", "ababab"] {
            let t = w(target);
            let pre = g.preimage(&t).unwrap();
            assert_eq!(apply(&pre), t);
        }
        assert!(g.preimage(&w("a")).is_none());
    }
}
