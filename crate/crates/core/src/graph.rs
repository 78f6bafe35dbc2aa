//! Finite graphs with an orientation-reversing involution on edges, and
//! edge-paths in them.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An oriented edge: edge index plus direction of traversal.
#[derive(Copy, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DirEdge(u32);

impl DirEdge {
    #[inline]
    pub fn new(edge: usize, forward: bool) -> DirEdge {
        DirEdge((edge as u32) << 1 | u32::from(!forward))
    }

    #[inline]
    pub fn forward(edge: usize) -> DirEdge {
        DirEdge::new(edge, true)
    }

    #[inline]
    pub fn edge(self) -> usize {
        (self.0 >> 1) as usize
    }

    #[inline]
    pub fn is_forward(self) -> bool {
        self.0 & 1 == 0
    }

    #[inline]
    pub fn rev(self) -> DirEdge {
        DirEdge(self.0 ^ 1)
    }

    /// Dense index in `0..2 * edge_count`.
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }

    #[inline]
    pub fn from_index(index: usize) -> DirEdge {
        DirEdge(index as u32)
    }

    /// Signed 1-based encoding: `+(e+1)` forward, `-(e+1)` reversed.
    pub fn signed(self) -> i32 {
        let e = self.edge() as i32 + 1;
        if self.is_forward() {
            e
        } else {
            -e
        }
    }

    pub fn from_signed(s: i32) -> Option<DirEdge> {
        if s == 0 {
            return None;
        }
        Some(DirEdge::new(s.unsigned_abs() as usize - 1, s > 0))
    }
}

impl fmt::Debug for DirEdge {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_forward() {
            write!(f, "e{}", self.edge())
        } else {
            write!(f, "ē{}", self.edge())
        }
    }
}

/// Topology of a finite graph: vertices `0..vertex_count`, edges with a
/// source and a target.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphRepr", into = "GraphRepr")]
pub struct Graph {
    vertex_count: usize,
    ends: Vec<(usize, usize)>,
    incidence: Vec<Vec<DirEdge>>,
}

#[derive(Serialize, Deserialize)]
struct GraphRepr {
    vertex_count: usize,
    ends: Vec<(usize, usize)>,
}

impl TryFrom<GraphRepr> for Graph {
    type Error = Error;
    fn try_from(r: GraphRepr) -> Result<Graph> {
        Graph::new(r.vertex_count, r.ends)
    }
}

impl From<Graph> for GraphRepr {
    fn from(g: Graph) -> GraphRepr {
        GraphRepr {
            vertex_count: g.vertex_count,
            ends: g.ends,
        }
    }
}

impl Graph {
    pub fn new(vertex_count: usize, ends: Vec<(usize, usize)>) -> Result<Graph> {
        for (i, &(s, t)) in ends.iter().enumerate() {
            if s >= vertex_count || t >= vertex_count {
                return Err(Error::InvalidGraph(format!(
                    "edge {i} has an endpoint outside 0..{vertex_count}"
                )));
            }
        }
        let mut g = Graph {
            vertex_count,
            ends,
            incidence: Vec::new(),
        };
        g.rebuild_incidence();
        Ok(g)
    }

    fn rebuild_incidence(&mut self) {
        let mut incidence = vec![Vec::new(); self.vertex_count];
        for (e, &(s, t)) in self.ends.iter().enumerate() {
            incidence[s].push(DirEdge::new(e, true));
            incidence[t].push(DirEdge::new(e, false));
        }
        self.incidence = incidence;
    }

    /// The rose `R_n`: one vertex, `n` loops.
    pub fn rose(n: usize) -> Graph {
        Graph::new(1, vec![(0, 0); n]).expect("rose is valid")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edge_count(&self) -> usize {
        self.ends.len()
    }

    pub fn ends(&self) -> &[(usize, usize)] {
        &self.ends
    }

    #[inline]
    pub fn src(&self, d: DirEdge) -> usize {
        let (s, t) = self.ends[d.edge()];
        if d.is_forward() {
            s
        } else {
            t
        }
    }

    #[inline]
    pub fn dst(&self, d: DirEdge) -> usize {
        self.src(d.rev())
    }

    /// Directions (outgoing oriented edges) at `v`. A loop contributes two.
    pub fn directions(&self, v: usize) -> &[DirEdge] {
        &self.incidence[v]
    }

    pub fn valence(&self, v: usize) -> usize {
        self.incidence[v].len()
    }

    pub fn dir_edges(&self) -> impl Iterator<Item = DirEdge> + '_ {
        (0..2 * self.edge_count()).map(DirEdge::from_index)
    }

    /// Connected component id of every vertex, plus the component count.
    pub fn components(&self) -> (Vec<usize>, usize) {
        let mut comp = vec![usize::MAX; self.vertex_count];
        let mut count = 0;
        for start in 0..self.vertex_count {
            if comp[start] != usize::MAX {
                continue;
            }
            comp[start] = count;
            let mut stack = vec![start];
            while let Some(v) = stack.pop() {
                for &d in &self.incidence[v] {
                    let w = self.dst(d);
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        stack.push(w);
                    }
                }
            }
            count += 1;
        }
        (comp, count)
    }

    pub fn is_connected(&self) -> bool {
        self.vertex_count > 0 && self.components().1 == 1
    }

    /// First Betti number `E - V + #components`.
    pub fn betti(&self) -> usize {
        let (_, c) = self.components();
        self.edge_count() + c - self.vertex_count
    }

    /// BFS spanning forest from `root` (then from every unreached vertex):
    /// for each vertex the oriented edge through which it was reached.
    pub fn spanning_tree(&self, root: usize) -> Vec<Option<DirEdge>> {
        let mut parent: Vec<Option<DirEdge>> = vec![None; self.vertex_count];
        let mut seen = vec![false; self.vertex_count];
        let order = std::iter::once(root).chain(0..self.vertex_count);
        for start in order {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut queue = std::collections::VecDeque::from([start]);
            while let Some(v) = queue.pop_front() {
                for &d in &self.incidence[v] {
                    let w = self.dst(d);
                    if !seen[w] {
                        seen[w] = true;
                        parent[w] = Some(d);
                        queue.push_back(w);
                    }
                }
            }
        }
        parent
    }

    /// Path from `root` to `v` along a spanning tree computed by
    /// [`Graph::spanning_tree`].
    pub fn tree_path(&self, parent: &[Option<DirEdge>], root: usize, v: usize) -> EdgePath {
        let mut edges = Vec::new();
        let mut cur = v;
        while let Some(d) = parent[cur] {
            edges.push(d);
            cur = self.src(d);
        }
        debug_assert_eq!(cur, root);
        edges.reverse();
        EdgePath { start: root, edges }
    }
}

/// A composable sequence of oriented edges starting at `start`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EdgePath {
    pub start: usize,
    pub edges: Vec<DirEdge>,
}

impl EdgePath {
    pub fn new(graph: &Graph, start: usize, edges: Vec<DirEdge>) -> Result<EdgePath> {
        if start >= graph.vertex_count() {
            return Err(Error::InvalidGraph(format!("vertex {start} out of range")));
        }
        let mut cur = start;
        for (i, &d) in edges.iter().enumerate() {
            if d.edge() >= graph.edge_count() || graph.src(d) != cur {
                return Err(Error::NotComposable { position: i });
            }
            cur = graph.dst(d);
        }
        Ok(EdgePath { start, edges })
    }

    pub fn trivial(start: usize) -> EdgePath {
        EdgePath {
            start,
            edges: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.edges.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edges.is_empty()
    }

    pub fn end(&self, graph: &Graph) -> usize {
        self.edges.last().map_or(self.start, |&d| graph.dst(d))
    }

    pub fn is_closed(&self, graph: &Graph) -> bool {
        self.end(graph) == self.start
    }

    pub fn reversed(&self, graph: &Graph) -> EdgePath {
        EdgePath {
            start: self.end(graph),
            edges: self.edges.iter().rev().map(|d| d.rev()).collect(),
        }
    }

    /// Concatenation without tightening; `other` must start where `self` ends.
    pub fn then(&self, other: &EdgePath) -> EdgePath {
        let mut edges = self.edges.clone();
        edges.extend_from_slice(&other.edges);
        EdgePath {
            start: self.start,
            edges,
        }
    }

    /// Removes backtracks `d · d̄` until none remain (homotopy rel endpoints).
    pub fn tightened(&self) -> EdgePath {
        let mut out: Vec<DirEdge> = Vec::with_capacity(self.edges.len());
        for &d in &self.edges {
            if out.last() == Some(&d.rev()) {
                out.pop();
            } else {
                out.push(d);
            }
        }
        EdgePath {
            start: self.start,
            edges: out,
        }
    }

    pub fn is_tight(&self) -> bool {
        self.edges.windows(2).all(|w| w[1] != w[0].rev())
    }

    /// First backtrack position, treating the path as cyclic.
    pub fn cyclic_backtrack(&self) -> Option<usize> {
        let n = self.edges.len();
        if let Some(i) = self.edges.windows(2).position(|w| w[1] == w[0].rev()) {
            return Some(i);
        }
        if n >= 2 && self.edges[0] == self.edges[n - 1].rev() {
            return Some(n - 1);
        }
        None
    }

    /// Tightens a closed path as a free loop: tighten, then strip matching
    /// first/last edges. The start vertex moves along the stripped tail.
    pub fn cyclically_tightened(&self, graph: &Graph) -> EdgePath {
        let t = self.tightened();
        let mut i = 0;
        let mut j = t.edges.len();
        while j >= i + 2 && t.edges[i] == t.edges[j - 1].rev() {
            i += 1;
            j -= 1;
        }
        let start = if i == 0 {
            t.start
        } else {
            graph.dst(t.edges[i - 1])
        };
        EdgePath {
            start,
            edges: t.edges[i..j].to_vec(),
        }
    }

    /// Rotation of a closed path so it starts after `k` edges.
    pub fn rotated(&self, graph: &Graph, k: usize) -> EdgePath {
        if self.edges.is_empty() {
            return self.clone();
        }
        let k = k % self.edges.len();
        let start = if k == 0 {
            self.start
        } else {
            graph.dst(self.edges[k - 1])
        };
        let mut edges = self.edges[k..].to_vec();
        edges.extend_from_slice(&self.edges[..k]);
        EdgePath { start, edges }
    }

    /// Canonical rotation of a cyclically tight loop (least edge sequence).
    pub fn canonical_cyclic(&self, graph: &Graph) -> EdgePath {
        let n = self.edges.len();
        (0..n.max(1))
            .map(|k| self.rotated(graph, k))
            .min_by(|a, b| a.edges.cmp(&b.edges))
            .unwrap_or_else(|| self.clone())
    }
}

/// Tightens a composable sequence of oriented edges.
pub fn tighten_path(graph: &Graph, start: usize, edges: Vec<DirEdge>) -> Result<EdgePath> {
    Ok(EdgePath::new(graph, start, edges)?.tightened())
}
